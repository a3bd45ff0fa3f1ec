//! Pseudo-solution repair, anchor-route removal, path-count reduction and
//! the mapping from the arc multiset back to point sequences.

use super::dp::{DpRun, PseudoSolution};
use super::grid::{Cell, PortGraph, PortId};
use crate::error::{Error, Result};
use crate::model::{MPathsInstance, MPathsSolution, Point};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Port(PortId),
    Centre(Cell),
    /// Repair point of the i-th square record.
    W(usize),
    A,
    B,
}

/// Directed arc multiset with node positions in grid units.
#[derive(Clone, Debug, Default)]
pub struct ArcGraph {
    pub arcs: BTreeMap<(Node, Node), u64>,
    pub pos: BTreeMap<Node, Point>,
}

impl ArcGraph {
    pub fn add(&mut self, u: Node, v: Node, k: u64) {
        if k > 0 && u != v {
            *self.arcs.entry((u, v)).or_default() += k;
        }
    }

    pub fn remove(&mut self, u: Node, v: Node, k: u64) -> Result<()> {
        if k == 0 || u == v {
            return Ok(());
        }
        let e = self
            .arcs
            .get_mut(&(u, v))
            .filter(|c| **c >= k)
            .ok_or_else(|| Error::Internal(format!("cannot remove {k} copies of {u:?}->{v:?}")))?;
        *e -= k;
        if *e == 0 {
            self.arcs.remove(&(u, v));
        }
        Ok(())
    }

    pub fn cost(&self) -> f64 {
        self.arcs
            .iter()
            .map(|(&(u, v), &k)| k as f64 * self.pos[&u].dist(self.pos[&v]))
            .sum()
    }

    /// out − in per node.
    pub fn imbalance(&self) -> BTreeMap<Node, i64> {
        let mut m = BTreeMap::new();
        for (&(u, v), &k) in &self.arcs {
            *m.entry(u).or_insert(0) += k as i64;
            *m.entry(v).or_insert(0) -= k as i64;
        }
        m.retain(|_, x| *x != 0);
        m
    }
}

fn cell_centre(c: Cell) -> Point {
    Point::new(c.0 as f64 + 0.5, c.1 as f64 + 0.5)
}

/// Arc multiset realized by the cell configurations of a pseudo-solution.
pub fn realize(g: &PortGraph, ps: &PseudoSolution) -> ArcGraph {
    let mut ag = ArcGraph::default();
    for cr in &ps.cells {
        for (i, &(u, v, f)) in cr.arcs.iter().enumerate() {
            ag.pos.insert(Node::Port(u), g.port(u).pos);
            ag.pos.insert(Node::Port(v), g.port(v).pos);
            if cr.bend == Some(i) {
                let c = Node::Centre(cr.cell);
                ag.pos.insert(c, cell_centre(cr.cell));
                ag.add(Node::Port(u), c, 1);
                ag.add(c, Node::Port(v), 1);
                ag.add(Node::Port(u), Node::Port(v), f as u64 - 1);
            } else {
                ag.add(Node::Port(u), Node::Port(v), f as u64);
            }
        }
    }
    ag
}

#[derive(Clone, Debug)]
pub struct RepairedSolution {
    pub graph: ArcGraph,
    /// m′: flow value after repair.
    pub paths: u32,
    /// Cost in grid units.
    pub cost: f64,
    /// Cost of the added repair arcs in grid units.
    pub added: f64,
}

/// Adds, for every square with flow mismatches, a point w near its centre
/// and arcs between w and the mismatched ports so that every port conserves
/// flow and outer ports carry the square's own values.
pub fn repair_pseudo_solution(g: &PortGraph, ps: &PseudoSolution) -> Result<RepairedSolution> {
    let mut ag = realize(g, ps);
    let base = ag.cost();
    for (si, sq) in ps.squares.iter().enumerate() {
        let inside = |c: Option<Cell>, ll: Cell, side: i64| {
            c.is_some_and(|c| c.0 >= ll.0 && c.0 < ll.0 + side && c.1 >= ll.1 && c.1 < ll.1 + side)
        };
        let half = sq.side / 2;
        // (port, into w?, amount)
        let mut fixes: Vec<(PortId, bool, u64)> = Vec::new();
        let mut inner: BTreeMap<PortId, (u32, u32)> = BTreeMap::new();
        for k in 0..4 {
            for &(p, f) in &sq.children[k] {
                let info = g.port(p);
                let other = if inside(info.from, sq.child_ll[k], half) { info.to } else { info.from };
                if !inside(other, sq.ll, sq.side) {
                    let v = sq
                        .ports
                        .iter()
                        .find(|x| x.0 == p)
                        .map(|x| x.1)
                        .ok_or_else(|| Error::Internal(format!("outer port {p} missing at square level")))?;
                    if v < f {
                        return Err(Error::Internal(format!("square flow {v} below child flow {f}")));
                    }
                    if v > f {
                        let is_in = inside(info.to, sq.ll, sq.side);
                        fixes.push((p, is_in, (v - f) as u64));
                    }
                } else {
                    let e = inner.entry(p).or_insert((0, 0));
                    if inside(info.from, sq.child_ll[k], half) {
                        e.0 = f;
                    } else {
                        e.1 = f;
                    }
                }
            }
        }
        for (&p, &(fx, fy)) in &inner {
            if fx > fy {
                fixes.push((p, true, (fx - fy) as u64));
            } else if fy > fx {
                fixes.push((p, false, (fy - fx) as u64));
            }
        }
        if fixes.is_empty() {
            continue;
        }
        let c = Point::new(
            sq.ll.0 as f64 + sq.side as f64 / 2.0,
            sq.ll.1 as f64 + sq.side as f64 / 2.0,
        );
        let t = g.port(fixes[0].0).pos;
        let dir = Point::new(t.x - c.x, t.y - c.y);
        let len = (dir.x * dir.x + dir.y * dir.y).sqrt();
        let off = sq.side as f64 / 100.0;
        let w = if len > 0.0 {
            Point::new(c.x + dir.x / len * off, c.y + dir.y / len * off)
        } else {
            c
        };
        ag.pos.insert(Node::W(si), w);
        for (p, into_w, k) in fixes {
            ag.pos.insert(Node::Port(p), g.port(p).pos);
            if into_w {
                ag.add(Node::Port(p), Node::W(si), k);
            } else {
                ag.add(Node::W(si), Node::Port(p), k);
            }
        }
    }
    let cost = ag.cost();
    Ok(RepairedSolution {
        graph: ag,
        paths: ps.flow_value,
        cost,
        added: cost - base,
    })
}

/// Hierholzer on a balanced multigraph; returns the circuit as a node
/// sequence starting and ending at `start`.
fn euler_circuit(arcs: &BTreeMap<(Node, Node), u64>, start: Node) -> Result<Vec<Node>> {
    let mut adj: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
    let mut total = 0u64;
    for (&(u, v), &k) in arcs {
        for _ in 0..k {
            adj.entry(u).or_default().push(v);
        }
        total += k;
    }
    // Pop from the back; reverse so the smallest target is used first.
    for l in adj.values_mut() {
        l.reverse();
    }
    let mut stack = vec![start];
    let mut circuit = Vec::new();
    while let Some(&u) = stack.last() {
        match adj.get_mut(&u).and_then(|l| l.pop()) {
            Some(v) => stack.push(v),
            None => {
                circuit.push(u);
                stack.pop();
            }
        }
    }
    circuit.reverse();
    if circuit.len() as u64 != total + 1 {
        return Err(Error::Internal("arc multiset is not connected".into()));
    }
    Ok(circuit)
}

/// Splits a graph with out−in = k at A and in−out = k at B into k trails
/// from A to B covering every arc.
pub fn decompose_trails(ag: &ArcGraph, k: u64) -> Result<Vec<Vec<Node>>> {
    let imb = ag.imbalance();
    let want: BTreeMap<Node, i64> = if k > 0 {
        [(Node::A, k as i64), (Node::B, -(k as i64))].into_iter().collect()
    } else {
        BTreeMap::new()
    };
    if imb != want {
        return Err(Error::Internal(format!("unexpected imbalance {imb:?}")));
    }
    let mut arcs = ag.arcs.clone();
    // Dummy B→A arcs close the trails into one circuit. They are tagged by
    // routing through a marker node.
    let marker = Node::W(usize::MAX);
    *arcs.entry((Node::B, marker)).or_default() += k;
    *arcs.entry((marker, Node::A)).or_default() += k;
    let circ = euler_circuit(&arcs, Node::A)?;
    // Rotate so that the circuit begins right after a marker visit.
    let mut trails = Vec::new();
    let mut cur: Vec<Node> = Vec::new();
    for &n in &circ[..circ.len() - 1] {
        if n == marker {
            trails.push(std::mem::take(&mut cur));
        } else {
            cur.push(n);
        }
    }
    // The circuit starts at A; the tail after the last marker joins the head.
    if !cur.is_empty() {
        if trails.is_empty() {
            return Err(Error::Internal("no trail boundary found".into()));
        }
        let mut head = cur;
        head.extend(trails.remove(0));
        trails.push(head);
    }
    for t in &trails {
        if t.first() != Some(&Node::A) || t.last() != Some(&Node::B) {
            return Err(Error::Internal("trail does not run from A to B".into()));
        }
    }
    Ok(trails)
}

/// Removes the weighted anchor routes, reconnects with reversed routes,
/// reduces m′ paths to m by reversing paths, and maps the trails to point
/// sequences.
pub fn strip_and_reduce(
    minst: &MPathsInstance,
    run: &DpRun,
    rs: &RepairedSolution,
) -> Result<MPathsSolution> {
    let g = &run.graph;
    let m = run.m as u64;
    let mp = rs.paths as u64;
    if mp < m {
        return Err(Error::Internal(format!("m′ = {mp} below m = {m}")));
    }
    let mut ag = rs.graph.clone();
    for r in [&run.route_a, &run.route_b] {
        for w in r.ports.windows(2) {
            let (u, v) = (Node::Port(w[0]), Node::Port(w[1]));
            ag.remove(u, v, m)?;
            ag.add(v, u, mp - m);
        }
        for &p in &r.ports {
            ag.pos.insert(Node::Port(p), g.port(p).pos);
        }
    }
    let d = &g.d;
    ag.pos.insert(Node::A, d.to_grid(minst.a));
    ag.pos.insert(Node::B, d.to_grid(minst.b));
    ag.add(Node::A, Node::Port(run.a), mp);
    ag.add(Node::Port(run.b), Node::B, mp);
    let trails = decompose_trails(&ag, mp)?;
    let excess = mp - m;
    let (flip, extra) = if excess % 2 == 0 {
        (excess / 2, false)
    } else {
        ((excess + 1) / 2, true)
    };
    let mut reduced = ArcGraph {
        arcs: BTreeMap::new(),
        pos: ag.pos.clone(),
    };
    for (i, t) in trails.iter().enumerate() {
        let rev = (i as u64) < flip;
        for w in t.windows(2) {
            if rev {
                reduced.add(w[1], w[0], 1);
            } else {
                reduced.add(w[0], w[1], 1);
            }
        }
    }
    if extra {
        reduced.add(Node::A, Node::B, 1);
    }
    let trails = decompose_trails(&reduced, m)?;
    map_points(minst, g, &trails)
}

/// Cost in grid units of the repaired graph once the anchor routes are
/// replaced by direct connections from a and b and m′ is reduced to m
/// (reversals do not change cost; an odd excess adds one a→b arc).
pub fn routed_cost(minst: &MPathsInstance, run: &DpRun, rs: &RepairedSolution) -> Result<f64> {
    let g = &run.graph;
    let d = &g.d;
    let m = run.m as f64;
    let mp = rs.paths as f64;
    let ra = run.route_a.length;
    let rb = run.route_b.length;
    let ends = mp * (d.to_grid(minst.a).dist(g.port(run.a).pos) + g.port(run.b).pos.dist(d.to_grid(minst.b)));
    let extra = if (rs.paths - run.m) % 2 == 1 {
        d.to_grid(minst.a).dist(d.to_grid(minst.b))
    } else {
        0.0
    };
    Ok(rs.cost - m * (ra + rb) + (mp - m) * (ra + rb) + ends + extra)
}

/// Visits each point at the first time a trail passes the centre of its
/// cell; points sharing a cell are ordered by nearest neighbour.
pub fn map_points(minst: &MPathsInstance, g: &PortGraph, trails: &[Vec<Node>]) -> Result<MPathsSolution> {
    let d = &g.d;
    let mut by_cell: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
    for (i, p) in minst.points.iter().enumerate() {
        by_cell.entry(d.cell_of(d.to_grid(*p))).or_default().push(i);
    }
    let mut paths = Vec::with_capacity(trails.len());
    for t in trails {
        let mut path = Vec::new();
        let mut last = minst.a;
        for n in t {
            if let Node::Centre(c) = n {
                if let Some(mut pts) = by_cell.remove(c) {
                    while !pts.is_empty() {
                        let (k, _) = pts
                            .iter()
                            .enumerate()
                            .min_by(|x, y| {
                                last.dist(minst.points[*x.1]).total_cmp(&last.dist(minst.points[*y.1]))
                            })
                            .unwrap();
                        let j = pts.swap_remove(k);
                        last = minst.points[j];
                        path.push(j);
                    }
                }
            }
        }
        paths.push(path);
    }
    if !by_cell.is_empty() {
        return Err(Error::Internal(format!("{} point cells never visited", by_cell.len())));
    }
    MPathsSolution::from_paths(minst, paths)
}
