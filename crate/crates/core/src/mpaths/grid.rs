//! Directed port graph over the grid cells of a dissection, endpoint
//! snapping and anchor routes.

use crate::dissection::{Dissection, PortalKey, PortalLayout};
use crate::error::{Error, Result};
use crate::model::Point;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

pub type PortId = u32;
pub type Cell = (i64, i64);

#[derive(Clone, Debug, PartialEq)]
pub struct PortInfo {
    pub key: PortalKey,
    /// Crossing direction, true for +x / +y.
    pub dir: bool,
    /// Position in grid units.
    pub pos: Point,
    /// Cell the crossing leaves (None outside B0).
    pub from: Option<Cell>,
    /// Cell the crossing enters (None outside B0).
    pub to: Option<Cell>,
}

#[derive(Clone, Debug)]
pub struct PortGraph {
    pub d: Dissection,
    pub layout: PortalLayout,
    pub ports: Vec<PortInfo>,
    index: HashMap<(PortalKey, bool), PortId>,
    /// Ports on the boundary of each cell, indexed by cx + cy·L0.
    cell_ports: Vec<Vec<PortId>>,
}

impl PortGraph {
    pub fn new(d: &Dissection, layout: &PortalLayout) -> Result<Self> {
        if d.rho != layout.rho {
            return Err(Error::Precondition("layout and dissection depth differ".into()));
        }
        let l0 = d.l0;
        let mut g = PortGraph {
            d: d.clone(),
            layout: layout.clone(),
            ports: Vec::new(),
            index: HashMap::new(),
            cell_ports: vec![Vec::new(); (l0 * l0) as usize],
        };
        for cy in 0..l0 {
            for cx in 0..l0 {
                let edges = [
                    (false, cy, cx),
                    (true, cx + 1, cy),
                    (false, cy + 1, cx),
                    (true, cx, cy),
                ];
                let mut list = Vec::new();
                for (vertical, line, start) in edges {
                    for key in layout.edge_portals(vertical, line, start) {
                        let (plus, minus) = layout.dirs(key);
                        for (ok, dir) in [(plus, true), (minus, false)] {
                            if ok {
                                list.push(g.port_id(key, dir, start));
                            }
                        }
                    }
                }
                g.cell_ports[(cx + cy * l0) as usize] = list;
            }
        }
        Ok(g)
    }

    fn port_id(&mut self, key: PortalKey, dir: bool, start: i64) -> PortId {
        if let Some(&id) = self.index.get(&(key, dir)) {
            return id;
        }
        let l0 = self.d.l0;
        let inside = |c: Cell| -> Option<Cell> {
            (c.0 >= 0 && c.1 >= 0 && c.0 < l0 && c.1 < l0).then_some(c)
        };
        let (before, after) = if key.vertical {
            ((key.line - 1, start), (key.line, start))
        } else {
            ((start, key.line - 1), (start, key.line))
        };
        let (from, to) = if dir { (before, after) } else { (after, before) };
        let id = self.ports.len() as PortId;
        self.ports.push(PortInfo {
            key,
            dir,
            pos: self.layout.point(key),
            from: inside(from),
            to: inside(to),
        });
        self.index.insert((key, dir), id);
        id
    }

    pub fn lookup(&self, key: PortalKey, dir: bool) -> Option<PortId> {
        self.index.get(&(key, dir)).copied()
    }

    pub fn cell_ports(&self, c: Cell) -> &[PortId] {
        &self.cell_ports[(c.0 + c.1 * self.d.l0) as usize]
    }

    pub fn port(&self, id: PortId) -> &PortInfo {
        &self.ports[id as usize]
    }

    pub fn in_b1(&self, c: Option<Cell>) -> bool {
        c.is_some_and(|c| self.d.cell_in_b1(c.0, c.1))
    }

    /// Position of a port along the boundary walk of cell c (counterclockwise
    /// from the lower-left corner), used for non-crossing tests.
    pub fn cyclic_key(&self, c: Cell, id: PortId) -> i64 {
        let p = self.layout.p;
        let info = self.port(id);
        let k = info.key;
        let (x0, y0) = (c.0 * p, c.1 * p);
        let (perim, edge) = if !k.vertical && k.line == c.1 {
            (k.pos - x0, 0)
        } else if k.vertical && k.line == c.0 + 1 {
            (p + (k.pos - y0), 1)
        } else if !k.vertical && k.line == c.1 + 1 {
            (2 * p + (p - (k.pos - x0)), 2)
        } else {
            (3 * p + (p - (k.pos - y0)), 3)
        };
        perim * 4 + edge
    }

    /// Ports on B1's boundary pointing into (or out of) B1.
    pub fn b1_boundary_ports(&self, into: bool) -> Vec<PortId> {
        let d = &self.d;
        self.layout
            .square_ports(d.shift, d.l1)
            .into_iter()
            .filter(|&(_, i)| i == into)
            .filter_map(|(k, i)| {
                // `i` is relative to B1; recover the crossing direction.
                let dir = if k.vertical {
                    (k.line == d.shift.0) == i
                } else {
                    (k.line == d.shift.1) == i
                };
                self.lookup(k, dir)
            })
            .collect()
    }

    /// Nearest B1-boundary port of the given orientation to a grid point.
    pub fn snap_endpoint(&self, g: Point, into: bool) -> Result<PortId> {
        self.b1_boundary_ports(into)
            .into_iter()
            .min_by(|&a, &b| {
                let da = self.port(a).pos.dist(g);
                let db = self.port(b).pos.dist(g);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .ok_or_else(|| Error::Infeasible("B1 has no boundary port in the needed direction".into()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorRoute {
    /// Port sequence; for the a-route it ends at the snapped a, for the
    /// b-route it starts at the snapped b.
    pub ports: Vec<PortId>,
    pub length: f64,
}

impl AnchorRoute {
    /// (cell, from-port, to-port) for every hop inside a cell.
    pub fn hops(&self, g: &PortGraph) -> Vec<(Cell, PortId, PortId)> {
        self.ports
            .windows(2)
            .map(|w| (g.port(w[0]).to.expect("hop inside B0"), w[0], w[1]))
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, PortId);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

fn dijkstra(
    g: &PortGraph,
    sources: &[PortId],
    is_target: impl Fn(PortId) -> bool,
) -> Option<(Vec<PortId>, f64)> {
    let n = g.ports.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![u32::MAX; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s as usize] = 0.0;
        heap.push(Item(0.0, s));
    }
    while let Some(Item(du, u)) = heap.pop() {
        if du > dist[u as usize] {
            continue;
        }
        if is_target(u) {
            let mut path = vec![u];
            let mut cur = u;
            while prev[cur as usize] != u32::MAX {
                cur = prev[cur as usize];
                path.push(cur);
            }
            path.reverse();
            return Some((path, du));
        }
        let info = g.port(u);
        let Some(c) = info.to else { continue };
        if g.in_b1(Some(c)) {
            continue;
        }
        for &v in g.cell_ports(c) {
            let vi = g.port(v);
            if vi.from != Some(c) || vi.key == info.key {
                continue;
            }
            let nd = du + info.pos.dist(vi.pos);
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                prev[v as usize] = u;
                heap.push(Item(nd, v));
            }
        }
    }
    None
}

/// Shortest route from a B0-boundary entry port to `a` through cells
/// outside B1.
pub fn route_to(g: &PortGraph, a: PortId) -> Result<AnchorRoute> {
    if g.port(a).from.is_none() {
        return Ok(AnchorRoute { ports: vec![a], length: 0.0 });
    }
    let sources: Vec<PortId> = (0..g.ports.len() as PortId)
        .filter(|&p| g.port(p).from.is_none())
        .collect();
    let (ports, length) = dijkstra(g, &sources, |p| p == a)
        .ok_or_else(|| Error::Infeasible("no anchor route reaches a".into()))?;
    Ok(AnchorRoute { ports, length })
}

/// Shortest route from `b` to a B0-boundary exit port through cells outside
/// B1.
pub fn route_from(g: &PortGraph, b: PortId) -> Result<AnchorRoute> {
    let (ports, length) = dijkstra(g, &[b], |p| g.port(p).to.is_none())
        .ok_or_else(|| Error::Infeasible("no anchor route leaves from b".into()))?;
    Ok(AnchorRoute { ports, length })
}
