//! Bottom-up dynamic program over the dissection squares, in exact-flow and
//! rounded-flow mode, with grid-cell base cases and anchor routes.

use super::grid::{route_from, route_to, AnchorRoute, Cell, PortGraph, PortId};
use crate::dissection::{Dissection, PortalLayout};
use crate::error::{Error, Result};
use crate::flowgraph::rounding_set_from_alpha;
use crate::model::{MPathsInstance, Point};
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

/// (port, flow) pairs sorted by port id; zero flows are never stored.
pub type PortFlows = SmallVec<[(PortId, u32); 8]>;
/// Component label per entry of a `PortFlows`, canonical by first appearance.
pub type Labels = SmallVec<[u8; 8]>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowMode {
    Exact,
    Rounded { alpha: f64 },
}

impl FlowMode {
    pub fn alpha(&self) -> Option<f64> {
        match self {
            FlowMode::Exact => None,
            FlowMode::Rounded { alpha } => Some(*alpha),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpCaps {
    /// Arcs per cell configuration.
    pub arcs_per_cell: usize,
    /// Nonzero boundary ports per square configuration (twice this for the
    /// half-square joins).
    pub ports_per_square: usize,
    /// Entries kept per square; the cheapest survive and the rest are counted.
    pub beam: usize,
    /// Configurations per cell before the run is abandoned.
    pub cell_configs: usize,
    /// Largest total flow on one port in a cell; defaults to m.
    pub flow_cap: Option<u32>,
    /// Let paths pass through cells outside the region bounded by the
    /// anchors (never through cells carrying anchor routes).
    pub outside_cells: bool,
}

impl Default for DpCaps {
    fn default() -> Self {
        DpCaps {
            arcs_per_cell: 2,
            ports_per_square: 4,
            beam: 3_000,
            cell_configs: 200_000,
            flow_cap: None,
            outside_cells: false,
        }
    }
}

/// Counters describing how far the caps restricted the search.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DpStats {
    pub cells: usize,
    pub cell_configs: usize,
    pub squares: usize,
    pub max_entries: usize,
    pub total_entries: usize,
    /// Joined configurations discarded for exceeding the port cap.
    pub port_cap_drops: u64,
    /// Entries discarded by the beam.
    pub beam_drops: u64,
    /// Rounded-mode joins whose imbalance could not be raised away.
    pub unbalanced_drops: u64,
}

impl DpStats {
    /// True when nothing was thrown away beyond the modelling caps.
    pub fn complete(&self) -> bool {
        self.beam_drops == 0
    }
}

#[derive(Clone, Debug)]
pub struct Entry {
    pub ports: PortFlows,
    pub comp: Labels,
    pub cost: f64,
    back: [u32; 4],
}

/// Arcs realized inside one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellRealization {
    pub cell: Cell,
    /// (from port, to port, flow).
    pub arcs: Vec<(PortId, PortId, u32)>,
    /// Index of the arc whose one unit of flow bends through the cell centre.
    pub bend: Option<usize>,
}

/// The configurations chosen for one non-cell square and its children.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareRecord {
    pub level: u32,
    pub ll: Cell,
    pub side: i64,
    pub ports: PortFlows,
    pub child_ll: [Cell; 4],
    pub children: [PortFlows; 4],
}

#[derive(Clone, Debug)]
pub struct PseudoSolution {
    pub mode: FlowMode,
    pub cells: Vec<CellRealization>,
    /// Parents before children.
    pub squares: Vec<SquareRecord>,
    /// DP cost in grid units, anchor routes included.
    pub z_dp: f64,
    /// Flow value at the root (m′ in rounded mode, m in exact mode).
    pub flow_value: u32,
}

#[derive(Clone, Debug)]
pub struct DpRun {
    pub graph: PortGraph,
    pub m: u32,
    /// Snapped anchors on B1's boundary.
    pub a: PortId,
    pub b: PortId,
    pub route_a: AnchorRoute,
    pub route_b: AnchorRoute,
    /// Z0 in grid units.
    pub z0: f64,
    pub stats: DpStats,
    pub solution: PseudoSolution,
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
}

impl Rect {
    fn square(ll: Cell, side: i64) -> Self {
        Rect {
            x0: ll.0,
            y0: ll.1,
            x1: ll.0 + side,
            y1: ll.1 + side,
        }
    }
    fn contains(&self, c: Option<Cell>) -> bool {
        c.is_some_and(|c| c.0 >= self.x0 && c.0 < self.x1 && c.1 >= self.y0 && c.1 < self.y1)
    }
}

// ---------------------------------------------------------------------------
// Grid-cell base case

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct LocalPort {
    /// Position relative to the cell corner, in ticks.
    rel: (i64, i64),
    vertical: bool,
    is_in: bool,
    ck: i64,
}

#[derive(Clone, Debug)]
struct LocalConfig {
    arcs: SmallVec<[(u8, u8, u32); 4]>,
    bend: Option<u8>,
    cost: f64,
    /// (local port, flow) sorted by local port.
    ports: SmallVec<[(u8, u32); 8]>,
    /// Component per local port in `ports`.
    comp: Labels,
}

fn arcs_cross(ck: &[i64], a: (u8, u8), b: (u8, u8)) -> bool {
    let (p, q) = (ck[a.0 as usize], ck[a.1 as usize]);
    let (r, s) = (ck[b.0 as usize], ck[b.1 as usize]);
    if p == r || p == s || q == r || q == s {
        return false;
    }
    let (lo, hi) = (p.min(q), p.max(q));
    let inside = |v: i64| lo < v && v < hi;
    inside(r) != inside(s)
}

struct UnionFind(SmallVec<[u8; 16]>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n as u8).collect())
    }
    fn find(&mut self, mut x: u8) -> u8 {
        while self.0[x as usize] != x {
            let p = self.0[x as usize];
            self.0[x as usize] = self.0[p as usize];
            x = p;
        }
        x
    }
    fn union(&mut self, a: u8, b: u8) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi as usize] = lo;
        }
    }
}

/// Enumerates non-crossing arc sets of at most `max_arcs` in→out arcs with
/// flows from `flows`, keeping the cheapest realization per (port flows,
/// component partition).
fn enumerate_cell(
    ports: &[LocalPort],
    pos: &[Point],
    centre: Point,
    has_point: bool,
    flows: &[u32],
    fcap: u32,
    max_arcs: usize,
    cap: usize,
) -> Result<Vec<LocalConfig>> {
    let ck: Vec<i64> = ports.iter().map(|p| p.ck).collect();
    let mut cand: Vec<(u8, u8)> = Vec::new();
    for (u, pu) in ports.iter().enumerate() {
        for (v, pv) in ports.iter().enumerate() {
            if pu.is_in && !pv.is_in && pu.ck != pv.ck {
                cand.push((u as u8, v as u8));
            }
        }
    }
    let mut sets: Vec<SmallVec<[(u8, u8); 4]>> = Vec::new();
    let mut cur: SmallVec<[(u8, u8); 4]> = SmallVec::new();
    fn rec(
        i: usize,
        cand: &[(u8, u8)],
        ck: &[i64],
        cur: &mut SmallVec<[(u8, u8); 4]>,
        max: usize,
        out: &mut Vec<SmallVec<[(u8, u8); 4]>>,
    ) {
        out.push(cur.clone());
        if cur.len() == max {
            return;
        }
        for j in i..cand.len() {
            if cur.iter().all(|&a| !arcs_cross(ck, a, cand[j])) {
                cur.push(cand[j]);
                rec(j + 1, cand, ck, cur, max, out);
                cur.pop();
            }
        }
    }
    rec(0, &cand, &ck, &mut cur, max_arcs, &mut sets);

    let mut best: FxHashMap<(SmallVec<[(u8, u32); 8]>, Labels), usize> = FxHashMap::default();
    let mut out: Vec<LocalConfig> = Vec::new();
    let mut fl: SmallVec<[u32; 4]> = SmallVec::new();
    for set in &sets {
        if has_point && set.is_empty() {
            continue;
        }
        // Components do not depend on the flows.
        let mut uf = UnionFind::new(ports.len());
        for &(u, v) in set {
            uf.union(u, v);
        }
        let bend_cost = |k: usize| {
            let (u, v) = set[k];
            let (pu, pv) = (pos[u as usize], pos[v as usize]);
            pu.dist(centre) + centre.dist(pv) - pu.dist(pv)
        };
        let bend: Option<u8> = has_point.then(|| {
            (0..set.len())
                .min_by(|&x, &y| bend_cost(x).total_cmp(&bend_cost(y)))
                .unwrap() as u8
        });
        let bend_extra = bend.map_or(0.0, |k| bend_cost(k as usize));
        // Odometer over flow assignments.
        let k = set.len();
        let mut idx: SmallVec<[usize; 4]> = SmallVec::from_elem(0, k);
        loop {
            fl.clear();
            fl.extend(idx.iter().map(|&i| flows[i]));
            let mut sums = [0u32; 64];
            let mut ok = true;
            for (a, &(u, v)) in set.iter().enumerate() {
                sums[u as usize] += fl[a];
                sums[v as usize] += fl[a];
                if sums[u as usize] > fcap || sums[v as usize] > fcap {
                    ok = false;
                }
            }
            if ok {
                let mut pf: SmallVec<[(u8, u32); 8]> = SmallVec::new();
                for (p, &s) in sums.iter().enumerate().take(ports.len()) {
                    if s > 0 {
                        pf.push((p as u8, s));
                    }
                }
                let mut relabel: SmallVec<[(u8, u8); 8]> = SmallVec::new();
                let mut comp = Labels::new();
                for &(p, _) in &pf {
                    let r = uf.find(p);
                    let l = match relabel.iter().find(|x| x.0 == r) {
                        Some(x) => x.1,
                        None => {
                            let l = relabel.len() as u8;
                            relabel.push((r, l));
                            l
                        }
                    };
                    comp.push(l);
                }
                let cost: f64 = set
                    .iter()
                    .enumerate()
                    .map(|(a, &(u, v))| fl[a] as f64 * pos[u as usize].dist(pos[v as usize]))
                    .sum::<f64>()
                    + bend_extra;
                let key = (pf.clone(), comp.clone());
                match best.get(&key) {
                    Some(&i) => {
                        if cost < out[i].cost {
                            out[i].cost = cost;
                            out[i].arcs = set.iter().zip(fl.iter()).map(|(&(u, v), &f)| (u, v, f)).collect();
                            out[i].bend = bend;
                        }
                    }
                    None => {
                        if out.len() >= cap {
                            return Err(Error::cap("configurations per grid cell", cap as u64));
                        }
                        best.insert(key, out.len());
                        out.push(LocalConfig {
                            arcs: set.iter().zip(fl.iter()).map(|(&(u, v), &f)| (u, v, f)).collect(),
                            bend,
                            cost,
                            ports: pf,
                            comp,
                        });
                    }
                }
            }
            // Advance.
            let mut j = 0;
            while j < k {
                idx[j] += 1;
                if idx[j] < flows.len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == k {
                break;
            }
        }
    }
    Ok(out)
}

/// Cheapest way to serve a point at the centre of an empty cell with a single
/// arc p→q of the given flow; the base-case cost rule in isolation.
pub fn cell_arc_cost(p: Point, q: Point, flow: u32, centre: Option<Point>) -> f64 {
    let straight = flow as f64 * p.dist(q);
    match centre {
        Some(c) if flow > 0 => straight - p.dist(q) + p.dist(c) + c.dist(q),
        _ => straight,
    }
}

// ---------------------------------------------------------------------------
// Validity rules, stated independently of the join used by the DP.

/// A square configuration: nonzero port flows and component labels.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SquareConfig {
    pub ports: Vec<(PortId, u32)>,
    pub comp: Vec<u8>,
}

fn canonical(labels: &[u8]) -> Vec<u8> {
    let mut map: Vec<(u8, u8)> = Vec::new();
    labels
        .iter()
        .map(|&l| match map.iter().find(|x| x.0 == l) {
            Some(x) => x.1,
            None => {
                let n = map.len() as u8;
                map.push((l, n));
                n
            }
        })
        .collect()
}

fn check_valid(
    g: &PortGraph,
    level: u32,
    ll: Cell,
    cfg: &SquareConfig,
    children: &[SquareConfig; 4],
    alpha: Option<f64>,
) -> bool {
    let d = &g.d;
    let s_rect = Rect::square(ll, d.side(level));
    let kids = d.children(level, ll);
    let k_rects: Vec<Rect> = kids.iter().map(|&c| Rect::square(c, d.side(level + 1))).collect();
    let tol = 1e-9;
    let ratio_ok = |num: u32, den: u32, lo: f64, hi: f64| -> bool {
        let r = num as f64 / den as f64;
        r >= lo - tol && r <= hi + tol
    };
    let mut offsets = [0u8; 4];
    let mut total = 0u8;
    for (k, c) in children.iter().enumerate() {
        offsets[k] = total;
        total += c.comp.iter().map(|&l| l + 1).max().unwrap_or(0);
    }
    let mut uf = UnionFind::new(total as usize);
    let mut outer_label: Vec<(PortId, u8)> = Vec::new();
    for (k, c) in children.iter().enumerate() {
        for (i, &(p, f)) in c.ports.iter().enumerate() {
            let info = g.port(p);
            let other = if k_rects[k].contains(info.from) { info.to } else { info.from };
            let lab = offsets[k] + c.comp[i];
            if !s_rect.contains(other) {
                let Some(&(_, v)) = cfg.ports.iter().find(|x| x.0 == p) else {
                    return false;
                };
                let ok = match alpha {
                    None => v == f,
                    Some(a) => ratio_ok(v, f, 1.0, a * a),
                };
                if !ok {
                    return false;
                }
                outer_label.push((p, lab));
            } else {
                let Some(j) = k_rects.iter().position(|r| r.contains(other)) else {
                    return false;
                };
                let Some(jj) = children[j].ports.iter().position(|x| x.0 == p) else {
                    return false;
                };
                let fo = children[j].ports[jj].1;
                let ok = match alpha {
                    None => fo == f,
                    Some(a) => ratio_ok(f, fo, 1.0 / a, a),
                };
                if !ok {
                    return false;
                }
                uf.union(lab, offsets[j] + children[j].comp[jj]);
            }
        }
    }
    // Every port of S is carried by a child.
    if cfg.ports.len() != outer_label.len() {
        return false;
    }
    let mut has_port = vec![false; total as usize];
    for &(_, l) in &outer_label {
        let r = uf.find(l);
        has_port[r as usize] = true;
    }
    for l in 0..total {
        let r = uf.find(l);
        if !has_port[r as usize] {
            // Labels that no child actually uses are harmless.
            let used = children
                .iter()
                .enumerate()
                .any(|(k, c)| c.comp.iter().any(|&x| offsets[k] + x == l));
            if used {
                return false;
            }
        }
    }
    let mut labels: Vec<u8> = Vec::new();
    for &(p, _) in &cfg.ports {
        let l = outer_label.iter().find(|x| x.0 == p).map(|x| x.1).unwrap();
        labels.push(uf.find(l));
    }
    canonical(&labels) == canonical(&cfg.comp)
}

/// Validity of a square configuration against its children with exact flow
/// continuation.
pub fn check_valid_exact(
    g: &PortGraph,
    level: u32,
    ll: Cell,
    cfg: &SquareConfig,
    children: &[SquareConfig; 4],
) -> bool {
    check_valid(g, level, ll, cfg, children, None)
}

/// Validity with pseudo-consistent flows: inner ratios in [1/α, α], outer
/// ratios (square over child) in [1, α²].
pub fn check_valid_pseudo(
    g: &PortGraph,
    level: u32,
    ll: Cell,
    cfg: &SquareConfig,
    children: &[SquareConfig; 4],
    alpha: f64,
) -> bool {
    check_valid(g, level, ll, cfg, children, Some(alpha))
}

// ---------------------------------------------------------------------------
// The DP

struct CellTable {
    /// Signature id into the local cache, and local→global port map.
    sig: usize,
    map: Vec<PortId>,
    fixed: Option<CellRealization>,
}

type SigKey = (Vec<LocalPort>, bool, Vec<u32>, u32, usize);

/// Enumerated cell configurations keyed by local port geometry, point
/// presence, flow set and caps. Reusable across shifts of one instance.
#[derive(Default)]
pub struct CellCache {
    index: FxHashMap<SigKey, usize>,
    cfgs: Vec<Vec<LocalConfig>>,
}

impl CellCache {
    pub fn len(&self) -> usize {
        self.cfgs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cfgs.is_empty()
    }
}

struct Dp<'a> {
    g: &'a PortGraph,
    mode: FlowMode,
    caps: DpCaps,
    m: u32,
    stats: DpStats,
    cache: &'a mut CellCache,
    cell_tabs: Vec<CellTable>,
    /// tables[level][square index].
    tables: Vec<Vec<Vec<Entry>>>,
}

fn port_in_rect(g: &PortGraph, p: PortId, r: &Rect) -> bool {
    r.contains(g.port(p).to)
}

impl<'a> Dp<'a> {
    fn square_index(&self, level: u32, ll: Cell) -> usize {
        let side = self.g.d.side(level);
        let per = self.g.d.l0 / side;
        ((ll.0 / side) + (ll.1 / side) * per) as usize
    }

    fn ratio_ok(&self, f: u32, g: u32) -> bool {
        match self.mode {
            FlowMode::Exact => f == g,
            FlowMode::Rounded { alpha } => {
                let (f, g) = (f as f64, g as f64);
                f <= alpha * g + 1e-9 && g <= alpha * f + 1e-9
            }
        }
    }

    /// Joins two adjacent regions. Returns merged entries with back
    /// pointers (left index, right index) in back[0..2].
    fn join(&mut self, l: &[Entry], lr: Rect, r: &[Entry], rr: Rect, port_cap: usize) -> Vec<Entry> {
        let g = self.g;
        let exact = self.mode == FlowMode::Exact;
        let shared_l = |p: PortId| -> bool {
            let info = g.port(p);
            let other = if lr.contains(info.from) { info.to } else { info.from };
            rr.contains(other)
        };
        let shared_r = |p: PortId| -> bool {
            let info = g.port(p);
            let other = if rr.contains(info.from) { info.to } else { info.from };
            lr.contains(other)
        };
        type Key = SmallVec<[(PortId, u32); 8]>;
        let proj = |e: &Entry, sh: &dyn Fn(PortId) -> bool| -> Key {
            e.ports
                .iter()
                .filter(|x| sh(x.0))
                .map(|&(p, f)| (p, if exact { f } else { 0 }))
                .collect()
        };
        let mut buckets: FxHashMap<Key, Vec<u32>> = FxHashMap::default();
        for (j, e) in r.iter().enumerate() {
            buckets.entry(proj(e, &shared_r)).or_default().push(j as u32);
        }
        let mut out: Vec<Entry> = Vec::new();
        let mut seen: FxHashMap<(PortFlows, Labels), usize> = FxHashMap::default();
        for (i, le) in l.iter().enumerate() {
            let key = proj(le, &shared_l);
            let Some(bucket) = buckets.get(&key) else { continue };
            for &j in bucket {
                let re = &r[j as usize];
                match self.merge(le, re, &shared_l) {
                    Merge::Ok(ports, comp) => {
                        if ports.len() > port_cap {
                            self.stats.port_cap_drops += 1;
                            continue;
                        }
                        let cost = le.cost + re.cost;
                        let k = (ports, comp);
                        match seen.get(&k) {
                            Some(&x) => {
                                if cost < out[x].cost {
                                    out[x].cost = cost;
                                    out[x].back = [i as u32, j, 0, 0];
                                }
                            }
                            None => {
                                seen.insert(k.clone(), out.len());
                                out.push(Entry {
                                    ports: k.0,
                                    comp: k.1,
                                    cost,
                                    back: [i as u32, j, 0, 0],
                                });
                            }
                        }
                    }
                    Merge::Reject => {}
                }
            }
        }
        out
    }

    fn merge(&self, le: &Entry, re: &Entry, shared_l: &dyn Fn(PortId) -> bool) -> Merge {
        let nl = le.comp.iter().map(|&c| c + 1).max().unwrap_or(0);
        let nr = re.comp.iter().map(|&c| c + 1).max().unwrap_or(0);
        let mut uf = UnionFind::new((nl + nr) as usize);
        let mut rest: SmallVec<[(PortId, u32, u8); 12]> = SmallVec::new();
        let mut matched: SmallVec<[PortId; 8]> = SmallVec::new();
        for (i, &(p, f)) in le.ports.iter().enumerate() {
            if shared_l(p) {
                let Ok(j) = re.ports.binary_search_by_key(&p, |x| x.0) else {
                    return Merge::Reject;
                };
                if !self.ratio_ok(f, re.ports[j].1) {
                    return Merge::Reject;
                }
                uf.union(le.comp[i], nl + re.comp[j]);
                matched.push(p);
            } else {
                rest.push((p, f, le.comp[i]));
            }
        }
        for (j, &(p, f)) in re.ports.iter().enumerate() {
            if !matched.contains(&p) {
                rest.push((p, f, nl + re.comp[j]));
            }
        }
        rest.sort_unstable_by_key(|x| x.0);
        let mut has = [false; 64];
        for x in rest.iter_mut() {
            x.2 = uf.find(x.2);
            has[x.2 as usize] = true;
        }
        for l in 0..nl + nr {
            let r = uf.find(l);
            if !has[r as usize] {
                return Merge::Reject;
            }
        }
        let mut ports = PortFlows::new();
        let mut comp = Labels::new();
        let mut relabel: SmallVec<[(u8, u8); 8]> = SmallVec::new();
        for &(p, f, r) in &rest {
            let l = match relabel.iter().find(|x| x.0 == r) {
                Some(x) => x.1,
                None => {
                    let l = relabel.len() as u8;
                    relabel.push((r, l));
                    l
                }
            };
            ports.push((p, f));
            comp.push(l);
        }
        Merge::Ok(ports, comp)
    }

    /// Rounded mode: balances a square's in- and outflow by raising ports on
    /// the deficient side, each to at most ⌊α·f⌋.
    fn raise(&mut self, e: &Entry, rect: &Rect, out: &mut Vec<Entry>) {
        let g = self.g;
        let is_in: SmallVec<[bool; 8]> = e.ports.iter().map(|x| port_in_rect(g, x.0, rect)).collect();
        let tin: u64 = e.ports.iter().zip(&is_in).filter(|x| *x.1).map(|x| x.0 .1 as u64).sum();
        let tout: u64 = e.ports.iter().zip(&is_in).filter(|x| !*x.1).map(|x| x.0 .1 as u64).sum();
        if tin == tout {
            out.push(e.clone());
            return;
        }
        let FlowMode::Rounded { alpha } = self.mode else {
            // Exact flows always balance; anything else is a bug upstream.
            self.stats.unbalanced_drops += 1;
            return;
        };
        let low_side = tin < tout;
        let deficit = tin.abs_diff(tout);
        let idx: SmallVec<[usize; 8]> = (0..e.ports.len()).filter(|&i| is_in[i] == low_side).collect();
        let room: SmallVec<[u64; 8]> = idx
            .iter()
            .map(|&i| {
                let f = e.ports[i].1 as u64;
                ((alpha * f as f64 + 1e-9).floor() as u64).saturating_sub(f)
            })
            .collect();
        if room.iter().sum::<u64>() < deficit {
            self.stats.unbalanced_drops += 1;
            return;
        }
        // One canonical distribution: fill the deficient ports in port order.
        let mut ne = e.clone();
        let mut left = deficit;
        for (t, &i) in idx.iter().enumerate() {
            let add = room[t].min(left);
            ne.ports[i].1 += add as u32;
            left -= add;
        }
        out.push(ne);
    }

    fn build_cells(&mut self, minst: &MPathsInstance, a: PortId, b: PortId, ra: &AnchorRoute, rb: &AnchorRoute) -> Result<()> {
        let g = self.g;
        let d = &g.d;
        let l0 = d.l0;
        let mut point_cells = vec![false; (l0 * l0) as usize];
        for p in &minst.points {
            let c = d.cell_of(d.to_grid(*p));
            point_cells[(c.0 + c.1 * l0) as usize] = true;
        }
        let mut hops: FxHashMap<Cell, Vec<(PortId, PortId)>> = FxHashMap::default();
        for (c, u, v) in ra.hops(g).into_iter().chain(rb.hops(g)) {
            hops.entry(c).or_default().push((u, v));
        }
        let fcap = self.caps.flow_cap.unwrap_or(self.m).max(self.m);
        let flows: Vec<u32> = match self.mode {
            FlowMode::Exact => (1..=fcap).collect(),
            FlowMode::Rounded { alpha } => {
                let mut v: Vec<u32> = rounding_set_from_alpha(fcap as u64, alpha)
                    .values
                    .into_iter()
                    .filter(|&x| x >= 1 && x <= fcap as u64)
                    .map(|x| x as u32)
                    .collect();
                if !v.contains(&self.m) {
                    v.push(self.m);
                    v.sort_unstable();
                }
                v
            }
        };
        let side = d.side(d.rho);
        let per = l0 / side;
        self.tables[d.rho as usize] = vec![Vec::new(); (per * per) as usize];
        for cy in 0..l0 {
            for cx in 0..l0 {
                let c = (cx, cy);
                let si = self.square_index(d.rho, c);
                if hops.contains_key(&c) || !(self.caps.outside_cells || g.in_b1(Some(c))) {
                    let arcs: Vec<(PortId, PortId, u32)> =
                        hops.get(&c).map_or(Vec::new(), |h| h.iter().map(|&(u, v)| (u, v, self.m)).collect());
                    let entry = fixed_entry(g, &arcs);
                    self.cell_tabs.push(CellTable {
                        sig: usize::MAX,
                        map: Vec::new(),
                        fixed: Some(CellRealization { cell: c, arcs, bend: None }),
                    });
                    self.tables[d.rho as usize][si] = vec![entry];
                    continue;
                }
                let mut kept: Vec<(LocalPort, PortId, Point)> = Vec::new();
                for &p in g.cell_ports(c) {
                    let info = g.port(p);
                    let is_in = info.to == Some(c);
                    let other = if is_in { info.from } else { info.to };
                    // Cells carrying anchor routes are closed to everything
                    // but the route itself.
                    let open = other.is_some_and(|o| {
                        !hops.contains_key(&o) && (self.caps.outside_cells || g.in_b1(Some(o)))
                    });
                    if !(open || p == a || p == b) {
                        continue;
                    }
                    let pp = g.layout.p;
                    let (x, y) = if info.key.vertical {
                        (info.key.line * pp, info.key.pos)
                    } else {
                        (info.key.pos, info.key.line * pp)
                    };
                    kept.push((
                        LocalPort {
                            rel: (x - cx * pp, y - cy * pp),
                            vertical: info.key.vertical,
                            is_in,
                            ck: g.cyclic_key(c, p),
                        },
                        p,
                        info.pos,
                    ));
                }
                kept.sort_by(|x, y| {
                    (x.0.ck, x.0.vertical, x.0.is_in).cmp(&(y.0.ck, y.0.vertical, y.0.is_in))
                });
                if kept.len() > 60 {
                    return Err(Error::cap("ports per grid cell", 60));
                }
                let has_point = point_cells[(cx + cy * l0) as usize];
                let sig_key: SigKey = (
                    kept.iter().map(|k| k.0.clone()).collect(),
                    has_point,
                    flows.clone(),
                    fcap,
                    self.caps.arcs_per_cell,
                );
                let sig = match self.cache.index.get(&sig_key) {
                    Some(&s) => s,
                    None => {
                        let origin = Point::new(cx as f64, cy as f64);
                        let pos: Vec<Point> = kept
                            .iter()
                            .map(|k| Point::new(k.2.x - origin.x, k.2.y - origin.y))
                            .collect();
                        let cfgs = enumerate_cell(
                            &sig_key.0,
                            &pos,
                            Point::new(0.5, 0.5),
                            has_point,
                            &flows,
                            fcap,
                            self.caps.arcs_per_cell,
                            self.caps.cell_configs,
                        )?;
                        self.cache.cfgs.push(cfgs);
                        self.cache.index.insert(sig_key, self.cache.cfgs.len() - 1);
                        self.cache.cfgs.len() - 1
                    }
                };
                let map: Vec<PortId> = kept.iter().map(|k| k.1).collect();
                let entries: Vec<Entry> = self.cache.cfgs[sig]
                    .iter()
                    .enumerate()
                    .map(|(i, lc)| {
                        let mut pl: SmallVec<[(PortId, u32, u8); 8]> =
                            lc.ports.iter().zip(&lc.comp).map(|(&(lp, f), &cl)| (map[lp as usize], f, cl)).collect();
                        pl.sort_unstable_by_key(|x| x.0);
                        let labels: Vec<u8> = pl.iter().map(|x| x.2).collect();
                        Entry {
                            ports: pl.iter().map(|x| (x.0, x.1)).collect(),
                            comp: canonical(&labels).into_iter().collect(),
                            cost: lc.cost,
                            back: [i as u32, 0, 0, 0],
                        }
                    })
                    .collect();
                self.stats.cell_configs += entries.len();
                self.stats.cells += 1;
                self.cell_tabs.push(CellTable { sig, map, fixed: None });
                self.tables[d.rho as usize][si] = entries;
            }
        }
        Ok(())
    }

    fn build_square(&mut self, level: u32, ll: Cell) {
        let d = &self.g.d;
        let h = d.side(level + 1);
        let kids = d.children(level, ll);
        let t = |s: &Self, k: usize| -> Vec<Entry> {
            let idx = s.square_index(level + 1, kids[k]);
            s.tables[level as usize + 1][idx].clone()
        };
        let (sw, se, nw, ne) = (t(self, 0), t(self, 1), t(self, 2), t(self, 3));
        let r = |c: Cell, w: i64, hh: i64| Rect { x0: c.0, y0: c.1, x1: c.0 + w, y1: c.1 + hh };
        let cap2 = self.caps.ports_per_square * 2;
        let bottom = self.join(&sw, r(kids[0], h, h), &se, r(kids[1], h, h), cap2);
        let top = self.join(&nw, r(kids[2], h, h), &ne, r(kids[3], h, h), cap2);
        let full = self.join(
            &bottom,
            r(kids[0], 2 * h, h),
            &top,
            r(kids[2], 2 * h, h),
            self.caps.ports_per_square,
        );
        let rect = Rect::square(ll, 2 * h);
        let mut raised = Vec::with_capacity(full.len());
        for e in &full {
            let b = &bottom[e.back[0] as usize];
            let tp = &top[e.back[1] as usize];
            let mut e2 = e.clone();
            e2.back = [b.back[0], b.back[1], tp.back[0], tp.back[1]];
            self.raise(&e2, &rect, &mut raised);
        }
        let mut seen: FxHashMap<(PortFlows, Labels), usize> = FxHashMap::default();
        let mut entries: Vec<Entry> = Vec::new();
        for e in raised {
            let k = (e.ports.clone(), e.comp.clone());
            match seen.get(&k) {
                Some(&x) => {
                    if e.cost < entries[x].cost {
                        entries[x] = e;
                    }
                }
                None => {
                    seen.insert(k, entries.len());
                    entries.push(e);
                }
            }
        }
        if entries.len() > self.caps.beam {
            entries.sort_by(|a, b| a.cost.total_cmp(&b.cost));
            self.stats.beam_drops += (entries.len() - self.caps.beam) as u64;
            entries.truncate(self.caps.beam);
        }
        self.stats.squares += 1;
        self.stats.max_entries = self.stats.max_entries.max(entries.len());
        self.stats.total_entries += entries.len();
        let idx = self.square_index(level, ll);
        self.tables[level as usize][idx] = entries;
    }

    fn extract(&self, level: u32, ll: Cell, ei: usize, ps: &mut PseudoSolution) {
        let d = &self.g.d;
        let e = &self.tables[level as usize][self.square_index(level, ll)][ei];
        if level == d.rho {
            let ct = &self.cell_tabs[(ll.0 + ll.1 * d.l0) as usize];
            if let Some(f) = &ct.fixed {
                if !f.arcs.is_empty() {
                    ps.cells.push(f.clone());
                }
                return;
            }
            let lc = &self.cache.cfgs[ct.sig][e.back[0] as usize];
            if !lc.arcs.is_empty() {
                ps.cells.push(CellRealization {
                    cell: ll,
                    arcs: lc.arcs.iter().map(|&(u, v, f)| (ct.map[u as usize], ct.map[v as usize], f)).collect(),
                    bend: lc.bend.map(|b| b as usize),
                });
            }
            return;
        }
        let kids = d.children(level, ll);
        let mut children: [PortFlows; 4] = Default::default();
        for k in 0..4 {
            let ke = &self.tables[level as usize + 1][self.square_index(level + 1, kids[k])][e.back[k] as usize];
            children[k] = ke.ports.clone();
        }
        ps.squares.push(SquareRecord {
            level,
            ll,
            side: d.side(level),
            ports: e.ports.clone(),
            child_ll: kids,
            children,
        });
        for k in 0..4 {
            self.extract(level + 1, kids[k], e.back[k] as usize, ps);
        }
    }
}

enum Merge {
    Ok(PortFlows, Labels),
    Reject,
}

fn fixed_entry(g: &PortGraph, arcs: &[(PortId, PortId, u32)]) -> Entry {
    let mut flows: Vec<(PortId, u32)> = Vec::new();
    for &(u, v, f) in arcs {
        for p in [u, v] {
            match flows.iter_mut().find(|x| x.0 == p) {
                Some(x) => x.1 += f,
                None => flows.push((p, f)),
            }
        }
    }
    flows.sort_unstable_by_key(|x| x.0);
    let mut uf = UnionFind::new(flows.len());
    let pos = |p: PortId| flows.iter().position(|x| x.0 == p).unwrap() as u8;
    for &(u, v, _) in arcs {
        uf.union(pos(u), pos(v));
    }
    let labels: Vec<u8> = (0..flows.len() as u8).map(|i| uf.find(i)).collect();
    let cost = arcs
        .iter()
        .map(|&(u, v, f)| f as f64 * g.port(u).pos.dist(g.port(v).pos))
        .sum();
    Entry {
        ports: flows.into_iter().collect(),
        comp: canonical(&labels).into_iter().collect(),
        cost,
        back: [0; 4],
    }
}

/// Runs the DP on a fixed dissection and layout and returns the cheapest
/// level-0 configuration realized as a pseudo-solution (an exact solution in
/// exact mode).
pub fn run_dp(
    minst: &MPathsInstance,
    d: &Dissection,
    layout: &PortalLayout,
    mode: FlowMode,
    caps: &DpCaps,
) -> Result<DpRun> {
    run_dp_cached(minst, d, layout, mode, caps, &mut CellCache::default())
}

/// [`run_dp`] with a caller-owned cell cache.
pub fn run_dp_cached(
    minst: &MPathsInstance,
    d: &Dissection,
    layout: &PortalLayout,
    mode: FlowMode,
    caps: &DpCaps,
    cache: &mut CellCache,
) -> Result<DpRun> {
    if minst.m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    if let FlowMode::Rounded { alpha } = mode {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::Precondition(format!("alpha must exceed 1; got {alpha}")));
        }
    }
    let g = PortGraph::new(d, layout)?;
    let m = minst.m as u32;
    let a = g.snap_endpoint(d.to_grid(minst.a), true)?;
    let b = g.snap_endpoint(d.to_grid(minst.b), false)?;
    let route_a = route_to(&g, a)?;
    let route_b = route_from(&g, b)?;
    let a0 = route_a.ports[0];
    let b0 = *route_b.ports.last().unwrap();
    let z0 = m as f64 * (route_a.length + route_b.length);
    let mut dp = Dp {
        g: &g,
        mode,
        caps: caps.clone(),
        m,
        stats: DpStats::default(),
        cache,
        cell_tabs: Vec::new(),
        tables: (0..=d.rho)
            .map(|lv| {
                let per = d.l0 / d.side(lv);
                vec![Vec::new(); (per * per) as usize]
            })
            .collect(),
    };
    dp.build_cells(minst, a, b, &route_a, &route_b)?;
    for level in (0..d.rho).rev() {
        let side = d.side(level);
        let mut y = 0;
        while y < d.l0 {
            let mut x = 0;
            while x < d.l0 {
                dp.build_square(level, (x, y));
                x += side;
            }
            y += side;
        }
    }
    let vmax = match mode {
        FlowMode::Exact => m,
        FlowMode::Rounded { alpha } => (alpha.powi(d.rho as i32) * m as f64 + 1e-9).floor() as u32,
    };
    let root = &dp.tables[0][0];
    let mut best: Option<(usize, f64, u32)> = None;
    for (i, e) in root.iter().enumerate() {
        if e.ports.len() != 2 || e.comp[0] != e.comp[1] {
            continue;
        }
        let fa = e.ports.iter().find(|x| x.0 == a0).map(|x| x.1);
        let fb = e.ports.iter().find(|x| x.0 == b0).map(|x| x.1);
        let (Some(fa), Some(fb)) = (fa, fb) else { continue };
        if fa != fb || fa < m || fa > vmax {
            continue;
        }
        if best.is_none_or(|bst| e.cost < bst.1) {
            best = Some((i, e.cost, fa));
        }
    }
    let Some((ri, cost, v)) = best else {
        let st = &dp.stats;
        if st.beam_drops == 0 && st.port_cap_drops == 0 && st.unbalanced_drops == 0 {
            return Err(Error::Infeasible(
                "no portal-respecting a→b flow exists on this layout".into(),
            ));
        }
        return Err(Error::cap(
            format!(
                "no level-0 configuration survived the caps (beam drops {}, port-cap drops {})",
                dp.stats.beam_drops, dp.stats.port_cap_drops
            ),
            caps.beam as u64,
        ));
    };
    let mut ps = PseudoSolution {
        mode,
        cells: Vec::new(),
        squares: Vec::new(),
        z_dp: cost,
        flow_value: v,
    };
    dp.extract(0, (0, 0), ri, &mut ps);
    let stats = dp.stats.clone();
    drop(dp);
    Ok(DpRun {
        graph: g,
        m,
        a,
        b,
        route_a,
        route_b,
        z0,
        stats,
        solution: ps,
    })
}
