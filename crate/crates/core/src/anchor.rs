//! Randomly shifted q×q grid with oriented anchor points, tour types and the
//! enumeration of per-type guesses for a bounded instance.

use crate::error::{Error, Result};
use crate::model::{polyline_length, Eps, Point};
use crate::rings::BoundedInstance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

pub type GridCell = (usize, usize);

/// Largest number of crossings allowed at one anchor by one tour.
pub const MAX_CROSSINGS: usize = 6;

/// An anchor on a grid line. `vertical` lines have constant x; `line` is the
/// line index 0..=q and `slot` the global index along the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AnchorId {
    pub vertical: bool,
    pub line: usize,
    pub slot: usize,
}

/// One crossing: the anchor and whether it goes toward increasing
/// coordinate (x for vertical lines, y for horizontal ones).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Crossing {
    pub anchor: AnchorId,
    pub positive: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Depot,
    Anchor(AnchorId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorGrid {
    pub q: usize,
    pub tau: f64,
    pub eps: Eps,
    /// Lower-left corner of the grid box.
    pub origin: Point,
    /// Random offset in [0,τ]² that placed the box.
    pub shift: (f64, f64),
    pub depot: Point,
    /// Outer radius D of the instance box.
    pub d_outer: f64,
}

impl AnchorGrid {
    /// Grid around `depot` covering [depot − D, depot + D]², with the box's
    /// lower-left corner at depot − (D,D) − shift.
    pub fn with_shift(depot: Point, d_outer: f64, q: usize, eps: Eps, shift: (f64, f64)) -> Result<Self> {
        if q < 2 {
            return Err(Error::Precondition(format!("grid size q must be at least 2; got {q}")));
        }
        if !(d_outer > 0.0) || !d_outer.is_finite() {
            return Err(Error::Precondition(format!("outer radius must be positive; got {d_outer}")));
        }
        let tau = 2.0 * d_outer / (q as f64 - 1.0);
        if !(0.0..=tau).contains(&shift.0) || !(0.0..=tau).contains(&shift.1) {
            return Err(Error::Precondition("grid shift outside [0,τ]²".into()));
        }
        Ok(AnchorGrid {
            q,
            tau,
            eps,
            origin: Point::new(depot.x - d_outer - shift.0, depot.y - d_outer - shift.1),
            shift,
            depot,
            d_outer,
        })
    }

    /// Anchors per cell side (1/ε).
    pub fn per_side(&self) -> usize {
        self.eps.inv() as usize
    }

    pub fn spacing(&self) -> f64 {
        self.eps.value() * self.tau
    }

    pub fn slots_per_line(&self) -> usize {
        self.q * self.per_side()
    }

    pub fn anchor_point(&self, a: AnchorId) -> Point {
        let along = self.spacing() * (a.slot as f64 + 0.5);
        let across = a.line as f64 * self.tau;
        if a.vertical {
            Point::new(self.origin.x + across, self.origin.y + along)
        } else {
            Point::new(self.origin.x + along, self.origin.y + across)
        }
    }

    /// Allowed crossing direction: alternates along every line, starting with
    /// the positive direction at slot 0.
    pub fn orientation(&self, a: AnchorId) -> bool {
        a.slot % 2 == 0
    }

    pub fn anchors(&self) -> Vec<AnchorId> {
        let mut out = Vec::new();
        for vertical in [true, false] {
            for line in 0..=self.q {
                for slot in 0..self.slots_per_line() {
                    out.push(AnchorId { vertical, line, slot });
                }
            }
        }
        out
    }

    /// The 4/ε anchors on the boundary of a cell.
    pub fn cell_anchors(&self, c: GridCell) -> Vec<AnchorId> {
        let k = self.per_side();
        let mut out = Vec::with_capacity(4 * k);
        for s in 0..k {
            out.push(AnchorId { vertical: false, line: c.1, slot: c.0 * k + s });
            out.push(AnchorId { vertical: false, line: c.1 + 1, slot: c.0 * k + s });
            out.push(AnchorId { vertical: true, line: c.0, slot: c.1 * k + s });
            out.push(AnchorId { vertical: true, line: c.0 + 1, slot: c.1 * k + s });
        }
        out
    }

    /// Fractional grid coordinates.
    fn local(&self, p: Point) -> (f64, f64) {
        ((p.x - self.origin.x) / self.tau, (p.y - self.origin.y) / self.tau)
    }

    pub fn cell_of(&self, p: Point) -> GridCell {
        let (u, v) = self.local(p);
        let clamp = |t: f64| (t.floor().max(0.0) as usize).min(self.q - 1);
        (clamp(u), clamp(v))
    }

    pub fn depot_cell(&self) -> GridCell {
        self.cell_of(self.depot)
    }

    pub fn covers(&self, p: Point) -> bool {
        let (u, v) = self.local(p);
        let q = self.q as f64;
        (-1e-9..=q + 1e-9).contains(&u) && (-1e-9..=q + 1e-9).contains(&v)
    }
}

/// Grid for a bounded instance: τ = 2D/(q−1) and a seeded shift in [0,τ]².
pub fn place_grid(binst: &BoundedInstance, q: usize, rng_seed: u64) -> Result<AnchorGrid> {
    if q < 2 {
        return Err(Error::Precondition(format!("grid size q must be at least 2; got {q}")));
    }
    let tau = 2.0 * binst.d_outer / (q as f64 - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let shift = (rng.gen_range(0.0..=tau), rng.gen_range(0.0..=tau));
    AnchorGrid::with_shift(binst.instance.depot, binst.d_outer, q, binst.instance.eps, shift)
}

/// A cell change along a polyline: from `from` into `to` at `at`.
#[derive(Clone, Copy, Debug)]
struct Step {
    from: GridCell,
    to: GridCell,
    at: Point,
}

/// Cell changes along a polyline in travel order. A pass through a grid
/// intersection is split into a horizontal-line crossing followed by a
/// vertical one.
fn cell_steps(g: &AnchorGrid, poly: &[Point]) -> Vec<Step> {
    let mut steps = Vec::new();
    let mut cur: Option<GridCell> = None;
    for w in poly.windows(2) {
        let (u, v) = (w[0], w[1]);
        let (ux, uy) = g.local(u);
        let (vx, vy) = g.local(v);
        let mut ts = vec![0.0, 1.0];
        for (a, b) in [(ux, vx), (uy, vy)] {
            if (b - a).abs() > 1e-15 {
                let (lo, hi) = (a.min(b), a.max(b));
                let mut k = lo.ceil();
                while k <= hi {
                    let t = (k - a) / (b - a);
                    if t > 0.0 && t < 1.0 {
                        ts.push(t);
                    }
                    k += 1.0;
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        for k in 0..ts.len() - 1 {
            let mid = u.lerp(v, 0.5 * (ts[k] + ts[k + 1]));
            let c = g.cell_of(mid);
            if let Some(p) = cur {
                if p != c {
                    let at = u.lerp(v, ts[k]);
                    if p.0 != c.0 && p.1 != c.1 {
                        let corner = (p.0, c.1);
                        steps.push(Step { from: p, to: corner, at });
                        steps.push(Step { from: corner, to: c, at });
                    } else {
                        steps.push(Step { from: p, to: c, at });
                    }
                }
            }
            cur = Some(c);
        }
    }
    steps
}

/// The line crossed by a step between two edge-adjacent cells, the cell
/// index along that line, and the direction.
fn step_line(s: &Step) -> (bool, usize, usize, bool) {
    if s.from.0 != s.to.0 {
        let line = s.from.0.max(s.to.0);
        (true, line, s.from.1, s.to.0 > s.from.0)
    } else {
        let line = s.from.1.max(s.to.1);
        (false, line, s.from.0, s.to.1 > s.from.1)
    }
}

/// The ordered anchor crossings of a tour and the (entry, exit) pairs it
/// induces in every cell it visits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TourType {
    pub crossings: Vec<Crossing>,
    /// Per cell, the (entry, exit) pairs in travel order. The depot cell
    /// always appears: the tour starts and ends at the depot.
    pub pairs: BTreeMap<GridCell, Vec<(Endpoint, Endpoint)>>,
    /// Travel order of the pieces as (cell, index into that cell's pairs).
    pub order: Vec<(GridCell, usize)>,
}

impl TourType {
    /// Builds the pair lists from a crossing sequence.
    pub fn from_crossings(g: &AnchorGrid, crossings: Vec<Crossing>) -> Result<Self> {
        let mut pairs: BTreeMap<GridCell, Vec<(Endpoint, Endpoint)>> = BTreeMap::new();
        let mut cell = g.depot_cell();
        let mut from = Endpoint::Depot;
        let mut order = Vec::with_capacity(crossings.len() + 1);
        for c in &crossings {
            let a = c.anchor;
            let k = g.per_side();
            let along = a.slot / k;
            // Cells on each side of the anchor.
            let (neg, pos) = if a.vertical {
                (a.line.checked_sub(1).map(|x| (x, along)), (a.line < g.q).then_some((a.line, along)))
            } else {
                (a.line.checked_sub(1).map(|y| (along, y)), (a.line < g.q).then_some((along, a.line)))
            };
            let (src, dst) = if c.positive { (neg, pos) } else { (pos, neg) };
            if src != Some(cell) {
                return Err(Error::Precondition(format!(
                    "crossing at {a:?} does not leave the current cell {cell:?}"
                )));
            }
            let Some(dst) = dst else {
                return Err(Error::Precondition("crossing leaves the grid".into()));
            };
            let list = pairs.entry(cell).or_default();
            list.push((from, Endpoint::Anchor(a)));
            order.push((cell, list.len() - 1));
            from = Endpoint::Anchor(a);
            cell = dst;
        }
        if cell != g.depot_cell() {
            return Err(Error::Precondition("crossing sequence does not return to the depot cell".into()));
        }
        let list = pairs.entry(cell).or_default();
        list.push((from, Endpoint::Depot));
        order.push((cell, list.len() - 1));
        Ok(TourType { crossings, pairs, order })
    }

    pub fn cells(&self) -> impl Iterator<Item = GridCell> + '_ {
        self.pairs.keys().copied()
    }

    pub fn crosses(&self, c: GridCell) -> bool {
        self.pairs.contains_key(&c)
    }

    pub fn npairs(&self, c: GridCell) -> usize {
        self.pairs.get(&c).map_or(0, Vec::len)
    }

    /// Crossings per anchor.
    pub fn crossing_counts(&self) -> BTreeMap<AnchorId, usize> {
        let mut m = BTreeMap::new();
        for c in &self.crossings {
            *m.entry(c.anchor).or_insert(0) += 1;
        }
        m
    }

    pub fn max_crossings(&self) -> usize {
        self.crossing_counts().values().copied().max().unwrap_or(0)
    }
}

pub fn endpoint_point(g: &AnchorGrid, e: Endpoint) -> Point {
    match e {
        Endpoint::Depot => g.depot,
        Endpoint::Anchor(a) => g.anchor_point(a),
    }
}

/// Type of a closed tour polyline (depot first and last) that crosses grid
/// lines only at anchors and only in their orientation.
pub fn anchor_sequence_of_tour(g: &AnchorGrid, poly: &[Point]) -> Result<TourType> {
    let tol = 1e-9 * g.tau.max(1.0);
    let mut crossings = Vec::new();
    for s in cell_steps(g, poly) {
        let (vertical, line, along, positive) = step_line(&s);
        let k = g.per_side();
        let coord = if vertical { s.at.y - g.origin.y } else { s.at.x - g.origin.x };
        let slot_f = coord / g.spacing() - 0.5;
        let slot = slot_f.round();
        let a = AnchorId { vertical, line, slot: slot.max(0.0) as usize };
        let on_anchor = slot >= 0.0
            && a.slot / k == along
            && g.anchor_point(a).dist(s.at) <= tol;
        if !on_anchor {
            return Err(Error::Precondition(format!(
                "tour crosses a grid line at ({:.6}, {:.6}), not at an anchor",
                s.at.x, s.at.y
            )));
        }
        if g.orientation(a) != positive {
            return Err(Error::Precondition(format!("tour crosses anchor {a:?} against its orientation")));
        }
        crossings.push(Crossing { anchor: a, positive });
    }
    TourType::from_crossings(g, crossings)
}

/// Result of making one tour anchor respecting.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchoredTour {
    pub polyline: Vec<Point>,
    pub tour_type: TourType,
    /// Number of grid-line crossings moved to anchors.
    pub crossings: usize,
    /// Length added by the rerouting.
    pub detour: f64,
}

/// Moves every grid-line crossing of a closed polyline to the nearest anchor
/// on the same cell side whose orientation matches the crossing direction.
/// Among equally suitable anchors, ones already crossed six times are
/// avoided.
pub fn make_anchor_respecting(g: &AnchorGrid, poly: &[Point]) -> Result<AnchoredTour> {
    let mut out = Vec::with_capacity(poly.len() * 2);
    let mut counts: BTreeMap<AnchorId, usize> = BTreeMap::new();
    let mut crossings = Vec::new();
    let k = g.per_side();
    for (i, w) in poly.windows(2).enumerate() {
        if i == 0 {
            out.push(w[0]);
        }
        for s in cell_steps(g, w) {
            let (vertical, line, along, positive) = step_line(&s);
            let coord = if vertical { s.at.y - g.origin.y } else { s.at.x - g.origin.x };
            let mut cands: Vec<AnchorId> = (along * k..(along + 1) * k)
                .map(|slot| AnchorId { vertical, line, slot })
                .filter(|&a| g.orientation(a) == positive)
                .collect();
            let dist = |a: &AnchorId| (g.spacing() * (a.slot as f64 + 0.5) - coord).abs();
            cands.sort_by(|a, b| dist(a).total_cmp(&dist(b)).then(a.slot.cmp(&b.slot)));
            let a = cands
                .iter()
                .copied()
                .find(|a| counts.get(a).copied().unwrap_or(0) < MAX_CROSSINGS)
                .unwrap_or(cands[0]);
            *counts.entry(a).or_insert(0) += 1;
            crossings.push(Crossing { anchor: a, positive });
            out.push(g.anchor_point(a));
        }
        out.push(w[1]);
    }
    let tour_type = TourType::from_crossings(g, crossings)?;
    let detour = polyline_length(&out) - polyline_length(poly);
    Ok(AnchoredTour {
        crossings: tour_type.crossings.len(),
        polyline: out,
        tour_type,
        detour,
    })
}

/// Per type: tour count m^(t) and per-cell point counts n^(t,σ).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GuessVector {
    pub m: Vec<usize>,
    /// n[t] maps cells to counts; cells with zero count are omitted.
    pub n: Vec<BTreeMap<GridCell, usize>>,
}

impl GuessVector {
    pub fn count(&self, t: usize, c: GridCell) -> usize {
        self.n[t].get(&c).copied().unwrap_or(0)
    }
}

/// Point counts per occupied cell.
pub fn cell_counts(g: &AnchorGrid, points: &[Point]) -> BTreeMap<GridCell, usize> {
    let mut m = BTreeMap::new();
    for p in points {
        *m.entry(g.cell_of(*p)).or_insert(0) += 1;
    }
    m
}

/// Checks restrictions (a)–(d) for a guess.
pub fn guess_is_valid(
    guess: &GuessVector,
    types: &[TourType],
    counts: &BTreeMap<GridCell, usize>,
    n: usize,
    c: usize,
) -> bool {
    if guess.m.len() != types.len() || guess.n.len() != types.len() {
        return false;
    }
    if guess.m.iter().sum::<usize>() > n {
        return false;
    }
    for (t, ty) in types.iter().enumerate() {
        if guess.n[t].iter().any(|(cell, &k)| k > 0 && !ty.crosses(*cell)) {
            return false;
        }
        if guess.n[t].values().sum::<usize>() > c * guess.m[t] {
            return false;
        }
    }
    let mut cells: BTreeSet<GridCell> = counts.keys().copied().collect();
    for nt in &guess.n {
        cells.extend(nt.keys().copied());
    }
    cells.into_iter().all(|cell| {
        let total: usize = (0..types.len()).map(|t| guess.count(t, cell)).sum();
        total == counts.get(&cell).copied().unwrap_or(0)
    })
}

/// All guess vectors satisfying (a)–(d), in a deterministic order. Fails
/// with a cap error once more than `cap` vectors would be produced.
pub fn enumerate_guesses(
    binst: &BoundedInstance,
    grid: &AnchorGrid,
    types: &[TourType],
    cap: usize,
) -> Result<Vec<GuessVector>> {
    match enumerate_guesses_capped(binst, grid, types, cap) {
        (_, true) => Err(Error::cap("guess vectors", cap as u64)),
        (v, false) => Ok(v),
    }
}

/// Like [`enumerate_guesses`] but returns the first `cap` vectors and
/// whether the list was cut short.
pub fn enumerate_guesses_capped(
    binst: &BoundedInstance,
    grid: &AnchorGrid,
    types: &[TourType],
    cap: usize,
) -> (Vec<GuessVector>, bool) {
    let pts = &binst.instance.points;
    let n = pts.len();
    let c = binst.instance.capacity;
    let counts = cell_counts(grid, pts);
    let cells: Vec<(GridCell, usize)> = counts.iter().map(|(k, v)| (*k, *v)).collect();
    // Distributions of each occupied cell's points over the types crossing it.
    let mut per_cell: Vec<Vec<Vec<usize>>> = Vec::new();
    for &(cell, cnt) in &cells {
        let crossing: Vec<usize> = (0..types.len()).filter(|&t| types[t].crosses(cell)).collect();
        let mut dists = Vec::new();
        compositions(cnt, crossing.len(), &mut Vec::new(), &mut |comp| {
            let mut v = vec![0; types.len()];
            for (i, &t) in crossing.iter().enumerate() {
                v[t] = comp[i];
            }
            dists.push(v);
        });
        if dists.is_empty() {
            return (Vec::new(), false);
        }
        per_cell.push(dists);
    }
    let mut out = Vec::new();
    let mut ms = Vec::new();
    let mut truncated = false;
    bounded_vectors(types.len(), n, &mut Vec::new(), &mut |m| ms.push(m.to_vec()));
    let mut pick = vec![0usize; per_cell.len()];
    for m in &ms {
        // Odometer over the cell distributions.
        pick.iter_mut().for_each(|x| *x = 0);
        loop {
            let mut load = vec![0usize; types.len()];
            for (ci, &p) in pick.iter().enumerate() {
                for t in 0..types.len() {
                    load[t] += per_cell[ci][p][t];
                }
            }
            if (0..types.len()).all(|t| load[t] <= c * m[t]) {
                if out.len() >= cap {
                    truncated = true;
                    break;
                }
                let mut nv = vec![BTreeMap::new(); types.len()];
                for (ci, &p) in pick.iter().enumerate() {
                    for t in 0..types.len() {
                        if per_cell[ci][p][t] > 0 {
                            nv[t].insert(cells[ci].0, per_cell[ci][p][t]);
                        }
                    }
                }
                out.push(GuessVector { m: m.clone(), n: nv });
            }
            let mut i = 0;
            while i < pick.len() {
                pick[i] += 1;
                if pick[i] < per_cell[i].len() {
                    break;
                }
                pick[i] = 0;
                i += 1;
            }
            if i == pick.len() {
                break;
            }
        }
        if truncated {
            break;
        }
    }
    (out, truncated)
}

/// Compositions of `total` into `parts` nonnegative parts.
pub(crate) fn compositions(total: usize, parts: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if parts == 0 {
        if total == 0 {
            f(cur);
        }
        return;
    }
    if parts == 1 {
        cur.push(total);
        f(cur);
        cur.pop();
        return;
    }
    for x in 0..=total {
        cur.push(x);
        compositions(total - x, parts - 1, cur, f);
        cur.pop();
    }
}

/// Vectors of `len` nonnegative entries with sum at most `max_sum`.
fn bounded_vectors(len: usize, max_sum: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if cur.len() == len {
        f(cur);
        return;
    }
    let used: usize = cur.iter().sum();
    for x in 0..=max_sum - used {
        cur.push(x);
        bounded_vectors(len, max_sum, cur, f);
        cur.pop();
    }
}

/// Refined guesses for one small type: per-tour point counts in every cell
/// the type visits, each tour holding at most c points and every cell's
/// counts summing to n^(t,σ). Tours are interchangeable, so only
/// lexicographically non-increasing tour vectors are listed.
pub fn refine_small_type(
    guess: &GuessVector,
    t: usize,
    c: usize,
    cap: usize,
) -> Result<Vec<Vec<BTreeMap<GridCell, usize>>>> {
    let m = guess.m[t];
    let cells: Vec<(GridCell, usize)> = guess.n[t].iter().map(|(k, v)| (*k, *v)).collect();
    let mut out = Vec::new();
    // per_tour[i][ci]
    let mut per_tour = vec![vec![0usize; cells.len()]; m];
    fn rec(
        ci: usize,
        cells: &[(GridCell, usize)],
        per_tour: &mut Vec<Vec<usize>>,
        c: usize,
        cap: usize,
        out: &mut Vec<Vec<BTreeMap<GridCell, usize>>>,
    ) -> Result<()> {
        let m = per_tour.len();
        if ci == cells.len() {
            for i in 1..m {
                if per_tour[i] > per_tour[i - 1] {
                    return Ok(());
                }
            }
            if out.len() >= cap {
                return Err(Error::cap("refined small-type guesses", cap as u64));
            }
            out.push(
                per_tour
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|x| *x.1 > 0)
                            .map(|(k, &v)| (cells[k].0, v))
                            .collect()
                    })
                    .collect(),
            );
            return Ok(());
        }
        let mut res = Ok(());
        compositions(cells[ci].1, m, &mut Vec::new(), &mut |comp| {
            if res.is_err() {
                return;
            }
            let fits = (0..m).all(|i| per_tour[i].iter().sum::<usize>() + comp[i] <= c);
            if !fits {
                return;
            }
            for i in 0..m {
                per_tour[i][ci] = comp[i];
            }
            // Prefix order check keeps the search symmetric-free early.
            let prefix_ok = (1..m).all(|i| per_tour[i][..=ci] <= per_tour[i - 1][..=ci]);
            if prefix_ok {
                res = rec(ci + 1, cells, per_tour, c, cap, out);
            }
            for row in per_tour.iter_mut() {
                row[ci] = 0;
            }
        });
        res
    }
    if m == 0 {
        return Ok(if cells.is_empty() { vec![Vec::new()] } else { Vec::new() });
    }
    rec(0, &cells, &mut per_tour, c, cap, &mut out)?;
    Ok(out)
}

/// Lower bound on the length of a closed tour visiting k grid cells:
/// (k/2 − 2)·τ.
pub fn cells_lower_bound(k: usize, tau: f64) -> f64 {
    (k as f64 / 2.0 - 2.0) * tau
}
