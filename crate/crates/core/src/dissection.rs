//! Shifted quadtree dissection over the box B0, portal layouts (standard and
//! restricted), point and path snapping, and the layout predicates.
//!
//! Coordinates inside B0 are measured in grid units (cell side 1). Portal
//! positions along a line are integers in ticks, with `p` ticks per unit, so
//! every layout predicate is exact integer arithmetic.

use crate::error::{Error, Result};
use crate::flowgraph::rho_for;
use crate::model::{Eps, MPathsInstance, Point, Square};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Dissection {
    pub rho: u32,
    pub l0: i64,
    pub l1: i64,
    /// Lower-left corner of B1 inside B0, each component in 1..=L1.
    pub shift: (i64, i64),
    /// The instance square (B1) in original coordinates.
    pub square: Square,
    /// Grid units per original length unit (L1 / τ).
    pub scale: f64,
}

impl Dissection {
    pub fn new(square: Square, rho: u32, shift: (i64, i64)) -> Result<Self> {
        if rho == 0 || rho > 30 {
            return Err(Error::Precondition(format!("rho = {rho} out of range")));
        }
        let l0 = 1i64 << rho;
        let l1 = l0 / 2;
        if !(1..=l1).contains(&shift.0) || !(1..=l1).contains(&shift.1) {
            return Err(Error::Precondition(format!(
                "shift {shift:?} outside 1..={l1}"
            )));
        }
        Ok(Dissection {
            rho,
            l0,
            l1,
            shift,
            square,
            scale: l1 as f64 / square.side,
        })
    }

    /// Side length of a level-i square in grid units.
    pub fn side(&self, level: u32) -> i64 {
        1i64 << (self.rho - level)
    }

    pub fn to_grid(&self, p: Point) -> Point {
        Point::new(
            (p.x - self.square.ll.x) * self.scale + self.shift.0 as f64,
            (p.y - self.square.ll.y) * self.scale + self.shift.1 as f64,
        )
    }

    pub fn to_original(&self, g: Point) -> Point {
        Point::new(
            (g.x - self.shift.0 as f64) / self.scale + self.square.ll.x,
            (g.y - self.shift.1 as f64) / self.scale + self.square.ll.y,
        )
    }

    /// Whether a cell (by lower-left unit corner) lies inside B1.
    pub fn cell_in_b1(&self, cx: i64, cy: i64) -> bool {
        cx >= self.shift.0 && cx < self.shift.0 + self.l1 && cy >= self.shift.1 && cy < self.shift.1 + self.l1
    }

    /// Cell of a grid-unit point, clamped into B1 (points on B1's far sides
    /// belong to the last cell).
    pub fn cell_of(&self, g: Point) -> (i64, i64) {
        let clamp = |v: f64, lo: i64| -> i64 { (v.floor() as i64).clamp(lo, lo + self.l1 - 1) };
        (clamp(g.x, self.shift.0), clamp(g.y, self.shift.1))
    }

    /// The four level-(i+1) children of the level-i square with lower-left
    /// corner `ll` in the order SW, SE, NW, NE.
    pub fn children(&self, level: u32, ll: (i64, i64)) -> [(i64, i64); 4] {
        let h = self.side(level + 1);
        [
            ll,
            (ll.0 + h, ll.1),
            (ll.0, ll.1 + h),
            (ll.0 + h, ll.1 + h),
        ]
    }
}

/// Quadtree depth for an m-paths instance.
pub fn rho_for_instance(minst: &MPathsInstance) -> u32 {
    rho_for(minst.n().max(1), minst.eps).max(1)
}

pub fn build_dissection(minst: &MPathsInstance, rng_seed: u64) -> Result<Dissection> {
    let rho = rho_for_instance(minst);
    let l1 = 1i64 << (rho - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let shift = (rng.gen_range(1..=l1), rng.gen_range(1..=l1));
    Dissection::new(minst.square, rho, shift)
}

/// All shifts for the instance, or a seeded sample without replacement when
/// there are more than `count`.
pub fn shifts_for(rho: u32, count: usize, rng_seed: u64) -> Vec<(i64, i64)> {
    let l1 = 1i64 << (rho - 1);
    let mut all: Vec<(i64, i64)> = (1..=l1).flat_map(|x| (1..=l1).map(move |y| (x, y))).collect();
    if all.len() > count {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        all.shuffle(&mut rng);
        all.truncate(count);
    }
    all
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnappedPoints {
    /// Cell (lower-left unit corner) of each point.
    pub cells: Vec<(i64, i64)>,
    /// Cell centres in grid units.
    pub centres: Vec<Point>,
    /// Total displacement in grid units.
    pub displacement: f64,
    /// Bound on the change of any solution's cost, √2·n in grid units.
    pub cost_bound: f64,
}

pub fn snap_points_to_cells(d: &Dissection, points: &[Point]) -> SnappedPoints {
    let mut cells = Vec::with_capacity(points.len());
    let mut centres = Vec::with_capacity(points.len());
    let mut displacement = 0.0;
    for &p in points {
        let g = d.to_grid(p);
        let c = d.cell_of(g);
        let centre = Point::new(c.0 as f64 + 0.5, c.1 as f64 + 0.5);
        displacement += g.dist(centre);
        cells.push(c);
        centres.push(centre);
    }
    SnappedPoints {
        cells,
        centres,
        displacement,
        cost_bound: std::f64::consts::SQRT_2 * points.len() as f64,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayoutMode {
    Standard,
    Restricted,
}

/// A portal: a position on a grid line. At grid-line intersections the
/// position is split into one portal per incident edge (`side` −1 for the
/// edge before the position, +1 for the edge after it); elsewhere side is 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortalKey {
    /// Lies on a vertical line x = line (crossings move along ±x); otherwise on
    /// the horizontal line y = line (crossings along ±y).
    pub vertical: bool,
    pub line: i64,
    pub pos: i64,
    pub side: i8,
}

/// Crossing direction: true for +x / +y.
pub type Dir = bool;

#[derive(Clone, Debug, PartialEq)]
pub struct PortalLayout {
    pub mode: LayoutMode,
    pub rho: u32,
    /// Portal intervals per square side (ticks per grid unit).
    pub p: i64,
    pub l0: i64,
}

impl PortalLayout {
    pub fn new(rho: u32, p: i64, mode: LayoutMode) -> Result<Self> {
        if p < 1 {
            return Err(Error::Precondition("portal density must be positive".into()));
        }
        if rho == 0 || rho > 30 {
            return Err(Error::Precondition(format!("rho = {rho} out of range")));
        }
        Ok(PortalLayout {
            mode,
            rho,
            p,
            l0: 1 << rho,
        })
    }

    /// Intervals per square side: 4ρ/ε.
    pub fn paper_p(rho: u32, eps: Eps) -> i64 {
        4 * rho as i64 * eps.inv() as i64
    }

    pub fn nport(&self) -> i64 {
        self.p + 1
    }

    pub fn line_level(&self, c: i64) -> u32 {
        line_level(self.rho, c)
    }

    /// Portal spacing on a level-i line, in ticks.
    pub fn spacing(&self, level: u32) -> i64 {
        1i64 << (self.rho - level)
    }

    /// Inter-portal distance on a level-i line in grid units.
    pub fn eta(&self, level: u32) -> f64 {
        self.spacing(level) as f64 / self.p as f64
    }

    /// Number of portal positions on a level-i line (intersection splitting
    /// not counted).
    pub fn portals_per_line(&self, level: u32) -> i64 {
        1 + (self.l0 * self.p) / self.spacing(level)
    }

    pub fn is_portal_position(&self, line: i64, pos: i64) -> bool {
        pos >= 0 && pos <= self.l0 * self.p && pos % self.spacing(self.line_level(line)) == 0
    }

    /// Portal keys at a position on a line (one, or two at an intersection).
    pub fn keys_at(&self, vertical: bool, line: i64, pos: i64) -> Vec<PortalKey> {
        if !self.is_portal_position(line, pos) {
            return Vec::new();
        }
        if pos % self.p != 0 {
            return vec![PortalKey { vertical, line, pos, side: 0 }];
        }
        let mut v = Vec::with_capacity(2);
        if pos > 0 {
            v.push(PortalKey { vertical, line, pos, side: -1 });
        }
        if pos < self.l0 * self.p {
            v.push(PortalKey { vertical, line, pos, side: 1 });
        }
        v
    }

    fn parity_dir(&self, line: i64, pos: i64) -> Dir {
        let k = pos / self.spacing(self.line_level(line));
        k % 2 == 0
    }

    /// Allowed crossing directions of a portal as (plus, minus).
    pub fn dirs(&self, k: PortalKey) -> (bool, bool) {
        if !self.is_portal_position(k.line, k.pos) {
            return (false, false);
        }
        match self.mode {
            LayoutMode::Standard => (true, true),
            LayoutMode::Restricted => {
                let d = if k.side == 0 {
                    Some(self.parity_dir(k.line, k.pos))
                } else {
                    // Intersection: the NE and SW quadrants act as sinks, so
                    // the portal on the edge after the position crosses in
                    // the + direction and the one before it in −.
                    let figure = k.side > 0;
                    let i = self.line_level(k.line);
                    let j = self.line_level(k.pos / self.p);
                    if j <= i || figure == self.parity_dir(k.line, k.pos) {
                        Some(figure)
                    } else {
                        None
                    }
                };
                match d {
                    Some(true) => (true, false),
                    Some(false) => (false, true),
                    None => (false, false),
                }
            }
        }
    }

    pub fn allows(&self, k: PortalKey, dir: Dir) -> bool {
        let (plus, minus) = self.dirs(k);
        if dir {
            plus
        } else {
            minus
        }
    }

    /// Position in grid units.
    pub fn point(&self, k: PortalKey) -> Point {
        let along = k.pos as f64 / self.p as f64;
        if k.vertical {
            Point::new(k.line as f64, along)
        } else {
            Point::new(along, k.line as f64)
        }
    }

    /// Surviving portals of the unit edge starting at `start` (grid units) on
    /// the given line, ordered along the line.
    pub fn edge_portals(&self, vertical: bool, line: i64, start: i64) -> Vec<PortalKey> {
        let s = self.spacing(self.line_level(line));
        let lo = start * self.p;
        let hi = lo + self.p;
        let mut out = Vec::new();
        let mut pos = (lo + s - 1).div_euclid(s) * s;
        while pos <= hi {
            let side = if pos == lo {
                1
            } else if pos == hi {
                -1
            } else {
                0
            };
            let k = PortalKey { vertical, line, pos, side };
            if self.dirs(k) != (false, false) {
                out.push(k);
            }
            pos += s;
        }
        out
    }

    /// Portals on the boundary of the square with lower-left `ll` and side
    /// `side` (grid units), with their direction relative to the square
    /// (true = into the square).
    pub fn square_ports(&self, ll: (i64, i64), side: i64) -> Vec<(PortalKey, bool)> {
        let mut out = Vec::new();
        let (x0, y0) = ll;
        let (x1, y1) = (x0 + side, y0 + side);
        for u in 0..side {
            for (vertical, line, start, into_plus) in [
                (false, y0, x0 + u, true),
                (false, y1, x0 + u, false),
                (true, x0, y0 + u, true),
                (true, x1, y0 + u, false),
            ] {
                for k in self.edge_portals(vertical, line, start) {
                    let (plus, minus) = self.dirs(k);
                    if plus {
                        out.push((k, into_plus));
                    }
                    if minus {
                        out.push((k, !into_plus));
                    }
                }
            }
        }
        out
    }
}

/// Level of the line at unit coordinate c: 0 for the B0 boundary, otherwise
/// ρ minus the 2-adic valuation of c.
pub fn line_level(rho: u32, c: i64) -> u32 {
    let l0 = 1i64 << rho;
    if c <= 0 || c >= l0 {
        0
    } else {
        rho - c.trailing_zeros()
    }
}

pub fn build_portals(d: &Dissection, p: i64, mode: LayoutMode) -> Result<PortalLayout> {
    PortalLayout::new(d.rho, p, mode)
}

/// Distance between an in-portal and an out-portal of a square; the layout
/// guarantees at least η_i for a level-i square in restricted mode.
pub fn min_in_square_traversal(
    layout: &PortalLayout,
    in_portal: PortalKey,
    out_portal: PortalKey,
) -> Result<f64> {
    if in_portal == out_portal {
        return Err(Error::Internal(format!(
            "portal {in_portal:?} used both into and out of the square"
        )));
    }
    Ok(layout.point(in_portal).dist(layout.point(out_portal)))
}

/// Smallest in-to-out portal distance over every square of the given level;
/// returns (distance, η_level).
pub fn stayinsquare_margin(layout: &PortalLayout, level: u32) -> Result<(f64, f64)> {
    let side = 1i64 << (layout.rho - level);
    let mut best = f64::INFINITY;
    let mut x0 = 0;
    while x0 < layout.l0 {
        let mut y0 = 0;
        while y0 < layout.l0 {
            let ports = layout.square_ports((x0, y0), side);
            let ins: Vec<PortalKey> = ports.iter().filter(|p| p.1).map(|p| p.0).collect();
            let outs: Vec<PortalKey> = ports.iter().filter(|p| !p.1).map(|p| p.0).collect();
            for &a in &ins {
                for &b in &outs {
                    best = best.min(min_in_square_traversal(layout, a, b)?);
                }
            }
            y0 += side;
        }
        x0 += side;
    }
    Ok((best, layout.eta(level)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnappedPath {
    pub points: Vec<Point>,
    /// Per crossing: (line level, 2·|crossing − portal|).
    pub detours: Vec<(u32, f64)>,
}

/// Moves every grid-line crossing of a polyline (grid units) to the nearest
/// portal on the same line that permits the crossing direction.
pub fn snap_path_to_portals(layout: &PortalLayout, path: &[Point]) -> Result<SnappedPath> {
    let mut out = Vec::new();
    let mut detours = Vec::new();
    if path.is_empty() {
        return Ok(SnappedPath { points: out, detours });
    }
    out.push(path[0]);
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut crossings: Vec<(f64, bool, i64)> = Vec::new();
        for (vertical, ca, cb) in [(true, a.x, b.x), (false, a.y, b.y)] {
            if ca == cb {
                continue;
            }
            let (lo, hi) = (ca.min(cb), ca.max(cb));
            let mut c = lo.floor() as i64;
            if (c as f64) <= lo {
                c += 1;
            }
            while (c as f64) < hi {
                if c > 0 && c < layout.l0 {
                    let t = (c as f64 - ca) / (cb - ca);
                    crossings.push((t, vertical, c));
                }
                c += 1;
            }
        }
        crossings.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
        for (t, vertical, line) in crossings {
            let at = a.lerp(b, t);
            let along = if vertical { at.y } else { at.x };
            let dir = if vertical { b.x > a.x } else { b.y > a.y };
            let key = nearest_portal(layout, vertical, line, along, dir).ok_or_else(|| {
                Error::Internal(format!("no portal with direction {dir} on line {line}"))
            })?;
            let q = layout.point(key);
            detours.push((layout.line_level(line), 2.0 * q.dist(at)));
            out.push(q);
        }
        out.push(b);
    }
    Ok(SnappedPath { points: out, detours })
}

fn nearest_portal(layout: &PortalLayout, vertical: bool, line: i64, along: f64, dir: Dir) -> Option<PortalKey> {
    let s = layout.spacing(layout.line_level(line));
    let t = along * layout.p as f64;
    let base = (t / s as f64).round() as i64;
    let mut best: Option<(f64, PortalKey)> = None;
    for delta in 0..=(2 * layout.l0 * layout.p / s + 1) {
        for k in [base - delta, base + delta] {
            let pos = k * s;
            for key in layout.keys_at(vertical, line, pos) {
                if layout.allows(key, dir) {
                    let d = (pos as f64 - t).abs();
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, key));
                    }
                }
            }
        }
        if let Some((bd, _)) = best {
            if bd < ((delta as f64) - 1.0) * s as f64 {
                break;
            }
        }
    }
    best.map(|(_, k)| k)
}
