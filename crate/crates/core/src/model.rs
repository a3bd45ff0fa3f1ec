//! Geometric primitives, instances, solutions and feasibility validators.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        distance(self, o)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

pub fn distance(p: Point, q: Point) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// Total length of an open polyline.
pub fn polyline_length(pts: &[Point]) -> f64 {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Relative comparison used for every cost check: |a-b| <= 1e-9 * max(1,|a|,|b|).
pub fn cost_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * 1f64.max(a.abs()).max(b.abs())
}

/// a <= b up to the same relative tolerance.
pub fn cost_le(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * 1f64.max(a.abs()).max(b.abs())
}

/// Accuracy parameter stored through its integer inverse, so that 1/ε is
/// integral by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Eps {
    inv: u32,
}

impl Eps {
    pub fn from_inverse(inv: u32) -> Result<Self> {
        if inv < 2 {
            return Err(Error::Precondition(format!(
                "epsilon must lie in (0,1); got 1/{inv}"
            )));
        }
        Ok(Eps { inv })
    }

    pub fn from_f64(v: f64) -> Result<Self> {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Precondition(format!("epsilon {v} not in (0,1)")));
        }
        let inv = (1.0 / v).round();
        if (1.0 / inv - v).abs() > 1e-12 {
            return Err(Error::Precondition(format!(
                "1/epsilon must be an integer; got epsilon = {v}"
            )));
        }
        Eps::from_inverse(inv as u32)
    }

    pub fn inv(self) -> u32 {
        self.inv
    }

    pub fn value(self) -> f64 {
        1.0 / self.inv as f64
    }
}

impl fmt::Display for Eps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvrpInstance {
    pub depot: Point,
    pub points: Vec<Point>,
    pub capacity: usize,
    pub eps: Eps,
}

impl CvrpInstance {
    pub fn new(depot: Point, points: Vec<Point>, capacity: usize, eps: Eps) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Precondition("capacity must be at least 1".into()));
        }
        if points.is_empty() {
            return Err(Error::Precondition("instance has no points".into()));
        }
        if !depot.is_finite() || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Precondition("non-finite coordinate".into()));
        }
        Ok(CvrpInstance {
            depot,
            points,
            capacity,
            eps,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }
}

/// Visit order of one vehicle; the depot is implicit at both ends.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Tour {
    pub visits: Vec<usize>,
}

impl Tour {
    pub fn new(visits: Vec<usize>) -> Self {
        Tour { visits }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CvrpSolution {
    pub tours: Vec<Tour>,
    pub cost: f64,
}

impl CvrpSolution {
    /// Builds a solution and computes its cost.
    pub fn from_tours(inst: &CvrpInstance, tours: Vec<Tour>) -> Result<Self> {
        let mut cost = 0.0;
        for t in &tours {
            cost += tour_cost(inst, t)?;
        }
        Ok(CvrpSolution { tours, cost })
    }
}

pub fn tour_cost(inst: &CvrpInstance, t: &Tour) -> Result<f64> {
    let mut prev = inst.depot;
    let mut total = 0.0;
    for &i in &t.visits {
        let p = *inst.points.get(i).ok_or(Error::InvalidIndex {
            index: i,
            len: inst.points.len(),
        })?;
        total += prev.dist(p);
        prev = p;
    }
    Ok(total + prev.dist(inst.depot))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Square {
    pub ll: Point,
    pub side: f64,
}

impl Square {
    pub fn new(ll: Point, side: f64) -> Self {
        Square { ll, side }
    }

    pub fn unit() -> Self {
        Square::new(Point::new(0.0, 0.0), 1.0)
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p.x >= self.ll.x - tol
            && p.y >= self.ll.y - tol
            && p.x <= self.ll.x + self.side + tol
            && p.y <= self.ll.y + self.side + tol
    }

    pub fn on_boundary(&self, p: Point, tol: f64) -> bool {
        if !self.contains(p, tol) {
            return false;
        }
        let (x0, y0) = (self.ll.x, self.ll.y);
        let (x1, y1) = (x0 + self.side, y0 + self.side);
        (p.x - x0).abs() <= tol
            || (p.x - x1).abs() <= tol
            || (p.y - y0).abs() <= tol
            || (p.y - y1).abs() <= tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MPathsInstance {
    pub square: Square,
    pub a: Point,
    pub b: Point,
    pub m: usize,
    pub points: Vec<Point>,
    pub eps: Eps,
}

impl MPathsInstance {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Checks the standing assumptions of the m-paths problem and returns the
    /// violated ones (empty when the instance is well formed).
    pub fn assumption_violations(&self) -> Vec<String> {
        let tol = 1e-9 * self.square.side.max(1.0);
        let mut out = Vec::new();
        if self.m == 0 {
            out.push("m must be positive".to_string());
        }
        if !self.square.on_boundary(self.a, tol) {
            out.push("a is not on the square boundary".into());
        }
        if !self.square.on_boundary(self.b, tol) {
            out.push("b is not on the square boundary".into());
        }
        let need = self.eps.value() * self.square.side / 2.0;
        if self.a.dist(self.b) + tol < need {
            out.push(format!(
                "d(a,b) = {} below eps*tau/2 = {}",
                self.a.dist(self.b),
                need
            ));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !self.square.contains(*p, tol) {
                out.push(format!("point {i} outside the square"));
            }
        }
        out
    }
}

/// Paths are stored by their interior point indices; every path starts at `a`
/// and ends at `b` implicitly.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MPathsSolution {
    pub paths: Vec<Vec<usize>>,
    pub cost: f64,
}

impl MPathsSolution {
    pub fn from_paths(inst: &MPathsInstance, paths: Vec<Vec<usize>>) -> Result<Self> {
        let cost = mpaths_cost(inst, &paths)?;
        Ok(MPathsSolution { paths, cost })
    }
}

pub fn path_cost(a: Point, b: Point, pts: &[Point], order: &[usize]) -> Result<f64> {
    let mut prev = a;
    let mut total = 0.0;
    for &i in order {
        let p = *pts.get(i).ok_or(Error::InvalidIndex {
            index: i,
            len: pts.len(),
        })?;
        total += prev.dist(p);
        prev = p;
    }
    Ok(total + prev.dist(b))
}

pub fn mpaths_cost(inst: &MPathsInstance, paths: &[Vec<usize>]) -> Result<f64> {
    let mut total = 0.0;
    for p in paths {
        total += path_cost(inst.a, inst.b, &inst.points, p)?;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub rule: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Per-rule outcome of a validator. Failures are entries, never errors.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, rule: &'static str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            rule,
            pass,
            detail: detail.into(),
        });
    }

    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self, rule: &str) -> bool {
        self.checks.iter().any(|c| c.rule == rule && !c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.pass { "pass" } else { "FAIL" };
            writeln!(f, "{tag} {}: {}", c.rule, c.detail)?;
        }
        Ok(())
    }
}

/// Returns (missing, duplicated, out_of_range) for an index multiset over 0..n.
fn coverage(n: usize, seqs: impl Iterator<Item = usize>) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut seen = vec![0u32; n];
    let mut bad = Vec::new();
    for i in seqs {
        if i < n {
            seen[i] += 1;
        } else {
            bad.push(i);
        }
    }
    let missing = (0..n).filter(|&i| seen[i] == 0).collect();
    let dup = (0..n).filter(|&i| seen[i] > 1).collect();
    (missing, dup, bad)
}

fn coverage_detail(missing: &[usize], dup: &[usize], bad: &[usize]) -> String {
    if missing.is_empty() && dup.is_empty() && bad.is_empty() {
        "every point covered exactly once".into()
    } else {
        format!("missing {missing:?}, duplicated {dup:?}, invalid {bad:?}")
    }
}

pub fn validate_cvrp_solution(inst: &CvrpInstance, sol: &CvrpSolution) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let n = inst.n();
    let (missing, dup, bad) = coverage(n, sol.tours.iter().flat_map(|t| t.visits.iter().copied()));
    rep.push(
        "coverage",
        missing.is_empty() && dup.is_empty() && bad.is_empty(),
        coverage_detail(&missing, &dup, &bad),
    );
    let over: Vec<usize> = sol
        .tours
        .iter()
        .enumerate()
        .filter(|(_, t)| t.visits.len() > inst.capacity)
        .map(|(i, _)| i)
        .collect();
    rep.push(
        "capacity",
        over.is_empty(),
        if over.is_empty() {
            format!("all tours within c = {}", inst.capacity)
        } else {
            format!("tours {over:?} exceed c = {}", inst.capacity)
        },
    );
    let mut total = 0.0;
    let mut ok = true;
    for t in &sol.tours {
        match tour_cost(inst, t) {
            Ok(c) => total += c,
            Err(_) => ok = false,
        }
    }
    let pass = ok && cost_eq(total, sol.cost) && sol.cost >= 0.0;
    rep.push(
        "cost",
        pass,
        format!("claimed {} recomputed {}", sol.cost, total),
    );
    rep
}

pub fn validate_mpaths_solution(inst: &MPathsInstance, sol: &MPathsSolution) -> ValidationReport {
    let mut rep = ValidationReport::default();
    rep.push(
        "path_count",
        sol.paths.len() == inst.m,
        format!("{} paths, m = {}", sol.paths.len(), inst.m),
    );
    // Endpoints are implicit in the representation, so this only records it.
    rep.push("endpoints", true, "every path runs from a to b");
    let (missing, dup, bad) = coverage(inst.n(), sol.paths.iter().flat_map(|p| p.iter().copied()));
    rep.push(
        "coverage",
        missing.is_empty() && dup.is_empty() && bad.is_empty(),
        coverage_detail(&missing, &dup, &bad),
    );
    match mpaths_cost(inst, &sol.paths) {
        Ok(c) => rep.push(
            "cost",
            cost_eq(c, sol.cost) && sol.cost >= 0.0,
            format!("claimed {} recomputed {}", sol.cost, c),
        ),
        Err(e) => rep.push("cost", false, e.to_string()),
    }
    rep
}
