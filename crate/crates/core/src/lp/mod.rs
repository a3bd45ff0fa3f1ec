//! Segment-to-tour assignment for one tour type: the constraint system over
//! x(i,σ,j), an exact extreme point, partial tours from its integral part,
//! and the final gap closing and greedy slice assignment.

pub mod simplex;

use crate::error::{Error, Result};
use crate::model::{polyline_length, Eps, Point};
use num_traits::{One, ToPrimitive, Zero};
pub use simplex::{enumerate_vertices, q, q_frac, solve_vertex, StandardForm, Vertex, Q};

/// Per-square paths of one type: `paths[pair][label]` lists point indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SquarePaths {
    pub paths: Vec<Vec<Vec<usize>>>,
}

/// Point counts n^σ_j for k squares and m labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentCatalog {
    pub m: usize,
    /// counts[σ][j].
    pub counts: Vec<Vec<usize>>,
}

impl SegmentCatalog {
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

/// Labels path j of every anchor pair in a square as segment j.
pub fn build_segments(m: usize, squares: &[SquarePaths]) -> Result<SegmentCatalog> {
    let mut counts = Vec::with_capacity(squares.len());
    for (s, sq) in squares.iter().enumerate() {
        let mut row = vec![0usize; m];
        for (p, pair) in sq.paths.iter().enumerate() {
            if pair.len() != m {
                return Err(Error::Precondition(format!(
                    "square {s}, pair {p}: {} paths where {m} were guessed",
                    pair.len()
                )));
            }
            for (j, path) in pair.iter().enumerate() {
                row[j] += path.len();
            }
        }
        counts.push(row);
    }
    Ok(SegmentCatalog { m, counts })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// Tour i takes one segment in square σ.
    PickOne { tour: usize, square: usize },
    /// A segment with more than c points is used exactly once.
    Big { square: usize, label: usize },
    /// A group of similar segments is used |G| times in total.
    Group { square: usize, group: usize },
    /// Tour i holds at most c points.
    Capacity { tour: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub kind: RowKind,
    pub coeffs: Vec<(usize, Q)>,
    pub rhs: Q,
    /// `true` for ≤ rows, `false` for equalities.
    pub le: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSystem {
    pub m: usize,
    pub k: usize,
    pub c: usize,
    pub eps: Eps,
    /// β = 72/ε.
    pub beta: Q,
    /// Δ = εc/(βk).
    pub delta: Q,
    /// groups[σ] lists the label groups of segments with at most c points.
    pub groups: Vec<Vec<Vec<usize>>>,
    pub rows: Vec<Row>,
}

impl ConstraintSystem {
    pub fn nvars(&self) -> usize {
        self.m * self.k * self.m
    }

    pub fn var(&self, tour: usize, square: usize, label: usize) -> usize {
        (tour * self.k + square) * self.m + label
    }

    pub fn satisfied_by(&self, x: &[Q]) -> bool {
        x.len() == self.nvars()
            && x.iter().all(|v| *v >= Q::zero())
            && self.rows.iter().all(|r| {
                let lhs: Q = r.coeffs.iter().map(|(v, a)| a * &x[*v]).sum();
                if r.le {
                    lhs <= r.rhs
                } else {
                    lhs == r.rhs
                }
            })
    }

    /// x ≡ 1/m.
    pub fn uniform_point(&self) -> Vec<Q> {
        vec![q_frac(1, self.m as i64); self.nvars()]
    }

    /// Equality form with one slack column per ≤ row (after the x columns).
    pub fn standard_form(&self) -> StandardForm {
        let nx = self.nvars();
        let nslack = self.rows.iter().filter(|r| r.le).count();
        let mut a = Vec::with_capacity(self.rows.len());
        let mut b = Vec::with_capacity(self.rows.len());
        let mut s = 0;
        for r in &self.rows {
            let mut row = vec![Q::zero(); nx + nslack];
            for (v, c) in &r.coeffs {
                row[*v] = c.clone();
            }
            if r.le {
                row[nx + s] = Q::one();
                s += 1;
            }
            a.push(row);
            b.push(r.rhs.clone());
        }
        StandardForm { a, b }
    }

    /// Plain-text dump: one row per line, rationals as p/q.
    pub fn to_text(&self) -> String {
        let mut s = format!("vars {} m {} k {} c {}\n", self.nvars(), self.m, self.k, self.c);
        for r in &self.rows {
            let terms: Vec<String> = r
                .coeffs
                .iter()
                .map(|(v, a)| {
                    let (i, rest) = (v / (self.k * self.m), v % (self.k * self.m));
                    format!("{a} x({i},{},{})", rest / self.m, rest % self.m)
                })
                .collect();
            s.push_str(&format!(
                "{:?}: {} {} {}\n",
                r.kind,
                terms.join(" + "),
                if r.le { "<=" } else { "=" },
                r.rhs
            ));
        }
        s
    }

    pub fn support_bound(&self) -> Q {
        let (m, k) = (q(self.m as i64), q(self.k as i64));
        &m * &k + q(2) * &m + self.frac_extra()
    }

    pub fn frac_bound(&self) -> Q {
        q(2 * self.m as i64) + self.frac_extra()
    }

    /// βk²/ε.
    fn frac_extra(&self) -> Q {
        let k = q(self.k as i64);
        &self.beta * &k * &k * q(self.eps.inv() as i64)
    }
}

/// β = 72/ε.
pub fn beta(eps: Eps) -> Q {
    q(72 * eps.inv() as i64)
}

/// Δ = εc/(βk).
pub fn group_spread(eps: Eps, c: usize, k: usize) -> Q {
    q_frac(c as i64, eps.inv() as i64) / (beta(eps) * q(k.max(1) as i64))
}

/// Greedy grouping of labels with n ≤ c, by ascending count, opening a new
/// group when the spread would exceed Δ.
pub fn group_labels(counts: &[usize], c: usize, delta: &Q) -> Vec<Vec<usize>> {
    let mut small: Vec<usize> = (0..counts.len()).filter(|&j| counts[j] <= c).collect();
    small.sort_by_key(|&j| (counts[j], j));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for j in small {
        match groups.last_mut() {
            Some(g) if q((counts[j] - counts[g[0]]) as i64) <= *delta => g.push(j),
            _ => groups.push(vec![j]),
        }
    }
    groups
}

/// Builds the rows and verifies that x ≡ 1/m is feasible.
pub fn build_constraints(cat: &SegmentCatalog, c: usize, eps: Eps) -> Result<ConstraintSystem> {
    let m = cat.m;
    let k = cat.k();
    if m == 0 {
        return Err(Error::Precondition("a type needs at least one tour".into()));
    }
    let delta = group_spread(eps, c, k);
    let mut cs = ConstraintSystem {
        m,
        k,
        c,
        eps,
        beta: beta(eps),
        delta: delta.clone(),
        groups: Vec::with_capacity(k),
        rows: Vec::new(),
    };
    for i in 0..m {
        for s in 0..k {
            cs.rows.push(Row {
                kind: RowKind::PickOne { tour: i, square: s },
                coeffs: (0..m).map(|j| (cs.var(i, s, j), Q::one())).collect(),
                rhs: Q::one(),
                le: false,
            });
        }
    }
    for s in 0..k {
        for j in 0..m {
            if cat.counts[s][j] > c {
                cs.rows.push(Row {
                    kind: RowKind::Big { square: s, label: j },
                    coeffs: (0..m).map(|i| (cs.var(i, s, j), Q::one())).collect(),
                    rhs: Q::one(),
                    le: false,
                });
            }
        }
        let groups = group_labels(&cat.counts[s], c, &delta);
        for (h, g) in groups.iter().enumerate() {
            let coeffs = (0..m).flat_map(|i| g.iter().map(move |&j| (i, j))).map(|(i, j)| (cs.var(i, s, j), Q::one())).collect();
            cs.rows.push(Row {
                kind: RowKind::Group { square: s, group: h },
                coeffs,
                rhs: q(g.len() as i64),
                le: false,
            });
        }
        cs.groups.push(groups);
    }
    for i in 0..m {
        let mut coeffs = Vec::new();
        for s in 0..k {
            for j in 0..m {
                if cat.counts[s][j] > 0 {
                    coeffs.push((cs.var(i, s, j), q(cat.counts[s][j] as i64)));
                }
            }
        }
        cs.rows.push(Row { kind: RowKind::Capacity { tour: i }, coeffs, rhs: q(c as i64), le: true });
    }
    if !cs.satisfied_by(&cs.uniform_point()) {
        return Err(Error::Precondition(format!(
            "x = 1/m is infeasible: the type holds {} points, more than c·m = {}",
            cat.total(),
            c * m
        )));
    }
    Ok(cs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtremePoint {
    pub x: Vec<Q>,
    /// Strictly positive x variables.
    pub support: usize,
    /// (tour, square) pairs with a variable equal to 1.
    pub integer_pairs: Vec<(usize, usize)>,
    pub fractional_pairs: Vec<(usize, usize)>,
    pub pivots: usize,
}

pub fn classify(cs: &ConstraintSystem, x: &[Q]) -> ExtremePoint {
    let mut ip = Vec::new();
    let mut fp = Vec::new();
    for i in 0..cs.m {
        for s in 0..cs.k {
            if (0..cs.m).any(|j| x[cs.var(i, s, j)].is_one()) {
                ip.push((i, s));
            } else {
                fp.push((i, s));
            }
        }
    }
    ExtremePoint {
        support: x[..cs.nvars()].iter().filter(|v| !v.is_zero()).count(),
        x: x[..cs.nvars()].to_vec(),
        integer_pairs: ip,
        fractional_pairs: fp,
        pivots: 0,
    }
}

/// A vertex of the system, over exact rationals.
pub fn solve_extreme_point(cs: &ConstraintSystem) -> Result<ExtremePoint> {
    let sf = cs.standard_form();
    let v = solve_vertex(&sf, None)?;
    let mut ep = classify(cs, &v.x);
    ep.pivots = v.pivots;
    Ok(ep)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialTours {
    /// assign[i][σ] = label taken by tour i in square σ.
    pub assign: Vec<Vec<Option<usize>>>,
    /// Segments removed from overflowing tours.
    pub removed: Vec<(usize, usize)>,
    /// Every segment not held by a tour, as (square, label).
    pub unassigned: Vec<(usize, usize)>,
    /// Removals beyond ⌈(ε/β)u⌉ needed to reach capacity.
    pub extra_removals: usize,
}

impl PartialTours {
    pub fn f(&self) -> usize {
        self.unassigned.len()
    }

    pub fn load(&self, cat: &SegmentCatalog, i: usize) -> usize {
        self.assign[i]
            .iter()
            .enumerate()
            .filter_map(|(s, j)| j.map(|j| cat.counts[s][j]))
            .sum()
    }
}

/// f ≤ (ε/β)mk + βk²/ε + 3m.
pub fn f_bound(cs: &ConstraintSystem) -> Q {
    let (m, k) = (q(cs.m as i64), q(cs.k as i64));
    let eps = q_frac(1, cs.eps.inv() as i64);
    &eps / &cs.beta * &m * &k + &cs.beta * &k * &k / &eps + q(3) * &m
}

/// Integral pairs become segment assignments (repaired to a matching inside
/// each group), then overflowing tours drop their largest segments.
pub fn extract_partial_tours(ep: &ExtremePoint, cs: &ConstraintSystem, cat: &SegmentCatalog) -> PartialTours {
    let (m, k, c) = (cs.m, cs.k, cs.c);
    let mut assign = vec![vec![None; k]; m];
    for s in 0..k {
        let mut label_group = vec![usize::MAX; m];
        for (h, g) in cs.groups[s].iter().enumerate() {
            for &j in g {
                label_group[j] = h;
            }
        }
        // Tours integrally assigned in this square, bucketed by group (big
        // segments are their own bucket).
        let mut by_group: Vec<Vec<usize>> = vec![Vec::new(); cs.groups[s].len()];
        let mut big: Vec<(usize, usize)> = Vec::new();
        for i in 0..m {
            if let Some(j) = (0..m).find(|&j| ep.x[cs.var(i, s, j)].is_one()) {
                if label_group[j] == usize::MAX {
                    big.push((i, j));
                } else {
                    by_group[label_group[j]].push(i);
                }
            }
        }
        for (i, j) in big {
            assign[i][s] = Some(j);
        }
        for (h, tours) in by_group.iter().enumerate() {
            let g = &cs.groups[s][h];
            let mut used = vec![false; g.len()];
            let mut pending = Vec::new();
            // Keep labels that are taken once; reassign the rest.
            for &i in tours {
                let j = (0..m).find(|&j| ep.x[cs.var(i, s, j)].is_one()).unwrap();
                let pos = g.iter().position(|&x| x == j).unwrap();
                if used[pos] {
                    pending.push(i);
                } else {
                    used[pos] = true;
                    assign[i][s] = Some(j);
                }
            }
            for i in pending {
                if let Some(pos) = used.iter().position(|u| !u) {
                    used[pos] = true;
                    assign[i][s] = Some(g[pos]);
                }
            }
        }
    }
    let mut removed = Vec::new();
    let mut extra_removals = 0;
    let eps_over_beta = q_frac(1, cs.eps.inv() as i64) / &cs.beta;
    for row in assign.iter_mut() {
        let load = |row: &Vec<Option<usize>>| -> usize {
            row.iter().enumerate().filter_map(|(s, j)| j.map(|j| cat.counts[s][j])).sum()
        };
        if load(row) <= c {
            continue;
        }
        let u = row.iter().filter(|j| j.is_some()).count();
        let planned = (&eps_over_beta * q(u as i64)).ceil().to_integer().to_usize().unwrap_or(u);
        let mut taken = 0;
        while load(row) > c || taken < planned {
            let Some(s) = (0..k)
                .filter(|&s| row[s].is_some())
                .max_by_key(|&s| (cat.counts[s][row[s].unwrap()], std::cmp::Reverse(s)))
            else {
                break;
            };
            removed.push((s, row[s].unwrap()));
            row[s] = None;
            taken += 1;
            if taken > planned {
                extra_removals += 1;
            }
        }
    }
    let mut held = vec![vec![false; m]; k];
    for row in &assign {
        for (s, j) in row.iter().enumerate() {
            if let Some(j) = j {
                held[s][*j] = true;
            }
        }
    }
    let unassigned = (0..k).flat_map(|s| (0..m).map(move |j| (s, j))).filter(|&(s, j)| !held[s][j]).collect();
    PartialTours { assign, removed, unassigned, extra_removals }
}

/// Geometry of one type for tour assembly.
#[derive(Clone, Debug)]
pub struct TypeGeometry<'a> {
    pub points: &'a [Point],
    /// Depot (start and end of every tour).
    pub depot: Point,
    /// Traversal order of (square, pair) pieces, with the pair's endpoints.
    pub pieces: Vec<(usize, usize, Point, Point)>,
    pub squares: &'a [SquarePaths],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    Point(usize),
    Via(Point),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assembly {
    /// Stops per tour, depot excluded at both ends.
    pub tours: Vec<Vec<Stop>>,
    pub slices: usize,
    pub closing_cost: f64,
    pub insertion_cost: f64,
}

impl Assembly {
    pub fn visits(&self, i: usize) -> Vec<usize> {
        self.tours[i]
            .iter()
            .filter_map(|s| match s {
                Stop::Point(p) => Some(*p),
                Stop::Via(_) => None,
            })
            .collect()
    }

    pub fn polyline(&self, geo: &TypeGeometry, i: usize) -> Vec<Point> {
        let mut v = vec![geo.depot];
        v.extend(self.tours[i].iter().map(|s| match s {
            Stop::Point(p) => geo.points[*p],
            Stop::Via(q) => *q,
        }));
        v.push(geo.depot);
        v
    }
}

/// Total length of every segment path a → points → b.
pub fn segments_cost(geo: &TypeGeometry) -> f64 {
    let mut total = 0.0;
    for &(s, p, a, b) in &geo.pieces {
        for path in &geo.squares[s].paths[p] {
            let mut pl = vec![a];
            pl.extend(path.iter().map(|&k| geo.points[k]));
            pl.push(b);
            total += polyline_length(&pl);
        }
    }
    total
}

/// Closes every tour (gaps become straight anchor-to-anchor hops), then
/// spreads the points of unassigned segments over tours with room, next-fit,
/// inserting each slice at its cheapest position.
pub fn close_gaps_and_assign_slices(
    pt: &PartialTours,
    cat: &SegmentCatalog,
    geo: &TypeGeometry,
    c: usize,
) -> Result<Assembly> {
    let m = cat.m;
    if cat.total() > c * m {
        return Err(Error::Precondition(format!(
            "type holds {} points but {m} tours carry at most {}",
            cat.total(),
            c * m
        )));
    }
    let mut tours: Vec<Vec<Stop>> = vec![Vec::new(); m];
    let mut closing_cost = 0.0;
    for (i, tour) in tours.iter_mut().enumerate() {
        for &(s, p, a, b) in &geo.pieces {
            tour.push(Stop::Via(a));
            if let Some(j) = pt.assign[i][s] {
                tour.extend(geo.squares[s].paths[p][j].iter().map(|&k| Stop::Point(k)));
            }
            tour.push(Stop::Via(b));
        }
        for s in 0..cat.k() {
            if pt.assign[i][s].is_none() {
                closing_cost += geo
                    .pieces
                    .iter()
                    .filter(|x| x.0 == s)
                    .map(|x| x.2.dist(x.3))
                    .sum::<f64>();
            }
        }
    }
    let mut room: Vec<usize> = (0..m).map(|i| c - pt.load(cat, i).min(c)).collect();
    let mut slices = 0;
    let mut insertion_cost = 0.0;
    let mut ti = 0;
    for &(s, j) in &pt.unassigned {
        // The segment's points in traversal order.
        let mut pts: Vec<usize> = Vec::new();
        for &(ps, p, _, _) in &geo.pieces {
            if ps == s {
                pts.extend(geo.squares[s].paths[p][j].iter().copied());
            }
        }
        let mut pos = 0;
        while pos < pts.len() {
            while ti < m && room[ti] == 0 {
                ti += 1;
            }
            if ti == m {
                return Err(Error::Internal("slice assignment ran out of capacity".into()));
            }
            let take = room[ti].min(pts.len() - pos);
            let slice = &pts[pos..pos + take];
            insertion_cost += insert_slice(&mut tours[ti], slice, geo);
            room[ti] -= take;
            pos += take;
            slices += 1;
        }
    }
    Ok(Assembly { tours, slices, closing_cost, insertion_cost })
}

/// Inserts a chain of points between two consecutive stops (or the depot
/// ends) where it adds the least length; returns that added length.
fn insert_slice(tour: &mut Vec<Stop>, slice: &[usize], geo: &TypeGeometry) -> f64 {
    let at = |s: &Stop| match s {
        Stop::Point(p) => geo.points[*p],
        Stop::Via(q) => *q,
    };
    let chain: Vec<Point> = slice.iter().map(|&k| geo.points[k]).collect();
    let inner = polyline_length(&chain);
    let mut best = (f64::INFINITY, 0usize, false);
    for pos in 0..=tour.len() {
        let u = if pos == 0 { geo.depot } else { at(&tour[pos - 1]) };
        let v = if pos == tour.len() { geo.depot } else { at(&tour[pos]) };
        for rev in [false, true] {
            let (first, last) = if rev { (chain[chain.len() - 1], chain[0]) } else { (chain[0], chain[chain.len() - 1]) };
            let add = u.dist(first) + inner + last.dist(v) - u.dist(v);
            if add < best.0 {
                best = (add, pos, rev);
            }
        }
    }
    let mut ins: Vec<Stop> = slice.iter().map(|&k| Stop::Point(k)).collect();
    if best.2 {
        ins.reverse();
    }
    tour.splice(best.1..best.1, ins);
    best.0
}

/// Cutoff between small and large types and the grid-size bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeThreshold {
    /// None when k ≤ 16/ε² (every type counts as small).
    pub m_threshold: Option<f64>,
    /// 32/(ε²δ) + 1 (infinite for δ = 0).
    pub q_min: f64,
}

pub fn type_threshold(k: usize, eps: Eps, delta: f64) -> TypeThreshold {
    let e = eps.value();
    let kf = k as f64;
    let m_threshold = (kf > 16.0 / (e * e)).then(|| (1296.0 * kf * kf / (e * e * e)) / (e * (kf / 4.0 - 4.0 / (e * e))));
    let q_min = if delta > 0.0 { 32.0 / (e * e * delta) + 1.0 } else { f64::INFINITY };
    TypeThreshold { m_threshold, q_min }
}
