//! Exact oracles (Held-Karp, exhaustive CVRP and m-paths) and the iterated
//! tour partitioning baseline.

use crate::error::{Error, Result};
use crate::model::{
    CvrpInstance, CvrpSolution, MPathsInstance, MPathsSolution, Point, Tour,
};

pub const HELD_KARP_MAX: usize = 18;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleBudget {
    pub max_points: usize,
    pub max_m: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_points: 7,
            max_m: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HkVariant {
    /// Closed tour through all points.
    Tour,
    /// Open path a -> (all points) -> b.
    Path { a: Point, b: Point },
}

/// Exact TSP by dynamic programming over subsets. Returns the visiting order
/// and its cost (for `Tour` the order starts at index 0).
pub fn held_karp(points: &[Point], variant: HkVariant) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    if n > HELD_KARP_MAX {
        return Err(Error::BudgetExceeded(format!(
            "held_karp supports at most {HELD_KARP_MAX} points, got {n}"
        )));
    }
    match variant {
        HkVariant::Tour => {
            if n <= 1 {
                return Ok(((0..n).collect(), 0.0));
            }
            // Fix point 0 as the start; run the path DP over the others.
            let rest: Vec<Point> = points[1..].to_vec();
            let (order, cost) = hk_path(points[0], points[0], &rest);
            let mut full = vec![0];
            full.extend(order.into_iter().map(|i| i + 1));
            Ok((full, cost))
        }
        HkVariant::Path { a, b } => Ok(hk_path(a, b, points)),
    }
}

fn hk_path(a: Point, b: Point, pts: &[Point]) -> (Vec<usize>, f64) {
    let n = pts.len();
    if n == 0 {
        return (vec![], a.dist(b));
    }
    let full = (1usize << n) - 1;
    let mut dp = vec![f64::INFINITY; (1 << n) * n];
    let mut par = vec![u8::MAX; (1 << n) * n];
    for j in 0..n {
        dp[(1 << j) * n + j] = a.dist(pts[j]);
    }
    let d: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| pts[i].dist(pts[j])).collect())
        .collect();
    for s in 1..=full {
        for j in 0..n {
            if s & (1 << j) == 0 {
                continue;
            }
            let cur = dp[s * n + j];
            if !cur.is_finite() {
                continue;
            }
            let mut rem = full & !s;
            while rem != 0 {
                let k = rem.trailing_zeros() as usize;
                rem &= rem - 1;
                let t = s | (1 << k);
                let c = cur + d[j][k];
                if c < dp[t * n + k] {
                    dp[t * n + k] = c;
                    par[t * n + k] = j as u8;
                }
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut last = 0;
    for j in 0..n {
        let c = dp[full * n + j] + pts[j].dist(b);
        if c < best {
            best = c;
            last = j;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut s = full;
    let mut j = last;
    loop {
        order.push(j);
        let p = par[s * n + j];
        s &= !(1 << j);
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    order.reverse();
    (order, best)
}

fn subset_members(s: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| s & (1 << i) != 0).collect()
}

/// Exact CVRP optimum: cheapest partition into parts of size <= c, each part
/// served by its optimal depot round trip.
pub fn brute_force_cvrp(inst: &CvrpInstance, budget: OracleBudget) -> Result<CvrpSolution> {
    let n = inst.n();
    if n > budget.max_points {
        return Err(Error::BudgetExceeded(format!(
            "brute_force_cvrp: n = {n} > {}",
            budget.max_points
        )));
    }
    let c = inst.capacity;
    let size = 1usize << n;
    let mut part_cost = vec![f64::INFINITY; size];
    let mut part_order: Vec<Vec<usize>> = vec![Vec::new(); size];
    part_cost[0] = 0.0;
    for s in 1..size {
        let members = subset_members(s, n);
        if members.len() > c {
            continue;
        }
        let pts: Vec<Point> = members.iter().map(|&i| inst.points[i]).collect();
        let (ord, cost) = held_karp(
            &pts,
            HkVariant::Path {
                a: inst.depot,
                b: inst.depot,
            },
        )?;
        part_cost[s] = cost;
        part_order[s] = ord.into_iter().map(|k| members[k]).collect();
    }
    let mut best = vec![f64::INFINITY; size];
    let mut choice = vec![0usize; size];
    best[0] = 0.0;
    for s in 1..size {
        let low = s & s.wrapping_neg();
        let rest = s & !low;
        // Enumerate subsets t of s that contain the lowest element.
        let mut sub = rest;
        loop {
            let t = sub | low;
            if part_cost[t].is_finite() {
                let v = part_cost[t] + best[s & !t];
                if v < best[s] {
                    best[s] = v;
                    choice[s] = t;
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    let mut tours = Vec::new();
    let mut s = size - 1;
    while s != 0 {
        let t = choice[s];
        tours.push(Tour::new(part_order[t].clone()));
        s &= !t;
    }
    CvrpSolution::from_tours(inst, tours)
}

/// Exact m-paths optimum: cheapest split of the points into m (possibly
/// empty) groups, each served by an optimal a->b path.
pub fn brute_force_mpaths(inst: &MPathsInstance, budget: OracleBudget) -> Result<MPathsSolution> {
    let n = inst.n();
    let m = inst.m;
    if n > budget.max_points || m > budget.max_m {
        return Err(Error::BudgetExceeded(format!(
            "brute_force_mpaths: n = {n}, m = {m} beyond budget {budget:?}"
        )));
    }
    if m == 0 {
        return Err(Error::Precondition("m must be positive".into()));
    }
    let size = 1usize << n;
    let mut pc = vec![0.0; size];
    let mut po: Vec<Vec<usize>> = vec![Vec::new(); size];
    for s in 0..size {
        let members = subset_members(s, n);
        let pts: Vec<Point> = members.iter().map(|&i| inst.points[i]).collect();
        let (ord, cost) = held_karp(&pts, HkVariant::Path { a: inst.a, b: inst.b })?;
        pc[s] = cost;
        po[s] = ord.into_iter().map(|k| members[k]).collect();
    }
    // f[k][s]: cheapest cover of s by exactly k paths.
    let mut f = vec![pc.clone()];
    let mut ch = vec![(0..size).collect::<Vec<_>>()];
    for k in 1..m {
        let prev = &f[k - 1];
        let mut cur = vec![f64::INFINITY; size];
        let mut cc = vec![0usize; size];
        for s in 0..size {
            // one empty path
            cur[s] = pc[0] + prev[s];
            cc[s] = 0;
            if s == 0 {
                continue;
            }
            let low = s & s.wrapping_neg();
            let rest = s & !low;
            let mut sub = rest;
            loop {
                let t = sub | low;
                let v = pc[t] + prev[s & !t];
                if v < cur[s] {
                    cur[s] = v;
                    cc[s] = t;
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        f.push(cur);
        ch.push(cc);
    }
    let mut paths = Vec::with_capacity(m);
    let mut s = size - 1;
    for k in (0..m).rev() {
        let t = if k == 0 { s } else { ch[k][s] };
        paths.push(po[t].clone());
        s &= !t;
    }
    let sol = MPathsSolution::from_paths(inst, paths)?;
    let lb = m as f64 * inst.a.dist(inst.b);
    debug_assert!(sol.cost + 1e-9 >= lb);
    Ok(sol)
}

/// Tour through all points: exact when small, otherwise nearest neighbour
/// followed by 2-opt. The boolean reports whether the tour is exact.
pub fn tsp_tour(points: &[Point]) -> (Vec<usize>, f64, bool) {
    if points.len() <= HELD_KARP_MAX {
        let (o, c) = held_karp(points, HkVariant::Tour).expect("within budget");
        return (o, c, true);
    }
    let (o, c) = two_opt_tour(points);
    (o, c, false)
}

pub fn two_opt_tour(points: &[Point]) -> (Vec<usize>, f64) {
    let n = points.len();
    if n <= 3 {
        let o: Vec<usize> = (0..n).collect();
        let c = closed_length(points, &o);
        return (o, c);
    }
    let mut used = vec![false; n];
    let mut order = vec![0usize];
    used[0] = true;
    for _ in 1..n {
        let last = points[*order.last().unwrap()];
        let next = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&i, &j| last.dist(points[i]).total_cmp(&last.dist(points[j])))
            .unwrap();
        used[next] = true;
        order.push(next);
    }
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n - 1 {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = (points[order[i]], points[order[i + 1]]);
                let (c, d) = (points[order[j]], points[order[(j + 1) % n]]);
                let delta = a.dist(c) + b.dist(d) - a.dist(b) - c.dist(d);
                if delta < -1e-12 {
                    order[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
    }
    let c = closed_length(points, &order);
    (order, c)
}

fn closed_length(points: &[Point], order: &[usize]) -> f64 {
    if order.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 0..order.len() {
        total += points[order[k]].dist(points[order[(k + 1) % order.len()]]);
    }
    total
}

#[derive(Clone, Debug, PartialEq)]
pub struct ItpResult {
    pub solution: CvrpSolution,
    pub exact_tsp: bool,
    pub tsp_cost: f64,
    pub offset: usize,
}

/// Iterated tour partitioning: a TSP tour through the depot is cut into runs
/// of at most c points, each closed through the depot. All c offsets of the
/// cut are tried and the cheapest kept.
pub fn itp(inst: &CvrpInstance) -> Result<ItpResult> {
    let mut all = vec![inst.depot];
    all.extend_from_slice(&inst.points);
    let (order, tsp_cost, exact) = tsp_tour(&all);
    let start = order.iter().position(|&i| i == 0).unwrap();
    let seq: Vec<usize> = (1..order.len())
        .map(|k| order[(start + k) % order.len()] - 1)
        .collect();
    let c = inst.capacity;
    let mut best: Option<(CvrpSolution, usize)> = None;
    for offset in 0..c.min(seq.len()).max(1) {
        let mut tours = Vec::new();
        let mut pos = 0;
        let first = if offset == 0 { c } else { offset };
        let mut take = first;
        while pos < seq.len() {
            let end = (pos + take).min(seq.len());
            tours.push(Tour::new(seq[pos..end].to_vec()));
            pos = end;
            take = c;
        }
        let sol = CvrpSolution::from_tours(inst, tours)?;
        if best.as_ref().map_or(true, |(b, _)| sol.cost < b.cost) {
            best = Some((sol, offset));
        }
    }
    let (solution, offset) = best.expect("at least one offset");
    Ok(ItpResult {
        solution,
        exact_tsp: exact,
        tsp_cost,
        offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_cvrp_solution, validate_mpaths_solution, Eps, Square};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
        (0..n)
            .map(|_| Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
            .collect()
    }

    fn perm_min(a: Point, b: Point, pts: &[Point]) -> f64 {
        fn rec(a: Point, b: Point, pts: &[Point], used: &mut Vec<bool>, cur: Point, acc: f64, best: &mut f64) {
            if used.iter().all(|&u| u) {
                *best = best.min(acc + cur.dist(b));
                return;
            }
            for i in 0..pts.len() {
                if !used[i] {
                    used[i] = true;
                    rec(a, b, pts, used, pts[i], acc + cur.dist(pts[i]), best);
                    used[i] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(a, b, pts, &mut vec![false; pts.len()], a, 0.0, &mut best);
        best
    }

    #[test]
    fn held_karp_small_cases() {
        let tri = [Point::new(0.0, 0.0), Point::new(3.0, 0.0), Point::new(0.0, 4.0)];
        let (_, c) = held_karp(&tri, HkVariant::Tour).unwrap();
        assert!((c - 12.0).abs() < 1e-12);
        let line = [Point::new(2.0, 0.0), Point::new(1.0, 0.0), Point::new(3.0, 0.0)];
        let (o, c) = held_karp(
            &line,
            HkVariant::Path {
                a: Point::new(0.0, 0.0),
                b: Point::new(4.0, 0.0),
            },
        )
        .unwrap();
        assert!((c - 4.0).abs() < 1e-12);
        assert_eq!(o, vec![1, 0, 2]);
        assert!(held_karp(&vec![Point::default(); 19], HkVariant::Tour).is_err());
    }

    #[test]
    fn held_karp_matches_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let pts = rand_points(&mut rng, 8);
            let (_, c) = held_karp(&pts, HkVariant::Tour).unwrap();
            let brute = perm_min(pts[0], pts[0], &pts[1..]);
            assert!((c - brute).abs() < 1e-9);
            let a = Point::new(-6.0, 0.0);
            let b = Point::new(6.0, 1.0);
            let (o, c) = held_karp(&pts, HkVariant::Path { a, b }).unwrap();
            assert!((c - perm_min(a, b, &pts)).abs() < 1e-9);
            let mut sorted = o.clone();
            sorted.sort();
            assert_eq!(sorted, (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn tour_vs_path_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = rand_points(&mut rng, 6);
        let (_, tour) = held_karp(&pts, HkVariant::Tour).unwrap();
        let (_, path) = held_karp(
            &pts[1..],
            HkVariant::Path {
                a: pts[0],
                b: pts[0],
            },
        )
        .unwrap();
        assert!((tour - path).abs() < 1e-9);
    }

    /// Independent enumerator: every permutation, split greedily at every
    /// possible cut pattern.
    fn cvrp_by_permutation(inst: &CvrpInstance) -> f64 {
        fn perms(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
            if k == v.len() {
                out.push(v.clone());
                return;
            }
            for i in k..v.len() {
                v.swap(k, i);
                perms(v, k + 1, out);
                v.swap(k, i);
            }
        }
        let n = inst.n();
        let mut all = Vec::new();
        perms(&mut (0..n).collect(), 0, &mut all);
        let mut best = f64::INFINITY;
        for p in all {
            for cuts in 0..(1usize << (n - 1)) {
                let mut tours = vec![vec![p[0]]];
                for k in 1..n {
                    if cuts & (1 << (k - 1)) != 0 {
                        tours.push(vec![]);
                    }
                    tours.last_mut().unwrap().push(p[k]);
                }
                if tours.iter().any(|t| t.len() > inst.capacity) {
                    continue;
                }
                let sol = CvrpSolution::from_tours(
                    inst,
                    tours.into_iter().map(Tour::new).collect(),
                )
                .unwrap();
                best = best.min(sol.cost);
            }
        }
        best
    }

    #[test]
    fn brute_force_cvrp_examples() {
        let eps = Eps::from_inverse(2).unwrap();
        let one = CvrpInstance::new(Point::default(), vec![Point::new(3.0, 4.0)], 1, eps).unwrap();
        let s = brute_force_cvrp(&one, OracleBudget::default()).unwrap();
        assert_eq!(s.tours.len(), 1);
        assert!((s.cost - 10.0).abs() < 1e-12);

        let two = CvrpInstance::new(
            Point::default(),
            vec![Point::new(1.0, 0.0), Point::new(0.0, 2.0)],
            1,
            eps,
        )
        .unwrap();
        let s = brute_force_cvrp(&two, OracleBudget::default()).unwrap();
        assert!((s.cost - 6.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..6 {
            let inst = CvrpInstance::new(Point::default(), rand_points(&mut rng, 4), 2, eps).unwrap();
            let s = brute_force_cvrp(&inst, OracleBudget::default()).unwrap();
            assert!(validate_cvrp_solution(&inst, &s).is_ok());
            assert!((s.cost - cvrp_by_permutation(&inst)).abs() < 1e-9);
        }
        let big = CvrpInstance::new(Point::default(), rand_points(&mut rng, 8), 2, eps).unwrap();
        assert!(matches!(
            brute_force_cvrp(&big, OracleBudget::default()),
            Err(Error::BudgetExceeded(_))
        ));
    }

    fn unit_mpaths(points: Vec<Point>, m: usize) -> MPathsInstance {
        MPathsInstance {
            square: Square::unit(),
            a: Point::new(0.0, 0.25),
            b: Point::new(0.0, 0.75),
            m,
            points,
            eps: Eps::from_inverse(2).unwrap(),
        }
    }

    #[test]
    fn brute_force_mpaths_examples() {
        let empty = unit_mpaths(vec![], 3);
        let s = brute_force_mpaths(&empty, OracleBudget::default()).unwrap();
        assert!((s.cost - 1.5).abs() < 1e-12);
        assert_eq!(s.paths.len(), 3);

        let mid = unit_mpaths(vec![Point::new(0.5, 0.5)], 2);
        let s = brute_force_mpaths(&mid, OracleBudget::default()).unwrap();
        let expect = 0.5 + 2.0 * 0.3125f64.sqrt();
        assert!((s.cost - expect).abs() < 1e-9);
        assert!((s.cost - 1.6180).abs() < 1e-4);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let pts: Vec<Point> = (0..5)
                .map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>()))
                .collect();
            let one = unit_mpaths(pts.clone(), 1);
            let s = brute_force_mpaths(&one, OracleBudget::default()).unwrap();
            let (_, hk) = held_karp(&pts, HkVariant::Path { a: one.a, b: one.b }).unwrap();
            assert!((s.cost - hk).abs() < 1e-9);
            let three = unit_mpaths(pts, 3);
            let s3 = brute_force_mpaths(&three, OracleBudget::default()).unwrap();
            assert!(validate_mpaths_solution(&three, &s3).is_ok());
            assert!(s3.cost + 1e-12 >= 3.0 * 0.5);
        }
    }

    #[test]
    fn itp_examples_and_bound() {
        let eps = Eps::from_inverse(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts = rand_points(&mut rng, 5);
        let big_c = CvrpInstance::new(Point::default(), pts.clone(), 10, eps).unwrap();
        let r = itp(&big_c).unwrap();
        assert_eq!(r.solution.tours.len(), 1);
        assert!((r.solution.cost - r.tsp_cost).abs() < 1e-9);

        let c1 = CvrpInstance::new(Point::default(), pts.clone(), 1, eps).unwrap();
        let r = itp(&c1).unwrap();
        let direct: f64 = pts.iter().map(|p| 2.0 * p.dist(Point::default())).sum();
        assert!((r.solution.cost - direct).abs() < 1e-9);

        for _ in 0..5 {
            let inst = CvrpInstance::new(Point::default(), rand_points(&mut rng, 7), 2, eps).unwrap();
            let r = itp(&inst).unwrap();
            assert!(r.exact_tsp);
            assert!(validate_cvrp_solution(&inst, &r.solution).is_ok());
            let opt = brute_force_cvrp(&inst, OracleBudget::default()).unwrap();
            assert!(r.solution.cost <= 2.0 * opt.cost + 1e-9);
        }
    }

    #[test]
    fn two_opt_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = rand_points(&mut rng, 25);
        let (o, c) = two_opt_tour(&pts);
        let mut s = o.clone();
        s.sort();
        assert_eq!(s, (0..25).collect::<Vec<_>>());
        assert!((c - closed_length(&pts, &o)).abs() < 1e-9);
    }
}
