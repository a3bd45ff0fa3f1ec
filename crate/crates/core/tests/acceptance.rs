//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use cvrp_qptas::anchor::{make_anchor_respecting, place_grid};
use cvrp_qptas::dissection::{
    rho_for_instance, snap_path_to_portals, stayinsquare_margin, Dissection, LayoutMode, PortalLayout,
};
use cvrp_qptas::flowgraph::{decode, encode, enumerate_flow_graphs, random_flow_graph, FlowGraph};
use cvrp_qptas::lp::{
    build_constraints, build_segments, classify, close_gaps_and_assign_slices, extract_partial_tours, f_bound,
    simplex::{enumerate_vertices, q},
    solve_extreme_point, SegmentCatalog, SquarePaths, TypeGeometry,
};
use cvrp_qptas::mpaths::{run_shift, solve_mpaths, CellCache, DpCaps, FlowMode, MPathsConfig, ModeChoice, ShiftRun};
use cvrp_qptas::oracle::{brute_force_cvrp, brute_force_mpaths, itp, OracleBudget};
use cvrp_qptas::pipeline::{run_pipeline, PipelineConfig};
use cvrp_qptas::rings::{partition_instance, sample_rings, BoundedInstance};
use cvrp_qptas::run::{emit_report, parse_report, ConstantInputs, Constants, RunReport};
use cvrp_qptas::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::time::Instant;

type Outcome = std::result::Result<String, String>;

fn half() -> Eps {
    Eps::from_inverse(2).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// m-paths suite shared by criteria 1-3.

fn boundary_point(rng: &mut ChaCha8Rng) -> Point {
    let t: f64 = rng.gen_range(0.0..1.0);
    match rng.gen_range(0..4) {
        0 => Point::new(t, 0.0),
        1 => Point::new(1.0, t),
        2 => Point::new(t, 1.0),
        _ => Point::new(0.0, t),
    }
}

fn mpaths_suite() -> Vec<MPathsInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    while out.len() < 50 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=3);
        let (a, b) = (boundary_point(&mut rng), boundary_point(&mut rng));
        // d(a,b) >= ετ/2 with τ = 1.
        if a.dist(b) < 0.25 {
            continue;
        }
        let points = (0..n).map(|_| Point::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))).collect();
        let inst = MPathsInstance { square: Square::unit(), a, b, m, points, eps: half() };
        assert!(inst.assumption_violations().is_empty());
        out.push(inst);
    }
    out
}

struct ExactResult {
    inst: MPathsInstance,
    runs: Vec<ShiftRun>,
    rho: u32,
    best_shift: (i64, i64),
}

fn c1_exact(suite: &[MPathsInstance], results: &mut Vec<ExactResult>) -> Outcome {
    let cfg = MPathsConfig { mode: ModeChoice::Exact, shifts: 16, ..MPathsConfig::default() };
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut fails = Vec::new();
    for (k, inst) in suite.iter().enumerate() {
        let r = solve_mpaths(inst, &cfg).map_err(|e| format!("instance {k}: {e}"))?;
        let bf = brute_force_mpaths(inst, OracleBudget::default()).map_err(|e| e.to_string())?;
        let d = Dissection::new(inst.square, r.rho, (1, 1)).unwrap();
        let snap = std::f64::consts::SQRT_2 * inst.n() as f64 * inst.square.side / d.l1 as f64;
        let allowed = (1.0 + inst.eps.value()) * bf.cost + snap + 1e-6;
        if bf.cost > 0.0 {
            worst = worst.max(r.solution.cost / bf.cost);
        }
        if r.solution.cost > allowed || !validate_mpaths_solution(inst, &r.solution).is_ok() {
            fails.push(format!("#{k} cost {:.6} > {:.6}", r.solution.cost, allowed));
        }
        let best_shift = r.best.map(|b| r.runs[b].shift).unwrap_or((1, 1));
        results.push(ExactResult { inst: inst.clone(), runs: r.runs, rho: r.rho, best_shift });
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(fails.is_empty(), || fails.join("; "))?;
    ensure(secs <= 600.0, || format!("took {secs:.0}s > 600s"))?;
    Ok(format!("{} instances, worst ratio vs oracle {worst:.4}, {secs:.0}s", suite.len()))
}

fn c2_rounded(results: &[ExactResult]) -> Outcome {
    let alpha = 2.0;
    let mut checked = 0;
    let mut worst_repair: f64 = 0.0;
    for (k, r) in results.iter().enumerate() {
        let inst = &r.inst;
        let reduced = MPathsInstance { m: inst.m.min(inst.n()), ..inst.clone() };
        let rho = rho_for_instance(&reduced);
        let layout = PortalLayout::new(rho, 3, LayoutMode::Restricted).unwrap();
        let d = Dissection::new(reduced.square, rho, r.best_shift).unwrap();
        let mut done = false;
        for outside in [false, true] {
            let caps = DpCaps { outside_cells: outside, ..DpCaps::default() };
            let ex = run_shift(&reduced, &d, &layout, FlowMode::Exact, &caps, &mut CellCache::default());
            let ro = run_shift(&reduced, &d, &layout, FlowMode::Rounded { alpha }, &caps, &mut CellCache::default());
            let (ex, ro) = match (ex, ro) {
                (Ok(e), Ok(o)) => (e, o),
                _ => continue,
            };
            ensure(ro.z_dp <= ex.z_dp + 1e-9, || format!("#{k}: Z_DP {} > exact {}", ro.z_dp, ex.z_dp))?;
            let mr = reduced.m;
            let hi = (alpha.powi(rho as i32) * mr as f64).ceil() as u32;
            ensure(ro.m_prime as usize >= mr && ro.m_prime <= hi, || format!("#{k}: m' = {} outside [{mr}, {hi}]", ro.m_prime))?;
            let e = inst.eps.value();
            let factor = (1.0 + (alpha * alpha - 1.0) * 8.0 * rho as f64 / e).powi(rho as i32);
            ensure(ro.repaired_cost <= factor * ro.z_dp + 1e-9, || format!("#{k}: repaired {} > bound", ro.repaired_cost))?;
            if ro.z_dp > 0.0 {
                worst_repair = worst_repair.max(ro.repaired_cost / ro.z_dp);
            }
            let mut paths = ro.solution.paths.clone();
            paths.resize(inst.m, Vec::new());
            let sol = MPathsSolution::from_paths(inst, paths).unwrap();
            ensure(validate_mpaths_solution(inst, &sol).is_ok(), || format!("#{k}: repaired solution invalid"))?;
            done = true;
            break;
        }
        ensure(done, || format!("#{k}: no rounded run on shift {:?}", r.best_shift))?;
        checked += 1;
    }
    Ok(format!("{checked} instances at alpha = 2, worst repaired/Z_DP {worst_repair:.4}"))
}

fn c3_final(results: &[ExactResult]) -> Outcome {
    let mut runs = 0;
    let mut worst: f64 = 0.0;
    for (k, r) in results.iter().enumerate() {
        let e = r.inst.eps.value();
        let l1 = Dissection::new(r.inst.square, r.rho, (1, 1)).unwrap().l1 as f64;
        // Routed cost runs between cell centres; the real points sit up to
        // half a cell diagonal away on each side.
        let snap = std::f64::consts::SQRT_2 * r.inst.n() as f64 * r.inst.square.side / l1;
        for run in &r.runs {
            let bound = (1.0 + 14.0 * e) * run.z_dp;
            ensure(run.routed_cost <= bound + 1e-9, || format!("#{k} shift {:?}: {} > {}", run.shift, run.routed_cost, bound))?;
            ensure(run.solution.cost <= run.routed_cost + snap + 1e-9, || {
                format!("#{k}: solution {} above routed {} + snapping {snap}", run.solution.cost, run.routed_cost)
            })?;
            if run.z_dp > 0.0 {
                worst = worst.max(run.routed_cost / run.z_dp);
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} shift runs, worst routed/Z_DP {worst:.4} (limit {:.1})", 1.0 + 14.0 * 0.5))
}

// ---------------------------------------------------------------------------

fn brute_outer_planar(k: usize) -> BTreeSet<Vec<(usize, usize)>> {
    let cand: Vec<(usize, usize)> = (0..k).flat_map(|u| (0..k).filter(move |&v| v != u).map(move |v| (u, v))).collect();
    let cross = |a: (usize, usize), b: (usize, usize)| {
        let (a0, a1) = (a.0.min(a.1), a.0.max(a.1));
        let (b0, b1) = (b.0.min(b.1), b.0.max(b.1));
        (a0 < b0 && b0 < a1 && a1 < b1) || (b0 < a0 && a0 < b1 && b1 < a1)
    };
    let mut out = BTreeSet::new();
    fn rec(
        i: usize,
        cand: &[(usize, usize)],
        cur: &mut Vec<(usize, usize)>,
        out: &mut BTreeSet<Vec<(usize, usize)>>,
        cross: &dyn Fn((usize, usize), (usize, usize)) -> bool,
    ) {
        if i == cand.len() {
            let mut v = cur.clone();
            v.sort();
            out.insert(v);
            return;
        }
        rec(i + 1, cand, cur, out, cross);
        if cur.iter().all(|&a| !cross(a, cand[i])) {
            cur.push(cand[i]);
            rec(i + 1, cand, cur, out, cross);
            cur.pop();
        }
    }
    rec(0, &cand, &mut Vec::new(), &mut out, &cross);
    out
}

fn c4_flow_graphs() -> Outcome {
    let mut total = 0;
    for k in 1..=6 {
        let all = enumerate_flow_graphs(k, 10_000_000, None).map_err(|e| e.to_string())?;
        let want = brute_outer_planar(k);
        let got: BTreeSet<Vec<(usize, usize)>> = all.iter().map(|g| g.arcs.clone()).collect();
        ensure(got.len() == all.len() && got == want, || format!("K = {k}: {} graphs, oracle {}", all.len(), want.len()))?;
        let bound = if k < 2 { 0 } else { 4 * k - 6 };
        let most = all.iter().map(|g| g.arcs.len()).max().unwrap_or(0);
        ensure(most <= bound, || format!("K = {k}: {most} arcs > {bound}"))?;
        ensure(k < 2 || most == bound, || format!("K = {k}: bound {bound} not attained"))?;
        for g in &all {
            let s = encode(g).map_err(|e| e.to_string())?;
            ensure(decode(&s, k).ok().as_ref() == Some(g), || format!("K = {k}: round trip failed for {:?}", g.arcs))?;
        }
        total += all.len();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let g = random_flow_graph(12, &mut rng);
        ensure(g.arcs.len() <= FlowGraph::max_arcs(12), || "K = 12 arc bound".into())?;
        ensure(decode(&encode(&g).unwrap(), 12).unwrap() == g, || format!("K = 12 round trip {:?}", g.arcs))?;
    }
    Ok(format!("{total} graphs for K <= 6 match the oracle; 1000 sampled at K = 12"))
}

fn c5_layout() -> Outcome {
    let eps = half();
    let mut squares = 0;
    for rho in 1..=5u32 {
        let layout = PortalLayout::new(rho, PortalLayout::paper_p(rho, eps), LayoutMode::Restricted).unwrap();
        for level in 0..=rho {
            let (d, eta) = stayinsquare_margin(&layout, level).map_err(|e| e.to_string())?;
            ensure(d >= eta - 1e-12, || format!("rho {rho} level {level}: {d} < eta {eta}"))?;
            squares += 1usize << (2 * level);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut crossings = 0;
    for k in 0..1000 {
        let rho = rng.gen_range(2..=5u32);
        let layout = PortalLayout::new(rho, PortalLayout::paper_p(rho, eps), LayoutMode::Restricted).unwrap();
        let l0 = layout.l0 as f64;
        let len = rng.gen_range(2..6);
        let path: Vec<Point> = (0..len).map(|_| Point::new(rng.gen_range(0.01..l0 - 0.01), rng.gen_range(0.01..l0 - 0.01))).collect();
        let s = snap_path_to_portals(&layout, &path).map_err(|e| format!("polyline {k}: {e}"))?;
        for &(level, det) in &s.detours {
            let eta = layout.eta(level);
            ensure(det <= 4.0 * eta + 1e-9, || format!("polyline {k}: detour {det} > 4 eta {eta}"))?;
        }
        crossings += s.detours.len();
    }
    Ok(format!("{squares} squares over rho <= 5; {crossings} crossings on 1000 polylines within 4 eta"))
}

fn random_catalog(rng: &mut ChaCha8Rng) -> (SegmentCatalog, usize) {
    let m = rng.gen_range(1..=3);
    let k = match m {
        1 => rng.gen_range(1..=12),
        2 => rng.gen_range(1..=3),
        _ => 1,
    };
    let c = rng.gen_range(1..=4);
    let mut counts: Vec<Vec<usize>> = (0..k).map(|_| (0..m).map(|_| rng.gen_range(0..=c + 1)).collect()).collect();
    while counts.iter().flatten().sum::<usize>() > c * m {
        let (s, j) = (0..k).flat_map(|s| (0..m).map(move |j| (s, j))).max_by_key(|&(s, j)| counts[s][j]).unwrap();
        counts[s][j] -= 1;
    }
    (SegmentCatalog { m, counts }, c)
}

fn c6_lp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut vertices = 0;
    let mut fractional = 0;
    for t in 0..120 {
        let (cat, c) = random_catalog(&mut rng);
        let cs = build_constraints(&cat, c, half()).map_err(|e| format!("catalog {t}: {e}"))?;
        let ep = solve_extreme_point(&cs).map_err(|e| format!("catalog {t}: {e}"))?;
        let nx = cs.nvars();
        let verts = enumerate_vertices(&cs.standard_form(), 1 << 22).map_err(|e| e.to_string())?;
        ensure(verts.iter().any(|v| v[..nx] == ep.x[..]), || format!("catalog {t}: solver point is not a vertex"))?;
        for v in &verts {
            let e = classify(&cs, &v[..nx]);
            ensure(q(e.support as i64) <= cs.support_bound(), || format!("catalog {t}: support {}", e.support))?;
            ensure(q(e.fractional_pairs.len() as i64) <= cs.frac_bound(), || format!("catalog {t}: fractional pairs"))?;
        }
        vertices += verts.len();
        fractional += ep.fractional_pairs.len();
        let pt = extract_partial_tours(&ep, &cs, &cat);
        ensure(q(pt.f() as i64) <= f_bound(&cs), || format!("catalog {t}: f = {}", pt.f()))?;
        // Synthetic geometry: square s is [s, s+1] x [0, 1], one traversal.
        let (m, k) = (cat.m, cat.k());
        let mut points = Vec::new();
        let mut squares = Vec::new();
        for s in 0..k {
            let mut labels = Vec::new();
            for j in 0..m {
                let mut path = Vec::new();
                for _ in 0..cat.counts[s][j] {
                    path.push(points.len());
                    points.push(Point::new(s as f64 + rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)));
                }
                labels.push(path);
            }
            squares.push(SquarePaths { paths: vec![labels] });
        }
        ensure(build_segments(m, &squares).map(|x| x == cat).unwrap_or(false), || format!("catalog {t}: segment rebuild"))?;
        let depot = Point::new(0.0, 0.5);
        let pieces = (0..k)
            .map(|s| (s, 0, if s == 0 { depot } else { Point::new(s as f64, 0.5) }, Point::new(s as f64 + 1.0, 0.5)))
            .collect();
        let geo = TypeGeometry { points: &points, depot, pieces, squares: &squares };
        let asm = close_gaps_and_assign_slices(&pt, &cat, &geo, c).map_err(|e| format!("catalog {t}: {e}"))?;
        let mut seen = vec![0; points.len()];
        for i in 0..m {
            let v = asm.visits(i);
            ensure(v.len() <= c, || format!("catalog {t}: tour {i} holds {} > {c}", v.len()))?;
            v.iter().for_each(|&p| seen[p] += 1);
        }
        ensure(seen.iter().all(|&x| x == 1), || format!("catalog {t}: coverage {seen:?}"))?;
    }
    Ok(format!("120 catalogs, {vertices} vertices enumerated, {fractional} fractional pairs at solver vertices"))
}

fn random_cvrp(rng: &mut ChaCha8Rng, n: usize, c: usize, spread: f64) -> CvrpInstance {
    let pts = (0..n)
        .map(|_| {
            let r = (rng.gen_range(0.0..spread)).exp();
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            Point::new(r * th.cos(), r * th.sin())
        })
        .collect();
    CvrpInstance::new(Point::new(0.0, 0.0), pts, c, half()).unwrap()
}

fn c7_rings() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let n = rng.gen_range(2..=6);
        let c = rng.gen_range(1..=3);
        let inst = random_cvrp(&mut rng, n, c, 3.0);
        let opt = brute_force_cvrp(&inst, OracleBudget::default()).unwrap().cost;
        let mut memo: HashMap<Vec<usize>, f64> = HashMap::new();
        let mut total = 0.0;
        for seed in 0..200 {
            let rp = sample_rings(&inst, seed).map_err(|e| e.to_string())?;
            for b in partition_instance(&inst, &rp) {
                let v = match memo.get(&b.original) {
                    Some(v) => *v,
                    None => {
                        let v = brute_force_cvrp(&b.instance, OracleBudget::default()).unwrap().cost;
                        memo.insert(b.original.clone(), v);
                        v
                    }
                };
                total += v;
            }
        }
        let mean = total / 200.0;
        let ratio = mean / opt;
        worst = worst.max(ratio);
        ensure(mean <= 1.05 * 1.5 * opt + 1e-9, || format!("instance {t}: mean {mean} vs opt {opt}"))?;
    }
    Ok(format!("20 instances, worst mean ratio {worst:.4} (limit {:.3})", 1.05 * 1.5))
}

fn c8_anchor() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst: f64 = 0.0;
    let mut most = 0;
    for t in 0..20 {
        let n = rng.gen_range(1..=6);
        let c = rng.gen_range(1..=3);
        let inst = random_cvrp(&mut rng, n, c, 1.0);
        let opt = brute_force_cvrp(&inst, OracleBudget::default()).unwrap();
        let d = inst.points.iter().map(|p| p.dist(inst.depot)).fold(0.0, f64::max);
        let b = BoundedInstance { instance: inst.clone(), original: (0..n).collect(), ring: 1, d_outer: d, delta: 0.0 };
        let mut total = 0.0;
        for seed in 0..200 {
            let g = place_grid(&b, 3, seed).map_err(|e| e.to_string())?;
            for tour in &opt.tours {
                let mut poly = vec![inst.depot];
                poly.extend(tour.visits.iter().map(|&i| inst.points[i]));
                poly.push(inst.depot);
                let at = make_anchor_respecting(&g, &poly).map_err(|e| format!("instance {t} seed {seed}: {e}"))?;
                let cross = at.tour_type.max_crossings();
                most = most.max(cross);
                ensure(cross <= 6, || format!("instance {t} seed {seed}: {cross} crossings at one anchor"))?;
                total += polyline_length(&at.polyline);
            }
        }
        let mean = total / 200.0;
        if opt.cost > 0.0 {
            worst = worst.max(mean / opt.cost);
        }
        ensure(mean <= 1.05 * 3.5 * opt.cost + 1e-9, || format!("instance {t}: mean {mean} vs opt {}", opt.cost))?;
    }
    Ok(format!("20 instances x 200 grids, worst mean ratio {worst:.4} (limit {:.3}), max crossings per anchor {most}", 1.05 * 3.5))
}

fn c9_pipeline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut ratios = Vec::new();
    for t in 0..20 {
        let n = rng.gen_range(1..=6);
        let inst = random_cvrp(&mut rng, n, 2, 2.0);
        let cfg = PipelineConfig { seed: t, ..PipelineConfig::default() };
        let (sol, _) = run_pipeline(&inst, &cfg).map_err(|e| format!("instance {t}: {e}"))?;
        ensure(validate_cvrp_solution(&inst, &sol).is_ok(), || format!("instance {t}: invalid"))?;
        let opt = brute_force_cvrp(&inst, OracleBudget::default()).unwrap().cost;
        let r = sol.cost / opt;
        ensure(r <= 2.0 + 1e-9, || format!("instance {t}: ratio {r}"))?;
        ratios.push(r);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(format!("20 instances, ratio vs oracle mean {mean:.4} max {max:.4}"))
}

fn c10_itp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst: f64 = 0.0;
    for t in 0..40 {
        let n = rng.gen_range(1..=7);
        let c = rng.gen_range(1..=4);
        let inst = random_cvrp(&mut rng, n, c, 2.0);
        let r = itp(&inst).map_err(|e| e.to_string())?;
        ensure(validate_cvrp_solution(&inst, &r.solution).is_ok(), || format!("instance {t}: infeasible"))?;
        ensure(r.exact_tsp, || format!("instance {t}: tsp not exact"))?;
        let opt = brute_force_cvrp(&inst, OracleBudget::default()).unwrap().cost;
        ensure(r.solution.cost <= 2.0 * opt + 1e-9, || format!("instance {t}: {} > 2 * {opt}", r.solution.cost))?;
        worst = worst.max(r.solution.cost / opt);
    }
    for t in 0..10 {
        let inst = random_cvrp(&mut rng, 30 + t, 1 + t % 5, 2.0);
        let r = itp(&inst).map_err(|e| e.to_string())?;
        ensure(validate_cvrp_solution(&inst, &r.solution).is_ok(), || format!("large instance {t}: infeasible"))?;
    }
    Ok(format!("40 oracle instances, worst ratio {worst:.4}; 10 larger instances feasible"))
}

fn c11_constants() -> Outcome {
    let mut checked = 0;
    for n in [1usize, 2, 3, 5, 8, 16, 100, 1000] {
        for inv in [2u32, 3, 4, 8] {
            for (k, c, delta) in [(1usize, 4usize, 0.0), (128, 8, 0.1), (4000, 3, 0.5)] {
                let eps = Eps::from_inverse(inv).unwrap();
                let e = 1.0 / inv as f64;
                let inp = ConstantInputs { n, eps, delta, q: 5, d_outer: 3.0, k, c, alpha: None };
                let got = Constants::derive(inp).map_err(|e| e.to_string())?;
                let rep = RunReport { constants: vec![("x".into(), got)], ..RunReport::default() };
                let kv = parse_report(&emit_report(&rep));
                let g = |key: &str| kv.get(&format!("constants.x.{key}")).cloned().unwrap_or_default();
                let real = |key: &str| -> f64 {
                    match g(key).as_str() {
                        "inf" => f64::INFINITY,
                        s => s.parse().unwrap_or(f64::NAN),
                    }
                };
                let close = |a: f64, b: f64| (a.is_infinite() && a == b) || (a - b).abs() <= 1e-12 * b.abs().max(1.0);
                // Independent recomputation.
                let mut rho = 0u32;
                while ((n as u64 * inv as u64) >> (rho + 1)) >= 1 {
                    rho += 1;
                }
                let rho = rho.max(1);
                let nport = 4 * rho as i64 * inv as i64 + 1;
                let alpha = (1.0 + e * (1.0 + e * e).ln() / (8.0 * (rho * rho) as f64)).sqrt();
                let mut f = BTreeSet::from([0u64, n as u64]);
                let mut nf = 0;
                while (alpha.powi(nf as i32).floor() as u64) < n as u64 {
                    f.insert(alpha.powi(nf as i32).floor() as u64);
                    nf += 1;
                }
                let beta = 72.0 / e;
                let spread = e * c as f64 / (beta * k as f64);
                let q_min = if delta > 0.0 { 32.0 / (e * e * delta) + 1.0 } else { f64::INFINITY };
                let kf = k as f64;
                let thr = (kf > 16.0 / (e * e)).then(|| 1296.0 * kf * kf / (e * e * e) / (e * (kf / 4.0 - 4.0 / (e * e))));
                let tag = format!("n = {n}, eps = 1/{inv}, k = {k}");
                ensure(g("rho") == rho.to_string(), || format!("{tag}: rho {} vs {rho}", g("rho")))?;
                ensure(g("nport") == nport.to_string(), || format!("{tag}: nport"))?;
                ensure(g("f_size") == f.len().to_string(), || format!("{tag}: |F| {} vs {}", g("f_size"), f.len()))?;
                ensure(g("n_f") == nf.to_string(), || format!("{tag}: N_F {} vs {nf}", g("n_f")))?;
                for i in 0..=rho {
                    let eta = e * 2f64.powi(rho as i32 - i as i32 - 2) / rho as f64;
                    ensure(close(real(&format!("eta.{i}")), eta), || format!("{tag}: eta_{i}"))?;
                }
                ensure(close(real("alpha"), alpha), || format!("{tag}: alpha"))?;
                ensure(close(real("beta"), beta), || format!("{tag}: beta"))?;
                ensure(close(real("delta_spread"), spread), || format!("{tag}: Delta"))?;
                ensure(close(real("q_min"), q_min), || format!("{tag}: q_min"))?;
                ensure(close(real("tau"), 2.0 * 3.0 / 4.0), || format!("{tag}: tau"))?;
                ensure(close(real("a"), 2.0 / e), || format!("{tag}: a"))?;
                match thr {
                    Some(t) => ensure(close(real("m_threshold"), t), || format!("{tag}: m-threshold"))?,
                    None => ensure(g("m_threshold") == "none", || format!("{tag}: m-threshold should be undefined"))?,
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (n, eps, k) combinations match"))
}

fn main() {
    // `cargo test` passes harness flags; a filter that excludes this target
    // skips it.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let suite = mpaths_suite();
    let mut exact = Vec::new();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut out = std::io::stdout();
    let mut report = |k: usize, name: &'static str, o: Outcome, results: &mut Vec<(usize, &str, Outcome)>| {
        let (tag, detail) = match &o {
            Ok(d) => ("PASS", d.clone()),
            Err(d) => ("FAIL", d.clone()),
        };
        let _ = writeln!(out, "criterion {k:>2} {tag} {name}: {detail}");
        let _ = out.flush();
        results.push((k, name, o));
    };
    let o = c1_exact(&suite, &mut exact);
    report(1, "m-paths oracle equivalence", o, &mut results);
    let o = if exact.len() == suite.len() { c2_rounded(&exact) } else { Err("criterion 1 did not finish".into()) };
    report(2, "rounded DP dominance and repair", o, &mut results);
    let o = if exact.len() == suite.len() { c3_final(&exact) } else { Err("criterion 1 did not finish".into()) };
    report(3, "final m-paths guarantee", o, &mut results);
    report(4, "flow-graph encoding", c4_flow_graphs(), &mut results);
    report(5, "restricted layout lemmas", c5_layout(), &mut results);
    report(6, "LP structure", c6_lp(), &mut results);
    report(7, "ring decomposition statistics", c7_rings(), &mut results);
    report(8, "anchor-respecting statistics", c8_anchor(), &mut results);
    report(9, "pipeline end-to-end", c9_pipeline(), &mut results);
    report(10, "ITP baseline", c10_itp(), &mut results);
    report(11, "constants audit", c11_constants(), &mut results);
    let failed: Vec<usize> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
