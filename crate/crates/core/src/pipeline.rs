//! End-to-end solver: rings, then per ring an anchor grid, tour types
//! harvested from candidate solutions, guess enumeration, per-square general
//! m-paths subproblems and tour assembly.

use crate::anchor::{
    endpoint_point, enumerate_guesses_capped, make_anchor_respecting, place_grid, AnchorGrid, GridCell,
    GuessVector, TourType,
};
use crate::error::{Error, Result};
use crate::lp::{
    build_constraints, build_segments, close_gaps_and_assign_slices, extract_partial_tours, segments_cost,
    solve_extreme_point, type_threshold, Assembly, PartialTours, SegmentCatalog, SquarePaths, TypeGeometry,
};
use crate::model::{
    validate_cvrp_solution, CvrpInstance, CvrpSolution, MPathsInstance, MPathsSolution, Point, Square, Tour,
};
use crate::mpaths::{solve_general_with, solve_mpaths, GeneralPair, MPathsConfig};
use crate::oracle::{brute_force_cvrp, brute_force_mpaths, held_karp, itp, HkVariant, OracleBudget};
use crate::rings::{merge_solutions, partition_instance, sample_rings, BoundedInstance};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Solver for the per-square m-paths parts.
#[derive(Clone, Debug, PartialEq)]
pub enum SubSolver {
    /// Exact, by exhaustive assignment (small parts only).
    Exhaustive,
    /// The portal DP.
    Dp(MPathsConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Grid size; `None` uses 3 (or q_min when `strict_q`).
    pub q: Option<usize>,
    /// Use the theoretical grid size bound.
    pub strict_q: bool,
    pub seed: u64,
    /// Enumerated guesses tried per ring, on top of the ones induced by the
    /// candidate solutions.
    pub guess_cap: usize,
    /// Point splits per general m-paths subproblem.
    pub split_cap: usize,
    /// Search nodes for the per-tour segment matching of a type.
    pub matching_cap: usize,
    pub subsolver: SubSolver,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            q: None,
            strict_q: false,
            seed: 0,
            guess_cap: 400,
            split_cap: 5000,
            matching_cap: 200_000,
            subsolver: SubSolver::Exhaustive,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RingReport {
    pub ring: usize,
    pub n: usize,
    pub d_outer: f64,
    pub delta: f64,
    pub q: usize,
    pub tau: f64,
    pub q_min: f64,
    pub types: usize,
    pub guesses_induced: usize,
    pub guesses_enumerated: usize,
    pub guesses_truncated: bool,
    pub guesses_solved: usize,
    /// Types of the chosen guess assembled by segment matching / by the LP.
    pub matched_types: usize,
    pub lp_types: usize,
    /// Largest per-anchor crossing count among the harvested types.
    pub max_anchor_crossings: usize,
    /// Sum of the chosen guess's subproblem costs.
    pub subproblem_cost: f64,
    pub cost: f64,
    pub notes: Vec<String>,
    pub grid: AnchorGrid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineReport {
    pub ring_offset: f64,
    pub scale: f64,
    pub rings: Vec<RingReport>,
    pub cost: f64,
}

fn key(p: Point) -> (u64, u64) {
    (p.x.to_bits(), p.y.to_bits())
}

type SubKey = ((u64, u64), (u64, u64), usize, Vec<(u64, u64)>);

/// Exhaustive m-paths with surplus paths left empty.
fn exhaustive_part(inst: &MPathsInstance) -> Result<MPathsSolution> {
    let mr = inst.m.min(inst.n()).max(1);
    let reduced = MPathsInstance { m: mr, ..inst.clone() };
    let budget = OracleBudget { max_points: 8, max_m: mr };
    let s = brute_force_mpaths(&reduced, budget)?;
    let mut paths = s.paths;
    paths.resize(inst.m, Vec::new());
    MPathsSolution::from_paths(inst, paths)
}

struct Ctx<'a> {
    binst: &'a BoundedInstance,
    grid: AnchorGrid,
    types: Vec<TourType>,
    cfg: &'a PipelineConfig,
    memo: HashMap<SubKey, MPathsSolution>,
    cell_points: BTreeMap<GridCell, Vec<usize>>,
    notes: BTreeSet<String>,
}

/// Chosen paths per (type, cell, pair): paths[label] of ring point indices.
type CellPaths = BTreeMap<(usize, GridCell, usize), Vec<Vec<usize>>>;

struct GuessOutcome {
    tours: Vec<Tour>,
    sub_cost: f64,
    matched: usize,
    lp: usize,
}

impl<'a> Ctx<'a> {
    fn solve_part(&mut self, inst: &MPathsInstance) -> Result<MPathsSolution> {
        let k: SubKey = (key(inst.a), key(inst.b), inst.m, inst.points.iter().map(|p| key(*p)).collect());
        if let Some(s) = self.memo.get(&k) {
            return Ok(s.clone());
        }
        let s = match &self.cfg.subsolver {
            SubSolver::Exhaustive => exhaustive_part(inst)?,
            SubSolver::Dp(c) => solve_mpaths(inst, c)?.solution,
        };
        self.memo.insert(k, s.clone());
        Ok(s)
    }

    fn cell_square(&self, c: GridCell) -> Square {
        let g = &self.grid;
        Square::new(
            Point::new(g.origin.x + c.0 as f64 * g.tau, g.origin.y + c.1 as f64 * g.tau),
            g.tau,
        )
    }

    /// Solves every cell's general m-paths subproblem for a guess.
    fn solve_cells(&mut self, guess: &GuessVector) -> Result<Option<(CellPaths, f64)>> {
        let active: Vec<usize> = (0..self.types.len()).filter(|&t| guess.m[t] > 0).collect();
        let mut cells: BTreeSet<GridCell> = BTreeSet::new();
        for &t in &active {
            cells.extend(self.types[t].cells());
        }
        let mut out = CellPaths::new();
        let mut total = 0.0;
        for cell in cells {
            // (type, pair index, a, b, m) for every anchor pair in this cell.
            let mut slots: Vec<(usize, usize, Point, Point, usize)> = Vec::new();
            let mut per_type: Vec<(usize, usize)> = Vec::new();
            for &t in &active {
                if let Some(ps) = self.types[t].pairs.get(&cell) {
                    per_type.push((t, ps.len()));
                    for (i, &(a, b)) in ps.iter().enumerate() {
                        slots.push((t, i, endpoint_point(&self.grid, a), endpoint_point(&self.grid, b), guess.m[t]));
                    }
                }
            }
            let pts_idx = self.cell_points.get(&cell).cloned().unwrap_or_default();
            let pts: Vec<Point> = pts_idx.iter().map(|&i| self.binst.instance.points[i]).collect();
            // Every split of each type's count over its pairs in this cell.
            let mut splits: Vec<Vec<usize>> = vec![Vec::new()];
            for &(t, np) in &per_type {
                let want = guess.count(t, cell);
                let mut next = Vec::new();
                for pre in &splits {
                    crate::anchor::compositions(want, np, &mut Vec::new(), &mut |comp| {
                        let mut v = pre.clone();
                        v.extend_from_slice(comp);
                        next.push(v);
                    });
                }
                splits = next;
            }
            let mut best: Option<(f64, Vec<Vec<Vec<usize>>>)> = None;
            let square = self.cell_square(cell);
            let eps = self.binst.instance.eps;
            for split in &splits {
                let pairs: Vec<GeneralPair> = slots
                    .iter()
                    .zip(split)
                    .map(|(s, &n)| GeneralPair { a: s.2, b: s.3, m: s.4, n })
                    .collect();
                let res = solve_general_with(square, eps, &pairs, &pts, self.cfg.split_cap, &mut |inst| {
                    self.solve_part(inst)
                });
                let gs = match res {
                    Ok(g) => g,
                    Err(Error::Infeasible(_)) => continue,
                    Err(e) if e.is_cap() => {
                        self.notes.insert(e.to_string());
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                if best.as_ref().is_none_or(|b| gs.cost < b.0) {
                    let paths = gs
                        .solutions
                        .iter()
                        .zip(&gs.assignment)
                        .map(|(sol, asg)| {
                            sol.paths.iter().map(|p| p.iter().map(|&k| pts_idx[asg[k]]).collect()).collect()
                        })
                        .collect();
                    best = Some((gs.cost, paths));
                }
            }
            let Some((cost, paths)) = best else { return Ok(None) };
            total += cost;
            for (s, p) in slots.iter().zip(paths) {
                out.insert((s.0, cell, s.1), p);
            }
        }
        Ok(Some((out, total)))
    }

    /// Builds the tours of one type from its per-cell paths.
    fn assemble_type(&mut self, t: usize, m: usize, cp: &CellPaths) -> Result<(Vec<Tour>, bool)> {
        let ty = &self.types[t];
        let cells: Vec<GridCell> = ty.cells().collect();
        let squares: Vec<SquarePaths> = cells
            .iter()
            .map(|&c| SquarePaths {
                paths: (0..ty.npairs(c)).map(|i| cp[&(t, c, i)].clone()).collect(),
            })
            .collect();
        let cat = build_segments(m, &squares)?;
        let c = self.binst.instance.capacity;
        let pieces = ty
            .order
            .iter()
            .map(|&(cell, i)| {
                let s = cells.iter().position(|&x| x == cell).unwrap();
                let (a, b) = ty.pairs[&cell][i];
                (s, i, endpoint_point(&self.grid, a), endpoint_point(&self.grid, b))
            })
            .collect();
        let geo = TypeGeometry {
            points: &self.binst.instance.points,
            depot: self.binst.instance.depot,
            pieces,
            squares: &squares,
        };
        let (pt, matched) = match match_segments(&cat, c, self.cfg.matching_cap) {
            Some(assign) => (
                PartialTours { assign, removed: Vec::new(), unassigned: Vec::new(), extra_removals: 0 },
                true,
            ),
            None => {
                let cs = build_constraints(&cat, c, self.binst.instance.eps)?;
                let ep = solve_extreme_point(&cs)?;
                (extract_partial_tours(&ep, &cs, &cat), false)
            }
        };
        let asm: Assembly = close_gaps_and_assign_slices(&pt, &cat, &geo, c)?;
        let added = (0..m).map(|i| crate::model::polyline_length(&asm.polyline(&geo, i))).sum::<f64>()
            - segments_cost(&geo);
        let bound = 18.0 * self.grid.tau / self.binst.instance.eps.value() * (m + pt.f()) as f64;
        if added > bound + 1e-9 {
            self.notes.insert(format!("type assembly added {added:.6} above the bound {bound:.6}"));
        }
        let tours = (0..m).map(|i| Tour::new(asm.visits(i))).filter(|t| !t.visits.is_empty()).collect();
        Ok((tours, matched))
    }

    fn solve_guess(&mut self, guess: &GuessVector) -> Result<Option<GuessOutcome>> {
        let Some((cp, sub_cost)) = self.solve_cells(guess)? else { return Ok(None) };
        let mut tours = Vec::new();
        let (mut matched, mut lp) = (0, 0);
        for t in 0..self.types.len() {
            if guess.m[t] == 0 {
                continue;
            }
            let (ts, was_matched) = self.assemble_type(t, guess.m[t], &cp)?;
            if was_matched {
                matched += 1;
            } else {
                lp += 1;
            }
            tours.extend(ts);
        }
        Ok(Some(GuessOutcome { tours, sub_cost, matched, lp }))
    }
}

/// One label per tour in every square (a permutation per square) keeping
/// every tour within capacity, by depth-first search.
fn match_segments(cat: &SegmentCatalog, c: usize, cap: usize) -> Option<Vec<Vec<Option<usize>>>> {
    let (m, k) = (cat.m, cat.k());
    let mut assign = vec![vec![None; k]; m];
    let mut load = vec![0usize; m];
    let mut used = vec![vec![false; m]; k];
    let mut nodes = 0usize;
    #[allow(clippy::too_many_arguments)]
    fn rec(
        s: usize,
        i: usize,
        cat: &SegmentCatalog,
        c: usize,
        cap: usize,
        nodes: &mut usize,
        assign: &mut Vec<Vec<Option<usize>>>,
        load: &mut Vec<usize>,
        used: &mut Vec<Vec<bool>>,
    ) -> bool {
        let (m, k) = (cat.m, cat.k());
        if s == k {
            return true;
        }
        if i == m {
            return rec(s + 1, 0, cat, c, cap, nodes, assign, load, used);
        }
        *nodes += 1;
        if *nodes > cap {
            return false;
        }
        // Largest segments first keeps the search short.
        let mut labels: Vec<usize> = (0..m).filter(|&j| !used[s][j]).collect();
        labels.sort_by_key(|&j| std::cmp::Reverse(cat.counts[s][j]));
        let mut tried = BTreeSet::new();
        for j in labels {
            let n = cat.counts[s][j];
            if load[i] + n > c || !tried.insert(n) {
                continue;
            }
            used[s][j] = true;
            load[i] += n;
            assign[i][s] = Some(j);
            if rec(s, i + 1, cat, c, cap, nodes, assign, load, used) {
                return true;
            }
            used[s][j] = false;
            load[i] -= n;
            assign[i][s] = None;
        }
        false
    }
    rec(0, 0, cat, c, cap, &mut nodes, &mut assign, &mut load, &mut used).then_some(assign)
}

/// Candidate solutions whose anchor-respecting versions seed the type list.
fn candidates(inst: &CvrpInstance) -> Vec<CvrpSolution> {
    let mut out = Vec::new();
    if inst.n() <= OracleBudget::default().max_points {
        if let Ok(s) = brute_force_cvrp(inst, OracleBudget::default()) {
            out.push(s);
        }
    }
    if let Ok(r) = itp(inst) {
        out.push(r.solution);
    }
    out
}

/// Re-orders the points of every tour optimally (exact TSP per tour).
fn shortcut(inst: &CvrpInstance, sol: &CvrpSolution) -> Result<CvrpSolution> {
    let mut tours = Vec::with_capacity(sol.tours.len());
    for t in &sol.tours {
        if t.visits.len() <= 1 || t.visits.len() > 12 {
            tours.push(t.clone());
            continue;
        }
        let pts: Vec<Point> = t.visits.iter().map(|&i| inst.points[i]).collect();
        let (ord, _) = held_karp(&pts, HkVariant::Path { a: inst.depot, b: inst.depot })?;
        tours.push(Tour::new(ord.into_iter().map(|k| t.visits[k]).collect()));
    }
    CvrpSolution::from_tours(inst, tours)
}

/// Solves one bounded instance.
pub fn solve_bounded(binst: &BoundedInstance, cfg: &PipelineConfig, seed: u64) -> Result<(CvrpSolution, RingReport)> {
    let inst = &binst.instance;
    let eps = inst.eps;
    let tt = type_threshold(0, eps, binst.delta);
    let q = match (cfg.q, cfg.strict_q) {
        (_, true) => {
            if !tt.q_min.is_finite() || tt.q_min > 64.0 {
                return Err(Error::cap("strict grid size q_min", 64));
            }
            tt.q_min.floor() as usize + 1
        }
        (Some(q), false) => q,
        (None, false) => 3,
    };
    let grid = place_grid(binst, q, seed)?;
    let cands = candidates(inst);
    let tour_poly = |t: &Tour| {
        let mut poly = vec![inst.depot];
        poly.extend(t.visits.iter().map(|&i| inst.points[i]));
        poly.push(inst.depot);
        poly
    };
    // Type of every candidate tour, in candidate order.
    let mut cand_types: Vec<Vec<TourType>> = Vec::new();
    let mut types: BTreeSet<TourType> = BTreeSet::new();
    let mut max_cross = 0;
    for sol in &cands {
        let mut tt = Vec::new();
        for t in &sol.tours {
            let at = make_anchor_respecting(&grid, &tour_poly(t))?;
            max_cross = max_cross.max(at.tour_type.max_crossings());
            types.insert(at.tour_type.clone());
            tt.push(at.tour_type);
        }
        cand_types.push(tt);
    }
    let types: Vec<TourType> = types.into_iter().collect();
    // Induced guesses: tours per type and their points per cell.
    let mut induced: Vec<GuessVector> = Vec::new();
    for (sol, tt) in cands.iter().zip(&cand_types) {
        let mut m = vec![0usize; types.len()];
        let mut n: Vec<BTreeMap<GridCell, usize>> = vec![BTreeMap::new(); types.len()];
        for (t, ty) in sol.tours.iter().zip(tt) {
            let ti = types.binary_search(ty).map_err(|_| Error::Internal("type missing".into()))?;
            m[ti] += 1;
            for &v in &t.visits {
                *n[ti].entry(grid.cell_of(inst.points[v])).or_insert(0) += 1;
            }
        }
        let g = GuessVector { m, n };
        if !induced.contains(&g) {
            induced.push(g);
        }
    }
    let (enumerated, truncated) = enumerate_guesses_capped(binst, &grid, &types, cfg.guess_cap);
    let mut ctx = Ctx {
        binst,
        grid: grid.clone(),
        types,
        cfg,
        memo: HashMap::new(),
        cell_points: BTreeMap::new(),
        notes: BTreeSet::new(),
    };
    for (i, p) in inst.points.iter().enumerate() {
        ctx.cell_points.entry(grid.cell_of(*p)).or_default().push(i);
    }
    let mut best: Option<(CvrpSolution, GuessOutcome)> = None;
    let mut solved = 0;
    let mut seen: BTreeSet<GuessVector> = BTreeSet::new();
    for g in induced.iter().chain(enumerated.iter()) {
        if !seen.insert(g.clone()) {
            continue;
        }
        let Some(out) = ctx.solve_guess(g)? else { continue };
        solved += 1;
        let sol = shortcut(inst, &CvrpSolution::from_tours(inst, out.tours.clone())?)?;
        if best.as_ref().is_none_or(|b| sol.cost < b.0.cost) {
            best = Some((sol, out));
        }
    }
    let Some((sol, out)) = best else {
        return Err(Error::Infeasible(format!("no guess produced a solution for ring {}", binst.ring)));
    };
    if truncated {
        ctx.notes.insert(format!("guess enumeration truncated at {}", cfg.guess_cap));
    }
    let rep = RingReport {
        ring: binst.ring,
        n: inst.n(),
        d_outer: binst.d_outer,
        delta: binst.delta,
        q,
        tau: grid.tau,
        q_min: tt.q_min,
        types: ctx.types.len(),
        guesses_induced: induced.len(),
        guesses_enumerated: enumerated.len(),
        guesses_truncated: truncated,
        guesses_solved: solved,
        matched_types: out.matched,
        lp_types: out.lp,
        max_anchor_crossings: max_cross,
        subproblem_cost: out.sub_cost,
        cost: sol.cost,
        notes: ctx.notes.into_iter().collect(),
        grid,
    };
    Ok((sol, rep))
}

/// Rings, per-ring solves, merge and validation.
pub fn run_pipeline(inst: &CvrpInstance, cfg: &PipelineConfig) -> Result<(CvrpSolution, PipelineReport)> {
    let rp = sample_rings(inst, cfg.seed)?;
    let parts = partition_instance(inst, &rp);
    let mut sols = Vec::with_capacity(parts.len());
    let mut rings = Vec::with_capacity(parts.len());
    for (i, b) in parts.iter().enumerate() {
        let (s, r) = solve_bounded(b, cfg, cfg.seed.wrapping_add(1 + i as u64))?;
        sols.push(s);
        rings.push(r);
    }
    let pairs: Vec<(&BoundedInstance, &CvrpSolution)> = parts.iter().zip(&sols).collect();
    let sol = merge_solutions(inst, &pairs)?;
    let v = validate_cvrp_solution(inst, &sol);
    if !v.is_ok() {
        return Err(Error::Internal(format!("pipeline produced an invalid solution: {:?}", v.failures())));
    }
    let cost = sol.cost;
    Ok((
        sol,
        PipelineReport {
            ring_offset: rp.b_sample,
            scale: rp.scale,
            rings,
            cost,
        },
    ))
}
