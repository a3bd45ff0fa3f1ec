//! Run configuration, orchestration of every solver mode, and the
//! key-value run report.

use crate::dissection::{Dissection, LayoutMode, PortalLayout};
use crate::error::{Error, Result};
use crate::flowgraph::{build_rounding_set, paper_alpha, rho_for};
use crate::io::{emit_routes, Instance};
use crate::lp::{beta, group_spread, type_threshold};
use crate::model::{
    validate_cvrp_solution, validate_mpaths_solution, CvrpInstance, CvrpSolution, Eps, MPathsInstance,
    MPathsSolution, Tour, ValidationReport,
};
use crate::mpaths::{solve_mpaths, DpCaps, MPathsConfig, ModeChoice};
use crate::oracle::{brute_force_cvrp, brute_force_mpaths, itp, OracleBudget};
use crate::pipeline::{run_pipeline, PipelineConfig, SubSolver};
use num_traits::ToPrimitive;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Pipeline,
    MPathsExact,
    MPathsRounded,
    Itp,
    BruteForce,
    Validate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Pipeline => "pipeline",
            Mode::MPathsExact => "mpaths-exact",
            Mode::MPathsRounded => "mpaths-rounded",
            Mode::Itp => "itp",
            Mode::BruteForce => "bruteforce",
            Mode::Validate => "validate",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pipeline" => Mode::Pipeline,
            "mpaths-exact" => Mode::MPathsExact,
            "mpaths-rounded" => Mode::MPathsRounded,
            "itp" => Mode::Itp,
            "bruteforce" => Mode::BruteForce,
            "validate" => Mode::Validate,
            _ => return Err(Error::Precondition(format!("unknown mode `{s}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// Overrides the instance's ε.
    pub epsilon: Option<Eps>,
    pub seed: u64,
    /// Grid size for the pipeline.
    pub q: Option<usize>,
    /// Rounding base override for the m-paths DP.
    pub alpha: Option<f64>,
    pub shifts: usize,
    pub caps: DpCaps,
    pub guess_cap: usize,
    /// Compare against the exhaustive oracle when the instance is small
    /// enough for it.
    pub oracle: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Pipeline,
            epsilon: None,
            seed: 0,
            q: None,
            alpha: None,
            shifts: 16,
            caps: DpCaps::default(),
            guess_cap: PipelineConfig::default().guess_cap,
            oracle: true,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        let c = &self.caps;
        if self.shifts == 0 || self.guess_cap == 0 || c.arcs_per_cell == 0 || c.ports_per_square == 0 || c.beam == 0 || c.cell_configs == 0 {
            return Err(Error::Precondition("caps and shift count must be positive".into()));
        }
        if let Some(a) = self.alpha {
            if !(a > 1.0 && a.is_finite()) {
                return Err(Error::Precondition(format!("alpha must exceed 1; got {a}")));
            }
        }
        if self.q.is_some_and(|q| q < 2) {
            return Err(Error::Precondition("q must be at least 2".into()));
        }
        Ok(())
    }
}

/// Inputs from which the theoretical constants are derived.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantInputs {
    pub n: usize,
    pub eps: Eps,
    /// Ring ratio δ (0 for the innermost ring).
    pub delta: f64,
    /// Grid size q and outer radius D of the anchor grid.
    pub q: usize,
    pub d_outer: f64,
    /// Number of squares k a type crosses, for Δ and the m-threshold.
    pub k: usize,
    pub c: usize,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constants {
    pub inputs: ConstantInputs,
    /// Ring base a = 2/ε.
    pub a: f64,
    pub tau: f64,
    pub q_min: f64,
    pub beta: f64,
    pub delta_spread: f64,
    pub rho: u32,
    /// η_i for i = 0..=ρ, in grid units (unit cells).
    pub eta: Vec<f64>,
    pub nport: i64,
    pub alpha: f64,
    pub f_size: usize,
    pub n_f: u32,
    pub m_threshold: Option<f64>,
}

impl Constants {
    pub fn derive(inp: ConstantInputs) -> Result<Self> {
        let eps = inp.eps;
        let rho = rho_for(inp.n.max(1), eps).max(1);
        let p = PortalLayout::paper_p(rho, eps);
        let layout = PortalLayout::new(rho, p, LayoutMode::Restricted)?;
        let eta = (0..=rho).map(|i| layout.eta(i)).collect();
        let f = build_rounding_set(inp.n.max(1), eps, inp.alpha)?;
        let tt = type_threshold(inp.k, eps, inp.delta);
        Ok(Constants {
            inputs: inp,
            a: 2.0 * eps.inv() as f64,
            tau: 2.0 * inp.d_outer / (inp.q as f64 - 1.0),
            q_min: tt.q_min,
            beta: beta(eps).to_f64().unwrap_or(f64::NAN),
            delta_spread: group_spread(eps, inp.c, inp.k).to_f64().unwrap_or(f64::NAN),
            rho,
            eta,
            nport: layout.nport(),
            alpha: inp.alpha.unwrap_or_else(|| paper_alpha(eps, rho)),
            f_size: f.values.len(),
            n_f: f.n_f,
            m_threshold: tt.m_threshold,
        })
    }
}

/// A re-evaluated inequality `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        BoundCheck { name: name.into(), lhs, rhs, pass: lhs <= rhs + 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunReport {
    pub mode: String,
    pub problem: String,
    pub n: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub costs: BTreeMap<String, f64>,
    pub constants: Vec<(String, Constants)>,
    pub ratios: BTreeMap<String, f64>,
    pub bounds: Vec<BoundCheck>,
    /// Caps that cut a search short without failing the run.
    pub cap_breaches: Vec<String>,
    pub timings: BTreeMap<String, f64>,
    pub validation: Vec<(String, bool, String)>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn all_bounds_pass(&self) -> bool {
        self.bounds.iter().all(|b| b.pass)
    }

    pub fn valid(&self) -> bool {
        self.validation.iter().all(|v| v.1)
    }

    fn take_validation(&mut self, v: &ValidationReport) {
        self.validation = v.checks.iter().map(|c| (c.rule.to_string(), c.pass, c.detail.clone())).collect();
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunSolution {
    Cvrp(CvrpSolution),
    MPaths(MPathsSolution),
}

impl RunSolution {
    pub fn routes(&self) -> Vec<Vec<usize>> {
        match self {
            RunSolution::Cvrp(s) => s.tours.iter().map(|t| t.visits.clone()).collect(),
            RunSolution::MPaths(s) => s.paths.clone(),
        }
    }

    pub fn cost(&self) -> f64 {
        match self {
            RunSolution::Cvrp(s) => s.cost,
            RunSolution::MPaths(s) => s.cost,
        }
    }

    pub fn to_text(&self) -> String {
        emit_routes(&self.routes())
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub solution: Option<RunSolution>,
    pub report: RunReport,
    pub svg: String,
}

fn oracle_fits(n: usize, m: usize) -> bool {
    let b = OracleBudget::default();
    n <= b.max_points && m <= b.max_m
}

fn with_eps(inst: &Instance, eps: Option<Eps>) -> Instance {
    match (inst.clone(), eps) {
        (Instance::Cvrp(mut i), Some(e)) => {
            i.eps = e;
            Instance::Cvrp(i)
        }
        (Instance::MPaths(mut i), Some(e)) => {
            i.eps = e;
            Instance::MPaths(i)
        }
        (i, None) => i,
    }
}

fn wrong_kind(mode: Mode, want: &str) -> Error {
    Error::Precondition(format!("mode {} needs a {want} instance", mode.name()))
}

/// Runs one mode on an instance. `solution_text` is the candidate solution
/// for the validate mode.
pub fn execute(inst: &Instance, cfg: &RunConfig, solution_text: Option<&str>) -> Result<RunOutcome> {
    cfg.check()?;
    let inst = with_eps(inst, cfg.epsilon);
    let start = Instant::now();
    let mut rep = RunReport { mode: cfg.mode.name().into(), seed: cfg.seed, ..RunReport::default() };
    let (solution, svg) = match (&inst, cfg.mode) {
        (Instance::Cvrp(i), Mode::Pipeline) => run_cvrp_pipeline(i, cfg, &mut rep)?,
        (Instance::Cvrp(i), Mode::Itp) => run_itp(i, cfg, &mut rep)?,
        (Instance::Cvrp(i), Mode::BruteForce) => {
            let s = brute_force_cvrp(i, OracleBudget::default())?;
            rep.costs.insert("bruteforce".into(), s.cost);
            (RunSolution::Cvrp(s), None)
        }
        (Instance::MPaths(i), Mode::MPathsExact | Mode::MPathsRounded) => run_mpaths(i, cfg, &mut rep)?,
        (Instance::MPaths(i), Mode::BruteForce) => {
            let s = brute_force_mpaths(i, OracleBudget::default())?;
            rep.costs.insert("bruteforce".into(), s.cost);
            (RunSolution::MPaths(s), None)
        }
        (_, Mode::Validate) => {
            let text = solution_text.ok_or_else(|| Error::Precondition("validate mode needs a solution".into()))?;
            let routes = crate::io::parse_routes(text)?;
            match &inst {
                Instance::Cvrp(i) => {
                    // Index errors are validation failures, not parse errors.
                    let n = i.n();
                    let tours: Vec<Tour> = routes.into_iter().map(Tour::new).collect();
                    let cost = tours
                        .iter()
                        .map(|t| crate::model::tour_cost(i, t).unwrap_or(f64::NAN))
                        .sum::<f64>();
                    let sol = CvrpSolution { tours, cost };
                    let v = validate_cvrp_solution(i, &sol);
                    rep.take_validation(&v);
                    if sol.tours.iter().all(|t| t.visits.iter().all(|&k| k < n)) {
                        rep.costs.insert("solution".into(), cost);
                    }
                    (RunSolution::Cvrp(sol), None)
                }
                Instance::MPaths(i) => {
                    let cost = crate::model::mpaths_cost(i, &routes).unwrap_or(f64::NAN);
                    let sol = MPathsSolution { paths: routes, cost };
                    rep.take_validation(&validate_mpaths_solution(i, &sol));
                    rep.costs.insert("solution".into(), cost);
                    (RunSolution::MPaths(sol), None)
                }
            }
        }
        (Instance::MPaths(_), m) => return Err(wrong_kind(m, "cvrp")),
        (Instance::Cvrp(_), m) => return Err(wrong_kind(m, "mpaths")),
    };
    match (&inst, &solution) {
        (Instance::Cvrp(i), RunSolution::Cvrp(s)) => {
            rep.problem = "cvrp".into();
            rep.n = i.n();
            rep.epsilon = i.eps.value();
            if cfg.mode != Mode::Validate {
                rep.take_validation(&validate_cvrp_solution(i, s));
                oracle_ratio_cvrp(i, s, cfg, &mut rep);
            }
        }
        (Instance::MPaths(i), RunSolution::MPaths(s)) => {
            rep.problem = "mpaths".into();
            rep.n = i.n();
            rep.epsilon = i.eps.value();
            if cfg.mode != Mode::Validate {
                rep.take_validation(&validate_mpaths_solution(i, s));
            }
        }
        _ => return Err(Error::Internal("solution kind mismatch".into())),
    }
    rep.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    let svg = svg.unwrap_or_else(|| match (&inst, &solution) {
        (Instance::Cvrp(i), RunSolution::Cvrp(s)) => crate::svg::cvrp_svg(i, Some(s), None),
        (Instance::MPaths(i), RunSolution::MPaths(s)) => crate::svg::mpaths_svg(i, Some(s), None),
        _ => unreachable!(),
    });
    Ok(RunOutcome { solution: Some(solution), report: rep, svg })
}

fn oracle_ratio_cvrp(i: &CvrpInstance, s: &CvrpSolution, cfg: &RunConfig, rep: &mut RunReport) {
    if !cfg.oracle || cfg.mode == Mode::BruteForce || !oracle_fits(i.n(), 1) {
        return;
    }
    if let Ok(opt) = brute_force_cvrp(i, OracleBudget::default()) {
        rep.costs.insert("oracle".into(), opt.cost);
        if opt.cost > 0.0 {
            rep.ratios.insert("vs_oracle".into(), s.cost / opt.cost);
        }
        match cfg.mode {
            Mode::Pipeline => rep.bounds.push(BoundCheck::le("pipeline_sanity_2opt", s.cost, 2.0 * opt.cost)),
            Mode::Itp => {
                if rep.notes.iter().any(|n| n == "tsp exact") {
                    rep.bounds.push(BoundCheck::le("itp_2opt", s.cost, 2.0 * opt.cost));
                }
            }
            _ => {}
        }
    }
}

fn run_itp(i: &CvrpInstance, _cfg: &RunConfig, rep: &mut RunReport) -> Result<(RunSolution, Option<String>)> {
    let r = itp(i)?;
    rep.costs.insert("tsp".into(), r.tsp_cost);
    rep.costs.insert("itp".into(), r.solution.cost);
    rep.notes.push(if r.exact_tsp { "tsp exact".into() } else { "tsp heuristic".into() });
    let radial: f64 = i.points.iter().map(|p| p.dist(i.depot)).sum();
    rep.bounds.push(BoundCheck::le(
        "itp_partition",
        r.solution.cost,
        r.tsp_cost + 2.0 * radial / i.capacity as f64,
    ));
    Ok((RunSolution::Cvrp(r.solution), None))
}

fn run_cvrp_pipeline(i: &CvrpInstance, cfg: &RunConfig, rep: &mut RunReport) -> Result<(RunSolution, Option<String>)> {
    let pcfg = PipelineConfig {
        q: cfg.q,
        seed: cfg.seed,
        guess_cap: cfg.guess_cap,
        subsolver: SubSolver::Exhaustive,
        ..PipelineConfig::default()
    };
    let t = Instant::now();
    let (sol, prep) = run_pipeline(i, &pcfg)?;
    rep.timings.insert("pipeline_seconds".into(), t.elapsed().as_secs_f64());
    rep.costs.insert("pipeline".into(), sol.cost);
    rep.notes.push(format!("ring offset b = {}", prep.ring_offset));
    for r in &prep.rings {
        let key = format!("ring{}", r.ring);
        rep.costs.insert(format!("{key}.cost"), r.cost);
        rep.costs.insert(format!("{key}.subproblems"), r.subproblem_cost);
        let k = r.q.saturating_sub(1).pow(2).max(1);
        let c = Constants::derive(ConstantInputs {
            n: r.n,
            eps: i.eps,
            delta: r.delta,
            q: r.q,
            d_outer: r.d_outer,
            k,
            c: i.capacity,
            alpha: None,
        })?;
        rep.bounds.push(BoundCheck::le(format!("{key}.anchor_crossings"), r.max_anchor_crossings as f64, 6.0));
        rep.bounds.push(BoundCheck::le(format!("{key}.tau"), (r.tau - c.tau).abs(), 1e-12));
        if r.q as f64 <= c.q_min {
            rep.notes.push(format!("{key}: q = {} below q_min = {} (relaxed grid)", r.q, c.q_min));
        }
        rep.constants.push((key.clone(), c));
        if r.guesses_truncated {
            rep.cap_breaches.push(format!("{key}: guess enumeration truncated at {}", cfg.guess_cap));
        }
        for n in &r.notes {
            rep.notes.push(format!("{key}: {n}"));
        }
        rep.notes.push(format!(
            "{key}: types {}, guesses {} induced + {} enumerated, {} solved, {} matched / {} lp types",
            r.types, r.guesses_induced, r.guesses_enumerated, r.guesses_solved, r.matched_types, r.lp_types
        ));
    }
    let svg = match prep.rings.as_slice() {
        [only] => crate::svg::cvrp_svg(i, Some(&sol), Some(&only.grid)),
        _ => crate::svg::cvrp_svg(i, Some(&sol), None),
    };
    Ok((RunSolution::Cvrp(sol), Some(svg)))
}

fn run_mpaths(i: &MPathsInstance, cfg: &RunConfig, rep: &mut RunReport) -> Result<(RunSolution, Option<String>)> {
    let rounded = cfg.mode == Mode::MPathsRounded;
    let mcfg = MPathsConfig {
        mode: if rounded { ModeChoice::Rounded } else { ModeChoice::Exact },
        alpha: cfg.alpha,
        shifts: cfg.shifts,
        seed: cfg.seed,
        caps: cfg.caps.clone(),
        ..MPathsConfig::default()
    };
    let t = Instant::now();
    let r = solve_mpaths(i, &mcfg)?;
    rep.timings.insert("dp_seconds".into(), t.elapsed().as_secs_f64());
    let eps = i.eps;
    let c = Constants::derive(ConstantInputs {
        n: i.n(),
        eps,
        delta: 0.0,
        q: 3,
        d_outer: i.square.side,
        k: 1,
        c: i.n().max(1),
        alpha: cfg.alpha,
    })?;
    rep.costs.insert("solution".into(), r.solution.cost);
    let mut svg = None;
    if let Some(b) = r.best {
        let run = &r.runs[b];
        let rho = r.rho as i32;
        let mr = i.m.min(i.n()) as f64;
        rep.costs.insert("z_dp".into(), run.z_dp);
        rep.costs.insert("repaired".into(), run.repaired_cost);
        rep.costs.insert("routed".into(), run.routed_cost);
        let e = eps.value();
        if let crate::mpaths::FlowMode::Rounded { alpha } = run.mode {
            rep.bounds.push(BoundCheck::le("m_prime_lower", mr, run.m_prime as f64));
            rep.bounds.push(BoundCheck::le("m_prime_upper", run.m_prime as f64, (alpha.powi(rho) * mr).ceil()));
            let factor = (1.0 + (alpha * alpha - 1.0) * 8.0 * rho as f64 / e).powi(rho);
            rep.bounds.push(BoundCheck::le("repair", run.repaired_cost, factor * run.z_dp));
        } else {
            rep.bounds.push(BoundCheck::le("exact_no_repair", (run.repaired_cost - run.z_dp).abs(), 1e-9));
        }
        rep.bounds.push(BoundCheck::le("anchor_removal", run.routed_cost, (1.0 + 14.0 * e) * run.repaired_cost));
        rep.bounds.push(BoundCheck::le("shortcut", r.solution.cost, run.routed_cost));
        let beam: usize = r.runs.iter().map(|x| x.stats.beam_drops as usize).sum();
        if beam > 0 {
            rep.cap_breaches.push(format!("dp beam dropped {beam} entries"));
        }
        rep.notes.push(format!("{} of {} shifts solved, best shift {:?}", r.runs.len(), cfg.shifts, run.shift));
        let d = Dissection::new(i.square, r.rho, run.shift)?;
        let layout = PortalLayout::new(r.rho, mcfg.portal_p, mcfg.layout)?;
        svg = Some(crate::svg::mpaths_svg(i, Some(&r.solution), Some((&d, &layout))));
        if cfg.oracle && oracle_fits(i.n(), i.m) {
            if let Ok(bf) = brute_force_mpaths(i, OracleBudget::default()) {
                rep.costs.insert("oracle".into(), bf.cost);
                if bf.cost > 0.0 {
                    rep.ratios.insert("vs_oracle".into(), r.solution.cost / bf.cost);
                }
                if !rounded {
                    let snap = std::f64::consts::SQRT_2 * i.n() as f64 * i.square.side / d.l1 as f64;
                    rep.bounds.push(BoundCheck::le("oracle_1_plus_eps", r.solution.cost, (1.0 + e) * bf.cost + snap + 1e-6));
                }
            }
        }
    }
    rep.constants.push(("mpaths".into(), c));
    Ok((RunSolution::MPaths(r.solution), svg))
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

/// Key-value tree: one `dotted.key = value` per line.
pub fn emit_report(rep: &RunReport) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("mode", rep.mode.clone());
    kv("problem", rep.problem.clone());
    kv("n", rep.n.to_string());
    kv("epsilon", num(rep.epsilon));
    kv("seed", rep.seed.to_string());
    for (k, v) in &rep.costs {
        kv(&format!("cost.{k}"), num(*v));
    }
    for (k, v) in &rep.ratios {
        kv(&format!("ratio.{k}"), num(*v));
    }
    for (name, c) in &rep.constants {
        let p = format!("constants.{name}");
        let i = &c.inputs;
        kv(&format!("{p}.input.n"), i.n.to_string());
        kv(&format!("{p}.input.eps"), num(i.eps.value()));
        kv(&format!("{p}.input.delta"), num(i.delta));
        kv(&format!("{p}.input.q"), i.q.to_string());
        kv(&format!("{p}.input.d_outer"), num(i.d_outer));
        kv(&format!("{p}.input.k"), i.k.to_string());
        kv(&format!("{p}.input.c"), i.c.to_string());
        kv(&format!("{p}.a"), num(c.a));
        kv(&format!("{p}.tau"), num(c.tau));
        kv(&format!("{p}.q_min"), num(c.q_min));
        kv(&format!("{p}.beta"), num(c.beta));
        kv(&format!("{p}.delta_spread"), num(c.delta_spread));
        kv(&format!("{p}.rho"), c.rho.to_string());
        for (l, e) in c.eta.iter().enumerate() {
            kv(&format!("{p}.eta.{l}"), num(*e));
        }
        kv(&format!("{p}.nport"), c.nport.to_string());
        kv(&format!("{p}.alpha"), num(c.alpha));
        kv(&format!("{p}.f_size"), c.f_size.to_string());
        kv(&format!("{p}.n_f"), c.n_f.to_string());
        kv(&format!("{p}.m_threshold"), c.m_threshold.map_or("none".into(), num));
    }
    for b in &rep.bounds {
        kv(&format!("bound.{}.lhs", b.name), num(b.lhs));
        kv(&format!("bound.{}.rhs", b.name), num(b.rhs));
        kv(&format!("bound.{}.pass", b.name), b.pass.to_string());
    }
    kv("bounds_all_pass", rep.all_bounds_pass().to_string());
    for (rule, pass, detail) in &rep.validation {
        kv(&format!("validation.{rule}"), format!("{} ({detail})", if *pass { "pass" } else { "fail" }));
    }
    kv("valid", rep.valid().to_string());
    kv("cap_breached", (!rep.cap_breaches.is_empty()).to_string());
    for (k, b) in rep.cap_breaches.iter().enumerate() {
        kv(&format!("cap_breach.{k}"), b.clone());
    }
    for (k, v) in &rep.timings {
        kv(&format!("timing.{k}"), num(*v));
    }
    for (k, n) in rep.notes.iter().enumerate() {
        kv(&format!("note.{k}"), n.clone());
    }
    s
}

/// Reads an emitted report back into its key-value map.
pub fn parse_report(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Report for a run that stopped on a hard cap.
pub fn cap_breach_report(cfg: &RunConfig, err: &Error) -> RunReport {
    RunReport {
        mode: cfg.mode.name().into(),
        seed: cfg.seed,
        cap_breaches: vec![err.to_string()],
        ..RunReport::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_instance;

    #[test]
    fn modes_parse() {
        for m in ["pipeline", "mpaths-exact", "mpaths-rounded", "itp", "bruteforce", "validate"] {
            assert_eq!(Mode::from_str(m).unwrap().name(), m);
        }
        assert!(Mode::from_str("fast").is_err());
    }

    #[test]
    fn constants_examples() {
        let c = Constants::derive(ConstantInputs {
            n: 8,
            eps: Eps::from_inverse(2).unwrap(),
            delta: 0.1,
            q: 3,
            d_outer: 1.0,
            k: 128,
            c: 8,
            alpha: None,
        })
        .unwrap();
        assert_eq!(c.rho, 4);
        assert_eq!(c.nport, 33);
        assert!((c.eta[1] - 0.25).abs() < 1e-12);
        assert_eq!(c.tau, 1.0);
        assert!((c.q_min - 1281.0).abs() < 1e-9);
        assert_eq!(c.beta, 144.0);
        assert_eq!(c.m_threshold, Some(21_233_664.0));
        assert_eq!(c.a, 4.0);
    }

    #[test]
    fn single_point_pipeline_report() {
        let inst = parse_instance("cvrp 1 1 0.5\n0 0\n3 4\n").unwrap();
        let out = execute(&inst, &RunConfig::default(), None).unwrap();
        let rep = &out.report;
        assert!(rep.valid());
        assert!(rep.all_bounds_pass());
        assert!((rep.ratios["vs_oracle"] - 1.0).abs() < 1e-12);
        let kv = parse_report(&emit_report(rep));
        assert_eq!(kv["valid"], "true");
        assert_eq!(kv["cost.pipeline"], "10.0");
        assert!(out.svg.contains("class=\"tour\""));
    }

    #[test]
    fn exact_mpaths_bounds_pass() {
        let inst = parse_instance("mpaths 3 2 0.5\n0 0.1\n1 0.9\n0.2 0.3\n0.7 0.2\n0.5 0.8\n").unwrap();
        let cfg = RunConfig { mode: Mode::MPathsExact, shifts: 4, ..RunConfig::default() };
        let out = execute(&inst, &cfg, None).unwrap();
        assert!(out.report.valid());
        assert!(out.report.all_bounds_pass(), "{:?}", out.report.bounds);
        assert!(out.report.bounds.iter().any(|b| b.name == "oracle_1_plus_eps"));
        assert!(out.svg.contains("class=\"portal\""));
    }

    #[test]
    fn rounded_override_uses_product_bound() {
        let inst = parse_instance("mpaths 3 2 0.5\n0 0.1\n1 0.9\n0.2 0.3\n0.7 0.2\n0.5 0.8\n").unwrap();
        let cfg = RunConfig { mode: Mode::MPathsRounded, alpha: Some(2.0), shifts: 2, ..RunConfig::default() };
        let out = execute(&inst, &cfg, None).unwrap();
        let b = out.report.bounds.iter().find(|b| b.name == "repair").unwrap();
        let rho = out.report.constants[0].1.rho as i32;
        let z = out.report.costs["z_dp"];
        let want = (1.0 + 3.0 * 8.0 * rho as f64 / 0.5).powi(rho) * z;
        assert!((b.rhs - want).abs() <= 1e-9 * want);
        assert!(out.report.valid());
    }

    #[test]
    fn validate_mode_flags_bad_solutions() {
        let inst = parse_instance("cvrp 3 2 0.5\n0 0\n1 0\n0 1\n1 1\n").unwrap();
        let cfg = RunConfig { mode: Mode::Validate, ..RunConfig::default() };
        let ok = execute(&inst, &cfg, Some("0 2\n1\n")).unwrap();
        assert!(ok.report.valid());
        let over = execute(&inst, &cfg, Some("0 1 2\n")).unwrap();
        assert!(!over.report.valid());
        let missing = execute(&inst, &cfg, Some("0\n2\n")).unwrap();
        assert!(!missing.report.valid());
        let bad = execute(&inst, &cfg, Some("0 7\n1 2\n")).unwrap();
        assert!(!bad.report.valid());
    }

    #[test]
    fn mode_and_instance_kind_must_agree() {
        let inst = parse_instance("cvrp 1 1 0.5\n0 0\n3 4\n").unwrap();
        let cfg = RunConfig { mode: Mode::MPathsExact, ..RunConfig::default() };
        assert!(matches!(execute(&inst, &cfg, None), Err(Error::Precondition(_))));
    }

    #[test]
    fn itp_report() {
        let inst = parse_instance("cvrp 4 2 0.5\n0 0\n1 0\n1 1\n-1 0\n-1 -1\n").unwrap();
        let cfg = RunConfig { mode: Mode::Itp, ..RunConfig::default() };
        let out = execute(&inst, &cfg, None).unwrap();
        assert!(out.report.all_bounds_pass());
        assert!(out.report.bounds.iter().any(|b| b.name == "itp_2opt"));
        assert!(out.report.ratios["vs_oracle"] >= 1.0 - 1e-12);
    }
}
