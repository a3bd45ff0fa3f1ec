//! The m-paths solver: port graph, DP, repair and the shift loop.

pub mod dp;
pub mod general;
pub mod grid;
pub mod repair;

pub use dp::{
    cell_arc_cost, check_valid_exact, check_valid_pseudo, run_dp, run_dp_cached, CellCache, CellRealization, DpCaps, DpRun,
    DpStats, FlowMode, PseudoSolution, SquareConfig, SquareRecord,
};
pub use general::{solve_general_mpaths, solve_general_with, GeneralPair, GeneralSolution};
pub use repair::{repair_pseudo_solution, strip_and_reduce, RepairedSolution};

use crate::dissection::{rho_for_instance, shifts_for, Dissection, LayoutMode, PortalLayout};
use crate::error::{Error, Result};
use crate::flowgraph::paper_alpha;
use crate::model::{MPathsInstance, MPathsSolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeChoice {
    /// Exact flows when m ≤ 1/ε, rounded flows otherwise.
    Auto,
    Exact,
    Rounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MPathsConfig {
    pub mode: ModeChoice,
    /// Overrides the rounding base α.
    pub alpha: Option<f64>,
    pub layout: LayoutMode,
    /// Portal intervals per unit cell side.
    pub portal_p: i64,
    /// Number of random shifts tried (all of them when there are fewer).
    pub shifts: usize,
    pub seed: u64,
    pub caps: DpCaps,
}

impl Default for MPathsConfig {
    fn default() -> Self {
        MPathsConfig {
            mode: ModeChoice::Auto,
            alpha: None,
            layout: LayoutMode::Restricted,
            portal_p: 3,
            shifts: 4,
            seed: 0,
            caps: DpCaps::default(),
        }
    }
}

impl MPathsConfig {
    pub fn flow_mode(&self, minst: &MPathsInstance, rho: u32) -> FlowMode {
        let alpha = self.alpha.unwrap_or_else(|| paper_alpha(minst.eps, rho));
        match self.mode {
            ModeChoice::Exact => FlowMode::Exact,
            ModeChoice::Rounded => FlowMode::Rounded { alpha },
            ModeChoice::Auto if minst.m as u64 <= minst.eps.inv() as u64 => FlowMode::Exact,
            ModeChoice::Auto => FlowMode::Rounded { alpha },
        }
    }
}

/// Outcome of one shift. Costs are in original units.
#[derive(Clone, Debug)]
pub struct ShiftRun {
    pub shift: (i64, i64),
    pub mode: FlowMode,
    pub z_dp: f64,
    pub z0: f64,
    /// m′ before path-count reduction.
    pub m_prime: u32,
    pub repaired_cost: f64,
    pub repair_added: f64,
    /// Cost of the repaired graph after anchor removal and reduction (the
    /// routed cost, before shortcutting to point sequences).
    pub routed_cost: f64,
    pub solution: MPathsSolution,
    pub stats: DpStats,
}

#[derive(Clone, Debug)]
pub struct MPathsReport {
    pub solution: MPathsSolution,
    pub rho: u32,
    pub runs: Vec<ShiftRun>,
    /// Index into `runs` of the returned solution (None when no DP ran).
    pub best: Option<usize>,
}

/// DP, repair, anchor removal and reduction on one dissection.
pub fn run_shift(
    minst: &MPathsInstance,
    d: &Dissection,
    layout: &PortalLayout,
    mode: FlowMode,
    caps: &DpCaps,
    cache: &mut CellCache,
) -> Result<ShiftRun> {
    let run = run_dp_cached(minst, d, layout, mode, caps, cache)?;
    let rs = repair_pseudo_solution(&run.graph, &run.solution)?;
    let solution = strip_and_reduce(minst, &run, &rs)?;
    let s = d.scale;
    let routed = repair::routed_cost(minst, &run, &rs)?;
    Ok(ShiftRun {
        shift: d.shift,
        mode,
        z_dp: run.solution.z_dp / s,
        z0: run.z0 / s,
        m_prime: rs.paths,
        repaired_cost: rs.cost / s,
        repair_added: rs.added / s,
        routed_cost: routed / s,
        solution,
        stats: run.stats,
    })
}

/// Best solution over the configured shifts.
pub fn solve_mpaths(minst: &MPathsInstance, cfg: &MPathsConfig) -> Result<MPathsReport> {
    if minst.m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    let n = minst.n();
    if n == 0 {
        let solution = MPathsSolution::from_paths(minst, vec![Vec::new(); minst.m])?;
        return Ok(MPathsReport {
            solution,
            rho: 0,
            runs: Vec::new(),
            best: None,
        });
    }
    // With more paths than points, the surplus paths go straight from a to b.
    let reduced = MPathsInstance {
        m: minst.m.min(n),
        ..minst.clone()
    };
    let rho = rho_for_instance(&reduced);
    let layout = PortalLayout::new(rho, cfg.portal_p, cfg.layout)?;
    let mode = cfg.flow_mode(&reduced, rho);
    let mut runs = Vec::new();
    let mut last_err = None;
    let mut cache = CellCache::default();
    let shifts = shifts_for(rho, cfg.shifts.max(1), cfg.seed);
    for &shift in &shifts {
        let d = Dissection::new(reduced.square, rho, shift)?;
        match run_shift(&reduced, &d, &layout, mode, &cfg.caps, &mut cache) {
            Ok(r) => runs.push(r),
            Err(e @ (Error::CapExceeded { .. } | Error::Infeasible(_))) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    // Every shift failed: retry with paths allowed through cells outside
    // the anchor-bounded region.
    if runs.is_empty() && !cfg.caps.outside_cells {
        let caps = DpCaps { outside_cells: true, ..cfg.caps.clone() };
        for &shift in &shifts {
            let d = Dissection::new(reduced.square, rho, shift)?;
            match run_shift(&reduced, &d, &layout, mode, &caps, &mut cache) {
                Ok(r) => {
                    runs.push(r);
                    break;
                }
                Err(e @ (Error::CapExceeded { .. } | Error::Infeasible(_))) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
    }
    let best = (0..runs.len()).min_by(|&i, &j| runs[i].solution.cost.total_cmp(&runs[j].solution.cost));
    let Some(bi) = best else {
        return Err(last_err.unwrap_or_else(|| Error::cap("shifts", 0)));
    };
    let mut paths = runs[bi].solution.paths.clone();
    paths.resize(minst.m, Vec::new());
    let solution = MPathsSolution::from_paths(minst, paths)?;
    Ok(MPathsReport {
        solution,
        rho,
        runs,
        best,
    })
}
