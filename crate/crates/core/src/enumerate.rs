//! Search of the final-condition simplex for equilibrium epidemics.
//!
//! Three stages:
//! 1. a grid screen traces every grid point of `{S, C, I, R_I ≥ 0, Σ ≤ 1}`
//!    backward and keeps those landing within `screen_tol` of the initial
//!    state;
//! 2. the survivors, together with fixed-behavior runs at a few constant
//!    distancing levels and every point where the harm continuation branch
//!    reaches the true game, seed a damped Newton refinement on the
//!    multiple-shooting system;
//! 3. converged candidates are classified by a backward trace (whole horizon
//!    first, segment by segment if the whole-horizon trace cannot resolve
//!    the match), checked by the forward fixed-point test and deduplicated.
//!
//! Coverage is whatever the grid and seeds resolve. The diagnostics record
//! enough to audit that.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::integrate::{IntegratorConfig, Method};
use crate::multishoot::{self, ContinuationConfig, MultiShootConfig, NodeSeed};
use crate::params::ModelParams;
use crate::schedule::Schedule;
use crate::shooter::{
    trace_backward_with, verify_fixed_point, Behavior, CandidateResult, Classification, FinalCondition,
    FixedPointReport, TraceOptions, MATCH_TOL,
};
use crate::state::WelfareState;
use crate::trajectory::Trajectory;

/// Residual reported for candidates whose trace hits an invalid boundary.
pub const INVALID_SENTINEL: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SearchConfig {
    pub grid_points_per_dim: usize,
    pub refine_max_iters: usize,
    /// Step-shortening factor for rejected Newton steps.
    pub refine_damping: f64,
    pub dedup_tol: f64,
    pub screen_tol: f64,
    /// Initial-state match required of an accepted equilibrium.
    pub match_tol: f64,
    /// Segments used by the multiple-shooting refinement.
    pub segments: usize,
    /// Distancing levels whose forward runs seed the refinement.
    pub seed_levels: Vec<f64>,
    /// Onsets, as fractions of `T`, at which the seed levels switch on (no
    /// distancing before). Onset 0 gives constant distancing.
    pub seed_onsets: Vec<f64>,
    /// Step budget for following the equilibrium branch from the
    /// no-distancing game (harm scaled to zero) to the true game. Each
    /// crossing of the true game seeds the refinement, which catches
    /// coexisting equilibria on a folded branch. 0 turns this off.
    pub continuation_steps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_points_per_dim: 12,
            refine_max_iters: 60,
            refine_damping: 0.5,
            dedup_tol: 1e-6,
            screen_tol: 1e-2,
            match_tol: MATCH_TOL,
            segments: 12,
            seed_levels: alloc::vec![0.0, 0.25, 0.5, 0.75, 1.0],
            seed_onsets: alloc::vec![0.0, 0.25, 0.5],
            continuation_steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("grid_points_per_dim must be at least 2")]
    Grid,
    #[error("refine_max_iters and segments must be positive")]
    Counts,
    #[error("refine_damping must be in (0,1]")]
    Damping,
    #[error("tolerances must be positive with dedup_tol < screen_tol")]
    Tolerances,
    #[error("seed level {0} is outside [0,1]")]
    SeedLevel(f64),
    #[error("seed onset {0} is outside [0,1)")]
    SeedOnset(f64),
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.grid_points_per_dim < 2 {
            return Err(SearchError::Grid);
        }
        if self.refine_max_iters == 0 || self.segments == 0 {
            return Err(SearchError::Counts);
        }
        if !(self.refine_damping > 0.0 && self.refine_damping <= 1.0) {
            return Err(SearchError::Damping);
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.dedup_tol) && positive(self.screen_tol) && positive(self.match_tol)) || self.dedup_tol >= self.screen_tol {
            return Err(SearchError::Tolerances);
        }
        if let Some(v) = self.seed_levels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(SearchError::SeedLevel(*v));
        }
        if let Some(v) = self.seed_onsets.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return Err(SearchError::SeedOnset(*v));
        }
        Ok(())
    }

    fn multishoot(&self) -> MultiShootConfig {
        MultiShootConfig {
            segments: self.segments,
            max_iters: self.refine_max_iters,
            damping: self.refine_damping,
            ..MultiShootConfig::default()
        }
    }

    fn trace_options(&self) -> TraceOptions {
        TraceOptions { match_tol: self.match_tol, ..TraceOptions::default() }
    }
}

/// The initial-state residual of one final condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualEval {
    /// `(S(0) − (1 − Δ), I(0), R_C(0), R_I(0))`, or [`INVALID_SENTINEL`] in
    /// every slot for an invalid boundary.
    pub values: [f64; 4],
    pub classification: Classification,
    pub boundary_time: Option<f64>,
}

impl ResidualEval {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| libm::fabs(*v)).fold(0.0, f64::max)
    }
}

fn residual_of(r: &CandidateResult) -> ResidualEval {
    let values = if r.classification == Classification::InvalidBoundary {
        [INVALID_SENTINEL; 4]
    } else {
        let v = r.initial_residual;
        [v[0], v[2], v[3], v[4]]
    };
    ResidualEval { values, classification: r.classification, boundary_time: r.boundary_time }
}

/// Backward-traces `fc` and reports its initial-state residual. The carriage
/// component is omitted because mass conservation implies it.
pub fn residual(fc: &FinalCondition, p: &ModelParams, cfg: &IntegratorConfig) -> ResidualEval {
    residual_of(&trace_backward_with(fc, p, cfg, Behavior::Equilibrium, &TraceOptions::default()))
}

/// Where a refinement started.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SeedOrigin {
    /// Index into the simplex grid.
    Grid(usize),
    /// Forward run with no distancing before `onset · T` and `level` after.
    Schedule { level: f64, onset: f64 },
    /// The `k`-th crossing of the harm continuation branch.
    Continuation(usize),
}

/// How the accepted trace was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TraceMethod {
    /// One backward integration over the whole horizon.
    Single,
    /// Segment-by-segment backward integration from the refined nodes.
    Segmented,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquilibriumSummary {
    pub final_condition: FinalCondition,
    pub attack_rate: f64,
    /// `∫_0^∞ Γ_E(t) dt`.
    pub total_gamma_e: f64,
    /// Continuation losses at `t = 0`; `l_s` is the ex-ante loss.
    pub initial_losses: WelfareState,
    pub peak_i: f64,
    pub t_peak: f64,
    pub cumulative_distancing: f64,
    /// Max-norm initial-state residual of the accepted trace.
    pub residual: f64,
    pub fixed_point_residual: f64,
}

impl EquilibriumSummary {
    pub fn new(result: &CandidateResult, fixed_point: &FixedPointReport, p: &ModelParams) -> Self {
        let traj = &result.trajectory;
        let (peak_i, t_peak) = traj.peak_sick();
        Self {
            final_condition: result.final_condition,
            attack_rate: traj.attack_rate(),
            total_gamma_e: traj.total_economic_loss(p),
            initial_losses: traj.first().welfare,
            peak_i,
            t_peak,
            cumulative_distancing: traj.cumulative_distancing(),
            residual: result.residual_norm(),
            fixed_point_residual: fixed_point.residual(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub final_condition: FinalCondition,
    pub trajectory: Trajectory,
    pub initial_residual: [f64; 5],
    pub fixed_point: FixedPointReport,
    pub method: TraceMethod,
    pub origin: SeedOrigin,
    /// Integrator that produced the accepted trace. Finer than the search
    /// configuration when the fixed-point gate needed a smaller step.
    pub integrator: IntegratorConfig,
    pub summary: EquilibriumSummary,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RefinementFailure {
    pub origin: SeedOrigin,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchDiagnostics {
    /// Grid points traced in the screen.
    pub candidates_traced: usize,
    pub invalid_boundary: usize,
    pub wrong_initial_state: usize,
    /// Grid points already matching the initial state at `match_tol`.
    pub grid_equilibria: usize,
    /// Grid points within `screen_tol`, passed on to refinement.
    pub screened_in: usize,
    pub seeds_refined: usize,
    pub refinement_failures: Vec<RefinementFailure>,
    /// Accepted candidates dropped as duplicates of earlier ones.
    pub duplicates: usize,
    /// Accepted equilibria whose trace needed segmenting.
    pub segmented: usize,
    /// Points accepted along the harm continuation branch.
    pub continuation_points: usize,
    /// Turning points of the branch in the harm scaling.
    pub continuation_folds: usize,
    /// Whether the branch was followed past the true game.
    pub continuation_completed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSet {
    pub params: ModelParams,
    pub equilibria: Vec<Equilibrium>,
    pub diagnostics: SearchDiagnostics,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.equilibria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equilibria.is_empty()
    }
}

/// Per-equilibrium report rows, in search order.
pub fn summarize(set: &EquilibriumSet) -> Vec<EquilibriumSummary> {
    set.equilibria.iter().map(|e| e.summary).collect()
}

/// Grid points `k / (g − 1)` of the four free coordinates with sum at most 1,
/// in lexicographic order of `(S, C, I, R_I)`.
pub fn simplex_grid(g: usize) -> Vec<FinalCondition> {
    let m = g.saturating_sub(1);
    if m == 0 {
        return Vec::new();
    }
    let x = |k: usize| k as f64 / m as f64;
    let mut out = Vec::new();
    for s in 0..=m {
        for c in 0..=m - s {
            for i in 0..=m - s - c {
                for r in 0..=m - s - c - i {
                    out.push(FinalCondition { s: x(s), c: x(c), i: x(i), r_i: x(r) });
                }
            }
        }
    }
    out
}

/// `(level, onset)` pairs; a zero level is the same run for every onset and
/// appears once.
fn seed_schedules(search: &SearchConfig) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &onset in &search.seed_onsets {
        for &level in &search.seed_levels {
            if level == 0.0 && out.iter().any(|(l, _)| *l == 0.0) {
                continue;
            }
            out.push((level, if level == 0.0 { 0.0 } else { onset }));
        }
    }
    out
}

#[cfg(feature = "parallel")]
fn map_all<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_all<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

struct Screened {
    classification: Classification,
    norm: f64,
    seed: Option<NodeSeed>,
}

struct Accepted {
    result: CandidateResult,
    fixed_point: FixedPointReport,
    method: TraceMethod,
    integrator: IntegratorConfig,
}

/// Times the step may be halved when a converged candidate misses the
/// fixed-point gate only through discretization error.
const VERIFY_REFINEMENTS: usize = 2;

/// The same integrator at half the step (or a sixteenth of the tolerances).
fn finer(cfg: &IntegratorConfig, p: &ModelParams) -> IntegratorConfig {
    match cfg.method {
        Method::Rk4 => IntegratorConfig { step_size: Some(cfg.step_for(p.vaccine_time) / 2.0), ..*cfg },
        Method::Rk45 => IntegratorConfig { rel_tol: cfg.rel_tol / 16.0, abs_tol: cfg.abs_tol / 16.0, ..*cfg },
    }
}

fn solve_and_classify(
    seed: &NodeSeed,
    p: &ModelParams,
    search: &SearchConfig,
    cfg: &IntegratorConfig,
) -> Result<Accepted, String> {
    let ms = multishoot::solve(p, cfg, seed, &search.multishoot()).ok_or_else(|| String::from("integration failed"))?;
    if !ms.converged {
        return Err(alloc::format!("no convergence after {} iterations (residual {:.3e})", ms.iterations, ms.residual));
    }
    let fc = ms.final_condition;
    fc.validate().map_err(|e| alloc::format!("refined point rejected: {e}"))?;
    let opts = search.trace_options();
    let single = trace_backward_with(&fc, p, cfg, Behavior::Equilibrium, &opts);
    let (result, method) = if single.classification == Classification::Equilibrium {
        (single, TraceMethod::Single)
    } else {
        let seg = multishoot::trace_segmented(&fc, &ms.nodes, p, cfg, &opts);
        if seg.classification != Classification::Equilibrium {
            return Err(alloc::format!(
                "refined point classified {:?} (single-trace residual {:.3e}, segmented {:.3e})",
                seg.classification,
                single.residual_norm(),
                seg.residual_norm()
            ));
        }
        (seg, TraceMethod::Segmented)
    };
    let fixed_point = verify_fixed_point(&result, p).map_err(|e| alloc::format!("verification failed: {e}"))?;
    Ok(Accepted { result, fixed_point, method, integrator: *cfg })
}

fn refine(seed: &NodeSeed, p: &ModelParams, search: &SearchConfig, cfg: &IntegratorConfig) -> Result<Accepted, String> {
    let mut cfg = *cfg;
    let mut seed = seed.clone();
    for level in 0..=VERIFY_REFINEMENTS {
        let acc = solve_and_classify(&seed, p, search, &cfg)?;
        if acc.fixed_point.passes() {
            return Ok(acc);
        }
        if level == VERIFY_REFINEMENTS {
            return Err(alloc::format!(
                "fixed-point residual {:.3e} too large at the finest step tried",
                acc.fixed_point.residual()
            ));
        }
        log::debug!("fixed-point residual {:.3e}; refining the integration step", acc.fixed_point.residual());
        cfg = finer(&cfg, p);
        seed = NodeSeed::from_trajectory(&acc.result.trajectory, p, &cfg, search.segments)
            .ok_or_else(|| String::from("empty trajectory"))?;
    }
    unreachable!()
}

/// Finds the equilibrium epidemics resolved by the grid and seeds.
///
/// Deterministic for fixed inputs: grid candidates come first in grid order,
/// then the schedule seeds in the configured order, then the continuation
/// crossings in branch order, and the first representative of every cluster
/// is kept.
pub fn enumerate(p: &ModelParams, search: &SearchConfig, cfg: &IntegratorConfig) -> EquilibriumSet {
    let grid = simplex_grid(search.grid_points_per_dim);
    let opts = search.trace_options();
    let screened = map_all(&grid, |fc| {
        let r = trace_backward_with(fc, p, cfg, Behavior::Equilibrium, &opts);
        let norm = residual_of(&r).norm();
        let seed = (r.classification != Classification::InvalidBoundary && norm < search.screen_tol)
            .then(|| NodeSeed::from_trajectory(&r.trajectory, p, cfg, search.segments))
            .flatten();
        Screened { classification: r.classification, norm, seed }
    });

    let mut diagnostics = SearchDiagnostics { candidates_traced: grid.len(), ..SearchDiagnostics::default() };
    let mut seeds: Vec<(SeedOrigin, NodeSeed)> = Vec::new();
    for (k, s) in screened.into_iter().enumerate() {
        match s.classification {
            Classification::InvalidBoundary => diagnostics.invalid_boundary += 1,
            Classification::WrongInitialState => diagnostics.wrong_initial_state += 1,
            Classification::Equilibrium => diagnostics.grid_equilibria += 1,
        }
        if let Some(seed) = s.seed {
            log::debug!("grid point {k} screened in with residual {:.3e}", s.norm);
            diagnostics.screened_in += 1;
            seeds.push((SeedOrigin::Grid(k), seed));
        }
    }
    for (level, onset) in seed_schedules(search) {
        let origin = SeedOrigin::Schedule { level, onset };
        let schedule = if onset == 0.0 {
            Schedule::constant(level)
        } else {
            Schedule::piecewise_constant(&[(0.0, 0.0), (onset * p.vaccine_time, level)])
        };
        match schedule.ok().and_then(|s| NodeSeed::from_schedule(p, &s, cfg, search.segments)) {
            Some(seed) => seeds.push((origin, seed)),
            None => diagnostics
                .refinement_failures
                .push(RefinementFailure { origin, reason: String::from("seed run failed") }),
        }
    }
    if search.continuation_steps > 0 {
        let cc = ContinuationConfig { max_steps: search.continuation_steps, ..ContinuationConfig::default() };
        match multishoot::continue_in_harm(p, cfg, search.segments, &cc, &search.multishoot()) {
            Some(branch) => {
                diagnostics.continuation_points = branch.points.len();
                diagnostics.continuation_folds = branch.folds;
                diagnostics.continuation_completed = branch.completed;
                seeds.extend(branch.crossings.into_iter().enumerate().map(|(k, s)| (SeedOrigin::Continuation(k), s)));
            }
            None => diagnostics.refinement_failures.push(RefinementFailure {
                origin: SeedOrigin::Continuation(0),
                reason: String::from("no-distancing start of the continuation did not converge"),
            }),
        }
    }
    diagnostics.seeds_refined = seeds.len();

    let refined = map_all(&seeds, |(_, seed)| refine(seed, p, search, cfg));
    let mut equilibria: Vec<Equilibrium> = Vec::new();
    for ((origin, _), outcome) in seeds.iter().zip(refined) {
        let acc = match outcome {
            Ok(acc) => acc,
            Err(reason) => {
                log::debug!("refinement from {origin:?} failed: {reason}");
                diagnostics.refinement_failures.push(RefinementFailure { origin: *origin, reason });
                continue;
            }
        };
        let fc = acc.result.final_condition;
        if equilibria.iter().any(|e| e.final_condition.distance(&fc) < search.dedup_tol) {
            diagnostics.duplicates += 1;
            continue;
        }
        if acc.method == TraceMethod::Segmented {
            diagnostics.segmented += 1;
        }
        let summary = EquilibriumSummary::new(&acc.result, &acc.fixed_point, p);
        equilibria.push(Equilibrium {
            final_condition: fc,
            initial_residual: acc.result.initial_residual,
            trajectory: acc.result.trajectory,
            fixed_point: acc.fixed_point,
            method: acc.method,
            origin: *origin,
            integrator: acc.integrator,
            summary,
        });
    }
    log::info!(
        "{} equilibria from {} seeds ({} grid points traced, {} invalid)",
        equilibria.len(),
        diagnostics.seeds_refined,
        diagnostics.candidates_traced,
        diagnostics.invalid_boundary
    );
    EquilibriumSet { params: *p, equilibria, diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_the_simplex() {
        // Compositions of at most m into four parts: C(m + 4, 4).
        assert_eq!(simplex_grid(12).len(), 1365);
        assert_eq!(simplex_grid(2).len(), 5);
        assert!(simplex_grid(12).iter().all(|fc| fc.validate().is_ok()));
        assert!(simplex_grid(1).is_empty());
    }

    #[test]
    fn search_config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        let bad = SearchConfig { dedup_tol: 1e-1, ..SearchConfig::default() };
        assert_eq!(bad.validate(), Err(SearchError::Tolerances));
        let bad = SearchConfig { refine_damping: 0.0, ..SearchConfig::default() };
        assert_eq!(bad.validate(), Err(SearchError::Damping));
        let bad = SearchConfig { seed_levels: alloc::vec![1.5], ..SearchConfig::default() };
        assert_eq!(bad.validate(), Err(SearchError::SeedLevel(1.5)));
    }
}
