//! Backward tracing of a candidate epidemic from its state at the vaccine time.
//!
//! The state at `T` fixes the post-vaccine path and therefore the terminal
//! continuation losses. From there the epidemic and welfare equations are
//! integrated jointly back to `t = 0`, with distancing set at every stage to
//! the Nash equilibrium of the instantaneous game. The candidate is an
//! equilibrium epidemic exactly when the trace lands on `(1 − Δ, Δ, 0, 0, 0)`
//! without any compartment crossing zero on the way.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use thiserror::Error;

use crate::epidemic::{epi_rhs, initial_state};
use crate::integrate::{integrate_with, IntegratorConfig, Method, Solution};
use crate::nash::{equilibrium_distancing, NashInputs};
use crate::params::ModelParams;
use crate::schedule::Schedule;
use crate::state::{EpidemicState, WelfareState, NEG_SLACK};
use crate::trajectory::{replay, Trajectory, TrajectorySample};
use crate::welfare::{terminal_welfare, welfare_rhs};

/// Default initial-state match tolerance for accepted equilibria.
pub const MATCH_TOL: f64 = 1e-8;

/// Residual below which a traced equilibrium counts as a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-5;

/// Compartment masses at the vaccine time; `R_C` is the remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FinalCondition {
    pub s: f64,
    pub c: f64,
    pub i: f64,
    pub r_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("final condition outside the simplex: {0}")]
pub struct FinalConditionError(&'static str);

impl FinalCondition {
    pub fn new(s: f64, c: f64, i: f64, r_i: f64) -> Result<Self, FinalConditionError> {
        let fc = Self { s, c, i, r_i };
        fc.validate()?;
        Ok(fc)
    }

    pub fn from_state(e: &EpidemicState) -> Self {
        Self { s: e.s, c: e.c, i: e.i, r_i: e.r_i }
    }

    pub fn r_c(&self) -> f64 {
        1.0 - (self.s + self.c + self.i + self.r_i)
    }

    pub fn to_state(&self) -> EpidemicState {
        EpidemicState::new(self.s, self.c, self.i, self.r_c(), self.r_i)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.s, self.c, self.i, self.r_i]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { s: a[0], c: a[1], i: a[2], r_i: a[3] }
    }

    pub fn validate(&self) -> Result<(), FinalConditionError> {
        let comps = [self.s, self.c, self.i, self.r_i];
        if comps.iter().any(|v| !v.is_finite()) {
            return Err(FinalConditionError("non-finite component"));
        }
        if comps.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(FinalConditionError("component outside [0,1]"));
        }
        if self.r_c() < -NEG_SLACK {
            return Err(FinalConditionError("components sum above 1"));
        }
        Ok(())
    }

    /// Max-norm distance in final-condition space.
    pub fn distance(&self, other: &Self) -> f64 {
        self.to_array().iter().zip(other.to_array()).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Classification {
    Equilibrium,
    InvalidBoundary,
    WrongInitialState,
}

/// How not-yet-sick agents behave during a trace.
#[derive(Debug, Clone, Copy)]
pub enum Behavior<'a> {
    /// The instantaneous Nash equilibrium, recomputed at every stage.
    Equilibrium,
    /// A prescribed schedule (used for round-trip checks).
    Fixed(&'a Schedule),
    /// Nash play by agents who perceive `λ` times the true harm of infection.
    /// `λ = 1` is [`Behavior::Equilibrium`]; `λ = 0` is no distancing at all.
    ScaledHarm(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Max-norm tolerance on the initial-state residual.
    pub match_tol: f64,
    /// A compartment below `-boundary_slack` at `t > 0` is a boundary hit.
    pub boundary_slack: f64,
    /// Stop at the first boundary hit instead of tracing on to `t = 0`.
    pub stop_at_boundary: bool,
    /// Abort when any state magnitude exceeds this.
    pub blowup: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { match_tol: MATCH_TOL, boundary_slack: NEG_SLACK, stop_at_boundary: true, blowup: 1e6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub final_condition: FinalCondition,
    pub classification: Classification,
    /// The traced path in increasing time order (ending at `T`).
    pub trajectory: Trajectory,
    /// State at `t = 0` minus `(1 − Δ, Δ, 0, 0, 0)`; infinite when the trace
    /// did not reach `t = 0`.
    pub initial_residual: [f64; 5],
    /// Time of the first boundary hit, if any.
    pub boundary_time: Option<f64>,
    pub diagnostic: Option<String>,
}

impl CandidateResult {
    pub fn residual_norm(&self) -> f64 {
        self.initial_residual.iter().map(|v| libm::fabs(*v)).fold(0.0, f64::max)
    }
}

/// Raw outcome of integrating the coupled system backward.
#[derive(Debug, Clone)]
pub(crate) struct Shot {
    pub solution: Option<Solution<10>>,
    pub boundary_time: Option<f64>,
    pub diagnostic: Option<String>,
}

fn split(y: &[f64; 10]) -> (EpidemicState, WelfareState) {
    (
        EpidemicState::from_array([y[0], y[1], y[2], y[3], y[4]]),
        WelfareState::from_array([y[5], y[6], y[7], y[8], y[9]]),
    )
}

pub(crate) fn distancing(t: f64, epi: &EpidemicState, w: &WelfareState, p: &ModelParams, behavior: Behavior<'_>) -> f64 {
    match behavior {
        Behavior::Equilibrium => equilibrium_distancing(&NashInputs::new(*epi, w.harm(), p)).d,
        Behavior::Fixed(s) => s.value_at(t),
        Behavior::ScaledHarm(lambda) => equilibrium_distancing(&NashInputs::new(*epi, lambda * w.harm(), p)).d,
    }
}

/// Right-hand side of the joint epidemic and continuation-loss system.
pub(crate) fn coupled_rhs(t: f64, y: &[f64; 10], p: &ModelParams, behavior: Behavior<'_>) -> [f64; 10] {
    let (epi, w) = split(y);
    let d = distancing(t, &epi, &w, p, behavior);
    let de = epi_rhs(&epi, d, p).to_array();
    let dw = welfare_rhs(&epi, &w, d, p).to_array();
    let mut out = [0.0; 10];
    out[..5].copy_from_slice(&de);
    out[5..].copy_from_slice(&dw);
    out
}

/// Joint state at `T` implied by a final condition.
pub(crate) fn terminal_joint_state(fc: &FinalCondition, p: &ModelParams) -> [f64; 10] {
    let epi_t = fc.to_state();
    let w_t = terminal_welfare(&epi_t, p);
    let mut y = [0.0; 10];
    y[..5].copy_from_slice(&epi_t.to_array());
    y[5..].copy_from_slice(&w_t.to_array());
    y
}

pub(crate) fn shoot(
    fc: &FinalCondition,
    p: &ModelParams,
    cfg: &IntegratorConfig,
    behavior: Behavior<'_>,
    opts: &TraceOptions,
) -> Shot {
    let y0 = terminal_joint_state(fc, p);
    let rhs = |t: f64, y: &[f64; 10]| coupled_rhs(t, y, p, behavior);
    let mut boundary_time = None;
    let mut blew_up = None;
    let observe = |t: f64, y: &[f64; 10]| {
        if y.iter().any(|v| libm::fabs(*v) > opts.blowup) {
            blew_up = Some(t);
            return ControlFlow::Break(());
        }
        if t > 0.0 && boundary_time.is_none() && y[..5].iter().any(|v| *v < -opts.boundary_slack) {
            boundary_time = Some(t);
            if opts.stop_at_boundary {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    };
    // A prescribed schedule with jumps is traced piece by piece, as the
    // forward simulation does, so that no stage straddles a jump.
    let pieces = match behavior {
        Behavior::Fixed(s) => s.pieces(0.0, p.vaccine_time),
        _ => Vec::new(),
    };
    let result = if pieces.len() > 1 {
        shoot_pieces(behavior, &pieces, y0, p, cfg, observe)
    } else {
        integrate_with(rhs, y0, p.vaccine_time, 0.0, cfg, observe)
    };
    match result {
        Ok(sol) => {
            let diagnostic = blew_up.map(|t| alloc::format!("state diverged at t = {t}"));
            let boundary_time = boundary_time.or(blew_up);
            Shot { solution: Some(sol), boundary_time, diagnostic }
        }
        Err(e) => Shot { solution: None, boundary_time: None, diagnostic: Some(alloc::format!("{e}")) },
    }
}

fn shoot_pieces<O>(
    behavior: Behavior<'_>,
    pieces: &[(f64, f64, Option<f64>)],
    y0: [f64; 10],
    p: &ModelParams,
    cfg: &IntegratorConfig,
    mut observe: O,
) -> Result<Solution<10>, crate::integrate::IntegrateError>
where
    O: FnMut(f64, &[f64; 10]) -> ControlFlow<()>,
{
    let piece_cfg = match cfg.method {
        Method::Rk4 => IntegratorConfig { step_size: Some(cfg.step_for(p.vaccine_time)), ..*cfg },
        Method::Rk45 => *cfg,
    };
    let mut out = Solution { t: Vec::new(), y: Vec::new(), stopped_early: false };
    let mut y = y0;
    for (a, b, value) in pieces.iter().rev() {
        let constant = value.map(Schedule::Constant);
        let piece_behavior = constant.as_ref().map_or(behavior, Behavior::Fixed);
        let rhs = |t: f64, y: &[f64; 10]| coupled_rhs(t, y, p, piece_behavior);
        let sol = integrate_with(rhs, y, *b, *a, &piece_cfg, &mut observe)?;
        let skip = usize::from(!out.t.is_empty());
        out.t.extend_from_slice(&sol.t[skip..]);
        out.y.extend_from_slice(&sol.y[skip..]);
        y = sol.last().1;
        if sol.stopped_early {
            out.stopped_early = true;
            break;
        }
    }
    Ok(out)
}

/// Traces `fc` backward under the equilibrium rule with default options.
pub fn trace_backward(fc: &FinalCondition, p: &ModelParams, cfg: &IntegratorConfig) -> CandidateResult {
    trace_backward_with(fc, p, cfg, Behavior::Equilibrium, &TraceOptions::default())
}

pub fn trace_backward_with(
    fc: &FinalCondition,
    p: &ModelParams,
    cfg: &IntegratorConfig,
    behavior: Behavior<'_>,
    opts: &TraceOptions,
) -> CandidateResult {
    if let Err(e) = fc.validate() {
        return CandidateResult {
            final_condition: *fc,
            classification: Classification::InvalidBoundary,
            trajectory: Trajectory::default(),
            initial_residual: [f64::INFINITY; 5],
            boundary_time: Some(p.vaccine_time),
            diagnostic: Some(alloc::format!("{e}")),
        };
    }
    let shot = shoot(fc, p, cfg, behavior, opts);
    match shot.solution {
        Some(sol) => {
            let path = TracedPath { t: &sol.t, y: &sol.y, boundary_time: shot.boundary_time, defect: 0.0 };
            assemble(fc, p, behavior, opts, path, shot.diagnostic)
        }
        None => CandidateResult {
            final_condition: *fc,
            classification: Classification::InvalidBoundary,
            trajectory: Trajectory::default(),
            initial_residual: [f64::INFINITY; 5],
            boundary_time: Some(p.vaccine_time),
            diagnostic: shot.diagnostic,
        },
    }
}

/// Backward-ordered joint states of a trace, from `T` towards `0`.
pub(crate) struct TracedPath<'a> {
    pub t: &'a [f64],
    pub y: &'a [[f64; 10]],
    pub boundary_time: Option<f64>,
    /// Largest continuity gap when the path was traced in pieces.
    pub defect: f64,
}

pub(crate) fn assemble(
    fc: &FinalCondition,
    p: &ModelParams,
    behavior: Behavior<'_>,
    opts: &TraceOptions,
    path: TracedPath<'_>,
    diagnostic: Option<String>,
) -> CandidateResult {
    let samples: Vec<TrajectorySample> = path
        .t
        .iter()
        .zip(path.y)
        .rev()
        .map(|(t, y)| {
            let (epi, w) = split(y);
            TrajectorySample::new(*t, epi, w, distancing(*t, &epi, &w, p, behavior), p)
        })
        .collect();
    let target = initial_state(p).to_array();
    let reached = path.t.last() == Some(&0.0);
    let initial_residual = match path.y.last() {
        Some(y) if reached => core::array::from_fn(|k| y[k] - target[k]),
        _ => [f64::INFINITY; 5],
    };
    let norm = initial_residual.iter().map(|v| libm::fabs(*v)).fold(0.0, f64::max);
    let classification = if path.boundary_time.is_some() || !norm.is_finite() {
        Classification::InvalidBoundary
    } else if norm < opts.match_tol && path.defect < opts.match_tol {
        Classification::Equilibrium
    } else {
        Classification::WrongInitialState
    };
    CandidateResult {
        final_condition: *fc,
        classification,
        trajectory: Trajectory { samples },
        initial_residual,
        boundary_time: path.boundary_time,
        diagnostic,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum VerifyError {
    #[error("candidate is not classified as an equilibrium")]
    NotEquilibrium,
    #[error("trajectory has fewer than two samples")]
    TooShort,
    #[error("trajectory times must increase from 0 to T")]
    Grid,
    #[error("replay failed: {0}")]
    Replay(#[from] crate::integrate::IntegrateError),
}

/// Two-sided fixed-point check of a distancing path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointReport {
    /// Max-norm gap between the replayed and the recorded epidemic states.
    pub state_mismatch: f64,
    /// Max gap between the recorded distancing and the Nash best response to
    /// the replayed epidemic.
    pub behavior_mismatch: f64,
}

impl FixedPointReport {
    pub fn residual(&self) -> f64 {
        libm::fmax(self.state_mismatch, self.behavior_mismatch)
    }

    pub fn passes(&self) -> bool {
        self.residual() < FIXED_POINT_TOL
    }
}

/// Cubic Hermite interpolation of recorded states on an arbitrary grid,
/// using the model derivatives under the recorded distancing as slopes.
fn recorded_state_at(times: &[f64], states: &[[f64; 5]], slopes: &[[f64; 5]], t: f64) -> [f64; 5] {
    let n = times.len();
    let k = times.partition_point(|s| *s <= t).clamp(1, n - 1);
    let (t0, t1) = (times[k - 1], times[k]);
    let h = t1 - t0;
    let th = ((t - t0) / h).clamp(0.0, 1.0);
    if th == 0.0 {
        return states[k - 1];
    }
    if th == 1.0 {
        return states[k];
    }
    let t2 = th * th;
    let t3 = t2 * th;
    let (h00, h10, h01, h11) = (2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + th, -2.0 * t3 + 3.0 * t2, t3 - t2);
    core::array::from_fn(|j| {
        h00 * states[k - 1][j] + h10 * h * slopes[k - 1][j] + h01 * states[k][j] + h11 * h * slopes[k][j]
    })
}

/// Replays the recorded distancing path forward from the true initial state
/// and checks both that it regenerates the recorded states and that the
/// recorded distancing is the Nash response to the regenerated epidemic.
///
/// `times` must increase from `0` to `T`. On a uniform grid the replay reuses
/// the grid; otherwise it runs on a uniform grid at least as fine as the
/// smallest recorded step and the record is interpolated onto it.
pub fn verify_path(
    p: &ModelParams,
    times: &[f64],
    states: &[EpidemicState],
    d_path: &[f64],
) -> Result<FixedPointReport, VerifyError> {
    let n = times.len();
    if n < 2 || states.len() != n || d_path.len() != n {
        return Err(VerifyError::TooShort);
    }
    let t_end = p.vaccine_time;
    let slack = 1e-9 * t_end.max(1.0);
    if libm::fabs(times[0]) > slack || libm::fabs(times[n - 1] - t_end) > slack || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(VerifyError::Grid);
    }
    let h = t_end / (n - 1) as f64;
    let uniform = times.iter().enumerate().all(|(k, t)| libm::fabs(t - k as f64 * h) <= slack);
    let steps = if uniform {
        n - 1
    } else {
        let min_dt = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        (libm::ceil(t_end / min_dt) as usize).clamp(n - 1, 400_000)
    };
    let schedule = Schedule::Cubic { times: times.to_vec(), values: d_path.to_vec() };
    let r = replay(p, &schedule, steps)?;
    let recorded: Vec<[f64; 5]> = states.iter().map(|e| e.to_array()).collect();
    let slopes: Vec<[f64; 5]> = states.iter().zip(d_path).map(|(e, d)| epi_rhs(e, *d, p).to_array()).collect();
    let mut state_mismatch: f64 = 0.0;
    let mut behavior_mismatch: f64 = 0.0;
    for (k, s) in r.trajectory.samples.iter().enumerate() {
        let (b, d) = if uniform {
            (recorded[k], d_path[k])
        } else {
            (recorded_state_at(times, &recorded, &slopes, s.t), schedule.value_at(s.t))
        };
        let a = s.epi.to_array();
        for j in 0..5 {
            state_mismatch = state_mismatch.max(libm::fabs(a[j] - b[j]));
        }
        behavior_mismatch = behavior_mismatch.max(libm::fabs(r.best_response[k] - d));
    }
    Ok(FixedPointReport { state_mismatch, behavior_mismatch })
}

/// Fixed-point verification of a traced equilibrium.
///
pub fn verify_fixed_point(result: &CandidateResult, p: &ModelParams) -> Result<FixedPointReport, VerifyError> {
    if result.classification != Classification::Equilibrium {
        return Err(VerifyError::NotEquilibrium);
    }
    let samples = &result.trajectory.samples;
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let states: Vec<EpidemicState> = samples.iter().map(|s| s.epi).collect();
    let d: Vec<f64> = samples.iter().map(|s| s.d_n).collect();
    verify_path(p, &times, &states, &d)
}
