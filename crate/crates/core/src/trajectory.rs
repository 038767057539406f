//! Sampled trajectories with their summaries, and fixed-behavior replay.

use alloc::vec::Vec;

use crate::economy::{aggregate_flow_loss, availability};
use crate::epidemic::{attack_rate, epi_rhs, initial_state};
use crate::integrate::{integrate, IntegrateError, IntegratorConfig, Solution};
use crate::nash::{equilibrium_distancing, NashInputs};
use crate::params::ModelParams;
use crate::schedule::Schedule;
use crate::state::{EpidemicState, WelfareState, MASS_TOL};
use crate::welfare::{post_vaccine_economic_loss, terminal_welfare, welfare_rhs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub epi: EpidemicState,
    pub welfare: WelfareState,
    pub d_n: f64,
    pub availability: f64,
    pub gamma_e: f64,
}

impl TrajectorySample {
    pub fn new(t: f64, epi: EpidemicState, welfare: WelfareState, d_n: f64, p: &ModelParams) -> Self {
        Self {
            t,
            epi,
            welfare,
            d_n,
            availability: availability(&epi, d_n, p.alpha),
            gamma_e: aggregate_flow_loss(&epi, d_n, p),
        }
    }
}

/// Samples in increasing time order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn last(&self) -> &TrajectorySample {
        &self.samples[self.samples.len() - 1]
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// The distancing path as a linearly interpolated schedule.
    pub fn schedule(&self) -> Schedule {
        Schedule::Linear {
            times: self.times(),
            values: self.samples.iter().map(|s| s.d_n).collect(),
        }
    }

    /// Attack rate from the state at the last sample (the vaccine time).
    pub fn attack_rate(&self) -> f64 {
        attack_rate(&self.last().epi)
    }

    /// `∫_0^∞ Γ_E(t) dt`: quadrature over the samples plus the exact
    /// post-vaccine tail.
    pub fn total_economic_loss(&self, p: &ModelParams) -> f64 {
        let ts = self.times();
        let ys: Vec<f64> = self.samples.iter().map(|s| s.gamma_e).collect();
        integrate_samples(&ts, &ys) + post_vaccine_economic_loss(&self.last().epi, p)
    }

    /// Peak sick mass and the time it occurs.
    pub fn peak_sick(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::NEG_INFINITY, 0.0), |(best, tb), s| if s.epi.i > best { (s.epi.i, s.t) } else { (best, tb) })
    }

    /// `∫ d_N(t) dt` over the sampled span.
    pub fn cumulative_distancing(&self) -> f64 {
        let ts = self.times();
        let ys: Vec<f64> = self.samples.iter().map(|s| s.d_n).collect();
        integrate_samples(&ts, &ys)
    }

    /// Largest `|Σ compartments − 1|` over the samples.
    pub fn max_mass_error(&self) -> f64 {
        self.samples.iter().map(|s| libm::fabs(s.epi.total() - 1.0)).fold(0.0, f64::max)
    }

    /// Mass conservation within tolerance, `S` non-increasing and `R_C`,
    /// `R_I` non-decreasing in forward time (each up to `slack`).
    pub fn is_physical(&self, slack: f64) -> bool {
        self.max_mass_error() < MASS_TOL
            && self.samples.windows(2).all(|w| {
                w[1].epi.s <= w[0].epi.s + slack && w[1].epi.r_c >= w[0].epi.r_c - slack && w[1].epi.r_i >= w[0].epi.r_i - slack
            })
    }
}

/// Composite Simpson on a uniform grid (with a trapezoid on a trailing odd
/// interval); trapezoid on a non-uniform grid.
pub fn integrate_samples(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len();
    if n < 2 {
        return 0.0;
    }
    let h = (ts[n - 1] - ts[0]) / (n - 1) as f64;
    let uniform = ts.windows(2).all(|w| libm::fabs((w[1] - w[0]) - h) <= 1e-9 * libm::fabs(h).max(1.0));
    if !uniform {
        return ts.windows(2).zip(ys.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum();
    }
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut acc = 0.0;
    if even > 0 {
        let mut s = ys[0] + ys[even];
        for (j, y) in ys.iter().enumerate().take(even).skip(1) {
            s += if j % 2 == 1 { 4.0 } else { 2.0 } * y;
        }
        acc += s * h / 3.0;
    }
    if even < intervals {
        acc += 0.5 * h * (ys[even] + ys[even + 1]);
    }
    acc
}

/// Cubic Hermite interpolation of a uniformly sampled path.
struct HermitePath<'a> {
    t0: f64,
    h: f64,
    y: &'a [[f64; 5]],
    dy: &'a [[f64; 5]],
}

impl HermitePath<'_> {
    fn at(&self, t: f64) -> [f64; 5] {
        let last = self.y.len() - 1;
        let x = (t - self.t0) / self.h;
        let k = if x <= 0.0 { 0 } else { (libm::floor(x) as usize).min(last - 1) };
        let th = x - k as f64;
        if th.abs() < 1e-12 {
            return self.y[k];
        }
        if (th - 1.0).abs() < 1e-12 {
            return self.y[k + 1];
        }
        let t2 = th * th;
        let t3 = t2 * th;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + th;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let mut out = [0.0; 5];
        for j in 0..5 {
            out[j] = h00 * self.y[k][j] + h10 * self.h * self.dy[k][j] + h01 * self.y[k + 1][j] + h11 * self.h * self.dy[k + 1][j];
        }
        out
    }
}

/// Continuation losses along a uniformly sampled epidemic path in which
/// not-yet-sick agents follow `schedule`, integrated backward from the
/// terminal values with the same grid.
pub fn welfare_along(
    p: &ModelParams,
    times: &[f64],
    path: &[EpidemicState],
    schedule: &Schedule,
) -> Result<Vec<WelfareState>, IntegrateError> {
    let n = times.len();
    if n < 2 {
        return Err(IntegrateError::EmptySpan);
    }
    let y: Vec<[f64; 5]> = path.iter().map(|e| e.to_array()).collect();
    let dy: Vec<[f64; 5]> = path
        .iter()
        .zip(times)
        .map(|(e, t)| epi_rhs(e, schedule.value_at(*t), p).to_array())
        .collect();
    let t0 = times[0];
    let t1 = times[n - 1];
    let h = (t1 - t0) / (n - 1) as f64;
    let interp = HermitePath { t0, h, y: &y, dy: &dy };
    let w_end = terminal_welfare(&path[n - 1], p);
    let cfg = IntegratorConfig::rk4_with_step(h);
    let sol = integrate(
        |t, w: &[f64; 5]| {
            let epi = EpidemicState::from_array(interp.at(t));
            welfare_rhs(&epi, &WelfareState::from_array(*w), schedule.value_at(t), p).to_array()
        },
        w_end.to_array(),
        t1,
        t0,
        &cfg,
    )?;
    debug_assert_eq!(sol.len(), n);
    Ok(sol.y.iter().rev().map(|w| WelfareState::from_array(*w)).collect())
}

/// A fixed-behavior run: the forward epidemic under `schedule`, the welfare it
/// induces, and the pointwise Nash best response to that welfare.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub trajectory: Trajectory,
    pub best_response: Vec<f64>,
}

/// Simulates `[0, T]` forward with `steps` fixed RK4 steps under `schedule`.
pub fn replay(p: &ModelParams, schedule: &Schedule, steps: usize) -> Result<Replay, IntegrateError> {
    let t_end = p.vaccine_time;
    let cfg = IntegratorConfig::rk4_with_step(t_end / steps as f64);
    let y0 = initial_state(p).to_array();
    let sol: Solution<5> = integrate(
        |t, y: &[f64; 5]| epi_rhs(&EpidemicState::from_array(*y), schedule.value_at(t), p).to_array(),
        y0,
        0.0,
        t_end,
        &cfg,
    )?;
    let path: Vec<EpidemicState> = sol.y.iter().map(|y| EpidemicState::from_array(*y)).collect();
    let welfare = welfare_along(p, &sol.t, &path, schedule)?;
    let mut samples = Vec::with_capacity(path.len());
    let mut best_response = Vec::with_capacity(path.len());
    for ((t, epi), w) in sol.t.iter().zip(&path).zip(&welfare) {
        samples.push(TrajectorySample::new(*t, *epi, *w, schedule.value_at(*t), p));
        best_response.push(equilibrium_distancing(&NashInputs::new(*epi, w.harm(), p)).d);
    }
    Ok(Replay { trajectory: Trajectory { samples }, best_response })
}
