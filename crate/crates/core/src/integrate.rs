//! Explicit Runge–Kutta integration over a fixed span, forward or backward.
//!
//! A span with `t1 < t0` is integrated in reversed time `τ = t0 − t` with the
//! right-hand side negated, so both directions share one stepping routine.
//! Samples are returned in integration order (from `t0` towards `t1`).

use alloc::vec::Vec;
use core::ops::ControlFlow;

use thiserror::Error;

/// Default number of fixed steps across the integration span.
pub const DEFAULT_STEPS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    #[default]
    Rk4,
    /// Dormand–Prince 5(4) with embedded error control.
    Rk45,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step (or the initial step in adaptive mode). `None` means
    /// `span / 5000`.
    pub step_size: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Cap on accepted plus rejected adaptive steps.
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            step_size: None,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum IntegrateError {
    #[error("integration span is empty")]
    EmptySpan,
    #[error("invalid integrator configuration: {0}")]
    Config(&'static str),
    #[error("adaptive step underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("adaptive step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
}

impl IntegratorConfig {
    pub fn rk4_with_step(h: f64) -> Self {
        Self { step_size: Some(h), ..Self::default() }
    }

    pub fn adaptive(rel_tol: f64, abs_tol: f64) -> Self {
        Self { method: Method::Rk45, rel_tol, abs_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        if let Some(h) = self.step_size {
            if !(h.is_finite() && h > 0.0) {
                return Err(IntegrateError::Config("step_size must be > 0"));
            }
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(IntegrateError::Config("tolerances must be > 0"));
        }
        if self.max_steps == 0 {
            return Err(IntegrateError::Config("max_steps must be > 0"));
        }
        Ok(())
    }

    /// Step length for a span of length `span`.
    pub fn step_for(&self, span: f64) -> f64 {
        self.step_size.unwrap_or(span / DEFAULT_STEPS as f64)
    }

    /// Fixed-step grid size for a span: the configured step rounded so the
    /// grid lands exactly on the end point.
    pub fn fixed_steps(&self, span: f64) -> usize {
        let n = libm::ceil(span / self.step_for(span) - 1e-9);
        if n < 1.0 {
            1
        } else {
            n as usize
        }
    }
}

/// Samples of an integrated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    /// True when the observer asked to stop before the end of the span.
    pub stopped_early: bool,
}

impl<const N: usize> Solution<N> {
    pub fn last(&self) -> (f64, [f64; N]) {
        let k = self.t.len() - 1;
        (self.t[k], self.y[k])
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Integrates `dy/dt = rhs(t, y)` from `t0` to `t1`.
pub fn integrate<const N: usize, F>(
    rhs: F,
    y0: [f64; N],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Solution<N>, IntegrateError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    integrate_with(rhs, y0, t0, t1, cfg, |_, _| ControlFlow::Continue(()))
}

/// Like [`integrate`], calling `observe` on every accepted sample (including
/// the initial one). Returning `ControlFlow::Break` ends the integration with
/// `stopped_early` set.
pub fn integrate_with<const N: usize, F, O>(
    mut rhs: F,
    y0: [f64; N],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    mut observe: O,
) -> Result<Solution<N>, IntegrateError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]) -> ControlFlow<()>,
{
    cfg.validate()?;
    let span = libm::fabs(t1 - t0);
    if !(span > 0.0) || !span.is_finite() {
        return Err(IntegrateError::EmptySpan);
    }
    let dir = if t1 > t0 { 1.0 } else { -1.0 };
    // Reversed-time system: dy/dτ = dir · rhs(t0 + dir τ, y).
    let mut f = move |tau: f64, y: &[f64; N]| -> [f64; N] {
        let mut d = rhs(t0 + dir * tau, y);
        if dir < 0.0 {
            for v in d.iter_mut() {
                *v = -*v;
            }
        }
        d
    };
    let to_t = |tau: f64| if tau == span { t1 } else { t0 + dir * tau };

    let mut sol = Solution { t: Vec::new(), y: Vec::new(), stopped_early: false };
    sol.t.push(t0);
    sol.y.push(y0);
    if observe(t0, &y0).is_break() {
        sol.stopped_early = true;
        return Ok(sol);
    }

    match cfg.method {
        Method::Rk4 => {
            let n = cfg.fixed_steps(span);
            sol.t.reserve(n);
            sol.y.reserve(n);
            let h = span / n as f64;
            let mut y = y0;
            for k in 0..n {
                let tau = k as f64 * h;
                y = rk4_step(&mut f, tau, &y, h);
                let tau_next = if k + 1 == n { span } else { (k + 1) as f64 * h };
                let t = to_t(tau_next);
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(IntegrateError::NonFinite { t });
                }
                sol.t.push(t);
                sol.y.push(y);
                if observe(t, &y).is_break() {
                    sol.stopped_early = true;
                    break;
                }
            }
        }
        Method::Rk45 => {
            let mut h = cfg.step_for(span).min(span);
            let h_min = span * 1e-14;
            let mut tau = 0.0;
            let mut y = y0;
            let mut k1 = f(0.0, &y);
            let mut steps = 0usize;
            while tau < span {
                steps += 1;
                if steps > cfg.max_steps {
                    return Err(IntegrateError::TooManySteps { t: to_t(tau) });
                }
                let last = tau + h >= span;
                if last {
                    h = span - tau;
                }
                let (y_new, k_last, err) = dopri_step(&mut f, tau, &y, &k1, h, cfg);
                if !err.is_finite() {
                    h *= 0.25;
                    if h < h_min {
                        return Err(IntegrateError::StepUnderflow { t: to_t(tau) });
                    }
                    continue;
                }
                if err <= 1.0 {
                    tau = if last { span } else { tau + h };
                    y = y_new;
                    k1 = k_last;
                    let t = to_t(tau);
                    sol.t.push(t);
                    sol.y.push(y);
                    if observe(t, &y).is_break() {
                        sol.stopped_early = true;
                        break;
                    }
                }
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0)
                };
                h *= factor;
                if h < h_min && tau < span {
                    return Err(IntegrateError::StepUnderflow { t: to_t(tau) });
                }
            }
        }
    }
    Ok(sol)
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(&[f64; N], f64)]) -> [f64; N] {
    let mut out = *y;
    for (k, c) in terms {
        for j in 0..N {
            out[j] += h * c * k[j];
        }
    }
    out
}

pub(crate) fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, h, &[(&k1, 0.5)]));
    let k3 = f(t + 0.5 * h, &axpy(y, h, &[(&k2, 0.5)]));
    let k4 = f(t + h, &axpy(y, h, &[(&k3, 1.0)]));
    let mut out = *y;
    for j in 0..N {
        out[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    out
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn dopri_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    cfg: &IntegratorConfig,
) -> ([f64; N], [f64; N], f64)
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(k1, A21)]));
    let k3 = f(t + C3 * h, &axpy(y, h, &[(k1, A31), (&k2, A32)]));
    let k4 = f(t + C4 * h, &axpy(y, h, &[(k1, A41), (&k2, A42), (&k3, A43)]));
    let k5 = f(t + C5 * h, &axpy(y, h, &[(k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]));
    let k6 = f(t + h, &axpy(y, h, &[(k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]));
    let y_new = axpy(y, h, &[(k1, B1), (&k3, B3), (&k4, B4), (&k5, B5), (&k6, B6)]);
    let k7 = f(t + h, &y_new);
    let mut err = 0.0f64;
    for j in 0..N {
        let e = h * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j]);
        let scale = cfg.abs_tol + cfg.rel_tol * libm::fmax(libm::fabs(y[j]), libm::fabs(y_new[j]));
        let r = e / scale;
        err += r * r;
    }
    (y_new, k7, libm::sqrt(err / N as f64))
}
