//! Epidemic dynamics before the vaccine, and their closed form after it
//! arrives.

use alloc::vec::Vec;

use crate::integrate::{integrate, IntegrateError, IntegratorConfig, Method, Solution};
use crate::params::ModelParams;
use crate::schedule::Schedule;
use crate::state::EpidemicState;

/// Time derivative of the epidemic state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpiDerivative {
    pub ds: f64,
    pub dc: f64,
    pub di: f64,
    pub dr_c: f64,
    pub dr_i: f64,
}

impl EpiDerivative {
    pub fn to_array(&self) -> [f64; 5] {
        [self.ds, self.dc, self.di, self.dr_c, self.dr_i]
    }

    pub fn sum(&self) -> f64 {
        self.ds + self.dc + self.di + self.dr_c + self.dr_i
    }
}

/// Flow of new exposures, `β (1 − α d_N)² S C`.
pub fn infection_flow(epi: &EpidemicState, d_n: f64, p: &ModelParams) -> f64 {
    let open = 1.0 - p.alpha * d_n;
    p.beta * open * open * epi.s * epi.c
}

/// Epidemic dynamics when all not-yet-sick agents distance at `d_n`.
pub fn epi_rhs(epi: &EpidemicState, d_n: f64, p: &ModelParams) -> EpiDerivative {
    let flow = infection_flow(epi, d_n, p);
    EpiDerivative {
        ds: -flow,
        dc: flow - (p.sigma + p.gamma) * epi.c,
        di: p.sigma * epi.c - p.gamma * epi.i,
        dr_c: p.gamma * epi.c,
        dr_i: p.gamma * epi.i,
    }
}

/// `(1 − Δ, Δ, 0, 0, 0)`.
pub fn initial_state(p: &ModelParams) -> EpidemicState {
    EpidemicState::new(1.0 - p.delta_init, p.delta_init, 0.0, 0.0, 0.0)
}

/// State `dt ≥ 0` after the vaccine time, from the exact solution of the
/// transmission-free linear system.
pub fn post_vaccine_state(epi_t: &EpidemicState, dt: f64, p: &ModelParams) -> EpidemicState {
    if dt == 0.0 {
        return *epi_t;
    }
    let k = p.carriage_exit_rate();
    let decay_c = libm::exp(-k * dt);
    let c = epi_t.c * decay_c;
    let i = libm::exp(-p.gamma * dt) * (epi_t.i + epi_t.c * -libm::expm1(-p.sigma * dt));
    let gained_rc = p.gamma / k * epi_t.c * -libm::expm1(-k * dt);
    let r_c = epi_t.r_c + gained_rc;
    // Whatever left C and I without entering R_C ended in R_I.
    let r_i = epi_t.r_i + (epi_t.c - c) + (epi_t.i - i) - gained_rc;
    EpidemicState::new(epi_t.s, c, i, r_c, r_i)
}

/// Probability of ever being infected, `lim (R_C + R_I)`: everyone in
/// carriage or sick at `T` eventually recovers and nobody is infected later.
pub fn attack_rate(epi_t: &EpidemicState) -> f64 {
    epi_t.r_c + epi_t.r_i + epi_t.c + epi_t.i
}

/// Integrates the epidemic forward from the initial state over `[0, T]` with
/// distancing given by `behavior(t, state)`.
pub fn simulate<B>(p: &ModelParams, mut behavior: B, cfg: &IntegratorConfig) -> Result<Solution<5>, IntegrateError>
where
    B: FnMut(f64, &EpidemicState) -> f64,
{
    let y0 = initial_state(p).to_array();
    integrate(
        |t, y: &[f64; 5]| {
            let epi = EpidemicState::from_array(*y);
            let d = behavior(t, &epi);
            epi_rhs(&epi, d, p).to_array()
        },
        y0,
        0.0,
        p.vaccine_time,
        cfg,
    )
}

/// Forward run under a prescribed schedule. Piecewise-constant schedules are
/// integrated piece by piece so that no Runge–Kutta stage straddles a jump;
/// fixed steps keep the configured length (shortened to fit each piece).
pub fn simulate_schedule(p: &ModelParams, schedule: &Schedule, cfg: &IntegratorConfig) -> Result<Solution<5>, IntegrateError> {
    let piece_cfg = match cfg.method {
        Method::Rk4 => IntegratorConfig { step_size: Some(cfg.step_for(p.vaccine_time)), ..*cfg },
        Method::Rk45 => *cfg,
    };
    let mut out = Solution { t: Vec::new(), y: Vec::new(), stopped_early: false };
    let mut y = initial_state(p).to_array();
    for (a, b, value) in schedule.pieces(0.0, p.vaccine_time) {
        let sol = integrate(
            |t, y: &[f64; 5]| {
                let d = value.unwrap_or_else(|| schedule.value_at(t));
                epi_rhs(&EpidemicState::from_array(*y), d, p).to_array()
            },
            y,
            a,
            b,
            &piece_cfg,
        )?;
        let skip = usize::from(!out.t.is_empty());
        out.t.extend_from_slice(&sol.t[skip..]);
        out.y.extend_from_slice(&sol.y[skip..]);
        y = sol.last().1;
    }
    Ok(out)
}
