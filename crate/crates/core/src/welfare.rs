//! Continuation-loss dynamics and their values at the vaccine time.
//!
//! `L_ω(t)` is the expected total future loss of an agent in state `ω` at time
//! `t`. Over `dt` it accrues the state's flow loss and, at a jump to state `ω'`
//! with rate `r`, changes by `L_ω' − L_ω`; hence `L_ω' = −flow + r (L_ω − L_ω')`.

use crate::economy::{availability, not_yet_sick_flow_loss};
use crate::params::{LcConvention, ModelParams};
use crate::state::{EpidemicState, WelfareState};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WelfareDerivative {
    pub dl_s: f64,
    pub dl_c: f64,
    pub dl_i: f64,
    pub dl_rc: f64,
    pub dl_ri: f64,
}

impl WelfareDerivative {
    pub fn to_array(&self) -> [f64; 5] {
        [self.dl_s, self.dl_c, self.dl_i, self.dl_rc, self.dl_ri]
    }
}

/// Time derivatives of the continuation losses when not-yet-sick agents
/// distance at `d_n`.
pub fn welfare_rhs(epi: &EpidemicState, w: &WelfareState, d_n: f64, p: &ModelParams) -> WelfareDerivative {
    let n = epi.not_yet_sick();
    let open = 1.0 - p.alpha * d_n;
    let a = availability(epi, d_n, p.alpha);

    let dl_ri = -p.a2 * (p.alpha * d_n * n + epi.i);
    let dl_i = -p.full_benefit() + p.gamma * (w.l_i - w.l_ri);
    let dl_rc = -not_yet_sick_flow_loss(d_n, a, p);
    let (dl_c, dl_s) = match p.lc_rate_convention {
        LcConvention::DynamicsConsistent => {
            let hazard = p.beta * open * open * epi.c;
            (
                dl_rc + p.sigma * (w.l_c - w.l_i) + p.gamma * (w.l_c - w.l_rc),
                dl_rc + hazard * (w.l_s - w.l_c),
            )
        }
        LcConvention::AsPrinted => {
            let flow = p.beta * open * open * epi.s * epi.c;
            (
                dl_rc + p.gamma * (w.l_i - w.l_c) + p.sigma * (w.l_rc - w.l_c),
                dl_rc + flow * (w.l_c - w.l_s),
            )
        }
    };
    WelfareDerivative { dl_s, dl_c, dl_i, dl_rc, dl_ri }
}

/// Sickness after the vaccine, `I(T + s) = P e^{−γ s} − Q e^{−(σ+γ) s}`, as
/// the pair `(P, Q) = (I(T) + C(T), C(T))`.
fn post_vaccine_sickness(epi_t: &EpidemicState) -> (f64, f64) {
    (epi_t.i + epi_t.c, epi_t.c)
}

/// `E[e^{−γ X}]` and `E[e^{−k X}]` weights for the sickness tail under a
/// random delay `X` with Laplace transform `laplace`.
fn expected_tail<L: Fn(f64) -> f64>(epi_t: &EpidemicState, p: &ModelParams, laplace: L) -> f64 {
    let (pp, q) = post_vaccine_sickness(epi_t);
    let k = p.carriage_exit_rate();
    p.a2 * (pp / p.gamma * laplace(p.gamma) - q / k * laplace(k))
}

/// Continuation losses at the vaccine time.
///
/// After `T` nobody distances and availability is `1 − I`, so every well
/// agent loses `a₂ I(t)`. `L_S = L_RC = L_RI = a₂ ∫ I`; sick agents lose the
/// full benefit until recovery and then the remaining tail; carriers face the
/// sickness and clearance branches of their exit from carriage.
pub fn terminal_welfare(epi_t: &EpidemicState, p: &ModelParams) -> WelfareState {
    let k = p.carriage_exit_rate();
    let g = p.gamma;
    let sick_duration = p.full_benefit() / g;
    let tail_now = expected_tail(epi_t, p, |_| 1.0);
    // Delays: recovery ~ Exp(γ); carriage exit ~ Exp(k); both in sequence.
    let tail_after_recovery = expected_tail(epi_t, p, |l| g / (g + l));
    let tail_after_exit = expected_tail(epi_t, p, |l| k / (k + l));
    let tail_after_exit_then_recovery = expected_tail(epi_t, p, |l| k / (k + l) * g / (g + l));

    let l_i = sick_duration + tail_after_recovery;
    let p_sick = p.sigma / k;
    let l_c = tail_now - p_sick * tail_after_exit + p_sick * (sick_duration + tail_after_exit_then_recovery);
    WelfareState::new(tail_now, l_c, l_i, tail_now, tail_now)
}

/// `∫_T^∞ Γ_E(t) dt` with `Γ_E = a₀ I + a₁ I + a₂ (1 − (1 − I)²)`.
pub fn post_vaccine_economic_loss(epi_t: &EpidemicState, p: &ModelParams) -> f64 {
    let (pp, q) = post_vaccine_sickness(epi_t);
    let g = p.gamma;
    let k = p.carriage_exit_rate();
    let int_i = pp / g - q / k;
    let int_i2 = pp * pp / (2.0 * g) - 2.0 * pp * q / (g + k) + q * q / (2.0 * k);
    (p.a0 + p.a1 + 2.0 * p.a2) * int_i - p.a2 * int_i2
}
