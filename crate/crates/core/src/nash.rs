//! The time-t distancing game among not-yet-sick agents.
//!
//! An agent's payoff `GAIN − COST` is linear in her own intensity `d_i`, with
//! slope `MG(d_N) − MC(d_N)`. Both margins are affine and decreasing in the
//! common intensity `d_N`, so the game has a unique symmetric equilibrium:
//! when the margins cross inside `(0, 1)` the gain margin is the steeper one.

use crate::params::ModelParams;
use crate::state::EpidemicState;

/// Below this mass of not-yet-sick agents the game has no players.
pub const DEGENERATE_N: f64 = 1e-12;

const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashInputs<'a> {
    pub epi: EpidemicState,
    /// Harm of susceptible exposure, `H = L_C − L_S`.
    pub harm: f64,
    pub params: &'a ModelParams,
}

/// Which case of the equilibrium characterization applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `MG(0) ≤ MC(0)`: not distancing is dominant.
    NoDistancing,
    /// `MG(1) ≥ MC(1)`: full distancing is dominant.
    FullDistancing,
    /// The margins cross strictly inside `(0, 1)`.
    Interior,
    /// No not-yet-sick agents exist; behavior is irrelevant.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashOutcome {
    pub d: f64,
    pub regime: Regime,
}

impl<'a> NashInputs<'a> {
    pub fn new(epi: EpidemicState, harm: f64, params: &'a ModelParams) -> Self {
        Self { epi, harm, params }
    }

    /// Expected harm flow from exposure per not-yet-sick agent, `β S C H / N`.
    pub fn exposure_pressure(&self) -> f64 {
        let p = self.params;
        p.beta * self.epi.s * self.epi.c * self.harm / self.epi.not_yet_sick()
    }
}

/// `MG(d_N) = α (1 − α d_N) β S C H / N`.
pub fn marginal_gain(d_n: f64, inp: &NashInputs<'_>) -> f64 {
    let alpha = inp.params.alpha;
    alpha * (1.0 - alpha * d_n) * inp.exposure_pressure()
}

/// `MC(d_N) = a₁ α + a₂ α ((1 − α d_N) N + R_I)`.
pub fn marginal_cost(d_n: f64, inp: &NashInputs<'_>) -> f64 {
    let p = inp.params;
    let avail = (1.0 - p.alpha * d_n) * inp.epi.not_yet_sick() + inp.epi.r_i;
    p.a1 * p.alpha + p.a2 * p.alpha * avail
}

/// Slope in `d_i` of an individual's payoff when others distance at `d_n`.
pub fn payoff_slope(d_n: f64, inp: &NashInputs<'_>) -> f64 {
    marginal_gain(d_n, inp) - marginal_cost(d_n, inp)
}

/// Individual payoff `GAIN(d_i, d_N) − COST(d_i, d_N)` relative to not
/// distancing.
pub fn individual_payoff(d_i: f64, d_n: f64, inp: &NashInputs<'_>) -> f64 {
    let p = inp.params;
    let epi = &inp.epi;
    let n = epi.not_yet_sick();
    let gain = p.alpha * d_i * p.beta * (1.0 - p.alpha * d_n) * epi.c * inp.harm * epi.s / n;
    let cost = p.a1 * p.alpha * d_i + p.a2 * p.alpha * d_i * ((1.0 - p.alpha * d_n) * n + epi.r_i);
    gain - cost
}

/// Unique symmetric Nash equilibrium distancing intensity.
///
/// Ties go to the corner: `MG(0) = MC(0)` gives `0`, `MG(1) = MC(1)` gives `1`.
pub fn equilibrium_distancing(inp: &NashInputs<'_>) -> NashOutcome {
    let n = inp.epi.not_yet_sick();
    if !(n >= DEGENERATE_N) {
        return NashOutcome { d: 0.0, regime: Regime::Degenerate };
    }
    if marginal_gain(0.0, inp) <= marginal_cost(0.0, inp) {
        return NashOutcome { d: 0.0, regime: Regime::NoDistancing };
    }
    if marginal_gain(1.0, inp) >= marginal_cost(1.0, inp) {
        return NashOutcome { d: 1.0, regime: Regime::FullDistancing };
    }
    NashOutcome { d: interior_root(inp), regime: Regime::Interior }
}

fn interior_root(inp: &NashInputs<'_>) -> f64 {
    let p = inp.params;
    let n = inp.epi.not_yet_sick();
    let x = inp.exposure_pressure();
    let slope_gap = x - p.a2 * n;
    if slope_gap > 1e-9 * libm::fmax(libm::fabs(x), p.a2 * n) {
        let d = (x - p.a1 - p.a2 * (n + inp.epi.r_i)) / (p.alpha * slope_gap);
        if d.is_finite() && d > -1e-9 && d < 1.0 + 1e-9 {
            return d.clamp(0.0, 1.0);
        }
    }
    bisect_root(inp)
}

/// Root of `MG − MC` on `[0, 1]`, given `MG(0) > MC(0)` and `MG(1) < MC(1)`.
fn bisect_root(inp: &NashInputs<'_>) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if payoff_slope(mid, inp) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::LcConvention;

    fn params() -> ModelParams {
        ModelParams {
            beta: 3.0,
            sigma: 0.2,
            gamma: 0.1,
            alpha: 0.5,
            delta_init: 0.01,
            vaccine_time: 100.0,
            a0: 1.0,
            a1: 1.0,
            a2: 1.0,
            lc_rate_convention: LcConvention::default(),
        }
    }

    // S = 0.5, C = 0.2, R_C = 0.1 (N = 0.8), I = 0.1, R_I = 0.1.
    fn state() -> EpidemicState {
        EpidemicState::new(0.5, 0.2, 0.1, 0.1, 0.1)
    }

    #[test]
    fn marginal_gain_examples() {
        let p = params();
        let inp = NashInputs::new(state(), 6.0, &p);
        assert!((marginal_gain(0.0, &inp) - 1.125).abs() < 1e-14);
        let zero = NashInputs::new(state(), 0.0, &p);
        assert_eq!(marginal_gain(0.3, &zero), 0.0);
        let p1 = ModelParams { alpha: 1.0, ..p };
        assert_eq!(marginal_gain(1.0, &NashInputs::new(state(), 6.0, &p1)), 0.0);

        // Finite difference of GAIN − COST in d_i recovers MG − MC.
        let h = 1e-6;
        let fd = (individual_payoff(0.4 + h, 0.3, &inp) - individual_payoff(0.4 - h, 0.3, &inp)) / (2.0 * h);
        assert!((fd - payoff_slope(0.3, &inp)).abs() < 1e-8);
    }

    #[test]
    fn marginal_cost_examples() {
        let p = params();
        let inp = NashInputs::new(state(), 6.0, &p);
        assert!((marginal_cost(0.0, &inp) - 0.95).abs() < 1e-15);
        let p0 = ModelParams { a2: 0.0, ..p };
        let inp0 = NashInputs::new(state(), 6.0, &p0);
        assert_eq!(marginal_cost(0.0, &inp0), 0.5);
        assert_eq!(marginal_cost(0.9, &inp0), 0.5);
        let empty = NashInputs::new(EpidemicState::new(0.0, 0.0, 1.0, 0.0, 0.0), 6.0, &p);
        assert_eq!(marginal_cost(0.4, &empty), 0.5);
    }

    #[test]
    fn harmless_exposure_means_no_distancing() {
        let p = params();
        for h in [0.0, -3.0] {
            let out = equilibrium_distancing(&NashInputs::new(state(), h, &p));
            assert_eq!(out, NashOutcome { d: 0.0, regime: Regime::NoDistancing });
        }
    }

    #[test]
    fn full_distancing_case() {
        let p = params();
        let inp = NashInputs::new(state(), 10.0, &p);
        assert!((marginal_gain(1.0, &inp) - 0.9375).abs() < 1e-14);
        assert!((marginal_cost(1.0, &inp) - 0.75).abs() < 1e-14);
        assert_eq!(equilibrium_distancing(&inp), NashOutcome { d: 1.0, regime: Regime::FullDistancing });
    }

    #[test]
    fn interior_case_matches_bisection() {
        let p = params();
        let inp = NashInputs::new(state(), 6.0, &p);
        let out = equilibrium_distancing(&inp);
        assert_eq!(out.regime, Regime::Interior);
        assert!((out.d - 0.35 / 0.725).abs() < 1e-14);
        assert!((out.d - 0.482759).abs() < 1e-6);
        assert!((bisect_root(&inp) - out.d).abs() < 1e-12);
        assert!(payoff_slope(out.d, &inp).abs() < 1e-12);
    }

    #[test]
    fn ties_resolve_to_corners() {
        let p = params();
        // MG(0) = MC(0) ⇔ α X = 0.95 ⇔ X = 1.9 ⇔ H = 1.9 · 0.8 / 0.3.
        let h = 1.9 * 0.8 / (3.0 * 0.5 * 0.2);
        let inp = NashInputs::new(state(), h, &p);
        let gap = marginal_gain(0.0, &inp) - marginal_cost(0.0, &inp);
        let out = equilibrium_distancing(&inp);
        if gap <= 0.0 {
            assert_eq!(out.regime, Regime::NoDistancing);
        } else {
            assert!(out.d < 1e-12);
        }
    }

    #[test]
    fn degenerate_game_without_players() {
        let p = params();
        let out = equilibrium_distancing(&NashInputs::new(EpidemicState::new(0.0, 0.0, 0.6, 0.0, 0.4), 5.0, &p));
        assert_eq!(out, NashOutcome { d: 0.0, regime: Regime::Degenerate });
    }

    #[test]
    fn near_parallel_margins_fall_back_to_bisection() {
        // Choose H so that β S C H / N = a₂ N + ε with the interior case active.
        let p = ModelParams { alpha: 0.9, a1: 0.01, a2: 1.0, ..params() };
        let e = EpidemicState::new(0.5, 0.2, 0.05, 0.1, 0.15);
        let n = e.not_yet_sick();
        let target = p.a2 * n * (1.0 + 1e-12);
        let h = target * n / (p.beta * e.s * e.c);
        let inp = NashInputs::new(e, h, &p);
        let out = equilibrium_distancing(&inp);
        assert!((0.0..=1.0).contains(&out.d));
        if out.regime == Regime::Interior {
            assert!(payoff_slope(out.d, &inp).abs() < 1e-9);
        }
    }
}
