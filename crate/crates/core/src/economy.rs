//! Static economic formulas for availability and for flow benefits and losses.
//!
//! All formulas are affine in an agent's own distancing intensity, so a
//! common intensity `d_N` and "fraction `d_N` of N-agents distance fully"
//! produce identical aggregates.

use crate::params::ModelParams;
use crate::state::EpidemicState;

/// Population-average availability for social interaction,
/// `A = (1 − α d_N) N + R_I = 1 − I − α d_N N`.
pub fn availability(epi: &EpidemicState, d_n: f64, alpha: f64) -> f64 {
    (1.0 - alpha * d_n) * epi.not_yet_sick() + epi.r_i
}

/// Flow benefit of a well agent distancing at `d_i` when availability is `a`.
pub fn flow_benefit(d_i: f64, a: f64, p: &ModelParams) -> f64 {
    let open = 1.0 - p.alpha * d_i;
    p.a0 + p.a1 * open + p.a2 * open * a
}

/// Flow loss, relative to the no-virus benefit, of an agent who has never been
/// sick and distances at `d_n` when availability is `a`.
pub fn not_yet_sick_flow_loss(d_n: f64, a: f64, p: &ModelParams) -> f64 {
    p.a1 * p.alpha * d_n + p.a2 * (1.0 - (1.0 - p.alpha * d_n) * a)
}

/// Flow loss of a recovered-from-sickness agent, who never distances.
pub fn recovered_sick_flow_loss(a: f64, p: &ModelParams) -> f64 {
    p.a2 * (1.0 - a)
}

/// Aggregate flow of lost economic activity,
/// `Γ_E = a₀ I + a₁ (1 − A) + a₂ (1 − A²)`.
pub fn aggregate_flow_loss(epi: &EpidemicState, d_n: f64, p: &ModelParams) -> f64 {
    let a = availability(epi, d_n, p.alpha);
    p.a0 * epi.i + p.a1 * (1.0 - a) + p.a2 * (1.0 - a * a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::LcConvention;

    fn params(a0: f64, a1: f64, a2: f64, alpha: f64) -> ModelParams {
        ModelParams {
            beta: 1.0,
            sigma: 0.2,
            gamma: 0.1,
            alpha,
            delta_init: 0.01,
            vaccine_time: 10.0,
            a0,
            a1,
            a2,
            lc_rate_convention: LcConvention::default(),
        }
    }

    #[test]
    fn availability_examples() {
        let healthy = EpidemicState::new(0.9, 0.1, 0.0, 0.0, 0.0);
        assert_eq!(availability(&healthy, 0.0, 0.5), 1.0);

        // N = 0.7, R_I = 0.1, I = 0.2
        let e = EpidemicState::new(0.5, 0.1, 0.2, 0.1, 0.1);
        assert!((availability(&e, 0.5, 1.0) - 0.45).abs() < 1e-15);
        assert!((availability(&e, 0.5, 1.0) - (1.0 - e.i - 0.5 * e.not_yet_sick())).abs() < 1e-15);

        let isolated = EpidemicState::new(0.6, 0.1, 0.2, 0.1, 0.0);
        assert_eq!(availability(&isolated, 1.0, 1.0), 0.0);
    }

    #[test]
    fn flow_benefit_examples() {
        let p = params(1.0, 2.0, 3.0, 0.5);
        assert_eq!(flow_benefit(0.0, 1.0, &p), 6.0);
        assert!((flow_benefit(0.5, 0.8, &p) - 4.3).abs() < 1e-14);
        let p = params(1.0, 2.0, 3.0, 1.0);
        assert_eq!(flow_benefit(1.0, 0.37, &p), 1.0);
    }

    #[test]
    fn aggregate_flow_loss_examples() {
        let p = params(1.0, 2.0, 3.0, 0.5);
        let healthy = EpidemicState::new(0.95, 0.05, 0.0, 0.0, 0.0);
        assert_eq!(aggregate_flow_loss(&healthy, 0.0, &p), 0.0);

        // I = 0.1, d = 0 → A = 0.9; pick R_I and d so that A = 0.8 instead:
        // N = 0.8, R_I = 0.1, α d N = 0.1 → d = 0.25 at α = 0.5.
        let e = EpidemicState::new(0.6, 0.1, 0.1, 0.1, 0.1);
        let a = availability(&e, 0.25, p.alpha);
        assert!((a - 0.8).abs() < 1e-15);
        assert!((aggregate_flow_loss(&e, 0.25, &p) - 1.58).abs() < 1e-14);

        let all_sick = EpidemicState::new(0.0, 0.0, 1.0, 0.0, 0.0);
        assert_eq!(aggregate_flow_loss(&all_sick, 0.3, &p), p.full_benefit());
    }

    #[test]
    fn affine_monotonicity() {
        let p = params(1.0, 2.0, 3.0, 0.7);
        let e = EpidemicState::new(0.5, 0.1, 0.2, 0.1, 0.1);
        let a0 = availability(&e, 0.0, p.alpha);
        assert!((a0 - (1.0 - e.i)).abs() < 1e-15);
        let mut prev = a0;
        for k in 1..=10 {
            let a = availability(&e, k as f64 / 10.0, p.alpha);
            assert!(a < prev);
            prev = a;
            let b_lo = flow_benefit(k as f64 / 10.0, 0.5, &p);
            let b_prev = flow_benefit((k - 1) as f64 / 10.0, 0.5, &p);
            assert!(b_lo < b_prev);
            assert!(flow_benefit(0.3, a + 0.1, &p) > flow_benefit(0.3, a, &p));
        }
    }
}
