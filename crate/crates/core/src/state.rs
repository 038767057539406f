//! Compartment masses and continuation losses at one instant.

use thiserror::Error;

/// Absolute tolerance on `S + C + I + R_C + R_I = 1`.
pub const MASS_TOL: f64 = 1e-9;

/// Integration roundoff may push a compartment slightly below zero; anything
/// under `-NEG_SLACK` is treated as a genuine boundary crossing.
pub const NEG_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StateError {
    #[error("compartment masses sum to {total}, not 1")]
    Mass { total: f64 },
    #[error("compartment {name} is negative ({value})")]
    Negative { name: &'static str, value: f64 },
    #[error("compartment {name} is not finite")]
    NonFinite { name: &'static str },
}

/// The epidemic state `(S, C, I, R_C, R_I)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpidemicState {
    pub s: f64,
    pub c: f64,
    pub i: f64,
    pub r_c: f64,
    pub r_i: f64,
}

pub(crate) const EPI_NAMES: [&str; 5] = ["S", "C", "I", "R_C", "R_I"];

impl EpidemicState {
    pub const fn new(s: f64, c: f64, i: f64, r_c: f64, r_i: f64) -> Self {
        Self { s, c, i, r_c, r_i }
    }

    /// Mass of agents who have never been sick, `N = S + C + R_C`.
    pub fn not_yet_sick(&self) -> f64 {
        self.s + self.c + self.r_c
    }

    pub fn total(&self) -> f64 {
        self.s + self.c + self.i + self.r_c + self.r_i
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.s, self.c, self.i, self.r_c, self.r_i]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    /// Smallest compartment together with its name.
    pub fn min_compartment(&self) -> (&'static str, f64) {
        let a = self.to_array();
        let mut k = 0;
        for j in 1..5 {
            if a[j] < a[k] {
                k = j;
            }
        }
        (EPI_NAMES[k], a[k])
    }

    /// Checks each compartment against the negativity slack, then total mass.
    pub fn check(&self) -> Result<(), StateError> {
        for (name, v) in EPI_NAMES.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(StateError::NonFinite { name });
            }
            if v < -NEG_SLACK {
                return Err(StateError::Negative { name, value: v });
            }
        }
        let total = self.total();
        if libm::fabs(total - 1.0) > MASS_TOL {
            return Err(StateError::Mass { total });
        }
        Ok(())
    }
}

/// Continuation losses `(L_S, L_C, L_I, L_RC, L_RI)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WelfareState {
    pub l_s: f64,
    pub l_c: f64,
    pub l_i: f64,
    pub l_rc: f64,
    pub l_ri: f64,
}

impl WelfareState {
    pub const fn new(l_s: f64, l_c: f64, l_i: f64, l_rc: f64, l_ri: f64) -> Self {
        Self { l_s, l_c, l_i, l_rc, l_ri }
    }

    /// Harm of susceptible exposure, `H = L_C − L_S`.
    pub fn harm(&self) -> f64 {
        self.l_c - self.l_s
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.l_s, self.l_c, self.l_i, self.l_rc, self.l_ri]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_accepts_roundoff() {
        let e = EpidemicState::new(0.5, 0.2, 0.1, 0.2 + 5e-11, -5e-11);
        assert!(e.check().is_ok());
    }

    #[test]
    fn check_flags_negative_and_mass() {
        let e = EpidemicState::new(0.5, 0.2, 0.1, 0.2 + 1e-9, -1e-9);
        assert!(matches!(e.check(), Err(StateError::Negative { name: "R_I", .. })));
        let e = EpidemicState::new(0.5, 0.2, 0.1, 0.2, 0.1);
        assert!(matches!(e.check(), Err(StateError::Mass { .. })));
        let e = EpidemicState::new(f64::NAN, 0.2, 0.1, 0.2, 0.1);
        assert!(matches!(e.check(), Err(StateError::NonFinite { name: "S" })));
    }

    #[test]
    fn harm_is_carriage_minus_susceptible() {
        let w = WelfareState::new(2.0, 5.5, 9.0, 1.0, 1.0);
        assert_eq!(w.harm(), 3.5);
    }

    #[test]
    fn min_compartment_names() {
        let e = EpidemicState::new(0.5, 0.2, 0.1, 0.0, 0.2);
        assert_eq!(e.min_compartment(), ("R_C", 0.0));
    }
}
