//! Model constants and their validation.

use thiserror::Error;

/// Which reading of the carriage-state Bellman equation to use.
///
/// `DynamicsConsistent` attaches the sickness rate σ to the `C → I` jump and
/// the clearance rate γ to the `C → R_C` jump, with every jump term written as
/// `rate · (L_own − L_next)` and the susceptible hazard taken per agent
/// (`β(1−αd)²C`). `AsPrinted` is the alternative literal reading:
/// γ on the `L_I` term, σ on the `L_RC` term, `rate · (L_next − L_own)` for
/// the C and S jumps, and the population flow `β(1−αd)²SC` as the
/// susceptible hazard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LcConvention {
    #[default]
    DynamicsConsistent,
    AsPrinted,
}

/// Epidemiological and economic constants.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ModelParams {
    /// Transmission rate.
    pub beta: f64,
    /// Carriage to sickness rate.
    pub sigma: f64,
    /// Clearance rate (from carriage and from sickness).
    pub gamma: f64,
    /// Maximal distancing effectiveness.
    pub alpha: f64,
    /// Initial carriage mass Δ.
    pub delta_init: f64,
    /// Vaccine arrival time.
    #[cfg_attr(feature = "serde", serde(rename = "T"))]
    pub vaccine_time: f64,
    /// Benefit of isolated activity.
    pub a0: f64,
    /// Benefit of public activity.
    pub a1: f64,
    /// Benefit of social activity.
    pub a2: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub lc_rate_convention: LcConvention,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("beta must be finite and >= 0")]
    Beta,
    #[error("sigma must be finite and > 0")]
    Sigma,
    #[error("gamma must be finite and > 0")]
    Gamma,
    #[error("alpha must be in (0,1]")]
    Alpha,
    #[error("delta_init must be in (0,1)")]
    DeltaInit,
    #[error("T must be finite and > 0")]
    VaccineTime,
    #[error("a0 must be finite and > 0")]
    A0,
    #[error("a1 must be finite and > 0")]
    A1,
    #[error("a2 must be finite and > 0")]
    A2,
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl ModelParams {
    /// Returns the parameters unchanged if every constraint holds, otherwise
    /// the first violated one (checked in declaration order).
    ///
    /// `beta = 0` is accepted: the no-transmission model is the closed-form
    /// reference case for the equilibrium search.
    pub fn validate(self) -> Result<Self, ParamError> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(ParamError::Beta);
        }
        if !positive(self.sigma) {
            return Err(ParamError::Sigma);
        }
        if !positive(self.gamma) {
            return Err(ParamError::Gamma);
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ParamError::Alpha);
        }
        if !(self.delta_init > 0.0 && self.delta_init < 1.0) {
            return Err(ParamError::DeltaInit);
        }
        if !positive(self.vaccine_time) {
            return Err(ParamError::VaccineTime);
        }
        if !positive(self.a0) {
            return Err(ParamError::A0);
        }
        if !positive(self.a1) {
            return Err(ParamError::A1);
        }
        if !positive(self.a2) {
            return Err(ParamError::A2);
        }
        Ok(self)
    }

    /// Benefit of a well, non-distancing agent when nobody is sick.
    pub fn full_benefit(&self) -> f64 {
        self.a0 + self.a1 + self.a2
    }

    /// Total exit rate from carriage.
    pub fn carriage_exit_rate(&self) -> f64 {
        self.sigma + self.gamma
    }
}

/// Validates `p`; free-function form of [`ModelParams::validate`].
pub fn validate_params(p: ModelParams) -> Result<ModelParams, ParamError> {
    p.validate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn base() -> ModelParams {
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

    #[test]
    fn accepts_reference_parameters() {
        assert_eq!(validate_params(base()), Ok(base()));
    }

    #[test]
    fn rejects_zero_alpha() {
        let err = validate_params(ModelParams { alpha: 0.0, ..base() }).unwrap_err();
        assert_eq!(err.to_string(), "alpha must be in (0,1]");
    }

    #[test]
    fn rejects_large_delta() {
        let err = validate_params(ModelParams { delta_init: 1.5, ..base() }).unwrap_err();
        assert_eq!(err.to_string(), "delta_init must be in (0,1)");
        assert_eq!(
            validate_params(ModelParams { delta_init: 0.0, ..base() }),
            Err(ParamError::DeltaInit)
        );
    }

    #[test]
    fn reports_first_violation() {
        let p = ModelParams { sigma: -1.0, a2: 0.0, ..base() };
        assert_eq!(p.validate(), Err(ParamError::Sigma));
        let p = ModelParams { vaccine_time: f64::INFINITY, ..base() };
        assert_eq!(p.validate(), Err(ParamError::VaccineTime));
        let p = ModelParams { beta: f64::NAN, ..base() };
        assert_eq!(p.validate(), Err(ParamError::Beta));
    }

    #[test]
    fn zero_beta_is_allowed() {
        assert!(ModelParams { beta: 0.0, ..base() }.validate().is_ok());
    }
}
