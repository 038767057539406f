//! Distancing schedules `t ↦ d_N(t)` used for fixed-behavior runs and for
//! replaying a traced equilibrium.

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("schedule is empty")]
    Empty,
    #[error("schedule times must be strictly increasing")]
    Unordered,
    #[error("schedule value {0} is outside [0,1]")]
    OutOfRange(f64),
    #[error("schedule must start at t = 0")]
    NotFromZero,
    #[error("schedule times and values differ in length")]
    Length,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// Value `values[k]` on `[starts[k], starts[k+1])`; the last segment runs
    /// to the end of the horizon.
    PiecewiseConstant { starts: Vec<f64>, values: Vec<f64> },
    /// Linear interpolation through `(times[k], values[k])`, held constant
    /// outside the sampled range.
    Linear { times: Vec<f64>, values: Vec<f64> },
    /// Cubic Hermite interpolation with centered-difference slopes
    /// (Catmull-Rom), clamped to `[0, 1]`. Used to replay recorded paths.
    Cubic { times: Vec<f64>, values: Vec<f64> },
}

fn check_values(values: &[f64]) -> Result<(), ScheduleError> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(ScheduleError::OutOfRange(*v)),
        None => Ok(()),
    }
}

fn check_times(times: &[f64], values: &[f64]) -> Result<(), ScheduleError> {
    if times.is_empty() {
        return Err(ScheduleError::Empty);
    }
    if times.len() != values.len() {
        return Err(ScheduleError::Length);
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ScheduleError::Unordered);
    }
    check_values(values)
}

impl Schedule {
    pub fn constant(d: f64) -> Result<Self, ScheduleError> {
        check_values(&[d])?;
        Ok(Self::Constant(d))
    }

    /// Segments `(t_start, d)`; they must start at 0 and be strictly ordered,
    /// which makes them cover `[0, T]` without overlap.
    pub fn piecewise_constant(segments: &[(f64, f64)]) -> Result<Self, ScheduleError> {
        let (starts, values): (Vec<f64>, Vec<f64>) = segments.iter().copied().unzip();
        check_times(&starts, &values)?;
        if starts[0] != 0.0 {
            return Err(ScheduleError::NotFromZero);
        }
        Ok(Self::PiecewiseConstant { starts, values })
    }

    pub fn linear(times: Vec<f64>, values: Vec<f64>) -> Result<Self, ScheduleError> {
        check_times(&times, &values)?;
        Ok(Self::Linear { times, values })
    }

    pub fn cubic(times: Vec<f64>, values: Vec<f64>) -> Result<Self, ScheduleError> {
        check_times(&times, &values)?;
        Ok(Self::Cubic { times, values })
    }

    /// Maximal intervals of `[t0, t1]` on which the schedule is continuous,
    /// each with the constant value it takes there when piecewise constant.
    pub fn pieces(&self, t0: f64, t1: f64) -> Vec<(f64, f64, Option<f64>)> {
        match self {
            Self::PiecewiseConstant { starts, values } => {
                let mut out = Vec::new();
                let mut a = t0;
                for (k, v) in values.iter().enumerate() {
                    let end = starts.get(k + 1).copied().unwrap_or(f64::INFINITY).min(t1);
                    if end > a {
                        out.push((a, end, Some(*v)));
                        a = end;
                    }
                }
                out
            }
            Self::Constant(d) => alloc::vec![(t0, t1, Some(*d))],
            _ => alloc::vec![(t0, t1, None)],
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Self::Constant(d) => *d,
            Self::PiecewiseConstant { starts, values } => {
                let k = starts.partition_point(|s| *s <= t);
                values[k.saturating_sub(1)]
            }
            Self::Linear { times, values } => {
                let k = times.partition_point(|s| *s <= t);
                if k == 0 {
                    return values[0];
                }
                if k == times.len() {
                    return values[k - 1];
                }
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (t - t0) / (t1 - t0);
                values[k - 1] + w * (values[k] - values[k - 1])
            }
            Self::Cubic { times, values } => {
                let n = times.len();
                let k = times.partition_point(|s| *s <= t);
                if k == 0 {
                    return values[0];
                }
                if k == n {
                    return values[n - 1];
                }
                let (i0, i1) = (k - 1, k);
                let slope = |i: usize| {
                    let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                    (values[b] - values[a]) / (times[b] - times[a])
                };
                let h = times[i1] - times[i0];
                let th = (t - times[i0]) / h;
                let t2 = th * th;
                let t3 = t2 * th;
                let v = (2.0 * t3 - 3.0 * t2 + 1.0) * values[i0]
                    + (t3 - 2.0 * t2 + th) * h * slope(i0)
                    + (-2.0 * t3 + 3.0 * t2) * values[i1]
                    + (t3 - t2) * h * slope(i1);
                v.clamp(0.0, 1.0)
            }
        }
    }
}
