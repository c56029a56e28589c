use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use super::expr::ColorExpr;

/// Firing delay of a timed transition, in seconds.
///
/// Parameters are expressions; source transitions have no bindings, so their
/// parameters must be constants. Other transitions may read bound token fields
/// (e.g. a processing time proportional to `in.size_bytes`).
#[derive(Debug, Clone, PartialEq)]
pub enum DelaySpec {
    Deterministic {
        value: ColorExpr,
    },
    Uniform {
        low: ColorExpr,
        high: ColorExpr,
    },
    Exponential {
        mean: ColorExpr,
    },
    Normal {
        mean: ColorExpr,
        sd: ColorExpr,
        truncate_at_zero: bool,
    },
}

/// A delay distribution with its parameters evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedDelay {
    Deterministic(f64),
    Uniform(f64, f64),
    Exponential(f64),
    Normal { mean: f64, sd: f64, truncate_at_zero: bool },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DelayError {
    #[error("deterministic delay must be >= 0, got {0}")]
    NegativeValue(f64),
    #[error("uniform bounds must satisfy 0 <= low <= high, got ({0}, {1})")]
    BadUniform(f64, f64),
    #[error("exponential mean must be > 0, got {0}")]
    BadMean(f64),
    #[error("normal standard deviation must be > 0, got {0}")]
    BadSd(f64),
    #[error("parameter is not finite")]
    NotFinite,
    #[error("truncated normal produced no non-negative sample in {0} attempts")]
    TruncationExhausted(u32),
    #[error("normal delay without truncation sampled a negative value {0}")]
    NegativeSample(f64),
}

/// Resampling budget for the zero-truncated normal.
pub const NORMAL_RESAMPLE_LIMIT: u32 = 100;

impl DelaySpec {
    pub fn deterministic(value: f64) -> Self {
        DelaySpec::Deterministic { value: ColorExpr::Number(value) }
    }

    pub fn uniform(low: f64, high: f64) -> Self {
        DelaySpec::Uniform {
            low: ColorExpr::Number(low),
            high: ColorExpr::Number(high),
        }
    }

    pub fn exponential(mean: f64) -> Self {
        DelaySpec::Exponential { mean: ColorExpr::Number(mean) }
    }

    pub fn normal(mean: f64, sd: f64) -> Self {
        DelaySpec::Normal {
            mean: ColorExpr::Number(mean),
            sd: ColorExpr::Number(sd),
            truncate_at_zero: true,
        }
    }

    pub fn params(&self) -> Vec<&ColorExpr> {
        match self {
            DelaySpec::Deterministic { value } => vec![value],
            DelaySpec::Uniform { low, high } => vec![low, high],
            DelaySpec::Exponential { mean } => vec![mean],
            DelaySpec::Normal { mean, sd, .. } => vec![mean, sd],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut ColorExpr> {
        match self {
            DelaySpec::Deterministic { value } => vec![value],
            DelaySpec::Uniform { low, high } => vec![low, high],
            DelaySpec::Exponential { mean } => vec![mean],
            DelaySpec::Normal { mean, sd, .. } => vec![mean, sd],
        }
    }

    /// Mean of the distribution when all parameters are constants.
    pub fn constant_mean(&self) -> Option<f64> {
        Some(match self.resolve_with(|e| e.constant_number())? {
            ResolvedDelay::Deterministic(v) => v,
            ResolvedDelay::Uniform(a, b) => (a + b) / 2.0,
            ResolvedDelay::Exponential(m) => m,
            ResolvedDelay::Normal { mean, .. } => mean,
        })
    }

    /// Evaluates every parameter with `eval`; `None` if any is unavailable.
    pub fn resolve_with<F>(&self, mut eval: F) -> Option<ResolvedDelay>
    where
        F: FnMut(&ColorExpr) -> Option<f64>,
    {
        Some(match self {
            DelaySpec::Deterministic { value } => ResolvedDelay::Deterministic(eval(value)?),
            DelaySpec::Uniform { low, high } => ResolvedDelay::Uniform(eval(low)?, eval(high)?),
            DelaySpec::Exponential { mean } => ResolvedDelay::Exponential(eval(mean)?),
            DelaySpec::Normal { mean, sd, truncate_at_zero } => ResolvedDelay::Normal {
                mean: eval(mean)?,
                sd: eval(sd)?,
                truncate_at_zero: *truncate_at_zero,
            },
        })
    }
}

impl fmt::Display for DelaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelaySpec::Deterministic { value } => write!(f, "Det({value})"),
            DelaySpec::Uniform { low, high } => write!(f, "Uni({low}, {high})"),
            DelaySpec::Exponential { mean } => write!(f, "Exp({mean})"),
            DelaySpec::Normal { mean, sd, .. } => write!(f, "N({mean}, {sd})"),
        }
    }
}

impl ResolvedDelay {
    pub fn check(&self) -> Result<(), DelayError> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match *self {
            ResolvedDelay::Deterministic(v) => {
                if !finite(&[v]) {
                    Err(DelayError::NotFinite)
                } else if v < 0.0 {
                    Err(DelayError::NegativeValue(v))
                } else {
                    Ok(())
                }
            }
            ResolvedDelay::Uniform(a, b) => {
                if !finite(&[a, b]) {
                    Err(DelayError::NotFinite)
                } else if a < 0.0 || a > b {
                    Err(DelayError::BadUniform(a, b))
                } else {
                    Ok(())
                }
            }
            ResolvedDelay::Exponential(m) => {
                if !finite(&[m]) {
                    Err(DelayError::NotFinite)
                } else if m <= 0.0 {
                    Err(DelayError::BadMean(m))
                } else {
                    Ok(())
                }
            }
            ResolvedDelay::Normal { mean, sd, .. } => {
                if !finite(&[mean, sd]) {
                    Err(DelayError::NotFinite)
                } else if sd <= 0.0 {
                    Err(DelayError::BadSd(sd))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, DelayError> {
        self.check()?;
        match *self {
            ResolvedDelay::Deterministic(v) => Ok(v),
            ResolvedDelay::Uniform(a, b) => Ok(a + (b - a) * rng.random::<f64>()),
            // inverse CDF; 1 - u lies in (0, 1] so the log is finite
            ResolvedDelay::Exponential(m) => Ok(-m * (1.0 - rng.random::<f64>()).ln()),
            ResolvedDelay::Normal { mean, sd, truncate_at_zero } => {
                let normal = Normal::new(mean, sd).map_err(|_| DelayError::BadSd(sd))?;
                if !truncate_at_zero {
                    let x = normal.sample(rng);
                    return if x < 0.0 { Err(DelayError::NegativeSample(x)) } else { Ok(x) };
                }
                for _ in 0..NORMAL_RESAMPLE_LIMIT {
                    let x = normal.sample(rng);
                    if x >= 0.0 {
                        return Ok(x);
                    }
                }
                Err(DelayError::TruncationExhausted(NORMAL_RESAMPLE_LIMIT))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parameter_checks() {
        assert!(ResolvedDelay::Deterministic(0.0).check().is_ok());
        assert!(ResolvedDelay::Deterministic(-0.1).check().is_err());
        assert!(ResolvedDelay::Uniform(1.0, 2.0).check().is_ok());
        assert!(ResolvedDelay::Uniform(2.0, 2.0).check().is_ok());
        assert!(ResolvedDelay::Uniform(2.0, 1.0).check().is_err());
        assert!(ResolvedDelay::Uniform(-1.0, 1.0).check().is_err());
        assert!(ResolvedDelay::Exponential(0.0).check().is_err());
        assert!(ResolvedDelay::Normal { mean: 1.0, sd: 0.0, truncate_at_zero: true }.check().is_err());
        assert!(ResolvedDelay::Exponential(f64::NAN).check().is_err());
    }

    #[test]
    fn sample_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mean = |d: ResolvedDelay, rng: &mut ChaCha8Rng| {
            (0..n).map(|_| d.sample(rng).unwrap()).sum::<f64>() / n as f64
        };
        assert!((mean(ResolvedDelay::Uniform(1.0, 2.0), &mut rng) - 1.5).abs() < 0.01);
        assert!((mean(ResolvedDelay::Exponential(0.5), &mut rng) - 0.5).abs() < 0.01);
        let d = ResolvedDelay::Normal { mean: 2.0, sd: 0.1, truncate_at_zero: true };
        assert!((mean(d, &mut rng) - 2.0).abs() < 0.01);
    }

    #[test]
    fn truncated_normal_never_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = ResolvedDelay::Normal { mean: 0.0, sd: 1.0, truncate_at_zero: true };
        for _ in 0..10_000 {
            assert!(d.sample(&mut rng).unwrap() >= 0.0);
        }
        let hopeless = ResolvedDelay::Normal { mean: -100.0, sd: 1.0, truncate_at_zero: true };
        assert_eq!(hopeless.sample(&mut rng), Err(DelayError::TruncationExhausted(100)));
    }

    #[test]
    fn uniform_display() {
        assert_eq!(DelaySpec::uniform(1.0, 2.0).to_string(), "Uni(1, 2)");
        assert_eq!(DelaySpec::uniform(1.0, 2.0).constant_mean(), Some(1.5));
    }
}
