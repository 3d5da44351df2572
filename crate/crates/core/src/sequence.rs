//! Scalar sequences indexed by `n >= 0`: multipliers, standard deviations,
//! rank-one vectors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::philox;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceSpec {
    Constant(f64),
    /// `scale * (n + offset)^exponent`. When `n + offset == 0` the value is
    /// `scale`, so `offset = 0` with a negative exponent stays finite at `n = 0`.
    Power {
        scale: f64,
        offset: f64,
        exponent: f64,
    },
    /// `scale * ratio^n`.
    Geometric { scale: f64, ratio: f64 },
    /// Repeats the stored values with period `len`.
    Cycle(Vec<f64>),
    /// Stored values; undefined past the end.
    Prefix(Vec<f64>),
    /// `(-1)^n` times the inner sequence.
    Alternating(Box<SequenceSpec>),
    /// Inner sequence times a pseudo-random sign drawn from the Philox stream.
    RandomSigns { seed: u64, inner: Box<SequenceSpec> },
}

impl SequenceSpec {
    pub fn ones() -> Self {
        SequenceSpec::Constant(1.0)
    }

    /// `1/sqrt(n+1)`.
    pub fn inv_sqrt() -> Self {
        SequenceSpec::Power {
            scale: 1.0,
            offset: 1.0,
            exponent: -0.5,
        }
    }

    pub fn power(scale: f64, offset: f64, exponent: f64) -> Self {
        SequenceSpec::Power {
            scale,
            offset,
            exponent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("sequence {what} must be finite")))
            }
        };
        match self {
            SequenceSpec::Constant(v) => finite(*v, "value"),
            SequenceSpec::Power {
                scale,
                offset,
                exponent,
            } => {
                finite(*scale, "scale")?;
                finite(*offset, "offset")?;
                finite(*exponent, "exponent")?;
                if *offset < 0.0 {
                    return Err(Error::invalid("power sequence offset must be >= 0"));
                }
                Ok(())
            }
            SequenceSpec::Geometric { scale, ratio } => {
                finite(*scale, "scale")?;
                finite(*ratio, "ratio")
            }
            SequenceSpec::Cycle(v) | SequenceSpec::Prefix(v) => {
                if matches!(self, SequenceSpec::Cycle(_)) && v.is_empty() {
                    return Err(Error::invalid("cycle sequence needs at least one value"));
                }
                v.iter().try_for_each(|x| finite(*x, "entry"))
            }
            SequenceSpec::Alternating(inner) | SequenceSpec::RandomSigns { inner, .. } => {
                inner.validate()
            }
        }
    }

    /// Number of defined entries, `None` when unbounded.
    pub fn available(&self) -> Option<usize> {
        match self {
            SequenceSpec::Prefix(v) => Some(v.len()),
            SequenceSpec::Alternating(inner) | SequenceSpec::RandomSigns { inner, .. } => {
                inner.available()
            }
            _ => None,
        }
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        match self {
            SequenceSpec::Constant(v) => Some(*v),
            SequenceSpec::Power {
                scale,
                offset,
                exponent,
            } => {
                let base = n as f64 + offset;
                if base == 0.0 {
                    Some(*scale)
                } else {
                    Some(scale * base.powf(*exponent))
                }
            }
            SequenceSpec::Geometric { scale, ratio } => {
                Some(scale * ratio.powi(i32::try_from(n).unwrap_or(i32::MAX)))
            }
            SequenceSpec::Cycle(v) => Some(v[n % v.len()]),
            SequenceSpec::Prefix(v) => v.get(n).copied(),
            SequenceSpec::Alternating(inner) => {
                let x = inner.get(n)?;
                Some(if n.is_multiple_of(2) { x } else { -x })
            }
            SequenceSpec::RandomSigns { seed, inner } => {
                let x = inner.get(n)?;
                let [word, _] = philox::block(*seed, u64::MAX, n as u64);
                Some(if word & 1 == 0 { x } else { -x })
            }
        }
    }

    /// Entries `0..len`.
    pub fn prefix(&self, len: usize) -> Result<Vec<f64>> {
        if let Some(avail) = self.available() {
            if avail < len {
                return Err(Error::invalid(format!(
                    "sequence defines {avail} entries, {len} requested"
                )));
            }
        }
        Ok((0..len).map(|n| self.get(n).unwrap_or(0.0)).collect())
    }
}

impl fmt::Display for SequenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceSpec::Constant(v) => write!(f, "const({v})"),
            SequenceSpec::Power {
                scale,
                offset,
                exponent,
            } => write!(f, "power({scale}*(n+{offset})^{exponent})"),
            SequenceSpec::Geometric { scale, ratio } => write!(f, "geometric({scale}*{ratio}^n)"),
            SequenceSpec::Cycle(v) => write!(f, "cycle{v:?}"),
            SequenceSpec::Prefix(v) => write!(f, "prefix[len={}]", v.len()),
            SequenceSpec::Alternating(inner) => write!(f, "alternating({inner})"),
            SequenceSpec::RandomSigns { seed, inner } => write!(f, "signs[{seed}]({inner})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_at_zero_base_is_scale() {
        let s = SequenceSpec::power(2.0, 0.0, -1.0 / 3.0);
        assert_eq!(s.get(0), Some(2.0));
        assert!((s.get(8).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inv_sqrt_values() {
        let s = SequenceSpec::inv_sqrt();
        assert_eq!(s.get(0), Some(1.0));
        assert!((s.get(3).unwrap() - 0.5).abs() < 1e-16);
    }

    #[test]
    fn prefix_is_bounded() {
        let s = SequenceSpec::Prefix(vec![1.0, 2.0]);
        assert_eq!(s.get(2), None);
        assert!(s.prefix(3).is_err());
        assert_eq!(s.prefix(2).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn random_signs_keep_magnitude() {
        let s = SequenceSpec::RandomSigns {
            seed: 9,
            inner: Box::new(SequenceSpec::inv_sqrt()),
        };
        let signs: Vec<f64> = (0..64).map(|n| s.get(n).unwrap()).collect();
        for (n, v) in signs.iter().enumerate() {
            assert!((v.abs() - 1.0 / ((n + 1) as f64).sqrt()).abs() < 1e-15);
        }
        assert!(signs.iter().any(|v| *v < 0.0) && signs.iter().any(|v| *v > 0.0));
    }

    #[test]
    fn validation_rejects_nonfinite() {
        assert!(SequenceSpec::Constant(f64::NAN).validate().is_err());
        assert!(SequenceSpec::Cycle(vec![]).validate().is_err());
        assert!(SequenceSpec::power(1.0, -1.0, 1.0).validate().is_err());
    }
}
