//! Age-parameter schedules.

use serde::{Deserialize, Serialize};

use crate::error::TrainError;
use crate::regularizers::SPRegularizer;
use crate::scalar::{c, Scalar};

/// A weight counts as positive above this.
pub const POSITIVE_WEIGHT: f64 = 1e-6;
/// Kumar growth stops once every weight reaches this.
pub const FULL_WEIGHT: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Schedule {
    /// Explicit non-decreasing ages.
    Fixed { lambdas: Vec<f64> },
    /// Start where half the samples have positive weight, then multiply by
    /// `growth` until every weight reaches 0.99 or `max_stages` is hit.
    Kumar {
        #[serde(default = "default_growth")]
        growth: f64,
        #[serde(default = "default_stages")]
        max_stages: usize,
    },
    /// At stage `t` the age admits the `fractions[t]` easiest samples.
    Portion { fractions: Vec<f64> },
}

fn default_growth() -> f64 {
    1.3
}

fn default_stages() -> usize {
    16
}

impl Default for Schedule {
    fn default() -> Self {
        Self::Kumar {
            growth: default_growth(),
            max_stages: default_stages(),
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<(), TrainError> {
        match self {
            Self::Fixed { lambdas } => {
                if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                    return Err(TrainError::BadConfig("fixed ages must be positive and finite".into()));
                }
                if lambdas.windows(2).any(|p| p[1] < p[0]) {
                    return Err(TrainError::BadConfig("fixed ages must be non-decreasing".into()));
                }
            }
            Self::Kumar { growth, max_stages } => {
                if !(*growth > 1.0) || !growth.is_finite() || *max_stages == 0 {
                    return Err(TrainError::BadConfig(
                        "Kumar growth must exceed 1 with at least one stage".into(),
                    ));
                }
            }
            Self::Portion { fractions } => {
                if fractions.is_empty()
                    || fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0))
                    || fractions.windows(2).any(|p| p[1] <= p[0])
                {
                    return Err(TrainError::BadFractions(format!(
                        "fractions must be strictly increasing in (0, 1], got {fractions:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn max_stages(&self) -> usize {
        match self {
            Self::Fixed { lambdas } => lambdas.len(),
            Self::Kumar { max_stages, .. } => *max_stages,
            Self::Portion { fractions } => fractions.len(),
        }
    }
}

/// `sup { u : weight_base(u) > 1e-6 }`: a sample with loss `l` has positive
/// weight iff `l < τ λ`.
pub fn positive_weight_reach<T: Scalar>(reg: &SPRegularizer<T>) -> Result<T, TrainError> {
    let positive = |u: T| reg.weight_base(u) > c(POSITIVE_WEIGHT);
    if !positive(T::zero()) {
        return Err(TrainError::BadConfig(format!(
            "regularizer `{}` gives zero-loss samples no weight",
            reg.name()
        )));
    }
    let mut hi = T::one();
    while positive(hi) {
        hi *= c(2.0);
        if hi > c(1e15) {
            return Err(TrainError::BadConfig(format!(
                "weights of `{}` never fall below {POSITIVE_WEIGHT}",
                reg.name()
            )));
        }
    }
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * c(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if positive(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// A loss threshold with exactly `k` sorted losses strictly below it when the
/// boundary is not tied: midpoint between `sorted[k-1]` and the next
/// distinct value, or just above the top when there is none.
pub(crate) fn threshold_after<T: Scalar>(sorted: &[T], k: usize) -> T {
    let n = sorted.len();
    if k == 0 {
        return (sorted[0] * c(0.5)).max(c(1e-12));
    }
    let at = sorted[k - 1];
    match sorted[k..].iter().find(|&&x| x > at) {
        Some(&next) => (at + next) * c(0.5),
        None => {
            let top = sorted[n - 1];
            top + (top.abs() * c(1e-6)).max(c(1e-12))
        }
    }
}

fn sorted<T: Scalar>(losses: &[T]) -> Vec<T> {
    let mut s = losses.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s
}

/// Initial Kumar age: `⌈n/2⌉` samples get positive weight (more on ties).
pub fn kumar_initial<T: Scalar>(reg: &SPRegularizer<T>, losses: &[T]) -> Result<T, TrainError> {
    if losses.is_empty() {
        return Err(TrainError::BadDataset("no losses".into()));
    }
    let tau = positive_weight_reach(reg)?;
    let s = sorted(losses);
    Ok(threshold_after(&s, s.len().div_ceil(2)) / tau)
}

/// Age admitting the `fraction` easiest samples: `⌊fraction n⌋` losses fall
/// strictly below `τ λ`.
pub fn portion_lambda<T: Scalar>(reg: &SPRegularizer<T>, losses: &[T], fraction: f64) -> Result<T, TrainError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(TrainError::BadFractions(format!("fraction {fraction} outside (0, 1]")));
    }
    if losses.is_empty() {
        return Err(TrainError::BadDataset("no losses".into()));
    }
    let tau = positive_weight_reach(reg)?;
    let s = sorted(losses);
    let k = (fraction * s.len() as f64 + 1e-9).floor() as usize;
    Ok(threshold_after(&s, k.min(s.len())) / tau)
}

/// Geometric ages `λ0, λ0 μ, λ0 μ², ...`.
pub fn kumar_sequence<T: Scalar>(lambda0: T, growth: T, stages: usize) -> Vec<T> {
    std::iter::successors(Some(lambda0), |&l| Some(l * growth))
        .take(stages)
        .collect()
}
