//! Seeded synthetic regression with gross outliers, and the robustness
//! comparison against plain ridge.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::{Dataset, LossKind};
use super::fit::{spl_fit, w_step, TrainConfig};
use super::linalg::norm;
use super::schedule::Schedule;
use crate::error::TrainError;
use crate::regularizers::by_name;
use crate::scalar::{c, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutlierSpec {
    pub n: usize,
    pub d: usize,
    pub outlier_fraction: f64,
    /// Outlier shift in units of `noise`.
    pub outlier_scale: f64,
    pub noise: f64,
}

impl Default for OutlierSpec {
    fn default() -> Self {
        Self {
            n: 100,
            d: 5,
            outlier_fraction: 0.2,
            outlier_scale: 50.0,
            noise: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic<T> {
    pub data: Dataset<T>,
    pub w_star: Vec<T>,
    pub outliers: Vec<usize>,
}

/// `x ~ N(0, I)`, `w* ~ N(0, I)`, `y = x.w* + noise ε`; the first
/// `⌊fraction n⌋` samples of a random permutation get `±scale · noise` added.
pub fn outlier_regression<T: Scalar>(spec: &OutlierSpec, seed: u64) -> Result<Synthetic<T>, TrainError> {
    if spec.n == 0 || spec.d == 0 || !(0.0..=1.0).contains(&spec.outlier_fraction) || !(spec.noise >= 0.0) {
        return Err(TrainError::BadConfig(format!("bad synthetic spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let w_star: Vec<f64> = (0..spec.d).map(|_| normal()).collect();
    let mut features = Vec::with_capacity(spec.n * spec.d);
    let mut targets = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x: Vec<f64> = (0..spec.d).map(|_| normal()).collect();
        let y = x.iter().zip(&w_star).map(|(a, b)| a * b).sum::<f64>() + spec.noise * normal();
        features.extend(x);
        targets.push(y);
    }
    let count = (spec.outlier_fraction * spec.n as f64 + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..spec.n).collect();
    for i in (1..spec.n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut outliers: Vec<usize> = order[..count].to_vec();
    outliers.sort_unstable();
    for &i in &outliers {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        targets[i] += sign * spec.outlier_scale * spec.noise;
    }
    let cast = |v: Vec<f64>| v.into_iter().map(T::of).collect::<Vec<T>>();
    Ok(Synthetic {
        data: Dataset::new(cast(features), cast(targets), spec.d)?,
        w_star: cast(w_star),
        outliers,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSpec {
    pub data: OutlierSpec,
    pub seeds: Vec<u64>,
    pub regularizers: Vec<String>,
    pub alpha: f64,
    pub schedule: Schedule,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            data: OutlierSpec::default(),
            seeds: (0..10).collect(),
            regularizers: vec!["hard".into(), "exp".into()],
            alpha: 1e-3,
            schedule: Schedule::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub seed: u64,
    pub method: String,
    pub param_error: f64,
    pub final_lambda: f64,
    pub included: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareSummary {
    pub method: String,
    pub median_error: f64,
    /// Seeds where this method beats ridge.
    pub wins: usize,
    pub seeds: usize,
}

/// Parameter error `|ŵ - w*|` of ridge and of each SPL regularizer per seed.
pub fn compare_suite(spec: &CompareSpec) -> Result<(Vec<CompareRow>, Vec<CompareSummary>), TrainError> {
    let mut rows = Vec::new();
    for &seed in &spec.seeds {
        let syn = outlier_regression::<f64>(&spec.data, seed)?;
        let err = |w: &[f64]| norm(&w.iter().zip(&syn.w_star).map(|(a, b)| a - b).collect::<Vec<_>>());
        let ridge = w_step(
            &vec![1.0; syn.data.len()],
            &syn.data,
            LossKind::Squared,
            spec.alpha,
            None,
        )?;
        rows.push(CompareRow {
            seed,
            method: "ridge".into(),
            param_error: err(&ridge),
            final_lambda: f64::INFINITY,
            included: syn.data.len(),
        });
        for name in &spec.regularizers {
            let mut config = TrainConfig::new(by_name::<f64>(name)?);
            config.alpha = c(spec.alpha);
            config.schedule = spec.schedule.clone();
            let state = spl_fit(&syn.data, &config)?;
            rows.push(CompareRow {
                seed,
                method: name.clone(),
                param_error: err(&state.w),
                final_lambda: state.lambda,
                included: state.v.iter().filter(|&&v| v > 1e-6).count(),
            });
        }
    }
    let mut methods = vec!["ridge".to_string()];
    methods.extend(spec.regularizers.iter().cloned());
    let summary = methods
        .iter()
        .map(|m| {
            let mine: Vec<&CompareRow> = rows.iter().filter(|r| &r.method == m).collect();
            let mut errors: Vec<f64> = mine.iter().map(|r| r.param_error).collect();
            errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = if errors.is_empty() {
                f64::NAN
            } else if errors.len() % 2 == 1 {
                errors[errors.len() / 2]
            } else {
                0.5 * (errors[errors.len() / 2 - 1] + errors[errors.len() / 2])
            };
            let wins = mine
                .iter()
                .filter(|r| {
                    rows.iter()
                        .any(|q| q.seed == r.seed && q.method == "ridge" && r.param_error < q.param_error)
                })
                .count();
            CompareSummary {
                method: m.clone(),
                median_error: median,
                wins,
                seeds: mine.len(),
            }
        })
        .collect();
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_deterministic_and_marks_outliers() {
        let spec = OutlierSpec::default();
        let a = outlier_regression::<f64>(&spec, 7).unwrap();
        let b = outlier_regression::<f64>(&spec, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.outliers.len(), 20);
        let c = outlier_regression::<f64>(&spec, 8).unwrap();
        assert_ne!(a.w_star, c.w_star);
    }

    #[test]
    fn outliers_sit_far_from_the_model() {
        let spec = OutlierSpec::default();
        let syn = outlier_regression::<f64>(&spec, 3).unwrap();
        for i in 0..syn.data.len() {
            let fit: f64 = syn.data.row(i).iter().zip(&syn.w_star).map(|(a, b)| a * b).sum();
            let r = (syn.data.targets()[i] - fit).abs();
            if syn.outliers.contains(&i) {
                assert!(r > 20.0 * spec.noise);
            } else {
                assert!(r < 6.0 * spec.noise);
            }
        }
    }
}
