//! Brute-force reference computations.
//!
//! Everything here is deliberately naive: exhaustive grid scans, plain
//! central differences and a random concave generator. Tests check the
//! main implementations against these, so nothing here may call into the
//! conjugacy, regularizer or curriculum code paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::OracleError;
use crate::sampled::SampledFunction;
use crate::scalar::{c, Scalar};

/// Axis-aligned tensor grid: per axis `(lo, hi, count)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec<T> {
    pub axes: Vec<(T, T, usize)>,
    /// Tolerance budget callers attach to results computed on this grid.
    pub tolerance: T,
}

impl<T: Scalar> GridSpec<T> {
    /// `[0, 1]^n` with `count` points per axis.
    pub fn unit_cube(n: usize, count: usize) -> Self {
        Self {
            axes: vec![(T::zero(), T::one(), count); n],
            tolerance: T::one() / T::from_usize(count.max(2) - 1).unwrap(),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    fn validate(&self) -> Result<(), OracleError> {
        if self.axes.is_empty() || self.axes.len() > 3 {
            return Err(OracleError::BadGrid(format!(
                "dimension must be 1..=3, got {}",
                self.axes.len()
            )));
        }
        for &(lo, hi, count) in &self.axes {
            if !(lo < hi) || count < 3 {
                return Err(OracleError::BadGrid(
                    "each axis needs lo < hi and at least 3 points".into(),
                ));
            }
        }
        Ok(())
    }

    fn coord(&self, axis: usize, i: usize) -> T {
        let (lo, hi, count) = self.axes[axis];
        if i == count - 1 {
            return hi;
        }
        lo + (hi - lo) * T::from_usize(i).unwrap() / T::from_usize(count - 1).unwrap()
    }

    fn max_step(&self) -> T {
        self.axes
            .iter()
            .map(|&(lo, hi, n)| (hi - lo) / T::from_usize(n - 1).unwrap())
            .fold(T::zero(), T::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleMinimum<T> {
    pub value: T,
    pub argmin: Vec<T>,
    /// Grid step times an empirical Lipschitz constant of the objective.
    pub error_bound: T,
}

/// Exhaustive minimum of `objective` over the grid points accepted by
/// `feasible`. Ties go to the lexicographically smallest index.
pub fn grid_constrained_inf<T, F>(
    objective: F,
    grid: &GridSpec<T>,
    feasible: Option<&dyn Fn(&[T]) -> bool>,
) -> Result<OracleMinimum<T>, OracleError>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    grid.validate()?;
    let n = grid.dim();
    let counts: Vec<usize> = grid.axes.iter().map(|a| a.2).collect();
    let total: usize = counts.iter().product();
    let step_last = {
        let (lo, hi, cnt) = grid.axes[n - 1];
        (hi - lo) / T::from_usize(cnt - 1).unwrap()
    };
    let mut point = vec![T::zero(); n];
    let mut best: Option<(T, Vec<T>)> = None;
    let mut lipschitz = T::zero();
    let mut prev: Option<T> = None;
    for flat in 0..total {
        let mut rem = flat;
        for axis in (0..n).rev() {
            point[axis] = grid.coord(axis, rem % counts[axis]);
            rem /= counts[axis];
        }
        if flat % counts[n - 1] == 0 {
            prev = None;
        }
        let ok = feasible.is_none_or(|f| f(&point));
        if !ok {
            prev = None;
            continue;
        }
        let value = objective(&point);
        if !value.is_finite() {
            prev = None;
            continue;
        }
        if let Some(p) = prev {
            lipschitz = lipschitz.max((value - p).abs() / step_last);
        }
        prev = Some(value);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, point.clone()));
        }
    }
    let (value, argmin) = best.ok_or(OracleError::EmptyFeasible)?;
    Ok(OracleMinimum {
        value,
        argmin,
        error_bound: lipschitz * grid.max_step(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DifferenceKind {
    Central,
    /// `f(x - h)` was not finite.
    Forward,
    /// `f(x + h)` was not finite.
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteDifference<T> {
    pub derivative: T,
    pub kind: DifferenceKind,
}

impl<T> FiniteDifference<T> {
    /// Whether the estimate fell back to a one-sided difference at a domain
    /// edge.
    pub fn at_domain_edge(&self) -> bool {
        self.kind != DifferenceKind::Central
    }
}

/// `(f(x + h) - f(x - h)) / 2h`, one-sided where a side is not finite.
pub fn finite_diff<T: Scalar>(f: impl Fn(T) -> T, x: T, h: T) -> FiniteDifference<T> {
    let (lo, mid, hi) = (f(x - h), f(x), f(x + h));
    if lo.is_finite() && hi.is_finite() {
        FiniteDifference {
            derivative: (hi - lo) / (h + h),
            kind: DifferenceKind::Central,
        }
    } else if hi.is_finite() {
        FiniteDifference {
            derivative: (hi - mid) / h,
            kind: DifferenceKind::Forward,
        }
    } else {
        FiniteDifference {
            derivative: (mid - lo) / h,
            kind: DifferenceKind::Backward,
        }
    }
}

/// Random concave function on `grid`: cumulative integral of a random
/// non-increasing slope sequence in `[-2, 2]`, finite on a random
/// sub-interval that always contains the middle fifth `[0.4, 0.6]` of the
/// grid span (so any two outputs have overlapping domain interiors).
/// Deterministic per seed.
pub fn random_concave<T: Scalar>(seed: u64, grid: &[T]) -> SampledFunction<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.len();
    assert!(n >= 11, "random_concave needs at least 11 grid points");
    let (g0, g1) = (grid[0], grid[n - 1]);
    let index_at = |frac: f64| -> usize {
        let x = g0 + (g1 - g0) * c::<T>(frac);
        grid.partition_point(|&g| g < x).min(n - 1)
    };
    let first = index_at(rng.random_range(0.0..0.4));
    let last = index_at(rng.random_range(0.6..1.0)).max(first + 2);
    let mut slopes: Vec<f64> = (first..last).map(|_| rng.random_range(-2.0..2.0)).collect();
    slopes.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut values = vec![T::neg_infinity(); n];
    values[first] = c(rng.random_range(-1.0..1.0));
    for (k, i) in (first..last).enumerate() {
        values[i + 1] = values[i] + c::<T>(slopes[k]) * (grid[i + 1] - grid[i]);
    }
    SampledFunction::new(grid.to_vec(), values).expect("generator produces a proper function")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampled::uniform_grid;

    fn exp_reg(v: f64) -> f64 {
        if v > 0.0 {
            v * v.ln() - v + 1.0
        } else {
            1.0
        }
    }

    #[test]
    fn constrained_exp_pair_matches_pooled_closed_form() {
        let l = [2.0, 1.0];
        let obj = |v: &[f64]| v[0] * l[0] + v[1] * l[1] + exp_reg(v[0]) + exp_reg(v[1]);
        let feasible = |v: &[f64]| v[0] >= v[1];
        let res = grid_constrained_inf(obj, &GridSpec::unit_cube(2, 201), Some(&feasible)).unwrap();
        let expected = 2.0 * (1.0 - (-1.5f64).exp());
        assert!((res.value - expected).abs() < 1e-3);
        assert!(res.value >= expected - 1e-12);
    }

    #[test]
    fn inner_product_minimum_is_origin() {
        let l = [0.3, 2.0];
        let res =
            grid_constrained_inf(|v: &[f64]| v[0] * l[0] + v[1] * l[1], &GridSpec::unit_cube(2, 11), None).unwrap();
        assert_eq!(res.value, 0.0);
        assert_eq!(res.argmin, vec![0.0, 0.0]);
    }

    #[test]
    fn one_dimensional_linear_latent() {
        let res = grid_constrained_inf(
            |v: &[f64]| 0.5 * v[0] + (1.0 - v[0]).powi(2) / 2.0,
            &GridSpec::unit_cube(1, 2049),
            None,
        )
        .unwrap();
        assert!((res.value - 0.375).abs() < 1e-5);
    }

    #[test]
    fn empty_feasible_set() {
        let never = |_: &[f64]| false;
        assert_eq!(
            grid_constrained_inf(|_: &[f64]| 0.0, &GridSpec::unit_cube(2, 5), Some(&never)),
            Err(OracleError::EmptyFeasible)
        );
    }

    #[test]
    fn rejects_high_dimension() {
        assert!(matches!(
            grid_constrained_inf(|_: &[f64]| 0.0, &GridSpec::unit_cube(4, 3), None),
            Err(OracleError::BadGrid(_))
        ));
    }

    #[test]
    fn halving_the_step_tightens_the_bound() {
        let l = [2.0, 1.0];
        let obj = |v: &[f64]| v[0] * l[0] + v[1] * l[1] + exp_reg(v[0]) + exp_reg(v[1]);
        let feasible = |v: &[f64]| v[0] >= v[1];
        let mut previous: Option<OracleMinimum<f64>> = None;
        for count in [21, 41, 81, 161] {
            let res = grid_constrained_inf(obj, &GridSpec::unit_cube(2, count), Some(&feasible)).unwrap();
            if let Some(prev) = &previous {
                assert!(res.error_bound < prev.error_bound);
                assert!(res.value <= prev.value + prev.error_bound);
            }
            previous = Some(res);
        }
    }

    #[test]
    fn finite_diff_on_quadratic_and_constant() {
        let d = finite_diff(|x: f64| x * x + x + 1.0, 0.7, 1e-4);
        assert!((d.derivative - 2.4).abs() < 1e-7);
        assert_eq!(d.kind, DifferenceKind::Central);
        assert_eq!(finite_diff(|_: f64| 3.0, 1.0, 1e-4).derivative, 0.0);
    }

    #[test]
    fn finite_diff_falls_back_at_edges() {
        let f = |x: f64| if x >= 0.0 { x.sqrt() } else { f64::NEG_INFINITY };
        let d = finite_diff(f, 0.0, 1e-4);
        assert_eq!(d.kind, DifferenceKind::Forward);
        assert!(d.at_domain_edge());
    }

    #[test]
    fn random_concave_is_concave_and_deterministic() {
        let grid = uniform_grid(0.0, 1.0, 257);
        for seed in 0..20 {
            let g = random_concave(seed, &grid);
            assert!(g.is_concave(1e-12), "seed {seed}");
        }
        assert_eq!(random_concave(42, &grid), random_concave(42, &grid));
        assert_ne!(random_concave(42, &grid), random_concave(43, &grid));
    }

    #[test]
    fn random_pairs_overlap_in_the_interior() {
        let grid: Vec<f64> = uniform_grid(0.0, 1.0, 257);
        for seed in 0..20 {
            let (a, b) = (random_concave(2 * seed, &grid), random_concave(2 * seed + 1, &grid));
            let (alo, ahi) = a.domain();
            let (blo, bhi) = b.domain();
            assert!(alo.max(blo) < ahi.min(bhi));
            assert!(a.add(&b).is_ok());
        }
    }
}
