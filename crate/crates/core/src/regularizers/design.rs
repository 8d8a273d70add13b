//! Building regularizers from one side of the triple.
//!
//! * From a weight function: integrate it to get the latent objective,
//!   invert it to get the loss of each weight, then
//!   `R(v) = -v l(v) + F(l(v))`.
//! * From a convex penalty: the loss of a weight is the slope of `-R`,
//!   the weight function is its monotone inverse, and
//!   `F(l) = v(l) l + R(v(l))`.

use std::sync::Arc;

use super::{RegularizerForm, SPRegularizer};
use crate::error::RegularizerError;
use crate::sampled::uniform_grid;
use crate::scalar::{c, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct DesignOptions<T> {
    /// Upper end of the loss grid for the weight pipeline.
    pub l_max: T,
    pub points: usize,
}

impl<T: Scalar> Default for DesignOptions<T> {
    fn default() -> Self {
        Self {
            l_max: c(8.0),
            points: 2049,
        }
    }
}

/// Pipeline output with non-fatal diagnostics.
#[derive(Clone, Debug)]
pub struct Designed<T: Scalar> {
    pub regularizer: SPRegularizer<T>,
    pub warnings: Vec<String>,
}

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

const INVERSION_TOL: f64 = 1e-10;
const LIMIT_TOL: f64 = 1e-3;

// 5-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

fn gauss_legendre<T: Scalar>(f: &dyn Fn(T) -> T, a: T, b: T) -> T {
    let half = (b - a) * c(0.5);
    let mid = (a + b) * c(0.5);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(&x, &w)| c::<T>(w) * f(mid + half * c(x)))
        .sum::<T>()
        * half
}

struct WeightDesigned<T> {
    w: ScalarFn<T>,
    grid: Vec<T>,
    cumulative: Vec<T>,
    w_at_zero: T,
}

impl<T: Scalar> WeightDesigned<T> {
    fn l_max(&self) -> T {
        *self.grid.last().unwrap()
    }

    /// Maximal preimage `sup { l in [0, l_max] : w(l) >= v }`.
    fn loss_of_weight(&self, v: T) -> T {
        let w = &self.w;
        if w(self.l_max()) >= v {
            return self.l_max();
        }
        if w(T::zero()) < v {
            return T::zero();
        }
        let (mut lo, mut hi) = (T::zero(), self.l_max());
        while hi - lo > c(INVERSION_TOL) {
            let mid = (lo + hi) * c(0.5);
            if w(mid) >= v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) * c(0.5)
    }
}

impl<T: Scalar> RegularizerForm<T> for WeightDesigned<T> {
    fn r_sp_base(&self, v: T) -> T {
        if !(v >= T::zero() && v <= T::one()) {
            return T::infinity();
        }
        let l = self.loss_of_weight(v);
        -v * l + self.latent_base(l)
    }

    fn weight_base(&self, l: T) -> T {
        if l < T::zero() {
            self.w_at_zero
        } else {
            (self.w)(l)
        }
    }

    fn latent_base(&self, l: T) -> T {
        if l <= T::zero() {
            return l * self.w_at_zero;
        }
        let w = self.w.as_ref();
        let l_max = self.l_max();
        if l <= l_max {
            let j = self.grid.partition_point(|&g| g <= l).max(1);
            let i = j - 1;
            if i == self.grid.len() - 1 {
                return self.cumulative[i];
            }
            return self.cumulative[i] + gauss_legendre(w, self.grid[i], l);
        }
        let step = self.grid[1] - self.grid[0];
        let panels = ((l - l_max) / step).ceil().to_usize().unwrap_or(1).clamp(1, 4096);
        let width = (l - l_max) / T::from_usize(panels).unwrap();
        let tail: T = (0..panels)
            .map(|k| {
                let a = l_max + width * T::from_usize(k).unwrap();
                gauss_legendre(w, a, a + width)
            })
            .sum();
        *self.cumulative.last().unwrap() + tail
    }
}

/// Builds a regularizer from a non-increasing weight function with
/// `w(0+) = 1` and `w(∞) = 0`.
pub fn design_from_weight<T, W>(w: W, options: &DesignOptions<T>) -> Result<Designed<T>, RegularizerError>
where
    T: Scalar,
    W: Fn(T) -> T + Send + Sync + 'static,
{
    if !(options.l_max > T::zero()) || options.points < 3 {
        return Err(RegularizerError::BadParam(
            "design grid needs l_max > 0 and at least 3 points".into(),
        ));
    }
    let grid = uniform_grid(T::zero(), options.l_max, options.points);
    let samples: Vec<T> = grid.iter().map(|&l| w(l)).collect();
    let tol = c::<T>(1e-12);
    if let Some(i) = samples.iter().position(|&s| !(s >= -tol && s <= T::one() + tol)) {
        return Err(RegularizerError::NotMonotone(format!(
            "w({}) = {} leaves [0, 1]",
            grid[i], samples[i]
        )));
    }
    if let Some(i) = samples.windows(2).position(|p| p[1] > p[0] + tol) {
        return Err(RegularizerError::NotMonotone(format!(
            "w increases between l = {} and l = {}",
            grid[i],
            grid[i + 1]
        )));
    }
    let near_zero = w(options.l_max * c(1e-12));
    if (near_zero - T::one()).abs() > c(LIMIT_TOL) {
        return Err(RegularizerError::BadLimits(format!("w(0+) = {near_zero}, expected 1")));
    }
    let mut warnings = Vec::new();
    let tail = *samples.last().unwrap();
    if tail > c(LIMIT_TOL) {
        warnings.push(format!(
            "w({}) = {} has not decayed to 0; latent objective is extrapolated past the grid",
            options.l_max, tail
        ));
    }
    let w: ScalarFn<T> = Arc::new(w);
    let mut cumulative = Vec::with_capacity(grid.len());
    cumulative.push(T::zero());
    for i in 0..grid.len() - 1 {
        let next = cumulative[i] + gauss_legendre(w.as_ref(), grid[i], grid[i + 1]);
        cumulative.push(next);
    }
    let w_at_zero = w(T::zero());
    let form = WeightDesigned {
        w,
        grid,
        cumulative,
        w_at_zero,
    };
    Ok(Designed {
        regularizer: SPRegularizer::from_form("designed-from-weight", form),
        warnings,
    })
}

struct RegularizerDesigned<T> {
    r: ScalarFn<T>,
    offset: T,
}

impl<T: Scalar> RegularizerDesigned<T> {
    fn r(&self, v: T) -> T {
        if v >= T::zero() && v <= T::one() {
            let y = (self.r)(v);
            if y.is_nan() {
                T::infinity()
            } else {
                y
            }
        } else {
            T::infinity()
        }
    }

    /// Slope of `-R` at `v`, one-sided where a neighbour leaves the domain;
    /// `+inf` where `R` itself is infinite (left of the domain).
    fn slope(&self, v: T) -> T {
        let base = self.r(v);
        if !base.is_finite() {
            return T::infinity();
        }
        let h0 = c::<T>(1e-6);
        let h = h0.min(v * c(0.25)).min((T::one() - v) * c(0.25));
        if h > T::zero() {
            let (lo, hi) = (self.r(v - h), self.r(v + h));
            if lo.is_finite() && hi.is_finite() {
                return -(hi - lo) / (h + h);
            }
        }
        let hi = self.r(v + h0);
        if hi.is_finite() {
            return -(hi - base) / h0;
        }
        let lo = self.r(v - h0);
        if lo.is_finite() {
            return -(base - lo) / h0;
        }
        T::zero()
    }

    /// Monotone inverse of the slope map. Flat pieces resolve to the smallest
    /// weight, except at zero loss where they resolve to the largest.
    fn weight_of(&self, l: T) -> T {
        let zero_loss = l == T::zero();
        let above = |v: T| {
            let s = self.slope(v);
            if zero_loss {
                s >= l
            } else {
                s > l
            }
        };
        if above(T::one()) {
            return T::one();
        }
        if !above(T::zero()) {
            return T::zero();
        }
        let (mut lo, mut hi) = (T::zero(), T::one());
        while hi - lo > c(INVERSION_TOL * 1e-2) {
            let mid = (lo + hi) * c(0.5);
            if above(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) * c(0.5)
    }
}

impl<T: Scalar> RegularizerForm<T> for RegularizerDesigned<T> {
    fn r_sp_base(&self, v: T) -> T {
        self.r(v)
    }

    fn weight_base(&self, l: T) -> T {
        self.weight_of(l)
    }

    fn latent_base(&self, l: T) -> T {
        let v = self.weight_of(l);
        v * l + self.r(v) - self.offset
    }
}

/// Builds a regularizer from a convex penalty on (a subset of) `[0, 1]`
/// whose domain closure contains both 0 and 1. Values outside `[0, 1]` are
/// ignored.
pub fn design_from_regularizer<T, R>(r: R, options: &DesignOptions<T>) -> Result<Designed<T>, RegularizerError>
where
    T: Scalar,
    R: Fn(T) -> T + Send + Sync + 'static,
{
    let n = options.points.max(3);
    let grid = uniform_grid(T::zero(), T::one(), n);
    let values: Vec<T> = grid.iter().map(|&v| r(v)).collect();
    if values.iter().any(|v| v.is_nan() || *v == T::neg_infinity()) {
        return Err(RegularizerError::BadDomain("penalty must be finite or +inf".into()));
    }
    let first = values
        .iter()
        .position(|v| v.is_finite())
        .ok_or_else(|| RegularizerError::BadDomain("empty domain".into()))?;
    let last = values.iter().rposition(|v| v.is_finite()).unwrap();
    if values[first..=last].iter().any(|v| !v.is_finite()) {
        return Err(RegularizerError::BadDomain("domain is not an interval".into()));
    }
    if first > 1 || last + 2 < n {
        return Err(RegularizerError::BadDomain(format!(
            "domain closure must contain 0 and 1, finite only on [{}, {}]",
            grid[first], grid[last]
        )));
    }
    for i in first + 1..last {
        let d2 = values[i - 1] - values[i] - values[i] + values[i + 1];
        let scale = T::one() + values[i].abs();
        if d2 < -c::<T>(1e-9) * scale {
            return Err(RegularizerError::NotConvex(format!(
                "midpoint test fails at v = {}",
                grid[i]
            )));
        }
    }
    let mut form = RegularizerDesigned {
        r: Arc::new(r),
        offset: T::zero(),
    };
    let v0 = form.weight_of(T::zero());
    form.offset = form.r(v0);
    Ok(Designed {
        regularizer: SPRegularizer::from_form("designed-from-regularizer", form),
        warnings: Vec::new(),
    })
}
