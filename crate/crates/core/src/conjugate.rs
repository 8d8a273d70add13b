//! Grid-based concave conjugacy.
//!
//! For a concave-convention function `g` the concave conjugate is
//! `g*(l) = inf_v { v l - g(v) }`. On a sampled function the infimum runs over
//! the finite grid points, which is exactly the conjugate of the
//! piecewise-linear interpolant.

use crate::error::ConjugacyError;
use crate::sampled::{check_grid, uniform_grid, SampledFunction};
use crate::scalar::{c, Scalar};

/// Closed interval `[lower, upper]` of extended reals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubgradientInterval<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> SubgradientInterval<T> {
    pub fn new(lower: T, upper: T) -> Self {
        debug_assert!(lower <= upper);
        Self { lower, upper }
    }

    pub fn point(x: T) -> Self {
        Self { lower: x, upper: x }
    }

    pub fn contains(&self, x: T, tol: T) -> bool {
        x >= self.lower - tol && x <= self.upper + tol
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }
}

/// The set `{v : v.k >= b}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace<T> {
    direction: Vec<T>,
    offset: T,
}

impl<T: Scalar> Halfspace<T> {
    pub fn new(direction: Vec<T>, offset: T) -> Result<Self, ConjugacyError> {
        if direction.is_empty() || direction.iter().all(|k| *k == T::zero()) {
            return Err(ConjugacyError::BadValue(
                "halfspace direction must have a nonzero entry".into(),
            ));
        }
        if direction.iter().any(|k| !k.is_finite()) || !offset.is_finite() {
            return Err(ConjugacyError::BadValue("halfspace must be finite".into()));
        }
        Ok(Self { direction, offset })
    }

    /// `{v : v.k >= 0}`.
    pub fn homogeneous(direction: Vec<T>) -> Result<Self, ConjugacyError> {
        Self::new(direction, T::zero())
    }

    /// `{v : v_i >= v_j}` in dimension `n`.
    pub fn pairwise_order(n: usize, i: usize, j: usize) -> Result<Self, ConjugacyError> {
        if i >= n || j >= n || i == j {
            return Err(ConjugacyError::BadValue(format!(
                "pairwise order needs distinct indices below {n}, got ({i}, {j})"
            )));
        }
        let mut k = vec![T::zero(); n];
        k[i] = T::one();
        k[j] = -T::one();
        Self::homogeneous(k)
    }

    pub fn direction(&self) -> &[T] {
        &self.direction
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.offset == T::zero()
    }

    /// `v.k - b`; non-negative inside the halfspace.
    pub fn slack(&self, v: &[T]) -> T {
        dot(v, &self.direction) - self.offset
    }

    pub fn contains(&self, v: &[T], tol: T) -> bool {
        self.slack(v) >= -tol
    }

    /// If this is `v_i >= v_j` (up to positive scaling), returns `(i, j)`.
    pub fn as_pairwise_order(&self) -> Option<(usize, usize)> {
        if self.offset != T::zero() {
            return None;
        }
        let nz: Vec<usize> = (0..self.direction.len())
            .filter(|&i| self.direction[i] != T::zero())
            .collect();
        if nz.len() != 2 {
            return None;
        }
        let (a, b) = (self.direction[nz[0]], self.direction[nz[1]]);
        if a != -b {
            return None;
        }
        if a > T::zero() {
            Some((nz[0], nz[1]))
        } else {
            Some((nz[1], nz[0]))
        }
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `inf_v { v l - g(v) }` over the finite samples of `g`.
pub fn conjugate_at<T: Scalar>(g: &SampledFunction<T>, l: T) -> T {
    g.finite_points().map(|(v, gv)| v * l - gv).fold(T::infinity(), T::min)
}

/// Concave conjugate of `g` sampled on `out_grid`, by direct scan.
pub fn concave_conjugate<T: Scalar>(
    g: &SampledFunction<T>,
    out_grid: &[T],
) -> Result<SampledFunction<T>, ConjugacyError> {
    check_grid(out_grid)?;
    let values = out_grid.iter().map(|&l| conjugate_at(g, l)).collect();
    SampledFunction::new(out_grid.to_vec(), values)
}

/// Upper concave hull of the finite samples, as indices into `g`.
pub(crate) fn upper_hull<T: Scalar>(g: &SampledFunction<T>) -> Vec<(T, T)> {
    let mut hull: Vec<(T, T)> = Vec::new();
    for p in g.finite_points() {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross >= T::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Linear-time conjugate: walks the upper hull with a monotone pointer.
/// Agrees with [`concave_conjugate`] on every input, since the conjugate only
/// sees the hull.
pub fn concave_conjugate_fast<T: Scalar>(
    g: &SampledFunction<T>,
    out_grid: &[T],
) -> Result<SampledFunction<T>, ConjugacyError> {
    check_grid(out_grid)?;
    let hull = upper_hull(g);
    let cost = |i: usize, l: T| hull[i].0 * l - hull[i].1;
    // The minimizing abscissa moves left as the slope l grows.
    let mut p = hull.len() - 1;
    let mut values = Vec::with_capacity(out_grid.len());
    for &l in out_grid {
        while p > 0 && cost(p - 1, l) <= cost(p, l) {
            p -= 1;
        }
        values.push(cost(p, l));
    }
    SampledFunction::new(out_grid.to_vec(), values)
}

/// `h(x) = sup_{x1 + x2 = x} f(x1) + g(x2)`, quantized on the grids of both
/// inputs (each grid point of one function is paired with the interpolated
/// value of the other).
pub fn sup_convolution<T: Scalar>(
    f: &SampledFunction<T>,
    g: &SampledFunction<T>,
    out_grid: &[T],
) -> Result<SampledFunction<T>, ConjugacyError> {
    check_grid(out_grid)?;
    let values: Vec<T> = out_grid
        .iter()
        .map(|&x| {
            let from_f = f
                .finite_points()
                .map(|(x1, fx)| fx + g.eval(x - x1))
                .fold(T::neg_infinity(), T::max);
            let from_g = g
                .finite_points()
                .map(|(x2, gx)| f.eval(x - x2) + gx)
                .fold(T::neg_infinity(), T::max);
            from_f.max(from_g)
        })
        .collect();
    if values.iter().all(|v| !v.is_finite()) {
        return Err(ConjugacyError::EmptyOverlap);
    }
    SampledFunction::new(out_grid.to_vec(), values)
}

/// Dual grid for a round trip: a uniform cover of the secant slopes of `g`
/// merged with the edge slopes of its upper hull, so that the second
/// conjugate reproduces the hull exactly at the primal grid points.
pub fn dual_grid<T: Scalar>(g: &SampledFunction<T>) -> Vec<T> {
    let pts: Vec<(T, T)> = g.finite_points().collect();
    let hull = upper_hull(g);
    let hull_slopes: Vec<T> = hull.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let (lo, hi) = pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), s| (lo.min(s), hi.max(s)));
    let (lo, hi) = if lo.is_finite() {
        (lo, hi)
    } else {
        (T::zero(), T::zero())
    };
    let pad = (hi - lo) * c(0.1) + T::one();
    let mut grid = uniform_grid(lo - pad, hi + pad, g.len().max(3));
    grid.extend(hull_slopes);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tiny = T::epsilon() * c(16.0);
    grid.dedup_by(|b, a| (*b - *a).abs() <= tiny * (T::one() + a.abs()));
    grid
}

/// `g**` on `g`'s own grid, through the dual grid `l_grid`. Points outside
/// the effective domain of `g` stay `-inf`.
pub fn biconjugate_on<T: Scalar>(g: &SampledFunction<T>, l_grid: &[T]) -> Result<SampledFunction<T>, ConjugacyError> {
    let star = concave_conjugate(g, l_grid)?;
    let (first, last) = g.domain_indices();
    let values = g
        .grid()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if i < first || i > last {
                T::neg_infinity()
            } else {
                conjugate_at(&star, v)
            }
        })
        .collect();
    SampledFunction::new(g.grid().to_vec(), values)
}

/// Closed concave hull of `g` as the conjugate round trip.
pub fn biconjugate<T: Scalar>(g: &SampledFunction<T>) -> Result<SampledFunction<T>, ConjugacyError> {
    biconjugate_on(g, &dual_grid(g))
}

fn secant<T: Scalar>(g: &SampledFunction<T>, i: usize) -> T {
    let (x, y) = (g.grid(), g.values());
    (y[i + 1] - y[i]) / (x[i + 1] - x[i])
}

/// Whether grid node `i` (strictly inside the domain) carries a kink rather
/// than smooth curvature.
fn is_kink<T: Scalar>(g: &SampledFunction<T>, i: usize) -> bool {
    let (first, last) = g.domain_indices();
    let jump = |j: usize| -> T { (secant(g, j - 1) - secant(g, j)).abs() };
    let here = jump(i);
    let x = g.grid();
    let h = (x[i] - x[i - 1]).max(x[i + 1] - x[i]);
    let s = secant(g, i - 1).abs().max(secant(g, i).abs());
    if here > h.sqrt() * (T::one() + s) {
        return true;
    }
    let mut neighbour = T::zero();
    if i > first + 1 {
        neighbour = neighbour.max(jump(i - 1));
    }
    if i + 1 < last {
        neighbour = neighbour.max(jump(i + 1));
    }
    here > neighbour * c(8.0) + T::epsilon() * c(64.0) * (T::one() + s)
}

/// Slope estimate at an interior smooth node, exact for quadratics.
fn node_slope<T: Scalar>(g: &SampledFunction<T>, i: usize) -> T {
    let x = g.grid();
    let (hl, hr) = (x[i] - x[i - 1], x[i + 1] - x[i]);
    (secant(g, i - 1) * hr + secant(g, i) * hl) / (hl + hr)
}

/// Superdifferential of a concave sampled function, `[lower, upper]`.
///
/// Interior smooth points give a degenerate interval; kinks give the interval
/// between adjacent secant slopes; the left domain end extends to `+inf` and
/// the right end to `-inf`.
pub fn subdifferential<T: Scalar>(g: &SampledFunction<T>, x: T) -> Result<SubgradientInterval<T>, ConjugacyError> {
    let (lo, hi) = g.domain();
    let slack = T::epsilon() * c(64.0) * (T::one() + x.abs());
    if x.is_nan() || x < lo - slack || x > hi + slack {
        return Err(ConjugacyError::OutsideDomain(x.as_f64()));
    }
    let (first, last) = g.domain_indices();
    if first == last {
        return Ok(SubgradientInterval::new(T::neg_infinity(), T::infinity()));
    }
    let grid = g.grid();
    let on_node = |i: usize| (grid[i] - x).abs() <= slack;
    if x <= lo || on_node(first) {
        return Ok(SubgradientInterval::new(secant(g, first), T::infinity()));
    }
    if x >= hi || on_node(last) {
        return Ok(SubgradientInterval::new(T::neg_infinity(), secant(g, last - 1)));
    }
    let j = grid[first..=last].partition_point(|&p| p <= x);
    let i = first + j - 1; // grid[i] <= x < grid[i + 1]
    if on_node(i) || on_node(i + 1) {
        let node = if on_node(i) { i } else { i + 1 };
        let (sl, sr) = (secant(g, node - 1), secant(g, node));
        if is_kink(g, node) {
            return Ok(SubgradientInterval::new(sl.min(sr), sl.max(sr)));
        }
        return Ok(SubgradientInterval::point(node_slope(g, node)));
    }
    let cell = secant(g, i);
    let interior = i > first && i + 1 < last;
    if !interior || is_kink(g, i) || is_kink(g, i + 1) {
        return Ok(SubgradientInterval::point(cell));
    }
    let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    let (d0, d1) = (node_slope(g, i), node_slope(g, i + 1));
    Ok(SubgradientInterval::point(d0 + (d1 - d0) * t))
}

/// Concave-convention support function `inf_{v in H} <v, l>` of a halfspace.
/// Finite (`beta b`) only when `l = beta k` with `beta >= 0`; the residual
/// after projection onto `k` is compared with relative tolerance `1e-9`.
pub fn support_function<T: Scalar>(h: &Halfspace<T>, l: &[T]) -> Result<T, ConjugacyError> {
    let k = h.direction();
    if l.len() != k.len() {
        return Err(ConjugacyError::DimensionMismatch {
            expected: k.len(),
            found: l.len(),
        });
    }
    let norm_l = dot(l, l).sqrt();
    if norm_l == T::zero() {
        return Ok(T::zero());
    }
    let beta = dot(l, k) / dot(k, k);
    let residual = l
        .iter()
        .zip(k)
        .map(|(&li, &ki)| (li - beta * ki) * (li - beta * ki))
        .sum::<T>()
        .sqrt();
    let tol = c::<T>(1e-9) * norm_l;
    if residual <= tol && beta >= -tol {
        Ok(beta.max(T::zero()) * h.offset())
    } else {
        Ok(T::neg_infinity())
    }
}

/// Conjugate of the separable sum `g(v) = sum_i g_i(v_i)` at `l`.
pub fn separable_conjugate<T: Scalar>(gs: &[SampledFunction<T>], l: &[T]) -> Result<T, ConjugacyError> {
    if gs.len() != l.len() {
        return Err(ConjugacyError::DimensionMismatch {
            expected: gs.len(),
            found: l.len(),
        });
    }
    Ok(gs.iter().zip(l).map(|(g, &li)| conjugate_at(g, li)).sum())
}
