use serde::Serialize;

use super::region::{check_partition, CurriculumRegion, RegionKind};
use super::solve::{constrained_weights, objective, SolveMethod, SolverOptions};
use crate::conjugate::dot;
use crate::error::CurriculumError;
use crate::regularizers::{CatalogKind, SPRegularizer};
use crate::scalar::{c, Scalar};

/// Which side of the critical region a loss vector falls on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// The unconstrained weights already satisfy the curriculum.
    Unaffected,
    Penalized,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unaffected => "unaffected",
            Self::Penalized => "penalized",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericOptions {
    pub check_nonsingular: bool,
    /// Zoom passes after the initial grid.
    pub refinements: usize,
    /// Points per free axis; defaults to 2049, 201 or 61 for 1, 2 or 3 axes.
    pub points: Option<usize>,
}

impl Default for NumericOptions {
    fn default() -> Self {
        Self {
            check_nonsingular: true,
            refinements: 3,
            points: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericAction<T> {
    pub value: T,
    pub minimizer: Vec<T>,
}

/// Constrained infimum `inf_{v in Ψ ∩ [0,1]^n} <v, l> + R_SP(v, λ)` by a
/// dense grid over the free weights (at most three), refined around the best
/// point.
pub fn curriculum_action_numeric<T: Scalar>(
    reg: &SPRegularizer<T>,
    lambda: T,
    region: &CurriculumRegion<T>,
    l: &[T],
    options: &NumericOptions,
) -> Result<NumericAction<T>, CurriculumError> {
    let n = region.dim();
    if l.len() != n {
        return Err(CurriculumError::DimensionMismatch {
            expected: n,
            found: l.len(),
        });
    }
    if options.check_nonsingular {
        region.check_nonsingular(reg)?;
    }
    // free parameters and their expansion to a weight vector
    let groups: Option<&Vec<Vec<usize>>> = match region.kind() {
        RegionKind::Groups(p) => Some(p),
        _ => None,
    };
    let p = groups.map_or(n, |g| g.len());
    if p == 0 || p > 3 {
        return Err(CurriculumError::BadRegion(format!(
            "the grid path handles 1 to 3 free weights, got {p}"
        )));
    }
    let expand = |u: &[T], v: &mut [T]| match groups {
        Some(g) => {
            for (gi, members) in g.iter().enumerate() {
                for &i in members {
                    v[i] = u[gi];
                }
            }
        }
        None => v.copy_from_slice(u),
    };
    let count = options.points.unwrap_or(match p {
        1 => 2049,
        2 => 201,
        _ => 61,
    });
    if count < 3 {
        return Err(CurriculumError::BadRegion(
            "grid needs at least 3 points per axis".into(),
        ));
    }
    let tol = c::<T>(1e-12);
    let mut boxes = vec![(T::zero(), T::one()); p];
    let mut best: Option<(T, Vec<T>)> = None;
    let mut u = vec![T::zero(); p];
    let mut v = vec![T::zero(); n];
    for _pass in 0..=options.refinements {
        let steps: Vec<T> = boxes
            .iter()
            .map(|&(lo, hi)| (hi - lo) / T::from_usize(count - 1).unwrap())
            .collect();
        let total = count.pow(p as u32);
        let mut pass_best: Option<(T, Vec<T>)> = None;
        for flat in 0..total {
            let mut rem = flat;
            for a in (0..p).rev() {
                let idx = rem % count;
                rem /= count;
                u[a] = if idx == count - 1 {
                    boxes[a].1
                } else {
                    boxes[a].0 + steps[a] * T::from_usize(idx).unwrap()
                };
            }
            expand(&u, &mut v);
            if groups.is_none() && !region.contains(&v, tol) {
                continue;
            }
            let value = objective(reg, lambda, &v, l);
            if value.is_finite() && pass_best.as_ref().is_none_or(|(b, _)| value < *b) {
                pass_best = Some((value, u.clone()));
            }
        }
        let Some((value, arg)) = pass_best else {
            if best.is_none() {
                return Err(CurriculumError::EmptyFeasible);
            }
            break;
        };
        for a in 0..p {
            let half = steps[a] * c(3.0);
            boxes[a] = ((arg[a] - half).max(T::zero()), (arg[a] + half).min(T::one()));
        }
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, arg));
        }
    }
    let (value, arg) = best.unwrap();
    let mut minimizer = vec![T::zero(); n];
    expand(&arg, &mut minimizer);
    Ok(NumericAction { value, minimizer })
}

/// `sup_{t >= 0} F(l - t k)` by geometric bracketing and golden-section
/// search; `F` must be concave along the ray.
pub fn homogeneous_action_ray<T: Scalar>(f: impl Fn(&[T]) -> T, k: &[T], l: &[T]) -> T {
    let point = |t: T| -> Vec<T> { l.iter().zip(k).map(|(&li, &ki)| li - t * ki).collect() };
    let phi = |t: T| f(&point(t));
    let k_norm = k.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let l_norm = l.iter().fold(T::one(), |m, x| m.max(x.abs()));
    let scale = l_norm / k_norm;
    let cap = scale * c(1e8);
    let mut best = phi(T::zero());
    let (mut a, mut b) = (T::zero(), T::zero());
    let mut fb = best;
    let mut t = scale * c(1e-3);
    loop {
        let ft = phi(t);
        best = best.max(ft);
        if ft <= fb || t > cap {
            break;
        }
        a = b;
        b = t;
        fb = ft;
        t *= c(2.0);
    }
    if t > cap {
        return best;
    }
    // maximum lies in [a, t]
    let g = c::<T>(0.5 * (5f64.sqrt() - 1.0));
    let (mut lo, mut hi) = (a, t);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    for _ in 0..200 {
        if hi - lo <= c::<T>(1e-13) * (T::one() + hi) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = phi(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = phi(x1);
        }
        best = best.max(f1).max(f2);
    }
    best
}

/// Closed form for the exponential regularizer under one order `v_i >= v_j`:
/// when `l_i >= l_j` both losses are replaced by their mean.
pub fn homogeneous_closed_form<T: Scalar>(
    reg: &SPRegularizer<T>,
    lambda: T,
    order: (usize, usize),
    l: &[T],
) -> Result<(T, Vec<T>), CurriculumError> {
    if reg.kind() != Some(CatalogKind::Exp) {
        return Err(CurriculumError::UnsupportedRegularizer {
            required: "exp".into(),
            found: reg.name().to_string(),
        });
    }
    let (i, j) = order;
    if i >= l.len() || j >= l.len() || i == j {
        return Err(CurriculumError::BadRegion(format!(
            "bad order ({i}, {j}) for {} samples",
            l.len()
        )));
    }
    let mut pooled = l.to_vec();
    if l[i] >= l[j] {
        let mean = (l[i] + l[j]) * c(0.5);
        pooled[i] = mean;
        pooled[j] = mean;
    }
    let value = reg.latent_sum(lambda, &pooled);
    let weights = pooled.iter().map(|&x| reg.weight_ext(lambda, x)).collect();
    Ok((value, weights))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineActionResult<T> {
    pub value: T,
    pub beta0: T,
    pub side: Side,
    /// `|∇F(l - β⁰ k).k - b|` at the returned multiplier.
    pub residual: T,
}

/// Action of `{v : v.k >= b}` on the latent objective:
/// `F(l - β⁰ k) + β⁰ b`, where `β⁰` is the largest root of
/// `∇F(l - β k).k = b`, or `F(l)` on the unaffected side.
pub fn affine_action<T: Scalar>(
    reg: &SPRegularizer<T>,
    lambda: T,
    k: &[T],
    b: T,
    l: &[T],
) -> Result<AffineActionResult<T>, CurriculumError> {
    if k.len() != l.len() {
        return Err(CurriculumError::DimensionMismatch {
            expected: k.len(),
            found: l.len(),
        });
    }
    if !reg.strictly_convex() {
        return Err(CurriculumError::UnsupportedRegularizer {
            required: "a strictly convex regularizer".into(),
            found: reg.name().to_string(),
        });
    }
    CurriculumRegion::affine(k.to_vec(), b)?.check_nonsingular(reg)?;
    let side = critical_region_side(reg, lambda, k, b, l);
    if side == Side::Unaffected {
        return Ok(AffineActionResult {
            value: reg.latent_sum(lambda, l),
            beta0: T::zero(),
            side,
            residual: T::zero(),
        });
    }
    let shifted = |beta: T| -> Vec<T> { l.iter().zip(k).map(|(&li, &ki)| li - beta * ki).collect() };
    let phi = |beta: T| -> T {
        let x = shifted(beta);
        x.iter()
            .zip(k)
            .map(|(&xi, &ki)| ki * reg.weight_ext(lambda, xi))
            .sum::<T>()
            - b
    };
    let cap = c::<T>(1e12) * (T::one() + lambda);
    let mut lo = T::zero();
    let mut hi = lambda;
    while phi(hi) <= T::zero() {
        lo = hi;
        hi *= c(2.0);
        if hi > cap {
            return Err(CurriculumError::NoRoot);
        }
    }
    for _ in 0..300 {
        let mid = (lo + hi) * c(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (rl, rh) = (phi(lo).abs(), phi(hi).abs());
    let (beta0, residual) = if rl <= rh { (lo, rl) } else { (hi, rh) };
    let value = reg.latent_sum(lambda, &shifted(beta0)) + beta0 * b;
    Ok(AffineActionResult {
        value,
        beta0,
        side,
        residual,
    })
}

/// `sum_g s_g F_λ(mean loss of g)`.
pub fn group_latent<T: Scalar>(
    reg: &SPRegularizer<T>,
    lambda: T,
    partition: &[Vec<usize>],
    l: &[T],
) -> Result<T, CurriculumError> {
    check_partition(l.len(), partition)?;
    Ok(partition
        .iter()
        .map(|g| {
            let s = T::from_usize(g.len()).unwrap();
            let total: T = g.iter().map(|&i| l[i]).sum();
            s * reg.latent_ext(lambda, total / s)
        })
        .sum())
}

/// `Unaffected` iff the unconstrained weights satisfy `v.k >= b`.
pub fn critical_region_side<T: Scalar>(reg: &SPRegularizer<T>, lambda: T, k: &[T], b: T, l: &[T]) -> Side {
    let v: Vec<T> = l.iter().map(|&li| reg.weight_ext(lambda, li)).collect();
    if dot(&v, k) >= b - c::<T>(1e-12) * (T::one() + b.abs()) {
        Side::Unaffected
    } else {
        Side::Penalized
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionRoute {
    /// The unconstrained weights already lie in the region.
    Unconstrained,
    ClosedForm,
    Affine,
    Groups,
    Solver(SolveMethod),
    Grid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionPoint<T> {
    pub value: T,
    pub weights: Vec<T>,
    pub side: Side,
    pub route: ActionRoute,
}

/// A curriculum bound to a regularizer and age, evaluated pointwise by the
/// most specific available route.
#[derive(Clone, Debug)]
pub struct CurriculumAction<T: Scalar> {
    reg: SPRegularizer<T>,
    lambda: T,
    region: CurriculumRegion<T>,
    force_grid: bool,
}

impl<T: Scalar> CurriculumAction<T> {
    pub fn new(
        reg: SPRegularizer<T>,
        lambda: T,
        region: CurriculumRegion<T>,
        check_nonsingular: bool,
    ) -> Result<Self, CurriculumError> {
        if check_nonsingular {
            region.check_nonsingular(&reg)?;
        }
        Ok(Self {
            reg,
            lambda,
            region,
            force_grid: false,
        })
    }

    /// Always use the dense grid.
    pub fn numeric_only(mut self) -> Self {
        self.force_grid = true;
        self
    }

    pub fn region(&self) -> &CurriculumRegion<T> {
        &self.region
    }

    /// Unconstrained latent objective at `l`.
    pub fn latent(&self, l: &[T]) -> T {
        self.reg.latent_sum(self.lambda, l)
    }

    pub fn side(&self, l: &[T]) -> Side {
        let v: Vec<T> = l.iter().map(|&li| self.reg.weight_ext(self.lambda, li)).collect();
        if self.region.contains(&v, c(1e-12)) {
            Side::Unaffected
        } else {
            Side::Penalized
        }
    }

    pub fn evaluate(&self, l: &[T]) -> Result<ActionPoint<T>, CurriculumError> {
        let n = self.region.dim();
        if l.len() != n {
            return Err(CurriculumError::DimensionMismatch {
                expected: n,
                found: l.len(),
            });
        }
        let side = self.side(l);
        let (reg, lambda) = (&self.reg, self.lambda);
        if self.force_grid {
            return self.grid(l, side);
        }
        if side == Side::Unaffected {
            return Ok(ActionPoint {
                value: self.latent(l),
                weights: l.iter().map(|&li| reg.weight_ext(lambda, li)).collect(),
                side,
                route: ActionRoute::Unconstrained,
            });
        }
        match self.region.kind() {
            RegionKind::Groups(p) => {
                let value = group_latent(reg, lambda, p, l)?;
                let weights =
                    constrained_weights(reg, lambda, Some(&self.region), l, &SolverOptions::default())?.weights;
                return Ok(ActionPoint {
                    value,
                    weights,
                    side,
                    route: ActionRoute::Groups,
                });
            }
            RegionKind::Halfspace(h) => {
                if let (Some(order), Some(CatalogKind::Exp)) = (h.as_pairwise_order(), reg.kind()) {
                    let (value, weights) = homogeneous_closed_form(reg, lambda, order, l)?;
                    return Ok(ActionPoint {
                        value,
                        weights,
                        side,
                        route: ActionRoute::ClosedForm,
                    });
                }
                if reg.strictly_convex() {
                    let k = h.direction();
                    match affine_action(reg, lambda, k, h.offset(), l) {
                        Ok(res) => {
                            let weights = l
                                .iter()
                                .zip(k)
                                .map(|(&li, &ki)| reg.weight_ext(lambda, li - res.beta0 * ki))
                                .collect();
                            return Ok(ActionPoint {
                                value: res.value,
                                weights,
                                side,
                                route: ActionRoute::Affine,
                            });
                        }
                        Err(CurriculumError::NoRoot) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
            RegionKind::Intersection(_) => {}
        }
        match constrained_weights(reg, lambda, Some(&self.region), l, &SolverOptions::default()) {
            Ok(res) => Ok(ActionPoint {
                value: res.value,
                weights: res.weights,
                side,
                route: ActionRoute::Solver(res.method),
            }),
            Err(CurriculumError::UnsupportedRegularizer { .. }) if n <= 3 => self.grid(l, side),
            Err(e) => Err(e),
        }
    }

    fn grid(&self, l: &[T], side: Side) -> Result<ActionPoint<T>, CurriculumError> {
        let opts = NumericOptions {
            check_nonsingular: false,
            ..NumericOptions::default()
        };
        let res = curriculum_action_numeric(&self.reg, self.lambda, &self.region, l, &opts)?;
        Ok(ActionPoint {
            value: res.value,
            weights: res.minimizer,
            side,
            route: ActionRoute::Grid,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizers::by_name;
    use approx::assert_abs_diff_eq;

    fn reg(name: &str) -> SPRegularizer<f64> {
        by_name(name).unwrap()
    }

    fn order() -> CurriculumRegion<f64> {
        CurriculumRegion::pairwise_order(2, 0, 1).unwrap()
    }

    #[test]
    fn numeric_pairwise_examples() {
        let opts = NumericOptions::default();
        let a = curriculum_action_numeric(&reg("exp"), 1.0, &order(), &[1.0, 2.0], &opts).unwrap();
        assert_abs_diff_eq!(a.value, 2.0 - (-1f64).exp() - (-2f64).exp(), epsilon = 1e-6);
        let b = curriculum_action_numeric(&reg("exp"), 1.0, &order(), &[2.0, 1.0], &opts).unwrap();
        assert_abs_diff_eq!(b.value, 2.0 * (1.0 - (-1.5f64).exp()), epsilon = 1e-6);
        assert!(b.minimizer[0] >= b.minimizer[1] - 1e-12);
    }

    #[test]
    fn full_space_is_identity_when_unchecked() {
        let full = CurriculumRegion::full(2).unwrap();
        let opts = NumericOptions {
            check_nonsingular: false,
            ..NumericOptions::default()
        };
        for name in ["hard", "linear", "log", "exp"] {
            let r = reg(name);
            let l = [0.3, 1.7];
            let a = curriculum_action_numeric(&r, 1.0, &full, &l, &opts).unwrap();
            assert_abs_diff_eq!(a.value, r.latent_sum(1.0, &l), epsilon = 1e-5);
        }
        assert!(curriculum_action_numeric(&reg("exp"), 1.0, &full, &[1.0, 1.0], &NumericOptions::default()).is_err());
    }

    #[test]
    fn ray_examples() {
        let exp = reg("exp");
        let f = |x: &[f64]| exp.latent_sum(1.0, x);
        let k = [1.0, -1.0];
        assert_abs_diff_eq!(
            homogeneous_action_ray(f, &k, &[2.0, 1.0]),
            2.0 * (1.0 - (-1.5f64).exp()),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            homogeneous_action_ray(f, &k, &[1.0, 2.0]),
            f(&[1.0, 2.0]),
            epsilon = 1e-15
        );
    }

    #[test]
    fn closed_form_examples() {
        let exp = reg("exp");
        let (_, w) = homogeneous_closed_form(&exp, 1.0, (0, 1), &[2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(w[0], 0.2231, epsilon = 1e-4);
        assert_abs_diff_eq!(w[1], 0.2231, epsilon = 1e-4);
        let (_, w) = homogeneous_closed_form(&exp, 1.0, (0, 1), &[1.0, 1.0]).unwrap();
        assert_eq!(w, vec![(-1f64).exp(); 2]);
        let (_, w) = homogeneous_closed_form(&exp, 1.0, (0, 1), &[0.5, 3.0]).unwrap();
        assert_abs_diff_eq!(w[0], 0.6065, epsilon = 1e-4);
        assert_abs_diff_eq!(w[1], 0.0498, epsilon = 1e-4);
        assert!(matches!(
            homogeneous_closed_form(&reg("log"), 1.0, (0, 1), &[1.0, 1.0]),
            Err(CurriculumError::UnsupportedRegularizer { .. })
        ));
    }

    #[test]
    fn affine_examples() {
        let exp = reg("exp");
        let r = affine_action(&exp, 1.0, &[1.0, -1.0], 0.0, &[2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(r.beta0, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(r.value, 2.0 * (1.0 - (-1.5f64).exp()), epsilon = 1e-10);
        let r = affine_action(&exp, 1.0, &[1.0, -1.0], 0.0, &[1.5, 1.5]).unwrap();
        assert_eq!(r.beta0, 0.0);
        assert_eq!(r.side, Side::Unaffected);
        let r = affine_action(&exp, 1.0, &[1.0, 0.0], 0.5, &[2.0, 1.0]).unwrap();
        assert_eq!(r.side, Side::Penalized);
        assert_abs_diff_eq!(r.beta0, 2.0 - 2f64.ln(), epsilon = 1e-10);
        assert!(r.residual <= 1e-10);
        assert_abs_diff_eq!(
            r.value,
            0.5 + 1.0 - (-1f64).exp() + 0.5 * (2.0 - 2f64.ln()),
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(r.value, 1.7856, epsilon = 1e-4);
    }

    #[test]
    fn group_examples() {
        let exp = reg("exp");
        assert_abs_diff_eq!(
            group_latent(&exp, 1.0, &[vec![0, 1]], &[1.0, 1.0]).unwrap(),
            2.0 * (1.0 - (-1f64).exp()),
            epsilon = 1e-15
        );
        let l = [0.3, 2.0, 0.9];
        assert_abs_diff_eq!(
            group_latent(&exp, 1.0, &[vec![0], vec![1], vec![2]], &l).unwrap(),
            exp.latent_sum(1.0, &l),
            epsilon = 1e-15
        );
        let lin = reg("linear");
        assert_abs_diff_eq!(
            group_latent(&lin, 1.0, &[vec![0, 1], vec![2]], &[0.4, 0.6, 2.0]).unwrap(),
            1.25,
            epsilon = 1e-12
        );
        assert!(matches!(
            group_latent(&lin, 1.0, &[vec![0, 1]], &[0.4, 0.6, 2.0]),
            Err(CurriculumError::BadPartition(_))
        ));
    }

    #[test]
    fn side_examples() {
        let exp = reg("exp");
        let k = [1.0, -1.0];
        assert_eq!(critical_region_side(&exp, 1.0, &k, 0.0, &[1.0, 2.0]), Side::Unaffected);
        assert_eq!(critical_region_side(&exp, 1.0, &k, 0.0, &[2.0, 1.0]), Side::Penalized);
        for x in [0.0, 0.7, 3.0] {
            assert_eq!(critical_region_side(&exp, 1.0, &k, 0.0, &[x, x]), Side::Unaffected);
        }
    }

    #[test]
    fn routed_action_matches_grid() {
        let cases: Vec<(&str, CurriculumRegion<f64>)> = vec![
            ("exp", order()),
            ("linear", order()),
            ("exp", CurriculumRegion::affine(vec![1.0, 0.0], 0.5).unwrap()),
            ("hard", order()),
            ("log", CurriculumRegion::groups(2, vec![vec![0, 1]]).unwrap()),
        ];
        for (name, region) in cases {
            let action = CurriculumAction::new(reg(name), 1.0, region.clone(), true).unwrap();
            let grid = action.clone().numeric_only();
            for l in [[2.0, 1.0], [0.5, 3.0], [0.2, 0.1]] {
                let a = action.evaluate(&l).unwrap();
                let g = grid.evaluate(&l).unwrap();
                assert!(
                    (a.value - g.value).abs() <= 1e-4,
                    "{name} {l:?}: {} vs {}",
                    a.value,
                    g.value
                );
                assert!(region.contains(&a.weights, 1e-9));
            }
        }
    }
}
