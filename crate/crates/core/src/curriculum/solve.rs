//! Exact constrained weight step `argmin_{v in Ψ ∩ [0,1]^n} <v, l> + R_SP(v, λ)`.

use serde::Serialize;

use super::region::{CurriculumRegion, RegionKind};
use crate::conjugate::{dot, Halfspace};
use crate::error::CurriculumError;
use crate::regularizers::SPRegularizer;
use crate::scalar::{c, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Elementwise,
    GroupMeans,
    /// Pool-adjacent-violators along chains of pairwise orders.
    Chains,
    /// Coordinate ascent on the halfspace multipliers.
    DualAscent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_sweeps: usize,
    pub kkt_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 20_000,
            kkt_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedWeights<T> {
    pub weights: Vec<T>,
    /// Normalized constrained latent value `F_new(l)`.
    pub value: T,
    pub method: SolveMethod,
    /// Worst primal infeasibility or complementarity gap; 0 for the direct
    /// methods.
    pub kkt_residual: T,
    pub sweeps: usize,
}

pub fn constrained_weights<T: Scalar>(
    reg: &SPRegularizer<T>,
    lambda: T,
    region: Option<&CurriculumRegion<T>>,
    l: &[T],
    options: &SolverOptions,
) -> Result<ConstrainedWeights<T>, CurriculumError> {
    if let Some(r) = region {
        if r.dim() != l.len() {
            return Err(CurriculumError::DimensionMismatch {
                expected: r.dim(),
                found: l.len(),
            });
        }
    }
    if !(lambda > T::zero()) || l.iter().any(|x| !x.is_finite()) {
        return Err(CurriculumError::Regularizer(crate::error::RegularizerError::BadParam(
            "age parameter must be positive and losses finite".into(),
        )));
    }
    let (weights, method, kkt_residual, sweeps) = match region.map(|r| r.kind()) {
        None => (elementwise(reg, lambda, l), SolveMethod::Elementwise, T::zero(), 0),
        Some(RegionKind::Groups(p)) => (group_means(reg, lambda, p, l), SolveMethod::GroupMeans, T::zero(), 0),
        Some(_) => {
            let hs = region.unwrap().halfspaces();
            if hs.is_empty() {
                (elementwise(reg, lambda, l), SolveMethod::Elementwise, T::zero(), 0)
            } else if let Some(chains) = as_chains(l.len(), hs) {
                (pav_chains(reg, lambda, &chains, l), SolveMethod::Chains, T::zero(), 0)
            } else {
                if !reg.strictly_convex() {
                    return Err(CurriculumError::UnsupportedRegularizer {
                        required: "a strictly convex regularizer for general halfspace constraints".into(),
                        found: reg.name().to_string(),
                    });
                }
                let (w, kkt, sweeps) = dual_ascent(reg, lambda, hs, l, options)?;
                (w, SolveMethod::DualAscent, kkt, sweeps)
            }
        }
    };
    let value = objective(reg, lambda, &weights, l);
    Ok(ConstrainedWeights {
        weights,
        value,
        method,
        kkt_residual,
        sweeps,
    })
}

/// `<v, l> + R_SP(v, λ)` minus the normalization constant of each coordinate.
pub(crate) fn objective<T: Scalar>(reg: &SPRegularizer<T>, lambda: T, v: &[T], l: &[T]) -> T {
    let offset = reg.normalization_offset(lambda);
    v.iter()
        .zip(l)
        .map(|(&vi, &li)| vi * li + reg.r_sp(vi, lambda) - offset)
        .sum()
}

fn elementwise<T: Scalar>(reg: &SPRegularizer<T>, lambda: T, l: &[T]) -> Vec<T> {
    l.iter().map(|&li| reg.weight_ext(lambda, li)).collect()
}

fn group_means<T: Scalar>(reg: &SPRegularizer<T>, lambda: T, partition: &[Vec<usize>], l: &[T]) -> Vec<T> {
    let mut v = vec![T::zero(); l.len()];
    for g in partition {
        let mean = g.iter().map(|&i| l[i]).sum::<T>() / T::from_usize(g.len()).unwrap();
        let w = reg.weight_ext(lambda, mean);
        for &i in g {
            v[i] = w;
        }
    }
    v
}

/// Splits pairwise orders `v_i >= v_j` into disjoint chains. `None` when the
/// constraints are not all pairwise orders or do not form simple paths.
fn as_chains<T: Scalar>(n: usize, hs: &[Halfspace<T>]) -> Option<Vec<Vec<usize>>> {
    let mut next = vec![None; n];
    let mut has_prev = vec![false; n];
    for h in hs {
        let (i, j) = h.as_pairwise_order()?;
        if next[i].is_some() || has_prev[j] {
            return None;
        }
        next[i] = Some(j);
        has_prev[j] = true;
    }
    let mut chains = Vec::new();
    let mut visited = 0;
    for start in (0..n).filter(|&i| !has_prev[i]) {
        let mut chain = vec![start];
        let mut at = start;
        while let Some(j) = next[at] {
            chain.push(j);
            at = j;
        }
        visited += chain.len();
        chains.push(chain);
    }
    // anything unvisited sits on a cycle
    (visited == n).then_some(chains)
}

/// Weights non-increasing along each chain. A pooled block takes the weight
/// of its mean loss.
fn pav_chains<T: Scalar>(reg: &SPRegularizer<T>, lambda: T, chains: &[Vec<usize>], l: &[T]) -> Vec<T> {
    let mut v = vec![T::zero(); l.len()];
    for chain in chains {
        // (loss sum, count)
        let mut blocks: Vec<(T, usize)> = Vec::with_capacity(chain.len());
        for &i in chain {
            blocks.push((l[i], 1));
            while blocks.len() >= 2 {
                let (s2, n2) = blocks[blocks.len() - 1];
                let (s1, n1) = blocks[blocks.len() - 2];
                if s1 * T::from_usize(n2).unwrap() > s2 * T::from_usize(n1).unwrap() {
                    blocks.pop();
                    *blocks.last_mut().unwrap() = (s1 + s2, n1 + n2);
                } else {
                    break;
                }
            }
        }
        let mut pos = 0;
        for (sum, count) in blocks {
            let w = reg.weight_ext(lambda, sum / T::from_usize(count).unwrap());
            for &i in &chain[pos..pos + count] {
                v[i] = w;
            }
            pos += count;
        }
    }
    v
}

/// Maximizes the dual `sum_i F(l_i - (K^T μ)_i) + μ.b` over `μ >= 0` one
/// multiplier at a time. Each coordinate update solves
/// `k_m . v(l - K^T μ) = b_m` by bisection.
fn dual_ascent<T: Scalar>(
    reg: &SPRegularizer<T>,
    lambda: T,
    hs: &[Halfspace<T>],
    l: &[T],
    options: &SolverOptions,
) -> Result<(Vec<T>, T, usize), CurriculumError> {
    let n = l.len();
    let m = hs.len();
    let mut mu = vec![T::zero(); m];
    let mut shift = vec![T::zero(); n];
    let weights = |shift: &[T]| -> Vec<T> {
        l.iter()
            .zip(shift)
            .map(|(&li, &si)| reg.weight_ext(lambda, li - si))
            .collect()
    };
    let tol = c::<T>(options.kkt_tolerance);
    let mu_cap = c::<T>(1e12) * (lambda + T::one());
    let mut sweeps = 0;
    let mut kkt = T::infinity();
    let mut v = weights(&shift);
    while sweeps < options.max_sweeps {
        sweeps += 1;
        for (idx, h) in hs.iter().enumerate() {
            let k = h.direction();
            let b = h.offset();
            // base shift without this multiplier
            for (s, &ki) in shift.iter_mut().zip(k) {
                *s -= mu[idx] * ki;
            }
            let gap = |t: T, shift: &[T]| -> T {
                let mut acc = T::zero();
                for i in 0..n {
                    if k[i] != T::zero() {
                        acc += k[i] * reg.weight_ext(lambda, l[i] - shift[i] - t * k[i]);
                    }
                }
                b - acc
            };
            let new_mu = if gap(T::zero(), &shift) <= T::zero() {
                T::zero()
            } else {
                let mut hi = (mu[idx] * c(2.0)).max(lambda);
                while gap(hi, &shift) > T::zero() {
                    hi *= c(4.0);
                    if hi > mu_cap {
                        return Err(CurriculumError::Infeasible);
                    }
                }
                let mut lo = T::zero();
                for _ in 0..200 {
                    let mid = (lo + hi) * c(0.5);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if gap(mid, &shift) > T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            };
            mu[idx] = new_mu;
            for (s, &ki) in shift.iter_mut().zip(k) {
                *s += new_mu * ki;
            }
        }
        v = weights(&shift);
        kkt = hs
            .iter()
            .zip(&mu)
            .map(|(h, &mu_m)| {
                let slack = dot(&v, h.direction()) - h.offset();
                (-slack).max(T::zero()).max((mu_m * slack).abs())
            })
            .fold(T::zero(), T::max);
        if kkt <= tol {
            break;
        }
    }
    Ok((v, kkt, sweeps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizers::by_name;
    use approx::assert_abs_diff_eq;

    fn reg(name: &str) -> SPRegularizer<f64> {
        by_name(name).unwrap()
    }

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn pooled_exp_pair() {
        let region = CurriculumRegion::pairwise_order(2, 0, 1).unwrap();
        let res = constrained_weights(&reg("exp"), 1.0, Some(&region), &[2.0, 1.0], &opts()).unwrap();
        assert_eq!(res.method, SolveMethod::Chains);
        let e = (-1.5f64).exp();
        assert_abs_diff_eq!(res.weights[0], e, epsilon = 1e-15);
        assert_abs_diff_eq!(res.weights[1], e, epsilon = 1e-15);
        assert_abs_diff_eq!(res.value, 2.0 * (1.0 - e), epsilon = 1e-12);
    }

    #[test]
    fn hard_screening_without_curriculum() {
        let res = constrained_weights(&reg("hard"), 1.0, None, &[0.5, 3.0], &opts()).unwrap();
        assert_eq!(res.weights, vec![1.0, 0.0]);
    }

    #[test]
    fn group_mean_weights() {
        let region = CurriculumRegion::groups(2, vec![vec![0, 1]]).unwrap();
        let res = constrained_weights(&reg("exp"), 1.0, Some(&region), &[1.0, 1.0], &opts()).unwrap();
        assert_abs_diff_eq!(res.weights[0], (-1f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(res.weights[1], (-1f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn dual_ascent_matches_chain_solution() {
        let l = [3.0, 1.0, 0.5, 2.0];
        let chain = CurriculumRegion::intersection(
            4,
            vec![
                Halfspace::pairwise_order(4, 0, 1).unwrap(),
                Halfspace::pairwise_order(4, 1, 2).unwrap(),
            ],
        )
        .unwrap();
        let direct = constrained_weights(&reg("exp"), 1.0, Some(&chain), &l, &opts()).unwrap();
        assert_eq!(direct.method, SolveMethod::Chains);
        // same order written as v_0 - v_2 >= 0 and 2 v_1 - 2 v_2 >= 0 plus the chain
        let tangled = CurriculumRegion::intersection(
            4,
            vec![
                Halfspace::pairwise_order(4, 0, 1).unwrap(),
                Halfspace::homogeneous(vec![0.0, 2.0, -2.0, 0.0]).unwrap(),
                Halfspace::pairwise_order(4, 0, 2).unwrap(),
            ],
        )
        .unwrap();
        let dual = constrained_weights(&reg("exp"), 1.0, Some(&tangled), &l, &opts()).unwrap();
        assert_eq!(dual.method, SolveMethod::DualAscent);
        assert!(dual.kkt_residual <= 1e-8);
        for (a, b) in direct.weights.iter().zip(&dual.weights) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn affine_halfspace_by_dual_ascent() {
        let region = CurriculumRegion::affine(vec![1.0, 0.0], 0.5).unwrap();
        let res = constrained_weights(&reg("exp"), 1.0, Some(&region), &[2.0, 1.0], &opts()).unwrap();
        assert_abs_diff_eq!(res.weights[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(
            res.value,
            0.5 + (1.0 - (-1f64).exp()) + 0.5 * (2.0 - 2f64.ln()),
            epsilon = 1e-9
        );
    }

    #[test]
    fn infeasible_and_unsupported() {
        let region = CurriculumRegion::affine(vec![1.0, 1.0], 3.0).unwrap();
        assert_eq!(
            constrained_weights(&reg("exp"), 1.0, Some(&region), &[1.0, 1.0], &opts()),
            Err(CurriculumError::Infeasible)
        );
        let region = CurriculumRegion::affine(vec![1.0, 1.0], 1.0).unwrap();
        assert!(matches!(
            constrained_weights(&reg("hard"), 1.0, Some(&region), &[1.0, 1.0], &opts()),
            Err(CurriculumError::UnsupportedRegularizer { .. })
        ));
    }

    #[test]
    fn hard_chain_orders_screening() {
        let region = CurriculumRegion::pairwise_order(2, 0, 1).unwrap();
        // sample 0 is hard, sample 1 easy: pooled mean 1.5 is above λ = 1
        let res = constrained_weights(&reg("hard"), 1.0, Some(&region), &[2.5, 0.5], &opts()).unwrap();
        assert_eq!(res.weights, vec![0.0, 0.0]);
        let res = constrained_weights(&reg("hard"), 2.0, Some(&region), &[2.5, 0.5], &opts()).unwrap();
        assert_eq!(res.weights, vec![1.0, 1.0]);
    }
}
