//! Alternating minimization of
//! `E(w, v; λ) = <v, l(w)> + R_SP(v, λ) + α |w|²` over the model `w` and the
//! sample weights `v ∈ Ψ ∩ [0,1]^n`.

use serde::Serialize;

use super::data::{check_labels, loss_slopes, losses_unchecked, sigmoid, Dataset, LossKind};
use super::linalg::{cholesky_solve, norm};
use super::schedule::{kumar_initial, portion_lambda, Schedule, FULL_WEIGHT};
use crate::curriculum::{constrained_weights, ConstrainedWeights, CurriculumRegion, SolverOptions};
use crate::error::{CurriculumError, TrainError};
use crate::regularizers::SPRegularizer;
use crate::scalar::{c, Scalar};

#[derive(Clone, Debug)]
pub struct TrainConfig<T: Scalar> {
    pub regularizer: SPRegularizer<T>,
    pub schedule: Schedule,
    /// Ridge coefficient `α` of `R_F(w) = α |w|²`.
    pub alpha: T,
    pub loss: LossKind,
    pub curriculum: Option<CurriculumRegion<T>>,
    pub max_inner: usize,
    /// Stop a stage once the SPL objective drops by less than this...
    pub objective_tolerance: T,
    /// ...and no weight moves by more than this.
    pub weight_tolerance: T,
    pub record_weights: bool,
}

impl<T: Scalar> TrainConfig<T> {
    pub fn new(regularizer: SPRegularizer<T>) -> Self {
        Self {
            regularizer,
            schedule: Schedule::default(),
            alpha: c(1e-3),
            loss: LossKind::Squared,
            curriculum: None,
            max_inner: 500,
            objective_tolerance: c(1e-9),
            weight_tolerance: c(1e-10),
            record_weights: false,
        }
    }

    pub fn validate(&self, data: &Dataset<T>) -> Result<(), TrainError> {
        self.schedule.validate()?;
        if !(self.alpha >= T::zero()) || !self.alpha.is_finite() {
            return Err(TrainError::BadConfig("ridge coefficient must be non-negative".into()));
        }
        if !(self.objective_tolerance > T::zero()) || !(self.weight_tolerance > T::zero()) {
            return Err(TrainError::BadConfig("tolerances must be positive".into()));
        }
        if self.max_inner == 0 {
            return Err(TrainError::BadConfig("need at least one inner iteration".into()));
        }
        if let Some(r) = &self.curriculum {
            if r.dim() != data.len() {
                return Err(TrainError::BadConfig(format!(
                    "curriculum has dimension {}, data has {} samples",
                    r.dim(),
                    data.len()
                )));
            }
        }
        check_labels(data, self.loss)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub stage: usize,
    pub lambda: f64,
    /// `E(w, v; λ)` after the model step.
    pub spl_objective: f64,
    /// `sum_i F_λ(l_i(w)) + R_F(w)`, the curriculum-adjusted latent
    /// objective when a curriculum is active.
    pub latent_objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T> {
    pub w: Vec<T>,
    pub v: Vec<T>,
    pub lambda: T,
    pub losses: Vec<T>,
    pub trace: Vec<TraceEntry>,
    pub stage_lambdas: Vec<T>,
    /// Model at the end of each stage.
    pub stage_w: Vec<Vec<T>>,
    /// Weight vectors after every weight step, when requested.
    pub weight_history: Vec<(usize, Vec<T>)>,
    /// Whether some stage stopped at the inner-iteration cap.
    pub hit_cap: bool,
}

/// Minimizer of `sum_i v_i l_i(w) + α |w|²`, warm-started from `w0` for the
/// logistic loss.
pub fn w_step<T: Scalar>(
    v: &[T],
    data: &Dataset<T>,
    loss: LossKind,
    alpha: T,
    w0: Option<&[T]>,
) -> Result<Vec<T>, TrainError> {
    if v.len() != data.len() {
        return Err(TrainError::BadConfig(
            "weight vector length differs from the sample count".into(),
        ));
    }
    match loss {
        LossKind::Squared => weighted_ridge(v, data, alpha),
        LossKind::Logistic => {
            check_labels(data, loss)?;
            logistic_newton(v, data, alpha, w0)
        }
    }
}

fn weighted_ridge<T: Scalar>(v: &[T], data: &Dataset<T>, alpha: T) -> Result<Vec<T>, TrainError> {
    let d = data.dim();
    let mut a = vec![T::zero(); d * d];
    let mut b = vec![T::zero(); d];
    for i in 0..data.len() {
        if v[i] == T::zero() {
            continue;
        }
        let x = data.row(i);
        let y = data.targets()[i];
        for p in 0..d {
            let vx = v[i] * x[p];
            b[p] += vx * y;
            for q in 0..=p {
                a[p * d + q] += vx * x[q];
            }
        }
    }
    for p in 0..d {
        for q in 0..p {
            a[q * d + p] = a[p * d + q];
        }
        a[p * d + p] += alpha;
    }
    cholesky_solve(&a, &b).ok_or(TrainError::SingularSystem)
}

fn logistic_objective<T: Scalar>(v: &[T], data: &Dataset<T>, alpha: T, w: &[T]) -> T {
    let l = losses_unchecked(w, data, LossKind::Logistic);
    v.iter().zip(&l).map(|(&vi, &li)| vi * li).sum::<T>() + alpha * w.iter().map(|&x| x * x).sum::<T>()
}

/// Damped Newton with step halving, at most 100 iterations.
fn logistic_newton<T: Scalar>(v: &[T], data: &Dataset<T>, alpha: T, w0: Option<&[T]>) -> Result<Vec<T>, TrainError> {
    let d = data.dim();
    let mut w = w0.map_or_else(|| vec![T::zero(); d], <[T]>::to_vec);
    let mut f = logistic_objective(v, data, alpha, &w);
    for _ in 0..100 {
        let slopes = loss_slopes(&w, data, LossKind::Logistic);
        let mut grad: Vec<T> = w.iter().map(|&x| x * alpha * c(2.0)).collect();
        let mut hess = vec![T::zero(); d * d];
        for i in 0..data.len() {
            if v[i] == T::zero() {
                continue;
            }
            let x = data.row(i);
            let p = sigmoid(data.targets()[i] * data.score(i, &w));
            let curv = v[i] * p * (T::one() - p);
            for a in 0..d {
                grad[a] += v[i] * slopes[i] * x[a];
                for b in 0..d {
                    hess[a * d + b] += curv * x[a] * x[b];
                }
            }
        }
        if norm(&grad) <= c(1e-8) {
            break;
        }
        for a in 0..d {
            hess[a * d + a] += alpha * c(2.0) + c(1e-12);
        }
        let step = cholesky_solve(&hess, &grad).ok_or(TrainError::SingularSystem)?;
        let mut t = T::one();
        loop {
            let trial: Vec<T> = w.iter().zip(&step).map(|(&wi, &si)| wi - t * si).collect();
            let ft = logistic_objective(v, data, alpha, &trial);
            if ft <= f || t < c(1e-10) {
                w = trial;
                f = ft;
                break;
            }
            t *= c(0.5);
        }
    }
    Ok(w)
}

/// Weight step: the exact minimizer of `<v, l> + R_SP(v, λ)` over
/// `Ψ ∩ [0,1]^n`.
pub fn v_step<T: Scalar>(
    l: &[T],
    lambda: T,
    reg: &SPRegularizer<T>,
    curriculum: Option<&CurriculumRegion<T>>,
) -> Result<ConstrainedWeights<T>, TrainError> {
    if l.iter().any(|&x| x < T::zero()) {
        return Err(TrainError::BadConfig("losses must be non-negative".into()));
    }
    constrained_weights(reg, lambda, curriculum, l, &SolverOptions::default()).map_err(|e| match e {
        CurriculumError::Infeasible | CurriculumError::EmptyFeasible => TrainError::InfeasibleCurriculum(e.to_string()),
        other => TrainError::Curriculum(other),
    })
}

fn ridge_penalty<T: Scalar>(w: &[T], alpha: T) -> T {
    alpha * w.iter().map(|&x| x * x).sum::<T>()
}

/// `sum_i v_i l_i + R_SP(v, λ) - n C(λ) + α |w|²`.
fn spl_objective<T: Scalar>(reg: &SPRegularizer<T>, lambda: T, v: &[T], l: &[T], w: &[T], alpha: T) -> T {
    crate::curriculum::solve_objective(reg, lambda, v, l) + ridge_penalty(w, alpha)
}

pub fn spl_fit<T: Scalar>(data: &Dataset<T>, config: &TrainConfig<T>) -> Result<TrainState<T>, TrainError> {
    config.validate(data)?;
    let reg = &config.regularizer;
    let region = config.curriculum.as_ref();
    let (alpha, loss) = (config.alpha, config.loss);
    let mut w = w_step(&vec![T::one(); data.len()], data, loss, alpha, None)?;
    let mut losses = losses_unchecked(&w, data, loss);
    let mut state = TrainState {
        w: w.clone(),
        v: vec![T::one(); data.len()],
        lambda: T::zero(),
        losses: losses.clone(),
        trace: Vec::new(),
        stage_lambdas: Vec::new(),
        stage_w: Vec::new(),
        weight_history: Vec::new(),
        hit_cap: false,
    };
    let mut iter = 0;
    let mut lambda = T::zero();
    for stage in 0..config.schedule.max_stages() {
        let next = match &config.schedule {
            Schedule::Fixed { lambdas } => c(lambdas[stage]),
            Schedule::Kumar { growth, .. } => {
                if stage == 0 {
                    kumar_initial(reg, &losses)?
                } else {
                    lambda * c(*growth)
                }
            }
            Schedule::Portion { fractions } => portion_lambda(reg, &losses, fractions[stage])?,
        };
        lambda = next.max(lambda);
        state.stage_lambdas.push(lambda);

        let mut step = v_step(&losses, lambda, reg, region)?;
        let mut v = step.weights;
        let latent0 = step.value + ridge_penalty(&w, alpha);
        state.trace.push(TraceEntry {
            iter,
            stage,
            lambda: lambda.as_f64(),
            spl_objective: latent0.as_f64(),
            latent_objective: latent0.as_f64(),
        });
        if config.record_weights {
            state.weight_history.push((stage, v.clone()));
        }
        let mut previous = latent0;
        let mut converged = false;
        for _ in 0..config.max_inner {
            iter += 1;
            w = w_step(&v, data, loss, alpha, Some(&w))?;
            losses = losses_unchecked(&w, data, loss);
            let spl = spl_objective(reg, lambda, &v, &losses, &w, alpha);
            step = v_step(&losses, lambda, reg, region)?;
            let latent = step.value + ridge_penalty(&w, alpha);
            state.trace.push(TraceEntry {
                iter,
                stage,
                lambda: lambda.as_f64(),
                spl_objective: spl.as_f64(),
                latent_objective: latent.as_f64(),
            });
            let moved = v
                .iter()
                .zip(&step.weights)
                .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
            v = step.weights;
            if config.record_weights {
                state.weight_history.push((stage, v.clone()));
            }
            let decrease = previous - spl;
            previous = latent;
            if decrease < config.objective_tolerance && moved <= config.weight_tolerance {
                converged = true;
                break;
            }
        }
        state.hit_cap |= !converged;
        state.stage_w.push(w.clone());
        state.v = v;
        if let Schedule::Kumar { .. } = config.schedule {
            if state.v.iter().all(|&x| x >= c(FULL_WEIGHT)) {
                break;
            }
        }
    }
    state.w = w;
    state.losses = losses;
    state.lambda = lambda;
    Ok(state)
}

/// `∇G(w) = sum_i v_i(w) ∇l_i(w) + 2 α w`, with `v(w)` the (constrained)
/// weight step at the current losses.
pub fn latent_gradient<T: Scalar>(
    data: &Dataset<T>,
    w: &[T],
    lambda: T,
    reg: &SPRegularizer<T>,
    curriculum: Option<&CurriculumRegion<T>>,
    alpha: T,
    loss: LossKind,
) -> Result<Vec<T>, TrainError> {
    let l = losses_unchecked(w, data, loss);
    let v = v_step(&l, lambda, reg, curriculum)?.weights;
    let slopes = loss_slopes(w, data, loss);
    let mut grad: Vec<T> = w.iter().map(|&x| x * alpha * c(2.0)).collect();
    for i in 0..data.len() {
        let coef = v[i] * slopes[i];
        for (g, &x) in grad.iter_mut().zip(data.row(i)) {
            *g += coef * x;
        }
    }
    Ok(grad)
}

/// `G(w) = sum_i F_λ(l_i(w)) + α |w|²`.
pub fn latent_objective<T: Scalar>(
    data: &Dataset<T>,
    w: &[T],
    lambda: T,
    reg: &SPRegularizer<T>,
    curriculum: Option<&CurriculumRegion<T>>,
    alpha: T,
    loss: LossKind,
) -> Result<T, TrainError> {
    let l = losses_unchecked(w, data, loss);
    Ok(v_step(&l, lambda, reg, curriculum)?.value + ridge_penalty(w, alpha))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentResult<T> {
    pub w: Vec<T>,
    pub objective: T,
    pub gradient_norm: T,
    pub iterations: usize,
}

/// Gradient descent on `G` at a fixed age with Barzilai-Borwein steps and an
/// Armijo safeguard.
pub fn latent_descent_fit<T: Scalar>(
    data: &Dataset<T>,
    config: &TrainConfig<T>,
    lambda: T,
    w0: Option<&[T]>,
    max_iter: usize,
    gradient_tolerance: T,
) -> Result<DescentResult<T>, TrainError> {
    config.validate(data)?;
    let (reg, region, alpha, loss) = (
        &config.regularizer,
        config.curriculum.as_ref(),
        config.alpha,
        config.loss,
    );
    let objective = |w: &[T]| latent_objective(data, w, lambda, reg, region, alpha, loss);
    let gradient = |w: &[T]| latent_gradient(data, w, lambda, reg, region, alpha, loss);
    let mut w = match w0 {
        Some(w0) => w0.to_vec(),
        None => w_step(&vec![T::one(); data.len()], data, loss, alpha, None)?,
    };
    let mut f = objective(&w)?;
    let mut g = gradient(&w)?;
    let mut step = T::one() / (T::one() + norm(&g));
    let mut iterations = 0;
    while iterations < max_iter && norm(&g) > gradient_tolerance {
        iterations += 1;
        let gg = g.iter().map(|&x| x * x).sum::<T>();
        let mut t = step;
        let (w_new, f_new) = loop {
            let trial: Vec<T> = w.iter().zip(&g).map(|(&wi, &gi)| wi - t * gi).collect();
            let ft = objective(&trial)?;
            if ft <= f - c::<T>(1e-4) * t * gg || t < c(1e-20) {
                break (trial, ft);
            }
            t *= c(0.5);
        };
        let g_new = gradient(&w_new)?;
        let s: Vec<T> = w_new.iter().zip(&w).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = s.iter().zip(&y).map(|(&a, &b)| a * b).sum::<T>();
        let ss = s.iter().map(|&a| a * a).sum::<T>();
        step = if sy > T::zero() { ss / sy } else { t * c(2.0) };
        w = w_new;
        f = f_new;
        g = g_new;
    }
    Ok(DescentResult {
        gradient_norm: norm(&g),
        w,
        objective: f,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizers::by_name;
    use approx::assert_abs_diff_eq;

    fn line(xs: &[f64], ys: &[f64]) -> Dataset<f64> {
        Dataset::new(xs.to_vec(), ys.to_vec(), 1).unwrap()
    }

    #[test]
    fn weighted_mean_example() {
        let data = line(&[1.0, 1.0], &[0.0, 2.0]);
        let w = w_step(&[1.0, 0.25], &data, LossKind::Squared, 0.0, None).unwrap();
        assert_abs_diff_eq!(w[0], 0.4, epsilon = 1e-14);
    }

    #[test]
    fn zero_weight_removes_sample() {
        let data = Dataset::from_rows(
            &[vec![1.0, 0.5], vec![0.3, -1.0], vec![2.0, 1.0], vec![-0.7, 0.2]],
            vec![1.0, -2.0, 30.0, 0.4],
        )
        .unwrap();
        let with = w_step(&[1.0, 1.0, 0.0, 1.0], &data, LossKind::Squared, 0.1, None).unwrap();
        let without = w_step(&[1.0; 3], &data.without(&[2]).unwrap(), LossKind::Squared, 0.1, None).unwrap();
        for (a, b) in with.iter().zip(&without) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn singular_without_ridge() {
        let data = Dataset::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]], vec![1.0, 2.0]).unwrap();
        assert_eq!(
            w_step(&[1.0, 1.0], &data, LossKind::Squared, 0.0, None),
            Err(TrainError::SingularSystem)
        );
    }

    #[test]
    fn logistic_step_reaches_stationarity() {
        let data = Dataset::from_rows(
            &[vec![1.0, 0.2], vec![-0.5, 1.0], vec![0.3, -0.8], vec![-1.2, -0.1]],
            vec![1.0, -1.0, 1.0, 1.0],
        )
        .unwrap();
        let v = [1.0, 0.5, 1.0, 0.8];
        let w = w_step(&v, &data, LossKind::Logistic, 0.1, None).unwrap();
        let slopes = loss_slopes(&w, &data, LossKind::Logistic);
        let mut grad: Vec<f64> = w.iter().map(|x| 0.2 * x).collect();
        for i in 0..4 {
            for a in 0..2 {
                grad[a] += v[i] * slopes[i] * data.row(i)[a];
            }
        }
        assert!(norm(&grad) <= 1e-8);
    }

    #[test]
    fn v_step_examples() {
        let exp = by_name::<f64>("exp").unwrap();
        let order = CurriculumRegion::pairwise_order(2, 0, 1).unwrap();
        let v = v_step(&[2.0, 1.0], 1.0, &exp, Some(&order)).unwrap().weights;
        assert_abs_diff_eq!(v[0], (-1.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], (-1.5f64).exp(), epsilon = 1e-15);
        let hard = by_name::<f64>("hard").unwrap();
        assert_eq!(v_step(&[0.5, 3.0], 1.0, &hard, None).unwrap().weights, vec![1.0, 0.0]);
    }

    #[test]
    fn all_included_equals_ridge() {
        let data = line(&[1.0, 2.0, 3.0, 4.0], &[1.1, 1.9, 3.2, 3.9]);
        let mut config = TrainConfig::new(by_name("hard").unwrap());
        config.schedule = Schedule::Fixed { lambdas: vec![100.0] };
        let state = spl_fit(&data, &config).unwrap();
        let ridge = w_step(&[1.0; 4], &data, LossKind::Squared, config.alpha, None).unwrap();
        assert_eq!(state.v, vec![1.0; 4]);
        assert_abs_diff_eq!(state.w[0], ridge[0], epsilon = 1e-14);
    }

    #[test]
    fn gross_outlier_is_screened() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.0, 2.1, 2.9, 4.0, 40.0];
        let data = line(&xs, &ys);
        let mut config = TrainConfig::new(by_name("hard").unwrap());
        config.schedule = Schedule::Fixed { lambdas: vec![100.0] };
        let state = spl_fit(&data, &config).unwrap();
        assert_eq!(state.v[4], 0.0);
        let clean = w_step(
            &[1.0; 4],
            &data.without(&[4]).unwrap(),
            LossKind::Squared,
            config.alpha,
            None,
        )
        .unwrap();
        assert_abs_diff_eq!(state.w[0], clean[0], epsilon = 1e-12);
    }

    #[test]
    fn order_curriculum_keeps_outlier_weight() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.0, 2.1, 2.9, 4.0, 12.0];
        let data = line(&xs, &ys);
        let mut config = TrainConfig::new(by_name("exp").unwrap());
        config.schedule = Schedule::Fixed { lambdas: vec![0.5] };
        let free = spl_fit(&data, &config).unwrap();
        config.curriculum = Some(CurriculumRegion::pairwise_order(5, 4, 0).unwrap());
        let ordered = spl_fit(&data, &config).unwrap();
        assert!(ordered.v[4] >= ordered.v[0] - 1e-15);
        assert!(ordered.v[4] > free.v[4]);
        assert!((ordered.w[0] - free.w[0]).abs() > 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = Dataset::from_rows(
            &[vec![1.0, 0.2], vec![-0.5, 1.0], vec![0.3, -0.8], vec![-1.2, -0.1]],
            vec![1.0, -1.5, 0.7, 2.0],
        )
        .unwrap();
        let lin = by_name::<f64>("linear").unwrap();
        let w = [0.3, -0.4];
        let g = latent_gradient(&data, &w, 1.0, &lin, None, 0.1, LossKind::Squared).unwrap();
        let h = 1e-6;
        for a in 0..2 {
            let mut wp = w;
            let mut wm = w;
            wp[a] += h;
            wm[a] -= h;
            let fd = (latent_objective(&data, &wp, 1.0, &lin, None, 0.1, LossKind::Squared).unwrap()
                - latent_objective(&data, &wm, 1.0, &lin, None, 0.1, LossKind::Squared).unwrap())
                / (2.0 * h);
            assert_abs_diff_eq!(g[a], fd, epsilon = 1e-5);
        }
    }

    #[test]
    fn interpolating_fit_has_zero_gradient() {
        let data = line(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
        let lin = by_name::<f64>("linear").unwrap();
        let g = latent_gradient(&data, &[2.0], 1.0, &lin, None, 0.0, LossKind::Squared).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn descent_and_alternation_agree() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let ys = [1.2, 1.8, 3.3, 3.9, 20.0, 6.1];
        let data = line(&xs, &ys);
        let mut config = TrainConfig::new(by_name("exp").unwrap());
        config.schedule = Schedule::Fixed { lambdas: vec![2.0] };
        let fit = spl_fit(&data, &config).unwrap();
        let g = latent_gradient(
            &data,
            &fit.w,
            2.0,
            &config.regularizer,
            None,
            config.alpha,
            LossKind::Squared,
        )
        .unwrap();
        assert!(norm(&g) <= 1e-6, "{g:?}");
        let descent = latent_descent_fit(&data, &config, 2.0, Some(&fit.w), 1000, 1e-9).unwrap();
        assert!(descent.gradient_norm <= 1e-6);
        assert_abs_diff_eq!(descent.w[0], fit.w[0], epsilon = 1e-6);
    }
}
