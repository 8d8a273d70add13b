//! Axiomatic checks on an SP-regularizer. Failures are reported, never thrown.

use serde::Serialize;

use super::SPRegularizer;
use crate::conjugate::concave_conjugate_fast;
use crate::sampled::{graded_grid, uniform_grid, SampledFunction};
use crate::scalar::{c, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationOptions {
    pub grid_points: usize,
    /// Age parameters for the derivative and conjugacy checks.
    pub lambdas: Vec<f64>,
    pub tolerance: f64,
    pub scaling_tolerance: f64,
    pub convexity_tolerance: f64,
    pub fd_step: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            grid_points: 2049,
            lambdas: vec![0.25, 1.0, 4.0],
            tolerance: 1e-4,
            scaling_tolerance: 1e-10,
            convexity_tolerance: 1e-9,
            fd_step: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst violation seen; 0 when nothing was violated.
    pub residual: f64,
    pub location: Option<String>,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub regularizer: String,
    pub checks: Vec<Check>,
    pub verdict: bool,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Tracks the worst residual and where it happened.
struct Worst {
    residual: f64,
    location: Option<String>,
}

impl Worst {
    fn new() -> Self {
        Self {
            residual: 0.0,
            location: None,
        }
    }

    fn record(&mut self, residual: f64, location: impl FnOnce() -> String) {
        if residual > self.residual || (residual.is_nan() && !self.residual.is_nan()) {
            self.residual = residual;
            self.location = Some(location());
        }
    }

    fn check(self, name: &str, tolerance: f64) -> Check {
        Check {
            name: name.to_string(),
            passed: self.residual <= tolerance,
            residual: self.residual,
            location: self.location,
            warning: None,
        }
    }
}

fn lattice(lo_exp: i32, hi_exp: i32) -> Vec<f64> {
    (lo_exp..=hi_exp).map(|e| 2f64.powi(e)).collect()
}

pub fn validate_sp_regularizer<T: Scalar>(reg: &SPRegularizer<T>, options: &ValidationOptions) -> ValidationReport {
    let checks = vec![
        convexity(reg, options),
        domain(reg, options),
        monotone_in_loss(reg),
        monotone_in_age(reg),
        limits(reg),
        derivative(reg, options),
        conjugacy(reg, options),
        scaling(reg, options),
    ];
    let verdict = checks.iter().all(|c| c.passed);
    ValidationReport {
        regularizer: reg.name().to_string(),
        checks,
        verdict,
    }
}

fn convexity<T: Scalar>(reg: &SPRegularizer<T>, o: &ValidationOptions) -> Check {
    let grid: Vec<T> = uniform_grid(T::zero(), T::one(), o.grid_points);
    let r: Vec<f64> = grid.iter().map(|&v| reg.r_sp_base(v).as_f64()).collect();
    let mut worst = Worst::new();
    for i in 1..grid.len() - 1 {
        if !(r[i - 1].is_finite() && r[i].is_finite() && r[i + 1].is_finite()) {
            continue;
        }
        let d2 = r[i - 1] - 2.0 * r[i] + r[i + 1];
        let violation = -d2 / (1.0 + r[i].abs());
        worst.record(violation, || format!("v = {}", grid[i]));
    }
    worst.check("convexity", o.convexity_tolerance)
}

fn domain<T: Scalar>(reg: &SPRegularizer<T>, o: &ValidationOptions) -> Check {
    let mut problems = Vec::new();
    for probe in [-1.0, -1e-3, 1.001, 2.0] {
        let r = reg.r_sp_base(c::<T>(probe));
        if !(r == T::infinity()) {
            problems.push(format!("R({probe}) = {r}, expected +inf"));
        }
    }
    let grid: Vec<T> = uniform_grid(T::zero(), T::one(), o.grid_points);
    let finite: Vec<bool> = grid.iter().map(|&v| reg.r_sp_base(v).is_finite()).collect();
    match (finite.iter().position(|&f| f), finite.iter().rposition(|&f| f)) {
        (Some(first), Some(last)) => {
            if finite[first..=last].iter().any(|f| !f) {
                problems.push("domain is not an interval".into());
            }
            if first > 1 {
                problems.push(format!(
                    "0 is not in the closure of the domain (starts at {})",
                    grid[first]
                ));
            }
            if last + 2 < grid.len() {
                problems.push(format!(
                    "1 is not in the closure of the domain (ends at {})",
                    grid[last]
                ));
            }
        }
        _ => problems.push("empty domain".into()),
    }
    Check {
        name: "domain".into(),
        passed: problems.is_empty(),
        residual: problems.len() as f64,
        location: (!problems.is_empty()).then(|| problems.join("; ")),
        warning: None,
    }
}

fn monotone_in_loss<T: Scalar>(reg: &SPRegularizer<T>) -> Check {
    let mut worst = Worst::new();
    for lambda in lattice(-3, 3) {
        let lam = c::<T>(lambda);
        let ls = uniform_grid(T::zero(), lam * c(16.0), 513);
        let mut prev: Option<f64> = None;
        for &l in &ls {
            let w = reg.weight_ext(lam, l).as_f64();
            let range = (-w).max(w - 1.0).max(0.0);
            worst.record(if w.is_nan() { f64::NAN } else { range }, || {
                format!("weight({lambda}, {l}) = {w} outside [0, 1]")
            });
            if let Some(p) = prev {
                worst.record(w - p, || format!("weight increases in l at lambda = {lambda}, l = {l}"));
            }
            prev = Some(w);
        }
    }
    worst.check("monotone_in_loss", 1e-12)
}

fn monotone_in_age<T: Scalar>(reg: &SPRegularizer<T>) -> Check {
    let mut worst = Worst::new();
    let lambdas = lattice(-3, 3);
    for l in [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let mut prev: Option<f64> = None;
        for &lambda in &lambdas {
            let w = reg.weight_ext(c::<T>(lambda), c::<T>(l)).as_f64();
            if let Some(p) = prev {
                worst.record(p - w, || {
                    format!("weight decreases in lambda at l = {l}, lambda = {lambda}")
                });
            }
            prev = Some(w);
        }
    }
    let mut check = worst.check("monotone_in_age", 1e-12);
    if !check.passed && !reg.follows_scaling() {
        check.passed = true;
        check.warning = Some("age monotonicity fails for a non-scaling regularizer".into());
    }
    check
}

fn limits<T: Scalar>(reg: &SPRegularizer<T>) -> Check {
    let large_loss = reg.weight_ext(T::one(), c(1e6)).as_f64();
    let small_age = reg.weight_ext(c(1e-6), T::one()).as_f64();
    let residual = large_loss.max(small_age);
    Check {
        name: "limits".into(),
        passed: residual <= 1e-3,
        residual,
        location: Some(format!("weight(1, 1e6) = {large_loss}, weight(1e-6, 1) = {small_age}")),
        warning: None,
    }
}

fn derivative<T: Scalar>(reg: &SPRegularizer<T>, o: &ValidationOptions) -> Check {
    let h = o.fd_step;
    let mut worst = Worst::new();
    for &lambda in &o.lambdas {
        let lam = c::<T>(lambda);
        let w = |l: f64| reg.weight_ext(lam, c(l)).as_f64();
        let f = |l: f64| reg.latent_ext(lam, c(l)).as_f64();
        let curvature_cap = 100.0 * (10.0 * h).powi(2) * (1.0 + lambda.powi(-2));
        for l in uniform_grid(20.0 * h, 8.0 * lambda, 513) {
            let (lo, mid, hi) = (w(l - 10.0 * h), w(l), w(l + 10.0 * h));
            if (hi - lo).abs() > 0.05 || (hi - 2.0 * mid + lo).abs() > curvature_cap {
                continue;
            }
            let fd = (f(l + h) - f(l - h)) / (2.0 * h);
            worst.record((fd - mid).abs(), || format!("lambda = {lambda}, l = {l}"));
        }
    }
    worst.check("derivative", o.tolerance)
}

fn conjugacy<T: Scalar>(reg: &SPRegularizer<T>, o: &ValidationOptions) -> Check {
    let mut worst = Worst::new();
    let v_grid: Vec<T> = graded_grid(T::zero(), T::one(), o.grid_points);
    for &lambda in &o.lambdas {
        let lam = c::<T>(lambda);
        let g = match SampledFunction::from_fn(v_grid.clone(), |v| -reg.r_sp(v, lam)) {
            Ok(g) => g,
            Err(e) => {
                worst.record(f64::INFINITY, || format!("lambda = {lambda}: {e}"));
                continue;
            }
        };
        let ls = uniform_grid(T::zero(), lam * c(8.0), o.grid_points);
        let conj = match concave_conjugate_fast(&g, &ls) {
            Ok(conj) => conj,
            Err(e) => {
                worst.record(f64::INFINITY, || format!("lambda = {lambda}: {e}"));
                continue;
            }
        };
        let base = conj.values()[0];
        for (&l, &value) in ls.iter().zip(conj.values()) {
            let err = (value - base - reg.latent_ext(lam, l)).abs().as_f64();
            worst.record(err, || format!("lambda = {lambda}, l = {l}"));
        }
    }
    worst.check("conjugacy", o.tolerance)
}

fn scaling<T: Scalar>(reg: &SPRegularizer<T>, o: &ValidationOptions) -> Check {
    let mut worst = Worst::new();
    for lambda in lattice(-3, 3) {
        let lam = c::<T>(lambda);
        for l in uniform_grid(0.0, 10.0, 41) {
            let lt = c::<T>(l);
            let scaled = lam * reg.latent_base(lt / lam);
            let latent_err = (reg.latent_ext(lam, lt) - scaled).abs().as_f64();
            let weight_err = (reg.weight_ext(lam, lt) - reg.weight_base(lt / lam)).abs().as_f64();
            worst.record(latent_err.max(weight_err), || format!("lambda = {lambda}, l = {l}"));
        }
    }
    let mut check = worst.check("scaling", o.scaling_tolerance);
    if !check.passed && !reg.follows_scaling() {
        check.passed = true;
        check.warning = Some("regularizer opts out of the scaling rule".into());
    }
    check
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizers::{by_name, catalog, CatalogKind};

    #[test]
    fn catalog_entries_pass() {
        let opts = ValidationOptions::default();
        for reg in catalog::<f64>() {
            let report = validate_sp_regularizer(&reg, &opts);
            assert!(
                report.verdict,
                "{}: {:?}",
                reg.name(),
                report.failed().collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn linear_residuals_are_small() {
        let report = validate_sp_regularizer(&CatalogKind::Linear.regularizer::<f64>(), &ValidationOptions::default());
        for check in &report.checks {
            if check.name != "domain" && check.name != "limits" {
                assert!(check.residual <= 1e-5, "{check:?}");
            }
        }
    }

    #[test]
    fn increasing_linear_penalty_is_valid() {
        let reg = SPRegularizer::<f64>::from_closures(
            "increasing",
            |v| if (0.0..=1.0).contains(&v) { v } else { f64::INFINITY },
            |_| 0.0,
            |_| 0.0,
        );
        let report = validate_sp_regularizer(&reg, &ValidationOptions::default());
        assert!(report.verdict, "{:?}", report.failed().collect::<Vec<_>>());
    }

    #[test]
    fn squared_weight_fails_derivative_check() {
        let lin = by_name::<f64>("linear").unwrap();
        let (a, b) = (lin.clone(), lin.clone());
        let broken = SPRegularizer::from_closures(
            "broken",
            move |v| a.r_sp_base(v),
            move |l| b.weight_base(l).powi(2),
            move |l| lin.latent_base(l),
        );
        let report = validate_sp_regularizer(&broken, &ValidationOptions::default());
        assert!(!report.verdict);
        assert!(!report.check("derivative").unwrap().passed);
    }
}
