//! Self-paced regularizers.
//!
//! An SP-regularizer is the consistent triple of the penalty `R_SP(v, λ)` on
//! a sample weight, the weight function `v(λ, l)` minimizing
//! `v l + R_SP(v, λ)` over `[0, 1]`, and the latent objective
//! `F_λ(l) = ∫_0^l v(λ, j) dj`, normalized so that `F_λ(0) = 0`. By default
//! the age parameter acts by scaling:
//!
//! ```text
//! R_SP(v, λ) = λ R(v)      v(λ, l) = v(l / λ)      F_λ(l) = λ F(l / λ)
//! ```

mod catalog;
mod design;
mod validate;

use std::fmt;
use std::sync::Arc;

pub use catalog::{by_name, catalog, CatalogKind, Exp, Hard, Linear, Log, LOG_CLIP};
pub use design::{design_from_regularizer, design_from_weight, DesignOptions, Designed};
pub use validate::{validate_sp_regularizer, Check, ValidationOptions, ValidationReport};

use crate::error::RegularizerError;
use crate::scalar::Scalar;

/// Base shape of a regularizer at `λ = 1`.
///
/// `weight_base` and `latent_base` are defined on the whole real line (the
/// concave conjugate is finite everywhere for a box-bounded domain), which
/// the curriculum routines rely on when they move along rays that leave the
/// non-negative orthant.
pub trait RegularizerForm<T: Scalar>: Send + Sync {
    /// `R(v)`, `+inf` outside the domain.
    fn r_sp_base(&self, v: T) -> T;
    fn weight_base(&self, l: T) -> T;
    /// Normalized latent objective, `latent_base(0) = 0`.
    fn latent_base(&self, l: T) -> T;

    /// Whether `R` is strictly convex on the interior of its domain, which
    /// makes the weight function single-valued and continuous.
    fn strictly_convex(&self) -> bool {
        false
    }

    fn r_sp(&self, v: T, lambda: T) -> T {
        let r = self.r_sp_base(v);
        if r.is_finite() {
            lambda * r
        } else {
            r
        }
    }

    fn weight(&self, lambda: T, l: T) -> T {
        self.weight_base(l / lambda)
    }

    fn latent(&self, lambda: T, l: T) -> T {
        lambda * self.latent_base(l / lambda)
    }

    /// `false` for forms whose age dependence is not the scaling rule above;
    /// validation then only warns about scaling and age monotonicity.
    fn follows_scaling(&self) -> bool {
        true
    }
}

/// A named SP-regularizer. Cheap to clone and immutable.
#[derive(Clone)]
pub struct SPRegularizer<T: Scalar> {
    name: String,
    kind: Option<CatalogKind>,
    form: Arc<dyn RegularizerForm<T>>,
}

impl<T: Scalar> fmt::Debug for SPRegularizer<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SPRegularizer")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .finish()
    }
}

impl<T: Scalar> SPRegularizer<T> {
    pub fn from_form(name: impl Into<String>, form: impl RegularizerForm<T> + 'static) -> Self {
        Self {
            name: name.into(),
            kind: None,
            form: Arc::new(form),
        }
    }

    pub(crate) fn catalog_entry(kind: CatalogKind, form: Arc<dyn RegularizerForm<T>>) -> Self {
        Self {
            name: kind.name().to_string(),
            kind: Some(kind),
            form,
        }
    }

    /// Builds a regularizer from three base closures. Nothing checks their
    /// mutual consistency; run [`validate_sp_regularizer`] for that.
    pub fn from_closures<R, W, F>(name: impl Into<String>, r_sp_base: R, weight_base: W, latent_base: F) -> Self
    where
        R: Fn(T) -> T + Send + Sync + 'static,
        W: Fn(T) -> T + Send + Sync + 'static,
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        Self::from_form(
            name,
            ClosureForm {
                r: Box::new(r_sp_base),
                w: Box::new(weight_base),
                f: Box::new(latent_base),
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> Option<CatalogKind> {
        self.kind
    }

    pub fn strictly_convex(&self) -> bool {
        self.form.strictly_convex()
    }

    pub fn follows_scaling(&self) -> bool {
        self.form.follows_scaling()
    }

    pub fn r_sp_base(&self, v: T) -> T {
        self.form.r_sp_base(v)
    }

    pub fn weight_base(&self, l: T) -> T {
        self.form.weight_base(l)
    }

    pub fn latent_base(&self, l: T) -> T {
        self.form.latent_base(l)
    }

    /// `R_SP(v, λ)`; `+inf` outside the domain.
    pub fn r_sp(&self, v: T, lambda: T) -> T {
        self.form.r_sp(v, lambda)
    }

    /// `F_λ(l)` for `λ > 0`, `l >= 0`.
    pub fn latent(&self, lambda: T, l: T) -> Result<T, RegularizerError> {
        check_args(lambda, l)?;
        Ok(self.form.latent(lambda, l))
    }

    /// `v(λ, l)` for `λ > 0`, `l >= 0`.
    pub fn weight(&self, lambda: T, l: T) -> Result<T, RegularizerError> {
        check_args(lambda, l)?;
        Ok(self.form.weight(lambda, l))
    }

    /// Latent objective at any real loss. `lambda` must be positive.
    pub fn latent_ext(&self, lambda: T, l: T) -> T {
        self.form.latent(lambda, l)
    }

    /// Weight at any real loss. `lambda` must be positive.
    pub fn weight_ext(&self, lambda: T, l: T) -> T {
        self.form.weight(lambda, l)
    }

    /// Sum of `F_λ(l_i)`.
    pub fn latent_sum(&self, lambda: T, losses: &[T]) -> T {
        losses.iter().map(|&l| self.latent_ext(lambda, l)).sum()
    }

    /// `inf_{v in [0,1]} v l + R_SP(v, λ)` minus `latent`: the additive
    /// constant removed by the `F_λ(0) = 0` normalization.
    pub fn normalization_offset(&self, lambda: T) -> T {
        let v = self.weight_ext(lambda, T::zero());
        self.r_sp(v, lambda)
    }
}

fn check_args<T: Scalar>(lambda: T, l: T) -> Result<(), RegularizerError> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(RegularizerError::BadParam(format!(
            "age parameter must be positive and finite, got {lambda}"
        )));
    }
    if !(l >= T::zero()) || !l.is_finite() {
        return Err(RegularizerError::BadParam(format!(
            "loss must be non-negative and finite, got {l}"
        )));
    }
    Ok(())
}

type BaseFn<T> = Box<dyn Fn(T) -> T + Send + Sync>;

struct ClosureForm<T> {
    r: BaseFn<T>,
    w: BaseFn<T>,
    f: BaseFn<T>,
}

impl<T: Scalar> RegularizerForm<T> for ClosureForm<T> {
    fn r_sp_base(&self, v: T) -> T {
        (self.r)(v)
    }
    fn weight_base(&self, l: T) -> T {
        (self.w)(l)
    }
    fn latent_base(&self, l: T) -> T {
        (self.f)(l)
    }
}
