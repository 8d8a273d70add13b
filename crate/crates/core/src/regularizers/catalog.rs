//! Closed-form catalog entries.
//!
//! | name   | R(v)              | v(l)             | F(l), l >= 0        |
//! |--------|-------------------|------------------|---------------------|
//! | hard   | -v                | 1 if l < 1 else 0| min(l, 1)           |
//! | linear | (1 - v)^2 / 2     | (1 - l)_+        | min(l - l^2/2, 1/2) |
//! | log    | -log v            | min(1, 1/l)      | l, or 1 + log l     |
//! | exp    | v log v - v + 1   | e^{-l}           | 1 - e^{-l}          |
//!
//! `hard` is the classical hard-threshold penalty `-λ v`; `linear` is the
//! quadratic penalty whose weights fall linearly over `(0, λ)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{RegularizerForm, SPRegularizer};
use crate::error::RegularizerError;
use crate::scalar::{c, Scalar};

/// `-log v` is clipped at this weight so it stays finite at `v = 0`.
pub const LOG_CLIP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogKind {
    Hard,
    Linear,
    Log,
    Exp,
}

impl CatalogKind {
    pub const ALL: [CatalogKind; 4] = [Self::Hard, Self::Linear, Self::Log, Self::Exp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Hard => "hard",
            Self::Linear => "linear",
            Self::Log => "log",
            Self::Exp => "exp",
        }
    }

    pub fn regularizer<T: Scalar>(self) -> SPRegularizer<T> {
        let form: Arc<dyn RegularizerForm<T>> = match self {
            Self::Hard => Arc::new(Hard),
            Self::Linear => Arc::new(Linear),
            Self::Log => Arc::new(Log),
            Self::Exp => Arc::new(Exp),
        };
        SPRegularizer::catalog_entry(self, form)
    }
}

pub fn catalog<T: Scalar>() -> Vec<SPRegularizer<T>> {
    CatalogKind::ALL.iter().map(|k| k.regularizer()).collect()
}

pub fn by_name<T: Scalar>(name: &str) -> Result<SPRegularizer<T>, RegularizerError> {
    let lower = name.to_ascii_lowercase();
    CatalogKind::ALL
        .iter()
        .find(|k| k.name() == lower)
        .map(|k| k.regularizer())
        .ok_or_else(|| RegularizerError::Unknown(name.to_string()))
}

fn in_unit<T: Scalar>(v: T) -> bool {
    v >= T::zero() && v <= T::one()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Hard;

impl<T: Scalar> RegularizerForm<T> for Hard {
    fn r_sp_base(&self, v: T) -> T {
        if in_unit(v) {
            -v
        } else {
            T::infinity()
        }
    }

    fn weight_base(&self, l: T) -> T {
        if l < T::one() {
            T::one()
        } else {
            T::zero()
        }
    }

    fn latent_base(&self, l: T) -> T {
        l.min(T::one())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Linear;

impl<T: Scalar> RegularizerForm<T> for Linear {
    fn r_sp_base(&self, v: T) -> T {
        if in_unit(v) {
            let d = T::one() - v;
            d * d * c(0.5)
        } else {
            T::infinity()
        }
    }

    fn weight_base(&self, l: T) -> T {
        (T::one() - l).max(T::zero()).min(T::one())
    }

    fn latent_base(&self, l: T) -> T {
        if l <= T::zero() {
            l
        } else if l < T::one() {
            l - l * l * c(0.5)
        } else {
            c(0.5)
        }
    }

    fn strictly_convex(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Log;

impl<T: Scalar> RegularizerForm<T> for Log {
    fn r_sp_base(&self, v: T) -> T {
        if in_unit(v) {
            -(v.max(c(LOG_CLIP))).ln()
        } else {
            T::infinity()
        }
    }

    fn weight_base(&self, l: T) -> T {
        if l <= T::one() {
            T::one()
        } else {
            l.recip()
        }
    }

    fn latent_base(&self, l: T) -> T {
        if l <= T::one() {
            l
        } else {
            T::one() + l.ln()
        }
    }

    fn strictly_convex(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Exp;

impl<T: Scalar> RegularizerForm<T> for Exp {
    fn r_sp_base(&self, v: T) -> T {
        if !in_unit(v) {
            T::infinity()
        } else if v == T::zero() {
            T::one()
        } else {
            v * v.ln() - v + T::one()
        }
    }

    fn weight_base(&self, l: T) -> T {
        if l <= T::zero() {
            T::one()
        } else {
            (-l).exp()
        }
    }

    fn latent_base(&self, l: T) -> T {
        if l <= T::zero() {
            l
        } else {
            -(-l).exp_m1()
        }
    }

    fn strictly_convex(&self) -> bool {
        true
    }
}
