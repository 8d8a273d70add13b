//! Sampled real functions of one variable on an explicit grid.
//!
//! Values follow the concave convention: `-inf` marks a point outside the
//! effective domain. The effective domain is always a contiguous index range.

use crate::error::ConjugacyError;
use crate::scalar::{c, Scalar};

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(n >= 2, "a grid needs at least two points");
    let step = (hi - lo) / T::from_usize(n - 1).unwrap();
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + step * T::from_usize(i).unwrap()
            }
        })
        .collect()
}

/// `n` points from `lo` to `hi` with spacing growing linearly away from `lo`
/// (`lo + (hi - lo) u^2` for uniform `u`). Resolves functions whose slope
/// blows up at the left end, such as `log v` or `v log v` near zero.
pub fn graded_grid<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    uniform_grid(T::zero(), T::one(), n)
        .into_iter()
        .enumerate()
        .map(|(i, u)| if i == n - 1 { hi } else { lo + (hi - lo) * u * u })
        .collect()
}

pub(crate) fn check_grid<T: Scalar>(grid: &[T]) -> Result<(), ConjugacyError> {
    if grid.len() < 2 {
        return Err(ConjugacyError::BadGrid(format!(
            "grid has {} points, need at least 2",
            grid.len()
        )));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(ConjugacyError::BadGrid("grid contains a non-finite abscissa".into()));
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(ConjugacyError::BadGrid(format!(
            "grid not strictly increasing at index {}",
            i + 1
        )));
    }
    Ok(())
}

/// A concave-convention extended-real function sampled on a strictly
/// increasing grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction<T> {
    grid: Vec<T>,
    values: Vec<T>,
    first: usize,
    last: usize,
}

impl<T: Scalar> SampledFunction<T> {
    pub fn new(grid: Vec<T>, values: Vec<T>) -> Result<Self, ConjugacyError> {
        check_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(ConjugacyError::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| v.is_nan() || *v == T::infinity()) {
            return Err(ConjugacyError::BadValue("values must be finite or -inf".into()));
        }
        let first = values
            .iter()
            .position(|v| v.is_finite())
            .ok_or(ConjugacyError::NonProper)?;
        let last = values.iter().rposition(|v| v.is_finite()).unwrap();
        if values[first..=last].iter().any(|v| !v.is_finite()) {
            return Err(ConjugacyError::BadValue(
                "effective domain is not an interval (gap in finite values)".into(),
            ));
        }
        Ok(Self {
            grid,
            values,
            first,
            last,
        })
    }

    /// Samples `f` on `grid`; `f` may return `-inf` outside its domain.
    /// `+inf` and NaN are mapped to `-inf`.
    pub fn from_fn(grid: Vec<T>, f: impl Fn(T) -> T) -> Result<Self, ConjugacyError> {
        let values = grid
            .iter()
            .map(|&x| {
                let y = f(x);
                if y.is_finite() || y == T::neg_infinity() {
                    y
                } else {
                    T::neg_infinity()
                }
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Index range `[first, last]` of finite samples.
    pub fn domain_indices(&self) -> (usize, usize) {
        (self.first, self.last)
    }

    /// Closed effective domain `[lo, hi]`.
    pub fn domain(&self) -> (T, T) {
        (self.grid[self.first], self.grid[self.last])
    }

    /// Largest spacing of the grid.
    pub fn max_step(&self) -> T {
        self.grid.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max)
    }

    /// Iterator over the finite samples as `(x, value)`.
    pub fn finite_points(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.grid[self.first..=self.last]
            .iter()
            .copied()
            .zip(self.values[self.first..=self.last].iter().copied())
    }

    fn edge_slack(x: T) -> T {
        T::epsilon() * c::<T>(64.0) * (T::one() + x.abs())
    }

    /// Piecewise-linear interpolation inside the effective domain, `-inf`
    /// outside. Points within rounding distance of a domain edge snap to it.
    pub fn eval(&self, x: T) -> T {
        let (lo, hi) = self.domain();
        let slack = Self::edge_slack(x);
        if x < lo - slack || x > hi + slack || x.is_nan() {
            return T::neg_infinity();
        }
        if x <= lo {
            return self.values[self.first];
        }
        if x >= hi {
            return self.values[self.last];
        }
        let pts = &self.grid[self.first..=self.last];
        let j = pts.partition_point(|&g| g <= x);
        // pts[j-1] <= x < pts[j]
        let i = self.first + j - 1;
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let t = (x - x0) / (x1 - x0);
        y0 + (y1 - y0) * t
    }

    /// Discrete concavity: consecutive secant slopes are non-increasing up to
    /// `tol`.
    pub fn is_concave(&self, tol: T) -> bool {
        self.max_concavity_violation() <= tol
    }

    /// Largest increase between consecutive secant slopes (zero for concave
    /// samples).
    pub fn max_concavity_violation(&self) -> T {
        let slopes: Vec<T> = (self.first..self.last)
            .map(|i| (self.values[i + 1] - self.values[i]) / (self.grid[i + 1] - self.grid[i]))
            .collect();
        slopes.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max)
    }

    /// Pointwise sum on a shared grid; domains intersect.
    pub fn add(&self, other: &Self) -> Result<Self, ConjugacyError> {
        if self.grid != other.grid {
            return Err(ConjugacyError::BadGrid("sum requires identical grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| {
                if a.is_finite() && b.is_finite() {
                    a + b
                } else {
                    T::neg_infinity()
                }
            })
            .collect();
        Self::new(self.grid.clone(), values)
    }

    /// Serializes as CSV with header `x,value`; `-inf` marks points outside
    /// the domain.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (x, v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format_scalar(*x));
            out.push(',');
            out.push_str(&format_scalar(*v));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ConjugacyError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| ConjugacyError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "value" {
            return Err(ConjugacyError::Parse {
                line: 1,
                message: format!(
                    "expected header `x,value`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| ConjugacyError::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != 2 {
                return Err(ConjugacyError::Parse {
                    line,
                    message: format!("expected 2 fields, found {}", record.len()),
                });
            }
            grid.push(parse_scalar(&record[0], line)?);
            values.push(parse_scalar(&record[1], line)?);
        }
        Self::new(grid, values)
    }
}

pub(crate) fn format_scalar<T: Scalar>(x: T) -> String {
    let x = x.as_f64();
    if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

pub(crate) fn parse_scalar<T: Scalar>(field: &str, line: u64) -> Result<T, ConjugacyError> {
    let field = field.trim();
    let value: f64 = field.parse().map_err(|_| ConjugacyError::Parse {
        line,
        message: format!("cannot parse `{field}` as a number"),
    })?;
    Ok(T::of(value))
}
