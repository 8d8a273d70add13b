use serde::{Deserialize, Serialize};

use crate::conjugate::{dot, Halfspace};
use crate::error::CurriculumError;
use crate::regularizers::SPRegularizer;
use crate::scalar::{c, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum RegionKind<T> {
    Halfspace(Halfspace<T>),
    /// Intersection of halfspaces; empty means the whole space.
    Intersection(Vec<Halfspace<T>>),
    /// Samples in one group share a weight.
    Groups(Vec<Vec<usize>>),
}

/// A curriculum region in dimension `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumRegion<T> {
    dim: usize,
    kind: RegionKind<T>,
}

const CHECK_POINTS: usize = 101;

impl<T: Scalar> CurriculumRegion<T> {
    pub fn halfspace(h: Halfspace<T>) -> Self {
        Self {
            dim: h.dim(),
            kind: RegionKind::Halfspace(h),
        }
    }

    /// `{v : v.k >= 0}`.
    pub fn homogeneous(k: Vec<T>) -> Result<Self, CurriculumError> {
        Self::affine(k, T::zero())
    }

    /// `{v : v.k >= b}`.
    pub fn affine(k: Vec<T>, b: T) -> Result<Self, CurriculumError> {
        let h = Halfspace::new(k, b).map_err(|e| CurriculumError::BadRegion(e.to_string()))?;
        Ok(Self::halfspace(h))
    }

    /// `{v : v_i >= v_j}`.
    pub fn pairwise_order(n: usize, i: usize, j: usize) -> Result<Self, CurriculumError> {
        let h = Halfspace::pairwise_order(n, i, j).map_err(|e| CurriculumError::BadRegion(e.to_string()))?;
        Ok(Self::halfspace(h))
    }

    pub fn intersection(dim: usize, halfspaces: Vec<Halfspace<T>>) -> Result<Self, CurriculumError> {
        if dim == 0 {
            return Err(CurriculumError::BadRegion("dimension must be positive".into()));
        }
        if let Some(h) = halfspaces.iter().find(|h| h.dim() != dim) {
            return Err(CurriculumError::DimensionMismatch {
                expected: dim,
                found: h.dim(),
            });
        }
        Ok(Self {
            dim,
            kind: RegionKind::Intersection(halfspaces),
        })
    }

    /// No constraint at all.
    pub fn full(dim: usize) -> Result<Self, CurriculumError> {
        Self::intersection(dim, Vec::new())
    }

    pub fn groups(dim: usize, partition: Vec<Vec<usize>>) -> Result<Self, CurriculumError> {
        check_partition(dim, &partition)?;
        Ok(Self {
            dim,
            kind: RegionKind::Groups(partition),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &RegionKind<T> {
        &self.kind
    }

    /// The halfspaces describing the region; empty for groups and the full
    /// space.
    pub fn halfspaces(&self) -> &[Halfspace<T>] {
        match &self.kind {
            RegionKind::Halfspace(h) => std::slice::from_ref(h),
            RegionKind::Intersection(hs) => hs,
            RegionKind::Groups(_) => &[],
        }
    }

    pub fn contains(&self, v: &[T], tol: T) -> bool {
        if v.len() != self.dim {
            return false;
        }
        match &self.kind {
            RegionKind::Groups(p) => p.iter().all(|g| {
                let first = v[g[0]];
                g.iter().all(|&i| (v[i] - first).abs() <= tol)
            }),
            _ => self.halfspaces().iter().all(|h| h.contains(v, tol)),
        }
    }

    /// Checks that the region meets the interior of the regularizer domain and
    /// does not contain the whole domain. Group regions have an empty interior
    /// and are not checked.
    pub fn check_nonsingular(&self, reg: &SPRegularizer<T>) -> Result<(), CurriculumError> {
        let hs = match &self.kind {
            RegionKind::Groups(_) => return Ok(()),
            _ => self.halfspaces(),
        };
        if hs.is_empty() {
            return Err(CurriculumError::SingularRegion(
                "the region is the whole space, so it contains the domain".into(),
            ));
        }
        let axis = domain_axis(reg);
        if axis.len() < 3 {
            return Err(CurriculumError::SingularRegion(
                "regularizer domain has no interior".into(),
            ));
        }
        let interior = &axis[1..axis.len() - 1];
        if self.dim <= 3 {
            self.grid_check(hs, &axis, interior)
        } else {
            self.analytic_check(hs, axis[0], axis[axis.len() - 1])
        }
    }

    fn grid_check(&self, hs: &[Halfspace<T>], axis: &[T], interior: &[T]) -> Result<(), CurriculumError> {
        let n = self.dim;
        let tol = c::<T>(1e-12);
        let mut meets_interior = false;
        for_each_point(interior, n, |v| {
            if hs.iter().all(|h| h.slack(v) > tol) {
                meets_interior = true;
            }
            meets_interior
        });
        if !meets_interior {
            return Err(CurriculumError::SingularRegion(
                "region does not meet the interior of the regularizer domain".into(),
            ));
        }
        let mut cuts = false;
        for_each_point(axis, n, |v| {
            if hs.iter().any(|h| h.slack(v) < -tol) {
                cuts = true;
            }
            cuts
        });
        if !cuts {
            return Err(CurriculumError::SingularRegion(
                "region contains the whole regularizer domain".into(),
            ));
        }
        Ok(())
    }

    fn analytic_check(&self, hs: &[Halfspace<T>], lo: T, hi: T) -> Result<(), CurriculumError> {
        let box_min = |h: &Halfspace<T>| {
            h.direction()
                .iter()
                .map(|&k| if k > T::zero() { k * lo } else { k * hi })
                .sum::<T>()
        };
        if hs.iter().all(|h| box_min(h) >= h.offset()) {
            return Err(CurriculumError::SingularRegion(
                "region contains the whole regularizer domain".into(),
            ));
        }
        // Alternating projections onto the shrunk box and the strictly
        // tightened halfspaces.
        let margin = (hi - lo) * c(1e-3);
        let (a, b) = (lo + margin, hi - margin);
        let mut v = vec![(lo + hi) * c(0.5); self.dim];
        for _ in 0..2000 {
            let mut worst = T::zero();
            for h in hs {
                let k = h.direction();
                let slack = dot(&v, k) - h.offset() - margin;
                if slack < T::zero() {
                    worst = worst.max(-slack);
                    let step = slack / dot(k, k);
                    for (vi, &ki) in v.iter_mut().zip(k) {
                        *vi -= step * ki;
                    }
                }
            }
            let mut boxed = false;
            for vi in v.iter_mut() {
                let clipped = vi.max(a).min(b);
                boxed |= clipped != *vi;
                *vi = clipped;
            }
            if worst == T::zero() && !boxed {
                return Ok(());
            }
        }
        if hs.iter().all(|h| h.slack(&v) > T::zero()) {
            Ok(())
        } else {
            Err(CurriculumError::SingularRegion(
                "no interior point of the domain found inside the region".into(),
            ))
        }
    }
}

/// The 101-point `v` axis restricted to where `R` is finite.
fn domain_axis<T: Scalar>(reg: &SPRegularizer<T>) -> Vec<T> {
    (0..CHECK_POINTS)
        .map(|i| T::from_usize(i).unwrap() / T::from_usize(CHECK_POINTS - 1).unwrap())
        .filter(|&v| reg.r_sp_base(v).is_finite())
        .collect()
}

/// Visits every point of `axis^n` until `visit` returns `true`.
fn for_each_point<T: Scalar>(axis: &[T], n: usize, mut visit: impl FnMut(&[T]) -> bool) {
    let m = axis.len();
    let total = m.pow(n as u32);
    let mut v = vec![T::zero(); n];
    for flat in 0..total {
        let mut rem = flat;
        for slot in v.iter_mut().rev() {
            *slot = axis[rem % m];
            rem /= m;
        }
        if visit(&v) {
            return;
        }
    }
}

pub(crate) fn check_partition(dim: usize, partition: &[Vec<usize>]) -> Result<(), CurriculumError> {
    let mut seen = vec![false; dim];
    for group in partition {
        if group.is_empty() {
            return Err(CurriculumError::BadPartition("empty group".into()));
        }
        for &i in group {
            if i >= dim {
                return Err(CurriculumError::BadPartition(format!(
                    "index {i} out of range for {dim} samples"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(CurriculumError::BadPartition(format!("index {i} appears twice")));
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(CurriculumError::BadPartition(format!("index {i} is not covered")));
    }
    Ok(())
}

/// JSON form of a region, e.g. `{"kind":"halfspace","k":[1,-1],"b":0}` or
/// `{"kind":"groups","partition":[[0,1],[2]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RegionSpec {
    Halfspace {
        k: Vec<f64>,
        #[serde(default)]
        b: f64,
    },
    Intersection {
        halfspaces: Vec<HalfspaceSpec>,
    },
    Groups {
        partition: Vec<Vec<usize>>,
    },
    Full {
        dim: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSpec {
    pub k: Vec<f64>,
    #[serde(default)]
    pub b: f64,
}

impl RegionSpec {
    pub fn build<T: Scalar>(&self, dim: Option<usize>) -> Result<CurriculumRegion<T>, CurriculumError> {
        let halfspace = |k: &[f64], b: f64| {
            Halfspace::new(k.iter().map(|&x| T::of(x)).collect(), T::of(b))
                .map_err(|e| CurriculumError::BadRegion(e.to_string()))
        };
        let region = match self {
            Self::Halfspace { k, b } => CurriculumRegion::halfspace(halfspace(k, *b)?),
            Self::Intersection { halfspaces } => {
                let n = dim
                    .or_else(|| halfspaces.first().map(|h| h.k.len()))
                    .ok_or_else(|| CurriculumError::BadRegion("empty intersection needs a dimension".into()))?;
                let hs = halfspaces
                    .iter()
                    .map(|h| halfspace(&h.k, h.b))
                    .collect::<Result<Vec<_>, _>>()?;
                CurriculumRegion::intersection(n, hs)?
            }
            Self::Groups { partition } => {
                let n = dim.unwrap_or_else(|| partition.iter().map(Vec::len).sum());
                CurriculumRegion::groups(n, partition.clone())?
            }
            Self::Full { dim: n } => CurriculumRegion::full(*n)?,
        };
        if let Some(n) = dim {
            if region.dim() != n {
                return Err(CurriculumError::DimensionMismatch {
                    expected: n,
                    found: region.dim(),
                });
            }
        }
        Ok(region)
    }
}
