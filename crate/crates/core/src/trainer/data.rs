use serde::{Deserialize, Serialize};

use crate::error::TrainError;
use crate::sampled::{format_scalar, parse_scalar};
use crate::scalar::{c, Scalar};

/// Row-major `n x d` design matrix with targets and optional group labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    features: Vec<T>,
    targets: Vec<T>,
    dim: usize,
    groups: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Squared,
    /// `log(1 + exp(-y x.w))` with labels in `{-1, +1}`.
    Logistic,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Vec<T>, targets: Vec<T>, dim: usize) -> Result<Self, TrainError> {
        let n = targets.len();
        if n == 0 || dim == 0 {
            return Err(TrainError::BadDataset(
                "need at least one sample and one feature".into(),
            ));
        }
        if features.len() != n * dim {
            return Err(TrainError::BadDataset(format!(
                "{} feature values do not fill {n} rows of {dim}",
                features.len()
            )));
        }
        if features.iter().chain(&targets).any(|x| !x.is_finite()) {
            return Err(TrainError::BadDataset("non-finite entry".into()));
        }
        Ok(Self {
            features,
            targets,
            dim,
            groups: None,
        })
    }

    pub fn from_rows(rows: &[Vec<T>], targets: Vec<T>) -> Result<Self, TrainError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(TrainError::BadDataset("ragged rows".into()));
        }
        Self::new(rows.concat(), targets, dim)
    }

    pub fn with_groups(mut self, groups: Vec<usize>) -> Result<Self, TrainError> {
        if groups.len() != self.len() {
            return Err(TrainError::BadDataset(format!(
                "{} group labels for {} samples",
                groups.len(),
                self.len()
            )));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn groups(&self) -> Option<&[usize]> {
        self.groups.as_deref()
    }

    /// Group labels as a partition of sample indices, ordered by label.
    pub fn partition(&self) -> Option<Vec<Vec<usize>>> {
        let labels = self.groups.as_ref()?;
        let mut sorted: Vec<usize> = labels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        Some(
            sorted
                .iter()
                .map(|&g| (0..labels.len()).filter(|&i| labels[i] == g).collect())
                .collect(),
        )
    }

    /// Dataset without the listed samples.
    pub fn without(&self, drop: &[usize]) -> Result<Self, TrainError> {
        let keep: Vec<usize> = (0..self.len()).filter(|i| !drop.contains(i)).collect();
        let features = keep.iter().flat_map(|&i| self.row(i).to_vec()).collect();
        let targets = keep.iter().map(|&i| self.targets[i]).collect();
        Self::new(features, targets, self.dim)
    }

    pub(crate) fn score(&self, i: usize, w: &[T]) -> T {
        self.row(i).iter().zip(w).fold(T::zero(), |acc, (&x, &wi)| acc + x * wi)
    }

    /// CSV with header `x1..xd,y` and a trailing `group` column when present.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        if self.groups.is_some() {
            header.push("group".into());
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.len() {
            let mut fields: Vec<String> = self.row(i).iter().map(|&x| format_scalar(x)).collect();
            fields.push(format_scalar(self.targets[i]));
            if let Some(g) = &self.groups {
                fields.push(g[i].to_string());
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Header row, feature columns, then the target column. A column named
    /// `group` (anywhere) holds integer group labels.
    pub fn from_csv(text: &str) -> Result<Self, TrainError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| TrainError::BadDataset(e.to_string()))?
            .clone();
        let group_col = headers.iter().position(|h| h.eq_ignore_ascii_case("group"));
        let value_cols: Vec<usize> = (0..headers.len()).filter(|&j| Some(j) != group_col).collect();
        if value_cols.len() < 2 {
            return Err(TrainError::BadDataset(
                "need at least one feature column and a target column".into(),
            ));
        }
        let dim = value_cols.len() - 1;
        let (mut features, mut targets, mut groups) = (Vec::new(), Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record.map_err(|e| TrainError::BadDataset(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != headers.len() {
                return Err(TrainError::BadDataset(format!(
                    "line {line}: expected {} fields",
                    headers.len()
                )));
            }
            for (pos, &j) in value_cols.iter().enumerate() {
                let x: T = parse_scalar(&record[j], line).map_err(|e| TrainError::BadDataset(e.to_string()))?;
                if pos == dim {
                    targets.push(x);
                } else {
                    features.push(x);
                }
            }
            if let Some(g) = group_col {
                let label = record[g].parse::<usize>().map_err(|_| {
                    TrainError::BadDataset(format!("line {line}: group label must be a non-negative integer"))
                })?;
                groups.push(label);
            }
        }
        let data = Self::new(features, targets, dim)?;
        if group_col.is_some() {
            data.with_groups(groups)
        } else {
            Ok(data)
        }
    }
}

pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus<T: Scalar>(z: T) -> T {
    if z > c(30.0) {
        z + (-z).exp()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn check_labels<T: Scalar>(data: &Dataset<T>, kind: LossKind) -> Result<(), TrainError> {
    if kind == LossKind::Logistic {
        if let Some(i) = data.targets().iter().position(|&y| y != T::one() && y != -T::one()) {
            return Err(TrainError::BadLabels(i, data.targets()[i].as_f64()));
        }
    }
    Ok(())
}

/// Per-sample losses of the linear model `w`.
pub fn loss_vector<T: Scalar>(w: &[T], data: &Dataset<T>, kind: LossKind) -> Result<Vec<T>, TrainError> {
    if w.len() != data.dim() {
        return Err(TrainError::BadConfig(format!(
            "parameter vector has length {}, data has {} features",
            w.len(),
            data.dim()
        )));
    }
    check_labels(data, kind)?;
    Ok(losses_unchecked(w, data, kind))
}

pub(crate) fn losses_unchecked<T: Scalar>(w: &[T], data: &Dataset<T>, kind: LossKind) -> Vec<T> {
    (0..data.len())
        .map(|i| {
            let s = data.score(i, w);
            let y = data.targets()[i];
            match kind {
                LossKind::Squared => (s - y) * (s - y),
                LossKind::Logistic => softplus(-y * s),
            }
        })
        .collect()
}

/// `d l_i / d score` for each sample.
pub(crate) fn loss_slopes<T: Scalar>(w: &[T], data: &Dataset<T>, kind: LossKind) -> Vec<T> {
    (0..data.len())
        .map(|i| {
            let s = data.score(i, w);
            let y = data.targets()[i];
            match kind {
                LossKind::Squared => (s - y) * c(2.0),
                LossKind::Logistic => -y * sigmoid(-y * s),
            }
        })
        .collect()
}
