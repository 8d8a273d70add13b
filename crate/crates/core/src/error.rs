use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConjugacyError {
    #[error("function is not proper: every sample is -inf")]
    NonProper,
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("bad sample values: {0}")]
    BadValue(String),
    #[error("sup-convolution has no feasible split at any output point")]
    EmptyOverlap,
    #[error("point {0} lies outside the effective domain")]
    OutsideDomain(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegularizerError {
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("weight function is not non-increasing or leaves [0,1]: {0}")]
    NotMonotone(String),
    #[error("weight function limits violated: {0}")]
    BadLimits(String),
    #[error("regularizer is not convex: {0}")]
    NotConvex(String),
    #[error("regularizer domain invalid: {0}")]
    BadDomain(String),
    #[error("unknown regularizer `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Conjugacy(#[from] ConjugacyError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurriculumError {
    #[error("curriculum region is singular against the regularizer: {0}")]
    SingularRegion(String),
    #[error("no feasible weight vector in the curriculum region")]
    EmptyFeasible,
    #[error("no sign change found for the multiplier bracket (loss vector outside the penalized cone)")]
    NoRoot,
    #[error("operation requires {required}, got `{found}`")]
    UnsupportedRegularizer { required: String, found: String },
    #[error("bad partition: {0}")]
    BadPartition(String),
    #[error("bad region: {0}")]
    BadRegion(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("curriculum constraints are infeasible inside the unit box")]
    Infeasible,
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("logistic loss needs labels in {{-1, +1}}, sample {0} has {1}")]
    BadLabels(usize, f64),
    #[error("weighted normal equations are singular (set a positive ridge coefficient)")]
    SingularSystem,
    #[error("curriculum infeasible: {0}")]
    InfeasibleCurriculum(String),
    #[error("bad schedule fractions: {0}")]
    BadFractions(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("bad dataset: {0}")]
    BadDataset(String),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("no grid point satisfies the constraints")]
    EmptyFeasible,
    #[error("grid spec invalid: {0}")]
    BadGrid(String),
}
