use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate party label `{0}`")]
    DuplicateLabel(String),
    #[error("party `{label}` has dimension {dim}; every party needs dimension >= 2")]
    DimTooSmall { label: String, dim: usize },
    #[error("layout has no parties")]
    EmptyLayout,
    #[error("amplitude vector is zero")]
    ZeroVector,
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("state is not normalised (norm deviates by {0:e})")]
    NotNormalized(f64),
    #[error("factor `{kind}` needs {expected} labels, found {found}")]
    LabelCount { kind: &'static str, expected: usize, found: usize },
    #[error("permutation is not a bijection on 0..{0}")]
    InvalidPermutation(usize),
    #[error("party index {index} out of range for {n} parties")]
    PartyOutOfRange { index: usize, n: usize },
    #[error("partition does not cover the parties of the state")]
    PartitionMismatch,
    #[error("malformed partition: {0}")]
    MalformedPartition(String),
    #[error("keep set is empty")]
    EmptyKeep,
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace deviates from one by {0:e}")]
    TraceNotOne(f64),
    #[error("eigenvalue {0:e} is below the clipping window")]
    NegativeEigenvalue(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("level k = {k} is outside [2, {n}]")]
    KOutOfRange { k: usize, n: usize },
    #[error("fineness bound must be >= 1")]
    InvalidFineness,
    #[error("{what} = {value} exceeds the cap {cap}; lift the limits to proceed")]
    SizeCap { what: &'static str, value: usize, cap: usize },
    #[error("factor reconstruction fidelity {0} is below 1 - 1e-8")]
    Reconstruction(f64),
    #[error("illegal coarsening: {0}")]
    IllegalCoarsening(String),
    #[error("budget must be at least one iteration")]
    ZeroBudget,
    #[error("operation needs at least {needed} parties, state has {found}")]
    TooFewParties { needed: usize, found: usize },
    #[error("marginal on the kept parties is not pure (purity {0})")]
    NotPureMarginal(f64),
}

impl Error {
    /// True for errors that signal a broken numerical contract rather than
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotHermitian(_)
                | Error::TraceNotOne(_)
                | Error::NegativeEigenvalue(_)
                | Error::Reconstruction(_)
                | Error::NotNormalized(_)
                | Error::NotPureMarginal(_)
        )
    }
}
