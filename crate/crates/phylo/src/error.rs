use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhyloError {
    #[error("need at least 2 leaves, got {0}")]
    TooFewLeaves(usize),
    #[error("stationary frequencies sum to {0}, not 1")]
    OffSimplex(f64),
    #[error("exchangeability rates must be positive")]
    NonPositiveRate,
    #[error("branch length must be non-negative, got {0}")]
    NegativeBranch(f64),
    #[error("invalid nucleotide {0:?}")]
    InvalidNucleotide(char),
    #[error("Newick parse error at byte {pos}: {msg}")]
    Newick { pos: usize, msg: String },
    #[error("class {label} has {got} records; too few to stratify into three splits")]
    CladeTooSmall { label: usize, got: usize },
    #[error("FASTA provides {available} non-overlapping windows, {requested} requested")]
    FastaTooShort { available: usize, requested: usize },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PhyloError>;
