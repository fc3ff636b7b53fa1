//! Entropy-law diagnostics: trend fitting of performance against compression
//! ratio or loss, version-to-version anomaly monitoring, selection statistics
//! and discrete information measures.

mod fit;
mod info;
mod monitor;
mod stats;

use thiserror::Error;

pub use fit::{fit_entropy_curve, CurveFit, Direction, Family, XAxis};
pub use info::{
    mi_subadditivity_check, mutual_information, JointDistribution, MarkovViolation, MiCheck, Var,
};
pub use monitor::{detect_anomaly, parse_versions_csv, read_versions_csv, VersionPoint};
pub use stats::{
    histogram_csv, selection_stats, HistogramBin, LengthSummary, StatsReport, HISTOGRAM_BINS,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least 3 points with {0} and performance present, got {1}")]
    TooFewPoints(&'static str, usize),
    #[error("all x values are equal; cannot fit a trend")]
    DegenerateX,
    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),
    #[error("variable sets must be non-empty and disjoint")]
    BadVariableSets,
    #[error("premise violated: {0}")]
    Premise(MarkovViolation),
    #[error("empty selection")]
    EmptySelection,
    #[error("selection index {0} is not in the pool")]
    UnknownSample(usize),
    #[error("versions csv, record {record}: {reason}")]
    Csv { record: usize, reason: String },
    #[error(transparent)]
    Codec(#[from] crate::compressor::CodecError),
}
