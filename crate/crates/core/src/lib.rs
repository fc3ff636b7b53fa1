//! Compression-ratio driven data selection.
//!
//! Samples are scored by how well they compress, alone and appended to what
//! has already been chosen. A three-stage greedy loop then assembles a subset
//! whose concatenation compresses as poorly as possible, i.e. one that carries
//! little redundant information, under a sample, byte or token budget.
//!
//! * [`corpus`]: JSONL ingestion, rendering and budget accounting.
//! * [`compressor`]: the DEFLATE backend and ratio measurements.
//! * [`selector`]: the global / coarse / fine selection loop.
//! * [`oracle`]: exhaustive and one-step references, random baseline,
//!   synthetic pools.
//! * [`analysis`]: trend fitting, version anomaly monitoring, selection
//!   statistics and discrete mutual information.
//! * [`cli`]: the `zipsel` command line.

pub mod analysis;
pub mod cli;
pub mod compressor;
pub mod corpus;
pub mod oracle;
pub mod selector;

pub use compressor::{CodecConfig, RatioScore};
pub use corpus::{BudgetSpec, BudgetUnit, Mode, Pool, Sample};
pub use selector::{zip_select, Selection, SelectorConfig};
