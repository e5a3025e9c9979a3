use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid power allocation: {0}")]
    InvalidAllocation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The profile has no distinguishable main lobe (all bins equal).
    #[error("degenerate range profile: no main lobe can be identified")]
    DegenerateProfile,

    #[error("range profile has no side-lobe bins")]
    EmptySidelobes,

    /// The main lobe never drops below the 3-dB level inside its partition.
    #[error("3-dB main-lobe width cannot be measured: lobe stays above peak/sqrt(2)")]
    FlatMainLobe,

    #[error("channel has no usable sub-carrier (all gains are zero)")]
    NoUsableChannel,

    #[error("PSL bound {gamma_psl_db} dB is tighter than the achievable minimum {frontier_db} dB")]
    Infeasible { gamma_psl_db: f64, frontier_db: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
