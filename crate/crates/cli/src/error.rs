use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] sarcd_core::Error),

    #[error("model file: bad magic {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("model file: unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("model file truncated: need {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("model file corrupted: CRC {stored:#010x} does not match computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },

    #[error("model file inconsistent: {0}")]
    Inconsistent(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<CliError>,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        CliError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 usage, 3 data/format, 4 numerical degeneracy.
    pub fn exit_code(&self) -> i32 {
        use sarcd_core::Error as E;
        match self {
            CliError::Context { source, .. } => source.exit_code(),
            CliError::Core(E::Parameter(_)) => 2,
            CliError::Core(E::Degenerate(_) | E::Imbalance { .. }) => 4,
            _ => 3,
        }
    }
}
