use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: not a {kind} file (bad magic)", path.display())]
    BadMagic { path: PathBuf, kind: &'static str },
    #[error("{}: {kind} version {found} is not supported (expected {expected})", path.display())]
    VersionMismatch {
        path: PathBuf,
        kind: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("{}: truncated {kind}: {detail}", path.display())]
    Truncated {
        path: PathBuf,
        kind: &'static str,
        detail: String,
    },
    #[error("{}: {detail}", path.display())]
    Malformed { path: PathBuf, detail: String },
    #[error("{origin}: unknown config key `{key}`")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: {detail}")]
    BadValue { origin: String, detail: String },
    #[error("gradient check failed: {0}")]
    GradCheck(String),
    #[error(transparent)]
    Core(#[from] mgmra_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit codes. Usage errors (unknown command, bad flag) exit with 2.
pub mod exit {
    pub const OK: i32 = 0;
    pub const HEALTH: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const CONFIG: i32 = 4;
    pub const BAD_MAGIC: i32 = 5;
    pub const VERSION: i32 = 6;
    pub const TRUNCATED: i32 = 7;
    pub const MALFORMED: i32 = 8;
    pub const CONTRACT: i32 = 9;
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => exit::IO,
            Error::BadMagic { .. } => exit::BAD_MAGIC,
            Error::VersionMismatch { .. } => exit::VERSION,
            Error::Truncated { .. } => exit::TRUNCATED,
            Error::Malformed { .. } => exit::MALFORMED,
            Error::UnknownKey { .. } | Error::BadValue { .. } => exit::CONFIG,
            Error::GradCheck(_) => exit::HEALTH,
            Error::Core(mgmra_core::Error::NumericHealth { .. }) => exit::HEALTH,
            Error::Core(mgmra_core::Error::Config(_)) => exit::CONFIG,
            Error::Core(_) => exit::CONTRACT,
        }
    }
}
