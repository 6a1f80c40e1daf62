//! Exit-code classification.
//!
//! | code | meaning            |
//! |------|--------------------|
//! | 0    | success            |
//! | 1    | usage error        |
//! | 2    | data error         |
//! | 3    | numerical failure  |

use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Usage,
    Data,
    Numerical,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Usage => EXIT_USAGE,
            FailureKind::Data => EXIT_DATA,
            FailureKind::Numerical => EXIT_NUMERICAL,
        }
    }
}

/// Marker placed in an error chain to force its classification.
#[derive(Debug)]
pub struct Marked(pub FailureKind, pub String);

impl fmt::Display for Marked {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Marked {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Marked(FailureKind::Usage, msg.into()).into()
}

pub fn data(msg: impl Into<String>) -> anyhow::Error {
    Marked(FailureKind::Data, msg.into()).into()
}

pub fn numerical(msg: impl Into<String>) -> anyhow::Error {
    Marked(FailureKind::Numerical, msg.into()).into()
}

/// Extension for tagging any error as a usage error.
pub trait IntoUsage<T> {
    fn into_usage(self) -> anyhow::Result<T>;
}

impl<T, E: Into<anyhow::Error>> IntoUsage<T> for Result<T, E> {
    fn into_usage(self) -> anyhow::Result<T> {
        self.map_err(|e| usage(format!("{:#}", e.into())))
    }
}

/// The first marker or library error found in the chain decides; anything
/// else is treated as a data problem.
pub fn classify(err: &anyhow::Error) -> FailureKind {
    for cause in err.chain() {
        if let Some(Marked(kind, _)) = cause.downcast_ref::<Marked>() {
            return *kind;
        }
        if let Some(e) = cause.downcast_ref::<ddbridge_core::Error>() {
            return if e.is_numerical() {
                FailureKind::Numerical
            } else if matches!(e, ddbridge_core::Error::InvalidConfig(_)) {
                FailureKind::Usage
            } else {
                FailureKind::Data
            };
        }
    }
    FailureKind::Data
}
