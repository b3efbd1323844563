//! Pipelines behind the `teasergen` binary: composition, evaluation, edit
//! lists, audio preparation, input validation and synthetic fixtures.

use std::fmt;

pub mod config;
pub mod diagnostics;
pub mod fixtures;
pub mod pipeline;
pub mod wav;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INVALID: u8 = 2;
    pub const RUNTIME: u8 = 3;
}

/// Inputs that cannot be run: missing files, malformed or inconsistent data.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// Maps an error to [`exit::INVALID`] when it stems from bad inputs and to
/// [`exit::RUNTIME`] otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let invalid = err.chain().any(|e| {
        e.is::<Invalid>()
            || e.is::<teasergen_core::error::StoreError>()
            || matches!(
                e.downcast_ref::<teasergen_core::Error>(),
                Some(teasergen_core::Error::Store(_))
            )
    });
    if invalid {
        exit::INVALID
    } else {
        exit::RUNTIME
    }
}

/// Attaches the module prefix from [`teasergen_core::Error`] to any module
/// error.
pub trait Tagged<T> {
    fn tagged(self) -> anyhow::Result<T>;
}

impl<T, E: Into<teasergen_core::Error>> Tagged<T> for Result<T, E> {
    fn tagged(self) -> anyhow::Result<T> {
        self.map_err(|e| anyhow::Error::new(e.into()))
    }
}
