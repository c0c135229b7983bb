use std::io;

use lagpar::{CodecError, StorageError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("stored blocks are inconsistent")]
    Inconsistent,
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("output: {0}")]
    Io(io::Error),
}

impl CliError {
    pub(crate) fn io(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn codec_code(e: &CodecError) -> u8 {
    match e {
        CodecError::Ambiguous { .. } => 4,
        CodecError::InsufficientBlocks { .. }
        | CodecError::InsufficientRedundancy { .. }
        | CodecError::TooManyBlocks { .. } => 3,
        _ => 2,
    }
}

/// Total mapping from the error taxonomy to process exit codes.
pub fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Usage(_) | CliError::Inconsistent => 2,
        CliError::Io(_) => 1,
        CliError::Codec(c) => codec_code(c),
        CliError::Storage(s) => match s {
            StorageError::Codec(c) => codec_code(c),
            StorageError::ManifestMissing(_) | StorageError::Unrecoverable { .. } => 3,
            StorageError::InvalidDatasetId(_)
            | StorageError::DuplicateDataset(_)
            | StorageError::SameStore(_)
            | StorageError::ValidationFailed { .. }
            | StorageError::UnknownDataset(_)
            | StorageError::UnknownBlock { .. }
            | StorageError::OffsetOutOfRange { .. }
            | StorageError::InvalidIndicator(_)
            | StorageError::Indicator(_) => 2,
            StorageError::Unreachable(_)
            | StorageError::StoreMissing(_)
            | StorageError::Locked(_)
            | StorageError::Unwritable { .. }
            | StorageError::Crashed(_)
            | StorageError::Io { .. } => 1,
        },
    }
}
