use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the encryption, storage and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} cells, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("EmptyKey: key sequence has {0} usable bases, need at least 4")]
    EmptyKey(usize),

    #[error("KeyTooLong: key sequence has {0} bases, at most 2^32-1 are addressable")]
    KeyTooLong(usize),

    #[error("QuadrupleAbsent: quadruple {0} does not occur in key {1}")]
    QuadrupleAbsent(String, u16),

    #[error("NoConstrainedPosition: quadruple {quad} has no offset congruent to {nibble} mod 16")]
    NoConstrainedPosition { quad: String, nibble: u8 },

    #[error("OrderNotDoublyEven: magic square order {0} is not a positive multiple of 4")]
    OrderNotDoublyEven(usize),

    #[error("InvalidPattern: pattern id {0} out of range 0..16")]
    InvalidPattern(u32),

    #[error("InvalidKeyId: key id {0} out of range 0..4096")]
    InvalidKeyId(u32),

    #[error("PointerOverflow: key of {key_len} bases needs offsets up to {max_offset}, which do not fit in {pointer_width} bytes")]
    PointerOverflow {
        key_len: usize,
        max_offset: usize,
        pointer_width: u8,
    },

    #[error("InvalidPointerWidth: {0} (must be 1..=4)")]
    InvalidPointerWidth(u8),

    #[error("UnknownKey: key id {0} is not in the registry")]
    UnknownKey(u16),

    #[error("DuplicateKeyId: key id {0} already registered")]
    DuplicateKeyId(u16),

    #[error("KeyDigestMismatch: key {0} bases do not match the registry digest")]
    KeyDigestMismatch(u16),

    #[error("ChecksumMismatch: plaintext CRC32 expected {expected:08x}, got {actual:08x}")]
    ChecksumMismatch { expected: u32, actual: u32 },

    #[error("MalformedContainer: {0}")]
    MalformedContainer(String),

    #[error("NotEmbedded: container does not carry corner metadata")]
    NotEmbedded,

    #[error("NotFound: object {0}")]
    NotFound(String),

    #[error("Unavailable: {0}")]
    Unavailable(String),

    #[error("AllBackendsFailed: no replica could be stored ({0})")]
    AllBackendsFailed(String),

    #[error("AllReplicasUnavailable: no replica could be downloaded ({0})")]
    AllReplicasUnavailable(String),

    #[error("IntegrityFailure: every reachable replica failed verification ({0})")]
    IntegrityFailure(String),

    #[error("DegenerateVariance: a marginal variance is zero")]
    DegenerateVariance,

    #[error("TooFewPairs: {0} adjacent pairs, need at least 2")]
    TooFewPairs(usize),

    #[error("EmptyHistogram")]
    EmptyHistogram,

    #[error("InsufficientMultiplicity: avalanche needs min multiplicity >= 2, key has {0}")]
    InsufficientMultiplicity(usize),

    #[error("BitIndexOutOfRange: bit {bit} of {bits}")]
    BitIndexOutOfRange { bit: usize, bits: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("image format: {0}")]
    ImageFormat(String),

    #[error("{path}: {source}")]
    Path {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Path { path, source }
    }

    /// True for failures of stored data or of storage availability rather
    /// than of user input.
    pub fn is_integrity_or_availability(&self) -> bool {
        matches!(
            self,
            Error::ChecksumMismatch { .. }
                | Error::KeyDigestMismatch(_)
                | Error::Unavailable(_)
                | Error::AllBackendsFailed(_)
                | Error::AllReplicasUnavailable(_)
                | Error::IntegrityFailure(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
