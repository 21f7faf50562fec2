//! Wire-level error codes and the core error type.

use thiserror::Error;

/// Protocol error codes carried in ERROR envelopes. Stable wire values;
/// never reorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum ErrorCode {
    Malformed = 1,
    BadSignature = 2,
    BadCert = 3,
    AuthFailed = 4,
    Replay = 5,
    VersionRollback = 6,
    LevelTooLow = 7,
    UnknownKeyId = 8,
    LeaseExhausted = 9,
    LeaseNotHeld = 10,
    RateLimited = 11,
    SeedLength = 12,
    Config = 13,
    Internal = 14,
}

impl ErrorCode {
    pub fn from_u16(v: u16) -> Option<Self> {
        use ErrorCode::*;
        Some(match v {
            1 => Malformed,
            2 => BadSignature,
            3 => BadCert,
            4 => AuthFailed,
            5 => Replay,
            6 => VersionRollback,
            7 => LevelTooLow,
            8 => UnknownKeyId,
            9 => LeaseExhausted,
            10 => LeaseNotHeld,
            11 => RateLimited,
            12 => SeedLength,
            13 => Config,
            14 => Internal,
            _ => return None,
        })
    }

    pub fn as_u16(self) -> u16 {
        self as u16
    }

    pub fn name(self) -> &'static str {
        use ErrorCode::*;
        match self {
            Malformed => "MALFORMED",
            BadSignature => "BAD_SIGNATURE",
            BadCert => "BAD_CERT",
            AuthFailed => "AUTH_FAILED",
            Replay => "REPLAY",
            VersionRollback => "VERSION_ROLLBACK",
            LevelTooLow => "LEVEL_TOO_LOW",
            UnknownKeyId => "UNKNOWN_KEYID",
            LeaseExhausted => "LEASE_EXHAUSTED",
            LeaseNotHeld => "LEASE_NOT_HELD",
            RateLimited => "RATE_LIMITED",
            SeedLength => "SEED_LENGTH",
            Config => "CONFIG",
            Internal => "INTERNAL",
        }
    }
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Decode failures. Every branch is MALFORMED at the protocol level; the
/// variants exist so tests can assert on the precise rejection reason.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("message too short")]
    Truncated,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported wire version {0}")]
    BadVersion(u16),
    #[error("unexpected type tag {got:#06x}, wanted {want:#06x}")]
    WrongType { want: u16, got: u16 },
    #[error("field tags not strictly ascending at {0:#06x}")]
    TagOrder(u16),
    #[error("unexpected field tag {0:#06x}")]
    UnexpectedField(u16),
    #[error("missing field {0:#06x}")]
    MissingField(u16),
    #[error("field {tag:#06x} has length {got}, wanted {want}")]
    FieldLength { tag: u16, want: usize, got: usize },
    #[error("trailing bytes after last field")]
    Trailing,
    #[error("field {0:#06x}: {1}")]
    BadValue(u16, &'static str),
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("key seed must be 30 bytes, got {0}")]
    SeedLength(usize),
    #[error("signature verification failed")]
    BadSignature,
    #[error("aead open failed")]
    AeadOpen,
    #[error("kem failure: {0}")]
    Kem(&'static str),
    #[error("unknown crypto suite {0:?}")]
    UnknownSuite(String),
    #[error("malformed key material: {0}")]
    KeyMaterial(&'static str),
}
