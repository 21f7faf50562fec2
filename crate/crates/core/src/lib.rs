//! Shared foundation for the minidrm pipeline: the binary wire format,
//! the pluggable crypto suite abstraction, key derivation rules, domain
//! types, certificates, and every protocol message.

pub mod cert;
pub mod derive;
pub mod error;
pub mod keys;
pub mod messages;
pub mod suite;
pub mod suites;
pub mod time;
pub mod types;
pub mod wire;

pub use error::{CoreError, ErrorCode, WireError};
pub use suite::{suite_by_id, suite_ids, CryptoSuite};
pub use wire::WireMessage;

/// Current protocol version advertised by clients and required by the
/// default server floor. Version 1 is the retired on-path format that the
/// downgrade attack tries to force.
pub const CURRENT_PROTOCOL_VERSION: u16 = 2;
pub const SUPPORTED_PROTOCOL_VERSIONS: &[u16] = &[1, 2];
