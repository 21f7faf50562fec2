//! Crypto suite abstraction. Every cryptographic operation used by the
//! pipeline goes through `CryptoSuite`, so a deployment can swap cipher,
//! AEAD, signature, KEM, and hash wholesale by naming a different suite in
//! config. Protocol code never branches on suite identity; key and
//! signature material moves around as opaque length-prefixed bytes.

use crate::error::CoreError;
use crate::types::wipe;

pub const SESSION_KEY_LEN: usize = 16;
pub const AEAD_KEY_LEN: usize = 16;
pub const AEAD_NONCE_LEN: usize = 12;
pub const AEAD_TAG_LEN: usize = 16;
pub const HASH_LEN: usize = 32;

macro_rules! public_bytes {
    ($name:ident) => {
        #[derive(Clone, PartialEq, Eq, Hash)]
        pub struct $name(pub Vec<u8>);

        impl $name {
            pub fn as_bytes(&self) -> &[u8] {
                &self.0
            }
        }

        impl std::fmt::Debug for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(
                    f,
                    concat!(stringify!($name), "({} bytes, {}…)"),
                    self.0.len(),
                    crate::types::to_hex(&self.0[..self.0.len().min(4)])
                )
            }
        }
    };
}

macro_rules! secret_bytes {
    ($name:ident) => {
        #[derive(Clone, PartialEq, Eq)]
        pub struct $name(pub Vec<u8>);

        impl $name {
            pub fn as_bytes(&self) -> &[u8] {
                &self.0
            }
        }

        impl std::fmt::Debug for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(concat!(stringify!($name), "(<redacted>)"))
            }
        }

        impl Drop for $name {
            fn drop(&mut self) {
                wipe(&mut self.0);
            }
        }
    };
}

public_bytes!(VerifyingKey);
public_bytes!(Signature);
public_bytes!(KemPublicKey);
public_bytes!(KemCiphertext);
secret_bytes!(SigningKey);
secret_bytes!(KemSecretKey);

/// 128-bit symmetric key for the suite AEAD.
#[derive(Clone, PartialEq, Eq)]
pub struct AeadKey(pub [u8; AEAD_KEY_LEN]);

impl AeadKey {
    pub fn from_bytes(b: &[u8]) -> Result<Self, CoreError> {
        Ok(AeadKey(b.try_into().map_err(|_| {
            CoreError::KeyMaterial("aead key must be 16 bytes")
        })?))
    }
}

impl std::fmt::Debug for AeadKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AeadKey(<redacted>)")
    }
}

impl Drop for AeadKey {
    fn drop(&mut self) {
        wipe(&mut self.0);
    }
}

/// Session key agreed via the KEM; protects license payloads in transit.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey(pub [u8; SESSION_KEY_LEN]);

impl std::fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SessionKey(<redacted>)")
    }
}

impl Drop for SessionKey {
    fn drop(&mut self) {
        wipe(&mut self.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AeadNonce(pub [u8; AEAD_NONCE_LEN]);

impl AeadNonce {
    /// 32-bit rotation period ‖ 64-bit segment index. Unique per (content,
    /// segment) by construction.
    pub fn for_segment(period: u32, index: u64) -> Self {
        let mut n = [0u8; AEAD_NONCE_LEN];
        n[..4].copy_from_slice(&period.to_be_bytes());
        n[4..].copy_from_slice(&index.to_be_bytes());
        AeadNonce(n)
    }

    pub fn random(rng: &mut dyn rand_core::CryptoRngCore) -> Self {
        let mut n = [0u8; AEAD_NONCE_LEN];
        rng.fill_bytes(&mut n);
        AeadNonce(n)
    }
}

/// One interchangeable set of primitives. Implementations must be
/// stateless and Sync; all randomness comes in through the caller's RNG.
pub trait CryptoSuite: Send + Sync {
    fn id(&self) -> &'static str;

    fn hash(&self, data: &[u8]) -> [u8; HASH_LEN];

    /// Authenticated encryption. Returns ciphertext ‖ tag.
    fn seal(&self, key: &AeadKey, nonce: &AeadNonce, ad: &[u8], plaintext: &[u8]) -> Vec<u8>;

    /// Open `ciphertext ‖ tag`; any bit flip in ciphertext, tag, or ad fails.
    fn open(
        &self,
        key: &AeadKey,
        nonce: &AeadNonce,
        ad: &[u8],
        sealed: &[u8],
    ) -> Result<Vec<u8>, CoreError>;

    /// Unauthenticated stream cipher. Exists solely so conformance
    /// fixtures can demonstrate what plain (non-AEAD) encryption fails to
    /// protect. Production paths never call this.
    fn stream_xor(&self, key: &AeadKey, nonce: &AeadNonce, data: &mut [u8]);

    fn gen_signing_keypair(
        &self,
        rng: &mut dyn rand_core::CryptoRngCore,
    ) -> (SigningKey, VerifyingKey);

    fn sign(&self, sk: &SigningKey, msg: &[u8]) -> Result<Signature, CoreError>;

    fn verify(&self, vk: &VerifyingKey, msg: &[u8], sig: &Signature) -> bool;

    fn gen_kem_keypair(
        &self,
        rng: &mut dyn rand_core::CryptoRngCore,
    ) -> (KemSecretKey, KemPublicKey);

    /// Encapsulate to `pk`, returning the ciphertext and the derived
    /// 128-bit session key.
    fn encap(
        &self,
        pk: &KemPublicKey,
        rng: &mut dyn rand_core::CryptoRngCore,
    ) -> Result<(KemCiphertext, SessionKey), CoreError>;

    fn decap(&self, sk: &KemSecretKey, ct: &KemCiphertext) -> Result<SessionKey, CoreError>;
}

/// Derive the session key from raw KEM output. Binds suite id, ciphertext
/// and recipient key so the key is unique per encapsulation context.
pub(crate) fn derive_session_key(
    suite: &dyn CryptoSuite,
    raw_secret: &[u8],
    ct: &[u8],
    pk: &[u8],
) -> SessionKey {
    let mut input = Vec::with_capacity(64 + raw_secret.len() + ct.len() + pk.len());
    input.extend_from_slice(b"minidrm/ss/v1");
    input.extend_from_slice(suite.id().as_bytes());
    input.extend_from_slice(raw_secret);
    input.extend_from_slice(ct);
    input.extend_from_slice(pk);
    let h = suite.hash(&input);
    let mut key = [0u8; SESSION_KEY_LEN];
    key.copy_from_slice(&h[..SESSION_KEY_LEN]);
    SessionKey(key)
}

/// Look up a suite by its configured identifier.
pub fn suite_by_id(id: &str) -> Result<&'static dyn CryptoSuite, CoreError> {
    match id {
        crate::suites::classical::SUITE_ID => Ok(&crate::suites::classical::ClassicalSuite),
        crate::suites::mlkem::SUITE_ID => Ok(&crate::suites::mlkem::MlKemSuite),
        other => Err(CoreError::UnknownSuite(other.to_string())),
    }
}

/// All registered suite identifiers.
pub fn suite_ids() -> &'static [&'static str] {
    &[
        crate::suites::classical::SUITE_ID,
        crate::suites::mlkem::SUITE_ID,
    ]
}
