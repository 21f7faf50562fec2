//! Deterministic key derivations. Every derivation is domain-separated by
//! an explicit label so no two uses of the hash can collide.

use crate::suite::{AeadKey, CryptoSuite, SigningKey};
use crate::types::{ContentKey, DeviceId, KeyId, KeySeed};

pub const CONTENT_KEY_LABEL: &[u8] = b"minidrm/ck/v1";

/// content_key = first 16 bytes of HASH(seed ‖ key_id ‖ label).
pub fn derive_content_key(
    suite: &dyn CryptoSuite,
    seed: &KeySeed,
    key_id: KeyId,
    period: u32,
) -> ContentKey {
    let mut input = Vec::with_capacity(KeySeed::LEN + 16 + CONTENT_KEY_LABEL.len());
    input.extend_from_slice(seed.as_bytes());
    input.extend_from_slice(key_id.as_bytes());
    input.extend_from_slice(CONTENT_KEY_LABEL);
    let h = suite.hash(&input);
    let mut key = [0u8; 16];
    key.copy_from_slice(&h[..16]);
    ContentKey::new(key_id, period, key)
}

/// Key identifiers are public derivations of the content id and period;
/// they carry no secret material.
pub fn derive_key_id(suite: &dyn CryptoSuite, content_id: &str, period: u32) -> KeyId {
    let mut input = Vec::new();
    input.extend_from_slice(b"minidrm/kid/v1");
    input.extend_from_slice(&(content_id.len() as u32).to_be_bytes());
    input.extend_from_slice(content_id.as_bytes());
    input.extend_from_slice(&period.to_be_bytes());
    let h = suite.hash(&input);
    let mut id = [0u8; 16];
    id.copy_from_slice(&h[..16]);
    KeyId(id)
}

/// Content ids travel hashed so the license request does not expose the
/// catalog name.
pub fn secure_content_id(suite: &dyn CryptoSuite, content_id: &str) -> [u8; 32] {
    let mut input = Vec::new();
    input.extend_from_slice(b"minidrm/scid/v1");
    input.extend_from_slice(content_id.as_bytes());
    suite.hash(&input)
}

/// DeviceId = hash over the device's public keys. Length-prefixed parts;
/// domain-mode devices share keys and so share an id.
pub fn device_id(suite: &dyn CryptoSuite, sig_pk: &[u8], kem_pk: &[u8]) -> DeviceId {
    let mut input = Vec::with_capacity(32 + sig_pk.len() + kem_pk.len());
    input.extend_from_slice(b"minidrm/device/v1");
    input.extend_from_slice(&(sig_pk.len() as u32).to_be_bytes());
    input.extend_from_slice(sig_pk);
    input.extend_from_slice(&(kem_pk.len() as u32).to_be_bytes());
    input.extend_from_slice(kem_pk);
    DeviceId(suite.hash(&input))
}

fn derived_aead_key(suite: &dyn CryptoSuite, label: &[u8], secret: &[u8]) -> AeadKey {
    let mut input = Vec::with_capacity(label.len() + secret.len());
    input.extend_from_slice(label);
    input.extend_from_slice(secret);
    let h = suite.hash(&input);
    let mut key = [0u8; 16];
    key.copy_from_slice(&h[..16]);
    AeadKey(key)
}

/// Device-binding key for offline license records; derived from the
/// device signing secret, so records sealed on one device cannot open on
/// another.
pub fn offline_binding_key(suite: &dyn CryptoSuite, device_sig_sk: &SigningKey) -> AeadKey {
    derived_aead_key(suite, b"minidrm/hds/v1", device_sig_sk.as_bytes())
}

/// Storage key for the server's at-rest key database.
pub fn server_storage_key(suite: &dyn CryptoSuite, server_sig_sk: &SigningKey) -> AeadKey {
    derived_aead_key(suite, b"minidrm/keydb/v1", server_sig_sk.as_bytes())
}
