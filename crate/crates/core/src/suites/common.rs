//! Symmetric layer shared by both registered suites (AES-128-GCM,
//! AES-128-CTR for the negative fixture, SHA-256).

use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes128Gcm, KeyInit};
use sha2::{Digest, Sha256};

use crate::error::CoreError;
use crate::suite::{AeadKey, AeadNonce, HASH_LEN};

pub fn sha256(data: &[u8]) -> [u8; HASH_LEN] {
    Sha256::digest(data).into()
}

pub fn gcm_seal(key: &AeadKey, nonce: &AeadNonce, ad: &[u8], plaintext: &[u8]) -> Vec<u8> {
    let cipher = Aes128Gcm::new_from_slice(&key.0).expect("fixed 16-byte key");
    cipher
        .encrypt(
            (&nonce.0).into(),
            Payload {
                msg: plaintext,
                aad: ad,
            },
        )
        .expect("gcm encrypt is infallible for in-memory buffers")
}

pub fn gcm_open(
    key: &AeadKey,
    nonce: &AeadNonce,
    ad: &[u8],
    sealed: &[u8],
) -> Result<Vec<u8>, CoreError> {
    let cipher = Aes128Gcm::new_from_slice(&key.0).expect("fixed 16-byte key");
    cipher
        .decrypt(
            (&nonce.0).into(),
            Payload {
                msg: sealed,
                aad: ad,
            },
        )
        .map_err(|_| CoreError::AeadOpen)
}

pub fn ctr_xor(key: &AeadKey, nonce: &AeadNonce, data: &mut [u8]) {
    use aes::cipher::{KeyIvInit, StreamCipher};
    type Ctr = ctr::Ctr64BE<aes::Aes128>;
    let mut iv = [0u8; 16];
    iv[..12].copy_from_slice(&nonce.0);
    let mut cipher = Ctr::new((&key.0).into(), (&iv).into());
    cipher.apply_keystream(data);
}
