//! Suite A: X25519 DH-KEM, Ed25519 signatures, AES-128-GCM, SHA-256.

use ed25519_dalek::{Signer, Verifier};
use x25519_dalek::{PublicKey as XPublicKey, StaticSecret};

use super::common;
use crate::error::CoreError;
use crate::suite::{
    derive_session_key, AeadKey, AeadNonce, CryptoSuite, KemCiphertext, KemPublicKey,
    KemSecretKey, SessionKey, Signature, SigningKey, VerifyingKey, HASH_LEN,
};

pub const SUITE_ID: &str = "classic-x25519";

pub struct ClassicalSuite;

fn x25519_array(bytes: &[u8], what: &'static str) -> Result<[u8; 32], CoreError> {
    bytes.try_into().map_err(|_| CoreError::KeyMaterial(what))
}

impl CryptoSuite for ClassicalSuite {
    fn id(&self) -> &'static str {
        SUITE_ID
    }

    fn hash(&self, data: &[u8]) -> [u8; HASH_LEN] {
        common::sha256(data)
    }

    fn seal(&self, key: &AeadKey, nonce: &AeadNonce, ad: &[u8], plaintext: &[u8]) -> Vec<u8> {
        common::gcm_seal(key, nonce, ad, plaintext)
    }

    fn open(
        &self,
        key: &AeadKey,
        nonce: &AeadNonce,
        ad: &[u8],
        sealed: &[u8],
    ) -> Result<Vec<u8>, CoreError> {
        common::gcm_open(key, nonce, ad, sealed)
    }

    fn stream_xor(&self, key: &AeadKey, nonce: &AeadNonce, data: &mut [u8]) {
        common::ctr_xor(key, nonce, data)
    }

    fn gen_signing_keypair(
        &self,
        rng: &mut dyn rand_core::CryptoRngCore,
    ) -> (SigningKey, VerifyingKey) {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let sk = ed25519_dalek::SigningKey::from_bytes(&seed);
        let vk = sk.verifying_key();
        (
            SigningKey(seed.to_vec()),
            VerifyingKey(vk.to_bytes().to_vec()),
        )
    }

    fn sign(&self, sk: &SigningKey, msg: &[u8]) -> Result<Signature, CoreError> {
        let seed: [u8; 32] = x25519_array(sk.as_bytes(), "ed25519 signing key must be 32 bytes")?;
        let sk = ed25519_dalek::SigningKey::from_bytes(&seed);
        Ok(Signature(sk.sign(msg).to_bytes().to_vec()))
    }

    fn verify(&self, vk: &VerifyingKey, msg: &[u8], sig: &Signature) -> bool {
        let Ok(vk_arr): Result<[u8; 32], _> = vk.as_bytes().try_into() else {
            return false;
        };
        let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&vk_arr) else {
            return false;
        };
        let Ok(sig_arr): Result<[u8; 64], _> = sig.as_bytes().try_into() else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&sig_arr);
        vk.verify(msg, &sig).is_ok()
    }

    fn gen_kem_keypair(
        &self,
        rng: &mut dyn rand_core::CryptoRngCore,
    ) -> (KemSecretKey, KemPublicKey) {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let sk = StaticSecret::from(seed);
        let pk = XPublicKey::from(&sk);
        (
            KemSecretKey(sk.to_bytes().to_vec()),
            KemPublicKey(pk.as_bytes().to_vec()),
        )
    }

    fn encap(
        &self,
        pk: &KemPublicKey,
        rng: &mut dyn rand_core::CryptoRngCore,
    ) -> Result<(KemCiphertext, SessionKey), CoreError> {
        let their_pk = XPublicKey::from(x25519_array(
            pk.as_bytes(),
            "x25519 public key must be 32 bytes",
        )?);
        let mut eph_seed = [0u8; 32];
        rng.fill_bytes(&mut eph_seed);
        let eph = StaticSecret::from(eph_seed);
        let eph_pk = XPublicKey::from(&eph);
        let dh = eph.diffie_hellman(&their_pk);
        if !dh.was_contributory() {
            return Err(CoreError::Kem("non-contributory x25519 exchange"));
        }
        let ct = KemCiphertext(eph_pk.as_bytes().to_vec());
        let key = derive_session_key(self, dh.as_bytes(), ct.as_bytes(), pk.as_bytes());
        Ok((ct, key))
    }

    fn decap(&self, sk: &KemSecretKey, ct: &KemCiphertext) -> Result<SessionKey, CoreError> {
        let secret = StaticSecret::from(x25519_array(
            sk.as_bytes(),
            "x25519 secret key must be 32 bytes",
        )?);
        let own_pk = XPublicKey::from(&secret);
        let eph_pk = XPublicKey::from(x25519_array(
            ct.as_bytes(),
            "x25519 encapsulation must be 32 bytes",
        )?);
        let dh = secret.diffie_hellman(&eph_pk);
        if !dh.was_contributory() {
            return Err(CoreError::Kem("non-contributory x25519 exchange"));
        }
        Ok(derive_session_key(
            self,
            dh.as_bytes(),
            ct.as_bytes(),
            own_pk.as_bytes(),
        ))
    }
}
