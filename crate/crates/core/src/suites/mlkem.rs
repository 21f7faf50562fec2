//! Suite B: ML-KEM-768, ECDSA P-256, AES-128-GCM, SHA-256. Exists to
//! demonstrate that the KEM and signature scheme swap cleanly (the KEM is
//! the post-quantum-relevant piece); it is a pluggability proof, not a
//! quantum-security claim.

use kem::Decapsulate;
use ml_kem::{Ciphertext, EncapsulateDeterministic, EncodedSizeUser, KemCore, MlKem768};
use p256::ecdsa;
use p256::ecdsa::signature::{Signer, Verifier};

use super::common;
use crate::error::CoreError;
use crate::suite::{
    derive_session_key, AeadKey, AeadNonce, CryptoSuite, KemCiphertext, KemPublicKey,
    KemSecretKey, SessionKey, Signature, SigningKey, VerifyingKey, HASH_LEN,
};

pub const SUITE_ID: &str = "pq-mlkem768";

type DecapKey = <MlKem768 as KemCore>::DecapsulationKey;
type EncapKey = <MlKem768 as KemCore>::EncapsulationKey;

pub const MLKEM_EK_LEN: usize = 1184;
pub const MLKEM_DK_LEN: usize = 2400;
pub const MLKEM_CT_LEN: usize = 1088;

pub struct MlKemSuite;

impl CryptoSuite for MlKemSuite {
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
        // Rejection-sample until the scalar is a valid non-zero field
        // element; overwhelmingly succeeds on the first draw.
        loop {
            let mut candidate = [0u8; 32];
            rng.fill_bytes(&mut candidate);
            if let Ok(sk) = ecdsa::SigningKey::from_slice(&candidate) {
                let vk = sk.verifying_key().to_sec1_bytes().to_vec();
                return (SigningKey(candidate.to_vec()), VerifyingKey(vk));
            }
        }
    }

    fn sign(&self, sk: &SigningKey, msg: &[u8]) -> Result<Signature, CoreError> {
        let sk = ecdsa::SigningKey::from_slice(sk.as_bytes())
            .map_err(|_| CoreError::KeyMaterial("invalid p256 signing key"))?;
        let sig: ecdsa::Signature = sk.sign(msg);
        Ok(Signature(sig.to_bytes().to_vec()))
    }

    fn verify(&self, vk: &VerifyingKey, msg: &[u8], sig: &Signature) -> bool {
        let Ok(vk) = ecdsa::VerifyingKey::from_sec1_bytes(vk.as_bytes()) else {
            return false;
        };
        let Ok(sig) = ecdsa::Signature::from_slice(sig.as_bytes()) else {
            return false;
        };
        vk.verify(msg, &sig).is_ok()
    }

    fn gen_kem_keypair(
        &self,
        rng: &mut dyn rand_core::CryptoRngCore,
    ) -> (KemSecretKey, KemPublicKey) {
        let mut d = [0u8; 32];
        let mut z = [0u8; 32];
        rng.fill_bytes(&mut d);
        rng.fill_bytes(&mut z);
        let (dk, ek) = MlKem768::generate_deterministic(&d.into(), &z.into());
        (
            KemSecretKey(dk.as_bytes().to_vec()),
            KemPublicKey(ek.as_bytes().to_vec()),
        )
    }

    fn encap(
        &self,
        pk: &KemPublicKey,
        rng: &mut dyn rand_core::CryptoRngCore,
    ) -> Result<(KemCiphertext, SessionKey), CoreError> {
        let ek_arr: [u8; MLKEM_EK_LEN] = pk
            .as_bytes()
            .try_into()
            .map_err(|_| CoreError::KeyMaterial("ml-kem encapsulation key must be 1184 bytes"))?;
        let ek = EncapKey::from_bytes(&ek_arr.into());
        let mut m = [0u8; 32];
        rng.fill_bytes(&mut m);
        let (ct, shared) = ek
            .encapsulate_deterministic(&m.into())
            .map_err(|_| CoreError::Kem("ml-kem encapsulation failed"))?;
        let ct = KemCiphertext(ct.to_vec());
        let key = derive_session_key(self, shared.as_slice(), ct.as_bytes(), pk.as_bytes());
        Ok((ct, key))
    }

    fn decap(&self, sk: &KemSecretKey, ct: &KemCiphertext) -> Result<SessionKey, CoreError> {
        let dk_arr: [u8; MLKEM_DK_LEN] = sk
            .as_bytes()
            .try_into()
            .map_err(|_| CoreError::KeyMaterial("ml-kem decapsulation key must be 2400 bytes"))?;
        let dk = DecapKey::from_bytes(&dk_arr.into());
        let ct_arr = Ciphertext::<MlKem768>::try_from(ct.as_bytes())
            .map_err(|_| CoreError::Kem("ml-kem ciphertext must be 1088 bytes"))?;
        let shared = dk
            .decapsulate(&ct_arr)
            .map_err(|_| CoreError::Kem("ml-kem decapsulation failed"))?;
        // Recompute the public key for the KDF binding.
        let ek = dk.encapsulation_key();
        Ok(derive_session_key(
            self,
            shared.as_slice(),
            ct.as_bytes(),
            ek.as_bytes().as_slice(),
        ))
    }
}
