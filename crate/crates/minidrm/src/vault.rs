//! Emulated TEE vault. This is the only module that ever holds clear
//! content keys. The process boundary is emulated as an API boundary:
//! everything that crosses out of the vault is public material (handles,
//! ciphertexts, digests, counts, signatures). Decrypted media never
//! leaves; it is delivered to an in-boundary sink that exposes only a
//! running digest and byte count.
//!
//! Expiry semantics: the decrypt gate compares the playback session's
//! start time against the entry expiry, so a session that began before
//! expiry finishes undisturbed while any later session is refused.
//! `dispose_expired` is the hard stop; disposed keys are wiped and gone
//! regardless of session.

use std::collections::HashMap;
use std::sync::Mutex;

use minidrm_core::derive::{device_id, offline_binding_key};
use minidrm_core::error::CoreError;
use minidrm_core::keys::Identity;
use minidrm_core::messages::{
    ckc_ad, offline_ad, segment_ad, Attestation, AttestationBody, CkcPayload, LicensePolicy,
    OfflinePayload, OfflineRecord, SegmentRecord, WrappedKey,
};
use minidrm_core::suite::{
    AeadNonce, CryptoSuite, KemCiphertext, KemPublicKey, SessionKey, Signature, SigningKey,
    VerifyingKey,
};
use minidrm_core::types::{wipe, DeviceId, KeyId, SecurityLevel};
use minidrm_core::wire::WireMessage;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VaultError {
    #[error("key not installed")]
    KeyMissing,
    #[error("key expired")]
    KeyExpired,
    #[error("unknown license session")]
    SessionUnknown,
    #[error("unknown sink")]
    SinkUnknown,
    #[error("sealed payload failed to open")]
    OpenFailed,
    #[error("license is not persistent")]
    NotPersistent,
    #[error("record is bound to a different device")]
    DeviceMismatch,
    #[error("vault identity is incomplete: {0}")]
    Identity(&'static str),
    #[error("crypto failure: {0}")]
    Crypto(String),
}

impl From<CoreError> for VaultError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::AeadOpen => VaultError::OpenFailed,
            other => VaultError::Crypto(other.to_string()),
        }
    }
}

/// Build-time weakenings used exclusively by the conformance harness's
/// negative fixtures. The default is fully hardened.
#[derive(Debug, Clone, Copy)]
pub struct VaultOptions {
    /// When false the decrypt gate ignores entry expiry and disposal is a
    /// no-op (fixture: vault-ignores-expiry).
    pub enforce_expiry: bool,
    /// When true license payloads are opened with the unauthenticated
    /// stream cipher (fixture: unauthenticated-license).
    pub plain_license: bool,
    /// When true segments are opened with the unauthenticated stream
    /// cipher (fixture: plain-segment-cipher).
    pub plain_segments: bool,
}

impl Default for VaultOptions {
    fn default() -> Self {
        VaultOptions {
            enforce_expiry: true,
            plain_license: false,
            plain_segments: false,
        }
    }
}

struct VaultEntry {
    key: [u8; 16],
    expiry: u64,
    persistent: bool,
}

impl Drop for VaultEntry {
    fn drop(&mut self) {
        wipe(&mut self.key);
    }
}

/// In-boundary media sink. The chained digest is
/// `acc_0 = [0; 32]`, `acc_{i+1} = H(acc_i ‖ chunk_i)`; verifiers fold
/// the same chain over the expected plaintext chunks.
struct SinkState {
    acc: [u8; 32],
    count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SessionHandle(u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SinkId(u64);

/// What install_license reports back across the boundary: identifiers and
/// policy, never key bytes.
#[derive(Debug, Clone)]
pub struct InstalledLicense {
    pub key_ids: Vec<KeyId>,
    pub policy: LicensePolicy,
    pub lease_token: Option<[u8; 16]>,
    pub server_time: u64,
}

/// What opening an offline record reports back: the embedded manifest and
/// policy; keys go straight into the entry table.
#[derive(Debug, Clone)]
pub struct RestoredLicense {
    pub key_ids: Vec<KeyId>,
    pub policy: LicensePolicy,
    pub signed_manifest: Vec<u8>,
    pub stored_at: u64,
}

struct VaultState {
    entries: HashMap<KeyId, VaultEntry>,
    sessions: HashMap<u64, SessionKey>,
    sinks: HashMap<u64, SinkState>,
    next_session: u64,
    next_sink: u64,
}

pub struct TeeVault {
    suite: &'static dyn CryptoSuite,
    opts: VaultOptions,
    sig_sk: SigningKey,
    sig_pk: VerifyingKey,
    kem_pk: KemPublicKey,
    level: SecurityLevel,
    device: DeviceId,
    state: Mutex<VaultState>,
    rng: Mutex<ChaCha20Rng>,
}

impl TeeVault {
    /// Provision a vault from a device identity file (role client or
    /// vault). The rng seed only affects nonce generation.
    pub fn new(
        suite: &'static dyn CryptoSuite,
        identity: &Identity,
        opts: VaultOptions,
        rng_seed: u64,
    ) -> Result<TeeVault, VaultError> {
        if !identity.role.is_device() {
            return Err(VaultError::Identity("identity is not a device identity"));
        }
        if identity.suite_id != suite.id() {
            return Err(VaultError::Identity("identity suite mismatch"));
        }
        let sig_sk = identity
            .sig_sk
            .clone()
            .ok_or(VaultError::Identity("missing signing key"))?;
        let sig_pk = identity
            .sig_pk
            .clone()
            .ok_or(VaultError::Identity("missing verifying key"))?;
        let kem_pk = identity
            .kem_pk
            .clone()
            .ok_or(VaultError::Identity("missing KEM public key"))?;
        let level = identity
            .security_level
            .ok_or(VaultError::Identity("missing security level"))?;
        let device = device_id(suite, sig_pk.as_bytes(), kem_pk.as_bytes());
        Ok(TeeVault {
            suite,
            opts,
            sig_sk,
            sig_pk,
            kem_pk,
            level,
            device,
            state: Mutex::new(VaultState {
                entries: HashMap::new(),
                sessions: HashMap::new(),
                sinks: HashMap::new(),
                next_session: 1,
                next_sink: 1,
            }),
            rng: Mutex::new(ChaCha20Rng::seed_from_u64(rng_seed)),
        })
    }

    pub fn device_id(&self) -> DeviceId {
        self.device
    }

    pub fn security_level(&self) -> SecurityLevel {
        self.level
    }

    pub fn verifying_key(&self) -> &VerifyingKey {
        &self.sig_pk
    }

    pub fn kem_public_key(&self) -> &KemPublicKey {
        &self.kem_pk
    }

    /// Sign a protocol payload with the device identity key.
    pub fn sign_payload(&self, msg: &[u8]) -> Result<Signature, VaultError> {
        Ok(self.suite.sign(&self.sig_sk, msg)?)
    }

    /// Start a license exchange: encapsulate to the server's KEM key. The
    /// session key never leaves; the caller gets a handle plus the
    /// ciphertext to put in the request.
    pub fn begin_license_session(
        &self,
        server_kem_pk: &KemPublicKey,
    ) -> Result<(SessionHandle, KemCiphertext), VaultError> {
        let (ct, key) = {
            let mut rng = self.rng.lock().unwrap();
            self.suite.encap(server_kem_pk, &mut *rng)?
        };
        let mut st = self.state.lock().unwrap();
        let handle = st.next_session;
        st.next_session += 1;
        st.sessions.insert(handle, key);
        Ok((SessionHandle(handle), ct))
    }

    pub fn forget_session(&self, handle: SessionHandle) {
        self.state.lock().unwrap().sessions.remove(&handle.0);
    }

    /// Open a sealed license payload under the session key and install
    /// its content keys. Consumes the session on success.
    pub fn install_license(
        &self,
        handle: SessionHandle,
        anti_replay_seed: &[u8; 16],
        sealed: &[u8],
    ) -> Result<InstalledLicense, VaultError> {
        let mut st = self.state.lock().unwrap();
        let session = st
            .sessions
            .get(&handle.0)
            .ok_or(VaultError::SessionUnknown)?;
        if sealed.len() < 12 {
            return Err(VaultError::OpenFailed);
        }
        let nonce = AeadNonce(sealed[..12].try_into().unwrap());
        let ct = &sealed[12..];
        let aead_key = minidrm_core::suite::AeadKey(session.0);
        let ad = ckc_ad(anti_replay_seed);
        let payload_bytes = if self.opts.plain_license {
            let mut buf = ct.to_vec();
            self.suite.stream_xor(&aead_key, &nonce, &mut buf);
            buf
        } else {
            self.suite.open(&aead_key, &nonce, &ad, ct)?
        };
        let payload =
            CkcPayload::decode(&payload_bytes).map_err(|_| VaultError::OpenFailed)?;
        let mut key_ids = Vec::with_capacity(payload.keys.len());
        for wk in &payload.keys {
            st.entries.insert(
                wk.key_id,
                VaultEntry {
                    key: wk.key,
                    expiry: payload.policy.expiry,
                    persistent: payload.policy.persistent,
                },
            );
            key_ids.push(wk.key_id);
        }
        st.sessions.remove(&handle.0);
        Ok(InstalledLicense {
            key_ids,
            policy: payload.policy.clone(),
            lease_token: payload.lease_token,
            server_time: payload.server_time,
        })
    }

    pub fn create_sink(&self) -> SinkId {
        let mut st = self.state.lock().unwrap();
        let id = st.next_sink;
        st.next_sink += 1;
        st.sinks.insert(
            id,
            SinkState {
                acc: [0u8; 32],
                count: 0,
            },
        );
        SinkId(id)
    }

    /// Digest and byte count of everything delivered to the sink so far.
    /// The only observable trace of decrypted media.
    pub fn sink_state(&self, sink: SinkId) -> Result<([u8; 32], u64), VaultError> {
        let st = self.state.lock().unwrap();
        let s = st.sinks.get(&sink.0).ok_or(VaultError::SinkUnknown)?;
        Ok((s.acc, s.count))
    }

    /// Decrypt one sealed segment into a sink. `session_start` is when
    /// the enclosing playback session began; the expiry gate uses it so a
    /// mid-playback expiry does not interrupt the running session.
    pub fn decrypt_segment_to_sink(
        &self,
        content_id: &str,
        record: &SegmentRecord,
        sealed: &[u8],
        sink: SinkId,
        session_start: u64,
    ) -> Result<u64, VaultError> {
        let mut st = self.state.lock().unwrap();
        let entry = st
            .entries
            .get(&record.key_id)
            .ok_or(VaultError::KeyMissing)?;
        if self.opts.enforce_expiry && session_start >= entry.expiry {
            return Err(VaultError::KeyExpired);
        }
        let key = minidrm_core::suite::AeadKey(entry.key);
        let nonce = AeadNonce::for_segment(record.period, record.index);
        let ad = segment_ad(content_id, record.index, record.key_id);
        let plaintext = if self.opts.plain_segments {
            // Stream mode: the packager writes a zeroed tag slot to keep
            // record arithmetic uniform; strip it, nothing checks it.
            let body_len = sealed
                .len()
                .saturating_sub(minidrm_core::suite::AEAD_TAG_LEN);
            let mut buf = sealed[..body_len].to_vec();
            self.suite.stream_xor(&key, &nonce, &mut buf);
            buf
        } else {
            self.suite.open(&key, &nonce, &ad, sealed)?
        };
        let delivered = plaintext.len() as u64;
        let suite = self.suite;
        let s = st.sinks.get_mut(&sink.0).ok_or(VaultError::SinkUnknown)?;
        let mut input = Vec::with_capacity(32 + plaintext.len());
        input.extend_from_slice(&s.acc);
        input.extend_from_slice(&plaintext);
        s.acc = suite.hash(&input);
        s.count += delivered;
        Ok(delivered)
    }

    /// Extend entry expiries after a verified lease renewal. Monotonic:
    /// a replayed older renewal can never shorten a grant.
    pub fn extend_expiry(&self, key_ids: &[KeyId], new_expiry: u64) -> Result<(), VaultError> {
        let mut st = self.state.lock().unwrap();
        for kid in key_ids {
            let entry = st.entries.get_mut(kid).ok_or(VaultError::KeyMissing)?;
            entry.expiry = entry.expiry.max(new_expiry);
        }
        Ok(())
    }

    /// Wipe and remove every entry whose expiry has passed. Returns how
    /// many entries were disposed.
    pub fn dispose_expired(&self, now: u64) -> usize {
        if !self.opts.enforce_expiry {
            return 0;
        }
        let mut st = self.state.lock().unwrap();
        let before = st.entries.len();
        st.entries.retain(|_, e| e.expiry > now);
        before - st.entries.len()
    }

    pub fn installed_key_ids(&self) -> Vec<KeyId> {
        let st = self.state.lock().unwrap();
        let mut ids: Vec<KeyId> = st.entries.keys().copied().collect();
        ids.sort();
        ids
    }

    /// Signed statement of vault identity, level, and a caller challenge.
    pub fn attest(&self, challenge: &[u8]) -> Result<Attestation, VaultError> {
        let body = AttestationBody {
            suite_id: self.suite.id().to_string(),
            challenge: challenge.to_vec(),
            security_level: self.level,
            device_id: self.device,
        };
        let body_bytes = body.encode();
        let signature = self.sign_payload(&body_bytes)?;
        Ok(Attestation {
            body_bytes,
            signature,
        })
    }

    /// Seal installed keys plus the signed manifest into a record bound
    /// to this device. Requires a persistent policy.
    pub fn seal_offline_record(
        &self,
        content_id: &str,
        signed_manifest: &[u8],
        policy: &LicensePolicy,
        key_ids: &[KeyId],
        now: u64,
    ) -> Result<OfflineRecord, VaultError> {
        if !policy.persistent {
            return Err(VaultError::NotPersistent);
        }
        let st = self.state.lock().unwrap();
        let mut keys = Vec::with_capacity(key_ids.len());
        for kid in key_ids {
            let entry = st.entries.get(kid).ok_or(VaultError::KeyMissing)?;
            if !entry.persistent {
                return Err(VaultError::NotPersistent);
            }
            keys.push(WrappedKey {
                key_id: *kid,
                key: entry.key,
            });
        }
        drop(st);
        let payload = OfflinePayload {
            content_id: content_id.to_string(),
            signed_manifest: signed_manifest.to_vec(),
            policy: policy.clone(),
            keys,
            stored_at: now,
        };
        let binding = offline_binding_key(self.suite, &self.sig_sk);
        let nonce = {
            let mut rng = self.rng.lock().unwrap();
            AeadNonce::random(&mut *rng)
        };
        let ad = offline_ad(content_id, &self.device);
        let sealed = self.suite.seal(&binding, &nonce, &ad, &payload.encode());
        Ok(OfflineRecord {
            content_id: content_id.to_string(),
            device_id: self.device,
            nonce: nonce.0,
            sealed,
        })
    }

    /// Open a device-bound offline record and install its keys.
    pub fn open_offline_record(&self, record: &OfflineRecord) -> Result<RestoredLicense, VaultError> {
        if record.device_id != self.device {
            return Err(VaultError::DeviceMismatch);
        }
        let binding = offline_binding_key(self.suite, &self.sig_sk);
        let ad = offline_ad(&record.content_id, &record.device_id);
        let payload_bytes = self
            .suite
            .open(&binding, &AeadNonce(record.nonce), &ad, &record.sealed)?;
        let payload =
            OfflinePayload::decode(&payload_bytes).map_err(|_| VaultError::OpenFailed)?;
        let mut st = self.state.lock().unwrap();
        let mut key_ids = Vec::with_capacity(payload.keys.len());
        for wk in &payload.keys {
            st.entries.insert(
                wk.key_id,
                VaultEntry {
                    key: wk.key,
                    expiry: payload.policy.expiry,
                    persistent: true,
                },
            );
            key_ids.push(wk.key_id);
        }
        Ok(RestoredLicense {
            key_ids,
            policy: payload.policy.clone(),
            signed_manifest: payload.signed_manifest.clone(),
            stored_at: payload.stored_at,
        })
    }
}

impl std::fmt::Debug for TeeVault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let st = self.state.lock().unwrap();
        write!(
            f,
            "TeeVault {{ device: {:?}, level: {:?}, entries: {}, keys: <redacted> }}",
            self.device,
            self.level,
            st.entries.len()
        )
    }
}

/// Fold the sink digest chain over expected plaintext chunks; the
/// verifier-side counterpart of the sink.
pub fn expected_sink_digest(suite: &dyn CryptoSuite, chunks: &[&[u8]]) -> [u8; 32] {
    let mut acc = [0u8; 32];
    for chunk in chunks {
        let mut input = Vec::with_capacity(32 + chunk.len());
        input.extend_from_slice(&acc);
        input.extend_from_slice(chunk);
        acc = suite.hash(&input);
    }
    acc
}
