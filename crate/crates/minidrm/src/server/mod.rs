//! License server. Stateless request/response over wire messages; every
//! denial is an ErrorEnvelope with a stable code. The check pipeline
//! order is part of the protocol contract: cheap structural checks first,
//! then rate limiting, then cryptographic authentication, then policy.

pub mod http;
pub mod lease;
pub mod metering;
pub mod ratelimit;
pub mod replay;

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Mutex;

use minidrm_core::cert::{CertRole, Certificate};
use minidrm_core::derive::{secure_content_id, server_storage_key};
use minidrm_core::error::{CoreError, ErrorCode};
use minidrm_core::keys::{Identity, KeyRole};
use minidrm_core::messages::{
    ckc_ad, registry_ad, Ckc, CkcPayload, ErrorEnvelope, KeyRegistry, LeaseReleaseBody,
    LeaseReleaseReq, LeaseReleaseResp, LeaseRenewBody, LeaseRenewReq, LeaseRenewResp,
    LeaseRenewRespBody, LicensePolicy, MeteringReport, PolicyMode, SealedRegistry, Spc, SpcBody,
    WrappedKey,
};
use minidrm_core::suite::{AeadKey, AeadNonce, CryptoSuite, KemSecretKey, Signature, SigningKey, VerifyingKey};
use minidrm_core::time::Clock;
use minidrm_core::types::{to_hex, KeyId, SecurityLevel};
use minidrm_core::wire::WireMessage;
use minidrm_core::{CURRENT_PROTOCOL_VERSION, SUPPORTED_PROTOCOL_VERSIONS};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use std::sync::Arc;
use thiserror::Error;

use crate::packager;
use lease::{LeaseError, LeaseTable};
use metering::MeteringLog;
use ratelimit::RateLimiter;
use replay::ReplayLedger;

pub const KEYDB_LABEL: &[u8] = b"minidrm/keydb/v1";

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("config: {0}")]
    Config(String),
    #[error("crypto: {0}")]
    Crypto(#[from] CoreError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Per-content licensing policy, fixed at install time.
#[derive(Debug, Clone, Copy)]
pub struct ContentPolicy {
    pub mode: PolicyMode,
    /// Rental/persistent validity span in seconds.
    pub rental_duration: u64,
    /// Lease slot span in seconds; also the renew extension.
    pub lease_duration: u64,
    /// Lease slot capacity per account.
    pub max_concurrent: u32,
    pub min_level: SecurityLevel,
}

struct ContentEntry {
    content_id: String,
    keys: HashMap<KeyId, [u8; 16]>,
    registry: KeyRegistry,
    policy: ContentPolicy,
}

/// Deliberate weakenings for conformance fixtures plus tunables.
#[derive(Debug, Clone)]
pub struct ServerOptions {
    /// Lowest protocol version this deployment will negotiate.
    pub version_floor: u16,
    /// Freshness window in seconds.
    pub replay_window: u64,
    /// None disables rate limiting.
    pub rate_limit_per_sec: Option<u32>,
    /// Fixture: disable the anti-replay seed ledger.
    pub replay_ledger: bool,
    /// Fixture: seal licenses with the unauthenticated stream cipher and
    /// skip the server signature.
    pub plain_license: bool,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            version_floor: CURRENT_PROTOCOL_VERSION,
            replay_window: 60,
            rate_limit_per_sec: None,
            replay_ledger: true,
            plain_license: false,
        }
    }
}

pub struct LicenseService {
    suite: &'static dyn CryptoSuite,
    clock: Arc<dyn Clock>,
    sig_sk: SigningKey,
    kem_sk: KemSecretKey,
    certificate: Certificate,
    root_vk: VerifyingKey,
    opts: ServerOptions,
    /// Auth token to account name.
    auth: HashMap<String, String>,
    contents: Mutex<HashMap<[u8; 32], ContentEntry>>,
    replay: ReplayLedger,
    leases: LeaseTable,
    metering: MeteringLog,
    rate: RateLimiter,
    rng: Mutex<ChaCha20Rng>,
}

fn deny(code: ErrorCode, message: &str) -> ErrorEnvelope {
    ErrorEnvelope {
        code,
        message: message.to_string(),
    }
}

impl LicenseService {
    pub fn new(
        suite: &'static dyn CryptoSuite,
        identity: &Identity,
        certificate: Certificate,
        root_vk: VerifyingKey,
        clock: Arc<dyn Clock>,
        auth: HashMap<String, String>,
        opts: ServerOptions,
        rng_seed: u64,
    ) -> Result<LicenseService, ServerError> {
        if identity.role != KeyRole::Server {
            return Err(ServerError::Config("identity is not a server identity".into()));
        }
        if identity.suite_id != suite.id() {
            return Err(ServerError::Config("identity suite mismatch".into()));
        }
        certificate.verify(suite, &root_vk)?;
        if certificate.body.role != CertRole::Server {
            return Err(ServerError::Config("certificate role is not server".into()));
        }
        let sig_sk = identity.require_sig_sk()?.clone();
        let kem_sk = identity.require_kem_sk()?.clone();
        if certificate.body.sig_pk != *identity.require_sig_pk()? {
            return Err(ServerError::Config("certificate does not match identity".into()));
        }
        if !SUPPORTED_PROTOCOL_VERSIONS.contains(&opts.version_floor) {
            return Err(ServerError::Config("version floor is not a supported version".into()));
        }
        Ok(LicenseService {
            suite,
            clock,
            sig_sk,
            kem_sk,
            certificate,
            root_vk,
            replay: ReplayLedger::new(opts.replay_window, opts.replay_ledger),
            rate: RateLimiter::new(opts.rate_limit_per_sec),
            opts,
            auth,
            contents: Mutex::new(HashMap::new()),
            leases: LeaseTable::new(),
            metering: MeteringLog::new(),
            rng: Mutex::new(ChaCha20Rng::seed_from_u64(rng_seed)),
        })
    }

    pub fn suite(&self) -> &'static dyn CryptoSuite {
        self.suite
    }

    /// Encoded server certificate, served to clients before any license
    /// exchange.
    pub fn certificate_bytes(&self) -> Vec<u8> {
        self.certificate.encode()
    }

    pub fn install_content(
        &self,
        registry: KeyRegistry,
        policy: ContentPolicy,
    ) -> Result<(), ServerError> {
        if registry.suite_id != self.suite.id() {
            return Err(ServerError::Config(format!(
                "registry suite {} does not match server suite {}",
                registry.suite_id,
                self.suite.id()
            )));
        }
        if registry.entries.is_empty() {
            return Err(ServerError::Config("registry has no keys".into()));
        }
        if policy.mode == PolicyMode::Lease {
            if policy.max_concurrent == 0 {
                return Err(ServerError::Config("lease policy needs max_concurrent > 0".into()));
            }
            if policy.lease_duration == 0 {
                return Err(ServerError::Config("lease policy needs lease_duration > 0".into()));
            }
        } else if policy.rental_duration == 0 {
            return Err(ServerError::Config("policy needs rental_duration > 0".into()));
        }
        let scid = secure_content_id(self.suite, &registry.content_id);
        let keys = registry
            .entries
            .iter()
            .map(|e| (e.key_id, *e.key_bytes()))
            .collect();
        self.contents.lock().unwrap().insert(
            scid,
            ContentEntry {
                content_id: registry.content_id.clone(),
                keys,
                registry,
                policy,
            },
        );
        Ok(())
    }

    /// The license pipeline. Stage order is fixed; each stage owns one
    /// error code so a denial pinpoints the failing check.
    pub fn handle_license(&self, raw: &[u8]) -> Result<Vec<u8>, ErrorEnvelope> {
        let now = self.clock.now();

        // 1. Structure.
        let spc = Spc::decode(raw).map_err(|e| deny(ErrorCode::Malformed, &e.to_string()))?;
        let body = SpcBody::decode(&spc.body_bytes)
            .map_err(|e| deny(ErrorCode::Malformed, &e.to_string()))?;
        if body.suite_id != self.suite.id() {
            return Err(deny(ErrorCode::Malformed, "crypto suite mismatch"));
        }
        if body.key_ids.is_empty() {
            return Err(deny(ErrorCode::Malformed, "no key ids requested"));
        }
        let cert = Certificate::decode(&body.client_certificate)
            .map_err(|_| deny(ErrorCode::BadCert, "client certificate unparseable"))?;

        // 2. Rate limit, keyed by the claimed device id. Runs before the
        // expensive signature checks by design; a forged id only ever
        // throttles the forger's own bucket.
        if !self.rate.allow(cert.body.device_id, now) {
            return Err(deny(ErrorCode::RateLimited, "request rate exceeded"));
        }

        // 3. Certificate chain.
        if cert.verify(self.suite, &self.root_vk).is_err() {
            return Err(deny(ErrorCode::BadCert, "certificate rejected"));
        }
        if cert.body.role != CertRole::Client {
            return Err(deny(ErrorCode::BadCert, "certificate role is not client"));
        }

        // 4. Request authentication under the certified device key.
        if !self.suite.verify(&cert.body.sig_pk, &spc.body_bytes, &spc.signature) {
            return Err(deny(ErrorCode::BadSignature, "request signature rejected"));
        }

        // 5. Account authorization.
        let account = self
            .auth
            .get(&body.auth_token)
            .ok_or_else(|| deny(ErrorCode::AuthFailed, "unknown auth token"))?
            .clone();

        // 6. Replay: freshness plus seed ledger.
        self.replay
            .check_and_insert(body.anti_replay_seed, body.client_time, now)
            .map_err(|r| match r {
                replay::ReplayRejection::StaleTime => deny(ErrorCode::Replay, "client time outside freshness window"),
                replay::ReplayRejection::DuplicateSeed => deny(ErrorCode::Replay, "anti-replay seed already used"),
            })?;

        // 7. Version negotiation with a floor.
        let negotiated = body
            .protocol_versions
            .iter()
            .copied()
            .filter(|v| *v <= CURRENT_PROTOCOL_VERSION && *v >= self.opts.version_floor)
            .max();
        if negotiated.is_none() {
            return Err(deny(ErrorCode::VersionRollback, "no acceptable protocol version"));
        }

        // 8. Content resolution.
        let contents = self.contents.lock().unwrap();
        let entry = contents
            .get(&body.secure_content_id)
            .ok_or_else(|| deny(ErrorCode::UnknownKeyId, "unknown content"))?;

        // 9. Robustness floor.
        if cert.body.security_level < entry.policy.min_level {
            return Err(deny(ErrorCode::LevelTooLow, "device security level below policy floor"));
        }

        // 10. Requested keys must all belong to the content.
        let mut keys = Vec::with_capacity(body.key_ids.len());
        for kid in &body.key_ids {
            let key = entry
                .keys
                .get(kid)
                .ok_or_else(|| deny(ErrorCode::UnknownKeyId, "key id not in content registry"))?;
            keys.push(WrappedKey {
                key_id: *kid,
                key: *key,
            });
        }

        // 11. Session key recovery.
        let session = self
            .suite
            .decap(&self.kem_sk, &body.session_key_encap)
            .map_err(|_| deny(ErrorCode::Malformed, "bad session key encapsulation"))?;

        // 12. Lease slot, when leased.
        let policy = entry.policy;
        let content_id = entry.content_id.clone();
        drop(contents);
        let lease_token = if policy.mode == PolicyMode::Lease {
            let mut fresh = [0u8; 16];
            self.rng.lock().unwrap().fill_bytes(&mut fresh);
            let grant = self
                .leases
                .with(|st| {
                    st.allocate(
                        &account,
                        body.secure_content_id,
                        cert.body.device_id,
                        policy.max_concurrent,
                        policy.lease_duration,
                        now,
                        fresh,
                    )
                })
                .map_err(|_| deny(ErrorCode::LeaseExhausted, "no free lease slot"))?;
            Some(grant.token)
        } else {
            None
        };

        // 13. Seal and sign the response.
        let expiry = match policy.mode {
            PolicyMode::Lease => body.client_time + policy.lease_duration,
            _ => body.client_time + policy.rental_duration,
        };
        let payload = CkcPayload {
            keys,
            policy: LicensePolicy {
                mode: policy.mode,
                expiry,
                persistent: policy.mode == PolicyMode::Persistent,
                min_security_level: policy.min_level,
                max_concurrent: if policy.mode == PolicyMode::Lease { policy.max_concurrent } else { 0 },
                lease_duration: if policy.mode == PolicyMode::Lease { policy.lease_duration } else { 0 },
            },
            server_time: now,
            lease_token,
        };
        let aead_key = AeadKey(session.0);
        let nonce = {
            let mut rng = self.rng.lock().unwrap();
            AeadNonce::random(&mut *rng)
        };
        let ad = ckc_ad(&body.anti_replay_seed);
        let payload_bytes = payload.encode();
        let mut sealed = Vec::with_capacity(12 + payload_bytes.len() + 16);
        sealed.extend_from_slice(&nonce.0);
        if self.opts.plain_license {
            let mut ct = payload_bytes;
            self.suite.stream_xor(&aead_key, &nonce, &mut ct);
            sealed.extend_from_slice(&ct);
        } else {
            sealed.extend_from_slice(&self.suite.seal(&aead_key, &nonce, &ad, &payload_bytes));
        }
        let server_signature = if self.opts.plain_license {
            Signature(Vec::new())
        } else {
            self.suite
                .sign(&self.sig_sk, &sealed)
                .map_err(|_| deny(ErrorCode::Internal, "response signing failed"))?
        };

        self.metering.record_issue(&account, &content_id);
        Ok(Ckc {
            sealed,
            server_signature,
        }
        .encode())
    }

    /// Shared front half of renew/release: structure, certificate,
    /// request signature, account, freshness, content resolution.
    #[allow(clippy::type_complexity)]
    fn verify_lease_request(
        &self,
        suite_id: &str,
        client_time: u64,
        scid: [u8; 32],
        auth_token: &str,
        cert_bytes: &[u8],
        body_bytes: &[u8],
        signature: &Signature,
        now: u64,
    ) -> Result<(String, Certificate, ContentPolicy, String), ErrorEnvelope> {
        if suite_id != self.suite.id() {
            return Err(deny(ErrorCode::Malformed, "crypto suite mismatch"));
        }
        let cert = Certificate::decode(cert_bytes)
            .map_err(|_| deny(ErrorCode::BadCert, "client certificate unparseable"))?;
        if cert.verify(self.suite, &self.root_vk).is_err() {
            return Err(deny(ErrorCode::BadCert, "certificate rejected"));
        }
        if cert.body.role != CertRole::Client {
            return Err(deny(ErrorCode::BadCert, "certificate role is not client"));
        }
        if !self.suite.verify(&cert.body.sig_pk, body_bytes, signature) {
            return Err(deny(ErrorCode::BadSignature, "request signature rejected"));
        }
        let account = self
            .auth
            .get(auth_token)
            .ok_or_else(|| deny(ErrorCode::AuthFailed, "unknown auth token"))?
            .clone();
        self.replay
            .check_fresh(client_time, now)
            .map_err(|_| deny(ErrorCode::Replay, "client time outside freshness window"))?;
        let contents = self.contents.lock().unwrap();
        let entry = contents
            .get(&scid)
            .ok_or_else(|| deny(ErrorCode::UnknownKeyId, "unknown content"))?;
        Ok((account, cert, entry.policy, entry.content_id.clone()))
    }

    pub fn handle_renew(&self, raw: &[u8]) -> Result<Vec<u8>, ErrorEnvelope> {
        let now = self.clock.now();
        let req = LeaseRenewReq::decode(raw).map_err(|e| deny(ErrorCode::Malformed, &e.to_string()))?;
        let body = LeaseRenewBody::decode(&req.body_bytes)
            .map_err(|e| deny(ErrorCode::Malformed, &e.to_string()))?;
        let (account, cert, policy, content_id) = self.verify_lease_request(
            &body.suite_id,
            body.client_time,
            body.secure_content_id,
            &body.auth_token,
            &body.client_certificate,
            &req.body_bytes,
            &req.signature,
            now,
        )?;
        if policy.mode != PolicyMode::Lease {
            return Err(deny(ErrorCode::LeaseNotHeld, "content is not leased"));
        }
        self.leases
            .with(|st| {
                st.renew(
                    &account,
                    body.secure_content_id,
                    cert.body.device_id,
                    body.lease_token,
                    policy.lease_duration,
                    now,
                )
            })
            .map_err(|e| match e {
                LeaseError::NotHeld => deny(ErrorCode::LeaseNotHeld, "no live lease for this token"),
                LeaseError::Exhausted => deny(ErrorCode::LeaseExhausted, "no free lease slot"),
            })?;
        let resp_body = LeaseRenewRespBody {
            new_expiry: body.client_time + policy.lease_duration,
            lease_token: body.lease_token,
            server_time: now,
        }
        .encode();
        let server_signature = self
            .suite
            .sign(&self.sig_sk, &resp_body)
            .map_err(|_| deny(ErrorCode::Internal, "response signing failed"))?;
        self.metering.record_renew(&account, &content_id);
        Ok(LeaseRenewResp {
            body_bytes: resp_body,
            server_signature,
        }
        .encode())
    }

    pub fn handle_release(&self, raw: &[u8]) -> Result<Vec<u8>, ErrorEnvelope> {
        let now = self.clock.now();
        let req = LeaseReleaseReq::decode(raw)
            .map_err(|e| deny(ErrorCode::Malformed, &e.to_string()))?;
        let body = LeaseReleaseBody::decode(&req.body_bytes)
            .map_err(|e| deny(ErrorCode::Malformed, &e.to_string()))?;
        let (account, cert, _policy, content_id) = self.verify_lease_request(
            &body.suite_id,
            body.client_time,
            body.secure_content_id,
            &body.auth_token,
            &body.client_certificate,
            &req.body_bytes,
            &req.signature,
            now,
        )?;
        let released = self.leases.with(|st| {
            st.release(
                &account,
                body.secure_content_id,
                cert.body.device_id,
                body.lease_token,
                now,
            )
        });
        if released {
            self.metering.record_release(&account, &content_id);
        }
        Ok(LeaseReleaseResp { released }.encode())
    }

    pub fn metering_report(&self, account: &str) -> MeteringReport {
        self.metering.report(account, self.clock.now())
    }

    /// Re-seal every installed registry under the server storage key and
    /// write it to `dir`. At-rest protection is independent of transport
    /// protection; nothing in `dir` ever holds clear key material.
    pub fn persist_keydb(&self, dir: &Path) -> Result<usize, ServerError> {
        fs::create_dir_all(dir)?;
        let storage_key = server_storage_key(self.suite, &self.sig_sk);
        let contents = self.contents.lock().unwrap();
        let mut written = 0;
        for (scid, entry) in contents.iter() {
            let nonce = {
                let mut rng = self.rng.lock().unwrap();
                AeadNonce::random(&mut *rng)
            };
            let ad = registry_ad(KEYDB_LABEL, &entry.content_id);
            let sealed = self
                .suite
                .seal(&storage_key, &nonce, &ad, &entry.registry.encode());
            let record = SealedRegistry {
                content_id: entry.content_id.clone(),
                nonce: nonce.0,
                sealed,
            };
            fs::write(dir.join(format!("{}.reg", to_hex(&scid[..16]))), record.encode())?;
            written += 1;
        }
        Ok(written)
    }

    /// Load a keydb written by `persist_keydb`. Policies are not part of
    /// the at-rest record; the caller supplies them per content id.
    pub fn load_keydb(
        &self,
        dir: &Path,
        policies: &HashMap<String, ContentPolicy>,
    ) -> Result<usize, ServerError> {
        let storage_key = server_storage_key(self.suite, &self.sig_sk);
        let mut loaded = 0;
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("reg") {
                continue;
            }
            let record = SealedRegistry::decode(&fs::read(&path)?)
                .map_err(|e| ServerError::Config(format!("keydb record: {e}")))?;
            let ad = registry_ad(KEYDB_LABEL, &record.content_id);
            let plain = self
                .suite
                .open(&storage_key, &AeadNonce(record.nonce), &ad, &record.sealed)?;
            let registry = KeyRegistry::decode(&plain)
                .map_err(|e| ServerError::Config(format!("keydb registry: {e}")))?;
            let policy = policies.get(&registry.content_id).ok_or_else(|| {
                ServerError::Config(format!("no policy for content {}", registry.content_id))
            })?;
            self.install_content(registry, *policy)?;
            loaded += 1;
        }
        Ok(loaded)
    }

    /// Install a transport-sealed registry as produced by the packager.
    pub fn install_sealed_registry(
        &self,
        sealed: &SealedRegistry,
        transport_key: &AeadKey,
        policy: ContentPolicy,
    ) -> Result<(), ServerError> {
        let registry = packager::open_registry(self.suite, sealed, transport_key)
            .map_err(|e| ServerError::Config(format!("registry transport: {e}")))?;
        self.install_content(registry, policy)
    }
}
