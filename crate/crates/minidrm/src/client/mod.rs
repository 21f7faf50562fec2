//! DRM client / CDM front end. The client owns the untrusted half of
//! playback: manifest verification, license protocol, lease upkeep,
//! segment fetching. Everything involving clear keys or media happens
//! inside the vault it is provisioned with.

pub mod offline;
pub mod transport;

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use minidrm_core::cert::{CertRole, Certificate};
use minidrm_core::derive::secure_content_id;
use minidrm_core::error::ErrorCode;
use minidrm_core::messages::{
    Ckc, ErrorEnvelope, LeaseReleaseBody, LeaseReleaseReq, LeaseReleaseResp, LeaseRenewBody,
    LeaseRenewReq, LeaseRenewResp, LeaseRenewRespBody, LicensePolicy, Manifest, PolicyMode, Spc,
    SpcBody,
};
use minidrm_core::suite::{CryptoSuite, KemPublicKey, VerifyingKey};
use minidrm_core::time::Clock;
use minidrm_core::types::KeyId;
use minidrm_core::wire::WireMessage;
use minidrm_core::SUPPORTED_PROTOCOL_VERSIONS;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::packager;
use crate::vault::{SinkId, TeeVault, VaultError};
use transport::{LicenseTransport, TransportError};

#[derive(Debug, Error)]
pub enum ClientError {
    /// The server refused the request; carries the protocol error code.
    #[error("denied: {0}")]
    Denied(ErrorEnvelope),
    /// A local verification failed: manifest, certificate, license, or
    /// offline record did not check out.
    #[error("verification: {0}")]
    Verification(String),
    /// License or record valid but no longer usable.
    #[error("license expired")]
    Expired,
    #[error("vault: {0}")]
    Vault(VaultError),
    #[error("policy does not allow offline persistence")]
    NotPersistent,
    #[error("offline record already installed")]
    AlreadyInstalled,
    #[error("no offline record for this content")]
    RecordMissing,
    #[error("transport: {0}")]
    Transport(String),
    #[error("io: {0}")]
    Io(String),
}

impl ClientError {
    /// Process exit code for the CLI: 2 policy denial, 3 verification
    /// failure, 4 transport failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            ClientError::Denied(_) | ClientError::Expired => 2,
            ClientError::Verification(_)
            | ClientError::Vault(_)
            | ClientError::NotPersistent
            | ClientError::AlreadyInstalled
            | ClientError::RecordMissing => 3,
            ClientError::Transport(_) | ClientError::Io(_) => 4,
        }
    }

    /// The protocol denial code, when the server issued one.
    pub fn denial_code(&self) -> Option<ErrorCode> {
        match self {
            ClientError::Denied(e) => Some(e.code),
            _ => None,
        }
    }
}

impl From<TransportError> for ClientError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Server(envelope) => ClientError::Denied(envelope),
            TransportError::Io(msg) => ClientError::Transport(msg),
        }
    }
}

impl From<VaultError> for ClientError {
    fn from(e: VaultError) -> Self {
        match e {
            VaultError::KeyExpired => ClientError::Expired,
            VaultError::NotPersistent => ClientError::NotPersistent,
            other => ClientError::Vault(other),
        }
    }
}

/// Fixture hooks; hardened by default.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClientFixtures {
    /// Accept manifests without checking the publisher signature.
    pub skip_manifest_verify: bool,
    /// Accept licenses without checking the server signature (paired with
    /// the server's plain_license fixture).
    pub skip_ckc_signature: bool,
}

/// A server identity that has passed root verification. Only
/// `DrmClient::fetch_server` constructs one, so any KEM encapsulation
/// target or response signature key is root-certified by construction.
#[derive(Debug, Clone)]
pub struct VerifiedServer {
    certificate: Certificate,
}

impl VerifiedServer {
    pub fn sig_pk(&self) -> &VerifyingKey {
        &self.certificate.body.sig_pk
    }

    pub fn kem_pk(&self) -> &KemPublicKey {
        &self.certificate.body.kem_pk
    }
}

pub struct DrmClient {
    suite: &'static dyn CryptoSuite,
    clock: Arc<dyn Clock>,
    publisher_vk: VerifyingKey,
    root_vk: VerifyingKey,
    transport: Box<dyn LicenseTransport>,
    vault: Arc<TeeVault>,
    certificate: Certificate,
    auth_token: String,
    fixtures: ClientFixtures,
    /// Versions offered in license requests. Tests use this to probe
    /// downgrade handling; defaults to everything supported.
    pub protocol_versions: Vec<u16>,
    rng: Mutex<ChaCha20Rng>,
}

#[derive(Debug, Clone)]
pub struct OpenContent {
    pub manifest: Manifest,
    pub signed_manifest_bytes: Vec<u8>,
}

/// The outcome of a successful license exchange. Key bytes stay in the
/// vault; this is the public residue.
#[derive(Debug, Clone)]
pub struct License {
    pub content_id: String,
    pub key_ids: Vec<KeyId>,
    pub policy: LicensePolicy,
    pub lease_token: Option<[u8; 16]>,
    /// Absent for licenses restored from the offline store; lease
    /// operations need a live verified server.
    pub server: Option<VerifiedServer>,
}

impl DrmClient {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        suite: &'static dyn CryptoSuite,
        clock: Arc<dyn Clock>,
        publisher_vk: VerifyingKey,
        root_vk: VerifyingKey,
        transport: Box<dyn LicenseTransport>,
        vault: Arc<TeeVault>,
        certificate: Certificate,
        auth_token: String,
        fixtures: ClientFixtures,
        rng_seed: u64,
    ) -> Result<DrmClient, ClientError> {
        if certificate.body.role != CertRole::Client {
            return Err(ClientError::Verification(
                "client certificate role is not client".into(),
            ));
        }
        if certificate.body.device_id != vault.device_id() {
            return Err(ClientError::Verification(
                "certificate does not match vault identity".into(),
            ));
        }
        Ok(DrmClient {
            suite,
            clock,
            publisher_vk,
            root_vk,
            transport,
            vault,
            certificate,
            auth_token,
            fixtures,
            protocol_versions: SUPPORTED_PROTOCOL_VERSIONS.to_vec(),
            rng: Mutex::new(ChaCha20Rng::seed_from_u64(rng_seed)),
        })
    }

    pub fn vault(&self) -> &Arc<TeeVault> {
        &self.vault
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Verify and open a shipped manifest.
    pub fn open_content(&self, signed_manifest_bytes: &[u8]) -> Result<OpenContent, ClientError> {
        let manifest = if self.fixtures.skip_manifest_verify {
            packager::decode_manifest_unverified(signed_manifest_bytes)
        } else {
            packager::verify_manifest(self.suite, signed_manifest_bytes, &self.publisher_vk)
        }
        .map_err(|e| ClientError::Verification(format!("manifest: {e}")))?;
        if manifest.suite_id != self.suite.id() {
            return Err(ClientError::Verification("manifest suite mismatch".into()));
        }
        Ok(OpenContent {
            manifest,
            signed_manifest_bytes: signed_manifest_bytes.to_vec(),
        })
    }

    /// Fetch and root-verify the server identity. Every license exchange
    /// starts here; there is no other way to obtain an encapsulation
    /// target.
    pub fn fetch_server(&self) -> Result<VerifiedServer, ClientError> {
        let bytes = self.transport.server_certificate()?;
        let certificate = Certificate::decode(&bytes)
            .map_err(|e| ClientError::Verification(format!("server certificate: {e}")))?;
        certificate
            .verify(self.suite, &self.root_vk)
            .map_err(|e| ClientError::Verification(format!("server certificate: {e}")))?;
        if certificate.body.role != CertRole::Server {
            return Err(ClientError::Verification(
                "server certificate role is not server".into(),
            ));
        }
        Ok(VerifiedServer { certificate })
    }

    /// Run the license exchange for a piece of content, requesting every
    /// key the manifest names.
    pub fn request_license(&self, content: &OpenContent) -> Result<License, ClientError> {
        let server = self.fetch_server()?;
        let (handle, encap) = self.vault.begin_license_session(server.kem_pk())?;
        let mut anti_replay_seed = [0u8; 16];
        self.rng.lock().unwrap().fill_bytes(&mut anti_replay_seed);
        let body = SpcBody {
            suite_id: self.suite.id().to_string(),
            protocol_versions: self.protocol_versions.clone(),
            client_time: self.clock.now(),
            anti_replay_seed,
            secure_content_id: secure_content_id(self.suite, &content.manifest.content_id),
            key_ids: content.manifest.init_data.key_ids.clone(),
            session_key_encap: encap,
            auth_token: self.auth_token.clone(),
            client_certificate: self.certificate.encode(),
        };
        let body_bytes = body.encode();
        let signature = self.vault.sign_payload(&body_bytes)?;
        let spc = Spc {
            body_bytes,
            signature,
        }
        .encode();

        let ckc_bytes = match self.transport.license(&spc) {
            Ok(bytes) => bytes,
            Err(e) => {
                self.vault.forget_session(handle);
                return Err(e.into());
            }
        };
        let ckc = Ckc::decode(&ckc_bytes).map_err(|e| {
            self.vault.forget_session(handle);
            ClientError::Verification(format!("license response: {e}"))
        })?;
        if !self.fixtures.skip_ckc_signature
            && !self
                .suite
                .verify(server.sig_pk(), &ckc.sealed, &ckc.server_signature)
        {
            self.vault.forget_session(handle);
            return Err(ClientError::Verification(
                "license response signature rejected".into(),
            ));
        }
        let installed = self
            .vault
            .install_license(handle, &anti_replay_seed, &ckc.sealed)
            .map_err(|e| {
                self.vault.forget_session(handle);
                ClientError::from(e)
            })?;
        Ok(License {
            content_id: content.manifest.content_id.clone(),
            key_ids: installed.key_ids,
            policy: installed.policy,
            lease_token: installed.lease_token,
            server: Some(server),
        })
    }

    /// Begin a playback session. The expiry gate anchors to this moment:
    /// a rental that expires mid-session finishes, a lease is checked at
    /// every segment boundary.
    pub fn start_playback<'a>(
        &'a self,
        content: &'a OpenContent,
        license: &License,
    ) -> Result<PlaybackSession<'a>, ClientError> {
        if license.content_id != content.manifest.content_id {
            return Err(ClientError::Verification(
                "license is for different content".into(),
            ));
        }
        let session_start = self.clock.now();
        Ok(PlaybackSession {
            client: self,
            content,
            policy: license.policy.clone(),
            lease_token: license.lease_token,
            server: license.server.clone(),
            key_ids: license.key_ids.clone(),
            sink: self.vault.create_sink(),
            next_segment: 0,
            session_start,
            delivered_bytes: 0,
            expired_during_play: false,
            lease_lost: false,
        })
    }
}

/// What one segment step produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Delivered { index: u64, bytes: u64 },
    /// Lease ran out at a segment boundary without renewal; playback
    /// halts with partial delivery.
    LeaseExpired,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayReport {
    pub completed: bool,
    pub delivered_segments: u64,
    pub delivered_bytes: u64,
    pub sink_digest: [u8; 32],
    /// A rental expiry passed while playing; this session finished but
    /// the next will be refused.
    pub expired_during_play: bool,
}

pub struct PlaybackSession<'a> {
    client: &'a DrmClient,
    content: &'a OpenContent,
    policy: LicensePolicy,
    lease_token: Option<[u8; 16]>,
    server: Option<VerifiedServer>,
    key_ids: Vec<KeyId>,
    sink: SinkId,
    next_segment: u64,
    session_start: u64,
    delivered_bytes: u64,
    expired_during_play: bool,
    lease_lost: bool,
}

impl<'a> PlaybackSession<'a> {
    pub fn current_expiry(&self) -> u64 {
        self.policy.expiry
    }

    pub fn delivered_segments(&self) -> u64 {
        self.next_segment
    }

    /// Decrypt and deliver the next segment. Lease expiry is enforced at
    /// segment boundaries; rental expiry only gates new sessions (the
    /// vault compares against `session_start`).
    pub fn step(&mut self, source: &dyn SegmentSource) -> Result<StepOutcome, ClientError> {
        if self.lease_lost {
            return Ok(StepOutcome::LeaseExpired);
        }
        let manifest = &self.content.manifest;
        if self.next_segment as usize >= manifest.segments.len() {
            return Ok(StepOutcome::Finished);
        }
        let now = self.client.clock.now();
        if self.policy.mode == PolicyMode::Lease && now >= self.policy.expiry {
            self.lease_lost = true;
            return Ok(StepOutcome::LeaseExpired);
        }
        if self.policy.mode != PolicyMode::Lease && now >= self.policy.expiry {
            self.expired_during_play = true;
        }
        let record = &manifest.segments[self.next_segment as usize];
        let sealed = source.fetch(&record.uri)?;
        let bytes = self.client.vault.decrypt_segment_to_sink(
            &manifest.content_id,
            record,
            &sealed,
            self.sink,
            self.session_start,
        )?;
        self.next_segment += 1;
        self.delivered_bytes += bytes;
        Ok(StepOutcome::Delivered {
            index: record.index,
            bytes,
        })
    }

    /// Drive to completion or lease loss.
    pub fn play_to_end(&mut self, source: &dyn SegmentSource) -> Result<PlayReport, ClientError> {
        loop {
            match self.step(source)? {
                StepOutcome::Delivered { .. } => continue,
                StepOutcome::Finished => return Ok(self.report(true)),
                StepOutcome::LeaseExpired => return Ok(self.report(false)),
            }
        }
    }

    pub fn report(&self, completed: bool) -> PlayReport {
        let (sink_digest, _) = self
            .client
            .vault
            .sink_state(self.sink)
            .expect("own sink exists");
        PlayReport {
            completed,
            delivered_segments: self.next_segment,
            delivered_bytes: self.delivered_bytes,
            sink_digest,
            expired_during_play: self.expired_during_play,
        }
    }

    /// Renew the lease: signed request, server-signed response, vault
    /// expiry extension. Returns the new expiry.
    pub fn renew_lease(&mut self) -> Result<u64, ClientError> {
        let token = self
            .lease_token
            .ok_or_else(|| ClientError::Verification("no lease to renew".into()))?;
        let body = LeaseRenewBody {
            suite_id: self.client.suite.id().to_string(),
            client_time: self.client.clock.now(),
            secure_content_id: secure_content_id(
                self.client.suite,
                &self.content.manifest.content_id,
            ),
            lease_token: token,
            auth_token: self.client.auth_token.clone(),
            client_certificate: self.client.certificate.encode(),
        };
        let body_bytes = body.encode();
        let signature = self.client.vault.sign_payload(&body_bytes)?;
        let resp_bytes = self.client.transport.renew(
            &LeaseRenewReq {
                body_bytes,
                signature,
            }
            .encode(),
        )?;
        let resp = LeaseRenewResp::decode(&resp_bytes)
            .map_err(|e| ClientError::Verification(format!("renew response: {e}")))?;
        let server = self
            .server
            .as_ref()
            .ok_or_else(|| ClientError::Verification("no verified server for lease".into()))?;
        if !self.client.suite.verify(
            server.sig_pk(),
            &resp.body_bytes,
            &resp.server_signature,
        ) {
            return Err(ClientError::Verification(
                "renew response signature rejected".into(),
            ));
        }
        let resp_body = LeaseRenewRespBody::decode(&resp.body_bytes)
            .map_err(|e| ClientError::Verification(format!("renew response: {e}")))?;
        if resp_body.lease_token != token {
            return Err(ClientError::Verification(
                "renew response token mismatch".into(),
            ));
        }
        self.client
            .vault
            .extend_expiry(&self.key_ids, resp_body.new_expiry)?;
        self.policy.expiry = self.policy.expiry.max(resp_body.new_expiry);
        self.lease_lost = false;
        Ok(self.policy.expiry)
    }

    /// Release the lease slot. Returns whether the server freed one.
    pub fn release_lease(&mut self) -> Result<bool, ClientError> {
        let token = self
            .lease_token
            .ok_or_else(|| ClientError::Verification("no lease to release".into()))?;
        let body = LeaseReleaseBody {
            suite_id: self.client.suite.id().to_string(),
            client_time: self.client.clock.now(),
            secure_content_id: secure_content_id(
                self.client.suite,
                &self.content.manifest.content_id,
            ),
            lease_token: token,
            auth_token: self.client.auth_token.clone(),
            client_certificate: self.client.certificate.encode(),
        };
        let body_bytes = body.encode();
        let signature = self.client.vault.sign_payload(&body_bytes)?;
        let resp_bytes = self.client.transport.release(
            &LeaseReleaseReq {
                body_bytes,
                signature,
            }
            .encode(),
        )?;
        let resp = LeaseReleaseResp::decode(&resp_bytes)
            .map_err(|e| ClientError::Verification(format!("release response: {e}")))?;
        self.lease_token = None;
        Ok(resp.released)
    }
}

/// Where sealed segments come from.
pub trait SegmentSource {
    fn fetch(&self, uri: &str) -> Result<Vec<u8>, ClientError>;
}

/// Segments on disk under a package directory.
pub struct DirSegmentSource {
    root: PathBuf,
}

impl DirSegmentSource {
    pub fn new(root: impl Into<PathBuf>) -> DirSegmentSource {
        DirSegmentSource { root: root.into() }
    }
}

impl SegmentSource for DirSegmentSource {
    fn fetch(&self, uri: &str) -> Result<Vec<u8>, ClientError> {
        if uri.contains("..") {
            return Err(ClientError::Verification("segment uri escapes package".into()));
        }
        fs::read(self.root.join(uri)).map_err(|e| ClientError::Io(format!("{uri}: {e}")))
    }
}

/// Segments held in memory; tests mutate entries to model a hostile CDN.
#[derive(Default)]
pub struct MemorySegmentSource {
    pub segments: HashMap<String, Vec<u8>>,
}

impl MemorySegmentSource {
    pub fn from_package(pkg: &crate::packager::Package) -> MemorySegmentSource {
        let segments = pkg
            .manifest
            .segments
            .iter()
            .zip(&pkg.segments)
            .map(|(r, s)| (r.uri.clone(), s.clone()))
            .collect();
        MemorySegmentSource { segments }
    }
}

impl SegmentSource for MemorySegmentSource {
    fn fetch(&self, uri: &str) -> Result<Vec<u8>, ClientError> {
        self.segments
            .get(uri)
            .cloned()
            .ok_or_else(|| ClientError::Io(format!("{uri}: missing segment")))
    }
}
