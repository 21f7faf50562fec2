//! Protocol and artifact messages. Each struct maps 1:1 onto a wire type
//! tag; signed wrappers carry the exact inner bytes they were signed over
//! so verification never depends on re-encoding.

use crate::error::{ErrorCode, WireError};
use crate::suite::{KemCiphertext, Signature};
use crate::types::{wipe, to_hex, DeviceId, KeyId, SecurityLevel};
use crate::wire::{
    read_array, read_list, read_str, read_u16, read_u32, read_u64, tag, BodyCursor, FieldWriter,
    WireMessage,
};

fn fixed_items<const N: usize>(t: u16, items: Vec<&[u8]>) -> Result<Vec<[u8; N]>, WireError> {
    items
        .into_iter()
        .map(|it| {
            it.try_into().map_err(|_| WireError::FieldLength {
                tag: t,
                want: N,
                got: it.len(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Manifest

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentRecord {
    pub index: u64,
    pub period: u32,
    pub key_id: KeyId,
    pub uri: String,
    pub sealed_len: u64,
    pub sealed_digest: [u8; 32],
}

impl WireMessage for SegmentRecord {
    const TYPE_TAG: u16 = tag::SEGMENT_RECORD;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_u64(1, self.index);
        w.put_u32(2, self.period);
        w.put_bytes(3, self.key_id.as_bytes());
        w.put_str(4, &self.uri);
        w.put_u64(5, self.sealed_len);
        w.put_bytes(6, &self.sealed_digest);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(SegmentRecord {
            index: read_u64(1, c.require(1)?)?,
            period: read_u32(2, c.require(2)?)?,
            key_id: KeyId(read_array(3, c.require(3)?)?),
            uri: read_str(4, c.require(4)?)?,
            sealed_len: read_u64(5, c.require(5)?)?,
            sealed_digest: read_array(6, c.require(6)?)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitData {
    pub content_id: String,
    pub key_ids: Vec<KeyId>,
}

impl WireMessage for InitData {
    const TYPE_TAG: u16 = tag::INIT_DATA;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.content_id);
        w.put_list(2, self.key_ids.iter().map(|k| k.as_bytes().to_vec()));
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let content_id = read_str(1, c.require(1)?)?;
        let ids = fixed_items::<16>(2, read_list(2, c.require(2)?)?)?;
        Ok(InitData {
            content_id,
            key_ids: ids.into_iter().map(KeyId).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub suite_id: String,
    pub content_id: String,
    pub total_len: u64,
    pub segment_size: u32,
    pub rotation_period: u32,
    /// Period number to key id; ordered by period.
    pub key_ids_per_period: Vec<(u32, KeyId)>,
    pub segments: Vec<SegmentRecord>,
    pub init_data: InitData,
}

impl WireMessage for Manifest {
    const TYPE_TAG: u16 = tag::MANIFEST;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.suite_id);
        w.put_str(2, &self.content_id);
        w.put_u64(3, self.total_len);
        w.put_u32(4, self.segment_size);
        w.put_u32(5, self.rotation_period);
        w.put_list(
            6,
            self.key_ids_per_period.iter().map(|(p, k)| {
                let mut item = Vec::with_capacity(20);
                item.extend_from_slice(&p.to_be_bytes());
                item.extend_from_slice(k.as_bytes());
                item
            }),
        );
        w.put_list(7, self.segments.iter().map(|s| s.encode()));
        w.put_bytes(8, &self.init_data.encode());
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let suite_id = read_str(1, c.require(1)?)?;
        let content_id = read_str(2, c.require(2)?)?;
        let total_len = read_u64(3, c.require(3)?)?;
        let segment_size = read_u32(4, c.require(4)?)?;
        let rotation_period = read_u32(5, c.require(5)?)?;
        let key_items = fixed_items::<20>(6, read_list(6, c.require(6)?)?)?;
        let key_ids_per_period = key_items
            .into_iter()
            .map(|item| {
                let period = u32::from_be_bytes(item[..4].try_into().unwrap());
                let kid = KeyId(item[4..].try_into().unwrap());
                (period, kid)
            })
            .collect();
        let segments = read_list(7, c.require(7)?)?
            .into_iter()
            .map(SegmentRecord::decode)
            .collect::<Result<Vec<_>, _>>()?;
        let init_data = InitData::decode(c.require(8)?)?;
        Ok(Manifest {
            suite_id,
            content_id,
            total_len,
            segment_size,
            rotation_period,
            key_ids_per_period,
            segments,
            init_data,
        })
    }
}

impl Manifest {
    /// Structural consistency. Decode accepts any well-formed field
    /// layout; this enforces the semantic shape: sequential indices,
    /// period arithmetic, key-id agreement between the period table, the
    /// segment records, and init data, and length arithmetic.
    pub fn validate(&self) -> Result<(), WireError> {
        let bad = |msg: &'static str| WireError::BadValue(tag::MANIFEST, msg);
        if self.segment_size == 0 {
            return Err(bad("segment_size must be positive"));
        }
        if self.rotation_period == 0 {
            return Err(bad("rotation_period must be positive"));
        }
        if self.content_id.is_empty() {
            return Err(bad("content_id must be non-empty"));
        }
        let expect_segments = if self.total_len == 0 {
            0
        } else {
            (self.total_len - 1) / self.segment_size as u64 + 1
        };
        if self.segments.len() as u64 != expect_segments {
            return Err(bad("segment count disagrees with total_len"));
        }
        let expect_periods = if expect_segments == 0 {
            0
        } else {
            (expect_segments - 1) / self.rotation_period as u64 + 1
        };
        if self.key_ids_per_period.len() as u64 != expect_periods {
            return Err(bad("period count disagrees with segment count"));
        }
        for (i, (period, _)) in self.key_ids_per_period.iter().enumerate() {
            if *period as usize != i {
                return Err(bad("period table must be dense and ordered"));
            }
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.index != i as u64 {
                return Err(bad("segment indices must be sequential from zero"));
            }
            let expect_period = (seg.index / self.rotation_period as u64) as u32;
            if seg.period != expect_period {
                return Err(bad("segment period disagrees with rotation arithmetic"));
            }
            let table_kid = self
                .key_ids_per_period
                .get(seg.period as usize)
                .ok_or(bad("segment period out of table range"))?
                .1;
            if seg.key_id != table_kid {
                return Err(bad("segment key id disagrees with period table"));
            }
            let pt_len = if seg.index + 1 == expect_segments {
                self.total_len - seg.index * self.segment_size as u64
            } else {
                self.segment_size as u64
            };
            if seg.sealed_len != pt_len + crate::suite::AEAD_TAG_LEN as u64 {
                return Err(bad("sealed_len disagrees with segment arithmetic"));
            }
        }
        if self.init_data.content_id != self.content_id {
            return Err(bad("init data content id mismatch"));
        }
        let table_ids: Vec<KeyId> = self.key_ids_per_period.iter().map(|(_, k)| *k).collect();
        if self.init_data.key_ids != table_ids {
            return Err(bad("init data key ids disagree with period table"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedManifest {
    pub manifest_bytes: Vec<u8>,
    pub signature: Signature,
}

impl WireMessage for SignedManifest {
    const TYPE_TAG: u16 = tag::SIGNED_MANIFEST;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_bytes(1, &self.manifest_bytes);
        w.put_bytes(2, self.signature.as_bytes());
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(SignedManifest {
            manifest_bytes: c.require(1)?.to_vec(),
            signature: Signature(c.require(2)?.to_vec()),
        })
    }
}

// ---------------------------------------------------------------------------
// License request (SPC)

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpcBody {
    pub suite_id: String,
    pub protocol_versions: Vec<u16>,
    pub client_time: u64,
    pub anti_replay_seed: [u8; 16],
    pub secure_content_id: [u8; 32],
    pub key_ids: Vec<KeyId>,
    pub session_key_encap: KemCiphertext,
    pub auth_token: String,
    pub client_certificate: Vec<u8>,
}

impl WireMessage for SpcBody {
    const TYPE_TAG: u16 = tag::SPC_BODY;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.suite_id);
        w.put_list(
            2,
            self.protocol_versions.iter().map(|v| v.to_be_bytes().to_vec()),
        );
        w.put_u64(3, self.client_time);
        w.put_bytes(4, &self.anti_replay_seed);
        w.put_bytes(5, &self.secure_content_id);
        w.put_list(6, self.key_ids.iter().map(|k| k.as_bytes().to_vec()));
        w.put_bytes(7, self.session_key_encap.as_bytes());
        w.put_str(8, &self.auth_token);
        w.put_bytes(9, &self.client_certificate);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let suite_id = read_str(1, c.require(1)?)?;
        let versions = fixed_items::<2>(2, read_list(2, c.require(2)?)?)?
            .into_iter()
            .map(u16::from_be_bytes)
            .collect();
        let client_time = read_u64(3, c.require(3)?)?;
        let anti_replay_seed = read_array(4, c.require(4)?)?;
        let secure_content_id = read_array(5, c.require(5)?)?;
        let key_ids = fixed_items::<16>(6, read_list(6, c.require(6)?)?)?
            .into_iter()
            .map(KeyId)
            .collect();
        let session_key_encap = KemCiphertext(c.require(7)?.to_vec());
        let auth_token = read_str(8, c.require(8)?)?;
        let client_certificate = c.require(9)?.to_vec();
        Ok(SpcBody {
            suite_id,
            protocol_versions: versions,
            client_time,
            anti_replay_seed,
            secure_content_id,
            key_ids,
            session_key_encap,
            auth_token,
            client_certificate,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spc {
    pub body_bytes: Vec<u8>,
    pub signature: Signature,
}

impl WireMessage for Spc {
    const TYPE_TAG: u16 = tag::SPC;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_bytes(1, &self.body_bytes);
        w.put_bytes(2, self.signature.as_bytes());
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(Spc {
            body_bytes: c.require(1)?.to_vec(),
            signature: Signature(c.require(2)?.to_vec()),
        })
    }
}

// ---------------------------------------------------------------------------
// License policy and response (CKC)

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum PolicyMode {
    Rental = 0,
    Lease = 1,
    Persistent = 2,
}

impl PolicyMode {
    pub fn from_u16(v: u16) -> Option<Self> {
        match v {
            0 => Some(PolicyMode::Rental),
            1 => Some(PolicyMode::Lease),
            2 => Some(PolicyMode::Persistent),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyMode::Rental => "rental",
            PolicyMode::Lease => "lease",
            PolicyMode::Persistent => "persistent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LicensePolicy {
    pub mode: PolicyMode,
    /// Absolute expiry in the client's time reference. For LEASE this is
    /// the current slot expiry, extended by renewal.
    pub expiry: u64,
    pub persistent: bool,
    pub min_security_level: SecurityLevel,
    /// Lease slot capacity per (account, content). Zero when not leased.
    pub max_concurrent: u32,
    /// Lease extension span in seconds. Zero when not leased.
    pub lease_duration: u64,
}

impl WireMessage for LicensePolicy {
    const TYPE_TAG: u16 = tag::LICENSE_POLICY;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_u16(1, self.mode as u16);
        w.put_u64(2, self.expiry);
        w.put_u16(3, self.persistent as u16);
        w.put_u16(4, self.min_security_level.as_u16());
        w.put_u32(5, self.max_concurrent);
        w.put_u64(6, self.lease_duration);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let mode = PolicyMode::from_u16(read_u16(1, c.require(1)?)?)
            .ok_or(WireError::BadValue(1, "unknown policy mode"))?;
        let expiry = read_u64(2, c.require(2)?)?;
        let persistent = match read_u16(3, c.require(3)?)? {
            0 => false,
            1 => true,
            _ => return Err(WireError::BadValue(3, "persistent must be 0 or 1")),
        };
        let min_security_level = SecurityLevel::from_u16(read_u16(4, c.require(4)?)?)
            .ok_or(WireError::BadValue(4, "unknown security level"))?;
        let max_concurrent = read_u32(5, c.require(5)?)?;
        let lease_duration = read_u64(6, c.require(6)?)?;
        Ok(LicensePolicy {
            mode,
            expiry,
            persistent,
            min_security_level,
            max_concurrent,
            lease_duration,
        })
    }
}

/// A content key in transit inside the sealed license payload.
#[derive(Clone, PartialEq, Eq)]
pub struct WrappedKey {
    pub key_id: KeyId,
    pub key: [u8; 16],
}

impl std::fmt::Debug for WrappedKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "WrappedKey {{ key_id: {}, key: <redacted> }}", self.key_id)
    }
}

impl Drop for WrappedKey {
    fn drop(&mut self) {
        wipe(&mut self.key);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CkcPayload {
    pub keys: Vec<WrappedKey>,
    pub policy: LicensePolicy,
    pub server_time: u64,
    pub lease_token: Option<[u8; 16]>,
}

impl WireMessage for CkcPayload {
    const TYPE_TAG: u16 = tag::CKC_PAYLOAD;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_list(
            1,
            self.keys.iter().map(|k| {
                let mut item = Vec::with_capacity(32);
                item.extend_from_slice(k.key_id.as_bytes());
                item.extend_from_slice(&k.key);
                item
            }),
        );
        w.put_bytes(2, &self.policy.encode());
        w.put_u64(3, self.server_time);
        if let Some(token) = &self.lease_token {
            w.put_bytes(4, token);
        }
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let keys = fixed_items::<32>(1, read_list(1, c.require(1)?)?)?
            .into_iter()
            .map(|item| WrappedKey {
                key_id: KeyId(item[..16].try_into().unwrap()),
                key: item[16..].try_into().unwrap(),
            })
            .collect();
        let policy = LicensePolicy::decode(c.require(2)?)?;
        let server_time = read_u64(3, c.require(3)?)?;
        let lease_token = c.optional(4)?.map(|v| read_array(4, v)).transpose()?;
        Ok(CkcPayload {
            keys,
            policy,
            server_time,
            lease_token,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ckc {
    /// nonce (12 bytes) ‖ AEAD-sealed CkcPayload under the session key.
    pub sealed: Vec<u8>,
    /// Server signature over the sealed bytes.
    pub server_signature: Signature,
}

impl WireMessage for Ckc {
    const TYPE_TAG: u16 = tag::CKC;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_bytes(1, &self.sealed);
        w.put_bytes(2, self.server_signature.as_bytes());
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(Ckc {
            sealed: c.require(1)?.to_vec(),
            server_signature: Signature(c.require(2)?.to_vec()),
        })
    }
}

/// Associated data for the sealed license payload: binds the response to
/// the anti-replay seed of the originating request.
pub fn ckc_ad(anti_replay_seed: &[u8; 16]) -> Vec<u8> {
    let mut ad = Vec::with_capacity(32);
    ad.extend_from_slice(b"minidrm/ckc/v1");
    ad.extend_from_slice(anti_replay_seed);
    ad
}

// ---------------------------------------------------------------------------
// Key registry

#[derive(Clone, PartialEq, Eq)]
pub struct KeyRegistry {
    pub suite_id: String,
    pub content_id: String,
    pub entries: Vec<crate::types::ContentKey>,
}

impl std::fmt::Debug for KeyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "KeyRegistry {{ content_id: {:?}, entries: {} keys (redacted) }}",
            self.content_id,
            self.entries.len()
        )
    }
}

impl WireMessage for KeyRegistry {
    const TYPE_TAG: u16 = tag::KEY_REGISTRY;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.suite_id);
        w.put_str(2, &self.content_id);
        w.put_list(
            3,
            self.entries.iter().map(|e| {
                let mut item = Vec::with_capacity(36);
                item.extend_from_slice(&e.period.to_be_bytes());
                item.extend_from_slice(e.key_id.as_bytes());
                item.extend_from_slice(e.key_bytes());
                item
            }),
        );
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let suite_id = read_str(1, c.require(1)?)?;
        let content_id = read_str(2, c.require(2)?)?;
        let entries = fixed_items::<36>(3, read_list(3, c.require(3)?)?)?
            .into_iter()
            .map(|item| {
                let period = u32::from_be_bytes(item[..4].try_into().unwrap());
                let key_id = KeyId(item[4..20].try_into().unwrap());
                let key: [u8; 16] = item[20..].try_into().unwrap();
                crate::types::ContentKey::new(key_id, period, key)
            })
            .collect();
        Ok(KeyRegistry {
            suite_id,
            content_id,
            entries,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedRegistry {
    pub content_id: String,
    pub nonce: [u8; 12],
    pub sealed: Vec<u8>,
}

impl WireMessage for SealedRegistry {
    const TYPE_TAG: u16 = tag::SEALED_REGISTRY;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.content_id);
        w.put_bytes(2, &self.nonce);
        w.put_bytes(3, &self.sealed);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(SealedRegistry {
            content_id: read_str(1, c.require(1)?)?,
            nonce: read_array(2, c.require(2)?)?,
            sealed: c.require(3)?.to_vec(),
        })
    }
}

pub fn registry_ad(label: &[u8], content_id: &str) -> Vec<u8> {
    let mut ad = Vec::with_capacity(label.len() + content_id.len());
    ad.extend_from_slice(label);
    ad.extend_from_slice(content_id.as_bytes());
    ad
}

// ---------------------------------------------------------------------------
// Error envelope

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorEnvelope {
    pub code: ErrorCode,
    pub message: String,
}

impl WireMessage for ErrorEnvelope {
    const TYPE_TAG: u16 = tag::ERROR;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_u16(1, self.code.as_u16());
        w.put_str(2, &self.message);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let code = ErrorCode::from_u16(read_u16(1, c.require(1)?)?)
            .ok_or(WireError::BadValue(1, "unknown error code"))?;
        let message = read_str(2, c.require(2)?)?;
        Ok(ErrorEnvelope { code, message })
    }
}

impl std::fmt::Display for ErrorEnvelope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

// ---------------------------------------------------------------------------
// Attestation

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttestationBody {
    pub suite_id: String,
    pub challenge: Vec<u8>,
    pub security_level: SecurityLevel,
    pub device_id: DeviceId,
}

impl WireMessage for AttestationBody {
    const TYPE_TAG: u16 = tag::ATTESTATION_BODY;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.suite_id);
        w.put_bytes(2, &self.challenge);
        w.put_u16(3, self.security_level.as_u16());
        w.put_bytes(4, &self.device_id.0);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(AttestationBody {
            suite_id: read_str(1, c.require(1)?)?,
            challenge: c.require(2)?.to_vec(),
            security_level: SecurityLevel::from_u16(read_u16(3, c.require(3)?)?)
                .ok_or(WireError::BadValue(3, "unknown security level"))?,
            device_id: DeviceId(read_array(4, c.require(4)?)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attestation {
    pub body_bytes: Vec<u8>,
    pub signature: Signature,
}

impl WireMessage for Attestation {
    const TYPE_TAG: u16 = tag::ATTESTATION;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_bytes(1, &self.body_bytes);
        w.put_bytes(2, self.signature.as_bytes());
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(Attestation {
            body_bytes: c.require(1)?.to_vec(),
            signature: Signature(c.require(2)?.to_vec()),
        })
    }
}

// ---------------------------------------------------------------------------
// Conformance report

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Verdict {
    Pass = 0,
    Fail = 1,
    NotClaimed = 2,
}

impl Verdict {
    pub fn from_u16(v: u16) -> Option<Self> {
        match v {
            0 => Some(Verdict::Pass),
            1 => Some(Verdict::Fail),
            2 => Some(Verdict::NotClaimed),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotClaimed => "NOT_CLAIMED",
        }
    }
}

/// How one piece of evidence came out. `Blocked`/`Succeeded` describe
/// attack attempts; `Held`/`Violated` describe structural checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum EvidenceOutcome {
    Blocked = 0,
    Succeeded = 1,
    Held = 2,
    Violated = 3,
}

impl EvidenceOutcome {
    pub fn from_u16(v: u16) -> Option<Self> {
        match v {
            0 => Some(EvidenceOutcome::Blocked),
            1 => Some(EvidenceOutcome::Succeeded),
            2 => Some(EvidenceOutcome::Held),
            3 => Some(EvidenceOutcome::Violated),
            _ => None,
        }
    }

    pub fn is_good(self) -> bool {
        matches!(self, EvidenceOutcome::Blocked | EvidenceOutcome::Held)
    }

    pub fn name(self) -> &'static str {
        match self {
            EvidenceOutcome::Blocked => "blocked",
            EvidenceOutcome::Succeeded => "succeeded",
            EvidenceOutcome::Held => "held",
            EvidenceOutcome::Violated => "violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evidence {
    pub attack: String,
    pub outcome: EvidenceOutcome,
    pub detail: String,
    pub transcript_digest: [u8; 32],
}

impl WireMessage for Evidence {
    const TYPE_TAG: u16 = tag::EVIDENCE;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.attack);
        w.put_u16(2, self.outcome as u16);
        w.put_str(3, &self.detail);
        w.put_bytes(4, &self.transcript_digest);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(Evidence {
            attack: read_str(1, c.require(1)?)?,
            outcome: EvidenceOutcome::from_u16(read_u16(2, c.require(2)?)?)
                .ok_or(WireError::BadValue(2, "unknown evidence outcome"))?,
            detail: read_str(3, c.require(3)?)?,
            transcript_digest: read_array(4, c.require(4)?)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyVerdict {
    pub sp: u16,
    pub verdict: Verdict,
    pub evidence: Vec<Evidence>,
}

impl WireMessage for PropertyVerdict {
    const TYPE_TAG: u16 = tag::VERDICT;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_u16(1, self.sp);
        w.put_u16(2, self.verdict as u16);
        w.put_list(3, self.evidence.iter().map(|e| e.encode()));
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let sp = read_u16(1, c.require(1)?)?;
        let verdict = Verdict::from_u16(read_u16(2, c.require(2)?)?)
            .ok_or(WireError::BadValue(2, "unknown verdict"))?;
        let evidence = read_list(3, c.require(3)?)?
            .into_iter()
            .map(Evidence::decode)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PropertyVerdict {
            sp,
            verdict,
            evidence,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConformanceReport {
    pub suite_id: String,
    pub seed: u64,
    /// Name of the negative fixture in effect, if any.
    pub fixture: Option<String>,
    pub verdicts: Vec<PropertyVerdict>,
    pub footnotes: Vec<String>,
}

impl WireMessage for ConformanceReport {
    const TYPE_TAG: u16 = tag::REPORT;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.suite_id);
        w.put_u64(2, self.seed);
        if let Some(f) = &self.fixture {
            w.put_str(3, f);
        }
        w.put_list(4, self.verdicts.iter().map(|v| v.encode()));
        w.put_list(5, self.footnotes.iter().map(|s| s.as_bytes().to_vec()));
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let suite_id = read_str(1, c.require(1)?)?;
        let seed = read_u64(2, c.require(2)?)?;
        let fixture = c.optional(3)?.map(|v| read_str(3, v)).transpose()?;
        let verdicts = read_list(4, c.require(4)?)?
            .into_iter()
            .map(PropertyVerdict::decode)
            .collect::<Result<Vec<_>, _>>()?;
        let footnotes = read_list(5, c.require(5)?)?
            .into_iter()
            .map(|v| read_str(5, v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ConformanceReport {
            suite_id,
            seed,
            fixture,
            verdicts,
            footnotes,
        })
    }
}

// ---------------------------------------------------------------------------
// Offline (persistent) license records

#[derive(Clone, PartialEq, Eq)]
pub struct OfflinePayload {
    pub content_id: String,
    pub signed_manifest: Vec<u8>,
    pub policy: LicensePolicy,
    pub keys: Vec<WrappedKey>,
    pub stored_at: u64,
}

impl std::fmt::Debug for OfflinePayload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "OfflinePayload {{ content_id: {:?}, keys: {} (redacted), stored_at: {} }}",
            self.content_id,
            self.keys.len(),
            self.stored_at
        )
    }
}

impl WireMessage for OfflinePayload {
    const TYPE_TAG: u16 = tag::OFFLINE_PAYLOAD;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.content_id);
        w.put_bytes(2, &self.signed_manifest);
        w.put_bytes(3, &self.policy.encode());
        w.put_list(
            4,
            self.keys.iter().map(|k| {
                let mut item = Vec::with_capacity(32);
                item.extend_from_slice(k.key_id.as_bytes());
                item.extend_from_slice(&k.key);
                item
            }),
        );
        w.put_u64(5, self.stored_at);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let content_id = read_str(1, c.require(1)?)?;
        let signed_manifest = c.require(2)?.to_vec();
        let policy = LicensePolicy::decode(c.require(3)?)?;
        let keys = fixed_items::<32>(4, read_list(4, c.require(4)?)?)?
            .into_iter()
            .map(|item| WrappedKey {
                key_id: KeyId(item[..16].try_into().unwrap()),
                key: item[16..].try_into().unwrap(),
            })
            .collect();
        let stored_at = read_u64(5, c.require(5)?)?;
        Ok(OfflinePayload {
            content_id,
            signed_manifest,
            policy,
            keys,
            stored_at,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfflineRecord {
    pub content_id: String,
    pub device_id: DeviceId,
    pub nonce: [u8; 12],
    pub sealed: Vec<u8>,
}

impl WireMessage for OfflineRecord {
    const TYPE_TAG: u16 = tag::OFFLINE_RECORD;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.content_id);
        w.put_bytes(2, &self.device_id.0);
        w.put_bytes(3, &self.nonce);
        w.put_bytes(4, &self.sealed);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(OfflineRecord {
            content_id: read_str(1, c.require(1)?)?,
            device_id: DeviceId(read_array(2, c.require(2)?)?),
            nonce: read_array(3, c.require(3)?)?,
            sealed: c.require(4)?.to_vec(),
        })
    }
}

/// AD for offline records binds content and device identity.
pub fn offline_ad(content_id: &str, device_id: &DeviceId) -> Vec<u8> {
    let mut ad = Vec::with_capacity(64);
    ad.extend_from_slice(b"minidrm/hds/v1");
    ad.extend_from_slice(content_id.as_bytes());
    ad.extend_from_slice(&device_id.0);
    ad
}

// ---------------------------------------------------------------------------
// Segment associated data binding

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdBinding {
    pub content_id: String,
    pub index: u64,
    pub key_id: KeyId,
}

impl WireMessage for AdBinding {
    const TYPE_TAG: u16 = tag::AD_BINDING;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.content_id);
        w.put_u64(2, self.index);
        w.put_bytes(3, self.key_id.as_bytes());
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(AdBinding {
            content_id: read_str(1, c.require(1)?)?,
            index: read_u64(2, c.require(2)?)?,
            key_id: KeyId(read_array(3, c.require(3)?)?),
        })
    }
}

/// Canonical associated data for a sealed segment.
pub fn segment_ad(content_id: &str, index: u64, key_id: KeyId) -> Vec<u8> {
    AdBinding {
        content_id: content_id.to_string(),
        index,
        key_id,
    }
    .encode()
}

// ---------------------------------------------------------------------------
// Lease renewal and release

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaseRenewBody {
    pub suite_id: String,
    pub client_time: u64,
    pub secure_content_id: [u8; 32],
    pub lease_token: [u8; 16],
    pub auth_token: String,
    pub client_certificate: Vec<u8>,
}

impl WireMessage for LeaseRenewBody {
    const TYPE_TAG: u16 = tag::LEASE_RENEW_BODY;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.suite_id);
        w.put_u64(2, self.client_time);
        w.put_bytes(3, &self.secure_content_id);
        w.put_bytes(4, &self.lease_token);
        w.put_str(5, &self.auth_token);
        w.put_bytes(6, &self.client_certificate);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(LeaseRenewBody {
            suite_id: read_str(1, c.require(1)?)?,
            client_time: read_u64(2, c.require(2)?)?,
            secure_content_id: read_array(3, c.require(3)?)?,
            lease_token: read_array(4, c.require(4)?)?,
            auth_token: read_str(5, c.require(5)?)?,
            client_certificate: c.require(6)?.to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaseRenewReq {
    pub body_bytes: Vec<u8>,
    pub signature: Signature,
}

impl WireMessage for LeaseRenewReq {
    const TYPE_TAG: u16 = tag::LEASE_RENEW_REQ;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_bytes(1, &self.body_bytes);
        w.put_bytes(2, self.signature.as_bytes());
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(LeaseRenewReq {
            body_bytes: c.require(1)?.to_vec(),
            signature: Signature(c.require(2)?.to_vec()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaseRenewRespBody {
    pub new_expiry: u64,
    pub lease_token: [u8; 16],
    pub server_time: u64,
}

impl WireMessage for LeaseRenewRespBody {
    const TYPE_TAG: u16 = tag::LEASE_RENEW_RESP_BODY;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_u64(1, self.new_expiry);
        w.put_bytes(2, &self.lease_token);
        w.put_u64(3, self.server_time);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(LeaseRenewRespBody {
            new_expiry: read_u64(1, c.require(1)?)?,
            lease_token: read_array(2, c.require(2)?)?,
            server_time: read_u64(3, c.require(3)?)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaseRenewResp {
    pub body_bytes: Vec<u8>,
    pub server_signature: Signature,
}

impl WireMessage for LeaseRenewResp {
    const TYPE_TAG: u16 = tag::LEASE_RENEW_RESP;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_bytes(1, &self.body_bytes);
        w.put_bytes(2, self.server_signature.as_bytes());
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(LeaseRenewResp {
            body_bytes: c.require(1)?.to_vec(),
            server_signature: Signature(c.require(2)?.to_vec()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaseReleaseBody {
    pub suite_id: String,
    pub client_time: u64,
    pub secure_content_id: [u8; 32],
    pub lease_token: [u8; 16],
    pub auth_token: String,
    pub client_certificate: Vec<u8>,
}

impl WireMessage for LeaseReleaseBody {
    const TYPE_TAG: u16 = tag::LEASE_RELEASE_BODY;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.suite_id);
        w.put_u64(2, self.client_time);
        w.put_bytes(3, &self.secure_content_id);
        w.put_bytes(4, &self.lease_token);
        w.put_str(5, &self.auth_token);
        w.put_bytes(6, &self.client_certificate);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(LeaseReleaseBody {
            suite_id: read_str(1, c.require(1)?)?,
            client_time: read_u64(2, c.require(2)?)?,
            secure_content_id: read_array(3, c.require(3)?)?,
            lease_token: read_array(4, c.require(4)?)?,
            auth_token: read_str(5, c.require(5)?)?,
            client_certificate: c.require(6)?.to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaseReleaseReq {
    pub body_bytes: Vec<u8>,
    pub signature: Signature,
}

impl WireMessage for LeaseReleaseReq {
    const TYPE_TAG: u16 = tag::LEASE_RELEASE_REQ;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_bytes(1, &self.body_bytes);
        w.put_bytes(2, self.signature.as_bytes());
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        Ok(LeaseReleaseReq {
            body_bytes: c.require(1)?.to_vec(),
            signature: Signature(c.require(2)?.to_vec()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaseReleaseResp {
    pub released: bool,
}

impl WireMessage for LeaseReleaseResp {
    const TYPE_TAG: u16 = tag::LEASE_RELEASE_RESP;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_u16(1, self.released as u16);
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let released = match read_u16(1, c.require(1)?)? {
            0 => false,
            1 => true,
            _ => return Err(WireError::BadValue(1, "released must be 0 or 1")),
        };
        Ok(LeaseReleaseResp { released })
    }
}

// ---------------------------------------------------------------------------
// Metering

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeteringEntry {
    pub content_id: String,
    pub issued: u32,
    pub renewed: u32,
    pub released: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeteringReport {
    pub account: String,
    pub generated_at: u64,
    pub entries: Vec<MeteringEntry>,
}

impl WireMessage for MeteringReport {
    const TYPE_TAG: u16 = tag::METERING_REPORT;

    fn write_body(&self, w: &mut FieldWriter) {
        w.put_str(1, &self.account);
        w.put_u64(2, self.generated_at);
        w.put_list(
            3,
            self.entries.iter().map(|e| {
                let mut item = Vec::new();
                item.extend_from_slice(&(e.content_id.len() as u32).to_be_bytes());
                item.extend_from_slice(e.content_id.as_bytes());
                item.extend_from_slice(&e.issued.to_be_bytes());
                item.extend_from_slice(&e.renewed.to_be_bytes());
                item.extend_from_slice(&e.released.to_be_bytes());
                item
            }),
        );
    }

    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError> {
        let account = read_str(1, c.require(1)?)?;
        let generated_at = read_u64(2, c.require(2)?)?;
        let entries = read_list(3, c.require(3)?)?
            .into_iter()
            .map(|item| {
                let bad = || WireError::BadValue(3, "malformed metering entry");
                if item.len() < 4 {
                    return Err(bad());
                }
                let name_len = u32::from_be_bytes(item[..4].try_into().unwrap()) as usize;
                if item.len() != 4 + name_len + 12 {
                    return Err(bad());
                }
                let content_id = String::from_utf8(item[4..4 + name_len].to_vec())
                    .map_err(|_| bad())?;
                let rest = &item[4 + name_len..];
                Ok(MeteringEntry {
                    content_id,
                    issued: u32::from_be_bytes(rest[..4].try_into().unwrap()),
                    renewed: u32::from_be_bytes(rest[4..8].try_into().unwrap()),
                    released: u32::from_be_bytes(rest[8..12].try_into().unwrap()),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MeteringReport {
            account,
            generated_at,
            entries,
        })
    }
}

// ---------------------------------------------------------------------------

/// Short deterministic description of a key id list for logging.
pub fn key_ids_summary(ids: &[KeyId]) -> String {
    match ids.len() {
        0 => "none".to_string(),
        1 => to_hex(&ids[0].as_bytes()[..4]),
        n => format!("{}… ({n} ids)", to_hex(&ids[0].as_bytes()[..4])),
    }
}
