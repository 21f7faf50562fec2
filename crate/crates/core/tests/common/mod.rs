//! Seeded random generators for wire messages. Valid by construction
//! where a message has semantic invariants, arbitrary otherwise.

#![allow(dead_code)]

use minidrm_core::cert::{CertRole, CertificateBody};
use minidrm_core::error::ErrorCode;
use minidrm_core::messages::*;
use minidrm_core::suite::{KemCiphertext, KemPublicKey, Signature, VerifyingKey};
use minidrm_core::types::{DeviceId, KeyId, SecurityLevel};
use minidrm_core::wire::WireMessage;
use rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn bytes(r: &mut ChaCha20Rng, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    r.fill_bytes(&mut v);
    v
}

pub fn var_bytes(r: &mut ChaCha20Rng, base: usize, spread: usize) -> Vec<u8> {
    let len = base + (r.next_u32() as usize) % spread;
    bytes(r, len)
}

pub fn arr<const N: usize>(r: &mut ChaCha20Rng) -> [u8; N] {
    let mut v = [0u8; N];
    r.fill_bytes(&mut v);
    v
}

pub fn ascii(r: &mut ChaCha20Rng, max_len: usize) -> String {
    let len = (r.next_u32() as usize) % (max_len + 1);
    (0..len)
        .map(|_| char::from(b'a' + (r.next_u32() % 26) as u8))
        .collect()
}

pub fn key_id(r: &mut ChaCha20Rng) -> KeyId {
    KeyId(arr(r))
}

pub fn level(r: &mut ChaCha20Rng) -> SecurityLevel {
    SecurityLevel::from_u16((r.next_u32() % 3) as u16).unwrap()
}

pub fn policy(r: &mut ChaCha20Rng) -> LicensePolicy {
    let mode = PolicyMode::from_u16((r.next_u32() % 3) as u16).unwrap();
    LicensePolicy {
        mode,
        expiry: r.next_u64() >> 16,
        persistent: mode == PolicyMode::Persistent,
        min_security_level: level(r),
        max_concurrent: r.next_u32() % 8,
        lease_duration: (r.next_u64() % 10_000) + 1,
    }
}

/// A manifest that also satisfies `Manifest::validate`.
pub fn manifest(r: &mut ChaCha20Rng) -> Manifest {
    let content_id = format!("content-{}", r.next_u32());
    let segment_size = 64 + (r.next_u32() % 4096);
    let rotation = 1 + (r.next_u32() % 5);
    let total_len = 1 + (r.next_u64() % (segment_size as u64 * 24));
    let n_segments = (total_len - 1) / segment_size as u64 + 1;
    let n_periods = (n_segments - 1) / rotation as u64 + 1;
    let key_ids_per_period: Vec<(u32, KeyId)> =
        (0..n_periods as u32).map(|p| (p, key_id(r))).collect();
    let segments = (0..n_segments)
        .map(|index| {
            let period = (index / rotation as u64) as u32;
            let pt_len = if index + 1 == n_segments {
                total_len - index * segment_size as u64
            } else {
                segment_size as u64
            };
            SegmentRecord {
                index,
                period,
                key_id: key_ids_per_period[period as usize].1,
                uri: format!("seg/{index}.bin"),
                sealed_len: pt_len + 16,
                sealed_digest: arr(r),
            }
        })
        .collect();
    let init_data = InitData {
        content_id: content_id.clone(),
        key_ids: key_ids_per_period.iter().map(|(_, k)| *k).collect(),
    };
    Manifest {
        suite_id: "classic-x25519".to_string(),
        content_id,
        total_len,
        segment_size,
        rotation_period: rotation,
        key_ids_per_period,
        segments,
        init_data,
    }
}

pub fn cert_body(r: &mut ChaCha20Rng) -> CertificateBody {
    CertificateBody {
        suite_id: ascii(r, 12),
        role: if r.next_u32() % 2 == 0 {
            CertRole::Client
        } else {
            CertRole::Server
        },
        sig_pk: VerifyingKey(bytes(r, 32)),
        kem_pk: KemPublicKey(bytes(r, 32)),
        security_level: level(r),
        device_id: DeviceId(arr(r)),
    }
}

pub fn spc_body(r: &mut ChaCha20Rng) -> SpcBody {
    SpcBody {
        suite_id: ascii(r, 16),
        protocol_versions: (0..1 + r.next_u32() % 4)
            .map(|_| (r.next_u32() % 8) as u16)
            .collect(),
        client_time: r.next_u64() >> 20,
        anti_replay_seed: arr(r),
        secure_content_id: arr(r),
        key_ids: (0..1 + r.next_u32() % 6).map(|_| key_id(r)).collect(),
        session_key_encap: KemCiphertext(var_bytes(r, 32, 64)),
        auth_token: ascii(r, 24),
        client_certificate: cert_body(r).encode(),
    }
}

pub fn spc(r: &mut ChaCha20Rng) -> Spc {
    Spc {
        body_bytes: spc_body(r).encode(),
        signature: Signature(bytes(r, 64)),
    }
}

pub fn wrapped_keys(r: &mut ChaCha20Rng, n: usize) -> Vec<WrappedKey> {
    (0..n)
        .map(|_| WrappedKey {
            key_id: key_id(r),
            key: arr(r),
        })
        .collect()
}

pub fn ckc_payload(r: &mut ChaCha20Rng) -> CkcPayload {
    CkcPayload {
        keys: {
            let n = 1 + (r.next_u32() as usize) % 5;
            wrapped_keys(r, n)
        },
        policy: policy(r),
        server_time: r.next_u64() >> 20,
        lease_token: if r.next_u32() % 2 == 0 {
            Some(arr(r))
        } else {
            None
        },
    }
}

pub fn ckc(r: &mut ChaCha20Rng) -> Ckc {
    Ckc {
        sealed: var_bytes(r, 40, 200),
        server_signature: Signature(bytes(r, 64)),
    }
}

pub fn registry(r: &mut ChaCha20Rng) -> KeyRegistry {
    KeyRegistry {
        suite_id: ascii(r, 16),
        content_id: format!("content-{}", r.next_u32()),
        entries: (0..1 + r.next_u32() % 8)
            .map(|p| minidrm_core::types::ContentKey::new(key_id(r), p, arr(r)))
            .collect(),
    }
}

pub fn evidence(r: &mut ChaCha20Rng) -> Evidence {
    Evidence {
        attack: ascii(r, 20),
        outcome: EvidenceOutcome::from_u16((r.next_u32() % 4) as u16).unwrap(),
        detail: ascii(r, 40),
        transcript_digest: arr(r),
    }
}

pub fn report(r: &mut ChaCha20Rng) -> ConformanceReport {
    ConformanceReport {
        suite_id: ascii(r, 16),
        seed: r.next_u64(),
        fixture: if r.next_u32() % 2 == 0 {
            Some(ascii(r, 16))
        } else {
            None
        },
        verdicts: (1..=21)
            .map(|sp| PropertyVerdict {
                sp,
                verdict: Verdict::from_u16((r.next_u32() % 3) as u16).unwrap(),
                evidence: (0..r.next_u32() % 3).map(|_| evidence(r)).collect(),
            })
            .collect(),
        footnotes: (0..r.next_u32() % 3).map(|_| ascii(r, 60)).collect(),
    }
}

pub fn offline_payload(r: &mut ChaCha20Rng) -> OfflinePayload {
    OfflinePayload {
        content_id: format!("content-{}", r.next_u32()),
        signed_manifest: var_bytes(r, 100, 400),
        policy: policy(r),
        keys: {
            let n = 1 + (r.next_u32() as usize) % 4;
            wrapped_keys(r, n)
        },
        stored_at: r.next_u64() >> 20,
    }
}

pub fn offline_record(r: &mut ChaCha20Rng) -> OfflineRecord {
    OfflineRecord {
        content_id: format!("content-{}", r.next_u32()),
        device_id: DeviceId(arr(r)),
        nonce: arr(r),
        sealed: var_bytes(r, 64, 256),
    }
}

pub fn error_envelope(r: &mut ChaCha20Rng) -> ErrorEnvelope {
    ErrorEnvelope {
        code: ErrorCode::from_u16(1 + (r.next_u32() % 14) as u16).unwrap(),
        message: ascii(r, 60),
    }
}

pub fn lease_renew_req(r: &mut ChaCha20Rng) -> LeaseRenewReq {
    let body = LeaseRenewBody {
        suite_id: ascii(r, 16),
        client_time: r.next_u64() >> 20,
        secure_content_id: arr(r),
        lease_token: arr(r),
        auth_token: ascii(r, 24),
        client_certificate: cert_body(r).encode(),
    };
    LeaseRenewReq {
        body_bytes: body.encode(),
        signature: Signature(bytes(r, 64)),
    }
}

pub fn metering_report(r: &mut ChaCha20Rng) -> MeteringReport {
    MeteringReport {
        account: ascii(r, 20),
        generated_at: r.next_u64() >> 20,
        entries: (0..r.next_u32() % 5)
            .map(|i| MeteringEntry {
                content_id: format!("content-{i}"),
                issued: r.next_u32() % 100,
                renewed: r.next_u32() % 100,
                released: r.next_u32() % 100,
            })
            .collect(),
    }
}
