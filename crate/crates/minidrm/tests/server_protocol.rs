//! License server protocol contract: the documented check order decides
//! which code a multi-fault request gets, codes are deterministic, and
//! the replay ledger and lease table hold under concurrent hammering.

mod common;

use std::sync::Arc;

use common::{extra_client_cert_bytes, signed_spc};
use minidrm::conformance::{
    build_deployment, build_deployment_with, Deployment, HarnessConfig, SpcShape, LEASE_CONTENT,
    REPLAY_WINDOW,
};
use minidrm_core::error::ErrorCode;
use minidrm_core::messages::{Spc, SpcBody};
use minidrm_core::suite::KemCiphertext;
use minidrm_core::types::{KeyId, SecurityLevel};
use minidrm_core::wire::WireMessage;
use rand_core::RngCore;

fn cfg(seed: u64) -> HarnessConfig {
    HarnessConfig {
        suite_id: "classic-x25519".into(),
        seed,
        fixture: None,
    }
}

fn code_of(dep: &Deployment, raw: &[u8]) -> Result<(), ErrorCode> {
    dep.service.handle_license(raw).map(|_| ()).map_err(|e| e.code)
}

#[test]
fn multi_fault_requests_resolve_in_documented_stage_order() {
    let dep = build_deployment(&cfg(0x0BD0)).unwrap();

    // Structure precedes everything.
    assert_eq!(code_of(&dep, b"not a message"), Err(ErrorCode::Malformed));
    let truncated = &dep.craft_spc(SpcShape::default())[..9];
    assert_eq!(code_of(&dep, truncated), Err(ErrorCode::Malformed));
    assert_eq!(
        code_of(&dep, &dep.craft_spc(SpcShape { key_ids: Some(vec![]), ..Default::default() })),
        Err(ErrorCode::Malformed)
    );

    // Certificate chain beats the request signature: a forged chain with
    // a corrupt signature reports the chain.
    assert_eq!(
        code_of(
            &dep,
            &dep.craft_spc(SpcShape {
                client_certificate: Some(dep.forged_device_cert(0xF0)),
                corrupt_signature: true,
                auth_token: Some("token-nobody".into()),
                versions: Some(vec![1]),
                ..Default::default()
            })
        ),
        Err(ErrorCode::BadCert)
    );

    // Request signature beats account auth and everything after.
    assert_eq!(
        code_of(
            &dep,
            &dep.craft_spc(SpcShape {
                corrupt_signature: true,
                auth_token: Some("token-nobody".into()),
                versions: Some(vec![1]),
                ..Default::default()
            })
        ),
        Err(ErrorCode::BadSignature)
    );

    // Account auth beats replay, version, and content checks.
    assert_eq!(
        code_of(
            &dep,
            &dep.craft_spc(SpcShape {
                auth_token: Some("token-nobody".into()),
                versions: Some(vec![1]),
                secure_content_id: Some([9u8; 32]),
                client_time: Some(0),
                ..Default::default()
            })
        ),
        Err(ErrorCode::AuthFailed)
    );

    // Freshness and the seed ledger beat version negotiation: a stale
    // clock reading reports replay even alongside a rollback attempt.
    assert_eq!(
        code_of(
            &dep,
            &dep.craft_spc(SpcShape {
                client_time: Some(minidrm::conformance::CLOCK_START - REPLAY_WINDOW - 10),
                versions: Some(vec![1]),
                secure_content_id: Some([9u8; 32]),
                ..Default::default()
            })
        ),
        Err(ErrorCode::Replay)
    );
    // A used seed likewise: burn a seed with a rollback request (rejected
    // at stage seven, after the ledger recorded it), then replay it.
    let seed16 = [0xAB; 16];
    assert_eq!(
        code_of(
            &dep,
            &dep.craft_spc(SpcShape {
                anti_replay_seed: Some(seed16),
                versions: Some(vec![1]),
                ..Default::default()
            })
        ),
        Err(ErrorCode::VersionRollback)
    );
    assert_eq!(
        code_of(
            &dep,
            &dep.craft_spc(SpcShape {
                anti_replay_seed: Some(seed16),
                secure_content_id: Some([9u8; 32]),
                ..Default::default()
            })
        ),
        Err(ErrorCode::Replay)
    );

    // Version negotiation beats content resolution.
    assert_eq!(
        code_of(
            &dep,
            &dep.craft_spc(SpcShape {
                versions: Some(vec![1]),
                secure_content_id: Some([9u8; 32]),
                ..Default::default()
            })
        ),
        Err(ErrorCode::VersionRollback)
    );

    // Unknown content beats the robustness floor and key lookup.
    assert_eq!(
        code_of(
            &dep,
            &dep.craft_spc(SpcShape {
                secure_content_id: Some([9u8; 32]),
                key_ids: Some(vec![KeyId([1; 16])]),
                ..Default::default()
            })
        ),
        Err(ErrorCode::UnknownKeyId)
    );

    // Robustness floor beats per-key lookup: a weak device asking for
    // bogus key ids hears about its level, not the keys.
    let (weak_vault, _weak_client) = dep.extra_client(SecurityLevel::Dev, 0xD1).unwrap();
    let weak_cert = extra_client_cert_bytes(&dep, SecurityLevel::Dev, 0xD1);
    let mut seed16 = [0u8; 16];
    seed16[0] = 0x77;
    assert_eq!(
        dep.service
            .handle_license(&signed_spc(
                &dep,
                &weak_vault,
                weak_cert,
                "alpha-stream",
                vec![KeyId([2; 16])],
                seed16,
                None,
            ))
            .map_err(|e| e.code),
        Err(ErrorCode::LevelTooLow)
    );

    // Key membership beats encapsulation handling.
    assert_eq!(
        code_of(
            &dep,
            &dep.craft_spc(SpcShape {
                key_ids: Some(vec![KeyId([2; 16])]),
                ..Default::default()
            })
        ),
        Err(ErrorCode::UnknownKeyId)
    );

    // A structurally invalid encapsulation is the last malformed gate.
    let bad_encap = signed_spc(
        &dep,
        &dep.vault,
        dep.client_cert_bytes.clone(),
        "alpha-stream",
        dep.package.manifest.init_data.key_ids.clone(),
        [0xC4; 16],
        Some(KemCiphertext(vec![0xEE; 5])),
    );
    assert_eq!(code_of(&dep, &bad_encap), Err(ErrorCode::Malformed));

    // With every earlier gate clean, the clean request issues.
    assert!(code_of(&dep, &dep.craft_spc(SpcShape::default())).is_ok());
}

#[test]
fn rate_limit_runs_before_expensive_checks() {
    let dep = build_deployment_with(&cfg(0x0BD1), |opts| {
        opts.rate_limit_per_sec = Some(1);
    })
    .unwrap();
    // First request from this device id passes the limiter and issues.
    assert!(code_of(&dep, &dep.craft_spc(SpcShape::default())).is_ok());
    // Second in the same second is throttled even though its signature is
    // corrupt: the limiter answers before signature verification.
    assert_eq!(
        code_of(
            &dep,
            &dep.craft_spc(SpcShape {
                corrupt_signature: true,
                ..Default::default()
            })
        ),
        Err(ErrorCode::RateLimited)
    );
    // A different device has its own bucket.
    let (v2, _c2) = dep.extra_client(SecurityLevel::Hardware, 0xB2).unwrap();
    let cert2 = extra_client_cert_bytes(&dep, SecurityLevel::Hardware, 0xB2);
    let raw = signed_spc(
        &dep,
        &v2,
        cert2,
        "alpha-stream",
        dep.package.manifest.init_data.key_ids.clone(),
        [0x31; 16],
        None,
    );
    assert!(code_of(&dep, &raw).is_ok());
    // The throttled device recovers one tick later.
    dep.clock.advance(1);
    assert!(code_of(&dep, &dep.craft_spc(SpcShape::default())).is_ok());
}

#[test]
fn error_codes_are_deterministic_given_ledger_state() {
    let dep = build_deployment(&cfg(0x0BD2)).unwrap();

    // Failures before the replay gate never touch the ledger, so the
    // exact same bytes earn the exact same code, every time.
    let pre_ledger: Vec<(Vec<u8>, ErrorCode)> = vec![
        (
            dep.craft_spc(SpcShape {
                corrupt_signature: true,
                ..Default::default()
            }),
            ErrorCode::BadSignature,
        ),
        (
            dep.craft_spc(SpcShape {
                client_certificate: Some(dep.forged_device_cert(0xF1)),
                ..Default::default()
            }),
            ErrorCode::BadCert,
        ),
        (
            dep.craft_spc(SpcShape {
                auth_token: Some("token-nobody".into()),
                ..Default::default()
            }),
            ErrorCode::AuthFailed,
        ),
    ];
    for (raw, want) in &pre_ledger {
        for _ in 0..3 {
            assert_eq!(code_of(&dep, raw), Err(*want));
        }
    }

    // Failures at or after version negotiation have already consumed
    // their seed: the first pass reports the gate, the replay reports
    // the ledger.
    let post_ledger: Vec<(Vec<u8>, ErrorCode)> = vec![
        (
            dep.craft_spc(SpcShape {
                versions: Some(vec![1]),
                ..Default::default()
            }),
            ErrorCode::VersionRollback,
        ),
        (
            dep.craft_spc(SpcShape {
                secure_content_id: Some([3; 32]),
                ..Default::default()
            }),
            ErrorCode::UnknownKeyId,
        ),
        (
            dep.craft_spc(SpcShape {
                key_ids: Some(vec![KeyId([3; 16])]),
                ..Default::default()
            }),
            ErrorCode::UnknownKeyId,
        ),
    ];
    for (raw, want) in &post_ledger {
        assert_eq!(code_of(&dep, raw), Err(*want));
        assert_eq!(code_of(&dep, raw), Err(ErrorCode::Replay));
    }
}

#[test]
fn concurrent_identical_requests_admit_exactly_one() {
    let dep = build_deployment(&cfg(0x0BD3)).unwrap();
    let raw = dep.craft_spc(SpcShape::default());
    let service = Arc::clone(&dep.service);

    let mut oks = 0;
    let mut replays = 0;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let raw = raw.clone();
                let service = Arc::clone(&service);
                scope.spawn(move || service.handle_license(&raw).map(|_| ()).map_err(|e| e.code))
            })
            .collect();
        for h in handles {
            match h.join().unwrap() {
                Ok(()) => oks += 1,
                Err(ErrorCode::Replay) => replays += 1,
                Err(other) => panic!("unexpected code under contention: {other:?}"),
            }
        }
    });
    assert_eq!((oks, replays), (1, 7));

    // No false positives: a fresh request still sails through.
    assert!(code_of(&dep, &dep.craft_spc(SpcShape::default())).is_ok());
}

#[test]
fn concurrent_lease_grabs_never_exceed_capacity() {
    let dep = build_deployment(&cfg(0x0BD4)).unwrap();
    let kids = dep.lease_package.manifest.init_data.key_ids.clone();

    // Six independent certified devices race for two slots.
    let mut requests = Vec::new();
    for i in 0..6u64 {
        let (vault, _client) = dep.extra_client(SecurityLevel::Hardware, 0x1000 + i).unwrap();
        let cert = extra_client_cert_bytes(&dep, SecurityLevel::Hardware, 0x1000 + i);
        let mut seed16 = [0u8; 16];
        seed16[..8].copy_from_slice(&(0x9000 + i).to_be_bytes());
        let mut r = common::rng(i);
        r.fill_bytes(&mut seed16[8..]);
        requests.push(signed_spc(&dep, &vault, cert, LEASE_CONTENT, kids.clone(), seed16, None));
    }

    let service = Arc::clone(&dep.service);
    let mut granted = 0;
    let mut exhausted = 0;
    std::thread::scope(|scope| {
        let handles: Vec<_> = requests
            .iter()
            .map(|raw| {
                let service = Arc::clone(&service);
                scope.spawn(move || service.handle_license(raw).map(|_| ()).map_err(|e| e.code))
            })
            .collect();
        for h in handles {
            match h.join().unwrap() {
                Ok(()) => granted += 1,
                Err(ErrorCode::LeaseExhausted) => exhausted += 1,
                Err(other) => panic!("unexpected code in lease race: {other:?}"),
            }
        }
    });
    assert_eq!((granted, exhausted), (2, 4));
}

#[test]
fn wrong_suite_requests_are_malformed() {
    let dep = build_deployment(&cfg(0x0BD5)).unwrap();
    let raw = dep.craft_spc(SpcShape::default());
    let mut spc = Spc::decode(&raw).unwrap();
    let mut body = SpcBody::decode(&spc.body_bytes).unwrap();
    body.suite_id = "pq-mlkem768".into();
    spc.body_bytes = body.encode();
    // Even before the signature gets a chance to fail, the suite gate
    // answers: cross-suite requests are structural errors.
    assert_eq!(code_of(&dep, &spc.encode()), Err(ErrorCode::Malformed));
}
