//! Attack simulations and structural probes, one set per security
//! property. Every attack runs against its own freshly built deployment,
//! so earlier evidence can never contaminate later evidence.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use minidrm_core::derive::derive_content_key;
use minidrm_core::error::ErrorCode;
use minidrm_core::keys::{Identity, KeyRole};
use minidrm_core::messages::{Ckc, Evidence, EvidenceOutcome, SignedManifest};
use minidrm_core::suite::{suite_by_id, AeadKey, AeadNonce, CryptoSuite, Signature};
use minidrm_core::time::Clock;
use minidrm_core::types::{KeySeed, SecurityLevel};
use minidrm_core::wire::WireMessage;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::client::{ClientError, DirSegmentSource, MemorySegmentSource};
use crate::packager;
use crate::server::ContentPolicy;
use crate::vault::expected_sink_digest;

use super::{
    build_deployment, build_deployment_with, Deployment, Fixture, HarnessConfig, HarnessError,
    SpcShape, LEASE_DURATION, RENTAL_CONTENT, RENTAL_DURATION, REPLAY_WINDOW,
};

pub fn evidence_for(sp: u16, cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    match sp {
        1 => sp1_key_generation(cfg),
        2 => sp2_registry_transit(cfg),
        3 => sp3_license_transit(cfg),
        4 => sp4_keydb_at_rest(cfg),
        5 => sp5_device_key_storage(cfg),
        6 => sp6_disposal_and_expiry(cfg),
        7 => sp7_standard_algorithms(cfg),
        8 => sp8_rekeying(cfg),
        9 => sp9_session_and_replay(cfg),
        10 => sp10_public_key_management(cfg),
        11 => Ok(vec![note(
            cfg,
            "prepackaged-storage",
            "content enters the system as local files; pre-packaging storage is out of scope",
        )]),
        12 => sp12_packaged_storage(cfg),
        13 => Ok(vec![note(
            cfg,
            "prepackaged-transit",
            "content enters the system as local files; pre-packaging transit is out of scope",
        )]),
        14 => sp14_segment_transit(cfg),
        15 => sp15_video_path(cfg),
        16 => sp16_manifest(cfg),
        17 => sp17_user_authentication(cfg),
        18 => sp18_server_authentication(cfg),
        19 => sp19_rate_limit(cfg),
        20 => sp20_tee_boundary(cfg),
        21 => sp21_suite_swap(cfg),
        _ => Err(HarnessError::Setup(format!("unknown property SP{sp}"))),
    }
}

fn outcome_tag(o: EvidenceOutcome) -> u8 {
    match o {
        EvidenceOutcome::Blocked => 0,
        EvidenceOutcome::Succeeded => 1,
        EvidenceOutcome::Held => 2,
        EvidenceOutcome::Violated => 3,
    }
}

fn mk(
    suite: &dyn CryptoSuite,
    attack: &str,
    outcome: EvidenceOutcome,
    detail: impl Into<String>,
) -> Evidence {
    let detail = detail.into();
    let mut t = Vec::with_capacity(attack.len() + detail.len() + 1);
    t.extend_from_slice(attack.as_bytes());
    t.push(outcome_tag(outcome));
    t.extend_from_slice(detail.as_bytes());
    Evidence {
        attack: attack.to_string(),
        outcome,
        detail,
        transcript_digest: suite.hash(&t),
    }
}

fn note(cfg: &HarnessConfig, attack: &str, detail: &str) -> Evidence {
    let suite = suite_by_id(&cfg.suite_id).expect("suite validated by caller");
    mk(suite, attack, EvidenceOutcome::Held, detail)
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Scan every regular file under `dir` for any needle; returns sorted
/// relative names of files with hits.
fn scan_tree(dir: &Path, needles: &[&[u8]]) -> std::io::Result<Vec<String>> {
    let mut hits = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let mut entries: Vec<_> = fs::read_dir(&d)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path)?;
                if needles.iter().any(|n| contains(&bytes, n)) {
                    let rel = path
                        .strip_prefix(dir)
                        .unwrap_or(&path)
                        .to_string_lossy()
                        .into_owned();
                    hits.push(rel);
                }
            }
        }
    }
    hits.sort();
    Ok(hits)
}

fn setup(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Setup(e.to_string())
}

fn plain_chunks(plaintext: &[u8], segment_size: usize) -> Vec<&[u8]> {
    plaintext.chunks(segment_size).collect()
}

/// Full license exchange driven by hand so attacks can tamper with the
/// response. Mirrors the client pipeline: signature check first (unless
/// the deployment fixture disables it), then vault install.
fn manual_license(
    d: &Deployment,
    mutate: Option<&dyn Fn(&mut Ckc)>,
) -> Result<(), String> {
    let (handle, encap) = d
        .vault
        .begin_license_session(d.server_kem_pk())
        .map_err(|e| format!("setup: {e}"))?;
    let mut seed16 = [0u8; 16];
    d.rng.lock().unwrap().fill_bytes(&mut seed16);
    let body = minidrm_core::messages::SpcBody {
        suite_id: d.suite.id().to_string(),
        protocol_versions: minidrm_core::SUPPORTED_PROTOCOL_VERSIONS.to_vec(),
        client_time: d.clock.now(),
        anti_replay_seed: seed16,
        secure_content_id: minidrm_core::derive::secure_content_id(d.suite, RENTAL_CONTENT),
        key_ids: d.content.manifest.init_data.key_ids.clone(),
        session_key_encap: encap,
        auth_token: super::AUTH_TOKEN.to_string(),
        client_certificate: d.client_cert_bytes.clone(),
    };
    let body_bytes = body.encode();
    let signature = d
        .vault
        .sign_payload(&body_bytes)
        .map_err(|e| format!("setup: {e}"))?;
    let spc = minidrm_core::messages::Spc {
        body_bytes,
        signature,
    }
    .encode();
    let ckc_bytes = d
        .service
        .handle_license(&spc)
        .map_err(|env| format!("denied: {:?}", env.code))?;
    let mut ckc = Ckc::decode(&ckc_bytes).map_err(|_| "malformed license".to_string())?;
    if let Some(m) = mutate {
        m(&mut ckc);
    }
    let skip_sig = d.fixture == Some(Fixture::UnauthenticatedLicense);
    if !skip_sig
        && !d
            .suite
            .verify(&d.server_cert.body.sig_pk, &ckc.sealed, &ckc.server_signature)
    {
        return Err("rejected: bad server signature over license".to_string());
    }
    d.vault
        .install_license(handle, &seed16, &ckc.sealed)
        .map_err(|e| format!("rejected: {e}"))?;
    Ok(())
}

// SP1: keys and identifiers come from a CSPRNG-seeded derivation with a
// fixed-length seed.
fn sp1_key_generation(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let suite = suite_by_id(&cfg.suite_id).map_err(setup)?;
    let mut out = Vec::new();

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5031);
    let kid = minidrm_core::derive::derive_key_id(suite, "sp1-probe", 0);
    let mut keys = std::collections::HashSet::new();
    let n = 64;
    for _ in 0..n {
        let seed = KeySeed::generate(&mut rng);
        keys.insert(*derive_content_key(suite, &seed, kid, 0).key_bytes());
    }
    out.push(if keys.len() == n {
        mk(
            suite,
            "seed-distinctness",
            EvidenceOutcome::Held,
            format!("{n} random seeds -> {n} distinct content keys"),
        )
    } else {
        mk(
            suite,
            "seed-distinctness",
            EvidenceOutcome::Violated,
            format!("{n} random seeds -> only {} distinct content keys", keys.len()),
        )
    });

    out.push(match KeySeed::from_bytes(&[0u8; 8]) {
        Err(_) => mk(
            suite,
            "seed-length-enforced",
            EvidenceOutcome::Held,
            "short key seed rejected",
        ),
        Ok(_) => mk(
            suite,
            "seed-length-enforced",
            EvidenceOutcome::Violated,
            "short key seed accepted",
        ),
    });

    let d = build_deployment(cfg)?;
    let mut nonces = std::collections::HashSet::new();
    for rec in &d.package.manifest.segments {
        nonces.insert(AeadNonce::for_segment(rec.period, rec.index).0);
    }
    let total = d.package.manifest.segments.len();
    out.push(if nonces.len() == total {
        mk(
            suite,
            "segment-nonce-uniqueness",
            EvidenceOutcome::Held,
            format!("{total} segments -> {total} distinct nonces"),
        )
    } else {
        mk(
            suite,
            "segment-nonce-uniqueness",
            EvidenceOutcome::Violated,
            "segment nonce collision",
        )
    });
    Ok(out)
}

// SP2: the key registry crossing to the license server must be sealed.
fn sp2_registry_transit(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let d = build_deployment(cfg)?;
    let reg_bytes = fs::read(packager::registry_path(&d.pkg_dir)).map_err(setup)?;
    let leaked = d
        .key_canaries
        .iter()
        .filter(|k| contains(&reg_bytes, &k[..]))
        .count();
    Ok(vec![if leaked == 0 {
        mk(
            d.suite,
            "registry-transit-scan",
            EvidenceOutcome::Held,
            format!(
                "registry.sealed carries none of the {} content keys in the clear",
                d.key_canaries.len()
            ),
        )
    } else {
        mk(
            d.suite,
            "registry-transit-scan",
            EvidenceOutcome::Violated,
            format!("{leaked} content keys visible in registry transport bytes"),
        )
    }])
}

// SP3: licenses must be sealed to the session key and authenticated by
// the server signature.
fn sp3_license_transit(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let mut out = Vec::new();

    // Flip the final sealed byte in flight.
    let d = build_deployment(cfg)?;
    let tamper = |ckc: &mut Ckc| {
        if let Some(b) = ckc.sealed.last_mut() {
            *b ^= 0x01;
        }
    };
    out.push(match manual_license(&d, Some(&tamper)) {
        Err(why) => mk(
            d.suite,
            "license-tamper",
            EvidenceOutcome::Blocked,
            format!("tampered license {why}"),
        ),
        Ok(()) => mk(
            d.suite,
            "license-tamper",
            EvidenceOutcome::Succeeded,
            "tampered license installed",
        ),
    });

    // Replace the server signature with an attacker signature.
    let d = build_deployment(cfg)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5033);
    let attacker = Identity::generate(d.suite, KeyRole::Root, SecurityLevel::Software, &mut rng);
    let attacker_sk = attacker.require_sig_sk().map_err(setup)?.clone();
    let suite = d.suite;
    let resign = move |ckc: &mut Ckc| {
        ckc.server_signature = suite
            .sign(&attacker_sk, &ckc.sealed)
            .unwrap_or(Signature(Vec::new()));
    };
    out.push(match manual_license(&d, Some(&resign)) {
        Err(why) => mk(
            d.suite,
            "license-wrong-signer",
            EvidenceOutcome::Blocked,
            format!("attacker-signed license {why}"),
        ),
        Ok(()) => mk(
            d.suite,
            "license-wrong-signer",
            EvidenceOutcome::Succeeded,
            "attacker-signed license installed",
        ),
    });
    Ok(out)
}

// SP4: the server key database must be sealed at rest.
fn sp4_keydb_at_rest(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let mut out = Vec::new();

    let d = build_deployment(cfg)?;
    fs::create_dir_all(&d.state_dir).map_err(setup)?;
    let persisted = d.service.persist_keydb(&d.state_dir).map_err(setup)?;
    let needles: Vec<&[u8]> = d.key_canaries.iter().map(|k| &k[..]).collect();
    let hits = scan_tree(&d.state_dir, &needles).map_err(setup)?;
    out.push(if hits.is_empty() {
        mk(
            d.suite,
            "keydb-at-rest-scan",
            EvidenceOutcome::Held,
            format!("{persisted} persisted registries carry no clear content keys"),
        )
    } else {
        mk(
            d.suite,
            "keydb-at-rest-scan",
            EvidenceOutcome::Violated,
            format!("clear content keys on disk in {} files", hits.len()),
        )
    });

    let d = build_deployment(cfg)?;
    fs::create_dir_all(&d.state_dir).map_err(setup)?;
    d.service.persist_keydb(&d.state_dir).map_err(setup)?;
    let mut files: Vec<_> = fs::read_dir(&d.state_dir)
        .map_err(setup)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(setup)?;
    files.sort_by_key(|e| e.file_name());
    let target = files
        .first()
        .ok_or_else(|| HarnessError::Setup("no persisted key database files".into()))?
        .path();
    let mut bytes = fs::read(&target).map_err(setup)?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    fs::write(&target, &bytes).map_err(setup)?;
    let mut policies = HashMap::new();
    policies.insert(
        RENTAL_CONTENT.to_string(),
        ContentPolicy {
            mode: minidrm_core::messages::PolicyMode::Rental,
            rental_duration: RENTAL_DURATION,
            lease_duration: 0,
            max_concurrent: 0,
            min_level: SecurityLevel::Software,
        },
    );
    policies.insert(
        super::LEASE_CONTENT.to_string(),
        ContentPolicy {
            mode: minidrm_core::messages::PolicyMode::Lease,
            rental_duration: 0,
            lease_duration: LEASE_DURATION,
            max_concurrent: super::LEASE_CAPACITY,
            min_level: SecurityLevel::Software,
        },
    );
    out.push(match d.service.load_keydb(&d.state_dir, &policies) {
        Err(_) => mk(
            d.suite,
            "keydb-tamper",
            EvidenceOutcome::Blocked,
            "tampered key database refused on load",
        ),
        Ok(_) => mk(
            d.suite,
            "keydb-tamper",
            EvidenceOutcome::Succeeded,
            "tampered key database loaded",
        ),
    });
    Ok(out)
}

// SP5: content keys never leave the vault boundary through any public
// surface.
fn sp5_device_key_storage(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let d = build_deployment(cfg)?;
    let license = d.client.request_license(&d.content).map_err(setup)?;
    let mut residue = Vec::new();

    residue.extend_from_slice(format!("{:?}", d.vault).as_bytes());
    residue.extend_from_slice(format!("{license:?}").as_bytes());
    for kid in d.vault.installed_key_ids() {
        residue.extend_from_slice(kid.as_bytes());
    }
    residue.extend_from_slice(&d.service.certificate_bytes());
    residue.extend_from_slice(d.service.metering_report(super::ACCOUNT).encode().as_slice());
    if let Err(env) = d.service.handle_license(b"not a license request") {
        residue.extend_from_slice(env.encode().as_slice());
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5035);
    for _ in 0..64 {
        let mut challenge = [0u8; 24];
        rng.fill_bytes(&mut challenge);
        let att = d.vault.attest(&challenge).map_err(setup)?;
        residue.extend_from_slice(&att.encode());
        let sink = d.vault.create_sink();
        let (digest, count) = d.vault.sink_state(sink).map_err(setup)?;
        residue.extend_from_slice(&digest);
        residue.extend_from_slice(&count.to_be_bytes());
        let bogus = minidrm_core::types::KeyId(challenge[..16].try_into().unwrap());
        let rec = &d.package.manifest.segments[0];
        let mut ghost = rec.clone();
        ghost.key_id = bogus;
        if let Err(e) =
            d.vault
                .decrypt_segment_to_sink(RENTAL_CONTENT, &ghost, &[0u8; 64], sink, d.clock.now())
        {
            residue.extend_from_slice(e.to_string().as_bytes());
        }
    }

    // Play one segment so session-key material has been exercised too.
    let session = d.client.start_playback(&d.content, &license).map_err(setup)?;
    let mut session = session;
    let source = DirSegmentSource::new(&d.pkg_dir);
    let report = session.play_to_end(&source).map_err(setup)?;
    residue.extend_from_slice(&report.sink_digest);

    let leaked = d
        .key_canaries
        .iter()
        .filter(|k| contains(&residue, &k[..]))
        .count();
    Ok(vec![if leaked == 0 {
        mk(
            d.suite,
            "vault-residue-scan",
            EvidenceOutcome::Held,
            format!(
                "{} bytes of public API residue carry no content key material",
                residue.len()
            ),
        )
    } else {
        mk(
            d.suite,
            "vault-residue-scan",
            EvidenceOutcome::Violated,
            format!("{leaked} content keys visible in public API residue"),
        )
    }])
}

// SP6: expired keys must stop working and disposal must be final; a
// rental that expires mid-session finishes that session.
fn sp6_disposal_and_expiry(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let mut out = Vec::new();

    // New session after expiry.
    let d = build_deployment(cfg)?;
    let license = d.client.request_license(&d.content).map_err(setup)?;
    d.clock.advance(RENTAL_DURATION + 1);
    let mut session = d.client.start_playback(&d.content, &license).map_err(setup)?;
    let source = DirSegmentSource::new(&d.pkg_dir);
    out.push(match session.play_to_end(&source) {
        Err(ClientError::Expired) => mk(
            d.suite,
            "expired-playback",
            EvidenceOutcome::Blocked,
            "new session after expiry refused by vault",
        ),
        Err(e) => mk(
            d.suite,
            "expired-playback",
            EvidenceOutcome::Blocked,
            format!("new session after expiry refused: {e}"),
        ),
        Ok(r) => mk(
            d.suite,
            "expired-playback",
            EvidenceOutcome::Succeeded,
            format!(
                "expired license still decrypted {} segments",
                r.delivered_segments
            ),
        ),
    });

    // Expiry mid-session: the running session completes.
    let d = build_deployment(cfg)?;
    let license = d.client.request_license(&d.content).map_err(setup)?;
    let mut session = d.client.start_playback(&d.content, &license).map_err(setup)?;
    let source = DirSegmentSource::new(&d.pkg_dir);
    for _ in 0..2 {
        session.step(&source).map_err(setup)?;
    }
    d.clock.advance(RENTAL_DURATION + 1);
    out.push(match session.play_to_end(&source) {
        Ok(r) if r.completed && r.expired_during_play => mk(
            d.suite,
            "mid-session-expiry",
            EvidenceOutcome::Held,
            "session started before expiry ran to completion and flagged the expiry",
        ),
        Ok(r) => mk(
            d.suite,
            "mid-session-expiry",
            EvidenceOutcome::Violated,
            format!(
                "unexpected session state: completed={} expired_during_play={}",
                r.completed, r.expired_during_play
            ),
        ),
        Err(e) => mk(
            d.suite,
            "mid-session-expiry",
            EvidenceOutcome::Violated,
            format!("running rental session aborted at expiry: {e}"),
        ),
    });

    // Disposal must remove keys for good.
    let d = build_deployment(cfg)?;
    d.client.request_license(&d.content).map_err(setup)?;
    let before = d.vault.installed_key_ids().len();
    d.clock.advance(RENTAL_DURATION + 1);
    let disposed = d.vault.dispose_expired(d.clock.now());
    let rec = &d.package.manifest.segments[0];
    let sealed = fs::read(d.pkg_dir.join(&rec.uri)).map_err(setup)?;
    let sink = d.vault.create_sink();
    // Backdated session start: only disposal stands in the way now.
    let attempt =
        d.vault
            .decrypt_segment_to_sink(RENTAL_CONTENT, rec, &sealed, sink, super::CLOCK_START);
    out.push(match attempt {
        Err(_) if disposed == before && before > 0 => mk(
            d.suite,
            "post-disposal-decrypt",
            EvidenceOutcome::Blocked,
            format!("{disposed} expired keys disposed; decryption afterwards refused"),
        ),
        Err(_) => mk(
            d.suite,
            "post-disposal-decrypt",
            EvidenceOutcome::Succeeded,
            format!("disposal removed {disposed} of {before} expired keys"),
        ),
        Ok(_) => mk(
            d.suite,
            "post-disposal-decrypt",
            EvidenceOutcome::Succeeded,
            "decryption still possible after expiry and disposal",
        ),
    });

    // Lease slots are a hard cap across devices.
    let d = build_deployment(cfg)?;
    d.client.request_license(&d.lease_content).map_err(setup)?;
    let (_v2, c2) = d.extra_client(SecurityLevel::Hardware, 0x6c32)?;
    c2.request_license(&d.lease_content).map_err(setup)?;
    let (_v3, c3) = d.extra_client(SecurityLevel::Hardware, 0x6c33)?;
    out.push(match c3.request_license(&d.lease_content) {
        Err(e) if e.denial_code() == Some(ErrorCode::LeaseExhausted) => mk(
            d.suite,
            "lease-overflow",
            EvidenceOutcome::Blocked,
            "third device over a two-slot lease refused",
        ),
        Err(e) => mk(
            d.suite,
            "lease-overflow",
            EvidenceOutcome::Violated,
            format!("unexpected lease denial: {e}"),
        ),
        Ok(_) => mk(
            d.suite,
            "lease-overflow",
            EvidenceOutcome::Succeeded,
            "lease capacity exceeded",
        ),
    });
    Ok(out)
}

// SP7: standard authenticated symmetric primitives.
fn sp7_standard_algorithms(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let suite = suite_by_id(&cfg.suite_id).map_err(setup)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5037);
    let mut key = [0u8; 16];
    rng.fill_bytes(&mut key);
    let key = AeadKey(key);
    let nonce = AeadNonce::random(&mut rng);
    let mut msg = vec![0u8; 256];
    rng.fill_bytes(&mut msg);
    let sealed = suite.seal(&key, &nonce, b"sp7", &msg);

    let mut rejected = 0usize;
    let probes = 16usize;
    for i in 0..probes {
        let pos = i * sealed.len() / probes;
        let mut tampered = sealed.clone();
        tampered[pos] ^= 0x01;
        if suite.open(&key, &nonce, b"sp7", &tampered).is_err() {
            rejected += 1;
        }
    }
    let roundtrip = suite.open(&key, &nonce, b"sp7", &sealed).ok() == Some(msg);

    let mut out = Vec::new();
    out.push(if rejected == probes {
        mk(
            suite,
            "aead-tamper-grid",
            EvidenceOutcome::Held,
            format!("{probes}/{probes} ciphertext flips rejected by the AEAD"),
        )
    } else {
        mk(
            suite,
            "aead-tamper-grid",
            EvidenceOutcome::Violated,
            format!("only {rejected}/{probes} ciphertext flips rejected"),
        )
    });
    out.push(if roundtrip && minidrm_core::suite::AEAD_KEY_LEN == 16 {
        mk(
            suite,
            "aead-parameters",
            EvidenceOutcome::Held,
            format!(
                "suite {} content protection: AES-128-GCM (16-byte key, 12-byte nonce, 16-byte tag)",
                suite.id()
            ),
        )
    } else {
        mk(
            suite,
            "aead-parameters",
            EvidenceOutcome::Violated,
            "unexpected AEAD parameters",
        )
    });
    Ok(out)
}

// SP8: different parts of the content use different keys.
fn sp8_rekeying(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let d = build_deployment(cfg)?;
    let m = &d.package.manifest;
    let periods = m.key_ids_per_period.len();
    let mut schedule_ok = periods >= 2;
    for (i, (period, kid)) in m.key_ids_per_period.iter().enumerate() {
        if *period != i as u32 {
            schedule_ok = false;
        }
        if minidrm_core::derive::derive_key_id(d.suite, RENTAL_CONTENT, *period) != *kid {
            schedule_ok = false;
        }
    }
    for rec in &m.segments {
        if rec.period != (rec.index / m.rotation_period as u64) as u32 {
            schedule_ok = false;
        }
    }
    let mut distinct = std::collections::HashSet::new();
    for k in &d.key_canaries {
        distinct.insert(*k);
    }
    let keys_distinct = distinct.len() == d.key_canaries.len();

    Ok(vec![if schedule_ok && keys_distinct {
        mk(
            d.suite,
            "rotation-schedule",
            EvidenceOutcome::Held,
            format!(
                "{periods} periods over {} segments, one distinct key per period",
                m.segments.len()
            ),
        )
    } else {
        mk(
            d.suite,
            "rotation-schedule",
            EvidenceOutcome::Violated,
            format!("schedule_ok={schedule_ok} keys_distinct={keys_distinct}"),
        )
    }])
}

// SP9: session keys are fresh per exchange and requests cannot be
// replayed.
fn sp9_session_and_replay(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let mut out = Vec::new();

    let d = build_deployment(cfg)?;
    let spc = d.craft_spc(SpcShape::default());
    d.service
        .handle_license(&spc)
        .map_err(|env| HarnessError::Setup(format!("first request denied: {:?}", env.code)))?;
    out.push(match d.service.handle_license(&spc) {
        Err(env) if env.code == ErrorCode::Replay => mk(
            d.suite,
            "request-replay",
            EvidenceOutcome::Blocked,
            "verbatim replay of a served request denied",
        ),
        Err(env) => mk(
            d.suite,
            "request-replay",
            EvidenceOutcome::Violated,
            format!("replay denied with unexpected code {:?}", env.code),
        ),
        Ok(_) => mk(
            d.suite,
            "request-replay",
            EvidenceOutcome::Succeeded,
            "verbatim replay of a served request issued a second license",
        ),
    });

    let d = build_deployment(cfg)?;
    let stale = d.craft_spc(SpcShape {
        client_time: Some(super::CLOCK_START - 3 * REPLAY_WINDOW),
        ..SpcShape::default()
    });
    out.push(match d.service.handle_license(&stale) {
        Err(env) if env.code == ErrorCode::Replay => mk(
            d.suite,
            "stale-request",
            EvidenceOutcome::Blocked,
            "request outside the freshness window denied",
        ),
        Err(env) => mk(
            d.suite,
            "stale-request",
            EvidenceOutcome::Violated,
            format!("stale request denied with unexpected code {:?}", env.code),
        ),
        Ok(_) => mk(
            d.suite,
            "stale-request",
            EvidenceOutcome::Succeeded,
            "request outside the freshness window served",
        ),
    });

    let d = build_deployment(cfg)?;
    let mut encaps = std::collections::HashSet::new();
    let n = 32;
    for _ in 0..n {
        let (handle, ct) = d.vault.begin_license_session(d.server_kem_pk()).map_err(setup)?;
        d.vault.forget_session(handle);
        encaps.insert(ct.as_bytes().to_vec());
    }
    out.push(if encaps.len() == n {
        mk(
            d.suite,
            "session-key-freshness",
            EvidenceOutcome::Held,
            format!("{n} key exchanges -> {n} distinct encapsulations"),
        )
    } else {
        mk(
            d.suite,
            "session-key-freshness",
            EvidenceOutcome::Violated,
            "repeated session key encapsulation observed",
        )
    });
    Ok(out)
}

// SP10: public keys are certified, version floors hold, and device
// security levels gate licenses.
fn sp10_public_key_management(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let suite = suite_by_id(&cfg.suite_id).map_err(setup)?;
    let mut out = Vec::new();

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5030);
    let mut sig_pks = std::collections::HashSet::new();
    let mut kem_pks = std::collections::HashSet::new();
    let n = 64;
    for _ in 0..n {
        let (_, pk) = suite.gen_signing_keypair(&mut rng);
        sig_pks.insert(pk.as_bytes().to_vec());
        let (_, kpk) = suite.gen_kem_keypair(&mut rng);
        kem_pks.insert(kpk.as_bytes().to_vec());
    }
    out.push(if sig_pks.len() == n && kem_pks.len() == n {
        mk(
            suite,
            "keypair-distinctness",
            EvidenceOutcome::Held,
            format!("{n} signing and {n} KEM keypairs, all distinct"),
        )
    } else {
        mk(
            suite,
            "keypair-distinctness",
            EvidenceOutcome::Violated,
            "duplicate public key generated",
        )
    });

    let d = build_deployment(cfg)?;
    let downgrade = d.craft_spc(SpcShape {
        versions: Some(vec![1]),
        ..SpcShape::default()
    });
    out.push(match d.service.handle_license(&downgrade) {
        Err(env) if env.code == ErrorCode::VersionRollback => mk(
            d.suite,
            "version-downgrade",
            EvidenceOutcome::Blocked,
            "protocol version below the floor refused",
        ),
        Err(env) => mk(
            d.suite,
            "version-downgrade",
            EvidenceOutcome::Violated,
            format!("downgrade denied with unexpected code {:?}", env.code),
        ),
        Ok(_) => mk(
            d.suite,
            "version-downgrade",
            EvidenceOutcome::Succeeded,
            "license issued below the version floor",
        ),
    });

    let d = build_deployment(cfg)?;
    let (_vault, weak) = d.extra_client(SecurityLevel::Dev, 0x6456)?;
    out.push(match weak.request_license(&d.content) {
        Err(e) if e.denial_code() == Some(ErrorCode::LevelTooLow) => mk(
            d.suite,
            "level-floor",
            EvidenceOutcome::Blocked,
            "device below the content's minimum security level refused",
        ),
        Err(e) => mk(
            d.suite,
            "level-floor",
            EvidenceOutcome::Violated,
            format!("unexpected level denial: {e}"),
        ),
        Ok(_) => mk(
            d.suite,
            "level-floor",
            EvidenceOutcome::Succeeded,
            "license issued below the minimum security level",
        ),
    });
    Ok(out)
}

// SP12: packaged segments on disk never expose plaintext.
fn sp12_packaged_storage(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let d = build_deployment(cfg)?;
    let needles: Vec<&[u8]> = d.text_canaries.iter().map(|c| &c[..]).collect();
    let hits = scan_tree(&d.pkg_dir.join(packager::SEGMENT_DIR), &needles).map_err(setup)?;
    let mut identical = 0usize;
    for rec in &d.package.manifest.segments {
        let sealed = fs::read(d.pkg_dir.join(&rec.uri)).map_err(setup)?;
        let start = (rec.index as usize) * d.package.manifest.segment_size as usize;
        let end = (start + d.package.manifest.segment_size as usize).min(d.plaintext.len());
        if sealed.starts_with(&d.plaintext[start..end]) {
            identical += 1;
        }
    }
    Ok(vec![if hits.is_empty() && identical == 0 {
        mk(
            d.suite,
            "segment-store-scan",
            EvidenceOutcome::Held,
            format!(
                "{} stored segments carry no plaintext markers",
                d.package.manifest.segments.len()
            ),
        )
    } else {
        mk(
            d.suite,
            "segment-store-scan",
            EvidenceOutcome::Violated,
            format!(
                "plaintext visible in stored segments: {} marker hits, {} identical segments",
                hits.len(),
                identical
            ),
        )
    }])
}

// SP14: segment transit is authenticated; in-flight modification must
// not reach the sink.
fn sp14_segment_transit(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let mut out = Vec::new();

    let d = build_deployment(cfg)?;
    let license = d.client.request_license(&d.content).map_err(setup)?;
    let mut source = MemorySegmentSource::from_package(&d.package);
    let target_uri = d.package.manifest.segments[1].uri.clone();
    let flip_at = 100usize;
    source
        .segments
        .get_mut(&target_uri)
        .ok_or_else(|| HarnessError::Setup("segment missing from source".into()))?[flip_at] ^=
        0x01;
    let mut session = d.client.start_playback(&d.content, &license).map_err(setup)?;
    out.push(match session.play_to_end(&source) {
        Err(_) => mk(
            d.suite,
            "segment-malleability",
            EvidenceOutcome::Blocked,
            "in-flight segment flip refused by authenticated decryption",
        ),
        Ok(r) => {
            let seg = d.package.manifest.segment_size as usize;
            let mut doctored = d.plaintext.clone();
            doctored[seg + flip_at] ^= 0x01;
            let chunks = plain_chunks(&doctored, seg);
            let predicted = expected_sink_digest(d.suite, &chunks);
            let precise = predicted == r.sink_digest;
            mk(
                d.suite,
                "segment-malleability",
                EvidenceOutcome::Succeeded,
                format!(
                    "in-flight flip delivered to the sink; attacker-predicted plaintext: {precise}"
                ),
            )
        }
    });

    let d = build_deployment(cfg)?;
    let needles: Vec<&[u8]> = d.text_canaries.iter().map(|c| &c[..]).collect();
    let mut wire_hits = 0usize;
    for sealed in &d.package.segments {
        if needles.iter().any(|n| contains(sealed, n)) {
            wire_hits += 1;
        }
    }
    out.push(if wire_hits == 0 {
        mk(
            d.suite,
            "wire-plaintext-scan",
            EvidenceOutcome::Held,
            "segment transit bytes carry no plaintext markers",
        )
    } else {
        mk(
            d.suite,
            "wire-plaintext-scan",
            EvidenceOutcome::Violated,
            format!("plaintext markers in {wire_hits} transit segments"),
        )
    });
    Ok(out)
}

// SP15: decrypted media exists only inside the vault; the boundary
// surfaces a digest and count, nothing else.
fn sp15_video_path(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let d = build_deployment(cfg)?;
    let license = d.client.request_license(&d.content).map_err(setup)?;
    let mut session = d.client.start_playback(&d.content, &license).map_err(setup)?;
    let source = DirSegmentSource::new(&d.pkg_dir);
    let report = session.play_to_end(&source).map_err(setup)?;
    let chunks = plain_chunks(&d.plaintext, d.package.manifest.segment_size as usize);
    let expected = expected_sink_digest(d.suite, &chunks);
    let ok = report.completed
        && report.sink_digest == expected
        && report.delivered_bytes == d.plaintext.len() as u64;
    Ok(vec![if ok {
        mk(
            d.suite,
            "sink-boundary",
            EvidenceOutcome::Held,
            format!(
                "playback delivered {} bytes inside the vault; only the running digest crossed the boundary",
                report.delivered_bytes
            ),
        )
    } else {
        mk(
            d.suite,
            "sink-boundary",
            EvidenceOutcome::Violated,
            format!(
                "sink state diverged: completed={} bytes={}",
                report.completed, report.delivered_bytes
            ),
        )
    }])
}

// SP16: the manifest is signed; redirection or mutation must be caught
// before any segment is fetched.
fn sp16_manifest(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let mut out = Vec::new();

    // Wholesale swap: attacker manifest with a redirected segment URI.
    let d = build_deployment(cfg)?;
    let mut manifest =
        packager::decode_manifest_unverified(&d.package.signed_manifest_bytes).map_err(setup)?;
    manifest.segments[0].uri = "seg/poisoned.bin".to_string();
    let manifest_bytes = manifest.encode();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5316);
    let attacker = Identity::generate(d.suite, KeyRole::Publisher, SecurityLevel::Software, &mut rng);
    let signature = if d.fixture == Some(Fixture::UnsignedManifest) {
        Signature(Vec::new())
    } else {
        d.suite
            .sign(attacker.require_sig_sk().map_err(setup)?, &manifest_bytes)
            .map_err(setup)?
    };
    let swapped = SignedManifest {
        manifest_bytes,
        signature,
    }
    .encode();
    out.push(match d.client.open_content(&swapped) {
        Err(_) => mk(
            d.suite,
            "manifest-swap",
            EvidenceOutcome::Blocked,
            "redirected manifest rejected before any segment fetch",
        ),
        Ok(c) => mk(
            d.suite,
            "manifest-swap",
            EvidenceOutcome::Succeeded,
            format!(
                "redirected manifest accepted; client would fetch {}",
                c.manifest.segments[0].uri
            ),
        ),
    });

    // Single-byte mutation with the original signature kept.
    let d = build_deployment(cfg)?;
    let signed = SignedManifest::decode(&d.package.signed_manifest_bytes).map_err(setup)?;
    let needle = d.package.manifest.segments[1].uri.as_bytes();
    let pos = signed
        .manifest_bytes
        .windows(needle.len())
        .position(|w| w == needle)
        .ok_or_else(|| HarnessError::Setup("segment uri not found in manifest bytes".into()))?;
    let mut mutated = signed.manifest_bytes.clone();
    // Flip inside the URI text so the message still decodes.
    mutated[pos + needle.len() - 5] ^= 0x02;
    let forged = SignedManifest {
        manifest_bytes: mutated,
        signature: signed.signature.clone(),
    }
    .encode();
    out.push(match d.client.open_content(&forged) {
        Err(_) => mk(
            d.suite,
            "manifest-field-flip",
            EvidenceOutcome::Blocked,
            "mutated manifest with original signature rejected",
        ),
        Ok(_) => mk(
            d.suite,
            "manifest-field-flip",
            EvidenceOutcome::Succeeded,
            "mutated manifest accepted with original signature",
        ),
    });
    Ok(out)
}

// SP17: the license server authenticates the requesting user and device.
fn sp17_user_authentication(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let mut out = Vec::new();

    let d = build_deployment(cfg)?;
    let spc = d.craft_spc(SpcShape {
        auth_token: Some("token-mallory".to_string()),
        ..SpcShape::default()
    });
    out.push(match d.service.handle_license(&spc) {
        Err(env) if env.code == ErrorCode::AuthFailed => mk(
            d.suite,
            "unknown-auth-token",
            EvidenceOutcome::Blocked,
            "request with an unknown auth token refused",
        ),
        Err(env) => mk(
            d.suite,
            "unknown-auth-token",
            EvidenceOutcome::Violated,
            format!("unexpected denial code {:?}", env.code),
        ),
        Ok(_) => mk(
            d.suite,
            "unknown-auth-token",
            EvidenceOutcome::Succeeded,
            "license issued to an unknown auth token",
        ),
    });

    let d = build_deployment(cfg)?;
    let forged = d.forged_device_cert(0x6367);
    let spc = d.craft_spc(SpcShape {
        client_certificate: Some(forged),
        ..SpcShape::default()
    });
    out.push(match d.service.handle_license(&spc) {
        Err(env) if env.code == ErrorCode::BadCert => mk(
            d.suite,
            "forged-device-cert",
            EvidenceOutcome::Blocked,
            "device certificate from an unknown root refused",
        ),
        Err(env) => mk(
            d.suite,
            "forged-device-cert",
            EvidenceOutcome::Violated,
            format!("unexpected denial code {:?}", env.code),
        ),
        Ok(_) => mk(
            d.suite,
            "forged-device-cert",
            EvidenceOutcome::Succeeded,
            "license issued against a forged device certificate",
        ),
    });

    let d = build_deployment(cfg)?;
    let spc = d.craft_spc(SpcShape {
        corrupt_signature: true,
        ..SpcShape::default()
    });
    out.push(match d.service.handle_license(&spc) {
        Err(env) if env.code == ErrorCode::BadSignature => mk(
            d.suite,
            "request-signature",
            EvidenceOutcome::Blocked,
            "request with a bad device signature refused",
        ),
        Err(env) => mk(
            d.suite,
            "request-signature",
            EvidenceOutcome::Violated,
            format!("unexpected denial code {:?}", env.code),
        ),
        Ok(_) => mk(
            d.suite,
            "request-signature",
            EvidenceOutcome::Succeeded,
            "license issued without a valid device signature",
        ),
    });
    Ok(out)
}

// SP18: the client authenticates the license server before talking to
// it.
fn sp18_server_authentication(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let mut out = Vec::new();

    let d = build_deployment(cfg)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5318);
    let attacker_root =
        Identity::generate(d.suite, KeyRole::Root, SecurityLevel::Software, &mut rng);
    let attacker_server =
        Identity::generate(d.suite, KeyRole::Server, SecurityLevel::Hardware, &mut rng);
    let attacker_cert = attacker_server
        .certify(d.suite, minidrm_core::cert::CertRole::Server, &attacker_root)
        .map_err(setup)?;
    *d.interceptor.cert_override.lock().unwrap() = Some(attacker_cert.encode());
    let refused = d.client.request_license(&d.content).is_err();
    let sent = d.interceptor.license_requests_seen();
    out.push(if refused && sent == 0 {
        mk(
            d.suite,
            "server-substitution",
            EvidenceOutcome::Blocked,
            "substituted server certificate refused before any license request was sent",
        )
    } else if refused {
        mk(
            d.suite,
            "server-substitution",
            EvidenceOutcome::Violated,
            format!("request refused but {sent} license requests left the client"),
        )
    } else {
        mk(
            d.suite,
            "server-substitution",
            EvidenceOutcome::Succeeded,
            "client accepted a server certified by an unknown root",
        )
    });

    let d = build_deployment(cfg)?;
    let mut bytes = d.service.certificate_bytes();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    *d.interceptor.cert_override.lock().unwrap() = Some(bytes);
    out.push(match d.client.fetch_server() {
        Err(_) => mk(
            d.suite,
            "server-cert-tamper",
            EvidenceOutcome::Blocked,
            "tampered server certificate refused",
        ),
        Ok(_) => mk(
            d.suite,
            "server-cert-tamper",
            EvidenceOutcome::Succeeded,
            "tampered server certificate accepted",
        ),
    });
    Ok(out)
}

// SP19: not claimed; the token bucket is demonstrated for completeness.
fn sp19_rate_limit(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let d = build_deployment_with(cfg, |o| o.rate_limit_per_sec = Some(2))?;
    let mut throttled = 0usize;
    let burst = 5usize;
    for _ in 0..burst {
        if let Err(env) = d.service.handle_license(&d.craft_spc(SpcShape::default())) {
            if env.code == ErrorCode::RateLimited {
                throttled += 1;
            }
        }
    }
    Ok(vec![if throttled > 0 {
        mk(
            d.suite,
            "burst-throttle",
            EvidenceOutcome::Held,
            format!("{throttled}/{burst} burst requests throttled by the per-device bucket"),
        )
    } else {
        mk(
            d.suite,
            "burst-throttle",
            EvidenceOutcome::Violated,
            "burst was not throttled",
        )
    }])
}

// SP20: not claimed; the emulated boundary is probed for obvious leaks.
fn sp20_tee_boundary(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let d = build_deployment(cfg)?;
    d.client.request_license(&d.content).map_err(setup)?;
    let debug = format!("{:?}", d.vault);
    let leaked = d.key_canaries.iter().any(|k| {
        contains(debug.as_bytes(), k) || contains(debug.as_bytes(), hex_of(k).as_bytes())
    });
    Ok(vec![if !leaked {
        mk(
            d.suite,
            "boundary-introspection",
            EvidenceOutcome::Held,
            "vault introspection surface redacts key material; isolation boundary is emulation only",
        )
    } else {
        mk(
            d.suite,
            "boundary-introspection",
            EvidenceOutcome::Violated,
            "key material visible through the vault debug surface",
        )
    }])
}

fn hex_of(bytes: &[u8]) -> String {
    minidrm_core::types::to_hex(bytes)
}

// SP21: the alternate suite drives the identical end-to-end path.
fn sp21_suite_swap(cfg: &HarnessConfig) -> Result<Vec<Evidence>, HarnessError> {
    let ids = minidrm_core::suite::suite_ids();
    let other = ids
        .iter()
        .find(|id| **id != cfg.suite_id)
        .ok_or_else(|| HarnessError::Setup("no alternate suite registered".into()))?;
    // Swap transparency is measured on a hardened deployment; fixtures
    // target the primary deployment only.
    let alt = HarnessConfig {
        suite_id: other.to_string(),
        seed: cfg.seed ^ 0x5321,
        fixture: None,
    };
    let d = build_deployment(&alt)?;
    let license = d.client.request_license(&d.content).map_err(setup)?;
    let mut session = d.client.start_playback(&d.content, &license).map_err(setup)?;
    let source = DirSegmentSource::new(&d.pkg_dir);
    let report = session.play_to_end(&source).map_err(setup)?;
    let chunks = plain_chunks(&d.plaintext, d.package.manifest.segment_size as usize);
    let ok = report.completed && report.sink_digest == expected_sink_digest(d.suite, &chunks);
    Ok(vec![if ok {
        mk(
            d.suite,
            "suite-swap",
            EvidenceOutcome::Held,
            format!(
                "end-to-end flow completed unchanged under alternate suite {}",
                d.suite.id()
            ),
        )
    } else {
        mk(
            d.suite,
            "suite-swap",
            EvidenceOutcome::Violated,
            format!("alternate suite {} failed the end-to-end flow", d.suite.id()),
        )
    }])
}
