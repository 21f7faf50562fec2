//! Acceptance gate: nine end-to-end criteria, one test each. Every test
//! prints a single `ACCEPTANCE <n> <name>: PASS|FAIL` line, so the whole
//! gate reads off a `--nocapture` run at a glance.

mod common;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, Once};
use std::time::{Duration, Instant};

use minidrm::client::transport::{HttpTransport, InProcessTransport, LicenseTransport};
use minidrm::client::{
    offline, ClientError, ClientFixtures, DirSegmentSource, DrmClient, MemorySegmentSource,
    SegmentSource, StepOutcome,
};
use minidrm::conformance::{
    build_deployment, run_suite, Fixture, HarnessConfig, SpcShape, ACCOUNT, AUTH_TOKEN,
    CLOCK_START, LEASE_DURATION, NOT_CLAIMED, RENTAL_CONTENT, RENTAL_DURATION,
};
use minidrm::packager::{self, PackageOptions, PackagerFixtures};
use minidrm::server::http::HttpServer;
use minidrm::server::{ContentPolicy, LicenseService, ServerOptions};
use minidrm::vault::{expected_sink_digest, TeeVault, VaultOptions};
use minidrm_core::cert::CertRole;
use minidrm_core::keys::{Identity, KeyRole};
use minidrm_core::error::ErrorCode;
use minidrm_core::messages::{segment_ad, PolicyMode, Verdict};
use minidrm_core::suite::{suite_by_id, suite_ids, AeadKey, AeadNonce, CryptoSuite};
use minidrm_core::time::{Clock, ManualClock};
use minidrm_core::types::{to_hex, KeyId, KeySeed, SecurityLevel};
use minidrm_core::wire::WireMessage;
use rand_chacha::ChaCha20Rng;
use rand_core::RngCore;

const CLASSIC: &str = "classic-x25519";

fn criterion(n: u32, name: &str, f: impl FnOnce()) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(()) => println!("ACCEPTANCE {n} {name}: PASS"),
        Err(cause) => {
            println!("ACCEPTANCE {n} {name}: FAIL");
            resume_unwind(cause);
        }
    }
}

fn classic_cfg(seed: u64) -> HarnessConfig {
    HarnessConfig {
        suite_id: CLASSIC.into(),
        seed,
        fixture: None,
    }
}

/// A bare service with no content installed; criteria that control their
/// own packaging start from here instead of the canned deployment.
struct Stack {
    suite: &'static dyn CryptoSuite,
    clock: Arc<ManualClock>,
    root: Identity,
    publisher: Identity,
    transport_key: AeadKey,
    service: Arc<LicenseService>,
}

fn stack(seed: u64) -> (Stack, ChaCha20Rng) {
    let suite = suite_by_id(CLASSIC).unwrap();
    let clock = ManualClock::new(CLOCK_START);
    let mut r = common::rng(seed);
    let root = Identity::generate(suite, KeyRole::Root, SecurityLevel::Software, &mut r);
    let publisher = Identity::generate(suite, KeyRole::Publisher, SecurityLevel::Software, &mut r);
    let server_id = Identity::generate(suite, KeyRole::Server, SecurityLevel::Hardware, &mut r);
    let server_cert = server_id.certify(suite, CertRole::Server, &root).unwrap();
    let mut tk = [0u8; 16];
    r.fill_bytes(&mut tk);
    let mut auth = HashMap::new();
    auth.insert(AUTH_TOKEN.to_string(), ACCOUNT.to_string());
    let service = Arc::new(
        LicenseService::new(
            suite,
            &server_id,
            server_cert,
            root.require_sig_pk().unwrap().clone(),
            clock.clone() as Arc<dyn Clock>,
            auth,
            ServerOptions::default(),
            seed ^ 0x5e71,
        )
        .unwrap(),
    );
    (
        Stack {
            suite,
            clock,
            root,
            publisher,
            transport_key: AeadKey(tk),
            service,
        },
        r,
    )
}

fn provision_client(
    st: &Stack,
    transport: Box<dyn LicenseTransport>,
    seed: u64,
) -> (Arc<TeeVault>, DrmClient) {
    let mut r = common::rng(seed);
    let identity = Identity::generate(st.suite, KeyRole::Client, SecurityLevel::Hardware, &mut r);
    let cert = identity.certify(st.suite, CertRole::Client, &st.root).unwrap();
    let vault = Arc::new(
        TeeVault::new(st.suite, &identity, VaultOptions::default(), seed ^ 0x7a).unwrap(),
    );
    let client = DrmClient::new(
        st.suite,
        st.clock.clone() as Arc<dyn Clock>,
        st.publisher.require_sig_pk().unwrap().clone(),
        st.root.require_sig_pk().unwrap().clone(),
        transport,
        Arc::clone(&vault),
        cert,
        AUTH_TOKEN.to_string(),
        ClientFixtures::default(),
        seed ^ 0xfe,
    )
    .unwrap();
    (vault, client)
}

fn rental_policy() -> ContentPolicy {
    ContentPolicy {
        mode: PolicyMode::Rental,
        rental_duration: RENTAL_DURATION,
        lease_duration: 0,
        max_concurrent: 0,
        min_level: SecurityLevel::Software,
    }
}

// ---------------------------------------------------------------------------
// 1. Randomized sizes, full pipeline, wall-clock budget.

#[test]
fn criterion_1_round_trips_across_sizes() {
    criterion(1, "randomized end-to-end round trips inside the time budget", || {
        let started = Instant::now();
        let (st, mut r) = stack(0xAC01);

        // The extremes are forced; the rest are log-uniform between them.
        let mut sizes: Vec<usize> = vec![1024, 10 * 1024 * 1024];
        let (lo, hi) = ((1024f64).ln(), (10f64 * 1024.0 * 1024.0).ln());
        while sizes.len() < 20 {
            let u = r.next_u64() as f64 / u64::MAX as f64;
            sizes.push((lo + u * (hi - lo)).exp() as usize);
        }

        let dir = tempfile::tempdir().unwrap();
        let opts = PackageOptions::default();
        let mut titles = Vec::new();
        for (i, &len) in sizes.iter().enumerate() {
            let mut content = vec![0u8; len];
            r.fill_bytes(&mut content);
            let cid = format!("title-{i:02}");
            let seed = KeySeed::generate(&mut r);
            let pkg = packager::package(
                st.suite,
                &seed,
                &cid,
                &content,
                &opts,
                &st.publisher,
                &PackagerFixtures::default(),
            )
            .unwrap();
            let out = dir.path().join(&cid);
            packager::write_package(st.suite, &pkg, &st.transport_key, &mut r, &out, false)
                .unwrap();
            let registry = packager::load_registry_file(
                st.suite,
                &packager::registry_path(&out),
                &st.transport_key,
                false,
            )
            .unwrap();
            st.service.install_content(registry, rental_policy()).unwrap();
            titles.push((content, out));
        }

        let server = HttpServer::start(Arc::clone(&st.service), "127.0.0.1:0", 4).unwrap();
        let (_vault, client) = provision_client(
            &st,
            Box::new(HttpTransport::new(&server.base_url())),
            0xAC01_0002,
        );

        for (content, out) in &titles {
            let manifest_bytes = fs::read(packager::manifest_path(out)).unwrap();
            let opened = client.open_content(&manifest_bytes).unwrap();
            let license = client.request_license(&opened).unwrap();
            let report = client
                .start_playback(&opened, &license)
                .unwrap()
                .play_to_end(&DirSegmentSource::new(out))
                .unwrap();
            assert!(report.completed);
            assert_eq!(report.delivered_bytes, content.len() as u64);
            let chunks: Vec<&[u8]> = content.chunks(opts.segment_size as usize).collect();
            assert_eq!(
                report.sink_digest,
                expected_sink_digest(st.suite, &chunks),
                "sink digest mismatch for {}",
                out.display()
            );
        }
        server.stop();
        let elapsed = started.elapsed();
        assert!(elapsed < Duration::from_secs(60), "round trips took {elapsed:?}");
    });
}

// ---------------------------------------------------------------------------
// 2. Manifest mutation sweep: rejection strictly precedes segment fetch.

struct CountingSource {
    inner: MemorySegmentSource,
    hits: AtomicUsize,
}

impl SegmentSource for CountingSource {
    fn fetch(&self, uri: &str) -> Result<Vec<u8>, ClientError> {
        self.hits.fetch_add(1, Ordering::Relaxed);
        self.inner.fetch(uri)
    }
}

#[test]
fn criterion_2_manifest_mutations_never_reach_segments() {
    criterion(2, "every single-byte manifest mutation rejected before any fetch", || {
        let started = Instant::now();
        let (st, mut r) = stack(0xAC02);
        let mut content = vec![0u8; 512 * 1024];
        r.fill_bytes(&mut content);
        let seed = KeySeed::generate(&mut r);
        let opts = PackageOptions {
            segment_size: 16 * 1024,
            rotation_period: 4,
        };
        let pkg = packager::package(
            st.suite,
            &seed,
            "mutation-target",
            &content,
            &opts,
            &st.publisher,
            &PackagerFixtures::default(),
        )
        .unwrap();
        st.service.install_content(pkg.registry.clone(), rental_policy()).unwrap();

        let (_vault, client) = provision_client(
            &st,
            Box::new(InProcessTransport::new(Arc::clone(&st.service))),
            0xAC02_0002,
        );
        let source = CountingSource {
            inner: MemorySegmentSource::from_package(&pkg),
            hits: AtomicUsize::new(0),
        };

        let baseline = pkg.signed_manifest_bytes.clone();
        assert!(
            baseline.len() >= 2048,
            "manifest too small to be representative: {}",
            baseline.len()
        );

        let mut rejected = 0usize;
        // Three fixed deltas plus two random ones at every byte position.
        for pos in 0..baseline.len() {
            let mut deltas = vec![0x01u8, 0x80, 0xff];
            while deltas.len() < 5 {
                let d = (r.next_u32() & 0xff) as u8;
                if d != 0 && !deltas.contains(&d) {
                    deltas.push(d);
                }
            }
            for d in deltas {
                let mut m = baseline.clone();
                m[pos] ^= d;
                assert!(client.open_content(&m).is_err(), "mutation {pos}^{d:#04x} accepted");
                rejected += 1;
            }
        }
        // Exhaustive deltas across the envelope and leading framing bytes.
        for pos in 0..64.min(baseline.len()) {
            for d in 1..=255u8 {
                let mut m = baseline.clone();
                m[pos] ^= d;
                assert!(
                    client.open_content(&m).is_err(),
                    "header mutation {pos}^{d:#04x} accepted"
                );
                rejected += 1;
            }
        }
        // Every proper prefix, then a handful of extensions.
        for cut in 0..baseline.len() {
            assert!(
                client.open_content(&baseline[..cut]).is_err(),
                "truncation at {cut} accepted"
            );
            rejected += 1;
        }
        for extra in 1..=8usize {
            let mut m = baseline.clone();
            for _ in 0..extra {
                m.push((r.next_u32() & 0xff) as u8);
            }
            assert!(client.open_content(&m).is_err(), "extension by {extra} accepted");
            rejected += 1;
        }
        assert_eq!(
            source.hits.load(Ordering::Relaxed),
            0,
            "a rejected manifest led to a segment fetch"
        );
        assert!(rejected > 30_000, "sweep too small: {rejected}");

        // Control: the untouched manifest opens and drives real fetches.
        let opened = client.open_content(&baseline).unwrap();
        let license = client.request_license(&opened).unwrap();
        let report = client
            .start_playback(&opened, &license)
            .unwrap()
            .play_to_end(&source)
            .unwrap();
        assert!(report.completed);
        assert_eq!(source.hits.load(Ordering::Relaxed) as u64, report.delivered_segments);
        let elapsed = started.elapsed();
        assert!(elapsed < Duration::from_secs(30), "mutation sweep took {elapsed:?}");
    });
}

// ---------------------------------------------------------------------------
// 3. Replay storm: duplicates always denied, fresh requests never.

#[test]
fn criterion_3_replay_storm() {
    criterion(3, "10k-request storm: every duplicate denied, no false rejections", || {
        let dep = build_deployment(&classic_cfg(0xAC03)).unwrap();
        let mut r = common::rng(0xAC03_0001);
        let mut sent: Vec<Vec<u8>> = Vec::new();
        let (mut dups, mut fresh) = (0usize, 0usize);
        for _ in 0..10_000 {
            let duplicate = !sent.is_empty() && r.next_u32() % 10 == 0;
            if duplicate {
                let raw = &sent[r.next_u32() as usize % sent.len()];
                let env = dep
                    .service
                    .handle_license(raw)
                    .expect_err("resent request was admitted");
                assert_eq!(env.code, ErrorCode::Replay);
                dups += 1;
            } else {
                let raw = dep.craft_spc(SpcShape::default());
                dep.service
                    .handle_license(&raw)
                    .expect("fresh request was rejected");
                sent.push(raw);
                fresh += 1;
            }
        }
        assert_eq!(dups + fresh, 10_000);
        assert!((800..=1200).contains(&dups), "duplicate mix drifted: {dups}");
    });
}

// ---------------------------------------------------------------------------
// 4. Expiry against a brute-force schedule; lease pool against a model.

#[test]
fn criterion_4_expiry_and_lease_match_reference_models() {
    criterion(4, "time-stepped expiry and lease pools match independent models", || {
        let dep = build_deployment(&classic_cfg(0xAC04)).unwrap();
        let t0 = CLOCK_START;
        let license = dep.client.request_license(&dep.content).unwrap();
        let source = DirSegmentSource::new(&dep.pkg_dir);

        // Admission at every tick must equal the schedule oracle t < expiry.
        let mut ticks: Vec<u64> = (0..=7200).step_by(60).collect();
        ticks.extend_from_slice(&[RENTAL_DURATION - 1, RENTAL_DURATION, RENTAL_DURATION + 1]);
        ticks.sort_unstable();
        ticks.dedup();
        for &t in &ticks {
            dep.clock.set(t0 + t);
            let admitted_by_model = t < RENTAL_DURATION;
            let mut session = dep.client.start_playback(&dep.content, &license).unwrap();
            match session.step(&source) {
                Ok(StepOutcome::Delivered { index: 0, .. }) => {
                    assert!(admitted_by_model, "tick {t}: delivered after expiry")
                }
                Err(ClientError::Expired) => {
                    assert!(!admitted_by_model, "tick {t}: refused before expiry")
                }
                other => panic!("tick {t}: unexpected outcome {other:?}"),
            }
        }

        // A session admitted just before the boundary finishes its run even
        // though the expiry passes mid-play.
        dep.clock.set(t0 + RENTAL_DURATION - 2);
        let mut session = dep.client.start_playback(&dep.content, &license).unwrap();
        let mut delivered = 0u64;
        loop {
            match session.step(&source).unwrap() {
                StepOutcome::Delivered { .. } => {
                    delivered += 1;
                    dep.clock.advance(1);
                }
                StepOutcome::Finished => break,
                StepOutcome::LeaseExpired => panic!("rental session reported a lease halt"),
            }
        }
        assert_eq!(delivered, dep.package.manifest.segments.len() as u64);
        let report = session.report(true);
        assert!(report.expired_during_play);
        let chunks: Vec<&[u8]> = dep.plaintext.chunks(4096).collect();
        assert_eq!(report.sink_digest, expected_sink_digest(dep.suite, &chunks));

        // Lease pools: exhaustive schedule enumeration for three devices at
        // capacity two, checked transition-by-transition against the
        // reference model, plus a long randomized walk.
        let exhaustive = common::exhaustive_lease_equivalence(3, 2, 3, 10);
        assert!(exhaustive >= 500, "exhaustive enumeration too small: {exhaustive}");
        let randomized = common::randomized_lease_equivalence(0xAC04_0002, 10_000, 2, LEASE_DURATION);
        assert_eq!(randomized, 10_000);
    });
}

// ---------------------------------------------------------------------------
// 5. Rotation isolation: the cross-period decryption grid.

#[test]
fn criterion_5_rotation_grid() {
    criterion(5, "cross-period decryption succeeds only on the matching key", || {
        let (st, mut r) = stack(0xAC05);
        let mut content = vec![0u8; 12 * 4096];
        r.fill_bytes(&mut content);
        let seed = KeySeed::generate(&mut r);
        let opts = PackageOptions {
            segment_size: 4096,
            rotation_period: 4,
        };
        let pkg = packager::package(
            st.suite,
            &seed,
            "grid",
            &content,
            &opts,
            &st.publisher,
            &PackagerFixtures::default(),
        )
        .unwrap();
        assert_eq!(pkg.manifest.segments.len(), 12);

        let keys: Vec<(u32, AeadKey)> = pkg
            .registry
            .entries
            .iter()
            .map(|e| (e.period, AeadKey(*e.key_bytes())))
            .collect();
        assert_eq!(keys.len(), 3);

        // One segment per period plus a second from the last period.
        let picks = [0usize, 5, 10, 11];
        let (mut opened, mut refused) = (0, 0);
        for &si in &picks {
            let rec = &pkg.manifest.segments[si];
            let sealed = &pkg.segments[si];
            let ad = segment_ad(&pkg.manifest.content_id, rec.index, rec.key_id);
            let nonce = AeadNonce::for_segment(rec.period, rec.index);
            for (period, key) in &keys {
                match st.suite.open(key, &nonce, &ad, sealed) {
                    Ok(plain) => {
                        assert_eq!(*period, rec.period, "segment {si} opened under period {period}");
                        assert_eq!(plain, content[si * 4096..(si + 1) * 4096]);
                        opened += 1;
                    }
                    Err(_) => {
                        assert_ne!(*period, rec.period, "segment {si} refused its own key");
                        refused += 1;
                    }
                }
            }
        }
        assert_eq!((opened, refused), (4, 8));
    });
}

// ---------------------------------------------------------------------------
// 6. Canary leak scan and total disposal.

static LOG_INIT: Once = Once::new();
static LOG_LINES: Mutex<Vec<String>> = Mutex::new(Vec::new());

struct CaptureLogger;

impl log::Log for CaptureLogger {
    fn enabled(&self, _: &log::Metadata<'_>) -> bool {
        true
    }
    fn log(&self, record: &log::Record<'_>) {
        LOG_LINES
            .lock()
            .unwrap()
            .push(format!("{} {}", record.target(), record.args()));
    }
    fn flush(&self) {}
}

fn walk(dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            walk(&path, out);
        } else {
            out.push((path.clone(), fs::read(&path).unwrap()));
        }
    }
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && needle.len() <= hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}

#[test]
fn criterion_6_no_key_or_plaintext_residue() {
    criterion(6, "no canary in API results, files, or logs; disposal is total", || {
        LOG_INIT.call_once(|| {
            let _ = log::set_boxed_logger(Box::new(CaptureLogger));
            log::set_max_level(log::LevelFilter::Trace);
        });

        let dep = build_deployment(&classic_cfg(0xAC06)).unwrap();
        let t0 = CLOCK_START;
        let mut r = common::rng(0xAC06_0001);

        // A persistent title puts the offline store inside the scan scope.
        let mut off_content = vec![0u8; 32 * 1024];
        r.fill_bytes(&mut off_content);
        let off_marker = b"OFFLINE-CANARY-7f3a91c2";
        off_content[1000..1000 + off_marker.len()].copy_from_slice(off_marker);
        off_content[20_000..20_000 + off_marker.len()].copy_from_slice(off_marker);
        let off_seed = KeySeed::generate(&mut r);
        let off_pkg = packager::package(
            dep.suite,
            &off_seed,
            "gamma-offline",
            &off_content,
            &PackageOptions {
                segment_size: 8192,
                rotation_period: 2,
            },
            &dep.publisher,
            &PackagerFixtures::default(),
        )
        .unwrap();
        let off_dir = dep.dir.path().join("pkg-offline");
        packager::write_package(dep.suite, &off_pkg, &dep.transport_key, &mut r, &off_dir, false)
            .unwrap();
        let off_registry = packager::load_registry_file(
            dep.suite,
            &packager::registry_path(&off_dir),
            &dep.transport_key,
            false,
        )
        .unwrap();
        dep.service
            .install_content(
                off_registry,
                ContentPolicy {
                    mode: PolicyMode::Persistent,
                    rental_duration: 7200,
                    lease_duration: 0,
                    max_concurrent: 0,
                    min_level: SecurityLevel::Software,
                },
            )
            .unwrap();

        let hds_dir = dep.dir.path().join("hds");
        let off_manifest = fs::read(packager::manifest_path(&off_dir)).unwrap();
        let off_open = dep.client.open_content(&off_manifest).unwrap();
        let off_license = dep.client.request_license(&off_open).unwrap();
        offline::store(&dep.client, &off_open, &off_license, &hds_dir).unwrap();
        let (res_content, res_license) =
            offline::resume(&dep.client, "gamma-offline", &hds_dir).unwrap();
        let off_report = dep
            .client
            .start_playback(&res_content, &res_license)
            .unwrap()
            .play_to_end(&DirSegmentSource::new(&off_dir))
            .unwrap();
        assert!(off_report.completed);

        // A rental playback, then a licensing exchange over real HTTP so the
        // structured log sees production traffic.
        let license = dep.client.request_license(&dep.content).unwrap();
        let report = dep
            .client
            .start_playback(&dep.content, &license)
            .unwrap()
            .play_to_end(&DirSegmentSource::new(&dep.pkg_dir))
            .unwrap();
        assert!(report.completed);

        let server = HttpServer::start(Arc::clone(&dep.service), "127.0.0.1:0", 2).unwrap();
        {
            let mut hr = common::rng(0xAC06_0002);
            let identity =
                Identity::generate(dep.suite, KeyRole::Client, SecurityLevel::Hardware, &mut hr);
            let cert = identity.certify(dep.suite, CertRole::Client, &dep.root).unwrap();
            let vault = Arc::new(
                TeeVault::new(dep.suite, &identity, VaultOptions::default(), 0xAC06_0003).unwrap(),
            );
            let http = DrmClient::new(
                dep.suite,
                dep.clock.clone() as Arc<dyn Clock>,
                dep.publisher.require_sig_pk().unwrap().clone(),
                dep.root.require_sig_pk().unwrap().clone(),
                Box::new(HttpTransport::new(&server.base_url())),
                vault,
                cert,
                AUTH_TOKEN.to_string(),
                ClientFixtures::default(),
                0xAC06_0004,
            )
            .unwrap();
            let opened = http.open_content(&dep.package.signed_manifest_bytes).unwrap();
            http.request_license(&opened).unwrap();
        }
        server.stop();
        assert!(!LOG_LINES.lock().unwrap().is_empty(), "log capture saw no traffic");

        // Randomized pounding of the public surface. Everything any call
        // returns lands in the residue buffer and gets scanned.
        let mut residue = String::new();
        let vault = dep.client.vault();
        let mut sinks = Vec::new();
        let manifest_bytes = dep.package.signed_manifest_bytes.clone();
        for _ in 0..10_000u32 {
            match r.next_u32() % 13 {
                0 => {
                    let mut junk = vec![0u8; (r.next_u32() % 256) as usize];
                    r.fill_bytes(&mut junk);
                    let _ = write!(residue, "{:?}", dep.client.open_content(&junk).err());
                }
                1 => {
                    let cut = (r.next_u32() as usize) % manifest_bytes.len();
                    let _ = write!(residue, "{:?}", dep.client.open_content(&manifest_bytes[..cut]).err());
                }
                2 => {
                    let server_view = dep.client.fetch_server().unwrap();
                    let _ = write!(residue, "{:?}", server_view.sig_pk());
                }
                3 => match dep.service.handle_license(&dep.craft_spc(SpcShape::default())) {
                    Ok(ckc) => {
                        let _ = write!(residue, "{}", to_hex(&ckc));
                    }
                    Err(env) => {
                        let _ = write!(residue, "{env:?}");
                    }
                },
                4 => {
                    let raw = dep.craft_spc(SpcShape {
                        corrupt_signature: true,
                        ..Default::default()
                    });
                    let _ = write!(residue, "{:?}", dep.service.handle_license(&raw).err());
                }
                5 => {
                    let mut challenge = [0u8; 16];
                    r.fill_bytes(&mut challenge);
                    let _ = write!(residue, "{:?}", vault.attest(&challenge));
                }
                6 => {
                    let mut msg = [0u8; 32];
                    r.fill_bytes(&mut msg);
                    let _ = write!(residue, "{:?}", vault.sign_payload(&msg));
                }
                7 => {
                    let _ = write!(residue, "{:?}", vault.installed_key_ids());
                }
                8 => {
                    if sinks.len() < 32 {
                        sinks.push(vault.create_sink());
                    }
                    let sink = sinks[r.next_u32() as usize % sinks.len()];
                    let _ = write!(residue, "{:?}", vault.sink_state(sink));
                }
                9 => {
                    let (handle, encap) = vault.begin_license_session(dep.server_kem_pk()).unwrap();
                    vault.forget_session(handle);
                    let mut junk = vec![0u8; 40];
                    r.fill_bytes(&mut junk);
                    let mut seed16 = [0u8; 16];
                    r.fill_bytes(&mut seed16);
                    let _ = write!(
                        residue,
                        "{:?}{:?}",
                        encap.0.first(),
                        vault.install_license(handle, &seed16, &junk).err()
                    );
                }
                10 => {
                    let mut kid = [0u8; 16];
                    r.fill_bytes(&mut kid);
                    let _ = write!(residue, "{:?}", vault.extend_expiry(&[KeyId(kid)], r.next_u64()).err());
                }
                11 => {
                    let _ = write!(
                        residue,
                        "{}{:?}{:?}",
                        vault.dispose_expired(0),
                        &*dep.vault,
                        dep.package.registry
                    );
                }
                _ => {
                    let lease = dep.client.request_license(&dep.lease_content).unwrap();
                    let _ = write!(residue, "{:?}{:?}", lease.policy, lease.key_ids);
                }
            }
        }

        // Server key database persisted under the deployment directory.
        dep.service.persist_keydb(&dep.state_dir).unwrap();
        let _ = write!(residue, "{:?}", dep.service.metering_report(ACCOUNT));

        // Needles: every content key raw and in both hex cases, the
        // packaging seed, and the plaintext markers.
        let mut needles: Vec<(String, Vec<u8>)> = Vec::new();
        let off_keys: Vec<[u8; 16]> =
            off_pkg.registry.entries.iter().map(|e| *e.key_bytes()).collect();
        for key in dep.key_canaries.iter().chain(off_keys.iter()) {
            needles.push((format!("key {}", to_hex(key)), key.to_vec()));
            needles.push((format!("hex of key {}", to_hex(key)), to_hex(key).into_bytes()));
            needles.push((
                format!("HEX of key {}", to_hex(key)),
                to_hex(key).to_uppercase().into_bytes(),
            ));
        }
        needles.push(("packaging seed".into(), off_seed.as_bytes().to_vec()));
        needles.push((
            "packaging seed hex".into(),
            to_hex(off_seed.as_bytes()).into_bytes(),
        ));
        for marker in &dep.text_canaries {
            needles.push((
                format!("marker {}", String::from_utf8_lossy(marker)),
                marker.clone(),
            ));
        }
        needles.push(("offline marker".into(), off_marker.to_vec()));

        // The scanner has to be able to find planted needles at all.
        assert!(contains(&dep.plaintext, &dep.text_canaries[0]));
        assert!(contains(&dep.package.registry.encode(), &dep.key_canaries[0]));
        assert!(contains(&off_content, off_marker));

        let mut files = Vec::new();
        walk(dep.dir.path(), &mut files);
        assert!(files.len() >= 10, "scan scope looks wrong: {} files", files.len());
        for (path, bytes) in &files {
            for (name, needle) in &needles {
                assert!(!contains(bytes, needle), "{name} leaked into {}", path.display());
            }
        }
        for (name, needle) in &needles {
            assert!(!contains(residue.as_bytes(), needle), "{name} leaked into API results");
        }
        let joined = LOG_LINES.lock().unwrap().join("\n");
        for (name, needle) in &needles {
            assert!(
                !contains(joined.as_bytes(), needle),
                "{name} leaked into the log stream"
            );
        }

        // Disposal: past every expiry, the vault forgets everything and no
        // sealed segment decrypts any more.
        dep.clock.set(t0 + 20_000);
        let disposed = vault.dispose_expired(dep.clock.now());
        assert!(disposed > 0);
        let mut still_decryptable = 0;
        for (rec, sealed) in dep.package.manifest.segments.iter().zip(&dep.package.segments) {
            let sink = vault.create_sink();
            if vault
                .decrypt_segment_to_sink(RENTAL_CONTENT, rec, sealed, sink, dep.clock.now())
                .is_ok()
            {
                still_decryptable += 1;
            }
        }
        for (rec, sealed) in off_pkg.manifest.segments.iter().zip(&off_pkg.segments) {
            let sink = vault.create_sink();
            if vault
                .decrypt_segment_to_sink("gamma-offline", rec, sealed, sink, dep.clock.now())
                .is_ok()
            {
                still_decryptable += 1;
            }
        }
        assert_eq!(still_decryptable, 0, "segments decryptable after disposal");
    });
}

// ---------------------------------------------------------------------------
// 7. Rollback and weak-device denials carry distinct codes.

#[test]
fn criterion_7_rollback_and_level_denials_are_distinct() {
    criterion(7, "version rollback and weak-device denials use distinct codes", || {
        let dep = build_deployment(&classic_cfg(0xAC07)).unwrap();
        let mut r = common::rng(0xAC07_0001);
        let (weak_vault, _weak_client) = dep.extra_client(SecurityLevel::Dev, 0x71).unwrap();
        let weak_cert = common::extra_client_cert_bytes(&dep, SecurityLevel::Dev, 0x71);
        let kids = dep.content.manifest.init_data.key_ids.clone();

        for _ in 0..500 {
            let versions = if r.next_u32() & 1 == 0 { vec![1] } else { vec![0, 1] };
            let jitter = (r.next_u32() % 60) as u64;
            let raw = dep.craft_spc(SpcShape {
                versions: Some(versions),
                client_time: Some(dep.clock.now() - jitter),
                ..Default::default()
            });
            let env = dep.service.handle_license(&raw).expect_err("rollback admitted");
            assert_eq!(env.code, ErrorCode::VersionRollback);
        }

        for _ in 0..500 {
            let mut seed16 = [0u8; 16];
            r.fill_bytes(&mut seed16);
            // The level gate sits before key-id resolution, so bogus ids in
            // half the requests must not change the code.
            let key_ids = if r.next_u32() & 1 == 0 {
                kids.clone()
            } else {
                let mut kid = [0u8; 16];
                r.fill_bytes(&mut kid);
                vec![KeyId(kid)]
            };
            let raw = common::signed_spc(
                &dep,
                &weak_vault,
                weak_cert.clone(),
                RENTAL_CONTENT,
                key_ids,
                seed16,
                None,
            );
            let env = dep.service.handle_license(&raw).expect_err("weak device admitted");
            assert_eq!(env.code, ErrorCode::LevelTooLow);
        }

        assert_ne!(ErrorCode::VersionRollback, ErrorCode::LevelTooLow);
    });
}

// ---------------------------------------------------------------------------
// 8. Suite parity: identical verdicts under both crypto suites.

#[test]
fn criterion_8_suite_parity() {
    criterion(8, "conformance verdicts identical under both crypto suites", || {
        let ids = suite_ids();
        assert_eq!(ids.len(), 2);
        let reports: Vec<_> = ids
            .iter()
            .map(|id| {
                run_suite(&HarnessConfig {
                    suite_id: id.to_string(),
                    seed: 0xAC08,
                    fixture: None,
                })
                .unwrap()
            })
            .collect();
        let (a, b) = (&reports[0], &reports[1]);
        assert_eq!(a.verdicts.len(), 21);
        assert_eq!(b.verdicts.len(), 21);
        for (va, vb) in a.verdicts.iter().zip(&b.verdicts) {
            assert_eq!(va.sp, vb.sp);
            assert_eq!(va.verdict, vb.verdict, "sp{} differs across suites", va.sp);
        }
        for v in &a.verdicts {
            if NOT_CLAIMED.contains(&v.sp) {
                assert_eq!(v.verdict, Verdict::NotClaimed, "sp{} must be out of scope", v.sp);
            } else {
                assert_eq!(v.verdict, Verdict::Pass, "sp{} must hold", v.sp);
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 9. Each sabotage fixture flips exactly its targeted property.

#[test]
fn criterion_9_fixture_flips() {
    criterion(9, "each sabotage fixture flips exactly its targeted property", || {
        let base = run_suite(&classic_cfg(0xAC09)).unwrap();
        let unclaimed: Vec<u16> = base
            .verdicts
            .iter()
            .filter(|v| v.verdict == Verdict::NotClaimed)
            .map(|v| v.sp)
            .collect();
        assert_eq!(unclaimed, NOT_CLAIMED.to_vec());
        for v in &base.verdicts {
            if !NOT_CLAIMED.contains(&v.sp) {
                assert_eq!(v.verdict, Verdict::Pass, "baseline sp{} must hold", v.sp);
            }
        }

        for fixture in Fixture::ALL {
            let rep = run_suite(&HarnessConfig {
                suite_id: CLASSIC.into(),
                seed: 0xAC09,
                fixture: Some(fixture),
            })
            .unwrap();
            for (vb, vf) in base.verdicts.iter().zip(&rep.verdicts) {
                assert_eq!(vb.sp, vf.sp);
                if vf.sp == fixture.target_sp() {
                    assert_eq!(
                        vf.verdict,
                        Verdict::Fail,
                        "{} must flip sp{}",
                        fixture.name(),
                        vf.sp
                    );
                } else {
                    assert_eq!(
                        vf.verdict,
                        vb.verdict,
                        "{} must not disturb sp{}",
                        fixture.name(),
                        vf.sp
                    );
                }
            }
        }
    });
}
