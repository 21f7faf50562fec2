//! Shared helpers for the integration suites: a deterministic rng and a
//! second, independently structured lease model that the server's lease
//! state machine is checked against, both exhaustively (bounded
//! enumeration of every reachable state and operation) and on long random
//! operation sequences.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use minidrm::conformance::{Deployment, AUTH_TOKEN};
use minidrm::server::lease::{LeaseError, LeaseState};
use minidrm::vault::TeeVault;
use minidrm_core::cert::CertRole;
use minidrm_core::derive::secure_content_id;
use minidrm_core::keys::{Identity, KeyRole};
use minidrm_core::messages::{Spc, SpcBody};
use minidrm_core::suite::KemCiphertext;
use minidrm_core::time::Clock;
use minidrm_core::types::{DeviceId, KeyId, SecurityLevel};
use minidrm_core::wire::WireMessage;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// A correctly signed license request from an arbitrary vault/certificate
/// pair against a deployment's server, with an optional encapsulation
/// override applied before signing.
pub fn signed_spc(
    dep: &Deployment,
    vault: &Arc<TeeVault>,
    cert_bytes: Vec<u8>,
    content_id: &str,
    key_ids: Vec<KeyId>,
    seed16: [u8; 16],
    encap_override: Option<KemCiphertext>,
) -> Vec<u8> {
    let (handle, encap) = vault.begin_license_session(dep.server_kem_pk()).unwrap();
    vault.forget_session(handle);
    let body = SpcBody {
        suite_id: dep.suite.id().to_string(),
        protocol_versions: minidrm_core::SUPPORTED_PROTOCOL_VERSIONS.to_vec(),
        client_time: dep.clock.now(),
        anti_replay_seed: seed16,
        secure_content_id: secure_content_id(dep.suite, content_id),
        key_ids,
        session_key_encap: encap_override.unwrap_or(encap),
        auth_token: AUTH_TOKEN.to_string(),
        client_certificate: cert_bytes,
    };
    let body_bytes = body.encode();
    let signature = vault.sign_payload(&body_bytes).unwrap();
    Spc {
        body_bytes,
        signature,
    }
    .encode()
}

/// Certificate bytes matching what `Deployment::extra_client` builds for
/// the same salt: the raw request path needs the bytes themselves.
pub fn extra_client_cert_bytes(dep: &Deployment, level: SecurityLevel, salt: u64) -> Vec<u8> {
    let mut r = rng(dep.seed ^ salt);
    let id = Identity::generate(dep.suite, KeyRole::Client, level, &mut r);
    id.certify(dep.suite, CertRole::Client, &dep.root).unwrap().encode()
}

pub const MODEL_ACCOUNT: &str = "acct";
pub const MODEL_SCID: [u8; 32] = [7u8; 32];

fn device(d: u8) -> DeviceId {
    DeviceId([d; 32])
}

// ---------------------------------------------------------------------------
// Reference lease model
//
// Written against the documented contract, not the server code: a pool of
// at most `capacity` slots per (account, content); slots die strictly at
// expiry; allocation is idempotent per device and returns the live grant
// unchanged; renewal requires the device/token pair of a live slot and
// never shortens; release frees the slot immediately. Flat vector, single
// pool, u8 device tags: deliberately a different shape from the
// production table so a shared bug would have to be a shared reading of
// the contract.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefLease {
    pub capacity: u32,
    pub duration: u64,
    slots: Vec<(u8, [u8; 16], u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefOutcome {
    Granted { token: [u8; 16], expiry: u64 },
    Exhausted,
    NotHeld,
}

impl RefLease {
    pub fn new(capacity: u32, duration: u64) -> RefLease {
        RefLease {
            capacity,
            duration,
            slots: Vec::new(),
        }
    }

    fn drop_dead(&mut self, now: u64) {
        self.slots.retain(|&(_, _, expiry)| expiry > now);
    }

    pub fn allocate(&mut self, dev: u8, now: u64, fresh: [u8; 16]) -> RefOutcome {
        self.drop_dead(now);
        if let Some(&(_, token, expiry)) = self.slots.iter().find(|&&(d, _, _)| d == dev) {
            return RefOutcome::Granted { token, expiry };
        }
        if self.slots.len() as u32 >= self.capacity {
            return RefOutcome::Exhausted;
        }
        let expiry = now + self.duration;
        self.slots.push((dev, fresh, expiry));
        RefOutcome::Granted {
            token: fresh,
            expiry,
        }
    }

    pub fn renew(&mut self, dev: u8, token: [u8; 16], now: u64) -> RefOutcome {
        self.drop_dead(now);
        let base = now + self.duration;
        match self
            .slots
            .iter_mut()
            .find(|&&mut (d, t, _)| d == dev && t == token)
        {
            Some(slot) => {
                slot.2 = slot.2.max(base);
                RefOutcome::Granted {
                    token: slot.1,
                    expiry: slot.2,
                }
            }
            None => RefOutcome::NotHeld,
        }
    }

    pub fn release(&mut self, dev: u8, token: [u8; 16], now: u64) -> bool {
        self.drop_dead(now);
        let before = self.slots.len();
        self.slots.retain(|&(d, t, _)| !(d == dev && t == token));
        self.slots.len() < before
    }

    pub fn held(&self, now: u64) -> usize {
        self.slots.iter().filter(|&&(_, _, e)| e > now).count()
    }

    /// Live (device, expiry) pairs, sorted by device tag.
    pub fn holdings(&self, now: u64) -> Vec<(u8, u64)> {
        let mut v: Vec<(u8, u64)> = self
            .slots
            .iter()
            .filter(|&&(_, _, e)| e > now)
            .map(|&(d, _, e)| (d, e))
            .collect();
        v.sort_unstable();
        v
    }
}

// ---------------------------------------------------------------------------
// Lockstep drivers

/// Per-device view used for canonical dedup: no token seen yet, a
/// recorded token whose slot is gone, or a live slot expiring in
/// `rel` ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum DevState {
    NoToken,
    StaleToken,
    Live(u64),
}

#[derive(Clone)]
struct Node {
    imp: LeaseState,
    model: RefLease,
    now: u64,
    /// Last token each device was granted; renew/release replay it.
    tokens: HashMap<u8, [u8; 16]>,
}

fn canonical(node: &Node, devices: u8) -> Vec<DevState> {
    let holdings = node.model.holdings(node.now);
    (0..devices)
        .map(|d| {
            if let Some(&(_, e)) = holdings.iter().find(|&&(hd, _)| hd == d) {
                DevState::Live(e - node.now)
            } else if node.tokens.contains_key(&d) {
                DevState::StaleToken
            } else {
                DevState::NoToken
            }
        })
        .collect()
}

/// Apply one operation to implementation and model together and demand
/// identical observable outcomes, then probe every device's holding
/// through the allocate-idempotence observation.
fn apply_checked(node: &mut Node, op: LeaseOp, capacity: u32, duration: u64, fresh: [u8; 16]) {
    match op {
        LeaseOp::Allocate(d) => {
            let got = node.imp.allocate(
                MODEL_ACCOUNT,
                MODEL_SCID,
                device(d),
                capacity,
                duration,
                node.now,
                fresh,
            );
            let want = node.model.allocate(d, node.now, fresh);
            match (got, want) {
                (Ok(g), RefOutcome::Granted { token, expiry }) => {
                    assert_eq!((g.token, g.expiry), (token, expiry), "allocate grant mismatch");
                    node.tokens.insert(d, g.token);
                }
                (Err(LeaseError::Exhausted), RefOutcome::Exhausted) => {}
                other => panic!("allocate diverged at t={}: {other:?}", node.now),
            }
        }
        LeaseOp::Renew(d) => {
            let token = node.tokens[&d];
            let got = node
                .imp
                .renew(MODEL_ACCOUNT, MODEL_SCID, device(d), token, duration, node.now);
            let want = node.model.renew(d, token, node.now);
            match (got, want) {
                (Ok(g), RefOutcome::Granted { token, expiry }) => {
                    assert_eq!((g.token, g.expiry), (token, expiry), "renew grant mismatch");
                }
                (Err(LeaseError::NotHeld), RefOutcome::NotHeld) => {}
                other => panic!("renew diverged at t={}: {other:?}", node.now),
            }
        }
        LeaseOp::Release(d) => {
            let token = node.tokens[&d];
            let got = node
                .imp
                .release(MODEL_ACCOUNT, MODEL_SCID, device(d), token, node.now);
            let want = node.model.release(d, token, node.now);
            assert_eq!(got, want, "release diverged at t={}", node.now);
        }
        LeaseOp::Tick(dt) => node.now += dt,
    }
    assert_eq!(
        node.imp.held(MODEL_ACCOUNT, MODEL_SCID, node.now),
        node.model.held(node.now),
        "live slot count diverged at t={}",
        node.now
    );
    // Holdings probe: an idempotent allocate on a throwaway copy reveals
    // (token, expiry) for a held device and consumes nothing.
    for (d, (dev_tag, expiry)) in node.model.holdings(node.now).iter().enumerate() {
        let _ = d;
        let mut probe = node.imp.clone();
        let g = probe
            .allocate(
                MODEL_ACCOUNT,
                MODEL_SCID,
                device(*dev_tag),
                capacity,
                duration,
                node.now,
                [0xEE; 16],
            )
            .expect("model says the device holds a slot");
        assert_eq!(g.expiry, *expiry, "holding probe diverged at t={}", node.now);
        assert_ne!(g.token, [0xEE; 16], "probe must return the existing grant");
    }
}

#[derive(Debug, Clone, Copy)]
pub enum LeaseOp {
    Allocate(u8),
    Renew(u8),
    Release(u8),
    Tick(u64),
}

/// Exhaustive bounded enumeration: breadth-first over canonical states,
/// applying every applicable operation at every reachable state for
/// `depth` waves. Returns the number of transitions checked.
pub fn exhaustive_lease_equivalence(devices: u8, capacity: u32, duration: u64, depth: usize) -> usize {
    let start = Node {
        imp: LeaseState::default(),
        model: RefLease::new(capacity, duration),
        now: 100,
        tokens: HashMap::new(),
    };
    let mut seen: BTreeSet<Vec<DevState>> = BTreeSet::new();
    seen.insert(canonical(&start, devices));
    let mut frontier = VecDeque::from([start]);
    let mut transitions = 0usize;
    let mut token_counter: u64 = 1;

    for _ in 0..depth {
        let mut next = VecDeque::new();
        while let Some(node) = frontier.pop_front() {
            let mut ops: Vec<LeaseOp> = (0..devices).map(LeaseOp::Allocate).collect();
            for d in 0..devices {
                if node.tokens.contains_key(&d) {
                    ops.push(LeaseOp::Renew(d));
                    ops.push(LeaseOp::Release(d));
                }
            }
            ops.push(LeaseOp::Tick(1));
            for op in ops {
                let mut child = node.clone();
                token_counter += 1;
                let mut fresh = [0u8; 16];
                fresh[..8].copy_from_slice(&token_counter.to_be_bytes());
                apply_checked(&mut child, op, capacity, duration, fresh);
                transitions += 1;
                if seen.insert(canonical(&child, devices)) {
                    next.push_back(child);
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    transitions
}

/// Long random walk over the same alphabet, including bogus tokens and
/// large clock jumps the bounded enumeration cannot reach.
pub fn randomized_lease_equivalence(seed: u64, steps: usize, capacity: u32, duration: u64) -> usize {
    let mut r = rng(seed);
    let mut node = Node {
        imp: LeaseState::default(),
        model: RefLease::new(capacity, duration),
        now: 1_000,
        tokens: HashMap::new(),
    };
    let devices = 4u8;
    let mut checked = 0usize;
    for _ in 0..steps {
        let d = (r.next_u32() % devices as u32) as u8;
        let mut fresh = [0u8; 16];
        r.fill_bytes(&mut fresh);
        match r.next_u32() % 10 {
            0..=3 => apply_checked(&mut node, LeaseOp::Allocate(d), capacity, duration, fresh),
            4..=5 if node.tokens.contains_key(&d) => {
                apply_checked(&mut node, LeaseOp::Renew(d), capacity, duration, fresh)
            }
            6 if node.tokens.contains_key(&d) => {
                apply_checked(&mut node, LeaseOp::Release(d), capacity, duration, fresh)
            }
            7 => {
                // Bogus token: both sides must agree it holds nothing.
                let got = node
                    .imp
                    .renew(MODEL_ACCOUNT, MODEL_SCID, device(d), fresh, duration, node.now);
                let want = node.model.renew(d, fresh, node.now);
                assert!(
                    matches!((got, want), (Err(LeaseError::NotHeld), RefOutcome::NotHeld)),
                    "bogus token renew diverged"
                );
            }
            _ => {
                let dt = match r.next_u32() % 4 {
                    0 => 1,
                    1 => duration / 2 + 1,
                    2 => duration + 1,
                    _ => duration * 3,
                };
                apply_checked(&mut node, LeaseOp::Tick(dt), capacity, duration, fresh);
            }
        }
        checked += 1;
    }
    checked
}
