//! Two-layer replay defence. Layer 1 is a freshness gate on the client
//! timestamp; layer 2 is an insert-if-absent ledger of anti-replay seeds.
//! Ledger retention is twice the freshness window: a seed may only be
//! evicted once every request that could legally carry it is already
//! stale, so eviction can never reopen a replay.
//!
//! Seeds stay in the ledger even when a later pipeline stage rejects the
//! request; a rejected request is still a consumed seed.

use std::collections::HashMap;
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayRejection {
    /// Client timestamp outside the freshness window.
    StaleTime,
    /// Seed already consumed.
    DuplicateSeed,
}

#[derive(Debug)]
pub struct ReplayLedger {
    /// Fixture hook: when false the seed ledger is bypassed entirely.
    /// The freshness gate stays on; it cannot stop an immediate replay.
    ledger_enabled: bool,
    window: u64,
    seen: Mutex<HashMap<[u8; 16], u64>>,
}

impl ReplayLedger {
    pub fn new(window: u64, ledger_enabled: bool) -> ReplayLedger {
        ReplayLedger {
            ledger_enabled,
            window,
            seen: Mutex::new(HashMap::new()),
        }
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    /// Freshness gate only; used by lease renew/release which carry no
    /// seed (replaying those is idempotent, staleness is not).
    pub fn check_fresh(&self, client_time: u64, now: u64) -> Result<(), ReplayRejection> {
        if now.abs_diff(client_time) > self.window {
            return Err(ReplayRejection::StaleTime);
        }
        Ok(())
    }

    /// Full check for license requests: freshness, then linearizable
    /// insert-if-absent on the seed.
    pub fn check_and_insert(
        &self,
        seed: [u8; 16],
        client_time: u64,
        now: u64,
    ) -> Result<(), ReplayRejection> {
        self.check_fresh(client_time, now)?;
        if !self.ledger_enabled {
            return Ok(());
        }
        let mut seen = self.seen.lock().unwrap();
        seen.retain(|_, inserted| now.saturating_sub(*inserted) <= 2 * self.window);
        if seen.contains_key(&seed) {
            return Err(ReplayRejection::DuplicateSeed);
        }
        seen.insert(seed, now);
        Ok(())
    }

    #[cfg(test)]
    pub fn ledger_len(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}
