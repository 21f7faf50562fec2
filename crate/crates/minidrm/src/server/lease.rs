//! Concurrency lease accounting. Each (account, content) pair has a
//! bounded set of device slots; a slot is held by a device and proven by
//! an opaque token. The pure state machine lives in `LeaseState` so model
//! tests can drive it step by step; `LeaseTable` adds the lock.
//!
//! Expiry arithmetic uses the client's time reference throughout, matching
//! the expiry the client's vault will enforce. The freshness gate upstream
//! bounds how far that reference can drift from server time.

use std::collections::HashMap;
use std::sync::Mutex;

use minidrm_core::types::DeviceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeaseError {
    /// All slots for the (account, content) pair are held.
    Exhausted,
    /// Renew/release without a live matching slot.
    NotHeld,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Slot {
    device: DeviceId,
    token: [u8; 16],
    expiry: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub token: [u8; 16],
    pub expiry: u64,
}

/// Pure lease state machine. All methods take explicit time and fresh
/// token material so behaviour is a deterministic function of the call
/// sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeaseState {
    slots: HashMap<(String, [u8; 32]), Vec<Slot>>,
}

impl LeaseState {
    fn reap(&mut self, key: &(String, [u8; 32]), now: u64) {
        if let Some(v) = self.slots.get_mut(key) {
            v.retain(|s| s.expiry > now);
            if v.is_empty() {
                self.slots.remove(key);
            }
        }
    }

    /// Allocate a slot. Idempotent per device: a device that already
    /// holds a live slot gets the same grant back, consuming nothing.
    pub fn allocate(
        &mut self,
        account: &str,
        scid: [u8; 32],
        device: DeviceId,
        capacity: u32,
        duration: u64,
        now: u64,
        fresh_token: [u8; 16],
    ) -> Result<Grant, LeaseError> {
        let key = (account.to_string(), scid);
        self.reap(&key, now);
        let slots = self.slots.entry(key).or_default();
        if let Some(slot) = slots.iter().find(|s| s.device == device) {
            return Ok(Grant {
                token: slot.token,
                expiry: slot.expiry,
            });
        }
        if slots.len() as u32 >= capacity {
            return Err(LeaseError::Exhausted);
        }
        let grant = Grant {
            token: fresh_token,
            expiry: now + duration,
        };
        slots.push(Slot {
            device,
            token: grant.token,
            expiry: grant.expiry,
        });
        Ok(grant)
    }

    /// Extend a held slot. Requires device and token to match a live
    /// slot; an expired slot is gone, not renewable.
    pub fn renew(
        &mut self,
        account: &str,
        scid: [u8; 32],
        device: DeviceId,
        token: [u8; 16],
        duration: u64,
        now: u64,
    ) -> Result<Grant, LeaseError> {
        let key = (account.to_string(), scid);
        self.reap(&key, now);
        let slots = self.slots.get_mut(&key).ok_or(LeaseError::NotHeld)?;
        let slot = slots
            .iter_mut()
            .find(|s| s.device == device && s.token == token)
            .ok_or(LeaseError::NotHeld)?;
        slot.expiry = slot.expiry.max(now + duration);
        Ok(Grant {
            token: slot.token,
            expiry: slot.expiry,
        })
    }

    /// Free a held slot. Returns whether a live matching slot existed;
    /// releasing nothing is not an error.
    pub fn release(
        &mut self,
        account: &str,
        scid: [u8; 32],
        device: DeviceId,
        token: [u8; 16],
        now: u64,
    ) -> bool {
        let key = (account.to_string(), scid);
        self.reap(&key, now);
        let Some(slots) = self.slots.get_mut(&key) else {
            return false;
        };
        let before = slots.len();
        slots.retain(|s| !(s.device == device && s.token == token));
        let released = slots.len() < before;
        if slots.is_empty() {
            self.slots.remove(&key);
        }
        released
    }

    /// Live slot count for one (account, content) pair.
    pub fn held(&self, account: &str, scid: [u8; 32], now: u64) -> usize {
        self.slots
            .get(&(account.to_string(), scid))
            .map(|v| v.iter().filter(|s| s.expiry > now).count())
            .unwrap_or(0)
    }
}

#[derive(Debug, Default)]
pub struct LeaseTable {
    state: Mutex<LeaseState>,
}

impl LeaseTable {
    pub fn new() -> LeaseTable {
        LeaseTable::default()
    }

    pub fn with<R>(&self, f: impl FnOnce(&mut LeaseState) -> R) -> R {
        f(&mut self.state.lock().unwrap())
    }
}
