//! Per-device token bucket. Integer arithmetic on whole seconds; capacity
//! equals the per-second rate, so a device can burst one second's
//! allowance and then proceeds at the refill rate.

use std::collections::HashMap;
use std::sync::Mutex;

use minidrm_core::types::DeviceId;

#[derive(Debug)]
struct Bucket {
    tokens: u64,
    last_refill: u64,
}

#[derive(Debug)]
pub struct RateLimiter {
    /// None disables limiting.
    per_sec: Option<u32>,
    buckets: Mutex<HashMap<DeviceId, Bucket>>,
}

impl RateLimiter {
    pub fn new(per_sec: Option<u32>) -> RateLimiter {
        RateLimiter {
            per_sec,
            buckets: Mutex::new(HashMap::new()),
        }
    }

    /// Spend one token for this device. `now` is in seconds.
    pub fn allow(&self, device: DeviceId, now: u64) -> bool {
        let Some(rate) = self.per_sec else {
            return true;
        };
        let rate = rate as u64;
        let mut buckets = self.buckets.lock().unwrap();
        let bucket = buckets.entry(device).or_insert(Bucket {
            tokens: rate,
            last_refill: now,
        });
        let elapsed = now.saturating_sub(bucket.last_refill);
        if elapsed > 0 {
            bucket.tokens = rate.min(bucket.tokens + elapsed.saturating_mul(rate));
            bucket.last_refill = now;
        }
        if bucket.tokens == 0 {
            return false;
        }
        bucket.tokens -= 1;
        true
    }
}
