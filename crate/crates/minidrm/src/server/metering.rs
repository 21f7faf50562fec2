//! Per-account usage counters, aggregated by content id. Counts license
//! issuance, lease renewals, and releases; the report is the billing
//! surface, so ordering is deterministic.

use std::collections::HashMap;
use std::sync::Mutex;

use minidrm_core::messages::{MeteringEntry, MeteringReport};

#[derive(Debug, Default, Clone, Copy)]
struct Counts {
    issued: u32,
    renewed: u32,
    released: u32,
}

#[derive(Debug, Default)]
pub struct MeteringLog {
    counts: Mutex<HashMap<(String, String), Counts>>,
}

impl MeteringLog {
    pub fn new() -> MeteringLog {
        MeteringLog::default()
    }

    fn bump(&self, account: &str, content_id: &str, f: impl FnOnce(&mut Counts)) {
        let mut counts = self.counts.lock().unwrap();
        f(counts
            .entry((account.to_string(), content_id.to_string()))
            .or_default());
    }

    pub fn record_issue(&self, account: &str, content_id: &str) {
        self.bump(account, content_id, |c| c.issued += 1);
    }

    pub fn record_renew(&self, account: &str, content_id: &str) {
        self.bump(account, content_id, |c| c.renewed += 1);
    }

    pub fn record_release(&self, account: &str, content_id: &str) {
        self.bump(account, content_id, |c| c.released += 1);
    }

    pub fn report(&self, account: &str, now: u64) -> MeteringReport {
        let counts = self.counts.lock().unwrap();
        let mut entries: Vec<MeteringEntry> = counts
            .iter()
            .filter(|((a, _), _)| a == account)
            .map(|((_, content_id), c)| MeteringEntry {
                content_id: content_id.clone(),
                issued: c.issued,
                renewed: c.renewed,
                released: c.released,
            })
            .collect();
        entries.sort_by(|x, y| x.content_id.cmp(&y.content_id));
        MeteringReport {
            account: account.to_string(),
            generated_at: now,
            entries,
        }
    }
}
