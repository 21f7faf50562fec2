//! Human-readable rendering of a conformance report. The serialized
//! wire message is the record of truth; this table is for eyes.

use minidrm_core::messages::{ConformanceReport, Verdict};
use minidrm_core::types::to_hex;

fn glyph(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "\u{25cf}",       // ● provided
        Verdict::Fail => "\u{25cb}",       // ○ not provided
        Verdict::NotClaimed => "\u{25d0}", // ◐ outside claimed scope
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::NotClaimed => "NOT_CLAIMED",
    }
}

pub fn render(report: &ConformanceReport) -> String {
    let mut out = String::new();
    out.push_str("minidrm conformance report\n");
    out.push_str(&format!(
        "suite: {}   seed: {}   fixture: {}\n\n",
        report.suite_id,
        report.seed,
        report.fixture.as_deref().unwrap_or("(none)")
    ));
    out.push_str("property  verdict          evidence\n");
    out.push_str("--------  ---------------  --------\n");
    for pv in &report.verdicts {
        let head = format!("SP{:<2}", pv.sp);
        let verdict = format!("{} {}", glyph(pv.verdict), verdict_name(pv.verdict));
        if pv.evidence.is_empty() {
            out.push_str(&format!("{head:<9} {verdict:<16} -\n"));
            continue;
        }
        for (i, ev) in pv.evidence.iter().enumerate() {
            let lead = if i == 0 {
                format!("{head:<9} {verdict:<16}")
            } else {
                format!("{:<9} {:<16}", "", "")
            };
            out.push_str(&format!(
                "{lead} [{:?}] {}: {}\n",
                ev.outcome, ev.attack, ev.detail
            ));
        }
    }
    out.push('\n');
    out.push_str("legend: \u{25cf} provided   \u{25cb} not provided   \u{25d0} outside claimed scope\n");
    out.push_str(
        "        NOT_CLAIMED replaces the survey category \"insufficient information\": every\n",
    );
    out.push_str("        cell here is decidable, so unclaimed rows are scope statements, not unknowns.\n");
    if !report.footnotes.is_empty() {
        out.push('\n');
        for (i, f) in report.footnotes.iter().enumerate() {
            out.push_str(&format!("[{}] {}\n", i + 1, f));
        }
    }
    out.push('\n');
    out.push_str(&format!(
        "report digest: {}\n",
        to_hex(&digest_of(report))
    ));
    out
}

/// Stable digest over the serialized report; two runs with the same
/// seed must agree byte for byte.
pub fn digest_of(report: &ConformanceReport) -> [u8; 32] {
    use minidrm_core::wire::WireMessage;
    let suite = minidrm_core::suite::suite_by_id(&report.suite_id)
        .unwrap_or_else(|_| minidrm_core::suite::suite_by_id("classic-x25519").unwrap());
    suite.hash(&report.encode())
}
