use std::fmt::Write as _;
use std::io;
use std::time::Duration;

use serde::Serialize;

use super::{to_f64, ExperimentReport, Result};
use crate::protocol::KeyMode;

/// One CSV row per grid point. Times are seconds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub protocol: String,
    #[serde(rename = "N")]
    pub users: u32,
    pub m: u32,
    #[serde(rename = "S")]
    pub scale: u64,
    #[serde(rename = "C")]
    pub service_threshold: f64,
    pub key_bits: u64,
    pub key_mode: String,
    pub repetitions: u32,
    pub mre: f64,
    pub mre_raw: f64,
    pub op_stage1_s: f64,
    pub op_stage2_s: f64,
    pub op_stage3_s: f64,
    pub user_stage1_s: f64,
    pub user_stage2_s: f64,
    pub user_stage3_s: f64,
    pub op_per_slot_s: f64,
    pub total_bytes: f64,
    pub messages: f64,
    pub user_slot_bytes: f64,
    pub estimated_user_slot_bytes: u64,
}

fn secs(d: Option<&Duration>) -> f64 {
    d.map_or(0.0, Duration::as_secs_f64)
}

impl From<&ExperimentReport> for ReportRow {
    fn from(r: &ExperimentReport) -> Self {
        let c = &r.config;
        ReportRow {
            protocol: c.protocol.to_string(),
            users: c.users,
            m: c.slots,
            scale: c.scale.get(),
            service_threshold: *c.service_threshold.numer() as f64 / *c.service_threshold.denom() as f64,
            key_bits: c.key_bits,
            key_mode: match c.key_mode {
                KeyMode::Common => "common".into(),
                KeyMode::Threshold { threshold } => format!("threshold:{threshold}"),
            },
            repetitions: c.repetitions,
            mre: to_f64(&r.mre),
            mre_raw: to_f64(&r.mre_raw),
            op_stage1_s: secs(r.operator_stage.get(&1)),
            op_stage2_s: secs(r.operator_stage.get(&2)),
            op_stage3_s: secs(r.operator_stage.get(&3)),
            user_stage1_s: secs(r.user_stage.get(&1)),
            user_stage2_s: secs(r.user_stage.get(&2)),
            user_stage3_s: secs(r.user_stage.get(&3)),
            op_per_slot_s: r.operator_per_slot.as_secs_f64(),
            total_bytes: r.total_bytes,
            messages: r.total_messages,
            user_slot_bytes: r.user_slot_bytes,
            estimated_user_slot_bytes: r.estimated_user_slot_bytes,
        }
    }
}

pub fn write_reports_csv<W: io::Write>(reports: &[ExperimentReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in reports {
        w.serialize(ReportRow::from(r))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Human-readable table of the reports.
pub fn summary(reports: &[ExperimentReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<4} {:>3} {:>3} {:>6} {:>10} {:>10} {:>12} {:>12} {:>11} {:>8}",
        "prot", "N", "m", "S", "mre", "mre_raw", "op/slot ms", "user ms", "B/user/slot", "estimate"
    );
    for r in reports {
        let row = ReportRow::from(r);
        let user_ms = (row.user_stage1_s + row.user_stage2_s) * 1e3;
        let _ = writeln!(
            s,
            "{:<4} {:>3} {:>3} {:>6} {:>10.6} {:>10.6} {:>12.4} {:>12.4} {:>11.1} {:>8}",
            row.protocol,
            row.users,
            row.m,
            row.scale,
            row.mre,
            row.mre_raw,
            row.op_per_slot_s * 1e3,
            user_ms,
            row.user_slot_bytes,
            row.estimated_user_slot_bytes
        );
    }
    s
}
