//! Run metrics: append-only collections during the run, CSV afterward.
//!
//! Column layouts are part of the tool's external interface and are pinned
//! by integration tests; change them only with a version bump.

use std::fmt::Write as _;

use crate::bearer::SetupLatency;
use crate::gcse::{ContinuityGap, DecisionRecord};
use crate::ids::{CellId, GroupId};
use crate::time::SimTime;

#[derive(Debug, Clone)]
pub struct SetupRow {
    pub call_id: u64,
    pub latency: SetupLatency,
    pub meets: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct AdmissionRow {
    pub at: SimTime,
    pub group: GroupId,
    pub admitted: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct UtilizationRow {
    pub at: SimTime,
    pub cell: CellId,
    pub unicast_used: u32,
    pub unicast_capacity: u32,
    pub multicast_used: u32,
    pub multicast_capacity: u32,
}

/// Everything a run reports, append-only while events are processed.
#[derive(Debug, Default, Clone)]
pub struct MetricsSink {
    pub setup_latencies: Vec<SetupRow>,
    pub throughput_series: Vec<(SimTime, f64)>,
    pub switch_events: Vec<DecisionRecord>,
    pub continuity_gaps: Vec<ContinuityGap>,
    pub admission_outcomes: Vec<AdmissionRow>,
    pub resource_utilization_series: Vec<UtilizationRow>,
}

pub(crate) fn fmt_ms(t: SimTime) -> String {
    let ms = t.as_ms_f64();
    if (ms - ms.round()).abs() < 1e-9 {
        format!("{}", ms.round() as i64)
    } else {
        format!("{ms:.3}")
    }
}

impl MetricsSink {
    pub fn new() -> Self {
        Self::default()
    }

    /// Per-call latency breakdown.
    pub fn setup_csv(&self) -> String {
        let mut out = String::from("call_id,option,startup_ms,bearer_ms,mcch_wait_ms,total_ms,meets_300ms\n");
        for row in &self.setup_latencies {
            let l = &row.latency;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.call_id,
                l.option.name(),
                fmt_ms(l.startup),
                fmt_ms(l.bearer),
                fmt_ms(l.mcch_wait),
                fmt_ms(l.total()),
                row.meets
            );
        }
        out
    }

    /// Transport decision log.
    pub fn decisions_csv(&self) -> String {
        let mut out = String::from("timestamp_ms,group_id,cell_id,decision,trigger,member_count\n");
        for d in &self.switch_events {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_ms(d.timestamp),
                d.group_id,
                d.cell_id,
                d.decision,
                d.trigger,
                d.member_count
            );
        }
        out
    }

    pub fn gaps_csv(&self) -> String {
        let mut out = String::from("time_ms,ue_id,group_id,gap_ms\n");
        for g in &self.continuity_gaps {
            let _ = writeln!(out, "{},{},{},{}", fmt_ms(g.at), g.ue, g.group, fmt_ms(g.gap));
        }
        out
    }

    pub fn admissions_csv(&self) -> String {
        let mut out = String::from("time_ms,group_id,admitted\n");
        for a in &self.admission_outcomes {
            let _ = writeln!(out, "{},{},{}", fmt_ms(a.at), a.group, a.admitted);
        }
        out
    }

    pub fn utilization_csv(&self) -> String {
        let mut out = String::from("time_ms,cell_id,unicast_used,unicast_capacity,multicast_used,multicast_capacity\n");
        for u in &self.resource_utilization_series {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_ms(u.at),
                u.cell,
                u.unicast_used,
                u.unicast_capacity,
                u.multicast_used,
                u.multicast_capacity
            );
        }
        out
    }

    pub fn throughput_csv(&self) -> String {
        let mut out = String::from("time_ms,throughput_kbps\n");
        for (t, kbps) in &self.throughput_series {
            let _ = writeln!(out, "{},{kbps:.3}", fmt_ms(*t));
        }
        out
    }

    /// Writes every populated table into the directory.
    pub fn write_all(&self, dir: &std::path::Path) -> std::io::Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let tables: [(&str, String, bool); 6] = [
            ("setup.csv", self.setup_csv(), !self.setup_latencies.is_empty()),
            ("decisions.csv", self.decisions_csv(), !self.switch_events.is_empty()),
            ("gaps.csv", self.gaps_csv(), !self.continuity_gaps.is_empty()),
            ("admissions.csv", self.admissions_csv(), !self.admission_outcomes.is_empty()),
            ("utilization.csv", self.utilization_csv(), !self.resource_utilization_series.is_empty()),
            ("throughput.csv", self.throughput_csv(), !self.throughput_series.is_empty()),
        ];
        for (name, content, populated) in tables {
            if populated {
                let path = dir.join(name);
                std::fs::write(&path, content)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}
