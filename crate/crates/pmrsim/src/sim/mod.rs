//! Discrete-event engine: one clock, one queue, one call manager.
//!
//! The engine is strictly single-threaded and deterministic. All random
//! inputs (arrival jitter, startup draws, mobility walks, loss draws) are
//! pre-drawn from named seed streams while the scenario is scheduled, so
//! the trace is a pure function of (scenario, seed). Every processed event
//! is followed by a structural audit: committed units must reconcile with
//! transport state, no member may hold two downlink paths, and a dynamic
//! policy must never broadcast into an empty cell.

pub mod event;
pub mod metrics;
pub mod rng;
pub mod scenario;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bearer::{setup_latency, BearerOption, BearerState};
use crate::domain::{RxMode, ScenarioSummary, ServiceKind};
use crate::gcse::{CallManager, FollowUp, GcseError, PolicyKind};
use crate::ids::{GroupId, UeId};
use crate::time::SimTime;

use event::{Event, EventPayload, EventQueue};
use metrics::{AdmissionRow, MetricsSink, SetupRow, UtilizationRow};
use rng::{indexed_rng, stream_rng};
use scenario::{BuiltScenario, ScenarioError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Gcse(#[from] GcseError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("causality violation: event at {scheduled} scheduled while clock is {now}")]
    Causality { now: SimTime, scheduled: SimTime },
    #[error("audit failed after event {seq} at {at}: {detail}")]
    Audit { at: SimTime, seq: u64, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const SAMPLE_INTERVAL: SimTime = SimTime::from_ms(1000);

/// The engine: owns queue, clock, manager and metrics for one run.
pub struct Engine {
    clock: SimTime,
    queue: EventQueue,
    manager: CallManager,
    duration: SimTime,
    seed: u64,
    option: BearerOption,
    uli_interval: SimTime,
    call_duration: SimTime,
    metrics: MetricsSink,
    trace: Vec<String>,
    next_sample: SimTime,
    call_ids: BTreeMap<GroupId, u64>,
    next_call_id: u64,
    audit_enabled: bool,
}

impl Engine {
    /// Instantiates and fully schedules a built scenario.
    pub fn new(built: BuiltScenario) -> Result<Self, SimError> {
        let BuiltScenario {
            mut manager,
            arrivals,
            duration,
            seed,
            spec,
            ..
        } = built;
        let option = spec.bearer_option();
        let mut queue = EventQueue::new();
        let mut metrics = MetricsSink::new();

        if manager.policy().kind == PolicyKind::StaticActivation && option == BearerOption::PreEstablished {
            let rejected = manager.prearrange_bearers(SimTime::from_us(0))?;
            for group in rejected {
                metrics.admission_outcomes.push(AdmissionRow {
                    at: SimTime::from_us(0),
                    group,
                    admitted: false,
                });
            }
        }

        for (at, group) in &arrivals {
            queue.push(*at, EventPayload::CallRequest { group: *group });
        }

        if spec.mobility.enabled {
            let walks = plan_mobility(&manager, &spec, seed, duration);
            for (at, ue, to_cell) in walks {
                queue.push(at, EventPayload::Handover { ue, to_cell });
            }
        }
        if spec.loss.enabled {
            for (at, ue, group, loss_ppm) in plan_loss(&manager, &spec, seed, duration) {
                queue.push(at, EventPayload::LossReport { ue, group, loss_ppm });
            }
        }
        if spec.talk.enabled {
            for (at, ue, group, release) in plan_talk(&manager, &spec, seed, duration) {
                queue.push(at, EventPayload::TalkBurst { ue, group, release });
            }
        }

        Ok(Engine {
            clock: SimTime::from_us(0),
            queue,
            manager,
            duration,
            seed,
            option,
            uli_interval: spec.policy().uli_interval,
            call_duration: SimTime::from_ms(spec.arrivals.call_duration_ms),
            metrics,
            trace: Vec::new(),
            next_sample: SAMPLE_INTERVAL,
            call_ids: BTreeMap::new(),
            next_call_id: 0,
            audit_enabled: true,
        })
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn manager(&self) -> &CallManager {
        &self.manager
    }

    pub fn metrics(&self) -> &MetricsSink {
        &self.metrics
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    /// Disables the per-event audit (it is quadratic-ish on big runs).
    pub fn set_audit(&mut self, enabled: bool) {
        self.audit_enabled = enabled;
    }

    fn push_follow_ups(&mut self, follow_ups: Vec<FollowUp>) -> Result<(), SimError> {
        for f in follow_ups {
            if f.at() < self.clock {
                return Err(SimError::Causality {
                    now: self.clock,
                    scheduled: f.at(),
                });
            }
            let payload = match f {
                FollowUp::UnicastComplete { bearer, .. } => EventPayload::BearerComplete { bearer },
                FollowUp::McchActivation { bearer, .. } => EventPayload::McchBoundary { bearer },
            };
            self.queue.push(f.at(), payload);
        }
        Ok(())
    }

    fn sample_up_to(&mut self, horizon: SimTime) {
        while self.next_sample <= horizon {
            let at = self.next_sample;
            let totals = self.manager.ledger().totals();
            for (cell, (uc, mc)) in totals {
                self.metrics.resource_utilization_series.push(UtilizationRow {
                    at,
                    cell,
                    unicast_used: uc,
                    unicast_capacity: self.manager.ledger().capacity(cell, crate::radio::PoolKind::Unicast),
                    multicast_used: mc,
                    multicast_capacity: self.manager.ledger().capacity(cell, crate::radio::PoolKind::Multicast),
                });
            }
            let kbps = self.delivered_kbps();
            self.metrics.throughput_series.push((at, kbps));
            self.next_sample = self.next_sample + SAMPLE_INTERVAL;
        }
    }

    /// Application throughput currently delivered: every member with a live
    /// downlink path counts at the group's service rate.
    fn delivered_kbps(&self) -> f64 {
        let mut kbps = 0.0;
        for group in self.manager.network().groups() {
            if !self.manager.call_admitted(group.group_id) {
                continue;
            }
            let rate = f64::from(group.profile.app_rate_kbps);
            for ue in &group.members {
                if let Ok(u) = self.manager.network().ue(*ue) {
                    if u.rx_mode.contains_key(&group.group_id) {
                        kbps += rate;
                    }
                }
            }
        }
        kbps
    }

    fn dispatch(&mut self, ev: &Event) -> Result<(), SimError> {
        let now = ev.time;
        match ev.payload {
            EventPayload::CallRequest { group } => {
                let call_id = self.next_call_id;
                self.next_call_id += 1;
                self.call_ids.insert(group, call_id);
                let mut rng = indexed_rng(self.seed, "startup", call_id);
                let draw = self.manager.budget().draw_startup(&mut rng);
                let latency = setup_latency(self.option, self.manager.budget(), self.manager.schedule(), now, draw);
                let meets = latency.meets(self.manager.budget());
                self.metrics.setup_latencies.push(SetupRow {
                    call_id,
                    latency,
                    meets,
                });
                let started = match self.manager.start_group_call(group, now) {
                    Ok(start) => start,
                    Err(GcseError::NoPreestablishedBearer(_)) => crate::gcse::CallStart {
                        admitted: false,
                        follow_ups: Vec::new(),
                    },
                    Err(e) => return Err(e.into()),
                };
                self.metrics.admission_outcomes.push(AdmissionRow {
                    at: now,
                    group,
                    admitted: started.admitted,
                });
                self.push_follow_ups(started.follow_ups)?;
                if started.admitted {
                    if self.manager.policy().kind == PolicyKind::DynamicActivation {
                        self.queue.push(now + self.uli_interval, EventPayload::UliReport { group });
                    }
                    if self.call_duration.as_us() > 0 {
                        self.queue.push(now + self.call_duration, EventPayload::CallEnd { group });
                    }
                }
            }
            EventPayload::BearerComplete { bearer } | EventPayload::McchBoundary { bearer } => {
                let follow_ups = self.manager.bearer_complete(bearer, now)?;
                self.push_follow_ups(follow_ups)?;
            }
            EventPayload::UliReport { group } => {
                if self.manager.call_active(group) {
                    let report = self.manager.build_uli_report(group)?;
                    let out = self.manager.handle_uli(&report, now)?;
                    self.push_follow_ups(out.follow_ups)?;
                    self.queue.push(now + self.uli_interval, EventPayload::UliReport { group });
                }
            }
            EventPayload::LossReport { ue, group, loss_ppm } => {
                let is_mc_receiver = self
                    .manager
                    .network()
                    .ue(ue)
                    .map(|u| u.rx_mode.get(&group) == Some(&RxMode::MulticastRx))
                    .unwrap_or(false);
                if is_mc_receiver {
                    let loss = f64::from(loss_ppm) / 1_000_000.0;
                    let out = self.manager.handle_loss_report(ue, group, loss, now)?;
                    self.push_follow_ups(out.follow_ups)?;
                }
            }
            EventPayload::Handover { ue, to_cell } => {
                let out = self.manager.handle_handover(ue, to_cell, now)?;
                self.push_follow_ups(out.follow_ups)?;
            }
            EventPayload::TalkBurst { ue, group, release } => {
                if release {
                    self.manager.floor_release(ue, group);
                } else if self.manager.call_active(group) {
                    // A denied floor request is an outcome, not a failure.
                    let _ = self.manager.uplink_talk_burst(ue, group, now);
                }
            }
            EventPayload::CallEnd { group } => {
                self.manager.end_group_call(group, now)?;
            }
        }
        Ok(())
    }

    /// Processes one event; returns false when the run is over.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let Some(next_time) = self.queue.peek_time() else {
            self.sample_up_to(self.duration);
            self.clock = self.duration;
            return Ok(false);
        };
        if next_time > self.duration {
            self.sample_up_to(self.duration);
            self.clock = self.duration;
            return Ok(false);
        }
        let ev = self.queue.pop().expect("peeked");
        self.sample_up_to(ev.time.saturating_sub(SimTime::from_us(1)));
        self.clock = ev.time;
        self.trace.push(ev.trace_line());
        self.dispatch(&ev)?;
        if self.audit_enabled {
            if let Err(detail) = self.manager.audit() {
                return Err(SimError::Audit {
                    at: ev.time,
                    seq: ev.seq,
                    detail,
                });
            }
        }
        Ok(true)
    }

    /// Runs to the end of the scenario and freezes the metrics.
    pub fn run(&mut self) -> Result<(), SimError> {
        while self.step()? {}
        self.finalize();
        Ok(())
    }

    fn finalize(&mut self) {
        self.metrics.switch_events = self.manager.decisions().to_vec();
        self.metrics.continuity_gaps = self.manager.continuity_gaps().to_vec();
    }

    /// Verifies no establishment is still pending that should have finished
    /// inside the run.
    pub fn liveness_check(&self) -> Result<(), String> {
        for bearer in self.manager.bearers().bearers() {
            if bearer.state == BearerState::Activating {
                if let Some(at) = bearer.scheduled_active {
                    if at <= self.duration {
                        return Err(format!(
                            "bearer {} still Activating although its completion was due at {at}",
                            bearer.bearer_id
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Condenses the run into the figures the requirement matrix checks.
    pub fn summary(&self) -> ScenarioSummary {
        let setup_p100_ms = self
            .metrics
            .setup_latencies
            .iter()
            .map(|r| r.latency.total().as_ms_f64())
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        let groups_requested = self.call_ids.len() as u32;
        let groups_admitted = self
            .call_ids
            .keys()
            .filter(|g| self.manager.call_admitted(**g))
            .count() as u32;
        let voice_groups_admitted = self
            .call_ids
            .keys()
            .filter(|g| {
                self.manager.call_admitted(**g)
                    && self
                        .manager
                        .network()
                        .group(**g)
                        .map(|gc| gc.profile.kind == ServiceKind::Voice)
                        .unwrap_or(false)
            })
            .count() as u32;
        let max_group_size = self
            .manager
            .network()
            .groups()
            .map(|g| g.members.len() as u32)
            .max()
            .unwrap_or(0);
        ScenarioSummary {
            setup_p100_ms,
            voice_groups_admitted,
            total_users: self.manager.network().ue_count() as u32,
            max_group_size,
            bandwidth_mhz: self.manager.model().bandwidth_mhz,
            groups_requested,
            groups_admitted,
        }
    }

    /// Writes the CSV tables and the event trace into a directory.
    pub fn write_artifacts(&self, dir: &std::path::Path) -> std::io::Result<Vec<std::path::PathBuf>> {
        let mut written = self.metrics.write_all(dir)?;
        let trace_path = dir.join("trace.log");
        std::fs::write(&trace_path, self.trace.join("\n") + "\n")?;
        written.push(trace_path);
        Ok(written)
    }
}

/// Pre-draws every UE's mobility walk inside its home area.
fn plan_mobility(
    manager: &CallManager,
    spec: &scenario::ScenarioSpec,
    seed: u64,
    duration: SimTime,
) -> Vec<(SimTime, UeId, crate::ids::CellId)> {
    use rand::Rng;
    let mut walks = Vec::new();
    let net = manager.network();
    for (index, ue) in net.ues().enumerate() {
        let Some(area_id) = net.area_of_cell(ue.serving_cell) else {
            continue;
        };
        let Ok(area) = net.area(area_id) else {
            continue;
        };
        let cells: Vec<_> = area.cells.iter().copied().collect();
        if cells.len() < 2 {
            continue;
        }
        let mut rng = indexed_rng(seed, "mobility", index as u64);
        let mut t = SimTime::from_us(0);
        let mut current = ue.serving_cell;
        loop {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let dwell_ms = (-(u.ln()) * spec.mobility.mean_dwell_ms as f64).round() as u64;
            t = t + SimTime::from_ms(dwell_ms.max(1));
            if t > duration {
                break;
            }
            let mut target = current;
            while target == current {
                target = cells[rng.gen_range(0..cells.len())];
            }
            walks.push((t, ue.ue_id, target));
            current = target;
        }
    }
    walks
}

/// Pre-draws periodic loss reports aimed at members; reports landing on a
/// UE that is not a multicast receiver at dispatch time are no-ops.
fn plan_loss(
    manager: &CallManager,
    spec: &scenario::ScenarioSpec,
    seed: u64,
    duration: SimTime,
) -> Vec<(SimTime, UeId, GroupId, u32)> {
    use rand::Rng;
    let net = manager.network();
    let candidates: Vec<(UeId, GroupId)> = net
        .ues()
        .filter_map(|u| u.memberships.iter().next().map(|g| (u.ue_id, *g)))
        .collect();
    if candidates.is_empty() {
        return Vec::new();
    }
    let mut rng = stream_rng(seed, "loss");
    let mut out = Vec::new();
    let mut t = SimTime::from_ms(spec.loss.interval_ms);
    while t <= duration {
        let (ue, group) = candidates[rng.gen_range(0..candidates.len())];
        let loss_ppm = rng.gen_range(spec.loss.loss_ppm_min..=spec.loss.loss_ppm_max);
        out.push((t, ue, group, loss_ppm));
        t = t + SimTime::from_ms(spec.loss.interval_ms);
    }
    out
}

/// Pre-draws talk-burst requests and their releases.
fn plan_talk(
    manager: &CallManager,
    spec: &scenario::ScenarioSpec,
    seed: u64,
    duration: SimTime,
) -> Vec<(SimTime, UeId, GroupId, bool)> {
    use rand::Rng;
    let net = manager.network();
    let candidates: Vec<(UeId, GroupId)> = net
        .ues()
        .filter_map(|u| u.memberships.iter().next().map(|g| (u.ue_id, *g)))
        .collect();
    if candidates.is_empty() {
        return Vec::new();
    }
    let mut rng = stream_rng(seed, "talk");
    let mut out = Vec::new();
    let mut t = SimTime::from_ms(spec.talk.interval_ms);
    while t <= duration {
        let (ue, group) = candidates[rng.gen_range(0..candidates.len())];
        out.push((t, ue, group, false));
        let release = t + SimTime::from_ms(spec.talk.burst_ms);
        if release <= duration {
            out.push((release, ue, group, true));
        }
        t = t + SimTime::from_ms(spec.talk.interval_ms);
    }
    out
}
