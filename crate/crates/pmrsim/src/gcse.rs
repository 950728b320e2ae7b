//! The group-communication enabler: activation policies and call control.
//!
//! Two policies govern how a group call reaches its members. Static
//! activation broadcasts over the pre-planned MBMS area from the first
//! moment and falls back to unicast per UE only on reported loss. Dynamic
//! activation starts every call on unicast bearers and lets per-cell member
//! counting switch a cell to multicast once the membership there crosses
//! the resource crossover point, never broadcasting into an empty cell.
//!
//! [`CallManager`] owns the network registry, bearer table and load ledger
//! and mutates them in event-timestamp order; operations return follow-up
//! completions for the caller to schedule rather than scheduling anything
//! themselves.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::bearer::{
    ActivationTiming, BearerError, BearerKind, BearerOption, BearerState, BearerTable, LatencyBudget, McchSchedule,
};
use crate::domain::{DomainError, MbmsArea, Network, RxMode, SyncMode};
use crate::ids::{AreaId, BearerId, CellId, GroupId, UeId};
use crate::radio::{
    admit_units, multicast_cost, unicast_cost, AdmitOutcome, LoadLedger, PoolKind, RadioError, ResourceModel,
    TransportKind,
};
use crate::time::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GcseError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Bearer(#[from] BearerError),
    #[error("group {group}: admission failed in cell {cell}")]
    AdmissionFailed { group: GroupId, cell: CellId },
    #[error("group {0} has no pre-established bearer")]
    NoPreestablishedBearer(GroupId),
    #[error("UE {ue} is not receiving group {group} via multicast")]
    NotMulticastReceiver { ue: UeId, group: GroupId },
    #[error("group {group}: floor held by {holder}")]
    FloorTaken { group: GroupId, holder: UeId },
    #[error("UE {ue} is not a member of group {group}")]
    NotAMember { ue: UeId, group: GroupId },
    #[error("no call in progress for group {0}")]
    NoActiveCall(GroupId),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("ULI report for group {group} counts {counted} members, group has {actual}")]
    InvalidReport { group: GroupId, counted: u32, actual: u32 },
}

// ===========================================================================
// Policy and transport state
// ===========================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    StaticActivation,
    DynamicActivation,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::StaticActivation => "static",
            PolicyKind::DynamicActivation => "dynamic",
        }
    }
}

/// Where per-cell member counts come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UliSource {
    /// The packet gateway reports counts for all cells at once.
    PgwUli,
    /// Each UE notifies the enabler when it changes cell; cheaper for the
    /// UE, one core-network message per move.
    UeReported,
}

/// Transport-selection policy of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    pub kind: PolicyKind,
    /// Loss fraction above which a multicast receiver falls back to
    /// unicast; strict inequality.
    pub loss_threshold: f64,
    /// A cell switches back to unicast only when its count drops below
    /// the crossover threshold minus this band.
    pub switch_hysteresis: u32,
    /// Spacing of counting reports.
    pub uli_interval: SimTime,
    pub uli_source: UliSource,
}

impl Policy {
    pub fn static_activation() -> Self {
        Policy {
            kind: PolicyKind::StaticActivation,
            loss_threshold: 0.05,
            switch_hysteresis: 1,
            uli_interval: SimTime::from_ms(1000),
            uli_source: UliSource::PgwUli,
        }
    }

    pub fn dynamic_activation() -> Self {
        Policy {
            kind: PolicyKind::DynamicActivation,
            ..Policy::static_activation()
        }
    }

    pub fn validate(&self) -> Result<(), GcseError> {
        if !(self.loss_threshold > 0.0 && self.loss_threshold < 1.0) {
            return Err(GcseError::InvalidPolicy(format!(
                "loss_threshold {} must lie in (0, 1)",
                self.loss_threshold
            )));
        }
        if self.uli_interval.as_us() == 0 {
            return Err(GcseError::InvalidPolicy("uli_interval must be positive".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportMode {
    NoTransport,
    UnicastOnly,
    MulticastActive,
    Mixed,
}

/// Downlink transport of one group in one cell.
///
/// The mode is derived from the bearer fields, so the mode/bearer coupling
/// invariants hold by construction. Unit counts mirror what the load ledger
/// has committed for this transport, which lets audits recompute ledger
/// totals from transport state alone.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransportState {
    pub multicast_bearer: Option<BearerId>,
    pub multicast_units: u32,
    pub unicast_bearers: BTreeMap<UeId, BearerId>,
    pub unicast_units: BTreeMap<UeId, u32>,
}

impl TransportState {
    pub fn mode(&self) -> TransportMode {
        match (self.multicast_bearer.is_some(), !self.unicast_bearers.is_empty()) {
            (false, false) => TransportMode::NoTransport,
            (false, true) => TransportMode::UnicastOnly,
            (true, false) => TransportMode::MulticastActive,
            (true, true) => TransportMode::Mixed,
        }
    }

    pub fn is_multicast(&self) -> bool {
        self.multicast_bearer.is_some()
    }
}

// ===========================================================================
// Reports, decisions, floor control
// ===========================================================================

/// Per-cell member counts for one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UliReport {
    pub group_id: GroupId,
    pub counts: BTreeMap<CellId, u32>,
    pub source: UliSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchAction {
    ToMulticast,
    ToUnicast,
    NoChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchDecision {
    pub cell_id: CellId,
    pub action: SwitchAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallbackDecision {
    FallbackToUnicast,
    NoChange,
}

/// One transport decision, as written to the decision log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionRecord {
    pub timestamp: SimTime,
    pub group_id: GroupId,
    pub cell_id: CellId,
    pub decision: &'static str,
    pub trigger: &'static str,
    pub member_count: u32,
}

/// A service interruption observed while moving a receiver between cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContinuityGap {
    pub at: SimTime,
    pub ue: UeId,
    pub group: GroupId,
    pub gap: SimTime,
}

/// Uplink usage entry; uplink is always unicast, whatever the downlink does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UplinkRecord {
    pub at: SimTime,
    pub ue: UeId,
    pub group: GroupId,
    pub cell: CellId,
    pub transport: TransportKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloorOutcome {
    Granted,
    /// A higher-priority talker displaced the previous holder.
    PreemptedPrevious { previous: UeId },
}

/// Push-to-talk arbitration: one talker per group, priority first, earlier
/// request wins ties.
#[derive(Debug, Clone, Default)]
pub struct FloorControl {
    holder: Option<(UeId, u8)>,
}

impl FloorControl {
    pub fn holder(&self) -> Option<UeId> {
        self.holder.map(|(ue, _)| ue)
    }

    pub fn request(&mut self, group: GroupId, ue: UeId, priority: u8) -> Result<FloorOutcome, GcseError> {
        match self.holder {
            None => {
                self.holder = Some((ue, priority));
                Ok(FloorOutcome::Granted)
            }
            Some((current, _)) if current == ue => Ok(FloorOutcome::Granted),
            Some((current, held_priority)) => {
                if priority > held_priority {
                    self.holder = Some((ue, priority));
                    Ok(FloorOutcome::PreemptedPrevious { previous: current })
                } else {
                    Err(GcseError::FloorTaken {
                        group,
                        holder: current,
                    })
                }
            }
        }
    }

    pub fn release(&mut self, ue: UeId) {
        if self.holder.map(|(h, _)| h) == Some(ue) {
            self.holder = None;
        }
    }
}

// ===========================================================================
// Call manager
// ===========================================================================

/// A bearer completion the caller must schedule and later feed back through
/// [`CallManager::bearer_complete`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FollowUp {
    UnicastComplete { at: SimTime, bearer: BearerId },
    McchActivation { at: SimTime, bearer: BearerId },
}

impl FollowUp {
    pub fn at(&self) -> SimTime {
        match self {
            FollowUp::UnicastComplete { at, .. } | FollowUp::McchActivation { at, .. } => *at,
        }
    }

    pub fn bearer(&self) -> BearerId {
        match self {
            FollowUp::UnicastComplete { bearer, .. } | FollowUp::McchActivation { bearer, .. } => *bearer,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CallStart {
    pub admitted: bool,
    pub follow_ups: Vec<FollowUp>,
}

#[derive(Debug, Clone)]
pub struct UliOutcome {
    pub decisions: Vec<SwitchDecision>,
    pub follow_ups: Vec<FollowUp>,
}

#[derive(Debug, Clone)]
pub struct LossOutcome {
    pub decision: FallbackDecision,
    pub follow_ups: Vec<FollowUp>,
}

#[derive(Debug, Clone)]
pub struct HandoverOutcome {
    pub follow_ups: Vec<FollowUp>,
    pub gaps: Vec<ContinuityGap>,
}

#[derive(Debug, Clone)]
struct CallState {
    area: AreaId,
    active: bool,
    admitted: bool,
    mbms_bearer: Option<BearerId>,
    /// Cells waiting to flip to multicast, each with its MCCH gate instant.
    pending_mbms: BTreeMap<CellId, SimTime>,
    /// Cells switching down, with the members whose unicast bearers are
    /// still establishing.
    pending_down: BTreeMap<CellId, BTreeSet<UeId>>,
}

#[derive(Debug, Clone, Copy)]
struct PendingUnicast {
    group: GroupId,
    ue: UeId,
    cell: CellId,
}

/// Orchestrates calls over the network registry, bearer table and load
/// ledger. Single-threaded; drive it from one event loop in timestamp
/// order.
#[derive(Debug, Clone)]
pub struct CallManager {
    network: Network,
    bearers: BearerTable,
    ledger: LoadLedger,
    model: ResourceModel,
    budget: LatencyBudget,
    schedule: McchSchedule,
    policy: Policy,
    bearer_option: BearerOption,
    calls: BTreeMap<GroupId, CallState>,
    floors: BTreeMap<GroupId, FloorControl>,
    pending_unicast: BTreeMap<BearerId, PendingUnicast>,
    pending_paths: BTreeSet<(GroupId, UeId)>,
    decisions: Vec<DecisionRecord>,
    continuity_gaps: Vec<ContinuityGap>,
    uplink_records: Vec<UplinkRecord>,
    core_messages: u64,
}

impl CallManager {
    pub fn new(
        network: Network,
        model: ResourceModel,
        budget: LatencyBudget,
        schedule: McchSchedule,
        policy: Policy,
        bearer_option: BearerOption,
        unicast_preestablished: bool,
    ) -> Result<Self, GcseError> {
        policy.validate()?;
        let mut ledger = LoadLedger::new();
        for cell in network.cells() {
            ledger.register_cell(cell);
        }
        Ok(CallManager {
            network,
            bearers: BearerTable::new(unicast_preestablished),
            ledger,
            model,
            budget,
            schedule,
            policy,
            bearer_option,
            calls: BTreeMap::new(),
            floors: BTreeMap::new(),
            pending_unicast: BTreeMap::new(),
            pending_paths: BTreeSet::new(),
            decisions: Vec::new(),
            continuity_gaps: Vec::new(),
            uplink_records: Vec::new(),
            core_messages: 0,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn ledger(&self) -> &LoadLedger {
        &self.ledger
    }

    pub fn bearers(&self) -> &BearerTable {
        &self.bearers
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn schedule(&self) -> &McchSchedule {
        &self.schedule
    }

    pub fn budget(&self) -> &LatencyBudget {
        &self.budget
    }

    pub fn model(&self) -> &ResourceModel {
        &self.model
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.decisions
    }

    pub fn continuity_gaps(&self) -> &[ContinuityGap] {
        &self.continuity_gaps
    }

    pub fn uplink_records(&self) -> &[UplinkRecord] {
        &self.uplink_records
    }

    pub fn core_messages(&self) -> u64 {
        self.core_messages
    }

    pub fn call_active(&self, group: GroupId) -> bool {
        self.calls.get(&group).map(|c| c.active).unwrap_or(false)
    }

    pub fn call_admitted(&self, group: GroupId) -> bool {
        self.calls.get(&group).map(|c| c.admitted).unwrap_or(false)
    }

    /// True while any switch or path establishment is in flight for the
    /// group; optimality claims apply only outside such windows.
    pub fn has_pending_work(&self, group: GroupId) -> bool {
        let pending_call = self
            .calls
            .get(&group)
            .map(|c| !c.pending_mbms.is_empty() || !c.pending_down.is_empty())
            .unwrap_or(false);
        pending_call || self.pending_paths.iter().any(|(g, _)| *g == group)
    }

    /// Synthesizes the gateway's per-cell count report from current truth.
    pub fn build_uli_report(&self, group: GroupId) -> Result<UliReport, GcseError> {
        Ok(UliReport {
            group_id: group,
            counts: self.network.member_counts(group)?,
            source: self.policy.uli_source,
        })
    }

    // -- internal helpers ---------------------------------------------------

    fn call(&self, group: GroupId) -> Result<&CallState, GcseError> {
        self.calls.get(&group).ok_or(GcseError::NoActiveCall(group))
    }

    fn derive_area(&self, group: GroupId) -> Result<AreaId, GcseError> {
        let g = self.network.group(group)?;
        for ue in &g.members {
            let cell = self.network.ue(*ue)?.serving_cell;
            if let Some(area) = self.network.area_of_cell(cell) {
                return Ok(area);
            }
        }
        let cell = g
            .members
            .iter()
            .next()
            .map(|ue| self.network.ue(*ue).map(|u| u.serving_cell))
            .transpose()?
            .unwrap_or(CellId::new(0));
        Err(GcseError::Bearer(BearerError::AreaUnconfigured(cell)))
    }

    /// Single-cell view used to cost per-cell dynamic bearers: one cell
    /// transmitting alone earns no combining gain.
    fn sc_view(&self, area: AreaId, cell: CellId) -> MbmsArea {
        MbmsArea {
            area_id: area,
            cells: [cell].into_iter().collect(),
            sync_mode: SyncMode::SingleCell,
            sfn_cluster_size: 1,
        }
    }

    fn member_ids_in_cell(&self, group: GroupId, cell: CellId) -> Result<Vec<UeId>, GcseError> {
        Ok(self.network.members_in_cell(group, cell)?.iter().map(|u| u.ue_id).collect())
    }

    fn unicast_units_for(&self, group: GroupId, ue: UeId) -> Result<u32, GcseError> {
        let profile = self.network.group(group)?.profile;
        let u = self.network.ue(ue)?;
        Ok(unicast_cost(&profile, u, &self.model)?)
    }

    /// Cost of a member-dimensioned per-cell multicast bearer.
    fn dynamic_mc_units(&self, group: GroupId, cell: CellId) -> Result<u32, GcseError> {
        let g = self.network.group(group)?;
        let area = self.call(group).map(|c| c.area).or_else(|_| self.derive_area(group))?;
        let members = self.network.members_in_cell(group, cell)?;
        Ok(multicast_cost(&g.profile, &members, &self.sc_view(area, cell), &self.model)?)
    }

    /// Cost of an area bearer dimensioned for the cell edge, membership
    /// ignored; what a pre-established reservation pays.
    fn static_mc_units(&self, group: GroupId, area: AreaId) -> Result<u32, GcseError> {
        let g = self.network.group(group)?;
        let area = self.network.area(area)?;
        Ok(multicast_cost(&g.profile, &[], area, &self.model)?)
    }

    fn log(&mut self, at: SimTime, group: GroupId, cell: CellId, decision: &'static str, trigger: &'static str) {
        let member_count = self
            .network
            .member_counts(group)
            .ok()
            .and_then(|m| m.get(&cell).copied())
            .unwrap_or(0);
        self.decisions.push(DecisionRecord {
            timestamp: at,
            group_id: group,
            cell_id: cell,
            decision,
            trigger,
            member_count,
        });
    }

    /// Admission with preemption fallout: any victim loses its whole call.
    fn admit_with_preemption(
        &mut self,
        group: GroupId,
        cell: CellId,
        pool: PoolKind,
        units: u32,
        now: SimTime,
    ) -> Result<bool, GcseError> {
        let priority = self.network.group(group)?.priority;
        match admit_units(group, priority, cell, pool, units, &mut self.ledger)? {
            AdmitOutcome::Admitted { preempted, .. } => {
                for victim in preempted {
                    self.tear_down_call(victim, now)?;
                    self.log(now, victim, cell, "preempted", "admission");
                }
                Ok(true)
            }
            AdmitOutcome::Rejected(_) => Ok(false),
        }
    }

    /// Releases every bearer, commitment and reception path of a call.
    fn tear_down_call(&mut self, group: GroupId, now: SimTime) -> Result<(), GcseError> {
        let cells: Vec<CellId> = self
            .network
            .group(group)
            .map(|g| g.per_cell_transport.keys().copied().collect())
            .unwrap_or_default();
        for cell in cells {
            let transport = self.network.group(group)?.per_cell_transport.get(&cell).cloned().unwrap_or_default();
            for (&ue, &bearer) in &transport.unicast_bearers {
                if self.bearers.bearer(bearer).map(|b| b.state != BearerState::Idle).unwrap_or(false) {
                    let state = self.bearers.bearer(bearer)?.state;
                    if state == BearerState::Activating {
                        self.bearers.complete_unicast(bearer, now)?;
                    }
                    self.bearers.release(bearer, now)?;
                }
                self.pending_unicast.remove(&bearer);
                self.pending_paths.remove(&(group, ue));
                if let Ok(u) = self.network.ue_mut(ue) {
                    u.rx_mode.remove(&group);
                }
            }
            self.ledger.release_group_in_cell(cell, group);
        }
        if let Some(state) = self.calls.get(&group) {
            if let Some(bearer) = state.mbms_bearer {
                let bstate = self.bearers.bearer(bearer).map(|b| b.state);
                match bstate {
                    Ok(BearerState::Activating) => {
                        self.bearers.complete_mbms(bearer, now)?;
                        self.bearers.release(bearer, now)?;
                    }
                    Ok(BearerState::PreEstablished) => {
                        self.bearers.activate_preestablished(bearer, now)?;
                        self.bearers.release(bearer, now)?;
                    }
                    Ok(BearerState::Active) => self.bearers.release(bearer, now)?,
                    _ => {}
                }
            }
        }
        // Ledger rows for cells that had commitments but no transport entry
        // yet (pre-arranged reservations).
        let all_cells: Vec<CellId> = self.network.cells().map(|c| c.cell_id).collect();
        for cell in all_cells {
            self.ledger.release_group_in_cell(cell, group);
        }
        for ue in self.network.group(group)?.members.clone() {
            if let Ok(u) = self.network.ue_mut(ue) {
                u.rx_mode.remove(&group);
            }
            self.pending_paths.remove(&(group, ue));
        }
        self.pending_unicast.retain(|_, p| p.group != group);
        self.network.group_mut(group)?.per_cell_transport.clear();
        if let Some(state) = self.calls.get_mut(&group) {
            state.active = false;
            state.admitted = false;
            state.mbms_bearer = None;
            state.pending_mbms.clear();
            state.pending_down.clear();
        }
        self.floors.remove(&group);
        Ok(())
    }

    /// Starts establishing a unicast downlink for one member, committing
    /// units in the member's serving cell.
    fn establish_member_unicast(
        &mut self,
        group: GroupId,
        ue: UeId,
        now: SimTime,
        follow_ups: &mut Vec<FollowUp>,
    ) -> Result<bool, GcseError> {
        let cell = self.network.ue(ue)?.serving_cell;
        let existing = self
            .network
            .group(group)?
            .per_cell_transport
            .get(&cell)
            .map(|t| t.unicast_bearers.contains_key(&ue))
            .unwrap_or(false);
        if existing || self.pending_paths.contains(&(group, ue)) {
            return Ok(true);
        }
        let units = self.unicast_units_for(group, ue)?;
        if !self.admit_with_preemption(group, cell, PoolKind::Unicast, units, now)? {
            return Ok(false);
        }
        let g = self.network.group(group)?.clone();
        let est = self.bearers.establish_unicast_bearer(ue, &g, now, &self.budget)?;
        let transport = self
            .network
            .group_mut(group)?
            .per_cell_transport
            .entry(cell)
            .or_default();
        transport.unicast_bearers.insert(ue, est.bearer_id);
        transport.unicast_units.insert(ue, units);
        if self.bearers.bearer(est.bearer_id)?.is_active() {
            self.network.ue_mut(ue)?.rx_mode.insert(group, RxMode::UnicastRx);
        } else {
            self.pending_paths.insert((group, ue));
            self.pending_unicast.insert(est.bearer_id, PendingUnicast { group, ue, cell });
            follow_ups.push(FollowUp::UnicastComplete {
                at: est.active_at,
                bearer: est.bearer_id,
            });
        }
        Ok(true)
    }

    /// Removes a member's unicast downlink in a cell, returning its units.
    fn release_member_unicast(&mut self, group: GroupId, ue: UeId, cell: CellId, now: SimTime) -> Result<(), GcseError> {
        let (bearer, units) = {
            let g = self.network.group(group)?;
            let Some(t) = g.per_cell_transport.get(&cell) else {
                return Ok(());
            };
            let Some(b) = t.unicast_bearers.get(&ue) else {
                return Ok(());
            };
            (*b, t.unicast_units.get(&ue).copied().unwrap_or(0))
        };
        let state = self.bearers.bearer(bearer)?.state;
        if state == BearerState::Activating {
            self.bearers.complete_unicast(bearer, now)?;
        }
        if self.bearers.bearer(bearer)?.state == BearerState::Active {
            self.bearers.release(bearer, now)?;
        }
        self.pending_unicast.remove(&bearer);
        self.pending_paths.remove(&(group, ue));
        self.ledger.release(cell, group, PoolKind::Unicast, units)?;
        let transport = self
            .network
            .group_mut(group)?
            .per_cell_transport
            .get_mut(&cell)
            .expect("checked above");
        transport.unicast_bearers.remove(&ue);
        transport.unicast_units.remove(&ue);
        let empty = *transport == TransportState::default();
        if empty {
            self.network.group_mut(group)?.per_cell_transport.remove(&cell);
        }
        if self.network.ue(ue)?.rx_mode.get(&group) == Some(&RxMode::UnicastRx) {
            self.network.ue_mut(ue)?.rx_mode.remove(&group);
        }
        Ok(())
    }

    /// Drops a cell's multicast transport and, when no other cell still
    /// uses it, the area bearer itself.
    fn release_multicast_in_cell(&mut self, group: GroupId, cell: CellId, now: SimTime) -> Result<(), GcseError> {
        let units = {
            let g = self.network.group(group)?;
            let Some(t) = g.per_cell_transport.get(&cell) else {
                return Ok(());
            };
            if t.multicast_bearer.is_none() {
                return Ok(());
            }
            t.multicast_units
        };
        self.ledger.release(cell, group, PoolKind::Multicast, units)?;
        let members = self.member_ids_in_cell(group, cell)?;
        for ue in members {
            if self.network.ue(ue)?.rx_mode.get(&group) == Some(&RxMode::MulticastRx) {
                self.network.ue_mut(ue)?.rx_mode.remove(&group);
            }
        }
        {
            let transport = self
                .network
                .group_mut(group)?
                .per_cell_transport
                .get_mut(&cell)
                .expect("checked above");
            transport.multicast_bearer = None;
            transport.multicast_units = 0;
            if *transport == TransportState::default() {
                self.network.group_mut(group)?.per_cell_transport.remove(&cell);
            }
        }
        let still_used = self
            .network
            .group(group)?
            .per_cell_transport
            .values()
            .any(|t| t.multicast_bearer.is_some());
        let pending_elsewhere = self.calls.get(&group).map(|c| !c.pending_mbms.is_empty()).unwrap_or(false);
        if !still_used && !pending_elsewhere {
            if let Some(state) = self.calls.get_mut(&group) {
                if let Some(bearer) = state.mbms_bearer.take() {
                    if self.bearers.bearer(bearer)?.is_active() {
                        self.bearers.release(bearer, now)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Adjusts a member-dimensioned multicast commitment after membership
    /// changed. If more units are needed and even preemption cannot find
    /// them, the cell abandons multicast and its members move to unicast.
    fn redimension_multicast(
        &mut self,
        group: GroupId,
        cell: CellId,
        now: SimTime,
        follow_ups: &mut Vec<FollowUp>,
    ) -> Result<(), GcseError> {
        let current = {
            let g = self.network.group(group)?;
            match g.per_cell_transport.get(&cell) {
                Some(t) if t.multicast_bearer.is_some() => t.multicast_units,
                _ => return Ok(()),
            }
        };
        let needed = self.dynamic_mc_units(group, cell)?;
        if needed > current {
            if !self.admit_with_preemption(group, cell, PoolKind::Multicast, needed - current, now)? {
                self.begin_switch_down(group, cell, now, follow_ups)?;
                self.log(now, group, cell, "to_unicast", "admission");
                return Ok(());
            }
        } else if needed < current {
            self.ledger.release(cell, group, PoolKind::Multicast, current - needed)?;
        }
        if let Some(t) = self.network.group_mut(group)?.per_cell_transport.get_mut(&cell) {
            t.multicast_units = needed;
        }
        Ok(())
    }

    /// Starts moving a multicast cell to unicast: every multicast receiver
    /// gets a unicast bearer; the multicast side is released once the last
    /// of them has flipped.
    fn begin_switch_down(
        &mut self,
        group: GroupId,
        cell: CellId,
        now: SimTime,
        follow_ups: &mut Vec<FollowUp>,
    ) -> Result<(), GcseError> {
        let members = self.member_ids_in_cell(group, cell)?;
        let mut waiting = BTreeSet::new();
        for ue in members {
            if self.network.ue(ue)?.rx_mode.get(&group) != Some(&RxMode::MulticastRx) {
                continue;
            }
            if self.establish_member_unicast(group, ue, now, follow_ups)? {
                if self.pending_paths.contains(&(group, ue)) {
                    waiting.insert(ue);
                } else {
                    // Pre-established unicast flipped instantly.
                    self.network.ue_mut(ue)?.rx_mode.insert(group, RxMode::UnicastRx);
                }
            }
        }
        if waiting.is_empty() {
            self.release_multicast_in_cell(group, cell, now)?;
        } else if let Some(state) = self.calls.get_mut(&group) {
            state.pending_down.insert(cell, waiting);
        }
        Ok(())
    }

    /// Starts moving a unicast cell to multicast via the area bearer,
    /// committing member-dimensioned units now and flipping receivers at
    /// the MCCH gate. Members keep unicast reception until then.
    fn begin_switch_up(
        &mut self,
        group: GroupId,
        cell: CellId,
        now: SimTime,
        follow_ups: &mut Vec<FollowUp>,
    ) -> Result<bool, GcseError> {
        let units = self.dynamic_mc_units(group, cell)?;
        if !self.admit_with_preemption(group, cell, PoolKind::Multicast, units, now)? {
            return Ok(false);
        }
        let area_id = self.call(group)?.area;
        let g = self.network.group(group)?.clone();
        let area = self.network.area(area_id)?.clone();
        let est = self
            .bearers
            .establish_mbms_bearer(&g, &area, ActivationTiming::OnDemand, now, &self.budget, &self.schedule)?;
        let gate = match self.bearers.bearer(est.bearer_id)?.state {
            BearerState::Active => self.schedule.next_boundary(now),
            _ => est.active_at.unwrap_or_else(|| self.schedule.next_boundary(now)),
        };
        let state = self.calls.get_mut(&group).expect("call checked");
        state.mbms_bearer = Some(est.bearer_id);
        state.pending_mbms.insert(cell, gate);
        // Record the reservation on the transport entry now so audits see
        // where the committed units live; the bearer field stays unset
        // until the flip.
        self.network
            .group_mut(group)?
            .per_cell_transport
            .entry(cell)
            .or_default()
            .multicast_units = units;
        follow_ups.push(FollowUp::McchActivation {
            at: gate,
            bearer: est.bearer_id,
        });
        Ok(true)
    }

    /// Flips one cell to multicast reception at its gate instant.
    fn complete_switch_up(&mut self, group: GroupId, cell: CellId, now: SimTime) -> Result<(), GcseError> {
        let members = self.member_ids_in_cell(group, cell)?;
        if self.policy.kind == PolicyKind::DynamicActivation && members.is_empty() {
            // Everyone left while the switch was in flight; honour the
            // zero-member rule instead of flipping.
            let units = self
                .network
                .group(group)?
                .per_cell_transport
                .get(&cell)
                .map(|t| t.multicast_units)
                .unwrap_or(0);
            self.ledger.release(cell, group, PoolKind::Multicast, units)?;
            if let Some(t) = self.network.group_mut(group)?.per_cell_transport.get_mut(&cell) {
                t.multicast_units = 0;
                if *t == TransportState::default() {
                    self.network.group_mut(group)?.per_cell_transport.remove(&cell);
                }
            }
            self.log(now, group, cell, "multicast_released", "zero_members");
            self.maybe_release_idle_mbms(group, now)?;
            return Ok(());
        }
        let bearer = self.call(group)?.mbms_bearer.ok_or(GcseError::NoActiveCall(group))?;
        if self.policy.kind == PolicyKind::DynamicActivation {
            // Membership may have drifted since the decision; settle the
            // commitment at flip time.
            let needed = self.dynamic_mc_units(group, cell)?;
            let current = self
                .network
                .group(group)?
                .per_cell_transport
                .get(&cell)
                .map(|t| t.multicast_units)
                .unwrap_or(0);
            if needed > current {
                if !self.admit_with_preemption(group, cell, PoolKind::Multicast, needed - current, now)? {
                    // Cannot honour the bigger bearer; stay on unicast.
                    self.ledger.release(cell, group, PoolKind::Multicast, current)?;
                    if let Some(t) = self.network.group_mut(group)?.per_cell_transport.get_mut(&cell) {
                        t.multicast_units = 0;
                    }
                    self.log(now, group, cell, "to_unicast", "admission");
                    self.maybe_release_idle_mbms(group, now)?;
                    return Ok(());
                }
                if let Some(t) = self.network.group_mut(group)?.per_cell_transport.get_mut(&cell) {
                    t.multicast_units = needed;
                }
            } else if needed < current {
                self.ledger.release(cell, group, PoolKind::Multicast, current - needed)?;
                if let Some(t) = self.network.group_mut(group)?.per_cell_transport.get_mut(&cell) {
                    t.multicast_units = needed;
                }
            }
        }
        for ue in members {
            let had_unicast = self
                .network
                .group(group)?
                .per_cell_transport
                .get(&cell)
                .map(|t| t.unicast_bearers.contains_key(&ue))
                .unwrap_or(false);
            if had_unicast {
                self.release_member_unicast(group, ue, cell, now)?;
            }
            self.pending_paths.remove(&(group, ue));
            self.network.ue_mut(ue)?.rx_mode.insert(group, RxMode::MulticastRx);
        }
        self.network
            .group_mut(group)?
            .per_cell_transport
            .entry(cell)
            .or_default()
            .multicast_bearer = Some(bearer);
        Ok(())
    }

    /// Releases the area bearer when no cell uses or awaits it.
    fn maybe_release_idle_mbms(&mut self, group: GroupId, now: SimTime) -> Result<(), GcseError> {
        let in_use = self
            .network
            .group(group)?
            .per_cell_transport
            .values()
            .any(|t| t.multicast_bearer.is_some() || t.multicast_units > 0);
        let pending = self.calls.get(&group).map(|c| !c.pending_mbms.is_empty()).unwrap_or(false);
        if in_use || pending {
            return Ok(());
        }
        if let Some(state) = self.calls.get_mut(&group) {
            if let Some(bearer) = state.mbms_bearer.take() {
                match self.bearers.bearer(bearer)?.state {
                    BearerState::Active => self.bearers.release(bearer, now)?,
                    BearerState::Activating => {
                        self.bearers.complete_mbms(bearer, now)?;
                        self.bearers.release(bearer, now)?;
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Re-applies the dynamic transport rule to one cell after its
    /// membership changed.
    fn reevaluate_cell(&mut self, group: GroupId, cell: CellId, now: SimTime, trigger: &'static str) -> Result<Vec<FollowUp>, GcseError> {
        let mut follow_ups = Vec::new();
        if self.policy.kind != PolicyKind::DynamicActivation || !self.call_active(group) {
            return Ok(follow_ups);
        }
        let members = self.member_ids_in_cell(group, cell)?;
        let count = members.len() as u32;
        let transport = self.network.group(group)?.per_cell_transport.get(&cell).cloned().unwrap_or_default();
        let multicast_now = transport.multicast_bearer.is_some();
        let switching_up = self.calls.get(&group).map(|c| c.pending_mbms.contains_key(&cell)).unwrap_or(false);

        if count == 0 {
            if multicast_now {
                self.release_multicast_in_cell(group, cell, now)?;
                self.log(now, group, cell, "multicast_released", "zero_members");
            }
            return Ok(follow_ups);
        }

        // Safety net: every member present must have or be acquiring a path.
        for ue in &members {
            let has_path = self.network.ue(*ue)?.rx_mode.contains_key(&group);
            if !has_path && !self.pending_paths.contains(&(group, *ue)) && !switching_up {
                self.establish_member_unicast(group, *ue, now, &mut follow_ups)?;
            }
        }

        let n_star = self.cell_crossover(group, cell)?;
        if multicast_now {
            if count < n_star.saturating_sub(self.policy.switch_hysteresis) {
                self.begin_switch_down(group, cell, now, &mut follow_ups)?;
                self.log(now, group, cell, "to_unicast", trigger);
            } else {
                self.redimension_multicast(group, cell, now, &mut follow_ups)?;
            }
        } else if !switching_up && count >= n_star {
            if self.begin_switch_up(group, cell, now, &mut follow_ups)? {
                self.log(now, group, cell, "to_multicast", trigger);
            }
        }
        Ok(follow_ups)
    }

    /// Crossover threshold for the cell's current membership.
    pub fn cell_crossover(&self, group: GroupId, cell: CellId) -> Result<u32, GcseError> {
        let g = self.network.group(group)?;
        let area = self.call(group).map(|c| c.area).or_else(|_| self.derive_area(group))?;
        let members = self.network.members_in_cell(group, cell)?;
        if members.is_empty() {
            return Ok(u32::MAX);
        }
        Ok(crate::radio::crossover_threshold(
            &g.profile,
            &members,
            &self.sc_view(area, cell),
            &self.model,
        )?)
    }

    // -- lifecycle ----------------------------------------------------------

    /// Reserves pre-established MBMS bearers for every group, dimensioned
    /// for the cell edge across their whole areas. Returns the groups whose
    /// reservation could not be admitted.
    pub fn prearrange_bearers(&mut self, now: SimTime) -> Result<Vec<GroupId>, GcseError> {
        let groups: Vec<GroupId> = self.network.groups().map(|g| g.group_id).collect();
        let mut rejected = Vec::new();
        for group in groups {
            let area_id = self.derive_area(group)?;
            let units = self.static_mc_units(group, area_id)?;
            let cells: Vec<CellId> = self.network.area(area_id)?.cells.iter().copied().collect();
            let mut done: Vec<CellId> = Vec::new();
            let mut ok = true;
            for cell in &cells {
                if self.admit_with_preemption(group, *cell, PoolKind::Multicast, units, now)? {
                    done.push(*cell);
                } else {
                    ok = false;
                    self.log(now, group, *cell, "rejected", "admission");
                    break;
                }
            }
            if !ok {
                for cell in done {
                    self.ledger.release(cell, group, PoolKind::Multicast, units)?;
                }
                rejected.push(group);
                continue;
            }
            let g = self.network.group(group)?.clone();
            let area = self.network.area(area_id)?.clone();
            self.bearers
                .establish_mbms_bearer(&g, &area, ActivationTiming::PreArranged, now, &self.budget, &self.schedule)?;
        }
        Ok(rejected)
    }

    /// Starts a group call under the configured policy.
    ///
    /// Static activation raises multicast over the whole area, using the
    /// pre-established bearer when the scenario provides one and creating
    /// the bearer on demand otherwise; receivers flip at the MCCH gate.
    /// Dynamic activation gives every member a unicast bearer and waits for
    /// counting reports. Admission is all-or-nothing per call: on a
    /// rejection the call's own commitments are rolled back.
    pub fn start_group_call(&mut self, group: GroupId, now: SimTime) -> Result<CallStart, GcseError> {
        let area_id = self.derive_area(group)?;
        self.calls.insert(
            group,
            CallState {
                area: area_id,
                active: true,
                admitted: false,
                mbms_bearer: None,
                pending_mbms: BTreeMap::new(),
                pending_down: BTreeMap::new(),
            },
        );
        let mut follow_ups = Vec::new();
        let outcome = match self.policy.kind {
            PolicyKind::StaticActivation => self.start_static(group, area_id, now, &mut follow_ups),
            PolicyKind::DynamicActivation => self.start_dynamic(group, now, &mut follow_ups),
        };
        match outcome {
            Ok(true) => {
                self.calls.get_mut(&group).expect("inserted above").admitted = true;
                Ok(CallStart {
                    admitted: true,
                    follow_ups,
                })
            }
            Ok(false) => {
                self.tear_down_call(group, now)?;
                Ok(CallStart {
                    admitted: false,
                    follow_ups: Vec::new(),
                })
            }
            Err(e) => {
                self.tear_down_call(group, now)?;
                Err(e)
            }
        }
    }

    fn start_static(
        &mut self,
        group: GroupId,
        area_id: AreaId,
        now: SimTime,
        follow_ups: &mut Vec<FollowUp>,
    ) -> Result<bool, GcseError> {
        let units = self.static_mc_units(group, area_id)?;
        let cells: Vec<CellId> = self.network.area(area_id)?.cells.iter().copied().collect();
        let bearer = match self.bearer_option {
            BearerOption::PreEstablished => {
                // Units were reserved at pre-arrangement time.
                match self.bearers.mbms_bearer(group, area_id) {
                    Some(b) if b.state == BearerState::PreEstablished => b.bearer_id,
                    _ => return Err(GcseError::NoPreestablishedBearer(group)),
                }
            }
            BearerOption::DynamicBearer => {
                let mut done = Vec::new();
                for cell in &cells {
                    if self.admit_with_preemption(group, *cell, PoolKind::Multicast, units, now)? {
                        done.push(*cell);
                    } else {
                        self.log(now, group, *cell, "rejected", "admission");
                        for d in done {
                            self.ledger.release(d, group, PoolKind::Multicast, units)?;
                        }
                        return Ok(false);
                    }
                }
                let g = self.network.group(group)?.clone();
                let area = self.network.area(area_id)?.clone();
                let est = self
                    .bearers
                    .establish_mbms_bearer(&g, &area, ActivationTiming::OnDemand, now, &self.budget, &self.schedule)?;
                est.bearer_id
            }
        };
        let gate = match self.bearers.bearer(bearer)?.state {
            BearerState::PreEstablished => self.schedule.next_boundary(now),
            _ => self
                .bearers
                .bearer(bearer)?
                .scheduled_active
                .unwrap_or_else(|| self.schedule.next_boundary(now)),
        };
        let state = self.calls.get_mut(&group).expect("call inserted");
        state.mbms_bearer = Some(bearer);
        for cell in &cells {
            state.pending_mbms.insert(*cell, gate);
        }
        for cell in &cells {
            self.network
                .group_mut(group)?
                .per_cell_transport
                .entry(*cell)
                .or_default()
                .multicast_units = units;
        }
        follow_ups.push(FollowUp::McchActivation { at: gate, bearer });
        self.log(now, group, cells[0], "multicast_start", "call_start");

        // Members outside the area still need service.
        let strays: Vec<UeId> = {
            let g = self.network.group(group)?;
            let area_cells: BTreeSet<CellId> = cells.iter().copied().collect();
            g.members
                .iter()
                .filter(|ue| {
                    self.network
                        .ue(**ue)
                        .map(|u| !area_cells.contains(&u.serving_cell))
                        .unwrap_or(false)
                })
                .copied()
                .collect()
        };
        for ue in strays {
            if !self.establish_member_unicast(group, ue, now, follow_ups)? {
                return Ok(false);
            }
            let cell = self.network.ue(ue)?.serving_cell;
            self.log(now, group, cell, "fallback_unicast", "call_start");
        }
        Ok(true)
    }

    fn start_dynamic(&mut self, group: GroupId, now: SimTime, follow_ups: &mut Vec<FollowUp>) -> Result<bool, GcseError> {
        let counts = self.network.member_counts(group)?;
        for cell in counts.keys() {
            self.log(now, group, *cell, "unicast_start", "call_start");
        }
        let members: Vec<UeId> = self.network.group(group)?.members.iter().copied().collect();
        for ue in members {
            if !self.establish_member_unicast(group, ue, now, follow_ups)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Feeds a bearer completion back into the state machine at its
    /// scheduled instant. Stale completions for bearers that were torn down
    /// in the meantime are ignored.
    pub fn bearer_complete(&mut self, bearer: BearerId, now: SimTime) -> Result<Vec<FollowUp>, GcseError> {
        let mut follow_ups = Vec::new();
        if let Some(pending) = self.pending_unicast.remove(&bearer) {
            if self.bearers.bearer(bearer)?.state == BearerState::Activating {
                self.bearers.complete_unicast(bearer, now)?;
            }
            self.pending_paths.remove(&(pending.group, pending.ue));
            if self.call_active(pending.group) && self.network.ue(pending.ue)?.memberships.contains(&pending.group) {
                self.network
                    .ue_mut(pending.ue)?
                    .rx_mode
                    .insert(pending.group, RxMode::UnicastRx);
                // Part of a switch down?
                let finished_cell = {
                    let state = self.calls.get_mut(&pending.group);
                    state.and_then(|s| {
                        if let Some(waiting) = s.pending_down.get_mut(&pending.cell) {
                            waiting.remove(&pending.ue);
                            if waiting.is_empty() {
                                s.pending_down.remove(&pending.cell);
                                return Some(pending.cell);
                            }
                        }
                        None
                    })
                };
                if let Some(cell) = finished_cell {
                    self.release_multicast_in_cell(pending.group, cell, now)?;
                }
            }
            return Ok(follow_ups);
        }

        // MBMS activation: flip every cell whose gate has come.
        let owner = self.calls.iter().find_map(|(g, s)| {
            if s.mbms_bearer == Some(bearer) && s.active {
                Some(*g)
            } else {
                None
            }
        });
        let Some(group) = owner else {
            return Ok(follow_ups);
        };
        match self.bearers.bearer(bearer)?.state {
            BearerState::PreEstablished => self.bearers.activate_preestablished(bearer, now)?,
            BearerState::Activating => self.bearers.complete_mbms(bearer, now)?,
            _ => {}
        }
        let due: Vec<CellId> = self
            .calls
            .get(&group)
            .map(|s| {
                s.pending_mbms
                    .iter()
                    .filter(|(_, gate)| **gate <= now)
                    .map(|(c, _)| *c)
                    .collect()
            })
            .unwrap_or_default();
        for cell in due {
            if let Some(state) = self.calls.get_mut(&group) {
                state.pending_mbms.remove(&cell);
            }
            self.complete_switch_up(group, cell, now)?;
        }
        let _ = &mut follow_ups;
        Ok(follow_ups)
    }

    /// Applies a counting report under the dynamic policy. The static
    /// policy never consults counts and returns an empty decision list.
    pub fn handle_uli(&mut self, report: &UliReport, now: SimTime) -> Result<UliOutcome, GcseError> {
        if self.policy.kind == PolicyKind::StaticActivation {
            return Ok(UliOutcome {
                decisions: Vec::new(),
                follow_ups: Vec::new(),
            });
        }
        let group = report.group_id;
        let g = self.network.group(group)?;
        let actual = g.members.len() as u32;
        let counted: u32 = report.counts.values().sum();
        if counted > actual {
            return Err(GcseError::InvalidReport {
                group,
                counted,
                actual,
            });
        }
        if report.source == UliSource::PgwUli {
            self.core_messages += 1;
        }
        if !self.call_active(group) {
            return Ok(UliOutcome {
                decisions: Vec::new(),
                follow_ups: Vec::new(),
            });
        }
        let mut cells: BTreeSet<CellId> = report.counts.keys().copied().collect();
        cells.extend(self.network.group(group)?.per_cell_transport.keys().copied());
        let mut decisions = Vec::new();
        let mut follow_ups = Vec::new();
        for cell in cells {
            let count = report.counts.get(&cell).copied().unwrap_or(0);
            let transport = self.network.group(group)?.per_cell_transport.get(&cell).cloned().unwrap_or_default();
            let multicast_now = transport.multicast_bearer.is_some();
            let switching_up = self.calls.get(&group).map(|c| c.pending_mbms.contains_key(&cell)).unwrap_or(false);
            let n_star = self.cell_crossover(group, cell)?;

            let action = if count == 0 {
                if multicast_now {
                    SwitchAction::ToUnicast
                } else {
                    SwitchAction::NoChange
                }
            } else if !multicast_now && !switching_up && count >= n_star {
                SwitchAction::ToMulticast
            } else if multicast_now && count < n_star.saturating_sub(self.policy.switch_hysteresis) {
                SwitchAction::ToUnicast
            } else {
                SwitchAction::NoChange
            };

            match action {
                SwitchAction::ToMulticast => {
                    if self.begin_switch_up(group, cell, now, &mut follow_ups)? {
                        self.log(now, group, cell, "to_multicast", "uli_count");
                        decisions.push(SwitchDecision {
                            cell_id: cell,
                            action,
                        });
                    } else {
                        decisions.push(SwitchDecision {
                            cell_id: cell,
                            action: SwitchAction::NoChange,
                        });
                    }
                }
                SwitchAction::ToUnicast => {
                    if count == 0 {
                        self.release_multicast_in_cell(group, cell, now)?;
                        self.log(now, group, cell, "multicast_released", "zero_members");
                    } else {
                        self.begin_switch_down(group, cell, now, &mut follow_ups)?;
                        self.log(now, group, cell, "to_unicast", "uli_count");
                    }
                    decisions.push(SwitchDecision {
                        cell_id: cell,
                        action,
                    });
                }
                SwitchAction::NoChange => {
                    if multicast_now {
                        self.redimension_multicast(group, cell, now, &mut follow_ups)?;
                    }
                    decisions.push(SwitchDecision {
                        cell_id: cell,
                        action,
                    });
                }
            }
        }
        Ok(UliOutcome {
            decisions,
            follow_ups,
        })
    }

    /// Loss-triggered service continuity: a multicast receiver whose loss
    /// exceeds the threshold moves to its own unicast bearer; everyone else
    /// stays on the shared transport.
    pub fn handle_loss_report(
        &mut self,
        ue: UeId,
        group: GroupId,
        measured_loss: f64,
        now: SimTime,
    ) -> Result<LossOutcome, GcseError> {
        if self.network.ue(ue)?.rx_mode.get(&group) != Some(&RxMode::MulticastRx) {
            return Err(GcseError::NotMulticastReceiver { ue, group });
        }
        self.network.ue_mut(ue)?.loss_estimate.insert(group, measured_loss);
        if measured_loss <= self.policy.loss_threshold {
            return Ok(LossOutcome {
                decision: FallbackDecision::NoChange,
                follow_ups: Vec::new(),
            });
        }
        let cell = self.network.ue(ue)?.serving_cell;
        let mut follow_ups = Vec::new();
        if !self.establish_member_unicast(group, ue, now, &mut follow_ups)? {
            // No room for the fallback bearer; the UE stays on multicast.
            return Ok(LossOutcome {
                decision: FallbackDecision::NoChange,
                follow_ups,
            });
        }
        // The UE keeps multicast reception until the unicast bearer is up;
        // if it completed instantly the flip has already happened.
        self.log(now, group, cell, "fallback_unicast", "loss_report");
        Ok(LossOutcome {
            decision: FallbackDecision::FallbackToUnicast,
            follow_ups,
        })
    }

    /// Moves a UE to a new serving cell, preserving service for every group
    /// it receives and re-evaluating the dynamic rule in both cells.
    pub fn handle_handover(&mut self, ue: UeId, to_cell: CellId, now: SimTime) -> Result<HandoverOutcome, GcseError> {
        self.network.cell(to_cell)?;
        let from_cell = self.network.ue(ue)?.serving_cell;
        let mut out = HandoverOutcome {
            follow_ups: Vec::new(),
            gaps: Vec::new(),
        };
        if from_cell == to_cell {
            return Ok(out);
        }
        let memberships: Vec<GroupId> = self.network.ue(ue)?.memberships.iter().copied().collect();
        if self.policy.uli_source == UliSource::UeReported && !memberships.is_empty() {
            self.core_messages += 1;
        }
        self.network.ue_mut(ue)?.serving_cell = to_cell;

        for group in &memberships {
            let group = *group;
            if !self.call_active(group) {
                continue;
            }
            let rx = self.network.ue(ue)?.rx_mode.get(&group).copied();
            match rx {
                Some(RxMode::MulticastRx) => {
                    let target_has_multicast = self
                        .network
                        .group(group)?
                        .per_cell_transport
                        .get(&to_cell)
                        .map(|t| t.multicast_bearer.is_some())
                        .unwrap_or(false);
                    if target_has_multicast {
                        // Continuity inside multicast coverage: no gap.
                    } else {
                        self.network.ue_mut(ue)?.rx_mode.remove(&group);
                        let before = self.pending_paths.contains(&(group, ue));
                        if self.establish_member_unicast(group, ue, now, &mut out.follow_ups)? {
                            let gap = if !before && self.pending_paths.contains(&(group, ue)) {
                                self.budget.unicast_establishment()
                            } else {
                                SimTime::from_us(0)
                            };
                            let record = ContinuityGap {
                                at: now,
                                ue,
                                group,
                                gap,
                            };
                            self.continuity_gaps.push(record);
                            out.gaps.push(record);
                            self.log(now, group, to_cell, "fallback_unicast", "handover");
                        } else {
                            self.log(now, group, to_cell, "rejected", "handover");
                        }
                    }
                }
                Some(RxMode::UnicastRx) => {
                    // The bearer survives the handover; its units move
                    // between the cells' unicast pools.
                    let (bearer, units) = {
                        let g = self.network.group(group)?;
                        let t = g.per_cell_transport.get(&from_cell).cloned().unwrap_or_default();
                        (
                            t.unicast_bearers.get(&ue).copied(),
                            t.unicast_units.get(&ue).copied().unwrap_or(0),
                        )
                    };
                    if let Some(bearer) = bearer {
                        self.ledger.release(from_cell, group, PoolKind::Unicast, units)?;
                        {
                            let g = self.network.group_mut(group)?;
                            if let Some(t) = g.per_cell_transport.get_mut(&from_cell) {
                                t.unicast_bearers.remove(&ue);
                                t.unicast_units.remove(&ue);
                                if *t == TransportState::default() {
                                    g.per_cell_transport.remove(&from_cell);
                                }
                            }
                        }
                        let new_units = self.unicast_units_for(group, ue)?;
                        if self.admit_with_preemption(group, to_cell, PoolKind::Unicast, new_units, now)? {
                            let g = self.network.group_mut(group)?;
                            let t = g.per_cell_transport.entry(to_cell).or_default();
                            t.unicast_bearers.insert(ue, bearer);
                            t.unicast_units.insert(ue, new_units);
                        } else {
                            // Target cell cannot carry the link.
                            if self.bearers.bearer(bearer)?.is_active() {
                                self.bearers.release(bearer, now)?;
                            }
                            self.network.ue_mut(ue)?.rx_mode.remove(&group);
                            self.log(now, group, to_cell, "rejected", "handover");
                        }
                    }
                }
                None => {
                    // A pending path moves with the UE.
                    let pending_bearer = self
                        .pending_unicast
                        .iter()
                        .find(|(_, p)| p.group == group && p.ue == ue)
                        .map(|(b, p)| (*b, p.cell));
                    if let Some((bearer, old_cell)) = pending_bearer {
                        let units = {
                            let g = self.network.group(group)?;
                            g.per_cell_transport
                                .get(&old_cell)
                                .and_then(|t| t.unicast_units.get(&ue).copied())
                                .unwrap_or(0)
                        };
                        self.ledger.release(old_cell, group, PoolKind::Unicast, units)?;
                        {
                            let g = self.network.group_mut(group)?;
                            if let Some(t) = g.per_cell_transport.get_mut(&old_cell) {
                                t.unicast_bearers.remove(&ue);
                                t.unicast_units.remove(&ue);
                                if *t == TransportState::default() {
                                    g.per_cell_transport.remove(&old_cell);
                                }
                            }
                        }
                        let new_units = self.unicast_units_for(group, ue)?;
                        if self.admit_with_preemption(group, to_cell, PoolKind::Unicast, new_units, now)? {
                            if let Some(p) = self.pending_unicast.get_mut(&bearer) {
                                p.cell = to_cell;
                            }
                            let g = self.network.group_mut(group)?;
                            let t = g.per_cell_transport.entry(to_cell).or_default();
                            t.unicast_bearers.insert(ue, bearer);
                            t.unicast_units.insert(ue, new_units);
                        } else {
                            self.pending_unicast.remove(&bearer);
                            self.pending_paths.remove(&(group, ue));
                            self.log(now, group, to_cell, "rejected", "handover");
                        }
                    }
                }
            }
            let mut more = self.reevaluate_cell(group, from_cell, now, "handover")?;
            out.follow_ups.append(&mut more);
            let mut more = self.reevaluate_cell(group, to_cell, now, "handover")?;
            out.follow_ups.append(&mut more);
            if self.policy.kind == PolicyKind::StaticActivation {
                // Static bearers are edge-dimensioned; nothing to adjust.
            }
        }
        Ok(out)
    }

    /// Requests the talk floor and records the uplink as unicast.
    pub fn uplink_talk_burst(&mut self, ue: UeId, group: GroupId, now: SimTime) -> Result<FloorOutcome, GcseError> {
        let is_member = self.network.group(group)?.members.contains(&ue);
        if !is_member {
            return Err(GcseError::NotAMember { ue, group });
        }
        let priority = self.network.group(group)?.priority;
        let cell = self.network.ue(ue)?.serving_cell;
        let outcome = self.floors.entry(group).or_default().request(group, ue, priority)?;
        self.uplink_records.push(UplinkRecord {
            at: now,
            ue,
            group,
            cell,
            transport: TransportKind::Unicast,
        });
        Ok(outcome)
    }

    /// Gives the floor back.
    pub fn floor_release(&mut self, ue: UeId, group: GroupId) {
        if let Some(floor) = self.floors.get_mut(&group) {
            floor.release(ue);
        }
    }

    pub fn floor_holder(&self, group: GroupId) -> Option<UeId> {
        self.floors.get(&group).and_then(|f| f.holder())
    }

    /// Adds a member to a group mid-call and gives it a downlink path.
    pub fn member_joined(&mut self, group: GroupId, ue: UeId, now: SimTime) -> Result<Vec<FollowUp>, GcseError> {
        self.network.join_group(group, ue)?;
        let mut follow_ups = Vec::new();
        if !self.call_active(group) {
            return Ok(follow_ups);
        }
        let cell = self.network.ue(ue)?.serving_cell;
        let cell_multicast = self
            .network
            .group(group)?
            .per_cell_transport
            .get(&cell)
            .map(|t| t.multicast_bearer.is_some())
            .unwrap_or(false);
        if cell_multicast {
            self.network.ue_mut(ue)?.rx_mode.insert(group, RxMode::MulticastRx);
            if self.policy.kind == PolicyKind::DynamicActivation {
                self.redimension_multicast(group, cell, now, &mut follow_ups)?;
            }
        } else {
            self.establish_member_unicast(group, ue, now, &mut follow_ups)?;
        }
        let mut more = self.reevaluate_cell(group, cell, now, "membership")?;
        follow_ups.append(&mut more);
        Ok(follow_ups)
    }

    /// Removes a member mid-call, releasing its paths and re-evaluating its
    /// cell.
    pub fn member_left(&mut self, group: GroupId, ue: UeId, now: SimTime) -> Result<Vec<FollowUp>, GcseError> {
        let cell = self.network.ue(ue)?.serving_cell;
        let had_unicast = self
            .network
            .group(group)?
            .per_cell_transport
            .get(&cell)
            .map(|t| t.unicast_bearers.contains_key(&ue))
            .unwrap_or(false);
        if had_unicast {
            self.release_member_unicast(group, ue, cell, now)?;
        }
        if let Some(state) = self.calls.get_mut(&group) {
            if let Some(waiting) = state.pending_down.get_mut(&cell) {
                waiting.remove(&ue);
            }
        }
        let finished = self
            .calls
            .get(&group)
            .and_then(|s| s.pending_down.get(&cell))
            .map(|w| w.is_empty())
            .unwrap_or(false);
        if finished {
            if let Some(state) = self.calls.get_mut(&group) {
                state.pending_down.remove(&cell);
            }
            self.release_multicast_in_cell(group, cell, now)?;
        }
        self.network.leave_group(group, ue)?;
        self.floor_release(ue, group);
        let mut follow_ups = Vec::new();
        if self.call_active(group) {
            if self.policy.kind == PolicyKind::DynamicActivation {
                let mut more = self.reevaluate_cell(group, cell, now, "membership")?;
                follow_ups.append(&mut more);
            } else {
                // Static multicast persists; nothing member-driven changes.
            }
        }
        Ok(follow_ups)
    }

    /// Ends a call, releasing every transport it holds.
    pub fn end_group_call(&mut self, group: GroupId, now: SimTime) -> Result<(), GcseError> {
        if !self.call_active(group) {
            return Ok(());
        }
        self.tear_down_call(group, now)
    }

    // -- audits -------------------------------------------------------------

    /// Recomputes per-cell committed units from transport state; an audit
    /// compares this against the ledger.
    pub fn expected_cell_usage(&self) -> BTreeMap<CellId, (u32, u32)> {
        let mut usage: BTreeMap<CellId, (u32, u32)> = self.network.cells().map(|c| (c.cell_id, (0, 0))).collect();
        for group in self.network.groups() {
            for (cell, transport) in &group.per_cell_transport {
                let entry = usage.entry(*cell).or_insert((0, 0));
                entry.0 += transport.unicast_units.values().sum::<u32>();
                entry.1 += transport.multicast_units;
            }
        }
        // Pre-arranged reservations exist before any transport entry does.
        for bearer in self.bearers.bearers() {
            if bearer.kind == BearerKind::Mbms && bearer.state == BearerState::PreEstablished {
                if let (crate::bearer::BearerOwner::Group(group), Some(area)) = (bearer.owner, bearer.area) {
                    let has_transport = self
                        .network
                        .group(group)
                        .map(|g| !g.per_cell_transport.is_empty())
                        .unwrap_or(false);
                    if !has_transport {
                        if let (Ok(area), Ok(units)) = (self.network.area(area), self.static_mc_units(group, area)) {
                            for cell in &area.cells {
                                usage.entry(*cell).or_insert((0, 0)).1 += units;
                            }
                        }
                    }
                }
            }
        }
        usage
    }

    /// Verifies ledger totals match what transport state implies.
    pub fn conservation_audit(&self) -> Result<(), String> {
        let expected = self.expected_cell_usage();
        let actual = self.ledger.totals();
        for (cell, (uc, mc)) in &expected {
            let (auc, amc) = actual.get(cell).copied().unwrap_or((0, 0));
            if *uc != auc || *mc != amc {
                return Err(format!(
                    "cell {cell}: transports imply ({uc} uc, {mc} mc) units, ledger holds ({auc}, {amc})"
                ));
            }
            let uc_cap = self.ledger.capacity(*cell, PoolKind::Unicast);
            let mc_cap = self.ledger.capacity(*cell, PoolKind::Multicast);
            if auc > uc_cap || amc > mc_cap {
                return Err(format!("cell {cell}: pool over capacity ({auc}/{uc_cap} uc, {amc}/{mc_cap} mc)"));
            }
        }
        Ok(())
    }

    /// Verifies every member of every active call has exactly one downlink
    /// path, except members whose path establishment or switch is still in
    /// flight.
    pub fn path_audit(&self) -> Result<(), String> {
        for (group, state) in &self.calls {
            if !state.active || !state.admitted {
                continue;
            }
            let Ok(g) = self.network.group(*group) else {
                continue;
            };
            for ue in &g.members {
                let Ok(u) = self.network.ue(*ue) else {
                    continue;
                };
                let transport = g.per_cell_transport.get(&u.serving_cell).cloned().unwrap_or_default();
                let has_unicast = transport.unicast_bearers.contains_key(ue)
                    && self
                        .bearers
                        .bearer(transport.unicast_bearers[ue])
                        .map(|b| b.is_active())
                        .unwrap_or(false);
                let has_multicast = u.rx_mode.get(group) == Some(&RxMode::MulticastRx) && transport.multicast_bearer.is_some();
                let paths = u32::from(has_unicast) + u32::from(has_multicast);
                if paths > 1 {
                    return Err(format!("UE {ue} holds two downlink paths for group {group}"));
                }
                let pending = self.pending_paths.contains(&(*group, *ue))
                    || state.pending_mbms.contains_key(&u.serving_cell)
                    || state.pending_down.contains_key(&u.serving_cell);
                if paths == 0 && !pending {
                    return Err(format!("UE {ue} has no downlink path for group {group}"));
                }
            }
        }
        Ok(())
    }

    /// Verifies every transport entry points at a live bearer in a
    /// plausible state.
    pub fn bearer_link_audit(&self) -> Result<(), String> {
        for group in self.network.groups() {
            for (cell, transport) in &group.per_cell_transport {
                for (ue, bearer) in &transport.unicast_bearers {
                    let state = self
                        .bearers
                        .bearer(*bearer)
                        .map(|b| b.state)
                        .map_err(|e| e.to_string())?;
                    if !matches!(state, BearerState::Activating | BearerState::Active) {
                        return Err(format!(
                            "group {} cell {cell}: unicast bearer {bearer} of UE {ue} is {state:?}",
                            group.group_id
                        ));
                    }
                }
                if let Some(bearer) = transport.multicast_bearer {
                    let state = self
                        .bearers
                        .bearer(bearer)
                        .map(|b| b.state)
                        .map_err(|e| e.to_string())?;
                    if state != BearerState::Active {
                        return Err(format!(
                            "group {} cell {cell}: multicast bearer {bearer} is {state:?}",
                            group.group_id
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Runs every structural audit; the engine calls this after each event.
    pub fn audit(&self) -> Result<(), String> {
        self.conservation_audit()?;
        self.path_audit()?;
        self.zero_member_audit()?;
        self.bearer_link_audit()
    }

    /// Verifies the dynamic policy never broadcasts into an empty cell.
    pub fn zero_member_audit(&self) -> Result<(), String> {
        if self.policy.kind != PolicyKind::DynamicActivation {
            return Ok(());
        }
        for group in self.network.groups() {
            for (cell, transport) in &group.per_cell_transport {
                if transport.multicast_bearer.is_some() {
                    let count = group
                        .members
                        .iter()
                        .filter(|ue| {
                            self.network
                                .ue(**ue)
                                .map(|u| u.serving_cell == *cell)
                                .unwrap_or(false)
                        })
                        .count();
                    if count == 0 {
                        return Err(format!("group {} broadcasts into empty cell {cell}", group.group_id));
                    }
                }
            }
        }
        Ok(())
    }
}
