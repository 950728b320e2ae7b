//! Core entities of the PMR-over-LTE network.
//!
//! Groups, terminals, cells and MBMS areas are plain data with value
//! semantics; the [`Network`] registry owns them and hands out monotonically
//! assigned identifiers. The [`RequirementMatrix`] captures the public-safety
//! service thresholds a simulated scenario is checked against.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::gcse::TransportState;
use crate::ids::{AreaId, CellId, GroupId, Tmgi, UeId};

/// Errors raised by entity creation and membership maintenance.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("group must have at least one member")]
    EmptyGroup,
    #[error("group size {size} exceeds the {limit}-member limit")]
    GroupTooLarge { size: usize, limit: usize },
    #[error("unknown UE {0}")]
    UnknownUe(UeId),
    #[error("unknown group {0}")]
    UnknownGroup(GroupId),
    #[error("unknown cell {0}")]
    UnknownCell(CellId),
    #[error("unknown area {0}")]
    UnknownArea(AreaId),
    #[error("area {0} has no cells")]
    EmptyArea(AreaId),
    #[error("cell {cell}: {reason}")]
    InvalidCell { cell: CellId, reason: String },
    #[error("area {area}: {reason}")]
    InvalidArea { area: AreaId, reason: String },
}

/// Service class of a group call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ServiceKind {
    Voice,
    Video,
}

impl ServiceKind {
    pub fn name(self) -> &'static str {
        match self {
            ServiceKind::Voice => "voice",
            ServiceKind::Video => "video",
        }
    }
}

/// Application-layer rate and QoS class of a group-call service.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceProfile {
    pub kind: ServiceKind,
    /// Application-layer rate in kbit/s.
    pub app_rate_kbps: u32,
    /// Small-integer QoS priority class.
    pub qos_class: u8,
}

impl ServiceProfile {
    /// Half-duplex voice call at 16 kbps.
    pub fn voice() -> Self {
        ServiceProfile {
            kind: ServiceKind::Voice,
            app_rate_kbps: 16,
            qos_class: 1,
        }
    }

    /// Synchronous video flow at 256 kbps.
    pub fn video() -> Self {
        ServiceProfile {
            kind: ServiceKind::Video,
            app_rate_kbps: 256,
            qos_class: 2,
        }
    }
}

/// Downlink reception path a UE uses for one of its groups.
///
/// A UE that is a member but currently has no downlink path simply has no
/// entry in its `rx_mode` map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxMode {
    UnicastRx,
    MulticastRx,
}

/// A user terminal.
#[derive(Debug, Clone)]
pub struct UserEquipment {
    pub ue_id: UeId,
    pub serving_cell: CellId,
    /// Abstract channel-quality index in `[0, q_max]`; a monotone proxy for
    /// SINR that the resource model maps to spectral efficiency.
    pub channel_quality: u8,
    pub memberships: BTreeSet<GroupId>,
    /// Per-group downlink path; absent entry means no reception.
    pub rx_mode: BTreeMap<GroupId, RxMode>,
    /// Per-group packet-loss estimate over the reporting window, in `[0, 1]`.
    pub loss_estimate: BTreeMap<GroupId, f64>,
}

/// A radio cell (one eNB).
#[derive(Debug, Clone)]
pub struct Cell {
    pub cell_id: CellId,
    /// Areas this cell participates in; a cell may belong to several.
    pub mbms_areas: BTreeSet<AreaId>,
    /// Carrier bandwidth, 5 or 10 MHz.
    pub bandwidth_mhz: u8,
    /// Subframes per 10-subframe frame reserved for multicast, at most 6.
    pub mbsfn_subframes: u8,
    /// Abstract resource units available per subframe.
    pub capacity_units: u32,
}

/// Ceiling on multicast subframes per frame imposed by the radio standard.
pub const MAX_MBSFN_SUBFRAMES: u8 = 6;
pub const SUBFRAMES_PER_FRAME: u8 = 10;

impl Cell {
    /// Units per frame available to multicast bearers.
    pub fn multicast_pool(&self) -> u32 {
        u32::from(self.mbsfn_subframes) * self.capacity_units
    }

    /// Units per frame available to unicast bearers.
    pub fn unicast_pool(&self) -> u32 {
        u32::from(SUBFRAMES_PER_FRAME - self.mbsfn_subframes) * self.capacity_units
    }
}

/// Synchronization mode of an MBMS area.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncMode {
    /// Each cell transmits independently.
    SingleCell,
    /// Cells transmit the identical signal; receivers combine the copies.
    Sfn,
}

/// A set of cells jointly delivering one multicast flow.
#[derive(Debug, Clone)]
pub struct MbmsArea {
    pub area_id: AreaId,
    pub cells: BTreeSet<CellId>,
    pub sync_mode: SyncMode,
    /// Number of synchronized cells contributing combined power; 1 in
    /// single-cell mode.
    pub sfn_cluster_size: u32,
}

/// A group call: membership, service profile and per-cell transport state.
#[derive(Debug, Clone)]
pub struct GroupCall {
    pub group_id: GroupId,
    pub tmgi: Tmgi,
    pub members: BTreeSet<UeId>,
    pub profile: ServiceProfile,
    /// Higher value preempts lower at admission.
    pub priority: u8,
    pub per_cell_transport: BTreeMap<CellId, TransportState>,
}

impl GroupCall {
    /// Transport state in a cell; absent entries mean no transport.
    pub fn transport_in(&self, cell: CellId) -> TransportState {
        self.per_cell_transport.get(&cell).cloned().unwrap_or_default()
    }
}

/// Service thresholds the scenario outcome is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequirementMatrix {
    /// Worst admissible call-setup time in milliseconds.
    pub max_setup_ms: u64,
    /// Concurrent voice groups the system must sustain.
    pub min_voice_groups: u32,
    /// Users the service area must carry.
    pub min_area_users: u32,
    /// Largest group the system must accept.
    pub max_group_size: u32,
    /// Carrier bandwidth the service plan budgets for.
    pub required_bandwidth_mhz: u8,
}

impl Default for RequirementMatrix {
    fn default() -> Self {
        RequirementMatrix {
            max_setup_ms: 300,
            min_voice_groups: 36,
            min_area_users: 2000,
            max_group_size: 500,
            required_bandwidth_mhz: 10,
        }
    }
}

/// Measured outcome of a run, the input to [`check_requirements`].
#[derive(Debug, Clone, Default)]
pub struct ScenarioSummary {
    /// Worst observed setup latency in milliseconds; `None` when no call
    /// completed setup.
    pub setup_p100_ms: Option<f64>,
    /// Voice groups whose call was admitted everywhere it needed resources.
    pub voice_groups_admitted: u32,
    /// Registered terminals.
    pub total_users: u32,
    /// Largest configured group.
    pub max_group_size: u32,
    /// Carrier bandwidth of the scenario.
    pub bandwidth_mhz: u8,
    /// Group calls requested.
    pub groups_requested: u32,
    /// Group calls admitted in full.
    pub groups_admitted: u32,
}

/// One pass/fail verdict against a requirement row.
#[derive(Debug, Clone)]
pub struct Finding {
    pub requirement: &'static str,
    pub required: String,
    pub measured: String,
    pub pass: bool,
}

/// Outcome of the requirement check.
#[derive(Debug, Clone)]
pub struct RequirementReport {
    pub findings: Vec<Finding>,
}

impl RequirementReport {
    pub fn overall_pass(&self) -> bool {
        self.findings.iter().all(|f| f.pass)
    }
}

/// Checks a measured scenario summary against the requirement matrix.
///
/// Pure: the same summary always yields the same findings. Produces one
/// finding per matrix row plus an admission-success row, since a scenario
/// that rejects calls cannot claim to sustain its group count.
pub fn check_requirements(summary: &ScenarioSummary, matrix: &RequirementMatrix) -> RequirementReport {
    let mut findings = Vec::new();

    let (measured, pass) = match summary.setup_p100_ms {
        Some(p100) => (format!("{p100:.3} ms"), p100 <= matrix.max_setup_ms as f64),
        None => ("no completed calls".to_string(), true),
    };
    findings.push(Finding {
        requirement: "setup_time_p100",
        required: format!("<= {} ms", matrix.max_setup_ms),
        measured,
        pass,
    });

    findings.push(Finding {
        requirement: "voice_groups",
        required: format!(">= {}", matrix.min_voice_groups),
        measured: summary.voice_groups_admitted.to_string(),
        pass: summary.voice_groups_admitted >= matrix.min_voice_groups,
    });

    findings.push(Finding {
        requirement: "area_users",
        required: format!(">= {}", matrix.min_area_users),
        measured: summary.total_users.to_string(),
        pass: summary.total_users >= matrix.min_area_users,
    });

    findings.push(Finding {
        requirement: "group_size",
        required: format!("<= {}", matrix.max_group_size),
        measured: summary.max_group_size.to_string(),
        pass: summary.max_group_size <= matrix.max_group_size,
    });

    findings.push(Finding {
        requirement: "bandwidth",
        required: format!(">= {} MHz", matrix.required_bandwidth_mhz),
        measured: format!("{} MHz", summary.bandwidth_mhz),
        pass: summary.bandwidth_mhz >= matrix.required_bandwidth_mhz,
    });

    findings.push(Finding {
        requirement: "admission",
        required: format!("{}/{} admitted", summary.groups_requested, summary.groups_requested),
        measured: format!("{}/{} admitted", summary.groups_admitted, summary.groups_requested),
        pass: summary.groups_admitted == summary.groups_requested,
    });

    RequirementReport { findings }
}

/// Registry of cells, areas, terminals and groups.
///
/// Single-threaded value semantics; identifiers are assigned from monotone
/// counters and never reused, which keeps TMGIs unique across the life of a
/// run.
#[derive(Debug, Clone, Default)]
pub struct Network {
    ues: BTreeMap<UeId, UserEquipment>,
    cells: BTreeMap<CellId, Cell>,
    areas: BTreeMap<AreaId, MbmsArea>,
    groups: BTreeMap<GroupId, GroupCall>,
    next_ue: u64,
    next_cell: u64,
    next_area: u64,
    next_group: u64,
    next_tmgi: u64,
    max_group_size: usize,
}

impl Network {
    pub fn new() -> Self {
        Network {
            max_group_size: 500,
            ..Network::default()
        }
    }

    pub fn with_max_group_size(limit: usize) -> Self {
        Network {
            max_group_size: limit,
            ..Network::default()
        }
    }

    pub fn max_group_size(&self) -> usize {
        self.max_group_size
    }

    pub fn add_cell(&mut self, bandwidth_mhz: u8, mbsfn_subframes: u8, capacity_units: u32) -> Result<CellId, DomainError> {
        let cell_id = CellId::new(self.next_cell);
        if mbsfn_subframes > MAX_MBSFN_SUBFRAMES {
            return Err(DomainError::InvalidCell {
                cell: cell_id,
                reason: format!(
                    "mbsfn_subframes {mbsfn_subframes} exceeds the ceiling of {MAX_MBSFN_SUBFRAMES} of {SUBFRAMES_PER_FRAME}"
                ),
            });
        }
        self.next_cell += 1;
        self.cells.insert(
            cell_id,
            Cell {
                cell_id,
                mbms_areas: BTreeSet::new(),
                bandwidth_mhz,
                mbsfn_subframes,
                capacity_units,
            },
        );
        Ok(cell_id)
    }

    pub fn add_area(&mut self, cells: BTreeSet<CellId>, sync_mode: SyncMode, sfn_cluster_size: u32) -> Result<AreaId, DomainError> {
        let area_id = AreaId::new(self.next_area);
        if cells.is_empty() {
            return Err(DomainError::EmptyArea(area_id));
        }
        for cell in &cells {
            if !self.cells.contains_key(cell) {
                return Err(DomainError::UnknownCell(*cell));
            }
        }
        if sync_mode == SyncMode::SingleCell && sfn_cluster_size != 1 {
            return Err(DomainError::InvalidArea {
                area: area_id,
                reason: format!("single-cell mode requires cluster size 1, got {sfn_cluster_size}"),
            });
        }
        if sfn_cluster_size < 1 {
            return Err(DomainError::InvalidArea {
                area: area_id,
                reason: "cluster size must be at least 1".to_string(),
            });
        }
        self.next_area += 1;
        for cell in &cells {
            self.cells.get_mut(cell).expect("checked above").mbms_areas.insert(area_id);
        }
        self.areas.insert(
            area_id,
            MbmsArea {
                area_id,
                cells,
                sync_mode,
                sfn_cluster_size,
            },
        );
        Ok(area_id)
    }

    pub fn register_ue(&mut self, serving_cell: CellId, channel_quality: u8) -> Result<UeId, DomainError> {
        if !self.cells.contains_key(&serving_cell) {
            return Err(DomainError::UnknownCell(serving_cell));
        }
        let ue_id = UeId::new(self.next_ue);
        self.next_ue += 1;
        self.ues.insert(
            ue_id,
            UserEquipment {
                ue_id,
                serving_cell,
                channel_quality,
                memberships: BTreeSet::new(),
                rx_mode: BTreeMap::new(),
                loss_estimate: BTreeMap::new(),
            },
        );
        Ok(ue_id)
    }

    /// Creates a group with a fresh id and TMGI. Transport starts empty,
    /// which reads as no transport in every cell.
    pub fn create_group(
        &mut self,
        members: BTreeSet<UeId>,
        profile: ServiceProfile,
        priority: u8,
    ) -> Result<GroupId, DomainError> {
        if members.is_empty() {
            return Err(DomainError::EmptyGroup);
        }
        if members.len() > self.max_group_size {
            return Err(DomainError::GroupTooLarge {
                size: members.len(),
                limit: self.max_group_size,
            });
        }
        for ue in &members {
            if !self.ues.contains_key(ue) {
                return Err(DomainError::UnknownUe(*ue));
            }
        }
        let group_id = GroupId::new(self.next_group);
        self.next_group += 1;
        let tmgi = Tmgi::new(self.next_tmgi);
        self.next_tmgi += 1;
        for ue in &members {
            self.ues.get_mut(ue).expect("checked above").memberships.insert(group_id);
        }
        self.groups.insert(
            group_id,
            GroupCall {
                group_id,
                tmgi,
                members,
                profile,
                priority,
                per_cell_transport: BTreeMap::new(),
            },
        );
        Ok(group_id)
    }

    /// Adds a UE to a group. Idempotent: joining twice equals joining once.
    pub fn join_group(&mut self, group_id: GroupId, ue: UeId) -> Result<(), DomainError> {
        if !self.ues.contains_key(&ue) {
            return Err(DomainError::UnknownUe(ue));
        }
        let limit = self.max_group_size;
        let group = self.groups.get_mut(&group_id).ok_or(DomainError::UnknownGroup(group_id))?;
        if group.members.contains(&ue) {
            return Ok(());
        }
        if group.members.len() >= limit {
            return Err(DomainError::GroupTooLarge {
                size: group.members.len() + 1,
                limit,
            });
        }
        group.members.insert(ue);
        self.ues.get_mut(&ue).expect("checked above").memberships.insert(group_id);
        Ok(())
    }

    /// Removes a UE from a group, clearing any reception bookkeeping.
    pub fn leave_group(&mut self, group_id: GroupId, ue: UeId) -> Result<(), DomainError> {
        let group = self.groups.get_mut(&group_id).ok_or(DomainError::UnknownGroup(group_id))?;
        group.members.remove(&ue);
        if let Some(u) = self.ues.get_mut(&ue) {
            u.memberships.remove(&group_id);
            u.rx_mode.remove(&group_id);
            u.loss_estimate.remove(&group_id);
        }
        Ok(())
    }

    pub fn ue(&self, ue: UeId) -> Result<&UserEquipment, DomainError> {
        self.ues.get(&ue).ok_or(DomainError::UnknownUe(ue))
    }

    pub fn ue_mut(&mut self, ue: UeId) -> Result<&mut UserEquipment, DomainError> {
        self.ues.get_mut(&ue).ok_or(DomainError::UnknownUe(ue))
    }

    pub fn cell(&self, cell: CellId) -> Result<&Cell, DomainError> {
        self.cells.get(&cell).ok_or(DomainError::UnknownCell(cell))
    }

    pub fn area(&self, area: AreaId) -> Result<&MbmsArea, DomainError> {
        self.areas.get(&area).ok_or(DomainError::UnknownArea(area))
    }

    pub fn group(&self, group: GroupId) -> Result<&GroupCall, DomainError> {
        self.groups.get(&group).ok_or(DomainError::UnknownGroup(group))
    }

    pub fn group_mut(&mut self, group: GroupId) -> Result<&mut GroupCall, DomainError> {
        self.groups.get_mut(&group).ok_or(DomainError::UnknownGroup(group))
    }

    pub fn ues(&self) -> impl Iterator<Item = &UserEquipment> {
        self.ues.values()
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.values()
    }

    pub fn areas(&self) -> impl Iterator<Item = &MbmsArea> {
        self.areas.values()
    }

    pub fn groups(&self) -> impl Iterator<Item = &GroupCall> {
        self.groups.values()
    }

    pub fn ue_count(&self) -> usize {
        self.ues.len()
    }

    /// Members of a group currently served by the given cell, in UE order.
    pub fn members_in_cell(&self, group_id: GroupId, cell: CellId) -> Result<Vec<&UserEquipment>, DomainError> {
        let group = self.group(group_id)?;
        Ok(group
            .members
            .iter()
            .filter_map(|ue| self.ues.get(ue))
            .filter(|ue| ue.serving_cell == cell)
            .collect())
    }

    /// Per-cell member counts for a group, omitting cells with no members.
    pub fn member_counts(&self, group_id: GroupId) -> Result<BTreeMap<CellId, u32>, DomainError> {
        let group = self.group(group_id)?;
        let mut counts = BTreeMap::new();
        for ue in &group.members {
            if let Some(u) = self.ues.get(ue) {
                *counts.entry(u.serving_cell).or_insert(0) += 1;
            }
        }
        Ok(counts)
    }

    /// First area (by id) containing the cell, if any.
    pub fn area_of_cell(&self, cell: CellId) -> Option<AreaId> {
        self.cells.get(&cell).and_then(|c| c.mbms_areas.iter().next().copied())
    }
}
