//! Abstract radio-resource accounting.
//!
//! Costs are expressed in resource units per 10 ms frame, an abstract
//! PRB-like quantum. A unicast link is tailored to its receiver's channel
//! quality; a multicast bearer must cover the worst receiver in the cell,
//! with an SFN quality uplift when synchronized neighbours combine their
//! signals. Everything here is pure arithmetic except [`LoadLedger`], the
//! mutable per-cell commitment table that [`admit`] operates on.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::domain::{Cell, GroupCall, MbmsArea, ServiceProfile, SyncMode, UserEquipment, SUBFRAMES_PER_FRAME};
use crate::ids::{CellId, GroupId, UeId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RadioError {
    #[error("channel quality {quality} outside table range 0..={q_max}")]
    QualityOutOfRange { quality: u8, q_max: u8 },
    #[error("no members to extrapolate per-UE cost from")]
    NoMembers,
    #[error("invalid efficiency table: {0}")]
    InvalidEffTable(String),
    #[error("cell {cell}: {pool} pool over capacity ({used} used + {requested} requested > {capacity})")]
    PoolExceeded {
        cell: CellId,
        pool: PoolKind,
        used: u32,
        requested: u32,
        capacity: u32,
    },
    #[error("cell {0} not registered in load ledger")]
    UnknownLedgerCell(CellId),
    #[error("cell {cell}: release of {units} {pool} units exceeds commitment {committed}")]
    ReleaseUnderflow {
        cell: CellId,
        pool: PoolKind,
        units: u32,
        committed: u32,
    },
}

// ===========================================================================
// Link efficiency
// ===========================================================================

/// Monotone staircase from channel-quality index to bits per resource unit,
/// standing in for an MCS table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffTable {
    levels: Vec<u32>,
    q_max: u8,
}

impl EffTable {
    pub fn new(levels: Vec<u32>, q_max: u8) -> Result<Self, RadioError> {
        if levels.is_empty() {
            return Err(RadioError::InvalidEffTable("no levels".to_string()));
        }
        if levels[0] == 0 {
            return Err(RadioError::InvalidEffTable("zero bits per unit".to_string()));
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(RadioError::InvalidEffTable("levels must be non-decreasing".to_string()));
        }
        if levels.len() > usize::from(q_max) + 1 {
            return Err(RadioError::InvalidEffTable(format!(
                "{} levels cannot be spread over {} quality indices",
                levels.len(),
                u16::from(q_max) + 1
            )));
        }
        Ok(EffTable { levels, q_max })
    }

    /// Eight-step staircase over quality indices 0 to 15.
    pub fn default_staircase() -> Self {
        EffTable::new(vec![20, 40, 60, 90, 130, 180, 250, 340], 15).expect("constants are valid")
    }

    pub fn q_max(&self) -> u8 {
        self.q_max
    }

    /// Bits carried by one resource unit at the given quality index.
    pub fn bits_per_unit(&self, quality: u8) -> Result<u32, RadioError> {
        if quality > self.q_max {
            return Err(RadioError::QualityOutOfRange {
                quality,
                q_max: self.q_max,
            });
        }
        let step = usize::from(quality) * self.levels.len() / (usize::from(self.q_max) + 1);
        Ok(self.levels[step])
    }

    /// Clamps a raw quality index into the table domain.
    pub fn clamp(&self, quality: u32) -> u8 {
        quality.min(u32::from(self.q_max)) as u8
    }
}

/// Channel-quality uplift earned by combining synchronized transmissions.
///
/// A cluster of one eNB earns nothing; each doubling of the cluster adds
/// `per_doubling` quality indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SfnGain {
    pub per_doubling: u8,
}

impl Default for SfnGain {
    fn default() -> Self {
        SfnGain { per_doubling: 2 }
    }
}

impl SfnGain {
    pub fn uplift(&self, cluster_size: u32) -> u8 {
        if cluster_size <= 1 {
            0
        } else {
            self.per_doubling.saturating_mul(cluster_size.ilog2() as u8)
        }
    }
}

// ===========================================================================
// Resource model
// ===========================================================================

/// Parameters of the abstract air interface.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceModel {
    pub bandwidth_mhz: u8,
    /// Abstract resource units per 1 ms subframe.
    pub units_per_subframe: u32,
    /// Subframes per frame reserved for multicast, at most 6 of 10.
    pub mbsfn_subframes: u8,
    /// Frame length in milliseconds.
    pub frame_ms: u32,
    pub eff: EffTable,
    pub sfn: SfnGain,
    /// Quality assumed for an empty multicast bearer, which still reserves
    /// worst-case resources.
    pub cell_edge_quality: u8,
    /// Goodput fraction of one app rate lost per group admitted beyond the
    /// saturation point.
    pub overload_penalty: f64,
    /// Cluster size assumed when a throughput sweep asks for SFN mode.
    pub sfn_reference_cluster: u32,
}

impl ResourceModel {
    /// Model for a 5 or 10 MHz carrier with defaults everywhere else.
    pub fn for_bandwidth(bandwidth_mhz: u8) -> Self {
        ResourceModel {
            bandwidth_mhz,
            units_per_subframe: u32::from(bandwidth_mhz) * 5,
            mbsfn_subframes: 6,
            frame_ms: 10,
            eff: EffTable::default_staircase(),
            sfn: SfnGain::default(),
            cell_edge_quality: 0,
            overload_penalty: 0.05,
            sfn_reference_cluster: 4,
        }
    }

    /// Units per frame available to multicast bearers.
    pub fn multicast_pool(&self) -> u32 {
        u32::from(self.mbsfn_subframes) * self.units_per_subframe
    }

    /// Units per frame available to unicast bearers.
    pub fn unicast_pool(&self) -> u32 {
        u32::from(SUBFRAMES_PER_FRAME - self.mbsfn_subframes) * self.units_per_subframe
    }

    /// Application bits that must be carried per frame.
    pub fn bits_per_frame(&self, profile: &ServiceProfile) -> u32 {
        profile.app_rate_kbps * self.frame_ms
    }
}

// ===========================================================================
// Cost functions
// ===========================================================================

/// Units per frame for one unicast link at the given quality index.
pub fn unicast_cost_at(profile: &ServiceProfile, quality: u8, model: &ResourceModel) -> Result<u32, RadioError> {
    let eff = model.eff.bits_per_unit(quality)?;
    Ok(model.bits_per_frame(profile).div_ceil(eff).max(1))
}

/// Units per frame for a unicast link tailored to one UE.
pub fn unicast_cost(profile: &ServiceProfile, ue: &UserEquipment, model: &ResourceModel) -> Result<u32, RadioError> {
    unicast_cost_at(profile, ue.channel_quality, model)
}

/// Effective quality a multicast bearer must be dimensioned for.
///
/// The worst member pins the quality; an empty bearer is dimensioned for the
/// cell edge. SFN areas add the cluster uplift, capped at the table maximum.
pub fn multicast_effective_quality(members_in_cell: &[&UserEquipment], area: &MbmsArea, model: &ResourceModel) -> u8 {
    let floor = members_in_cell
        .iter()
        .map(|ue| ue.channel_quality)
        .min()
        .unwrap_or(model.cell_edge_quality);
    match area.sync_mode {
        SyncMode::SingleCell => floor,
        SyncMode::Sfn => model
            .eff
            .clamp(u32::from(floor) + u32::from(model.sfn.uplift(area.sfn_cluster_size))),
    }
}

/// Units per frame for one multicast bearer serving the given members.
///
/// Independent of how many members share it beyond their minimum quality.
pub fn multicast_cost(
    profile: &ServiceProfile,
    members_in_cell: &[&UserEquipment],
    area: &MbmsArea,
    model: &ResourceModel,
) -> Result<u32, RadioError> {
    let q = multicast_effective_quality(members_in_cell, area, model);
    unicast_cost_at(profile, q, model)
}

/// Side-by-side unicast and multicast cost of serving a group in one cell.
#[derive(Debug, Clone)]
pub struct CostReport {
    pub group_id: GroupId,
    pub cell_id: CellId,
    pub unicast_total: u32,
    pub multicast_total: u32,
    pub per_ue_unicast: Vec<(UeId, u32)>,
}

pub fn cost_report(
    group: &GroupCall,
    cell_id: CellId,
    members_in_cell: &[&UserEquipment],
    area: &MbmsArea,
    model: &ResourceModel,
) -> Result<CostReport, RadioError> {
    let mut per_ue_unicast = Vec::with_capacity(members_in_cell.len());
    let mut unicast_total = 0u32;
    for ue in members_in_cell {
        let units = unicast_cost(&group.profile, ue, model)?;
        unicast_total += units;
        per_ue_unicast.push((ue.ue_id, units));
    }
    Ok(CostReport {
        group_id: group.group_id,
        cell_id,
        unicast_total,
        multicast_total: multicast_cost(&group.profile, members_in_cell, area, model)?,
        per_ue_unicast,
    })
}

// ===========================================================================
// Throughput and efficiency curves
// ===========================================================================

/// eMBMS deployment flavour for a throughput sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbmsMode {
    Sc,
    Sfn,
}

impl EmbmsMode {
    pub fn name(self) -> &'static str {
        match self {
            EmbmsMode::Sc => "sc",
            EmbmsMode::Sfn => "sfn",
        }
    }
}

/// Aggregate goodput in kbps of `n_groups` concurrent multicast group calls.
///
/// Every bearer is dimensioned for the cell edge. Goodput grows linearly
/// until the multicast pool saturates; past that point each extra group
/// costs `overload_penalty` of one app rate in contention overhead, which
/// drives the curve back down to zero.
pub fn system_throughput(n_groups: u32, mode: EmbmsMode, profile: &ServiceProfile, model: &ResourceModel) -> f64 {
    if n_groups == 0 {
        return 0.0;
    }
    let quality = match mode {
        EmbmsMode::Sc => model.cell_edge_quality,
        EmbmsMode::Sfn => model.eff.clamp(
            u32::from(model.cell_edge_quality) + u32::from(model.sfn.uplift(model.sfn_reference_cluster)),
        ),
    };
    let cost = unicast_cost_at(profile, quality, model).expect("clamped quality is in range");
    let n_max = model.multicast_pool() / cost;
    let rate = f64::from(profile.app_rate_kbps);
    if n_groups <= n_max {
        f64::from(n_groups) * rate
    } else {
        let excess = f64::from(n_groups - n_max);
        let factor = (1.0 - model.overload_penalty * excess).max(0.0);
        f64::from(n_max) * rate * factor
    }
}

/// Number of concurrent groups at which [`system_throughput`] peaks.
pub fn saturation_point(mode: EmbmsMode, profile: &ServiceProfile, model: &ResourceModel) -> u32 {
    let quality = match mode {
        EmbmsMode::Sc => model.cell_edge_quality,
        EmbmsMode::Sfn => model.eff.clamp(
            u32::from(model.cell_edge_quality) + u32::from(model.sfn.uplift(model.sfn_reference_cluster)),
        ),
    };
    let cost = unicast_cost_at(profile, quality, model).expect("clamped quality is in range");
    model.multicast_pool() / cost
}

/// Downlink transport flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Unicast,
    Multicast,
}

impl TransportKind {
    pub fn name(self) -> &'static str {
        match self {
            TransportKind::Unicast => "unicast",
            TransportKind::Multicast => "multicast",
        }
    }
}

/// Per-member goodput normalized to the resources allocated to the service,
/// in kbps per unit.
///
/// `cell_ues` gives the quality population; a membership of `n_members` is
/// drawn from it cyclically. The unicast value shrinks as members are added
/// because each one needs its own link; the multicast value ignores
/// `n_members` entirely because one bearer, dimensioned for the worst UE in
/// the cell, serves any number of them.
pub fn spectral_efficiency(
    n_members: u32,
    transport: TransportKind,
    profile: &ServiceProfile,
    cell_ues: &[&UserEquipment],
    area: &MbmsArea,
    model: &ResourceModel,
) -> Result<f64, RadioError> {
    if cell_ues.is_empty() {
        return Err(RadioError::NoMembers);
    }
    let rate = f64::from(profile.app_rate_kbps);
    match transport {
        TransportKind::Unicast => {
            let mut total = 0u64;
            for i in 0..n_members as usize {
                total += u64::from(unicast_cost(profile, cell_ues[i % cell_ues.len()], model)?);
            }
            Ok(rate / total as f64)
        }
        TransportKind::Multicast => {
            let units = multicast_cost(profile, cell_ues, area, model)?;
            Ok(rate / f64::from(units))
        }
    }
}

/// Smallest membership at which serving every member over unicast costs
/// strictly more than one multicast bearer.
///
/// The running unicast sum against a fixed multicast reservation is the
/// defining semantics; no closed form is used.
pub fn crossover_from_costs(per_ue_units: &[u32], multicast_units: u32) -> Result<u32, RadioError> {
    if per_ue_units.is_empty() || per_ue_units.contains(&0) {
        return Err(RadioError::NoMembers);
    }
    let mut sum = 0u64;
    let mut n = 0u32;
    loop {
        sum += u64::from(per_ue_units[n as usize % per_ue_units.len()]);
        n += 1;
        if sum > u64::from(multicast_units) {
            return Ok(n);
        }
    }
}

/// Crossover membership for a concrete cell population.
pub fn crossover_threshold(
    profile: &ServiceProfile,
    cell_ues: &[&UserEquipment],
    area: &MbmsArea,
    model: &ResourceModel,
) -> Result<u32, RadioError> {
    if cell_ues.is_empty() {
        return Err(RadioError::NoMembers);
    }
    let per_ue: Vec<u32> = cell_ues
        .iter()
        .map(|ue| unicast_cost(profile, ue, model))
        .collect::<Result<_, _>>()?;
    let multicast_units = multicast_cost(profile, cell_ues, area, model)?;
    crossover_from_costs(&per_ue, multicast_units)
}

// ===========================================================================
// Load ledger and admission
// ===========================================================================

/// Which per-cell resource pool a commitment draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PoolKind {
    Unicast,
    Multicast,
}

impl std::fmt::Display for PoolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PoolKind::Unicast => "unicast",
            PoolKind::Multicast => "multicast",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CommitmentEntry {
    units: u32,
    priority: u8,
}

#[derive(Debug, Clone, Default)]
struct CellLoad {
    unicast_capacity: u32,
    multicast_capacity: u32,
    commitments: BTreeMap<(GroupId, PoolKind), CommitmentEntry>,
}

impl CellLoad {
    fn used(&self, pool: PoolKind) -> u32 {
        self.commitments
            .iter()
            .filter(|((_, p), _)| *p == pool)
            .map(|(_, e)| e.units)
            .sum()
    }

    fn capacity(&self, pool: PoolKind) -> u32 {
        match pool {
            PoolKind::Unicast => self.unicast_capacity,
            PoolKind::Multicast => self.multicast_capacity,
        }
    }
}

/// Committed resource units per cell, split into unicast and multicast
/// pools. Every mutation enforces the pool capacities, so a ledger can never
/// record an over-committed cell.
#[derive(Debug, Clone, Default)]
pub struct LoadLedger {
    cells: BTreeMap<CellId, CellLoad>,
}

impl LoadLedger {
    pub fn new() -> Self {
        LoadLedger::default()
    }

    pub fn register_cell(&mut self, cell: &Cell) {
        self.cells.insert(
            cell.cell_id,
            CellLoad {
                unicast_capacity: cell.unicast_pool(),
                multicast_capacity: cell.multicast_pool(),
                commitments: BTreeMap::new(),
            },
        );
    }

    fn cell(&self, cell: CellId) -> Result<&CellLoad, RadioError> {
        self.cells.get(&cell).ok_or(RadioError::UnknownLedgerCell(cell))
    }

    fn cell_mut(&mut self, cell: CellId) -> Result<&mut CellLoad, RadioError> {
        self.cells.get_mut(&cell).ok_or(RadioError::UnknownLedgerCell(cell))
    }

    pub fn used(&self, cell: CellId, pool: PoolKind) -> u32 {
        self.cell(cell).map(|c| c.used(pool)).unwrap_or(0)
    }

    pub fn capacity(&self, cell: CellId, pool: PoolKind) -> u32 {
        self.cell(cell).map(|c| c.capacity(pool)).unwrap_or(0)
    }

    pub fn free(&self, cell: CellId, pool: PoolKind) -> u32 {
        self.capacity(cell, pool).saturating_sub(self.used(cell, pool))
    }

    /// Units committed by one group in one pool of one cell.
    pub fn commitment(&self, cell: CellId, group: GroupId, pool: PoolKind) -> u32 {
        self.cell(cell)
            .ok()
            .and_then(|c| c.commitments.get(&(group, pool)))
            .map(|e| e.units)
            .unwrap_or(0)
    }

    /// Groups holding units in a pool, in (priority, group) order.
    pub fn residents(&self, cell: CellId, pool: PoolKind) -> Vec<(u8, GroupId, u32)> {
        let Ok(load) = self.cell(cell) else {
            return Vec::new();
        };
        let mut out: Vec<(u8, GroupId, u32)> = load
            .commitments
            .iter()
            .filter(|((_, p), e)| *p == pool && e.units > 0)
            .map(|((g, _), e)| (e.priority, *g, e.units))
            .collect();
        out.sort();
        out
    }

    /// Adds units to a group's commitment in one pool.
    pub fn commit(&mut self, cell: CellId, group: GroupId, priority: u8, pool: PoolKind, units: u32) -> Result<(), RadioError> {
        let load = self.cell_mut(cell)?;
        let used = load.used(pool);
        let capacity = load.capacity(pool);
        if used + units > capacity {
            return Err(RadioError::PoolExceeded {
                cell,
                pool,
                used,
                requested: units,
                capacity,
            });
        }
        let entry = load
            .commitments
            .entry((group, pool))
            .or_insert(CommitmentEntry { units: 0, priority });
        entry.units += units;
        entry.priority = priority;
        Ok(())
    }

    /// Returns units from a group's commitment to the pool.
    pub fn release(&mut self, cell: CellId, group: GroupId, pool: PoolKind, units: u32) -> Result<(), RadioError> {
        let load = self.cell_mut(cell)?;
        let committed = load.commitments.get(&(group, pool)).map(|e| e.units).unwrap_or(0);
        if units > committed {
            return Err(RadioError::ReleaseUnderflow {
                cell,
                pool,
                units,
                committed,
            });
        }
        if units == committed {
            load.commitments.remove(&(group, pool));
        } else if let Some(entry) = load.commitments.get_mut(&(group, pool)) {
            entry.units -= units;
        }
        Ok(())
    }

    /// Drops every commitment a group holds in a cell; returns the units
    /// freed per pool.
    pub fn release_group_in_cell(&mut self, cell: CellId, group: GroupId) -> (u32, u32) {
        let Some(load) = self.cells.get_mut(&cell) else {
            return (0, 0);
        };
        let uc = load.commitments.remove(&(group, PoolKind::Unicast)).map(|e| e.units).unwrap_or(0);
        let mc = load.commitments.remove(&(group, PoolKind::Multicast)).map(|e| e.units).unwrap_or(0);
        (uc, mc)
    }

    /// Per-cell totals, for audits.
    pub fn totals(&self) -> BTreeMap<CellId, (u32, u32)> {
        self.cells
            .iter()
            .map(|(id, load)| (*id, (load.used(PoolKind::Unicast), load.used(PoolKind::Multicast))))
            .collect()
    }

    /// Every commitment in the ledger, for audits.
    pub fn commitments(&self) -> Vec<(CellId, GroupId, PoolKind, u32)> {
        let mut out = Vec::new();
        for (cell, load) in &self.cells {
            for ((group, pool), entry) in &load.commitments {
                out.push((*cell, *group, *pool, entry.units));
            }
        }
        out
    }
}

/// Why a request was turned away.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    InsufficientResources,
}

/// Outcome of an admission attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdmitOutcome {
    Admitted {
        units: u32,
        /// Groups whose commitments in the cell were released to make room,
        /// lowest priority first.
        preempted: Vec<GroupId>,
    },
    Rejected(RejectReason),
}

impl AdmitOutcome {
    pub fn is_admitted(&self) -> bool {
        matches!(self, AdmitOutcome::Admitted { .. })
    }
}

/// Requests `units` more capacity in one pool of one cell for a group.
///
/// If the pool cannot fit the request, strictly lower-priority residents of
/// that pool are released, lowest priority first and oldest group first,
/// until it fits. A victim loses its commitments in both pools of the cell,
/// since its transport there is gone either way. If even releasing every
/// eligible victim would not make room, the ledger is left untouched and the
/// request is rejected.
pub fn admit_units(
    group: GroupId,
    priority: u8,
    cell: CellId,
    pool: PoolKind,
    units: u32,
    ledger: &mut LoadLedger,
) -> Result<AdmitOutcome, RadioError> {
    let free = ledger.free(cell, pool);
    ledger.cell(cell)?;
    if units <= free {
        ledger.commit(cell, group, priority, pool, units)?;
        return Ok(AdmitOutcome::Admitted {
            units,
            preempted: Vec::new(),
        });
    }

    let mut chosen = Vec::new();
    let mut reclaimed = 0u32;
    for (victim_priority, victim, victim_units) in ledger.residents(cell, pool) {
        if free + reclaimed >= units {
            break;
        }
        if victim == group || victim_priority >= priority {
            continue;
        }
        chosen.push(victim);
        reclaimed += victim_units;
    }
    if free + reclaimed < units {
        return Ok(AdmitOutcome::Rejected(RejectReason::InsufficientResources));
    }
    for victim in &chosen {
        ledger.release_group_in_cell(cell, *victim);
    }
    ledger.commit(cell, group, priority, pool, units)?;
    Ok(AdmitOutcome::Admitted {
        units,
        preempted: chosen,
    })
}

/// Admission for a group's transport in one cell, costing the request from
/// the membership present there.
pub fn admit(
    group: &GroupCall,
    cell: &Cell,
    transport: TransportKind,
    members_in_cell: &[&UserEquipment],
    area: &MbmsArea,
    model: &ResourceModel,
    ledger: &mut LoadLedger,
) -> Result<AdmitOutcome, RadioError> {
    let (pool, units) = match transport {
        TransportKind::Multicast => (
            PoolKind::Multicast,
            multicast_cost(&group.profile, members_in_cell, area, model)?,
        ),
        TransportKind::Unicast => {
            let mut total = 0u32;
            for ue in members_in_cell {
                total += unicast_cost(&group.profile, ue, model)?;
            }
            (PoolKind::Unicast, total)
        }
    };
    admit_units(group.group_id, group.priority, cell.cell_id, pool, units, ledger)
}
