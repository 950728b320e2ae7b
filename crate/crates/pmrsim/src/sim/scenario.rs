//! Scenario descriptions: the serializable run configuration, its
//! validation, the builder that turns it into a live network, and the
//! named presets.
//!
//! A scenario is fully declarative. Everything random (member placement,
//! channel qualities, arrival jitter, mobility) is drawn from named streams
//! of the scenario seed, so a file plus a seed pins the whole run.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bearer::{BearerOption, LatencyBudget, McchSchedule};
use crate::domain::{Network, ServiceProfile, SyncMode};
use crate::gcse::{CallManager, GcseError, Policy, PolicyKind, UliSource};
use crate::ids::GroupId;
use crate::radio::{EffTable, ResourceModel, SfnGain};
use crate::sim::rng::stream_rng;
use crate::time::SimTime;

/// One structural problem found in a scenario, with the field path that
/// caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ConfigIssue>),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error(transparent)]
    Build(#[from] GcseError),
}

fn default_one() -> u32 {
    1
}

fn default_capacity() -> Option<u32> {
    None
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    /// Number of identical cells this entry expands to.
    #[serde(default = "default_one")]
    pub count: u32,
    pub bandwidth_mhz: u8,
    pub mbsfn_subframes: u8,
    /// Resource units per subframe; defaults to 5 per MHz.
    #[serde(default = "default_capacity")]
    pub capacity_units: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AreaSpec {
    /// Indexes into the expanded cell list.
    pub cells: Vec<u32>,
    pub sync_mode: String,
    #[serde(default = "default_one")]
    pub sfn_cluster_size: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct UeSpec {
    /// Channel-quality draw range, inclusive.
    #[serde(default)]
    pub quality_min: u8,
    #[serde(default = "default_q_max")]
    pub quality_max: u8,
}

fn default_q_max() -> u8 {
    15
}

impl Default for UeSpec {
    fn default() -> Self {
        UeSpec {
            quality_min: 0,
            quality_max: 15,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    #[serde(default = "default_one")]
    pub count: u32,
    /// Members per group; UEs are created for each group and spread
    /// round-robin over the listed cells.
    pub members: u32,
    pub service: String,
    #[serde(default = "default_one_u8")]
    pub priority: u8,
    /// Indexes into the expanded cell list; empty means all cells.
    #[serde(default)]
    pub cells: Vec<u32>,
}

fn default_one_u8() -> u8 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub bandwidth_mhz: u8,
    #[serde(default)]
    pub units_per_subframe: Option<u32>,
    #[serde(default)]
    pub mbsfn_subframes: Option<u8>,
    #[serde(default)]
    pub cell_edge_quality: Option<u8>,
    #[serde(default)]
    pub overload_penalty: Option<f64>,
    #[serde(default)]
    pub sfn_reference_cluster: Option<u32>,
    /// Bits per unit per quality step; omitted means the default staircase.
    #[serde(default)]
    pub eff_levels: Option<Vec<u32>>,
    #[serde(default)]
    pub sfn_gain_per_doubling: Option<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default = "default_period")]
    pub modification_period_ms: u64,
    #[serde(default)]
    pub phase_ms: u64,
}

fn default_period() -> u64 {
    50
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec {
            modification_period_ms: default_period(),
            phase_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default)]
    pub startup_min_ms: Option<u64>,
    #[serde(default)]
    pub startup_max_ms: Option<u64>,
    #[serde(default)]
    pub bearer_establishment_ms: Option<u64>,
    #[serde(default)]
    pub radio_if_ms: Option<u64>,
    #[serde(default)]
    pub network_if_ms: Option<u64>,
    #[serde(default)]
    pub processing_ms: Option<u64>,
    #[serde(default)]
    pub requirement_ms: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    /// "static" or "dynamic".
    #[serde(default = "default_policy_kind")]
    pub kind: String,
    #[serde(default = "default_loss_threshold")]
    pub loss_threshold: f64,
    #[serde(default = "default_one")]
    pub switch_hysteresis: u32,
    #[serde(default = "default_uli_interval")]
    pub uli_interval_ms: u64,
    /// "pgw" or "ue".
    #[serde(default = "default_uli_source")]
    pub uli_source: String,
}

fn default_policy_kind() -> String {
    "static".to_string()
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec {
            kind: default_policy_kind(),
            loss_threshold: default_loss_threshold(),
            switch_hysteresis: default_one(),
            uli_interval_ms: default_uli_interval(),
            uli_source: default_uli_source(),
        }
    }
}

fn default_loss_threshold() -> f64 {
    0.05
}

fn default_uli_interval() -> u64 {
    1000
}

fn default_uli_source() -> String {
    "pgw".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BearerSpec {
    /// "pre_established" or "dynamic_bearer".
    #[serde(default = "default_bearer_option")]
    pub option: String,
    #[serde(default = "default_true")]
    pub unicast_preestablished: bool,
}

fn default_bearer_option() -> String {
    "pre_established".to_string()
}

impl Default for BearerSpec {
    fn default() -> Self {
        BearerSpec {
            option: default_bearer_option(),
            unicast_preestablished: true,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    /// "staggered" gives first_call + i * spacing; "poisson" draws
    /// exponential inter-arrivals with the given mean.
    #[serde(default = "default_process")]
    pub process: String,
    #[serde(default = "default_first_call")]
    pub first_call_ms: u64,
    #[serde(default = "default_spacing")]
    pub spacing_ms: u64,
    #[serde(default = "default_mean_interarrival")]
    pub mean_interarrival_ms: u64,
    /// 0 means calls run to the end of the scenario.
    #[serde(default)]
    pub call_duration_ms: u64,
}

fn default_process() -> String {
    "staggered".to_string()
}

fn default_first_call() -> u64 {
    1000
}

fn default_spacing() -> u64 {
    100
}

fn default_mean_interarrival() -> u64 {
    1000
}

impl Default for ArrivalSpec {
    fn default() -> Self {
        ArrivalSpec {
            process: default_process(),
            first_call_ms: default_first_call(),
            spacing_ms: default_spacing(),
            mean_interarrival_ms: default_mean_interarrival(),
            call_duration_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MobilitySpec {
    #[serde(default)]
    pub enabled: bool,
    /// Mean exponential dwell before a UE moves to another cell of its
    /// area.
    #[serde(default = "default_dwell")]
    pub mean_dwell_ms: u64,
}

fn default_dwell() -> u64 {
    30_000
}

impl Default for MobilitySpec {
    fn default() -> Self {
        MobilitySpec {
            enabled: false,
            mean_dwell_ms: default_dwell(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_uli_interval")]
    pub interval_ms: u64,
    /// Loss draw range per report, in parts per million.
    #[serde(default)]
    pub loss_ppm_min: u32,
    #[serde(default = "default_loss_ppm_max")]
    pub loss_ppm_max: u32,
}

fn default_loss_ppm_max() -> u32 {
    200_000
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            enabled: false,
            interval_ms: default_uli_interval(),
            loss_ppm_min: 0,
            loss_ppm_max: default_loss_ppm_max(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TalkSpec {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_talk_interval")]
    pub interval_ms: u64,
    #[serde(default = "default_burst")]
    pub burst_ms: u64,
}

fn default_talk_interval() -> u64 {
    5000
}

fn default_burst() -> u64 {
    3000
}

impl Default for TalkSpec {
    fn default() -> Self {
        TalkSpec {
            enabled: false,
            interval_ms: default_talk_interval(),
            burst_ms: default_burst(),
        }
    }
}

/// The whole run configuration, as read from a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub duration_ms: u64,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub budget: BudgetSpec,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub bearers: BearerSpec,
    pub cells: Vec<CellSpec>,
    pub areas: Vec<AreaSpec>,
    #[serde(default)]
    pub ues: UeSpec,
    pub groups: Vec<GroupSpec>,
    #[serde(default)]
    pub arrivals: ArrivalSpec,
    #[serde(default)]
    pub mobility: MobilitySpec,
    #[serde(default)]
    pub loss: LossSpec,
    #[serde(default)]
    pub talk: TalkSpec,
}

impl ScenarioSpec {
    /// Structural and referential validation; empty result means usable.
    pub fn validate(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut push = |path: &str, message: String| {
            issues.push(ConfigIssue {
                path: path.to_string(),
                message,
            })
        };
        if self.duration_ms == 0 {
            push("duration_ms", "must be positive".into());
        }
        if !matches!(self.model.bandwidth_mhz, 5 | 10 | 15 | 20) {
            push("model.bandwidth_mhz", format!("{} MHz is not a supported carrier", self.model.bandwidth_mhz));
        }
        if let Some(m) = self.model.mbsfn_subframes {
            if m > 6 {
                push("model.mbsfn_subframes", format!("{m} exceeds the ceiling of 6 multicast subframes per 10-subframe frame"));
            }
        }
        if self.schedule.modification_period_ms == 0 {
            push("schedule.modification_period_ms", "must be positive".into());
        }
        match self.policy.kind.as_str() {
            "static" | "dynamic" => {}
            other => push("policy.kind", format!("{other:?} is not \"static\" or \"dynamic\"")),
        }
        if !(self.policy.loss_threshold > 0.0 && self.policy.loss_threshold < 1.0) {
            push("policy.loss_threshold", format!("{} must lie in (0, 1)", self.policy.loss_threshold));
        }
        match self.policy.uli_source.as_str() {
            "pgw" | "ue" => {}
            other => push("policy.uli_source", format!("{other:?} is not \"pgw\" or \"ue\"")),
        }
        match self.bearers.option.as_str() {
            "pre_established" | "dynamic_bearer" => {}
            other => push("bearers.option", format!("{other:?} is not \"pre_established\" or \"dynamic_bearer\"")),
        }
        if self.cells.is_empty() {
            push("cells", "at least one cell is required".into());
        }
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.count == 0 {
                push(&format!("cells[{i}].count"), "must be positive".into());
            }
            if cell.mbsfn_subframes > 6 {
                push(
                    &format!("cells[{i}].mbsfn_subframes"),
                    format!("{} exceeds the ceiling of 6 multicast subframes per 10-subframe frame", cell.mbsfn_subframes),
                );
            }
        }
        let n_cells: u32 = self.cells.iter().map(|c| c.count).sum();
        if self.areas.is_empty() {
            push("areas", "at least one area is required".into());
        }
        for (i, area) in self.areas.iter().enumerate() {
            if area.cells.is_empty() {
                push(&format!("areas[{i}].cells"), "an area needs at least one cell".into());
            }
            for c in &area.cells {
                if *c >= n_cells {
                    push(&format!("areas[{i}].cells"), format!("cell index {c} out of range (have {n_cells} cells)"));
                }
            }
            match area.sync_mode.as_str() {
                "sc" | "single_cell" | "sfn" => {}
                other => push(&format!("areas[{i}].sync_mode"), format!("{other:?} is not \"sc\" or \"sfn\"")),
            }
            if area.sync_mode == "sfn" && area.sfn_cluster_size < 2 {
                push(&format!("areas[{i}].sfn_cluster_size"), "an SFN area needs at least 2 synchronized cells".into());
            }
        }
        if self.ues.quality_min > self.ues.quality_max {
            push("ues.quality_min", format!("{} exceeds quality_max {}", self.ues.quality_min, self.ues.quality_max));
        }
        for (i, group) in self.groups.iter().enumerate() {
            if group.members == 0 {
                push(&format!("groups[{i}].members"), "a group needs at least one member".into());
            }
            if group.members > 500 {
                push(&format!("groups[{i}].members"), format!("{} exceeds the 500-member group limit", group.members));
            }
            match group.service.as_str() {
                "voice" | "video" => {}
                other => push(&format!("groups[{i}].service"), format!("{other:?} is not \"voice\" or \"video\"")),
            }
            for c in &group.cells {
                if *c >= n_cells {
                    push(&format!("groups[{i}].cells"), format!("cell index {c} out of range (have {n_cells} cells)"));
                }
            }
        }
        match self.arrivals.process.as_str() {
            "staggered" | "poisson" => {}
            other => push("arrivals.process", format!("{other:?} is not \"staggered\" or \"poisson\"")),
        }
        if self.arrivals.process == "poisson" && self.arrivals.mean_interarrival_ms == 0 {
            push("arrivals.mean_interarrival_ms", "poisson arrivals need a positive mean".into());
        }
        if self.loss.enabled && self.loss.loss_ppm_min > self.loss.loss_ppm_max {
            push("loss.loss_ppm_min", "exceeds loss_ppm_max".into());
        }
        issues
    }

    pub fn resource_model(&self) -> ResourceModel {
        let mut model = ResourceModel::for_bandwidth(self.model.bandwidth_mhz);
        if let Some(u) = self.model.units_per_subframe {
            model.units_per_subframe = u;
        }
        if let Some(m) = self.model.mbsfn_subframes {
            model.mbsfn_subframes = m;
        }
        if let Some(q) = self.model.cell_edge_quality {
            model.cell_edge_quality = q;
        }
        if let Some(p) = self.model.overload_penalty {
            model.overload_penalty = p;
        }
        if let Some(c) = self.model.sfn_reference_cluster {
            model.sfn_reference_cluster = c;
        }
        if let Some(levels) = &self.model.eff_levels {
            if let Ok(eff) = EffTable::new(levels.clone(), 15) {
                model.eff = eff;
            }
        }
        if let Some(g) = self.model.sfn_gain_per_doubling {
            model.sfn = SfnGain { per_doubling: g };
        }
        model
    }

    pub fn latency_budget(&self) -> LatencyBudget {
        let mut b = LatencyBudget::default();
        let ms = SimTime::from_ms;
        if let Some(v) = self.budget.startup_min_ms {
            b.startup_min = ms(v);
        }
        if let Some(v) = self.budget.startup_max_ms {
            b.startup_max = ms(v);
        }
        if let Some(v) = self.budget.bearer_establishment_ms {
            b.bearer_establishment = ms(v);
        }
        if let Some(v) = self.budget.radio_if_ms {
            b.radio_if = ms(v);
        }
        if let Some(v) = self.budget.network_if_ms {
            b.network_if = ms(v);
        }
        if let Some(v) = self.budget.processing_ms {
            b.processing = ms(v);
        }
        if let Some(v) = self.budget.requirement_ms {
            b.requirement = ms(v);
        }
        b
    }

    pub fn mcch_schedule(&self) -> McchSchedule {
        McchSchedule::new(
            SimTime::from_ms(self.schedule.modification_period_ms),
            SimTime::from_ms(self.schedule.phase_ms),
        )
        .expect("validated period")
    }

    pub fn policy(&self) -> Policy {
        Policy {
            kind: if self.policy.kind == "dynamic" {
                PolicyKind::DynamicActivation
            } else {
                PolicyKind::StaticActivation
            },
            loss_threshold: self.policy.loss_threshold,
            switch_hysteresis: self.policy.switch_hysteresis,
            uli_interval: SimTime::from_ms(self.policy.uli_interval_ms),
            uli_source: if self.policy.uli_source == "ue" {
                UliSource::UeReported
            } else {
                UliSource::PgwUli
            },
        }
    }

    pub fn bearer_option(&self) -> BearerOption {
        if self.bearers.option == "dynamic_bearer" {
            BearerOption::DynamicBearer
        } else {
            BearerOption::PreEstablished
        }
    }
}

/// A scenario instantiated into live state, ready to drive.
pub struct BuiltScenario {
    pub manager: CallManager,
    pub groups: Vec<GroupId>,
    /// One call request per group, in arrival order.
    pub arrivals: Vec<(SimTime, GroupId)>,
    pub duration: SimTime,
    pub seed: u64,
    pub spec: ScenarioSpec,
}

/// Expands a scenario description into a network, manager and arrival schedule.
pub fn build(spec: &ScenarioSpec) -> Result<BuiltScenario, ScenarioError> {
    let issues = spec.validate();
    if !issues.is_empty() {
        return Err(ScenarioError::Invalid(issues));
    }
    let mut topology_rng = stream_rng(spec.seed, "topology");
    let mut arrival_rng = stream_rng(spec.seed, "arrivals");

    let mut net = Network::new();
    let mut cell_ids = Vec::new();
    for cell in &spec.cells {
        for _ in 0..cell.count {
            let capacity = cell.capacity_units.unwrap_or(u32::from(cell.bandwidth_mhz) * 5);
            let id = net
                .add_cell(cell.bandwidth_mhz, cell.mbsfn_subframes, capacity)
                .map_err(GcseError::from)?;
            cell_ids.push(id);
        }
    }
    for area in &spec.areas {
        let cells: BTreeSet<_> = area.cells.iter().map(|i| cell_ids[*i as usize]).collect();
        let (mode, cluster) = if area.sync_mode == "sfn" {
            (SyncMode::Sfn, area.sfn_cluster_size)
        } else {
            (SyncMode::SingleCell, 1)
        };
        net.add_area(cells, mode, cluster).map_err(GcseError::from)?;
    }

    let mut groups = Vec::new();
    for group in &spec.groups {
        let profile = if group.service == "video" {
            ServiceProfile::video()
        } else {
            ServiceProfile::voice()
        };
        let home_cells: Vec<_> = if group.cells.is_empty() {
            cell_ids.clone()
        } else {
            group.cells.iter().map(|i| cell_ids[*i as usize]).collect()
        };
        for _ in 0..group.count {
            let mut members = BTreeSet::new();
            for m in 0..group.members {
                let cell = home_cells[m as usize % home_cells.len()];
                let quality = topology_rng.gen_range(spec.ues.quality_min..=spec.ues.quality_max);
                members.insert(net.register_ue(cell, quality).map_err(GcseError::from)?);
            }
            groups.push(net.create_group(members, profile, group.priority).map_err(GcseError::from)?);
        }
    }

    let mut arrivals = Vec::new();
    let mut t = SimTime::from_ms(spec.arrivals.first_call_ms);
    for (i, group) in groups.iter().enumerate() {
        if i > 0 {
            let gap_ms = match spec.arrivals.process.as_str() {
                "poisson" => {
                    let u: f64 = arrival_rng.gen_range(f64::EPSILON..1.0);
                    (-(u.ln()) * spec.arrivals.mean_interarrival_ms as f64).round() as u64
                }
                _ => spec.arrivals.spacing_ms,
            };
            t = t + SimTime::from_ms(gap_ms);
        }
        arrivals.push((t, *group));
    }

    let manager = CallManager::new(
        net,
        spec.resource_model(),
        spec.latency_budget(),
        spec.mcch_schedule(),
        spec.policy(),
        spec.bearer_option(),
        spec.bearers.unicast_preestablished,
    )?;

    Ok(BuiltScenario {
        manager,
        groups,
        arrivals,
        duration: SimTime::from_ms(spec.duration_ms),
        seed: spec.seed,
        spec: spec.clone(),
    })
}

/// Named presets matching the experiment registry.
pub fn template(name: &str) -> Result<ScenarioSpec, ScenarioError> {
    match name {
        "fig2" => Ok(fig2_template()),
        "fig4" => Ok(fig4_template()),
        "fig5" => Ok(fig5_template()),
        "req-matrix" => Ok(req_matrix_template()),
        other => Err(ScenarioError::UnknownTemplate(other.to_string())),
    }
}

pub const TEMPLATE_NAMES: [&str; 4] = ["fig2", "fig4", "fig5", "req-matrix"];

fn base_spec() -> ScenarioSpec {
    ScenarioSpec {
        duration_ms: 60_000,
        seed: 0,
        model: ModelSpec {
            bandwidth_mhz: 10,
            units_per_subframe: None,
            mbsfn_subframes: None,
            cell_edge_quality: None,
            overload_penalty: None,
            sfn_reference_cluster: None,
            eff_levels: None,
            sfn_gain_per_doubling: None,
        },
        schedule: ScheduleSpec {
            modification_period_ms: 50,
            phase_ms: 0,
        },
        budget: BudgetSpec::default(),
        policy: PolicySpec {
            kind: "static".to_string(),
            loss_threshold: default_loss_threshold(),
            switch_hysteresis: 1,
            uli_interval_ms: 1000,
            uli_source: "pgw".to_string(),
        },
        bearers: BearerSpec {
            option: "pre_established".to_string(),
            unicast_preestablished: true,
        },
        cells: vec![CellSpec {
            count: 1,
            bandwidth_mhz: 10,
            mbsfn_subframes: 6,
            capacity_units: None,
        }],
        areas: vec![AreaSpec {
            cells: vec![0],
            sync_mode: "sc".to_string(),
            sfn_cluster_size: 1,
        }],
        ues: UeSpec::default(),
        groups: Vec::new(),
        arrivals: ArrivalSpec::default(),
        mobility: MobilitySpec::default(),
        loss: LossSpec::default(),
        talk: TalkSpec::default(),
    }
}

/// Group-count throughput sweep backdrop: one cell, a handful of dynamic
/// voice groups. The sweep itself is analytic; this scenario also serves as
/// a small golden-trace workload.
fn fig2_template() -> ScenarioSpec {
    let mut spec = base_spec();
    spec.policy.kind = "dynamic".to_string();
    spec.bearers.option = "dynamic_bearer".to_string();
    spec.groups = vec![GroupSpec {
        count: 4,
        members: 10,
        service: "voice".to_string(),
        priority: 1,
        cells: vec![0],
    }];
    spec
}

/// Latency-comparison backdrop; the experiment sweeps both bearer options
/// and both MCCH periods over at least ten thousand arrivals.
fn fig4_template() -> ScenarioSpec {
    let mut spec = base_spec();
    spec.groups = vec![GroupSpec {
        count: 1,
        members: 5,
        service: "voice".to_string(),
        priority: 1,
        cells: vec![0],
    }];
    spec
}

/// Member-count efficiency sweep: one cell, one dynamic video group with
/// heterogeneous qualities.
fn fig5_template() -> ScenarioSpec {
    let mut spec = base_spec();
    spec.policy.kind = "dynamic".to_string();
    spec.bearers.option = "dynamic_bearer".to_string();
    spec.groups = vec![GroupSpec {
        count: 1,
        members: 36,
        service: "video".to_string(),
        priority: 1,
        cells: vec![0],
    }];
    spec
}

/// The service-requirement workload: 36 voice groups over four SFN cells,
/// at least 2000 users, one group of 500, pre-established bearers, 50 ms
/// control period.
fn req_matrix_template() -> ScenarioSpec {
    let mut spec = base_spec();
    spec.cells = vec![CellSpec {
        count: 4,
        bandwidth_mhz: 10,
        mbsfn_subframes: 6,
        capacity_units: None,
    }];
    spec.areas = vec![AreaSpec {
        cells: vec![0, 1, 2, 3],
        sync_mode: "sfn".to_string(),
        sfn_cluster_size: 4,
    }];
    spec.groups = vec![
        GroupSpec {
            count: 1,
            members: 500,
            service: "voice".to_string(),
            priority: 1,
            cells: vec![0, 1, 2, 3],
        },
        GroupSpec {
            count: 35,
            members: 43,
            service: "voice".to_string(),
            priority: 1,
            cells: vec![0, 1, 2, 3],
        },
    ];
    spec.arrivals = ArrivalSpec {
        process: "staggered".to_string(),
        first_call_ms: 1000,
        spacing_ms: 100,
        mean_interarrival_ms: 1000,
        call_duration_ms: 0,
    };
    spec
}
