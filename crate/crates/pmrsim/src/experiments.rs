//! Named experiments producing the artifact CSV files.
//!
//! Four experiments cover the study's workloads: a group-count throughput
//! sweep over SC and SFN delivery ("fig2"), a Monte-Carlo comparison of the
//! two bearer options under both control periods ("fig4"), a member-count
//! spectral-efficiency sweep ("fig5"), and the public-safety requirement
//! check ("req-matrix"). Each one takes a scenario as its parameter source;
//! the templates of the same names are the intended defaults, but any
//! compatible scenario works.
//!
//! Experiments are pure functions of (scenario, seed): re-running with the
//! same inputs reproduces every output file byte for byte. The Monte-Carlo
//! sweep fans out over worker threads, with every call's draws derived from
//! an indexed stream so the worker count cannot change the results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::bearer::{setup_latency, BearerOption, McchSchedule};
use crate::domain::{check_requirements, RequirementMatrix, RequirementReport, ServiceProfile};
use crate::radio::{
    self, EmbmsMode, RadioError, ResourceModel, TransportKind,
};
use crate::sim::metrics::fmt_ms;
use crate::sim::rng::indexed_rng;
use crate::sim::scenario::{self, ScenarioError, ScenarioSpec};
use crate::sim::{Engine, SimError};
use crate::time::SimTime;

/// How many arrivals the Monte-Carlo latency sweep draws per control period.
pub const LATENCY_SWEEP_CALLS: u64 = 10_000;

/// The two control periods the latency sweep always compares, in
/// milliseconds: the proposed short period and the legacy minimum.
pub const SWEEP_PERIODS_MS: [u64; 2] = [50, 5120];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Fig2,
    Fig4,
    Fig5,
    ReqMatrix,
}

pub const EXPERIMENT_NAMES: [&str; 4] = ["fig2", "fig4", "fig5", "req-matrix"];

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig2 => "fig2",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::ReqMatrix => "req-matrix",
        }
    }

    /// The template this experiment runs on when no scenario is given.
    pub fn default_template(self) -> &'static str {
        self.name()
    }
}

impl FromStr for Experiment {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig2" => Ok(Experiment::Fig2),
            "fig4" => Ok(Experiment::Fig4),
            "fig5" => Ok(Experiment::Fig5),
            "req-matrix" => Ok(Experiment::ReqMatrix),
            other => Err(ExperimentError::Unknown(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown experiment {0:?}; expected one of fig2, fig4, fig5, req-matrix")]
    Unknown(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Everything an experiment produced. Files are written by the caller in
/// one place so parallel sweeps never interleave output.
pub struct ExperimentOutcome {
    /// Output files as (file name, contents).
    pub files: Vec<(String, String)>,
    /// Human-readable result lines for the terminal.
    pub summary: Vec<String>,
    /// Requirement rows that failed; nonzero only for the requirement check.
    pub requirement_failures: u32,
    /// The simulation behind the outcome, when the experiment ran one.
    pub engine: Option<Engine>,
}

impl ExperimentOutcome {
    /// Writes the produced files plus any engine artifacts into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents)?;
            written.push(path);
        }
        if let Some(engine) = &self.engine {
            written.extend(engine.write_artifacts(dir)?);
        }
        Ok(written)
    }
}

/// Runs one experiment against a scenario. `jobs` bounds worker threads for
/// sweeps; all other experiments ignore it.
pub fn run(
    experiment: Experiment,
    spec: &ScenarioSpec,
    jobs: usize,
) -> Result<ExperimentOutcome, ExperimentError> {
    match experiment {
        Experiment::Fig2 => Ok(throughput_sweep(spec)),
        Experiment::Fig4 => Ok(latency_sweep(spec, jobs)),
        Experiment::Fig5 => efficiency_sweep(spec),
        Experiment::ReqMatrix => requirement_check(spec),
    }
}

fn fmt_kbps(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.3}")
    }
}

fn model_at_bandwidth(spec: &ScenarioSpec, bandwidth_mhz: u8) -> ResourceModel {
    let mut patched = spec.clone();
    patched.model.bandwidth_mhz = bandwidth_mhz;
    patched.model.units_per_subframe = None;
    patched.resource_model()
}

/// Group-count throughput sweep: aggregate goodput against the number of
/// concurrent groups, for SC and SFN delivery, voice and video services,
/// 5 and 10 MHz carriers.
fn throughput_sweep(spec: &ScenarioSpec) -> ExperimentOutcome {
    let mut csv = String::from("n_groups,mode,profile,bandwidth,throughput_kbps\n");
    let mut summary = Vec::new();
    for bandwidth in [5u8, 10] {
        let model = model_at_bandwidth(spec, bandwidth);
        let decline_span = if model.overload_penalty > 0.0 {
            (1.0 / model.overload_penalty).ceil() as u32 + 1
        } else {
            20
        };
        for profile in [ServiceProfile::voice(), ServiceProfile::video()] {
            let sat_sc = radio::saturation_point(EmbmsMode::Sc, &profile, &model);
            let sat_sfn = radio::saturation_point(EmbmsMode::Sfn, &profile, &model);
            let n_hi = sat_sc.max(sat_sfn) + decline_span;
            for mode in [EmbmsMode::Sc, EmbmsMode::Sfn] {
                for n in 0..=n_hi {
                    let kbps = radio::system_throughput(n, mode, &profile, &model);
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{}",
                        n,
                        mode.name(),
                        profile.kind.name(),
                        bandwidth,
                        fmt_kbps(kbps)
                    );
                }
            }
            let peak_sc = radio::system_throughput(sat_sc, EmbmsMode::Sc, &profile, &model);
            let peak_sfn = radio::system_throughput(sat_sfn, EmbmsMode::Sfn, &profile, &model);
            summary.push(format!(
                "{}@{} MHz: sc peaks at {} kbps ({} groups), sfn at {} kbps ({} groups)",
                profile.kind.name(),
                bandwidth,
                fmt_kbps(peak_sc),
                sat_sc,
                fmt_kbps(peak_sfn),
                sat_sfn
            ));
        }
    }
    ExperimentOutcome {
        files: vec![("throughput.csv".to_string(), csv)],
        summary,
        requirement_failures: 0,
        engine: None,
    }
}

fn latency_rows(
    spec: &ScenarioSpec,
    period_ms: u64,
    range: std::ops::Range<u64>,
) -> String {
    let budget = spec.latency_budget();
    let schedule = McchSchedule::new(SimTime::from_ms(period_ms), SimTime::from_us(0))
        .expect("sweep periods are nonzero");
    let seed = spec.seed;
    let arrival_tag = format!("arrival-{period_ms}");
    let startup_tag = format!("startup-{period_ms}");
    let mut out = String::new();
    for i in range {
        let mut arrival_rng = indexed_rng(seed, &arrival_tag, i);
        let arrival = SimTime::from_us(arrival_rng.gen_range(0..period_ms * 1000));
        let mut startup_rng = indexed_rng(seed, &startup_tag, i);
        let startup = SimTime::from_us(
            startup_rng.gen_range(budget.startup_min.as_us()..=budget.startup_max.as_us()),
        );
        for option in [BearerOption::PreEstablished, BearerOption::DynamicBearer] {
            let lat = setup_latency(option, &budget, &schedule, arrival, startup);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                i,
                option.name(),
                period_ms,
                fmt_ms(lat.startup),
                fmt_ms(lat.bearer),
                fmt_ms(lat.mcch_wait),
                fmt_ms(lat.total()),
                lat.meets(&budget)
            );
        }
    }
    out
}

/// Monte-Carlo setup-latency sweep: both bearer options under both control
/// periods, paired per arrival so the per-call option difference is the
/// bearer-establishment constant.
fn latency_sweep(spec: &ScenarioSpec, jobs: usize) -> ExperimentOutcome {
    let jobs = jobs.max(1);
    let mut csv = String::from(
        "call_id,option,mcch_period_ms,startup_ms,bearer_ms,mcch_wait_ms,total_ms,meets_300ms\n",
    );
    let mut summary = Vec::new();
    let budget = spec.latency_budget();
    for period_ms in SWEEP_PERIODS_MS {
        let chunk = LATENCY_SWEEP_CALLS.div_ceil(jobs as u64);
        let parts: Vec<String> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..jobs as u64 {
                let lo = (w * chunk).min(LATENCY_SWEEP_CALLS);
                let hi = ((w + 1) * chunk).min(LATENCY_SWEEP_CALLS);
                handles.push(scope.spawn(move || latency_rows(spec, period_ms, lo..hi)));
            }
            handles.into_iter().map(|h| h.join().expect("worker")).collect()
        });
        for part in &parts {
            csv.push_str(part);
        }
        for option in [BearerOption::PreEstablished, BearerOption::DynamicBearer] {
            let marker = format!(",{},{period_ms},", option.name());
            let mut within = 0u64;
            let mut total = 0u64;
            for line in csv.lines().filter(|l| l.contains(&marker)) {
                total += 1;
                if line.ends_with("true") {
                    within += 1;
                }
            }
            summary.push(format!(
                "period {period_ms} ms, {}: {within}/{total} calls within {} ms",
                option.name(),
                budget.requirement.as_ms_f64()
            ));
        }
    }
    ExperimentOutcome {
        files: vec![("setup_latency.csv".to_string(), csv)],
        summary,
        requirement_failures: 0,
        engine: None,
    }
}

/// Member-count efficiency sweep: per-member goodput normalized to allocated
/// resources, for unicast and multicast delivery, over the first group's
/// population, plus the switch point between them.
fn efficiency_sweep(spec: &ScenarioSpec) -> Result<ExperimentOutcome, ExperimentError> {
    let built = scenario::build(spec)?;
    let net = built.manager.network();
    let model = built.manager.model().clone();
    let group_id = *built.groups.first().ok_or_else(|| {
        ScenarioError::Invalid(vec![scenario::ConfigIssue {
            path: "groups".to_string(),
            message: "the efficiency sweep needs at least one group".to_string(),
        }])
    })?;
    let group = built.manager.network().group(group_id).expect("built group exists");
    let profile = group.profile;
    let first_member = *group.members.iter().next().expect("groups have members");
    let cell = net.ue(first_member).expect("member registered").serving_cell;
    let ues = net.members_in_cell(group_id, cell).expect("group exists");
    let area_id = net.area_of_cell(cell).expect("cell belongs to an area");
    let area = net.area(area_id).expect("area exists");

    let n_star = radio::crossover_threshold(&profile, &ues, area, &model)?;
    let multicast_eff =
        radio::spectral_efficiency(1, TransportKind::Multicast, &profile, &ues, area, &model)?;
    let mut csv = String::from("n_members,unicast_eff,multicast_eff,envelope,n_star\n");
    for n in 1..=ues.len() as u32 {
        let unicast_eff =
            radio::spectral_efficiency(n, TransportKind::Unicast, &profile, &ues, area, &model)?;
        let envelope = unicast_eff.max(multicast_eff);
        let _ = writeln!(
            csv,
            "{n},{unicast_eff:.6},{multicast_eff:.6},{envelope:.6},{n_star}"
        );
    }
    let summary = vec![format!(
        "{} over {} members in one cell: multicast pays off from {} members",
        profile.kind.name(),
        ues.len(),
        n_star
    )];
    Ok(ExperimentOutcome {
        files: vec![("spectral_efficiency.csv".to_string(), csv)],
        summary,
        requirement_failures: 0,
        engine: None,
    })
}

fn findings_csv(report: &RequirementReport) -> String {
    let mut csv = String::from("requirement,required,measured,pass\n");
    for f in &report.findings {
        let _ = writeln!(csv, "{},{},{},{}", f.requirement, f.required, f.measured, f.pass);
    }
    csv
}

/// Runs the scenario and checks the outcome against the service-requirement
/// thresholds.
fn requirement_check(spec: &ScenarioSpec) -> Result<ExperimentOutcome, ExperimentError> {
    let built = scenario::build(spec)?;
    let mut engine = Engine::new(built)?;
    engine.run()?;
    let report = check_requirements(&engine.summary(), &RequirementMatrix::default());
    let mut summary = Vec::new();
    for f in &report.findings {
        summary.push(format!(
            "{} {}: required {}, measured {}",
            if f.pass { "PASS" } else { "FAIL" },
            f.requirement,
            f.required,
            f.measured
        ));
    }
    let requirement_failures = report.findings.iter().filter(|f| !f.pass).count() as u32;
    Ok(ExperimentOutcome {
        files: vec![("requirements.csv".to_string(), findings_csv(&report))],
        summary,
        requirement_failures,
        engine: Some(engine),
    })
}
