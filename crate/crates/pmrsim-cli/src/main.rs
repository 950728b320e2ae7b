//! Command-line harness: scenario ingestion, experiment registry, CSV and
//! summary emission.
//!
//! Exit codes are part of the interface: 0 when the run completed, 1 when
//! the requirement check ran and a requirement row failed, 2 when the
//! configuration was unusable. The `PMRSIM_OUT` environment variable
//! overrides `--out` so wrapper scripts can redirect artifacts without
//! touching the argument list.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pmrsim::config::{self, Override};
use pmrsim::experiments::{self, Experiment};
use pmrsim::sim::scenario::{self, ScenarioSpec, TEMPLATE_NAMES};
use pmrsim::sim::Engine;

#[derive(Debug, Parser)]
#[command(
    name = "pmrsim",
    version,
    about = "Deterministic group-call simulator for LTE multicast networks"
)]
struct Cli {
    /// Scenario file to load.
    #[arg(long, value_name = "PATH", conflicts_with = "template")]
    scenario: Option<PathBuf>,

    /// Built-in scenario template: fig2, fig4, fig5 or req-matrix.
    #[arg(long, value_name = "NAME")]
    template: Option<String>,

    /// Replaces the seed carried by the scenario.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Named experiment to run instead of a plain simulation: fig2, fig4,
    /// fig5 or req-matrix. Without --scenario or --template it runs on the
    /// template of the same name.
    #[arg(long, value_name = "NAME")]
    experiment: Option<String>,

    /// Directory the CSV artifacts are written to. The PMRSIM_OUT
    /// environment variable takes precedence.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Worker threads for sweep experiments.
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,

    /// Dotted-path override applied before validation, for example
    /// --set schedule.modification_period_ms=5120. On an array without an
    /// index the override applies to every element. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<Override>,

    /// Check the scenario and exit without simulating.
    #[arg(long)]
    validate: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match try_run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn resolve_spec(cli: &Cli) -> Result<ScenarioSpec, String> {
    let mut spec = if let Some(path) = &cli.scenario {
        config::load_scenario(path, &cli.set).map_err(|e| e.to_string())?
    } else if let Some(name) = &cli.template {
        config::from_template(name, &cli.set).map_err(|e| e.to_string())?
    } else if let Some(name) = &cli.experiment {
        let experiment: Experiment = name.parse().map_err(|e: experiments::ExperimentError| e.to_string())?;
        config::from_template(experiment.default_template(), &cli.set).map_err(|e| e.to_string())?
    } else {
        return Err(format!(
            "nothing to run; give --scenario PATH, --template NAME or --experiment NAME (templates: {})",
            TEMPLATE_NAMES.join(", ")
        ));
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn out_dir(cli: &Cli) -> PathBuf {
    std::env::var_os("PMRSIM_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| cli.out.clone())
}

fn write_resolved_spec(dir: &std::path::Path, spec: &ScenarioSpec) -> Result<PathBuf, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join("scenario.toml");
    let text = toml::to_string_pretty(spec).map_err(|e| e.to_string())?;
    std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(path)
}

fn try_run(cli: Cli) -> Result<ExitCode, String> {
    let spec = resolve_spec(&cli)?;

    if cli.validate {
        println!("ok");
        return Ok(ExitCode::SUCCESS);
    }

    let dir = out_dir(&cli);

    if let Some(name) = &cli.experiment {
        let experiment: Experiment = name.parse().map_err(|e: experiments::ExperimentError| e.to_string())?;
        let outcome = experiments::run(experiment, &spec, cli.jobs).map_err(|e| e.to_string())?;
        let mut written = vec![write_resolved_spec(&dir, &spec)?];
        written.extend(outcome.write_to(&dir).map_err(|e| e.to_string())?);
        for line in &outcome.summary {
            println!("{line}");
        }
        for path in &written {
            println!("wrote {}", path.display());
        }
        return Ok(if outcome.requirement_failures > 0 {
            ExitCode::from(1)
        } else {
            ExitCode::SUCCESS
        });
    }

    let built = scenario::build(&spec).map_err(|e| e.to_string())?;
    let group_count = built.groups.len();
    let mut engine = Engine::new(built).map_err(|e| e.to_string())?;
    engine.run().map_err(|e| e.to_string())?;
    engine.liveness_check()?;
    let summary = engine.summary();
    let mut written = vec![write_resolved_spec(&dir, &spec)?];
    written.extend(engine.write_artifacts(&dir).map_err(|e| e.to_string())?);
    println!(
        "simulated {} ms: {} events, {}/{} calls admitted",
        spec.duration_ms,
        engine.trace().len(),
        summary.groups_admitted,
        group_count
    );
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
