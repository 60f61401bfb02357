//! Command-line front end. Errors go to stderr as one JSON object.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::evaluator::{Averaging, ErrorReport, EvalError, Evaluator, Reporting, SweepGrid};
use crate::experiments::{run_experiment_to, Engine, ExperimentError, ExperimentId, ExperimentSpec, ResultRow, TOOLKIT_VERSION};
use crate::model::{FusionRule, Scenario, ScenarioSpec, Threshold, ValidationError};
use crate::sim::{estimate_error, simulate_trial_traced, trial_seed, SimError, SimOptions};

#[derive(Debug, Parser)]
#[command(name = "coopmc", version, about = "Error analysis and simulation of cooperative molecular communication")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic expected error of a scenario.
    Analytic {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "noisy")]
        reporting: Reporting,
        /// Average over sampled bit histories instead of all of them.
        #[arg(long)]
        history_samples: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print the full report as JSON instead of a CSV row.
        #[arg(long)]
        json: bool,
    },
    /// Particle-simulation estimate of a scenario's error.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        json: bool,
        /// Write the per-sample counts of the first trial as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Runs an experiment spec.
    Sweep {
        spec: PathBuf,
        /// CSV output; overrides the spec's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive threshold search.
    Optimize {
        scenario: PathBuf,
        #[arg(long, default_value_t = 40)]
        xi_r_max: u32,
        #[arg(long, default_value_t = 40)]
        xi_fc_max: u32,
        #[arg(long, value_enum, default_value = "noisy")]
        reporting: Reporting,
    },
    /// Regenerates a figure's data table.
    Reproduce {
        figure: String,
        #[arg(long)]
        out: PathBuf,
        /// Adds the simulator to presets that do not already run it.
        #[arg(long)]
        with_sim: bool,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Failure classes with their exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("{0}")]
    UnknownFigure(String),
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 3,
            CliError::Json { .. } => 4,
            CliError::Invalid(_) | CliError::Spec(_) => 5,
            CliError::UnknownFigure(_) => 6,
            CliError::Eval(_) | CliError::Sim(_) => 7,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Json { .. } => "json",
            CliError::Invalid(_) | CliError::Spec(_) => "invalid_input",
            CliError::UnknownFigure(_) => "unknown_figure",
            CliError::Eval(_) => "evaluation",
            CliError::Sim(_) => "simulation",
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::UnknownExperiment(_) => CliError::UnknownFigure(e.to_string()),
            ExperimentError::InvalidSpec(msg) => CliError::Spec(msg),
            ExperimentError::Validation(v) => CliError::Invalid(v),
            ExperimentError::Eval(e) => CliError::Eval(e),
            ExperimentError::Sim(e) => CliError::Sim(e),
            ExperimentError::Io { path, source } => CliError::Io { path, source },
            ExperimentError::Csv { path, source } => CliError::Io { path, source: io::Error::other(source.to_string()) },
        }
    }
}

#[derive(Serialize)]
struct ErrorMessage<'a> {
    error: &'a str,
    exit_code: u8,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<ViolationJson>,
}

#[derive(Serialize)]
struct ViolationJson {
    field: String,
    observed: String,
    constraint: String,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let spec = ScenarioSpec::from_json(&read_text(path)?).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    Ok(spec.validate()?)
}

fn write_stdout(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    out.write_all(bytes).and_then(|_| out.flush()).map_err(|source| CliError::Io { path: "<stdout>".into(), source })
}

fn single_row(scenario: &Scenario, engine: Engine, reporting: Reporting, report: &ErrorReport) -> ResultRow {
    let det = scenario.detector();
    let soft = match scenario.spec().fusion {
        FusionRule::SoftSum { threshold } => Some(threshold.get()),
        _ => None,
    };
    ResultRow {
        experiment: "custom".into(),
        series: scenario.spec().fusion.label(),
        engine,
        reporting,
        k: scenario.num_rx(),
        xi_r: det.threshold_rx.iter().map(|t| t.get().to_string()).collect::<Vec<_>>().join(";"),
        xi_fc: (reporting == Reporting::Noisy && soft.is_none()).then_some(det.threshold_fc.get()),
        xi_soft: soft,
        optimized: false,
        s0: scenario.physical().molecules_per_one_tx,
        s_k: scenario.physical().molecules_per_one_rx[0],
        q_md: report.mean_q_md(),
        q_fa: report.mean_q_fa(),
        q_err: report.q_bar,
        method: report.method.label().into(),
        ci_halfwidth: report.ci_halfwidth,
        seed: report.method.seed(),
        n_trials: match report.method {
            crate::evaluator::Method::Simulation { n_trials, .. } => Some(n_trials),
            _ => None,
        },
        version: TOOLKIT_VERSION.into(),
    }
}

fn emit_report(scenario: &Scenario, engine: Engine, reporting: Reporting, report: &ErrorReport, json: bool) -> Result<(), CliError> {
    if json {
        let mut text = serde_json::to_string_pretty(report).expect("report serializes");
        text.push('\n');
        return write_stdout(text.as_bytes());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(single_row(scenario, engine, reporting, report)).expect("row serializes");
    write_stdout(&w.into_inner().expect("in-memory writer"))
}

#[derive(Serialize)]
struct OptimumJson {
    rule: String,
    reporting: Reporting,
    xi_r: Vec<u32>,
    xi_fc: Option<u32>,
    xi_soft: Option<u32>,
    report: ErrorReport,
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analytic { scenario, reporting, history_samples, seed, json } => {
            let s = load_scenario(&scenario)?;
            let averaging = match history_samples {
                Some(n_samples) => Averaging::MonteCarlo { n_samples, seed },
                None => Averaging::Exact,
            };
            let report = Evaluator::new(s.clone())?.expected_error(reporting, averaging)?;
            emit_report(&s, Engine::Analytic, reporting, &report, json)
        }
        Command::Simulate { scenario, trials, seed, json, trace } => {
            let s = load_scenario(&scenario)?;
            if let Some(path) = trace {
                let file = fs::File::create(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                simulate_trial_traced(&s, trial_seed(seed, 0), &SimOptions::default(), file)?;
            }
            let report = estimate_error(&s, trials, seed)?;
            emit_report(&s, Engine::Simulator, Reporting::Noisy, &report, json)
        }
        Command::Sweep { spec, out } => {
            let text = read_text(&spec)?;
            let experiment = ExperimentSpec::from_json(&text).map_err(|source| CliError::Json { path: spec.clone(), source })?;
            let path = out
                .or_else(|| experiment.output.clone())
                .ok_or_else(|| CliError::Spec("no output path: pass --out or set `output` in the spec".into()))?;
            run_experiment_to(&experiment, &path)?;
            Ok(())
        }
        Command::Optimize { scenario, xi_r_max, xi_fc_max, reporting } => {
            let s = load_scenario(&scenario)?;
            let rule = s.spec().fusion;
            let evaluator = Evaluator::new(s.clone())?;
            let result = if rule.is_soft() {
                let range: Vec<u32> = (1..=xi_r_max * s.num_rx() as u32).collect();
                let (best, report) = evaluator.optimize_soft(&range)?;
                let best_rule = FusionRule::SoftSum { threshold: Threshold(best) };
                OptimumJson { rule: best_rule.label(), reporting: Reporting::Perfect, xi_r: vec![], xi_fc: None, xi_soft: Some(best), report }
            } else {
                let fc_max = if reporting == Reporting::Perfect { 1 } else { xi_fc_max };
                let best = evaluator.optimize_thresholds(&SweepGrid::square(xi_r_max, fc_max), reporting)?;
                OptimumJson {
                    rule: rule.label(),
                    reporting,
                    xi_r: best.xi_r,
                    xi_fc: (reporting == Reporting::Noisy).then_some(best.xi_fc),
                    xi_soft: None,
                    report: best.report,
                }
            };
            let mut text = serde_json::to_string_pretty(&result).expect("optimum serializes");
            text.push('\n');
            write_stdout(text.as_bytes())
        }
        Command::Reproduce { figure, out, with_sim, trials, seed } => {
            let id = ExperimentId::parse(&figure)?;
            let mut spec = ExperimentSpec::preset(id)?;
            if with_sim && !spec.engines.contains(&Engine::Simulator) {
                spec.engines.push(Engine::Simulator);
            }
            if let Some(n) = trials {
                spec.n_trials = n;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            let path = out.join(format!("{}.csv", id.label()));
            spec.output = Some(path.clone());
            run_experiment_to(&spec, &path)?;
            Ok(())
        }
    }
}

/// Parses arguments, runs the command and reports failures on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = ErrorMessage { error: "usage", exit_code: 2, message: e.to_string().trim_end().to_string(), violations: vec![] };
            eprintln!("{}", serde_json::to_string(&msg).expect("message serializes"));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let violations = match &e {
                CliError::Invalid(v) => v
                    .violations
                    .iter()
                    .map(|x| ViolationJson { field: x.field.clone(), observed: x.observed.clone(), constraint: x.constraint.to_string() })
                    .collect(),
                _ => vec![],
            };
            let msg = ErrorMessage { error: e.kind(), exit_code: e.exit_code(), message: e.to_string(), violations };
            eprintln!("{}", serde_json::to_string(&msg).expect("message serializes"));
            ExitCode::from(e.exit_code())
        }
    }
}
