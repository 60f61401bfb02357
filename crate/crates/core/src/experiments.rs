//! Experiment presets and the CSV/JSON outputs they produce.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evaluator::{
    baseline_error, Averaging, BaselineKind, ErrorReport, EvalError, Evaluator, Reporting, SweepGrid, XiRAxis, DEFAULT_XI_MAX,
};
use crate::model::{defaults, FusionRule, Scenario, ScenarioSpec, Threshold, ValidationError, SCHEMA_VERSION};
use crate::sim::{estimate_error_grid, SimError, SimPoint, RNG_ALGORITHM};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_TRIALS: u64 = 20_000;
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("unknown experiment `{0}`; expected one of fig2, fig3, fig4, fig5, fig6")]
    UnknownExperiment(String),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    Simulator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Custom,
}

impl ExperimentId {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentId::Fig2 => "fig2",
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::Fig5 => "fig5",
            ExperimentId::Fig6 => "fig6",
            ExperimentId::Custom => "custom",
        }
    }

    pub fn parse(name: &str) -> Result<Self, ExperimentError> {
        match name {
            "fig2" => Ok(ExperimentId::Fig2),
            "fig3" => Ok(ExperimentId::Fig3),
            "fig4" => Ok(ExperimentId::Fig4),
            "fig5" => Ok(ExperimentId::Fig5),
            "fig6" => Ok(ExperimentId::Fig6),
            other => Err(ExperimentError::UnknownExperiment(other.to_string())),
        }
    }
}

/// Scenario family the experiment is built on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseScenario {
    /// Symmetric receivers 1..=K; the report budget is split evenly.
    Symmetric,
    /// The three-receiver asymmetric topology.
    Asymmetric,
    Custom(Box<ScenarioSpec>),
}

/// Optional edits applied to every scenario of an experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Overrides {
    pub p_one: Option<f64>,
    pub molecules_per_one_tx: Option<f64>,
    pub molecules_per_one_rx: Option<f64>,
    pub sequence_length: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// Error at every grid point.
    Sweep,
    /// Error at the optimal grid point per receiver count, rule and reporting.
    Optimum,
}

/// Experiment definition as stored in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub id: ExperimentId,
    pub base: BaseScenario,
    #[serde(default)]
    pub overrides: Overrides,
    pub study: Study,
    pub grid: SweepGrid,
    pub reporting: Vec<Reporting>,
    pub engines: Vec<Engine>,
    /// Adds the optimized soft-fusion bound.
    #[serde(default)]
    pub soft: bool,
    /// Adds the point-to-point reference links.
    #[serde(default)]
    pub baselines: bool,
    #[serde(default = "default_trials")]
    pub n_trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Monte Carlo history samples; exact enumeration when absent.
    #[serde(default)]
    pub history_samples: Option<u64>,
    /// CSV path for `sweep`; sidecar JSON is written next to it.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

const HARD_RULES: [FusionRule; 3] = [FusionRule::And, FusionRule::Or, FusionRule::Majority];

impl ExperimentSpec {
    fn new(id: ExperimentId, base: BaseScenario, study: Study, grid: SweepGrid, reporting: Reporting) -> Self {
        ExperimentSpec {
            schema_version: SCHEMA_VERSION,
            id,
            base,
            overrides: Overrides::default(),
            study,
            grid,
            reporting: vec![reporting],
            engines: vec![Engine::Analytic],
            soft: false,
            baselines: false,
            n_trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            history_samples: None,
            output: None,
        }
    }

    /// Built-in presets.
    ///
    /// * `fig2`: K = 3 symmetric, perfect reporting, AND/OR/majority versus
    ///   a shared receiver threshold, plus soft fusion and both baselines.
    /// * `fig3`: K = 2 symmetric, OR, noisy reporting, full threshold surface.
    /// * `fig4`: as `fig3` on a reduced grid, analytic and simulated.
    /// * `fig5`: optimized error versus K = 1..6 for the three hard rules,
    ///   noisy reporting, plus both baselines.
    /// * `fig6`: K = 3 asymmetric, receiver thresholds (6, 8, 11), noisy
    ///   reporting, versus the FC threshold.
    pub fn preset(id: ExperimentId) -> Result<Self, ExperimentError> {
        let full = 1..=DEFAULT_XI_MAX;
        let grid = |xi_r: Vec<u32>, xi_fc: Vec<u32>, k: Vec<usize>, rules: Vec<FusionRule>| SweepGrid { xi_r: XiRAxis::Shared(xi_r), xi_fc, k, rules };
        Ok(match id {
            ExperimentId::Fig2 => {
                let mut s = Self::new(
                    id,
                    BaseScenario::Symmetric,
                    Study::Sweep,
                    grid(full.collect(), vec![1], vec![3], HARD_RULES.to_vec()),
                    Reporting::Perfect,
                );
                s.soft = true;
                s.baselines = true;
                s
            }
            ExperimentId::Fig3 => Self::new(
                id,
                BaseScenario::Symmetric,
                Study::Sweep,
                grid(full.clone().collect(), full.collect(), vec![2], vec![FusionRule::Or]),
                Reporting::Noisy,
            ),
            ExperimentId::Fig4 => {
                let mut s = Self::new(
                    id,
                    BaseScenario::Symmetric,
                    Study::Sweep,
                    grid((6..=14).collect(), vec![4, 7, 10], vec![2], vec![FusionRule::Or]),
                    Reporting::Noisy,
                );
                s.engines = vec![Engine::Analytic, Engine::Simulator];
                s
            }
            ExperimentId::Fig5 => {
                let mut s = Self::new(
                    id,
                    BaseScenario::Symmetric,
                    Study::Optimum,
                    grid(full.clone().collect(), full.collect(), (1..=6).collect(), HARD_RULES.to_vec()),
                    Reporting::Noisy,
                );
                s.baselines = true;
                s
            }
            ExperimentId::Fig6 => Self::new(
                id,
                BaseScenario::Asymmetric,
                Study::Sweep,
                SweepGrid { xi_r: XiRAxis::PerRx(vec![vec![6], vec![8], vec![11]]), xi_fc: full.collect(), k: vec![3], rules: HARD_RULES.to_vec() },
                Reporting::Noisy,
            ),
            ExperimentId::Custom => return Err(ExperimentError::InvalidSpec("custom experiments have no preset".into())),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn receiver_counts(&self) -> Result<Vec<usize>, ExperimentError> {
        let fixed = match &self.base {
            BaseScenario::Symmetric => None,
            BaseScenario::Asymmetric => Some(defaults::ASYMMETRIC_RX.len()),
            BaseScenario::Custom(spec) => Some(spec.topology.rx_positions.len()),
        };
        match (fixed, self.grid.k.is_empty()) {
            (Some(k), true) => Ok(vec![k]),
            (Some(k), false) if self.grid.k.iter().all(|&x| x == k) => Ok(vec![k]),
            (Some(k), false) => Err(ExperimentError::InvalidSpec(format!("this scenario has exactly {k} receivers"))),
            (None, true) => Err(ExperimentError::InvalidSpec("grid.k must list receiver counts".into())),
            (None, false) => {
                if let Some(&bad) = self.grid.k.iter().find(|&&k| !(1..=defaults::SYMMETRIC_RX.len()).contains(&k)) {
                    return Err(ExperimentError::InvalidSpec(format!("symmetric topology supports K = 1..=6, got {bad}")));
                }
                Ok(self.grid.k.clone())
            }
        }
    }

    fn rules(&self) -> Vec<FusionRule> {
        if !self.grid.rules.is_empty() {
            return self.grid.rules.clone();
        }
        match &self.base {
            BaseScenario::Custom(spec) if !spec.fusion.is_soft() => vec![spec.fusion],
            _ => vec![FusionRule::Majority],
        }
    }

    /// The scenario used for `k` receivers and `rule`, thresholds unset.
    pub fn scenario(&self, k: usize, rule: FusionRule) -> Result<Scenario, ExperimentError> {
        let mut spec = match &self.base {
            BaseScenario::Symmetric => defaults::symmetric(k, 1, 1, rule),
            BaseScenario::Asymmetric => defaults::asymmetric([1; 3], 1, rule),
            BaseScenario::Custom(spec) => {
                let mut spec = (**spec).clone();
                spec.fusion = rule;
                spec
            }
        };
        let o = &self.overrides;
        if let Some(p) = o.p_one {
            spec.physical.p_one = p;
        }
        if let Some(s) = o.molecules_per_one_tx {
            spec.physical.molecules_per_one_tx = s;
        }
        if let Some(s) = o.molecules_per_one_rx {
            spec.physical.molecules_per_one_rx = vec![s; k];
        }
        if let Some(l) = o.sequence_length {
            spec.timing.sequence_length = l;
        }
        Ok(spec.validate()?)
    }

    fn averaging(&self) -> Averaging {
        match self.history_samples {
            Some(n_samples) => Averaging::MonteCarlo { n_samples, seed: self.seed },
            None => Averaging::Exact,
        }
    }

    fn check(&self) -> Result<(), ExperimentError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ExperimentError::InvalidSpec(format!("schema_version {} is not supported", self.schema_version)));
        }
        if self.reporting.is_empty() {
            return Err(ExperimentError::InvalidSpec("reporting must not be empty".into()));
        }
        if self.engines.is_empty() {
            return Err(ExperimentError::InvalidSpec("engines must not be empty".into()));
        }
        if self.engines.contains(&Engine::Simulator) && self.n_trials == 0 {
            return Err(ExperimentError::InvalidSpec("n_trials must be at least 1".into()));
        }
        if self.rules().iter().any(|r| r.is_soft()) {
            return Err(ExperimentError::InvalidSpec("use `soft: true` instead of a soft rule on the grid".into()));
        }
        Ok(())
    }
}

/// One CSV row: one grid point evaluated by one engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    /// Fusion rule label, `soft`, or `baseline-tx-rx` / `baseline-tx-fc`.
    pub series: String,
    pub engine: Engine,
    pub reporting: Reporting,
    pub k: usize,
    /// Receiver thresholds in receiver order, `;`-separated.
    pub xi_r: String,
    pub xi_fc: Option<u32>,
    pub xi_soft: Option<u32>,
    pub optimized: bool,
    pub s0: f64,
    pub s_k: f64,
    pub q_md: f64,
    pub q_fa: f64,
    pub q_err: f64,
    pub method: String,
    pub ci_halfwidth: Option<f64>,
    pub seed: Option<u64>,
    pub n_trials: Option<u64>,
    pub version: String,
}

impl ResultRow {
    pub fn xi_r_values(&self) -> Vec<u32> {
        self.xi_r.split(';').filter(|s| !s.is_empty()).map(|s| s.parse().expect("thresholds are integers")).collect()
    }
}

/// Parameters of one row apart from the report itself.
struct RowKey<'a> {
    series: String,
    engine: Engine,
    reporting: Reporting,
    scenario: &'a Scenario,
    xi_r: &'a [u32],
    xi_fc: Option<u32>,
    xi_soft: Option<u32>,
    optimized: bool,
}

fn make_row(spec: &ExperimentSpec, key: RowKey<'_>, report: &ErrorReport) -> ResultRow {
    let n_trials = match report.method {
        crate::evaluator::Method::Simulation { n_trials, .. } => Some(n_trials),
        _ => None,
    };
    ResultRow {
        experiment: spec.id.label().to_string(),
        series: key.series,
        engine: key.engine,
        reporting: key.reporting,
        k: key.scenario.num_rx(),
        xi_r: key.xi_r.iter().map(u32::to_string).collect::<Vec<_>>().join(";"),
        xi_fc: key.xi_fc,
        xi_soft: key.xi_soft,
        optimized: key.optimized,
        s0: key.scenario.physical().molecules_per_one_tx,
        s_k: key.scenario.physical().molecules_per_one_rx[0],
        q_md: report.mean_q_md(),
        q_fa: report.mean_q_fa(),
        q_err: report.q_bar,
        method: report.method.label().to_string(),
        ci_halfwidth: report.ci_halfwidth,
        seed: report.method.seed(),
        n_trials,
        version: TOOLKIT_VERSION.to_string(),
    }
}

/// Provenance written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetadata {
    pub schema_version: u32,
    pub toolkit_version: String,
    pub rng_algorithm: String,
    pub experiment: ExperimentSpec,
    /// Scenario of every (K, rule) block, thresholds as evaluated last.
    pub scenarios: Vec<ScenarioSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub rows: Vec<ResultRow>,
    pub metadata: ExperimentMetadata,
}

/// Runs every block of the experiment and returns all rows.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentTable, ExperimentError> {
    let mut rows = Vec::new();
    let metadata = run_blocks(spec, |block| {
        rows.extend_from_slice(block);
        Ok(())
    })?;
    Ok(ExperimentTable { rows, metadata })
}

/// Runs the experiment, writing `<stem>.csv` and `<stem>.scenario.json`.
/// Rows are flushed after every block.
pub fn run_experiment_to(spec: &ExperimentSpec, csv_path: &Path) -> Result<ExperimentTable, ExperimentError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExperimentError::Io { path, source }
    };
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = File::create(csv_path).map_err(io_err(csv_path))?;
    let mut writer = csv::Writer::from_writer(file);
    let mut rows = Vec::new();
    let csv_err = |source| ExperimentError::Csv { path: csv_path.to_path_buf(), source };
    let metadata = run_blocks(spec, |block| {
        for row in block {
            writer.serialize(row).map_err(csv_err)?;
        }
        writer.flush().map_err(io_err(csv_path))?;
        rows.extend_from_slice(block);
        Ok(())
    })?;
    writer.flush().map_err(io_err(csv_path))?;

    let sidecar = sidecar_path(csv_path);
    let mut out = File::create(&sidecar).map_err(io_err(&sidecar))?;
    let json = serde_json::to_string_pretty(&metadata).expect("metadata serializes");
    out.write_all(json.as_bytes()).and_then(|_| out.write_all(b"\n")).map_err(io_err(&sidecar))?;
    Ok(ExperimentTable { rows, metadata })
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("scenario.json")
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let err = |source| ExperimentError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(path).map_err(err)?;
    reader.deserialize().collect::<Result<_, _>>().map_err(err)
}

fn run_blocks(
    spec: &ExperimentSpec,
    mut emit: impl FnMut(&[ResultRow]) -> Result<(), ExperimentError>,
) -> Result<ExperimentMetadata, ExperimentError> {
    spec.check()?;
    let mut scenarios = Vec::new();
    let simulate = spec.engines.contains(&Engine::Simulator);
    let analytic = spec.engines.contains(&Engine::Analytic);

    for k in spec.receiver_counts()? {
        let assignments = spec.grid.assignments(k)?;
        for rule in spec.rules() {
            let scenario = spec.scenario(k, rule)?;
            let evaluator = Evaluator::new(scenario.clone())?;
            let mut rows = Vec::new();
            let mut sim_points = Vec::new();
            for &reporting in &spec.reporting {
                let xi_fc: Vec<u32> = match reporting {
                    Reporting::Perfect => vec![spec.grid.xi_fc[0]],
                    Reporting::Noisy => spec.grid.xi_fc.clone(),
                };
                let show_fc = |x: u32| (reporting == Reporting::Noisy).then_some(x);
                let points: Vec<(Vec<u32>, u32, Option<ErrorReport>)> = match spec.study {
                    Study::Sweep if analytic => {
                        let grid = SweepGrid { xi_r: spec.grid.xi_r.clone(), xi_fc: xi_fc.clone(), k: vec![], rules: vec![] };
                        evaluator
                            .sweep(&grid, reporting, spec.averaging())?
                            .into_iter()
                            .map(|p| (p.xi_r, p.xi_fc, Some(p.report)))
                            .collect()
                    }
                    Study::Sweep => assignments.iter().flat_map(|a| xi_fc.iter().map(move |&f| (a.clone(), f, None))).collect(),
                    Study::Optimum => {
                        let grid = SweepGrid { xi_r: spec.grid.xi_r.clone(), xi_fc: xi_fc.clone(), k: vec![], rules: vec![] };
                        let best = evaluator.optimize_thresholds(&grid, reporting)?;
                        vec![(best.xi_r, best.xi_fc, Some(best.report))]
                    }
                };
                let optimized = spec.study == Study::Optimum;
                for (xi_r, f, report) in points {
                    if let (true, Some(report)) = (analytic, report) {
                        let key = RowKey {
                            series: rule.label(),
                            engine: Engine::Analytic,
                            reporting,
                            scenario: &scenario,
                            xi_r: &xi_r,
                            xi_fc: show_fc(f),
                            xi_soft: None,
                            optimized,
                        };
                        rows.push(make_row(spec, key, &report));
                    }
                    if simulate {
                        sim_points.push(SimPoint { xi_r, xi_fc: f, rule, reporting });
                    }
                }
            }
            if simulate && !sim_points.is_empty() {
                let reports = estimate_error_grid(&scenario, &sim_points, spec.n_trials, spec.seed)?;
                for (p, report) in sim_points.iter().zip(&reports) {
                    let key = RowKey {
                        series: rule.label(),
                        engine: Engine::Simulator,
                        reporting: p.reporting,
                        scenario: &scenario,
                        xi_r: &p.xi_r,
                        xi_fc: (p.reporting == Reporting::Noisy).then_some(p.xi_fc),
                        xi_soft: None,
                        optimized: spec.study == Study::Optimum,
                    };
                    rows.push(make_row(spec, key, report));
                }
            }
            let last = assignments.last().expect("non-empty grid");
            let xi_fc_last = *spec.grid.xi_fc.last().expect("non-empty grid");
            scenarios.push(scenario.with_thresholds(last.iter().map(|&x| Threshold(x)).collect(), Threshold(xi_fc_last))?.into_spec());
            emit(&rows)?;
        }

        if spec.soft {
            emit(&soft_rows(spec, k)?)?;
        }
    }

    if spec.baselines {
        emit(&baseline_rows(spec)?)?;
    }

    Ok(ExperimentMetadata {
        schema_version: SCHEMA_VERSION,
        toolkit_version: TOOLKIT_VERSION.to_string(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        experiment: spec.clone(),
        scenarios,
    })
}

/// Optimized soft fusion over pooled thresholds `1..=40 K`.
fn soft_rows(spec: &ExperimentSpec, k: usize) -> Result<Vec<ResultRow>, ExperimentError> {
    let base = spec.scenario(k, FusionRule::Or)?;
    let thresholds: Vec<u32> = (1..=DEFAULT_XI_MAX * k as u32).collect();
    let (best, report) = Evaluator::new(base.clone())?.optimize_soft(&thresholds)?;
    let soft_rule = FusionRule::SoftSum { threshold: Threshold(best) };
    let key = |engine| RowKey {
        series: soft_rule.label(),
        engine,
        reporting: Reporting::Perfect,
        scenario: &base,
        xi_r: &[],
        xi_fc: None,
        xi_soft: Some(best),
        optimized: true,
    };
    let mut rows = Vec::new();
    if spec.engines.contains(&Engine::Analytic) {
        rows.push(make_row(spec, key(Engine::Analytic), &report));
    }
    if spec.engines.contains(&Engine::Simulator) {
        let point = SimPoint { xi_r: vec![1; k], xi_fc: 1, rule: soft_rule, reporting: Reporting::Perfect };
        let sim = estimate_error_grid(&base, &[point], spec.n_trials, spec.seed)?;
        rows.push(make_row(spec, key(Engine::Simulator), &sim[0]));
    }
    Ok(rows)
}

/// Point-to-point links: per shared receiver threshold for sweeps,
/// optimized otherwise. Analytic only.
fn baseline_rows(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, ExperimentError> {
    let thresholds: Vec<Option<u32>> = match (&spec.study, &spec.grid.xi_r) {
        (Study::Sweep, XiRAxis::Shared(values)) => values.iter().map(|&x| Some(x)).collect(),
        _ => vec![None],
    };
    let mut rows = Vec::new();
    for kind in [BaselineKind::TxRx, BaselineKind::TxFc] {
        for &threshold in &thresholds {
            let result = baseline_error(kind, threshold)?;
            let scenario = kind.scenario(result.threshold)?;
            let key = RowKey {
                series: format!("baseline-{}", kind.label()),
                engine: Engine::Analytic,
                reporting: Reporting::Perfect,
                scenario: &scenario,
                xi_r: &[result.threshold],
                xi_fc: None,
                xi_soft: None,
                optimized: threshold.is_none(),
            };
            rows.push(make_row(spec, key, &result.report));
        }
    }
    Ok(rows)
}
