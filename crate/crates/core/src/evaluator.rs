//! Sequence-level expected global error.
//!
//! The per-interval global error depends on the emitted bits before the
//! current interval. [`HistorySet`] lists those histories, either all of them
//! with their prior probabilities or a Monte Carlo sample of full sequences.
//! For each receiver and receiver threshold a [`LinkTable`] stores, for every
//! history and current bit, the probability that the fusion center receives a
//! 1 for every FC threshold of interest; fusing the tables and averaging gives
//! an [`ErrorReport`]. Threshold sweeps reuse the tables across grid points.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelError;
use crate::detection::{poisson_below, DetectionModel};
use crate::fusion::{fuse_asymmetric, fuse_symmetric, global_error, FusionError, PerRxErrorVector};
use crate::model::{defaults, FusionRule, Scenario, Threshold, ValidationError, Vec3};

/// Longest sequence for which all histories are enumerated.
pub const EXACT_MAX_L: usize = 12;
/// Longest sequence supported by Monte Carlo history sampling.
pub const SAMPLED_MAX_L: usize = 64;
/// Default threshold search range.
pub const DEFAULT_XI_MAX: u32 = 40;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("exact enumeration supports L <= {max}, got L = {length}; use Monte Carlo averaging instead")]
    SequenceTooLong { length: usize, max: usize },
    #[error("sweep grid axis `{0}` is empty")]
    EmptyGrid(&'static str),
    #[error("sweep grid axis `{0}` contains a threshold below 1")]
    ZeroThreshold(&'static str),
    #[error("per-receiver threshold axis has {got} entries for {k} receivers")]
    AxisMismatch { got: usize, k: usize },
    #[error("Monte Carlo averaging needs at least one sample")]
    NoSamples,
    #[error("rule {0:?} is not a hard fusion rule")]
    SoftRule(FusionRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Reporting {
    /// The FC receives every local decision without error.
    Perfect,
    /// RX -> FC reports travel over their own diffusive links.
    Noisy,
}

impl Reporting {
    pub fn label(self) -> &'static str {
        match self {
            Reporting::Perfect => "perfect",
            Reporting::Noisy => "noisy",
        }
    }
}

/// How bit histories are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    #[default]
    Exact,
    MonteCarlo { n_samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    ExactEnumeration,
    MonteCarlo { n_samples: u64, seed: u64 },
    Simulation { n_trials: u64, seed: u64 },
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::ExactEnumeration => "exact",
            Method::MonteCarlo { .. } => "monte_carlo",
            Method::Simulation { .. } => "simulation",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match *self {
            Method::ExactEnumeration => None,
            Method::MonteCarlo { seed, .. } | Method::Simulation { seed, .. } => Some(seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalError {
    pub q_md: f64,
    pub q_fa: f64,
    pub q_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub per_interval: Vec<IntervalError>,
    pub q_bar: f64,
    pub method: Method,
    /// 95% half-width, Monte Carlo and simulation only.
    pub ci_halfwidth: Option<f64>,
}

impl ErrorReport {
    /// Interval-averaged global miss-detection probability.
    pub fn mean_q_md(&self) -> f64 {
        self.per_interval.iter().map(|e| e.q_md).sum::<f64>() / self.per_interval.len() as f64
    }

    pub fn mean_q_fa(&self) -> f64 {
        self.per_interval.iter().map(|e| e.q_fa).sum::<f64>() / self.per_interval.len() as f64
    }
}

/// One conditioning history: the bits emitted before interval `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryItem {
    /// 1-based interval.
    pub j: usize,
    /// Bit `i` is the bit of interval `i + 1`.
    pub pattern: u64,
    pub weight: f64,
    pub sample: usize,
}

impl HistoryItem {
    pub fn bits_with(&self, current: bool) -> Vec<bool> {
        let mut bits: Vec<bool> = (0..self.j - 1).map(|i| self.pattern >> i & 1 == 1).collect();
        bits.push(current);
        bits
    }
}

/// Histories to average over, with weights summing to one per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySet {
    pub intervals: usize,
    pub items: Vec<HistoryItem>,
    pub method: Method,
    samples: usize,
}

impl HistorySet {
    /// All `2^(j-1)` histories of every interval, weighted by the bit prior.
    pub fn exact(length: usize, p_one: f64) -> Result<Self, EvalError> {
        if length > EXACT_MAX_L {
            return Err(EvalError::SequenceTooLong { length, max: EXACT_MAX_L });
        }
        let mut items = Vec::with_capacity((1 << length) - 1);
        for j in 1..=length {
            let n = j - 1;
            for pattern in 0..(1u64 << n) {
                let ones = pattern.count_ones() as i32;
                let weight = p_one.powi(ones) * (1.0 - p_one).powi(n as i32 - ones);
                items.push(HistoryItem { j, pattern, weight, sample: 0 });
            }
        }
        Ok(HistorySet { intervals: length, items, method: Method::ExactEnumeration, samples: 1 })
    }

    /// `n_samples` i.i.d. sequences; each contributes its prefixes to every
    /// interval with weight `1 / n_samples`.
    pub fn sampled(length: usize, p_one: f64, n_samples: u64, seed: u64) -> Result<Self, EvalError> {
        if length > SAMPLED_MAX_L {
            return Err(EvalError::SequenceTooLong { length, max: SAMPLED_MAX_L });
        }
        if n_samples == 0 {
            return Err(EvalError::NoSamples);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight = 1.0 / n_samples as f64;
        let mut items = Vec::with_capacity(n_samples as usize * length);
        for sample in 0..n_samples as usize {
            let mut pattern = 0u64;
            for i in 0..length {
                if rng.gen_bool(p_one) {
                    pattern |= 1 << i;
                }
            }
            for j in 1..=length {
                let prefix = if j == 1 { 0 } else { pattern & ((1u64 << (j - 1)) - 1) };
                items.push(HistoryItem { j, pattern: prefix, weight, sample });
            }
        }
        Ok(HistorySet {
            intervals: length,
            items,
            method: Method::MonteCarlo { n_samples, seed },
            samples: n_samples as usize,
        })
    }

    pub fn build(length: usize, p_one: f64, averaging: Averaging) -> Result<Self, EvalError> {
        match averaging {
            Averaging::Exact => Self::exact(length, p_one),
            Averaging::MonteCarlo { n_samples, seed } => Self::sampled(length, p_one, n_samples, seed),
        }
    }

    /// Sum of item weights per interval.
    pub fn weight_per_interval(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.intervals];
        for item in &self.items {
            w[item.j - 1] += item.weight;
        }
        w
    }
}

/// Probability that the FC receives a 1 from one receiver, per history item,
/// current bit and FC threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    n_fc: usize,
    probs: Vec<f64>,
}

impl LinkTable {
    /// Builds the table for receiver `k` with threshold `xi_r`. With perfect
    /// reporting the FC threshold is irrelevant and a single column is kept.
    pub fn build(model: &DetectionModel, k: usize, xi_r: Threshold, reporting: Reporting, histories: &HistorySet, xi_fc_max: u32) -> Self {
        let n_fc = match reporting {
            Reporting::Perfect => 1,
            Reporting::Noisy => xi_fc_max as usize,
        };
        let rows: Vec<Vec<f64>> = histories
            .items
            .par_iter()
            .map(|item| {
                let mut out = Vec::with_capacity(2 * n_fc);
                let mut bits = item.bits_with(false);
                let mut probs = model.decision_probs(k, xi_r, &bits);
                for current in [false, true] {
                    if current {
                        let j = item.j;
                        bits[j - 1] = true;
                        probs[j - 1] = 1.0 - poisson_below(model.rx_mean(k, &bits, j), xi_r.get());
                    }
                    match reporting {
                        Reporting::Perfect => out.push(probs[item.j - 1]),
                        Reporting::Noisy => out.extend(model.link_outcome_from_probs(k, &probs, xi_fc_max).fc_one),
                    }
                }
                out
            })
            .collect();
        LinkTable { n_fc, probs: rows.concat() }
    }

    /// Probability of a received 1 for history `item`, current bit and FC
    /// threshold.
    fn received_one(&self, item: usize, current: bool, xi_fc: u32) -> f64 {
        let column = if self.n_fc == 1 { 0 } else { xi_fc as usize - 1 };
        self.probs[(item * 2 + usize::from(current)) * self.n_fc + column]
    }
}

/// Fuses per-receiver tables into a report for one FC threshold.
fn fuse_tables(histories: &HistorySet, tables: &[&LinkTable], identical: bool, k: usize, rule: FusionRule, xi_fc: u32, p_one: f64) -> Result<ErrorReport, EvalError> {
    let mut md = vec![0.0; histories.intervals];
    let mut fa = vec![0.0; histories.intervals];
    let mut per_sample = vec![0.0; histories.samples];
    let mut v = PerRxErrorVector::uniform(k, 0.0, 0.0);
    for (idx, item) in histories.items.iter().enumerate() {
        let (q_md, q_fa) = if identical {
            let t = tables[0];
            fuse_symmetric(rule, 1.0 - t.received_one(idx, true, xi_fc), t.received_one(idx, false, xi_fc), k)?
        } else {
            for (r, t) in tables.iter().enumerate() {
                v.p_md[r] = 1.0 - t.received_one(idx, true, xi_fc);
                v.p_fa[r] = t.received_one(idx, false, xi_fc);
            }
            fuse_asymmetric(rule, &v)?
        };
        md[item.j - 1] += item.weight * q_md;
        fa[item.j - 1] += item.weight * q_fa;
        per_sample[item.sample] += global_error(q_md, q_fa, p_one);
    }
    Ok(assemble(md, fa, p_one, histories, &per_sample))
}

fn assemble(md: Vec<f64>, fa: Vec<f64>, p_one: f64, histories: &HistorySet, per_sample: &[f64]) -> ErrorReport {
    let per_interval: Vec<IntervalError> = md
        .iter()
        .zip(&fa)
        .map(|(&q_md, &q_fa)| IntervalError { q_md, q_fa, q_err: global_error(q_md, q_fa, p_one) })
        .collect();
    let q_bar = per_interval.iter().map(|e| e.q_err).sum::<f64>() / per_interval.len() as f64;
    let ci_halfwidth = match histories.method {
        Method::MonteCarlo { n_samples, .. } => {
            let l = histories.intervals as f64;
            let n = n_samples as f64;
            let mean = per_sample.iter().map(|s| s / l).sum::<f64>() / n;
            let var = per_sample.iter().map(|s| (s / l - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            Some(1.96 * (var / n).sqrt())
        }
        _ => None,
    };
    ErrorReport { per_interval, q_bar, method: histories.method, ci_halfwidth }
}

/// Receiver threshold axis of a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiRAxis {
    /// Every receiver uses the same threshold.
    Shared(Vec<u32>),
    /// Independent axis per receiver; the sweep takes their product.
    PerRx(Vec<Vec<u32>>),
}

/// Threshold sweep. `k` and `rules` are used by experiment runners; the
/// optimizer sweeps only the threshold axes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub xi_r: XiRAxis,
    pub xi_fc: Vec<u32>,
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub rules: Vec<FusionRule>,
}

impl SweepGrid {
    pub fn shared(xi_r: impl IntoIterator<Item = u32>, xi_fc: impl IntoIterator<Item = u32>) -> Self {
        SweepGrid { xi_r: XiRAxis::Shared(xi_r.into_iter().collect()), xi_fc: xi_fc.into_iter().collect(), k: Vec::new(), rules: Vec::new() }
    }

    /// `1..=xi_r_max` by `1..=xi_fc_max`.
    pub fn square(xi_r_max: u32, xi_fc_max: u32) -> Self {
        Self::shared(1..=xi_r_max, 1..=xi_fc_max)
    }

    /// Receiver threshold assignments in sweep order (RX index order,
    /// lexicographic).
    pub fn assignments(&self, k: usize) -> Result<Vec<Vec<u32>>, EvalError> {
        let out = match &self.xi_r {
            XiRAxis::Shared(values) => {
                check_axis("xi_r", values)?;
                values.iter().map(|&x| vec![x; k]).collect()
            }
            XiRAxis::PerRx(axes) => {
                if axes.len() != k {
                    return Err(EvalError::AxisMismatch { got: axes.len(), k });
                }
                let mut out: Vec<Vec<u32>> = vec![Vec::new()];
                for axis in axes {
                    check_axis("xi_r", axis)?;
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            axis.iter().map(move |&x| {
                                let mut v = prefix.clone();
                                v.push(x);
                                v
                            })
                        })
                        .collect();
                }
                out
            }
        };
        check_axis("xi_fc", &self.xi_fc)?;
        Ok(out)
    }
}

fn check_axis(name: &'static str, values: &[u32]) -> Result<(), EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyGrid(name));
    }
    if values.contains(&0) {
        return Err(EvalError::ZeroThreshold(name));
    }
    Ok(())
}

/// Best grid point of a threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub xi_r: Vec<u32>,
    pub xi_fc: u32,
    pub report: ErrorReport,
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub xi_r: Vec<u32>,
    pub xi_fc: u32,
    pub report: ErrorReport,
}

/// Analytic engine for one scenario (geometry, physics, timing and rule);
/// detector thresholds may be overridden per call.
#[derive(Debug, Clone)]
pub struct Evaluator {
    model: DetectionModel,
    per_rx_only: bool,
}

impl Evaluator {
    pub fn new(scenario: Scenario) -> Result<Self, EvalError> {
        Ok(Evaluator { model: DetectionModel::new(scenario)?, per_rx_only: false })
    }

    /// Disables the identical-receiver fast path.
    pub fn per_receiver_path(mut self) -> Self {
        self.per_rx_only = true;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        self.model.scenario()
    }

    pub fn model(&self) -> &DetectionModel {
        &self.model
    }

    fn histories(&self, averaging: Averaging) -> Result<HistorySet, EvalError> {
        HistorySet::build(self.scenario().sequence_length(), self.scenario().p_one(), averaging)
    }

    fn hard_rule(&self) -> Result<FusionRule, EvalError> {
        match self.scenario().rule() {
            FusionRule::SoftSum { .. } => Err(EvalError::SoftRule(self.scenario().rule())),
            rule => Ok(rule),
        }
    }

    /// Receivers differ only in their thresholds, so equal thresholds make
    /// them statistically identical.
    fn geometry_identical(&self) -> bool {
        if self.per_rx_only {
            return false;
        }
        let s = self.scenario();
        let same = |v: &[f64]| v.windows(2).all(|w| w[0] == w[1]);
        s.is_symmetric()
            && same(&s.topology().rx_radius)
            && same(&s.physical().diffusion_coeff_report)
            && same(&s.physical().molecules_per_one_rx)
    }

    /// Expected error with the scenario's own thresholds and rule.
    pub fn expected_error(&self, reporting: Reporting, averaging: Averaging) -> Result<ErrorReport, EvalError> {
        if self.scenario().rule().is_soft() {
            let FusionRule::SoftSum { threshold } = self.scenario().rule() else { unreachable!() };
            return self.soft_fusion_error(threshold, averaging);
        }
        let det = self.scenario().detector();
        let xi_r: Vec<u32> = det.threshold_rx.iter().map(|t| t.get()).collect();
        let histories = self.histories(averaging)?;
        let mut points = self.evaluate_points(&histories, reporting, &[xi_r], &[det.threshold_fc.get()])?;
        Ok(points.pop().expect("one grid point").report)
    }

    /// Evaluates every (assignment, FC threshold) pair, assignment-major.
    fn evaluate_points(&self, histories: &HistorySet, reporting: Reporting, assignments: &[Vec<u32>], xi_fc: &[u32]) -> Result<Vec<GridPoint>, EvalError> {
        let rule = self.hard_rule()?;
        let k = self.scenario().num_rx();
        let identical_geometry = self.geometry_identical();
        let xi_fc_max = xi_fc.iter().copied().max().unwrap_or(1);

        let mut needed: Vec<(usize, u32)> = Vec::new();
        for a in assignments {
            for (r, &x) in a.iter().enumerate() {
                let key = (if identical_geometry { 0 } else { r }, x);
                if !needed.contains(&key) {
                    needed.push(key);
                }
            }
        }
        let tables: HashMap<(usize, u32), LinkTable> = needed
            .into_iter()
            .map(|(r, x)| ((r, x), LinkTable::build(&self.model, r, Threshold(x), reporting, histories, xi_fc_max)))
            .collect();

        let p_one = self.scenario().p_one();
        let jobs: Vec<(&Vec<u32>, u32)> = assignments.iter().flat_map(|a| xi_fc.iter().map(move |&f| (a, f))).collect();
        jobs.par_iter()
            .map(|&(a, f)| {
                let identical = identical_geometry && a.windows(2).all(|w| w[0] == w[1]);
                let refs: Vec<&LinkTable> = a
                    .iter()
                    .enumerate()
                    .map(|(r, &x)| &tables[&(if identical_geometry { 0 } else { r }, x)])
                    .collect();
                let report = fuse_tables(histories, &refs, identical, k, rule, f, p_one)?;
                Ok(GridPoint { xi_r: a.clone(), xi_fc: f, report })
            })
            .collect()
    }

    /// Every grid point, ordered by receiver assignment then FC threshold.
    pub fn sweep(&self, grid: &SweepGrid, reporting: Reporting, averaging: Averaging) -> Result<Vec<GridPoint>, EvalError> {
        let assignments = grid.assignments(self.scenario().num_rx())?;
        let histories = self.histories(averaging)?;
        self.evaluate_points(&histories, reporting, &assignments, &grid.xi_fc)
    }

    /// Exhaustive threshold search. Ties go to the smallest FC threshold,
    /// then the smallest receiver thresholds in RX index order.
    pub fn optimize_thresholds(&self, grid: &SweepGrid, reporting: Reporting) -> Result<Optimum, EvalError> {
        let points = self.sweep(grid, reporting, Averaging::Exact)?;
        let best = points
            .into_iter()
            .min_by(|a, b| {
                a.report
                    .q_bar
                    .total_cmp(&b.report.q_bar)
                    .then(a.xi_fc.cmp(&b.xi_fc))
                    .then_with(|| a.xi_r.cmp(&b.xi_r))
            })
            .ok_or(EvalError::EmptyGrid("xi_r"))?;
        Ok(Optimum { xi_r: best.xi_r, xi_fc: best.xi_fc, report: best.report })
    }

    /// FC thresholds the pooled receiver observations (Poisson with the sum
    /// of the receivers' means); reporting is noiseless.
    pub fn soft_fusion_error(&self, xi_soft: Threshold, averaging: Averaging) -> Result<ErrorReport, EvalError> {
        let histories = self.histories(averaging)?;
        Ok(self.soft_fusion_many(&histories, &[xi_soft.get()]).pop().expect("one threshold"))
    }

    fn soft_fusion_many(&self, histories: &HistorySet, thresholds: &[u32]) -> Vec<ErrorReport> {
        let k = self.scenario().num_rx();
        let p_one = self.scenario().p_one();
        let pooled: Vec<(f64, f64)> = histories
            .items
            .par_iter()
            .map(|item| {
                let mean = |current: bool| {
                    let bits = item.bits_with(current);
                    (0..k).map(|r| self.model.rx_mean(r, &bits, item.j)).sum::<f64>()
                };
                (mean(true), mean(false))
            })
            .collect();
        thresholds
            .iter()
            .map(|&xi| {
                let mut md = vec![0.0; histories.intervals];
                let mut fa = vec![0.0; histories.intervals];
                let mut per_sample = vec![0.0; histories.samples];
                for (item, &(lam1, lam0)) in histories.items.iter().zip(&pooled) {
                    let q_md = poisson_below(lam1, xi);
                    let q_fa = 1.0 - poisson_below(lam0, xi);
                    md[item.j - 1] += item.weight * q_md;
                    fa[item.j - 1] += item.weight * q_fa;
                    per_sample[item.sample] += global_error(q_md, q_fa, p_one);
                }
                assemble(md, fa, p_one, histories, &per_sample)
            })
            .collect()
    }

    /// Best soft-fusion threshold over `thresholds` (ties to the smallest).
    pub fn optimize_soft(&self, thresholds: &[u32]) -> Result<(u32, ErrorReport), EvalError> {
        check_axis("xi_soft", thresholds)?;
        let histories = self.histories(Averaging::Exact)?;
        let reports = self.soft_fusion_many(&histories, thresholds);
        let (best, report) = thresholds
            .iter()
            .zip(reports)
            .min_by(|a, b| a.1.q_bar.total_cmp(&b.1.q_bar).then(a.0.cmp(b.0)))
            .expect("non-empty");
        Ok((*best, report))
    }
}

/// Point-to-point reference links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Single receiver at the first symmetric receiver position.
    TxRx,
    /// Direct link to the fusion center position.
    TxFc,
}

impl BaselineKind {
    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::TxRx => "tx-rx",
            BaselineKind::TxFc => "tx-fc",
        }
    }

    pub fn receiver_position(self) -> Vec3 {
        match self {
            BaselineKind::TxRx => defaults::SYMMETRIC_RX[0],
            BaselineKind::TxFc => defaults::FC,
        }
    }

    /// Single-receiver scenario with the baseline molecule budget.
    pub fn scenario(self, xi: u32) -> Result<Scenario, ValidationError> {
        defaults::point_to_point(self.receiver_position(), xi).validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub kind: BaselineKind,
    pub threshold: u32,
    pub report: ErrorReport,
}

/// Error of a point-to-point link; the threshold is optimized over
/// `1..=DEFAULT_XI_MAX` when not supplied.
pub fn baseline_error(kind: BaselineKind, threshold: Option<u32>) -> Result<BaselineResult, EvalError> {
    baseline_error_for(kind.scenario(threshold.unwrap_or(1))?, kind, threshold)
}

/// As [`baseline_error`] with a caller-modified link scenario.
pub fn baseline_error_for(scenario: Scenario, kind: BaselineKind, threshold: Option<u32>) -> Result<BaselineResult, EvalError> {
    let evaluator = Evaluator::new(scenario)?;
    let grid = match threshold {
        Some(x) => SweepGrid::shared([x], [1]),
        None => SweepGrid::shared(1..=DEFAULT_XI_MAX, [1]),
    };
    let best = evaluator.optimize_thresholds(&grid, Reporting::Perfect)?;
    Ok(BaselineResult { kind, threshold: best.xi_r[0], report: best.report })
}
