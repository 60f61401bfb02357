//! Poisson observation model and per-link expected error probabilities.
//!
//! The number of molecules a receiver counts in interval `j` (summed over its
//! equally weighted samples) is modelled as Poisson with mean
//! `S * sum_i bits[i] * w[j - i]`, where `w[lag]` is the summed single-molecule
//! hit probability at the sampling instants `lag` intervals after a release.
//! Counts in different intervals are independent given the emitted bits.
//!
//! For the composed TX -> RX_k -> FC link the fusion center count depends on
//! the receiver's whole decision history. Two independent evaluations of that
//! dependence are provided:
//!
//! * [`DecisionHistoryDistribution`] enumerates the receiver's decision
//!   histories, merging those that contribute the same FC mean
//!   ([`DetectionModel::end_to_end_error_probs`]).
//! * [`DetectionModel::link_outcome`] convolves the truncated count
//!   distributions of each past report (a Bernoulli-gated Poisson term), which
//!   is exact for counts below the largest threshold of interest and is what
//!   the evaluator uses.

use std::collections::BTreeMap;

use crate::channel::{hit_prob_point_source, hit_prob_sphere, ChannelError};
use crate::model::{Scenario, Threshold};

/// Transmitted (or decided) bits, first interval first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitSequence(Vec<bool>);

impl BitSequence {
    pub fn new(bits: Vec<bool>) -> Self {
        BitSequence(bits)
    }

    /// Builds a sequence from 0/1 digits. Panics on any other value.
    pub fn from_digits(digits: &[u8]) -> Self {
        BitSequence(
            digits
                .iter()
                .map(|&d| match d {
                    0 => false,
                    1 => true,
                    other => panic!("bit must be 0 or 1, got {other}"),
                })
                .collect(),
        )
    }

    /// The `len` low bits of `pattern`, bit 0 first.
    pub fn from_pattern(pattern: u64, len: usize) -> Self {
        BitSequence((0..len).map(|i| pattern >> i & 1 == 1).collect())
    }

    pub fn zeros(len: usize) -> Self {
        BitSequence(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn with_appended(&self, bit: bool) -> BitSequence {
        let mut bits = self.0.clone();
        bits.push(bit);
        BitSequence(bits)
    }
}

/// Summed per-lag hit probabilities for every TX -> RX_k and RX_k -> FC link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWeights {
    /// `rx[k][lag]`
    pub rx: Vec<Vec<f64>>,
    /// `fc[k][lag]`
    pub fc: Vec<Vec<f64>>,
    /// Some TX -> RX hit probability exceeded one and was clamped.
    pub clamped: bool,
}

/// Weights for lags `0..L`. TX -> RX links use the point-observer
/// approximation, RX -> FC links the exact sphere expression.
pub fn precompute_weights(scenario: &Scenario) -> Result<ChannelWeights, ChannelError> {
    let timing = scenario.timing();
    let phys = scenario.physical();
    let horizon = scenario.sequence_length();
    let mut clamped = false;
    let mut rx = Vec::with_capacity(scenario.num_rx());
    let mut fc = Vec::with_capacity(scenario.num_rx());
    for k in 0..scenario.num_rx() {
        let mut rx_k = Vec::with_capacity(horizon);
        let mut fc_k = Vec::with_capacity(horizon);
        for lag in 0..horizon {
            let base = lag as f64 * timing.bit_interval;
            let mut w = 0.0;
            for m in 1..=timing.samples_rx {
                let t = base + f64::from(m) * timing.sample_step_rx;
                let p = hit_prob_point_source(t, scenario.tx_distance_m(k), phys.diffusion_coeff_info, scenario.rx_volume_m3(k))?;
                clamped |= p.clamped;
                w += p.value;
            }
            rx_k.push(w);

            let mut w = 0.0;
            for m in 1..=timing.samples_fc {
                let t = base + f64::from(m) * timing.sample_step_fc;
                w += hit_prob_sphere(t, scenario.fc_distance_m(k), phys.diffusion_coeff_report[k], scenario.fc_radius_m())?;
            }
            fc_k.push(w);
        }
        rx.push(rx_k);
        fc.push(fc_k);
    }
    Ok(ChannelWeights { rx, fc, clamped })
}

/// Mean count in interval `j` (1-based): `amplitude * sum_{i<=j} bits[i] * weights[j - i]`.
pub fn mean_observed(bits: &[bool], amplitude: f64, weights: &[f64], j: usize) -> f64 {
    assert!(j <= bits.len(), "interval {j} beyond {} bits", bits.len());
    let mut sum = 0.0;
    for (i, &bit) in bits[..j].iter().enumerate() {
        if bit {
            sum += weights[j - 1 - i];
        }
    }
    amplitude * sum
}

const LOG_SPACE_ABOVE: f64 = 700.0;

/// `P(X = n)` for `n < len`, `X ~ Poisson(lambda)`.
pub fn poisson_pmf_prefix(lambda: f64, len: usize) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(len);
    if len == 0 {
        return pmf;
    }
    if lambda == 0.0 {
        pmf.push(1.0);
        pmf.resize(len, 0.0);
        return pmf;
    }
    if lambda <= LOG_SPACE_ABOVE {
        let mut term = (-lambda).exp();
        pmf.push(term);
        for n in 1..len {
            term *= lambda / n as f64;
            pmf.push(term);
        }
    } else {
        let ln_lambda = lambda.ln();
        let mut ln_fact = 0.0;
        for n in 0..len {
            if n > 0 {
                ln_fact += (n as f64).ln();
            }
            pmf.push((n as f64 * ln_lambda - lambda - ln_fact).exp());
        }
    }
    pmf
}

/// `P(X < xi)` for `X ~ Poisson(lambda)`.
pub fn poisson_below(lambda: f64, xi: u32) -> f64 {
    debug_assert!(lambda >= 0.0);
    let s: f64 = poisson_pmf_prefix(lambda, xi as usize).iter().sum();
    s.min(1.0)
}

/// Expected miss-detection and false-alarm probabilities of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkErrorProbs {
    pub p_md: f64,
    pub p_fa: f64,
}

/// One merged group of receiver decision histories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryMass {
    /// `sum_i decision[i] * w_fc[target - i]`, without the report amplitude.
    pub signature: f64,
    pub probability: f64,
}

/// Distribution of a receiver's decision history, compressed to each
/// history's contribution to the fusion center mean in a target interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionHistoryDistribution {
    pub entries: Vec<HistoryMass>,
    pub pruned_mass: f64,
}

impl DecisionHistoryDistribution {
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionLimits {
    /// Support size above which the smallest-mass entries are dropped.
    pub max_support: usize,
}

impl Default for DistributionLimits {
    fn default() -> Self {
        DistributionLimits { max_support: 1 << 16 }
    }
}

/// Gated counts feeding the fusion center from one receiver, for a fixed
/// emitted bit pattern through the current interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    /// Probability the receiver decides 1 in the current interval.
    pub p_rx_one: f64,
    /// `fc_one[x - 1]`: probability the FC count reaches threshold `x`,
    /// i.e. the FC receives a 1, for `x = 1..=xi_fc_max`.
    pub fc_one: Vec<f64>,
}

/// Scenario plus precomputed channel weights.
#[derive(Debug, Clone)]
pub struct DetectionModel {
    scenario: Scenario,
    weights: ChannelWeights,
    limits: DistributionLimits,
}

impl DetectionModel {
    pub fn new(scenario: Scenario) -> Result<Self, ChannelError> {
        let weights = precompute_weights(&scenario)?;
        Ok(DetectionModel { scenario, weights, limits: DistributionLimits::default() })
    }

    pub fn with_limits(mut self, limits: DistributionLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn weights(&self) -> &ChannelWeights {
        &self.weights
    }

    fn s0(&self) -> f64 {
        self.scenario.physical().molecules_per_one_tx
    }

    fn s_report(&self, k: usize) -> f64 {
        self.scenario.physical().molecules_per_one_rx[k]
    }

    fn xi_r(&self, k: usize) -> Threshold {
        self.scenario.detector().threshold_rx[k]
    }

    /// Mean TX -> RX_k count in interval `j` for the emitted `bits`.
    pub fn rx_mean(&self, k: usize, bits: &[bool], j: usize) -> f64 {
        mean_observed(bits, self.s0(), &self.weights.rx[k], j)
    }

    /// Probability that RX_k decides 1 in each interval `1..=bits.len()`.
    pub fn decision_probs(&self, k: usize, xi_r: Threshold, bits: &[bool]) -> Vec<f64> {
        (1..=bits.len()).map(|j| 1.0 - poisson_below(self.rx_mean(k, bits, j), xi_r.get())).collect()
    }

    /// Local miss/false-alarm probabilities of RX_k in interval
    /// `history.len() + 1`, given the earlier emitted bits.
    pub fn local_error_probs(&self, k: usize, history: &BitSequence) -> LinkErrorProbs {
        let j = history.len() + 1;
        let xi = self.xi_r(k).get();
        let with_one = history.with_appended(true);
        let with_zero = history.with_appended(false);
        LinkErrorProbs {
            p_md: poisson_below(self.rx_mean(k, with_one.as_slice(), j), xi),
            p_fa: 1.0 - poisson_below(self.rx_mean(k, with_zero.as_slice(), j), xi),
        }
    }

    /// Distribution of RX_k's decisions through interval `tx_bits.len()`,
    /// with signatures relative to that same interval.
    pub fn rx_decision_distribution(&self, k: usize, tx_bits: &BitSequence) -> DecisionHistoryDistribution {
        let j = tx_bits.len();
        let probs = self.decision_probs(k, self.xi_r(k), tx_bits.as_slice());
        self.decision_distribution(k, &probs, j)
    }

    /// Decision history distribution for decisions with the given per-interval
    /// probabilities of deciding 1, with signatures relative to `target`.
    fn decision_distribution(&self, k: usize, probs: &[f64], target: usize) -> DecisionHistoryDistribution {
        let w = &self.weights.fc[k];
        // Non-negative f64 bit patterns order like the values, so identical
        // decision sets (identical summation order) land on the same key.
        let mut support: BTreeMap<u64, f64> = BTreeMap::new();
        support.insert(0f64.to_bits(), 1.0);
        let mut pruned_mass = 0.0;
        for (idx, &p) in probs.iter().enumerate() {
            let lag_weight = w[target - 1 - idx];
            let mut next = BTreeMap::new();
            for (&key, &mass) in &support {
                let sig = f64::from_bits(key);
                if p < 1.0 {
                    *next.entry(key).or_insert(0.0) += mass * (1.0 - p);
                }
                if p > 0.0 {
                    *next.entry((sig + lag_weight).to_bits()).or_insert(0.0) += mass * p;
                }
            }
            if next.len() > self.limits.max_support {
                let mut by_mass: Vec<(u64, f64)> = next.into_iter().collect();
                by_mass.sort_by(|a, b| a.1.total_cmp(&b.1));
                let excess = by_mass.len() - self.limits.max_support;
                pruned_mass += by_mass[..excess].iter().map(|e| e.1).sum::<f64>();
                next = by_mass.into_iter().skip(excess).collect();
            }
            support = next;
        }
        DecisionHistoryDistribution {
            entries: support
                .into_iter()
                .map(|(key, probability)| HistoryMass { signature: f64::from_bits(key), probability })
                .collect(),
            pruned_mass,
        }
    }

    /// End-to-end TX -> RX_k -> FC miss/false-alarm probabilities in interval
    /// `history.len() + 1`, averaging the FC detection over the receiver's
    /// earlier decision history.
    pub fn end_to_end_error_probs(&self, k: usize, history: &BitSequence) -> LinkErrorProbs {
        let j = history.len() + 1;
        let xi_r = self.xi_r(k);
        let xi_fc = self.scenario.detector().threshold_fc.get();
        let s_k = self.s_report(k);
        let w0 = self.weights.fc[k][0];

        let past = self.decision_probs(k, xi_r, history.as_slice());
        let dist = self.decision_distribution(k, &past, j);
        let fc_below = |current: f64| -> f64 {
            let total: f64 = dist
                .entries
                .iter()
                .map(|e| e.probability * poisson_below(s_k * (e.signature + current * w0), xi_fc))
                .sum();
            total / dist.total_mass()
        };
        let below_if_zero = fc_below(0.0);
        let below_if_one = fc_below(1.0);

        let local = self.local_error_probs(k, history);
        LinkErrorProbs {
            p_md: (1.0 - local.p_md) * below_if_one + local.p_md * below_if_zero,
            p_fa: local.p_fa * (1.0 - below_if_one) + (1.0 - local.p_fa) * (1.0 - below_if_zero),
        }
    }

    /// Receiver decision probability and FC reception probabilities for every
    /// FC threshold up to `xi_fc_max`, for emitted `bits` through the current
    /// interval (the last entry) and receiver threshold `xi_r`.
    pub fn link_outcome(&self, k: usize, xi_r: Threshold, bits: &[bool], xi_fc_max: u32) -> LinkOutcome {
        let probs = self.decision_probs(k, xi_r, bits);
        self.link_outcome_from_probs(k, &probs, xi_fc_max)
    }

    /// As [`link_outcome`](Self::link_outcome) with precomputed per-interval
    /// decision probabilities.
    pub fn link_outcome_from_probs(&self, k: usize, probs: &[f64], xi_fc_max: u32) -> LinkOutcome {
        let len = xi_fc_max as usize;
        let j = probs.len();
        let s_k = self.s_report(k);
        let w = &self.weights.fc[k];

        let mut isi = vec![0.0; len];
        if len > 0 {
            isi[0] = 1.0;
        }
        let mut scratch = vec![0.0; len];
        for (idx, &p) in probs[..j - 1].iter().enumerate() {
            let lag = j - 1 - idx;
            let term = gated_poisson(p, s_k * w[lag], len);
            convolve_truncated(&isi, &term, &mut scratch);
            std::mem::swap(&mut isi, &mut scratch);
        }
        let current = poisson_pmf_prefix(s_k * w[0], len);
        convolve_truncated(&isi, &current, &mut scratch);

        let p_rx_one = probs[j - 1];
        let mut fc_one = Vec::with_capacity(len);
        let (mut cdf0, mut cdf1) = (0.0, 0.0);
        for x in 0..len {
            cdf0 += isi[x];
            cdf1 += scratch[x];
            let below = p_rx_one * cdf1.min(1.0) + (1.0 - p_rx_one) * cdf0.min(1.0);
            fc_one.push((1.0 - below).clamp(0.0, 1.0));
        }
        LinkOutcome { p_rx_one, fc_one }
    }
}

/// PMF prefix of `B * Poisson(lambda)` with `B ~ Bernoulli(p)`.
fn gated_poisson(p: f64, lambda: f64, len: usize) -> Vec<f64> {
    let mut pmf = poisson_pmf_prefix(lambda, len);
    for v in pmf.iter_mut() {
        *v *= p;
    }
    if let Some(first) = pmf.first_mut() {
        *first += 1.0 - p;
    }
    pmf
}

fn convolve_truncated(a: &[f64], b: &[f64], out: &mut [f64]) {
    for n in 0..out.len() {
        let mut s = 0.0;
        for m in 0..=n {
            s += a[m] * b[n - m];
        }
        out[n] = s;
    }
}
