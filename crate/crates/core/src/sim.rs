//! Particle-based simulation of the three-phase protocol.
//!
//! Molecules move by free Brownian motion and are advanced exactly between
//! the instants at which they are observed, using the Gaussian transition
//! kernel. Observers are passive closed balls. Every random stream is derived
//! from the trial seed: stream 0 draws the transmitted bits, stream 1 moves
//! the transmitter's molecules, and each receiver report (receiver `k`,
//! interval `j`) has a stream of its own. A report's molecule counts therefore
//! do not depend on which other reports were sent, so one realization can be
//! evaluated at many thresholds with common random numbers and still agree
//! exactly with [`simulate_trial`] at each of them.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::BitSequence;
use crate::evaluator::{ErrorReport, IntervalError, Method, Reporting};
use crate::model::{FusionRule, Scenario, Vec3};

/// Recorded in experiment metadata.
pub const RNG_ALGORITHM: &str =
    "ChaCha8 (rand_chacha 0.3); trial seed = splitmix64(splitmix64(base_seed) ^ trial); stream 0 bits, 1 transmitter molecules, 2 + k*L + (j-1) report of receiver k in interval j";

const MICRO: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("forced bit sequence has length {got}, scenario needs {expected}")]
    ForcedBitsLength { got: usize, expected: usize },
    #[error("at least one trial is required")]
    NoTrials,
    #[error("trace output failed: {0}")]
    Trace(#[from] csv::Error),
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(base_seed) ^ trial)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// A single molecule. Species 0 is released by the transmitter, species `k`
/// by receiver `k` (1-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoleculeState {
    pub species: usize,
    /// Metres.
    pub position: Vec3,
    pub emission_time: f64,
}

impl MoleculeState {
    fn advance(&mut self, sigma: f64, rng: &mut ChaCha8Rng) {
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        let dz: f64 = rng.sample(StandardNormal);
        self.position.x += sigma * dx;
        self.position.y += sigma * dy;
        self.position.z += sigma * dz;
    }
}

#[derive(Debug, Clone, Copy)]
struct Ball {
    center: Vec3,
    radius_sq: f64,
}

impl Ball {
    fn contains(&self, p: Vec3) -> bool {
        let (dx, dy, dz) = (p.x - self.center.x, p.y - self.center.y, p.z - self.center.z);
        dx * dx + dy * dy + dz * dz <= self.radius_sq
    }
}

/// A burst of identical molecules.
#[derive(Debug, Clone, Copy)]
struct Source {
    species: usize,
    origin: Vec3,
    start: f64,
    count: u64,
    diffusion: f64,
}

/// Releases the source's molecules and
/// adds, for each observation time and ball, the number of molecules inside.
/// `counts[b * times.len() + i]` is ball `b` at `times[i]`.
///
/// The three axes move independently, so the y and z displacements are only
/// drawn once the molecule's x coordinate lies within some ball's x-range
/// (and z only once y does too); until then their variance accumulates.
/// This samples the same joint law as stepping every axis every time.
fn release(source: &Source, times: &[f64], balls: &[Ball], rng: &mut ChaCha8Rng, counts: &mut [u64]) {
    let Source { species, origin, start, count, diffusion } = *source;
    let mut prev = start;
    let variances: Vec<f64> = times
        .iter()
        .map(|&t| {
            let v = 2.0 * diffusion * (t - prev);
            prev = t;
            v
        })
        .collect();
    let n = times.len();
    let radius: Vec<f64> = balls.iter().map(|b| b.radius_sq.sqrt()).collect();
    for _ in 0..count {
        let mut molecule = MoleculeState { species, position: origin, emission_time: start };
        let (mut pending_y, mut pending_z) = (0.0, 0.0);
        for (i, &var) in variances.iter().enumerate() {
            let dx: f64 = rng.sample(StandardNormal);
            molecule.position.x += var.sqrt() * dx;
            pending_y += var;
            pending_z += var;
            let near_x = |b: &(usize, &Ball)| (molecule.position.x - b.1.center.x).abs() <= radius[b.0];
            if !balls.iter().enumerate().any(|b| near_x(&b)) {
                continue;
            }
            let dy: f64 = rng.sample(StandardNormal);
            molecule.position.y += pending_y.sqrt() * dy;
            pending_y = 0.0;
            let p = molecule.position;
            if !balls.iter().enumerate().any(|b| near_x(&b) && (p.y - b.1.center.y).abs() <= radius[b.0]) {
                continue;
            }
            let dz: f64 = rng.sample(StandardNormal);
            molecule.position.z += pending_z.sqrt() * dz;
            pending_z = 0.0;
            for (b, ball) in balls.iter().enumerate() {
                if ball.contains(molecule.position) {
                    counts[b * n + i] += 1;
                }
            }
        }
    }
}

/// One simulated transmission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub tx_bits: Vec<bool>,
    /// `[k][j]` count summed over the receiver's samples.
    pub rx_counts: Vec<Vec<u64>>,
    pub rx_decisions: Vec<Vec<bool>>,
    /// `[k][j]` species-`k` count at the FC summed over its samples; zero
    /// with perfect reporting.
    pub fc_counts: Vec<Vec<u64>>,
    pub fc_received: Vec<Vec<bool>>,
    pub global_decisions: Vec<bool>,
    pub errors: Vec<bool>,
}

impl TrialRecord {
    pub fn error_count(&self) -> usize {
        self.errors.iter().filter(|&&e| e).count()
    }
}

/// Random state of one trial that is shared by every threshold setting.
#[derive(Debug, Clone)]
pub struct TrialRealization<'a> {
    scenario: &'a Scenario,
    seed: u64,
    bits: BitSequence,
    /// `[k][(j - 1) * M_RX + m - 1]`.
    rx_samples: Vec<Vec<u64>>,
    /// `[k * L + j - 1]`: per-sample FC counts of that report for intervals
    /// `j..=L`, `(j' - j) * M_FC + m - 1`.
    reports: Vec<Option<Vec<u64>>>,
}

impl<'a> TrialRealization<'a> {
    pub fn new(scenario: &'a Scenario, seed: u64, forced_bits: Option<&BitSequence>) -> Result<Self, SimError> {
        let l = scenario.sequence_length();
        let k = scenario.num_rx();
        let timing = scenario.timing();
        let bits = match forced_bits {
            Some(b) if b.len() != l => return Err(SimError::ForcedBitsLength { got: b.len(), expected: l }),
            Some(b) => b.clone(),
            None => {
                let mut rng = stream(seed, 0);
                BitSequence::new((0..l).map(|_| rng.gen_bool(scenario.p_one())).collect())
            }
        };

        let m = timing.samples_rx as usize;
        let times: Vec<f64> = (1..=l).flat_map(|j| (1..=timing.samples_rx).map(move |s| timing.rx_sample_time(j, s))).collect();
        let balls: Vec<Ball> = (0..k)
            .map(|r| Ball { center: scenario.topology().rx_positions[r].scale(MICRO), radius_sq: scenario.rx_radius_m(r).powi(2) })
            .collect();
        let s0 = scenario.physical().molecules_per_one_tx.round() as u64;
        let tx = scenario.topology().tx_position.scale(MICRO);
        let mut rng = stream(seed, 1);
        let mut rx_samples = vec![vec![0u64; l * m]; k];
        for (i, &bit) in bits.as_slice().iter().enumerate() {
            if !bit {
                continue;
            }
            let first = i * m;
            let window = &times[first..];
            let mut counts = vec![0u64; k * window.len()];
            let start = i as f64 * timing.bit_interval;
            let source = Source { species: 0, origin: tx, start, count: s0, diffusion: scenario.physical().diffusion_coeff_info };
            release(&source, window, &balls, &mut rng, &mut counts);
            for r in 0..k {
                for (idx, c) in counts[r * window.len()..(r + 1) * window.len()].iter().enumerate() {
                    rx_samples[r][first + idx] += c;
                }
            }
        }

        Ok(TrialRealization { scenario, seed, bits, rx_samples, reports: vec![None; k * l] })
    }

    pub fn bits(&self) -> &BitSequence {
        &self.bits
    }

    /// Count of receiver `k` in interval `j` (1-based), summed over samples.
    pub fn rx_count(&self, k: usize, j: usize) -> u64 {
        let m = self.scenario.timing().samples_rx as usize;
        self.rx_samples[k][(j - 1) * m..j * m].iter().sum()
    }

    /// Per-sample FC counts of the report receiver `k` sends in interval `j`.
    pub fn report_samples(&mut self, k: usize, j: usize) -> &[u64] {
        let l = self.scenario.sequence_length();
        let slot = k * l + j - 1;
        if self.reports[slot].is_none() {
            let s = self.scenario;
            let timing = s.timing();
            let times: Vec<f64> = (j..=l).flat_map(|jj| (1..=timing.samples_fc).map(move |m| timing.fc_sample_time(jj, m))).collect();
            let fc = Ball { center: s.topology().fc_position.scale(MICRO), radius_sq: s.fc_radius_m().powi(2) };
            let mut counts = vec![0u64; times.len()];
            let mut rng = stream(self.seed, 2 + slot as u64);
            let source = Source {
                species: k + 1,
                origin: s.topology().rx_positions[k].scale(MICRO),
                start: timing.report_time(j),
                count: s.physical().molecules_per_one_rx[k].round() as u64,
                diffusion: s.physical().diffusion_coeff_report[k],
            };
            release(&source, &times, &[fc], &mut rng, &mut counts);
            self.reports[slot] = Some(counts);
        }
        self.reports[slot].as_deref().expect("filled above")
    }

    /// FC count of species `k + 1` in interval `j`, given receiver `k`'s
    /// decisions.
    fn fc_count(&mut self, k: usize, j: usize, decisions: &[bool]) -> u64 {
        let m = self.scenario.timing().samples_fc as usize;
        let mut total = 0;
        for i in 1..=j {
            if decisions[i - 1] {
                let offset = (j - i) * m;
                total += self.report_samples(k, i)[offset..offset + m].iter().sum::<u64>();
            }
        }
        total
    }

    /// Runs the detection and fusion logic for the given thresholds.
    pub fn outcome(&mut self, xi_r: &[u32], xi_fc: u32, rule: FusionRule, reporting: Reporting) -> TrialRecord {
        let l = self.scenario.sequence_length();
        let k = self.scenario.num_rx();
        let rx_counts: Vec<Vec<u64>> = (0..k).map(|r| (1..=l).map(|j| self.rx_count(r, j)).collect()).collect();
        let rx_decisions: Vec<Vec<bool>> = rx_counts
            .iter()
            .zip(xi_r)
            .map(|(c, &xi)| c.iter().map(|&n| n >= u64::from(xi)).collect())
            .collect();
        let (fc_counts, fc_received) = match reporting {
            Reporting::Perfect => (vec![vec![0; l]; k], rx_decisions.clone()),
            Reporting::Noisy => {
                let counts: Vec<Vec<u64>> =
                    (0..k).map(|r| (1..=l).map(|j| self.fc_count(r, j, &rx_decisions[r])).collect()).collect();
                let received = counts.iter().map(|c| c.iter().map(|&n| n >= u64::from(xi_fc)).collect()).collect();
                (counts, received)
            }
        };
        let global_decisions: Vec<bool> = (0..l)
            .map(|j| match rule {
                FusionRule::SoftSum { threshold } => rx_counts.iter().map(|c| c[j]).sum::<u64>() >= u64::from(threshold.get()),
                _ => {
                    let votes = fc_received.iter().filter(|d| d[j]).count();
                    votes >= rule.required_votes(k).expect("hard rule")
                }
            })
            .collect();
        let errors = global_decisions.iter().zip(self.bits.as_slice()).map(|(a, b)| a != b).collect();
        TrialRecord {
            seed: self.seed,
            tx_bits: self.bits.as_slice().to_vec(),
            rx_counts,
            rx_decisions,
            fc_counts,
            fc_received,
            global_decisions,
            errors,
        }
    }

    /// Writes per-sample counts as CSV rows `time,species,observer,count`.
    /// Observers are `rx1..rxK` for species 0 and `fc` for reports.
    pub fn write_trace<W: Write>(&mut self, record: &TrialRecord, out: W) -> Result<(), SimError> {
        let s = self.scenario;
        let timing = s.timing();
        let l = s.sequence_length();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "species", "observer", "count"])?;
        for j in 1..=l {
            for m in 1..=timing.samples_rx {
                let t = timing.rx_sample_time(j, m);
                for k in 0..s.num_rx() {
                    let c = self.rx_samples[k][(j - 1) * timing.samples_rx as usize + m as usize - 1];
                    w.serialize((t, 0, format!("rx{}", k + 1), c))?;
                }
            }
            if record.fc_counts.iter().all(|c| c.iter().all(|&n| n == 0)) {
                continue;
            }
            for m in 1..=timing.samples_fc {
                let t = timing.fc_sample_time(j, m);
                for k in 0..s.num_rx() {
                    let mut c = 0;
                    for i in 1..=j {
                        if record.rx_decisions[k][i - 1] {
                            c += self.report_samples(k, i)[(j - i) * timing.samples_fc as usize + m as usize - 1];
                        }
                    }
                    w.serialize((t, k + 1, "fc", c))?;
                }
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Simulation settings beyond the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub reporting: Reporting,
    pub forced_bits: Option<BitSequence>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { reporting: Reporting::Noisy, forced_bits: None }
    }
}

fn scenario_thresholds(scenario: &Scenario) -> (Vec<u32>, u32) {
    let det = scenario.detector();
    (det.threshold_rx.iter().map(|t| t.get()).collect(), det.threshold_fc.get())
}

/// Simulates one transmission with noisy reporting.
pub fn simulate_trial(scenario: &Scenario, seed: u64) -> TrialRecord {
    simulate_trial_with(scenario, seed, &SimOptions::default()).expect("default options are valid")
}

pub fn simulate_trial_with(scenario: &Scenario, seed: u64, options: &SimOptions) -> Result<TrialRecord, SimError> {
    let mut realization = TrialRealization::new(scenario, seed, options.forced_bits.as_ref())?;
    let (xi_r, xi_fc) = scenario_thresholds(scenario);
    Ok(realization.outcome(&xi_r, xi_fc, scenario.rule(), options.reporting))
}

/// Simulates one trial and writes its per-sample trace.
pub fn simulate_trial_traced<W: Write>(scenario: &Scenario, seed: u64, options: &SimOptions, out: W) -> Result<TrialRecord, SimError> {
    let mut realization = TrialRealization::new(scenario, seed, options.forced_bits.as_ref())?;
    let (xi_r, xi_fc) = scenario_thresholds(scenario);
    let record = realization.outcome(&xi_r, xi_fc, scenario.rule(), options.reporting);
    realization.write_trace(&record, out)?;
    Ok(record)
}

/// Error counts of a batch of trials at one threshold setting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Tally {
    ones: Vec<u64>,
    misses: Vec<u64>,
    false_alarms: Vec<u64>,
}

impl Tally {
    fn new(l: usize) -> Self {
        Tally { ones: vec![0; l], misses: vec![0; l], false_alarms: vec![0; l] }
    }

    fn add(&mut self, record: &TrialRecord) {
        for (j, (&bit, &err)) in record.tx_bits.iter().zip(&record.errors).enumerate() {
            if bit {
                self.ones[j] += 1;
                self.misses[j] += u64::from(err);
            } else {
                self.false_alarms[j] += u64::from(err);
            }
        }
    }

    fn merge(mut self, other: &Tally) -> Tally {
        for j in 0..self.ones.len() {
            self.ones[j] += other.ones[j];
            self.misses[j] += other.misses[j];
            self.false_alarms[j] += other.false_alarms[j];
        }
        self
    }

    fn report(&self, n_trials: u64, seed: u64) -> ErrorReport {
        let n = n_trials as f64;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let per_interval: Vec<IntervalError> = (0..self.ones.len())
            .map(|j| IntervalError {
                q_md: ratio(self.misses[j], self.ones[j]),
                q_fa: ratio(self.false_alarms[j], n_trials - self.ones[j]),
                q_err: (self.misses[j] + self.false_alarms[j]) as f64 / n,
            })
            .collect();
        let total: u64 = self.misses.iter().chain(&self.false_alarms).sum();
        let samples = n * self.ones.len() as f64;
        let q_bar = total as f64 / samples;
        ErrorReport {
            per_interval,
            q_bar,
            method: Method::Simulation { n_trials, seed },
            ci_halfwidth: Some(1.96 * (q_bar * (1.0 - q_bar) / samples).sqrt()),
        }
    }
}

/// Threshold setting evaluated by [`estimate_error_grid`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimPoint {
    pub xi_r: Vec<u32>,
    pub xi_fc: u32,
    pub rule: FusionRule,
    pub reporting: Reporting,
}

/// Monte Carlo estimate of the sequence-averaged error with noisy
/// reporting at the scenario's thresholds.
pub fn estimate_error(scenario: &Scenario, n_trials: u64, base_seed: u64) -> Result<ErrorReport, SimError> {
    let (xi_r, xi_fc) = scenario_thresholds(scenario);
    let point = SimPoint { xi_r, xi_fc, rule: scenario.rule(), reporting: Reporting::Noisy };
    Ok(estimate_error_grid(scenario, &[point], n_trials, base_seed)?.pop().expect("one point"))
}

/// Estimates every point from the same trials. Each point's estimate equals
/// what [`estimate_error`] returns for that point alone.
pub fn estimate_error_grid(scenario: &Scenario, points: &[SimPoint], n_trials: u64, base_seed: u64) -> Result<Vec<ErrorReport>, SimError> {
    if n_trials == 0 {
        return Err(SimError::NoTrials);
    }
    let l = scenario.sequence_length();
    let empty = || vec![Tally::new(l); points.len()];
    let tallies = (0..n_trials)
        .into_par_iter()
        .fold(empty, |mut acc, trial| {
            let mut realization = TrialRealization::new(scenario, trial_seed(base_seed, trial), None).expect("no forced bits");
            for (tally, p) in acc.iter_mut().zip(points) {
                tally.add(&realization.outcome(&p.xi_r, p.xi_fc, p.rule, p.reporting));
            }
            acc
        })
        .reduce(empty, |a, b| a.into_iter().zip(&b).map(|(x, y)| x.merge(y)).collect());
    Ok(tallies.iter().map(|t| t.report(n_trials, base_seed)).collect())
}

/// Fraction of `n_draws` single molecules, released at the origin, found
/// inside a ball of radius `r` centred at distance `d` after time `t`.
/// SI units.
pub fn single_molecule_hit_frequency(t: f64, d: f64, diffusion: f64, r: f64, n_draws: u64, seed: u64) -> f64 {
    let ball = Ball { center: Vec3::new(d, 0.0, 0.0), radius_sq: r * r };
    let sigma = (2.0 * diffusion * t).sqrt();
    let mut rng = stream(seed, 0);
    let mut hits = 0u64;
    for _ in 0..n_draws {
        let mut m = MoleculeState { species: 0, position: Vec3::ZERO, emission_time: 0.0 };
        m.advance(sigma, &mut rng);
        hits += u64::from(ball.contains(m.position));
    }
    hits as f64 / n_draws as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::hit_prob_sphere;
    use crate::model::defaults;

    fn scenario(k: usize) -> Scenario {
        defaults::symmetric(k, 10, 7, FusionRule::Or).validate().unwrap()
    }

    fn short(k: usize, l: usize) -> Scenario {
        scenario(k).with_changes(|s| s.timing.sequence_length = l).unwrap()
    }

    /// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
    fn ks_p_value(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (n, m) = (a.len() as f64, b.len() as f64);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / n - j as f64 / m).abs());
        }
        let en = (n * m / (n + m)).sqrt();
        let lambda = (en + 0.12 + 0.11 / en) * d;
        let p: f64 = (1..=100).map(|k| 2.0 * (-1f64).powi(k + 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp()).sum();
        p.clamp(0.0, 1.0)
    }

    #[test]
    fn one_step_and_two_substeps_agree() {
        let d: f64 = 5e-9;
        let t: f64 = 1e-3;
        let n = 100_000;
        let mut rng = stream(11, 0);
        let mut one = Vec::with_capacity(n);
        let mut two = Vec::with_capacity(n);
        for _ in 0..n {
            let mut a = MoleculeState { species: 0, position: Vec3::ZERO, emission_time: 0.0 };
            a.advance((2.0 * d * t).sqrt(), &mut rng);
            one.push(a.position.x);
            let mut b = MoleculeState { species: 0, position: Vec3::ZERO, emission_time: 0.0 };
            b.advance((2.0 * d * 0.3 * t).sqrt(), &mut rng);
            b.advance((2.0 * d * 0.7 * t).sqrt(), &mut rng);
            two.push(b.position.x);
        }
        let p = ks_p_value(one, two);
        assert!(p > 0.01, "KS p = {p}");
    }

    #[test]
    fn trials_are_reproducible() {
        let s = short(2, 4);
        assert_eq!(simulate_trial(&s, 42), simulate_trial(&s, 42));
        assert_ne!(simulate_trial(&s, 42).rx_counts, simulate_trial(&s, 43).rx_counts);
        let a = estimate_error(&s, 8, 5).unwrap();
        let b = estimate_error(&s, 8, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn record_dimensions_and_fusion_consistency() {
        let s = defaults::symmetric(3, 10, 7, FusionRule::Majority).validate().unwrap().with_changes(|s| s.timing.sequence_length = 5).unwrap();
        let r = simulate_trial(&s, 3);
        assert_eq!(r.tx_bits.len(), 5);
        for m in [&r.rx_decisions, &r.fc_received] {
            assert_eq!(m.len(), 3);
            assert!(m.iter().all(|row| row.len() == 5));
        }
        for j in 0..5 {
            let votes = r.fc_received.iter().filter(|d| d[j]).count();
            assert_eq!(r.global_decisions[j], votes >= 2);
            assert_eq!(r.errors[j], r.global_decisions[j] != r.tx_bits[j]);
        }
    }

    #[test]
    fn all_zero_bits_give_no_errors() {
        let s = scenario(3);
        let options = SimOptions { forced_bits: Some(BitSequence::zeros(10)), ..Default::default() };
        for seed in 0..5 {
            let r = simulate_trial_with(&s, seed, &options).unwrap();
            assert!(r.rx_counts.iter().flatten().all(|&c| c == 0));
            assert_eq!(r.error_count(), 0);
        }
    }

    #[test]
    fn frozen_molecules_miss_every_one() {
        let s = scenario(2).with_changes(|s| s.physical.diffusion_coeff_info = 1e-30).unwrap();
        let options = SimOptions { forced_bits: Some(BitSequence::from_digits(&[1, 0, 1, 1, 0, 1, 1, 1, 0, 1])), ..Default::default() };
        let r = simulate_trial_with(&s, 9, &options).unwrap();
        for (j, &bit) in r.tx_bits.iter().enumerate() {
            assert!(!r.global_decisions[j]);
            assert_eq!(r.errors[j], bit);
        }
    }

    #[test]
    fn zero_signal_error_is_fraction_of_ones() {
        let s = scenario(2).with_changes(|s| s.physical.molecules_per_one_tx = 0.0).unwrap();
        let report = estimate_error(&s, 1, 77).unwrap();
        let record = TrialRealization::new(&s, trial_seed(77, 0), None).unwrap();
        let ones = record.bits().count_ones() as f64;
        assert_eq!(report.q_bar, ones / 10.0);
    }

    #[test]
    fn forced_bits_must_match_length() {
        let options = SimOptions { forced_bits: Some(BitSequence::zeros(3)), ..Default::default() };
        assert!(matches!(simulate_trial_with(&scenario(1), 0, &options), Err(SimError::ForcedBitsLength { got: 3, expected: 10 })));
    }

    #[test]
    fn reports_do_not_depend_on_transmitter_molecules() {
        let loud = short(2, 3);
        let silent = loud.with_changes(|s| s.physical.molecules_per_one_tx = 0.0).unwrap();
        let mut a = TrialRealization::new(&loud, 5, None).unwrap();
        let mut b = TrialRealization::new(&silent, 5, None).unwrap();
        for k in 0..2 {
            for j in 1..=3 {
                assert_eq!(a.report_samples(k, j), b.report_samples(k, j));
            }
        }
    }

    #[test]
    fn grid_estimate_matches_single_point_runs() {
        let s = short(2, 4);
        let points: Vec<SimPoint> = [(8, 5), (10, 7), (12, 3)]
            .into_iter()
            .map(|(r, f)| SimPoint { xi_r: vec![r; 2], xi_fc: f, rule: FusionRule::Or, reporting: Reporting::Noisy })
            .collect();
        let grid = estimate_error_grid(&s, &points, 6, 21).unwrap();
        for (p, g) in points.iter().zip(&grid) {
            let single = s.with_thresholds(p.xi_r.iter().map(|&x| crate::model::Threshold(x)).collect(), crate::model::Threshold(p.xi_fc)).unwrap();
            assert_eq!(&estimate_error(&single, 6, 21).unwrap(), g);
        }
    }

    #[test]
    fn single_molecule_frequency_matches_sphere_formula() {
        let (t, d, diff, r) = (1e-4, 0.6e-6, 5e-9, 0.225e-6);
        let n = 200_000;
        let p = hit_prob_sphere(t, d, diff, r).unwrap();
        let f = single_molecule_hit_frequency(t, d, diff, r, n, 1);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() < 3.0 * sigma, "{f} vs {p}");
    }

    #[test]
    fn released_cloud_matches_sphere_formula_at_every_sample() {
        let (diff, r) = (5e-9, 0.225e-6);
        let center = Vec3::new(0.6e-6, -0.5e-6, 0.3e-6);
        let balls = [Ball { center, radius_sq: r * r }, Ball { center: Vec3::new(1.5e-6, 0.0, 0.0), radius_sq: r * r }];
        let times = [5e-5, 1e-4, 3e-4, 1e-3];
        let n = 400_000u64;
        let mut counts = vec![0u64; 2 * times.len()];
        let source = Source { species: 0, origin: Vec3::ZERO, start: 0.0, count: n, diffusion: diff };
        release(&source, &times, &balls, &mut stream(8, 0), &mut counts);
        for (b, ball) in balls.iter().enumerate() {
            let d = ball.center.distance(Vec3::ZERO);
            for (i, &t) in times.iter().enumerate() {
                let p = hit_prob_sphere(t, d, diff, r).unwrap();
                let f = counts[b * times.len() + i] as f64 / n as f64;
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                assert!((f - p).abs() < 3.5 * sigma, "ball {b} t={t}: {f} vs {p}");
            }
        }
    }

    #[test]
    fn trace_lists_every_receiver_sample() {
        let s = short(2, 2);
        let mut buf = Vec::new();
        let r = simulate_trial_traced(&s, 4, &SimOptions::default(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "time,species,observer,count");
        let rx_rows = rows.iter().filter(|l| l.contains(",0,rx")).count();
        assert_eq!(rx_rows, 2 * 2 * 5);
        let rx1_total: u64 = rows
            .iter()
            .filter(|l| l.contains(",0,rx1,"))
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(rx1_total, r.rx_counts[0].iter().sum::<u64>());
    }
}
