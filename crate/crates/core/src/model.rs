//! Scenario description: device placement, physical constants, timing
//! schedule, detector thresholds and the fusion rule.
//!
//! Raw inputs are plain serde structs ([`ScenarioSpec`]). [`validate_scenario`]
//! checks every structural constraint at once and produces an immutable
//! [`Scenario`] carrying the derived quantities (distances, observer volumes,
//! symmetry flag, normalized fusion rule) used by the analytic engine and the
//! particle simulator.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

/// Current version of the scenario/experiment JSON schema.
pub const SCHEMA_VERSION: u32 = 1;

/// Two distances closer than this (in µm) are treated as equal when deciding
/// whether a topology is symmetric.
pub const SYMMETRY_TOLERANCE_UM: f64 = 1e-9;

const MICRO: f64 = 1e-6;

/// Cartesian 3-vector. Units depend on context (µm in topology files,
/// metres inside the simulator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn distance(self, other: Vec3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn scale(self, factor: f64) -> Vec3 {
        Vec3::new(self.x * factor, self.y * factor, self.z * factor)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

/// Positions (µm) and radii (µm) of the transmitter, the receivers and the
/// fusion center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemTopology {
    pub tx_position: Vec3,
    pub rx_positions: Vec<Vec3>,
    pub fc_position: Vec3,
    pub rx_radius: Vec<f64>,
    pub fc_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Diffusion coefficient of the information molecules, m²/s.
    pub diffusion_coeff_info: f64,
    /// Diffusion coefficient of each receiver's reporting molecule, m²/s.
    pub diffusion_coeff_report: Vec<f64>,
    /// Molecules released by the transmitter for bit 1.
    pub molecules_per_one_tx: f64,
    /// Molecules released by each receiver to report decision 1.
    pub molecules_per_one_rx: Vec<f64>,
    /// Prior probability of bit 1.
    pub p_one: f64,
}

/// Timing schedule. All durations in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub t_trans: f64,
    pub t_report: f64,
    pub bit_interval: f64,
    pub sample_step_rx: f64,
    pub sample_step_fc: f64,
    pub samples_rx: u32,
    pub samples_fc: u32,
    pub sequence_length: usize,
}

impl TimingConfig {
    /// Sampling instant of the `m`th receiver sample (1-based) in interval
    /// `j` (1-based).
    pub fn rx_sample_time(&self, j: usize, m: u32) -> f64 {
        (j - 1) as f64 * self.bit_interval + f64::from(m) * self.sample_step_rx
    }

    /// Instant at which receivers release their reports for interval `j`.
    pub fn report_time(&self, j: usize) -> f64 {
        (j - 1) as f64 * self.bit_interval + self.t_trans
    }

    pub fn fc_sample_time(&self, j: usize, m: u32) -> f64 {
        self.report_time(j) + f64::from(m) * self.sample_step_fc
    }
}

/// Decision threshold on a molecule count. A decision of 1 is made when the
/// summed count reaches the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Threshold(pub u32);

impl Threshold {
    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

// Real-valued thresholds are floored; negative and non-finite values map to 0
// and are then rejected by validation.
impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = f64::deserialize(deserializer)?;
        let floored = if raw.is_finite() && raw > 0.0 { raw.floor().min(f64::from(u32::MAX)) } else { 0.0 };
        Ok(Threshold(floored as u32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub threshold_rx: Vec<Threshold>,
    pub threshold_fc: Threshold,
}

/// Fusion rule applied at the fusion center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FusionRule {
    /// Decide 1 when at least `n` of the K received decisions are 1.
    NOutOfK { n: usize },
    Or,
    And,
    Majority,
    /// Threshold the pooled raw observations of all receivers.
    SoftSum { threshold: Threshold },
}

impl FusionRule {
    /// Maps OR, AND and majority onto their N-out-of-K equivalents for `k`
    /// receivers. `NOutOfK` and `SoftSum` are returned unchanged.
    pub fn normalize(self, k: usize) -> FusionRule {
        match self {
            FusionRule::Or => FusionRule::NOutOfK { n: 1 },
            FusionRule::And => FusionRule::NOutOfK { n: k },
            FusionRule::Majority => FusionRule::NOutOfK { n: k.div_ceil(2) },
            other => other,
        }
    }

    /// The counting parameter N of a normalized hard rule.
    pub fn required_votes(self, k: usize) -> Option<usize> {
        match self.normalize(k) {
            FusionRule::NOutOfK { n } => Some(n),
            _ => None,
        }
    }

    pub fn is_soft(self) -> bool {
        matches!(self, FusionRule::SoftSum { .. })
    }

    /// Short stable label used in CSV output.
    pub fn label(self) -> String {
        match self {
            FusionRule::NOutOfK { n } => format!("{n}-out-of-k"),
            FusionRule::Or => "or".into(),
            FusionRule::And => "and".into(),
            FusionRule::Majority => "majority".into(),
            FusionRule::SoftSum { .. } => "soft".into(),
        }
    }
}

/// Unvalidated scenario as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub topology: SystemTopology,
    pub physical: PhysicalParams,
    pub timing: TimingConfig,
    pub detector: DetectorConfig,
    pub fusion: FusionRule,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(self) -> Result<Scenario, ValidationError> {
        validate_scenario(self)
    }
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub observed: String,
    pub constraint: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} violates {}", self.field, self.observed, self.constraint)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid scenario: {}", display_violations(.violations))]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

fn display_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ValidationError {
    pub fn mentions(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field.starts_with(field))
    }
}

#[derive(Default)]
struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn require(&mut self, ok: bool, field: impl Into<String>, observed: impl fmt::Debug, constraint: &'static str) {
        if !ok {
            self.violations.push(Violation {
                field: field.into(),
                observed: format!("{observed:?}"),
                constraint,
            });
        }
    }
}

/// Validated, immutable scenario with derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    spec: ScenarioSpec,
    rule: FusionRule,
    tx_distances_um: Vec<f64>,
    fc_distances_um: Vec<f64>,
    rx_volumes_m3: Vec<f64>,
    fc_volume_m3: f64,
    symmetric: bool,
}

/// Checks every structural invariant and derives distances, volumes, the
/// symmetry flag and the normalized fusion rule. All violations are reported
/// together.
pub fn validate_scenario(spec: ScenarioSpec) -> Result<Scenario, ValidationError> {
    let mut c = Checker::default();
    let topo = &spec.topology;
    let phys = &spec.physical;
    let timing = &spec.timing;
    let det = &spec.detector;
    let k = topo.rx_positions.len();

    c.require(spec.schema_version == SCHEMA_VERSION, "schema_version", spec.schema_version, "schema_version == 1");
    c.require(k >= 1, "topology.rx_positions", k, "K >= 1");
    let per_rx = [
        ("topology.rx_radius", topo.rx_radius.len()),
        ("physical.diffusion_coeff_report", phys.diffusion_coeff_report.len()),
        ("physical.molecules_per_one_rx", phys.molecules_per_one_rx.len()),
        ("detector.threshold_rx", det.threshold_rx.len()),
    ];
    for (field, len) in per_rx {
        c.require(len == k, field, len, "one entry per receiver");
    }

    for (i, r) in topo.rx_radius.iter().enumerate() {
        c.require(r.is_finite() && *r > 0.0, format!("topology.rx_radius[{i}]"), r, "radius > 0");
    }
    c.require(topo.fc_radius.is_finite() && topo.fc_radius > 0.0, "topology.fc_radius", topo.fc_radius, "radius > 0");

    let tx_distances_um: Vec<f64> = topo.rx_positions.iter().map(|p| p.distance(topo.tx_position)).collect();
    let fc_distances_um: Vec<f64> = topo.rx_positions.iter().map(|p| p.distance(topo.fc_position)).collect();
    for (i, d) in tx_distances_um.iter().enumerate() {
        c.require(d.is_finite() && *d > 0.0, format!("topology.rx_positions[{i}]"), d, "distance to TX > 0");
    }
    for (i, d) in fc_distances_um.iter().enumerate() {
        c.require(d.is_finite() && *d > 0.0, format!("topology.rx_positions[{i}]"), d, "distance to FC > 0");
    }
    for a in 0..k {
        for b in (a + 1)..k {
            c.require(
                topo.rx_positions[a] != topo.rx_positions[b],
                format!("topology.rx_positions[{b}]"),
                topo.rx_positions[b],
                "distinct receiver centers",
            );
        }
    }

    c.require(
        phys.diffusion_coeff_info.is_finite() && phys.diffusion_coeff_info > 0.0,
        "physical.diffusion_coeff_info",
        phys.diffusion_coeff_info,
        "diffusion coefficient > 0",
    );
    for (i, d) in phys.diffusion_coeff_report.iter().enumerate() {
        c.require(d.is_finite() && *d > 0.0, format!("physical.diffusion_coeff_report[{i}]"), d, "diffusion coefficient > 0");
    }
    c.require(
        phys.molecules_per_one_tx.is_finite() && phys.molecules_per_one_tx >= 0.0,
        "physical.molecules_per_one_tx",
        phys.molecules_per_one_tx,
        "S_0 >= 0",
    );
    for (i, s) in phys.molecules_per_one_rx.iter().enumerate() {
        c.require(s.is_finite() && *s >= 0.0, format!("physical.molecules_per_one_rx[{i}]"), s, "S_k >= 0");
    }
    c.require((0.0..=1.0).contains(&phys.p_one), "physical.p_one", phys.p_one, "0 <= P_1 <= 1");

    let durations = [
        ("timing.t_trans", timing.t_trans),
        ("timing.t_report", timing.t_report),
        ("timing.bit_interval", timing.bit_interval),
        ("timing.sample_step_rx", timing.sample_step_rx),
        ("timing.sample_step_fc", timing.sample_step_fc),
    ];
    for (field, v) in durations {
        c.require(v.is_finite() && v > 0.0, field, v, "duration > 0");
    }
    let sum = timing.t_trans + timing.t_report;
    c.require(
        (timing.bit_interval - sum).abs() <= 1e-12 * sum.abs().max(f64::MIN_POSITIVE),
        "timing.bit_interval",
        timing.bit_interval,
        "T = t_trans + t_report",
    );
    c.require(timing.samples_rx >= 1, "timing.samples_rx", timing.samples_rx, "M_RX >= 1");
    c.require(timing.samples_fc >= 1, "timing.samples_fc", timing.samples_fc, "M_FC >= 1");
    let rx_span = f64::from(timing.samples_rx) * timing.sample_step_rx;
    c.require(rx_span < timing.t_trans, "timing.samples_rx", rx_span, "M_RX * dt_R < t_trans");
    let fc_span = f64::from(timing.samples_fc) * timing.sample_step_fc;
    c.require(fc_span <= timing.t_report * (1.0 + 1e-12), "timing.samples_fc", fc_span, "M_FC * dt_FC <= t_report");
    c.require(timing.sequence_length >= 1, "timing.sequence_length", timing.sequence_length, "L >= 1");

    for (i, t) in det.threshold_rx.iter().enumerate() {
        c.require(t.0 >= 1, format!("detector.threshold_rx[{i}]"), t.0, "threshold >= 1");
    }
    c.require(det.threshold_fc.0 >= 1, "detector.threshold_fc", det.threshold_fc.0, "threshold >= 1");

    let rule = spec.fusion.normalize(k);
    match rule {
        FusionRule::NOutOfK { n } => c.require(n >= 1 && n <= k, "fusion.n", n, "1 <= N <= K"),
        FusionRule::SoftSum { threshold } => {
            c.require(threshold.0 >= 1, "fusion.threshold", threshold.0, "threshold >= 1")
        }
        _ => unreachable!("normalize maps named rules to NOutOfK"),
    }

    if !c.violations.is_empty() {
        return Err(ValidationError { violations: c.violations });
    }

    let sphere = |r_um: f64| 4.0 / 3.0 * PI * (r_um * MICRO).powi(3);
    let rx_volumes_m3 = topo.rx_radius.iter().map(|&r| sphere(r)).collect();
    let fc_volume_m3 = sphere(topo.fc_radius);
    let symmetric = all_equal(&tx_distances_um) && all_equal(&fc_distances_um);

    Ok(Scenario {
        spec,
        rule,
        tx_distances_um,
        fc_distances_um,
        rx_volumes_m3,
        fc_volume_m3,
        symmetric,
    })
}

fn all_equal(values: &[f64]) -> bool {
    values.windows(2).all(|w| (w[0] - w[1]).abs() <= SYMMETRY_TOLERANCE_UM)
}

impl Scenario {
    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn into_spec(self) -> ScenarioSpec {
        self.spec
    }

    pub fn num_rx(&self) -> usize {
        self.spec.topology.rx_positions.len()
    }

    pub fn topology(&self) -> &SystemTopology {
        &self.spec.topology
    }

    pub fn physical(&self) -> &PhysicalParams {
        &self.spec.physical
    }

    pub fn timing(&self) -> &TimingConfig {
        &self.spec.timing
    }

    pub fn detector(&self) -> &DetectorConfig {
        &self.spec.detector
    }

    /// Normalized fusion rule: `NOutOfK` or `SoftSum`.
    pub fn rule(&self) -> FusionRule {
        self.rule
    }

    pub fn sequence_length(&self) -> usize {
        self.spec.timing.sequence_length
    }

    pub fn p_one(&self) -> f64 {
        self.spec.physical.p_one
    }

    /// TX to RX_k distance in µm.
    pub fn tx_distance_um(&self, k: usize) -> f64 {
        self.tx_distances_um[k]
    }

    /// RX_k to FC distance in µm.
    pub fn fc_distance_um(&self, k: usize) -> f64 {
        self.fc_distances_um[k]
    }

    pub fn tx_distance_m(&self, k: usize) -> f64 {
        self.tx_distances_um[k] * MICRO
    }

    pub fn fc_distance_m(&self, k: usize) -> f64 {
        self.fc_distances_um[k] * MICRO
    }

    pub fn rx_volume_m3(&self, k: usize) -> f64 {
        self.rx_volumes_m3[k]
    }

    pub fn fc_volume_m3(&self) -> f64 {
        self.fc_volume_m3
    }

    pub fn rx_radius_m(&self, k: usize) -> f64 {
        self.spec.topology.rx_radius[k] * MICRO
    }

    pub fn fc_radius_m(&self) -> f64 {
        self.spec.topology.fc_radius * MICRO
    }

    /// All TX-RX distances equal and all RX-FC distances equal.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Symmetric geometry with identical per-receiver parameters, so every
    /// receiver has the same error statistics.
    pub fn receivers_identical(&self) -> bool {
        let t = &self.spec;
        let same = |v: &[f64]| v.windows(2).all(|w| w[0] == w[1]);
        self.symmetric
            && same(&t.topology.rx_radius)
            && same(&t.physical.diffusion_coeff_report)
            && same(&t.physical.molecules_per_one_rx)
            && t.detector.threshold_rx.windows(2).all(|w| w[0] == w[1])
    }

    /// Returns a re-validated copy with modified inputs.
    pub fn with_changes(&self, edit: impl FnOnce(&mut ScenarioSpec)) -> Result<Scenario, ValidationError> {
        let mut spec = self.spec.clone();
        edit(&mut spec);
        validate_scenario(spec)
    }

    /// Copy with new detector thresholds.
    pub fn with_thresholds(&self, threshold_rx: Vec<Threshold>, threshold_fc: Threshold) -> Result<Scenario, ValidationError> {
        self.with_changes(|s| {
            s.detector.threshold_rx = threshold_rx;
            s.detector.threshold_fc = threshold_fc;
        })
    }

    pub fn with_rule(&self, rule: FusionRule) -> Result<Scenario, ValidationError> {
        self.with_changes(|s| s.fusion = rule)
    }
}

/// Reference parameter values and device coordinates.
pub mod defaults {
    use super::*;

    pub const RADIUS_UM: f64 = 0.225;
    pub const DIFFUSION: f64 = 5e-9;
    pub const S0: f64 = 10_000.0;
    /// Total reporting budget shared by all receivers.
    pub const REPORT_BUDGET: f64 = 1_000.0;
    /// Molecules released by the point-to-point baselines.
    pub const BASELINE_MOLECULES: f64 = 11_000.0;

    pub const TX: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const FC: Vec3 = Vec3::new(2.0, 0.0, 0.0);

    /// Receiver coordinates (µm) of the symmetric topology, in listed order.
    pub const SYMMETRIC_RX: [Vec3; 6] = [
        Vec3::new(2.0, 0.6, 0.0),
        Vec3::new(2.0, -0.6, 0.0),
        Vec3::new(2.0, 0.0, 0.6),
        Vec3::new(2.0, 0.0, -0.6),
        Vec3::new(2.0, 0.3, 0.5196),
        Vec3::new(2.0, 0.3, -0.5196),
    ];

    pub const ASYMMETRIC_RX: [Vec3; 3] = [
        Vec3::new(1.5, 0.6, 0.0),
        Vec3::new(2.0, 0.6, 0.0),
        Vec3::new(2.5, 0.6, 0.0),
    ];

    pub fn timing() -> TimingConfig {
        TimingConfig {
            t_trans: 1e-3,
            t_report: 0.1e-3,
            bit_interval: 1.1e-3,
            sample_step_rx: 100e-6,
            sample_step_fc: 10e-6,
            samples_rx: 5,
            samples_fc: 5,
            sequence_length: 10,
        }
    }

    /// Per-receiver report size when `k` receivers share the budget,
    /// rounded to the nearest integer with ties rounded up.
    pub fn report_molecules(k: usize) -> f64 {
        (REPORT_BUDGET / k as f64 + 0.5).floor()
    }

    fn build(rx: &[Vec3], xi_r: Vec<Threshold>, xi_fc: Threshold, rule: FusionRule) -> ScenarioSpec {
        let k = rx.len();
        ScenarioSpec {
            schema_version: SCHEMA_VERSION,
            topology: SystemTopology {
                tx_position: TX,
                rx_positions: rx.to_vec(),
                fc_position: FC,
                rx_radius: vec![RADIUS_UM; k],
                fc_radius: RADIUS_UM,
            },
            physical: PhysicalParams {
                diffusion_coeff_info: DIFFUSION,
                diffusion_coeff_report: vec![DIFFUSION; k],
                molecules_per_one_tx: S0,
                molecules_per_one_rx: vec![report_molecules(k); k],
                p_one: 0.5,
            },
            timing: timing(),
            detector: DetectorConfig { threshold_rx: xi_r, threshold_fc: xi_fc },
            fusion: rule,
        }
    }

    /// Symmetric topology using receivers 1..=k in listed order, with a
    /// shared receiver threshold.
    pub fn symmetric(k: usize, xi_r: u32, xi_fc: u32, rule: FusionRule) -> ScenarioSpec {
        assert!((1..=SYMMETRIC_RX.len()).contains(&k), "symmetric topology has at most 6 receivers");
        build(&SYMMETRIC_RX[..k], vec![Threshold(xi_r); k], Threshold(xi_fc), rule)
    }

    /// Three-receiver asymmetric topology with per-receiver thresholds.
    pub fn asymmetric(xi_r: [u32; 3], xi_fc: u32, rule: FusionRule) -> ScenarioSpec {
        build(&ASYMMETRIC_RX, xi_r.iter().map(|&x| Threshold(x)).collect(), Threshold(xi_fc), rule)
    }

    /// Single link used by the point-to-point baselines: the "receiver" sits
    /// at `rx` and the transmitter releases the full baseline budget.
    pub fn point_to_point(rx: Vec3, xi: u32) -> ScenarioSpec {
        let mut spec = build(&[rx], vec![Threshold(xi)], Threshold(1), FusionRule::Or);
        spec.physical.molecules_per_one_tx = BASELINE_MOLECULES;
        // the FC is never used with perfect reporting; keep it off the receiver
        spec.topology.fc_position = Vec3::new(rx.x, rx.y, rx.z + 10.0);
        spec
    }
}
