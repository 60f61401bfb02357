//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails. `ACCEPTANCE_ONLY=1,3` restricts the
//! run to the listed criteria.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use coopmc::channel::{hit_prob_point_source, hit_prob_sphere};
use coopmc::detection::BitSequence;
use coopmc::evaluator::{baseline_error, Averaging, BaselineKind, Evaluator, Reporting, SweepGrid, DEFAULT_XI_MAX};
use coopmc::experiments::{ExperimentId, ExperimentSpec, DEFAULT_SEED, DEFAULT_TRIALS};
use coopmc::fusion::{brute_force_fusion, fuse_asymmetric, fuse_symmetric, PerRxErrorVector};
use coopmc::model::{defaults, FusionRule, Scenario};
use coopmc::sim::{estimate_error_grid, simulate_trial_with, single_molecule_hit_frequency, SimOptions, SimPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D: f64 = 5e-9;
const R: f64 = 0.225e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn table_scenario(k: usize, rule: FusionRule) -> Scenario {
    defaults::symmetric(k, 10, 7, rule).validate().unwrap()
}

fn full_grid(reporting: Reporting) -> SweepGrid {
    match reporting {
        Reporting::Perfect => SweepGrid::square(DEFAULT_XI_MAX, 1),
        Reporting::Noisy => SweepGrid::square(DEFAULT_XI_MAX, DEFAULT_XI_MAX),
    }
}

fn optimum(k: usize, rule: FusionRule, reporting: Reporting) -> (Vec<u32>, u32, f64) {
    let best = Evaluator::new(table_scenario(k, rule)).unwrap().optimize_thresholds(&full_grid(reporting), reporting).unwrap();
    (best.xi_r, best.xi_fc, best.report.q_bar)
}

fn headline() -> Outcome {
    let start = Instant::now();
    let (xi_r, xi_fc, q) = optimum(2, FusionRule::Or, Reporting::Noisy);
    let secs = start.elapsed().as_secs_f64();
    let pass = xi_r == vec![10, 10] && xi_fc == 7 && (4e-3..=9e-3).contains(&q) && secs <= 600.0;
    Outcome { pass, detail: format!("optimum xi_R={xi_r:?} xi_FC={xi_fc} Q={q:.4e} in {secs:.1}s; need (10,7), Q in [4e-3, 9e-3], <= 600 s") }
}

fn simulator_agreement() -> Outcome {
    let spec = ExperimentSpec::preset(ExperimentId::Fig4).unwrap();
    let scenario = spec.scenario(2, FusionRule::Or).unwrap();
    let analytic = Evaluator::new(scenario.clone()).unwrap().sweep(&spec.grid, Reporting::Noisy, Averaging::Exact).unwrap();
    let points: Vec<SimPoint> = analytic
        .iter()
        .map(|p| SimPoint { xi_r: p.xi_r.clone(), xi_fc: p.xi_fc, rule: FusionRule::Or, reporting: Reporting::Noisy })
        .collect();
    let sim = estimate_error_grid(&scenario, &points, DEFAULT_TRIALS, DEFAULT_SEED).unwrap();
    let mut inside = 0;
    let mut worst = 0.0f64;
    for (a, s) in analytic.iter().zip(&sim) {
        let sigma = s.ci_halfwidth.unwrap() / 1.96;
        let z = (s.q_bar - a.report.q_bar).abs() / sigma;
        worst = worst.max(z);
        if z <= 3.0 {
            inside += 1;
        }
    }
    let n = analytic.len();
    let pass = n >= 10 && inside as f64 >= 0.9 * n as f64;
    Outcome { pass, detail: format!("{inside}/{n} grid points within 3 sigma at {DEFAULT_TRIALS} trials (max |z| = {worst:.2}); need >= 90% of >= 10 points") }
}

fn rule_ordering() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for reporting in [Reporting::Perfect, Reporting::Noisy] {
        let q = |rule| optimum(3, rule, reporting).2;
        let (maj, or, and) = (q(FusionRule::Majority), q(FusionRule::Or), q(FusionRule::And));
        pass &= maj <= or && or <= and;
        parts.push(format!("{}: majority {maj:.3e} <= or {or:.3e} <= and {and:.3e}", reporting.label()));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn cooperation_gain() -> Outcome {
    let majority: Vec<f64> = (1..=6).map(|k| optimum(k, FusionRule::Majority, Reporting::Noisy).2).collect();
    let tx_rx = baseline_error(BaselineKind::TxRx, None).unwrap().report.q_bar;
    let tx_fc = baseline_error(BaselineKind::TxFc, None).unwrap().report.q_bar;
    let beats = majority[2] < tx_rx && majority[2] < tx_fc;
    let monotone = majority.windows(2).all(|w| w[1] <= w[0]);
    let curve: Vec<String> = majority.iter().map(|q| format!("{q:.3e}")).collect();
    Outcome {
        pass: beats && monotone,
        detail: format!("K=3 majority {:.3e} vs TX-RX {tx_rx:.3e}, TX-FC {tx_fc:.3e}; majority over K=1..6 [{}]", majority[2], curve.join(", ")),
    }
}

fn soft_bound() -> Outcome {
    let evaluator = Evaluator::new(table_scenario(3, FusionRule::Or)).unwrap();
    let thresholds: Vec<u32> = (1..=3 * DEFAULT_XI_MAX).collect();
    let (xi, report) = evaluator.optimize_soft(&thresholds).unwrap();
    let soft = report.q_bar;
    let hard: Vec<(FusionRule, f64)> =
        [FusionRule::And, FusionRule::Or, FusionRule::Majority].into_iter().map(|r| (r, optimum(3, r, Reporting::Perfect).2)).collect();
    let pass = hard.iter().all(|&(_, q)| soft <= q);
    let listed: Vec<String> = hard.iter().map(|(r, q)| format!("{} {q:.3e}", r.label())).collect();
    Outcome { pass, detail: format!("soft (xi={xi}) {soft:.3e} vs {}", listed.join(", ")) }
}

fn fusion_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_brute = 0.0f64;
    let mut worst_sym = 0.0f64;
    let mut worst_named = 0.0f64;
    let mut cases = 0;
    let prob = |rng: &mut ChaCha8Rng| match rng.gen_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen::<f64>(),
    };
    for k in 1..=4usize {
        for _ in 0..1000 {
            let v = PerRxErrorVector::new((0..k).map(|_| prob(&mut rng)).collect(), (0..k).map(|_| prob(&mut rng)).collect()).unwrap();
            let mut rules = vec![FusionRule::Or, FusionRule::And, FusionRule::Majority];
            rules.extend((1..=k).map(|n| FusionRule::NOutOfK { n }));
            for rule in rules {
                let (a_md, a_fa) = fuse_asymmetric(rule, &v).unwrap();
                let (b_md, b_fa) = brute_force_fusion(rule, &v).unwrap();
                worst_brute = worst_brute.max((a_md - b_md).abs()).max((a_fa - b_fa).abs());
            }
            let (or, and) = (fuse_asymmetric(FusionRule::Or, &v).unwrap(), fuse_asymmetric(FusionRule::And, &v).unwrap());
            let (n1, nk) = (fuse_asymmetric(FusionRule::NOutOfK { n: 1 }, &v).unwrap(), fuse_asymmetric(FusionRule::NOutOfK { n: k }, &v).unwrap());
            for (x, y) in [(or, n1), (and, nk)] {
                worst_named = worst_named.max((x.0 - y.0).abs()).max((x.1 - y.1).abs());
            }
            let (md, fa) = (prob(&mut rng), prob(&mut rng));
            let uniform = PerRxErrorVector::uniform(k, md, fa);
            for n in 1..=k {
                let rule = FusionRule::NOutOfK { n };
                let s = fuse_symmetric(rule, md, fa, k).unwrap();
                let a = fuse_asymmetric(rule, &uniform).unwrap();
                worst_sym = worst_sym.max((s.0 - a.0).abs()).max((s.1 - a.1).abs());
            }
            cases += 1;
        }
    }
    let pass = worst_brute <= 1e-12 && worst_sym <= 1e-12 && worst_named <= 1e-12;
    Outcome {
        pass,
        detail: format!("{cases} random inputs, K=1..4: brute force {worst_brute:.1e}, symmetric {worst_sym:.1e}, OR/AND vs N-out-of-K {worst_named:.1e}; need <= 1e-12"),
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let (mut q0, mut q1) = (1.0, x);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * x * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    let dq = n as f64 * (x * q1 - q0) / (x * x - 1.0);
                    return (x, 2.0 / ((1.0 - x * x) * dq * dq));
                }
            }
        })
        .collect()
}

/// Composite Gauss-Legendre integral of `f` over [a, b].
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &[(f64, f64)]) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            rule.iter().map(|&(x, w)| w * f(lo + 0.5 * h * (x + 1.0))).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// Free-diffusion kernel integrated over a ball of radius `r` at distance
/// `d`, in spherical coordinates about the ball center.
fn kernel_over_ball(t: f64, d: f64, r: f64) -> f64 {
    let rule = gauss_legendre(24);
    let four_dt = 4.0 * D * t;
    let norm = (PI * four_dt).powf(-1.5);
    integrate(
        |rho| {
            let inner = integrate(|mu| (-(rho * rho + d * d - 2.0 * rho * d * mu) / four_dt).exp(), -1.0, 1.0, 8, &rule);
            2.0 * PI * rho * rho * inner
        },
        0.0,
        r,
        8,
        &rule,
    ) * norm
}

fn channel_math() -> Outcome {
    let times = [1e-5, 2e-5, 5e-5, 1e-4, 2e-4, 5e-4, 1e-3, 1.1e-3, 2.2e-3, 5.5e-3, 1.1e-2];
    let distances_um = [0.6, 1.0, 1.617, 2.0, 2.088, 2.571, 3.0, 4.5];
    let volume = 4.0 / 3.0 * PI * R.powi(3);
    let (mut sphere_err, mut point_err, mut point_far_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut point_worst = (0.0, 0.0);
    for &t in &times {
        for &d_um in &distances_um {
            let d = d_um * 1e-6;
            let reference = kernel_over_ball(t, d, R);
            sphere_err = sphere_err.max((hit_prob_sphere(t, d, D, R).unwrap() - reference).abs());
            let e = (hit_prob_point_source(t, d, D, volume).unwrap().value - reference).abs();
            if e > point_err {
                point_err = e;
                point_worst = (t, d_um);
            }
            if d >= 20.0 * R {
                point_far_err = point_far_err.max(e);
            }
        }
    }

    let n = 1_000_000;
    let mut freq_ok = 0;
    let draws = [(1e-5, 0.6), (5e-5, 0.6), (1e-4, 0.6), (1.1e-3, 0.6), (1e-4, 2.088)];
    for (i, &(t, d_um)) in draws.iter().enumerate() {
        let p = hit_prob_sphere(t, d_um * 1e-6, D, R).unwrap();
        let f = single_molecule_hit_frequency(t, d_um * 1e-6, D, R, n, 100 + i as u64);
        if (f - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt() {
            freq_ok += 1;
        }
    }
    let pass = sphere_err <= 1e-6 && point_err <= 1e-6 && freq_ok == draws.len();
    Outcome {
        pass,
        detail: format!(
            "quadrature gap: sphere {sphere_err:.1e}, point {point_err:.1e} (worst at t={:.0e} s, d={} um; {point_far_err:.1e} for d >= 20 r); \
             simulated frequency within 3 sigma at {n} draws: {freq_ok}/{}; need gaps <= 1e-6",
            point_worst.0,
            point_worst.1,
            draws.len()
        ),
    }
}

fn degenerate_contracts() -> Outcome {
    let mut parts = Vec::new();

    let mut zero_ok = true;
    for p_one in [0.5, 0.3] {
        let s = table_scenario(2, FusionRule::Or)
            .with_changes(|s| {
                s.physical.molecules_per_one_tx = 0.0;
                s.physical.p_one = p_one;
            })
            .unwrap();
        let e = Evaluator::new(s).unwrap();
        for reporting in [Reporting::Perfect, Reporting::Noisy] {
            zero_ok &= (e.expected_error(reporting, Averaging::Exact).unwrap().q_bar - p_one).abs() <= 1e-12;
        }
    }
    parts.push(format!("S0=0 gives P1: {}", if zero_ok { "yes" } else { "no" }));

    let gap_for = |l: usize| {
        let s = table_scenario(2, FusionRule::Or)
            .with_changes(|s| {
                s.physical.molecules_per_one_rx = vec![1e12; 2];
                s.timing.sequence_length = l;
            })
            .unwrap();
        let e = Evaluator::new(s).unwrap();
        let noisy = e.expected_error(Reporting::Noisy, Averaging::Exact).unwrap().q_bar;
        let perfect = e.expected_error(Reporting::Perfect, Averaging::Exact).unwrap().q_bar;
        (noisy - perfect).abs()
    };
    let gap = gap_for(10);
    let reporting_ok = gap <= 1e-6;
    parts.push(format!("S_k=1e12 |noisy - perfect| = {gap:.3e} (L=1: {:.1e})", gap_for(1)));

    let s = table_scenario(3, FusionRule::Majority);
    let options = SimOptions { forced_bits: Some(BitSequence::zeros(s.sequence_length())), ..SimOptions::default() };
    let errors: usize = (0..200).map(|seed| simulate_trial_with(&s, seed, &options).unwrap().error_count()).sum();
    parts.push(format!("all-zero bits: {errors} simulated errors in 200 trials"));

    Outcome { pass: zero_ok && reporting_ok && errors == 0, detail: parts.join("; ") }
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(u8, &str, Check); 8] = [
        (1, "headline optimum", headline),
        (2, "simulator vs analytic", simulator_agreement),
        (3, "fusion rule ordering", rule_ordering),
        (4, "cooperation gain", cooperation_gain),
        (5, "soft fusion bound", soft_bound),
        (6, "fusion oracles", fusion_oracles),
        (7, "channel math", channel_math),
        (8, "degenerate contracts", degenerate_contracts),
    ];
    let only: Option<Vec<u8>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {name}: {verdict} ({}) [{:.1}s]", outcome.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!outcome.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
