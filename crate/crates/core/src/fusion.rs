//! Global miss-detection and false-alarm probabilities of N-out-of-K hard
//! fusion, given each receiver's (local or end-to-end) error probabilities.

use crate::model::FusionRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FusionError {
    #[error("soft fusion pools observations and has no hard-decision form")]
    SoftRule,
    #[error("N-out-of-K rule needs 1 <= N <= K, got N = {n}, K = {k}")]
    BadVoteCount { n: usize, k: usize },
    #[error("brute-force fusion supports at most {max} receivers, got {k}")]
    TooManyReceivers { k: usize, max: usize },
    #[error("per-receiver vectors differ in length ({md} vs {fa})")]
    LengthMismatch { md: usize, fa: usize },
}

/// Per-receiver miss-detection and false-alarm probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PerRxErrorVector {
    pub p_md: Vec<f64>,
    pub p_fa: Vec<f64>,
}

impl PerRxErrorVector {
    pub fn new(p_md: Vec<f64>, p_fa: Vec<f64>) -> Result<Self, FusionError> {
        if p_md.len() != p_fa.len() {
            return Err(FusionError::LengthMismatch { md: p_md.len(), fa: p_fa.len() });
        }
        Ok(PerRxErrorVector { p_md, p_fa })
    }

    pub fn uniform(k: usize, p_md: f64, p_fa: f64) -> Self {
        PerRxErrorVector { p_md: vec![p_md; k], p_fa: vec![p_fa; k] }
    }

    pub fn len(&self) -> usize {
        self.p_md.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_md.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalErrorTerms {
    pub q_md: f64,
    pub q_fa: f64,
    pub q_err: f64,
}

impl GlobalErrorTerms {
    pub fn new(q_md: f64, q_fa: f64, p_one: f64) -> Self {
        GlobalErrorTerms { q_md, q_fa, q_err: global_error(q_md, q_fa, p_one) }
    }
}

/// Prior-weighted global error.
pub fn global_error(q_md: f64, q_fa: f64, p_one: f64) -> f64 {
    p_one * q_md + (1.0 - p_one) * q_fa
}

fn votes_needed(rule: FusionRule, k: usize) -> Result<usize, FusionError> {
    let n = rule.required_votes(k).ok_or(FusionError::SoftRule)?;
    if n == 0 || n > k {
        return Err(FusionError::BadVoteCount { n, k });
    }
    Ok(n)
}

/// Distribution of the number of successes among independent Bernoulli
/// trials with the given success probabilities.
pub fn poisson_binomial_pmf(success: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for p in success {
        pmf.push(0.0);
        for n in (0..pmf.len()).rev() {
            let stay = pmf[n] * (1.0 - p);
            let up = if n > 0 { pmf[n - 1] * p } else { 0.0 };
            pmf[n] = stay + up;
        }
    }
    pmf
}

/// `1 - prod(1 - p)` without cancellation for small `p`.
fn any_of(p: &[f64]) -> f64 {
    let log_none: f64 = p.iter().map(|&x| (-x).ln_1p()).sum();
    -log_none.exp_m1()
}

/// Global error terms for receivers with non-identical statistics.
pub fn fuse_asymmetric(rule: FusionRule, v: &PerRxErrorVector) -> Result<(f64, f64), FusionError> {
    let k = v.len();
    let n = votes_needed(rule, k)?;
    if n == 1 {
        return Ok((v.p_md.iter().product(), any_of(&v.p_fa)));
    }
    if n == k {
        return Ok((any_of(&v.p_md), v.p_fa.iter().product()));
    }
    // Under bit 1 a receiver reports 1 with probability 1 - p_md; a miss
    // happens when fewer than N do. Under bit 0 a false alarm needs N or more.
    let ones_h1 = poisson_binomial_pmf(v.p_md.iter().map(|p| 1.0 - p));
    let ones_h0 = poisson_binomial_pmf(v.p_fa.iter().copied());
    let q_md: f64 = ones_h1[..n].iter().sum();
    let q_fa: f64 = ones_h0[n..].iter().sum();
    Ok((q_md.clamp(0.0, 1.0), q_fa.clamp(0.0, 1.0)))
}

/// Binomial coefficient as f64 (exact for the small K used here).
pub fn binomial(k: usize, n: usize) -> f64 {
    if n > k {
        return 0.0;
    }
    let n = n.min(k - n);
    (0..n).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// Global error terms for `k` receivers sharing `p_md` and `p_fa`.
pub fn fuse_symmetric(rule: FusionRule, p_md: f64, p_fa: f64, k: usize) -> Result<(f64, f64), FusionError> {
    let n = votes_needed(rule, k)?;
    let kk = k as i32;
    if n == 1 {
        return Ok((p_md.powi(kk), -(kk as f64 * (-p_fa).ln_1p()).exp_m1()));
    }
    if n == k {
        return Ok((-(kk as f64 * (-p_md).ln_1p()).exp_m1(), p_fa.powi(kk)));
    }
    let term = |count: usize, p: f64| binomial(k, count) * p.powi(count as i32) * (1.0 - p).powi((k - count) as i32);
    // complement of the N..=K detection sum
    let q_md: f64 = (0..n).map(|c| term(c, 1.0 - p_md)).sum();
    let q_fa: f64 = (n..=k).map(|c| term(c, p_fa)).sum();
    Ok((q_md.clamp(0.0, 1.0), q_fa.clamp(0.0, 1.0)))
}

pub const BRUTE_FORCE_MAX_RX: usize = 20;

/// Enumerates every received-decision vector. Test oracle for the closed
/// forms.
pub fn brute_force_fusion(rule: FusionRule, v: &PerRxErrorVector) -> Result<(f64, f64), FusionError> {
    let k = v.len();
    if k > BRUTE_FORCE_MAX_RX {
        return Err(FusionError::TooManyReceivers { k, max: BRUTE_FORCE_MAX_RX });
    }
    let n = votes_needed(rule, k)?;
    let (mut q_md, mut q_fa) = (0.0, 0.0);
    for pattern in 0u32..(1 << k) {
        let ones = pattern.count_ones() as usize;
        let (mut prob_h1, mut prob_h0) = (1.0, 1.0);
        for i in 0..k {
            if pattern >> i & 1 == 1 {
                prob_h1 *= 1.0 - v.p_md[i];
                prob_h0 *= v.p_fa[i];
            } else {
                prob_h1 *= v.p_md[i];
                prob_h0 *= 1.0 - v.p_fa[i];
            }
        }
        if ones >= n {
            q_fa += prob_h0;
        } else {
            q_md += prob_h1;
        }
    }
    Ok((q_md, q_fa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn or_two_receivers() {
        let v = PerRxErrorVector::new(vec![0.1, 0.2], vec![0.1, 0.2]).unwrap();
        let (q_md, q_fa) = fuse_asymmetric(FusionRule::Or, &v).unwrap();
        assert!(close(q_md, 0.02, 1e-15));
        assert!(close(q_fa, 0.28, 1e-15));
    }

    #[test]
    fn and_three_receivers() {
        let v = PerRxErrorVector::new(vec![0.1; 3], vec![0.2; 3]).unwrap();
        let (q_md, q_fa) = fuse_asymmetric(FusionRule::And, &v).unwrap();
        assert!(close(q_md, 0.271, 1e-15));
        assert!(close(q_fa, 0.008, 1e-15));
    }

    #[test]
    fn two_out_of_three_matches_enumeration() {
        let v = PerRxErrorVector::new(vec![0.1, 0.2, 0.3], vec![0.05, 0.1, 0.15]).unwrap();
        let rule = FusionRule::NOutOfK { n: 2 };
        let (q_md, q_fa) = fuse_asymmetric(rule, &v).unwrap();
        // hand enumeration: misses when at most one receiver detects
        let d = [0.9, 0.8, 0.7];
        let q_md_hand = 0.1 * 0.2 * 0.3 + d[0] * 0.2 * 0.3 + 0.1 * d[1] * 0.3 + 0.1 * 0.2 * d[2];
        let f = [0.05, 0.1, 0.15];
        let q_fa_hand = f[0] * f[1] * f[2] + f[0] * f[1] * 0.85 + f[0] * 0.9 * f[2] + 0.95 * f[1] * f[2];
        assert!(close(q_md, q_md_hand, 1e-15));
        assert!(close(q_fa, q_fa_hand, 1e-15));
        let (bm, bf) = brute_force_fusion(rule, &v).unwrap();
        assert!(close(q_md, bm, 1e-15) && close(q_fa, bf, 1e-15));
    }

    #[test]
    fn symmetric_examples() {
        let (q_md, _) = fuse_symmetric(FusionRule::Or, 0.2, 0.0, 3).unwrap();
        assert!(close(q_md, 0.008, 1e-15));
        let (q_md, _) = fuse_symmetric(FusionRule::NOutOfK { n: 2 }, 0.2, 0.0, 3).unwrap();
        assert!(close(q_md, 0.104, 1e-15));
        for rule in [FusionRule::Or, FusionRule::And, FusionRule::Majority, FusionRule::NOutOfK { n: 2 }] {
            assert_eq!(fuse_symmetric(rule, 0.0, 0.0, 3).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn global_error_examples() {
        assert!(close(global_error(0.1, 0.3, 0.5), 0.2, 1e-16));
        assert!(close(global_error(0.37, 0.37, 0.81), 0.37, 1e-16));
        assert_eq!(global_error(0.1, 0.3, 1.0), 0.1);
    }

    #[test]
    fn single_receiver_passthrough() {
        let v = PerRxErrorVector::new(vec![0.13], vec![0.07]).unwrap();
        for rule in [FusionRule::Or, FusionRule::And, FusionRule::Majority] {
            let (m, f) = brute_force_fusion(rule, &v).unwrap();
            assert!(close(m, 0.13, 1e-16) && close(f, 0.07, 1e-16));
        }
    }

    #[test]
    fn soft_and_out_of_range_rules_are_rejected() {
        let v = PerRxErrorVector::uniform(3, 0.1, 0.1);
        let soft = FusionRule::SoftSum { threshold: crate::model::Threshold(5) };
        assert_eq!(fuse_asymmetric(soft, &v), Err(FusionError::SoftRule));
        assert_eq!(fuse_asymmetric(FusionRule::NOutOfK { n: 4 }, &v), Err(FusionError::BadVoteCount { n: 4, k: 3 }));
        let big = PerRxErrorVector::uniform(21, 0.1, 0.1);
        assert!(matches!(brute_force_fusion(FusionRule::Or, &big), Err(FusionError::TooManyReceivers { .. })));
    }

    #[test]
    fn asymmetric_equals_symmetric_on_grid() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for k in 1..=8 {
            for n in 1..=k {
                let rule = FusionRule::NOutOfK { n };
                for &p_md in &grid {
                    for &p_fa in &grid {
                        let a = fuse_asymmetric(rule, &PerRxErrorVector::uniform(k, p_md, p_fa)).unwrap();
                        let s = fuse_symmetric(rule, p_md, p_fa, k).unwrap();
                        for (x, y) in [(a.0, s.0), (a.1, s.1)] {
                            assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()), "k={k} n={n} {p_md} {p_fa}: {x} vs {y}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn monotone_in_vote_count() {
        let v = PerRxErrorVector::new(vec![0.1, 0.3, 0.2, 0.4, 0.05], vec![0.2, 0.1, 0.3, 0.05, 0.15]).unwrap();
        let mut prev = (0.0, 1.0);
        for n in 1..=5 {
            let (m, f) = fuse_asymmetric(FusionRule::NOutOfK { n }, &v).unwrap();
            assert!(m >= prev.0 - 1e-15 && f <= prev.1 + 1e-15);
            prev = (m, f);
        }
    }

    fn per_rx() -> impl Strategy<Value = PerRxErrorVector> {
        (1usize..=4).prop_flat_map(|k| {
            (prop::collection::vec(0.0f64..=1.0, k), prop::collection::vec(0.0f64..=1.0, k))
                .prop_map(|(m, f)| PerRxErrorVector::new(m, f).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn closed_form_matches_brute_force(v in per_rx(), n_seed in 0usize..4) {
            let n = 1 + n_seed % v.len();
            let rule = FusionRule::NOutOfK { n };
            let (m, f) = fuse_asymmetric(rule, &v).unwrap();
            let (bm, bf) = brute_force_fusion(rule, &v).unwrap();
            prop_assert!((m - bm).abs() <= 1e-12);
            prop_assert!((f - bf).abs() <= 1e-12);
        }

        #[test]
        fn named_rules_match_counting_rule(v in per_rx()) {
            let k = v.len();
            let or = fuse_asymmetric(FusionRule::Or, &v).unwrap();
            let and = fuse_asymmetric(FusionRule::And, &v).unwrap();
            let dp1 = brute_force_fusion(FusionRule::NOutOfK { n: 1 }, &v).unwrap();
            let dpk = brute_force_fusion(FusionRule::NOutOfK { n: k }, &v).unwrap();
            prop_assert!((or.0 - dp1.0).abs() <= 1e-12 && (or.1 - dp1.1).abs() <= 1e-12);
            prop_assert!((and.0 - dpk.0).abs() <= 1e-12 && (and.1 - dpk.1).abs() <= 1e-12);
        }
    }
}
