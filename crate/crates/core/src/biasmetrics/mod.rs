//! The four bias metrics over bootstrapped performance distributions:
//! Statistical Parity and Equality of Opportunity (pointwise, per-subset
//! comparisons) plus the Welch T-test and N-Sigma distance (distribution
//! comparisons), together with the Shapiro-Wilk normality pre-check.

mod shapiro;
pub mod special;

pub use shapiro::{shapiro_wilk, NormalityResult};
pub use special::t_cdf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::GroupId;
use crate::resample::PerfDistribution;
use crate::summary::{mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpMode {
    Full,
    SimplifiedAtEer,
}

/// Weighting for the full Statistical Parity form: SP = 1 - (alpha A + (1 - alpha) B).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpConfig {
    pub alpha_weight: f64,
    pub mode: SpMode,
}

impl Default for SpConfig {
    fn default() -> Self {
        SpConfig { alpha_weight: 0.5, mode: SpMode::SimplifiedAtEer }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointwiseMetric {
    Sp,
    Eop,
}

/// Result of a pointwise (per-subset) comparison between two groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseResult {
    pub metric: PointwiseMetric,
    pub value: f64,
    pub reference: GroupId,
    pub evaluated: GroupId,
    pub operating_point: Option<String>,
}

/// Welch unequal-variance T-test outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub z: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub significance: f64,
    pub reject_null: bool,
    /// Set when the pooled variance is zero; z and the degrees of freedom are
    /// then limits, not estimates.
    pub degenerate_variance: bool,
}

/// N-Sigma distance between two performance distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSigmaResult {
    /// |mu_eval - mu_ref| / sigma_ref; the sign of the difference can be read
    /// off the echoed means.
    pub n: f64,
    pub mu_ref: f64,
    pub mu_eval: f64,
    pub sigma_ref: f64,
    /// Set when sigma_ref is zero while the means differ.
    pub infinite_separation: bool,
}

fn one_minus_mean_abs_diff(reference: &[f64], evaluated: &[f64]) -> Result<f64> {
    if reference.len() != evaluated.len() {
        return Err(Error::DimensionMismatch(format!(
            "pointwise metrics need equal-length value lists: {} vs {}",
            reference.len(),
            evaluated.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::InsufficientData("pointwise metrics need at least one value".into()));
    }
    let total: f64 = reference
        .iter()
        .zip(evaluated)
        .map(|(r, e)| (r - e).abs())
        .sum();
    Ok(1.0 - total / reference.len() as f64)
}

/// Statistical Parity simplified at the EER operating point:
/// 1 - mean(|EER_i(ref) - EER_i(eval)|) over the K paired subsets.
pub fn sp_simplified_values(eer_ref: &[f64], eer_eval: &[f64]) -> Result<f64> {
    one_minus_mean_abs_diff(eer_ref, eer_eval)
}

/// Equality of Opportunity: 1 - mean(|TPR_i(ref) - TPR_i(eval)|) at a fixed
/// operating point.
pub fn eop_values(tpr_ref: &[f64], tpr_eval: &[f64]) -> Result<f64> {
    one_minus_mean_abs_diff(tpr_ref, tpr_eval)
}

fn check_same_kind(d_ref: &PerfDistribution, d_eval: &PerfDistribution) -> Result<()> {
    if d_ref.kind != d_eval.kind {
        return Err(Error::Data(format!(
            "cannot compare distributions of different kinds: {} vs {}",
            d_ref.kind.label(),
            d_eval.kind.label()
        )));
    }
    Ok(())
}

pub fn sp_simplified(d_ref: &PerfDistribution, d_eval: &PerfDistribution) -> Result<PointwiseResult> {
    check_same_kind(d_ref, d_eval)?;
    Ok(PointwiseResult {
        metric: PointwiseMetric::Sp,
        value: sp_simplified_values(&d_ref.values, &d_eval.values)?,
        reference: d_ref.group.clone(),
        evaluated: d_eval.group.clone(),
        operating_point: Some("eer".into()),
    })
}

pub fn eop(d_ref: &PerfDistribution, d_eval: &PerfDistribution) -> Result<PointwiseResult> {
    check_same_kind(d_ref, d_eval)?;
    Ok(PointwiseResult {
        metric: PointwiseMetric::Eop,
        value: eop_values(&d_ref.values, &d_eval.values)?,
        reference: d_ref.group.clone(),
        evaluated: d_eval.group.clone(),
        operating_point: Some(d_ref.kind.label()),
    })
}

/// The full Statistical Parity form at an arbitrary operating point, where
/// `fmr_diff` and `fnmr_diff` are the FMR/FNMR differentials across groups.
/// With equal differentials this reduces to 1 - fmr_diff regardless of alpha.
pub fn sp_full(fmr_diff: f64, fnmr_diff: f64, cfg: &SpConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&cfg.alpha_weight) {
        return Err(Error::InvalidConfig(format!(
            "alpha weight must be in [0, 1], got {}",
            cfg.alpha_weight
        )));
    }
    for (name, v) in [("fmr_diff", fmr_diff), ("fnmr_diff", fnmr_diff)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Data(format!("{name} must be a rate in [0, 1], got {v}")));
        }
    }
    let alpha = cfg.alpha_weight;
    Ok(1.0 - (alpha * fmr_diff + (1.0 - alpha) * fnmr_diff))
}

/// Welch-corrected unpaired T-test on two value lists, two-sided, with
/// Welch-Satterthwaite degrees of freedom.
pub fn welch_t_test_values(
    ref_values: &[f64],
    eval_values: &[f64],
    significance: f64,
) -> Result<TTestResult> {
    if ref_values.len() < 2 || eval_values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "Welch test needs at least 2 values per side, got {} and {}",
            ref_values.len(),
            eval_values.len()
        )));
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "significance level must be in (0, 1), got {significance}"
        )));
    }

    let n_r = ref_values.len() as f64;
    let n_e = eval_values.len() as f64;
    let m_r = mean(ref_values);
    let m_e = mean(eval_values);
    let v_r = sample_variance(ref_values);
    let v_e = sample_variance(eval_values);
    let se2 = v_r / n_r + v_e / n_e;

    if se2 == 0.0 {
        // both samples constant
        return Ok(if m_r == m_e {
            TTestResult {
                z: 0.0,
                degrees_of_freedom: f64::INFINITY,
                p_value: 1.0,
                significance,
                reject_null: false,
                degenerate_variance: true,
            }
        } else {
            TTestResult {
                z: (m_r - m_e).signum() * f64::INFINITY,
                degrees_of_freedom: f64::INFINITY,
                p_value: 0.0,
                significance,
                reject_null: true,
                degenerate_variance: true,
            }
        });
    }

    let z = (m_r - m_e) / se2.sqrt();
    let df = se2 * se2
        / ((v_r / n_r) * (v_r / n_r) / (n_r - 1.0) + (v_e / n_e) * (v_e / n_e) / (n_e - 1.0));
    let p_value = special::t_two_sided_p(z, df)?;
    Ok(TTestResult {
        z,
        degrees_of_freedom: df,
        p_value,
        significance,
        reject_null: p_value < significance,
        degenerate_variance: false,
    })
}

pub fn welch_t_test(
    d_ref: &PerfDistribution,
    d_eval: &PerfDistribution,
    significance: f64,
) -> Result<TTestResult> {
    check_same_kind(d_ref, d_eval)?;
    welch_t_test_values(&d_ref.values, &d_eval.values, significance)
}

/// N-Sigma from pre-computed moments: |mu_eval - mu_ref| / sigma_ref.
pub fn n_sigma_from_moments(mu_ref: f64, mu_eval: f64, sigma_ref: f64) -> Result<NSigmaResult> {
    if !mu_ref.is_finite() || !mu_eval.is_finite() {
        return Err(Error::Data("means must be finite".into()));
    }
    if !(sigma_ref >= 0.0) || !sigma_ref.is_finite() {
        return Err(Error::Data(format!(
            "reference standard deviation must be non-negative and finite, got {sigma_ref}"
        )));
    }
    let diff = mu_eval - mu_ref;
    let (n, infinite) = if sigma_ref == 0.0 {
        if diff == 0.0 {
            (0.0, false)
        } else {
            (f64::INFINITY, true)
        }
    } else {
        (diff.abs() / sigma_ref, false)
    };
    Ok(NSigmaResult { n, mu_ref, mu_eval, sigma_ref, infinite_separation: infinite })
}

/// N-Sigma between two distributions, in units of the reference group's
/// standard deviation.
pub fn n_sigma(d_ref: &PerfDistribution, d_eval: &PerfDistribution) -> Result<NSigmaResult> {
    check_same_kind(d_ref, d_eval)?;
    if d_ref.values.is_empty() || d_eval.values.is_empty() {
        return Err(Error::InsufficientData("N-Sigma needs non-empty distributions".into()));
    }
    n_sigma_from_moments(d_ref.mean, d_eval.mean, d_ref.std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perf::PerfMetric;
    use approx::assert_abs_diff_eq;

    fn dist(group: &str, values: &[f64]) -> PerfDistribution {
        PerfDistribution::from_values(
            GroupId::new(group).unwrap(),
            PerfMetric::Eer,
            values.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn sp_identical_lists_is_exactly_one() {
        let v = [0.02, 0.031, 0.018];
        assert_eq!(sp_simplified_values(&v, &v).unwrap(), 1.0);
    }

    #[test]
    fn sp_hand_example() {
        let value = sp_simplified_values(&[0.02, 0.02], &[0.03, 0.05]).unwrap();
        assert_abs_diff_eq!(value, 0.98, epsilon = 1e-12);
    }

    #[test]
    fn sp_full_hand_examples() {
        let extreme = SpConfig { alpha_weight: 1.0, mode: SpMode::Full };
        assert_abs_diff_eq!(sp_full(0.2, 0.9, &extreme).unwrap(), 0.8, epsilon = 1e-12);

        // equal differentials collapse to 1 - A for any alpha
        for alpha in [0.0, 0.3, 0.5, 1.0] {
            let cfg = SpConfig { alpha_weight: alpha, mode: SpMode::Full };
            assert_abs_diff_eq!(sp_full(0.05, 0.05, &cfg).unwrap(), 0.95, epsilon = 1e-12);
        }

        let cfg = SpConfig { alpha_weight: 0.3, mode: SpMode::Full };
        assert_abs_diff_eq!(sp_full(0.1, 0.2, &cfg).unwrap(), 0.83, epsilon = 1e-12);
    }

    #[test]
    fn sp_full_rejects_out_of_range_inputs() {
        let cfg = SpConfig::default();
        assert!(sp_full(1.2, 0.1, &cfg).is_err());
        assert!(sp_full(0.1, -0.1, &cfg).is_err());
        let bad = SpConfig { alpha_weight: 1.5, mode: SpMode::Full };
        assert!(sp_full(0.1, 0.1, &bad).is_err());
    }

    #[test]
    fn eop_hand_example() {
        assert_eq!(eop_values(&[0.8, 0.9], &[0.8, 0.9]).unwrap(), 1.0);
        let value = eop_values(&[0.80, 0.82], &[0.78, 0.76]).unwrap();
        assert_abs_diff_eq!(value, 0.96, epsilon = 1e-12);
    }

    #[test]
    fn pointwise_rejects_length_mismatch() {
        assert!(matches!(
            sp_simplified_values(&[0.1, 0.2], &[0.1]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            eop_values(&[0.1], &[0.1, 0.2]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn pointwise_results_carry_groups_and_operating_point() {
        let a = dist("A", &[0.02, 0.03]);
        let b = dist("B", &[0.04, 0.01]);
        let r = sp_simplified(&a, &b).unwrap();
        assert_eq!(r.reference.name(), "A");
        assert_eq!(r.evaluated.name(), "B");
        assert_abs_diff_eq!(r.value, 1.0 - (0.02 + 0.02) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn welch_identical_distributions_gives_p_one_exactly() {
        let a = dist("A", &[0.1, 0.2, 0.3, 0.4]);
        let r = welch_t_test(&a, &a, 0.05).unwrap();
        assert_eq!(r.z, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.reject_null);
        assert!(!r.degenerate_variance);
    }

    #[test]
    fn welch_matches_frozen_reference_equal_n() {
        // frozen from scipy.stats.ttest_ind(equal_var=False)
        let r = welch_t_test_values(
            &[1.0, 2.0, 3.0, 4.0, 5.0],
            &[2.0, 3.0, 4.0, 5.0, 6.0],
            0.05,
        )
        .unwrap();
        assert_abs_diff_eq!(r.z, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.degrees_of_freedom, 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 0.346593507087334, epsilon = 1e-9);
        assert!(!r.reject_null);
    }

    #[test]
    fn welch_matches_frozen_reference_unequal_n() {
        let a = [0.021, 0.0185, 0.0202, 0.0231, 0.0198, 0.0224, 0.0179];
        let b = [0.0251, 0.0239, 0.0266, 0.0248, 0.0257];
        let r = welch_t_test_values(&a, &b, 0.05).unwrap();
        assert_abs_diff_eq!(r.z, -5.64389810006404, epsilon = 1e-9);
        assert_abs_diff_eq!(r.degrees_of_freedom, 9.43875179059991, epsilon = 1e-9);
        assert_abs_diff_eq!(r.p_value, 0.000265307029087965, epsilon = 1e-12);
        assert!(r.reject_null);
    }

    #[test]
    fn welch_agrees_with_statrs_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        use statrs::distribution::{ContinuousCDF, StudentsT};

        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n_a = rng.random_range(3..25);
            let n_b = rng.random_range(3..25);
            let shift: f64 = rng.random_range(-0.5..0.5);
            let a: Vec<f64> = (0..n_a).map(|_| rng.random_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..n_b).map(|_| rng.random_range(0.0..1.0) + shift).collect();
            let r = welch_t_test_values(&a, &b, 0.05).unwrap();
            let t = StudentsT::new(0.0, 1.0, r.degrees_of_freedom).unwrap();
            let p_oracle = 2.0 * t.cdf(-r.z.abs());
            assert_abs_diff_eq!(r.p_value, p_oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn welch_degenerate_variance_branches() {
        let flat = dist("A", &[0.3, 0.3, 0.3]);
        let same = welch_t_test(&flat, &flat, 0.05).unwrap();
        assert_eq!(same.z, 0.0);
        assert_eq!(same.p_value, 1.0);
        assert!(same.degenerate_variance);

        let other = dist("B", &[0.5, 0.5, 0.5]);
        let diff = welch_t_test(&flat, &other, 0.05).unwrap();
        assert_eq!(diff.p_value, 0.0);
        assert!(diff.degenerate_variance);
        assert!(diff.reject_null);
        assert!(diff.z.is_infinite() && diff.z < 0.0);
    }

    #[test]
    fn welch_rejects_tiny_samples_and_bad_significance() {
        assert!(matches!(
            welch_t_test_values(&[1.0], &[1.0, 2.0], 0.05),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            welch_t_test_values(&[1.0, 2.0], &[1.0, 2.0], 0.0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn n_sigma_identical_is_zero() {
        let a = dist("A", &[0.01, 0.02, 0.03]);
        let r = n_sigma(&a, &a).unwrap();
        assert_eq!(r.n, 0.0);
        assert!(!r.infinite_separation);
    }

    #[test]
    fn n_sigma_hand_example() {
        let r = n_sigma_from_moments(0.02, 0.05, 0.01).unwrap();
        assert_abs_diff_eq!(r.n, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn n_sigma_reconstructs_published_row() {
        // Table-derived reconstruction: reference mean 1.58%, sigma 0.196%
        let evals = [0.0183, 0.0158, 0.0169, 0.0207];
        let published = [1.30, 0.00, 0.58, 2.53];
        for (mu, pub_n) in evals.iter().zip(published) {
            let r = n_sigma_from_moments(0.0158, *mu, 0.00196).unwrap();
            assert!((r.n - pub_n).abs() < 0.1, "n = {} vs published {}", r.n, pub_n);
        }
    }

    #[test]
    fn n_sigma_zero_sigma_branches() {
        let same = n_sigma_from_moments(0.3, 0.3, 0.0).unwrap();
        assert_eq!(same.n, 0.0);
        assert!(!same.infinite_separation);

        let apart = n_sigma_from_moments(0.3, 0.4, 0.0).unwrap();
        assert!(apart.n.is_infinite());
        assert!(apart.infinite_separation);

        assert!(n_sigma_from_moments(0.3, 0.4, -0.1).is_err());
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let a = dist("A", &[0.1, 0.2]);
        let b = PerfDistribution::from_values(
            GroupId::new("B").unwrap(),
            PerfMetric::TprAtFpr { target_fpr: 0.01 },
            vec![0.8, 0.9],
        )
        .unwrap();
        assert!(welch_t_test(&a, &b, 0.05).is_err());
        assert!(sp_simplified(&a, &b).is_err());
        assert!(n_sigma(&a, &b).is_err());
    }
}
