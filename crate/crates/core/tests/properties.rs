//! Property tests for the spec-level invariants of each module.

use bias_audit_core::biasmetrics::{
    eop_values, n_sigma_from_moments, shapiro_wilk, sp_simplified_values, t_cdf,
    welch_t_test_values,
};
use bias_audit_core::ingest::{
    compute_similarity, parse_score_reader, write_score_sets, Embedding, GroupId, LabeledScoreSet,
    SimilarityMeasure,
};
use bias_audit_core::perf::{build_roc, compute_eer, tpr_at_fpr};
use bias_audit_core::resample::{performance_distribution, BootstrapConfig, PerfDistribution};
use bias_audit_core::perf::PerfMetric;
use proptest::prelude::*;

fn embedding(id: &str, v: &[f64]) -> Embedding {
    Embedding::new(id, GroupId::new("G").unwrap(), v.to_vec()).unwrap()
}

fn set(genuine: Vec<f64>, impostor: Vec<f64>) -> LabeledScoreSet {
    LabeledScoreSet { group: GroupId::new("G").unwrap(), genuine, impostor }
}

fn finite_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0e3..1.0e3f64, len)
}

proptest! {
    #[test]
    fn similarity_is_symmetric(
        a in prop::collection::vec(-100.0..100.0f64, 2..6),
        b in prop::collection::vec(-100.0..100.0f64, 2..6),
    ) {
        prop_assume!(a.len() == b.len());
        prop_assume!(a.iter().any(|v| *v != 0.0) && b.iter().any(|v| *v != 0.0));
        let ea = embedding("a", &a);
        let eb = embedding("b", &b);
        for measure in [SimilarityMeasure::Cosine, SimilarityMeasure::NegativeEuclidean] {
            let ab = compute_similarity(&ea, &eb, measure).unwrap();
            let ba = compute_similarity(&eb, &ea, measure).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_is_scale_invariant(
        a in prop::collection::vec(-100.0..100.0f64, 3..6),
        b in prop::collection::vec(-100.0..100.0f64, 3..6),
        c in 0.001..1000.0f64,
    ) {
        prop_assume!(a.len() == b.len());
        prop_assume!(a.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        prop_assume!(b.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        let scaled: Vec<f64> = a.iter().map(|v| v * c).collect();
        let base = compute_similarity(&embedding("a", &a), &embedding("b", &b), SimilarityMeasure::Cosine).unwrap();
        let after = compute_similarity(&embedding("a", &scaled), &embedding("b", &b), SimilarityMeasure::Cosine).unwrap();
        prop_assert!((base - after).abs() < 1e-9, "base {base} after {after}");
        prop_assert!((-1.0..=1.0).contains(&base));
    }

    #[test]
    fn score_csv_round_trips(
        genuine in finite_vec(1..20),
        impostor in finite_vec(1..20),
    ) {
        let sets = vec![set(genuine, impostor)];
        let mut buf = Vec::new();
        write_score_sets(&sets, &mut buf).unwrap();
        let parsed = parse_score_reader(buf.as_slice()).unwrap();
        prop_assert_eq!(parsed, sets);
    }

    #[test]
    fn roc_rates_are_monotone_and_eer_bounded(
        genuine in finite_vec(1..40),
        impostor in finite_vec(1..40),
    ) {
        let roc = build_roc(&set(genuine, impostor)).unwrap();
        for w in roc.fmr.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        for w in roc.fnmr.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        let eer = compute_eer(&roc).value;
        prop_assert!((0.0..=1.0).contains(&eer));
    }

    #[test]
    fn eer_at_most_half_under_dominance(
        impostor in finite_vec(2..40),
        shift in 0.001..50.0f64,
    ) {
        // paired positive shift gives empirical stochastic dominance
        let genuine: Vec<f64> = impostor.iter().map(|v| v + shift).collect();
        let roc = build_roc(&set(genuine, impostor)).unwrap();
        prop_assert!(compute_eer(&roc).value <= 0.5 + 1e-12);
    }

    #[test]
    fn eer_and_tpr_are_shift_invariant(
        genuine in finite_vec(2..30),
        impostor in finite_vec(2..30),
        offset in -500.0..500.0f64,
    ) {
        let base_roc = build_roc(&set(genuine.clone(), impostor.clone())).unwrap();
        let shifted_roc = build_roc(&set(
            genuine.iter().map(|v| v + offset).collect(),
            impostor.iter().map(|v| v + offset).collect(),
        )).unwrap();
        let eer_a = compute_eer(&base_roc).value;
        let eer_b = compute_eer(&shifted_roc).value;
        prop_assert!((eer_a - eer_b).abs() < 1e-12, "eer {eer_a} vs {eer_b}");
        let tpr_a = tpr_at_fpr(&base_roc, 0.1).unwrap().value;
        let tpr_b = tpr_at_fpr(&shifted_roc, 0.1).unwrap().value;
        prop_assert!((tpr_a - tpr_b).abs() < 1e-12, "tpr {tpr_a} vs {tpr_b}");
    }

    #[test]
    fn pointwise_metrics_are_symmetric_and_bounded(
        pairs in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..30),
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ab = sp_simplified_values(&a, &b).unwrap();
        let ba = sp_simplified_values(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        let identical = a.iter().zip(&b).all(|(x, y)| x == y);
        prop_assert_eq!(ab == 1.0, identical);
        prop_assert_eq!(eop_values(&a, &b).unwrap(), ab); // same functional form
    }

    #[test]
    fn pointwise_metric_strictly_decreases_when_a_gap_widens(
        pairs in prop::collection::vec((0.0..0.5f64, 0.0..0.5f64), 1..20),
        index in 0usize..20,
        widen in 0.001..0.5f64,
    ) {
        let index = index % pairs.len();
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let before = sp_simplified_values(&a, &b).unwrap();
        // push b[index] further from a[index]
        b[index] = if b[index] >= a[index] { b[index] + widen } else { b[index] - widen };
        let after = sp_simplified_values(&a, &b).unwrap();
        prop_assert!(after < before, "after {after} !< before {before}");
    }

    #[test]
    fn welch_is_symmetric_up_to_sign(
        a in prop::collection::vec(0.0..1.0f64, 2..25),
        b in prop::collection::vec(0.0..1.0f64, 2..25),
    ) {
        let ab = welch_t_test_values(&a, &b, 0.05).unwrap();
        let ba = welch_t_test_values(&b, &a, 0.05).unwrap();
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!((ab.z + ba.z).abs() < 1e-9 || (ab.z.is_infinite() && ba.z.is_infinite()));
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn n_sigma_is_scale_and_translation_invariant(
        values_ref in prop::collection::vec(0.0..1.0f64, 2..20),
        values_eval in prop::collection::vec(0.0..1.0f64, 2..20),
        scale in 0.01..100.0f64,
        offset in -10.0..10.0f64,
    ) {
        let gid = GroupId::new("G").unwrap();
        let make = |v: &[f64]| PerfDistribution::from_values(gid.clone(), PerfMetric::Eer, v.to_vec()).unwrap();
        let base = bias_audit_core::biasmetrics::n_sigma(&make(&values_ref), &make(&values_eval)).unwrap();
        prop_assume!(!base.infinite_separation);

        let scaled_ref: Vec<f64> = values_ref.iter().map(|v| v * scale).collect();
        let scaled_eval: Vec<f64> = values_eval.iter().map(|v| v * scale).collect();
        let scaled = bias_audit_core::biasmetrics::n_sigma(&make(&scaled_ref), &make(&scaled_eval)).unwrap();
        prop_assert!((base.n - scaled.n).abs() < 1e-6 * (1.0 + base.n), "scale: {} vs {}", base.n, scaled.n);

        let moved_ref: Vec<f64> = values_ref.iter().map(|v| v + offset).collect();
        let moved_eval: Vec<f64> = values_eval.iter().map(|v| v + offset).collect();
        let moved = bias_audit_core::biasmetrics::n_sigma(&make(&moved_ref), &make(&moved_eval)).unwrap();
        prop_assert!((base.n - moved.n).abs() < 1e-6 * (1.0 + base.n), "shift: {} vs {}", base.n, moved.n);
    }

    #[test]
    fn n_sigma_moments_match_direct_formula(
        mu_ref in 0.0..1.0f64,
        mu_eval in 0.0..1.0f64,
        sigma in 0.0001..0.5f64,
    ) {
        let r = n_sigma_from_moments(mu_ref, mu_eval, sigma).unwrap();
        prop_assert!((r.n - (mu_eval - mu_ref).abs() / sigma).abs() < 1e-12);
        prop_assert!(r.n >= 0.0);
    }

    #[test]
    fn t_cdf_complements_sum_to_one(t in -50.0..50.0f64, df in 0.5..200.0f64) {
        let sum = t_cdf(t, df).unwrap() + t_cdf(-t, df).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-10);
        let c = t_cdf(t, df).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn shapiro_w_stays_in_unit_interval(
        sample in prop::collection::vec(-100.0..100.0f64, 3..60),
    ) {
        let distinct = {
            let mut s = sample.clone();
            s.sort_by(f64::total_cmp);
            s.dedup();
            s.len() > 1
        };
        prop_assume!(distinct);
        let r = shapiro_wilk(&sample, 0.05).unwrap();
        prop_assert!(r.w_statistic > 0.0 && r.w_statistic <= 1.0);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn perf_distribution_spread_is_zero_iff_constant(
        genuine in finite_vec(2..15),
        impostor in finite_vec(2..15),
        seed in 0u64..1000,
    ) {
        let cfg = BootstrapConfig { k: 6, subset_size: 10, master_seed: seed };
        let dist = performance_distribution(&set(genuine, impostor), &cfg, PerfMetric::Eer).unwrap();
        prop_assert!(dist.std >= 0.0);
        let constant = dist.values.iter().all(|v| *v == dist.values[0]);
        prop_assert_eq!(dist.std == 0.0, constant);
    }
}
