//! Bootstrap resampling: per-group performance distributions (the K values
//! the bias metrics compare), subset-size calibration, and aggregation over
//! M batches.
//!
//! Every subset draws its scores with replacement using a child seed derived
//! from (master seed, subset index), so results are identical for any
//! evaluation order or thread count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{GroupId, LabeledScoreSet};
use crate::perf::{self, PerfMetric};
use crate::risk::BiasReport;
use crate::seed::{child_seed, label_seed};
use crate::summary::{mean, sample_std};

/// Defaults mirroring the protocol's chosen constants: K = 20 subsets,
/// 6000 scores per side for EER subsets and 9000 for TPR subsets.
pub const DEFAULT_K: usize = 20;
pub const DEFAULT_SUBSET_SIZE_EER: usize = 6000;
pub const DEFAULT_SUBSET_SIZE_TPR: usize = 9000;
/// Default candidate grid for subset-size calibration.
pub const DEFAULT_CALIBRATION_SIZES: &[usize] = &[1000, 2000, 4000, 6000, 9000, 12000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of subsets (K).
    pub k: usize,
    /// Scores drawn per side, with replacement.
    pub subset_size: usize,
    pub master_seed: u64,
}

/// The K bootstrapped performance values for one group, with their sample
/// mean and standard deviation (n-1 denominator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfDistribution {
    pub group: GroupId,
    #[serde(flatten)]
    pub kind: PerfMetric,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl PerfDistribution {
    pub fn from_values(group: GroupId, kind: PerfMetric, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData(
                "a performance distribution needs at least one value".into(),
            ));
        }
        let mean = mean(&values);
        let std = sample_std(&values);
        Ok(PerfDistribution { group, kind, values, mean, std })
    }
}

fn check_pool(set: &LabeledScoreSet) -> Result<()> {
    if set.genuine.is_empty() || set.impostor.is_empty() {
        return Err(Error::InsufficientData(format!(
            "group {}: bootstrap needs non-empty genuine and impostor pools",
            set.group
        )));
    }
    Ok(())
}

fn draw(pool: &[f64], count: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    (0..count).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

fn subset_at(set: &LabeledScoreSet, cfg: &BootstrapConfig, index: usize) -> LabeledScoreSet {
    let mut rng = ChaCha12Rng::seed_from_u64(child_seed(cfg.master_seed, &[index as u64]));
    LabeledScoreSet {
        group: set.group.clone(),
        genuine: draw(&set.genuine, cfg.subset_size, &mut rng),
        impostor: draw(&set.impostor, cfg.subset_size, &mut rng),
    }
}

/// Draw K subsets of the pool, each with `subset_size` genuine and impostor
/// scores sampled uniformly with replacement.
pub fn bootstrap_subsets(set: &LabeledScoreSet, cfg: &BootstrapConfig) -> Result<Vec<LabeledScoreSet>> {
    check_pool(set)?;
    Ok((0..cfg.k).map(|i| subset_at(set, cfg, i)).collect())
}

/// Evaluate one metric on each of the K subsets. Subset evaluations run in
/// parallel; the output is identical for any schedule.
pub fn performance_distribution(
    set: &LabeledScoreSet,
    cfg: &BootstrapConfig,
    metric: PerfMetric,
) -> Result<PerfDistribution> {
    check_pool(set)?;
    if cfg.k < 2 {
        return Err(Error::InvalidConfig(format!(
            "a performance distribution needs k >= 2 subsets, got {}",
            cfg.k
        )));
    }
    if cfg.subset_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "subset size must be >= 2, got {}",
            cfg.subset_size
        )));
    }
    let values: Vec<f64> = (0..cfg.k)
        .into_par_iter()
        .map(|i| perf::evaluate(&subset_at(set, cfg, i), metric).map(|v| v.value))
        .collect::<Result<_>>()?;
    PerfDistribution::from_values(set.group.clone(), metric, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityPoint {
    pub subset_size: usize,
    pub subset_count: usize,
    pub std: f64,
}

/// Observed spread of the bootstrapped performance value as a function of
/// subset size (the plot-data analogue of the protocol's calibration figure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityCurve {
    pub subset_sizes: Vec<usize>,
    pub entries: Vec<VariabilityPoint>,
    pub recommended_size: usize,
    /// Set when no candidate met the stability criterion and the largest
    /// candidate was returned instead.
    pub stability_warning: bool,
}

impl VariabilityCurve {
    /// Plot-ready export: `subset_size,subset_count,std`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["subset_size", "subset_count", "std"])?;
        for e in &self.entries {
            writer.write_record([
                e.subset_size.to_string(),
                e.subset_count.to_string(),
                format!("{}", e.std),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn relative_change(current: f64, next: f64) -> f64 {
    if current == 0.0 {
        if next == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (next - current).abs() / current
    }
}

/// For each candidate size, draw `s` subsets and record the std of the
/// performance values. The recommended size is the smallest one whose std
/// changes by less than `stability_epsilon` (relative) versus the next size;
/// if none qualifies the largest candidate is returned with a warning flag.
pub fn calibrate_subset_size(
    set: &LabeledScoreSet,
    candidate_sizes: &[usize],
    s: usize,
    metric: PerfMetric,
    stability_epsilon: f64,
    master_seed: u64,
) -> Result<VariabilityCurve> {
    if candidate_sizes.is_empty() {
        return Err(Error::InvalidConfig("candidate size list must be non-empty".into()));
    }
    if candidate_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("candidate sizes must be strictly ascending".into()));
    }
    if s < 2 {
        return Err(Error::InvalidConfig(format!("subset count must be >= 2, got {s}")));
    }
    if !(stability_epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "stability epsilon must be positive, got {stability_epsilon}"
        )));
    }

    let mut entries = Vec::with_capacity(candidate_sizes.len());
    for &size in candidate_sizes {
        let cfg = BootstrapConfig {
            k: s,
            subset_size: size,
            master_seed: child_seed(
                master_seed,
                &[label_seed("calibrate"), size as u64, s as u64],
            ),
        };
        let dist = performance_distribution(set, &cfg, metric)?;
        entries.push(VariabilityPoint { subset_size: size, subset_count: s, std: dist.std });
    }

    let mut recommended = None;
    for i in 0..entries.len().saturating_sub(1) {
        if relative_change(entries[i].std, entries[i + 1].std) < stability_epsilon {
            recommended = Some(entries[i].subset_size);
            break;
        }
    }
    let stability_warning = recommended.is_none();
    Ok(VariabilityCurve {
        subset_sizes: candidate_sizes.to_vec(),
        recommended_size: recommended.unwrap_or(*candidate_sizes.last().unwrap()),
        entries,
        stability_warning,
    })
}

/// Run the calibration for several subset counts (the figure's S values) and
/// merge the curves. The recommendation comes from the largest S, which has
/// the most precise spread estimate.
pub fn variability_analysis(
    set: &LabeledScoreSet,
    candidate_sizes: &[usize],
    subset_counts: &[usize],
    metric: PerfMetric,
    stability_epsilon: f64,
    master_seed: u64,
) -> Result<VariabilityCurve> {
    if subset_counts.is_empty() {
        return Err(Error::InvalidConfig("subset count list must be non-empty".into()));
    }
    let mut curves = Vec::with_capacity(subset_counts.len());
    for &s in subset_counts {
        curves.push(calibrate_subset_size(
            set,
            candidate_sizes,
            s,
            metric,
            stability_epsilon,
            master_seed,
        )?);
    }
    let largest_idx = subset_counts
        .iter()
        .enumerate()
        .max_by_key(|(_, &s)| s)
        .map(|(i, _)| i)
        .unwrap();

    let mut entries = Vec::new();
    for i in 0..candidate_sizes.len() {
        for curve in &curves {
            entries.push(curve.entries[i].clone());
        }
    }
    Ok(VariabilityCurve {
        subset_sizes: candidate_sizes.to_vec(),
        entries,
        recommended_size: curves[largest_idx].recommended_size,
        stability_warning: curves[largest_idx].stability_warning,
    })
}

/// Per-batch reports plus their element-wise mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchAggregate {
    pub per_batch: Vec<BiasReport>,
    pub mean_report: BiasReport,
}

/// Element-wise mean over M structurally identical per-batch reports.
///
/// Group sets, references and comparison order must match across batches;
/// risk levels in the mean report are re-derived from the averaged N-Sigma.
pub fn aggregate_batches(reports: Vec<BiasReport>) -> Result<BatchAggregate> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InsufficientData("aggregation needs at least one report".into()))?;

    for (b, report) in reports.iter().enumerate().skip(1) {
        if report.comparisons.len() != first.comparisons.len() {
            return Err(Error::AggregationMismatch(format!(
                "batch {b} has {} comparisons, batch 0 has {}",
                report.comparisons.len(),
                first.comparisons.len()
            )));
        }
        for (c, (a, z)) in first.comparisons.iter().zip(&report.comparisons).enumerate() {
            if a.group != z.group || a.reference_eer != z.reference_eer || a.reference_tpr != z.reference_tpr
            {
                return Err(Error::AggregationMismatch(format!(
                    "comparison {c} differs between batch 0 and batch {b}"
                )));
            }
        }
        if report.group_means.keys().ne(first.group_means.keys()) {
            return Err(Error::AggregationMismatch(format!(
                "group means of batch {b} cover different groups than batch 0"
            )));
        }
    }

    let m = reports.len() as f64;
    let mut mean_report = first.clone();
    mean_report.batches = reports.len();
    mean_report.sigma_ref = reports.iter().map(|r| r.sigma_ref).sum::<f64>() / m;
    for (name, means) in mean_report.group_means.iter_mut() {
        means.eer = reports.iter().map(|r| r.group_means[name].eer).sum::<f64>() / m;
        means.tpr = reports.iter().map(|r| r.group_means[name].tpr).sum::<f64>() / m;
    }
    for (c, comparison) in mean_report.comparisons.iter_mut().enumerate() {
        comparison.sp = reports.iter().map(|r| r.comparisons[c].sp).sum::<f64>() / m;
        comparison.eop = reports.iter().map(|r| r.comparisons[c].eop).sum::<f64>() / m;
        comparison.t_test_p = reports.iter().map(|r| r.comparisons[c].t_test_p).sum::<f64>() / m;
        comparison.n_sigma = reports.iter().map(|r| r.comparisons[c].n_sigma).sum::<f64>() / m;
        comparison.risk_level = first
            .config
            .risk_thresholds
            .level_for(comparison.n_sigma)
            .to_string();
    }
    Ok(BatchAggregate { per_batch: reports, mean_report })
}
