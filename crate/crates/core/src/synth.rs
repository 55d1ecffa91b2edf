//! Synthetic biased-score simulator: Gaussian genuine/impostor score pools
//! per group with a controllable bias shift, plus the full M-batch protocol
//! (generate, bootstrap, metrics, aggregate) driven entirely by derived
//! seeds.
//!
//! A positive `bias_shift` lowers the group's genuine mean (reducing
//! separation: higher EER, lower TPR — a disfavored group); a negative shift
//! widens separation (a favored group). Zero shifts with identical
//! per-group parameters make the groups exchangeable.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{GroupId, LabeledScoreSet};
use crate::resample::{aggregate_batches, BatchAggregate};
use crate::risk::{
    assemble_report, compute_group_distributions, select_reference, AssessParams, EerReference,
    ReferencePolicy, TprReference,
};
use crate::seed::{child_seed, label_seed};

/// Score-distribution parameters for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupParams {
    pub name: GroupId,
    pub genuine_mean: f64,
    pub genuine_std: f64,
    pub impostor_mean: f64,
    pub impostor_std: f64,
    /// Subtracted from the genuine mean: positive disfavors the group.
    #[serde(default)]
    pub bias_shift: f64,
}

/// Parametric description of the synthetic dataset (accepted as JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub groups: Vec<GroupParams>,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Exchangeable groups with well-separated score distributions
    /// (genuine N(0.75, 0.12), impostor N(0.25, 0.12), zero shifts).
    pub fn exchangeable(names: &[&str], n_genuine: usize, n_impostor: usize, seed: u64) -> Result<Self> {
        let groups = names
            .iter()
            .map(|name| {
                Ok(GroupParams {
                    name: GroupId::new(*name)?,
                    genuine_mean: 0.75,
                    genuine_std: 0.12,
                    impostor_mean: 0.25,
                    impostor_std: 0.12,
                    bias_shift: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = SyntheticConfig { groups, n_genuine, n_impostor, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set_bias_shift(&mut self, group: &str, shift: f64) -> Result<()> {
        let params = self
            .groups
            .iter_mut()
            .find(|g| g.name.name() == group)
            .ok_or_else(|| Error::Data(format!("no group named {group:?} in the config")))?;
        params.bias_shift = shift;
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: SyntheticConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::InvalidConfig("synthetic config needs at least one group".into()));
        }
        if self.n_genuine == 0 || self.n_impostor == 0 {
            return Err(Error::InvalidConfig(
                "genuine and impostor counts must be positive".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for g in &self.groups {
            if !seen.insert(g.name.name()) {
                return Err(Error::InvalidConfig(format!("duplicate group {}", g.name)));
            }
            for (field, v) in [
                ("genuine_mean", g.genuine_mean),
                ("impostor_mean", g.impostor_mean),
                ("bias_shift", g.bias_shift),
            ] {
                if !v.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "group {}: {field} must be finite",
                        g.name
                    )));
                }
            }
            if !(g.genuine_std > 0.0 && g.genuine_std.is_finite())
                || !(g.impostor_std > 0.0 && g.impostor_std.is_finite())
            {
                return Err(Error::InvalidConfig(format!(
                    "group {}: standard deviations must be positive",
                    g.name
                )));
            }
            if g.genuine_mean <= g.impostor_mean {
                return Err(Error::InvalidConfig(format!(
                    "group {}: genuine mean must exceed impostor mean before bias injection",
                    g.name
                )));
            }
        }
        Ok(())
    }
}

/// Draw the per-group Gaussian score pools under an explicit master seed.
/// Streams are keyed by (seed, group name, side), so the group list order is
/// irrelevant.
pub fn generate_scores_seeded(cfg: &SyntheticConfig, seed: u64) -> Result<Vec<LabeledScoreSet>> {
    cfg.validate()?;
    let mut sets = Vec::with_capacity(cfg.groups.len());
    for g in &cfg.groups {
        let genuine_dist = Normal::new(g.genuine_mean - g.bias_shift, g.genuine_std)
            .map_err(|e| Error::InvalidConfig(format!("group {}: {e}", g.name)))?;
        let impostor_dist = Normal::new(g.impostor_mean, g.impostor_std)
            .map_err(|e| Error::InvalidConfig(format!("group {}: {e}", g.name)))?;

        let mut gen_rng =
            ChaCha12Rng::seed_from_u64(child_seed(seed, &[label_seed(g.name.name()), 0]));
        let mut imp_rng =
            ChaCha12Rng::seed_from_u64(child_seed(seed, &[label_seed(g.name.name()), 1]));
        sets.push(LabeledScoreSet {
            group: g.name.clone(),
            genuine: (0..cfg.n_genuine).map(|_| genuine_dist.sample(&mut gen_rng)).collect(),
            impostor: (0..cfg.n_impostor).map(|_| impostor_dist.sample(&mut imp_rng)).collect(),
        });
    }
    Ok(sets)
}

/// Draw the score pools under the config's own seed.
pub fn generate_scores(cfg: &SyntheticConfig) -> Result<Vec<LabeledScoreSet>> {
    generate_scores_seeded(cfg, cfg.seed)
}

/// Seed of the score-generation stream for batch `b` under `master`.
pub fn batch_scores_seed(master: u64, batch: usize) -> u64 {
    child_seed(master, &[label_seed("scores"), batch as u64])
}

/// Seed of the bootstrap stream for batch `b` under `master`.
pub fn batch_bootstrap_seed(master: u64, batch: usize) -> u64 {
    child_seed(master, &[label_seed("boot"), batch as u64])
}

/// The full protocol: for each of the `m` batches, generate fresh scores and
/// fresh subsets, compute all distributions, then assemble every batch
/// against references fixed from the cross-batch averaged group means, and
/// average the reports element-wise.
///
/// `params.seed` is the single master seed; per-batch generation and
/// bootstrap streams are derived from it.
pub fn run_protocol(
    cfg: &SyntheticConfig,
    params: &AssessParams,
    m: usize,
) -> Result<BatchAggregate> {
    if m == 0 {
        return Err(Error::InvalidConfig("the protocol needs at least one batch".into()));
    }
    cfg.validate()?;
    let master = params.seed;

    let mut batch_dists = Vec::with_capacity(m);
    for b in 0..m {
        let scores = generate_scores_seeded(cfg, batch_scores_seed(master, b))?;
        let mut batch_params = params.clone();
        batch_params.seed = batch_bootstrap_seed(master, b);
        batch_dists.push(compute_group_distributions(&scores, &batch_params)?);
    }

    // fix the references from the cross-batch averaged means: a distribution
    // whose values are the per-batch means has exactly the averaged mean
    let mut avg = std::collections::BTreeMap::new();
    for group in batch_dists[0].keys() {
        let eer_means: Vec<f64> = batch_dists.iter().map(|d| d[group].eer.mean).collect();
        let tpr_means: Vec<f64> = batch_dists.iter().map(|d| d[group].tpr.mean).collect();
        avg.insert(
            group.clone(),
            crate::risk::GroupDistributions {
                eer: crate::resample::PerfDistribution::from_values(
                    group.clone(),
                    crate::perf::PerfMetric::Eer,
                    eer_means,
                )?,
                tpr: crate::resample::PerfDistribution::from_values(
                    group.clone(),
                    crate::perf::PerfMetric::TprAtFpr { target_fpr: params.target_fpr },
                    tpr_means,
                )?,
            },
        );
    }
    let (ref_eer, ref_tpr) = select_reference(&avg, &params.policy)?;
    let fixed_policy = ReferencePolicy {
        eer: EerReference::Explicit(ref_eer),
        tpr: TprReference::Explicit(ref_tpr),
    };

    let config = params.report_config(); // echoes the master seed
    let reports = batch_dists
        .iter()
        .map(|dists| assemble_report(dists, &fixed_policy, &params.model_label, config.clone()))
        .collect::<Result<Vec<_>>>()?;
    aggregate_batches(reports)
}
