//! Reference-group selection, per-group metric assembly, N-Sigma risk tiers,
//! and report serialization.
//!
//! References are per metric: SP, T-test and N-Sigma compare against the
//! lowest-mean-EER group, EOP against the highest-mean-TPR group. A
//! reference compared against itself always yields sp = eop = t_test_p = 1
//! and n_sigma = 0, exactly.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::biasmetrics::{eop, n_sigma, sp_simplified, welch_t_test};
use crate::error::{Error, Result};
use crate::ingest::{GroupId, LabeledScoreSet};
use crate::perf::PerfMetric;
use crate::resample::{performance_distribution, BootstrapConfig, PerfDistribution};
use crate::seed::{child_seed, label_seed};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EerReference {
    LowestMean,
    Explicit(GroupId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TprReference {
    HighestMean,
    Explicit(GroupId),
}

/// How the reference group is picked for each metric family. Ties break
/// lexicographically on group name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferencePolicy {
    pub eer: EerReference,
    pub tpr: TprReference,
}

impl Default for ReferencePolicy {
    fn default() -> Self {
        ReferencePolicy { eer: EerReference::LowestMean, tpr: TprReference::HighestMean }
    }
}

/// Ascending sigma cut-points with one label per interval; a value on a
/// cut-point maps to the higher tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRiskThresholds")]
pub struct RiskThresholds {
    cuts: Vec<f64>,
    labels: Vec<String>,
}

#[derive(Deserialize)]
struct RawRiskThresholds {
    cuts: Vec<f64>,
    labels: Vec<String>,
}

impl TryFrom<RawRiskThresholds> for RiskThresholds {
    type Error = Error;

    fn try_from(raw: RawRiskThresholds) -> Result<Self> {
        RiskThresholds::new(raw.cuts, raw.labels)
    }
}

impl RiskThresholds {
    pub fn new(cuts: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(Error::InvalidConfig("need at least one cut-point (two levels)".into()));
        }
        if cuts.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("cut-points must be finite".into()));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("cut-points must be strictly ascending".into()));
        }
        if labels.len() != cuts.len() + 1 {
            return Err(Error::InvalidConfig(format!(
                "{} cut-points need {} labels, got {}",
                cuts.len(),
                cuts.len() + 1,
                labels.len()
            )));
        }
        if labels.iter().any(String::is_empty) {
            return Err(Error::InvalidConfig("risk labels must be non-empty".into()));
        }
        Ok(RiskThresholds { cuts, labels })
    }

    /// Cut-points only, with the default label scheme (low / medium / high /
    /// critical for three cuts, tier1..tierN otherwise).
    pub fn from_cutpoints(cuts: Vec<f64>) -> Result<Self> {
        let labels = if cuts.len() == 3 {
            vec!["low".into(), "medium".into(), "high".into(), "critical".into()]
        } else {
            (1..=cuts.len() + 1).map(|i| format!("tier{i}")).collect()
        };
        RiskThresholds::new(cuts, labels)
    }

    /// The default four tiers at the Gaussian landmarks 1, 2 and 3 sigma.
    pub fn default_tiers() -> Self {
        RiskThresholds::from_cutpoints(vec![1.0, 2.0, 3.0]).expect("static default is valid")
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Index of the half-open interval containing n.
    pub fn level_index(&self, n: f64) -> usize {
        self.cuts.partition_point(|&c| c <= n)
    }

    /// Label of the half-open interval containing n.
    pub fn level_for(&self, n: f64) -> &str {
        &self.labels[self.level_index(n)]
    }
}

impl Default for RiskThresholds {
    fn default() -> Self {
        RiskThresholds::default_tiers()
    }
}

/// Both bootstrapped distributions for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDistributions {
    pub eer: PerfDistribution,
    pub tpr: PerfDistribution,
}

/// One row of the report: the evaluated group against the per-metric
/// references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group: GroupId,
    pub reference_eer: GroupId,
    pub reference_tpr: GroupId,
    pub sp: f64,
    pub eop: f64,
    pub t_test_p: f64,
    pub n_sigma: f64,
    pub risk_level: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub eer: f64,
    pub tpr: f64,
}

/// Provenance echo carried inside every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub seed: u64,
    pub k: usize,
    pub subset_size_eer: usize,
    pub subset_size_tpr: usize,
    pub target_fpr: f64,
    pub significance: f64,
    pub sp_alpha: f64,
    pub risk_thresholds: RiskThresholds,
}

/// The per-group metric table (one comparison row per group), group means,
/// and the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub model_label: String,
    pub batches: usize,
    pub sigma_ref: f64,
    pub group_means: BTreeMap<String, GroupMeans>,
    pub comparisons: Vec<GroupComparison>,
    pub config: ReportConfig,
}

impl BiasReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Spreadsheet flattening: `group,metric,value`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["group", "metric", "value"])?;
        for (group, means) in &self.group_means {
            writer.write_record([group.as_str(), "eer_mean", &format!("{}", means.eer)])?;
            writer.write_record([group.as_str(), "tpr_mean", &format!("{}", means.tpr)])?;
        }
        for c in &self.comparisons {
            let g = c.group.name();
            writer.write_record([g, "sp", &format!("{}", c.sp)])?;
            writer.write_record([g, "eop", &format!("{}", c.eop)])?;
            writer.write_record([g, "t_test_p", &format!("{}", c.t_test_p)])?;
            writer.write_record([g, "n_sigma", &format!("{}", c.n_sigma)])?;
            writer.write_record([g, "risk_level", &c.risk_level])?;
        }
        if let Some(first) = self.comparisons.first() {
            writer.write_record([
                first.reference_eer.name(),
                "sigma_ref",
                &format!("{}", self.sigma_ref),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Pick the EER reference (lowest mean) and TPR reference (highest mean)
/// under the policy; explicit choices are honored after an existence check.
pub fn select_reference(
    dists: &BTreeMap<GroupId, GroupDistributions>,
    policy: &ReferencePolicy,
) -> Result<(GroupId, GroupId)> {
    if dists.is_empty() {
        return Err(Error::InsufficientData("no groups to select a reference from".into()));
    }
    let eer_ref = match &policy.eer {
        EerReference::Explicit(group) => {
            if !dists.contains_key(group) {
                return Err(Error::Data(format!("explicit EER reference {group} not in dataset")));
            }
            group.clone()
        }
        EerReference::LowestMean => {
            // BTreeMap iterates in name order; strict < keeps the first
            // (lexicographically smallest) group on ties
            let mut best: Option<(&GroupId, f64)> = None;
            for (group, d) in dists {
                if best.map_or(true, |(_, m)| d.eer.mean < m) {
                    best = Some((group, d.eer.mean));
                }
            }
            best.unwrap().0.clone()
        }
    };
    let tpr_ref = match &policy.tpr {
        TprReference::Explicit(group) => {
            if !dists.contains_key(group) {
                return Err(Error::Data(format!("explicit TPR reference {group} not in dataset")));
            }
            group.clone()
        }
        TprReference::HighestMean => {
            let mut best: Option<(&GroupId, f64)> = None;
            for (group, d) in dists {
                if best.map_or(true, |(_, m)| d.tpr.mean > m) {
                    best = Some((group, d.tpr.mean));
                }
            }
            best.unwrap().0.clone()
        }
    };
    Ok((eer_ref, tpr_ref))
}

/// Build the full per-group metric table against the policy-selected
/// references.
pub fn assemble_report(
    dists: &BTreeMap<GroupId, GroupDistributions>,
    policy: &ReferencePolicy,
    model_label: &str,
    config: ReportConfig,
) -> Result<BiasReport> {
    let k = match dists.values().next() {
        Some(d) => d.eer.values.len(),
        None => return Err(Error::InsufficientData("no groups to report on".into())),
    };
    for (group, d) in dists {
        if d.eer.values.len() != k || d.tpr.values.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "group {group}: distributions must share the same K (expected {k}, got {} EER / {} TPR)",
                d.eer.values.len(),
                d.tpr.values.len()
            )));
        }
    }

    let (ref_eer, ref_tpr) = select_reference(dists, policy)?;
    let eer_reference = &dists[&ref_eer];
    let tpr_reference = &dists[&ref_tpr];
    let sigma_ref = eer_reference.eer.std;

    if sigma_ref == 0.0
        && dists.values().any(|d| d.eer.mean != eer_reference.eer.mean)
    {
        return Err(Error::Degenerate(
            "reference EER distribution has zero spread while group means differ; \
             N-Sigma is unbounded"
                .into(),
        ));
    }

    let mut comparisons = Vec::with_capacity(dists.len());
    let mut group_means = BTreeMap::new();
    for (group, d) in dists {
        let sp = sp_simplified(&eer_reference.eer, &d.eer)?.value;
        let eop_value = eop(&tpr_reference.tpr, &d.tpr)?.value;
        let t = welch_t_test(&eer_reference.eer, &d.eer, config.significance)?;
        let ns = n_sigma(&eer_reference.eer, &d.eer)?;
        comparisons.push(GroupComparison {
            group: group.clone(),
            reference_eer: ref_eer.clone(),
            reference_tpr: ref_tpr.clone(),
            sp,
            eop: eop_value,
            t_test_p: t.p_value,
            n_sigma: ns.n,
            risk_level: config.risk_thresholds.level_for(ns.n).to_string(),
        });
        group_means.insert(
            group.name().to_string(),
            GroupMeans { eer: d.eer.mean, tpr: d.tpr.mean },
        );
    }

    Ok(BiasReport {
        model_label: model_label.to_string(),
        batches: 1,
        sigma_ref,
        group_means,
        comparisons,
        config,
    })
}

/// Everything needed to run the assessment pipeline on a set of score pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessParams {
    pub k: usize,
    pub subset_size_eer: usize,
    pub subset_size_tpr: usize,
    pub target_fpr: f64,
    pub significance: f64,
    pub sp_alpha: f64,
    pub seed: u64,
    pub policy: ReferencePolicy,
    pub thresholds: RiskThresholds,
    pub model_label: String,
}

impl Default for AssessParams {
    fn default() -> Self {
        AssessParams {
            k: crate::resample::DEFAULT_K,
            subset_size_eer: crate::resample::DEFAULT_SUBSET_SIZE_EER,
            subset_size_tpr: crate::resample::DEFAULT_SUBSET_SIZE_TPR,
            target_fpr: 0.01,
            significance: 0.05,
            sp_alpha: 0.5,
            seed: 0,
            policy: ReferencePolicy::default(),
            thresholds: RiskThresholds::default_tiers(),
            model_label: "model".into(),
        }
    }
}

impl AssessParams {
    pub fn report_config(&self) -> ReportConfig {
        ReportConfig {
            seed: self.seed,
            k: self.k,
            subset_size_eer: self.subset_size_eer,
            subset_size_tpr: self.subset_size_tpr,
            target_fpr: self.target_fpr,
            significance: self.significance,
            sp_alpha: self.sp_alpha,
            risk_thresholds: self.thresholds.clone(),
        }
    }
}

/// Bootstrap both distributions for every group. Streams are keyed by
/// (seed, group name, metric), so group order cannot change any value.
pub fn compute_group_distributions(
    sets: &[LabeledScoreSet],
    params: &AssessParams,
) -> Result<BTreeMap<GroupId, GroupDistributions>> {
    let mut dists = BTreeMap::new();
    for set in sets {
        if dists.contains_key(&set.group) {
            return Err(Error::Data(format!("duplicate score set for group {}", set.group)));
        }
        let eer_cfg = BootstrapConfig {
            k: params.k,
            subset_size: params.subset_size_eer,
            master_seed: child_seed(params.seed, &[label_seed(set.group.name()), 0]),
        };
        let tpr_cfg = BootstrapConfig {
            k: params.k,
            subset_size: params.subset_size_tpr,
            master_seed: child_seed(params.seed, &[label_seed(set.group.name()), 1]),
        };
        let eer = performance_distribution(set, &eer_cfg, PerfMetric::Eer)?;
        let tpr = performance_distribution(
            set,
            &tpr_cfg,
            PerfMetric::TprAtFpr { target_fpr: params.target_fpr },
        )?;
        dists.insert(set.group.clone(), GroupDistributions { eer, tpr });
    }
    Ok(dists)
}

/// The single-batch pipeline: bootstrap distributions, then assemble the
/// report.
pub fn assess_score_sets(sets: &[LabeledScoreSet], params: &AssessParams) -> Result<BiasReport> {
    let dists = compute_group_distributions(sets, params)?;
    assemble_report(&dists, &params.policy, &params.model_label, params.report_config())
}
