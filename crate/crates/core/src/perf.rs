//! Verification performance: empirical ROC sweep, EER, and TPR at a fixed
//! FPR operating point.
//!
//! Conventions: a comparison is accepted iff score >= tau (ties accepted),
//! FPR is identified with FMR and TPR with 1 - FNMR. EER uses linear
//! interpolation at the first sign change of (fmr - fnmr).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LabeledScoreSet;

/// Empirical error-rate curve over ascending thresholds.
///
/// `fmr` is non-increasing and `fnmr` non-decreasing along `thresholds`; the
/// sentinel endpoints cover (fmr=1, fnmr=0) and (fmr=0, fnmr=1).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fmr: Vec<f64>,
    pub fnmr: Vec<f64>,
}

/// One point on the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub fmr: f64,
    pub fnmr: f64,
    pub tpr: f64,
}

/// Which performance statistic a value or distribution refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerfMetric {
    Eer,
    TprAtFpr { target_fpr: f64 },
}

impl PerfMetric {
    pub fn label(&self) -> String {
        match self {
            PerfMetric::Eer => "eer".into(),
            PerfMetric::TprAtFpr { target_fpr } => format!("tpr@fpr={target_fpr}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceValue {
    #[serde(flatten)]
    pub kind: PerfMetric,
    pub value: f64,
}

/// Build the empirical ROC over the distinct observed scores plus sentinels
/// below the minimum and above the maximum.
///
/// fmr(tau) = fraction of impostor scores >= tau; fnmr(tau) = fraction of
/// genuine scores < tau.
pub fn build_roc(set: &LabeledScoreSet) -> Result<RocCurve> {
    if set.genuine.is_empty() {
        return Err(Error::InsufficientData(format!(
            "group {}: no genuine scores",
            set.group
        )));
    }
    if set.impostor.is_empty() {
        return Err(Error::InsufficientData(format!(
            "group {}: no impostor scores",
            set.group
        )));
    }

    let mut genuine = set.genuine.clone();
    let mut impostor = set.impostor.clone();
    genuine.sort_unstable_by(f64::total_cmp);
    impostor.sort_unstable_by(f64::total_cmp);

    let lo = genuine[0].min(impostor[0]);
    let hi = genuine[genuine.len() - 1].max(impostor[impostor.len() - 1]);

    let mut thresholds = Vec::with_capacity(genuine.len() + impostor.len() + 2);
    thresholds.push(lo - 1.0);
    let mut gi = 0;
    let mut ii = 0;
    let mut last = f64::NEG_INFINITY;
    while gi < genuine.len() || ii < impostor.len() {
        let next = match (genuine.get(gi), impostor.get(ii)) {
            (Some(&g), Some(&i)) => {
                if g <= i {
                    gi += 1;
                    g
                } else {
                    ii += 1;
                    i
                }
            }
            (Some(&g), None) => {
                gi += 1;
                g
            }
            (None, Some(&i)) => {
                ii += 1;
                i
            }
            (None, None) => unreachable!(),
        };
        if next != last {
            thresholds.push(next);
            last = next;
        }
    }
    thresholds.push(hi + 1.0);

    let n_gen = genuine.len() as f64;
    let n_imp = impostor.len() as f64;
    let mut fmr = Vec::with_capacity(thresholds.len());
    let mut fnmr = Vec::with_capacity(thresholds.len());
    for &tau in &thresholds {
        let imp_below = impostor.partition_point(|&s| s < tau);
        let gen_below = genuine.partition_point(|&s| s < tau);
        fmr.push((impostor.len() - imp_below) as f64 / n_imp);
        fnmr.push(gen_below as f64 / n_gen);
    }

    Ok(RocCurve { thresholds, fmr, fnmr })
}

/// Equal error rate: the value where fmr = fnmr, linearly interpolated
/// between the two adjacent points bracketing the sign change of
/// (fmr - fnmr). The difference is monotone along the curve, so the first
/// crossing (lowest tau) is the one returned.
pub fn compute_eer(roc: &RocCurve) -> PerformanceValue {
    let d = |j: usize| roc.fmr[j] - roc.fnmr[j];
    // d(0) = 1 at the low sentinel and d(last) = -1, so a crossing exists.
    let mut j = 0;
    while d(j) > 0.0 {
        j += 1;
    }
    let value = if j == 0 || d(j) == 0.0 {
        // exact equality at a sample point
        roc.fmr[j]
    } else {
        let d_prev = d(j - 1);
        let lambda = d_prev / (d_prev - d(j));
        roc.fmr[j - 1] + lambda * (roc.fmr[j] - roc.fmr[j - 1])
    };
    PerformanceValue { kind: PerfMetric::Eer, value }
}

/// Operating point at the smallest tau whose fmr <= target, with TPR and
/// threshold linearly interpolated between the bracketing fmr points.
pub fn operating_point_at_fpr(roc: &RocCurve, target_fpr: f64) -> Result<OperatingPoint> {
    if !(target_fpr > 0.0 && target_fpr < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target FPR must be in (0, 1), got {target_fpr}"
        )));
    }
    // fmr starts at 1 and ends at 0, so the first index at or below target
    // exists and is >= 1.
    let j = (0..roc.fmr.len())
        .find(|&j| roc.fmr[j] <= target_fpr)
        .expect("fmr reaches 0 at the high sentinel");
    if j == 0 {
        return Ok(OperatingPoint {
            threshold: roc.thresholds[0],
            fmr: roc.fmr[0],
            fnmr: roc.fnmr[0],
            tpr: 1.0 - roc.fnmr[0],
        });
    }
    let (f_prev, f_cur) = (roc.fmr[j - 1], roc.fmr[j]);
    let lambda = (f_prev - target_fpr) / (f_prev - f_cur);
    let tpr_prev = 1.0 - roc.fnmr[j - 1];
    let tpr_cur = 1.0 - roc.fnmr[j];
    let tpr = tpr_prev + lambda * (tpr_cur - tpr_prev);
    Ok(OperatingPoint {
        threshold: roc.thresholds[j - 1] + lambda * (roc.thresholds[j] - roc.thresholds[j - 1]),
        fmr: target_fpr,
        fnmr: 1.0 - tpr,
        tpr,
    })
}

/// TPR at a fixed FPR operating point (paper default: FPR = 0.01).
pub fn tpr_at_fpr(roc: &RocCurve, target_fpr: f64) -> Result<PerformanceValue> {
    let point = operating_point_at_fpr(roc, target_fpr)?;
    Ok(PerformanceValue { kind: PerfMetric::TprAtFpr { target_fpr }, value: point.tpr })
}

/// Evaluate one metric on one score set (ROC built internally).
pub fn evaluate(set: &LabeledScoreSet, metric: PerfMetric) -> Result<PerformanceValue> {
    let roc = build_roc(set)?;
    match metric {
        PerfMetric::Eer => Ok(compute_eer(&roc)),
        PerfMetric::TprAtFpr { target_fpr } => tpr_at_fpr(&roc, target_fpr),
    }
}

/// Plot-ready export: `threshold,fmr,fnmr`.
pub fn write_roc_csv(roc: &RocCurve, out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["threshold", "fmr", "fnmr"])?;
    for i in 0..roc.thresholds.len() {
        writer.write_record([
            format!("{}", roc.thresholds[i]),
            format!("{}", roc.fmr[i]),
            format!("{}", roc.fnmr[i]),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
