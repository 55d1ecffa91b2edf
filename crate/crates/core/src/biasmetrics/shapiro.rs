//! Shapiro-Wilk normality test, Royston's AS R94 approximation (the same
//! algorithm behind R's shapiro.test), valid for 3 <= n <= 5000.

use serde::{Deserialize, Serialize};

use super::special::{normal_quantile, normal_sf};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityResult {
    pub w_statistic: f64,
    pub p_value: f64,
    pub is_gaussian: bool,
    pub threshold: f64,
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Expected-normal-order-statistic weights, antisymmetric over the sorted
/// sample; only the first half is stored (positive magnitudes).
fn coefficients(n: usize) -> Vec<f64> {
    let nn2 = n / 2;
    let mut a = vec![0.0; nn2];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
        return a;
    }

    let an = n as f64;
    let an25 = an + 0.25;
    let mut m = vec![0.0; nn2];
    let mut summ2 = 0.0;
    for (i, mi) in m.iter_mut().enumerate() {
        *mi = normal_quantile((i as f64 + 1.0 - 0.375) / an25);
        summ2 += *mi * *mi;
    }
    summ2 *= 2.0;
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();

    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];

    let a1 = poly(&C1, rsn) - m[0] / ssumm2;
    if n > 5 {
        let a2 = poly(&C2, rsn) - m[1] / ssumm2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        a[0] = a1;
        a[1] = a2;
        for i in 2..nn2 {
            a[i] = -m[i] / fac;
        }
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        a[0] = a1;
        for i in 1..nn2 {
            a[i] = -m[i] / fac;
        }
    }
    a
}

fn p_value_for(w: f64, n: usize) -> f64 {
    if w >= 1.0 {
        return 1.0;
    }
    let an = n as f64;
    if n == 3 {
        // exact small-sample distribution
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = (0.75_f64).sqrt().asin();
        return (pi6 * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0);
    }

    const G: [f64; 2] = [-2.273, 0.459];
    const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];

    let y = (1.0 - w).ln();
    let (z, mean, sd) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        (-(gamma - y).ln(), poly(&C3, an), poly(&C4, an).exp())
    } else {
        let lx = an.ln();
        (y, poly(&C5, lx), poly(&C6, lx).exp())
    };
    normal_sf((z - mean) / sd).clamp(0.0, 1.0)
}

/// Shapiro-Wilk W and p-value; `is_gaussian` follows p > threshold.
///
/// The conventional threshold is 0.05; a stricter 0.5 (treating a
/// distribution as Gaussian only when the test is far from rejecting) can be
/// passed instead.
pub fn shapiro_wilk(sample: &[f64], threshold: f64) -> Result<NormalityResult> {
    let n = sample.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "Shapiro-Wilk needs at least 3 values, got {n}"
        )));
    }
    if n > 5000 {
        return Err(Error::Data(format!(
            "Shapiro-Wilk approximation is unreliable beyond n = 5000, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidConfig(format!(
            "normality threshold must be in [0, 1], got {threshold}"
        )));
    }
    if let Some(v) = sample.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("sample contains non-finite value {v}")));
    }

    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let range = sorted[n - 1] - sorted[0];
    if range == 0.0 {
        return Err(Error::Degenerate("constant sample: W is undefined".into()));
    }

    let a = coefficients(n);

    // correlation between the antisymmetric weights and the sorted sample;
    // the sample is scaled by its range for stability
    let y: Vec<f64> = sorted.iter().map(|v| v / range).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut sax = 0.0;
    let mut ssa = 0.0;
    let mut ssx = 0.0;
    for i in 0..n {
        let j = n - 1 - i;
        let w_i = match i.cmp(&j) {
            std::cmp::Ordering::Less => -a[i],
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => a[j],
        };
        let dy = y[i] - y_mean;
        sax += w_i * dy;
        ssa += w_i * w_i;
        ssx += dy * dy;
    }

    // W = 1 - w1 evaluated in a cancellation-free form, since the p-value
    // depends on log(1 - W)
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = (1.0 - w1).clamp(0.0, 1.0);
    let p_value = p_value_for(w, n);

    Ok(NormalityResult { w_statistic: w, p_value, is_gaussian: p_value > threshold, threshold })
}
