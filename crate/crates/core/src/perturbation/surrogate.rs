//! Weighted linear least squares for surrogate fitting.

use crate::error::{Error, Result};

/// Columns whose weighted variance falls below this are not identifiable
/// and receive a zero coefficient.
const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Weighted R^2 against the weighted-mean null model; 0 when the target
    /// has zero weighted variance.
    pub r2: f64,
}

/// Minimizes `sum_i w_i (y_i - b - x_i . beta)^2 + lambda |beta|^2`. The
/// intercept is not penalized.
pub fn weighted_ridge(x: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> Result<LinearFit> {
    let n = x.len();
    if n == 0 || y.len() != n || w.len() != n {
        return Err(Error::param("design, target and weights must have equal, nonzero length"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::param("ridge lambda must be >= 0"));
    }
    let p = x[0].len();
    let wsum: f64 = w.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::DegenerateDesign("sample weights sum to zero".into()));
    }
    let xmean: Vec<f64> = (0..p)
        .map(|j| x.iter().zip(w).map(|(r, wi)| wi * r[j]).sum::<f64>() / wsum)
        .collect();
    let ymean = y.iter().zip(w).map(|(yi, wi)| wi * yi).sum::<f64>() / wsum;

    let active: Vec<usize> = (0..p)
        .filter(|&j| {
            let var = x.iter().zip(w).map(|(r, wi)| wi * (r[j] - xmean[j]).powi(2)).sum::<f64>() / wsum;
            var > VARIANCE_FLOOR
        })
        .collect();
    if active.is_empty() && p > 0 {
        return Err(Error::DegenerateDesign("every design column is constant".into()));
    }

    let q = active.len();
    let mut gram = vec![0.0; q * q];
    let mut rhs = vec![0.0; q];
    let mut centered = vec![0.0; q];
    for ((row, &wi), &yi) in x.iter().zip(w).zip(y) {
        for (c, &j) in centered.iter_mut().zip(&active) {
            *c = row[j] - xmean[j];
        }
        let yc = yi - ymean;
        for a in 0..q {
            let wa = wi * centered[a];
            rhs[a] += wa * yc;
            for b in a..q {
                gram[a * q + b] += wa * centered[b];
            }
        }
    }
    for a in 0..q {
        gram[a * q + a] += lambda;
        for b in 0..a {
            gram[a * q + b] = gram[b * q + a];
        }
    }
    let beta = solve_spd(&gram, &rhs, q).map_err(|_| Error::DegenerateDesign("collinear design columns".into()))?;
    let mut coef = vec![0.0; p];
    for (&j, &b) in active.iter().zip(&beta) {
        coef[j] = b;
    }
    let intercept = ymean - xmean.iter().zip(&coef).map(|(m, c)| m * c).sum::<f64>();
    let r2 = weighted_r2(x, y, w, &coef, intercept);
    Ok(LinearFit { coef, intercept, r2 })
}

pub fn weighted_r2(x: &[Vec<f64>], y: &[f64], w: &[f64], coef: &[f64], intercept: f64) -> f64 {
    let wsum: f64 = w.iter().sum();
    let ymean = y.iter().zip(w).map(|(yi, wi)| wi * yi).sum::<f64>() / wsum;
    let mut ss_tot = 0.0;
    let mut ss_res = 0.0;
    for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
        let pred = intercept + row.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>();
        ss_res += wi * (yi - pred).powi(2);
        ss_tot += wi * (yi - ymean).powi(2);
    }
    if ss_tot <= VARIANCE_FLOOR * wsum.max(1.0) * 1e-6 {
        0.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Weighted least squares without intercept or penalty.
pub fn weighted_least_squares(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let p = x.first().map_or(0, Vec::len);
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
        for a in 0..p {
            let wa = wi * row[a];
            rhs[a] += wa * yi;
            for b in a..p {
                gram[a * p + b] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[a * p + b] = gram[b * p + a];
        }
    }
    solve_spd(&gram, &rhs, p)
}

/// Cholesky solve of a symmetric positive-definite `n x n` system.
pub fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= scale * 1e-13 {
                    return Err(Error::SingularSystem);
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * n + i];
    }
    Ok(x)
}
