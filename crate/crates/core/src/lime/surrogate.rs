use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use std::fmt::Write as _;

use super::linalg::Cholesky;
use super::{LimeError, MaskSet};

/// Rows of the design matrix materialized per Gram update. Fixed so results
/// do not depend on how predictions were batched.
const GRAM_CHUNK: usize = 1024;

/// Relative floor on the residual standard deviation. Keeps rounding-level
/// coefficients of an exact fit from looking significant.
const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub dof: usize,
}

impl SurrogateFit {
    pub fn n_segments(&self) -> usize {
        self.weights.len()
    }

    /// `segment,weight,std_error,p_value`, one row per segment.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment,weight,std_error,p_value\n");
        for j in 0..self.weights.len() {
            writeln!(out, "{j},{},{},{}", self.weights[j], self.std_errors[j], self.p_values[j])
                .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Two-sided tail probability of Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, dof: usize) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let v = dof as f64;
    beta_reg(v / 2.0, 0.5, v / (v + t * t)).clamp(0.0, 1.0)
}

/// Weighted least squares (optionally ridge) over the design `[1 | masks]`.
pub fn fit_surrogate(masks: &MaskSet, targets: &[f64], weights: &[f64], alpha: f64) -> Result<SurrogateFit, LimeError> {
    let n = masks.n_samples();
    let big_n = masks.n_segments();
    let p = big_n + 1;
    if targets.len() != n || weights.len() != n {
        return Err(LimeError::Shape(format!("{n} mask rows, {} targets, {} weights", targets.len(), weights.len())));
    }
    if n < big_n + 2 {
        return Err(LimeError::Underdetermined { n_samples: n, n_segments: big_n });
    }
    if let Some((row, &value)) = targets.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(LimeError::NonFinite { row, value });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(LimeError::Config("proximity weights must be finite and >= 0".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(LimeError::Config("ridge_alpha must be >= 0".into()));
    }
    let wsum: f64 = weights.iter().sum();
    if wsum.is_nan() || wsum <= 0.0 {
        return Err(LimeError::Config("proximity weights sum to zero".into()));
    }
    let pi: Vec<f64> = weights.iter().map(|w| w * n as f64 / wsum).collect();

    let mut gram = Array2::<f64>::zeros((p, p));
    let mut xty = Array1::<f64>::zeros(p);
    let mut x = Array2::<f64>::zeros((GRAM_CHUNK, p));
    let mut wx = Array2::<f64>::zeros((GRAM_CHUNK, p));
    for start in (0..n).step_by(GRAM_CHUNK) {
        let rows = GRAM_CHUNK.min(n - start);
        for i in 0..rows {
            let r = start + i;
            x[[i, 0]] = 1.0;
            wx[[i, 0]] = pi[r];
            for (j, &m) in masks.row(r).iter().enumerate() {
                let v = m as f64;
                x[[i, j + 1]] = v;
                wx[[i, j + 1]] = v * pi[r];
            }
        }
        let xc = x.slice(s![..rows, ..]);
        let wxc = wx.slice(s![..rows, ..]);
        general_mat_mul(1.0, &xc.t(), &wxc, 1.0, &mut gram);
        let yc = ndarray::ArrayView1::from(&targets[start..start + rows]);
        xty += &wxc.t().dot(&yc);
    }

    let mut penalized = gram.clone();
    for j in 1..p {
        penalized[[j, j]] += alpha;
    }
    let chol = Cholesky::factor(&penalized).map_err(|column| LimeError::RankDeficient { column })?;
    let dof = n - big_n - 1;

    let (lo, hi) = targets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        return Ok(SurrogateFit {
            weights: vec![0.0; big_n],
            intercept: lo,
            std_errors: vec![0.0; big_n],
            p_values: vec![1.0; big_n],
            r_squared: 0.0,
            dof,
        });
    }

    let mut beta = chol.solve(&xty);
    // one step of iterative refinement
    let resid = &xty - &penalized.dot(&beta);
    beta += &chol.solve(&resid);

    let mut rss = 0.0;
    let mut ysum = 0.0;
    for r in 0..n {
        let mut fitted = beta[0];
        for (j, &m) in masks.row(r).iter().enumerate() {
            if m != 0 {
                fitted += beta[j + 1];
            }
        }
        let e = targets[r] - fitted;
        rss += pi[r] * e * e;
        ysum += pi[r] * targets[r];
    }
    let ymean = ysum / n as f64;
    let tss: f64 = targets.iter().zip(&pi).map(|(y, w)| w * (y - ymean).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };

    let sigma2 = (rss / dof as f64).max((SIGMA_FLOOR * (hi - lo)).powi(2));
    let inv = chol.inverse();
    let cov_diag: Vec<f64> = if alpha == 0.0 {
        (1..p).map(|j| inv[[j, j]] * sigma2).collect()
    } else {
        let sandwich = inv.dot(&gram).dot(&inv);
        (1..p).map(|j| sandwich[[j, j]] * sigma2).collect()
    };
    let std_errors: Vec<f64> = cov_diag.iter().map(|v| v.max(0.0).sqrt()).collect();
    let p_values = (0..big_n)
        .map(|j| {
            let b = beta[j + 1];
            if b == 0.0 {
                1.0
            } else {
                student_t_two_sided_p(b / std_errors[j], dof)
            }
        })
        .collect();

    Ok(SurrogateFit {
        weights: beta.iter().skip(1).copied().collect(),
        intercept: beta[0],
        std_errors,
        p_values,
        r_squared,
        dof,
    })
}
