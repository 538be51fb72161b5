use std::f64::consts::{E, PI};

use nalgebra::DMatrix;

use super::{spd_eigen, spd_inverse, spd_log_det, GaussianBelief, GaussianError};

/// Entropy, internal surprise and free surprise of a Gaussian law relative
/// to the stationary law `N(0, V_ss)`, with their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurpriseLedgerPoint {
    pub t: f64,
    pub h: f64,
    pub e: f64,
    pub f: f64,
    pub dh_dt: f64,
    pub de_dt: f64,
    pub df_dt: f64,
}

impl SurpriseLedgerPoint {
    pub fn at(mut self, t: f64) -> Self {
        self.t = t;
        self
    }
}

/// `d − ln(1 + d)` without cancellation for small `d`.
fn d_minus_log1p(d: f64) -> f64 {
    if d.abs() < 0.05 {
        // Σ_{k≥2} (−1)^k d^k / k
        let mut term = d * d;
        let mut sum = 0.0;
        for k in 2..=24 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * term / k as f64;
            term *= d;
        }
        sum
    } else {
        d - d.ln_1p()
    }
}

pub fn surprise_ledger(
    belief: &GaussianBelief,
    v_ss: &DMatrix<f64>,
    a: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
) -> Result<SurpriseLedgerPoint, GaussianError> {
    let n = belief.dim();
    let v = &belief.cov;
    let mu = &belief.mean;
    if v.shape() != (n, n) || v_ss.shape() != (n, n) {
        return Err(GaussianError::Dimension("belief and steady covariance disagree".into()));
    }
    let v_inv = spd_inverse(v)?;
    let vss_inv = spd_inverse(v_ss)?;
    let log_det_v = spd_log_det(v)?;
    let log_det_ss = spd_log_det(v_ss)?;
    let nf = n as f64;

    let h = 0.5 * log_det_v + 0.5 * nf * (2.0 * PI * E).ln();
    let e0 = 0.5 * (nf * (2.0 * PI).ln() + log_det_ss);
    let mahal = mu.dot(&(&vss_inv * mu));
    let e = 0.5 * ((&vss_inv * v).trace() + mahal) + e0;

    // KL through the eigenvalues of L⁻¹(V − V_ss)L⁻ᵀ, V_ss = L Lᵀ.
    let ss_eig = spd_eigen(v_ss)?;
    let inv_root = &ss_eig.eigenvectors
        * DMatrix::from_diagonal(&ss_eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * ss_eig.eigenvectors.transpose();
    let rel = &inv_root * (v - v_ss) * &inv_root;
    let d = ((&rel + rel.transpose()) * 0.5).symmetric_eigenvalues();
    let f = 0.5 * (d.iter().map(|&di| d_minus_log1p(di)).sum::<f64>() + mahal);

    let diff = v - v_ss;
    let dh_dt = (&v_inv * a * &diff).trace();
    let de_dt = (&vss_inv * a * &diff).trace() + mu.dot(&(&vss_inv * a * mu));
    let gap = &vss_inv - &v_inv;
    let df_dt = -0.5 * (&gap * sigma * &gap * v).trace() - 0.5 * mu.dot(&(&vss_inv * sigma * &vss_inv * mu));
    Ok(SurpriseLedgerPoint { t: 0.0, h, e, f, dh_dt, de_dt, df_dt })
}
