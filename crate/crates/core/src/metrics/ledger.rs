use std::fmt::Write as _;

use super::ensemble::{EnsembleConfig, TrajSample};
use super::Estimate;
use crate::diffusion::DiffusionModel;
use crate::grid::{FpOperator, Grid1D, GridDensity};

pub const CSV_HEADER: &str = "t,H,dH_dt,F,dF_dt,trJ_rho,trJ_pi,trJ_pi_se,S_rate,S_rate_se,D_rate_fisher,D_rate_fisher_se,D_rate_gamma,D_rate_gamma_se,I_mc,I_mc_se,mwz_residual,mwz_residual_se";

/// Prior-density quantities of one row.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SharedRow {
    pub h: f64,
    pub dh_dt: f64,
    pub f: f64,
    pub df_dt: f64,
    pub tr_j_rho: f64,
}

impl SharedRow {
    /// `op` is the operator that advances `rho` over the next step (drift
    /// `v̄` for controlled runs). `dF/dt` is the exact semi-discrete rate
    /// `Σ J_{i+½} (ln r_{i+1} − ln r_i)`, `r = ρ/ρ_ss`.
    pub fn compute(
        model: &DiffusionModel,
        rho: &GridDensity,
        op: &FpOperator,
        rho_ss: &GridDensity,
        sigma: &[f64],
    ) -> Self {
        let g = rho.grid;
        let n = g.n_cells();
        let dx = g.dx();
        let faces = op.face_drift();
        let tr_j_rho = rho.fisher_trace(sigma);
        let mut div = 0.0;
        for i in 0..n {
            let mut du = (faces[i + 1] - faces[i]) / dx;
            if !model.has_constant_diffusion() && i > 0 && i + 1 < n {
                du -= 0.5 * (sigma[i + 1] - 2.0 * sigma[i] + sigma[i - 1]) / (dx * dx);
            }
            div += rho.values[i] * du;
        }
        let dh_dt = div * dx / rho.mass() + 0.5 * tr_j_rho;
        let f = rho.kl_against(rho_ss).map(|d| d.value()).unwrap_or(f64::NAN);
        let j = op.fluxes(&rho.values);
        let lr: Vec<f64> = rho.log_values().iter().zip(rho_ss.log_values()).map(|(a, b)| a - b).collect();
        let df_dt = (0..n - 1).map(|i| j[i + 1] * (lr[i + 1] - lr[i])).sum::<f64>();
        Self { h: rho.entropy(), dh_dt, f, df_dt, tr_j_rho }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub h: f64,
    pub dh_dt: f64,
    pub f: f64,
    pub df_dt: f64,
    pub tr_j_rho: f64,
    pub tr_j_pi: Estimate,
    pub s_rate: Estimate,
    pub d_fisher: Estimate,
    pub d_gamma: Estimate,
    pub i_mc: Estimate,
    /// `ln ζ(X) − ln σ_t(1) − ln ρ(X)`.
    pub i_zakai: Estimate,
    /// `𝔼[ln ζ(X) − ln ρ(X)] − ½∫𝔼|π(h)|²`.
    pub i_duncan: Estimate,
    /// Finite-difference `dI/dt`.
    pub di_dt: Estimate,
    pub mwz: Estimate,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LedgerMeta {
    pub model: String,
    pub n_traj: usize,
    pub dt: f64,
    pub grid: Option<Grid1D>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InfoLedger {
    pub meta: LedgerMeta,
    pub rows: Vec<LedgerRow>,
}

fn fmt_num(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:.16e}");
}

impl InfoLedger {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.rows.len() * 18 * 24);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:.16e}", r.t);
            for v in [
                r.h,
                r.dh_dt,
                r.f,
                r.df_dt,
                r.tr_j_rho,
                r.tr_j_pi.mean,
                r.tr_j_pi.se,
                r.s_rate.mean,
                r.s_rate.se,
                r.d_fisher.mean,
                r.d_fisher.se,
                r.d_gamma.mean,
                r.d_gamma.se,
                r.i_mc.mean,
                r.i_mc.se,
                r.mwz.mean,
                r.mwz.se,
            ] {
                fmt_num(&mut out, v);
            }
            out.push('\n');
        }
        out
    }

    /// True when every emitted number is finite.
    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            [
                r.t,
                r.h,
                r.dh_dt,
                r.f,
                r.df_dt,
                r.tr_j_rho,
                r.tr_j_pi.mean,
                r.tr_j_pi.se,
                r.s_rate.mean,
                r.s_rate.se,
                r.d_fisher.mean,
                r.d_fisher.se,
                r.d_gamma.mean,
                r.d_gamma.se,
                r.i_mc.mean,
                r.i_mc.se,
                r.mwz.mean,
                r.mwz.se,
            ]
            .iter()
            .all(|v| v.is_finite())
        })
    }

    /// Row whose time is closest to `t`.
    pub fn row_at(&self, t: f64) -> Option<&LedgerRow> {
        self.rows.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

/// `dH(X|Y)/dt = ½ tr J^π + 𝔼[∇·u] − ½ 𝔼|ε(h)|²`, assembled from a ledger
/// row using `𝔼[∇·u] = dH/dt − ½ tr J^ρ`.
pub fn conditional_entropy_rate(row: &LedgerRow) -> Estimate {
    let mean = 0.5 * row.tr_j_pi.mean + (row.dh_dt - 0.5 * row.tr_j_rho) - row.s_rate.mean;
    let se = (0.25 * row.tr_j_pi.se.powi(2) + row.s_rate.se.powi(2)).sqrt();
    Estimate { mean, se, n: row.s_rate.n }
}

/// 5-point first-derivative weights at position `pos` of a 5-sample
/// window, in units of `1/(12h)`.
fn stencil(pos: usize) -> [f64; 5] {
    match pos {
        0 => [-25.0, 48.0, -36.0, 16.0, -3.0],
        1 => [-3.0, -10.0, 18.0, -6.0, 1.0],
        2 => [1.0, -8.0, 0.0, 8.0, -1.0],
        3 => [-1.0, 6.0, -18.0, 10.0, 3.0],
        _ => [3.0, -16.0, 36.0, -48.0, 25.0],
    }
}

pub(crate) fn build_ledger(
    model: &DiffusionModel,
    config: &EnsembleConfig,
    times: &[f64],
    shared: &[SharedRow],
    samples: &[Vec<TrajSample>],
) -> InfoLedger {
    let rows_n = times.len();
    let h_row = config.dt * config.sample_stride as f64;
    let mut rows = Vec::with_capacity(rows_n);
    for r in 0..rows_n {
        let row = &samples[r];
        let inc: Vec<&TrajSample> = row.iter().filter(|s| !s.excluded).collect();
        let est = |f: &dyn Fn(&TrajSample) -> f64| Estimate::from_samples(inc.iter().map(|s| f(s)));
        let tr_j_pi = est(&|s| s.sigma_x * s.score_post * s.score_post);
        let s_rate = Estimate::from_samples(row.iter().map(|s| 0.5 * s.eps2));
        let d_fisher = est(&|s| 0.5 * s.sigma_x * (s.score_post.powi(2) - s.score_prior.powi(2)));
        let d_gamma = est(&|s| 0.5 * s.sigma_x * (s.score_post - s.score_prior).powi(2));
        let i_mc = est(&|s| s.ln_post - s.ln_prior);
        let i_zakai = est(&|s| (s.ln_post + s.log_norm) - s.log_norm - s.ln_prior);
        let i_duncan = {
            let zeta = est(&|s| s.ln_post + s.log_norm - s.ln_prior);
            let duncan = est(&|s| s.half_int_pi_h2);
            Estimate { mean: zeta.mean - duncan.mean, se: (zeta.se.powi(2) + duncan.se.powi(2)).sqrt(), n: zeta.n }
        };

        // Finite-difference dI/dt per trajectory over a 5-row window.
        let start = r.saturating_sub(2).min(rows_n.saturating_sub(5));
        let weights = stencil(r - start);
        let fd: Vec<f64> = (0..row.len())
            .filter(|&k| (start..start + 5).all(|q| !samples[q][k].excluded))
            .map(|k| {
                (0..5)
                    .map(|q| weights[q] * (samples[start + q][k].ln_post - samples[start + q][k].ln_prior))
                    .sum::<f64>()
                    / (12.0 * h_row)
            })
            .collect();
        let di_dt = Estimate::from_samples(fd);
        let mwz = Estimate {
            mean: di_dt.mean - (s_rate.mean - d_fisher.mean),
            se: (di_dt.se.powi(2) + s_rate.se.powi(2) + d_fisher.se.powi(2)).sqrt(),
            n: di_dt.n,
        };
        let sh = shared[r];
        rows.push(LedgerRow {
            t: times[r],
            h: sh.h,
            dh_dt: sh.dh_dt,
            f: sh.f,
            df_dt: sh.df_dt,
            tr_j_rho: sh.tr_j_rho,
            tr_j_pi,
            s_rate,
            d_fisher,
            d_gamma,
            i_mc,
            i_zakai,
            i_duncan,
            di_dt,
            mwz,
            excluded: row.len() - inc.len(),
        });
    }
    InfoLedger {
        meta: LedgerMeta {
            model: model.name().to_string(),
            n_traj: config.n_traj,
            dt: config.dt,
            grid: Some(config.grid),
            seed: config.seed,
        },
        rows,
    }
}
