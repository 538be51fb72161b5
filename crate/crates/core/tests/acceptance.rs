//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Oracles are written out here from closed forms and direct quadrature;
//! the library supplies only the solvers under test.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::dmatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use infoflow::diffusion::{gamma, presets, simulate_joint, DiffusionModel, InitialDistribution, SmoothField};
use infoflow::feedback::{controlled_kalman_ensemble, ControlPolicy};
use infoflow::gaussian::{
    kb_info_rates, riccati_step, rk4_lyapunov_step, surprise_ledger, GaussianBelief, LinearModel,
};
use infoflow::grid::{
    fp_step, ks_step, normalize, observation_table, zakai_step, zakai_step_normalized, FpOperator, FpScratch, Grid1D,
    GridDensity,
};
use infoflow::metrics::{cramer_rao_check, run_ensemble, EnsembleConfig, EnsembleRun};

const SEED: u64 = 20240611;

struct Tally {
    failed: usize,
    total: usize,
}

impl Tally {
    fn check(&mut self, id: &str, what: &str, pass: bool, detail: String) {
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        println!("{} [{id}] {what}: {detail}", if pass { "PASS" } else { "FAIL" });
    }

    fn at_most(&mut self, id: &str, what: &str, measured: f64, tol: f64) {
        self.check(id, what, measured <= tol, format!("measured={measured:.4e} tolerance={tol:.1e}"));
    }
}

// Closed forms for the scalar linear model.

fn ou_var(a: f64, sigma: f64, v0: f64, t: f64) -> f64 {
    let vss = -sigma / (2.0 * a);
    vss + (v0 - vss) * (2.0 * a * t).exp()
}

fn gaussian_kl(mu: f64, v: f64, vss: f64) -> f64 {
    0.5 * (v / vss - 1.0 - (v / vss).ln() + mu * mu / vss)
}

fn rk4(f: impl Fn(f64) -> f64, y: f64, h: f64) -> f64 {
    let k1 = f(y);
    let k2 = f(y + 0.5 * h * k1);
    let k3 = f(y + 0.5 * h * k2);
    let k4 = f(y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

// Direct quadratures on cell values.

fn entropy(rho: &[f64], dx: f64) -> f64 {
    -rho.iter().filter(|&&r| r > 0.0).map(|r| r * r.ln()).sum::<f64>() * dx
}

/// `∫ ρ (∂ₓ ln ρ)²` with centred differences over interior cells above a
/// relative floor.
fn fisher(rho: &[f64], dx: f64) -> f64 {
    let max = rho.iter().copied().fold(0.0, f64::max);
    let mass: f64 = rho.iter().sum::<f64>() * dx;
    (1..rho.len() - 1)
        .filter(|&i| rho[i] > 1e-12 * max)
        .map(|i| {
            let s = (rho[i + 1].max(1e-300).ln() - rho[i - 1].max(1e-300).ln()) / (2.0 * dx);
            rho[i] * s * s
        })
        .sum::<f64>()
        * dx
        / mass
}

fn five_point(h: &[f64], k: usize, step: f64) -> f64 {
    (h[k - 2] - 8.0 * h[k - 1] + 8.0 * h[k + 1] - h[k + 2]) / (12.0 * step)
}

fn c1(t: &mut Tally) {
    let (a, s, v0, mu0) = (-1.0, 2.0, 0.25, 1.0);
    let vss = -s / (2.0 * a);
    let belief = |t: f64| GaussianBelief::scalar((a * t).exp() * mu0, ou_var(a, s, v0, t));
    let lib = |t: f64| surprise_ledger(&belief(t), &dmatrix![vss], &dmatrix![a], &dmatrix![s]).unwrap();
    let (mut worst_fd, mut worst_closed, mut max_rate): (f64, f64, f64) = (0.0, 0.0, f64::NEG_INFINITY);
    let step = 1e-3;
    for k in 1..=100 {
        let tk = 0.1 * k as f64;
        let f: Vec<f64> = (-2..=2).map(|j| lib(tk + j as f64 * step).f).collect();
        let rate = lib(tk).df_dt;
        worst_fd = worst_fd.max((five_point(&f, 2, step) - rate).abs() / rate.abs());
        let b = belief(tk);
        worst_closed = worst_closed.max((lib(tk).f - gaussian_kl(b.mean[0], b.cov[(0, 0)], vss)).abs());
        max_rate = max_rate.max(rate);
    }
    t.at_most("C1", "dF/dt vs finite difference of F, max relative error", worst_fd, 1e-6);
    t.at_most("C1", "F vs closed-form Gaussian KL, max abs error", worst_closed, 1e-12);
    t.at_most("C1", "max dF/dt on [0.1, 10]", max_rate, 0.0);
    t.at_most("C1", "F at T=10", lib(10.0).f, 1e-6);
}

fn c2(t: &mut Tally) {
    let (a, s, c) = (-1.0, 2.0, 1.0);
    let dt = 1e-4;
    let steps = 50_000;
    let (mut v, mut vh): (f64, f64) = (0.25, 0.25);
    let (mut lv, mut lvh) = (dmatrix![0.25], dmatrix![0.25]);
    let mut info = Vec::with_capacity(steps + 1);
    let mut rate = Vec::with_capacity(steps + 1);
    let mut lib_gap: f64 = 0.0;
    for k in 0..=steps {
        info.push(0.5 * (v / vh).ln());
        let s_rate = 0.5 * c * c * vh;
        let d_rate = 0.5 * s * (1.0 / vh - 1.0 / v);
        rate.push(s_rate - d_rate);
        let lib = kb_info_rates(&lv, &lvh, &dmatrix![s], &dmatrix![c]).unwrap();
        lib_gap = lib_gap.max((lib.s_rate - s_rate).abs()).max((lib.d_rate - d_rate).abs());
        if k < steps {
            v = rk4(|v| 2.0 * a * v + s, v, dt);
            vh = rk4(|w| 2.0 * a * w + s - c * c * w * w, vh, dt);
            lv = rk4_lyapunov_step(&dmatrix![a], &dmatrix![s], &lv, dt);
            lvh = riccati_step(&dmatrix![a], &dmatrix![s], &dmatrix![c], &lvh, dt);
        }
    }
    let worst = (1..steps)
        .map(|k| ((info[k + 1] - info[k - 1]) / (2.0 * dt) - rate[k]).abs() / rate[k].abs())
        .fold(0.0, f64::max);
    t.at_most("C2", "d/dt ½ln(V/V̂) vs S_rate − D_rate, max relative error", worst, 1e-6);
    t.at_most("C2", "library rates vs scalar closed forms along the path", lib_gap, 1e-10);
    let vh_ss = (a + (a * a + c * c * s).sqrt()) / (c * c);
    let v_ss = -s / (2.0 * a);
    let lib = kb_info_rates(&dmatrix![v_ss], &dmatrix![vh_ss], &dmatrix![s], &dmatrix![c]).unwrap();
    let target = (3f64.sqrt() - 1.0) / 2.0;
    t.at_most("C2", "stationary |S_rate − (√3−1)/2|", (lib.s_rate - target).abs(), 1e-8);
    t.at_most("C2", "stationary |D_rate − (√3−1)/2|", (lib.d_rate - target).abs(), 1e-8);
    let mut w = 0.25;
    for _ in 0..200_000 {
        w = rk4(|w| 2.0 * a * w + s - c * c * w * w, w, 1e-4);
    }
    t.at_most("C2", "Riccati ODE at t=20 vs √3−1", (w - vh_ss).abs(), 1e-12);
}

/// OU (`a = 1`, `Σ = 2`) from `N(1, 0.25)`: worst gap between the time
/// difference of the entropy and `−a + ½Σ J` at 20 times.
fn entropy_production_gap(n_cells: usize) -> f64 {
    let (a, s) = (1.0, 2.0);
    let model = presets::ou(a, s, 1.0);
    let grid = Grid1D::new(-6.0, 6.0, n_cells).unwrap();
    let op = FpOperator::from_model(&model, grid, &[]).unwrap();
    let dt = 1e-4;
    let mut rho = GridDensity::gaussian(grid, 1.0, 0.25);
    let mut scratch = FpScratch::default();
    let mut h = Vec::new();
    let mut theorem = Vec::new();
    for k in 0..=10_002 {
        if k > 0 {
            op.advance(&mut rho.values, dt, &mut scratch).unwrap();
        }
        h.push(entropy(&rho.values, grid.dx()));
        theorem.push(-a + 0.5 * s * fisher(&rho.values, grid.dx()));
    }
    (1..=20).map(|j| (five_point(&h, 500 * j, dt) - theorem[500 * j]).abs()).fold(0.0, f64::max)
}

fn c3(t: &mut Tally) {
    let coarse = entropy_production_gap(512);
    let fine = entropy_production_gap(1024);
    t.at_most("C3", "|FD dH/dt − (E[div u] + ½E[Γ])|, 512 cells, 20 times", coarse, 1e-3);
    t.check(
        "C3",
        "refinement ratio 512 → 1024 cells",
        coarse / fine >= 3.0,
        format!("measured={:.3} tolerance=≥3", coarse / fine),
    );
}

fn c4(t: &mut Tally) {
    let model = presets::brownian(1.0, 1.0);
    let grid = Grid1D::new(-9.0, 9.0, 512).unwrap();
    let op = FpOperator::from_model(&model, grid, &[]).unwrap();
    let dt = 1e-3;
    let mut rho = GridDensity::gaussian(grid, 0.0, 0.25);
    let mut scratch = FpScratch::default();
    let mut h = Vec::new();
    let mut half_j = Vec::new();
    for k in 0..=2002 {
        if k > 0 {
            op.advance(&mut rho.values, dt, &mut scratch).unwrap();
        }
        h.push(entropy(&rho.values, grid.dx()));
        half_j.push(0.5 * fisher(&rho.values, grid.dx()));
    }
    let (mut worst, mut worst_analytic): (f64, f64) = (0.0, 0.0);
    for k in (100..=2000).step_by(50) {
        let fd = five_point(&h, k, dt);
        worst = worst.max((fd - half_j[k]).abs());
        // Heat kernel: V(t) = V₀ + t, dH/dt = 1/(2V).
        worst_analytic = worst_analytic.max((fd - 0.5 / (0.25 + k as f64 * dt)).abs());
    }
    t.at_most("C4", "|dH/dt − ½ trJ| on [0.1, 2]", worst, 1e-3);
    t.at_most("C4", "|dH/dt − 1/(2V(t))| on [0.1, 2]", worst_analytic, 1e-3);
}

fn c5(t: &mut Tally) {
    let (a, s, c) = (-1.0, 2.0, 1.0);
    let model = presets::lqg_scalar(a, s, c);
    let grid = Grid1D::new(-6.0, 6.0, 512).unwrap();
    let op = FpOperator::from_model(&model, grid, &[]).unwrap();
    let h = observation_table(&model, &GridDensity::gaussian(grid, 0.0, 1.0), &[]);
    let dt = 1e-3;
    let x0 = InitialDistribution::scalar_gaussian(0.0, 0.25);
    let (mut worst_var, mut worst_mean): (f64, f64) = (0.0, 0.0);
    for k in 0..100 {
        let path = simulate_joint(&model, &x0, 3.0, dt, SEED, k).unwrap();
        let mut post = GridDensity::gaussian(grid, 0.0, 0.25);
        let mut scratch = FpScratch::default();
        let (mut m, mut v) = (0.0, 0.25);
        for dy in &path.obs_increments {
            zakai_step_normalized(&op, &h, &mut post.values, dy, dt, &mut scratch).unwrap();
            // Kalman–Bucy: Euler for the mean, RK4 for the Riccati equation.
            m += a * m * dt + v * c * (dy[0] - c * m * dt);
            v = rk4(|w| 2.0 * a * w + s - c * c * w * w, v, dt);
            worst_var = worst_var.max((post.variance() - v).abs());
            worst_mean = worst_mean.max((post.mean() - m).abs() / v.sqrt());
        }
    }
    t.at_most("C5", "max |Var_grid − V̂| over [0,3], N=100", worst_var, 5e-3);
    t.at_most("C5", "max |mean_grid − X̂|/√V̂ over [0,3], N=100", worst_mean, 5e-3);
}

fn double_well_config(n: usize) -> EnsembleConfig {
    EnsembleConfig {
        grid: Grid1D::new(-2.5, 2.5, 256).unwrap(),
        dt: 1e-3,
        horizon: 2.0,
        n_traj: n,
        seed: SEED,
        sample_stride: 200,
        x0_mean: 0.0,
        x0_var: 0.25,
        keep_final_posteriors: true,
        keep_mean_posteriors: false,
    }
}

/// Sample mean and its standard error.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn mwz_lines(t: &mut Tally, id: &str, run: &EnsembleRun) {
    let rows = &run.ledger.rows[1..];
    let worst =
        rows.iter().max_by(|a, b| (a.mwz.mean.abs() / a.mwz.se).total_cmp(&(b.mwz.mean.abs() / b.mwz.se))).unwrap();
    t.check(
        id,
        &format!("MWZ residual |ΔI/Δt − (S − D)| ≤ 3 SE at {} times", rows.len()),
        rows.iter().all(|r| r.mwz.mean.abs() <= 3.0 * r.mwz.se),
        format!("worst t={:.1} residual={:.4e} se={:.4e}", worst.t, worst.mwz.mean, worst.mwz.se),
    );
    let excluded = run.ledger.rows.iter().map(|r| r.excluded).max().unwrap();
    t.check(
        id,
        "excluded trajectories < 0.1% of N",
        (excluded as f64) < 1e-3 * run.config.n_traj as f64 || excluded == 0,
        format!("max excluded={excluded}"),
    );
}

fn c6_c7(t: &mut Tally) {
    let model = presets::double_well(1.0, 0.5, 1.0);
    let run = run_ensemble(&model, &double_well_config(2000), None).unwrap();
    mwz_lines(t, "C6", &run);
    let rows = &run.ledger.rows[1..];

    // Ṡ = ½ E|h(X) − π(h)|², recomputed from the per-trajectory samples.
    let mut s_gap: f64 = 0.0;
    let mut s_ok = true;
    for (row, samples) in run.ledger.rows.iter().zip(&run.samples).skip(1) {
        let e: Vec<f64> = samples.iter().filter(|s| !s.excluded).map(|s| 0.5 * s.eps2).collect();
        let (m, se) = mean_se(&e);
        s_gap = s_gap.max((m - row.s_rate.mean).abs());
        s_ok &= m >= -3.0 * se;
    }
    t.check("C6", "S_rate ≥ −3 SE (recomputed from samples)", s_ok, format!("max gap to ledger={s_gap:.2e}"));
    let d_ok = rows.iter().all(|r| {
        (r.d_fisher.mean - r.d_gamma.mean).abs() <= 3.0 * (r.d_fisher.se.powi(2) + r.d_gamma.se.powi(2)).sqrt()
    });
    let d_pos = rows.iter().all(|r| r.d_gamma.mean >= -3.0 * r.d_gamma.se);
    t.check("C6", "D_rate_fisher and D_rate_gamma agree within 3 combined SE", d_ok, String::new());
    t.check("C6", "D_rate_gamma ≥ −3 SE", d_pos, String::new());
    let i_ok = rows.iter().all(|r| r.i_mc.mean >= -3.0 * r.i_mc.se);
    let last = rows.last().unwrap();
    t.check("C6", "I_mc ≥ −3 SE", i_ok, format!("I_mc(T)={:.4}±{:.4}", last.i_mc.mean, last.i_mc.se));

    // Tower property with a test-side bootstrap.
    let posts = &run.final_posteriors;
    let prior = run.priors.last().unwrap();
    let (n, cells, dx) = (posts.len(), prior.values.len(), prior.dx());
    let mean: Vec<f64> = (0..cells).map(|c| posts.iter().map(|p| p[c]).sum::<f64>() / n as f64).collect();
    let l1: f64 = mean.iter().zip(&prior.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x70_77e2);
    let b = 200;
    let mut sum = vec![0.0; cells];
    let mut sum2 = vec![0.0; cells];
    for _ in 0..b {
        let mut boot = vec![0.0; cells];
        for _ in 0..n {
            let p = &posts[rng.random_range(0..n)];
            for c in 0..cells {
                boot[c] += p[c];
            }
        }
        for c in 0..cells {
            let m = boot[c] / n as f64;
            sum[c] += m;
            sum2[c] += m * m;
        }
    }
    let l1_se: f64 = (0..cells)
        .map(|c| {
            let m = sum[c] / b as f64;
            ((sum2[c] / b as f64 - m * m).max(0.0) * b as f64 / (b - 1) as f64).sqrt()
        })
        .sum::<f64>()
        * dx;
    t.check(
        "C7",
        "L1(mean posterior_T, prior_T) ≤ 3 bootstrap SE",
        l1 <= 3.0 * l1_se,
        format!("l1={l1:.4e} se={l1_se:.4e}"),
    );
}

fn c8(t: &mut Tally) {
    // (a) Scalar LQG with β = −0.5 X̂.
    let lm = LinearModel::scalar(-1.0, 2.0, 1.0);
    let b0 = GaussianBelief::scalar(1.0, 0.25);
    let policy = ControlPolicy::linear_gain(0.5);
    let ctl = controlled_kalman_ensemble(&lm, Some(&policy), &b0, 200, 1e-3, 3.0, SEED).unwrap();
    let open = controlled_kalman_ensemble(&lm, None, &b0, 200, 1e-3, 3.0, SEED).unwrap();
    let gap = |f: &dyn Fn(&infoflow::feedback::KalmanEnsemble, usize) -> f64| {
        (0..ctl.times.len()).map(|k| (f(&ctl, k) - f(&open, k)).abs()).fold(0.0, f64::max)
    };
    t.at_most("C8a", "max |V̂_ctl − V̂_open|", gap(&|e, k| e.v_hat[k][(0, 0)]), 1e-10);
    t.at_most("C8a", "max |S_ctl − S_open|", gap(&|e, k| e.s_rate[k]), 1e-10);
    t.at_most("C8a", "max |D_ctl − D_open|", gap(&|e, k| e.d_rate[k]), 1e-10);
    // Oracle: the uncontrolled Riccati solution.
    let mut w = 0.25;
    let mut ric_gap: f64 = 0.0;
    for k in 0..ctl.times.len() {
        ric_gap = ric_gap.max((ctl.v_hat[k][(0, 0)] - w).abs());
        w = rk4(|w| -2.0 * w + 2.0 - w * w, w, 1e-3);
    }
    t.at_most("C8a", "controlled V̂ vs scalar Riccati oracle", ric_gap, 1e-10);
    let mean_gap = gap(&|e, k| e.mean_state[k][0]);
    t.check("C8a", "mean path changes under control", mean_gap > 1e-3, format!("max |ΔE[X]|={mean_gap:.4e}"));

    // (b) Controlled double well.
    let model = presets::double_well(1.0, 0.5, 1.0);
    let mut cfg = double_well_config(2000);
    cfg.keep_final_posteriors = false;
    let run = run_ensemble(&model, &cfg, Some(&policy)).unwrap();
    mwz_lines(t, "C8b", &run);

    // (c) Zero gain.
    let mut cfg = double_well_config(100);
    cfg.horizon = 0.5;
    cfg.sample_stride = 50;
    cfg.keep_final_posteriors = false;
    let a = run_ensemble(&model, &cfg, None).unwrap().ledger.to_csv();
    let b = run_ensemble(&model, &cfg, Some(&ControlPolicy::zero())).unwrap().ledger.to_csv();
    t.check("C8c", "zero-gain ledger bit-identical to uncontrolled", a == b, format!("{} bytes", a.len()));
}

/// `c₀ + c₁ sin(k·x + φ) + c₂ (w·x)²` on ℝ² with its gradient.
fn random_field(rng: &mut ChaCha8Rng) -> (SmoothField, [f64; 7]) {
    let p = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ];
    let f = SmoothField::new(move |x| {
        let wx = p[5] * x[0] + p[6] * x[1];
        p[0] + p[1] * (p[3] * x[0] + p[4] * x[1]).sin() + p[2] * wx * wx
    })
    .with_gradient(move |x| {
        let arg = p[3] * x[0] + p[4] * x[1];
        let wx = p[5] * x[0] + p[6] * x[1];
        nalgebra::dvector![
            p[1] * arg.cos() * p[3] + 2.0 * p[2] * wx * p[5],
            p[1] * arg.cos() * p[4] + 2.0 * p[2] * wx * p[6]
        ]
    });
    (f, p)
}

fn c9(t: &mut Tally) {
    let model = DiffusionModel::builder("anisotropic", 2, 2, 1)
        .diffusion(|x, out| {
            out[(0, 0)] = 1.0 + 0.3 * x[0].sin();
            out[(0, 1)] = 0.2;
            out[(1, 0)] = 0.1 * x[1];
            out[(1, 1)] = 0.8 + 0.1 * x[0] * x[0];
        })
        .build()
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut min_diag = f64::INFINITY;
    for _ in 0..100 {
        let (f, _) = random_field(&mut rng);
        let (g, _) = random_field(&mut rng);
        let (h, _) = random_field(&mut rng);
        let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let gm = |a: &SmoothField, b: &SmoothField| gamma(&model, a, b, &x);
        // Direct Γ(f, g) = ∇fᵀ B Bᵀ ∇g.
        let b = model.diffusion_factor(&x);
        let direct = (f.gradient(&x).transpose() * &b * b.transpose() * g.gradient(&x))[(0, 0)];
        let rel = |u: f64, v: f64| (u - v).abs() / u.abs().max(v.abs()).max(1.0);
        worst = worst.max(rel(gm(&f, &g), direct));
        let fg = SmoothField::product(&f, &g);
        worst = worst.max(rel(gm(&fg, &h), f.value(&x) * gm(&g, &h) + g.value(&x) * gm(&f, &h)));
        let sum = SmoothField::linear_combination(1.0, &f, 1.0, &g);
        let dif = SmoothField::linear_combination(1.0, &f, -1.0, &g);
        worst = worst.max(rel(gm(&f, &g), 0.25 * (gm(&sum, &sum) - gm(&dif, &dif))));
        worst = worst.max(rel(gm(&sum, &h), gm(&f, &h) + gm(&g, &h)));
        min_diag = min_diag.min(gm(&f, &f));
    }
    t.at_most("C9", "Γ bi-derivation, polarization, additivity on 100 random fields", worst, 1e-10);
    t.check("C9", "Γ(f,f) ≥ 0 on 100 random fields", min_diag >= 0.0, format!("min={min_diag:.4e}"));

    let dw = presets::double_well(1.0, 0.5, 1.0);
    let grid = Grid1D::new(-2.5, 2.5, 256).unwrap();
    let dt = 0.5 * FpOperator::from_model(&dw, grid, &[]).unwrap().stable_dt();
    let mut rho = GridDensity::gaussian(grid, 0.7, 0.1);
    let mut worst_mass: f64 = 0.0;
    for _ in 0..10_000 {
        let before = rho.mass();
        rho = fp_step(&dw, &rho, dt).unwrap();
        worst_mass = worst_mass.max((rho.mass() - before).abs() / before);
    }
    t.at_most("C9", "fp_step relative mass change per step over 1e4 steps", worst_mass, 1e-12);

    let z1 = GridDensity::gaussian(grid, -0.8, 0.1);
    let z2 = GridDensity::from_fn(grid, |x| (2.0 + x.cos()) * (-x * x / 0.8).exp());
    let (ca, cb) = (0.6, 2.5);
    let combo =
        GridDensity { values: z1.values.iter().zip(&z2.values).map(|(u, v)| ca * u + cb * v).collect(), ..z1.clone() };
    let step = |z: &GridDensity| zakai_step(&dw, z, &[-0.03], &[], 1e-3, None).unwrap();
    let (s1, s2, sc) = (step(&z1), step(&z2), step(&combo));
    let scale = sc.values.iter().copied().fold(0.0, f64::max);
    let lin = sc
        .values
        .iter()
        .zip(s1.values.iter().zip(&s2.values))
        .map(|(c, (u, v))| (c - ca * u - cb * v).abs())
        .fold(0.0, f64::max)
        / scale;
    t.at_most("C9", "Zakai linearity", lin, 1e-12);

    // KS vs normalised Zakai on shared observation paths at dt and dt/2.
    let kgrid = Grid1D::new(-2.5, 2.5, 128).unwrap();
    let x0 = InitialDistribution::scalar_gaussian(0.0, 0.25);
    let base = 2e-3;
    let (mut g_coarse, mut g_fine) = (0.0, 0.0);
    for k in 0..16 {
        let path = simulate_joint(&dw, &x0, 0.5, 0.5 * base, SEED + 1, k).unwrap();
        for (stride, acc) in [(2usize, &mut g_coarse), (1, &mut g_fine)] {
            let h = base * 0.5 * stride as f64;
            let mut ks = GridDensity::gaussian(kgrid, 0.0, 0.25);
            let mut zk = ks.clone();
            for chunk in path.obs_increments.chunks(stride) {
                let dy: f64 = chunk.iter().map(|d| d[0]).sum();
                ks = ks_step(&dw, &ks, dy, &[], h, None).unwrap();
                zk = normalize(&zakai_step(&dw, &zk, &[dy], &[], h, None).unwrap()).unwrap().0;
            }
            *acc += ks.values.iter().zip(&zk.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * kgrid.dx();
        }
    }
    let ratio = g_coarse / g_fine;
    t.check(
        "C9",
        "KS vs normalised Zakai gap ratio dt → dt/2 in [1.6, 2.4]",
        (1.6..=2.4).contains(&ratio),
        format!("ratio={ratio:.3} gap(dt)={:.3e}", g_coarse / 16.0),
    );

    // Cramér–Rao: Gaussian (equality), stationary double well, mixture.
    let wide = Grid1D::new(-6.0, 6.0, 512).unwrap();
    let ss = GridDensity::from_fn(Grid1D::new(-2.5, 2.5, 512).unwrap(), |x| ((x * x - 0.5 * x.powi(4)) / 0.5).exp());
    let mix = GridDensity::from_fn(wide, |x| 0.7 * (-(x + 1.0).powi(2)).exp() + 0.2 * (-(x - 1.5).powi(2) / 0.8).exp());
    let mut min_cr = f64::INFINITY;
    for d in [GridDensity::gaussian(wide, 0.3, 0.7), ss, mix] {
        let lib = cramer_rao_check(&d).unwrap();
        let direct = d.variance() - 1.0 / fisher(&d.values, d.dx());
        assert!(
            (lib - direct).abs() < 1e-6 * direct.abs().max(1.0),
            "Cramér–Rao quadratures disagree: {lib} vs {direct}"
        );
        min_cr = min_cr.min(lib);
    }
    t.check("C9", "Cramér–Rao Var − 1/J ≥ −1e−6 on three densities", min_cr >= -1e-6, format!("min={min_cr:.4e}"));
}

fn main() -> ExitCode {
    // Plain `cargo test` passes harness flags; a listing request runs nothing.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut tally = Tally { failed: 0, total: 0 };
    type Group = (&'static str, fn(&mut Tally));
    let suites: [Group; 8] =
        [("C1", c1), ("C2", c2), ("C3", c3), ("C4", c4), ("C5", c5), ("C6/C7", c6_c7), ("C8", c8), ("C9", c9)];
    for (name, f) in suites {
        let started = Instant::now();
        f(&mut tally);
        eprintln!("  ({name} took {:.1?})", started.elapsed());
    }
    println!("acceptance: {} checks, {} failed", tally.total, tally.failed);
    if tally.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
