//! Step-synchronous ensemble engine shared by uncontrolled and controlled
//! runs.

use rayon::prelude::*;

use super::ledger::{build_ledger, InfoLedger, SharedRow};
use super::MetricsError;
use crate::diffusion::{DiffusionModel, InitialDistribution, PathStepper};
use crate::feedback::{ControlPolicy, PosteriorSummary};
use crate::grid::{
    observation_table, steady_state_grid, zakai_step_normalized, FpOperator, FpScratch, Grid1D, GridDensity, SCORE_GATE,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub grid: Grid1D,
    pub dt: f64,
    pub horizon: f64,
    pub n_traj: usize,
    pub seed: u64,
    /// Steps between ledger rows.
    pub sample_stride: usize,
    /// `X(0) ~ N(x0_mean, x0_var)`, independent of the observations.
    pub x0_mean: f64,
    pub x0_var: f64,
    /// Keep every trajectory's posterior at the final time.
    pub keep_final_posteriors: bool,
    /// Keep the ensemble-mean posterior at every ledger row.
    pub keep_mean_posteriors: bool,
}

impl EnsembleConfig {
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let bad = |m: &str| Err(MetricsError::Config(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.horizon >= 10.0 * self.dt) {
            return bad("horizon must be at least 10 steps");
        }
        if self.n_traj == 0 {
            return bad("ensemble needs at least one trajectory");
        }
        if self.sample_stride == 0 {
            return bad("sample stride must be positive");
        }
        if self.n_steps() / self.sample_stride + 1 < 5 {
            return bad("need at least 5 ledger rows for the 5-point derivative");
        }
        if !(self.x0_var > 0.0) {
            return bad("initial variance must be positive");
        }
        Ok(())
    }
}

/// Per-trajectory quantities recorded at one ledger row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajSample {
    pub x: f64,
    /// True state outside the box or under the density gate.
    pub excluded: bool,
    pub ln_post: f64,
    pub ln_prior: f64,
    /// `ln σ_t(1)` accumulated by renormalisation.
    pub log_norm: f64,
    /// `Σ_k [π_k(h)ᵀΔY_k − ½|π_k(h)|² dt]`.
    pub ln_sigma_sum: f64,
    /// `½ ∫ |π_s(h)|² ds`.
    pub half_int_pi_h2: f64,
    /// `|h(X) − π(h)|²`.
    pub eps2: f64,
    pub score_post: f64,
    pub score_prior: f64,
    pub sigma_x: f64,
    pub post_mean: f64,
    pub post_var: f64,
    pub control: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub model_name: String,
    pub config: EnsembleConfig,
    pub times: Vec<f64>,
    /// `samples[row][trajectory]`.
    pub samples: Vec<Vec<TrajSample>>,
    /// Fokker–Planck density at each row.
    pub priors: Vec<GridDensity>,
    pub steady_state: GridDensity,
    pub mean_posteriors: Vec<Vec<f64>>,
    pub final_posteriors: Vec<Vec<f64>>,
    /// Ensemble mean of `β` at each row (empty when uncontrolled).
    pub mean_control: Vec<Vec<f64>>,
    /// Face values of `v̄` at each row.
    pub vbar_faces: Vec<Vec<f64>>,
    pub clamp_count: usize,
    pub ledger: InfoLedger,
}

impl EnsembleRun {
    /// Largest number of excluded trajectories at any row.
    pub fn max_excluded(&self) -> usize {
        self.ledger.rows.iter().map(|r| r.excluded).max().unwrap_or(0)
    }

    /// Exclusions must stay below 0.1% of the ensemble.
    pub fn is_valid(&self) -> bool {
        (self.max_excluded() as f64) < 1e-3 * self.config.n_traj as f64 || self.max_excluded() == 0
    }
}

struct TrajState {
    stepper: PathStepper,
    post: Vec<f64>,
    log_norm: f64,
    ln_sigma_sum: f64,
    half_int: f64,
    control: Vec<f64>,
    clamped: usize,
    summary: PosteriorSummary,
    pi_h: Vec<f64>,
    h_own: Option<Vec<f64>>,
    scratch: FpScratch,
    dy: Vec<f64>,
}

fn moments(grid: &Grid1D, values: &[f64]) -> (f64, f64) {
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    for (i, v) in values.iter().enumerate() {
        m0 += v;
        m1 += v * grid.center(i);
    }
    let mean = m1 / m0;
    let mut m2 = 0.0;
    for (i, v) in values.iter().enumerate() {
        let d = grid.center(i) - mean;
        m2 += v * d * d;
    }
    (mean, m2 / m0)
}

fn face_drifts(model: &DiffusionModel, grid: &Grid1D, control: &[f64]) -> Vec<f64> {
    (0..=grid.n_cells()).map(|i| model.drift_1d(grid.face(i), control)).collect()
}

/// Runs `N` filtered trajectories with a shared Fokker–Planck prior and
/// assembles the information ledger.
///
/// With `policy = None` the drift is evaluated with an empty control. With a
/// policy, each trajectory's control is computed from its own posterior
/// moments, and the prior is advanced with the ensemble-mean drift `v̄`.
pub fn run_ensemble(
    model: &DiffusionModel,
    config: &EnsembleConfig,
    policy: Option<&ControlPolicy>,
) -> Result<EnsembleRun, MetricsError> {
    config.validate()?;
    if model.dim_state() != 1 {
        return Err(crate::grid::GridError::NotOneDimensional(model.dim_state()).into());
    }
    super::with_workers(|| run_inner(model, config, policy))
}

fn run_inner(
    model: &DiffusionModel,
    config: &EnsembleConfig,
    policy: Option<&ControlPolicy>,
) -> Result<EnsembleRun, MetricsError> {
    let grid = config.grid;
    let n_cells = grid.n_cells();
    let p = model.dim_obs();
    let dt = config.dt;
    let steps = config.n_steps();
    let n = config.n_traj;
    if policy.is_some() && n < 100 {
        log::warn!("mean drift estimated from only {n} trajectories");
    }

    let sigma: Vec<f64> = (0..n_cells).map(|i| model.sigma_1d(grid.center(i))).collect();
    let base_op = FpOperator::from_model(model, grid, &[])?;
    let steady_state = steady_state_grid(model, grid)?;
    let y_dependent = model.observation_depends_on_y();
    let prior0 = GridDensity::gaussian(grid, config.x0_mean, config.x0_var);
    let h_shared = observation_table(model, &prior0, &[]);
    let x0 = InitialDistribution::scalar_gaussian(config.x0_mean, config.x0_var);

    let mut states = (0..n)
        .map(|k| {
            let start = x0.sample(config.seed, k as u64)?;
            Ok(TrajState {
                stepper: PathStepper::new(model, start, config.seed, k as u64),
                post: prior0.values.clone(),
                log_norm: 0.0,
                ln_sigma_sum: 0.0,
                half_int: 0.0,
                control: Vec::new(),
                clamped: 0,
                summary: PosteriorSummary { mean: vec![config.x0_mean], variance: vec![config.x0_var] },
                pi_h: vec![0.0; p],
                h_own: None,
                scratch: FpScratch::default(),
                dy: vec![0.0; p],
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;

    let mut prior = prior0.clone();
    let mut prior_scratch = FpScratch::default();
    let mut run = EnsembleRun {
        model_name: model.name().to_string(),
        config: config.clone(),
        times: Vec::new(),
        samples: Vec::new(),
        priors: Vec::new(),
        steady_state: steady_state.clone(),
        mean_posteriors: Vec::new(),
        final_posteriors: Vec::new(),
        mean_control: Vec::new(),
        vbar_faces: Vec::new(),
        clamp_count: 0,
        ledger: InfoLedger::default(),
    };
    let mut shared_rows = Vec::new();

    for k in 0..=steps {
        let t = k as f64 * dt;

        // Posterior moments, controls, observation tables and π(h).
        states.par_iter_mut().for_each(|s| {
            let (mean, var) = moments(&grid, &s.post);
            s.summary = PosteriorSummary { mean: vec![mean], variance: vec![var] };
            if let Some(pol) = policy {
                let (beta, clamped) = pol.apply(t, &s.summary);
                s.control = beta;
                s.clamped += clamped as usize;
            }
            if y_dependent {
                let mut table = vec![0.0; n_cells * p];
                for (i, chunk) in table.chunks_mut(p).enumerate() {
                    model.observe_into(&[grid.center(i)], &s.stepper.y, chunk);
                }
                s.h_own = Some(table);
            }
            let h = s.h_own.as_deref().unwrap_or(&h_shared);
            for c in 0..p {
                s.pi_h[c] = s.post.iter().enumerate().map(|(i, v)| v * h[i * p + c]).sum::<f64>() * grid.dx();
            }
        });

        // Mean drift and the operators for this step.
        let common_control = match policy {
            None => Some(Vec::new()),
            Some(_) => {
                let first = &states[0].control;
                states.iter().all(|s| s.control == *first).then(|| first.clone())
            }
        };
        let prior_op = match &common_control {
            Some(c) if c.is_empty() => base_op.clone(),
            Some(c) => FpOperator::from_parts(grid, face_drifts(model, &grid, c), sigma.clone()),
            None => {
                let mut vbar = vec![0.0; n_cells + 1];
                for s in &states {
                    for (i, v) in vbar.iter_mut().enumerate() {
                        *v += model.drift_1d(grid.face(i), &s.control);
                    }
                }
                vbar.iter_mut().for_each(|v| *v /= n as f64);
                FpOperator::from_parts(grid, vbar, sigma.clone())
            }
        };

        if k % config.sample_stride == 0 {
            run.times.push(t);
            shared_rows.push(SharedRow::compute(model, &prior, &prior_op, &steady_state, &sigma));
            let row: Vec<TrajSample> = states.par_iter().map(|s| sample(model, &grid, s, &prior)).collect();
            run.samples.push(row);
            run.priors.push(prior.clone());
            run.vbar_faces.push(prior_op.face_drift().to_vec());
            if policy.is_some() {
                let m = states[0].control.len();
                let mut mean = vec![0.0; m];
                for s in &states {
                    for (a, b) in mean.iter_mut().zip(&s.control) {
                        *a += b;
                    }
                }
                mean.iter_mut().for_each(|a| *a /= n as f64);
                run.mean_control.push(mean);
            }
            if config.keep_mean_posteriors {
                let mut mean = vec![0.0; n_cells];
                for s in &states {
                    for (a, b) in mean.iter_mut().zip(&s.post) {
                        *a += b;
                    }
                }
                mean.iter_mut().for_each(|a| *a /= n as f64);
                run.mean_posteriors.push(mean);
            }
        }
        if k == steps {
            break;
        }

        prior_op.advance(&mut prior.values, dt, &mut prior_scratch)?;

        let shared_filter_op = common_control.is_some().then_some(&prior_op);
        states
            .par_iter_mut()
            .map(|s| -> Result<(), MetricsError> {
                let control: &[f64] = &s.control;
                let ctl_copy;
                s.stepper.step(model, control, dt, t, &mut s.dy)?;
                let own_op;
                let op = match shared_filter_op {
                    Some(op) => op,
                    None => {
                        ctl_copy = s.control.clone();
                        own_op = FpOperator::from_parts(grid, face_drifts(model, &grid, &ctl_copy), sigma.clone());
                        &own_op
                    }
                };
                let h = s.h_own.as_deref().unwrap_or(&h_shared);
                let log_mass = zakai_step_normalized(op, h, &mut s.post, &s.dy, dt, &mut s.scratch)?;
                s.log_norm += log_mass;
                let mut pi_dy = 0.0;
                let mut pi2 = 0.0;
                for c in 0..p {
                    pi_dy += s.pi_h[c] * s.dy[c];
                    pi2 += s.pi_h[c] * s.pi_h[c];
                }
                s.ln_sigma_sum += pi_dy - 0.5 * pi2 * dt;
                s.half_int += 0.5 * pi2 * dt;
                Ok(())
            })
            .collect::<Result<Vec<()>, MetricsError>>()?;
    }

    run.clamp_count = states.iter().map(|s| s.clamped).sum();
    if config.keep_final_posteriors {
        run.final_posteriors = states.iter().map(|s| s.post.clone()).collect();
    }
    run.ledger = build_ledger(model, config, &run.times, &shared_rows, &run.samples);
    Ok(run)
}

fn sample(model: &DiffusionModel, grid: &Grid1D, s: &TrajState, prior: &GridDensity) -> TrajSample {
    let x = s.stepper.x[0];
    let p = model.dim_obs();
    let post = GridDensity { grid: *grid, values: s.post.clone(), normalized: true, log_norm: s.log_norm };
    let h_x = model.observe(&[x], &s.stepper.y);
    let eps2: f64 = (0..p).map(|c| (h_x[c] - s.pi_h[c]).powi(2)).sum();
    let post_at = post.eval_at(x);
    let prior_at = prior.eval_at(x);
    let excluded =
        !grid.contains(x) || !(post_at > SCORE_GATE * post.max_value()) || !(prior_at > SCORE_GATE * prior.max_value());
    let (ln_post, ln_prior, score_post, score_prior) = if excluded {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            post.log_eval_at(x).unwrap_or(f64::NAN),
            prior.log_eval_at(x).unwrap_or(f64::NAN),
            post.score_at(x).unwrap_or(f64::NAN),
            prior.score_at(x).unwrap_or(f64::NAN),
        )
    };
    TrajSample {
        x,
        excluded,
        ln_post,
        ln_prior,
        log_norm: s.log_norm,
        ln_sigma_sum: s.ln_sigma_sum,
        half_int_pi_h2: s.half_int,
        eps2,
        score_post,
        score_prior,
        sigma_x: model.sigma_1d(x),
        post_mean: s.summary.mean[0],
        post_var: s.summary.variance[0],
        control: s.control.clone(),
    }
}
