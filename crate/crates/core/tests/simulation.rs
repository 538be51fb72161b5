use infoflow::diffusion::{presets, simulate_joint, DiffusionModel, InitialDistribution, PathStepper, SimulationError};
use infoflow::metrics::Estimate;

fn terminal_states(model: &DiffusionModel, x0: f64, n: u64, steps: usize, dt: f64, seed: u64) -> Vec<f64> {
    let mut dy = vec![0.0; model.dim_obs()];
    (0..n)
        .map(|i| {
            let mut s = PathStepper::new(model, vec![x0], seed, i);
            for k in 0..steps {
                s.step(model, &[], dt, k as f64 * dt, &mut dy).unwrap();
            }
            s.x[0]
        })
        .collect()
}

#[test]
fn brownian_terminal_variance_is_sigma_t() {
    let sigma = 0.7;
    let m = presets::brownian(sigma, 0.0);
    let xs = terminal_states(&m, 0.0, 100_000, 50, 0.02, 11);
    // E[X²] with known zero mean; SE from the sample of X².
    let sq = Estimate::from_samples(xs.iter().map(|x| x * x));
    assert!(sq.within(sigma * 1.0, 3.0), "{} ± {}", sq.mean, sq.se);
    let mean = Estimate::from_samples(xs.iter().copied());
    assert!(mean.within(0.0, 3.0));
}

#[test]
fn ou_terminal_moments_follow_the_euler_recursion() {
    // Exact for the discrete scheme: m_k = (1 − a dt)^k x0,
    // v_{k+1} = (1 − a dt)² v_k + Σ dt.
    let (a, sigma, dt, steps) = (1.5, 0.8, 0.01, 100);
    let m = presets::ou(a, sigma, 0.0);
    let xs = terminal_states(&m, 1.0, 50_000, steps, dt, 5);
    let r = 1.0 - a * dt;
    let mean_oracle = r.powi(steps as i32);
    let mut v = 0.0;
    for _ in 0..steps {
        v = r * r * v + sigma * dt;
    }
    let mean = Estimate::from_samples(xs.iter().copied());
    assert!(mean.within(mean_oracle, 3.0), "{} vs {mean_oracle}", mean.mean);
    let centred = Estimate::from_samples(xs.iter().map(|x| (x - mean_oracle).powi(2)));
    assert!(centred.within(v, 3.0), "{} ± {} vs {v}", centred.mean, centred.se);
}

#[test]
fn observation_increments_carry_the_signal() {
    // With X ≡ x0 (Σ = 0) ΔY ~ N(c x0 dt, dt).
    let m = presets::lqg_scalar(0.0, 0.0, 2.0);
    let path = simulate_joint(&m, &InitialDistribution::Point(vec![1.5]), 20.0, 1e-3, 3, 0).unwrap();
    assert!(path.states.iter().all(|x| x[0] == 1.5));
    let rate = Estimate::from_samples(path.obs_increments.iter().map(|d| d[0] / 1e-3));
    assert!(rate.within(3.0, 3.0), "{} ± {}", rate.mean, rate.se);
    let var = Estimate::from_samples(path.obs_increments.iter().map(|d| (d[0] - 3.0e-3).powi(2) / 1e-3));
    assert!(var.within(1.0, 3.0));
    for k in 0..path.n_steps() {
        assert_eq!(path.observations[k + 1][0] - path.observations[k][0], path.obs_increments[k][0]);
    }
}

#[test]
fn same_seed_same_path_different_index_different_path() {
    let m = presets::double_well(1.0, 0.5, 1.0);
    let x0 = InitialDistribution::scalar_gaussian(0.0, 0.25);
    let a = simulate_joint(&m, &x0, 1.0, 1e-3, 42, 7).unwrap();
    let b = simulate_joint(&m, &x0, 1.0, 1e-3, 42, 7).unwrap();
    let c = simulate_joint(&m, &x0, 1.0, 1e-3, 42, 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.states, c.states);
    assert_eq!(a.times.len(), 1001);
    assert!((a.times[1000] - 1.0).abs() < 1e-15);
}

#[test]
fn zero_diffusion_is_deterministic_ode() {
    let m = presets::ou(2.0, 0.0, 0.0);
    let p = simulate_joint(&m, &InitialDistribution::Point(vec![1.0]), 1.0, 1e-3, 1, 0).unwrap();
    let euler = (1.0 - 2e-3f64).powi(1000);
    assert!((p.states[1000][0] - euler).abs() < 1e-14);
}

#[test]
fn bad_inputs_are_rejected() {
    let m = presets::brownian(1.0, 1.0);
    let x0 = InitialDistribution::Point(vec![0.0]);
    assert!(matches!(simulate_joint(&m, &x0, 1.0, 0.0, 1, 0), Err(SimulationError::BadStep(_))));
    assert!(matches!(simulate_joint(&m, &x0, 1.0, -1e-3, 1, 0), Err(SimulationError::BadStep(_))));
    assert!(matches!(simulate_joint(&m, &x0, 1e-4, 1e-3, 1, 0), Err(SimulationError::ShortHorizon { .. })));
    let wrong = InitialDistribution::Point(vec![0.0, 0.0]);
    assert!(matches!(simulate_joint(&m, &wrong, 1.0, 1e-3, 1, 0), Err(SimulationError::DimensionMismatch { .. })));
}

#[test]
fn explosive_drift_reports_blow_up() {
    let m = DiffusionModel::builder("cubic", 1, 1, 1)
        .drift(|x, _b, out| out[0] = x[0] * x[0] * x[0])
        .domain(vec![(-1.0, 1.0)])
        .build()
        .unwrap();
    let r = simulate_joint(&m, &InitialDistribution::Point(vec![2.0]), 5.0, 1e-2, 1, 0);
    assert!(matches!(r, Err(SimulationError::BlowUp { trajectory: 0, .. })), "{r:?}");
}
