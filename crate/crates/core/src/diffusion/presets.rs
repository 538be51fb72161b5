//! Named model presets used by configs and tests.
//!
//! Every preset accepts a control vector of the state dimension; a
//! non-empty control is added to the drift.

use nalgebra::DMatrix;

use super::DiffusionModel;

fn add_control(control: &[f64], out: &mut [f64]) {
    for (o, b) in out.iter_mut().zip(control) {
        *o += b;
    }
}

/// Scalar Brownian motion with `Σ = sigma` observed through `h(x) = obs_gain·x`.
pub fn brownian(sigma: f64, obs_gain: f64) -> DiffusionModel {
    let b = sigma.sqrt();
    DiffusionModel::builder("brownian", 1, 1, 1)
        .drift(|_x, ctl, out| {
            out[0] = 0.0;
            add_control(ctl, out);
        })
        .diffusion(move |_x, out| out[(0, 0)] = b)
        .observation(move |x, out| out[0] = obs_gain * x[0])
        .constant_diffusion(true)
        .control_dim(1)
        .domain(vec![(-10.0, 10.0)])
        .build()
        .expect("brownian preset is well formed")
}

/// Scalar Ornstein–Uhlenbeck process `v = −a x`, constant `Σ = sigma`,
/// observed through `h(x) = obs_gain·x`. The domain is the stationary
/// mean ± 6 stationary standard deviations (when `a > 0`).
pub fn ou(a: f64, sigma: f64, obs_gain: f64) -> DiffusionModel {
    let b = sigma.sqrt();
    let half = if a > 0.0 && sigma > 0.0 { 6.0 * (sigma / (2.0 * a)).sqrt() } else { 10.0 };
    DiffusionModel::builder("ou", 1, 1, 1)
        .drift(move |x, ctl, out| {
            out[0] = -a * x[0];
            add_control(ctl, out);
        })
        .diffusion(move |_x, out| out[(0, 0)] = b)
        .observation(move |x, out| out[0] = obs_gain * x[0])
        .constant_diffusion(true)
        .control_dim(1)
        .domain(vec![(-half, half)])
        .build()
        .expect("ou preset is well formed")
}

/// Linear model `v = A x + β`, diffusion factor `B`, observation `h = C x`.
pub fn lqg(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> DiffusionModel {
    let n = a.nrows();
    assert!(a.is_square() && b.nrows() == n && c.ncols() == n, "lqg preset: inconsistent matrix shapes");
    let (r, p) = (b.ncols(), c.nrows());
    let s: f64 = b.row(0).iter().map(|v| v * v).sum();
    let half = if n == 1 && a[(0, 0)] < 0.0 && s > 0.0 { 6.0 * (s / (-2.0 * a[(0, 0)])).sqrt() } else { 10.0 };
    DiffusionModel::builder("lqg", n, r, p)
        .drift(move |x, ctl, out| {
            for i in 0..n {
                out[i] = (0..n).map(|j| a[(i, j)] * x[j]).sum();
            }
            add_control(ctl, out);
        })
        .diffusion(move |_x, out| out.copy_from(&b))
        .observation(move |x, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = (0..n).map(|j| c[(i, j)] * x[j]).sum();
            }
        })
        .constant_diffusion(true)
        .control_dim(n)
        .domain(vec![(-half, half); n])
        .build()
        .expect("lqg preset is well formed")
}

/// Scalar linear model from scalars `a`, `Σ`, `c`.
pub fn lqg_scalar(a: f64, sigma: f64, c: f64) -> DiffusionModel {
    lqg(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, sigma.sqrt()), DMatrix::from_element(1, 1, c))
}

/// Double well `v = scale·(x − x³)`, constant `Σ = sigma`, `h(x) = obs_gain·x`.
pub fn double_well(scale: f64, sigma: f64, obs_gain: f64) -> DiffusionModel {
    let b = sigma.sqrt();
    DiffusionModel::builder("double_well", 1, 1, 1)
        .drift(move |x, ctl, out| {
            out[0] = scale * (x[0] - x[0] * x[0] * x[0]);
            add_control(ctl, out);
        })
        .diffusion(move |_x, out| out[(0, 0)] = b)
        .observation(move |x, out| out[0] = obs_gain * x[0])
        .constant_diffusion(true)
        .control_dim(1)
        .domain(vec![(-2.5, 2.5)])
        .build()
        .expect("double_well preset is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_enters_additively() {
        let m = double_well(1.0, 0.5, 1.0);
        assert_eq!(m.drift_1d(2.0, &[]), -6.0);
        assert_eq!(m.drift_1d(2.0, &[0.5]), -5.5);
        let m = lqg_scalar(-1.0, 2.0, 1.0);
        assert_eq!(m.drift_1d(0.5, &[0.25]), -0.25);
        assert!((m.sigma_1d(0.0) - 2.0).abs() < 1e-15);
        assert_eq!(m.observe(&[3.0], &[]).as_slice(), &[3.0]);
    }

    #[test]
    fn ou_domain_is_six_sigma() {
        let m = ou(1.0, 2.0, 0.0);
        let (lo, hi) = m.domain()[0];
        assert!((hi - 6.0).abs() < 1e-15 && (lo + 6.0).abs() < 1e-15);
    }
}
