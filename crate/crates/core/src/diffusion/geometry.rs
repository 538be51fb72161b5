//! Generator geometry: `Σ`, the co-metric `Γ`, and the corrected velocity `u`.

use nalgebra::{DMatrix, DVector};

use super::{DiffusionModel, SmoothField};

/// `Σ(x) = B(x)B(x)ᵀ`.
pub fn sigma_at(model: &DiffusionModel, x: &[f64]) -> DMatrix<f64> {
    model.sigma(x)
}

/// The co-metric `Γ(f, g)(x) = (∇f)ᵀ Σ (∇g)`.
pub fn gamma(model: &DiffusionModel, f: &SmoothField, g: &SmoothField, x: &[f64]) -> f64 {
    let sigma = model.sigma(x);
    let gf = f.gradient(x);
    let gg = g.gradient(x);
    gf.dot(&(sigma * gg))
}

/// Column `j` of `∂Σ/∂xʲ` contracted: `(∇·Σ)ⁱ = Σ_j ∂Σⁱʲ/∂xʲ`.
fn sigma_divergence(model: &DiffusionModel, x: &[f64]) -> DVector<f64> {
    let n = model.dim_state();
    if model.has_constant_diffusion() {
        return DVector::zeros(n);
    }
    let h = model.derivative_step();
    let mut xp = x.to_vec();
    let mut div = DVector::zeros(n);
    for j in 0..n {
        xp[j] = x[j] + h;
        let sp = model.sigma(&xp);
        xp[j] = x[j] - h;
        let sm = model.sigma(&xp);
        xp[j] = x[j];
        for i in 0..n {
            div[i] += (sp[(i, j)] - sm[(i, j)]) / (2.0 * h);
        }
    }
    div
}

/// `uⁱ = vⁱ − ½ ∂Σⁱʲ/∂xʲ` for the uncontrolled drift.
pub fn u_field(model: &DiffusionModel, x: &[f64]) -> DVector<f64> {
    model.drift(x, &[]) - sigma_divergence(model, x) * 0.5
}

/// `∇·v(x, β)` by central differences.
pub fn divergence_drift(model: &DiffusionModel, x: &[f64], control: &[f64]) -> f64 {
    let n = model.dim_state();
    let h = model.derivative_step();
    let mut xp = x.to_vec();
    let mut vp = vec![0.0; n];
    let mut vm = vec![0.0; n];
    let mut div = 0.0;
    for i in 0..n {
        xp[i] = x[i] + h;
        model.drift_into(&xp, control, &mut vp);
        xp[i] = x[i] - h;
        model.drift_into(&xp, control, &mut vm);
        xp[i] = x[i];
        div += (vp[i] - vm[i]) / (2.0 * h);
    }
    div
}

/// `∇·u = ∇·v − ½ ∂ᵢ∂ⱼΣⁱʲ` for the uncontrolled drift.
pub fn divergence_u(model: &DiffusionModel, x: &[f64]) -> f64 {
    let div_v = divergence_drift(model, x, &[]);
    if model.has_constant_diffusion() {
        return div_v;
    }
    let n = model.dim_state();
    let h = model.derivative_step().max(1e-4);
    let mut xp = x.to_vec();
    let mut second = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut eval = |di: f64, dj: f64| {
                xp.copy_from_slice(x);
                xp[i] += di;
                xp[j] += dj;
                model.sigma(&xp)[(i, j)]
            };
            second += (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h);
        }
    }
    div_v - 0.5 * second
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::presets;
    use nalgebra::dmatrix;

    fn constant_b(b: DMatrix<f64>) -> DiffusionModel {
        let (n, r) = b.shape();
        DiffusionModel::builder("const", n, r, 1)
            .diffusion(move |_x, out| out.copy_from(&b))
            .constant_diffusion(true)
            .domain(vec![(-5.0, 5.0); n])
            .build()
            .unwrap()
    }

    #[test]
    fn sigma_examples() {
        let m = constant_b(dmatrix![2f64.sqrt()]);
        assert!((sigma_at(&m, &[0.3])[(0, 0)] - 2.0).abs() < 1e-15);
        let m = constant_b(dmatrix![1.0, 0.0; 1.0, 1.0]);
        assert_eq!(sigma_at(&m, &[0.0, 0.0]), dmatrix![1.0, 1.0; 1.0, 2.0]);
        let dw = presets::double_well(1.0, 0.5, 1.0);
        for x in [-1.5, 0.0, 0.7] {
            assert!((dw.sigma_1d(x) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_examples() {
        let m = constant_b(dmatrix![2f64.sqrt()]);
        let id = SmoothField::coordinate(0, 1);
        for x in [-1.0, 0.0, 2.5] {
            assert!((gamma(&m, &id, &id, &[x]) - 2.0).abs() < 1e-12);
        }
        let unit = constant_b(dmatrix![1.0]);
        let sq = SmoothField::new(|x| x[0] * x[0]).with_gradient(|x| DVector::from_element(1, 2.0 * x[0]));
        assert!((gamma(&unit, &sq, &id, &[3.0]) - 6.0).abs() < 1e-12);
        let gh = SmoothField::product(&id, &id);
        let lhs = gamma(&unit, &id, &gh, &[2.0]);
        let rhs = gamma(&unit, &id, &id, &[2.0]) * 2.0 + 2.0 * gamma(&unit, &id, &id, &[2.0]);
        assert!((lhs - 4.0).abs() < 1e-12 && (lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn u_field_examples() {
        let ou = presets::ou(1.0, 2.0, 1.0);
        assert!((u_field(&ou, &[0.8])[0] + 0.8).abs() < 1e-12);
        let quad = DiffusionModel::builder("xsq", 1, 1, 1)
            .diffusion(|x, out| out[(0, 0)] = x[0])
            .domain(vec![(-3.0, 3.0)])
            .build()
            .unwrap();
        for x in [-1.2, 0.5, 2.0] {
            assert!((u_field(&quad, &[x])[0] + x).abs() < 1e-8);
            // ∇·u = 0 − ½ ∂²(x²) = −1
            assert!((divergence_u(&quad, &[x]) + 1.0).abs() < 1e-5);
        }
    }
}
