use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64]) -> DVector<f64> + Send + Sync;
type HessianFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

const DEFAULT_STEP: f64 = 1e-5;

/// A scalar test function with optional analytic derivatives.
///
/// Missing gradients and hessians fall back to second-order central
/// differences with `step`.
#[derive(Clone)]
pub struct SmoothField {
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradientFn>>,
    hessian: Option<Arc<HessianFn>>,
    step: f64,
}

impl SmoothField {
    pub fn new<F>(value: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { value: Arc::new(value), gradient: None, hessian: None, step: DEFAULT_STEP }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_hessian<H>(mut self, hessian: H) -> Self
    where
        H: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    /// The coordinate function `x ↦ x[i]` in dimension `n`.
    pub fn coordinate(i: usize, n: usize) -> Self {
        Self::new(move |x| x[i])
            .with_gradient(move |_| {
                let mut g = DVector::zeros(n);
                g[i] = 1.0;
                g
            })
            .with_hessian(move |_| DMatrix::zeros(n, n))
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        if let Some(g) = &self.gradient {
            return g(x);
        }
        self.fd_gradient(x)
    }

    /// Central-difference gradient regardless of analytic availability.
    pub fn fd_gradient(&self, x: &[f64]) -> DVector<f64> {
        let h = self.step;
        let mut xp = x.to_vec();
        DVector::from_fn(x.len(), |i, _| {
            xp[i] = x[i] + h;
            let fp = (self.value)(&xp);
            xp[i] = x[i] - h;
            let fm = (self.value)(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(hs) = &self.hessian {
            return hs(x);
        }
        let n = x.len();
        let h = self.step.max(1e-4);
        let mut xp = x.to_vec();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut eval = |di: f64, dj: f64| {
                    xp.copy_from_slice(x);
                    xp[i] += di;
                    xp[j] += dj;
                    (self.value)(&xp)
                };
                out[(i, j)] = (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h);
            }
        }
        out
    }

    /// `a·f + b·g`, with analytic derivatives when both sides have them.
    pub fn linear_combination(a: f64, f: &SmoothField, b: f64, g: &SmoothField) -> SmoothField {
        let (fv, gv) = (f.value.clone(), g.value.clone());
        let mut out = SmoothField::new(move |x| a * fv(x) + b * gv(x)).with_step(f.step.min(g.step));
        if let (Some(fg), Some(gg)) = (f.gradient.clone(), g.gradient.clone()) {
            out = out.with_gradient(move |x| fg(x) * a + gg(x) * b);
        }
        if let (Some(fh), Some(gh)) = (f.hessian.clone(), g.hessian.clone()) {
            out = out.with_hessian(move |x| fh(x) * a + gh(x) * b);
        }
        out
    }

    /// Pointwise product `f·g` (product rule for the gradient).
    pub fn product(f: &SmoothField, g: &SmoothField) -> SmoothField {
        let (fv, gv) = (f.value.clone(), g.value.clone());
        let mut out = SmoothField::new(move |x| fv(x) * gv(x)).with_step(f.step.min(g.step));
        if let (Some(fg), Some(gg)) = (f.gradient.clone(), g.gradient.clone()) {
            let (fv, gv) = (f.value.clone(), g.value.clone());
            out = out.with_gradient(move |x| fg(x) * gv(x) + gg(x) * fv(x));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_gradient_is_second_order() {
        let f = SmoothField::new(|x| (x[0] * 1.3).sin() * x[1].exp()).with_gradient(|x| {
            DVector::from_vec(vec![1.3 * (1.3 * x[0]).cos() * x[1].exp(), (1.3 * x[0]).sin() * x[1].exp()])
        });
        let x = [0.4, -0.2];
        let exact = f.gradient(&x);
        let mut errs = Vec::new();
        for h in [1e-2, 5e-3] {
            let g = f.clone().with_step(h).fd_gradient(&x);
            errs.push((g - &exact).amax());
        }
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn product_rule_matches_fd() {
        let f = SmoothField::new(|x| x[0] * x[0]).with_gradient(|x| DVector::from_element(1, 2.0 * x[0]));
        let g = SmoothField::new(|x| x[0].sin()).with_gradient(|x| DVector::from_element(1, x[0].cos()));
        let p = SmoothField::product(&f, &g);
        let x = [0.7];
        assert!((p.gradient(&x)[0] - p.fd_gradient(&x)[0]).abs() < 1e-8);
    }
}
