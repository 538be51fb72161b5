use super::GridError;

/// Floor applied before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;
/// Score-type integrands only count cells with `ρ > SCORE_GATE·max ρ`.
pub const SCORE_GATE: f64 = 1e-12;

/// Uniform cell-centred grid on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self, GridError> {
        if n_cells < 16 {
            return Err(GridError::TooFewCells(n_cells));
        }
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(GridError::BadBounds(x_min, x_max));
        }
        Ok(Self { x_min, x_max, n_cells })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    /// Face `i` sits between cells `i − 1` and `i`; faces run `0..=n_cells`.
    #[inline]
    pub fn face(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Linear interpolation weights between neighbouring centres, clamped to
    /// the end cells. `None` outside the box.
    #[inline]
    pub(crate) fn locate(&self, x: f64) -> Option<(usize, usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let s = (x - self.x_min) / self.dx() - 0.5;
        let n = self.n_cells;
        if s <= 0.0 {
            return Some((0, 0, 0.0));
        }
        let i = s.floor() as usize;
        if i >= n - 1 {
            return Some((n - 1, n - 1, 0.0));
        }
        Some((i, i + 1, s - i as f64))
    }

    /// Linearly interpolates cell values at `x`; `None` outside the box.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Option<f64> {
        self.locate(x).map(|(i, j, w)| (1.0 - w) * values[i] + w * values[j])
    }
}

/// Result of a relative-entropy evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    /// Mass of the first density where the second vanishes.
    Infinite,
}

impl Divergence {
    pub fn value(self) -> f64 {
        match self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }
}

/// Cell averages of a density on a [`Grid1D`].
///
/// Used both for normalised densities and for unnormalised Zakai densities;
/// in the latter case the represented function is `values · exp(log_norm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub normalized: bool,
    /// Accumulated `ln σ_t(1)` when the density tracks a Zakai filter.
    pub log_norm: f64,
}

impl GridDensity {
    pub fn from_values(grid: Grid1D, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.n_cells() {
            return Err(GridError::Length { expected: grid.n_cells(), got: values.len() });
        }
        Ok(Self { grid, values, normalized: false, log_norm: 0.0 })
    }

    /// Samples `f` at the cell centres and rescales to unit mass.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.centers().into_iter().map(f).collect();
        let mut d = Self { grid, values, normalized: false, log_norm: 0.0 };
        d.rescale_to_unit_mass();
        d
    }

    /// Builds a normalised density from centre values of `ln ρ` (up to a
    /// constant), without underflow for large exponents.
    pub fn from_log_values(grid: Grid1D, log_values: &[f64]) -> Self {
        let top = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let values = log_values.iter().map(|l| (l - top).exp()).collect();
        let mut d = Self { grid, values, normalized: false, log_norm: 0.0 };
        d.rescale_to_unit_mass();
        d
    }

    pub fn gaussian(grid: Grid1D, mean: f64, var: f64) -> Self {
        let logs: Vec<f64> = grid.centers().iter().map(|x| -0.5 * (x - mean) * (x - mean) / var).collect();
        Self::from_log_values(grid, &logs)
    }

    fn rescale_to_unit_mass(&mut self) {
        let m = self.mass();
        for v in &mut self.values {
            *v /= m;
        }
        self.normalized = true;
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    /// `Σ ρ_i dx`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        let dx = self.dx();
        let num: f64 = self.values.iter().enumerate().map(|(i, v)| v * self.grid.center(i)).sum();
        num * dx / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let dx = self.dx();
        let num: f64 = self.values.iter().enumerate().map(|(i, v)| v * (self.grid.center(i) - m).powi(2)).sum();
        num * dx / self.mass()
    }

    /// `∫ f ρ dx / ∫ ρ dx`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let num: f64 = self.values.iter().enumerate().map(|(i, v)| v * f(self.grid.center(i))).sum();
        num * self.dx() / self.mass()
    }

    /// Shannon entropy `−Σ ρ ln ρ dx`, with `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self.values.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>() * self.dx()
    }

    /// `ln max(ρ, floor)` per cell.
    pub fn log_values(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v.max(DENSITY_FLOOR).ln()).collect()
    }

    /// `∂ₓ ln ρ` at cell centres: central differences inside, one-sided at
    /// the two end cells.
    pub fn score_field(&self) -> Vec<f64> {
        let l = self.log_values();
        let n = l.len();
        let dx = self.dx();
        let mut s = vec![0.0; n];
        s[0] = (l[1] - l[0]) / dx;
        s[n - 1] = (l[n - 1] - l[n - 2]) / dx;
        for i in 1..n - 1 {
            s[i] = (l[i + 1] - l[i - 1]) / (2.0 * dx);
        }
        s
    }

    /// Linear interpolation of the cell values; zero outside the box.
    pub fn eval_at(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.values, x).unwrap_or(0.0)
    }

    /// Linear interpolation of `ln ρ`; `None` outside the box.
    pub fn log_eval_at(&self, x: f64) -> Option<f64> {
        let (i, j, w) = self.grid.locate(x)?;
        let li = self.values[i].max(DENSITY_FLOOR).ln();
        let lj = self.values[j].max(DENSITY_FLOOR).ln();
        Some((1.0 - w) * li + w * lj)
    }

    /// Entry `i` of [`score_field`](Self::score_field), computed locally.
    pub fn score_cell(&self, i: usize) -> f64 {
        let n = self.values.len();
        let l = |k: usize| self.values[k].max(DENSITY_FLOOR).ln();
        let dx = self.dx();
        if i == 0 {
            (l(1) - l(0)) / dx
        } else if i == n - 1 {
            (l(n - 1) - l(n - 2)) / dx
        } else {
            (l(i + 1) - l(i - 1)) / (2.0 * dx)
        }
    }

    /// Score interpolated linearly between cell centres; `None` outside
    /// the box.
    pub fn score_at(&self, x: f64) -> Option<f64> {
        let (i, j, w) = self.grid.locate(x)?;
        Some((1.0 - w) * self.score_cell(i) + w * self.score_cell(j))
    }

    /// `Σ ρ s Σ s dx` over gated cells, for centre values of `Σ`.
    pub fn fisher_trace(&self, sigma: &[f64]) -> f64 {
        let s = self.score_field();
        let gate = SCORE_GATE * self.max_value();
        let sum: f64 = (0..self.values.len())
            .filter(|&i| self.values[i] > gate)
            .map(|i| self.values[i] * s[i] * s[i] * sigma[i])
            .sum();
        sum * self.dx() / self.mass()
    }

    /// `D(self ‖ other) = Σ ρ ln(ρ/q) dx`.
    pub fn kl_against(&self, other: &GridDensity) -> Result<Divergence, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let mut sum = 0.0;
        for (&p, &q) in self.values.iter().zip(&other.values) {
            if p <= 0.0 {
                continue;
            }
            if q <= 0.0 {
                return Ok(Divergence::Infinite);
            }
            sum += p * (p / q).ln();
        }
        Ok(Divergence::Finite(sum * self.dx()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn grid(n: usize) -> Grid1D {
        Grid1D::new(-8.0, 8.0, n).unwrap()
    }

    #[test]
    fn rejects_small_grids() {
        assert_eq!(Grid1D::new(0.0, 1.0, 8), Err(GridError::TooFewCells(8)));
        assert!(Grid1D::new(1.0, 1.0, 32).is_err());
    }

    #[test]
    fn gaussian_entropy_and_score() {
        let d = GridDensity::gaussian(grid(512), 0.0, 1.0);
        assert!((d.entropy() - 0.5 * (2.0 * PI * E).ln()).abs() < 1e-4);
        let d = GridDensity::gaussian(grid(512), 0.5, 2.0);
        let s = d.score_field();
        for i in [0, 100, 256, 400, 511] {
            assert_eq!(s[i], d.score_cell(i));
        }
        for i in [100, 256, 400] {
            let x = d.grid.center(i);
            assert!((s[i] + (x - 0.5) / 2.0).abs() < 1e-10);
        }
        assert!((d.score_at(0.123).unwrap() + (0.123 - 0.5) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn kl_conventions() {
        let g = grid(64);
        let a = GridDensity::gaussian(g, 0.0, 1.0);
        assert_eq!(a.kl_against(&a).unwrap(), Divergence::Finite(0.0));
        let mut b = a.clone();
        b.values[10] = 0.0;
        assert_eq!(a.kl_against(&b).unwrap(), Divergence::Infinite);
        let other = GridDensity::gaussian(Grid1D::new(-8.0, 8.0, 32).unwrap(), 0.0, 1.0);
        assert_eq!(a.kl_against(&other), Err(GridError::GridMismatch));
    }

    #[test]
    fn interpolation_is_zero_outside() {
        let d = GridDensity::gaussian(grid(64), 0.0, 1.0);
        assert_eq!(d.eval_at(9.0), 0.0);
        assert!(d.eval_at(0.0) > 0.39);
        assert_eq!(d.eval_at(d.grid.center(20)), d.values[20]);
    }
}
