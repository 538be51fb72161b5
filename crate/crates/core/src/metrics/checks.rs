use rand::Rng;

use super::ensemble::EnsembleRun;
use crate::rng::{substream, Channel};

/// Ensemble-mean posterior against the Fokker–Planck density at the final
/// time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerCheck {
    /// `‖mean ρ̂_T − ρ_T‖₁`.
    pub l1: f64,
    /// `L¹` norm of the per-cell bootstrap standard errors of `mean ρ̂_T`.
    pub l1_se: f64,
}

impl TowerCheck {
    pub fn passes(&self, k: f64) -> bool {
        self.l1 <= k * self.l1_se
    }
}

/// Bootstrap check of `𝔼[ρ̂_T] = ρ_T` with `resamples` draws over
/// trajectories. Requires a run with `keep_final_posteriors`.
pub fn tower_property(run: &EnsembleRun, resamples: usize) -> Option<TowerCheck> {
    let posts = &run.final_posteriors;
    let n = posts.len();
    if n < 2 || resamples < 2 {
        return None;
    }
    let prior = run.priors.last()?;
    let cells = prior.values.len();
    let dx = prior.dx();
    let mut mean = vec![0.0; cells];
    for p in posts {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let l1 = mean.iter().zip(&prior.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx;

    let mut rng = substream(run.config.seed, 0, Channel::Auxiliary);
    let mut sum = vec![0.0; cells];
    let mut sum2 = vec![0.0; cells];
    let mut boot = vec![0.0; cells];
    for _ in 0..resamples {
        boot.iter_mut().for_each(|b| *b = 0.0);
        for _ in 0..n {
            let k = rng.random_range(0..n);
            for (b, v) in boot.iter_mut().zip(&posts[k]) {
                *b += v;
            }
        }
        for c in 0..cells {
            let m = boot[c] / n as f64;
            sum[c] += m;
            sum2[c] += m * m;
        }
    }
    let b = resamples as f64;
    let l1_se = (0..cells)
        .map(|c| {
            let m = sum[c] / b;
            ((sum2[c] / b - m * m).max(0.0) * b / (b - 1.0)).sqrt()
        })
        .sum::<f64>()
        * dx;
    Some(TowerCheck { l1, l1_se })
}
