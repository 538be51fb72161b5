//! Plain-text run reports.

use std::fmt::Write as _;

use crate::metrics::{Estimate, InfoLedger};

/// One invariant evaluated at its worst ledger row.
#[derive(Debug, Clone, PartialEq)]
pub struct Invariant {
    pub name: String,
    pub t: f64,
    pub measured: f64,
    pub se: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub version: String,
    pub n_traj: usize,
    pub excluded: usize,
    pub exclusions_valid: bool,
    pub invariants: Vec<Invariant>,
    pub config_echo: String,
}

/// Picks the row maximising `score`; rows whose score is NaN are skipped.
fn worst<F>(ledger: &InfoLedger, score: F) -> Option<(&crate::metrics::LedgerRow, f64)>
where
    F: Fn(&crate::metrics::LedgerRow) -> f64,
{
    let scored: Vec<_> = ledger.rows.iter().map(|r| (r, score(r))).filter(|(_, s)| !s.is_nan()).collect();
    // Rows without spread (t = 0) only count when nothing else is left.
    let informative: Vec<_> = scored.iter().copied().filter(|(_, s)| *s != 0.0).collect();
    let pool = if informative.is_empty() { scored } else { informative };
    pool.into_iter().max_by(|a, b| a.1.total_cmp(&b.1))
}

fn one_sided(
    ledger: &InfoLedger,
    name: &str,
    k: f64,
    pick: impl Fn(&crate::metrics::LedgerRow) -> Estimate,
) -> Invariant {
    // Most negative mean relative to its SE.
    match worst(ledger, |r| {
        let e = pick(r);
        -e.mean / e.se.max(f64::MIN_POSITIVE)
    }) {
        Some((r, _)) => {
            let e = pick(r);
            Invariant {
                name: name.to_string(),
                t: r.t,
                measured: e.mean,
                se: e.se,
                tolerance: -k * e.se,
                pass: e.mean >= -k * e.se,
            }
        }
        None => Invariant {
            name: name.to_string(),
            t: f64::NAN,
            measured: f64::NAN,
            se: f64::NAN,
            tolerance: f64::NAN,
            pass: false,
        },
    }
}

fn two_sided(
    ledger: &InfoLedger,
    name: &str,
    k: f64,
    pick: impl Fn(&crate::metrics::LedgerRow) -> Estimate,
) -> Invariant {
    match worst(ledger, |r| {
        let e = pick(r);
        e.mean.abs() / e.se.max(f64::MIN_POSITIVE)
    }) {
        Some((r, _)) => {
            let e = pick(r);
            Invariant {
                name: name.to_string(),
                t: r.t,
                measured: e.mean,
                se: e.se,
                tolerance: k * e.se,
                pass: e.mean.abs() <= k * e.se,
            }
        }
        None => Invariant {
            name: name.to_string(),
            t: f64::NAN,
            measured: f64::NAN,
            se: f64::NAN,
            tolerance: f64::NAN,
            pass: false,
        },
    }
}

/// The ledger-level invariants, each with a `3·SE` allowance.
///
/// The two dissipation forms are compared with a conservative combined SE
/// `√(se_f² + se_g²)` (their per-trajectory samples are correlated).
pub fn ledger_invariants(ledger: &InfoLedger) -> Vec<Invariant> {
    let mut out = vec![
        two_sided(ledger, "mwz_residual |r| <= 3 se", 3.0, |r| r.mwz),
        one_sided(ledger, "S_rate >= -3 se", 3.0, |r| r.s_rate),
        one_sided(ledger, "D_rate_gamma >= -3 se", 3.0, |r| r.d_gamma),
        two_sided(ledger, "|D_rate_fisher - D_rate_gamma| <= 3 se", 3.0, |r| Estimate {
            mean: r.d_fisher.mean - r.d_gamma.mean,
            se: (r.d_fisher.se.powi(2) + r.d_gamma.se.powi(2)).sqrt(),
            n: r.d_fisher.n,
        }),
        one_sided(ledger, "I_mc >= -3 se", 3.0, |r| r.i_mc),
    ];
    // Rows at t = 0 carry no information and have zero spread.
    for inv in &mut out {
        if inv.se == 0.0 && inv.measured == 0.0 {
            inv.pass = true;
        }
    }
    out
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.exclusions_valid && self.invariants.iter().all(|i| i.pass)
    }

    /// Deterministic text; contains no timing information.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "infoflow {}", self.version);
        let _ = writeln!(s, "scenario: {}", self.scenario);
        let _ = writeln!(s, "trajectories: {}", self.n_traj);
        let _ = writeln!(
            s,
            "excluded (max over rows): {} [{}]",
            self.excluded,
            if self.exclusions_valid { "ok" } else { "INVALID: at least 0.1% of the ensemble" }
        );
        let _ = writeln!(s, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        let _ = writeln!(s, "\ninvariants:");
        for i in &self.invariants {
            let _ = writeln!(
                s,
                "  {} {:<40} t={:.6} measured={:.6e} se={:.6e} tolerance={:.6e}",
                if i.pass { "PASS" } else { "FAIL" },
                i.name,
                i.t,
                i.measured,
                i.se,
                i.tolerance
            );
        }
        let _ = writeln!(s, "\nconfig:");
        for line in self.config_echo.lines() {
            let _ = writeln!(s, "  {line}");
        }
        s
    }
}
