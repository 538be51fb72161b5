use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("control bounds must satisfy lo ≤ hi, got [{0}, {1}]")]
    BadBounds(f64, f64),
    #[error("unknown policy {0:?}; expected zero, linear_gain or bang_bang")]
    Unknown(String),
}

/// Moments of one trajectory's filter posterior: the only information a
/// policy may use.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    Zero,
    /// `β = −K · posterior mean`.
    LinearGain {
        gain: f64,
    },
    /// `β = −level · sign(mean)` when `|mean| > threshold`, else 0.
    BangBang {
        threshold: f64,
        level: f64,
    },
}

/// Observation-adapted feedback law with componentwise bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPolicy {
    pub kind: PolicyKind,
    pub lower: f64,
    pub upper: f64,
}

impl ControlPolicy {
    pub fn new(kind: PolicyKind, lower: f64, upper: f64) -> Result<Self, PolicyError> {
        if !(lower <= upper) {
            return Err(PolicyError::BadBounds(lower, upper));
        }
        Ok(Self { kind, lower, upper })
    }

    pub fn unbounded(kind: PolicyKind) -> Self {
        Self { kind, lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }

    pub fn zero() -> Self {
        Self::unbounded(PolicyKind::Zero)
    }

    pub fn linear_gain(gain: f64) -> Self {
        Self::unbounded(PolicyKind::LinearGain { gain })
    }

    /// Evaluates the policy; the flag reports whether any component was
    /// clamped to the bounds.
    pub fn apply(&self, _t: f64, summary: &PosteriorSummary) -> (Vec<f64>, bool) {
        let mut clamped = false;
        let beta = summary
            .mean
            .iter()
            .map(|&m| {
                let raw = match self.kind {
                    PolicyKind::Zero => 0.0,
                    PolicyKind::LinearGain { gain } => -gain * m,
                    PolicyKind::BangBang { threshold, level } => {
                        if m.abs() > threshold {
                            -level * m.signum()
                        } else {
                            0.0
                        }
                    }
                };
                let b = raw.clamp(self.lower, self.upper);
                clamped |= b != raw;
                b
            })
            .collect();
        (beta, clamped)
    }
}

/// Free-function form of [`ControlPolicy::apply`].
pub fn apply_policy(policy: &ControlPolicy, t: f64, summary: &PosteriorSummary) -> (Vec<f64>, bool) {
    policy.apply(t, summary)
}
