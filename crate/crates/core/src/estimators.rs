//! Nonanticipating estimator sequences.
//!
//! Each state carries O(1) sufficient statistics and a cached estimate of
//! the post-change parameter built from the observations seen so far. The
//! defining property: the value returned by [`EstimatorState::estimate`]
//! never depends on the observation about to be scored — scoring happens
//! first, the update second. Violating that order destroys the martingale
//! structure the whole construction rests on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec};
use crate::special::digamma_inverse_from;

// ---------------------------------------------------------------------------
// Specification
// ---------------------------------------------------------------------------

/// Which estimator sequence to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// Gamma shape by the method of moments: θ = (s + ΣXᵢ)/(t + n),
    /// starting from s/t, or from θ₀ when s∧t = 0.
    MomGamma { s: f64, t: f64 },
    /// Gamma shape by maximum likelihood: θ solves
    /// ψ(θ) = (s + Σ ln Xᵢ)/(t + n), starting from θ₀.
    MleGamma { s: f64, t: f64 },
    /// Constant parameter; never updated.
    Fixed { theta: f64 },
    /// Normal mean: μ = (s + ΣXᵢ)/(t + n), starting from s/t.
    NormalMean { s: f64, t: f64 },
    /// Bernoulli probability with a Beta(s, t−s) prior:
    /// p = (s + ΣXᵢ)/(t + n).
    BernoulliBeta { s: f64, t: f64 },
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::MomGamma { .. } => "mom",
            EstimatorKind::MleGamma { .. } => "mle",
            EstimatorKind::Fixed { .. } => "fixed",
            EstimatorKind::NormalMean { .. } => "normal-mean",
            EstimatorKind::BernoulliBeta { .. } => "bernoulli-beta",
        }
    }

    fn compatible_family(&self) -> Family {
        match self {
            EstimatorKind::MomGamma { .. } | EstimatorKind::MleGamma { .. } => Family::GammaShape,
            EstimatorKind::NormalMean { .. } => Family::NormalMean,
            EstimatorKind::BernoulliBeta { .. } => Family::Bernoulli,
            // Fixed adapts to whatever family it is paired with
            EstimatorKind::Fixed { .. } => unreachable!(),
        }
    }
}

/// Lower/upper bounds applied to the reported estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clamp {
    pub lo: f64,
    pub hi: f64,
}

/// A validated estimator specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub clamp: Option<Clamp>,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Result<Self> {
        match kind {
            EstimatorKind::MomGamma { s, t } | EstimatorKind::MleGamma { s, t } => {
                if !(s >= 0.0 && t >= 0.0 && s.is_finite() && t.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "gamma estimator requires s >= 0 and t >= 0, got ({s}, {t})"
                    )));
                }
            }
            EstimatorKind::Fixed { theta } => {
                if !(theta > 0.0) || !theta.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "fixed estimator requires theta > 0, got {theta}"
                    )));
                }
            }
            EstimatorKind::NormalMean { s, t } => {
                let valid = (t > 0.0 && s.is_finite() && t.is_finite()) || (s == 0.0 && t == 0.0);
                if !valid {
                    return Err(Error::InvalidSpec(format!(
                        "normal-mean estimator requires t > 0 or s = t = 0, got ({s}, {t})"
                    )));
                }
            }
            EstimatorKind::BernoulliBeta { s, t } => {
                if !(s > 0.0 && t > s && t.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "bernoulli-beta estimator requires 0 < s < t, got ({s}, {t})"
                    )));
                }
            }
        }
        Ok(EstimatorSpec { kind, clamp: None })
    }

    pub fn with_clamp(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "clamp requires 0 < lo < hi, got ({lo}, {hi})"
            )));
        }
        self.clamp = Some(Clamp { lo, hi });
        Ok(self)
    }
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

/// Running estimator state: count, accumulator, cached estimate.
///
/// `acc` holds ΣXᵢ for the moment-based kinds and Σ ln Xᵢ for maximum
/// likelihood. The cached estimate is the raw (unclamped) value; the
/// clamp is applied at read time so the sufficient statistics stay exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    spec: EstimatorSpec,
    baseline: f64,
    count: u64,
    acc: f64,
    cached: f64,
}

impl EstimatorState {
    /// Initial (n = 0) state for `spec` under `model`.
    pub fn init(spec: &EstimatorSpec, model: &ModelSpec) -> Result<Self> {
        match spec.kind {
            EstimatorKind::Fixed { theta } => {
                if model.family == Family::Bernoulli && theta >= 1.0 {
                    return Err(Error::InvalidSpec(format!(
                        "fixed bernoulli parameter must lie in (0,1), got {theta}"
                    )));
                }
            }
            _ => {
                let want = spec.kind.compatible_family();
                if model.family != want {
                    return Err(Error::FamilyMismatch {
                        estimator: spec.kind.name(),
                        family: model.family.name(),
                    });
                }
            }
        }
        let cached = match spec.kind {
            EstimatorKind::MomGamma { s, t } => {
                if s.min(t) > 0.0 {
                    s / t
                } else {
                    model.baseline
                }
            }
            // Theorem 5 pins the maximum-likelihood start at the
            // in-control shape regardless of (s, t)
            EstimatorKind::MleGamma { .. } => model.baseline,
            EstimatorKind::Fixed { theta } => theta,
            EstimatorKind::NormalMean { s, t } => {
                if t > 0.0 {
                    s / t
                } else {
                    model.baseline
                }
            }
            EstimatorKind::BernoulliBeta { s, t } => s / t,
        };
        Ok(EstimatorState {
            spec: *spec,
            baseline: model.baseline,
            count: 0,
            acc: 0.0,
            cached,
        })
    }

    /// Current nonanticipating estimate (clamped if a clamp is set).
    pub fn estimate(&self) -> f64 {
        match self.spec.clamp {
            Some(Clamp { lo, hi }) => self.cached.clamp(lo, hi),
            None => self.cached,
        }
    }

    /// Number of observations folded in so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Fold one observation into the state.
    pub fn update(&mut self, x: f64) -> Result<()> {
        match self.spec.kind {
            EstimatorKind::Fixed { .. } => {
                self.count += 1;
                Ok(())
            }
            EstimatorKind::MomGamma { s, t } => {
                check_gamma_support(x)?;
                self.count += 1;
                self.acc += x;
                self.cached = (s + self.acc) / (t + self.count as f64);
                Ok(())
            }
            EstimatorKind::MleGamma { s, t } => {
                check_gamma_support(x)?;
                self.count += 1;
                self.acc += x.ln();
                let target = (s + self.acc) / (t + self.count as f64);
                self.cached = digamma_inverse_from(target, self.cached)?;
                Ok(())
            }
            EstimatorKind::NormalMean { s, t } => {
                if !x.is_finite() {
                    return Err(Error::OutOfSupport {
                        family: "normal",
                        value: x,
                    });
                }
                self.count += 1;
                self.acc += x;
                self.cached = (s + self.acc) / (t + self.count as f64);
                Ok(())
            }
            EstimatorKind::BernoulliBeta { s, t } => {
                if x != 0.0 && x != 1.0 {
                    return Err(Error::OutOfSupport {
                        family: "bernoulli",
                        value: x,
                    });
                }
                self.count += 1;
                self.acc += x;
                self.cached = (s + self.acc) / (t + self.count as f64);
                Ok(())
            }
        }
    }
}

fn check_gamma_support(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfSupport {
            family: "gamma",
            value: x,
        })
    }
}
