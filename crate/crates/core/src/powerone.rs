//! Robbins–Siegmund power-one tests and their closed-form mixture analog.
//!
//! The test statistic is log Λₙ = Σᵢ [log f_{θᵢ}(Xᵢ) − log f_{θ₀}(Xᵢ)]
//! with θᵢ the nonanticipating estimate available before Xᵢ is seen. The
//! test stops at τ_b = min{n ≥ 1 : log Λₙ ≥ b}; under the null its
//! stopping probability is at most e^{−b}, and the overshoot at τ_b is
//! what the ladder simulation in `montecarlo` averages into γ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorSpec, EstimatorState};
use crate::models::{nu_of_mu, v2, ModelSpec};
use crate::quad::integrate_panels;
use crate::special::norm_pdf;

// ---------------------------------------------------------------------------
// Test state
// ---------------------------------------------------------------------------

/// Running state of a single power-one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestState {
    model: ModelSpec,
    n: u64,
    log_lambda: f64,
    record_high: f64,
    est: EstimatorState,
}

impl TestState {
    pub fn new(model: ModelSpec, spec: &EstimatorSpec) -> Result<Self> {
        Ok(TestState {
            model,
            n: 0,
            log_lambda: 0.0,
            record_high: 0.0,
            est: EstimatorState::init(spec, &model)?,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn log_lambda(&self) -> f64 {
        self.log_lambda
    }

    /// Running maximum of log Λₙ (log Λ₀ = 0 included).
    pub fn record_high(&self) -> f64 {
        self.record_high
    }

    /// Current estimate that will score the next observation.
    pub fn current_estimate(&self) -> f64 {
        self.est.estimate()
    }

    /// Score `x` with the current estimate, then fold `x` into the
    /// estimator. Returns the log-likelihood-ratio increment.
    pub fn step(&mut self, x: f64) -> Result<f64> {
        let inc = self.model.log_likelihood_ratio(self.est.estimate(), x)?;
        self.log_lambda += inc;
        self.est.update(x)?;
        self.n += 1;
        if self.log_lambda > self.record_high {
            self.record_high = self.log_lambda;
        }
        Ok(inc)
    }
}

// ---------------------------------------------------------------------------
// Stopping record
// ---------------------------------------------------------------------------

/// Outcome of one simulated run of a stopping rule. Truncation is a
/// value, not an error: exactly one of `stop_time` / `truncated_at` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRecord {
    /// First n with the statistic at or above the boundary.
    pub stop_time: Option<u64>,
    /// Terminal value of the log statistic.
    pub terminal_log_stat: f64,
    /// Excess over the boundary at the stop time.
    pub overshoot: Option<f64>,
    /// Set when the run hit its step budget without stopping.
    pub truncated_at: Option<u64>,
}

impl StoppingRecord {
    pub fn stopped(stop_time: u64, terminal_log_stat: f64, boundary: f64) -> Self {
        StoppingRecord {
            stop_time: Some(stop_time),
            terminal_log_stat,
            overshoot: Some(terminal_log_stat - boundary),
            truncated_at: None,
        }
    }

    pub fn truncated(n_max: u64, terminal_log_stat: f64) -> Self {
        StoppingRecord {
            stop_time: None,
            terminal_log_stat,
            overshoot: None,
            truncated_at: Some(n_max),
        }
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated_at.is_some()
    }
}

/// Run τ_b = min{n ≥ 1 : log Λₙ ≥ b} on observations drawn from `source`,
/// giving up after `n_max` steps.
pub fn run_tau_b<F>(
    model: ModelSpec,
    spec: &EstimatorSpec,
    b: f64,
    mut source: F,
    n_max: u64,
) -> Result<StoppingRecord>
where
    F: FnMut() -> f64,
{
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::domain("run_tau_b", format!("b = {b}")));
    }
    if n_max == 0 {
        return Err(Error::domain("run_tau_b", "n_max must be at least 1"));
    }
    let mut state = TestState::new(model, spec)?;
    for _ in 0..n_max {
        state.step(source())?;
        if state.log_lambda >= b {
            return Ok(StoppingRecord::stopped(state.n, state.log_lambda, b));
        }
    }
    Ok(StoppingRecord::truncated(n_max, state.log_lambda))
}

// ---------------------------------------------------------------------------
// Mixture analog for the normal mean
// ---------------------------------------------------------------------------

/// Log of the mixture statistic ∫ exp{yΣx − ny²/2} dG_{s,t}(y), with
/// G_{s,t} = N(s/t, v²(t)). The Gaussian integral has a closed form:
///
///   −½ ln(n v² + 1) + (Σx + m/v²)² / (2(n + 1/v²)) − m²/(2v²),
///
/// with m = s/t, v² = v²(t).
pub fn normal_mixture_log_stat(n: u64, sum_x: f64, s: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("normal_mixture_log_stat", format!("t = {t}")));
    }
    let m = s / t;
    let v_sq = v2(t)?;
    let n = n as f64;
    let b = sum_x + m / v_sq;
    Ok(-0.5 * (n * v_sq + 1.0).ln() + b * b / (2.0 * (n + 1.0 / v_sq)) - m * m / (2.0 * v_sq))
}

/// γ = ∫ ν(y) dG_{s,t}(y) by quadrature against the N(s/t, v²(t)) density.
///
/// ν has a removable kink at zero, so the range is split there and each
/// side integrated with Gauss–Legendre panels; the result is good to far
/// better than the 1e-4 contract.
pub fn gamma_const_quadrature_normal(s: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(
            "gamma_const_quadrature_normal",
            format!("t = {t}"),
        ));
    }
    let mean = s / t;
    let sd = v2(t)?.sqrt();
    let lo = mean - 9.0 * sd;
    let hi = mean + 9.0 * sd;
    let weight = |y: f64| norm_pdf((y - mean) / sd) / sd;
    let integrand = |y: f64| nu_of_mu(y).expect("nu defined away from 0") * weight(y);
    let panels_for = |a: f64, b: f64| (((b - a) / (0.5 * sd)).ceil() as usize).max(1);
    let total = if lo < 0.0 && hi > 0.0 {
        integrate_panels(integrand, lo, 0.0, panels_for(lo, 0.0))
            + integrate_panels(integrand, 0.0, hi, panels_for(0.0, hi))
    } else {
        integrate_panels(integrand, lo, hi, panels_for(lo, hi))
    };
    Ok(total)
}
