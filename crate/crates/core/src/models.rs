//! Observation families and the analytic constants attached to them:
//! Fisher/Kullback–Leibler information for the Gamma shape family, the
//! renewal-theoretic overshoot function ν(μ) for the normal mean, the
//! tail sums v²(t) and r_t, and the expected-sample-size comparison
//! coefficients g(t), h(t).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::integrate_panels;
use crate::special::{self, digamma, ln_gamma, norm_cdf, norm_pdf, trigamma};

// ---------------------------------------------------------------------------
// Model specification
// ---------------------------------------------------------------------------

/// Observation family being monitored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Gamma(θ, 1) with unknown shape θ; scale fixed at one.
    GammaShape,
    /// N(μ, 1) with unknown mean; the in-control mean is zero.
    NormalMean,
    /// Bernoulli(p).
    Bernoulli,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::GammaShape => "gamma",
            Family::NormalMean => "normal",
            Family::Bernoulli => "bernoulli",
        }
    }
}

/// A family together with its known in-control parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub baseline: f64,
}

impl ModelSpec {
    /// Gamma(θ₀, 1) in-control model; θ₀ must be strictly positive.
    pub fn gamma_shape(theta0: f64) -> Result<Self> {
        if !(theta0 > 0.0) || !theta0.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "gamma baseline must be positive, got {theta0}"
            )));
        }
        Ok(ModelSpec {
            family: Family::GammaShape,
            baseline: theta0,
        })
    }

    /// N(0, 1) in-control model.
    pub fn normal_mean() -> Self {
        ModelSpec {
            family: Family::NormalMean,
            baseline: 0.0,
        }
    }

    /// Bernoulli(p₀) in-control model; p₀ must lie strictly inside (0, 1).
    pub fn bernoulli(p0: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "bernoulli baseline must lie in (0,1), got {p0}"
            )));
        }
        Ok(ModelSpec {
            family: Family::Bernoulli,
            baseline: p0,
        })
    }

    /// Check that an observation lies in the family's support.
    pub fn check_support(&self, x: f64) -> Result<()> {
        let ok = match self.family {
            Family::GammaShape => x > 0.0 && x.is_finite(),
            Family::NormalMean => x.is_finite(),
            Family::Bernoulli => x == 0.0 || x == 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfSupport {
                family: self.family.name(),
                value: x,
            })
        }
    }

    /// log f_θ(x) − log f_θ₀(x) for this family.
    ///
    /// For the Gamma shape family this is (θ−θ₀)·ln x + ln Γ(θ₀) − ln Γ(θ);
    /// the scale-1 exponential factor cancels.
    pub fn log_likelihood_ratio(&self, theta: f64, x: f64) -> Result<f64> {
        match self.family {
            Family::GammaShape => {
                self.check_support(x)?;
                Ok((theta - self.baseline) * x.ln() + ln_gamma(self.baseline)? - ln_gamma(theta)?)
            }
            Family::NormalMean => {
                self.check_support(x)?;
                // baseline mean is 0 by construction
                Ok(theta * x - 0.5 * theta * theta)
            }
            Family::Bernoulli => {
                self.check_support(x)?;
                let p0 = self.baseline;
                if x == 1.0 {
                    Ok((theta / p0).ln())
                } else {
                    Ok(((1.0 - theta) / (1.0 - p0)).ln())
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Information numbers for the Gamma shape family
// ---------------------------------------------------------------------------

/// Fisher and Kullback–Leibler information at a Gamma shape θ, plus the
/// asymptotic efficiencies of the two estimator sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoConstants {
    /// I(θ) = ψ′(θ).
    pub fisher: f64,
    /// I(θ, φ) relative to the reference shape used to build the struct.
    pub kl: f64,
    /// Method-of-moments efficiency κ(θ) = 1 / (θ I(θ)).
    pub kappa_mom: f64,
    /// Maximum-likelihood efficiency, identically one.
    pub kappa_mle: f64,
}

impl InfoConstants {
    /// Constants at shape `theta`, with the KL divergence taken against
    /// `reference` (the in-control shape in detection problems).
    pub fn for_shape(theta: f64, reference: f64) -> Result<Self> {
        let fisher = trigamma(theta)?;
        Ok(InfoConstants {
            fisher,
            kl: kl_gamma(theta, reference)?,
            kappa_mom: 1.0 / (theta * fisher),
            kappa_mle: 1.0,
        })
    }
}

/// Kullback–Leibler divergence between Gamma(θ, 1) and Gamma(φ, 1):
/// I(θ, φ) = (θ − φ) ψ(θ) − ln Γ(θ) + ln Γ(φ).
pub fn kl_gamma(theta: f64, phi: f64) -> Result<f64> {
    if !(theta > 0.0) || !(phi > 0.0) {
        return Err(Error::domain(
            "kl_gamma",
            format!("shapes must be positive, got ({theta}, {phi})"),
        ));
    }
    Ok((theta - phi) * digamma(theta)? - ln_gamma(theta)? + ln_gamma(phi)?)
}

// ---------------------------------------------------------------------------
// The overshoot function nu(mu) for the unit-variance normal random walk
// ---------------------------------------------------------------------------

/// ν(μ) = 2 μ⁻² exp{ −2 Σ_{n≥1} n⁻¹ Φ(−|μ|√n / 2) }.
///
/// The series is summed until the running tail bound drops below 1e-13;
/// for |μ| small enough that this would take more than [`NU_TERM_CAP`]
/// terms, the remainder is replaced by a midpoint-rule integral
/// correction, accurate to ~1e-7 in the exponent.
pub fn nu_of_mu(mu: f64) -> Result<f64> {
    if mu == 0.0 || !mu.is_finite() {
        return Err(Error::domain("nu_of_mu", format!("mu = {mu}")));
    }
    let c = mu.abs() / 2.0;
    let mut sum = 0.0;
    let mut n: u64 = 1;
    loop {
        let u = c * (n as f64).sqrt();
        sum += norm_cdf(-u) / n as f64;
        // tail:  sum_{k>n} Phi(-c sqrt(k))/k  <=  2 phi(u)/u^3   (Mills ratio)
        if u >= 1.0 && 2.0 * norm_pdf(u) / (u * u * u) < 1e-13 {
            break;
        }
        if n >= NU_TERM_CAP {
            sum += nu_tail_integral(c, n);
            break;
        }
        n += 1;
    }
    Ok(2.0 / (mu * mu) * (-2.0 * sum).exp())
}

const NU_TERM_CAP: u64 = 400_000;

/// Σ_{k>n} Φ(−c√k)/k ≈ ∫_{n+1/2}^∞ Φ(−c√x)/x dx = 2 ∫_{c√(n+1/2)}^∞ Φ(−u)/u du.
fn nu_tail_integral(c: f64, n: u64) -> f64 {
    let a = c * (n as f64 + 0.5).sqrt();
    2.0 * phi_over_u_integral(a)
}

/// J(a) = ∫_a^∞ Φ(−u)/u du = −Φ(−a) ln a + ∫_a^∞ (ln u) φ(u) du.
fn phi_over_u_integral(a: f64) -> f64 {
    if a >= 40.0 {
        return 0.0;
    }
    -norm_cdf(-a) * a.ln() + ln_phi_integral(a)
}

/// K(a) = ∫_a^∞ (ln u) φ(u) du.
fn ln_phi_integral(a: f64) -> f64 {
    // K(0) = -(gamma + ln 2)/4
    const K0: f64 = -(special::EULER_GAMMA + std::f64::consts::LN_2) / 4.0;
    if a < 1.0 {
        // K(a) = K(0) - phi(0) * sum_k (-1)^k/(2^k k!) * a^{2k+1} (ln a - 1/(2k+1))/(2k+1)
        let la = a.ln();
        let mut coef = norm_pdf(0.0);
        let mut acc = 0.0;
        let mut a_pow = a;
        let a2 = a * a;
        for k in 0..18u32 {
            let m = 2.0 * k as f64 + 1.0;
            acc += coef * a_pow * (la - 1.0 / m) / m;
            a_pow *= a2;
            coef *= -1.0 / (2.0 * (k as f64 + 1.0));
        }
        K0 - acc
    } else {
        integrate_panels(|u| u.ln() * norm_pdf(u), a, a + 14.0, 14)
    }
}

// ---------------------------------------------------------------------------
// v^2(t), r_t and the expected-sample-size comparison
// ---------------------------------------------------------------------------

/// v²(t) = Σ_{i≥1} 1/(i+t)² = ψ′(1+t).
pub fn v2(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain("v2", format!("t = {t}")));
    }
    trigamma(1.0 + t)
}

/// r_t = lim_n (Σ_{i≤n} 1/(i+t) − ln n) = −ψ(1+t).
pub fn r_const(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain("r_const", format!("t = {t}")));
    }
    Ok(-digamma(1.0 + t)?)
}

/// g(t) = r_t − t v²(t) − 2 ln v²(t) + 1.
pub fn ess_g(t: f64) -> Result<f64> {
    let v = v2(t)?;
    Ok(r_const(t)? - t * v - 2.0 * v.ln() + 1.0)
}

/// h(t) = 1 + t² v²(t) − 1 / v²(t).
pub fn ess_h(t: f64) -> Result<f64> {
    let v = v2(t)?;
    Ok(1.0 + t * t * v - 1.0 / v)
}

/// Leading term of E_μτ_b − E_μT_b: μ⁻² { g(t) + (μ − s/t)² h(t) }.
pub fn ess_difference(mu: f64, s: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("ess_difference", format!("t = {t}")));
    }
    if mu == 0.0 {
        return Err(Error::domain("ess_difference", "mu = 0"));
    }
    let d = mu - s / t;
    Ok((ess_g(t)? + d * d * ess_h(t)?) / (mu * mu))
}
