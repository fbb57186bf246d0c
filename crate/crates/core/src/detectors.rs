//! Changepoint detection statistics.
//!
//! The central scheme keeps one likelihood-ratio accumulator per putative
//! change origin k:
//!
//!   Λ_{n,k} = Π_{i=k..n} f_{θ_{i,k}}(Xᵢ) / f_{θ₀}(Xᵢ),
//!   Rₙ = Σ_{k≤n} Λ_{n,k},   N_A = min{n : Rₙ ≥ A},
//!
//! with θ_{i,k} the nonanticipating estimate built from X_k..X_{i−1}.
//! Each step scores the new observation against every origin's current
//! estimate, then updates those estimates, then opens origin k = n and
//! scores it on the same observation. Cost is O(n·m) per step and memory
//! grows one origin per step (an optional cap can drop hopeless origins,
//! off by default).
//!
//! Baselines: the fixed-parameter Shiryaev–Roberts recursion, the 50/50
//! two-point mixture of such recursions, and the conjugate-normal mixture
//! with its closed-form per-origin statistic. The multichannel variant
//! runs independent per-channel estimators inside each origin, and the
//! daily variant estimates from every seventh past observation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorSpec, EstimatorState};
use crate::models::{Family, ModelSpec};
use crate::powerone::StoppingRecord;
use crate::special::ln_gamma;

/// Period of the daily estimation variant (observations per cycle).
const DAILY_PERIOD: u64 = 7;

/// Margin for the optional origin cap: origins whose log Λ_{n,k} falls
/// below ln A − ORIGIN_CAP_MARGIN are dropped when pruning is enabled.
const ORIGIN_CAP_MARGIN: f64 = 40.0;

// ---------------------------------------------------------------------------
// Specification
// ---------------------------------------------------------------------------

/// Detection statistic to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    /// Shiryaev–Roberts with nonanticipating estimation per origin.
    Srrs { est: EstimatorSpec },
    /// Classical Shiryaev–Roberts at a fixed post-change parameter.
    SrFixed { theta: f64 },
    /// 50/50 mixture of two fixed-parameter recursions.
    PairMixture { theta1: f64, theta2: f64 },
    /// Conjugate-normal mixture with mixing law N(s/t, v²(t)).
    NormalMixture { s: f64, t: f64 },
    /// Independent per-channel estimators inside each origin.
    Multi { ests: Vec<EstimatorSpec> },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Srrs { .. } => "srrs",
            Scheme::SrFixed { .. } => "sr-fixed",
            Scheme::PairMixture { .. } => "pair-mixture",
            Scheme::NormalMixture { .. } => "normal-mixture",
            Scheme::Multi { .. } => "multi",
        }
    }
}

/// A validated detector configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub model: ModelSpec,
    pub scheme: Scheme,
    /// Stopping threshold A.
    pub threshold: f64,
    /// Estimate from every seventh past observation (change may occur
    /// between days while the estimators are day-of-week specific).
    pub daily: bool,
    /// Drop origins more than [`ORIGIN_CAP_MARGIN`] e-folds below the
    /// threshold. Off by default; all calibration runs keep it off.
    pub prune_origins: bool,
}

impl DetectorSpec {
    pub fn new(model: ModelSpec, scheme: Scheme, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) || !threshold.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        match &scheme {
            Scheme::Srrs { .. } | Scheme::SrFixed { .. } => {}
            Scheme::PairMixture { theta1, theta2 } => {
                if model.family != Family::GammaShape {
                    return Err(Error::InvalidSpec(
                        "pair mixture requires the gamma shape family".into(),
                    ));
                }
                if !(*theta1 > 0.0 && *theta2 >= *theta1) {
                    return Err(Error::InvalidSpec(format!(
                        "pair mixture requires 0 < theta1 <= theta2, got ({theta1}, {theta2})"
                    )));
                }
            }
            Scheme::NormalMixture { t, .. } => {
                if model.family != Family::NormalMean {
                    return Err(Error::InvalidSpec(
                        "normal mixture requires the normal mean family".into(),
                    ));
                }
                if !(*t > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "normal mixture requires t > 0, got {t}"
                    )));
                }
            }
            Scheme::Multi { ests } => {
                if ests.is_empty() {
                    return Err(Error::InvalidSpec("multi scheme needs m >= 1 channels".into()));
                }
            }
        }
        Ok(DetectorSpec {
            model,
            scheme,
            threshold,
            daily: false,
            prune_origins: false,
        })
    }

    pub fn with_daily(mut self, daily: bool) -> Result<Self> {
        if daily && !matches!(self.scheme, Scheme::Srrs { .. }) {
            return Err(Error::InvalidSpec(
                "daily estimation applies to the srrs scheme only".into(),
            ));
        }
        self.daily = daily;
        Ok(self)
    }

    pub fn with_pruning(mut self, prune: bool) -> Self {
        self.prune_origins = prune;
        self
    }

    /// Observation vector length expected by [`DetectorState::step`].
    pub fn channels(&self) -> usize {
        match &self.scheme {
            Scheme::Multi { ests } => ests.len(),
            _ => 1,
        }
    }
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Origin {
    k: u64,
    log_lambda: f64,
    est: EstimatorState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MultiOrigin {
    k: u64,
    log_lambda: f64,
    ests: Vec<EstimatorState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DailyOrigin {
    k: u64,
    log_lambda: f64,
    slots: Vec<EstimatorState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MixtureOrigin {
    count: u64,
    sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum SchemeState {
    Origins(Vec<Origin>),
    MultiOrigins(Vec<MultiOrigin>),
    DailyOrigins(Vec<DailyOrigin>),
    SrFixed { r: f64 },
    Pair { r1: f64, r2: f64 },
    Mixture(Vec<MixtureOrigin>),
}

/// Running state of one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    spec: DetectorSpec,
    n: u64,
    r_n: f64,
    stopped_at: Option<u64>,
    inner: SchemeState,
    /// ln Γ(θ₀), cached for the gamma likelihood ratio.
    lg_baseline: f64,
    /// v²(t) for the normal mixture.
    mix_v2: f64,
}

impl DetectorState {
    pub fn new(spec: &DetectorSpec) -> Result<Self> {
        let inner = match &spec.scheme {
            Scheme::Srrs { .. } if spec.daily => SchemeState::DailyOrigins(Vec::new()),
            Scheme::Srrs { .. } => SchemeState::Origins(Vec::new()),
            Scheme::Multi { .. } => SchemeState::MultiOrigins(Vec::new()),
            Scheme::SrFixed { .. } => SchemeState::SrFixed { r: 0.0 },
            Scheme::PairMixture { .. } => SchemeState::Pair { r1: 0.0, r2: 0.0 },
            Scheme::NormalMixture { .. } => SchemeState::Mixture(Vec::new()),
        };
        let lg_baseline = match spec.model.family {
            Family::GammaShape => ln_gamma(spec.model.baseline)?,
            _ => 0.0,
        };
        let mix_v2 = match &spec.scheme {
            Scheme::NormalMixture { t, .. } => crate::models::v2(*t)?,
            _ => 0.0,
        };
        Ok(DetectorState {
            spec: spec.clone(),
            n: 0,
            r_n: 0.0,
            stopped_at: None,
            inner,
            lg_baseline,
            mix_v2,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Current value of the detection statistic (R₀ = 0 by convention).
    pub fn r(&self) -> f64 {
        self.r_n
    }

    pub fn stopped_at(&self) -> Option<u64> {
        self.stopped_at
    }

    pub fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    /// Per-origin log Λ_{n,k} values, oldest origin first. Empty for the
    /// recursion-based schemes that do not keep origins.
    pub fn origin_log_lambdas(&self) -> Vec<(u64, f64)> {
        match &self.inner {
            SchemeState::Origins(o) => o.iter().map(|x| (x.k, x.log_lambda)).collect(),
            SchemeState::MultiOrigins(o) => o.iter().map(|x| (x.k, x.log_lambda)).collect(),
            SchemeState::DailyOrigins(o) => o.iter().map(|x| (x.k, x.log_lambda)).collect(),
            SchemeState::Mixture(o) => {
                let (s, t) = match self.spec.scheme {
                    Scheme::NormalMixture { s, t } => (s, t),
                    _ => unreachable!(),
                };
                o.iter()
                    .enumerate()
                    .map(|(i, m)| {
                        let stat =
                            crate::powerone::normal_mixture_log_stat(m.count, m.sum, s, t)
                                .expect("t validated at construction");
                        (self.n - o.len() as u64 + 1 + i as u64, stat)
                    })
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// Advance the detector by one observation vector.
    ///
    /// Scoring uses each origin's estimate from before this observation;
    /// the estimators are updated afterwards, and origin k = n opens and
    /// is scored on the same observation. Returns the new Rₙ.
    pub fn step(&mut self, x: &[f64]) -> Result<f64> {
        if let Some(at) = self.stopped_at {
            return Err(Error::SteppedAfterStop { stopped_at: at });
        }
        if x.len() != self.spec.channels() {
            return Err(Error::InvalidSpec(format!(
                "expected {} observation channels, got {}",
                self.spec.channels(),
                x.len()
            )));
        }
        for &xi in x {
            self.spec.model.check_support(xi)?;
        }
        self.n += 1;
        let n = self.n;
        let model = self.spec.model;
        let a = self.spec.threshold;

        match (&mut self.inner, &self.spec.scheme) {
            (SchemeState::Origins(origins), Scheme::Srrs { est }) => {
                let x0 = x[0];
                let mut r = 0.0;
                match model.family {
                    Family::GammaShape => {
                        let ln_x = x0.ln();
                        let baseline = model.baseline;
                        let lg0 = self.lg_baseline;
                        for o in origins.iter_mut() {
                            let th = o.est.estimate();
                            o.log_lambda += (th - baseline) * ln_x + lg0
                                - ln_gamma(th).expect("positive estimate");
                            o.est.update(x0)?;
                            r += o.log_lambda.exp();
                        }
                    }
                    _ => {
                        for o in origins.iter_mut() {
                            o.log_lambda += model.log_likelihood_ratio(o.est.estimate(), x0)?;
                            o.est.update(x0)?;
                            r += o.log_lambda.exp();
                        }
                    }
                }
                let mut fresh = Origin {
                    k: n,
                    log_lambda: 0.0,
                    est: EstimatorState::init(est, &model)?,
                };
                fresh.log_lambda = model.log_likelihood_ratio(fresh.est.estimate(), x0)?;
                fresh.est.update(x0)?;
                r += fresh.log_lambda.exp();
                origins.push(fresh);
                if self.spec.prune_origins {
                    let floor = a.ln() - ORIGIN_CAP_MARGIN;
                    origins.retain(|o| o.log_lambda >= floor);
                }
                self.r_n = r;
            }
            (SchemeState::DailyOrigins(origins), Scheme::Srrs { est }) => {
                let x0 = x[0];
                let mut r = 0.0;
                for o in origins.iter_mut() {
                    let slot = ((n - o.k) % DAILY_PERIOD) as usize;
                    o.log_lambda +=
                        model.log_likelihood_ratio(o.slots[slot].estimate(), x0)?;
                    o.slots[slot].update(x0)?;
                    r += o.log_lambda.exp();
                }
                let slots: Vec<EstimatorState> = (0..DAILY_PERIOD)
                    .map(|_| EstimatorState::init(est, &model))
                    .collect::<Result<_>>()?;
                let mut fresh = DailyOrigin {
                    k: n,
                    log_lambda: 0.0,
                    slots,
                };
                fresh.log_lambda = model.log_likelihood_ratio(fresh.slots[0].estimate(), x0)?;
                fresh.slots[0].update(x0)?;
                r += fresh.log_lambda.exp();
                origins.push(fresh);
                if self.spec.prune_origins {
                    let floor = a.ln() - ORIGIN_CAP_MARGIN;
                    origins.retain(|o| o.log_lambda >= floor);
                }
                self.r_n = r;
            }
            (SchemeState::MultiOrigins(origins), Scheme::Multi { ests }) => {
                let mut r = 0.0;
                for o in origins.iter_mut() {
                    for (j, &xj) in x.iter().enumerate() {
                        o.log_lambda +=
                            model.log_likelihood_ratio(o.ests[j].estimate(), xj)?;
                        o.ests[j].update(xj)?;
                    }
                    r += o.log_lambda.exp();
                }
                let mut fresh = MultiOrigin {
                    k: n,
                    log_lambda: 0.0,
                    ests: ests
                        .iter()
                        .map(|e| EstimatorState::init(e, &model))
                        .collect::<Result<_>>()?,
                };
                for (j, &xj) in x.iter().enumerate() {
                    fresh.log_lambda +=
                        model.log_likelihood_ratio(fresh.ests[j].estimate(), xj)?;
                    fresh.ests[j].update(xj)?;
                }
                r += fresh.log_lambda.exp();
                origins.push(fresh);
                if self.spec.prune_origins {
                    let floor = a.ln() - ORIGIN_CAP_MARGIN;
                    origins.retain(|o| o.log_lambda >= floor);
                }
                self.r_n = r;
            }
            (SchemeState::SrFixed { r }, Scheme::SrFixed { theta }) => {
                let lr = model.log_likelihood_ratio(*theta, x[0])?.exp();
                *r = (1.0 + *r) * lr;
                self.r_n = *r;
            }
            (SchemeState::Pair { r1, r2 }, Scheme::PairMixture { theta1, theta2 }) => {
                let lr1 = model.log_likelihood_ratio(*theta1, x[0])?.exp();
                let lr2 = model.log_likelihood_ratio(*theta2, x[0])?.exp();
                *r1 = (1.0 + *r1) * lr1;
                *r2 = (1.0 + *r2) * lr2;
                self.r_n = 0.5 * *r1 + 0.5 * *r2;
            }
            (SchemeState::Mixture(origins), Scheme::NormalMixture { s, t }) => {
                let x0 = x[0];
                let m = s / t;
                let v = self.mix_v2;
                let m2_half = m * m / (2.0 * v);
                let mut r = 0.0;
                for o in origins.iter_mut() {
                    o.count += 1;
                    o.sum += x0;
                }
                origins.push(MixtureOrigin { count: 1, sum: x0 });
                for o in origins.iter() {
                    let nn = o.count as f64;
                    let b = o.sum + m / v;
                    let stat =
                        -0.5 * (nn * v + 1.0).ln() + b * b / (2.0 * (nn + 1.0 / v)) - m2_half;
                    r += stat.exp();
                }
                self.r_n = r;
            }
            _ => unreachable!("state/scheme pairing is fixed at construction"),
        }

        if self.r_n >= a {
            self.stopped_at = Some(n);
        }
        Ok(self.r_n)
    }
}

// ---------------------------------------------------------------------------
// Driving a detector over a stream
// ---------------------------------------------------------------------------

/// Run a detector over observations produced by `source` (one call fills
/// one observation vector) until it stops or `n_max` steps elapse.
///
/// The record carries N_A, ln R at stopping and the log-overshoot
/// ln(R_{N_A}/A).
pub fn run_detector<F>(spec: &DetectorSpec, mut source: F, n_max: u64) -> Result<StoppingRecord>
where
    F: FnMut(&mut [f64]),
{
    let mut state = DetectorState::new(spec)?;
    let mut buf = vec![0.0; spec.channels()];
    for _ in 0..n_max {
        source(&mut buf);
        state.step(&buf)?;
        if state.stopped_at.is_some() {
            let log_r = state.r_n.ln();
            return Ok(StoppingRecord::stopped(
                state.n,
                log_r,
                spec.threshold.ln(),
            ));
        }
    }
    Ok(StoppingRecord::truncated(n_max, state.r_n.max(f64::MIN_POSITIVE).ln()))
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

const CHECKPOINT_VERSION: &str = "srrs.detector-state.v1";

#[derive(Serialize, Deserialize)]
struct CheckpointEnvelope {
    version: String,
    state: DetectorState,
}

/// Serialize a detector state to a portable, version-tagged record.
/// Restoring it yields bit-identical continuation on identical inputs.
pub fn checkpoint(state: &DetectorState) -> String {
    serde_json::to_string(&CheckpointEnvelope {
        version: CHECKPOINT_VERSION.to_string(),
        state: state.clone(),
    })
    .expect("detector state serializes")
}

/// Restore a detector state from [`checkpoint`] output.
pub fn restore(record: &str) -> Result<DetectorState> {
    let env: CheckpointEnvelope = serde_json::from_str(record)
        .map_err(|e| Error::Checkpoint(format!("malformed record: {e}")))?;
    if env.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unknown version {:?} (expected {CHECKPOINT_VERSION:?})",
            env.version
        )));
    }
    Ok(env.state)
}
