//! Monte Carlo calibration machinery: adaptive-measure samplers, the
//! ladder-averaging estimator of the overshoot constant γ, ARL and
//! detection-delay estimation, threshold calibration, and the histogram
//! of the limiting estimate distribution G.
//!
//! Reproducibility contract: every run draws from its own ChaCha stream
//! keyed by (seed, run_index), and per-run outputs are collected into a
//! vector indexed by run before any reduction. Identical (seed, runs,
//! n_max) therefore give bit-identical results for any worker count;
//! workers only change wall time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{run_detector, DetectorSpec};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorSpec, EstimatorState};
use crate::models::{Family, ModelSpec};
use crate::powerone::TestState;

// ---------------------------------------------------------------------------
// Run configuration and aggregation helpers
// ---------------------------------------------------------------------------

/// Simulation budget: seed, number of runs, per-run step cap, workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub runs: u64,
    pub n_max: u64,
    /// 0 = run in the caller's rayon context (global pool).
    pub workers: usize,
}

impl RunConfig {
    pub fn new(seed: u64, runs: u64, n_max: u64) -> Self {
        RunConfig {
            seed,
            runs,
            n_max,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Independent per-run random stream keyed by (seed, run_index).
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

/// Map run indices to values in parallel, preserving run order so the
/// reduction below is scheduling-independent.
fn per_run<T, F>(cfg: &RunConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let body = || (0..cfg.runs).into_par_iter().map(|i| f(i)).collect();
    if cfg.workers == 0 {
        body()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .expect("thread pool")
            .install(body)
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt() / n.sqrt())
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

fn draw(family: Family, param: f64, rng: &mut ChaCha8Rng) -> f64 {
    match family {
        Family::GammaShape => {
            let g = Gamma::new(param, 1.0).expect("positive shape");
            let x: f64 = g.sample(rng);
            // shapes far below one can underflow to exactly zero, which
            // is outside the support; the smallest positive double is the
            // faithful stand-in
            if x > 0.0 {
                x
            } else {
                f64::MIN_POSITIVE
            }
        }
        Family::NormalMean => {
            let z: f64 = StandardNormal.sample(rng);
            param + z
        }
        Family::Bernoulli => {
            if rng.gen_bool(param) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// The adaptive sampling law: each observation is drawn with the current
/// estimate as the true parameter, then folded into the estimator. Under
/// this measure the estimate sequence converges to a draw from G.
pub struct QSampler {
    model: ModelSpec,
    est: EstimatorState,
    rng: ChaCha8Rng,
}

impl QSampler {
    pub fn new(model: ModelSpec, spec: &EstimatorSpec, rng: ChaCha8Rng) -> Result<Self> {
        Ok(QSampler {
            model,
            est: EstimatorState::init(spec, &model)?,
            rng,
        })
    }

    /// Convenience constructor keyed the same way as every other run.
    pub fn keyed(model: ModelSpec, spec: &EstimatorSpec, seed: u64, run: u64) -> Result<Self> {
        Self::new(model, spec, run_rng(seed, run))
    }

    /// Current estimate (the parameter the next observation is drawn from).
    pub fn current_estimate(&self) -> f64 {
        self.est.estimate()
    }

    pub fn next_obs(&mut self) -> f64 {
        let x = draw(self.model.family, self.est.estimate(), &mut self.rng);
        self.est
            .update(x)
            .expect("drawn observations are in-support");
        x
    }
}

/// Pre-change/post-change observation stream: components are i.i.d. at
/// the baseline before ν and at the post-change parameters from ν on.
/// `nu = None` means the change never happens.
pub struct ChangepointStream {
    model: ModelSpec,
    post: Vec<f64>,
    nu: Option<u64>,
    drawn: u64,
    rng: ChaCha8Rng,
}

impl ChangepointStream {
    pub fn new(model: ModelSpec, post: Vec<f64>, nu: Option<u64>, rng: ChaCha8Rng) -> Self {
        ChangepointStream {
            model,
            post,
            nu,
            drawn: 0,
            rng,
        }
    }

    pub fn fill(&mut self, buf: &mut [f64]) {
        self.drawn += 1;
        let changed = self.nu.map_or(false, |nu| self.drawn >= nu);
        for (j, slot) in buf.iter_mut().enumerate() {
            let param = if changed {
                self.post[j]
            } else {
                self.model.baseline
            };
            *slot = draw(self.model.family, param, &mut self.rng);
        }
    }
}

// ---------------------------------------------------------------------------
// Ladder estimation of the overshoot constant
// ---------------------------------------------------------------------------

/// Output of [`estimate_gamma_const`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderEstimate {
    pub gamma_hat: f64,
    pub std_err: f64,
    pub b0: f64,
    pub b1: f64,
    pub runs: u64,
    /// Runs that produced a ladder variable above B0 but never crossed B1.
    pub truncated_b1: u64,
    /// Runs that never produced a ladder variable above B0.
    pub truncated_b0: u64,
}

/// Interval-averaged overshoot estimator:
///
///   (B1 − B0) ψ̄(B0,B1) = avg( Σᵢ (1 − e^{Γ_{i−1}−Γ_i}) + e^{B1−Γ_m} − 1 ),
///
/// where Γ₀ ≡ B0 and Γ₁ < … < Γ_m are the strict record highs of log Λₙ
/// in (B0, B1] plus the first one beyond B1, simulated under the measure
/// that drives each observation with the current estimate.
///
/// Truncated runs follow the published adjustments: if B1 was not
/// reached the accumulated sum is divided by (largest ladder variable −
/// B0) instead of (B1 − B0); if B0 was not reached either, the run's
/// output is 1.
pub fn estimate_gamma_const(
    model: ModelSpec,
    spec: &EstimatorSpec,
    b0: f64,
    b1: f64,
    cfg: &RunConfig,
) -> Result<LadderEstimate> {
    if !(b0 > 0.0 && b1 > b0) {
        return Err(Error::domain(
            "estimate_gamma_const",
            format!("need 0 < B0 < B1, got ({b0}, {b1})"),
        ));
    }
    enum RunOut {
        Complete(f64),
        TruncB1(f64),
        TruncB0,
    }
    let outs: Vec<Result<RunOut>> = per_run(cfg, |run| {
        let mut sampler = QSampler::keyed(model, spec, cfg.seed, run)?;
        let mut test = TestState::new(model, spec)?;
        let mut prev = b0;
        let mut largest: Option<f64> = None;
        let mut acc = 0.0;
        for _ in 0..cfg.n_max {
            let before = test.record_high();
            test.step(sampler.next_obs())?;
            let after = test.record_high();
            if after > before && after > b0 {
                if after <= b1 {
                    acc += 1.0 - (prev - after).exp();
                    prev = after;
                    largest = Some(after);
                } else {
                    acc += (b1 - after).exp() - (prev - after).exp();
                    return Ok(RunOut::Complete(acc / (b1 - b0)));
                }
            }
        }
        match largest {
            Some(g) => Ok(RunOut::TruncB1(acc / (g - b0))),
            None => Ok(RunOut::TruncB0),
        }
    });
    let mut values = Vec::with_capacity(outs.len());
    let mut trunc_b1 = 0;
    let mut trunc_b0 = 0;
    for out in outs {
        match out? {
            RunOut::Complete(v) => values.push(v),
            RunOut::TruncB1(v) => {
                values.push(v);
                trunc_b1 += 1;
            }
            RunOut::TruncB0 => {
                values.push(1.0);
                trunc_b0 += 1;
            }
        }
    }
    let (mean, se) = mean_and_se(&values);
    Ok(LadderEstimate {
        gamma_hat: mean,
        std_err: se,
        b0,
        b1,
        runs: cfg.runs,
        truncated_b1: trunc_b1,
        truncated_b0: trunc_b0,
    })
}

// ---------------------------------------------------------------------------
// ARL and delay estimation
// ---------------------------------------------------------------------------

/// Sample mean with its standard error and truncation count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub runs: u64,
    /// Runs counted at n_max because they never stopped (biases the mean
    /// downward; a nonzero count calls for wider tolerances).
    pub truncated: u64,
}

/// ARL to false alarm: mean of N_A under the no-change stream.
pub fn estimate_arl(det: &DetectorSpec, cfg: &RunConfig) -> Result<McEstimate> {
    let outs: Vec<Result<(f64, bool)>> = per_run(cfg, |run| {
        let mut stream = ChangepointStream::new(
            det.model,
            vec![det.model.baseline; det.channels()],
            None,
            run_rng(cfg.seed, run),
        );
        let rec = run_detector(det, |buf| stream.fill(buf), cfg.n_max)?;
        match rec.stop_time {
            Some(n) => Ok((n as f64, false)),
            None => Ok((cfg.n_max as f64, true)),
        }
    });
    let mut values = Vec::with_capacity(outs.len());
    let mut truncated = 0;
    for out in outs {
        let (v, t) = out?;
        values.push(v);
        if t {
            truncated += 1;
        }
    }
    let (mean, se) = mean_and_se(&values);
    Ok(McEstimate {
        mean,
        std_err: se,
        runs: cfg.runs,
        truncated,
    })
}

/// Detection-delay estimate: mean and s.e. of N_A − ν + 1 over the runs
/// with N_A ≥ ν, plus bookkeeping for skipped and truncated runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub mean: f64,
    pub std_err: f64,
    /// Runs with N_A ≥ ν that entered the mean.
    pub used: u64,
    /// Runs that stopped before the change (excluded by conditioning).
    pub skipped: u64,
    pub truncated: u64,
}

/// Expected delay E(N_A − ν + 1 | N_A ≥ ν) with the change at index ν
/// (ν = 1 puts the change in effect from the start, so the mean is
/// unconditional).
pub fn estimate_delay(
    det: &DetectorSpec,
    theta_post: &[f64],
    nu: u64,
    cfg: &RunConfig,
) -> Result<DelayEstimate> {
    if nu == 0 {
        return Err(Error::domain("estimate_delay", "nu must be >= 1"));
    }
    if theta_post.len() != det.channels() {
        return Err(Error::InvalidSpec(format!(
            "theta_post has {} entries but the detector expects {}",
            theta_post.len(),
            det.channels()
        )));
    }
    let outs: Vec<Result<(Option<f64>, bool)>> = per_run(cfg, |run| {
        let mut stream = ChangepointStream::new(
            det.model,
            theta_post.to_vec(),
            Some(nu),
            run_rng(cfg.seed, run),
        );
        let rec = run_detector(det, |buf| stream.fill(buf), cfg.n_max)?;
        match rec.stop_time {
            Some(n) if n >= nu => Ok((Some((n - nu + 1) as f64), false)),
            Some(_) => Ok((None, false)),
            None => Ok((Some((cfg.n_max - nu + 1) as f64), true)),
        }
    });
    let mut values = Vec::with_capacity(outs.len());
    let mut skipped = 0;
    let mut truncated = 0;
    for out in outs {
        match out? {
            (Some(v), t) => {
                values.push(v);
                if t {
                    truncated += 1;
                }
            }
            (None, _) => skipped += 1,
        }
    }
    let (mean, se) = mean_and_se(&values);
    Ok(DelayEstimate {
        mean,
        std_err: se,
        used: values.len() as u64,
        skipped,
        truncated,
    })
}

/// Delays for two detectors driven by common random numbers: each run
/// generates one observation stream and feeds both statistics, so the
/// difference estimate has far smaller variance than two independent
/// simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedDelay {
    pub first: DelayEstimate,
    pub second: DelayEstimate,
    /// Mean and s.e. of the per-run difference (first − second), over
    /// runs where both detectors stopped at or after ν.
    pub diff_mean: f64,
    pub diff_std_err: f64,
}

pub fn estimate_delay_paired(
    det_a: &DetectorSpec,
    det_b: &DetectorSpec,
    theta_post: &[f64],
    nu: u64,
    cfg: &RunConfig,
) -> Result<PairedDelay> {
    if nu == 0 {
        return Err(Error::domain("estimate_delay_paired", "nu must be >= 1"));
    }
    if det_a.channels() != det_b.channels() {
        return Err(Error::InvalidSpec(
            "paired detectors must share the channel count".into(),
        ));
    }
    let outs: Vec<Result<[(Option<u64>, bool); 2]>> = per_run(cfg, |run| {
        let mut stream = ChangepointStream::new(
            det_a.model,
            theta_post.to_vec(),
            Some(nu),
            run_rng(cfg.seed, run),
        );
        let mut sa = crate::detectors::DetectorState::new(det_a)?;
        let mut sb = crate::detectors::DetectorState::new(det_b)?;
        let mut buf = vec![0.0; det_a.channels()];
        for _ in 0..cfg.n_max {
            stream.fill(&mut buf);
            if sa.stopped_at().is_none() {
                sa.step(&buf)?;
            }
            if sb.stopped_at().is_none() {
                sb.step(&buf)?;
            }
            if sa.stopped_at().is_some() && sb.stopped_at().is_some() {
                break;
            }
        }
        let close = |s: &crate::detectors::DetectorState| match s.stopped_at() {
            Some(n) => (Some(n), false),
            None => (None, true),
        };
        Ok([close(&sa), close(&sb)])
    });
    let mut a_vals = Vec::new();
    let mut b_vals = Vec::new();
    let mut diffs = Vec::new();
    let mut a_skip = 0;
    let mut b_skip = 0;
    let mut a_trunc = 0;
    let mut b_trunc = 0;
    for out in outs {
        let [(na, ta), (nb, tb)] = out?;
        let delay = |n: Option<u64>, trunc: bool| -> Option<f64> {
            match (n, trunc) {
                (Some(n), _) if n >= nu => Some((n - nu + 1) as f64),
                (Some(_), _) => None,
                (None, _) => Some((cfg.n_max - nu + 1) as f64),
            }
        };
        let da = delay(na, ta);
        let db = delay(nb, tb);
        if ta {
            a_trunc += 1;
        }
        if tb {
            b_trunc += 1;
        }
        match da {
            Some(v) => a_vals.push(v),
            None => a_skip += 1,
        }
        match db {
            Some(v) => b_vals.push(v),
            None => b_skip += 1,
        }
        if let (Some(x), Some(y)) = (da, db) {
            diffs.push(x - y);
        }
    }
    let (am, ase) = mean_and_se(&a_vals);
    let (bm, bse) = mean_and_se(&b_vals);
    let (dm, dse) = mean_and_se(&diffs);
    Ok(PairedDelay {
        first: DelayEstimate {
            mean: am,
            std_err: ase,
            used: a_vals.len() as u64,
            skipped: a_skip,
            truncated: a_trunc,
        },
        second: DelayEstimate {
            mean: bm,
            std_err: bse,
            used: b_vals.len() as u64,
            skipped: b_skip,
            truncated: b_trunc,
        },
        diff_mean: dm,
        diff_std_err: dse,
    })
}

// ---------------------------------------------------------------------------
// Threshold calibration
// ---------------------------------------------------------------------------

/// Result of [`calibrate_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub arl: f64,
    pub std_err: f64,
    pub iterations: u32,
    pub converged: bool,
}

/// Conservative threshold: A = B guarantees E∞N_A ≥ B with no simulation.
pub fn conservative_threshold(target_arl: f64) -> f64 {
    target_arl
}

/// Find A with simulated ARL ≈ `target_arl`, starting from A₀ = B·γ̂ and
/// refining by secant iterations on ln A with common random numbers
/// (every iteration reuses the (seed, run) streams). Stops once the
/// estimate is within two standard errors of the target or after eight
/// iterations; a non-converged search returns the best iterate with
/// `converged = false`.
pub fn calibrate_threshold(
    base: &DetectorSpec,
    target_arl: f64,
    gamma_hat: f64,
    cfg: &RunConfig,
) -> Result<Calibration> {
    if !(target_arl > 1.0) {
        return Err(Error::domain(
            "calibrate_threshold",
            format!("target ARL must exceed 1, got {target_arl}"),
        ));
    }
    let eval = |a: f64| -> Result<McEstimate> {
        let mut det = base.clone();
        det.threshold = a;
        let n_max = (50.0 * a).ceil() as u64;
        let cfg_a = RunConfig {
            n_max: cfg.n_max.max(n_max),
            ..*cfg
        };
        estimate_arl(&det, &cfg_a)
    };
    let record = |a: f64, est: &McEstimate, iter: u32, best: &mut Option<Calibration>| -> bool {
        let closer = best
            .map(|b| (est.mean - target_arl).abs() < (b.arl - target_arl).abs())
            .unwrap_or(true);
        if closer {
            *best = Some(Calibration {
                a,
                arl: est.mean,
                std_err: est.std_err,
                iterations: iter,
                converged: false,
            });
        }
        (est.mean - target_arl).abs() <= 2.0 * est.std_err
    };

    let mut best: Option<Calibration> = None;
    let mut l0 = (target_arl * gamma_hat).max(1.0 + 1e-6).ln();
    let est0 = eval(l0.exp())?;
    if record(l0.exp(), &est0, 1, &mut best) {
        let mut done = best.expect("recorded");
        done.converged = true;
        return Ok(done);
    }
    let mut f0 = (est0.mean / target_arl).ln();
    // proportional correction gives the second point, secant from there
    let mut l1 = l0 - f0;
    for iter in 2..=8u32 {
        let est1 = eval(l1.exp())?;
        let converged = record(l1.exp(), &est1, iter, &mut best);
        if converged {
            let mut done = best.expect("recorded");
            done.converged = true;
            return Ok(done);
        }
        let f1 = (est1.mean / target_arl).ln();
        let denom = f1 - f0;
        let l2 = if denom.abs() < 1e-12 {
            l1 - f1
        } else {
            l1 - f1 * (l1 - l0) / denom
        };
        l0 = l1;
        f0 = f1;
        l1 = l2;
    }
    Ok(best.expect("at least one iterate evaluated"))
}

// ---------------------------------------------------------------------------
// Histogram of the limiting estimate distribution
// ---------------------------------------------------------------------------

/// Binned sample of θ under the adaptive sampling measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// (bin left edge, count), sorted by edge; edges are integer
    /// multiples of the bin width.
    pub bins: Vec<(f64, u64)>,
    pub paths: u64,
    pub sample_mean: f64,
    pub sample_sd: f64,
}

/// Empirical distribution of the estimate after `n_big` adaptive draws,
/// over `paths` independent paths.
pub fn simulate_g_histogram(
    model: ModelSpec,
    spec: &EstimatorSpec,
    n_big: u64,
    paths: u64,
    bin_width: f64,
    seed: u64,
    workers: usize,
) -> Result<Histogram> {
    if !(bin_width > 0.0) {
        return Err(Error::domain(
            "simulate_g_histogram",
            format!("bin width must be positive, got {bin_width}"),
        ));
    }
    let cfg = RunConfig {
        seed,
        runs: paths,
        n_max: n_big,
        workers,
    };
    let finals: Vec<Result<f64>> = per_run(&cfg, |run| {
        let mut sampler = QSampler::keyed(model, spec, seed, run)?;
        for _ in 0..n_big {
            sampler.next_obs();
        }
        Ok(sampler.current_estimate())
    });
    let mut samples = Vec::with_capacity(finals.len());
    for f in finals {
        samples.push(f?);
    }
    let mut map = std::collections::BTreeMap::new();
    for &v in &samples {
        let idx = (v / bin_width).floor() as i64;
        *map.entry(idx).or_insert(0u64) += 1;
    }
    let (mean, se) = mean_and_se(&samples);
    let sd = se * (samples.len() as f64).sqrt();
    Ok(Histogram {
        bin_width,
        bins: map
            .into_iter()
            .map(|(i, c)| (i as f64 * bin_width, c))
            .collect(),
        paths,
        sample_mean: mean,
        sample_sd: sd,
    })
}

// ---------------------------------------------------------------------------
// Anticipating-estimator pathology demo
// ---------------------------------------------------------------------------

/// Stopping frequency under the null for the *anticipating* normal-mean
/// test: the n-th likelihood ratio is scored with the estimate that
/// already includes the n-th observation. The law of the iterated
/// logarithm makes this rule stop with probability one under the null,
/// so the empirical frequency blows through the e^{−b} bound that the
/// nonanticipating construction guarantees.
pub fn anticipating_stop_frequency(b: f64, cfg: &RunConfig) -> McEstimate {
    let stops: Vec<f64> = per_run(cfg, |run| {
        let mut rng = run_rng(cfg.seed, run);
        let mut sum = 0.0;
        let mut log_lambda = 0.0;
        for n in 1..=cfg.n_max {
            let x: f64 = StandardNormal.sample(&mut rng);
            sum += x;
            let mu = sum / n as f64;
            log_lambda += mu * x - 0.5 * mu * mu;
            if log_lambda >= b {
                return 1.0;
            }
        }
        0.0
    });
    let (mean, se) = mean_and_se(&stops);
    McEstimate {
        mean,
        std_err: se,
        runs: cfg.runs,
        truncated: 0,
    }
}
