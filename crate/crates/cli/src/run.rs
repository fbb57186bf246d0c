//! Subcommand implementations: build library specs from the effective
//! configuration, run, and render deterministic CSV.

use std::fmt::Write as _;

use srrs::detectors::{DetectorSpec, Scheme};
use srrs::estimators::{EstimatorKind, EstimatorSpec};
use srrs::models::{ess_difference, ess_g, ess_h, kl_gamma, nu_of_mu, r_const, v2, ModelSpec};
use srrs::montecarlo::{
    anticipating_stop_frequency, calibrate_threshold, conservative_threshold, estimate_arl,
    estimate_delay, estimate_gamma_const, simulate_g_histogram, QSampler, RunConfig,
};
use srrs::powerone::{gamma_const_quadrature_normal, run_tau_b};

use crate::config::{ConfigError, KvConfig, Result};

/// What the caller should do with the finished run.
pub enum Outcome {
    /// Plain output, exit 0.
    Done(String),
    /// Detector raised an alarm, exit 3.
    Alarm(String),
}

// ---------------------------------------------------------------------------
// Spec builders
// ---------------------------------------------------------------------------

pub fn build_model(cfg: &KvConfig) -> Result<ModelSpec> {
    let family = cfg.get("family").unwrap_or("gamma");
    match family {
        "gamma" => {
            let theta0 = cfg.get_f64("theta0")?.unwrap_or(1.0);
            Ok(ModelSpec::gamma_shape(theta0)?)
        }
        "normal" => Ok(ModelSpec::normal_mean()),
        "bernoulli" => {
            let p0 = cfg.require_f64("p0")?;
            Ok(ModelSpec::bernoulli(p0)?)
        }
        other => Err(ConfigError(format!(
            "unknown family {other:?} (gamma, normal, bernoulli)"
        ))),
    }
}

pub fn build_estimator(cfg: &KvConfig) -> Result<EstimatorSpec> {
    let kind = match cfg.get("estimator").unwrap_or("mom") {
        "mom" => EstimatorKind::MomGamma {
            s: cfg.get_f64("s")?.unwrap_or(0.0),
            t: cfg.get_f64("t")?.unwrap_or(0.0),
        },
        "mle" => EstimatorKind::MleGamma {
            s: cfg.get_f64("s")?.unwrap_or(0.0),
            t: cfg.get_f64("t")?.unwrap_or(0.0),
        },
        "fixed" => EstimatorKind::Fixed {
            theta: cfg.require_f64("theta")?,
        },
        "normal-mean" => EstimatorKind::NormalMean {
            s: cfg.get_f64("s")?.unwrap_or(0.0),
            t: cfg.get_f64("t")?.unwrap_or(0.0),
        },
        "bernoulli-beta" => EstimatorKind::BernoulliBeta {
            s: cfg.require_f64("s")?,
            t: cfg.require_f64("t")?,
        },
        other => {
            return Err(ConfigError(format!(
                "unknown estimator {other:?} (mom, mle, fixed, normal-mean, bernoulli-beta)"
            )))
        }
    };
    let mut spec = EstimatorSpec::new(kind)?;
    match (cfg.get_f64("clamp-lo")?, cfg.get_f64("clamp-hi")?) {
        (Some(lo), Some(hi)) => spec = spec.with_clamp(lo, hi)?,
        (None, None) => {}
        _ => {
            return Err(ConfigError(
                "clamp-lo and clamp-hi must be given together".into(),
            ))
        }
    }
    Ok(spec)
}

pub fn build_detector(cfg: &KvConfig, model: ModelSpec, threshold: f64) -> Result<DetectorSpec> {
    let scheme = match cfg.get("scheme").unwrap_or("srrs") {
        "srrs" => Scheme::Srrs {
            est: build_estimator(cfg)?,
        },
        "sr-fixed" => Scheme::SrFixed {
            theta: cfg.require_f64("theta")?,
        },
        "pair-mixture" => Scheme::PairMixture {
            theta1: cfg.require_f64("theta1")?,
            theta2: cfg.require_f64("theta2")?,
        },
        "normal-mixture" => Scheme::NormalMixture {
            s: cfg.get_f64("s")?.unwrap_or(0.0),
            t: cfg.require_f64("t")?,
        },
        "multi" => {
            let m = cfg.require_u64("m")? as usize;
            let est = build_estimator(cfg)?;
            Scheme::Multi {
                ests: vec![est; m],
            }
        }
        other => {
            return Err(ConfigError(format!(
                "unknown scheme {other:?} (srrs, sr-fixed, pair-mixture, normal-mixture, multi)"
            )))
        }
    };
    let spec = DetectorSpec::new(model, scheme, threshold)?
        .with_daily(cfg.get_bool("daily")?)?;
    Ok(spec)
}

pub fn build_run_config(cfg: &KvConfig, default_nmax: u64) -> Result<RunConfig> {
    let seed = cfg.get_u64("seed")?.unwrap_or(1);
    let runs = cfg.get_u64("runs")?.unwrap_or(1000).max(1);
    let n_max = cfg.get_u64("nmax")?.unwrap_or(default_nmax).max(1);
    let workers = match cfg.get_u64("workers")? {
        Some(w) => w as usize,
        None => std::env::var("SRRS_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0),
    };
    Ok(RunConfig::new(seed, runs, n_max).with_workers(workers))
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

fn header(cfg: &KvConfig) -> String {
    let mut out = String::new();
    for line in cfg.render().lines() {
        let _ = writeln!(out, "# {line}");
    }
    out
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Summary row shared by the Monte Carlo subcommands.
#[allow(clippy::too_many_arguments)]
fn summary_csv(
    cfg: &KvConfig,
    scheme: &str,
    family: &str,
    s: Option<f64>,
    t: Option<f64>,
    b0: Option<f64>,
    b1: Option<f64>,
    a: Option<f64>,
    estimate: f64,
    std_err: f64,
    runs: u64,
    truncated: u64,
) -> String {
    let mut out = header(cfg);
    out.push_str("scheme,family,s,t,b0,b1,a,estimate,std_err,runs,truncated\n");
    let _ = writeln!(
        out,
        "{scheme},{family},{},{},{},{},{},{estimate},{std_err},{runs},{truncated}",
        opt_str(s),
        opt_str(t),
        opt_str(b0),
        opt_str(b1),
        opt_str(a),
    );
    out
}

fn estimator_st(cfg: &KvConfig) -> (Option<f64>, Option<f64>) {
    (
        cfg.get_f64("s").ok().flatten(),
        cfg.get_f64("t").ok().flatten(),
    )
}

// ---------------------------------------------------------------------------
// Subcommand runners
// ---------------------------------------------------------------------------

pub fn theory(cfg: &KvConfig) -> Result<Outcome> {
    let mut rows: Vec<(String, f64)> = Vec::new();
    if let Some(mu) = cfg.get_f64("nu")? {
        rows.push((format!("nu({mu})"), nu_of_mu(mu)?));
    }
    if let Some(t) = cfg.get_f64("v2")? {
        rows.push((format!("v2({t})"), v2(t)?));
    }
    if let Some(t) = cfg.get_f64("r")? {
        rows.push((format!("r({t})"), r_const(t)?));
    }
    if let Some(t) = cfg.get_f64("g")? {
        rows.push((format!("g({t})"), ess_g(t)?));
    }
    if let Some(t) = cfg.get_f64("h")? {
        rows.push((format!("h({t})"), ess_h(t)?));
    }
    if let Some(args) = cfg.get_f64_list("kl")? {
        if args.len() != 2 {
            return Err(ConfigError("kl expects theta,phi".into()));
        }
        rows.push((format!("kl({},{})", args[0], args[1]), kl_gamma(args[0], args[1])?));
    }
    if let Some(args) = cfg.get_f64_list("ess")? {
        if args.len() != 3 {
            return Err(ConfigError("ess expects mu,s,t".into()));
        }
        rows.push((
            format!("ess({},{},{})", args[0], args[1], args[2]),
            ess_difference(args[0], args[1], args[2])?,
        ));
    }
    if let Some(args) = cfg.get_f64_list("gamma-quadrature")? {
        if args.len() != 2 {
            return Err(ConfigError("gamma-quadrature expects s,t".into()));
        }
        rows.push((
            format!("gamma-quadrature({},{})", args[0], args[1]),
            gamma_const_quadrature_normal(args[0], args[1])?,
        ));
    }
    if rows.is_empty() {
        return Err(ConfigError(
            "theory: nothing to compute (give nu, v2, r, g, h, kl, ess or gamma-quadrature)"
                .into(),
        ));
    }
    let mut out = header(cfg);
    out.push_str("quantity,value\n");
    for (q, v) in rows {
        let _ = writeln!(out, "{q},{v}");
    }
    Ok(Outcome::Done(out))
}

pub fn powerone(cfg: &KvConfig) -> Result<Outcome> {
    let model = build_model(cfg)?;
    let est = build_estimator(cfg)?;
    let b = cfg.require_f64("b")?;
    let rc = build_run_config(cfg, 100_000)?;
    let sampler_kind = cfg.get("sampler").unwrap_or("q");
    let sample_theta = cfg.get_f64("sample-theta")?.unwrap_or(model.baseline);

    let mut out = header(cfg);
    out.push_str("run_id,stop_time,overshoot,truncated\n");
    for run in 0..rc.runs {
        let rec = match sampler_kind {
            "q" => {
                let mut q = QSampler::keyed(model, &est, rc.seed, run)?;
                run_tau_b(model, &est, b, || q.next_obs(), rc.n_max)?
            }
            "iid" => {
                let mut stream = srrs::montecarlo::ChangepointStream::new(
                    model,
                    vec![sample_theta],
                    Some(1),
                    srrs::montecarlo::run_rng(rc.seed, run),
                );
                let mut buf = [0.0];
                run_tau_b(
                    model,
                    &est,
                    b,
                    || {
                        stream.fill(&mut buf);
                        buf[0]
                    },
                    rc.n_max,
                )?
            }
            other => {
                return Err(ConfigError(format!(
                    "unknown sampler {other:?} (q, iid)"
                )))
            }
        };
        let _ = writeln!(
            out,
            "{run},{},{},{}",
            rec.stop_time.map(|n| n.to_string()).unwrap_or_default(),
            rec.overshoot.map(|o| o.to_string()).unwrap_or_default(),
            rec.is_truncated() as u8
        );
    }
    Ok(Outcome::Done(out))
}

pub fn gamma_const(cfg: &KvConfig) -> Result<Outcome> {
    let model = build_model(cfg)?;
    let est = build_estimator(cfg)?;
    let b0 = cfg.require_f64("b0")?;
    let b1 = cfg.require_f64("b1")?;
    let rc = build_run_config(cfg, 50_000)?;
    let ladder = estimate_gamma_const(model, &est, b0, b1, &rc)?;
    let (s, t) = estimator_st(cfg);
    Ok(Outcome::Done(summary_csv(
        cfg,
        "power-one",
        model.family.name(),
        s,
        t,
        Some(b0),
        Some(b1),
        None,
        ladder.gamma_hat,
        ladder.std_err,
        ladder.runs,
        ladder.truncated_b1 + ladder.truncated_b0,
    )))
}

pub fn arl(cfg: &KvConfig) -> Result<Outcome> {
    let model = build_model(cfg)?;
    let a = cfg.require_f64("a")?;
    let det = build_detector(cfg, model, a)?;
    let rc = build_run_config(cfg, (50.0 * a).ceil() as u64)?;
    let est = estimate_arl(&det, &rc)?;
    let (s, t) = estimator_st(cfg);
    Ok(Outcome::Done(summary_csv(
        cfg,
        det.scheme.name(),
        model.family.name(),
        s,
        t,
        None,
        None,
        Some(a),
        est.mean,
        est.std_err,
        est.runs,
        est.truncated,
    )))
}

pub fn delay(cfg: &KvConfig) -> Result<Outcome> {
    let model = build_model(cfg)?;
    let a = cfg.require_f64("a")?;
    let det = build_detector(cfg, model, a)?;
    let nu = cfg.get_u64("nu")?.unwrap_or(1);
    let post = cfg
        .get_f64_list("theta-post")?
        .ok_or_else(|| ConfigError("missing required key \"theta-post\"".into()))?;
    let post = if post.len() == 1 && det.channels() > 1 {
        vec![post[0]; det.channels()]
    } else {
        post
    };
    let rc = build_run_config(cfg, (50.0 * a).ceil() as u64)?;
    let est = estimate_delay(&det, &post, nu, &rc)?;
    let (s, t) = estimator_st(cfg);
    Ok(Outcome::Done(summary_csv(
        cfg,
        det.scheme.name(),
        model.family.name(),
        s,
        t,
        None,
        None,
        Some(a),
        est.mean,
        est.std_err,
        est.used,
        est.truncated,
    )))
}

pub fn calibrate(cfg: &KvConfig) -> Result<Outcome> {
    let model = build_model(cfg)?;
    let target = cfg.require_f64("target-arl")?;
    let (s, t) = estimator_st(cfg);
    if cfg.get_bool("conservative")? {
        let a = conservative_threshold(target);
        return Ok(Outcome::Done(summary_csv(
            cfg,
            "conservative",
            model.family.name(),
            s,
            t,
            None,
            None,
            Some(a),
            a,
            0.0,
            0,
            0,
        )));
    }
    let gamma_hat = cfg.require_f64("gamma")?;
    let det = build_detector(cfg, model, target)?;
    let rc = build_run_config(cfg, 1)?;
    let cal = calibrate_threshold(&det, target, gamma_hat, &rc)?;
    let mut out = header(cfg);
    out.push_str("scheme,family,s,t,target_arl,a,arl,std_err,iterations,converged\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{target},{},{},{},{},{}",
        det.scheme.name(),
        model.family.name(),
        opt_str(s),
        opt_str(t),
        cal.a,
        cal.arl,
        cal.std_err,
        cal.iterations,
        cal.converged as u8
    );
    Ok(Outcome::Done(out))
}

pub fn hist_g(cfg: &KvConfig) -> Result<Outcome> {
    let model = build_model(cfg)?;
    let est = build_estimator(cfg)?;
    let n_big = cfg.get_u64("nbig")?.unwrap_or(10_000);
    let paths = cfg.get_u64("paths")?.unwrap_or(10_000);
    let bin_width = cfg.get_f64("bin-width")?.unwrap_or(0.1);
    let rc = build_run_config(cfg, n_big)?;
    let hist = simulate_g_histogram(model, &est, n_big, paths, bin_width, rc.seed, rc.workers)?;
    let mut out = header(cfg);
    let _ = writeln!(out, "# sample_mean={}", hist.sample_mean);
    let _ = writeln!(out, "# sample_sd={}", hist.sample_sd);
    out.push_str("bin_left,count\n");
    for (left, count) in &hist.bins {
        let _ = writeln!(out, "{left},{count}");
    }
    Ok(Outcome::Done(out))
}

pub fn demo_anticipating(cfg: &KvConfig) -> Result<Outcome> {
    let b = cfg.get_f64("b")?.unwrap_or(5.0);
    let rc = build_run_config(cfg, 100_000)?;
    let est = anticipating_stop_frequency(b, &rc);
    let bound = (-b).exp();
    let mut out = header(cfg);
    out.push_str("b,runs,nmax,stop_frequency,std_err,e_minus_b,ratio\n");
    let _ = writeln!(
        out,
        "{b},{},{},{},{},{bound},{}",
        rc.runs,
        rc.n_max,
        est.mean,
        est.std_err,
        est.mean / bound
    );
    Ok(Outcome::Done(out))
}

// ---------------------------------------------------------------------------
// Streaming detection
// ---------------------------------------------------------------------------

pub fn detect(cfg: &KvConfig, input: &mut dyn std::io::BufRead) -> Result<Outcome> {
    let model = build_model(cfg)?;
    let a = cfg.require_f64("a")?;
    let det = build_detector(cfg, model, a)?;
    let mut state = srrs::detectors::DetectorState::new(&det)?;
    let channels = det.channels();
    let mut out = header(cfg);
    let mut line = String::new();
    loop {
        line.clear();
        let read = input
            .read_line(&mut line)
            .map_err(|e| ConfigError(format!("input stream: {e}")))?;
        if read == 0 {
            break;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let obs: Vec<f64> = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| ConfigError(format!("bad observation {p:?}")))
            })
            .collect::<Result<_>>()?;
        if obs.len() != channels {
            return Err(ConfigError(format!(
                "expected {channels} columns, got {} in {trimmed:?}",
                obs.len()
            )));
        }
        let r = state.step(&obs)?;
        if state.stopped_at().is_some() {
            let _ = writeln!(out, "ALARM n={} R={r}", state.n());
            return Ok(Outcome::Alarm(out));
        }
    }
    let _ = writeln!(out, "# end-of-stream n={} R={}", state.n(), state.r());
    Ok(Outcome::Done(out))
}
