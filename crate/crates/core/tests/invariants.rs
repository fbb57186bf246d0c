//! Cross-module simulation invariants that back the spot checks in the
//! acceptance suite: power-one behaviour, worst-delay ordering, interval
//! stability of the ladder estimator, the limiting distribution of the
//! adaptive sampler, first-order delay asymptotics and threshold
//! calibration.

use rand_distr::Distribution;
use srrs::detectors::{DetectorSpec, Scheme};
use srrs::estimators::{EstimatorKind, EstimatorSpec};
use srrs::models::{kl_gamma, ModelSpec};
use srrs::montecarlo::{
    calibrate_threshold, estimate_delay, estimate_gamma_const, run_rng, simulate_g_histogram,
    QSampler, RunConfig,
};
use srrs::powerone::run_tau_b;
use srrs::special::norm_cdf;

fn gamma_model() -> ModelSpec {
    ModelSpec::gamma_shape(1.0).unwrap()
}

fn mom(s: f64, t: f64) -> EstimatorSpec {
    EstimatorSpec::new(EstimatorKind::MomGamma { s, t }).unwrap()
}

#[test]
fn power_one_under_every_alternative_tested() {
    // under theta != theta0 every run must stop well before the cap
    let spec = mom(1.0, 1.0);
    for (i, theta) in [0.5, 2.0].into_iter().enumerate() {
        for run in 0..1_000u64 {
            let mut rng = run_rng(7_000 + i as u64, run);
            let gamma = rand_distr::Gamma::new(theta, 1.0).unwrap();
            let rec = run_tau_b(
                gamma_model(),
                &spec,
                5.0,
                || gamma.sample(&mut rng),
                100_000,
            )
            .unwrap();
            assert!(
                rec.stop_time.is_some(),
                "run {run} at theta={theta} failed to stop"
            );
        }
    }
}

#[test]
fn worst_delay_attained_at_change_from_start() {
    // E_{nu=1} N_A >= E_{nu=5}(N_A - 4 | N_A >= 5) within two combined s.e.
    let det = DetectorSpec::new(gamma_model(), Scheme::Srrs { est: mom(1.0, 1.0) }, 578.0)
        .unwrap();
    let cfg = RunConfig::new(7100, 4_000, 30_000);
    let at_start = estimate_delay(&det, &[3.0], 1, &cfg).unwrap();
    let later = estimate_delay(&det, &[3.0], 5, &cfg).unwrap();
    let combined =
        (at_start.std_err * at_start.std_err + later.std_err * later.std_err).sqrt();
    assert!(
        at_start.mean >= later.mean - 2.0 * combined,
        "nu=1 delay {} vs nu=5 conditional delay {} (2 combined se {})",
        at_start.mean,
        later.mean,
        2.0 * combined
    );
}

#[test]
fn ladder_estimates_stable_across_intervals() {
    // the three b-intervals must agree pairwise within 3 combined s.e.
    let mut estimates = Vec::new();
    for (i, (b0, b1, n_max)) in
        [(10.0, 15.0, 50_000u64), (15.0, 20.0, 75_000), (20.0, 25.0, 100_000)]
            .into_iter()
            .enumerate()
    {
        let cfg = RunConfig::new(7200 + i as u64, 2_000, n_max);
        estimates.push(
            estimate_gamma_const(gamma_model(), &mom(1.0, 1.0), b0, b1, &cfg).unwrap(),
        );
    }
    for i in 0..estimates.len() {
        for j in (i + 1)..estimates.len() {
            let (a, b) = (&estimates[i], &estimates[j]);
            let combined = (a.std_err * a.std_err + b.std_err * b.std_err).sqrt();
            assert!(
                (a.gamma_hat - b.gamma_hat).abs() <= 3.0 * combined,
                "intervals {i} and {j}: {} vs {}",
                a.gamma_hat,
                b.gamma_hat
            );
        }
    }
}

#[test]
fn adaptive_sampler_limit_is_standard_normal_at_tuned_t() {
    // with t = 0.42626 the limiting estimate distribution is N(0,1);
    // Kolmogorov-Smirnov distance under 0.02 at 10^4 paths
    let spec = EstimatorSpec::new(EstimatorKind::NormalMean { s: 0.0, t: 0.42626 }).unwrap();
    let paths = 10_000u64;
    let mut finals = Vec::with_capacity(paths as usize);
    for run in 0..paths {
        let mut sampler = QSampler::keyed(ModelSpec::normal_mean(), &spec, 7300, run).unwrap();
        for _ in 0..10_000 {
            sampler.next_obs();
        }
        finals.push(sampler.current_estimate());
    }
    finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = finals.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, &x) in finals.iter().enumerate() {
        let f = norm_cdf(x);
        ks = ks.max((f - i as f64 / n).abs());
        ks = ks.max(((i as f64 + 1.0) / n - f).abs());
    }
    assert!(ks < 0.02, "KS distance {ks}");
}

#[test]
fn histogram_of_g_matches_martingale_mean() {
    let hist =
        simulate_g_histogram(gamma_model(), &mom(1.0, 1.0), 5_000, 2_000, 0.1, 7400, 0).unwrap();
    let total: u64 = hist.bins.iter().map(|(_, c)| c).sum();
    assert_eq!(total, 2_000);
    assert!(hist.bins.iter().all(|(left, _)| *left >= 0.0));
    let se = hist.sample_sd / (2_000f64).sqrt();
    assert!(
        (hist.sample_mean - 1.0).abs() <= 3.0 * se,
        "mean {} se {se}",
        hist.sample_mean
    );
}

#[test]
fn fixed_detector_delay_tracks_kl_rate() {
    // delay / ln A -> 1/I(theta', theta0) for the fixed-parameter scheme
    let theta = 2.0;
    let a = (16.0f64).exp();
    let det = DetectorSpec::new(gamma_model(), Scheme::SrFixed { theta }, a).unwrap();
    let cfg = RunConfig::new(7500, 2_000, 100_000);
    let est = estimate_delay(&det, &[theta], 1, &cfg).unwrap();
    let slope = est.mean / a.ln();
    let predicted = 1.0 / kl_gamma(theta, 1.0).unwrap();
    assert!(
        (slope - predicted).abs() / predicted < 0.10,
        "slope {slope} vs 1/KL {predicted}"
    );
}

#[test]
fn calibration_recovers_published_threshold() {
    // t = 0 at target ARL 500: published threshold 221
    let det = DetectorSpec::new(gamma_model(), Scheme::Srrs { est: mom(0.0, 0.0) }, 1.0)
        .unwrap();
    let cfg = RunConfig::new(7600, 800, 30_000);
    let cal = calibrate_threshold(&det, 500.0, 0.425, &cfg).unwrap();
    assert!(
        (cal.a - 221.0).abs() <= 0.05 * 221.0,
        "calibrated A = {} (arl {} se {})",
        cal.a,
        cal.arl,
        cal.std_err
    );
}
