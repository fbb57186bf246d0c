//! Acceptance suite: one test per published-results criterion, each
//! printing a PASS/FAIL line per sub-check (visible with --nocapture or
//! on failure).
//!
//! Budget profiles: the default reduced profile follows the sanctioned
//! scaled protocol (Table 2 at 2,000 runs with 8% tolerance; Table 4 at
//! 8,000 runs with tolerances widened by sqrt(40000/8000)). Setting
//! SRRS_ACCEPT_FULL=1 runs the full published budgets (10,000 and 40,000
//! runs) with the unwidened tolerances; expect tens of minutes.

use srrs::detectors::{DetectorSpec, DetectorState, Scheme};
use srrs::estimators::{EstimatorKind, EstimatorSpec, EstimatorState};
use srrs::models::{ess_g, ess_h, nu_of_mu, v2, ModelSpec};
use srrs::montecarlo::{
    anticipating_stop_frequency, estimate_arl, estimate_delay, estimate_delay_paired,
    estimate_gamma_const, run_rng, RunConfig,
};
use srrs::powerone::{gamma_const_quadrature_normal, TestState};
use srrs::special::{digamma, digamma_inverse, ln_gamma};

fn full_scale() -> bool {
    std::env::var("SRRS_ACCEPT_FULL").map(|v| v == "1").unwrap_or(false)
}

fn gamma_model() -> ModelSpec {
    ModelSpec::gamma_shape(1.0).unwrap()
}

fn mom(s: f64, t: f64) -> EstimatorSpec {
    EstimatorSpec::new(EstimatorKind::MomGamma { s, t }).unwrap()
}

struct Criterion {
    name: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        println!("criterion {name}");
        Criterion {
            name,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, label: &str, ok: bool, detail: String) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("  {verdict} {label}: {detail}");
        if !ok {
            self.failures.push(format!("{label}: {detail}"));
        }
    }

    fn finish(self) {
        assert!(
            self.failures.is_empty(),
            "criterion {} failed:\n{}",
            self.name,
            self.failures.join("\n")
        );
    }
}

// ---------------------------------------------------------------------------
// 1. Overshoot-constant table: nine (t, interval) cells, 5000 runs each
// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_table1_overshoot_constants() {
    let mut crit = Criterion::new("1: gamma ladder estimates across priors and b-intervals");
    // published (estimate, s.e.) for t = 0, 0.5, 1 x [10,15], [15,20], [20,25]
    let published: [(f64, [(f64, f64); 3]); 3] = [
        (0.0, [(0.4290, 0.0044), (0.4256, 0.0044), (0.4215, 0.0044)]),
        (0.5, [(0.5472, 0.0039), (0.5502, 0.0039), (0.5430, 0.0040)]),
        (1.0, [(0.6065, 0.0035), (0.6050, 0.0036), (0.6061, 0.0036)]),
    ];
    let intervals = [(10.0, 15.0, 50_000u64), (15.0, 20.0, 75_000), (20.0, 25.0, 100_000)];
    for (ti, &(t, cells)) in published.iter().enumerate() {
        for (ii, &(pub_gamma, pub_se)) in cells.iter().enumerate() {
            let (b0, b1, n_max) = intervals[ii];
            let cfg = RunConfig::new(9100 + (ti * 3 + ii) as u64, 5_000, n_max);
            let est = estimate_gamma_const(gamma_model(), &mom(t, t), b0, b1, &cfg).unwrap();
            let tol = 3.0 * (pub_se * pub_se + est.std_err * est.std_err).sqrt();
            crit.check(
                &format!("t={t} [{b0},{b1}]"),
                (est.gamma_hat - pub_gamma).abs() <= tol,
                format!(
                    "gamma_hat={:.4} se={:.4} vs published {pub_gamma} (tol {tol:.4}, trunc {}/{})",
                    est.gamma_hat, est.std_err, est.truncated_b1, est.truncated_b0
                ),
            );
        }
    }
    crit.finish();
}

// ---------------------------------------------------------------------------
// 2. ARL at the published thresholds (t = 1), and the A/ARL ~ gamma link
// ---------------------------------------------------------------------------

#[test]
fn acceptance_2_table2_arl_reproduction() {
    let mut crit = Criterion::new("2: ARL to false alarm at the published t=1 thresholds");
    let (runs, rel_tol) = if full_scale() {
        (10_000u64, 0.05)
    } else {
        (2_000u64, 0.08)
    };
    // own overshoot-constant estimate for the ratio check
    let ladder = estimate_gamma_const(
        gamma_model(),
        &mom(1.0, 1.0),
        10.0,
        15.0,
        &RunConfig::new(9200, 5_000, 50_000),
    )
    .unwrap();
    for (a, target) in [(309.0, 500.0), (456.0, 750.0), (578.0, 1000.0)] {
        let det = DetectorSpec::new(gamma_model(), Scheme::Srrs { est: mom(1.0, 1.0) }, a).unwrap();
        let cfg = RunConfig::new(9201, runs, (50.0 * a).ceil() as u64);
        let est = estimate_arl(&det, &cfg).unwrap();
        crit.check(
            &format!("ARL(A={a})"),
            (est.mean - target).abs() <= rel_tol * target,
            format!(
                "arl={:.1} se={:.1} vs target {target} (tol {:.0}%, truncated {})",
                est.mean,
                est.std_err,
                rel_tol * 100.0,
                est.truncated
            ),
        );
        let ratio = a / est.mean;
        let ratio_se = a * est.std_err / (est.mean * est.mean);
        let tol = 3.0 * (ratio_se * ratio_se + ladder.std_err * ladder.std_err).sqrt();
        crit.check(
            &format!("A/ARL(A={a})"),
            (ratio - ladder.gamma_hat).abs() <= tol,
            format!(
                "ratio={ratio:.4} vs gamma_hat={:.4} (tol {tol:.4})",
                ladder.gamma_hat
            ),
        );
    }
    crit.finish();
}

// ---------------------------------------------------------------------------
// 3. Detection-delay spot checks at the published thresholds
// ---------------------------------------------------------------------------

#[test]
fn acceptance_3_table3_delay_spot_checks() {
    let mut crit = Criterion::new("3: worst-case detection delays, change from the start");
    let mle = EstimatorSpec::new(EstimatorKind::MleGamma { s: 0.0, t: 0.0 }).unwrap();
    let cells: Vec<(&str, Scheme, f64, f64, f64)> = vec![
        ("t=0 theta=0.35", Scheme::Srrs { est: mom(0.0, 0.0) }, 440.0, 0.35, 10.2),
        ("t=0.5 theta=0.5", Scheme::Srrs { est: mom(0.5, 0.5) }, 555.0, 0.5, 17.6),
        ("t=1 theta=3", Scheme::Srrs { est: mom(1.0, 1.0) }, 578.0, 3.0, 8.0),
        ("mle theta=2", Scheme::Srrs { est: mle }, 632.0, 2.0, 16.3),
        (
            "pm(0.5,2) theta=1.25",
            Scheme::PairMixture {
                theta1: 0.5,
                theta2: 2.0,
            },
            565.0,
            1.25,
            150.3,
        ),
    ];
    for (i, (label, scheme, a, theta, published)) in cells.into_iter().enumerate() {
        let det = DetectorSpec::new(gamma_model(), scheme, a).unwrap();
        let cfg = RunConfig::new(9300 + i as u64, 10_000, (50.0 * a).ceil() as u64);
        let est = estimate_delay(&det, &[theta], 1, &cfg).unwrap();
        crit.check(
            label,
            (est.mean - published).abs() <= 0.05 * published,
            format!(
                "delay={:.2} se={:.3} vs published {published} (tol 5%)",
                est.mean, est.std_err
            ),
        );
    }
    crit.finish();
}

// ---------------------------------------------------------------------------
// 4. Normal-mean comparison at A = 500: ARLs, delays and the SRRS-minus-
//    mixture gap under common random numbers
// ---------------------------------------------------------------------------

#[test]
fn acceptance_4_table4_normal_comparison() {
    let mut crit = Criterion::new("4: normal-mean scheme vs conjugate mixture at A=500");
    let (runs, widen) = if full_scale() {
        (40_000u64, 1.0)
    } else {
        (8_000u64, (40_000f64 / 8_000f64).sqrt())
    };
    let model = ModelSpec::normal_mean();
    let (s, t) = (0.0, 0.42626);
    let srrs = DetectorSpec::new(
        model,
        Scheme::Srrs {
            est: EstimatorSpec::new(EstimatorKind::NormalMean { s, t }).unwrap(),
        },
        500.0,
    )
    .unwrap();
    let mix = DetectorSpec::new(model, Scheme::NormalMixture { s, t }, 500.0).unwrap();

    let arl_cfg = RunConfig::new(9400, runs, 25_000);
    let arl_srrs = estimate_arl(&srrs, &arl_cfg).unwrap();
    let arl_mix = estimate_arl(&mix, &arl_cfg).unwrap();
    let arl_tol = 0.03 * widen;
    crit.check(
        "ARL srrs",
        (arl_srrs.mean - 739.0).abs() <= arl_tol * 739.0,
        format!(
            "arl={:.1} se={:.1} vs published 739 (tol {:.1}%)",
            arl_srrs.mean,
            arl_srrs.std_err,
            arl_tol * 100.0
        ),
    );
    crit.check(
        "ARL mixture",
        (arl_mix.mean - 748.0).abs() <= arl_tol * 748.0,
        format!(
            "arl={:.1} se={:.1} vs published 748 (tol {:.1}%)",
            arl_mix.mean,
            arl_mix.std_err,
            arl_tol * 100.0
        ),
    );

    let delay_cfg = RunConfig::new(9401, runs, 25_000);
    let at_mu_1 = estimate_delay_paired(&srrs, &mix, &[1.0], 1, &delay_cfg).unwrap();
    let delay_tol = 0.02 * widen;
    crit.check(
        "delay srrs mu=1",
        (at_mu_1.first.mean - 14.05).abs() <= delay_tol * 14.05,
        format!(
            "delay={:.3} se={:.3} vs published 14.05 (tol {:.1}%)",
            at_mu_1.first.mean,
            at_mu_1.first.std_err,
            delay_tol * 100.0
        ),
    );
    crit.check(
        "delay mixture mu=1",
        (at_mu_1.second.mean - 13.60).abs() <= delay_tol * 13.60,
        format!(
            "delay={:.3} se={:.3} vs published 13.60 (tol {:.1}%)",
            at_mu_1.second.mean,
            at_mu_1.second.std_err,
            delay_tol * 100.0
        ),
    );

    for (i, mu) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let cfg = RunConfig::new(9402 + i as u64, runs, 25_000);
        let pair = estimate_delay_paired(&srrs, &mix, &[mu], 1, &cfg).unwrap();
        let gap = pair.diff_mean;
        // published gaps sit at 0.4-0.45; the criterion allows +-0.2
        // around that band and requires a positive sign
        let ok = gap > 0.0 && (0.2..=0.7).contains(&gap);
        crit.check(
            &format!("gap mu={mu}"),
            ok,
            format!("srrs - mixture = {gap:.3} se={:.3}", pair.diff_std_err),
        );
    }
    crit.finish();
}

// ---------------------------------------------------------------------------
// 5. Analytic constants and the quadrature/Monte-Carlo agreement
// ---------------------------------------------------------------------------

#[test]
fn acceptance_5_analytic_constants() {
    let mut crit = Criterion::new("5: analytic overshoot constants");
    let v = v2(0.42626).unwrap();
    crit.check(
        "v2(0.42626)",
        (v - 1.0).abs() <= 1e-4,
        format!("v2={v:.7} vs 1 (tol 1e-4)"),
    );
    let quad = gamma_const_quadrature_normal(0.0, 0.42626).unwrap();
    crit.check(
        "quadrature gamma",
        (quad - 2.0 / 3.0).abs() <= 0.02,
        format!("gamma={quad:.4} vs 0.667 (tol 0.02); 1/gamma = {:.3}", 1.0 / quad),
    );
    for (i, mu) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let spec = EstimatorSpec::new(EstimatorKind::Fixed { theta: mu }).unwrap();
        let cfg = RunConfig::new(9500 + i as u64, 5_000, 50_000);
        let ladder =
            estimate_gamma_const(ModelSpec::normal_mean(), &spec, 10.0, 15.0, &cfg).unwrap();
        let analytic = nu_of_mu(mu).unwrap();
        let tol = 2.0 * ladder.std_err;
        crit.check(
            &format!("ladder vs nu at mu={mu}"),
            (ladder.gamma_hat - analytic).abs() <= tol,
            format!(
                "ladder={:.4} se={:.4} vs nu={analytic:.4} (tol {tol:.4})",
                ladder.gamma_hat, ladder.std_err
            ),
        );
    }
    crit.finish();
}

// ---------------------------------------------------------------------------
// 6. Exact identities and fast property checks
// ---------------------------------------------------------------------------

#[test]
fn acceptance_6_exact_and_property_suite() {
    let mut crit = Criterion::new("6: exact identities and property checks");

    // martingale lower bound E_inf N_A >= A
    {
        let det =
            DetectorSpec::new(gamma_model(), Scheme::Srrs { est: mom(1.0, 1.0) }, 50.0).unwrap();
        let est = estimate_arl(&det, &RunConfig::new(9600, 2_000, 5_000)).unwrap();
        crit.check(
            "martingale bound",
            est.mean >= 50.0 - 2.0 * est.std_err,
            format!("ARL(A=50) = {:.1} se {:.2} >= 50 - 2se", est.mean, est.std_err),
        );
    }

    // Robbins-Siegmund bound: stopping frequency under the null at
    // b = 3, 5, 7 within e^{-b} + 3 binomial s.e.; one shared pass
    {
        let runs: u64 = if full_scale() { 100_000 } else { 25_000 };
        let n_max = 5_000u64;
        let spec = mom(1.0, 1.0);
        let mut counts = [0u64; 3];
        let bs = [3.0, 5.0, 7.0];
        let model = gamma_model();
        for run in 0..runs {
            let mut sampler = srrs::montecarlo::ChangepointStream::new(
                model,
                vec![1.0],
                None,
                run_rng(9601, run),
            );
            let mut state = TestState::new(model, &spec).unwrap();
            let mut buf = [0.0];
            for _ in 0..n_max {
                sampler.fill(&mut buf);
                state.step(buf[0]).unwrap();
                if state.log_lambda() >= bs[2] {
                    break;
                }
            }
            for (i, &b) in bs.iter().enumerate() {
                if state.record_high() >= b {
                    counts[i] += 1;
                }
            }
        }
        for (i, &b) in bs.iter().enumerate() {
            let p = counts[i] as f64 / runs as f64;
            let bound = (-b).exp();
            let se = (bound * (1.0 - bound) / runs as f64).sqrt();
            crit.check(
                &format!("alpha bound b={b}"),
                p <= bound + 3.0 * se,
                format!("freq={p:.5} vs e^-b={bound:.5} + 3se={:.5}", 3.0 * se),
            );
        }
    }

    // Bernoulli estimation scheme == Beta mixture, exhaustively to length 12
    {
        let model = ModelSpec::bernoulli(0.3).unwrap();
        let (s, t) = (1.0, 2.0);
        let est = EstimatorSpec::new(EstimatorKind::BernoulliBeta { s, t }).unwrap();
        let log_beta =
            |a: f64, b: f64| ln_gamma(a).unwrap() + ln_gamma(b).unwrap() - ln_gamma(a + b).unwrap();
        let mut worst: f64 = 0.0;
        for len in 1..=12u32 {
            for bits in 0..(1u32 << len) {
                let mut state = EstimatorState::init(&est, &model).unwrap();
                let mut log_srrs = 0.0;
                let mut ones = 0.0;
                for i in 0..len {
                    let x = f64::from(bits >> i & 1);
                    log_srrs += model.log_likelihood_ratio(state.estimate(), x).unwrap();
                    state.update(x).unwrap();
                    ones += x;
                }
                let zeros = len as f64 - ones;
                let log_null = ones * 0.3f64.ln() + zeros * 0.7f64.ln();
                let log_mix = log_beta(s + ones, (t - s) + zeros) - log_beta(s, t - s) - log_null;
                worst = worst.max((log_srrs.exp() - log_mix.exp()).abs());
            }
        }
        crit.check(
            "bernoulli = beta mixture",
            worst <= 1e-10,
            format!("max |difference| = {worst:.2e} over all sequences of length <= 12"),
        );
    }

    // incremental R_n vs from-scratch quadratic recomputation
    {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let (s, t) = (1.0, 1.0);
        let det =
            DetectorSpec::new(gamma_model(), Scheme::Srrs { est: mom(s, t) }, 1e300).unwrap();
        let mut state = DetectorState::new(&det).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9602);
        let gamma = rand_distr::Gamma::new(1.3, 1.0).unwrap();
        let lg0 = ln_gamma(1.0).unwrap();
        let mut xs: Vec<f64> = Vec::new();
        let mut worst_rel: f64 = 0.0;
        for n in 1..=200usize {
            let x: f64 = gamma.sample(&mut rng);
            xs.push(x);
            let r = state.step(&[x]).unwrap();
            let mut oracle = 0.0;
            for k in 1..=n {
                let mut log_l = 0.0;
                for i in k..=n {
                    let prior: f64 = xs[(k - 1)..(i - 1)].iter().sum();
                    let theta = (s + prior) / (t + (i - k) as f64);
                    log_l += (theta - 1.0) * xs[i - 1].ln() + lg0 - ln_gamma(theta).unwrap();
                }
                oracle += log_l.exp();
            }
            worst_rel = worst_rel.max((r - oracle).abs() / oracle.max(1.0));
        }
        crit.check(
            "incremental = quadratic recomputation",
            worst_rel <= 1e-9,
            format!("max relative gap {worst_rel:.2e} over n <= 200"),
        );
    }

    // digamma inverse round trip on a log-spaced grid
    {
        let mut worst: f64 = 0.0;
        let mut theta = 1e-3;
        while theta <= 1e3 {
            let back = digamma_inverse(digamma(theta).unwrap()).unwrap();
            worst = worst.max((back - theta).abs() / theta.max(1.0));
            theta *= 1.6;
        }
        crit.check(
            "digamma inverse round trip",
            worst <= 1e-9,
            format!("max scaled error {worst:.2e}"),
        );
    }

    // g and h positive on (0, 10]
    {
        let mut ok = true;
        let mut t = 0.1;
        while t <= 10.0 {
            if !(ess_g(t).unwrap() > 0.0 && ess_h(t).unwrap() > 0.0) {
                ok = false;
            }
            t += 0.1;
        }
        crit.check("g,h positive", ok, "grid (0,10] step 0.1".into());
    }

    // multichannel scheme with one channel equals the univariate scheme
    {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let est = mom(1.0, 1.0);
        let uni = DetectorSpec::new(gamma_model(), Scheme::Srrs { est }, 1e300).unwrap();
        let multi =
            DetectorSpec::new(gamma_model(), Scheme::Multi { ests: vec![est] }, 1e300).unwrap();
        let mut a = DetectorState::new(&uni).unwrap();
        let mut b = DetectorState::new(&multi).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9603);
        let gamma = rand_distr::Gamma::new(2.0, 1.0).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..300 {
            let x: f64 = gamma.sample(&mut rng);
            let ra = a.step(&[x]).unwrap();
            let rb = b.step(&[x]).unwrap();
            worst = worst.max((ra - rb).abs() / rb.max(1.0));
        }
        crit.check(
            "multi(m=1) = univariate",
            worst <= 1e-9,
            format!("max relative gap {worst:.2e} over 300 steps"),
        );
    }

    // anticipating estimation destroys the significance level
    {
        let runs = if full_scale() { 1_000 } else { 300 };
        let est = anticipating_stop_frequency(5.0, &RunConfig::new(9604, runs, 100_000));
        let bound = (-5.0f64).exp();
        crit.check(
            "anticipating pathology",
            est.mean >= 50.0 * bound,
            format!(
                "stop frequency {:.3} >= 50 x e^-5 = {:.3}",
                est.mean,
                50.0 * bound
            ),
        );
    }

    crit.finish();
}
