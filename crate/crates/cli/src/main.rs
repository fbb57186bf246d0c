//! Command-line front end for the sequential-detection library.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when the
//! streaming detector raises an alarm.

mod config;
mod recipes;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, KvConfig};
use run::Outcome;

#[derive(Parser)]
#[command(
    name = "srrs",
    about = "Sequential power-one tests and changepoint detection with nonanticipating estimation",
    version
)]
struct Cli {
    /// Run an embedded experiment grid (table1..table4, figure1)
    #[arg(long, conflicts_with = "command")]
    recipe: Option<String>,

    /// Multiply recipe run counts (for quick passes)
    #[arg(long, requires = "recipe")]
    scale: Option<f64>,

    /// Base random seed for recipes
    #[arg(long, requires = "recipe")]
    seed: Option<u64>,

    /// Worker threads for recipes (0 = all cores)
    #[arg(long, requires = "recipe")]
    workers: Option<usize>,

    /// Write recipe output here instead of stdout
    #[arg(long, requires = "recipe")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Default)]
struct CommonArgs {
    /// Flat key=value config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Observation family: gamma, normal, bernoulli
    #[arg(long)]
    family: Option<String>,
    /// In-control gamma shape
    #[arg(long)]
    theta0: Option<f64>,
    /// In-control bernoulli probability
    #[arg(long)]
    p0: Option<f64>,
}

#[derive(Args, Default)]
struct EstimatorArgs {
    /// Estimator kind: mom, mle, fixed, normal-mean, bernoulli-beta
    #[arg(long)]
    estimator: Option<String>,
    /// Prior pseudo-sum
    #[arg(long)]
    s: Option<f64>,
    /// Prior pseudo-count
    #[arg(long)]
    t: Option<f64>,
    /// Parameter of the fixed estimator / sr-fixed scheme
    #[arg(long)]
    theta: Option<f64>,
    /// Lower clamp on the reported estimate
    #[arg(long = "clamp-lo")]
    clamp_lo: Option<f64>,
    /// Upper clamp on the reported estimate
    #[arg(long = "clamp-hi")]
    clamp_hi: Option<f64>,
}

#[derive(Args, Default)]
struct SchemeArgs {
    /// Detector scheme: srrs, sr-fixed, pair-mixture, normal-mixture, multi
    #[arg(long)]
    scheme: Option<String>,
    /// First pair-mixture parameter
    #[arg(long)]
    theta1: Option<f64>,
    /// Second pair-mixture parameter
    #[arg(long)]
    theta2: Option<f64>,
    /// Channel count for the multi scheme
    #[arg(long)]
    m: Option<u64>,
    /// Estimate from every seventh past observation
    #[arg(long)]
    daily: bool,
}

#[derive(Args, Default)]
struct BudgetArgs {
    /// Number of simulation runs
    #[arg(long)]
    runs: Option<u64>,
    /// Per-run step cap
    #[arg(long)]
    nmax: Option<u64>,
    /// Random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores; env SRRS_WORKERS sets the default)
    #[arg(long)]
    workers: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the analytic constants (nu, v2, r, g, h, KL, ESS difference)
    Theory {
        #[command(flatten)]
        common: CommonArgs,
        /// nu(mu) at this mu
        #[arg(long)]
        nu: Option<f64>,
        /// v^2(t) at this t
        #[arg(long)]
        v2: Option<f64>,
        /// r_t at this t
        #[arg(long)]
        r: Option<f64>,
        /// g(t) at this t
        #[arg(long)]
        g: Option<f64>,
        /// h(t) at this t
        #[arg(long)]
        h: Option<f64>,
        /// KL divergence at "theta,phi"
        #[arg(long)]
        kl: Option<String>,
        /// Expected-sample-size difference at "mu,s,t"
        #[arg(long)]
        ess: Option<String>,
        /// Overshoot constant by quadrature at "s,t"
        #[arg(long = "gamma-quadrature")]
        gamma_quadrature: Option<String>,
    },
    /// Simulate the power-one test, one CSV row per run
    Powerone {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Stopping boundary b
        #[arg(long)]
        b: Option<f64>,
        /// Observation law: q (adaptive) or iid
        #[arg(long)]
        sampler: Option<String>,
        /// Parameter of the iid sampler
        #[arg(long = "sample-theta")]
        sample_theta: Option<f64>,
    },
    /// Ladder-averaging estimate of the overshoot constant gamma
    GammaConst {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Lower edge of the averaging interval
        #[arg(long)]
        b0: Option<f64>,
        /// Upper edge of the averaging interval
        #[arg(long)]
        b1: Option<f64>,
    },
    /// ARL to false alarm of a detector
    Arl {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Stopping threshold A
        #[arg(long)]
        a: Option<f64>,
    },
    /// Expected detection delay with the change at index nu
    Delay {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Stopping threshold A
        #[arg(long)]
        a: Option<f64>,
        /// Post-change parameter(s), comma separated for multi
        #[arg(long = "theta-post")]
        theta_post: Option<String>,
        /// Changepoint index (1 = change from the start)
        #[arg(long)]
        nu: Option<u64>,
    },
    /// Find the threshold A for a target ARL
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Desired ARL to false alarm
        #[arg(long = "target-arl")]
        target_arl: Option<f64>,
        /// Overshoot constant estimate for the starting point A = B*gamma
        #[arg(long)]
        gamma: Option<f64>,
        /// Return A = B (martingale guarantee, no simulation)
        #[arg(long)]
        conservative: bool,
    },
    /// Run a detector over a stream (stdin or --input), exit 3 on alarm
    Detect {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Stopping threshold A
        #[arg(long)]
        a: Option<f64>,
        /// Observation file, one row per step ("-" or absent = stdin)
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Histogram of the limiting estimate distribution G
    HistG {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Path length before reading off the estimate
        #[arg(long)]
        nbig: Option<u64>,
        /// Number of independent paths
        #[arg(long)]
        paths: Option<u64>,
        /// Histogram bin width
        #[arg(long = "bin-width")]
        bin_width: Option<f64>,
    },
    /// Show how an anticipating estimator destroys the significance level
    DemoAnticipating {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Stopping boundary b
        #[arg(long)]
        b: Option<f64>,
    },
}

// ---------------------------------------------------------------------------
// Flag -> KvConfig conversion
// ---------------------------------------------------------------------------

fn kv_from_pairs(pairs: Vec<(&str, Option<String>)>) -> KvConfig {
    let mut kv = KvConfig::new();
    for (k, v) in pairs {
        if let Some(v) = v {
            kv.set(k, v);
        }
    }
    kv
}

fn fmt_f64(v: Option<f64>) -> Option<String> {
    v.map(|x| x.to_string())
}

fn fmt_u64(v: Option<u64>) -> Option<String> {
    v.map(|x| x.to_string())
}

impl ModelArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("family", self.family.clone()),
            ("theta0", fmt_f64(self.theta0)),
            ("p0", fmt_f64(self.p0)),
        ]
    }
}

impl EstimatorArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("estimator", self.estimator.clone()),
            ("s", fmt_f64(self.s)),
            ("t", fmt_f64(self.t)),
            ("theta", fmt_f64(self.theta)),
            ("clamp-lo", fmt_f64(self.clamp_lo)),
            ("clamp-hi", fmt_f64(self.clamp_hi)),
        ]
    }
}

impl SchemeArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("scheme", self.scheme.clone()),
            ("theta1", fmt_f64(self.theta1)),
            ("theta2", fmt_f64(self.theta2)),
            ("m", fmt_u64(self.m)),
            ("daily", self.daily.then(|| "true".to_string())),
        ]
    }
}

impl BudgetArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("runs", fmt_u64(self.runs)),
            ("nmax", fmt_u64(self.nmax)),
            ("seed", fmt_u64(self.seed)),
            ("workers", fmt_u64(self.workers)),
        ]
    }
}

/// Allowed config keys per subcommand (the long flag names).
const MODEL_KEYS: &[&str] = &["family", "theta0", "p0"];
const ESTIMATOR_KEYS: &[&str] = &["estimator", "s", "t", "theta", "clamp-lo", "clamp-hi"];
const SCHEME_KEYS: &[&str] = &["scheme", "theta1", "theta2", "m", "daily"];
const BUDGET_KEYS: &[&str] = &["runs", "nmax", "seed", "workers"];

fn allowed_keys(extra: &[&'static str], groups: &[&[&'static str]]) -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = extra.to_vec();
    for g in groups {
        keys.extend_from_slice(g);
    }
    keys
}

/// Merge file config (if any) with flag overrides.
fn effective_config(
    common: &CommonArgs,
    allowed: &[&'static str],
    flags: KvConfig,
) -> Result<KvConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            KvConfig::parse(&text, allowed)?
        }
        None => KvConfig::new(),
    };
    cfg.overlay(&flags);
    Ok(cfg)
}

fn write_output(path: &Option<PathBuf>, text: &str) -> Result<(), ConfigError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| ConfigError(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, ConfigError> {
    if let Some(recipe) = &cli.recipe {
        let params = recipes::RecipeParams {
            seed: cli.seed.unwrap_or(1),
            scale: cli.scale.unwrap_or(1.0),
            workers: cli.workers.unwrap_or_else(|| {
                std::env::var("SRRS_WORKERS")
                    .ok()
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0)
            }),
        };
        if !(params.scale > 0.0) {
            return Err(ConfigError("scale must be positive".into()));
        }
        let text = recipes::run(recipe, &params)?;
        write_output(&cli.out, &text)?;
        return Ok(0);
    }

    let command = cli
        .command
        .ok_or_else(|| ConfigError("expected a subcommand or --recipe".into()))?;

    let (common, outcome) = match command {
        Command::Theory {
            common,
            nu,
            v2,
            r,
            g,
            h,
            kl,
            ess,
            gamma_quadrature,
        } => {
            let allowed = allowed_keys(
                &["nu", "v2", "r", "g", "h", "kl", "ess", "gamma-quadrature"],
                &[],
            );
            let flags = kv_from_pairs(vec![
                ("nu", fmt_f64(nu)),
                ("v2", fmt_f64(v2)),
                ("r", fmt_f64(r)),
                ("g", fmt_f64(g)),
                ("h", fmt_f64(h)),
                ("kl", kl),
                ("ess", ess),
                ("gamma-quadrature", gamma_quadrature),
            ]);
            let cfg = effective_config(&common, &allowed, flags)?;
            (common, run::theory(&cfg)?)
        }
        Command::Powerone {
            common,
            model,
            estimator,
            budget,
            b,
            sampler,
            sample_theta,
        } => {
            let allowed = allowed_keys(
                &["b", "sampler", "sample-theta"],
                &[MODEL_KEYS, ESTIMATOR_KEYS, BUDGET_KEYS],
            );
            let mut pairs = model.pairs();
            pairs.extend(estimator.pairs());
            pairs.extend(budget.pairs());
            pairs.push(("b", fmt_f64(b)));
            pairs.push(("sampler", sampler));
            pairs.push(("sample-theta", fmt_f64(sample_theta)));
            let cfg = effective_config(&common, &allowed, kv_from_pairs(pairs))?;
            (common, run::powerone(&cfg)?)
        }
        Command::GammaConst {
            common,
            model,
            estimator,
            budget,
            b0,
            b1,
        } => {
            let allowed = allowed_keys(&["b0", "b1"], &[MODEL_KEYS, ESTIMATOR_KEYS, BUDGET_KEYS]);
            let mut pairs = model.pairs();
            pairs.extend(estimator.pairs());
            pairs.extend(budget.pairs());
            pairs.push(("b0", fmt_f64(b0)));
            pairs.push(("b1", fmt_f64(b1)));
            let cfg = effective_config(&common, &allowed, kv_from_pairs(pairs))?;
            (common, run::gamma_const(&cfg)?)
        }
        Command::Arl {
            common,
            model,
            estimator,
            scheme,
            budget,
            a,
        } => {
            let allowed = allowed_keys(
                &["a"],
                &[MODEL_KEYS, ESTIMATOR_KEYS, SCHEME_KEYS, BUDGET_KEYS],
            );
            let mut pairs = model.pairs();
            pairs.extend(estimator.pairs());
            pairs.extend(scheme.pairs());
            pairs.extend(budget.pairs());
            pairs.push(("a", fmt_f64(a)));
            let cfg = effective_config(&common, &allowed, kv_from_pairs(pairs))?;
            (common, run::arl(&cfg)?)
        }
        Command::Delay {
            common,
            model,
            estimator,
            scheme,
            budget,
            a,
            theta_post,
            nu,
        } => {
            let allowed = allowed_keys(
                &["a", "theta-post", "nu"],
                &[MODEL_KEYS, ESTIMATOR_KEYS, SCHEME_KEYS, BUDGET_KEYS],
            );
            let mut pairs = model.pairs();
            pairs.extend(estimator.pairs());
            pairs.extend(scheme.pairs());
            pairs.extend(budget.pairs());
            pairs.push(("a", fmt_f64(a)));
            pairs.push(("theta-post", theta_post));
            pairs.push(("nu", fmt_u64(nu)));
            let cfg = effective_config(&common, &allowed, kv_from_pairs(pairs))?;
            (common, run::delay(&cfg)?)
        }
        Command::Calibrate {
            common,
            model,
            estimator,
            scheme,
            budget,
            target_arl,
            gamma,
            conservative,
        } => {
            let allowed = allowed_keys(
                &["target-arl", "gamma", "conservative"],
                &[MODEL_KEYS, ESTIMATOR_KEYS, SCHEME_KEYS, BUDGET_KEYS],
            );
            let mut pairs = model.pairs();
            pairs.extend(estimator.pairs());
            pairs.extend(scheme.pairs());
            pairs.extend(budget.pairs());
            pairs.push(("target-arl", fmt_f64(target_arl)));
            pairs.push(("gamma", fmt_f64(gamma)));
            pairs.push(("conservative", conservative.then(|| "true".to_string())));
            let cfg = effective_config(&common, &allowed, kv_from_pairs(pairs))?;
            (common, run::calibrate(&cfg)?)
        }
        Command::Detect {
            common,
            model,
            estimator,
            scheme,
            a,
            input,
        } => {
            let allowed = allowed_keys(
                &["a", "input"],
                &[MODEL_KEYS, ESTIMATOR_KEYS, SCHEME_KEYS],
            );
            let mut pairs = model.pairs();
            pairs.extend(estimator.pairs());
            pairs.extend(scheme.pairs());
            pairs.push(("a", fmt_f64(a)));
            pairs.push((
                "input",
                input.as_ref().map(|p| p.display().to_string()),
            ));
            let cfg = effective_config(&common, &allowed, kv_from_pairs(pairs))?;
            let outcome = match cfg.get("input") {
                Some(path) if path != "-" => {
                    let file = std::fs::File::open(path)
                        .map_err(|e| ConfigError(format!("cannot open {path}: {e}")))?;
                    let mut reader = std::io::BufReader::new(file);
                    run::detect(&cfg, &mut reader)?
                }
                _ => {
                    let stdin = std::io::stdin();
                    let mut lock = stdin.lock();
                    run::detect(&cfg, &mut lock)?
                }
            };
            (common, outcome)
        }
        Command::HistG {
            common,
            model,
            estimator,
            budget,
            nbig,
            paths,
            bin_width,
        } => {
            let allowed = allowed_keys(
                &["nbig", "paths", "bin-width"],
                &[MODEL_KEYS, ESTIMATOR_KEYS, BUDGET_KEYS],
            );
            let mut pairs = model.pairs();
            pairs.extend(estimator.pairs());
            pairs.extend(budget.pairs());
            pairs.push(("nbig", fmt_u64(nbig)));
            pairs.push(("paths", fmt_u64(paths)));
            pairs.push(("bin-width", fmt_f64(bin_width)));
            let cfg = effective_config(&common, &allowed, kv_from_pairs(pairs))?;
            (common, run::hist_g(&cfg)?)
        }
        Command::DemoAnticipating { common, budget, b } => {
            let allowed = allowed_keys(&["b"], &[BUDGET_KEYS]);
            let mut pairs = budget.pairs();
            pairs.push(("b", fmt_f64(b)));
            let cfg = effective_config(&common, &allowed, kv_from_pairs(pairs))?;
            (common, run::demo_anticipating(&cfg)?)
        }
    };

    match outcome {
        Outcome::Done(text) => {
            write_output(&common.out, &text)?;
            Ok(0)
        }
        Outcome::Alarm(text) => {
            write_output(&common.out, &text)?;
            Ok(3)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
