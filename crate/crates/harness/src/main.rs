//! `feedbacklab` — command-line front end.
//!
//! Subcommands: `capacity`, `bounds-su`, `simulate-su`, `region-mac`,
//! `simulate-mac`, `verify-lemmas`, `accept`. Every subcommand prints a
//! human-readable summary and can write a machine-readable JSON mirror
//! (`--json`) and CSV data (`--out` where applicable). Exit codes:
//! 0 success, 1 check/criterion failure, 2 usage error.
//!
//! Flags can be defaulted from a flat key-value config file (`--config`,
//! one `key = value` per line, `#` comments); explicit flags win. The
//! `FEEDBACKLAB_THREADS` environment variable caps worker threads; all
//! outputs are bit-identical regardless of the thread count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use feedbacklab::channel::collect_transcripts;
use feedbacklab::channel::MessageSampler;
use feedbacklab::mac_bounds::region;
use feedbacklab::numerics::{gaussian_capacity, gaussian_dispersion, Snr};
use feedbacklab::su_bounds::{bound_point, epsilon_capacity};
use feedbacklab::{Error, Result};

use feedbacklab_cli::accept::{criterion_9_lemma_suite, run_all};
use feedbacklab_cli::config::ExperimentConfig;
use feedbacklab_cli::reports::{
    boundary_csv, curve_csv, region_csv, transcript_csv, write_json, write_text, CurveRow,
};
use feedbacklab_cli::runner::run_experiment;
use feedbacklab_cli::{pool, seeds};

#[derive(Parser)]
#[command(name = "feedbacklab", version, about = "Feedback-coding bounds and simulations")]
struct Cli {
    /// Flat key=value config file supplying flag defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate channel capacity and dispersion at an SNR.
    Capacity(CapacityArgs),
    /// Tabulate single-user achievable/converse log-size bounds.
    /// CSV columns: n,lower,upper,lower_per_n,upper_per_n,eps_capacity.
    BoundsSu(BoundsSuArgs),
    /// Monte-Carlo simulate the single-user scheme (plain, or the
    /// power-controlled wrapper when --eps is given).
    SimulateSu(SimulateSuArgs),
    /// Compute the two-user rate region.
    /// CSV columns: rho,r1_max,r2_max,sum_max.
    RegionMac(RegionMacArgs),
    /// Monte-Carlo simulate the two-user scheme at sized rates.
    SimulateMac(SimulateMacArgs),
    /// Run the converse-lemma verification suite.
    VerifyLemmas(VerifyLemmasArgs),
    /// Run the full acceptance suite.
    Accept(AcceptArgs),
}

#[derive(Args)]
struct CapacityArgs {
    #[arg(long)]
    snr: Option<f64>,
    /// Allowed error probability; prints the eps-capacity when given.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsSuArgs {
    #[arg(long)]
    power: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Phases used by the achievability expression.
    #[arg(long, default_value_t = 1)]
    phases: u32,
    /// Blocklengths to evaluate (comma-separated).
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1000,10000,100000,1000000,10000000,100000000"
    )]
    n: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateSuArgs {
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    power: Option<f64>,
    /// Message count for the plain scheme.
    #[arg(long)]
    messages: Option<f64>,
    /// When given, simulate the power-controlled wrapper at this eps.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the first transcripts as CSV (trial,k,x1,x2,z,y).
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RegionMacArgs {
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Number of uniform correlation grid points (the sum-splitting
    /// correlation is inserted additionally).
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV of the outer boundary polyline (r1,r2).
    #[arg(long)]
    boundary_out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateMacArgs {
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the first transcripts as CSV (trial,k,x1,x2,z,y).
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyLemmasArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct AcceptArgs {
    /// Which suite to run (only `primary` exists).
    #[arg(long, default_value = "primary")]
    suite: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    json: Option<PathBuf>,
}

/// Flag/config merging: explicit flag > config file > built-in default.
struct Defaults {
    cfg: Option<ExperimentConfig>,
}

impl Defaults {
    fn load(path: &Option<PathBuf>) -> Result<Self> {
        let cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Parameter(format!("cannot read {}: {e}", p.display())))?;
                Some(ExperimentConfig::from_key_values(&text)?)
            }
            None => None,
        };
        Ok(Defaults { cfg })
    }

    fn num(&self, flag: Option<f64>, key: &str, fallback: Option<f64>) -> Result<f64> {
        flag.or_else(|| self.cfg.as_ref().and_then(|c| c.params.get(key).copied()))
            .or(fallback)
            .ok_or_else(|| Error::Parameter(format!("missing --{key}")))
    }

    fn trials(&self, flag: Option<u64>, fallback: u64) -> u64 {
        flag.or_else(|| self.cfg.as_ref().map(|c| c.trials).filter(|&t| t > 0))
            .unwrap_or(fallback)
    }

    fn seed(&self, flag: Option<u64>, fallback: u64) -> u64 {
        flag.or_else(|| self.cfg.as_ref().map(|c| c.seed))
            .unwrap_or(fallback)
    }
}

fn main() -> ExitCode {
    pool::init_global_pool();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            // Bad parameters and unreadable inputs are usage errors.
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let defaults = Defaults::load(&cli.config)?;
    match cli.cmd {
        Cmd::Capacity(a) => cmd_capacity(a, &defaults),
        Cmd::BoundsSu(a) => cmd_bounds_su(a, &defaults),
        Cmd::SimulateSu(a) => cmd_simulate_su(a, &defaults),
        Cmd::RegionMac(a) => cmd_region_mac(a, &defaults),
        Cmd::SimulateMac(a) => cmd_simulate_mac(a, &defaults),
        Cmd::VerifyLemmas(a) => cmd_verify_lemmas(a, &defaults),
        Cmd::Accept(a) => cmd_accept(a, &defaults),
    }
}

fn cmd_capacity(a: CapacityArgs, d: &Defaults) -> Result<ExitCode> {
    let snr = d.num(a.snr, "snr", None)?;
    let value = match a.eps {
        Some(eps) => epsilon_capacity(snr, eps)?,
        None => gaussian_capacity(Snr::new(snr)?),
    };
    println!("{value:.6}");
    if let Some(path) = a.json {
        #[derive(Serialize)]
        struct Payload {
            snr: f64,
            eps: Option<f64>,
            capacity: f64,
            dispersion: f64,
        }
        write_json(
            &path,
            &Payload {
                snr,
                eps: a.eps,
                capacity: value,
                dispersion: gaussian_dispersion(Snr::new(snr)?),
            },
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bounds_su(a: BoundsSuArgs, d: &Defaults) -> Result<ExitCode> {
    let p = d.num(a.power, "power", None)?;
    let eps = d.num(a.eps, "eps", None)?;
    let cap = epsilon_capacity(p, eps)?;
    let mut rows = Vec::with_capacity(a.n.len());
    for &n in &a.n {
        let point = bound_point(n, p, eps, a.phases)?;
        rows.push(CurveRow {
            n,
            lower: point.ln_m_lower,
            upper: point.ln_m_upper,
            lower_per_n: point.ln_m_lower / n as f64,
            upper_per_n: point.ln_m_upper / n as f64,
            eps_capacity: cap,
        });
    }
    print!("{}", curve_csv(&rows));
    if let Some(path) = a.out {
        write_text(&path, &curve_csv(&rows))?;
    }
    if let Some(path) = a.json {
        write_json(&path, &rows)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn record_exit(record: &feedbacklab_cli::ResultRecord) -> ExitCode {
    if record.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn print_record(record: &feedbacklab_cli::ResultRecord) {
    println!("scenario: {} (seed {}, {} trials)", record.scenario, record.seed, record.trials);
    for (k, v) in &record.metrics {
        println!("  {k} = {v}");
    }
    for check in &record.checks {
        println!(
            "  [{}] {} — {}",
            if check.passed { "ok" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
}

fn dump_transcripts(
    config: &ExperimentConfig,
    path: &PathBuf,
    build: impl FnOnce() -> Result<std::sync::Arc<dyn feedbacklab::channel::FeedbackCode>>,
) -> Result<()> {
    let code = build()?;
    let count = config.trials.min(32);
    let seed = seeds::scenario_seed(config.seed, &config.scenario);
    let transcripts = collect_transcripts(code.as_ref(), count, seed, &MessageSampler::Uniform)?;
    write_text(path, &transcript_csv(&transcripts))
}

fn cmd_simulate_su(a: SimulateSuArgs, d: &Defaults) -> Result<ExitCode> {
    let n = d.num(a.n, "n", None)?;
    let p = d.num(a.power, "power", None)?;
    let trials = d.trials(a.trials, 10_000);
    let seed = d.seed(a.seed, 0);
    let mut config = match a.eps {
        Some(_) => ExperimentConfig::new("su-power-control", trials, seed),
        None => ExperimentConfig::new("sk", trials, seed),
    };
    config.params.insert("n".into(), n);
    config.params.insert("power".into(), p);
    if let Some(eps) = a.eps {
        config.params.insert("eps".into(), eps);
    } else {
        let m = d.num(a.messages, "messages", None)?;
        config.params.insert("messages".into(), m);
    }
    let record = run_experiment(&config)?;
    print_record(&record);
    if let Some(path) = &a.dump {
        let cfg = config.clone();
        dump_transcripts(&config, path, move || {
            if let Some(eps) = a.eps {
                use feedbacklab::channel::probe::FixedErrorCode;
                use feedbacklab::su_codes::build_power_controlled_code;
                let inner_error = cfg.param_or("inner_error", 0.01);
                let (code, _) =
                    build_power_controlled_code(n as usize, p, eps, 1, &|len, m, power| {
                        Ok(std::sync::Arc::new(FixedErrorCode {
                            n: len,
                            m,
                            power,
                            error_prob: inner_error,
                        }))
                    })?;
                Ok(std::sync::Arc::new(code))
            } else {
                let m = cfg.param("messages")? as u128;
                Ok(std::sync::Arc::new(feedbacklab::su_codes::SkCode::new(
                    n as usize, m, p,
                )?))
            }
        })?;
    }
    if let Some(path) = a.json {
        write_json(&path, &record)?;
    }
    Ok(record_exit(&record))
}

fn cmd_region_mac(a: RegionMacArgs, d: &Defaults) -> Result<ExitCode> {
    let p1 = d.num(a.p1, "p1", None)?;
    let p2 = d.num(a.p2, "p2", None)?;
    let eps = d.num(a.eps, "eps", None)?;
    let r = region(p1, p2, eps, a.grid)?;
    println!(
        "{} correlation points; corner at rho* gives sum rate {:.6}",
        r.pentagons.len(),
        r.pentagons
            .iter()
            .map(|p| p.sum_max.min(p.r1_max + p.r2_max))
            .fold(0.0f64, f64::max)
    );
    if let Some(path) = a.out {
        write_text(&path, &region_csv(&r))?;
    }
    if let Some(path) = a.boundary_out {
        write_text(&path, &boundary_csv(&r))?;
    }
    if let Some(path) = a.json {
        #[derive(Serialize)]
        struct Row {
            rho: f64,
            r1_max: f64,
            r2_max: f64,
            sum_max: f64,
        }
        #[derive(Serialize)]
        struct Payload {
            p1: f64,
            p2: f64,
            eps: f64,
            pentagons: Vec<Row>,
            boundary: Vec<(f64, f64)>,
        }
        write_json(
            &path,
            &Payload {
                p1,
                p2,
                eps,
                pentagons: r
                    .pentagons
                    .iter()
                    .map(|p| Row {
                        rho: p.rho,
                        r1_max: p.r1_max,
                        r2_max: p.r2_max,
                        sum_max: p.sum_max,
                    })
                    .collect(),
                boundary: r.boundary.clone(),
            },
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate_mac(a: SimulateMacArgs, d: &Defaults) -> Result<ExitCode> {
    let n = d.num(a.n, "n", None)?;
    let p1 = d.num(a.p1, "p1", None)?;
    let p2 = d.num(a.p2, "p2", None)?;
    let eps = d.num(a.eps, "eps", None)?;
    let trials = d.trials(a.trials, 10_000);
    let seed = d.seed(a.seed, 0);
    let mut config = ExperimentConfig::new("ozarow", trials, seed);
    config.params.insert("n".into(), n);
    config.params.insert("p1".into(), p1);
    config.params.insert("p2".into(), p2);
    config.params.insert("eps".into(), eps);
    let record = run_experiment(&config)?;
    print_record(&record);
    if let Some(path) = &a.dump {
        dump_transcripts(&config, path, || {
            use feedbacklab::mac_codes::{build_ozarow_code, message_sizes_for, OzarowParams};
            let params = OzarowParams::new(n as u64, p1, p2, eps)?;
            let sizes = message_sizes_for(&params)?;
            let (m1, m2) = sizes.counts()?;
            Ok(std::sync::Arc::new(build_ozarow_code(&params, m1, m2)?))
        })?;
    }
    if let Some(path) = a.json {
        write_json(&path, &record)?;
    }
    Ok(record_exit(&record))
}

fn cmd_verify_lemmas(a: VerifyLemmasArgs, d: &Defaults) -> Result<ExitCode> {
    let seed = d.seed(a.seed, 42);
    let outcome = criterion_9_lemma_suite(seed);
    println!("{}", outcome.line());
    if let Some(path) = a.json {
        write_json(&path, &outcome)?;
    }
    Ok(if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_accept(a: AcceptArgs, d: &Defaults) -> Result<ExitCode> {
    if a.suite != "primary" {
        return Err(Error::Parameter(format!("unknown suite `{}`", a.suite)));
    }
    let seed = d.seed(a.seed, 42);
    let outcomes = run_all(seed);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "{}/{} criteria passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    if let Some(path) = a.json {
        write_json(&path, &outcomes)?;
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
