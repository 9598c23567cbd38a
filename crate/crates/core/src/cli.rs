//! The `re-sysid` command line.
//!
//! ```text
//! re-sysid estimate --u u.txt --y y.txt --out results/
//! re-sysid online   --scenario fir.toml --snr-db 15 --epsilon 0.1
//! re-sysid sweep    --scenario fir.toml --trials 100 --methods re,aic,bic
//! re-sysid simulate --scenario iir.toml --snr-db 10 --out data/
//! ```
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical infeasibility, 4 I/O.
//! The log level comes from `RE_SYSID_LOG` (default `warn`).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::estimator::{select_model, NoiseGrid, Selection};
use crate::experiments::{
    self, output, run_monte_carlo, trial_seed, Method, Scenario, TrialData,
};
use crate::online::{nested_estimator, OnlineNoise, StopReason, StoppingRule};
use crate::signals::{read_signal, write_signal, Signal};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const LOG_ENV: &str = "RE_SYSID_LOG";

#[derive(Debug, Parser)]
#[command(name = "re-sysid", version, about = "Impulse response, delay and order estimation by relative-entropy bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select (d*, m*, sigma*^2) for one record and write the estimate.
    Estimate(EstimateArgs),
    /// Stream a record sample by sample until the stopping rule fires.
    Online(OnlineArgs),
    /// Monte-Carlo tables over the scenario's SNR list and methods.
    Sweep(SweepArgs),
    /// Write a synthetic input/output record.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file (TOML); built-in System I defaults otherwise.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Master seed; a random one is drawn and logged when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input signal file, one sample per row.
    #[arg(long = "u", requires = "y_file")]
    pub u_file: Option<PathBuf>,
    /// Output signal file, one sample per row.
    #[arg(long = "y", requires = "u_file")]
    pub y_file: Option<PathBuf>,
    /// SNR of the synthesized record (no signal files).
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Known noise variance; collapses the grid to this value.
    #[arg(long)]
    pub sigma_known: Option<f64>,
    /// Largest candidate length M.
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OnlineArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "u", requires = "y_file")]
    pub u_file: Option<PathBuf>,
    #[arg(long = "y", requires = "u_file")]
    pub y_file: Option<PathBuf>,
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Stopping threshold on z_hi / yhat power.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub sigma_known: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated SNR list.
    #[arg(long, value_delimiter = ',')]
    pub snr_db: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated subset of re, aic, bic.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Use the true variance of each trial (`sigma_mode = known`).
    #[arg(long)]
    pub sigma_known: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub snr_db: Option<f64>,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Parse(_) | Error::InsufficientData(_) => EXIT_USAGE,
        Error::Singular { .. } | Error::NoFeasibleModel(_) => EXIT_INFEASIBLE,
        Error::Io(_) => EXIT_IO,
    }
}

pub fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().filter_or(LOG_ENV, "warn"))
        .try_init();
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let common = match &cli.command {
        Command::Estimate(a) => &a.common,
        Command::Online(a) => &a.common,
        Command::Sweep(a) => &a.common,
        Command::Simulate(a) => &a.common,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(Error::invalid("--jobs must be at least 1"));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let mut buf = Vec::new();
    let result = pool.install(|| match cli.command {
        Command::Estimate(a) => cmd_estimate(&a, &mut buf),
        Command::Online(a) => cmd_online(&a, &mut buf),
        Command::Sweep(a) => cmd_sweep(&a, &mut buf),
        Command::Simulate(a) => cmd_simulate(&a, &mut buf),
    });
    out.write_all(&buf)?;
    result
}

fn base_scenario(common: &Common) -> Result<Scenario> {
    let mut s = match &common.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    s.seed = match common.seed {
        Some(seed) => seed,
        None if common.scenario.is_some() => s.seed,
        None => {
            let seed = rand::random::<u64>();
            log::info!("no seed given; using {seed}");
            seed
        }
    };
    if let Some(a) = common.alpha {
        s.alpha = a;
    }
    if let Some(b) = common.beta {
        s.beta = b;
    }
    Ok(s)
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn check_variance(v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(v) if !(v > 0.0 && v.is_finite()) => {
            Err(Error::invalid(format!("--sigma-known must be a positive variance, got {v}")))
        }
        other => Ok(other),
    }
}

/// Record from files, or synthesized from the scenario at `snr_db`.
fn load_record(
    scenario: &Scenario,
    u_file: &Option<PathBuf>,
    y_file: &Option<PathBuf>,
    snr_db: Option<f64>,
) -> Result<(Signal, Signal, Option<f64>)> {
    match (u_file, y_file) {
        (Some(u), Some(y)) => {
            let (u, y) = (read_signal(u)?, read_signal(y)?);
            if u.len() != y.len() {
                return Err(Error::Parse(format!(
                    "input has {} samples but output has {}",
                    u.len(),
                    y.len()
                )));
            }
            Ok((u, y, None))
        }
        _ => {
            let snr = snr_db.unwrap_or(scenario.snr_db[0]);
            let truth = scenario.truth(None)?;
            let data = TrialData::generate(scenario.samples, &truth.simulation, snr, trial_seed(scenario.seed, 0))?;
            Ok((data.u, data.y, Some(data.noise_var)))
        }
    }
}

fn write_selection(dir: &Path, sel: &Selection) -> Result<()> {
    let theta = sel.candidate.fit.coefficients.as_slice();
    let rows: Vec<Vec<f64>> = (0..sel.m)
        .map(|n| vec![n as f64, if n < sel.d { 0.0 } else { theta[n - sel.d] }])
        .collect();
    output::write_table(&dir.join("theta.csv"), &["n", "theta"], &rows)?;
    let grid: Vec<Vec<f64>> = sel
        .grid
        .iter()
        .map(|c| {
            vec![
                c.d as f64,
                c.m as f64,
                c.x_dm,
                c.bounds.lower,
                c.bounds.upper,
                c.bounds.z_lo,
                c.bounds.z_hi,
                c.bounds.re_hi,
            ]
        })
        .collect();
    output::write_table(
        &dir.join("bound_grid.csv"),
        &["d", "m", "x", "delta_lo", "delta_hi", "z_lo", "z_hi", "re_hi"],
        &grid,
    )
}

pub fn cmd_estimate(args: &EstimateArgs, out: &mut dyn Write) -> Result<()> {
    let mut scenario = base_scenario(&args.common)?;
    if let Some(m) = args.max_len {
        scenario.max_len = m;
        scenario.ambient = scenario.ambient.max(m);
    }
    let sigma_known = check_variance(args.sigma_known)?;
    let (u, y, true_var) = load_record(&scenario, &args.u_file, &args.y_file, args.snr_db)?;
    if args.u_file.is_some() {
        scenario.samples = u.len();
        if args.max_len.is_some_and(|m| m >= u.len()) {
            return Err(Error::InsufficientData(format!(
                "--max-len {} needs more than {} samples",
                scenario.max_len,
                u.len()
            )));
        }
        if args.max_len.is_none() {
            scenario.max_len = scenario.max_len.min(u.len() / 2).max(1);
        }
        scenario.delay_max = scenario.delay_max.map(|d| d.min(scenario.max_len));
        scenario.ambient = scenario.ambient.max(scenario.max_len);
    }
    scenario.validate()?;
    prepare_out(&args.common.out)?;
    let grid = match (sigma_known, true_var) {
        (Some(v), _) => NoiseGrid::known(v)?,
        (None, Some(v)) => scenario.noise_grid(&y, v)?,
        (None, None) => NoiseGrid::snr_relative(
            y.power(),
            scenario.sigma_grid_min_db,
            scenario.sigma_grid_max_db,
            scenario.sigma_grid_step_db,
        )?,
    };
    let sel = select_model(&u, &y, &scenario.search_space()?, &grid, &scenario.params()?)?;
    write_selection(&args.common.out, &sel)?;
    writeln!(out, "d* = {}", sel.d)?;
    writeln!(out, "m* = {}", sel.m)?;
    match sel.noise_var {
        Some(v) => writeln!(out, "sigma*^2 = {} (selected from {} values)", output::sig6(v), grid.variances().len())?,
        None => writeln!(out, "sigma*^2 = {} (known)", output::sig6(sel.bound_noise_var))?,
    }
    writeln!(out, "re_hi = {}", output::sig6(sel.re_hi))?;
    writeln!(out, "x = {}", output::sig6(sel.candidate.x_dm))?;
    writeln!(out, "wrote {}", args.common.out.join("theta.csv").display())?;
    writeln!(out, "wrote {}", args.common.out.join("bound_grid.csv").display())?;
    Ok(())
}

pub fn cmd_online(args: &OnlineArgs, out: &mut dyn Write) -> Result<()> {
    let mut scenario = base_scenario(&args.common)?;
    if let Some(e) = args.epsilon {
        scenario.epsilon = e;
    }
    scenario.validate()?;
    let sigma_known = check_variance(args.sigma_known)?;
    let rule = StoppingRule::new(scenario.epsilon)?;
    let (u, y, true_var) = load_record(&scenario, &args.u_file, &args.y_file, args.snr_db)?;
    let warm = scenario.warm_start();
    if u.len() < warm {
        return Err(Error::InsufficientData(format!(
            "record of {} samples is shorter than the {warm}-sample warm start",
            u.len()
        )));
    }
    prepare_out(&args.common.out)?;
    let noise = match (sigma_known, true_var) {
        (Some(v), _) => OnlineNoise::Known(v),
        (None, Some(v)) => scenario.online_noise(&y.prefix(warm)?, v)?,
        (None, None) => match scenario.online_noise(&y.prefix(warm)?, 1.0)? {
            OnlineNoise::Known(_) => {
                return Err(Error::invalid(
                    "online_noise = \"known\" needs --sigma-known for recorded data",
                ))
            }
            other => other,
        },
    };
    let mut est = nested_estimator(&u, &y, warm, &scenario.online_space()?, noise, scenario.params()?, Some(rule))?;
    let run = est.run(&u, &y)?;
    let path = args.common.out.join("online_trace.csv");
    output::write_online_trace(&path, &run.trace)?;
    let last = run.trace.last().expect("trace holds the warm-start record");
    writeln!(out, "wrote {}", path.display())?;
    if let Some(s) = last.selection {
        writeln!(out, "d* = {}, m* = {}, ratio = {}", s.d, s.m, output::sig6(last.ratio))?;
    }
    match run.reason {
        StopReason::Criterion => writeln!(
            out,
            "stopped at N = {}: ratio below epsilon = {}",
            run.stop_n,
            output::sig6(rule.epsilon())
        )?,
        StopReason::DataExhausted => writeln!(out, "stopped at N = {}: data exhausted", run.stop_n)?,
    }
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let mut scenario = base_scenario(&args.common)?;
    if let Some(snr) = &args.snr_db {
        scenario.snr_db = snr.clone();
    }
    if let Some(t) = args.trials {
        scenario.trials = t;
    }
    if let Some(methods) = &args.methods {
        let mut parsed = methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
        parsed.sort();
        parsed.dedup();
        scenario.methods = parsed;
    }
    if args.sigma_known {
        scenario.sigma_mode = experiments::SigmaMode::Known;
    }
    scenario.validate()?;
    prepare_out(&args.common.out)?;
    log::info!(
        "sweep: {} trials x {} SNRs x {} methods, seed {}",
        scenario.trials,
        scenario.snr_db.len(),
        scenario.methods.len(),
        scenario.seed
    );
    let report = run_monte_carlo(&scenario)?;
    let dir = &args.common.out;
    output::write_delay_table(&dir.join("delay_table.csv"), &report.aggregates)?;
    output::write_order_table(&dir.join("order_table.csv"), &report.aggregates)?;
    let mut written = vec!["delay_table.csv", "order_table.csv"];
    if scenario.methods.contains(&Method::Re) {
        output::write_joint_table(&dir.join("joint_table.csv"), &report.aggregates)?;
        written.push("joint_table.csv");
    }
    output::write_trials(&dir.join("trials.csv"), &report.trials)?;
    written.push("trials.csv");
    for a in &report.aggregates {
        writeln!(
            out,
            "{:>6} dB {:<3}  d {:>8} ({:>8})  m {:>8} ({:>8})  rmse {:>10}  [{} trials, {} failed]",
            output::sig6(a.snr_db),
            a.method.name(),
            output::sig6(a.mean_d),
            output::sig6(a.sd_d),
            output::sig6(a.mean_m),
            output::sig6(a.sd_m),
            output::sig6(a.mean_rmse),
            a.trials_used,
            a.failures
        )?;
    }
    for f in &report.failures {
        log::warn!("trial {} at {} dB ({}): {}", f.trial, f.snr_db, f.method, f.error);
    }
    for w in written {
        writeln!(out, "wrote {}", dir.join(w).display())?;
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let scenario = base_scenario(&args.common)?;
    scenario.validate()?;
    let snr = args.snr_db.unwrap_or(scenario.snr_db[0]);
    let truth = scenario.truth(None)?;
    let data = TrialData::generate(scenario.samples, &truth.simulation, snr, trial_seed(scenario.seed, 0))?;
    let dir = &args.common.out;
    prepare_out(dir)?;
    write_signal(&dir.join("u.txt"), &data.u)?;
    write_signal(&dir.join("y.txt"), &data.y)?;
    write_signal(&dir.join("ybar.txt"), &data.ybar)?;
    write_signal(&dir.join("theta.txt"), &Signal::new(truth.reference.embedded())?)?;
    writeln!(out, "seed = {}", scenario.seed)?;
    writeln!(out, "snr_db = {}", output::sig6(snr))?;
    writeln!(out, "sigma_w2 = {}", output::sig6(data.noise_var))?;
    writeln!(out, "wrote u.txt, y.txt, ybar.txt, theta.txt to {}", dir.display())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut o = Vec::new();
        let mut e = Vec::new();
        let code = run(std::iter::once("re-sysid").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::invalid("x")), EXIT_USAGE);
        assert_eq!(exit_code(&Error::NoFeasibleModel(vec![])), EXIT_INFEASIBLE);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["sweep", "--trials", "many"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn simulate_then_estimate() {
        let dir = tempfile::tempdir().unwrap();
        let scen = dir.path().join("s.toml");
        std::fs::write(&scen, "samples = 400\nmax_len = 30\nambient = 40\nfir_taps = 6\nfir_delay = 2\n").unwrap();
        let d = dir.path().to_str().unwrap();
        let s = scen.to_str().unwrap();
        let (code, text, err) = run_capture(&["simulate", "--scenario", s, "--snr-db", "30", "--seed", "4", "--out", d]);
        assert_eq!(code, 0, "{err}");
        assert!(text.contains("sigma_w2"));
        let u = dir.path().join("u.txt");
        let y = dir.path().join("y.txt");
        let (code, text, err) = run_capture(&[
            "estimate", "--scenario", s, "--u", u.to_str().unwrap(), "--y", y.to_str().unwrap(), "--out", d,
        ]);
        assert_eq!(code, 0, "{err}");
        assert!(text.contains("d* = ") && text.contains("selected from"), "{text}");
        assert!(dir.path().join("theta.csv").exists());
        assert!(dir.path().join("bound_grid.csv").exists());
    }
}
