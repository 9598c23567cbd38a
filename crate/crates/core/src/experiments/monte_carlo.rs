//! Monte-Carlo trials over SNR grids and methods.
//!
//! Trial `k` draws its input from `derive_seed(derive_seed(master, k), 0)` and
//! its unit noise sequence from `derive_seed(derive_seed(master, k), 1)`; the
//! same draws are reused for every SNR and method, with the noise scaled to
//! the realized noise-free output power.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::baselines::{select_order, Criterion};
use crate::error::{Error, Result};
use crate::estimator::{fit_candidate, select_model, SearchSpace};
use crate::experiments::scenario::{Method, Scenario, SystemTruth};
use crate::online::{convergence_n, first_stop, nested_estimator, StepRecord, StoppingRule};
use crate::signals::{
    add_noise, bernoulli_input, derive_seed, sigma_from_snr, simulate_output, ImpulseResponse,
    NoiseModel, Signal,
};

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, trial as u64)
}

/// One synthesized record.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub u: Signal,
    pub ybar: Signal,
    pub y: Signal,
    pub noise_var: f64,
}

impl TrialData {
    pub fn generate(samples: usize, theta: &ImpulseResponse, snr_db: f64, seed: u64) -> Result<Self> {
        let u = bernoulli_input(samples, derive_seed(seed, 0))?;
        let ybar = simulate_output(theta, &u);
        let noise_var = sigma_from_snr(&ybar, snr_db)?;
        let y = add_noise(&ybar, &NoiseModel::new(noise_var, derive_seed(seed, 1))?);
        Ok(TrialData { u, ybar, y, noise_var })
    }

    /// Same draws at another SNR.
    pub fn at_snr(&self, snr_db: f64, seed: u64) -> Result<Self> {
        let noise_var = sigma_from_snr(&self.ybar, snr_db)?;
        let y = add_noise(&self.ybar, &NoiseModel::new(noise_var, derive_seed(seed, 1))?);
        Ok(TrialData {
            u: self.u.clone(),
            ybar: self.ybar.clone(),
            y,
            noise_var,
        })
    }
}

/// Root mean squared tap difference over `ambient` taps.
pub fn rmse_theta(truth: &ImpulseResponse, estimate: &ImpulseResponse, ambient: usize) -> Result<f64> {
    if ambient == 0 {
        return Err(Error::invalid("ambient length must be positive"));
    }
    let a = truth.embedded_to(ambient);
    let b = estimate.embedded_to(ambient);
    let sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sq / ambient as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub snr_db: f64,
    pub method: Method,
    pub d: usize,
    pub m: usize,
    /// Selected variance (grid mode only).
    pub noise_var: Option<f64>,
    pub true_noise_var: f64,
    pub rmse: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub snr_db: f64,
    pub method: Method,
    pub error: String,
}

/// Mean and sample standard deviation per SNR and method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub snr_db: f64,
    pub method: Method,
    pub trials_used: usize,
    pub failures: usize,
    pub mean_d: f64,
    pub sd_d: f64,
    pub mean_m: f64,
    pub sd_m: f64,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MonteCarloReport {
    pub trials: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
    pub aggregates: Vec<Aggregate>,
}

impl MonteCarloReport {
    pub fn aggregate(&self, snr_db: f64, method: Method) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.snr_db == snr_db && a.method == method)
    }

    pub fn results(&self, snr_db: f64, method: Method) -> impl Iterator<Item = &TrialResult> {
        self.trials
            .iter()
            .filter(move |t| t.snr_db == snr_db && t.method == method)
    }
}

/// `(mean, sample sd)` by two passes.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Run one method on one record.
pub fn estimate(
    scenario: &Scenario,
    space: &SearchSpace,
    truth: &ImpulseResponse,
    data: &TrialData,
    method: Method,
) -> Result<(usize, usize, Option<f64>, f64)> {
    let ambient = truth.ambient();
    match method {
        Method::Re => {
            let grid = scenario.noise_grid(&data.y, data.noise_var)?;
            let sel = select_model(&data.u, &data.y, space, &grid, &scenario.params()?)?;
            let rmse = rmse_theta(truth, &sel.impulse_response(ambient)?, ambient)?;
            Ok((sel.d, sel.m, sel.noise_var, rmse))
        }
        Method::Aic | Method::Bic => {
            let criterion = if method == Method::Aic { Criterion::Aic } else { Criterion::Bic };
            let order = select_order(&data.u, &data.y, space.max_len(), criterion)?;
            let fit = fit_candidate(&data.u, &data.y, 0, order.m)?;
            let rmse = rmse_theta(truth, &fit.impulse_response(ambient)?, ambient)?;
            Ok((0, order.m, None, rmse))
        }
    }
}

fn run_trial(
    scenario: &Scenario,
    space: &SearchSpace,
    truth: &SystemTruth,
    trial: usize,
) -> (Vec<TrialResult>, Vec<TrialFailure>) {
    let seed = trial_seed(scenario.seed, trial);
    let mut results = Vec::new();
    let mut failures = Vec::new();
    let fail = |snr_db: f64, method: Method, e: Error| TrialFailure {
        trial,
        snr_db,
        method,
        error: e.to_string(),
    };
    let base = match TrialData::generate(scenario.samples, &truth.simulation, scenario.snr_db[0], seed) {
        Ok(b) => b,
        Err(e) => {
            for &snr in &scenario.snr_db {
                for &method in &scenario.methods {
                    failures.push(fail(snr, method, Error::invalid(e.to_string())));
                }
            }
            return (results, failures);
        }
    };
    for &snr_db in &scenario.snr_db {
        let data = match base.at_snr(snr_db, seed) {
            Ok(d) => d,
            Err(e) => {
                let msg = e.to_string();
                failures.extend(scenario.methods.iter().map(|&m| fail(snr_db, m, Error::invalid(msg.clone()))));
                continue;
            }
        };
        for &method in &scenario.methods {
            let start = Instant::now();
            match estimate(scenario, space, &truth.reference, &data, method) {
                Ok((d, m, noise_var, rmse)) => results.push(TrialResult {
                    trial,
                    snr_db,
                    method,
                    d,
                    m,
                    noise_var,
                    true_noise_var: data.noise_var,
                    rmse,
                    elapsed: start.elapsed(),
                }),
                Err(e) => {
                    log::debug!("trial {trial} at {snr_db} dB ({method}) failed: {e}");
                    failures.push(fail(snr_db, method, e));
                }
            }
        }
    }
    (results, failures)
}

fn aggregate(scenario: &Scenario, trials: &[TrialResult], failures: &[TrialFailure]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &snr_db in &scenario.snr_db {
        for &method in &scenario.methods {
            let sel: Vec<&TrialResult> = trials
                .iter()
                .filter(|t| t.snr_db == snr_db && t.method == method)
                .collect();
            let ds: Vec<f64> = sel.iter().map(|t| t.d as f64).collect();
            let ms: Vec<f64> = sel.iter().map(|t| t.m as f64).collect();
            let rs: Vec<f64> = sel.iter().map(|t| t.rmse).collect();
            let (mean_d, sd_d) = mean_sd(&ds);
            let (mean_m, sd_m) = mean_sd(&ms);
            out.push(Aggregate {
                snr_db,
                method,
                trials_used: sel.len(),
                failures: failures
                    .iter()
                    .filter(|f| f.snr_db == snr_db && f.method == method)
                    .count(),
                mean_d,
                sd_d,
                mean_m,
                sd_m,
                mean_rmse: mean_sd(&rs).0,
            });
        }
    }
    out
}

/// Every trial at every SNR for every method of the scenario, on the
/// current rayon pool. Failed trials are reported, not fatal.
pub fn run_monte_carlo(scenario: &Scenario) -> Result<MonteCarloReport> {
    scenario.validate()?;
    let space = scenario.search_space()?;
    let truth = scenario.truth(None)?;
    let per_trial: Vec<_> = (0..scenario.trials)
        .into_par_iter()
        .map(|k| run_trial(scenario, &space, &truth, k))
        .collect();
    let mut report = MonteCarloReport::default();
    for (r, f) in per_trial {
        report.trials.extend(r);
        report.failures.extend(f);
    }
    report.aggregates = aggregate(scenario, &report.trials, &report.failures);
    Ok(report)
}

/// Delay RMSE against record length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    pub delay_rmse: f64,
    pub trials_used: usize,
    /// Short record: the candidate grid was shrunk to fit it.
    pub low_rank_risk: bool,
}

/// Records shorter than this are flagged in delay sweeps.
pub const LOW_RANK_SAMPLES: usize = 100;

/// Delay RMSE of the RE estimator for each record length in `lengths`, with
/// the true delay of trial `k` drawn uniformly from `delay_range`. Each trial
/// is one record; shorter lengths use its prefixes.
pub fn delay_rmse_sweep(
    scenario: &Scenario,
    lengths: &[usize],
    snr_db: f64,
    delay_range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<SweepPoint>> {
    scenario.validate()?;
    if lengths.is_empty() || lengths.iter().any(|&n| n < 4) {
        return Err(Error::invalid(format!("record lengths must be at least 4, got {lengths:?}")));
    }
    if delay_range.is_empty() {
        return Err(Error::invalid("delay range is empty"));
    }
    let n_max = *lengths.iter().max().expect("nonempty");
    let span = (delay_range.end() - delay_range.start() + 1) as u64;
    let params = scenario.params()?;
    let per_trial: Vec<Vec<Option<f64>>> = (0..scenario.trials)
        .into_par_iter()
        .map(|k| {
            let seed = trial_seed(scenario.seed, k);
            let delay = delay_range.start() + (derive_seed(seed, 2) % span) as usize;
            let run = || -> Result<Vec<Option<f64>>> {
                let truth = scenario.truth(Some(delay))?;
                let data = TrialData::generate(n_max, &truth.simulation, snr_db, seed)?;
                Ok(lengths
                    .iter()
                    .map(|&n| {
                        let max_len = scenario.max_len.min(n / 2);
                        let space = SearchSpace::new(max_len, 0..max_len).ok()?;
                        let u = data.u.prefix(n).ok()?;
                        let y = data.y.prefix(n).ok()?;
                        let grid = scenario.noise_grid(&y, data.noise_var).ok()?;
                        let sel = select_model(&u, &y, &space, &grid, &params).ok()?;
                        let err = sel.d as f64 - delay as f64;
                        Some(err * err)
                    })
                    .collect())
            };
            run().unwrap_or_else(|_| vec![None; lengths.len()])
        })
        .collect();
    Ok(lengths
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let sq: Vec<f64> = per_trial.iter().filter_map(|t| t[i]).collect();
            SweepPoint {
                n,
                delay_rmse: (sq.iter().sum::<f64>() / sq.len() as f64).sqrt(),
                trials_used: sq.len(),
                low_rank_risk: n < LOW_RANK_SAMPLES || n / 2 < scenario.max_len,
            }
        })
        .collect())
}

/// Summary of one streamed trial.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineTrial {
    pub trial: usize,
    /// First sample count from which the selection stays at the true support.
    pub convergence_n: Option<usize>,
    /// First stop for each threshold, in the order given.
    pub stops: Vec<Option<usize>>,
    pub final_selection: Option<(usize, usize)>,
    pub elapsed: Duration,
}

/// Stream one trial of the scenario at `snr_db` through the nested online
/// engine without stopping, and read off convergence and stopping points.
pub fn online_trial(
    scenario: &Scenario,
    snr_db: f64,
    epsilons: &[f64],
    trial: usize,
) -> Result<(OnlineTrial, Vec<StepRecord>)> {
    let start = Instant::now();
    let truth = scenario.truth(None)?;
    let seed = trial_seed(scenario.seed, trial);
    let data = TrialData::generate(scenario.samples, &truth.simulation, snr_db, seed)?;
    let warm = scenario.warm_start();
    let noise = scenario.online_noise(&data.y.prefix(warm.min(data.y.len()))?, data.noise_var)?;
    let mut est = nested_estimator(
        &data.u,
        &data.y,
        warm,
        &scenario.online_space()?,
        noise,
        scenario.params()?,
        None,
    )?;
    let trace = est.run(&data.u, &data.y)?.trace;
    let (d, m) = scenario.true_support();
    let stops = epsilons
        .iter()
        .map(|&e| StoppingRule::new(e).map(|r| first_stop(&trace, r)))
        .collect::<Result<Vec<_>>>()?;
    let summary = OnlineTrial {
        trial,
        convergence_n: convergence_n(&trace, d, m),
        stops,
        final_selection: trace
            .last()
            .and_then(|r| r.selection.map(|s| (s.d, s.m))),
        elapsed: start.elapsed(),
    };
    Ok((summary, trace))
}

/// [`online_trial`] for every trial of the scenario; failures are dropped
/// and counted.
pub fn run_online(scenario: &Scenario, snr_db: f64, epsilons: &[f64]) -> Result<(Vec<OnlineTrial>, usize)> {
    scenario.validate()?;
    let out: Vec<_> = (0..scenario.trials)
        .into_par_iter()
        .map(|k| online_trial(scenario, snr_db, epsilons, k).map(|r| r.0))
        .collect();
    let failures = out.iter().filter(|r| r.is_err()).count();
    Ok((out.into_iter().filter_map(|r| r.ok()).collect(), failures))
}

/// Median of the values, with `None` sorting above every number.
pub fn median_of(values: &[Option<usize>]) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<Option<usize>> = values.to_vec();
    v.sort_by_key(|x| x.unwrap_or(usize::MAX));
    v[(v.len() - 1) / 2]
}
