//! Recursive least squares over a fixed candidate grid, online re-selection
//! of `(d*, m*)` and the bound-to-signal stopping rule.
//!
//! Two interchangeable engines feed the selection step:
//!
//! * [`OnlineState`] keeps `(A^T A)^{-1}`, `A^T y` and `theta_hat` for every
//!   candidate and appends rows with the rank-one inverse update.
//! * [`NestedOnlineState`] keeps one Cholesky factor per delay; every length
//!   sharing that delay is a leading block, so a step costs `O(M^2)` per delay.
//!
//! Both produce the same fits as a batch solve on the data seen so far.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{
    NoiseGrid, ReBoundSet, SearchSpace, SigmaOutcome, SigmaStatus, ValidationParams,
};
use crate::linalg::{solve_ls, NestedCholesky, ToeplitzGram, ToeplitzSlice};
use crate::signals::Signal;

/// Updates between full re-factorizations of each inverse.
pub const DEFAULT_REFACTOR_EVERY: usize = 10_000;

/// Warm-start length for a grid with maximum length `max_len`.
pub fn default_warm_start(max_len: usize) -> usize {
    max_len + 10
}

/// Toeplitz row for the sample with zero-based index `n`, restricted to
/// columns `d..m`: `[u(n - d), u(n - d - 1), ..., u(n + 1 - m)]`.
pub fn new_row(u: &[f64], n: usize, d: usize, m: usize) -> DVector<f64> {
    DVector::from_iterator(
        m - d,
        (d..m).map(|c| if c <= n { u.get(n - c).copied().unwrap_or(0.0) } else { 0.0 }),
    )
}

/// How `x_{d,m}` is refreshed after each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualMode {
    /// `||y - A theta||^2 / N` from the full record, `O(N (m - d))`.
    #[default]
    Recompute,
    /// `(||y||^2 - theta^T A^T y) / N`, `O(m - d)`.
    NormalEquations,
}

/// One candidate's recursive least-squares state.
#[derive(Debug, Clone)]
pub struct CandidateState {
    d: usize,
    m: usize,
    k_inv: DMatrix<f64>,
    aty: DVector<f64>,
    theta: DVector<f64>,
    x_dm: f64,
    yhat_power: f64,
}

impl CandidateState {
    fn from_batch(u: &Signal, y: &Signal, d: usize, m: usize) -> Result<Self> {
        let slice = ToeplitzSlice::new(u, d, m)?;
        let sol = solve_ls(&slice, y).map_err(|e| match e {
            Error::Singular { rcond, .. } => Error::InsufficientData(format!(
                "candidate (d={d}, m={m}) is rank deficient on the {}-sample warm start \
                 (rcond {rcond:.3e}); use a longer warm start",
                y.len()
            )),
            other => other,
        })?;
        let n = y.len() as f64;
        let x_dm = sol.residual_norm_sq() / n;
        let aty = slice.transpose_apply(y.samples());
        let yhat_power = sol.coefficients.dot(&aty) / n;
        Ok(CandidateState {
            d,
            m,
            k_inv: sol.gram_inverse,
            aty,
            theta: sol.coefficients,
            x_dm,
            yhat_power,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Current `(A^T A)^{-1}`.
    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.k_inv
    }

    pub fn cross(&self) -> &DVector<f64> {
        &self.aty
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn x_dm(&self) -> f64 {
        self.x_dm
    }

    pub fn yhat_power(&self) -> f64 {
        self.yhat_power
    }

    /// Append the row `b` with output `y_new`:
    /// `K^-1 -= c c^T / (1 + b^T c)` with `c = K^-1 b`, `A^T y += b y_new`,
    /// `theta = K^-1 A^T y`.
    pub fn rank_one_update(&mut self, b: &DVector<f64>, y_new: f64) {
        let c = &self.k_inv * b;
        let denom = 1.0 + b.dot(&c);
        self.k_inv.ger(-1.0 / denom, &c, &c, 1.0);
        self.aty.axpy(y_new, b, 1.0);
        self.theta.gemv(1.0, &self.k_inv, &self.aty, 0.0);
    }

    fn refresh_residual(&mut self, u: &[f64], y: &[f64], energy: f64, mode: ResidualMode) {
        let n = y.len() as f64;
        let explained = self.theta.dot(&self.aty);
        self.yhat_power = explained / n;
        self.x_dm = match mode {
            ResidualMode::NormalEquations => (energy - explained).max(0.0) / n,
            ResidualMode::Recompute => {
                let theta = self.theta.as_slice();
                let mut acc = 0.0;
                for (r, obs) in y.iter().enumerate() {
                    let mut fit = 0.0;
                    for (j, t) in theta.iter().enumerate() {
                        let lag = self.d + j;
                        if lag > r {
                            break;
                        }
                        fit += t * u[r - lag];
                    }
                    acc += (obs - fit) * (obs - fit);
                }
                acc / n
            }
        };
    }
}

/// Observed quantities of one candidate at the current sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateFit {
    pub d: usize,
    pub m: usize,
    pub x_dm: f64,
    pub yhat_power: f64,
}

/// A growing record feeding per-candidate fits to the selection step.
pub trait CandidateSource {
    fn samples(&self) -> usize;

    /// Append `(u(N), y(N))`.
    fn push(&mut self, u_new: f64, y_new: f64) -> Result<()>;

    fn fits(&self) -> Vec<CandidateFit>;

    fn coefficients(&self, d: usize, m: usize) -> Option<Vec<f64>>;
}

fn check_sample(u_new: f64, y_new: f64) -> Result<()> {
    if u_new.is_finite() && y_new.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("non-finite sample ({u_new}, {y_new})")))
    }
}

fn check_warm_start(u: &Signal, y: &Signal, max_len: usize) -> Result<()> {
    if u.len() != y.len() {
        return Err(Error::invalid(format!(
            "input length {} and output length {} differ",
            u.len(),
            y.len()
        )));
    }
    if u.len() < max_len {
        return Err(Error::InsufficientData(format!(
            "warm start of {} samples is shorter than the maximum length {max_len}",
            u.len()
        )));
    }
    Ok(())
}

/// Per-candidate recursive state for every `(d, m)` of a grid.
#[derive(Debug, Clone)]
pub struct OnlineState {
    u: Vec<f64>,
    y: Vec<f64>,
    output_energy: f64,
    candidates: Vec<CandidateState>,
    mode: ResidualMode,
    refactor_every: usize,
    since_refactor: usize,
}

impl OnlineState {
    /// Batch fits on the warm-start record `(u, y)`.
    pub fn init_state(
        u: &Signal,
        y: &Signal,
        candidates: &[(usize, usize)],
        mode: ResidualMode,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::invalid("candidate list is empty"));
        }
        for &(d, m) in candidates {
            if d >= m {
                return Err(Error::invalid(format!("candidate (d={d}, m={m}) needs d < m")));
            }
        }
        let max_len = candidates.iter().map(|c| c.1).max().unwrap_or(0);
        check_warm_start(u, y, max_len)?;
        let candidates = candidates
            .par_iter()
            .map(|&(d, m)| CandidateState::from_batch(u, y, d, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(OnlineState {
            u: u.samples().to_vec(),
            y: y.samples().to_vec(),
            output_energy: y.samples().iter().map(|v| v * v).sum(),
            candidates,
            mode,
            refactor_every: DEFAULT_REFACTOR_EVERY,
            since_refactor: 0,
        })
    }

    /// Re-factorize every `every` updates instead of the default.
    pub fn with_refactor_interval(mut self, every: usize) -> Self {
        self.refactor_every = every.max(1);
        self
    }

    pub fn candidates(&self) -> &[CandidateState] {
        &self.candidates
    }

    pub fn candidate(&self, d: usize, m: usize) -> Option<&CandidateState> {
        self.candidates.iter().find(|c| c.d == d && c.m == m)
    }

    pub fn input(&self) -> &[f64] {
        &self.u
    }

    pub fn output(&self) -> &[f64] {
        &self.y
    }

    fn refactor(&mut self) -> Result<()> {
        let u = Signal::new(self.u.clone())?;
        let y = Signal::new(self.y.clone())?;
        let energy = self.output_energy;
        let mode = self.mode;
        self.candidates.par_iter_mut().try_for_each(|c| {
            *c = CandidateState::from_batch(&u, &y, c.d, c.m)?;
            c.refresh_residual(u.samples(), y.samples(), energy, mode);
            Ok::<_, Error>(())
        })?;
        self.since_refactor = 0;
        Ok(())
    }
}

impl CandidateSource for OnlineState {
    fn samples(&self) -> usize {
        self.y.len()
    }

    fn push(&mut self, u_new: f64, y_new: f64) -> Result<()> {
        check_sample(u_new, y_new)?;
        let n = self.u.len();
        self.u.push(u_new);
        self.y.push(y_new);
        self.output_energy += y_new * y_new;
        self.since_refactor += 1;
        if self.since_refactor >= self.refactor_every {
            return self.refactor();
        }
        let (u, y, energy, mode) = (&self.u, &self.y, self.output_energy, self.mode);
        self.candidates.par_iter_mut().for_each(|c| {
            let b = new_row(u, n, c.d, c.m);
            c.rank_one_update(&b, y_new);
            c.refresh_residual(u, y, energy, mode);
        });
        Ok(())
    }

    fn fits(&self) -> Vec<CandidateFit> {
        self.candidates
            .iter()
            .map(|c| CandidateFit {
                d: c.d,
                m: c.m,
                x_dm: c.x_dm,
                yhat_power: c.yhat_power,
            })
            .collect()
    }

    fn coefficients(&self, d: usize, m: usize) -> Option<Vec<f64>> {
        self.candidate(d, m).map(|c| c.theta.as_slice().to_vec())
    }
}

/// One Cholesky factor per delay covering every `(d, m)` of a search space.
#[derive(Debug, Clone)]
pub struct NestedOnlineState {
    u: Vec<f64>,
    y: Vec<f64>,
    output_energy: f64,
    space: SearchSpace,
    factors: Vec<NestedCholesky>,
}

impl NestedOnlineState {
    pub fn init_state(u: &Signal, y: &Signal, space: &SearchSpace) -> Result<Self> {
        check_warm_start(u, y, space.max_len())?;
        let gram = ToeplitzGram::new(u, y, space.max_len())?;
        let factors = space
            .delays()
            .map(|d| {
                gram.nested_factor(d).map_err(|e| match e {
                    Error::Singular { start, end, rcond } => Error::InsufficientData(format!(
                        "candidate (d={start}, m={end}) is rank deficient on the {}-sample \
                         warm start (rcond {rcond:.3e}); use a longer warm start",
                        y.len()
                    )),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NestedOnlineState {
            u: u.samples().to_vec(),
            y: y.samples().to_vec(),
            output_energy: gram.output_energy(),
            space: space.clone(),
            factors,
        })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }
}

impl CandidateSource for NestedOnlineState {
    fn samples(&self) -> usize {
        self.y.len()
    }

    fn push(&mut self, u_new: f64, y_new: f64) -> Result<()> {
        check_sample(u_new, y_new)?;
        let n = self.u.len();
        self.u.push(u_new);
        self.y.push(y_new);
        self.output_energy += y_new * y_new;
        let max_len = self.space.max_len();
        let start = self.space.delays().start;
        let u = &self.u;
        self.factors.par_iter_mut().enumerate().for_each(|(i, f)| {
            let mut b = new_row(u, n, start + i, max_len);
            f.rank_one_update(b.as_mut_slice(), y_new);
        });
        Ok(())
    }

    fn fits(&self) -> Vec<CandidateFit> {
        let n = self.y.len() as f64;
        let start = self.space.delays().start;
        let mut out = Vec::with_capacity(self.space.cell_count());
        for (i, f) in self.factors.iter().enumerate() {
            let d = start + i;
            let mut explained = 0.0;
            for (k, z) in f.projected_output().iter().enumerate() {
                explained += z * z;
                out.push(CandidateFit {
                    d,
                    m: d + k + 1,
                    x_dm: (self.output_energy - explained).max(0.0) / n,
                    yhat_power: explained / n,
                });
            }
        }
        out
    }

    fn coefficients(&self, d: usize, m: usize) -> Option<Vec<f64>> {
        let delays = self.space.delays();
        if !delays.contains(&d) || m <= d || m > self.space.max_len() {
            return None;
        }
        Some(self.factors[d - delays.start].solve_leading(m - d))
    }
}

/// Threshold on `z_hi / yhat_power`; the estimated model SNR then exceeds
/// `10 log10(1 / epsilon)` dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    epsilon: f64,
}

impl StoppingRule {
    /// `epsilon` in `(0, 1]`; `1` stops as soon as the bound is below the
    /// fitted output power.
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon <= 1.0 {
            Ok(StoppingRule { epsilon })
        } else {
            Err(Error::invalid(format!("stopping threshold must lie in (0, 1], got {epsilon}")))
        }
    }

    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        StoppingRule::new(10f64.powf(-snr_db / 10.0))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn target_snr_db(&self) -> f64 {
        10.0 * (1.0 / self.epsilon).log10()
    }
}

pub fn should_stop(z_hi: f64, yhat_power: f64, rule: StoppingRule) -> bool {
    yhat_power > 0.0 && z_hi / yhat_power < rule.epsilon
}

/// How the noise variance is handled while streaming.
#[derive(Debug, Clone, PartialEq)]
pub enum OnlineNoise {
    Known(f64),
    /// Grid search on the warm start, then held fixed.
    FixedAfterWarmStart(NoiseGrid),
    /// Grid search repeated at every step.
    Regrid(NoiseGrid),
}

/// Winner of one online step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSelection {
    pub d: usize,
    pub m: usize,
    pub noise_var: f64,
    pub x_dm: f64,
    pub yhat_power: f64,
    pub bounds: ReBoundSet,
}

/// Minimize the relative-entropy bound over candidates and variances at
/// sample count `n`; candidates without a valid bound are skipped for this
/// step only.
pub fn online_step(
    fits: &[CandidateFit],
    n: usize,
    noise_vars: &[f64],
    params: &ValidationParams,
) -> Option<StepSelection> {
    let mut best: Option<(StepSelection, usize)> = None;
    for (idx, &s) in noise_vars.iter().enumerate() {
        for f in fits {
            let Ok(bounds) = ReBoundSet::compute(f.x_dm, f.d, f.m, n, s, params) else {
                continue;
            };
            let key = (bounds.re_hi, f.m, f.d, idx);
            let replace = match &best {
                None => true,
                Some((b, bi)) => match key.0.total_cmp(&b.bounds.re_hi) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => (key.1, key.2, key.3) < (b.m, b.d, *bi),
                },
            };
            if replace {
                best = Some((
                    StepSelection {
                        d: f.d,
                        m: f.m,
                        noise_var: s,
                        x_dm: f.x_dm,
                        yhat_power: f.yhat_power,
                        bounds,
                    },
                    idx,
                ));
            }
        }
    }
    best.map(|b| b.0)
}

/// Variance from the warm start: every cell must admit a bound for a
/// variance to be eligible.
fn warm_start_variance(
    fits: &[CandidateFit],
    n: usize,
    grid: &NoiseGrid,
    params: &ValidationParams,
) -> Result<f64> {
    let mut outcomes = Vec::new();
    let mut best: Option<(f64, usize, usize, f64)> = None;
    for &s in grid.variances() {
        let mut local: Option<(f64, usize, usize)> = None;
        let mut rejected = None;
        for f in fits {
            match ReBoundSet::compute(f.x_dm, f.d, f.m, n, s, params) {
                Ok(b) => {
                    if local.is_none_or(|l| (b.re_hi, f.m, f.d) < l) {
                        local = Some((b.re_hi, f.m, f.d));
                    }
                }
                Err(reason) => {
                    rejected = Some(SigmaStatus::Rejected { d: f.d, m: f.m, reason });
                    break;
                }
            }
        }
        match rejected.or(local.map(|(re_hi, m, d)| SigmaStatus::Accepted { d, m, re_hi })) {
            Some(status @ SigmaStatus::Accepted { d, m, re_hi }) => {
                outcomes.push(SigmaOutcome { noise_var: s, status });
                if best.is_none_or(|b| (re_hi, m, d) < (b.0, b.1, b.2)) {
                    best = Some((re_hi, m, d, s));
                }
            }
            Some(status) => outcomes.push(SigmaOutcome { noise_var: s, status }),
            None => return Err(Error::invalid("candidate grid is empty")),
        }
    }
    best.map(|b| b.3).ok_or(Error::NoFeasibleModel(outcomes))
}

/// Per-step trace record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub selection: Option<StepSelection>,
    /// `z_hi / yhat_power` of the selected candidate, `NaN` without one.
    pub ratio: f64,
    pub stopped: bool,
}

impl StepRecord {
    pub fn d_star(&self) -> Option<usize> {
        self.selection.map(|s| s.d)
    }

    pub fn m_star(&self) -> Option<usize> {
        self.selection.map(|s| s.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Criterion,
    DataExhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Criterion => "stopping criterion met",
            StopReason::DataExhausted => "data exhausted",
        })
    }
}

#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub trace: Vec<StepRecord>,
    pub stop_n: usize,
    pub reason: StopReason,
}

/// Streaming estimator: feed samples, read the selection after each one.
#[derive(Debug, Clone)]
pub struct OnlineEstimator<S> {
    source: S,
    noise: OnlineNoise,
    noise_vars: Vec<f64>,
    params: ValidationParams,
    rule: Option<StoppingRule>,
}

impl<S: CandidateSource> OnlineEstimator<S> {
    pub fn new(
        source: S,
        noise: OnlineNoise,
        params: ValidationParams,
        rule: Option<StoppingRule>,
    ) -> Result<Self> {
        let noise_vars = match &noise {
            OnlineNoise::Known(s) => NoiseGrid::known(*s)?.variances().to_vec(),
            OnlineNoise::Regrid(grid) => grid.variances().to_vec(),
            OnlineNoise::FixedAfterWarmStart(grid) => {
                vec![warm_start_variance(&source.fits(), source.samples(), grid, &params)?]
            }
        };
        Ok(OnlineEstimator {
            source,
            noise,
            noise_vars,
            params,
            rule,
        })
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    pub fn noise(&self) -> &OnlineNoise {
        &self.noise
    }

    /// Variances searched at each step.
    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_vars
    }

    /// Selection on the data seen so far.
    pub fn current(&self) -> StepRecord {
        let n = self.source.samples();
        let selection = online_step(&self.source.fits(), n, &self.noise_vars, &self.params);
        let ratio = selection.map_or(f64::NAN, |s| s.bounds.z_hi / s.yhat_power);
        let stopped = match (selection, self.rule) {
            (Some(s), Some(rule)) => should_stop(s.bounds.z_hi, s.yhat_power, rule),
            _ => false,
        };
        StepRecord {
            n,
            selection,
            ratio,
            stopped,
        }
    }

    pub fn push(&mut self, u_new: f64, y_new: f64) -> Result<StepRecord> {
        self.source.push(u_new, y_new)?;
        Ok(self.current())
    }

    /// Coefficients of the current winner.
    pub fn coefficients(&self) -> Option<Vec<f64>> {
        let s = self.current().selection?;
        self.source.coefficients(s.d, s.m)
    }

    /// Stream the samples of `(u, y)` beyond those already consumed. The
    /// trace starts with the warm-start record and ends at the first step
    /// meeting the stopping rule, or at the end of the data.
    pub fn run(&mut self, u: &Signal, y: &Signal) -> Result<OnlineRun> {
        if u.len() != y.len() {
            return Err(Error::invalid(format!(
                "input length {} and output length {} differ",
                u.len(),
                y.len()
            )));
        }
        let start = self.source.samples();
        if u.len() < start {
            return Err(Error::InsufficientData(format!(
                "record of {} samples is shorter than the {start}-sample warm start",
                u.len()
            )));
        }
        let mut trace = vec![self.current()];
        if trace[0].stopped {
            return Ok(OnlineRun {
                trace,
                stop_n: start,
                reason: StopReason::Criterion,
            });
        }
        for k in start..u.len() {
            let rec = self.push(u.samples()[k], y.samples()[k])?;
            trace.push(rec);
            if rec.stopped {
                return Ok(OnlineRun {
                    stop_n: rec.n,
                    trace,
                    reason: StopReason::Criterion,
                });
            }
        }
        Ok(OnlineRun {
            stop_n: self.source.samples(),
            trace,
            reason: StopReason::DataExhausted,
        })
    }
}

/// First sample count at which the trace's ratio drops below `rule`.
pub fn first_stop(trace: &[StepRecord], rule: StoppingRule) -> Option<usize> {
    trace
        .iter()
        .find(|r| r.selection.is_some_and(|s| should_stop(s.bounds.z_hi, s.yhat_power, rule)))
        .map(|r| r.n)
}

/// Smallest sample count from which every later record selects `(d, m)`.
pub fn convergence_n(trace: &[StepRecord], d: usize, m: usize) -> Option<usize> {
    let hit = |r: &StepRecord| r.d_star() == Some(d) && r.m_star() == Some(m);
    let tail = trace.iter().rev().take_while(|r| hit(r)).count();
    (tail > 0).then(|| trace[trace.len() - tail].n)
}

/// Warm-start and build a nested-engine estimator over the whole search space.
pub fn nested_estimator(
    u: &Signal,
    y: &Signal,
    warm_start: usize,
    space: &SearchSpace,
    noise: OnlineNoise,
    params: ValidationParams,
    rule: Option<StoppingRule>,
) -> Result<OnlineEstimator<NestedOnlineState>> {
    if u.len() < warm_start {
        return Err(Error::InsufficientData(format!(
            "record of {} samples is shorter than the {warm_start}-sample warm start",
            u.len()
        )));
    }
    let state = NestedOnlineState::init_state(&u.prefix(warm_start)?, &y.prefix(warm_start)?, space)?;
    OnlineEstimator::new(state, noise, params, rule)
}
