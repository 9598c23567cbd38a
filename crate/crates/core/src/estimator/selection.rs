//! Joint delay / length / noise-variance selection by minimizing the
//! worst-case relative entropy over a finite grid.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::estimator::bounds::{ReBoundSet, Rejection, ValidationParams};
use crate::linalg::{solve_ls, LsSolution, ToeplitzGram, ToeplitzSlice};
use crate::signals::{ImpulseResponse, Signal};

/// Default density of a geometric noise-variance grid.
pub const DEFAULT_POINTS_PER_DECADE: usize = 40;

/// Hypothesized noise variances, ascending.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseGrid {
    /// Variance known a priori.
    Known(f64),
    Grid(Vec<f64>),
}

impl NoiseGrid {
    pub fn known(noise_var: f64) -> Result<Self> {
        check_variance(noise_var)?;
        Ok(NoiseGrid::Known(noise_var))
    }

    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("noise variance grid is empty"));
        }
        for &v in &values {
            check_variance(v)?;
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(NoiseGrid::Grid(values))
    }

    /// Geometric spacing of variances over `[min, max]`, `per_decade` points
    /// per factor of ten, both ends included.
    pub fn geometric(min: f64, max: f64, per_decade: usize) -> Result<Self> {
        check_variance(min)?;
        check_variance(max)?;
        if min > max || per_decade == 0 {
            return Err(Error::invalid(format!(
                "bad geometric grid: [{min}, {max}] with {per_decade} points per decade"
            )));
        }
        let decades = (max / min).log10();
        let steps = (decades * per_decade as f64).round() as usize;
        if steps == 0 {
            return NoiseGrid::from_values(vec![min]);
        }
        let ratio = (max / min).powf(1.0 / steps as f64);
        NoiseGrid::from_values((0..=steps).map(|i| min * ratio.powi(i as i32)).collect())
    }

    /// Variances that put a signal of the given `power` at SNRs from
    /// `min_db` to `max_db` (inclusive) in steps of `step_db`.
    pub fn snr_relative(power: f64, min_db: f64, max_db: f64, step_db: f64) -> Result<Self> {
        if !(power > 0.0 && step_db > 0.0 && min_db <= max_db) {
            return Err(Error::invalid(format!(
                "bad SNR grid: power {power}, [{min_db}, {max_db}] dB step {step_db}"
            )));
        }
        let steps = ((max_db - min_db) / step_db + 1e-9).floor() as usize;
        NoiseGrid::from_values(
            (0..=steps)
                .map(|i| power / 10f64.powf((min_db + i as f64 * step_db) / 10.0))
                .collect(),
        )
    }

    pub fn variances(&self) -> &[f64] {
        match self {
            NoiseGrid::Known(v) => std::slice::from_ref(v),
            NoiseGrid::Grid(v) => v,
        }
    }

    pub fn is_known(&self) -> bool {
        matches!(self, NoiseGrid::Known(_))
    }
}

fn check_variance(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("noise variance must be positive, got {v}")))
    }
}

/// Candidate supports: every `(d, m)` with `d` in `delays` and `d < m <= max_len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    max_len: usize,
    delays: Range<usize>,
}

impl SearchSpace {
    pub fn new(max_len: usize, delays: Range<usize>) -> Result<Self> {
        if max_len == 0 || delays.is_empty() || delays.end > max_len {
            return Err(Error::invalid(format!(
                "delay range {delays:?} must be a nonempty subset of 0..{max_len}"
            )));
        }
        Ok(SearchSpace { max_len, delays })
    }

    pub fn full(max_len: usize) -> Result<Self> {
        SearchSpace::new(max_len, 0..max_len)
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn delays(&self) -> Range<usize> {
        self.delays.clone()
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.delays
            .clone()
            .flat_map(move |d| (d + 1..=self.max_len).map(move |m| (d, m)))
    }

    pub fn cell_count(&self) -> usize {
        self.delays.clone().map(|d| self.max_len - d).sum()
    }
}

/// A fitted `(d, m)` model.
#[derive(Debug, Clone)]
pub struct ModelCandidate {
    pub d: usize,
    pub m: usize,
    pub fit: LsSolution,
    /// `(1/N) ||y - yhat||^2` from `fit.residual`.
    pub x_dm: f64,
    /// `(1/N) ||yhat||^2`.
    pub yhat_power: f64,
}

impl ModelCandidate {
    /// Estimated taps embedded in an ambient window of `ambient` taps.
    pub fn impulse_response(&self, ambient: usize) -> Result<ImpulseResponse> {
        ImpulseResponse::new(self.d, self.fit.coefficients.as_slice().to_vec(), ambient)
    }
}

pub fn fit_candidate(u: &Signal, y: &Signal, d: usize, m: usize) -> Result<ModelCandidate> {
    let slice = ToeplitzSlice::new(u, d, m)?;
    let fit = solve_ls(&slice, y)?;
    let n = y.len() as f64;
    let x_dm = fit.residual_norm_sq() / n;
    let yhat_power = y
        .samples()
        .iter()
        .zip(&fit.residual)
        .map(|(obs, r)| (obs - r) * (obs - r))
        .sum::<f64>()
        / n;
    Ok(ModelCandidate {
        d,
        m,
        fit,
        x_dm,
        yhat_power,
    })
}

/// Output errors `x_{d,m}` for every cell of a search space.
#[derive(Debug, Clone)]
pub struct OutputErrorTable {
    n: usize,
    space: SearchSpace,
    rows: Vec<Vec<f64>>,
}

impl OutputErrorTable {
    pub fn compute(u: &Signal, y: &Signal, space: &SearchSpace) -> Result<Self> {
        let gram = ToeplitzGram::new(u, y, space.max_len())?;
        let n = u.len();
        let rows = space
            .delays()
            .map(|d| {
                gram.nested_residuals(d)
                    .map(|r| r.into_iter().map(|e| e / n as f64).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(OutputErrorTable {
            n,
            space: space.clone(),
            rows,
        })
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn x(&self, d: usize, m: usize) -> f64 {
        self.rows[d - self.space.delays.start][m - d - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.space.cells().map(|(d, m)| (d, m, self.x(d, m)))
    }
}

/// One evaluated cell of the bound grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub d: usize,
    pub m: usize,
    pub x_dm: f64,
    pub bounds: ReBoundSet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaStatus {
    /// Best cell for this variance.
    Accepted { d: usize, m: usize, re_hi: f64 },
    /// First cell (in `(d, m)` order) without a valid bound.
    Rejected { d: usize, m: usize, reason: Rejection },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaOutcome {
    pub noise_var: f64,
    pub status: SigmaStatus,
}

impl fmt::Display for SigmaOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.status {
            SigmaStatus::Accepted { d, m, re_hi } => write!(
                f,
                "noise variance {:.6e}: accepted, best (d={d}, m={m}) RE bound {re_hi:.6}",
                self.noise_var
            ),
            SigmaStatus::Rejected { d, m, reason } => write!(
                f,
                "noise variance {:.6e}: rejected at (d={d}, m={m}): {reason}",
                self.noise_var
            ),
        }
    }
}

/// Result of the grid search.
#[derive(Debug, Clone)]
pub struct Selection {
    pub d: usize,
    pub m: usize,
    /// Selected noise variance; `None` when the variance was known.
    pub noise_var: Option<f64>,
    /// Variance the bounds were evaluated with (known or selected).
    pub bound_noise_var: f64,
    pub re_hi: f64,
    pub bounds: ReBoundSet,
    pub candidate: ModelCandidate,
    /// Every cell evaluated at `bound_noise_var`.
    pub grid: Vec<GridCell>,
    pub sigma_outcomes: Vec<SigmaOutcome>,
}

impl Selection {
    pub fn impulse_response(&self, ambient: usize) -> Result<ImpulseResponse> {
        self.candidate.impulse_response(ambient)
    }
}

/// Winner of the grid search before the final refit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub d: usize,
    pub m: usize,
    pub noise_var: f64,
    pub sigma_index: usize,
    pub bounds: ReBoundSet,
}

/// `(re, m, d, sigma)` lexicographic order used for the argmin.
fn better(a: (f64, usize, usize, usize), b: (f64, usize, usize, usize)) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Less) => true,
        Some(Ordering::Greater) | None => false,
        Some(Ordering::Equal) => (a.1, a.2, a.3) < (b.1, b.2, b.3),
    }
}

/// Evaluate one variance over every cell. A single cell without a valid
/// bound rejects the variance as a whole.
fn evaluate_variance(
    table: &OutputErrorTable,
    noise_var: f64,
    params: &ValidationParams,
) -> std::result::Result<(usize, usize, ReBoundSet), (usize, usize, Rejection)> {
    let n = table.samples();
    let mut best: Option<(usize, usize, ReBoundSet)> = None;
    for (d, m, x) in table.iter() {
        let b = ReBoundSet::compute(x, d, m, n, noise_var, params).map_err(|r| (d, m, r))?;
        let replace = match best {
            None => true,
            Some((bd, bm, bb)) => better((b.re_hi, m, d, 0), (bb.re_hi, bm, bd, 0)),
        };
        if replace {
            best = Some((d, m, b));
        }
    }
    Ok(best.expect("search space is never empty"))
}

/// Grid search over precomputed output errors.
pub fn optimize(
    table: &OutputErrorTable,
    grid: &NoiseGrid,
    params: &ValidationParams,
) -> (Option<GridOptimum>, Vec<SigmaOutcome>) {
    let mut outcomes = Vec::with_capacity(grid.variances().len());
    let mut best: Option<GridOptimum> = None;
    for (idx, &noise_var) in grid.variances().iter().enumerate() {
        match evaluate_variance(table, noise_var, params) {
            Ok((d, m, bounds)) => {
                outcomes.push(SigmaOutcome {
                    noise_var,
                    status: SigmaStatus::Accepted {
                        d,
                        m,
                        re_hi: bounds.re_hi,
                    },
                });
                let replace = match best {
                    None => true,
                    Some(b) => better(
                        (bounds.re_hi, m, d, idx),
                        (b.bounds.re_hi, b.m, b.d, b.sigma_index),
                    ),
                };
                if replace {
                    best = Some(GridOptimum {
                        d,
                        m,
                        noise_var,
                        sigma_index: idx,
                        bounds,
                    });
                }
            }
            Err((d, m, reason)) => outcomes.push(SigmaOutcome {
                noise_var,
                status: SigmaStatus::Rejected { d, m, reason },
            }),
        }
    }
    (best, outcomes)
}

/// Bound grid for one variance; cells without a valid bound are skipped.
pub fn bound_grid(table: &OutputErrorTable, noise_var: f64, params: &ValidationParams) -> Vec<GridCell> {
    let n = table.samples();
    table
        .iter()
        .filter_map(|(d, m, x_dm)| {
            ReBoundSet::compute(x_dm, d, m, n, noise_var, params)
                .ok()
                .map(|bounds| GridCell { d, m, x_dm, bounds })
        })
        .collect()
}

/// Select `(d*, m*)` and, for a grid, the noise variance, by minimizing the
/// worst-case relative entropy; ties go to the smallest `m`, then `d`, then
/// variance.
pub fn select_model(
    u: &Signal,
    y: &Signal,
    space: &SearchSpace,
    grid: &NoiseGrid,
    params: &ValidationParams,
) -> Result<Selection> {
    if space.max_len() > u.len() {
        return Err(Error::invalid(format!(
            "maximum length {} exceeds the record length {}",
            space.max_len(),
            u.len()
        )));
    }
    let table = OutputErrorTable::compute(u, y, space)?;
    let (best, sigma_outcomes) = optimize(&table, grid, params);
    let Some(best) = best else {
        return Err(Error::NoFeasibleModel(sigma_outcomes));
    };
    let candidate = fit_candidate(u, y, best.d, best.m)?;
    Ok(Selection {
        d: best.d,
        m: best.m,
        noise_var: (!grid.is_known()).then_some(best.noise_var),
        bound_noise_var: best.noise_var,
        re_hi: best.bounds.re_hi,
        bounds: best.bounds,
        grid: bound_grid(&table, best.noise_var, params),
        candidate,
        sigma_outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::bounds::re_upper;
    use crate::signals::{add_noise, bernoulli_input, simulate_output, standard_normal, NoiseModel};

    #[test]
    fn geometric_grid_density() {
        let g = NoiseGrid::geometric(0.01, 1.0, 40).unwrap();
        let v = g.variances();
        assert_eq!(v.len(), 81);
        assert!((v[0] - 0.01).abs() < 1e-15 && (v[80] - 1.0).abs() < 1e-12);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(NoiseGrid::geometric(1.0, 0.1, 10).is_err());
        assert!(NoiseGrid::from_values(vec![]).is_err());
    }

    #[test]
    fn snr_grid_contains_each_level() {
        let g = NoiseGrid::snr_relative(2.0, 0.0, 20.0, 1.0).unwrap();
        assert_eq!(g.variances().len(), 21);
        assert!((g.variances()[0] - 2.0 / 100.0).abs() < 1e-15);
        assert!((g.variances()[20] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn search_space_cells() {
        let s = SearchSpace::new(4, 1..3).unwrap();
        let cells: Vec<_> = s.cells().collect();
        assert_eq!(cells, vec![(1, 2), (1, 3), (1, 4), (2, 3), (2, 4)]);
        assert_eq!(s.cell_count(), 5);
        assert!(SearchSpace::new(4, 2..5).is_err());
        assert!(SearchSpace::new(4, 2..2).is_err());
    }

    #[test]
    fn table_matches_direct_fits() {
        let u = bernoulli_input(120, 1).unwrap();
        let y = Signal::new(standard_normal(120, 2)).unwrap();
        let space = SearchSpace::new(10, 2..6).unwrap();
        let table = OutputErrorTable::compute(&u, &y, &space).unwrap();
        for (d, m, x) in table.iter() {
            let c = fit_candidate(&u, &y, d, m).unwrap();
            assert!((x - c.x_dm).abs() < 1e-12 * (1.0 + c.x_dm));
        }
    }

    #[test]
    fn noiseless_selection_covers_true_support() {
        let u = bernoulli_input(400, 3).unwrap();
        let theta = ImpulseResponse::new(3, vec![0.8, -0.5, 0.3, 0.2], 12).unwrap();
        // an exact fit (x = 0) is alpha-infeasible for every positive variance,
        // so the noise-free limit is approached with negligible noise
        let y = add_noise(&simulate_output(&theta, &u), &NoiseModel::new(1e-10, 4).unwrap());
        let space = SearchSpace::full(12).unwrap();
        let grid = NoiseGrid::geometric(1e-12, 1e-8, 5).unwrap();
        let sel = select_model(&u, &y, &space, &grid, &ValidationParams::default()).unwrap();
        assert!(sel.d <= 3 && sel.m >= 7, "({}, {})", sel.d, sel.m);
        assert!(sel.candidate.x_dm < 1e-8);
    }

    #[test]
    fn selection_is_grid_argmin() {
        let u = bernoulli_input(300, 4).unwrap();
        let theta = ImpulseResponse::new(2, vec![1.0, 0.6, 0.3], 10).unwrap();
        let ybar = simulate_output(&theta, &u);
        let y = add_noise(&ybar, &NoiseModel::new(0.05, 5).unwrap());
        let space = SearchSpace::full(10).unwrap();
        let params = ValidationParams::default();
        let sel = select_model(&u, &y, &space, &NoiseGrid::known(0.05).unwrap(), &params).unwrap();
        assert!(sel.noise_var.is_none());
        assert_eq!(sel.grid.len(), space.cell_count());
        let min = sel.grid.iter().map(|c| c.bounds.re_hi).fold(f64::INFINITY, f64::min);
        assert_eq!(sel.re_hi, min);
        assert!(sel.grid.iter().all(|c| c.bounds.z_lo <= c.bounds.z_hi));
        assert_eq!((sel.d, sel.m), (2, 5));
    }

    #[test]
    fn argmin_unchanged_by_textbook_trace_term() {
        let u = bernoulli_input(300, 6).unwrap();
        let theta = ImpulseResponse::new(1, vec![0.5, -0.4, 0.2, 0.1], 12).unwrap();
        let y = add_noise(&simulate_output(&theta, &u), &NoiseModel::new(0.02, 7).unwrap());
        let space = SearchSpace::full(12).unwrap();
        let params = ValidationParams::default();
        let sel = select_model(&u, &y, &space, &NoiseGrid::known(0.02).unwrap(), &params).unwrap();
        let n = 300.0;
        let textbook = sel
            .grid
            .iter()
            .min_by(|a, b| {
                let ka = n * a.bounds.z_hi / (2.0 * 0.02);
                let kb = n * b.bounds.z_hi / (2.0 * 0.02);
                ka.total_cmp(&kb).then((a.m, a.d).cmp(&(b.m, b.d)))
            })
            .unwrap();
        assert_eq!((textbook.d, textbook.m), (sel.d, sel.m));
        assert!((re_upper(textbook.bounds.z_hi, 0.02, 300) - textbook.bounds.re_hi).abs() < 1e-9);
    }

    #[test]
    fn infeasible_grid_reports_every_variance() {
        let u = bernoulli_input(200, 8).unwrap();
        let y = add_noise(&Signal::zeros(200).unwrap(), &NoiseModel::new(0.01, 9).unwrap());
        let space = SearchSpace::full(5).unwrap();
        // variances far above the real noise level are all alpha-infeasible
        let grid = NoiseGrid::from_values(vec![10.0, 100.0]).unwrap();
        match select_model(&u, &y, &space, &grid, &ValidationParams::default()) {
            Err(Error::NoFeasibleModel(outcomes)) => {
                assert_eq!(outcomes.len(), 2);
                assert!(outcomes.iter().all(|o| matches!(
                    o.status,
                    SigmaStatus::Rejected { reason: Rejection::AlphaInfeasible, .. }
                )));
            }
            other => panic!("expected NoFeasibleModel, got {other:?}"),
        }
    }

    #[test]
    fn tie_break_prefers_small_m_then_d_then_sigma() {
        assert!(better((1.0, 3, 5, 9), (1.0, 4, 0, 0)));
        assert!(better((1.0, 3, 1, 9), (1.0, 3, 2, 0)));
        assert!(better((1.0, 3, 1, 0), (1.0, 3, 1, 1)));
        assert!(!better((1.0, 3, 1, 1), (1.0, 3, 1, 1)));
        assert!(better((0.5, 9, 9, 9), (1.0, 1, 0, 0)));
    }
}
