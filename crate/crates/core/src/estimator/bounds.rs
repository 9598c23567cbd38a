//! Output/reconstruction errors and the probabilistic bounds on the
//! unmodeled energy, the reconstruction error and the relative entropy.
//!
//! All energies are in power units (divided by the record length `N`);
//! `noise_var` is the hypothesized noise variance.

use std::fmt;

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::linalg::{project_pair, ToeplitzSlice};
use crate::signals::{simulate_output, ImpulseResponse, Signal};

/// Validation (`alpha`) and confidence (`beta`) widths in standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationParams {
    alpha: f64,
    beta: f64,
}

impl ValidationParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!(
                "alpha and beta must be positive and finite (got {alpha}, {beta})"
            )));
        }
        Ok(ValidationParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `Q(alpha)`.
    pub fn validation_probability(&self) -> f64 {
        gaussian_coverage(self.alpha)
    }

    /// `Q(beta)`.
    pub fn confidence_probability(&self) -> f64 {
        gaussian_coverage(self.beta)
    }
}

impl Default for ValidationParams {
    fn default() -> Self {
        ValidationParams {
            alpha: 4.0,
            beta: 4.0,
        }
    }
}

/// Probability that a standard Gaussian falls in `[-a, a]`.
pub fn gaussian_coverage(a: f64) -> f64 {
    erf(a / std::f64::consts::SQRT_2)
}

/// Why a `(d, m, noise_var)` cell has no valid bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// The observed output error is too small for any unmodeled energy to
    /// be consistent with it at this validation width.
    AlphaInfeasible,
    /// The square root inside the validation term has a negative argument.
    NegativeRadicand,
    /// The reconstruction-error upper bound is not a positive real.
    NonPositiveUpperBound,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rejection::AlphaInfeasible => "alpha infeasible",
            Rejection::NegativeRadicand => "negative radicand in validation term",
            Rejection::NonPositiveUpperBound => "reconstruction bound not positive",
        })
    }
}

fn mean_sq_diff(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n)
}

/// `x_{d,m} = (1/N) ||y - yhat||^2`.
pub fn output_error(y: &Signal, yhat: &Signal) -> Result<f64> {
    mean_sq_diff(y.samples(), yhat.samples())
}

/// `z_{d,m} = (1/N) ||ybar - yhat||^2`; needs the noise-free output, so it is
/// only available in simulation.
pub fn reconstruction_error_true(ybar: &Signal, yhat: &Signal) -> Result<f64> {
    mean_sq_diff(ybar.samples(), yhat.samples())
}

/// Unmodeled energy `Delta_{d,m} = (1/N) ||G_{d,m} F_{d,m}||^2`, where `F` is
/// the output produced by the true taps outside `d..m` (within the true
/// response's ambient window) and `G` projects onto the complement of the
/// span of `A_{d,m}`.
pub fn delta_true(u: &Signal, theta_true: &ImpulseResponse, d: usize, m: usize) -> Result<f64> {
    let slice = ToeplitzSlice::new(u, d, m)?;
    let ambient = theta_true.ambient().max(m);
    let outside: Vec<f64> = (0..ambient)
        .map(|i| if (d..m).contains(&i) { 0.0 } else { theta_true.tap(i) })
        .collect();
    let Some(first) = outside.iter().position(|c| *c != 0.0) else {
        return Ok(0.0);
    };
    let last = outside.iter().rposition(|c| *c != 0.0).unwrap_or(first);
    let unmodeled = ImpulseResponse::new(first, outside[first..=last].to_vec(), ambient)?;
    let f = simulate_output(&unmodeled, u);
    let gf = project_pair(&slice)?.apply_g(f.samples());
    Ok(gf.iter().map(|v| v * v).sum::<f64>() / u.len() as f64)
}

#[inline]
fn width(d: usize, m: usize) -> f64 {
    debug_assert!(m > d);
    (m - d) as f64
}

/// Whether `alpha` is large enough for some unmodeled energy to be
/// consistent with the observed output error `x_dm`.
pub fn alpha_feasible(x_dm: f64, d: usize, m: usize, n: usize, noise_var: f64, alpha: f64) -> bool {
    let k = width(d, m);
    let n = n as f64;
    // alpha > N / sqrt(2 (N - k)) * ((N - k)/N - x / s), multiplied through by
    // the positive factor sqrt(2 (N - k)) / N.
    ((n - k) / n - x_dm / noise_var) < alpha * (2.0 * (n - k)).max(0.0).sqrt() / n
}

/// Lower/upper bounds `(L, U)` on the unmodeled energy.
pub fn delta_bounds(
    x_dm: f64,
    d: usize,
    m: usize,
    n: usize,
    noise_var: f64,
    alpha: f64,
) -> std::result::Result<(f64, f64), Rejection> {
    if !alpha_feasible(x_dm, d, m, n, noise_var, alpha) {
        return Err(Rejection::AlphaInfeasible);
    }
    let k = width(d, m);
    let nf = n as f64;
    let c = (1.0 - k / nf) * noise_var;
    let radicand = alpha * alpha * noise_var / nf + x_dm - 0.5 * c;
    if !(radicand >= 0.0) {
        return Err(Rejection::NegativeRadicand);
    }
    let kappa = 2.0 * alpha * (noise_var / nf).sqrt() * radicand.sqrt();
    let centre = x_dm - c + 2.0 * alpha * alpha * noise_var / nf;
    Ok((centre - kappa, centre + kappa))
}

/// Bounds `(z_lo, z_hi)` on the reconstruction error from `(L, U)`.
pub fn recon_bounds(
    lower: f64,
    upper: f64,
    d: usize,
    m: usize,
    n: usize,
    noise_var: f64,
    beta: f64,
) -> (f64, f64) {
    let k = width(d, m);
    let nf = n as f64;
    let mean = k / nf * noise_var;
    let spread = beta * (2.0 * k).sqrt() * noise_var / nf;
    ((lower + mean - spread).max(0.0), upper + mean + spread)
}

/// Worst-case relative entropy `(1/2)(1 - N + N z_hi / s)`.
pub fn re_upper(z_hi: f64, noise_var: f64, n: usize) -> f64 {
    let nf = n as f64;
    0.5 * (1.0 - nf + nf * z_hi / noise_var)
}

/// Every bound for one `(d, m, noise_var)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReBoundSet {
    pub lower: f64,
    pub upper: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    pub re_hi: f64,
}

impl ReBoundSet {
    pub fn compute(
        x_dm: f64,
        d: usize,
        m: usize,
        n: usize,
        noise_var: f64,
        params: &ValidationParams,
    ) -> std::result::Result<Self, Rejection> {
        let (lower, upper) = delta_bounds(x_dm, d, m, n, noise_var, params.alpha())?;
        let (z_lo, z_hi) = recon_bounds(lower, upper, d, m, n, noise_var, params.beta());
        if !(z_hi > 0.0 && z_hi.is_finite()) {
            return Err(Rejection::NonPositiveUpperBound);
        }
        Ok(ReBoundSet {
            lower,
            upper,
            z_lo,
            z_hi,
            re_hi: re_upper(z_hi, noise_var, n),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_ls;
    use crate::signals::{bernoulli_input, standard_normal};
    use approx::assert_relative_eq;

    #[test]
    fn output_error_examples() {
        let y = Signal::new(vec![3.0, 4.0]).unwrap();
        let zero = Signal::zeros(2).unwrap();
        assert_eq!(output_error(&y, &y).unwrap(), 0.0);
        assert_eq!(output_error(&y, &zero).unwrap(), 12.5);
        assert!(output_error(&y, &Signal::zeros(3).unwrap()).is_err());

        let a = Signal::new(standard_normal(50, 1)).unwrap();
        let b = Signal::new(standard_normal(50, 2)).unwrap();
        let mut acc = 0.0;
        for i in 0..50 {
            let e = a.samples()[i] - b.samples()[i];
            acc += e * e;
        }
        assert_relative_eq!(output_error(&a, &b).unwrap(), acc / 50.0, epsilon = 1e-14);
    }

    #[test]
    fn reconstruction_error_examples() {
        let ybar = Signal::new(vec![2.0, 3.0, 4.0, 5.0]).unwrap();
        let yhat = Signal::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(reconstruction_error_true(&ybar, &ybar).unwrap(), 0.0);
        assert_eq!(reconstruction_error_true(&ybar, &yhat).unwrap(), 1.0);
    }

    #[test]
    fn feasibility_examples() {
        // right-hand side (100/sqrt(180)) (0.9 - 0.5) = 2.981
        assert!(alpha_feasible(0.5, 0, 10, 100, 1.0, 4.0));
        assert!(!alpha_feasible(0.5, 0, 10, 100, 1.0, 2.0));
        assert!(alpha_feasible(0.5, 0, 10, 100, 1.0, 2.982));
        assert!(!alpha_feasible(0.5, 0, 10, 100, 1.0, 2.980));
        // x / s >= (N - k)/N: always feasible
        assert!(alpha_feasible(0.9, 3, 13, 100, 1.0, 1e-6));
    }

    #[test]
    fn delta_bound_example() {
        let (l, u) = delta_bounds(0.9, 0, 10, 100, 1.0, 4.0).unwrap();
        let kappa = 0.8 * 0.61f64.sqrt();
        assert_relative_eq!(kappa, 0.624_819_974_7, epsilon = 1e-9);
        assert_relative_eq!(u, 0.32 + kappa, epsilon = 1e-12);
        assert_relative_eq!(l, 0.32 - kappa, epsilon = 1e-12);
        assert!((u - 0.94482).abs() < 1e-5 && (l + 0.30482).abs() < 1e-5);
    }

    #[test]
    fn delta_bounds_small_alpha_limit() {
        let (l, u) = delta_bounds(1.2, 0, 10, 100, 1.0, 1e-9).unwrap();
        assert_relative_eq!(l, 1.2 - 0.9, epsilon = 1e-8);
        assert_relative_eq!(u, 1.2 - 0.9, epsilon = 1e-8);
    }

    #[test]
    fn delta_bounds_rejections() {
        assert_eq!(
            delta_bounds(0.5, 0, 10, 100, 1.0, 2.0),
            Err(Rejection::AlphaInfeasible)
        );
        assert_eq!(
            delta_bounds(0.0, 0, 1, 4, 100.0, 1.0),
            Err(Rejection::AlphaInfeasible)
        );
    }

    #[test]
    fn feasible_cells_have_real_kappa() {
        // radicand >= (s/N) (alpha - sqrt((N-k)/2))^2 whenever alpha is feasible
        for &x in &[0.0, 0.3, 0.7, 0.89, 0.9, 1.5] {
            for &alpha in &[0.5, 1.0, 2.0, 4.0, 8.0] {
                for &(d, m) in &[(0, 1), (0, 10), (5, 60)] {
                    if alpha_feasible(x, d, m, 100, 1.0, alpha) {
                        assert!(delta_bounds(x, d, m, 100, 1.0, alpha).is_ok());
                    }
                }
            }
        }
    }

    #[test]
    fn recon_bound_example() {
        let (l, u) = delta_bounds(0.9, 0, 10, 100, 1.0, 4.0).unwrap();
        let (z_lo, z_hi) = recon_bounds(l, u, 0, 10, 100, 1.0, 4.0);
        assert!((z_hi - 1.22371).abs() < 1e-5, "{z_hi}");
        assert_eq!(z_lo, 0.0);
        let (z_lo, _) = recon_bounds(-50.0, 1.0, 0, 10, 100, 1.0, 4.0);
        assert_eq!(z_lo, 0.0);
        let (z_lo, _) = recon_bounds(1.0, 1.5, 0, 10, 100, 1.0, 4.0);
        assert_relative_eq!(z_lo, 1.0 + 0.1 - 0.4 * 20f64.sqrt() / 10.0, epsilon = 1e-12);
    }

    #[test]
    fn re_upper_examples() {
        let n = 100;
        assert_relative_eq!(re_upper(99.0 / 100.0 * 2.0, 2.0, n), 0.0, epsilon = 1e-12);
        assert!((re_upper(1.22371, 1.0, n) - 11.6855).abs() < 1e-3);
        assert!(re_upper(2.0 * 1.22371, 1.0, n) > re_upper(1.22371, 1.0, n));
    }

    #[test]
    fn gaussian_coverage_values() {
        assert_relative_eq!(gaussian_coverage(1.0), 0.682_689_492_137, epsilon = 1e-10);
        assert!((gaussian_coverage(4.0) - 0.999_936_657_516).abs() < 1e-10);
        let p = ValidationParams::default();
        assert_eq!((p.alpha(), p.beta()), (4.0, 4.0));
        assert!(ValidationParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn delta_true_zero_on_full_coverage() {
        let u = bernoulli_input(200, 5).unwrap();
        let theta = ImpulseResponse::new(3, standard_normal(6, 6), 20).unwrap();
        for (d, m) in [(3, 9), (0, 9), (2, 15), (0, 20)] {
            assert!(delta_true(&u, &theta, d, m).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn delta_true_positive_on_truncation() {
        let u = bernoulli_input(200, 7).unwrap();
        let theta = ImpulseResponse::new(2, vec![0.3, -0.2, 1.0], 10).unwrap();
        assert!(delta_true(&u, &theta, 2, 4).unwrap() > 0.5);
    }

    #[test]
    fn delta_true_matches_dense_projector() {
        let n = 60;
        let u = bernoulli_input(n, 8).unwrap();
        let theta = ImpulseResponse::new(1, standard_normal(9, 9), 12).unwrap();
        let (d, m) = (3, 7);
        // dense oracle: G = I - A (A^T A)^{-1} A^T built explicitly
        let a = ToeplitzSlice::new(&u, d, m).unwrap().materialize();
        let k = (a.transpose() * &a).try_inverse().unwrap();
        let g = nalgebra::DMatrix::identity(n, n) - &a * k * a.transpose();
        let full = ToeplitzSlice::new(&u, 0, 12).unwrap().materialize();
        let mut outside = theta.embedded();
        for c in outside.iter_mut().take(m).skip(d) {
            *c = 0.0;
        }
        let f = full * nalgebra::DVector::from_vec(outside);
        let expected = (g * f).norm_squared() / n as f64;
        assert_relative_eq!(delta_true(&u, &theta, d, m).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn bound_set_orders() {
        let u = bernoulli_input(300, 10).unwrap();
        let y = Signal::new(standard_normal(300, 11)).unwrap();
        let params = ValidationParams::default();
        for (d, m) in [(0, 5), (2, 9), (4, 30)] {
            let fit = solve_ls(&ToeplitzSlice::new(&u, d, m).unwrap(), &y).unwrap();
            let x = fit.residual_norm_sq() / 300.0;
            let b = ReBoundSet::compute(x, d, m, 300, 1.0, &params).unwrap();
            assert!(b.lower <= b.upper && b.z_lo <= b.z_hi && b.z_lo >= 0.0);
            assert!(b.re_hi.is_finite());
        }
    }
}
