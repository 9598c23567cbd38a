//! AIC and BIC order selection with the delay fixed at zero.
//!
//! `C(m) = N ln x_{0,m} + p m` with `p = 2` (AIC) or `p = ln N` (BIC);
//! `x_{0,m} = 0` counts as `-inf`.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::ToeplitzGram;
use crate::signals::Signal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    Aic,
    Bic,
    /// Arbitrary penalty per coefficient; `0` selects on the residual alone.
    Penalized(f64),
}

impl Criterion {
    pub fn penalty(&self, n: usize) -> f64 {
        match *self {
            Criterion::Aic => 2.0,
            Criterion::Bic => (n as f64).ln(),
            Criterion::Penalized(p) => p,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Aic => f.write_str("aic"),
            Criterion::Bic => f.write_str("bic"),
            Criterion::Penalized(p) => write!(f, "penalized({p})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderSelection {
    pub criterion: Criterion,
    pub m: usize,
    /// Criterion value for `m = 1..=M` (element `m - 1`).
    pub values: Vec<f64>,
}

/// Minimize the criterion over output errors `x[m - 1] = x_{0,m}`; ties go to
/// the smallest `m`.
pub fn order_from_residuals(x: &[f64], n: usize, criterion: Criterion) -> Result<OrderSelection> {
    if x.is_empty() {
        return Err(Error::invalid("residual curve is empty"));
    }
    if let Some(bad) = x.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::invalid(format!("output error must be nonnegative, got {bad}")));
    }
    let p = criterion.penalty(n);
    let values: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &xm)| {
            if xm == 0.0 {
                f64::NEG_INFINITY
            } else {
                n as f64 * xm.ln() + p * (i + 1) as f64
            }
        })
        .collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    Ok(OrderSelection {
        criterion,
        m: best + 1,
        values,
    })
}

/// `x_{0,m}` for `m = 1..=max_len`.
pub fn zero_delay_errors(u: &Signal, y: &Signal, max_len: usize) -> Result<Vec<f64>> {
    let gram = ToeplitzGram::new(u, y, max_len)?;
    let n = u.len() as f64;
    Ok(gram.nested_residuals(0)?.into_iter().map(|r| r / n).collect())
}

pub fn select_order(u: &Signal, y: &Signal, max_len: usize, criterion: Criterion) -> Result<OrderSelection> {
    order_from_residuals(&zero_delay_errors(u, y, max_len)?, u.len(), criterion)
}

pub fn aic_order(u: &Signal, y: &Signal, max_len: usize) -> Result<OrderSelection> {
    select_order(u, y, max_len, Criterion::Aic)
}

pub fn bic_order(u: &Signal, y: &Signal, max_len: usize) -> Result<OrderSelection> {
    select_order(u, y, max_len, Criterion::Bic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{add_noise, bernoulli_input, simulate_output, ImpulseResponse, NoiseModel};
    use proptest::prelude::*;

    #[test]
    fn noiseless_fir_recovers_length() {
        let u = bernoulli_input(300, 1).unwrap();
        let theta = ImpulseResponse::new(0, vec![0.9, -0.4, 0.3, 0.25, -0.1], 12).unwrap();
        let y = simulate_output(&theta, &u);
        assert_eq!(aic_order(&u, &y, 12).unwrap().m, 5);
        assert_eq!(bic_order(&u, &y, 12).unwrap().m, 5);
    }

    #[test]
    fn exponential_curve_matches_enumeration() {
        let n = 50;
        let x: Vec<f64> = (1..=30).map(|m| (-(m as f64) / n as f64).exp()).collect();
        for crit in [Criterion::Aic, Criterion::Bic, Criterion::Penalized(0.5)] {
            let sel = order_from_residuals(&x, n, crit).unwrap();
            // value(m) = -m + p m, so any p > 1 picks m = 1 and p < 1 picks M
            let expect = if crit.penalty(n) > 1.0 { 1 } else { 30 };
            assert_eq!(sel.m, expect, "{crit}");
            let oracle = (1..=30)
                .min_by(|a, b| {
                    let f = |m: usize| n as f64 * x[m - 1].ln() + crit.penalty(n) * m as f64;
                    f(*a).total_cmp(&f(*b))
                })
                .unwrap();
            assert_eq!(sel.m, oracle);
        }
    }

    #[test]
    fn exact_fit_wins_with_smallest_order() {
        let sel = order_from_residuals(&[1.0, 0.5, 0.0, 0.0], 10, Criterion::Bic).unwrap();
        assert_eq!(sel.m, 3);
        assert!(sel.values[2].is_infinite());
    }

    #[test]
    fn zero_penalty_selects_smallest_residual() {
        let x = [0.9, 0.4, 0.3, 0.3, 0.35];
        assert_eq!(order_from_residuals(&x, 100, Criterion::Penalized(0.0)).unwrap().m, 3);
    }

    #[test]
    fn rejects_negative_or_empty() {
        assert!(order_from_residuals(&[], 10, Criterion::Aic).is_err());
        assert!(order_from_residuals(&[0.1, -0.2], 10, Criterion::Aic).is_err());
    }

    #[test]
    fn noisy_bic_never_exceeds_aic() {
        let u = bernoulli_input(1000, 2).unwrap();
        let theta = ImpulseResponse::new(0, (0..20).map(|i| 0.8f64.powi(i)).collect(), 40).unwrap();
        let y = add_noise(&simulate_output(&theta, &u), &NoiseModel::new(0.3, 3).unwrap());
        assert!(bic_order(&u, &y, 40).unwrap().m <= aic_order(&u, &y, 40).unwrap().m);
    }

    proptest! {
        #[test]
        fn bic_order_at_most_aic_order(
            steps in prop::collection::vec(0.0f64..0.2, 1..40),
            start in 0.5f64..5.0,
            n in 10usize..5000,
        ) {
            // nonincreasing positive residual curve, as nested fits produce
            let mut x = Vec::with_capacity(steps.len());
            let mut cur = start;
            for s in steps {
                x.push(cur);
                cur *= 1.0 - s;
            }
            let aic = order_from_residuals(&x, n, Criterion::Aic).unwrap();
            let bic = order_from_residuals(&x, n, Criterion::Bic).unwrap();
            if (n as f64).ln() > 2.0 {
                prop_assert!(bic.m <= aic.m);
            }
            prop_assert!(aic.values.iter().all(|v| *v >= aic.values[aic.m - 1]));
        }
    }
}
