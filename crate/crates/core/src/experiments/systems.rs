//! Benchmark systems.
//!
//! System I is a lowpass FIR filter (windowed sinc, cutoff 20 kHz at a
//! 96 kHz sample rate) behind a pure delay. System II is the IIR response
//! `0.2545 (0.9094)^n - 0.3316 (0.8146)^n` delayed by 11 samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::ImpulseResponse;

pub const SYSTEM_I_DELAY: usize = 7;
pub const SYSTEM_I_TAPS: usize = 62;
pub const SYSTEM_I_CUTOFF: f64 = 20.0 / 96.0;
pub const SYSTEM_II_DELAY: usize = 11;

/// Windowed-sinc lowpass design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirDesign {
    /// Active taps.
    pub taps: usize,
    /// Cutoff as a fraction of the sample rate, in `(0, 0.5)`.
    pub cutoff: f64,
    /// Kaiser window shape; `0` is rectangular.
    pub kaiser_beta: f64,
    pub delay: usize,
}

impl Default for FirDesign {
    fn default() -> Self {
        FirDesign {
            taps: SYSTEM_I_TAPS,
            cutoff: SYSTEM_I_CUTOFF,
            kaiser_beta: 0.0,
            delay: SYSTEM_I_DELAY,
        }
    }
}

impl FirDesign {
    /// Taps normalized to unit DC gain.
    pub fn coefficients(&self) -> Result<Vec<f64>> {
        if self.taps == 0 || !(self.cutoff > 0.0 && self.cutoff < 0.5) || !(self.kaiser_beta >= 0.0) {
            return Err(Error::invalid(format!("bad FIR design {self:?}")));
        }
        let centre = (self.taps as f64 - 1.0) / 2.0;
        let mut h: Vec<f64> = (0..self.taps)
            .map(|n| {
                let t = n as f64 - centre;
                2.0 * self.cutoff * sinc(2.0 * self.cutoff * t) * kaiser(n, self.taps, self.kaiser_beta)
            })
            .collect();
        let gain: f64 = h.iter().sum();
        if gain.abs() < 1e-12 {
            return Err(Error::invalid(format!("FIR design {self:?} has no DC gain")));
        }
        h.iter_mut().for_each(|v| *v /= gain);
        Ok(h)
    }

    /// Total length `delay + taps`.
    pub fn length(&self) -> usize {
        self.delay + self.taps
    }

    pub fn response(&self, ambient: usize) -> Result<ImpulseResponse> {
        ImpulseResponse::new(self.delay, self.coefficients()?, ambient)
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

pub fn kaiser(n: usize, len: usize, beta: f64) -> f64 {
    if len == 1 {
        return 1.0;
    }
    let r = 2.0 * n as f64 / (len - 1) as f64 - 1.0;
    bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / bessel_i0(beta)
}

/// System I in an ambient window of `ambient` taps.
pub fn system_i(design: &FirDesign, ambient: usize) -> Result<ImpulseResponse> {
    design.response(ambient)
}

pub fn system_ii_tap(n: usize) -> f64 {
    0.2545 * 0.9094f64.powi(n as i32) - 0.3316 * 0.8146f64.powi(n as i32)
}

/// System II with `n_max` coefficients after `delay` leading zeros.
pub fn system_ii_delayed(delay: usize, n_max: usize) -> Result<ImpulseResponse> {
    if n_max == 0 {
        return Err(Error::invalid("System II needs at least one coefficient"));
    }
    ImpulseResponse::new(delay, (0..n_max).map(system_ii_tap).collect(), delay + n_max)
}

pub fn system_ii(n_max: usize) -> Result<ImpulseResponse> {
    system_ii_delayed(SYSTEM_II_DELAY, n_max)
}
