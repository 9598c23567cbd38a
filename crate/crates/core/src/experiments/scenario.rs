//! Experiment scenarios, read from flat TOML files.
//!
//! ```toml
//! system = "fir"
//! samples = 1000
//! snr_db = [12.0, 18.0, 24.0]
//! trials = 100
//! max_len = 100
//! sigma_mode = "known"
//! seed = 7
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{NoiseGrid, SearchSpace, ValidationParams};
use crate::experiments::systems::{self, FirDesign};
use crate::online::{OnlineNoise, StoppingRule};
use crate::signals::{ImpulseResponse, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Fir,
    Iir,
}

/// Noise-variance handling of the batch estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMode {
    /// The true variance of each trial.
    Known,
    /// Grid in SNR-equivalent steps relative to the observed output power.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnlineNoiseMode {
    Known,
    Fixed,
    Regrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Re,
    Aic,
    Bic,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Re, Method::Aic, Method::Bic];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Re => "re",
            Method::Aic => "aic",
            Method::Bic => "bic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "re" => Ok(Method::Re),
            "aic" => Ok(Method::Aic),
            "bic" => Ok(Method::Bic),
            other => Err(Error::invalid(format!("unknown method {other:?} (expected re, aic or bic)"))),
        }
    }
}

fn default_snr_db() -> Vec<f64> {
    (0..=12).map(|i| 2.0 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub system: SystemKind,
    pub fir_taps: usize,
    pub fir_delay: usize,
    /// Cutoff over sample rate.
    pub fir_cutoff: f64,
    pub kaiser_beta: f64,
    pub iir_delay: usize,
    /// Taps of System II used to synthesize the output.
    pub iir_sim_len: usize,
    pub samples: usize,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    /// Largest candidate length `M`.
    pub max_len: usize,
    pub delay_min: usize,
    /// Exclusive; defaults to `max_len`.
    pub delay_max: Option<usize>,
    /// Window for RMSE comparisons.
    pub ambient: usize,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_mode: SigmaMode,
    pub sigma_grid_min_db: f64,
    pub sigma_grid_max_db: f64,
    pub sigma_grid_step_db: f64,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub online_max_len: usize,
    pub online_delay_max: usize,
    /// Defaults to `online_max_len + 10`.
    pub warm_start: Option<usize>,
    pub epsilon: f64,
    pub online_noise: OnlineNoiseMode,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            system: SystemKind::Fir,
            fir_taps: systems::SYSTEM_I_TAPS,
            fir_delay: systems::SYSTEM_I_DELAY,
            fir_cutoff: systems::SYSTEM_I_CUTOFF,
            kaiser_beta: 0.0,
            iir_delay: systems::SYSTEM_II_DELAY,
            iir_sim_len: 400,
            samples: 1000,
            snr_db: default_snr_db(),
            trials: 100,
            max_len: 100,
            delay_min: 0,
            delay_max: None,
            ambient: 100,
            alpha: 4.0,
            beta: 4.0,
            sigma_mode: SigmaMode::Known,
            sigma_grid_min_db: 0.0,
            sigma_grid_max_db: 40.0,
            sigma_grid_step_db: 1.0,
            seed: 1,
            methods: Method::ALL.to_vec(),
            online_max_len: 80,
            online_delay_max: 20,
            warm_start: None,
            epsilon: 0.1,
            online_noise: OnlineNoiseMode::Fixed,
        }
    }
}

impl Scenario {
    pub fn fir() -> Self {
        Scenario::default()
    }

    pub fn iir() -> Self {
        Scenario {
            system: SystemKind::Iir,
            ..Scenario::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml_str(&text)
            .map_err(|e| match e {
                Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
                other => other,
            })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|v| !v.is_finite()) {
            return bad(format!("SNR list must be nonempty and finite, got {:?}", self.snr_db));
        }
        if self.methods.is_empty() {
            return bad("method list is empty".into());
        }
        if self.max_len == 0 || self.max_len >= self.samples {
            return bad(format!(
                "max_len {} must lie in 1..{} (the sample count)",
                self.max_len, self.samples
            ));
        }
        if self.ambient < self.max_len {
            return bad(format!("ambient {} is shorter than max_len {}", self.ambient, self.max_len));
        }
        let delays = self.delays();
        if delays.is_empty() || delays.end > self.max_len {
            return bad(format!("delay range {delays:?} must be a nonempty part of 0..{}", self.max_len));
        }
        if self.system == SystemKind::Iir && (self.iir_sim_len == 0 || self.iir_delay >= self.ambient) {
            return bad(format!(
                "IIR delay {} must be below the ambient length {} with a positive simulation length",
                self.iir_delay, self.ambient
            ));
        }
        if self.system == SystemKind::Fir && self.fir_delay + self.fir_taps > self.ambient {
            return bad(format!(
                "FIR length {} exceeds the ambient length {}",
                self.fir_delay + self.fir_taps,
                self.ambient
            ));
        }
        if !(self.sigma_grid_step_db > 0.0 && self.sigma_grid_min_db <= self.sigma_grid_max_db) {
            return bad("sigma grid needs min <= max and a positive step".into());
        }
        if self.online_max_len == 0 || self.online_delay_max == 0 || self.online_delay_max > self.online_max_len {
            return bad(format!(
                "online delay cap {} must lie in 1..={}",
                self.online_delay_max, self.online_max_len
            ));
        }
        if self.warm_start() < self.online_max_len {
            return bad(format!(
                "warm start {} is shorter than the online maximum length {}",
                self.warm_start(),
                self.online_max_len
            ));
        }
        ValidationParams::new(self.alpha, self.beta)?;
        StoppingRule::new(self.epsilon)?;
        self.fir_design().coefficients()?;
        Ok(())
    }

    pub fn delays(&self) -> std::ops::Range<usize> {
        self.delay_min..self.delay_max.unwrap_or(self.max_len)
    }

    pub fn search_space(&self) -> Result<SearchSpace> {
        SearchSpace::new(self.max_len, self.delays())
    }

    pub fn online_space(&self) -> Result<SearchSpace> {
        SearchSpace::new(self.online_max_len, 0..self.online_delay_max)
    }

    pub fn params(&self) -> Result<ValidationParams> {
        ValidationParams::new(self.alpha, self.beta)
    }

    pub fn warm_start(&self) -> usize {
        self.warm_start.unwrap_or(self.online_max_len + 10)
    }

    pub fn fir_design(&self) -> FirDesign {
        FirDesign {
            taps: self.fir_taps,
            cutoff: self.fir_cutoff,
            kaiser_beta: self.kaiser_beta,
            delay: self.fir_delay,
        }
    }

    pub fn true_delay(&self) -> usize {
        match self.system {
            SystemKind::Fir => self.fir_delay,
            SystemKind::Iir => self.iir_delay,
        }
    }

    /// `(d, m)` of the true support inside the ambient window.
    pub fn true_support(&self) -> (usize, usize) {
        match self.system {
            SystemKind::Fir => (self.fir_delay, self.fir_delay + self.fir_taps),
            SystemKind::Iir => (self.iir_delay, self.ambient),
        }
    }

    /// Response used to synthesize data and the same response restricted
    /// to the ambient window, optionally at another delay.
    pub fn truth(&self, delay: Option<usize>) -> Result<SystemTruth> {
        let delay = delay.unwrap_or(self.true_delay());
        match self.system {
            SystemKind::Fir => {
                let design = FirDesign { delay, ..self.fir_design() };
                let sim = design.response(design.length())?;
                let ambient = self.ambient.max(design.length());
                Ok(SystemTruth {
                    reference: sim.truncated(ambient)?,
                    simulation: sim,
                })
            }
            SystemKind::Iir => {
                let sim = systems::system_ii_delayed(delay, self.iir_sim_len)?;
                Ok(SystemTruth {
                    reference: sim.truncated(self.ambient.max(delay + 1))?,
                    simulation: sim,
                })
            }
        }
    }

    /// Batch noise grid for a record with observed output `y`.
    pub fn noise_grid(&self, y: &Signal, true_var: f64) -> Result<NoiseGrid> {
        match self.sigma_mode {
            SigmaMode::Known => NoiseGrid::known(true_var),
            SigmaMode::Grid => NoiseGrid::snr_relative(
                y.power(),
                self.sigma_grid_min_db,
                self.sigma_grid_max_db,
                self.sigma_grid_step_db,
            ),
        }
    }

    pub fn online_noise(&self, y_warm: &Signal, true_var: f64) -> Result<OnlineNoise> {
        let grid = || {
            NoiseGrid::snr_relative(
                y_warm.power(),
                self.sigma_grid_min_db,
                self.sigma_grid_max_db,
                self.sigma_grid_step_db,
            )
        };
        Ok(match self.online_noise {
            OnlineNoiseMode::Known => OnlineNoise::Known(true_var),
            OnlineNoiseMode::Fixed => OnlineNoise::FixedAfterWarmStart(grid()?),
            OnlineNoiseMode::Regrid => OnlineNoise::Regrid(grid()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemTruth {
    /// Full response used for simulation.
    pub simulation: ImpulseResponse,
    /// Response on the comparison window.
    pub reference: ImpulseResponse,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let s = Scenario::iir();
        let back = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let s = Scenario::from_toml_str("system = \"iir\"\nsnr_db = [10.0]\ntrials = 3\n").unwrap();
        assert_eq!(s.system, SystemKind::Iir);
        assert_eq!(s.trials, 3);
        assert_eq!(s.samples, 1000);
        assert_eq!(s.true_support(), (11, 100));
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        assert!(matches!(Scenario::from_toml_str("snr = 3"), Err(Error::Parse(_))));
        assert!(Scenario::from_toml_str("trials = 0").is_err());
        assert!(Scenario::from_toml_str("max_len = 2000").is_err());
        assert!(Scenario::from_toml_str("methods = []").is_err());
        assert!(Scenario::from_toml_str("epsilon = 0.0").is_err());
    }

    #[test]
    fn truths() {
        let fir = Scenario::fir().truth(None).unwrap();
        assert_eq!((fir.reference.delay(), fir.reference.length()), (7, 69));
        assert_eq!(fir.reference.ambient(), 100);
        let iir = Scenario::iir().truth(Some(4)).unwrap();
        assert_eq!(iir.simulation.length(), 404);
        assert_eq!(iir.reference.length(), 100);
    }

    #[test]
    fn methods_parse() {
        assert_eq!("AIC".parse::<Method>().unwrap(), Method::Aic);
        assert!("mdl".parse::<Method>().is_err());
    }
}
