//! JSON run configuration.
//!
//! Every key is optional and falls back to the reference setup (20 GHz,
//! quarter-wavelength spacing, 6x6 aperture, 3 RF chains, 0 dB SNR, target
//! at 45°/60°, 100 trials). Angles are given in degrees. Unknown keys are
//! rejected.
//!
//! ```json
//! {
//!   "elements": 100,
//!   "rf_chains": 3,
//!   "snr_db": 5.0,
//!   "n_trials": 100,
//!   "sweep": { "axis": "rf_chains", "values": [2, 3, 4, 5, 6, 7, 8] },
//!   "format": "csv"
//! }
//! ```

use std::path::{Path, PathBuf};

use holojcas_core::geometry::SystemConfig;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::SweepAxis;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub frequency_hz: f64,
    /// Element spacing in metres; a quarter wavelength when absent.
    pub spacing_x: Option<f64>,
    pub spacing_y: Option<f64>,
    pub elements: usize,
    pub rf_chains: usize,
    pub total_power: f64,
    /// Sets both noise variances to `total_power / 10^(snr_db/10)`.
    /// Mutually exclusive with the explicit variances.
    pub snr_db: Option<f64>,
    pub noise_var_comm: Option<f64>,
    pub noise_var_radar: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// `[re, im]`.
    pub gamma: [f64; 2],
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub substrate_index: f64,
    pub step_size: f64,
    pub tolerance: f64,
    pub max_outer_iters: usize,
    pub max_pga_iters: usize,
    pub master_seed: u64,
    pub n_trials: usize,
    pub sweep: Option<SweepSection>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        let c = SystemConfig::default();
        Self {
            frequency_hz: c.frequency_hz,
            spacing_x: None,
            spacing_y: None,
            elements: c.elements,
            rf_chains: c.rf_chains,
            total_power: c.total_power,
            snr_db: None,
            noise_var_comm: None,
            noise_var_radar: None,
            alpha: c.alpha,
            beta: c.beta,
            gamma: [c.gamma.re, c.gamma.im],
            theta_deg: c.theta_t.to_degrees(),
            phi_deg: c.phi_t.to_degrees(),
            substrate_index: c.substrate_index,
            step_size: c.step_size,
            tolerance: c.tolerance,
            max_outer_iters: c.max_outer_iters,
            max_pga_iters: c.max_pga_iters,
            master_seed: c.master_seed,
            n_trials: 100,
            sweep: None,
            output: None,
            format: OutputFormat::Csv,
        }
    }
}

impl RunConfigFile {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Physical configuration, validated.
    pub fn system(&self) -> Result<SystemConfig> {
        let explicit_noise = self.noise_var_comm.is_some() || self.noise_var_radar.is_some();
        if self.snr_db.is_some() && explicit_noise {
            return Err(Error::Config(
                "give either snr_db or noise_var_comm/noise_var_radar, not both".into(),
            ));
        }
        let quarter = holojcas_core::geometry::SPEED_OF_LIGHT / self.frequency_hz / 4.0;
        let mut c = SystemConfig {
            frequency_hz: self.frequency_hz,
            spacing_x: self.spacing_x.unwrap_or(quarter),
            spacing_y: self.spacing_y.unwrap_or(quarter),
            elements: self.elements,
            rf_chains: self.rf_chains,
            total_power: self.total_power,
            noise_var_comm: self.noise_var_comm.unwrap_or(1.0),
            noise_var_radar: self.noise_var_radar.unwrap_or(1.0),
            alpha: self.alpha,
            beta: self.beta,
            gamma: Complex64::new(self.gamma[0], self.gamma[1]),
            theta_t: self.theta_deg.to_radians(),
            phi_t: self.phi_deg.to_radians(),
            substrate_index: self.substrate_index,
            step_size: self.step_size,
            tolerance: self.tolerance,
            max_outer_iters: self.max_outer_iters,
            max_pga_iters: self.max_pga_iters,
            master_seed: self.master_seed,
        };
        if !explicit_noise {
            c.set_snr_db(self.snr_db.unwrap_or(0.0));
        }
        c.validate()?;
        Ok(c)
    }

    /// Checks everything a sweep needs, including every axis value.
    pub fn validate_sweep(&self) -> Result<(SystemConfig, &SweepSection)> {
        let system = self.system()?;
        let section = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing \"sweep\" section".into()))?;
        if section.values.is_empty() {
            return Err(Error::Config("sweep values must not be empty".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        for &v in &section.values {
            section.axis.apply(&system, v)?;
        }
        Ok((system, section))
    }
}
