//! Scenario files.
//!
//! A scenario is a TOML document. Every section is optional and falls back to
//! the finite-size reference scenario (10 dB, 0.9% background, case-1
//! source). Unknown keys are rejected.
//!
//! ```toml
//! seed = 0
//! f_ec = 1.16
//!
//! [encoding]
//! alice_misalignment_deg = 0.0   # test-basis rotation from the unbiased basis
//! bob_misalignment_deg = 0.0
//!
//! [channel]
//! dark_count = 3e-6
//! det_efficiency = 0.2
//! total_loss_db = 10.0
//! fiber_loss_db_per_km = 0.2
//! background_error = 0.009
//!
//! [source]                       # both users unless [source_bob] is given
//! mu = 0.349
//! nu = 0.239
//! omega = 0.0515
//! p_mu = 0.463
//! p_nu = 0.1
//! p_omega = 0.357
//! p_code_given_nu = 0.412
//! p_code_given_omega = 0.391
//!
//! [finite]
//! total_pairs = 500000000000    # 0 for the asymptotic limit
//! epsilon_total = 5.73e-7
//!
//! [figure1]
//! c0_sq_min = 0.2
//! c0_sq_max = 0.8
//! points = 25
//!
//! [figure2]
//! max_km = 150.0
//! step_km = 5.0
//! misalignment_deg = 30.0
//!
//! [optimizer]
//! restarts = 12
//! max_evaluations = 400
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use mdiqkd_core::channel::ChannelParams;
use mdiqkd_core::decoy::{IntensitySet, ProtocolParams};
use mdiqkd_core::finitekey::DEFAULT_F_EC;
use mdiqkd_core::qstate::{encoding_from_misalignment, EncodingPair};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub f_ec: f64,
    pub encoding: EncodingConfig,
    pub channel: ChannelConfig,
    pub source: SourceConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_bob: Option<SourceConfig>,
    pub finite: FiniteConfig,
    pub figure1: Figure1Config,
    pub figure2: Figure2Config,
    pub optimizer: OptimizerConfig,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            f_ec: DEFAULT_F_EC,
            encoding: EncodingConfig::default(),
            channel: ChannelConfig::default(),
            source: SourceConfig::default(),
            source_bob: None,
            finite: FiniteConfig::default(),
            figure1: Figure1Config::default(),
            figure2: Figure2Config::default(),
            optimizer: OptimizerConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Test-basis rotations in degrees; zero is the unbiased basis.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    pub alice_misalignment_deg: f64,
    pub bob_misalignment_deg: f64,
}

impl EncodingConfig {
    pub fn encoding(&self) -> Result<EncodingPair> {
        Ok(encoding_from_misalignment(
            splitting_angle(self.alice_misalignment_deg),
            splitting_angle(self.bob_misalignment_deg),
        )?)
    }
}

/// Splitting angle in radians for a rotation of `deg` from the unbiased basis.
pub fn splitting_angle(deg: f64) -> f64 {
    (45.0 + deg).to_radians()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub dark_count: f64,
    pub det_efficiency: f64,
    pub total_loss_db: f64,
    pub fiber_loss_db_per_km: f64,
    pub background_error: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            total_loss_db: 10.0,
            background_error: 0.009,
            ..ChannelConfig::from(ChannelParams::default())
        }
    }
}

impl From<ChannelParams> for ChannelConfig {
    fn from(c: ChannelParams) -> Self {
        Self {
            dark_count: c.dark_count,
            det_efficiency: c.det_efficiency,
            total_loss_db: c.total_loss_db,
            fiber_loss_db_per_km: c.fiber_loss_db_per_km,
            background_error: c.background_error,
        }
    }
}

impl ChannelConfig {
    pub fn params(&self) -> Result<ChannelParams> {
        let c = ChannelParams {
            dark_count: self.dark_count,
            det_efficiency: self.det_efficiency,
            total_loss_db: self.total_loss_db,
            fiber_loss_db_per_km: self.fiber_loss_db_per_km,
            background_error: self.background_error,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub mu: f64,
    pub nu: f64,
    pub omega: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub p_omega: f64,
    pub p_code_given_nu: f64,
    pub p_code_given_omega: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            mu: 0.349,
            nu: 0.239,
            omega: 0.0515,
            p_mu: 0.463,
            p_nu: 0.1,
            p_omega: 0.357,
            p_code_given_nu: 0.412,
            p_code_given_omega: 0.391,
        }
    }
}

impl From<IntensitySet> for SourceConfig {
    fn from(s: IntensitySet) -> Self {
        Self {
            mu: s.mu,
            nu: s.nu,
            omega: s.omega,
            p_mu: s.p_mu,
            p_nu: s.p_nu,
            p_omega: s.p_omega,
            p_code_given_nu: s.p_code_given_nu,
            p_code_given_omega: s.p_code_given_omega,
        }
    }
}

impl SourceConfig {
    pub fn intensities(&self) -> Result<IntensitySet> {
        let s = IntensitySet {
            mu: self.mu,
            nu: self.nu,
            omega: self.omega,
            p_mu: self.p_mu,
            p_nu: self.p_nu,
            p_omega: self.p_omega,
            p_code_given_nu: self.p_code_given_nu,
            p_code_given_omega: self.p_code_given_omega,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteConfig {
    /// Pulse pairs sent; 0 means the asymptotic limit.
    pub total_pairs: u64,
    pub epsilon_total: f64,
}

impl Default for FiniteConfig {
    fn default() -> Self {
        Self {
            total_pairs: 500_000_000_000,
            epsilon_total: 5.73e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figure1Config {
    pub c0_sq_min: f64,
    pub c0_sq_max: f64,
    pub points: usize,
}

impl Default for Figure1Config {
    fn default() -> Self {
        Self {
            c0_sq_min: 0.2,
            c0_sq_max: 0.8,
            points: 25,
        }
    }
}

impl Figure1Config {
    pub fn grid(&self) -> Result<Vec<f64>> {
        let ok = self.points >= 1
            && 0.0 < self.c0_sq_min
            && self.c0_sq_min <= self.c0_sq_max
            && self.c0_sq_max < 1.0;
        if !ok {
            return Err(AppError::Config(format!(
                "figure1 grid needs 0 < c0_sq_min <= c0_sq_max < 1 and points >= 1, got {self:?}"
            )));
        }
        if self.points == 1 {
            return Ok(vec![self.c0_sq_min]);
        }
        let step = (self.c0_sq_max - self.c0_sq_min) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.c0_sq_min + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figure2Config {
    pub max_km: f64,
    pub step_km: f64,
    /// Test-basis rotation of the misaligned scenarios.
    pub misalignment_deg: f64,
}

impl Default for Figure2Config {
    fn default() -> Self {
        Self {
            max_km: 150.0,
            step_km: 5.0,
            misalignment_deg: 30.0,
        }
    }
}

impl Figure2Config {
    pub fn distances(&self) -> Result<Vec<f64>> {
        if !(self.step_km > 0.0 && self.max_km >= 0.0 && self.max_km / self.step_km < 1e6) {
            return Err(AppError::Config(format!(
                "figure2 needs step_km > 0 and max_km >= 0, got {self:?}"
            )));
        }
        let n = (self.max_km / self.step_km + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| i as f64 * self.step_km).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_evaluations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 12,
            max_evaluations: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        toml::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
    }

    pub fn params(&self) -> Result<ProtocolParams> {
        let alice = self.source.intensities()?;
        let bob = match &self.source_bob {
            Some(b) => b.intensities()?,
            None => alice,
        };
        Ok(ProtocolParams { alice, bob })
    }

    /// Pulse pairs, or a configuration error for the asymptotic limit.
    pub fn require_pairs(&self) -> Result<u64> {
        match self.finite.total_pairs {
            0 => Err(AppError::Config("finite.total_pairs must be a positive count".into())),
            n => Ok(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoding.encoding()?;
        self.channel.params()?;
        self.params()?;
        if !(self.f_ec >= 1.0) {
            return Err(AppError::Config(format!("f_ec = {} must be at least 1", self.f_ec)));
        }
        if !(self.finite.epsilon_total > 0.0 && self.finite.epsilon_total < 1.0) {
            return Err(AppError::Config(format!(
                "epsilon_total = {} must lie in (0, 1)",
                self.finite.epsilon_total
            )));
        }
        self.figure1.grid()?;
        self.figure2.distances()?;
        Ok(())
    }
}
