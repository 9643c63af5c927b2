//! Experiment configuration: a TOML file plus `group.key=value` overrides.

use crate::ofdm::{ClipNoiseModel, CyclicPrefix, NoiseBandwidth, OfdmModel, SubcarrierGain, SymbolEnergy};
use crate::pam::SigmaMode;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable overriding `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "LEDLINK_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("bad override `{0}`: expected group.key=value")]
    Override(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// A numeric axis: explicit values or a geometric progression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Geometric { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::Values(ref v) => v.clone(),
            Grid::Geometric { start, stop, points } => match points {
                0 => vec![],
                1 => vec![start],
                _ if start == stop => vec![start],
                _ => (0..points)
                    .map(|k| start * (stop / start).powf(k as f64 / (points - 1) as f64))
                    .collect(),
            },
        }
    }

    fn check(&self, name: &str) -> Result<(), ConfigError> {
        let v = self.values();
        if v.is_empty() {
            return Err(ConfigError::Invalid(format!("{name} grid is empty")));
        }
        if let Some(x) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(ConfigError::Invalid(format!("{name} grid value {x} must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub f3db_hz: f64,
    /// Peak optical power for single-point runs (fig3, bitload,
    /// design-waveform).
    pub peak_power_mw: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            f3db_hz: 20e6,
            peak_power_mw: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Noise power spectral density in mW/Hz.
    pub n0: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { n0: 3e-9 }
    }
}

/// `"auto"`, `"none"`, or a fixed sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CpSetting {
    Fixed(usize),
    Named(String),
}

impl CpSetting {
    pub fn resolve(&self) -> Result<CyclicPrefix, ConfigError> {
        match self {
            CpSetting::Fixed(n) => Ok(CyclicPrefix::Fixed(*n)),
            CpSetting::Named(s) if s == "auto" => Ok(CyclicPrefix::Auto),
            CpSetting::Named(s) if s == "none" => Ok(CyclicPrefix::None),
            CpSetting::Named(s) => Err(ConfigError::Invalid(format!(
                "ofdm.cyclic_prefix `{s}`: expected \"auto\", \"none\" or a sample count"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    /// Subcarrier counts swept by fig3; fig4 and bitload use the first.
    pub n_subcarriers: Vec<usize>,
    /// Grid over `beta / N`.
    pub modulation_index: Grid,
    pub symbol_time_s: Grid,
    pub cyclic_prefix: CpSetting,
    pub clip_noise: ClipNoiseModel,
    pub noise_bandwidth: NoiseBandwidth,
    pub symbol_energy: SymbolEnergy,
    pub subcarrier_gain: SubcarrierGain,
    pub max_bits: u32,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: vec![64, 128],
            modulation_index: Grid::Geometric {
                start: 0.005,
                stop: 2.0,
                points: 60,
            },
            symbol_time_s: Grid::Geometric {
                start: 0.2e-6,
                stop: 50e-6,
                points: 60,
            },
            cyclic_prefix: CpSetting::Named("auto".into()),
            clip_noise: ClipNoiseModel::default(),
            noise_bandwidth: NoiseBandwidth::default(),
            symbol_energy: SymbolEnergy::default(),
            subcarrier_gain: SubcarrierGain::default(),
            max_bits: 12,
        }
    }
}

impl OfdmConfig {
    pub fn model(&self) -> OfdmModel {
        OfdmModel {
            clip_noise: self.clip_noise,
            noise_bandwidth: self.noise_bandwidth,
            symbol_energy: self.symbol_energy,
            gain: self.subcarrier_gain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PamBlock {
    pub m: Vec<u32>,
    pub chip_rate_hz: Grid,
    pub l_f: usize,
    /// Equalizer length; 0 selects `2 L_h + 1` (at least one symbol).
    pub l_w: usize,
    pub sigma_mode: SigmaMode,
    pub design_seed: u64,
}

impl Default for PamBlock {
    fn default() -> Self {
        Self {
            m: vec![2, 4, 8, 16],
            chip_rate_hz: Grid::Geometric {
                start: 160e6,
                stop: 12.8e9,
                points: 60,
            },
            l_f: 8,
            l_w: 0,
            sigma_mode: SigmaMode::default(),
            design_seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Peak-power axis of fig4 in mW.
    pub peak_power_mw: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            peak_power_mw: vec![2.0, 4.0, 6.0, 8.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub seed: u64,
    /// Target relative standard error of simulated BERs.
    pub confidence: f64,
    /// Whether fig4 simulates each optimized point.
    pub simulate: bool,
    /// Cap on simulated bits per point.
    pub max_bits: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            confidence: 0.1,
            simulate: true,
            max_bits: 5e7,
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
        Self {
            dir: PathBuf::from("results"),
        }
    }
}

/// Defaults describe the reference LED link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelConfig,
    pub noise: NoiseConfig,
    pub ofdm: OfdmConfig,
    pub pam: PamBlock,
    pub sweep: SweepConfig,
    pub montecarlo: MonteCarloConfig,
    pub output: OutputConfig,
    /// Per-subcarrier / per-symbol BER cap.
    pub b_max: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            b_max: 1e-3,
            channel: ChannelConfig::default(),
            noise: NoiseConfig::default(),
            ofdm: OfdmConfig::default(),
            pam: PamBlock::default(),
            sweep: SweepConfig::default(),
            montecarlo: MonteCarloConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {

    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let parse = |e: toml::de::Error| ConfigError::Parse(e.to_string());
        let mut cfg: Self = toml::from_str(text).map_err(parse)?;
        if !overrides.is_empty() {
            let mut table = match toml::Value::try_from(&cfg) {
                Ok(toml::Value::Table(t)) => t,
                _ => unreachable!("config serializes to a table"),
            };
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            cfg = toml::Value::Table(table).try_into().map_err(parse)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.channel.f3db_hz > 0.0) {
            return bad(format!("channel.f3db_hz = {} must be positive", self.channel.f3db_hz));
        }
        if !(self.channel.peak_power_mw > 0.0) {
            return bad(format!("channel.peak_power_mw = {} must be positive", self.channel.peak_power_mw));
        }
        if !(self.noise.n0 >= 0.0) || !self.noise.n0.is_finite() {
            return bad(format!("noise.n0 = {} must be nonnegative", self.noise.n0));
        }
        if !(self.b_max > 0.0 && self.b_max < 0.5) {
            return bad(format!("b_max = {} must lie in (0, 0.5)", self.b_max));
        }
        if self.ofdm.n_subcarriers.is_empty() {
            return bad("ofdm.n_subcarriers is empty".into());
        }
        if let Some(n) = self.ofdm.n_subcarriers.iter().find(|n| **n < 4 || !n.is_power_of_two()) {
            return bad(format!("ofdm.n_subcarriers entry {n} is not a power of two >= 4"));
        }
        self.ofdm.modulation_index.check("ofdm.modulation_index")?;
        self.ofdm.symbol_time_s.check("ofdm.symbol_time_s")?;
        self.ofdm.cyclic_prefix.resolve()?;
        if self.ofdm.max_bits < 2 || self.ofdm.max_bits > 30 {
            return bad(format!("ofdm.max_bits = {} must lie in 2..=30", self.ofdm.max_bits));
        }
        if self.pam.m.is_empty() || self.pam.m.iter().any(|&m| m < 2) {
            return bad("pam.m must list constellation sizes >= 2".into());
        }
        self.pam.chip_rate_hz.check("pam.chip_rate_hz")?;
        if self.pam.l_f == 0 {
            return bad("pam.l_f must be at least 1".into());
        }
        if self.pam.l_w != 0 && self.pam.l_w.is_multiple_of(2) {
            return bad(format!("pam.l_w = {} must be odd (or 0 for the default)", self.pam.l_w));
        }
        if self.sweep.peak_power_mw.is_empty() || self.sweep.peak_power_mw.iter().any(|p| !(*p > 0.0)) {
            return bad("sweep.peak_power_mw must list positive powers".into());
        }
        if !(self.montecarlo.confidence > 0.0 && self.montecarlo.confidence < 1.0) {
            return bad("montecarlo.confidence must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// `output.dir`, unless [`OUTPUT_DIR_ENV`] is set.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output.dir.clone())
    }

    pub fn cyclic_prefix(&self) -> CyclicPrefix {
        self.ofdm.cyclic_prefix.resolve().expect("validated")
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.into()))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::Override(spec.into()));
    }
    let value = parse_value(raw.trim());
    let (last, groups) = keys.split_last().expect("non-empty");
    let mut cur = table;
    for g in groups {
        let entry = cur
            .entry(g.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::Override(spec.into()))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
