use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::FiberParams;
use crate::turbo::SlidingWindowConfig;

/// Receiver variant applied to the channel of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverMode {
    /// Dispersion compensation, standard DSP, one decoding pass.
    Edc,
    /// Single-channel backpropagation, standard DSP, one decoding pass.
    Dbp,
    /// Backpropagation followed by the turbo equalizer.
    DbpTurbo,
}

impl ReceiverMode {
    pub const ALL: [ReceiverMode; 3] = [ReceiverMode::Edc, ReceiverMode::Dbp, ReceiverMode::DbpTurbo];

    pub fn as_str(&self) -> &'static str {
        match self {
            ReceiverMode::Edc => "edc",
            ReceiverMode::Dbp => "dbp",
            ReceiverMode::DbpTurbo => "dbp_turbo",
        }
    }

    pub fn uses_dbp(&self) -> bool {
        !matches!(self, ReceiverMode::Edc)
    }
}

impl fmt::Display for ReceiverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReceiverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edc" => Ok(ReceiverMode::Edc),
            "dbp" => Ok(ReceiverMode::Dbp),
            "dbp_turbo" => Ok(ReceiverMode::DbpTurbo),
            other => Err(Error::Config(format!(
                "unknown receiver mode {other:?} (expected edc, dbp or dbp_turbo)"
            ))),
        }
    }
}

/// Standard receiver DSP ahead of the turbo loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspConfig {
    /// `false` replaces NLMS and the PLL by one static pilot least-squares
    /// 2×2 matrix, i.e. an idealized front end.
    pub enabled: bool,
    pub nlms_taps: usize,
    pub nlms_step: f64,
    pub pll_bandwidth: f64,
    pub pll_damping: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            nlms_taps: 13,
            nlms_step: 0.05,
            pll_bandwidth: 1e-3,
            pll_damping: 1.0,
        }
    }
}

/// One campaign: link, transceiver, sweep axes and trial count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub modulation: usize,
    pub n_channels: usize,
    pub baud: f64,
    pub grid_spacing_hz: f64,
    pub pilot_rate: f64,
    pub rolloff: f64,
    /// Transmit and propagation sampling, samples per symbol.
    pub samples_per_symbol: usize,
    /// Sampling of the extracted channel for EDC/DBP, samples per symbol.
    #[serde(default = "default_rx_sps")]
    pub rx_samples_per_symbol: usize,
    /// Parity-check file, relative to the config file.
    pub code_file: PathBuf,
    pub n_blocks: usize,
    pub launch_powers_dbm: Vec<f64>,
    pub spans: Vec<usize>,
    #[serde(default = "default_modes")]
    pub modes: Vec<ReceiverMode>,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// DBP step; defaults to the forward step.
    #[serde(default)]
    pub dbp_step_m: Option<f64>,
    pub fiber: FiberParams,
    #[serde(default)]
    pub turbo: SlidingWindowConfig,
    #[serde(default)]
    pub dsp: DspConfig,
}

fn default_rx_sps() -> usize {
    4
}

fn default_modes() -> Vec<ReceiverMode> {
    ReceiverMode::ALL.to_vec()
}

fn default_trials() -> usize {
    1
}

impl CampaignConfig {
    /// Parses and validates a TOML config; `code_file` is resolved against
    /// the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if cfg.code_file.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.code_file = dir.join(&cfg.code_file);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validation or path resolution.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn dbp_step(&self) -> f64 {
        self.dbp_step_m.unwrap_or(self.fiber.step_m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if ![16, 64, 256, 4].contains(&self.modulation) {
            return bad(format!("modulation {}", self.modulation));
        }
        if self.n_channels == 0 {
            return bad("n_channels must be >= 1".into());
        }
        if !(self.baud > 0.0) || !(self.grid_spacing_hz > 0.0) {
            return bad(format!("baud {} / grid spacing {}", self.baud, self.grid_spacing_hz));
        }
        if self.samples_per_symbol < 2 || self.rx_samples_per_symbol < 2 {
            return bad("samples per symbol must be >= 2".into());
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return bad(format!("rolloff {}", self.rolloff));
        }
        if !(0.0..0.5).contains(&self.pilot_rate) {
            return bad(format!("pilot rate {}", self.pilot_rate));
        }
        if self.launch_powers_dbm.is_empty() || self.spans.is_empty() || self.modes.is_empty() {
            return bad("sweep axes (launch_powers_dbm, spans, modes) must be non-empty".into());
        }
        if self.launch_powers_dbm.iter().any(|p| !p.is_finite()) || self.spans.contains(&0) {
            return bad("launch powers must be finite and span counts >= 1".into());
        }
        if self.n_trials == 0 {
            return bad("n_trials must be >= 1".into());
        }
        if self.n_blocks < crate::metrics::MIN_BLOCKS || self.turbo.training_blocks >= self.n_blocks {
            return bad(format!(
                "{} FEC blocks with {} training blocks",
                self.n_blocks, self.turbo.training_blocks
            ));
        }
        if let Some(s) = self.dbp_step_m {
            if !(s > 0.0) {
                return bad(format!("dbp_step_m {s}"));
            }
        }
        if !self.code_file.is_file() {
            return bad(format!("code file {} not found", self.code_file.display()));
        }
        self.fiber.validate()?;
        self.turbo.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_toml(code: &str) -> String {
        format!(
            r#"
modulation = 16
n_channels = 1
baud = 32e9
grid_spacing_hz = 37.5e9
pilot_rate = 0.05
rolloff = 0.1
samples_per_symbol = 2
rx_samples_per_symbol = 2
code_file = "{code}"
n_blocks = 5
launch_powers_dbm = [0.0]
spans = [1]
modes = ["edc", "dbp_turbo"]

[fiber]
alpha_db_per_km = 0.2
gamma_per_w_km = 0.0
dispersion_ps_nm_km = 17.0
span_km = 20.0
n_spans = 1
nf_db = 4.5
step_m = 5000.0

[turbo]
n_turbo_iters = 1
"#
        )
    }

    #[test]
    fn parses_and_resolves_code_path() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.pcm"), include_str!("../../codes/toy_n20.pcm")).unwrap();
        let p = dir.path().join("x.cfg");
        std::fs::write(&p, sample_toml("c.pcm")).unwrap();
        let cfg = CampaignConfig::load(&p).unwrap();
        assert_eq!(cfg.modes, vec![ReceiverMode::Edc, ReceiverMode::DbpTurbo]);
        assert_eq!(cfg.code_file, dir.path().join("c.pcm"));
        assert_eq!(cfg.turbo.n_turbo_iters, 1);
        assert_eq!(cfg.turbo.lambda, 0.99);
        assert_eq!(cfg.n_trials, 1);
        assert!(cfg.dsp.enabled);
        assert_eq!(cfg.dbp_step(), 5000.0);
        let back = CampaignConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.cfg");
        std::fs::write(&p, sample_toml("missing.pcm")).unwrap();
        assert!(CampaignConfig::load(&p).is_err());
        std::fs::write(dir.path().join("c.pcm"), include_str!("../../codes/toy_n20.pcm")).unwrap();
        let text = sample_toml("c.pcm").replace("launch_powers_dbm = [0.0]", "launch_powers_dbm = []");
        std::fs::write(&p, text).unwrap();
        assert!(CampaignConfig::load(&p).is_err());
        let text = sample_toml("c.pcm").replace("n_blocks = 5", "n_blocks = 5\nbogus = 1");
        std::fs::write(&p, text).unwrap();
        assert!(CampaignConfig::load(&p).is_err());
        assert!("dbp".parse::<ReceiverMode>().is_ok());
        assert!("foo".parse::<ReceiverMode>().is_err());
    }
}
