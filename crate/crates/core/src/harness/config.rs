//! Scenario configuration.
//!
//! Config files are TOML, typically written with flat dotted keys:
//!
//! ```toml
//! ofdm.k = 128
//! ofdm.bandwidth_hz = 1e6
//! channel.model = "rayleigh_iid"
//! channel.seed = 7
//! sweep.gamma_psl_db = [-5, -10, -20, -30]
//! ```
//!
//! Every key is optional. `--set key=value` pairs on the command line are
//! applied on top of the file before it is validated.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocators::SolverSettings;
use crate::dynamic::Thresholds;
use crate::error::{Error, Result};
use crate::model::OfdmConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub ofdm: OfdmSection,
    pub channel: ChannelSection,
    pub thresholds: ThresholdSection,
    pub sweep: SweepSection,
    pub solver: SolverSection,
    /// Output location and format; not part of the results' identity, so it
    /// is left out of the manifest.
    #[serde(skip_serializing)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmSection {
    pub k: usize,
    pub bandwidth_hz: f64,
    pub n0: f64,
    pub p_total: f64,
    pub oversample: usize,
    pub tau: f64,
}

impl Default for OfdmSection {
    fn default() -> Self {
        let d = OfdmConfig::reference();
        Self {
            k: d.k,
            bandwidth_hz: d.bandwidth(),
            n0: d.n0,
            p_total: d.p_total,
            oversample: d.oversample,
            tau: d.tau,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    Flat,
    RayleighIid,
    RayleighExpPdp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub model: ChannelModel,
    pub seed: u64,
    /// Mean per-carrier SNR under uniform allocation.
    pub snr_db: f64,
    /// Decay constant of the exponential power-delay profile, in taps.
    pub pdp_decay: f64,
    /// Length of the power-delay profile, in taps.
    pub pdp_taps: usize,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            model: ChannelModel::RayleighIid,
            seed: 1,
            snr_db: 10.0,
            pdp_decay: 4.0,
            pdp_taps: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub gamma_psl_db: f64,
    pub gamma_acc: f64,
    pub gamma_c: f64,
    pub epsilon: f64,
    pub improve_accuracy_when_satisfied: bool,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            gamma_psl_db: -20.0,
            gamma_acc: 1500.0,
            gamma_c: 0.1,
            epsilon: 0.01,
            improve_accuracy_when_satisfied: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// PSL bounds for the constrained-capacity sweep, loose to tight.
    pub gamma_psl_db: Vec<f64>,
    /// Blend weights for the alpha sweep, ascending in [0, 1].
    pub alpha: Vec<f64>,
    /// PSL axis of the capacity surface, ascending.
    pub surface_gamma_psl_db: Vec<f64>,
    /// Main-lobe-width axis of the capacity surface in bins, ascending.
    pub surface_mlw_bins: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            gamma_psl_db: vec![-5.0, -10.0, -15.0, -20.0, -25.0, -30.0, -35.0],
            alpha: (0..=10).map(|i| i as f64 / 10.0).collect(),
            surface_gamma_psl_db: vec![-40.0, -35.0, -30.0, -25.0, -20.0, -15.0, -10.0, -5.0],
            surface_mlw_bins: vec![8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub max_iters: usize,
    /// Absolute initial step in W; defaults to `p_total / k`.
    pub step_init: Option<f64>,
    pub tol: f64,
    pub decay: f64,
    pub guard_cells: f64,
    pub penalty_rounds: usize,
    pub restarts: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::for_config(&OfdmConfig::reference());
        Self {
            max_iters: s.max_iters,
            step_init: None,
            tol: s.tol,
            decay: s.decay,
            guard_cells: s.guard_cells,
            penalty_rounds: s.penalty_rounds,
            restarts: s.restarts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: OutputFormat,
    /// Append distance columns (round-trip, meters) next to bin widths.
    pub distance_column: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            distance_column: false,
        }
    }
}

impl ScenarioConfig {
    /// Parses TOML text, applies `key=value` overrides and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads an optional config file; a missing path means all defaults.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn ofdm_config(&self) -> Result<OfdmConfig> {
        let o = &self.ofdm;
        if !(o.bandwidth_hz > 0.0) {
            return Err(Error::InvalidConfig("ofdm.bandwidth_hz must be positive".into()));
        }
        if o.k == 0 {
            return Err(Error::InvalidConfig("ofdm.k must be at least 2".into()));
        }
        OfdmConfig::new(o.k, o.bandwidth_hz / o.k as f64, o.n0, o.p_total, o.oversample)?.with_tau(o.tau)
    }

    pub fn thresholds(&self) -> Thresholds {
        let t = &self.thresholds;
        Thresholds {
            gamma_psl_db: t.gamma_psl_db,
            gamma_acc: t.gamma_acc,
            gamma_c: t.gamma_c,
            epsilon: t.epsilon,
            improve_accuracy_when_satisfied: t.improve_accuracy_when_satisfied,
        }
    }

    pub fn solver_settings(&self) -> Result<SolverSettings> {
        let cfg = self.ofdm_config()?;
        let s = &self.solver;
        let settings = SolverSettings {
            max_iters: s.max_iters,
            step_init: s.step_init.unwrap_or(cfg.p_total / cfg.k as f64),
            tol: s.tol,
            seed: self.channel.seed,
            decay: s.decay,
            guard_cells: s.guard_cells,
            penalty_rounds: s.penalty_rounds,
            restarts: s.restarts,
        };
        settings.validate()?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm_config()?;
        self.thresholds().validate()?;
        self.solver_settings()?;
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        let c = &self.channel;
        if !c.snr_db.is_finite() {
            return bad("channel.snr_db must be finite");
        }
        if c.model == ChannelModel::RayleighExpPdp && !(c.pdp_decay > 0.0 && c.pdp_taps >= 1) {
            return bad("channel.pdp_decay must be positive and channel.pdp_taps at least 1");
        }
        let s = &self.sweep;
        if s.gamma_psl_db.is_empty() || !s.gamma_psl_db.windows(2).all(|w| w[0] >= w[1]) {
            return bad("sweep.gamma_psl_db must be non-empty and sorted loose to tight (descending)");
        }
        if s.gamma_psl_db.iter().any(|&g| !(g <= 0.0)) {
            return bad("sweep.gamma_psl_db entries must be <= 0 dB");
        }
        if s.alpha.is_empty()
            || !s.alpha.windows(2).all(|w| w[0] <= w[1])
            || s.alpha.iter().any(|a| !(0.0..=1.0).contains(a))
        {
            return bad("sweep.alpha must be non-empty, ascending and within [0, 1]");
        }
        for (name, grid) in [
            ("sweep.surface_gamma_psl_db", &s.surface_gamma_psl_db),
            ("sweep.surface_mlw_bins", &s.surface_mlw_bins),
        ] {
            if grid.is_empty() || !grid.windows(2).all(|w| w[0] <= w[1]) {
                return Err(Error::InvalidConfig(format!("{name} must be non-empty and ascending")));
            }
        }
        if s.surface_gamma_psl_db.iter().any(|&g| !(g <= 0.0)) {
            return bad("sweep.surface_gamma_psl_db entries must be <= 0 dB");
        }
        if s.surface_mlw_bins.iter().any(|&b| !(b > 0.0)) {
            return bad("sweep.surface_mlw_bins entries must be positive");
        }
        Ok(())
    }
}

/// Inserts `dotted.key=value` into `table`. The value is read as a TOML
/// literal where possible and as a bare string otherwise.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{item}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty());
    let Some(last) = last else {
        return Err(Error::InvalidConfig(format!("override `{item}` has an empty key")));
    };
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("override `{item}`: `{part}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
