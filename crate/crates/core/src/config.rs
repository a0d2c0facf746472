//! Study configuration.
//!
//! A config file is a flat list of `key = value` lines (a TOML subset: strings
//! quoted, numbers bare, lists in brackets, `#` comments). Recognised keys:
//!
//! ```text
//! setting              = "setting1" | "setting2" | "setting3"
//! c_sigma              = real            # required for setting3
//! sigma_pi             = real >= 0       # policy standard deviation
//! T                    = real > 0        # horizon
//! x0                   = real | [real, ...]
//! N_fine               = integer >= 1
//! N_list               = [integer, ...]  # each must divide N_fine
//! runs                 = integer >= 1
//! trajectories_per_run = integer >= 1
//! master_seed          = integer
//! vol_mode             = "auto" | "uncontrolled" | "naive" | "sqrt" | "both"
//! quadrature_order     = integer in 1..=64
//! cost                 = "default" | "state-tracking"
//! discount_rate        = real >= 0
//! output_dir           = "path"
//! trajectory_indices   = [integer, ...]
//! dump_trajectories    = true | false
//! action_clip          = real > 0
//! ```
//!
//! Layers apply in the order defaults, preset, file, command-line flags.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::StudyParams;
use crate::error::{Error, Result};
use crate::model::{CostSpec, FeedbackPolicy, ModelSpec, Setting};
use crate::quadrature::{DEFAULT_ORDER, MAX_ORDER};
use crate::relax::VolMode;

/// Environment variable holding the default output directory.
pub const OUTPUT_DIR_ENV: &str = "RELAXSIM_OUTPUT_DIR";
const FALLBACK_OUTPUT_DIR: &str = "relaxsim-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolModeChoice {
    /// `uncontrolled` for action-independent volatility, otherwise both `naive` and `sqrt`.
    Auto,
    Single(VolMode),
    Both,
}

impl FromStr for VolModeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(VolModeChoice::Auto),
            "both" => Ok(VolModeChoice::Both),
            other => other.parse().map(VolModeChoice::Single).map_err(|_| {
                Error::config(
                    "vol_mode",
                    format!("unknown mode `{other}` (expected auto, uncontrolled, naive, sqrt or both)"),
                )
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostChoice {
    /// `f = (x-1)² + 0.1 a²`, `g = x²`.
    Default,
    /// `f = (x-1)²`, `g = x²`.
    StateTracking,
}

impl FromStr for CostChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(CostChoice::Default),
            "state-tracking" => Ok(CostChoice::StateTracking),
            other => Err(Error::config(
                "cost",
                format!("unknown cost `{other}` (expected default or state-tracking)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalars {
    One(f64),
    Many(Vec<f64>),
}

/// One configuration layer; every key optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub setting: Option<String>,
    pub c_sigma: Option<f64>,
    pub sigma_pi: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub x0: Option<Scalars>,
    #[serde(rename = "N_fine")]
    pub n_fine: Option<usize>,
    #[serde(rename = "N_list")]
    pub n_list: Option<Vec<usize>>,
    pub runs: Option<usize>,
    pub trajectories_per_run: Option<usize>,
    pub master_seed: Option<u64>,
    pub vol_mode: Option<String>,
    pub quadrature_order: Option<usize>,
    pub cost: Option<String>,
    pub discount_rate: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub trajectory_indices: Option<Vec<u64>>,
    pub dump_trajectories: Option<bool>,
    pub action_clip: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl ConfigLayer {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = message
                .split('`')
                .nth(1)
                .filter(|_| message.contains("unknown field"))
                .unwrap_or("document")
                .to_string();
            Error::Config { field, message }
        })
    }

    /// Keys set in `top` replace those of `self`.
    pub fn overlay(&mut self, top: &ConfigLayer) {
        overlay!(self, top; setting, c_sigma, sigma_pi, horizon, x0, n_fine, n_list, runs,
            trajectories_per_run, master_seed, vol_mode, quadrature_order, cost, discount_rate,
            output_dir, trajectory_indices, dump_trajectories, action_clip);
    }
}

/// Named starting points for common runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    PaperSetting1,
    PaperSetting2,
    PaperSetting3,
    /// 10 runs × 2000 trajectories, the scale of the automated checks.
    Ci,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-setting1" => Ok(Preset::PaperSetting1),
            "paper-setting2" => Ok(Preset::PaperSetting2),
            "paper-setting3" => Ok(Preset::PaperSetting3),
            "ci" => Ok(Preset::Ci),
            other => Err(Error::config(
                "preset",
                format!("unknown preset `{other}` (expected paper-setting1|2|3 or ci)"),
            )),
        }
    }
}

impl Preset {
    pub fn layer(self) -> ConfigLayer {
        let paper = |setting: &str| ConfigLayer {
            setting: Some(setting.into()),
            runs: Some(10),
            trajectories_per_run: Some(10_000),
            ..ConfigLayer::default()
        };
        match self {
            Preset::PaperSetting1 => paper("setting1"),
            Preset::PaperSetting2 => paper("setting2"),
            Preset::PaperSetting3 => ConfigLayer {
                c_sigma: Some(0.2),
                ..paper("setting3")
            },
            Preset::Ci => ConfigLayer {
                runs: Some(10),
                trajectories_per_run: Some(2_000),
                ..ConfigLayer::default()
            },
        }
    }
}

/// Fully resolved and validated study configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub setting: Setting,
    pub c_sigma: Option<f64>,
    pub sigma_pi: f64,
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub n_fine: usize,
    pub n_list: Vec<usize>,
    pub runs: usize,
    pub trajectories_per_run: usize,
    pub master_seed: u64,
    pub vol_mode: VolModeChoice,
    pub quadrature_order: usize,
    pub cost: CostChoice,
    pub discount_rate: f64,
    pub output_dir: PathBuf,
    pub trajectory_indices: Vec<u64>,
    pub dump_trajectories: bool,
    pub action_clip: Option<f64>,
}

pub const DEFAULT_SIGMA_PI: f64 = 0.2;
pub const DEFAULT_N_LIST: [usize; 5] = [50, 100, 200, 500, 1000];
pub const DEFAULT_MASTER_SEED: u64 = 20_240_601;

impl Default for StudyConfig {
    fn default() -> Self {
        let output_dir = std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR));
        Self {
            setting: Setting::Setting1,
            c_sigma: None,
            sigma_pi: DEFAULT_SIGMA_PI,
            horizon: 5.0,
            x0: vec![0.0],
            n_fine: 1000,
            n_list: DEFAULT_N_LIST.to_vec(),
            runs: 10,
            trajectories_per_run: 10_000,
            master_seed: DEFAULT_MASTER_SEED,
            vol_mode: VolModeChoice::Auto,
            quadrature_order: DEFAULT_ORDER,
            cost: CostChoice::Default,
            discount_rate: 0.0,
            output_dir,
            trajectory_indices: vec![0, 1, 2, 3],
            dump_trajectories: false,
            action_clip: None,
        }
    }
}

/// Parse one config document on top of the defaults.
pub fn parse_config(text: &str) -> Result<StudyConfig> {
    StudyConfig::from_layers(&[ConfigLayer::parse(text)?])
}

impl StudyConfig {
    /// Apply layers in order over the defaults, then validate.
    pub fn from_layers(layers: &[ConfigLayer]) -> Result<Self> {
        let mut merged = ConfigLayer::default();
        for layer in layers {
            merged.overlay(layer);
        }
        let mut cfg = StudyConfig::default();
        if let Some(s) = &merged.setting {
            cfg.setting = s.parse()?;
        }
        cfg.c_sigma = merged.c_sigma;
        if let Some(v) = merged.sigma_pi {
            cfg.sigma_pi = v;
        }
        if let Some(v) = merged.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = &merged.x0 {
            cfg.x0 = match v {
                Scalars::One(x) => vec![*x],
                Scalars::Many(xs) => xs.clone(),
            };
        }
        if let Some(v) = merged.n_fine {
            cfg.n_fine = v;
        }
        if let Some(v) = &merged.n_list {
            cfg.n_list = v.clone();
        }
        if let Some(v) = merged.runs {
            cfg.runs = v;
        }
        if let Some(v) = merged.trajectories_per_run {
            cfg.trajectories_per_run = v;
        }
        if let Some(v) = merged.master_seed {
            cfg.master_seed = v;
        }
        if let Some(v) = &merged.vol_mode {
            cfg.vol_mode = v.parse()?;
        }
        if let Some(v) = merged.quadrature_order {
            cfg.quadrature_order = v;
        }
        if let Some(v) = &merged.cost {
            cfg.cost = v.parse()?;
        }
        if let Some(v) = merged.discount_rate {
            cfg.discount_rate = v;
        }
        if let Some(v) = &merged.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = &merged.trajectory_indices {
            cfg.trajectory_indices = v.clone();
        }
        if let Some(v) = merged.dump_trajectories {
            cfg.dump_trajectories = v;
        }
        cfg.action_clip = merged.action_clip;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.setting == Setting::Setting3 && self.c_sigma.is_none() {
            return Err(Error::config("c_sigma", "setting3 requires c_sigma"));
        }
        if let Some(c) = self.c_sigma {
            if !c.is_finite() {
                return Err(Error::config("c_sigma", "must be finite"));
            }
        }
        if !(self.sigma_pi.is_finite() && self.sigma_pi >= 0.0) {
            return Err(Error::config(
                "sigma_pi",
                format!("must be finite and >= 0, got {}", self.sigma_pi),
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config("T", format!("must be positive, got {}", self.horizon)));
        }
        if self.x0.len() != 1 || !self.x0[0].is_finite() {
            return Err(Error::config("x0", "built-in settings need one finite initial value"));
        }
        if self.n_fine == 0 {
            return Err(Error::config("N_fine", "must be at least 1"));
        }
        if self.n_list.is_empty() {
            return Err(Error::config("N_list", "must not be empty"));
        }
        if let Some(&bad) = self.n_list.iter().find(|&&n| n == 0 || !self.n_fine.is_multiple_of(n)) {
            return Err(Error::config(
                "N_list",
                format!("{bad} does not divide N_fine = {}", self.n_fine),
            ));
        }
        if self.runs == 0 {
            return Err(Error::config("runs", "must be at least 1"));
        }
        if self.trajectories_per_run == 0 {
            return Err(Error::config("trajectories_per_run", "must be at least 1"));
        }
        if !(1..=MAX_ORDER).contains(&self.quadrature_order) {
            return Err(Error::config(
                "quadrature_order",
                format!("must lie in 1..={MAX_ORDER}, got {}", self.quadrature_order),
            ));
        }
        if !(self.discount_rate.is_finite() && self.discount_rate >= 0.0) {
            return Err(Error::config("discount_rate", "must be finite and >= 0"));
        }
        if let Some(c) = self.action_clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config("action_clip", "must be a positive finite bound"));
            }
        }
        let total = (self.runs as u64).saturating_mul(self.trajectories_per_run as u64);
        if total >= crate::noise::MAX_TRAJECTORY_INDEX {
            return Err(Error::config("trajectories_per_run", "too many trajectories"));
        }
        if self.vol_mode == VolModeChoice::Single(VolMode::Uncontrolled) && self.model()?.has_controlled_volatility() {
            return Err(Error::config(
                "vol_mode",
                format!(
                    "{} has action-dependent volatility; use naive, sqrt or both",
                    self.setting
                ),
            ));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let model = self.setting.model(self.c_sigma.unwrap_or(0.0));
        match self.action_clip {
            Some(bound) => model.with_action_clip(bound),
            None => Ok(model),
        }
    }

    /// `π(x) = N(1 - x, sigma_pi²)`.
    pub fn policy(&self) -> Result<FeedbackPolicy> {
        FeedbackPolicy::reverting(1.0, self.sigma_pi)
    }

    pub fn costs(&self) -> Result<CostSpec> {
        let base = match self.cost {
            CostChoice::Default => CostSpec::default_quadratic(),
            CostChoice::StateTracking => CostSpec::state_tracking(),
        };
        base.with_discount(self.discount_rate)
    }

    /// Volatility modes this configuration runs, in output order.
    pub fn vol_modes(&self) -> Result<Vec<VolMode>> {
        Ok(match self.vol_mode {
            VolModeChoice::Single(mode) => vec![mode],
            VolModeChoice::Both => vec![VolMode::Naive, VolMode::Sqrt],
            VolModeChoice::Auto => {
                if self.model()?.has_controlled_volatility() {
                    vec![VolMode::Naive, VolMode::Sqrt]
                } else {
                    vec![VolMode::Uncontrolled]
                }
            }
        })
    }

    pub fn study_params(&self, vol_mode: VolMode) -> StudyParams {
        StudyParams {
            horizon: self.horizon,
            x0: self.x0.clone(),
            fine_steps: self.n_fine,
            runs: self.runs,
            trajectories_per_run: self.trajectories_per_run,
            master_seed: self.master_seed,
            vol_mode,
            quadrature_order: self.quadrature_order,
        }
    }
}
