//! Scenario configuration: JSON schema with strict validation, built-in
//! presets, and an exact echo of the resolved values for reproducibility.
//!
//! Weights can be given inline (`lambdas`) or by preset id
//! (`weights_preset`). Every other section falls back to defaults: the
//! gated-InGaAs detector set, standard BB84 protocol constants, and the
//! documented numeric tolerances. The echoed JSON carries the raw (not
//! renormalized) weights and all post-override numerics, so re-loading an
//! echoed file reproduces identical outputs byte for byte.

use serde::{Deserialize, Serialize};

use mmdecoy::channel::DetectorParams;
use mmdecoy::keyrate::{MuGrid, NumericControls, ProtocolParams, Scenario};
use mmdecoy::presets;
use mmdecoy::source::ModeWeights;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Inline Schmidt coefficients; exclusive with `weights_preset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_preset: Option<String>,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub sweep: SweepGridConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub p_dark: f64,
    pub e_det: f64,
    pub eta_det: f64,
    pub e0: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let det = presets::gobby2004();
        Self {
            p_dark: det.p_dark,
            e_det: det.e_det,
            eta_det: det.eta_det,
            e0: det.e0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub q: f64,
    pub f: f64,
    pub mu_d: f64,
    pub mu_s_grid: MuGridConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let pp = ProtocolParams::default();
        Self {
            q: pp.q,
            f: pp.f,
            mu_d: pp.mu_d,
            mu_s_grid: MuGridConfig {
                min: pp.mu_s_grid.min,
                max: pp.mu_s_grid.max,
                step: pp.mu_s_grid.step,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuGridConfig {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub eps_tail: f64,
    pub eps_enum: f64,
    pub max_events: usize,
    pub iter_tol: f64,
    pub max_iter: u32,
    pub mu_refine_tol: f64,
    pub n_cap_start: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let nc = NumericControls::default();
        Self {
            eps_tail: nc.eps_tail,
            eps_enum: nc.eps_enum,
            max_events: nc.max_events,
            iter_tol: nc.iter_tol,
            max_iter: nc.max_iter,
            mu_refine_tol: nc.mu_refine_tol,
            n_cap_start: nc.n_cap_start,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGridConfig {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
}

impl Default for SweepGridConfig {
    fn default() -> Self {
        Self {
            alpha_min: 0.0,
            alpha_max: 60.0,
            alpha_step: 1.0,
        }
    }
}

impl SweepGridConfig {
    /// Attenuation grid; `alpha_max < alpha_min` expresses an empty sweep.
    pub fn alphas(&self) -> Result<Vec<f64>, CliError> {
        if !(self.alpha_min.is_finite() && self.alpha_max.is_finite())
            || !self.alpha_step.is_finite()
            || self.alpha_step <= 0.0
            || self.alpha_min < 0.0
        {
            return Err(CliError::validation(format!(
                "bad sweep grid: min {}, max {}, step {}",
                self.alpha_min, self.alpha_max, self.alpha_step
            )));
        }
        if self.alpha_max < self.alpha_min {
            return Ok(Vec::new());
        }
        let n = ((self.alpha_max - self.alpha_min) / self.alpha_step).round() as usize;
        let mut alphas: Vec<f64> = (0..=n)
            .map(|i| self.alpha_min + i as f64 * self.alpha_step)
            .collect();
        alphas.retain(|&a| a <= self.alpha_max + 1e-9 * self.alpha_step);
        Ok(alphas)
    }
}

/// A scenario with every default and override applied.
pub struct ResolvedScenario {
    pub name: String,
    pub core: Scenario,
    pub alphas: Vec<f64>,
    /// Fully populated config whose JSON reproduces this scenario exactly.
    pub config: ScenarioConfig,
}

/// Environment overrides for the numeric controls, applied on top of the
/// configuration file (or preset).
const ENV_OVERRIDES: &[&str] = &[
    "MMDECOY_EPS_TAIL",
    "MMDECOY_EPS_ENUM",
    "MMDECOY_MAX_EVENTS",
    "MMDECOY_ITER_TOL",
    "MMDECOY_MAX_ITER",
    "MMDECOY_MU_REFINE_TOL",
    "MMDECOY_N_CAP_START",
];

fn env_override<T: std::str::FromStr>(name: &str, slot: &mut T) -> Result<(), CliError> {
    match std::env::var(name) {
        Ok(raw) => match raw.parse::<T>() {
            Ok(v) => {
                *slot = v;
                Ok(())
            }
            Err(_) => Err(CliError::validation(format!(
                "environment override {name}={raw} does not parse"
            ))),
        },
        Err(_) => Ok(()),
    }
}

fn apply_env_overrides(numerics: &mut NumericsConfig) -> Result<(), CliError> {
    debug_assert_eq!(ENV_OVERRIDES.len(), 7);
    env_override("MMDECOY_EPS_TAIL", &mut numerics.eps_tail)?;
    env_override("MMDECOY_EPS_ENUM", &mut numerics.eps_enum)?;
    env_override("MMDECOY_MAX_EVENTS", &mut numerics.max_events)?;
    env_override("MMDECOY_ITER_TOL", &mut numerics.iter_tol)?;
    env_override("MMDECOY_MAX_ITER", &mut numerics.max_iter)?;
    env_override("MMDECOY_MU_REFINE_TOL", &mut numerics.mu_refine_tol)?;
    env_override("MMDECOY_N_CAP_START", &mut numerics.n_cap_start)?;
    Ok(())
}

fn preset_config(name: &str) -> Option<ScenarioConfig> {
    if !presets::WEIGHT_PRESETS.contains(&name) {
        return None;
    }
    let mut config = ScenarioConfig {
        name: Some(name.to_string()),
        lambdas: None,
        weights_preset: Some(name.to_string()),
        detector: DetectorConfig::default(),
        protocol: ProtocolConfig::default(),
        numerics: NumericsConfig::default(),
        sweep: SweepGridConfig::default(),
    };
    if name == "two-mode-demo" {
        config.protocol.mu_d = presets::TWO_MODE_DEMO_MU_DECOY;
    }
    Some(config)
}

/// Loads a scenario from a preset id or a JSON file, applies environment
/// and `--mu-decoy` overrides, and validates everything.
pub fn load_scenario(arg: &str, mu_decoy: Option<f64>) -> Result<ResolvedScenario, CliError> {
    let mut config = match preset_config(arg) {
        Some(config) => config,
        None => {
            let raw = std::fs::read_to_string(arg).map_err(|e| {
                CliError::validation(format!(
                    "scenario '{arg}' is neither a preset ({}) nor a readable file: {e}",
                    presets::WEIGHT_PRESETS.join(", ")
                ))
            })?;
            serde_json::from_str(&raw)
                .map_err(|e| CliError::validation(format!("scenario '{arg}': {e}")))?
        }
    };

    apply_env_overrides(&mut config.numerics)?;
    if let Some(mu_d) = mu_decoy {
        config.protocol.mu_d = mu_d;
    }
    resolve(config)
}

fn resolve(mut config: ScenarioConfig) -> Result<ResolvedScenario, CliError> {
    let weights = match (&config.lambdas, &config.weights_preset) {
        (Some(_), Some(_)) => {
            return Err(CliError::validation(
                "specify either lambdas or weights_preset, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::validation(
                "scenario needs lambdas or weights_preset".into(),
            ))
        }
        (Some(lambdas), None) => ModeWeights::new(lambdas.clone())
            .map_err(|e| CliError::validation(format!("lambdas: {e}")))?,
        (None, Some(preset)) => presets::mode_weights(preset).ok_or_else(|| {
            CliError::validation(format!(
                "unknown weights preset '{preset}' (expected one of {})",
                presets::WEIGHT_PRESETS.join(", ")
            ))
        })?,
    };

    let detector = DetectorParams::new(
        config.detector.p_dark,
        config.detector.e_det,
        config.detector.eta_det,
    )
    .and_then(|d| d.with_e0(config.detector.e0))
    .map_err(|e| CliError::validation(format!("detector: {e}")))?;

    let core = Scenario {
        weights,
        detector,
        protocol: ProtocolParams {
            q: config.protocol.q,
            f: config.protocol.f,
            mu_d: config.protocol.mu_d,
            mu_s_grid: MuGrid {
                min: config.protocol.mu_s_grid.min,
                max: config.protocol.mu_s_grid.max,
                step: config.protocol.mu_s_grid.step,
            },
        },
        numerics: NumericControls {
            eps_tail: config.numerics.eps_tail,
            eps_enum: config.numerics.eps_enum,
            max_events: config.numerics.max_events,
            iter_tol: config.numerics.iter_tol,
            max_iter: config.numerics.max_iter,
            mu_refine_tol: config.numerics.mu_refine_tol,
            n_cap_start: config.numerics.n_cap_start,
        },
    };
    core.validate()
        .map_err(|e| CliError::validation(format!("scenario: {e}")))?;
    let alphas = config.sweep.alphas()?;

    let name = config.name.clone().unwrap_or_else(|| "custom".to_string());
    config.name = Some(name.clone());
    Ok(ResolvedScenario {
        name,
        core,
        alphas,
        config,
    })
}

/// Pretty JSON of the resolved configuration, newline-terminated.
pub fn echo_json(config: &ScenarioConfig) -> String {
    let mut text = serde_json::to_string_pretty(config).expect("config serializes");
    text.push('\n');
    text
}
