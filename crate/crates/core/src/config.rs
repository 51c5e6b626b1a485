//! Scan configuration and the built-in presets.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freq_engine::QuadratureSpec;
use crate::numeric::UniformGrid;
use crate::spectral_model::{make_gaussian_jsa, JointSpectralAmplitude, ModelError, Symmetry};

/// Pump frequency used by every preset, in units of `σ+ = 1`.
pub const PRESET_PUMP: f64 = 200.0;
/// NOON-arm delay of the presets, `σ+τ1 = 5`.
pub const PRESET_TAU1: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("InvalidScan: {0}")]
    InvalidScan(String),
    #[error("EngineMismatch: {0}")]
    EngineMismatch(String),
    #[error("UnknownPreset: {0}")]
    UnknownPreset(String),
    #[error("ConfigParse: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    GaussianProduct {
        sigma_plus: f64,
        sigma_minus: f64,
        pump_frequency: f64,
        #[serde(default)]
        symmetry: Symmetry,
    },
    /// CSV table `omega_s,omega_i,re,im` of detunings from `ωp/2`.
    Tabulated {
        path: PathBuf,
        pump_frequency: f64,
        #[serde(default)]
        symmetry: Symmetry,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<JointSpectralAmplitude, ModelError> {
        match self {
            ModelConfig::GaussianProduct {
                sigma_plus,
                sigma_minus,
                pump_frequency,
                symmetry,
            } => make_gaussian_jsa(*sigma_plus, *sigma_minus, *pump_frequency, *symmetry),
            ModelConfig::Tabulated {
                path,
                pump_frequency,
                symmetry,
            } => JointSpectralAmplitude::from_csv(path, *pump_frequency, *symmetry),
        }
    }

    pub fn symmetry(&self) -> Symmetry {
        match self {
            ModelConfig::GaussianProduct { symmetry, .. } | ModelConfig::Tabulated { symmetry, .. } => *symmetry,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, ModelConfig::GaussianProduct { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    Tau2AtFixedTau1,
    Tau1AtFixedTau2,
    #[serde(rename = "grid_2d")]
    Grid2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn grid(&self) -> Result<UniformGrid, ConfigError> {
        if self.points < 2 {
            return Err(ConfigError::InvalidScan(format!("points = {} must be at least 2", self.points)));
        }
        if !(self.min < self.max) {
            return Err(ConfigError::InvalidScan(format!(
                "min = {} must be below max = {}",
                self.min, self.max
            )));
        }
        UniformGrid::linspace(self.min, self.max, self.points)
            .ok_or_else(|| ConfigError::InvalidScan("delay bounds must be finite".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub axis: ScanAxis,
    /// Delay held fixed by one-dimensional scans.
    #[serde(default)]
    pub fixed_delay: Option<f64>,
    /// Scanned delay (`τ1` for 2-D scans).
    pub range: AxisSpec,
    /// `τ2` axis of 2-D scans.
    #[serde(default)]
    pub range_2: Option<AxisSpec>,
}

impl ScanSpec {
    pub fn grids(&self) -> Result<(UniformGrid, Option<UniformGrid>), ConfigError> {
        let g1 = self.range.grid()?;
        match self.axis {
            ScanAxis::Grid2D => {
                let g2 = self
                    .range_2
                    .ok_or_else(|| ConfigError::InvalidScan("grid_2d scans need range_2".into()))?
                    .grid()?;
                Ok((g1, Some(g2)))
            }
            _ => {
                if let Some(f) = self.fixed_delay {
                    if !f.is_finite() {
                        return Err(ConfigError::InvalidScan("fixed_delay must be finite".into()));
                    }
                }
                Ok((g1, None))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    /// Closed form for symmetric Gaussian models, quadrature otherwise.
    #[default]
    Auto,
    Quadrature,
    ClosedForm,
    TimeDomain,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub stem: String,
    pub emit_plot_data: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            stem: "interferogram".into(),
            emit_plot_data: false,
        }
    }
}

/// Complete description of one delay scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub model: ModelConfig,
    pub scan: ScanSpec,
    #[serde(default)]
    pub engine: EngineChoice,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ScanConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Checks everything that can be checked without running an engine.
    pub fn validate(&self) -> Result<JointSpectralAmplitude, ConfigError> {
        let jsa = self.model.build()?;
        self.scan.grids()?;
        if self.engine == EngineChoice::ClosedForm && !(self.model.is_gaussian() && self.model.symmetry() == Symmetry::Symmetric) {
            return Err(ConfigError::EngineMismatch(
                "engine closed_form requires a symmetric gaussian_product model".into(),
            ));
        }
        if self.quadrature.nodes_per_panel < 2 || !(self.quadrature.box_sigmas > 0.0) {
            return Err(ConfigError::InvalidScan(
                "quadrature needs nodes_per_panel >= 2 and box_sigmas > 0".into(),
            ));
        }
        Ok(jsa)
    }
}

/// A named preset, possibly a family of scans.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub members: Vec<(String, ScanConfig)>,
}

pub const PRESET_NAMES: [&str; 5] = ["fig2a", "fig2b", "fig2c", "fig3a", "fig3b"];

fn gaussian_scan(sigma_plus: f64, sigma_minus: f64, half_range: f64, points: usize, stem: &str) -> ScanConfig {
    ScanConfig {
        model: ModelConfig::GaussianProduct {
            sigma_plus,
            sigma_minus,
            pump_frequency: PRESET_PUMP,
            symmetry: Symmetry::Symmetric,
        },
        scan: ScanSpec {
            axis: ScanAxis::Tau2AtFixedTau1,
            fixed_delay: Some(PRESET_TAU1),
            range: AxisSpec {
                min: -half_range,
                max: half_range,
                points,
            },
            range_2: None,
        },
        engine: EngineChoice::Auto,
        quadrature: QuadratureSpec::default(),
        output: OutputSpec {
            stem: stem.to_string(),
            ..OutputSpec::default()
        },
    }
}

/// Number of scan points giving spacing `half_range / 1400`, which stays
/// below the Nyquist limit `π/(ωp + 8σ+)/2` for `ωp = 200`, `σ+ ≤ 1`.
fn preset_points(half_range: f64) -> usize {
    (half_range * 280.0).round() as usize + 1
}

pub fn preset(name: &str) -> Result<Preset, ConfigError> {
    let p = match name {
        "fig2a" => Preset {
            name: "fig2a",
            description: "frequency anti-correlated, sigma_plus/sigma_minus = 0.1, sigma_plus tau1 = 5",
            members: vec![("fig2a".into(), gaussian_scan(1.0, 10.0, 10.0, preset_points(10.0), "fig2a"))],
        },
        "fig2b" => Preset {
            name: "fig2b",
            description: "frequency correlated, sigma_plus/sigma_minus = 10, sigma_plus tau1 = 5",
            members: vec![("fig2b".into(), gaussian_scan(1.0, 0.1, 80.0, preset_points(80.0), "fig2b"))],
        },
        "fig2c" => Preset {
            name: "fig2c",
            description: "frequency uncorrelated, sigma_plus/sigma_minus = 1, sigma_plus tau1 = 5",
            members: vec![("fig2c".into(), gaussian_scan(1.0, 1.0, 10.0, preset_points(10.0), "fig2c"))],
        },
        "fig3a" => {
            // σ- held at 1 while σ+ = ratio narrows the frequency sum
            let mut members = Vec::new();
            for ratio in [0.1, 0.2, 0.5, 1.0] {
                let stem = format!("fig3a_ratio_{ratio}");
                members.push((stem.clone(), gaussian_scan(ratio, 1.0, 20.0, preset_points(20.0), &stem)));
            }
            Preset {
                name: "fig3a",
                description: "anti-correlated family, ratios 0.1, 0.2, 0.5 with the uncorrelated contrast",
                members,
            }
        }
        "fig3b" => {
            // σ+ held at 1 while σ- = 1/ratio narrows the frequency difference
            let mut members = Vec::new();
            for ratio in [2.0, 5.0, 10.0, 1.0] {
                let stem = format!("fig3b_ratio_{ratio}");
                members.push((stem.clone(), gaussian_scan(1.0, 1.0 / ratio, 40.0, preset_points(40.0), &stem)));
            }
            Preset {
                name: "fig3b",
                description: "correlated family, ratios 2, 5, 10 with the uncorrelated contrast",
                members,
            }
        }
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq_engine::nyquist_limit;

    #[test]
    fn presets_respect_nyquist() {
        for name in PRESET_NAMES {
            for (_, cfg) in preset(name).unwrap().members {
                let jsa = cfg.validate().unwrap();
                let (g, _) = cfg.scan.grids().unwrap();
                assert!(g.step <= nyquist_limit(jsa.pump_frequency, jsa.sigma_plus), "{name}");
            }
        }
    }

    #[test]
    fn config_round_trip() {
        let cfg = preset("fig2c").unwrap().members.remove(0).1;
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(ScanConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = preset("fig2a").unwrap().members.remove(0).1;
        cfg.model = ModelConfig::GaussianProduct {
            sigma_plus: 0.0,
            sigma_minus: 1.0,
            pump_frequency: 200.0,
            symmetry: Symmetry::Symmetric,
        };
        assert_eq!(cfg.validate().unwrap_err().to_string(), "NonPositiveParameter: sigma_plus");
        let mut cfg = preset("fig2a").unwrap().members.remove(0).1;
        cfg.scan.range.points = 1;
        assert!(matches!(cfg.validate(), Err(ConfigError::InvalidScan(_))));
        let mut cfg = preset("fig2a").unwrap().members.remove(0).1;
        cfg.engine = EngineChoice::ClosedForm;
        cfg.model = ModelConfig::GaussianProduct {
            sigma_plus: 1.0,
            sigma_minus: 1.0,
            pump_frequency: 200.0,
            symmetry: Symmetry::Antisymmetric,
        };
        assert!(matches!(cfg.validate(), Err(ConfigError::EngineMismatch(_))));
        assert!(preset("fig9").is_err());
    }
}
