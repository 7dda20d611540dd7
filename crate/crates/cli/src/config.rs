//! Versioned TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surfdyn::action::ActionOptions;
use surfdyn::equidist::Weighting;
use surfdyn::maps::IntegratorConfig;
use surfdyn::orbits::SearchConfig;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    pub surface: SurfaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capping: Option<CappingSpec>,
    pub map: MapSpec,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub orbits: SearchConfig,
    #[serde(default)]
    pub action: ActionSpec,
    #[serde(default)]
    pub dictionary: DictionarySpec,
    #[serde(default)]
    pub flux: FluxSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Disk { area: f64 },
    Annulus { width: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CappingSpec {
    /// Total area `B` of the capped surface.
    pub target_area: f64,
    /// Collar width `δ`.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSpec {
    Identity,
    RigidRotation { turns: f64 },
    RadialTwist { profile: Vec<f64> },
    AnnulusShear { c: f64 },
    AnnulusTwist { profile: Vec<f64> },
    AnnulusFlip { shift: f64 },
    PerturbedTwist { epsilon: f64, kappa: f64, margin: f64 },
    /// Time-one map of `H(time, ·)` given as an expression in base coordinates.
    Hamiltonian { expression: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionSpec {
    /// Exact term `g` added to the standard primitive: `β = β₀ + dg`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_term: Option<String>,
    /// Boundary circle used for normalization.
    pub gamma: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<[f64; 2]>,
    pub options: ActionOptions,
    pub quadrature_tol: f64,
    pub quadrature_max_level: usize,
    pub mc_samples: usize,
    /// Tolerance of the mean-action inequality check.
    pub inequality_tol: f64,
    pub census_epsilon: f64,
    pub census_samples: usize,
    /// Grid points per axis of the action level-set sampling.
    pub level_grid: usize,
}

impl Default for ActionSpec {
    fn default() -> Self {
        ActionSpec {
            exact_term: None,
            gamma: 0,
            basepoint: None,
            options: ActionOptions::default(),
            quadrature_tol: 1e-10,
            quadrature_max_level: 8,
            mc_samples: 20_000,
            inequality_tol: 1e-9,
            census_epsilon: 0.1,
            census_samples: 20_000,
            level_grid: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DictionarySpec {
    pub size: usize,
    pub schedule: Vec<usize>,
    pub weighting: Weighting,
}

impl Default for DictionarySpec {
    fn default() -> Self {
        DictionarySpec { size: 5, schedule: vec![1, 2, 3], weighting: Weighting::Uniform }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluxSpec {
    /// Built-in cycle names (`core`, `radial`, `boundary-<i>`); empty means
    /// the default homology basis.
    pub cycles: Vec<String>,
    pub q_max: u64,
    pub tol: f64,
}

impl Default for FluxSpec {
    fn default() -> Self {
        FluxSpec { cycles: Vec::new(), q_max: 50, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&src)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.schema_version != SCHEMA_VERSION {
            return bad(&format!("schema_version {} is not {SCHEMA_VERSION}", self.schema_version));
        }
        if self.workers == 0 {
            return bad("workers must be positive");
        }
        let positive = [
            ("integrator.tol", self.integrator.tol),
            ("orbits.tol", self.orbits.tol),
            ("action.options.path_tol", self.action.options.path_tol),
            ("action.options.boundary_tol", self.action.options.boundary_tol),
            ("action.quadrature_tol", self.action.quadrature_tol),
            ("action.inequality_tol", self.action.inequality_tol),
            ("action.census_epsilon", self.action.census_epsilon),
            ("flux.tol", self.flux.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if let Some(c) = &self.capping {
            if !(c.delta > 0.0 && c.target_area.is_finite()) {
                return bad("capping.delta must be positive");
            }
        }
        if self.dictionary.schedule.is_empty() || self.dictionary.schedule.contains(&0) {
            return bad("dictionary.schedule needs positive periods");
        }
        if self.action.mc_samples == 0 || self.action.census_samples == 0 || self.action.level_grid < 2 {
            return bad("sample counts must be positive and level_grid at least 2");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
schema_version = 1
seed = 7
workers = 2

[surface]
kind = "annulus"
width = 1.0

[capping]
target_area = 2.5
delta = 0.1

[map]
family = "perturbed-twist"
epsilon = 5e-2
kappa = 0.6
margin = 0.1

[orbits]
max_period = 4
tol = 1e-11

[action]
exact_term = "s^2 * sin(2*pi*t)"
basepoint = [0.5, 0.0]

[dictionary]
weighting = "area"
schedule = [1, 2]

[flux]
cycles = ["core", "radial"]
"#;

    #[test]
    fn round_trip_is_identity() {
        let a = ExperimentConfig::from_toml(FULL).unwrap();
        let b = ExperimentConfig::from_toml(&a.to_toml().unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.orbits.max_period, 4);
        assert_eq!(a.orbits.grid, SearchConfig::default().grid);
    }

    #[test]
    fn unknown_keys_rejected() {
        let src = FULL.replace("kappa = 0.6", "kappa = 0.6\nkapa = 1.0");
        assert!(matches!(ExperimentConfig::from_toml(&src), Err(CliError::Config(_))));
        let src = FULL.replace("seed = 7", "seed = 7\nspeed = 1");
        assert!(ExperimentConfig::from_toml(&src).is_err());
    }

    #[test]
    fn tolerances_must_be_positive() {
        let src = FULL.replace("tol = 1e-11", "tol = -1e-11");
        assert!(ExperimentConfig::from_toml(&src).is_err());
        let src = FULL.replace("schema_version = 1", "schema_version = 2");
        assert!(ExperimentConfig::from_toml(&src).is_err());
    }
}
