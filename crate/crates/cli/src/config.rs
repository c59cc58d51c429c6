//! Run configuration: a TOML file with a schema version and four sections.
//!
//! ```toml
//! schema_version = 1
//!
//! [model]
//! name = "twist-map"
//! k = 0.3
//!
//! [curve]
//! family = "circle"
//! height = 0.0
//!
//! [harness]
//! n = 50
//!
//! [output]
//! csv = "out.csv"
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use torsionlab::curves::{CurveFamily, EssentialCurve, DEFAULT_RESOLUTION};
use torsionlab::harness::{GridSpec, Tolerances};
use torsionlab::models::{
    IdentityModel, Isotopy, IsotopyOrder, KickPolynomial, PendulumModel, RigidRotationModel,
    TranslationModel, TwistMapModel, PAPER_STIFFNESS, UNIT_PERIOD_STIFFNESS,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub curve: Option<CurveConfig>,
    #[serde(default)]
    pub harness: HarnessConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PendulumPreset {
    Paper,
    UnitPeriod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Identity {},
    /// `f_t(x, y) = (x + t rate, y)`.
    Translation { rate: f64 },
    /// Plane rotation, `rate` turns per unit time about `center`.
    RigidRotation {
        rate: f64,
        #[serde(default)]
        center: Option<[f64; 2]>,
    },
    /// Either `k` (standard kick) or an explicit `kick` table.
    TwistMap {
        #[serde(default)]
        k: Option<f64>,
        #[serde(default)]
        kick: Option<KickPolynomial>,
        #[serde(default)]
        isotopy: Option<IsotopyOrder>,
    },
    /// Either a `preset` or an explicit `stiffness`.
    Pendulum {
        #[serde(default)]
        preset: Option<PendulumPreset>,
        #[serde(default)]
        stiffness: Option<f64>,
        #[serde(default)]
        step: Option<f64>,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<Box<dyn Isotopy>, ConfigError> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ConfigError::Invalid(format!("model.{name} must be finite")))
            }
        };
        Ok(match self {
            ModelConfig::Identity {} => Box::new(IdentityModel),
            ModelConfig::Translation { rate } => Box::new(TranslationModel { rate: finite("rate", *rate)? }),
            ModelConfig::RigidRotation { rate, center } => {
                let rate = finite("rate", *rate)?;
                match center {
                    Some([cx, cy]) => Box::new(RigidRotationModel::about(rate, *cx, *cy)),
                    None => Box::new(RigidRotationModel::new(rate)),
                }
            }
            ModelConfig::TwistMap { k, kick, isotopy } => {
                let base = match (k, kick) {
                    (Some(k), None) => TwistMapModel::standard(finite("k", *k)?),
                    (None, Some(kick)) => {
                        if !kick.sin.iter().chain(&kick.cos).all(|c| c.is_finite()) {
                            return Err(ConfigError::Invalid("model.kick coefficients must be finite".into()));
                        }
                        TwistMapModel::with_kick(kick.clone())
                    }
                    _ => {
                        return Err(ConfigError::Invalid(
                            "twist-map needs exactly one of model.k and model.kick".into(),
                        ))
                    }
                };
                Box::new(base.isotopy_variant(isotopy.unwrap_or(IsotopyOrder::VerticalFirst)))
            }
            ModelConfig::Pendulum { preset, stiffness, step } => {
                let c = match (preset, stiffness) {
                    (Some(_), Some(_)) => {
                        return Err(ConfigError::Invalid(
                            "pendulum takes model.preset or model.stiffness, not both".into(),
                        ))
                    }
                    (Some(PendulumPreset::UnitPeriod), None) => UNIT_PERIOD_STIFFNESS,
                    (Some(PendulumPreset::Paper), None) | (None, None) => PAPER_STIFFNESS,
                    (None, Some(c)) => *c,
                };
                let h = step.unwrap_or(PendulumModel::DEFAULT_STEP);
                Box::new(PendulumModel::new(c, h).map_err(|e| ConfigError::Invalid(e.to_string()))?)
            }
        })
    }
}

/// Curve family keys plus an optional `resolution`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table")]
pub struct CurveConfig {
    pub family: CurveFamily,
    pub resolution: Option<usize>,
}

impl TryFrom<toml::Table> for CurveConfig {
    type Error = String;

    fn try_from(mut table: toml::Table) -> Result<Self, String> {
        let resolution = match table.remove("resolution") {
            None => None,
            Some(toml::Value::Integer(m)) if m > 0 => Some(m as usize),
            Some(other) => return Err(format!("curve.resolution must be a positive integer, got {other}")),
        };
        let family = CurveFamily::deserialize(toml::Value::Table(table))
            .map_err(|e| format!("curve: {}", e.message()))?;
        Ok(Self { family, resolution })
    }
}

impl CurveConfig {
    pub fn build(&self) -> Result<EssentialCurve, ConfigError> {
        EssentialCurve::new(self.family.clone(), self.resolution.unwrap_or(DEFAULT_RESOLUTION))
            .map_err(|e| ConfigError::Invalid(format!("curve: {e}")))
    }
}

/// Harness parameters; each command reads the keys it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    /// Horizon (number of iterates).
    pub n: Option<u32>,
    /// Explicit points `[x, y]`.
    pub points: Option<Vec<[f64; 2]>>,
    pub grid: Option<GridSpec>,
    /// Tangent vector for `torsion`, default vertical.
    pub vector: Option<[f64; 2]>,
    /// Convergence window and tolerance for `torsion`.
    pub window: Option<u32>,
    pub convergence_tol: Option<f64>,
    /// Sweep band for `sweep`.
    pub r_lo: Option<f64>,
    pub r_hi: Option<f64>,
    pub steps: Option<usize>,
    /// Lifted points for `linking`.
    pub x: Option<[f64; 2]>,
    pub y: Option<[f64; 2]>,
    pub margin_floor: Option<f64>,
    pub samples: Option<usize>,
    pub non_wandering: Option<bool>,
    pub tolerances: Option<Tolerances>,
    /// Tilt window length and doublings for `tilt`.
    pub tilt_window: Option<f64>,
    pub tilt_doublings: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// CSV destination; `--out` takes precedence; stdout when neither is set.
    pub csv: Option<PathBuf>,
    /// JSON report destination for commands that produce one.
    pub json: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_str(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let h = &self.harness;
        if let Some(t) = &h.tolerances {
            for (name, v) in [
                ("angle_residual", t.angle_residual),
                ("invariance", t.invariance),
                ("bisection", t.bisection),
            ] {
                if !(v > 0.0) {
                    return Err(ConfigError::Invalid(format!("harness.tolerances.{name} must be > 0")));
                }
            }
        }
        for (name, v) in [("convergence_tol", h.convergence_tol), ("margin_floor", h.margin_floor)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(ConfigError::Invalid(format!("harness.{name} must be > 0")));
                }
            }
        }
        if let Some(g) = &h.grid {
            g.validate().map_err(|e| ConfigError::Invalid(format!("harness.grid: {e}")))?;
        }
        if h.n == Some(0) {
            return Err(ConfigError::Invalid("harness.n must be positive".into()));
        }
        if h.steps == Some(0) {
            return Err(ConfigError::Invalid("harness.steps must be positive".into()));
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        self.harness.tolerances.unwrap_or_default()
    }

    pub fn require_n(&self) -> Result<u32, ConfigError> {
        self.harness
            .n
            .ok_or_else(|| ConfigError::Invalid("harness.n is required".into()))
    }

    pub fn require_curve(&self) -> Result<EssentialCurve, ConfigError> {
        self.curve
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("a [curve] section is required".into()))?
            .build()
    }

    /// Points from `harness.points`, else from `harness.grid`.
    pub fn points(&self) -> Result<Vec<[f64; 2]>, ConfigError> {
        match (&self.harness.points, &self.harness.grid) {
            (Some(p), None) => Ok(p.clone()),
            (None, Some(g)) => Ok(g.points().into_iter().map(|z| [z.x, z.y]).collect()),
            (Some(_), Some(_)) => Err(ConfigError::Invalid(
                "give harness.points or harness.grid, not both".into(),
            )),
            (None, None) => Err(ConfigError::Invalid("harness.points or harness.grid is required".into())),
        }
    }
}
