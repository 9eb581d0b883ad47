use std::path::{Path, PathBuf};

use pxlab_core::classical::DistributionSpec;
use pxlab_core::design::linspace;
use pxlab_core::fringe::{FitPlane, SlitProfile};
use pxlab_core::{make_context, ExperimentParams, GridConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Curve,
    Optimize,
    Classical,
    Synth,
    Analyze,
}

/// Configuration problem, reported with the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub wavelength: Option<f64>,
    #[serde(rename = "L")]
    pub slit_l: Option<f64>,
    #[serde(rename = "Lprime")]
    pub slit_l_prime: Option<f64>,
    pub f: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub grid_points: Option<usize>,
    pub points_per_slit: Option<usize>,
    /// Alternative to `points_per_slit`.
    pub grid_half_width: Option<f64>,
    /// Distances in units of z_M.
    pub z: Option<Vec<f64>>,
    pub z_range: Option<ZRange>,
    /// Range of `LB/2πħ` searched by `optimize`; omitted means distance only.
    pub lb_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Io {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSection {
    pub samples: Option<usize>,
    /// Explicit distributions; omitted means a seeded random family.
    pub distributions: Option<Vec<DistributionSpec>>,
    pub trials: Option<usize>,
    pub adversarial_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeSection {
    pub photons: Option<u64>,
    pub pixel_pitch: Option<f64>,
    pub half_width: Option<f64>,
    #[serde(default)]
    pub plane: FitPlane,
    #[serde(default)]
    pub profile: SlitProfile,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub numerics: Numerics,
    pub visibility: Option<f64>,
    #[serde(default)]
    pub io: Io,
    #[serde(default)]
    pub classical: ClassicalSection,
    #[serde(default)]
    pub fringe: FringeSection,
}

fn positive(field: &str, v: Option<f64>) -> Result<f64, ConfigError> {
    match v {
        None => Err(bad(field, "missing")),
        Some(x) if x.is_finite() && x > 0.0 => Ok(x),
        Some(x) => Err(bad(field, format!("must be positive, got {x}"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("--config", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("missing field") || msg.starts_with("unknown field"))
                .unwrap_or("<json>")
                .to_string();
            ConfigError {
                field,
                message: msg,
            }
        })
    }

    pub fn params(&self) -> Result<ExperimentParams, ConfigError> {
        let wavelength = positive("wavelength", self.physics.wavelength)?;
        let l = positive("L", self.physics.slit_l)?;
        let lp = positive("Lprime", self.physics.slit_l_prime)?;
        let f = positive("f", self.physics.f)?;
        let ctx = make_context(wavelength).map_err(|e| bad("wavelength", e.to_string()))?;
        ExperimentParams::new(l, lp, f, ctx).map_err(|e| bad("physics", e.to_string()))
    }

    pub fn visibility(&self) -> Result<f64, ConfigError> {
        let v = self.visibility.unwrap_or(1.0);
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err(bad("visibility", format!("must lie in [0, 1], got {v}")))
        }
    }

    pub fn grid(&self, params: &ExperimentParams) -> Result<GridConfig, ConfigError> {
        let mut g = GridConfig::default();
        if let Some(n) = self.numerics.grid_points {
            if n < 64 {
                return Err(bad("grid_points", format!("need at least 64, got {n}")));
            }
            g.n_points = n;
        }
        match (self.numerics.points_per_slit, self.numerics.grid_half_width) {
            (Some(_), Some(_)) => {
                return Err(bad(
                    "grid_half_width",
                    "give either points_per_slit or grid_half_width",
                ))
            }
            (Some(0), None) => return Err(bad("points_per_slit", "must be at least 1")),
            (Some(pps), None) => g.points_per_slit = pps,
            (None, Some(hw)) => {
                let hw = positive("grid_half_width", Some(hw))?;
                let pps = (g.n_points as f64 * params.slit_l / (2.0 * hw))
                    .round()
                    .max(1.0) as usize;
                g.points_per_slit = pps | 1;
            }
            (None, None) => {}
        }
        Ok(g)
    }

    /// Scaled distances from `z`, else `z_range`, else `default`.
    pub fn scaled_z(&self, default: impl FnOnce() -> Vec<f64>) -> Result<Vec<f64>, ConfigError> {
        let z = match (&self.numerics.z, &self.numerics.z_range) {
            (Some(z), _) => z.clone(),
            (None, Some(r)) => {
                if r.points < 2 || !(r.stop > r.start) {
                    return Err(bad("z_range", "needs stop > start and at least 2 points"));
                }
                linspace(r.start, r.stop, r.points)
            }
            (None, None) => default(),
        };
        if z.is_empty() || z.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(bad("z", "distances must be finite and non-negative"));
        }
        Ok(z)
    }

    pub fn seed(&self) -> u64 {
        self.io.seed.unwrap_or(0)
    }
}
