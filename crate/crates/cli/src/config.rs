//! Run configurations. Every file carries `"schema_version": "1"` and unknown
//! fields are rejected; the full layout is documented in `docs/config-schema.md`.

use std::path::Path;

use diffgeo::dynamics::{LandmarkState, ShootOptions};
use diffgeo::euler_arnold::{EaEvolveOptions, PeriodicField, VanishOptions};
use diffgeo::hunter_saxton::{bump, bump_derivative, DiffLine, HsEvolveOptions, LineGrid};
use diffgeo::kernels::{KernelSpec, LandmarkConfig};
use diffgeo::matching::{MatchMode, MatchSettings};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1";

/// Read a JSON config, check its schema version, and decode it.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    parse(&text)
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    match value.get("schema_version").and_then(|v| v.as_str()) {
        Some(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(CliError::Config(format!(
                "schema_version {other:?} is not supported, expected {SCHEMA_VERSION:?}"
            )))
        }
        None => return Err(CliError::Config("missing string field schema_version".into())),
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let q = LandmarkConfig::from_rows(rows).map_err(|e| CliError::Config(format!("{what}: {e}")))?;
    Ok(q.into_matrix())
}

/// Initial landmarks and momenta, given explicitly or drawn from the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LandmarkInit {
    Explicit { q0: Vec<Vec<f64>>, alpha0: Vec<Vec<f64>> },
    Random { points: usize, dim: usize, spread: f64, min_separation: f64, momentum_scale: f64 },
}

impl LandmarkInit {
    pub fn build(&self, seed: u64) -> Result<LandmarkState, CliError> {
        match self {
            LandmarkInit::Explicit { q0, alpha0 } => {
                let q = LandmarkConfig::new(rows_to_matrix(q0, "q0")?)?;
                let a = rows_to_matrix(alpha0, "alpha0")?;
                Ok(LandmarkState::new(q, a)?)
            }
            &LandmarkInit::Random { points, dim, spread, min_separation, momentum_scale } => {
                if points == 0 || dim == 0 || !(spread > 0.0) || !(min_separation >= 0.0) || !(momentum_scale >= 0.0) {
                    return Err(CliError::Config("random landmarks need points, dim >= 1 and positive spread".into()));
                }
                let mut rng = rng(seed);
                for _ in 0..10_000 {
                    let m = DMatrix::from_fn(points, dim, |_, _| rng.random_range(-spread..=spread));
                    let separated = (0..points).all(|i| (0..i).all(|j| (m.row(i) - m.row(j)).norm() >= min_separation));
                    if separated {
                        let a = DMatrix::from_fn(points, dim, |_, _| rng.random_range(-1.0..=1.0) * momentum_scale);
                        return Ok(LandmarkState::new(LandmarkConfig::new(m)?, a)?);
                    }
                }
                Err(CliError::Config(format!(
                    "could not place {points} points at separation {min_separation} inside the spread"
                )))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootConfig {
    pub schema_version: String,
    pub kernel: KernelSpec,
    pub initial: LandmarkInit,
    pub integration: ShootOptions,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchEntry {
    pub q0: Vec<Vec<f64>>,
    pub q1: Vec<Vec<f64>>,
    #[serde(default = "exact_mode")]
    pub mode: MatchMode,
}

fn exact_mode() -> MatchMode {
    MatchMode::Exact
}

impl MatchEntry {
    pub fn configs(&self) -> Result<(LandmarkConfig, LandmarkConfig), CliError> {
        Ok((LandmarkConfig::new(rows_to_matrix(&self.q0, "q0")?)?, LandmarkConfig::new(rows_to_matrix(&self.q1, "q1")?)?))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchConfig {
    pub schema_version: String,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub settings: MatchSettings,
    pub problems: Vec<MatchEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureConfig {
    pub schema_version: String,
    pub kernel: KernelSpec,
    pub q: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl CurvatureConfig {
    pub fn parts(&self) -> Result<(LandmarkConfig, DMatrix<f64>, DMatrix<f64>), CliError> {
        Ok((
            LandmarkConfig::new(rows_to_matrix(&self.q, "q")?)?,
            rows_to_matrix(&self.alpha, "alpha")?,
            rows_to_matrix(&self.beta, "beta")?,
        ))
    }
}

/// `a · bump((x − center)/radius)`, peak value `a`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub radius: f64,
}

/// A function on a line grid: raw samples or a sum of bumps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LineProfile {
    Samples(Vec<f64>),
    Bumps(Vec<Bump>),
}

impl LineProfile {
    /// Values and slopes; sampled profiles are differentiated on the grid.
    pub fn sample(&self, grid: &LineGrid) -> Result<(Vec<f64>, Vec<f64>), CliError> {
        match self {
            LineProfile::Samples(v) => {
                if v.len() != grid.len() {
                    return Err(CliError::Config(format!("{} samples for a grid of {} points", v.len(), grid.len())));
                }
                Ok((v.clone(), grid.derivative(v)))
            }
            LineProfile::Bumps(bumps) => {
                if bumps.iter().any(|b| !(b.radius > 0.0) || !b.amplitude.is_finite() || !b.center.is_finite()) {
                    return Err(CliError::Config("bumps need finite amplitude and center and a positive radius".into()));
                }
                let value = grid.sample(|x| bumps.iter().map(|b| b.amplitude * bump(x, b.center, b.radius)).sum());
                let slope = grid.sample(|x| bumps.iter().map(|b| b.amplitude * bump_derivative(x, b.center, b.radius)).sum());
                Ok((value, slope))
            }
        }
    }

    /// The diffeomorphism `Id + profile`.
    pub fn diffeo(&self, grid: LineGrid) -> Result<DiffLine, CliError> {
        let (f, fp) = self.sample(&grid)?;
        Ok(DiffLine::new(grid, f, fp)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsGeodesicConfig {
    pub schema_version: String,
    pub grid: LineGrid,
    pub phi0: LineProfile,
    pub phi1: LineProfile,
    /// Number of time intervals; snapshots are taken at `i / snapshots`.
    pub snapshots: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsDistanceConfig {
    pub schema_version: String,
    pub grid: LineGrid,
    pub phi0: LineProfile,
    pub phi1: LineProfile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsEvolveConfig {
    pub schema_version: String,
    pub grid: LineGrid,
    pub u0: LineProfile,
    pub integration: HsEvolveOptions,
}

/// One Fourier mode `cos·cos(kx) + sin·sin(kx)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub k: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// A periodic field: raw samples, a finite Fourier sum, or random low modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Samples(Vec<f64>),
    Modes(Vec<Mode>),
    Random { max_mode: usize },
}

impl FieldSpec {
    pub fn build(&self, size: usize, rng: &mut ChaCha8Rng) -> Result<PeriodicField, CliError> {
        match self {
            FieldSpec::Samples(v) => {
                if v.len() != size {
                    return Err(CliError::Config(format!("{} samples for a grid of {size} points", v.len())));
                }
                Ok(PeriodicField::new(v.clone())?)
            }
            FieldSpec::Modes(modes) => {
                if modes.iter().any(|m| 2 * m.k as usize >= size) {
                    return Err(CliError::Config(format!("modes must stay below {} on this grid", size / 2)));
                }
                Ok(PeriodicField::from_fn(size, |x| {
                    modes.iter().map(|m| m.cos * (m.k as f64 * x).cos() + m.sin * (m.k as f64 * x).sin()).sum()
                })?)
            }
            &FieldSpec::Random { max_mode } => {
                let coeffs: Vec<(f64, f64)> =
                    (0..max_mode).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
                Ok(diffgeo::euler_arnold::low_mode_field(size, max_mode, &coeffs)?)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EaEvolveConfig {
    pub schema_version: String,
    pub order: f64,
    pub size: usize,
    pub u0: FieldSpec,
    pub integration: EaEvolveOptions,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EaCurvatureConfig {
    pub schema_version: String,
    pub order: f64,
    pub size: usize,
    pub x: FieldSpec,
    pub y: FieldSpec,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EaVanishConfig {
    pub schema_version: String,
    pub order: f64,
    pub size: usize,
    pub target: FieldSpec,
    #[serde(default)]
    pub options: VanishOptions,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// A minimal valid config for each command, shown with usage errors.
pub fn example(command: &str) -> Option<&'static str> {
    Some(match command {
        "shoot" => include_str!("../configs/shoot.json"),
        "match" => include_str!("../configs/match.json"),
        "curvature" => include_str!("../configs/curvature.json"),
        "hs geodesic" => include_str!("../configs/hs_geodesic.json"),
        "hs distance" => include_str!("../configs/hs_distance.json"),
        "hs evolve" => include_str!("../configs/hs_evolve.json"),
        "ea evolve" => include_str!("../configs/ea_evolve.json"),
        "ea curvature" => include_str!("../configs/ea_curvature.json"),
        "ea vanish" => include_str!("../configs/ea_vanish.json"),
        _ => return None,
    })
}
