//! `hs geodesic`, `hs distance` and `hs evolve`.

use std::fmt::Write as _;

use diffgeo::hunter_saxton::{hs_distance, hs_evolve, HsGeodesic, LineGrid};
use serde::Serialize;

use crate::config::{HsDistanceConfig, HsEvolveConfig, HsGeodesicConfig};
use crate::error::CliError;
use crate::output::Report;
use crate::RunContext;

fn table(prefix: &str, points: usize, rows: impl Iterator<Item = (f64, Vec<f64>)>) -> String {
    let mut out = String::from("t");
    for j in 0..points {
        let _ = write!(out, ",{prefix}{j}");
    }
    out.push('\n');
    for (t, values) in rows {
        let _ = write!(out, "{t}");
        for v in values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct GeodesicSummary {
    grid: LineGrid,
    distance: f64,
    snapshots: usize,
}

/// Positions `φ_t(x_j)` along the geodesic, one row per snapshot.
pub fn geodesic(cfg: &HsGeodesicConfig) -> Result<Report, CliError> {
    if cfg.snapshots == 0 {
        return Err(CliError::Config("snapshots must be at least 1".into()));
    }
    let (phi0, phi1) = (cfg.phi0.diffeo(cfg.grid)?, cfg.phi1.diffeo(cfg.grid)?);
    let geo = HsGeodesic::between(&phi0, &phi1)?;
    let mut rows = Vec::with_capacity(cfg.snapshots + 1);
    for i in 0..=cfg.snapshots {
        let t = i as f64 / cfg.snapshots as f64;
        rows.push((t, geo.at(t)?.positions()));
    }
    let summary = GeodesicSummary { grid: cfg.grid, distance: hs_distance(&phi0, &phi1)?, snapshots: cfg.snapshots };
    Ok(Report::new(summary)?.csv("geodesic.csv", table("phi", cfg.grid.len(), rows.into_iter())))
}

pub fn distance(cfg: &HsDistanceConfig) -> Result<Report, CliError> {
    let d = hs_distance(&cfg.phi0.diffeo(cfg.grid)?, &cfg.phi1.diffeo(cfg.grid)?)?;
    Report::new(serde_json::json!({ "distance": d }))
}

#[derive(Serialize)]
struct EvolveSummary {
    grid: LineGrid,
    t_end: f64,
    snapshots: usize,
    final_max_abs: f64,
    /// Largest deviation from the closed-form geodesic over all snapshots.
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_max_error: Option<f64>,
}

pub fn evolve(cfg: &HsEvolveConfig, ctx: &RunContext) -> Result<Report, CliError> {
    let (u0, u0x) = cfg.u0.sample(&cfg.grid)?;
    let traj = hs_evolve(&cfg.grid, &u0, &cfg.integration)?;
    let reference_max_error = if ctx.oracle {
        let geo = HsGeodesic::from_identity(cfg.grid, u0x)?;
        let mut worst = 0.0f64;
        for (t, u) in traj.times.iter().zip(&traj.fields) {
            let exact = geo.eulerian_velocity(*t)?;
            worst = u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        }
        Some(worst)
    } else {
        None
    };
    let last = traj.fields.last().expect("trajectory holds the initial field");
    let summary = EvolveSummary {
        grid: cfg.grid,
        t_end: cfg.integration.t_end,
        snapshots: traj.times.len(),
        final_max_abs: last.iter().fold(0.0, |m, v| m.max(v.abs())),
        reference_max_error,
    };
    let rows = traj.times.iter().copied().zip(traj.fields.iter().cloned());
    Ok(Report::new(summary)?.csv("trajectory.csv", table("u", cfg.grid.len(), rows)))
}
