//! `ea evolve`, `ea curvature` and `ea vanish`.

use diffgeo::euler_arnold::{ea_evolve, vanish_distance_experiment, EaEvolveOptions, InertiaOp, VanishTable};
use serde::Serialize;

use crate::config::{rng, EaCurvatureConfig, EaEvolveConfig, EaVanishConfig};
use crate::error::CliError;
use crate::output::Report;
use crate::RunContext;

#[derive(Serialize)]
struct EvolveSummary {
    order: f64,
    size: usize,
    t_end: f64,
    snapshots: usize,
    max_energy_drift: f64,
    max_momentum_drift: f64,
    final_tail: f64,
    /// Largest difference at `t_end` against a run on twice the grid with
    /// half the step.
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_max_error: Option<f64>,
}

pub fn evolve(cfg: &EaEvolveConfig, ctx: &RunContext) -> Result<Report, CliError> {
    let op = InertiaOp::new(cfg.order, cfg.size)?;
    let u0 = cfg.u0.build(cfg.size, &mut rng(ctx.seed_or(cfg.seed)))?;
    let traj = ea_evolve(&op, &u0, &cfg.integration)?;
    let reference_max_error = if ctx.oracle {
        let fine_op = InertiaOp::new(cfg.order, 2 * cfg.size)?;
        let fine_u0 = diffgeo::euler_arnold::PeriodicField::from_fn(2 * cfg.size, |x| u0.eval(x))?;
        let opts = EaEvolveOptions { dt: 0.5 * cfg.integration.dt, snapshot_every: usize::MAX, ..cfg.integration };
        let fine = ea_evolve(&fine_op, &fine_u0, &opts)?;
        let (coarse, fine) = (traj.last().samples(), fine.last().samples());
        Some((0..cfg.size).map(|j| (coarse[j] - fine[2 * j]).abs()).fold(0.0, f64::max))
    } else {
        None
    };
    let summary = EvolveSummary {
        order: cfg.order,
        size: cfg.size,
        t_end: cfg.integration.t_end,
        snapshots: traj.times.len(),
        max_energy_drift: traj.max_energy_drift(),
        max_momentum_drift: traj.max_momentum_drift(),
        final_tail: traj.diagnostics.last().map_or(0.0, |d| d.tail),
        reference_max_error,
    };
    Ok(Report::new(summary)?.csv("trajectory.csv", traj.to_csv()))
}

#[derive(Serialize)]
struct CurvatureSummary {
    order: f64,
    numerator: f64,
    /// `‖X‖²‖Y‖² − γ(X,Y)²`.
    denominator: f64,
    sectional: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    arnold_numerator: Option<f64>,
}

/// The `ρ`-operator numerator; with `--oracle`, also Arnold's formula, which
/// needs `s ≥ 1`.
pub fn curvature(cfg: &EaCurvatureConfig, ctx: &RunContext) -> Result<Report, CliError> {
    let op = InertiaOp::new(cfg.order, cfg.size)?;
    let mut rng = rng(ctx.seed_or(cfg.seed));
    let x = cfg.x.build(cfg.size, &mut rng)?;
    let y = cfg.y.build(cfg.size, &mut rng)?;
    let arnold_numerator = if ctx.oracle { Some(op.arnold_numerator(&x, &y)?) } else { None };
    let numerator = op.sectional_numerator(&x, &y);
    let denominator = op.norm_sq(&x) * op.norm_sq(&y) - op.metric(&x, &y).powi(2);
    let sectional = (denominator > 1e-12).then(|| numerator / denominator);
    Report::new(CurvatureSummary { order: cfg.order, numerator, denominator, sectional, arnold_numerator })
}

#[derive(Serialize)]
struct VanishSummary {
    #[serde(flatten)]
    table: VanishTable,
    shrink_ratio: f64,
    spread: f64,
}

pub fn vanish(cfg: &EaVanishConfig, ctx: &RunContext) -> Result<Report, CliError> {
    let op = InertiaOp::new(cfg.order, cfg.size)?;
    let target = cfg.target.build(cfg.size, &mut rng(ctx.seed_or(cfg.seed)))?;
    let table = vanish_distance_experiment(&op, &target, &cfg.options)?;
    let csv = table.to_csv();
    let summary = VanishSummary { shrink_ratio: table.shrink_ratio(), spread: table.spread(), table };
    Ok(Report::new(summary)?.csv("vanish.csv", csv))
}
