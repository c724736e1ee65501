//! `shoot`, `match` and `curvature`.

use diffgeo::curvature::{riemann_fd_oracle, sectional_numerator, CurvatureReport};
use diffgeo::dynamics::{sharp, shoot_reference, PathStatus};
use diffgeo::matching::{match_batch, MatchProblem, MatchRecord};
use diffgeo::ode::AdaptiveTolerance;
use serde::Serialize;

use crate::config::{CurvatureConfig, MatchConfig, ShootConfig};
use crate::error::CliError;
use crate::output::{rows, Report};
use crate::RunContext;

#[derive(Serialize)]
struct ShootReference {
    q_final: Vec<Vec<f64>>,
    alpha_final: Vec<Vec<f64>>,
    /// Largest coordinate difference against the fixed-step run.
    max_deviation: f64,
}

#[derive(Serialize)]
struct ShootSummary {
    status: PathStatus,
    steps: usize,
    energy: f64,
    max_energy_drift: f64,
    q_final: Vec<Vec<f64>>,
    alpha_final: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<ShootReference>,
}

pub fn shoot(cfg: &ShootConfig, ctx: &RunContext) -> Result<Report, CliError> {
    let state0 = cfg.initial.build(ctx.seed_or(cfg.seed))?;
    let path = diffgeo::dynamics::shoot(&cfg.kernel, &state0, &cfg.integration)?;
    let last = path.last();
    let reference = if ctx.oracle && path.status == PathStatus::Complete {
        let r = shoot_reference(&cfg.kernel, &state0, cfg.integration.t_end, AdaptiveTolerance::default())?;
        let dev = (r.q.as_matrix() - last.q.as_matrix()).amax().max((&r.alpha - &last.alpha).amax());
        Some(ShootReference { q_final: rows(r.q.as_matrix()), alpha_final: rows(&r.alpha), max_deviation: dev })
    } else {
        None
    };
    let summary = ShootSummary {
        status: path.status,
        steps: path.times.len() - 1,
        energy: path.energy_trace[0],
        max_energy_drift: path.max_energy_drift(),
        q_final: rows(last.q.as_matrix()),
        alpha_final: rows(&last.alpha),
        reference,
    };
    let report = Report::new(summary)?.csv("path.csv", path.to_csv());
    Ok(match path.status {
        PathStatus::Complete => report,
        PathStatus::Collision { time } => report.failing(CliError::Domain(diffgeo::Error::DegenerateConfig(format!(
            "landmarks collided at t = {time}; the path is truncated"
        )))),
    })
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum MatchOutcome {
    Solved(MatchRecord),
    Failed { code: &'static str, message: String },
}

/// Solve every problem in parallel. Failures are reported per problem and
/// make the run exit nonzero.
pub fn match_problems(cfg: &MatchConfig) -> Result<Report, CliError> {
    let problems = cfg
        .problems
        .iter()
        .map(|p| {
            let (q0, q1) = p.configs()?;
            Ok(MatchProblem::new(q0, q1, cfg.kernel, p.mode)?.with_settings(cfg.settings))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let outcomes: Vec<MatchOutcome> = match_batch(&problems)
        .into_iter()
        .map(|r| match r {
            Ok(r) => MatchOutcome::Solved(MatchRecord::from(&r)),
            Err(e) => MatchOutcome::Failed { code: e.code(), message: e.to_string() },
        })
        .collect();
    let failed = outcomes.iter().filter(|o| matches!(o, MatchOutcome::Failed { .. })).count();
    let report = Report::new(serde_json::json!({ "problems": outcomes.len(), "failed": failed, "results": outcomes }))?;
    Ok(if failed > 0 {
        report.failing(CliError::CheckFailed(format!("{failed} of {} problems failed", problems.len())))
    } else {
        report
    })
}

#[derive(Serialize)]
struct OracleComparison {
    numerator: f64,
    relative_difference: f64,
}

#[derive(Serialize)]
struct CurvatureSummary {
    #[serde(flatten)]
    report: CurvatureReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleComparison>,
}

pub fn curvature(cfg: &CurvatureConfig, ctx: &RunContext) -> Result<Report, CliError> {
    let (q, a, b) = cfg.parts()?;
    let report = sectional_numerator(&cfg.kernel, &q, &a, &b)?;
    let oracle = if ctx.oracle {
        let (pa, pb) = (sharp(&cfg.kernel, &q, &a)?, sharp(&cfg.kernel, &q, &b)?);
        let fd = riemann_fd_oracle(&cfg.kernel, &q, &pa, &pb)?;
        let scale = fd.abs().max(report.numerator.abs());
        let rel = if scale == 0.0 { 0.0 } else { (fd - report.numerator).abs() / scale };
        Some(OracleComparison { numerator: fd, relative_difference: rel })
    } else {
        None
    };
    Report::new(CurvatureSummary { report, oracle })
}
