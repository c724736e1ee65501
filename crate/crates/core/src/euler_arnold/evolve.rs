use serde::{Deserialize, Serialize};

use super::field::PeriodicField;
use super::inertia::InertiaOp;
use crate::error::{Error, Result};
use crate::ode::{rk4_step, Rk4Work};

/// Initial data must have a spectral tail below this.
pub const RESOLVED_TAIL: f64 = 1e-10;

/// A tail above this during integration is reported as blow-up.
pub const BLOWUP_TAIL: f64 = 1e-4;

/// Settings for [`ea_evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EaEvolveOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Keep every this many steps (the final state is always kept).
    #[serde(default = "default_every")]
    pub snapshot_every: usize,
}

fn default_every() -> usize {
    1
}

/// Diagnostics recorded after every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EaDiagnostics {
    pub t: f64,
    /// `γ(u, u)`.
    pub energy: f64,
    /// Mean of the momentum `m = L u`.
    pub momentum_mean: f64,
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EaTrajectory {
    pub order: f64,
    pub times: Vec<f64>,
    pub fields: Vec<PeriodicField>,
    /// One entry for `t = 0` and one per step.
    pub diagnostics: Vec<EaDiagnostics>,
}

impl EaTrajectory {
    pub fn last(&self) -> &PeriodicField {
        self.fields.last().expect("trajectory holds the initial field")
    }

    /// Largest `|γ(u,u)(t) − γ(u,u)(0)| / γ(u,u)(0)`; zero for zero data.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.diagnostics[0].energy;
        if e0 == 0.0 {
            return 0.0;
        }
        self.diagnostics.iter().map(|d| ((d.energy - e0) / e0).abs()).fold(0.0, f64::max)
    }

    /// Largest change of the momentum mean from its initial value.
    pub fn max_momentum_drift(&self) -> f64 {
        let m0 = self.diagnostics[0].momentum_mean;
        self.diagnostics.iter().map(|d| (d.momentum_mean - m0).abs()).fold(0.0, f64::max)
    }

    /// Snapshots as CSV: `t,u0,...,u{M-1}`.
    pub fn to_csv(&self) -> String {
        let m = self.fields[0].len();
        let mut out = String::from("t");
        for j in 0..m {
            out.push_str(&format!(",u{j}"));
        }
        out.push('\n');
        for (t, u) in self.times.iter().zip(&self.fields) {
            out.push_str(&format!("{t:.17e}"));
            for v in u.samples() {
                out.push_str(&format!(",{v:.17e}"));
            }
            out.push('\n');
        }
        out
    }
}

fn diagnostics(op: &InertiaOp, u: &PeriodicField, t: f64) -> EaDiagnostics {
    EaDiagnostics {
        t,
        energy: op.norm_sq(u),
        momentum_mean: op.apply(u).mean(),
        tail: u.spectral_tail(),
    }
}

/// RK4 in time, pseudospectral in space, for `u_t = −K ad*_u(L u)`.
pub fn ea_evolve(op: &InertiaOp, u0: &PeriodicField, opts: &EaEvolveOptions) -> Result<EaTrajectory> {
    if u0.len() != op.size() {
        return Err(Error::invalid(format!(
            "initial field has {} points but the operator expects {}",
            u0.len(),
            op.size()
        )));
    }
    let tail = u0.spectral_tail();
    if !(tail < RESOLVED_TAIL) {
        return Err(Error::invalid(format!(
            "initial field is under-resolved: spectral tail {tail:e} exceeds {RESOLVED_TAIL:e}"
        )));
    }
    let (steps, last_dt) = crate::dynamics::step_plan(opts.t_end, opts.dt)?;
    let every = opts.snapshot_every.max(1);
    let mut u = u0.samples().to_vec();
    let mut work = Rk4Work::new(u.len());
    let mut f = |y: &[f64], dy: &mut [f64]| {
        let field = PeriodicField::new(y.to_vec()).expect("grid fixed by u0");
        dy.copy_from_slice(op.rhs(&field).samples());
    };
    let mut traj = EaTrajectory {
        order: op.order(),
        times: vec![0.0],
        fields: vec![u0.clone()],
        diagnostics: vec![diagnostics(op, u0, 0.0)],
    };
    for step in 0..steps {
        let h = if step + 1 == steps { last_dt } else { opts.dt };
        rk4_step(&mut f, &mut u, h, &mut work);
        let t = if step + 1 == steps { opts.t_end } else { (step + 1) as f64 * opts.dt };
        let field = PeriodicField::new(u.clone()).map_err(|_| {
            Error::BlowUp(format!("non-finite values at t = {t}"))
        })?;
        let diag = diagnostics(op, &field, t);
        if !(diag.tail <= BLOWUP_TAIL) {
            return Err(Error::BlowUp(format!(
                "spectral tail reached {:e} at t = {t}; the solution is steepening past the grid",
                diag.tail
            )));
        }
        traj.diagnostics.push(diag);
        if (step + 1) % every == 0 || step + 1 == steps {
            traj.times.push(t);
            traj.fields.push(field);
        }
    }
    Ok(traj)
}
