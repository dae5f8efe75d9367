//! Eulerian reference solver `u_t = grad B(u, u) - (u . grad) u` and its
//! comparison against the Lagrangian geodesic solver.

use std::sync::Arc;

use crate::diagnostics::{numeric_table, relative_drift};
use crate::diffeo::{compose_field, flow_integrate, step_count, SampledVelocity};
use crate::error::{FlowError, Result};
use crate::field::Field;
use crate::geodesic::{integrate_geodesic, GammaStrategy, GeodesicConfig, GeodesicRun};
use crate::grid::SpectralGrid;
use crate::pressure::{PressureOperator, DIVERGENCE_TOL};
use crate::spectral;

/// Right-hand side with the 2/3 rule applied to `u` and to the result.
pub fn euler_step_rhs(u: &Field) -> Result<Field> {
    euler_rhs_with(&PressureOperator::new(u.grid()), u)
}

fn euler_rhs_with(op: &PressureOperator, u: &Field) -> Result<Field> {
    let ud = spectral::dealias(u);
    let force = op.grad_b(&ud, &ud)?;
    let adv = spectral::advect(&ud, &ud);
    Ok(spectral::dealias(&force.sub(&adv)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerRecord {
    pub time: f64,
    pub energy: f64,
    pub energy_drift_rel: f64,
    pub div_u_norm: f64,
    pub pressure_norm: f64,
}

pub const EULER_HEADER: [&str; 5] = ["time", "energy", "energy_drift_rel", "div_u_norm", "pressure_norm"];

#[derive(Debug, Clone)]
pub struct EulerRun {
    pub times: Vec<f64>,
    pub velocities: Vec<Field>,
    pub diagnostics: Vec<EulerRecord>,
}

impl EulerRun {
    pub fn table(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .diagnostics
            .iter()
            .map(|r| vec![r.time, r.energy, r.energy_drift_rel, r.div_u_norm, r.pressure_norm])
            .collect();
        numeric_table(&EULER_HEADER, &rows)
    }
}

fn record(op: &PressureOperator, t: f64, u: &Field, e0: f64) -> Result<EulerRecord> {
    let energy = 0.5 * u.inner(u);
    let div = spectral::divergence(u).l2_norm();
    let pressure_norm = op.b(u, u)?.l2_norm();
    Ok(EulerRecord {
        time: t,
        energy,
        energy_drift_rel: relative_drift(energy, if t == 0.0 { energy } else { e0 }),
        div_u_norm: div,
        pressure_norm,
    })
}

/// Classical RK4 in time; velocities and diagnostics every `record_every` steps and at the end.
pub fn integrate_euler(u0: &Field, t_end: f64, dt: f64, record_every: usize) -> Result<EulerRun> {
    let grid = u0.grid();
    if u0.components() != grid.dim() {
        return Err(FlowError::InvalidField("velocity must have one component per axis".into()));
    }
    let div = spectral::divergence(u0).l2_norm();
    if div > DIVERGENCE_TOL {
        return Err(FlowError::NotDivergenceFree {
            norm: div,
            tol: DIVERGENCE_TOL,
        });
    }
    let op = PressureOperator::new(grid);
    let every = record_every.max(1);
    let steps = step_count(t_end, dt);
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let e0 = 0.5 * u0.inner(u0);
    let mut run = EulerRun {
        times: vec![0.0],
        velocities: vec![u0.clone()],
        diagnostics: vec![record(&op, 0.0, u0, e0)?],
    };
    let mut u = u0.clone();
    for s in 0..steps {
        let k1 = euler_rhs_with(&op, &u)?;
        let k2 = euler_rhs_with(&op, &u.axpy(0.5 * h, &k1))?;
        let k3 = euler_rhs_with(&op, &u.axpy(0.5 * h, &k2))?;
        let k4 = euler_rhs_with(&op, &u.axpy(h, &k3))?;
        let next = u.axpy(h / 6.0, &k1.axpy(2.0, &k2).axpy(2.0, &k3).add(&k4));
        let t = (s + 1) as f64 * h;
        if !next.is_finite() {
            return Err(FlowError::NonFinite { time: t });
        }
        u = next;
        if (s + 1) % every == 0 || s + 1 == steps {
            run.times.push(t);
            run.diagnostics.push(record(&op, t, &u, e0)?);
            run.velocities.push(u.clone());
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub time: f64,
    pub u_discrepancy_l2: f64,
    pub phi_discrepancy_sup: f64,
    pub energy_lagrangian: f64,
    pub energy_eulerian: f64,
}

pub const COMPARISON_HEADER: [&str; 5] = [
    "time",
    "u_discrepancy_L2",
    "phi_discrepancy_sup",
    "energy_lagrangian",
    "energy_eulerian",
];

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub geodesic: GeodesicRun,
}

impl ComparisonReport {
    /// Largest velocity discrepancy over time.
    pub fn u_discrepancy(&self) -> f64 {
        self.rows.iter().map(|r| r.u_discrepancy_l2).fold(0.0, f64::max)
    }

    /// Largest flow-map discrepancy over time.
    pub fn phi_discrepancy(&self) -> f64 {
        self.rows.iter().map(|r| r.phi_discrepancy_sup).fold(0.0, f64::max)
    }

    pub fn table(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.time,
                    r.u_discrepancy_l2,
                    r.phi_discrepancy_sup,
                    r.energy_lagrangian,
                    r.energy_eulerian,
                ]
            })
            .collect();
        numeric_table(&COMPARISON_HEADER, &rows)
    }
}

/// Runs the geodesic solver and the Eulerian solver from the same `u0` and compares them.
///
/// The Eulerian leg runs at `dt / 2` so that its velocities are available at every
/// RK4 stage time of the flow integration at step `dt`. The velocity discrepancy is
/// `||u_lag - u_eul|| / ||u0||` (absolute when `u0 = 0`); the flow-map discrepancy is
/// the sup norm of the displacement difference between the geodesic and the flow of
/// the Eulerian velocity.
pub fn cross_validate(u0: &Field, t_end: f64, dt: f64, strategy: GammaStrategy) -> Result<ComparisonReport> {
    let grid: &Arc<SpectralGrid> = u0.grid();
    let steps = step_count(t_end, dt);
    let h = if steps == 0 { dt } else { t_end / steps as f64 };
    let eulerian = integrate_euler(u0, t_end, 0.5 * h, 1)?;
    let config = GeodesicConfig::new(t_end, h)
        .with_strategy(strategy)
        .with_diagnostics(true);
    let geodesic = integrate_geodesic(u0, &config)?;
    let provider = SampledVelocity {
        t0: 0.0,
        spacing: if steps == 0 { h } else { 0.5 * h },
        fields: eulerian.velocities.clone(),
    };
    let flow = flow_integrate(grid, &provider, t_end, h)?;
    let norm0 = u0.l2_norm();
    let scale = if norm0 > 0.0 { 1.0 / norm0 } else { 1.0 };
    let mut rows = Vec::with_capacity(flow.len());
    for (i, (t, phi)) in flow.iter().enumerate() {
        let lag = &geodesic.path[i];
        let u_lag = &geodesic.velocities[i];
        let u_eul = &eulerian.velocities[2 * i];
        rows.push(ComparisonRow {
            time: *t,
            u_discrepancy_l2: u_lag.sub(u_eul).l2_norm() * scale,
            phi_discrepancy_sup: lag.phi.displacement().sub(phi.displacement()).sup_norm(),
            energy_lagrangian: geodesic.diagnostics[i].energy,
            energy_eulerian: eulerian.diagnostics[2 * i].energy,
        });
    }
    Ok(ComparisonReport { rows, geodesic })
}

/// `max_t max_x |omega(t, phi(t, x)) - omega_0(x)|` along a recorded 2D geodesic run.
///
/// Uses the reconstructed velocities of the run when present.
pub fn vorticity_check_2d(run: &GeodesicRun) -> Result<f64> {
    let first = run
        .path
        .first()
        .ok_or_else(|| FlowError::InvalidField("empty geodesic path".into()))?;
    if first.phi.grid().dim() != 2 {
        return Err(FlowError::InvalidGrid("vorticity transport check is two-dimensional".into()));
    }
    let u0 = crate::geodesic::reconstruct_velocity(first)?;
    let omega0 = spectral::curl_2d(&u0);
    let mut worst = 0.0f64;
    for (i, state) in run.path.iter().enumerate() {
        let u = match run.velocities.get(i) {
            Some(u) => u.clone(),
            None => crate::geodesic::reconstruct_velocity(state)?,
        };
        let omega = compose_field(&spectral::curl_2d(&u), &state.phi)?;
        worst = worst.max(omega.sub(&omega0).sup_norm());
    }
    Ok(worst)
}
