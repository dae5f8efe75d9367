//! Exponential map `u0 -> phi(1; u0)`, star-shapedness probing of its domain,
//! particle trajectories and the polynomial-fit decay diagnostic for their
//! analyticity in time.

use nalgebra::{DMatrix, DVector};

use crate::diagnostics::{num, numeric_table};
use crate::diffeo::DiffeoMap;
use crate::error::{FlowError, Result};
use crate::field::Field;
use crate::geodesic::{GammaStrategy, GeodesicConfig, GeodesicIntegrator, GeodesicRun, GeodesicState};
use crate::nufft::direct_sum;
use crate::spectral::{self, SobolevIndex};

#[derive(Debug, Clone)]
pub struct ExpResult {
    pub u0: Field,
    pub phi_at_1: Option<DiffeoMap>,
    pub max_time_reached: f64,
    pub failure_reason: Option<String>,
}

impl ExpResult {
    pub fn succeeded(&self) -> bool {
        self.phi_at_1.is_some()
    }
}

/// Integrates the geodesic from `u0` to `t = 1`; failures are returned as data.
pub fn exp_map(u0: &Field, dt: f64) -> ExpResult {
    exp_map_with(u0, dt, GammaStrategy::Pullback)
}

pub fn exp_map_with(u0: &Field, dt: f64, strategy: GammaStrategy) -> ExpResult {
    let config = GeodesicConfig::new(1.0, dt)
        .with_strategy(strategy)
        .with_record_every(usize::MAX);
    let run = GeodesicIntegrator::new(u0.grid(), config).run_from(GeodesicState::initial(u0));
    match run.failure {
        Some(f) => ExpResult {
            u0: u0.clone(),
            phi_at_1: None,
            max_time_reached: f.last_good.time,
            failure_reason: Some(f.error.tag().to_string()),
        },
        None => {
            let last = run.final_state();
            ExpResult {
                u0: u0.clone(),
                phi_at_1: Some(last.phi.clone()),
                max_time_reached: last.time,
                failure_reason: None,
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct StarProbe {
    pub scales: Vec<f64>,
    pub results: Vec<ExpResult>,
}

impl StarProbe {
    pub fn flags(&self) -> Vec<bool> {
        self.results.iter().map(|r| r.succeeded()).collect()
    }

    /// No failure at a smaller probed scale than any success.
    pub fn is_monotone(&self) -> bool {
        monotone(&self.flags())
    }

    pub fn table(&self) -> String {
        let mut out = String::from("scale\tsuccess\tmax_time_reached\tfailure_reason\n");
        for (c, r) in self.scales.iter().zip(&self.results) {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                num(*c),
                r.succeeded(),
                num(r.max_time_reached),
                r.failure_reason.as_deref().unwrap_or("-")
            ));
        }
        out
    }
}

/// Flags sorted by ascending scale are monotone when every success is preceded only by successes.
pub fn monotone(flags: &[bool]) -> bool {
    match flags.iter().rposition(|&ok| ok) {
        Some(last) => flags[..=last].iter().all(|&ok| ok),
        None => true,
    }
}

/// Runs `exp_map(c u0)` for each scale `c`; scales must be ascending in `(0, 1]`.
pub fn star_probe(u0: &Field, scales: &[f64], dt: f64) -> Result<StarProbe> {
    if scales.windows(2).any(|w| w[0] > w[1]) || scales.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
        return Err(FlowError::InvalidField("probe scales must be ascending in (0, 1]".into()));
    }
    let results = scales.iter().map(|&c| exp_map(&u0.scale(c), dt)).collect();
    Ok(StarProbe {
        scales: scales.to_vec(),
        results,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub seed: Vec<f64>,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
}

impl TrajectorySample {
    /// Delimited table `t, x1 .. xn`.
    pub fn table(&self) -> String {
        let dim = self.seed.len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=dim).map(|a| format!("x{a}")));
        let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<f64>> = self
            .times
            .iter()
            .zip(&self.positions)
            .map(|(t, p)| std::iter::once(*t).chain(p.iter().copied()).collect())
            .collect();
        numeric_table(&header, &rows)
    }
}

/// `phi(t, x)` at every recorded state, by exact trigonometric evaluation of the displacement.
pub fn trajectory_from_path(path: &[GeodesicState], x: &[f64]) -> TrajectorySample {
    let times = path.iter().map(|s| s.time).collect();
    let positions = path
        .iter()
        .map(|s| {
            let d = s.phi.displacement();
            let grid = d.grid();
            d.spectral()
                .iter()
                .zip(x)
                .map(|(c, xa)| xa + direct_sum(grid, c, x))
                .collect()
        })
        .collect();
    TrajectorySample {
        seed: x.to_vec(),
        times,
        positions,
    }
}

/// Integrates the geodesic from `u0` and records the path of the particle starting at `x`.
pub fn sample_trajectory(u0: &Field, x: &[f64], t_end: f64, dt: f64) -> Result<TrajectorySample> {
    if x.len() != u0.grid().dim() {
        return Err(FlowError::InvalidField("seed point dimension differs from the grid".into()));
    }
    let run = geodesic_path(u0, t_end, dt)?;
    Ok(trajectory_from_path(&run.path, x))
}

fn geodesic_path(u0: &Field, t_end: f64, dt: f64) -> Result<GeodesicRun> {
    crate::geodesic::integrate_geodesic(u0, &GeodesicConfig::new(t_end, dt))
}

/// Legendre polynomials `P_0 .. P_m` at `x` in `[-1, 1]`.
fn legendre(m: usize, x: f64) -> Vec<f64> {
    let mut p = vec![1.0; m + 1];
    if m >= 1 {
        p[1] = x;
    }
    for k in 1..m {
        p[k + 1] = ((2 * k + 1) as f64 * x * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
    }
    p
}

/// Condition number above which a fit is rejected.
pub const MAX_FIT_CONDITION: f64 = 1e8;

/// Least-squares fit of each coordinate of `traj` by a degree-`m` polynomial in
/// `t` (Legendre basis on the rescaled interval), for each requested degree.
/// Returns `(m, r(m))` with `r` the max-norm residual over samples and coordinates.
pub fn analyticity_diagnostic(traj: &TrajectorySample, degrees: &[usize]) -> Result<Vec<(usize, f64)>> {
    let n = traj.times.len();
    let (t0, t1) = match (traj.times.first(), traj.times.last()) {
        (Some(a), Some(b)) if b > a => (*a, *b),
        _ => {
            return Err(FlowError::DegreeTooHigh {
                degree: degrees.iter().copied().max().unwrap_or(0),
                reason: "trajectory spans no time interval".into(),
            })
        }
    };
    let dim = traj.seed.len();
    let mut out = Vec::with_capacity(degrees.len());
    for &m in degrees {
        if n < 4 * m.max(1) {
            return Err(FlowError::DegreeTooHigh {
                degree: m,
                reason: format!("{n} samples, need at least {}", 4 * m.max(1)),
            });
        }
        let basis = DMatrix::from_fn(n, m + 1, |i, j| {
            let x = 2.0 * (traj.times[i] - t0) / (t1 - t0) - 1.0;
            legendre(m, x)[j]
        });
        let sv = basis.singular_values();
        let cond = sv.max() / sv.min();
        if !(cond.is_finite() && cond <= MAX_FIT_CONDITION) {
            return Err(FlowError::DegreeTooHigh {
                degree: m,
                reason: format!("basis condition number {cond:.3e}"),
            });
        }
        let qr = basis.clone().qr();
        let mut worst = 0.0f64;
        for a in 0..dim {
            let y = DVector::from_fn(n, |i, _| traj.positions[i][a] - traj.seed[a]);
            let qty = qr.q().transpose() * &y;
            let coef = qr
                .r()
                .solve_upper_triangular(&qty)
                .ok_or_else(|| FlowError::DegreeTooHigh {
                    degree: m,
                    reason: "singular triangular factor".into(),
                })?;
            let fit = &basis * coef;
            worst = worst.max((fit - y).amax());
        }
        out.push((m, worst));
    }
    Ok(out)
}

/// Residual decay verdict: each step `m -> m + 1` shrinks the residual by at least
/// `factor`, unless the residual already sits at or below `floor`.
pub fn decays_geometrically(residuals: &[(usize, f64)], factor: f64, floor: f64) -> bool {
    residuals
        .windows(2)
        .all(|w| w[1].1 <= floor || w[0].1 <= floor || w[1].1 * factor <= w[0].1)
}

pub fn residual_table(residuals: &[(usize, f64)]) -> String {
    let mut out = String::from("degree\tresidual\n");
    for (m, r) in residuals {
        out.push_str(&format!("{m}\t{}\n", num(*r)));
    }
    out
}

/// State of the geodesic with initial velocity `u0` at time `t`.
pub fn geodesic_state_at(u0: &Field, t: f64, dt: f64) -> Result<GeodesicState> {
    let config = GeodesicConfig::new(t, dt).with_record_every(usize::MAX);
    let run = crate::geodesic::integrate_geodesic(u0, &config)?;
    Ok(run.final_state().clone())
}

/// Sup-norm displacement difference between `state(c u0, t)` and `state(u0, c t)`,
/// both integrated with the same step `dt`.
pub fn homogeneity_defect(u0: &Field, c: f64, t: f64, dt: f64) -> Result<f64> {
    let a = geodesic_state_at(&u0.scale(c), t, dt)?;
    let b = geodesic_state_at(u0, c * t, dt)?;
    Ok(a.phi.displacement().sub(b.phi.displacement()).sup_norm())
}

/// Empirical ratio `||exp(u0 + delta) - exp(u0)||_sup / ||delta||_{H^s}`.
pub fn continuity_ratio(u0: &Field, delta: &Field, s: SobolevIndex, dt: f64) -> Result<f64> {
    let a = exp_map(u0, dt);
    let b = exp_map(&u0.add(delta), dt);
    match (&a.phi_at_1, &b.phi_at_1) {
        (Some(pa), Some(pb)) => {
            let diff = pa.displacement().sub(pb.displacement()).sup_norm();
            Ok(diff / spectral::sobolev_norm(delta, s))
        }
        _ => Err(FlowError::NonFinite {
            time: a.max_time_reached.min(b.max_time_reached),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_flags() {
        assert!(monotone(&[true, true, false]));
        assert!(monotone(&[false, false]));
        assert!(monotone(&[]));
        assert!(!monotone(&[false, true]));
        assert!(!monotone(&[true, false, true]));
    }

    #[test]
    fn legendre_values() {
        let p = legendre(3, 0.5);
        assert_eq!(p[0], 1.0);
        assert_eq!(p[1], 0.5);
        assert!((p[2] - (-0.125)).abs() < 1e-15);
        assert!((p[3] - (-0.4375)).abs() < 1e-15);
    }

    #[test]
    fn polynomial_trajectory_fits_exactly() {
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.025).collect();
        let positions = times.iter().map(|t| vec![1.0 + t - 2.0 * t * t, 0.5]).collect();
        let traj = TrajectorySample {
            seed: vec![1.0, 0.5],
            times,
            positions,
        };
        let r = analyticity_diagnostic(&traj, &[1, 2, 3]).unwrap();
        assert!(r[0].1 > 0.1);
        assert!(r[1].1 < 1e-13 && r[2].1 < 1e-13);
        assert!(matches!(
            analyticity_diagnostic(&traj, &[11]),
            Err(FlowError::DegreeTooHigh { degree: 11, .. })
        ));
    }
}
