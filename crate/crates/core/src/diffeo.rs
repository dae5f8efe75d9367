//! Flow maps of the periodic box written as `phi = id + d` with a periodic
//! displacement `d`.

use std::sync::Arc;

use crate::error::{FlowError, Result};
use crate::field::Field;
use crate::grid::SpectralGrid;
use crate::nufft::{direct_sum, OffGridInterpolant};
use crate::spectral;

/// Default lower bound on `det(dphi)` before a map counts as leaving the chart.
pub const DET_FLOOR: f64 = 0.1;

/// Maps `x - L round(x / L)` into `[-L/2, L/2]`.
#[inline]
pub fn periodic_wrap(x: f64, l: f64) -> f64 {
    x - l * (x / l).round()
}

#[derive(Debug, Clone)]
pub struct DiffeoMap {
    displacement: Field,
}

impl DiffeoMap {
    pub fn identity(grid: &Arc<SpectralGrid>) -> Self {
        DiffeoMap {
            displacement: Field::zeros(grid, grid.dim()),
        }
    }

    /// `phi = id + d`; `d` must be a vector field with `dim` components.
    pub fn from_displacement(d: Field) -> Result<Self> {
        if d.components() != d.grid().dim() {
            return Err(FlowError::InvalidField(format!(
                "displacement needs {} components, got {}",
                d.grid().dim(),
                d.components()
            )));
        }
        Ok(DiffeoMap { displacement: d })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        self.displacement.grid()
    }

    pub fn displacement(&self) -> &Field {
        &self.displacement
    }

    pub fn into_displacement(self) -> Field {
        self.displacement
    }

    /// Images `phi(x)` of the grid points, one vector per axis (not wrapped into the box).
    pub fn points(&self) -> Vec<Vec<f64>> {
        let grid = self.grid();
        self.displacement
            .values()
            .iter()
            .enumerate()
            .map(|(a, d)| {
                d.iter()
                    .enumerate()
                    .map(|(i, v)| grid.coordinate(i, a) + v)
                    .collect()
            })
            .collect()
    }

    /// Jacobian data with the default chart floor.
    pub fn jacobian(&self) -> Result<JacobianData> {
        self.jacobian_with_floor(DET_FLOOR)
    }

    pub fn jacobian_with_floor(&self, det_floor: f64) -> Result<JacobianData> {
        let jac = JacobianData::compute(self);
        if !jac.min_det().is_finite() || jac.min_det() <= det_floor {
            return Err(FlowError::ChartExit {
                min_det: jac.min_det(),
                floor: det_floor,
            });
        }
        Ok(jac)
    }

    /// `self o other`, i.e. `x -> phi(psi(x))`.
    pub fn compose(&self, other: &DiffeoMap) -> Result<DiffeoMap> {
        let moved = compose_field(&self.displacement, other)?;
        DiffeoMap::from_displacement(other.displacement.add(&moved))
    }

    /// Largest periodic distance `|phi(psi(x)) - x|` over the grid.
    pub fn inverse_residual(&self, psi: &DiffeoMap) -> Result<f64> {
        let comp = self.compose(psi)?;
        let l = self.grid().box_length();
        Ok(comp
            .displacement
            .values()
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(periodic_wrap(*v, l).abs())))
    }
}

/// `dphi`, `det(dphi)` and `C = [dphi]^{-1}` sampled on the grid.
///
/// `entries[a][b] = d phi_a / d x_b`.
#[derive(Debug, Clone)]
pub struct JacobianData {
    grid: Arc<SpectralGrid>,
    entries: Vec<Vec<Vec<f64>>>,
    det: Vec<f64>,
    inverse: Vec<Vec<Vec<f64>>>,
    min_det: f64,
    max_det: f64,
}

impl JacobianData {
    fn compute(phi: &DiffeoMap) -> Self {
        let grid = phi.grid().clone();
        let dim = grid.dim();
        let len = grid.len();
        let grads = spectral::jacobian_entries(phi.displacement());
        let mut entries = vec![vec![vec![0.0; len]; dim]; dim];
        for a in 0..dim {
            for b in 0..dim {
                let id = if a == b { 1.0 } else { 0.0 };
                for (e, g) in entries[a][b].iter_mut().zip(grads[a][b].component(0)) {
                    *e = id + g;
                }
            }
        }
        let mut det = vec![0.0; len];
        let mut inverse = vec![vec![vec![0.0; len]; dim]; dim];
        let mut m = [[0.0; 3]; 3];
        for i in 0..len {
            for a in 0..dim {
                for b in 0..dim {
                    m[a][b] = entries[a][b][i];
                }
            }
            let (d, inv) = invert_small(&m, dim);
            det[i] = d;
            for a in 0..dim {
                for b in 0..dim {
                    inverse[a][b][i] = inv[a][b];
                }
            }
        }
        let min_det = det.iter().copied().fold(f64::INFINITY, f64::min);
        let max_det = det.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        JacobianData {
            grid,
            entries,
            det,
            inverse,
            min_det,
            max_det,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn entry(&self, a: usize, b: usize) -> &[f64] {
        &self.entries[a][b]
    }

    /// `C[a][b]`, entry of the inverse Jacobian matrix.
    pub fn inverse_entry(&self, a: usize, b: usize) -> &[f64] {
        &self.inverse[a][b]
    }

    pub fn det(&self) -> &[f64] {
        &self.det
    }

    pub fn det_field(&self) -> Field {
        Field::from_raw(&self.grid, vec![self.det.clone()])
    }

    pub fn min_det(&self) -> f64 {
        self.min_det
    }

    pub fn max_det(&self) -> f64 {
        self.max_det
    }

    /// `max_x |det(dphi) - 1|`.
    pub fn volume_defect(&self) -> f64 {
        self.det.iter().fold(0.0f64, |m, d| m.max((d - 1.0).abs()))
    }
}

/// Determinant and inverse (cofactors over determinant) of a 2x2 or 3x3 matrix.
#[inline]
pub(crate) fn invert_small(m: &[[f64; 3]; 3], dim: usize) -> (f64, [[f64; 3]; 3]) {
    let mut inv = [[0.0; 3]; 3];
    if dim == 2 {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let r = 1.0 / det;
        inv[0][0] = m[1][1] * r;
        inv[0][1] = -m[0][1] * r;
        inv[1][0] = -m[1][0] * r;
        inv[1][1] = m[0][0] * r;
        (det, inv)
    } else {
        let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
        let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
        let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
        let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
        let r = 1.0 / det;
        inv[0][0] = c00 * r;
        inv[1][0] = c01 * r;
        inv[2][0] = c02 * r;
        inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * r;
        inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * r;
        inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * r;
        inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * r;
        inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * r;
        inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * r;
        (det, inv)
    }
}

/// `R_phi f = f o phi`: the trigonometric interpolant of `f` evaluated at `phi(x)`.
pub fn compose_field(f: &Field, phi: &DiffeoMap) -> Result<Field> {
    f.same_grid(phi.displacement())?;
    let interp = OffGridInterpolant::from_coefficients(f.grid(), f.spectral());
    Ok(Field::from_raw(f.grid(), interp.evaluate(&phi.points())))
}

/// Reference composition by direct trigonometric summation (`O(N^{2n})`).
pub fn compose_field_direct(f: &Field, phi: &DiffeoMap) -> Result<Field> {
    f.same_grid(phi.displacement())?;
    let grid = f.grid();
    let pts = phi.points();
    let mut p = vec![0.0; grid.dim()];
    let values = f
        .spectral()
        .iter()
        .map(|c| {
            (0..grid.len())
                .map(|i| {
                    for (a, pa) in p.iter_mut().enumerate() {
                        *pa = pts[a][i];
                    }
                    direct_sum(grid, c, &p)
                })
                .collect()
        })
        .collect();
    Ok(Field::from_raw(grid, values))
}

#[derive(Debug, Clone)]
pub struct InversionOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub det_floor: f64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            tol: 1e-10,
            max_iter: 50,
            det_floor: DET_FLOOR,
        }
    }
}

/// Numerical inverse `phi^{-1}` with default options and initial guess `x - d(x)`.
pub fn invert(phi: &DiffeoMap) -> Result<DiffeoMap> {
    invert_with(phi, &InversionOptions::default(), None)
}

/// Newton iteration per grid point on `y + d(y) = x`.
///
/// `guess` is an optional initial inverse displacement; without one the
/// iteration starts from `y = x - d(x)`. Once a point meets `tol` the Newton
/// step already computed from that evaluation is applied as well.
pub fn invert_with(
    phi: &DiffeoMap,
    opts: &InversionOptions,
    guess: Option<&Field>,
) -> Result<DiffeoMap> {
    let grid = phi.grid();
    let dim = grid.dim();
    let l = grid.box_length();
    phi.jacobian_with_floor(opts.det_floor)?;
    let d = phi.displacement();
    let mut coeffs: Vec<_> = d.spectral().to_vec();
    for b in 0..dim {
        coeffs.extend(spectral::derivative(d, b).spectral().iter().cloned());
    }
    let interp = OffGridInterpolant::from_coefficients(grid, &coeffs);
    let start = match guess {
        Some(g) => {
            g.same_grid(d)?;
            g.clone()
        }
        None => d.scale(-1.0),
    };

    let mut inv = vec![vec![0.0; grid.len()]; dim];
    let mut vals = vec![0.0; interp.array_count()];
    let mut y = [0.0; 3];
    let mut x = [0.0; 3];
    let mut m = [[0.0; 3]; 3];
    let mut failed = 0usize;
    let mut worst = 0.0f64;
    for i in 0..grid.len() {
        for a in 0..dim {
            x[a] = grid.coordinate(i, a);
            y[a] = x[a] + start.component(a)[i];
        }
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..=opts.max_iter {
            interp.evaluate_at(&y[..dim], &mut vals);
            let mut f = [0.0; 3];
            residual = 0.0;
            for a in 0..dim {
                f[a] = periodic_wrap(y[a] + vals[a] - x[a], l);
                residual = residual.max(f[a].abs());
            }
            if !residual.is_finite() {
                break;
            }
            for a in 0..dim {
                for b in 0..dim {
                    m[a][b] = if a == b { 1.0 } else { 0.0 } + vals[dim + b * dim + a];
                }
            }
            let (det, jinv) = invert_small(&m, dim);
            if !(det.is_finite() && det > 0.0) {
                break;
            }
            for a in 0..dim {
                let step: f64 = (0..dim).map(|b| jinv[a][b] * f[b]).sum();
                y[a] -= step;
            }
            if residual <= opts.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            failed += 1;
            worst = worst.max(residual);
        }
        for a in 0..dim {
            inv[a][i] = y[a] - x[a];
        }
    }
    if failed > 0 {
        return Err(FlowError::InversionDiverged {
            failed,
            worst_residual: worst,
        });
    }
    let psi = DiffeoMap::from_displacement(Field::from_raw(grid, inv))?;
    psi.jacobian_with_floor(0.0)?;
    Ok(psi)
}

/// `R_phi d_k R_phi^{-1} f = sum_j (d_j f) C[j][k]`, applied to every component of `f`.
pub fn conjugated_derivative(f: &Field, k: usize, jac: &JacobianData) -> Field {
    let dim = f.grid().dim();
    let mut out = Field::zeros(f.grid(), f.components());
    for j in 0..dim {
        let dj = spectral::derivative(f, j);
        let c = jac.inverse_entry(j, k);
        let vals = out.values_mut();
        for (comp, dv) in dj.values().iter().enumerate() {
            for ((o, x), cc) in vals[comp].iter_mut().zip(dv).zip(c) {
                *o += x * cc;
            }
        }
    }
    out
}

/// Source of a time-dependent velocity field for [`flow_integrate`].
pub trait VelocityProvider {
    fn velocity_at(&self, t: f64) -> Result<Field>;
}

impl<F> VelocityProvider for F
where
    F: Fn(f64) -> Result<Field>,
{
    fn velocity_at(&self, t: f64) -> Result<Field> {
        self(t)
    }
}

/// Velocity samples on a uniform time grid `t0 + i h`; lookups must hit a sample.
#[derive(Debug, Clone)]
pub struct SampledVelocity {
    pub t0: f64,
    pub spacing: f64,
    pub fields: Vec<Field>,
}

impl VelocityProvider for SampledVelocity {
    fn velocity_at(&self, t: f64) -> Result<Field> {
        let pos = (t - self.t0) / self.spacing;
        let i = pos.round();
        if (pos - i).abs() > 1e-6 || i < 0.0 || i as usize >= self.fields.len() {
            return Err(FlowError::MissingSample(t));
        }
        Ok(self.fields[i as usize].clone())
    }
}

/// Number of fixed steps covering `[0, t_end]`; the step is adjusted to `t_end / n`.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    if t_end <= 0.0 {
        0
    } else {
        ((t_end / dt).round() as usize).max(1)
    }
}

/// Solves `d/dt phi = u(t) o phi`, `phi(0) = id` with classical RK4 on the displacement.
///
/// Returns the path at `t = 0, dt, 2 dt, ...`; every accepted step is checked
/// against the chart floor.
pub fn flow_integrate(
    grid: &Arc<SpectralGrid>,
    u: &dyn VelocityProvider,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, DiffeoMap)>> {
    let steps = step_count(t_end, dt);
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let mut phi = DiffeoMap::identity(grid);
    let mut path = vec![(0.0, phi.clone())];
    let rate = |t: f64, map: &DiffeoMap| -> Result<Field> { compose_field(&u.velocity_at(t)?, map) };
    for s in 0..steps {
        let t = s as f64 * h;
        let d = phi.displacement();
        let k1 = rate(t, &phi)?;
        let k2 = rate(t + 0.5 * h, &DiffeoMap::from_displacement(d.axpy(0.5 * h, &k1))?)?;
        let k3 = rate(t + 0.5 * h, &DiffeoMap::from_displacement(d.axpy(0.5 * h, &k2))?)?;
        let k4 = rate(t + h, &DiffeoMap::from_displacement(d.axpy(h, &k3))?)?;
        let incr = k1.axpy(2.0, &k2).axpy(2.0, &k3).add(&k4);
        let next = d.axpy(h / 6.0, &incr);
        if !next.is_finite() {
            return Err(FlowError::NonFinite { time: t + h });
        }
        phi = DiffeoMap::from_displacement(next)?;
        phi.jacobian()?;
        path.push(((s + 1) as f64 * h, phi.clone()));
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid(n: usize) -> Arc<SpectralGrid> {
        SpectralGrid::new(GridSpec::desk(2).with_points(n)).unwrap()
    }

    fn shear(g: &Arc<SpectralGrid>, t: f64) -> DiffeoMap {
        DiffeoMap::from_displacement(Field::vector_from_fn(g, |x| vec![t * x[1].sin(), 0.0])).unwrap()
    }

    #[test]
    fn identity_jacobian() {
        let g = grid(16);
        let j = DiffeoMap::identity(&g).jacobian().unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let e = if a == b { 1.0 } else { 0.0 };
                assert!(j.entry(a, b).iter().all(|v| (v - e).abs() < 1e-15));
                assert!(j.inverse_entry(a, b).iter().all(|v| (v - e).abs() < 1e-15));
            }
        }
        assert_eq!(j.volume_defect(), 0.0);
    }

    #[test]
    fn shear_jacobian_and_inverse_matrix() {
        let g = grid(32);
        let t = 0.7;
        let j = shear(&g, t).jacobian().unwrap();
        for i in 0..g.len() {
            let y = g.coordinate(i, 1);
            assert!((j.entry(0, 1)[i] - t * y.cos()).abs() < 1e-13);
            assert!((j.inverse_entry(0, 1)[i] + t * y.cos()).abs() < 1e-13);
            assert!((j.det()[i] - 1.0).abs() < 1e-13);
            assert!((j.inverse_entry(1, 0)[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn large_displacement_leaves_chart() {
        let g = grid(16);
        let phi = DiffeoMap::from_displacement(Field::vector_from_fn(&g, |x| vec![-1.5 * x[0].sin(), 0.0]))
            .unwrap();
        assert!(matches!(phi.jacobian(), Err(FlowError::ChartExit { .. })));
    }

    #[test]
    fn translation_composition_and_inverse() {
        let g = grid(16);
        let c = [0.3, -1.1];
        let phi = DiffeoMap::from_displacement(Field::vector_from_fn(&g, |_| c.to_vec())).unwrap();
        let f = Field::scalar_from_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() + (3.0 * x[0]).cos());
        let shifted = compose_field(&f, &phi).unwrap();
        let expect =
            Field::scalar_from_fn(&g, |x| (x[0] + c[0] + 2.0 * (x[1] + c[1])).sin() + (3.0 * (x[0] + c[0])).cos());
        assert!(shifted.sub(&expect).sup_norm() < 1e-13);
        let psi = invert(&phi).unwrap();
        for a in 0..2 {
            assert!(psi.displacement().component(a).iter().all(|v| (v + c[a]).abs() < 1e-12));
        }
    }

    #[test]
    fn shear_inverse_is_exact() {
        let g = grid(32);
        let psi = invert(&shear(&g, 0.8)).unwrap();
        let expect = shear(&g, -0.8);
        assert!(psi.displacement().sub(expect.displacement()).sup_norm() < 1e-12);
    }

    #[test]
    fn conjugated_derivative_under_shear() {
        let g = grid(32);
        let phi = shear(&g, 0.4);
        let j = phi.jacobian().unwrap();
        let f = Field::scalar_from_fn(&g, |x| (x[0] - x[1]).sin() * x[1].cos());
        let dx = conjugated_derivative(&f, 0, &j);
        assert!(dx.sub(&spectral::derivative(&f, 0)).sup_norm() < 1e-12);
        let id = DiffeoMap::identity(&g).jacobian().unwrap();
        let dy = conjugated_derivative(&f, 1, &id);
        assert!(dy.sub(&spectral::derivative(&f, 1)).sup_norm() < 1e-13);
    }

    #[test]
    fn sampled_velocity_lookup() {
        let g = grid(8);
        let s = SampledVelocity {
            t0: 0.0,
            spacing: 0.5,
            fields: vec![Field::zeros(&g, 2), Field::zeros(&g, 2)],
        };
        assert!(s.velocity_at(0.5).is_ok());
        assert!(matches!(s.velocity_at(0.25), Err(FlowError::MissingSample(_))));
        assert!(s.velocity_at(1.0).is_err());
    }
}
