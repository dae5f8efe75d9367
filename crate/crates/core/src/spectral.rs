//! Fourier multiplier operators, spectral derivatives and discrete Sobolev norms.

use num_complex::Complex64;

use crate::bandlimited::BandLimitedField;
use crate::error::{FlowError, Result};
use crate::field::Field;

/// Sobolev regularity index `s >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && s >= 0.0 {
            Ok(SobolevIndex(s))
        } else {
            Err(FlowError::InvalidField(format!("Sobolev index must be >= 0, got {s}")))
        }
    }

    /// Index usable as a state space in dimension `dim`: requires `s > dim/2 + 1`.
    pub fn state_space(s: f64, dim: usize) -> Result<Self> {
        let idx = Self::new(s)?;
        if s <= dim as f64 / 2.0 + 1.0 {
            return Err(FlowError::InvalidField(format!(
                "state-space index needs s > {} in dimension {dim}, got {s}",
                dim as f64 / 2.0 + 1.0
            )));
        }
        Ok(idx)
    }

    /// `dim/2 + 1.5`, the default state-space index.
    pub fn default_for(dim: usize) -> Self {
        SobolevIndex(dim as f64 / 2.0 + 1.5)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Validates samples and returns the field with its spectral cache filled.
pub fn forward_transform(f: &Field) -> Result<Field> {
    if !f.is_finite() {
        return Err(FlowError::InvalidField("non-finite sample".into()));
    }
    let out = f.clone();
    let _ = out.spectral();
    Ok(out)
}

/// Multiplies every component's spectrum by a per-mode table.
pub fn apply_multiplier_table(f: &Field, table: &[f64]) -> Field {
    let coeffs = f
        .spectral()
        .iter()
        .map(|c| c.iter().zip(table).map(|(z, m)| z * m).collect())
        .collect();
    Field::from_spectral(f.grid(), coeffs)
}

/// Multiplies every component's spectrum by `m(xi)`.
pub fn apply_multiplier(f: &Field, m: impl Fn(&[f64]) -> f64) -> Result<Field> {
    let grid = f.grid();
    let dim = grid.dim();
    let mut xi = vec![0.0; dim];
    let mut table = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        for (a, x) in xi.iter_mut().enumerate() {
            *x = grid.xi(a)[idx];
        }
        let v = m(&xi);
        if !v.is_finite() {
            return Err(FlowError::InvalidMultiplier { mode: grid.mode(idx) });
        }
        table.push(v);
    }
    Ok(apply_multiplier_table(f, &table))
}

/// `chi(D) f`: keeps exactly the modes in the closed cutoff ball.
pub fn apply_chi(f: &Field) -> BandLimitedField {
    BandLimitedField::from_ball_coefficients(f.grid(), f.spectral())
}

/// Grid representation of `chi(D) f`.
pub fn chi_field(f: &Field) -> Field {
    apply_multiplier_table(f, &f.grid().tables().chi)
}

/// `Delta^{-1}(1 - chi(D)) f`, zero on the ball.
pub fn inv_laplace_high(f: &Field) -> Field {
    apply_multiplier_table(f, &f.grid().tables().inv_laplace_high)
}

fn derivative_coeffs(f: &Field, axis: usize) -> Vec<Vec<Complex64>> {
    let xi = f.grid().xi_derivative(axis);
    f.spectral()
        .iter()
        .map(|c| {
            c.iter()
                .zip(xi)
                .map(|(z, &k)| Complex64::new(-k * z.im, k * z.re))
                .collect()
        })
        .collect()
}

/// Spectral partial derivative along `axis`, applied to every component.
pub fn derivative(f: &Field, axis: usize) -> Field {
    Field::from_spectral(f.grid(), derivative_coeffs(f, axis))
}

/// Gradient of a scalar field.
pub fn gradient(f: &Field) -> Field {
    let parts: Vec<Vec<Complex64>> = (0..f.grid().dim())
        .map(|a| derivative_coeffs(f, a).swap_remove(0))
        .collect();
    Field::from_spectral(f.grid(), parts)
}

/// `Jacobian[a][b] = d_b f_a` for a vector field.
pub fn jacobian_entries(f: &Field) -> Vec<Vec<Field>> {
    let dim = f.grid().dim();
    let per_axis: Vec<Field> = (0..dim).map(|b| derivative(f, b)).collect();
    (0..f.components())
        .map(|a| (0..dim).map(|b| per_axis[b].scalar(a)).collect())
        .collect()
}

/// Spectral divergence of a vector field.
pub fn divergence(f: &Field) -> Field {
    let grid = f.grid();
    let len = grid.len();
    let mut acc = vec![Complex64::new(0.0, 0.0); len];
    for (a, c) in f.spectral().iter().enumerate() {
        let xi = grid.xi_derivative(a);
        for i in 0..len {
            acc[i] += Complex64::new(-xi[i] * c[i].im, xi[i] * c[i].re);
        }
    }
    Field::from_spectral(grid, vec![acc])
}

/// Scalar vorticity `d_x u_y - d_y u_x` of a 2D vector field.
pub fn curl_2d(u: &Field) -> Field {
    derivative(&u.scalar(1), 0).sub(&derivative(&u.scalar(0), 1))
}

/// `(u . grad) f` for a vector `u` and a field `f` (componentwise), products on the grid.
pub fn advect(u: &Field, f: &Field) -> Field {
    let dim = u.grid().dim();
    let mut out = Field::zeros(u.grid(), f.components());
    for b in 0..dim {
        let d = derivative(f, b);
        let ub = u.component(b);
        let vals = out.values_mut();
        for (c, dc) in d.values().iter().enumerate() {
            for ((o, x), y) in vals[c].iter_mut().zip(dc).zip(ub) {
                *o += x * y;
            }
        }
    }
    out
}

/// Discrete Sobolev norm `(L^n sum_k (1 + |xi|^2)^s |c(k)|^2)^{1/2}` over all components.
///
/// At `s = 0` this equals the grid L2 norm of the samples (Parseval).
pub fn sobolev_norm(f: &Field, s: SobolevIndex) -> f64 {
    let grid = f.grid();
    let xi_sq = grid.xi_squared();
    let sum: f64 = f
        .spectral()
        .iter()
        .map(|c| {
            c.iter()
                .zip(xi_sq)
                .map(|(z, &q)| (1.0 + q).powf(s.value()) * z.norm_sqr())
                .sum::<f64>()
        })
        .sum();
    (grid.volume() * sum).sqrt()
}

/// 2/3-rule filter: drops every mode with some `|k_a| > N/3`.
pub fn dealias(f: &Field) -> Field {
    let grid = f.grid();
    let cut = grid.points_per_axis() as i64 / 3;
    let table: Vec<f64> = (0..grid.len())
        .map(|i| {
            if grid.mode(i).iter().all(|k| k.abs() <= cut) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    apply_multiplier_table(f, &table)
}
