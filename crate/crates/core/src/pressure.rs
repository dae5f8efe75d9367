//! Pressure term of the Euler equation written without the pressure itself.
//!
//! Applying `div` to the momentum equation gives
//! `-Delta p = sum_{j,k} d_j u_k d_k u_j = sum_{j,k} d_j d_k (u_j u_k)`.
//! The Laplacian is inverted separately above and below the cutoff ball:
//!
//! * `B1(v, w) = Delta^{-1}(1 - chi(D)) sum d_j v_k d_k w_j` (high modes),
//! * `B2(v, w) = Delta^{-1} chi(D) sum d_j d_k (v_j w_k)` (low modes),
//!
//! and `p = -B(u, u)` with `B = B1 + B2`. Products are formed on the grid
//! without dealiasing.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;

use crate::bandlimited::BandLimitedField;
use crate::error::{FlowError, Result};
use crate::field::Field;
use crate::grid::SpectralGrid;
use crate::spectral;

/// Divergence tolerance (grid L2) accepted by [`PressureOperator::pressure_from_velocity`].
pub const DIVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PressureOperator {
    grid: Arc<SpectralGrid>,
    /// `xi_j xi_k / |xi|^2` on the ball without `xi = 0`, for `j <= k`, indexed like `ball_modes`.
    b2_symbols: Vec<((usize, usize), Vec<f64>)>,
}

impl PressureOperator {
    pub fn new(grid: &Arc<SpectralGrid>) -> Self {
        let dim = grid.dim();
        let mut b2_symbols = Vec::new();
        for j in 0..dim {
            for k in j..dim {
                let sym = grid
                    .ball_modes()
                    .iter()
                    .map(|&idx| {
                        let q = grid.xi_squared()[idx];
                        if q == 0.0 {
                            0.0
                        } else {
                            grid.xi(j)[idx] * grid.xi(k)[idx] / q
                        }
                    })
                    .collect();
                b2_symbols.push(((j, k), sym));
            }
        }
        PressureOperator {
            grid: Arc::clone(grid),
            b2_symbols,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    fn check(&self, f: &Field) -> Result<()> {
        if **f.grid() != *self.grid || f.components() != self.grid.dim() {
            return Err(FlowError::GridMismatch);
        }
        Ok(())
    }

    /// `sum_{j,k} d_j v_k d_k w_j` on the grid.
    pub fn derivative_products(&self, v: &Field, w: &Field) -> Field {
        let dim = self.grid.dim();
        let dv: Vec<Field> = (0..dim).map(|j| spectral::derivative(v, j)).collect();
        let dw: Vec<Field> = (0..dim).map(|k| spectral::derivative(w, k)).collect();
        let mut q = vec![0.0; self.grid.len()];
        for j in 0..dim {
            for k in 0..dim {
                for ((o, a), b) in q.iter_mut().zip(dv[j].component(k)).zip(dw[k].component(j)) {
                    *o += a * b;
                }
            }
        }
        Field::from_raw(&self.grid, vec![q])
    }

    /// High-mode part `B1(v, w)`.
    pub fn b1(&self, v: &Field, w: &Field) -> Result<Field> {
        self.check(v)?;
        self.check(w)?;
        Ok(spectral::inv_laplace_high(&self.derivative_products(v, w)))
    }

    /// Low-mode part `B2(v, w)` as an exactly evaluable band-limited field.
    pub fn b2_band(&self, v: &Field, w: &Field) -> Result<BandLimitedField> {
        self.check(v)?;
        self.check(w)?;
        let ball = self.grid.ball_modes();
        let mut acc = vec![Complex64::new(0.0, 0.0); ball.len()];
        for ((j, k), sym) in &self.b2_symbols {
            let (j, k) = (*j, *k);
            let prod: Vec<f64> = if j == k {
                v.component(j).iter().zip(w.component(k)).map(|(a, b)| a * b).collect()
            } else {
                (0..self.grid.len())
                    .map(|i| v.component(j)[i] * w.component(k)[i] + v.component(k)[i] * w.component(j)[i])
                    .collect()
            };
            let c = self.grid.forward(&prod);
            for ((o, &idx), s) in acc.iter_mut().zip(ball).zip(sym) {
                *o += c[idx] * *s;
            }
        }
        let mut full = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (&idx, c) in ball.iter().zip(&acc) {
            full[idx] = *c;
        }
        Ok(BandLimitedField::from_ball_coefficients(&self.grid, &[full]))
    }

    /// Low-mode part `B2(v, w)` on the grid.
    pub fn b2(&self, v: &Field, w: &Field) -> Result<Field> {
        Ok(self.b2_band(v, w)?.to_field())
    }

    /// `B(v, w) = B1(v, w) + B2(v, w)`.
    pub fn b(&self, v: &Field, w: &Field) -> Result<Field> {
        Ok(self.b1(v, w)?.add(&self.b2(v, w)?))
    }

    /// `grad B(v, w)`, the force term of the pressure-free momentum equation.
    pub fn grad_b(&self, v: &Field, w: &Field) -> Result<Field> {
        Ok(spectral::gradient(&self.b(v, w)?))
    }

    /// `p = -B(u, u)` for a divergence-free velocity.
    pub fn pressure_from_velocity(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let div = spectral::divergence(u).l2_norm();
        if div > DIVERGENCE_TOL {
            return Err(FlowError::NotDivergenceFree {
                norm: div,
                tol: DIVERGENCE_TOL,
            });
        }
        Ok(self.b(u, u)?.scale(-1.0))
    }

    /// Plain-text audit table: mode, `|xi|`, B1 multiplier, and the B2 scale
    /// `s` such that the B2 symbol is `xi_j xi_k s`.
    pub fn multiplier_table(&self) -> String {
        let g = &self.grid;
        let mut out = String::new();
        let axes: Vec<String> = (0..g.dim()).map(|a| format!("k{a}")).collect();
        let _ = writeln!(out, "{}\txi_norm\tb1_multiplier\tb2_scale", axes.join("\t"));
        for idx in 0..g.len() {
            let k = g.mode(idx);
            let q = g.xi_squared()[idx];
            let b2 = if q > 0.0 && g.in_ball(idx) { 1.0 / q } else { 0.0 };
            let ks: Vec<String> = k.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                out,
                "{}\t{:.17e}\t{:.17e}\t{:.17e}",
                ks.join("\t"),
                q.sqrt(),
                g.tables().inv_laplace_high[idx],
                b2
            );
        }
        out
    }
}

/// Leray projection `I - xi xi^T / |xi|^2` on every nonzero mode.
///
/// Modes whose derivative frequency vanishes (the mean and pure Nyquist modes)
/// pass through unchanged.
pub fn leray_project(f: &Field) -> Field {
    let grid = f.grid();
    let dim = grid.dim();
    let spec = f.spectral();
    let mut out = spec.to_vec();
    for idx in 0..grid.len() {
        let q: f64 = (0..dim).map(|a| grid.xi_derivative(a)[idx].powi(2)).sum();
        if q == 0.0 {
            continue;
        }
        let mut dot = Complex64::new(0.0, 0.0);
        for a in 0..dim {
            dot += spec[a][idx] * grid.xi_derivative(a)[idx];
        }
        for (a, o) in out.iter_mut().enumerate() {
            o[idx] -= dot * (grid.xi_derivative(a)[idx] / q);
        }
    }
    Field::from_spectral(grid, out)
}

/// Gradient part `f - leray_project(f)`.
pub fn gradient_part(f: &Field) -> Field {
    f.sub(&leray_project(f))
}
