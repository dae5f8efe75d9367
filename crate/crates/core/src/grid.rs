//! Periodic box discretisation: coordinates, frequency lattice, FFT plans and
//! the multiplier tables shared by every spectral operator.
//!
//! The box is `[0, L)^n` sampled at `N` points per axis. Lattice mode `k` has
//! integer components in `[-N/2, N/2)` and frequency `xi(k) = (2 pi / L) k`.
//! Samples and coefficients are stored row-major with the last axis fastest.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{FlowError, Result};
use crate::nufft::NufftPlan;

/// Discretisation parameters of a periodic box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub points_per_axis: usize,
    pub box_length: f64,
    pub cutoff_radius: f64,
}

impl GridSpec {
    /// Desk-scale defaults: `L = 2 pi`, `rho = 1.5`, `N = 64` in 2D and `N = 32` in 3D.
    pub fn desk(dim: usize) -> Self {
        GridSpec {
            dim,
            points_per_axis: if dim == 3 { 32 } else { 64 },
            box_length: 2.0 * PI,
            cutoff_radius: 1.5,
        }
    }

    pub fn with_points(mut self, n: usize) -> Self {
        self.points_per_axis = n;
        self
    }

    pub fn with_cutoff(mut self, rho: f64) -> Self {
        self.cutoff_radius = rho;
        self
    }

    pub fn with_box_length(mut self, l: f64) -> Self {
        self.box_length = l;
        self
    }
}

/// Per-mode values of the Fourier multipliers used by the pressure operators.
///
/// `inv_laplace_high` is `Delta^{-1}(1 - chi(D))`, `a_symbol` is the symbol of
/// `A = chi(D) + Delta (1 - chi(D))` and `a_inverse` its reciprocal.
#[derive(Debug, Clone)]
pub struct MultiplierTables {
    pub chi: Vec<f64>,
    pub inv_laplace_high: Vec<f64>,
    pub a_symbol: Vec<f64>,
    pub a_inverse: Vec<f64>,
}

pub struct SpectralGrid {
    spec: GridSpec,
    total: usize,
    wavenumbers: Vec<i64>,
    xi: Vec<Vec<f64>>,
    xi_deriv: Vec<Vec<f64>>,
    xi_sq: Vec<f64>,
    ball: Vec<usize>,
    conj: Vec<usize>,
    tables: MultiplierTables,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
    nufft: NufftPlan,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("spec", &self.spec)
            .field("ball_modes", &self.ball.len())
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl SpectralGrid {
    /// Builds a grid, rejecting parameter sets for which the low/high split
    /// around the cutoff ball would be empty on one side.
    pub fn new(spec: GridSpec) -> Result<Arc<Self>> {
        Self::build(spec).map(Arc::new)
    }

    pub(crate) fn build(spec: GridSpec) -> Result<Self> {
        let GridSpec {
            dim,
            points_per_axis: n,
            box_length,
            cutoff_radius,
        } = spec;
        if dim != 2 && dim != 3 {
            return Err(FlowError::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(FlowError::InvalidGrid(format!(
                "points per axis must be a power of two >= 4, got {n}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(FlowError::InvalidGrid(format!("box length must be positive, got {box_length}")));
        }
        if !(cutoff_radius.is_finite() && cutoff_radius > 0.0) {
            return Err(FlowError::InvalidGrid(format!(
                "cutoff radius must be positive, got {cutoff_radius}"
            )));
        }
        let base = 2.0 * PI / box_length;
        let min_xi = base;
        let max_xi = base * (n as f64 / 2.0) * (dim as f64).sqrt();
        if min_xi > cutoff_radius {
            return Err(FlowError::InvalidGrid(format!(
                "no nonzero lattice frequency inside the cutoff ball (smallest |xi| = {min_xi}, rho = {cutoff_radius})"
            )));
        }
        if max_xi <= cutoff_radius {
            return Err(FlowError::InvalidGrid(format!(
                "no lattice frequency outside the cutoff ball (largest |xi| = {max_xi}, rho = {cutoff_radius})"
            )));
        }

        let wavenumbers: Vec<i64> = (0..n)
            .map(|i| if i < n / 2 { i as i64 } else { i as i64 - n as i64 })
            .collect();
        let total = n.pow(dim as u32);
        let mut xi = vec![vec![0.0; total]; dim];
        let mut xi_deriv = vec![vec![0.0; total]; dim];
        let mut xi_sq = vec![0.0; total];
        let mut ball = Vec::new();
        let nyquist = -(n as i64) / 2;
        for idx in 0..total {
            let mut rem = idx;
            let mut sq = 0.0;
            for a in (0..dim).rev() {
                let k = wavenumbers[rem % n];
                rem /= n;
                let x = base * k as f64;
                xi[a][idx] = x;
                xi_deriv[a][idx] = if k == nyquist { 0.0 } else { x };
                sq += x * x;
            }
            xi_sq[idx] = sq;
            if sq.sqrt() <= cutoff_radius {
                ball.push(idx);
            }
        }

        let conj = (0..total)
            .map(|idx| {
                let mut rem = idx;
                let mut out = 0;
                let mut stride = 1;
                for _ in 0..dim {
                    let i = rem % n;
                    rem /= n;
                    out += ((n - i) % n) * stride;
                    stride *= n;
                }
                out
            })
            .collect();
        let tables = MultiplierTables::from_symbols(&xi_sq, cutoff_radius);
        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(n);
        let fft_inverse = planner.plan_fft_inverse(n);
        let nufft = NufftPlan::new(n, box_length, &mut planner);

        Ok(SpectralGrid {
            spec,
            total,
            wavenumbers,
            xi,
            xi_deriv,
            xi_sq,
            ball,
            conj,
            tables,
            fft_forward,
            fft_inverse,
            nufft,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.spec.points_per_axis
    }

    pub fn box_length(&self) -> f64 {
        self.spec.box_length
    }

    pub fn cutoff_radius(&self) -> f64 {
        self.spec.cutoff_radius
    }

    /// Number of grid points (and of lattice modes), `N^n`.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Grid spacing `L / N`.
    pub fn spacing(&self) -> f64 {
        self.spec.box_length / self.spec.points_per_axis as f64
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    pub fn volume(&self) -> f64 {
        self.spec.box_length.powi(self.dim() as i32)
    }

    /// Integer lattice vector of a flat spectral index.
    pub fn mode(&self, idx: usize) -> Vec<i64> {
        let n = self.spec.points_per_axis;
        let mut out = vec![0; self.dim()];
        let mut rem = idx;
        for a in (0..self.dim()).rev() {
            out[a] = self.wavenumbers[rem % n];
            rem /= n;
        }
        out
    }

    /// Flat spectral index of a lattice vector (components taken modulo `N`).
    pub fn mode_index(&self, k: &[i64]) -> usize {
        let n = self.spec.points_per_axis as i64;
        k.iter().fold(0usize, |acc, &kc| acc * n as usize + kc.rem_euclid(n) as usize)
    }

    /// Index of the mode `-k`, the Hermitian partner of `idx`.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        self.conj[idx]
    }

    /// Physical coordinate of grid point `idx` along axis `a`.
    pub fn coordinate(&self, idx: usize, axis: usize) -> f64 {
        let n = self.spec.points_per_axis;
        let stride = n.pow((self.dim() - 1 - axis) as u32);
        ((idx / stride) % n) as f64 * self.spacing()
    }

    /// Coordinates of all grid points, one vector per axis.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|a| (0..self.total).map(|i| self.coordinate(i, a)).collect())
            .collect()
    }

    /// Frequency component `xi_a` for every lattice mode.
    pub fn xi(&self, axis: usize) -> &[f64] {
        &self.xi[axis]
    }

    /// Frequency component used by odd (derivative) multipliers: the Nyquist
    /// mode along `axis` is mapped to zero so that real fields stay real.
    pub fn xi_derivative(&self, axis: usize) -> &[f64] {
        &self.xi_deriv[axis]
    }

    pub fn xi_squared(&self) -> &[f64] {
        &self.xi_sq
    }

    pub fn xi_norm(&self, idx: usize) -> f64 {
        self.xi_sq[idx].sqrt()
    }

    /// Flat indices of the lattice modes in the closed cutoff ball `|xi| <= rho`.
    pub fn ball_modes(&self) -> &[usize] {
        &self.ball
    }

    pub fn in_ball(&self, idx: usize) -> bool {
        self.xi_sq[idx].sqrt() <= self.spec.cutoff_radius
    }

    pub fn tables(&self) -> &MultiplierTables {
        &self.tables
    }

    /// Replaces one entry of the `Delta^{-1}(1 - chi)` table. Only meant for
    /// fault-injection checks of the self test.
    #[doc(hidden)]
    pub fn corrupted(spec: GridSpec, mode: usize, value: f64) -> Result<Arc<Self>> {
        let mut g = Self::build(spec)?;
        g.tables.inv_laplace_high[mode] = value;
        Ok(Arc::new(g))
    }

    pub(crate) fn nufft(&self) -> &NufftPlan {
        &self.nufft
    }

    /// Unnormalised n-dimensional FFT in place (`inverse` selects the sign).
    pub(crate) fn fft_in_place(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.fft_inverse } else { &self.fft_forward };
        fft_nd(plan.as_ref(), self.spec.points_per_axis, self.dim(), data);
    }

    /// Forward transform with the `1/N^n` normalisation:
    /// `c(k) = N^{-n} sum_x f(x) exp(-i xi(k).x)`.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_in_place(&mut buf, false);
        let scale = 1.0 / self.total as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Inverse transform `f(x) = sum_k c(k) exp(i xi(k).x)`.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = coeffs.to_vec();
        self.fft_in_place(&mut buf, true);
        buf
    }
}

impl MultiplierTables {
    fn from_symbols(xi_sq: &[f64], rho: f64) -> Self {
        let len = xi_sq.len();
        let mut chi = vec![0.0; len];
        let mut inv_laplace_high = vec![0.0; len];
        let mut a_symbol = vec![0.0; len];
        let mut a_inverse = vec![0.0; len];
        for (i, &sq) in xi_sq.iter().enumerate() {
            if sq.sqrt() <= rho {
                chi[i] = 1.0;
                a_symbol[i] = 1.0;
                a_inverse[i] = 1.0;
            } else {
                inv_laplace_high[i] = -1.0 / sq;
                a_symbol[i] = -sq;
                a_inverse[i] = -1.0 / sq;
            }
        }
        MultiplierTables {
            chi,
            inv_laplace_high,
            a_symbol,
            a_inverse,
        }
    }
}

/// Applies a 1D FFT of length `n` along every axis of a row-major cube.
pub(crate) fn fft_nd(plan: &dyn Fft<f64>, n: usize, dim: usize, data: &mut [Complex64]) {
    let total = data.len();
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    // Last axis is contiguous.
    plan.process_with_scratch(data, &mut scratch);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim - 1 {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, value) in line.iter().enumerate() {
                    data[base + j * stride] = *value;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(SpectralGrid::new(GridSpec::desk(4)).is_err());
        assert!(SpectralGrid::new(GridSpec::desk(2).with_points(48)).is_err());
        assert!(SpectralGrid::new(GridSpec::desk(2).with_cutoff(0.5)).is_err());
        assert!(SpectralGrid::new(GridSpec::desk(2).with_points(4).with_cutoff(10.0)).is_err());
        assert!(SpectralGrid::new(GridSpec::desk(2).with_box_length(-1.0)).is_err());
    }

    #[test]
    fn lattice_and_ball() {
        let g = SpectralGrid::new(GridSpec::desk(2).with_points(8)).unwrap();
        assert_eq!(g.len(), 64);
        // rho = 1.5 on L = 2 pi: the ball holds k in {-1,0,1}^2.
        assert_eq!(g.ball_modes().len(), 9);
        let idx = g.mode_index(&[-4, 3]);
        assert_eq!(g.mode(idx), vec![-4, 3]);
        assert_eq!(g.xi_derivative(0)[idx], 0.0);
        assert_eq!(g.xi_derivative(1)[idx], 3.0);
        assert_eq!(g.mode(g.conjugate_index(g.mode_index(&[1, -2]))), vec![-1, 2]);
        assert!((g.coordinate(g.mode_index(&[2, 3]), 0) - 2.0 * g.spacing()).abs() < 1e-15);
    }
}
