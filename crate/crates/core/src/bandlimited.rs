//! Fields whose spectrum lies in the closed cutoff ball. They are finite
//! trigonometric sums and can be evaluated exactly anywhere in space.

use std::sync::Arc;

use num_complex::Complex64;

use crate::field::Field;
use crate::grid::SpectralGrid;

/// One retained lattice mode with its coefficient per component.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMode {
    pub k: Vec<i64>,
    pub xi: Vec<f64>,
    pub coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct BandLimitedField {
    grid: Arc<SpectralGrid>,
    components: usize,
    modes: Vec<BandMode>,
}

impl BandLimitedField {
    /// Collects the ball modes of `coeffs` (one flat coefficient array per component).
    pub fn from_ball_coefficients(grid: &Arc<SpectralGrid>, coeffs: &[Vec<Complex64>]) -> Self {
        let modes = grid
            .ball_modes()
            .iter()
            .map(|&idx| BandMode {
                k: grid.mode(idx),
                xi: (0..grid.dim()).map(|a| grid.xi(a)[idx]).collect(),
                coeffs: coeffs.iter().map(|c| c[idx]).collect(),
            })
            .collect();
        BandLimitedField {
            grid: Arc::clone(grid),
            components: coeffs.len(),
            modes,
        }
    }

    /// Builds from explicit modes; modes outside the ball are dropped.
    pub fn from_modes(grid: &Arc<SpectralGrid>, components: usize, modes: Vec<BandMode>) -> Self {
        let rho = grid.cutoff_radius();
        let modes = modes
            .into_iter()
            .filter(|m| m.xi.iter().map(|x| x * x).sum::<f64>().sqrt() <= rho)
            .collect();
        BandLimitedField {
            grid: Arc::clone(grid),
            components,
            modes,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn modes(&self) -> &[BandMode] {
        &self.modes
    }

    /// Exact evaluation at one point (any point of space; the sum is periodic).
    pub fn evaluate_at(&self, point: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.components];
        for m in &self.modes {
            let phase: f64 = m.xi.iter().zip(point).map(|(a, b)| a * b).sum();
            let e = Complex64::from_polar(1.0, phase);
            for (o, c) in out.iter_mut().zip(&m.coeffs) {
                *o += (c * e).re;
            }
        }
        out
    }

    /// Exact evaluation at many points given per axis; returns one vector per component.
    pub fn evaluate(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = points.first().map_or(0, Vec::len);
        let mut out = vec![vec![0.0; m]; self.components];
        let mut p = vec![0.0; points.len()];
        for i in 0..m {
            for (a, pa) in p.iter_mut().enumerate() {
                *pa = points[a][i];
            }
            for (c, v) in self.evaluate_at(&p).into_iter().enumerate() {
                out[c][i] = v;
            }
        }
        out
    }

    /// Grid representation.
    pub fn to_field(&self) -> Field {
        let len = self.grid.len();
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); len]; self.components];
        for m in &self.modes {
            let idx = self.grid.mode_index(&m.k);
            for (c, v) in m.coeffs.iter().enumerate() {
                coeffs[c][idx] = *v;
            }
        }
        Field::from_spectral(&self.grid, coeffs)
    }
}

/// Free-function form of [`BandLimitedField::evaluate`].
pub fn evaluate_bandlimited(g: &BandLimitedField, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    g.evaluate(points)
}
