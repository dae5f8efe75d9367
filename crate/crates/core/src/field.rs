//! Scalar and vector fields sampled on a [`SpectralGrid`].

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{FlowError, Result};
use crate::grid::SpectralGrid;

/// Grid samples of a scalar (`components == 1`) or vector field, with a lazily
/// filled cache of Fourier coefficients.
///
/// Any mutation of the physical samples through [`Field::values_mut`] drops the
/// spectral cache, so both representations never disagree.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<SpectralGrid>,
    values: Vec<Vec<f64>>,
    spectral: OnceLock<Vec<Vec<Complex64>>>,
}

impl Field {
    pub fn zeros(grid: &Arc<SpectralGrid>, components: usize) -> Self {
        Field::from_raw(grid, vec![vec![0.0; grid.len()]; components])
    }

    /// Builds a field from per-component samples, rejecting wrong lengths or non-finite values.
    pub fn from_values(grid: &Arc<SpectralGrid>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(FlowError::InvalidField("field needs at least one component".into()));
        }
        if values.iter().any(|c| c.len() != grid.len()) {
            return Err(FlowError::InvalidField(format!(
                "component length does not match grid size {}",
                grid.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(FlowError::InvalidField("non-finite sample".into()));
        }
        Ok(Field::from_raw(grid, values))
    }

    pub(crate) fn from_raw(grid: &Arc<SpectralGrid>, values: Vec<Vec<f64>>) -> Self {
        Field {
            grid: Arc::clone(grid),
            values,
            spectral: OnceLock::new(),
        }
    }

    /// Scalar field sampled from a function of the grid coordinates.
    pub fn scalar_from_fn(grid: &Arc<SpectralGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                for (a, xa) in x.iter_mut().enumerate() {
                    *xa = grid.coordinate(i, a);
                }
                f(&x)
            })
            .collect();
        Field::from_raw(grid, vec![values])
    }

    /// Vector field with `dim` components sampled from a function of the coordinates.
    pub fn vector_from_fn(grid: &Arc<SpectralGrid>, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let dim = grid.dim();
        let mut values = vec![vec![0.0; grid.len()]; dim];
        let mut x = vec![0.0; dim];
        for i in 0..grid.len() {
            for (a, xa) in x.iter_mut().enumerate() {
                *xa = grid.coordinate(i, a);
            }
            let v = f(&x);
            for a in 0..dim {
                values[a][i] = v[a];
            }
        }
        Field::from_raw(grid, values)
    }

    /// Builds a real field from Fourier coefficients.
    ///
    /// The physical samples are the real part of the inverse transform; the
    /// cached spectrum is the Hermitian part of `coeffs`, which is exactly the
    /// transform of those samples.
    pub fn from_spectral(grid: &Arc<SpectralGrid>, coeffs: Vec<Vec<Complex64>>) -> Self {
        let mut values = Vec::with_capacity(coeffs.len());
        let mut spectra = Vec::with_capacity(coeffs.len());
        for c in coeffs {
            let phys = grid.inverse(&c);
            values.push(phys.iter().map(|z| z.re).collect());
            let sym: Vec<Complex64> = (0..c.len())
                .map(|i| 0.5 * (c[i] + c[grid.conjugate_index(i)].conj()))
                .collect();
            spectra.push(sym);
        }
        let field = Field::from_raw(grid, values);
        let _ = field.spectral.set(spectra);
        field
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.values[c]
    }

    /// Mutable access to the samples; invalidates the spectral cache.
    pub fn values_mut(&mut self) -> &mut [Vec<f64>] {
        self.spectral = OnceLock::new();
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Vec<f64>> {
        self.values
    }

    /// Fourier coefficients per component (computed on first use).
    pub fn spectral(&self) -> &[Vec<Complex64>] {
        self.spectral
            .get_or_init(|| self.values.iter().map(|v| self.grid.forward(v)).collect())
    }

    pub fn has_spectral_cache(&self) -> bool {
        self.spectral.get().is_some()
    }

    /// Extracts one component as a scalar field.
    pub fn scalar(&self, c: usize) -> Field {
        let f = Field::from_raw(&self.grid, vec![self.values[c].clone()]);
        if let Some(s) = self.spectral.get() {
            let _ = f.spectral.set(vec![s[c].clone()]);
        }
        f
    }

    /// Stacks scalar fields into a vector field.
    pub fn stack(parts: &[Field]) -> Result<Field> {
        let grid = parts
            .first()
            .ok_or_else(|| FlowError::InvalidField("nothing to stack".into()))?
            .grid()
            .clone();
        let mut values = Vec::new();
        for p in parts {
            if **p.grid() != *grid {
                return Err(FlowError::GridMismatch);
            }
            values.extend(p.values.iter().cloned());
        }
        Ok(Field::from_raw(&grid, values))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(FlowError::GridMismatch)
        }
    }

    fn zip_with(&self, other: &Field, op: impl Fn(f64, f64) -> f64) -> Field {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| op(x, y)).collect())
            .collect();
        Field::from_raw(&self.grid, values)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        self.zip_with(other, |a, b| a + s * b)
    }

    pub fn scale(&self, s: f64) -> Field {
        let values = self
            .values
            .iter()
            .map(|c| c.iter().map(|v| s * v).collect())
            .collect();
        Field::from_raw(&self.grid, values)
    }

    /// Pointwise product of two scalar fields (or componentwise for equal shapes).
    pub fn mul(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a * b)
    }

    /// Largest absolute sample over all components.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Grid L2 norm `sqrt(h^n sum_x |f(x)|^2)`, summed over components.
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Grid L2 inner product.
    pub fn inner(&self, other: &Field) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        s * self.grid.cell_volume()
    }

    /// Box average of each component.
    pub fn mean(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn mutation_clears_cache() {
        let g = SpectralGrid::new(GridSpec::desk(2).with_points(8)).unwrap();
        let mut f = Field::scalar_from_fn(&g, |x| x[0].sin());
        let _ = f.spectral();
        assert!(f.has_spectral_cache());
        f.values_mut()[0][0] = 3.0;
        assert!(!f.has_spectral_cache());
        assert!((f.spectral()[0][0].re - f.mean()[0]).abs() < 1e-15);
    }

    #[test]
    fn from_values_validates() {
        let g = SpectralGrid::new(GridSpec::desk(2).with_points(8)).unwrap();
        assert!(Field::from_values(&g, vec![vec![0.0; 3]]).is_err());
        assert!(Field::from_values(&g, vec![vec![f64::NAN; 64]]).is_err());
        assert!(Field::from_values(&g, vec![]).is_err());
        assert!(Field::from_values(&g, vec![vec![1.0; 64]]).is_ok());
    }

    #[test]
    fn from_spectral_keeps_real_part_consistent() {
        let g = SpectralGrid::new(GridSpec::desk(2).with_points(8)).unwrap();
        let mut c = vec![Complex64::new(0.0, 0.0); g.len()];
        c[g.mode_index(&[1, 0])] = Complex64::new(0.0, 1.0);
        let f = Field::from_spectral(&g, vec![c]);
        let fresh = g.forward(f.component(0));
        for (a, b) in fresh.iter().zip(&f.spectral()[0]) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
