#![allow(dead_code)]

use std::sync::Arc;

use lagrange_core::field::Field;
use lagrange_core::grid::{GridSpec, SpectralGrid};
use lagrange_core::presets;

pub fn grid(n: usize) -> Arc<SpectralGrid> {
    SpectralGrid::new(GridSpec::desk(2).with_points(n)).unwrap()
}

pub fn grid_rho(n: usize, rho: f64) -> Arc<SpectralGrid> {
    SpectralGrid::new(GridSpec::desk(2).with_points(n).with_cutoff(rho)).unwrap()
}

/// Smooth vector field with modes `|k| <= band`.
pub fn smooth(grid: &Arc<SpectralGrid>, seed: u64, band: f64, amplitude: f64) -> Field {
    presets::random_band(grid, seed, 1.0, band, amplitude, false)
}

pub fn divfree(grid: &Arc<SpectralGrid>, seed: u64) -> Field {
    presets::random_divfree(grid, seed, 2.0, 0.5)
}

/// Scalar field from the first component of [`smooth`].
pub fn smooth_scalar(grid: &Arc<SpectralGrid>, seed: u64, band: f64) -> Field {
    smooth(grid, seed, band, 1.0).scalar(0)
}

/// Relative sup-norm difference.
pub fn rel(a: &Field, b: &Field) -> f64 {
    a.sub(b).sup_norm() / b.sup_norm().max(f64::MIN_POSITIVE)
}
