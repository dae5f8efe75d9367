//! Named initial velocities.
//!
//! Closed forms (box `[0, L)^n`, `s = 2 pi / L`):
//! * `zero`: `u = 0`; every flow map stays the identity.
//! * `shear`: `u = (a sin(s y), 0[, 0])`; a steady solution with zero pressure,
//!   the geodesic is `phi(t) = (x + t a sin(s y), y)`.
//! * `taylor_green`: `u = a (sin(s x) cos(s y), -cos(s x) sin(s y))` in 2D, a steady
//!   solution with `p = a^2 (cos 2sx + cos 2sy) / 4`; in 3D the classical
//!   `(sin x cos y cos z, -cos x sin y cos z, 0)` field, which is not steady.
//! * `random_divfree`: Leray-projected band-limited noise with amplitudes
//!   proportional to `(1 + |k|^2)^(-decay)`, zero mean, scaled to sup norm `a`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::field::Field;
use crate::grid::SpectralGrid;
use crate::pressure::leray_project;

/// Largest `|k|` excited by [`random_divfree`].
pub const RANDOM_BAND: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Zero,
    Shear { amplitude: f64 },
    TaylorGreen { amplitude: f64 },
    RandomDivFree { seed: u64, decay: f64, amplitude: f64 },
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Zero => "zero",
            Preset::Shear { .. } => "shear",
            Preset::TaylorGreen { .. } => "taylor_green",
            Preset::RandomDivFree { .. } => "random_divfree",
        }
    }

    /// Short identifier including parameters, recorded next to snapshots.
    pub fn identifier(&self) -> String {
        match self {
            Preset::Zero => "zero".into(),
            Preset::Shear { amplitude } => format!("shear(amplitude={amplitude})"),
            Preset::TaylorGreen { amplitude } => format!("taylor_green(amplitude={amplitude})"),
            Preset::RandomDivFree { seed, decay, amplitude } => {
                format!("random_divfree(seed={seed},decay={decay},amplitude={amplitude})")
            }
        }
    }

    pub fn build(&self, grid: &Arc<SpectralGrid>) -> Field {
        match *self {
            Preset::Zero => zero(grid),
            Preset::Shear { amplitude } => shear(grid, amplitude),
            Preset::TaylorGreen { amplitude } => taylor_green(grid, amplitude),
            Preset::RandomDivFree { seed, decay, amplitude } => random_divfree(grid, seed, decay, amplitude),
        }
    }
}

fn wavenumber(grid: &SpectralGrid) -> f64 {
    2.0 * std::f64::consts::PI / grid.box_length()
}

pub fn zero(grid: &Arc<SpectralGrid>) -> Field {
    Field::zeros(grid, grid.dim())
}

pub fn shear(grid: &Arc<SpectralGrid>, amplitude: f64) -> Field {
    let s = wavenumber(grid);
    let dim = grid.dim();
    Field::vector_from_fn(grid, |x| {
        let mut v = vec![0.0; dim];
        v[0] = amplitude * (s * x[1]).sin();
        v
    })
}

pub fn taylor_green(grid: &Arc<SpectralGrid>, amplitude: f64) -> Field {
    let s = wavenumber(grid);
    if grid.dim() == 2 {
        Field::vector_from_fn(grid, |x| {
            let (sx, cx) = (s * x[0]).sin_cos();
            let (sy, cy) = (s * x[1]).sin_cos();
            vec![amplitude * sx * cy, -amplitude * cx * sy]
        })
    } else {
        Field::vector_from_fn(grid, |x| {
            let (sx, cx) = (s * x[0]).sin_cos();
            let (sy, cy) = (s * x[1]).sin_cos();
            let cz = (s * x[2]).cos();
            vec![amplitude * sx * cy * cz, -amplitude * cx * sy * cz, 0.0]
        })
    }
}

/// Stream function `sin(s x) sin(s y)` of the 2D Taylor-Green field (up to the amplitude).
pub fn taylor_green_stream(grid: &SpectralGrid, x: &[f64]) -> f64 {
    let s = wavenumber(grid);
    (s * x[0]).sin() * (s * x[1]).sin()
}

/// Seeded divergence-free random field; deterministic for a given grid and seed.
pub fn random_divfree(grid: &Arc<SpectralGrid>, seed: u64, decay: f64, amplitude: f64) -> Field {
    random_band(grid, seed, decay, RANDOM_BAND, amplitude, true)
}

/// Seeded smooth random field with modes `0 < |k| <= band`, optionally Leray-projected,
/// zero mean, scaled to sup norm `amplitude`.
pub fn random_band(
    grid: &Arc<SpectralGrid>,
    seed: u64,
    decay: f64,
    band: f64,
    amplitude: f64,
    divergence_free: bool,
) -> Field {
    let dim = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; dim];
    // Draw in a resolution-independent order so the field does not depend on N.
    let reach = band.floor() as i64;
    let half = grid.points_per_axis() as i64 / 2;
    let side = (2 * reach + 1) as usize;
    for flat in 0..side.pow(dim as u32) {
        let mut rem = flat;
        let k: Vec<i64> = (0..dim)
            .map(|_| {
                let v = (rem % side) as i64 - reach;
                rem /= side;
                v
            })
            .collect();
        let k2: f64 = k.iter().map(|&v| (v * v) as f64).sum();
        if k2 == 0.0 || k2.sqrt() > band || k.iter().any(|&v| v.abs() >= half) {
            continue;
        }
        let idx = grid.mode_index(&k);
        let weight = (1.0 + k2).powf(-decay);
        for c in coeffs.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c[idx] = Complex64::new(re, im) * weight;
        }
    }
    let mut f = Field::from_spectral(grid, coeffs);
    if divergence_free {
        f = leray_project(&f);
    }
    let sup = f.sup_norm();
    if sup > 0.0 {
        f = f.scale(amplitude / sup);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::spectral;

    #[test]
    fn presets_are_divergence_free() {
        let g = SpectralGrid::new(GridSpec::desk(2).with_points(32)).unwrap();
        for p in [
            Preset::Zero,
            Preset::Shear { amplitude: 1.0 },
            Preset::TaylorGreen { amplitude: 1.0 },
            Preset::RandomDivFree { seed: 1, decay: 2.0, amplitude: 0.5 },
        ] {
            let u = p.build(&g);
            assert!(spectral::divergence(&u).l2_norm() < 1e-12, "{}", p.name());
        }
        let r = random_divfree(&g, 1, 2.0, 0.5);
        assert!((r.sup_norm() - 0.5).abs() < 1e-15);
        assert!(r.mean().iter().all(|m| m.abs() < 1e-15));
        assert_eq!(r.values(), random_divfree(&g, 1, 2.0, 0.5).values());
        assert_ne!(r.values(), random_divfree(&g, 2, 2.0, 0.5).values());
        // the same field at another resolution, up to the sup normalisation on the grid
        let fine = SpectralGrid::new(GridSpec::desk(2).with_points(64)).unwrap();
        let rf = random_divfree(&fine, 1, 2.0, 0.5);
        let x = [0.7, 2.9];
        let a = crate::nufft::direct_sum(&g, &r.spectral()[0], &x);
        let b = crate::nufft::direct_sum(&fine, &rf.spectral()[0], &x);
        assert!((a - b).abs() < 1e-2 * a.abs().max(0.1));
    }
}
