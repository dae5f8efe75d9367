//! Browser bindings: a live geodesic flow with its deformed lattice, the
//! two-part pressure split, and the low-pass cutoff filter.
//!
//! Fields cross the boundary as flat `Float64Array`s in grid order
//! (index `i * n + j` for the point `(i, j) * L / n`).

use std::sync::Arc;

use lagrange_core::field::Field;
use lagrange_core::geodesic::{integrate_geodesic_from, reconstruct_velocity, GeodesicConfig, GeodesicState};
use lagrange_core::grid::{GridSpec, SpectralGrid};
use lagrange_core::pressure::PressureOperator;
use lagrange_core::presets::{self, Preset};
use lagrange_core::spectral;
use wasm_bindgen::prelude::*;

fn grid(n: usize, rho: f64) -> Result<Arc<SpectralGrid>, String> {
    if !(4..=128).contains(&n) {
        return Err(format!("grid size {n} outside 4..=128"));
    }
    SpectralGrid::new(GridSpec::desk(2).with_points(n).with_cutoff(rho)).map_err(|e| e.to_string())
}

fn preset(name: &str, amplitude: f64, seed: u64) -> Result<Preset, String> {
    Ok(match name {
        "zero" => Preset::Zero,
        "shear" => Preset::Shear { amplitude },
        "taylor_green" => Preset::TaylorGreen { amplitude },
        "random_divfree" => Preset::RandomDivFree {
            seed,
            decay: 2.0,
            amplitude,
        },
        other => return Err(format!("unknown preset `{other}`")),
    })
}

/// A geodesic run advanced on demand.
#[wasm_bindgen]
pub struct Flow {
    grid: Arc<SpectralGrid>,
    state: GeodesicState,
    dt: f64,
}

#[wasm_bindgen]
impl Flow {
    #[wasm_bindgen(constructor)]
    pub fn new(preset_name: &str, amplitude: f64, seed: u32, n: usize, dt: f64) -> Result<Flow, String> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err("time step must be positive".into());
        }
        let grid = grid(n, 1.5)?;
        let u0 = preset(preset_name, amplitude, seed as u64)?.build(&grid);
        Ok(Flow {
            state: GeodesicState::initial(&u0),
            grid,
            dt,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.spec().points_per_axis
    }

    pub fn box_length(&self) -> f64 {
        self.grid.spec().box_length
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    /// Takes `steps` RK4 steps. On failure the state is left unchanged.
    pub fn advance(&mut self, steps: usize) -> Result<(), String> {
        let cfg = GeodesicConfig::new(self.dt * steps as f64, self.dt).with_record_every(usize::MAX);
        let run = integrate_geodesic_from(self.state.clone(), &cfg).map_err(|e| e.to_string())?;
        self.state = run.final_state().clone();
        Ok(())
    }

    /// Images `phi(x)` of the lattice points, interleaved `x, y`, not wrapped into the box.
    pub fn lattice(&self) -> Vec<f64> {
        let d = self.state.phi.displacement();
        let mut out = Vec::with_capacity(2 * self.grid.len());
        for i in 0..self.grid.len() {
            out.push(self.grid.coordinate(i, 0) + d.component(0)[i]);
            out.push(self.grid.coordinate(i, 1) + d.component(1)[i]);
        }
        out
    }

    /// Vorticity of the Eulerian velocity `phi_t o phi^{-1}`.
    pub fn vorticity(&self) -> Result<Vec<f64>, String> {
        let u = reconstruct_velocity(&self.state).map_err(|e| e.to_string())?;
        Ok(spectral::curl_2d(&u).into_values().swap_remove(0))
    }

    pub fn energy(&self) -> Result<f64, String> {
        let u = reconstruct_velocity(&self.state).map_err(|e| e.to_string())?;
        Ok(0.5 * u.inner(&u))
    }

    /// `[min det, max det]` of the flow-map Jacobian.
    pub fn det_range(&self) -> Result<Vec<f64>, String> {
        let jac = self.state.phi.jacobian().map_err(|e| e.to_string())?;
        Ok(vec![jac.min_det(), jac.max_det()])
    }
}

/// High-mode part, low-mode part and total pressure `p = -(B1 + B2)` of a preset,
/// concatenated.
#[wasm_bindgen]
pub fn pressure_split(preset_name: &str, amplitude: f64, seed: u32, n: usize, rho: f64) -> Result<Vec<f64>, String> {
    let grid = grid(n, rho)?;
    let u = preset(preset_name, amplitude, seed as u64)?.build(&grid);
    let op = PressureOperator::new(&grid);
    let b1 = op.b1(&u, &u).map_err(|e| e.to_string())?;
    let b2 = op.b2(&u, &u).map_err(|e| e.to_string())?;
    let p = b1.add(&b2).scale(-1.0);
    Ok([b1, b2, p].into_iter().flat_map(|f| f.into_values().swap_remove(0)).collect())
}

/// A random smooth scalar field and its image under the cutoff `chi(D)`, concatenated.
#[wasm_bindgen]
pub fn chi_filter(seed: u32, n: usize, rho: f64) -> Result<Vec<f64>, String> {
    let grid = grid(n, rho)?;
    let f: Field = presets::random_band(&grid, seed as u64, 1.0, 0.25 * n as f64, 1.0, false).scalar(0);
    let low = spectral::chi_field(&f);
    Ok(f.into_values().swap_remove(0).into_iter().chain(low.into_values().swap_remove(0)).collect())
}
