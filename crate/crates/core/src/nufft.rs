//! Off-grid evaluation of trigonometric polynomials.
//!
//! Two routes evaluate `f(x) = Re sum_k c(k) exp(i xi(k).x)` at arbitrary points:
//!
//! * [`direct_sum`]: the finite sum itself, `O(N^n)` per point.
//! * [`OffGridInterpolant`]: a type-2 non-uniform FFT. The coefficients are
//!   deconvolved by the Fourier transform of an "exponential of semicircle"
//!   kernel, zero-padded onto a grid twice as fine, transformed back, and the
//!   result is convolved with the kernel at each target point. With 16 kernel
//!   points per axis the error is at the `1e-14` level relative to `sum |c(k)|`.
//!
//! A Nyquist coefficient is shared evenly between `-N/2` and `+N/2` on every
//! axis where it sits, so a real Nyquist term evaluates as a product of cosines
//! and the interpolant of real data stays real.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{fft_nd, SpectralGrid};

const KERNEL_WIDTH: usize = 16;
const BETA_PER_POINT: f64 = 2.30;
const QUADRATURE_NODES: usize = 200;

pub(crate) struct NufftPlan {
    n: usize,
    fine: usize,
    width: usize,
    beta: f64,
    fine_spacing: f64,
    // deconvolution factor by coarse array index along one axis
    deconv: Vec<f64>,
    fine_inverse: Arc<dyn Fft<f64>>,
}

impl NufftPlan {
    pub(crate) fn new(n: usize, box_length: f64, planner: &mut FftPlanner<f64>) -> Self {
        let fine = 2 * n;
        let width = KERNEL_WIDTH;
        let beta = BETA_PER_POINT * width as f64;
        let half = width as f64 / 2.0;
        let (nodes, weights) = gauss_legendre(QUADRATURE_NODES);
        let kernel_ft = |nu: f64| -> f64 {
            nodes
                .iter()
                .zip(&weights)
                .map(|(&z, &w)| w * es_kernel(beta, z) * (nu * half * z).cos())
                .sum::<f64>()
                * half
        };
        let deconv = (0..n)
            .map(|i| {
                let k = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
                1.0 / kernel_ft(PI * k / n as f64)
            })
            .collect();
        NufftPlan {
            n,
            fine,
            width,
            beta,
            fine_spacing: box_length / fine as f64,
            deconv,
            fine_inverse: planner.plan_fft_inverse(fine),
        }
    }

    /// Kernel weights along one axis for coordinate `x`; writes wrapped fine indices.
    #[inline]
    fn axis_weights(&self, x: f64, idx: &mut [usize], w: &mut [f64]) {
        let t = x / self.fine_spacing;
        let base = t.floor();
        let half = (self.width / 2) as f64;
        let fine = self.fine as i64;
        let first = base as i64 - (self.width / 2) as i64 + 1;
        for j in 0..self.width {
            let l = first + j as i64;
            let z = (t - l as f64) / half;
            w[j] = if z.abs() < 1.0 { es_kernel(self.beta, z) } else { 0.0 };
            idx[j] = l.rem_euclid(fine) as usize;
        }
    }
}

#[inline]
fn es_kernel(beta: f64, z: f64) -> f64 {
    let s = 1.0 - z * z;
    if s <= 0.0 {
        0.0
    } else {
        (beta * (s.sqrt() - 1.0)).exp()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..order {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = order as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[order - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fast off-grid evaluator for a fixed set of coefficient arrays sharing one grid.
pub struct OffGridInterpolant {
    grid: Arc<SpectralGrid>,
    arrays: Vec<Vec<f64>>,
}

impl OffGridInterpolant {
    /// Prepares the oversampled grids for each coefficient array (flat, `N^n` long).
    pub fn from_coefficients(grid: &Arc<SpectralGrid>, coeffs: &[Vec<Complex64>]) -> Self {
        let plan = grid.nufft();
        let dim = grid.dim();
        let n = plan.n;
        let fine = plan.fine;
        let fine_total = fine.pow(dim as u32);
        let half_n = (n / 2) as i64;
        let arrays = coeffs
            .iter()
            .map(|c| {
                let mut buf = vec![Complex64::new(0.0, 0.0); fine_total];
                for (idx, &value) in c.iter().enumerate() {
                    if value == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let mut rem = idx;
                    let mut k = [0i64; 3];
                    let mut factor = 1.0;
                    for a in (0..dim).rev() {
                        let i = rem % n;
                        rem /= n;
                        k[a] = if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
                        factor *= plan.deconv[i];
                    }
                    let scaled = value * factor;
                    // Nyquist components are split evenly between -N/2 and +N/2.
                    let nyq: Vec<usize> = (0..dim).filter(|&a| k[a] == -half_n).collect();
                    let copies = 1usize << nyq.len();
                    let share = scaled / copies as f64;
                    for mask in 0..copies {
                        let mut kk = k;
                        for (bit, &a) in nyq.iter().enumerate() {
                            if mask & (1 << bit) != 0 {
                                kk[a] = half_n;
                            }
                        }
                        let f = (0..dim).fold(0usize, |acc, a| {
                            acc * fine + kk[a].rem_euclid(fine as i64) as usize
                        });
                        buf[f] += share;
                    }
                }
                fft_nd(plan.fine_inverse.as_ref(), fine, dim, &mut buf);
                buf.into_iter().map(|z| z.re).collect()
            })
            .collect();
        OffGridInterpolant {
            grid: Arc::clone(grid),
            arrays,
        }
    }

    pub fn array_count(&self) -> usize {
        self.arrays.len()
    }

    /// Evaluates every array at one point; `out` must hold `array_count()` values.
    pub fn evaluate_at(&self, point: &[f64], out: &mut [f64]) {
        let plan = self.grid.nufft();
        let l = self.grid.box_length();
        let w = plan.width;
        let fine = plan.fine;
        let mut idx = [[0usize; KERNEL_WIDTH]; 3];
        let mut wt = [[0.0f64; KERNEL_WIDTH]; 3];
        for (a, &x) in point.iter().enumerate() {
            plan.axis_weights(x.rem_euclid(l), &mut idx[a], &mut wt[a]);
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        match self.grid.dim() {
            2 => {
                for i in 0..w {
                    let wx = wt[0][i];
                    if wx == 0.0 {
                        continue;
                    }
                    let row = idx[0][i] * fine;
                    for (arr, o) in self.arrays.iter().zip(out.iter_mut()) {
                        let line = &arr[row..row + fine];
                        let mut acc = 0.0;
                        for j in 0..w {
                            acc += wt[1][j] * line[idx[1][j]];
                        }
                        *o += wx * acc;
                    }
                }
            }
            _ => {
                for i in 0..w {
                    let wx = wt[0][i];
                    if wx == 0.0 {
                        continue;
                    }
                    for j in 0..w {
                        let wxy = wx * wt[1][j];
                        if wxy == 0.0 {
                            continue;
                        }
                        let row = (idx[0][i] * fine + idx[1][j]) * fine;
                        for (arr, o) in self.arrays.iter().zip(out.iter_mut()) {
                            let line = &arr[row..row + fine];
                            let mut acc = 0.0;
                            for m in 0..w {
                                acc += wt[2][m] * line[idx[2][m]];
                            }
                            *o += wxy * acc;
                        }
                    }
                }
            }
        }
    }

    /// Evaluates every array at every point; points are given per axis.
    pub fn evaluate(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = points.first().map_or(0, Vec::len);
        let dim = self.grid.dim();
        let mut out = vec![vec![0.0; m]; self.arrays.len()];
        let mut p = vec![0.0; dim];
        let mut vals = vec![0.0; self.arrays.len()];
        for i in 0..m {
            for a in 0..dim {
                p[a] = points[a][i];
            }
            self.evaluate_at(&p, &mut vals);
            for (o, v) in out.iter_mut().zip(&vals) {
                o[i] = *v;
            }
        }
        out
    }
}

/// Exact trigonometric sum `Re sum_k c(k) exp(i xi(k).x)` at one point.
///
/// Along an axis where `k = -N/2` the exponential is replaced by the average of
/// the `+-N/2` exponentials, the same Nyquist convention as the interpolant.
pub fn direct_sum(grid: &SpectralGrid, coeffs: &[Complex64], point: &[f64]) -> f64 {
    let n = grid.points_per_axis();
    let dim = grid.dim();
    let base = 2.0 * PI / grid.box_length();
    let phases: Vec<Vec<Complex64>> = point
        .iter()
        .map(|&x| {
            (0..n)
                .map(|i| {
                    if i == n / 2 {
                        Complex64::new((base * i as f64 * x).cos(), 0.0)
                    } else {
                        let k = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
                        Complex64::from_polar(1.0, base * k * x)
                    }
                })
                .collect()
        })
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, c) in coeffs.iter().enumerate() {
        let mut rem = idx;
        let mut ph = Complex64::new(1.0, 0.0);
        for a in (0..dim).rev() {
            ph *= phases[a][rem % n];
            rem /= n;
        }
        acc += c * ph;
    }
    acc.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.4).abs() < 1e-14);
    }

    #[test]
    fn matches_direct_sum_on_random_coefficients() {
        let grid = SpectralGrid::new(GridSpec::desk(2).with_points(16)).unwrap();
        let values: Vec<f64> = (0..grid.len()).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let c = grid.forward(&values);
        let interp = OffGridInterpolant::from_coefficients(&grid, std::slice::from_ref(&c));
        let scale: f64 = c.iter().map(|z| z.norm()).sum();
        for &(x, y) in &[(0.1, 0.2), (3.3, 6.1), (-1.7, 12.9), (2.0 * PI - 1e-9, 0.0)] {
            let mut out = [0.0];
            interp.evaluate_at(&[x, y], &mut out);
            let exact = direct_sum(&grid, &c, &[x, y]);
            assert!((out[0] - exact).abs() <= 1e-13 * scale, "{} vs {}", out[0], exact);
        }
        // grid points reproduce the samples
        let mut out = [0.0];
        interp.evaluate_at(&[grid.coordinate(37, 0), grid.coordinate(37, 1)], &mut out);
        assert!((out[0] - values[37]).abs() < 1e-13 * scale);
    }

    #[test]
    fn three_dimensional_interpolant() {
        let grid = SpectralGrid::new(GridSpec::desk(3).with_points(8)).unwrap();
        let values: Vec<f64> = (0..grid.len()).map(|i| ((i * 31) % 17) as f64 / 8.0 - 1.0).collect();
        let c = grid.forward(&values);
        let interp = OffGridInterpolant::from_coefficients(&grid, std::slice::from_ref(&c));
        let p = [0.3, 4.4, -2.2];
        let mut out = [0.0];
        interp.evaluate_at(&p, &mut out);
        let scale: f64 = c.iter().map(|z| z.norm()).sum();
        assert!((out[0] - direct_sum(&grid, &c, &p)).abs() < 1e-13 * scale);
    }
}
