//! The Christoffel map `Gamma_phi(v, w) = grad B(v o phi^{-1}, w o phi^{-1}) o phi`
//! and the geodesic equation `phi'' = Gamma_phi(phi', phi')`.
//!
//! Two independent evaluation strategies are provided:
//!
//! * [`GammaStrategy::Pullback`] inverts `phi` numerically, pushes `v`, `w` to
//!   Eulerian coordinates, applies `grad B` there and composes back with `phi`.
//! * [`GammaStrategy::Conjugated`] never forms `phi^{-1}`. Derivatives are
//!   conjugated through `C = [dphi]^{-1}`, `chi(D)` is conjugated by a
//!   change-of-variables quadrature onto the ball modes followed by exact
//!   band-limited evaluation at `phi(x)`, and the high-mode inverse Laplacian is
//!   obtained from `Delta^{-1}(1 - chi) = A^{-1} - chi` with
//!   `A = chi + Delta (1 - chi)`, solving the conjugated operator
//!   `R_phi A R_phi^{-1}` by GMRES preconditioned with the multiplier `A^{-1}`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::diagnostics::{relative_drift, DiagnosticsRecord};
use crate::diffeo::{compose_field, invert_with, DiffeoMap, InversionOptions, JacobianData};
use crate::error::{FlowError, Result};
use crate::field::Field;
use crate::grid::SpectralGrid;
use crate::krylov::gmres;
use crate::pressure::PressureOperator;
use crate::spectral::{self, SobolevIndex};

/// Solver parameters of the conjugated strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatedParams {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for ConjugatedParams {
    fn default() -> Self {
        ConjugatedParams {
            tol: 1e-10,
            max_iter: 200,
            restart: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GammaStrategy {
    #[default]
    Pullback,
    Conjugated(ConjugatedParams),
}

impl GammaStrategy {
    pub fn conjugated() -> Self {
        GammaStrategy::Conjugated(ConjugatedParams::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            GammaStrategy::Pullback => "pullback",
            GammaStrategy::Conjugated(_) => "conjugated",
        }
    }
}

/// Lagrangian state `(phi, d phi / dt)` at a given time.
#[derive(Debug, Clone)]
pub struct GeodesicState {
    pub time: f64,
    pub phi: DiffeoMap,
    pub phi_t: Field,
}

impl GeodesicState {
    /// `phi = id`, `phi_t = u0` at `t = 0`.
    pub fn initial(u0: &Field) -> Self {
        GeodesicState {
            time: 0.0,
            phi: DiffeoMap::identity(u0.grid()),
            phi_t: u0.clone(),
        }
    }
}

/// Evaluator of the Christoffel map on one grid.
#[derive(Debug, Clone)]
pub struct Christoffel {
    pressure: PressureOperator,
    inversion: InversionOptions,
}

impl Christoffel {
    pub fn new(grid: &Arc<SpectralGrid>) -> Self {
        Christoffel {
            pressure: PressureOperator::new(grid),
            inversion: InversionOptions::default(),
        }
    }

    pub fn with_inversion(mut self, opts: InversionOptions) -> Self {
        self.inversion = opts;
        self
    }

    pub fn pressure(&self) -> &PressureOperator {
        &self.pressure
    }

    pub fn gamma(&self, phi: &DiffeoMap, v: &Field, w: &Field, strategy: GammaStrategy) -> Result<Field> {
        Ok(self.gamma_hinted(phi, v, w, strategy, None)?.0)
    }

    /// Evaluates `Gamma`; for the pullback route also returns `phi^{-1}`.
    /// `hint` seeds the Newton inversion.
    pub(crate) fn gamma_hinted(
        &self,
        phi: &DiffeoMap,
        v: &Field,
        w: &Field,
        strategy: GammaStrategy,
        hint: Option<&Field>,
    ) -> Result<(Field, Option<DiffeoMap>)> {
        v.same_grid(phi.displacement())?;
        w.same_grid(phi.displacement())?;
        match strategy {
            GammaStrategy::Pullback => {
                let psi = invert_with(phi, &self.inversion, hint)?;
                let ve = compose_field(v, &psi)?;
                let we = if std::ptr::eq(v, w) { ve.clone() } else { compose_field(w, &psi)? };
                let force = self.pressure.grad_b(&ve, &we)?;
                Ok((compose_field(&force, phi)?, Some(psi)))
            }
            GammaStrategy::Conjugated(params) => {
                let jac = phi.jacobian()?;
                let ctx = Conjugation::new(phi, &jac);
                Ok((ctx.gamma(v, w, &params)?, None))
            }
        }
    }
}

/// `Gamma_phi(v, w)` with a freshly built evaluator.
pub fn gamma(phi: &DiffeoMap, v: &Field, w: &Field, strategy: GammaStrategy) -> Result<Field> {
    Christoffel::new(phi.grid()).gamma(phi, v, w, strategy)
}

/// Operators conjugated by a fixed flow map, all acting on Lagrangian grid samples.
pub struct Conjugation<'a> {
    grid: Arc<SpectralGrid>,
    jac: &'a JacobianData,
    /// `exp(i xi_m . phi(y))` per ball mode `m`.
    phases: Vec<Vec<Complex64>>,
    ball_xi: Vec<Vec<f64>>,
}

impl<'a> Conjugation<'a> {
    pub fn new(phi: &DiffeoMap, jac: &'a JacobianData) -> Self {
        let grid = phi.grid().clone();
        let dim = grid.dim();
        let pts = phi.points();
        let ball_xi: Vec<Vec<f64>> = grid
            .ball_modes()
            .iter()
            .map(|&idx| (0..dim).map(|a| grid.xi(a)[idx]).collect())
            .collect();
        let phases = ball_xi
            .iter()
            .map(|xi| {
                (0..grid.len())
                    .map(|i| {
                        let arg: f64 = (0..dim).map(|a| xi[a] * pts[a][i]).sum();
                        Complex64::from_polar(1.0, arg)
                    })
                    .collect()
            })
            .collect();
        Conjugation {
            grid,
            jac,
            phases,
            ball_xi,
        }
    }

    /// Ball-mode coefficients of `g o phi^{-1}` by the change of variables
    /// `x = phi(y)`: `N^{-n} sum_y g(y) det(dphi)(y) exp(-i xi . phi(y))`.
    pub fn pushforward_coefficients(&self, g: &[f64]) -> Vec<Complex64> {
        let det = self.jac.det();
        let scale = 1.0 / self.grid.len() as f64;
        self.phases
            .iter()
            .map(|ph| {
                let s = ph
                    .iter()
                    .zip(g)
                    .zip(det)
                    .fold(Complex64::new(0.0, 0.0), |acc, ((e, gv), dv)| acc + e.conj() * (gv * dv));
                s * scale
            })
            .collect()
    }

    /// Exact evaluation of a ball-mode expansion at the points `phi(y)`.
    pub fn evaluate_at_images(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (c, ph) in coeffs.iter().zip(&self.phases) {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, e) in out.iter_mut().zip(ph) {
                *o += c.re * e.re - c.im * e.im;
            }
        }
        out
    }

    /// `R_phi chi(D) R_phi^{-1} g`.
    pub fn chi(&self, g: &[f64]) -> Vec<f64> {
        self.evaluate_at_images(&self.pushforward_coefficients(g))
    }

    /// `R_phi grad R_phi^{-1} g` for a scalar sample vector.
    pub fn gradient(&self, g: &[f64]) -> Vec<Vec<f64>> {
        let dim = self.grid.dim();
        let f = Field::from_raw(&self.grid, vec![g.to_vec()]);
        let grads: Vec<Field> = (0..dim).map(|j| spectral::derivative(&f, j)).collect();
        (0..dim)
            .map(|k| {
                let mut out = vec![0.0; g.len()];
                for (j, gj) in grads.iter().enumerate() {
                    let c = self.jac.inverse_entry(j, k);
                    for ((o, a), b) in out.iter_mut().zip(gj.component(0)).zip(c) {
                        *o += a * b;
                    }
                }
                out
            })
            .collect()
    }

    /// `R_phi Delta R_phi^{-1} g = sum_k (R d_k R^{-1})^2 g`.
    pub fn laplacian(&self, g: &[f64]) -> Vec<f64> {
        let first = self.gradient(g);
        let mut out = vec![0.0; g.len()];
        for (k, gk) in first.iter().enumerate() {
            let second = self.gradient(gk);
            out.iter_mut().zip(&second[k]).for_each(|(o, v)| *o += v);
        }
        out
    }

    /// `R_phi A R_phi^{-1} h = R chi R^{-1} h + (R Delta R^{-1}) (h - R chi R^{-1} h)`.
    pub fn apply_a(&self, h: &[f64]) -> Vec<f64> {
        let low = self.chi(h);
        let high: Vec<f64> = h.iter().zip(&low).map(|(a, b)| a - b).collect();
        let lap = self.laplacian(&high);
        low.iter().zip(&lap).map(|(a, b)| a + b).collect()
    }

    fn a_inverse_multiplier(&self, h: &[f64]) -> Vec<f64> {
        let f = Field::from_raw(&self.grid, vec![h.to_vec()]);
        spectral::apply_multiplier_table(&f, &self.grid.tables().a_inverse)
            .into_values()
            .swap_remove(0)
    }

    /// `R_phi Delta^{-1}(1 - chi) R_phi^{-1} q = (R A R^{-1})^{-1} q - R chi R^{-1} q`.
    pub fn inv_laplace_high(&self, q: &[f64], params: &ConjugatedParams) -> Result<Vec<f64>> {
        let solved = gmres(
            |h| self.apply_a(h),
            |r| self.a_inverse_multiplier(r),
            q,
            params.tol,
            params.max_iter,
            params.restart,
        )
        .map_err(|(iterations, residual)| FlowError::EllipticSolveDiverged { iterations, residual })?;
        let low = self.chi(q);
        Ok(solved.x.iter().zip(&low).map(|(a, b)| a - b).collect())
    }

    pub fn gamma(&self, v: &Field, w: &Field, params: &ConjugatedParams) -> Result<Field> {
        let dim = self.grid.dim();
        let len = self.grid.len();
        // B1 part: sum_{j,k} (R d_j R^{-1} v_k)(R d_k R^{-1} w_j)
        let dv: Vec<Vec<Vec<f64>>> = (0..dim).map(|c| self.gradient(v.component(c))).collect();
        let dw: Vec<Vec<Vec<f64>>> = if std::ptr::eq(v, w) {
            dv.clone()
        } else {
            (0..dim).map(|c| self.gradient(w.component(c))).collect()
        };
        let mut q = vec![0.0; len];
        for j in 0..dim {
            for k in 0..dim {
                // dv[k][j] = R d_j R^{-1} v_k
                for ((o, a), b) in q.iter_mut().zip(&dv[k][j]).zip(&dw[j][k]) {
                    *o += a * b;
                }
            }
        }
        let h = self.inv_laplace_high(&q, params)?;
        let mut out = self.gradient(&h);

        // B2 part: grad Delta^{-1} d_j d_k chi(D) of (v_j w_k) o phi^{-1}, evaluated at phi(y)
        let modes = self.ball_xi.len();
        let mut b2 = vec![Complex64::new(0.0, 0.0); modes];
        for j in 0..dim {
            for k in 0..dim {
                let prod: Vec<f64> = v.component(j).iter().zip(w.component(k)).map(|(a, b)| a * b).collect();
                let c = self.pushforward_coefficients(&prod);
                for (m, xi) in self.ball_xi.iter().enumerate() {
                    let q2: f64 = xi.iter().map(|x| x * x).sum();
                    if q2 > 0.0 {
                        b2[m] += c[m] * (xi[j] * xi[k] / q2);
                    }
                }
            }
        }
        for (a, o) in out.iter_mut().enumerate() {
            let grad: Vec<Complex64> = b2
                .iter()
                .zip(&self.ball_xi)
                .map(|(c, xi)| c * Complex64::new(0.0, xi[a]))
                .collect();
            let vals = self.evaluate_at_images(&grad);
            o.iter_mut().zip(&vals).for_each(|(x, y)| *x += y);
        }
        Ok(Field::from_raw(&self.grid, out))
    }
}

/// Right-hand side of the first-order system `(phi, phi_t)' = (phi_t, Gamma_phi(phi_t, phi_t))`.
pub fn geodesic_rhs(state: &GeodesicState, strategy: GammaStrategy) -> Result<(Field, Field)> {
    let acc = gamma(&state.phi, &state.phi_t, &state.phi_t, strategy)?;
    Ok((state.phi_t.clone(), acc))
}

/// `u = phi_t o phi^{-1}`.
pub fn reconstruct_velocity(state: &GeodesicState) -> Result<Field> {
    let psi = invert_with(&state.phi, &InversionOptions::default(), None)?;
    compose_field(&state.phi_t, &psi)
}

#[derive(Debug, Clone)]
pub struct GeodesicConfig {
    pub t_end: f64,
    pub dt: f64,
    pub strategy: GammaStrategy,
    /// Record state and diagnostics every this many steps (the final step is always recorded).
    pub record_every: usize,
    /// Compute diagnostics (requires a reconstruction at every record).
    pub diagnostics: bool,
    pub sobolev_index: Option<SobolevIndex>,
    pub inversion: InversionOptions,
}

impl GeodesicConfig {
    pub fn new(t_end: f64, dt: f64) -> Self {
        GeodesicConfig {
            t_end,
            dt,
            strategy: GammaStrategy::Pullback,
            record_every: 1,
            diagnostics: false,
            sobolev_index: None,
            inversion: InversionOptions::default(),
        }
    }

    pub fn with_strategy(mut self, s: GammaStrategy) -> Self {
        self.strategy = s;
        self
    }

    pub fn with_record_every(mut self, n: usize) -> Self {
        self.record_every = n.max(1);
        self
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.diagnostics = on;
        self
    }
}

/// Failure record of an integration: what went wrong, when, and the last good state.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: FlowError,
    pub time: f64,
    pub last_good: GeodesicState,
}

#[derive(Debug, Clone)]
pub struct GeodesicRun {
    pub path: Vec<GeodesicState>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub failure: Option<RunFailure>,
    /// Velocities `phi_t o phi^{-1}` at the recorded states (empty without diagnostics).
    pub velocities: Vec<Field>,
}

impl GeodesicRun {
    pub fn final_state(&self) -> &GeodesicState {
        self.path.last().expect("a run always records its initial state")
    }

    pub fn max_time_reached(&self) -> f64 {
        match &self.failure {
            Some(f) => f.last_good.time,
            None => self.final_state().time,
        }
    }
}

/// Classical RK4 on `(d, phi_t)` with `phi = id + d`.
pub struct GeodesicIntegrator {
    christoffel: Christoffel,
    config: GeodesicConfig,
}

impl GeodesicIntegrator {
    pub fn new(grid: &Arc<SpectralGrid>, config: GeodesicConfig) -> Self {
        GeodesicIntegrator {
            christoffel: Christoffel::new(grid).with_inversion(config.inversion.clone()),
            config,
        }
    }

    pub fn config(&self) -> &GeodesicConfig {
        &self.config
    }

    fn record(
        &self,
        state: &GeodesicState,
        hint: Option<&Field>,
        e0: &mut Option<f64>,
        run: &mut GeodesicRun,
    ) -> Result<()> {
        run.path.push(state.clone());
        if !self.config.diagnostics {
            return Ok(());
        }
        let grid = state.phi.grid();
        let jac = state.phi.jacobian()?;
        let psi = invert_with(&state.phi, &self.config.inversion, hint)?;
        let u = compose_field(&state.phi_t, &psi)?;
        let energy = 0.5 * u.inner(&u);
        let e_ref = *e0.get_or_insert(energy);
        let s = self
            .config
            .sobolev_index
            .unwrap_or_else(|| SobolevIndex::default_for(grid.dim()));
        run.diagnostics.push(DiagnosticsRecord {
            time: state.time,
            energy,
            energy_drift_rel: relative_drift(energy, e_ref),
            det_min: jac.min_det(),
            det_max: jac.max_det(),
            div_u_norm: spectral::divergence(&u).l2_norm(),
            sobolev_norm_u: spectral::sobolev_norm(&u, s),
            strategy: self.config.strategy.name().to_string(),
            dt: self.config.dt,
        });
        run.velocities.push(u);
        Ok(())
    }

    /// Integrates from `state`, recording failures in the returned run instead of erroring.
    pub fn run_from(&self, start: GeodesicState) -> GeodesicRun {
        let mut run = GeodesicRun {
            path: Vec::new(),
            diagnostics: Vec::new(),
            failure: None,
            velocities: Vec::new(),
        };
        let mut e0 = None;
        if let Err(error) = self.record(&start, None, &mut e0, &mut run) {
            run.failure = Some(RunFailure {
                error,
                time: start.time,
                last_good: start,
            });
            return run;
        }
        let steps = crate::diffeo::step_count(self.config.t_end, self.config.dt);
        let h = if steps == 0 { 0.0 } else { self.config.t_end / steps as f64 };
        let t0 = start.time;
        let mut state = start;
        let mut hint: Option<Field> = None;
        for s in 0..steps {
            match self.step(&state, h, &mut hint) {
                Ok(mut next) => {
                    next.time = t0 + (s + 1) as f64 * h;
                    let last = s + 1 == steps;
                    if last || (s + 1) % self.config.record_every == 0 {
                        if let Err(error) = self.record(&next, hint.as_ref(), &mut e0, &mut run) {
                            run.path.pop();
                            run.failure = Some(RunFailure {
                                error,
                                time: next.time,
                                last_good: state,
                            });
                            return run;
                        }
                    }
                    state = next;
                }
                Err(error) => {
                    if run.path.last().map(|p| p.time) != Some(state.time) {
                        run.path.push(state.clone());
                    }
                    run.failure = Some(RunFailure {
                        error,
                        time: state.time + h,
                        last_good: state,
                    });
                    return run;
                }
            }
        }
        run
    }

    fn rhs(&self, d: &Field, v: &Field, hint: &mut Option<Field>) -> Result<Field> {
        let phi = DiffeoMap::from_displacement(d.clone())?;
        let (acc, psi) =
            self.christoffel
                .gamma_hinted(&phi, v, v, self.config.strategy, hint.as_ref())?;
        if let Some(psi) = psi {
            *hint = Some(psi.into_displacement());
        }
        Ok(acc)
    }

    /// One RK4 step of size `h`.
    pub(crate) fn step(&self, state: &GeodesicState, h: f64, hint: &mut Option<Field>) -> Result<GeodesicState> {
        let d = state.phi.displacement();
        let v = &state.phi_t;
        let a1 = self.rhs(d, v, hint)?;
        let d2 = d.axpy(0.5 * h, v);
        let v2 = v.axpy(0.5 * h, &a1);
        let a2 = self.rhs(&d2, &v2, hint)?;
        let d3 = d.axpy(0.5 * h, &v2);
        let v3 = v.axpy(0.5 * h, &a2);
        let a3 = self.rhs(&d3, &v3, hint)?;
        let d4 = d.axpy(h, &v3);
        let v4 = v.axpy(h, &a3);
        let a4 = self.rhs(&d4, &v4, hint)?;
        let d_next = d.axpy(h / 6.0, &v.axpy(2.0, &v2).axpy(2.0, &v3).add(&v4));
        let v_next = v.axpy(h / 6.0, &a1.axpy(2.0, &a2).axpy(2.0, &a3).add(&a4));
        if !(d_next.is_finite() && v_next.is_finite()) {
            return Err(FlowError::NonFinite { time: state.time + h });
        }
        let phi = DiffeoMap::from_displacement(d_next)?;
        phi.jacobian()?;
        Ok(GeodesicState {
            time: state.time + h,
            phi,
            phi_t: v_next,
        })
    }
}

/// Integrates the geodesic with `phi(0) = id`, `phi_t(0) = u0`; any failure is an error.
pub fn integrate_geodesic(u0: &Field, config: &GeodesicConfig) -> Result<GeodesicRun> {
    let run = GeodesicIntegrator::new(u0.grid(), config.clone()).run_from(GeodesicState::initial(u0));
    match run.failure {
        Some(f) => Err(f.error),
        None => Ok(run),
    }
}

/// Integrates from an arbitrary state; any failure is an error.
pub fn integrate_geodesic_from(start: GeodesicState, config: &GeodesicConfig) -> Result<GeodesicRun> {
    let grid = start.phi.grid().clone();
    let run = GeodesicIntegrator::new(&grid, config.clone()).run_from(start);
    match run.failure {
        Some(f) => Err(f.error),
        None => Ok(run),
    }
}
