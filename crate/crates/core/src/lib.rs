//! Spectral simulation of the incompressible Euler equation on a periodic box,
//! written both in Eulerian form and in Lagrangian form as a second-order
//! geodesic equation `phi'' = Gamma_phi(phi', phi')` for the flow map.
//!
//! Layout:
//! * [`grid`], [`field`], [`spectral`], [`bandlimited`], [`nufft`], [`snapshot`]:
//!   discretisation, Fourier multipliers and off-grid evaluation.
//! * [`diffeo`]: flow maps `phi = id + d`, Jacobians, composition, inversion, flows.
//! * [`pressure`]: the low/high frequency split `B = B1 + B2` of the pressure term.
//! * [`geodesic`]: the Christoffel map and the geodesic integrator.
//! * [`expmap`]: exponential map, star-shapedness probe, trajectory fits.
//! * [`euler`]: Eulerian reference solver and cross-validation.
//! * [`presets`]: named initial conditions.
//! * [`validation`]: the invariant suite shared by the acceptance tests and the self-test.

pub mod bandlimited;
pub mod diagnostics;
pub mod diffeo;
pub mod error;
pub mod euler;
pub mod expmap;
pub mod field;
pub mod geodesic;
pub mod grid;
mod krylov;
pub mod nufft;
pub mod presets;
pub mod pressure;
pub mod snapshot;
pub mod spectral;
pub mod validation;

pub use bandlimited::{BandLimitedField, BandMode};
pub use diffeo::{DiffeoMap, JacobianData};
pub use error::{FlowError, Result};
pub use field::Field;
pub use geodesic::{GammaStrategy, GeodesicState};
pub use grid::{GridSpec, SpectralGrid};
pub use pressure::PressureOperator;
pub use spectral::SobolevIndex;
