mod common;

use lagrange_core::error::FlowError;
use lagrange_core::euler::{cross_validate, euler_step_rhs, integrate_euler, vorticity_check_2d};
use lagrange_core::field::Field;
use lagrange_core::geodesic::{integrate_geodesic, GammaStrategy, GeodesicConfig};
use lagrange_core::presets;
use lagrange_core::spectral;
use proptest::prelude::*;

use common::{divfree, grid};

#[test]
fn steady_fields_have_zero_rhs() {
    let g = grid(32);
    assert!(euler_step_rhs(&presets::shear(&g, 1.0)).unwrap().sup_norm() < 1e-14);
    assert!(euler_step_rhs(&presets::taylor_green(&g, 1.0)).unwrap().sup_norm() < 1e-10);
    assert_eq!(euler_step_rhs(&Field::zeros(&g, 2)).unwrap().sup_norm(), 0.0);
}

#[test]
fn taylor_green_stays_steady() {
    let g = grid(32);
    let u0 = presets::taylor_green(&g, 1.0);
    let run = integrate_euler(&u0, 1.0, 1e-2, 50).unwrap();
    let last = run.velocities.last().unwrap();
    assert!(last.sub(&u0).l2_norm() / u0.l2_norm() < 1e-6);
    assert_eq!(*run.times.last().unwrap(), 1.0);
    assert!(run.table().starts_with("time\tenergy"));
}

#[test]
fn zero_stays_zero() {
    let g = grid(16);
    let run = integrate_euler(&Field::zeros(&g, 2), 0.5, 0.1, 1).unwrap();
    assert!(run.velocities.iter().all(|u| u.sup_norm() == 0.0));
}

#[test]
fn random_field_stays_divergence_free_and_conserves_energy() {
    let g = grid(32);
    let u0 = divfree(&g, 1);
    let run = integrate_euler(&u0, 1.0, 1e-2, 10).unwrap();
    for r in &run.diagnostics {
        assert!(r.div_u_norm <= 1e-6);
        assert!(r.energy_drift_rel.abs() <= 1e-6);
    }
}

#[test]
fn divergent_initial_data_is_rejected() {
    let g = grid(16);
    let u0 = Field::vector_from_fn(&g, |x| vec![x[0].sin(), 0.0]);
    assert!(matches!(integrate_euler(&u0, 0.1, 1e-2, 1), Err(FlowError::NotDivergenceFree { .. })));
}

#[test]
fn shear_solvers_agree() {
    let g = grid(32);
    let report = cross_validate(&presets::shear(&g, 1.0), 0.5, 1e-2, GammaStrategy::Pullback).unwrap();
    assert!(report.u_discrepancy() <= 1e-6);
    assert!(report.phi_discrepancy() <= 1e-6);
    assert_eq!(report.rows.len(), 51);
}

#[test]
fn random_solvers_agree() {
    let g = grid(32);
    let report = cross_validate(&divfree(&g, 1), 0.25, 1e-2, GammaStrategy::Pullback).unwrap();
    assert!(report.u_discrepancy() <= 1e-3);
    assert!(report.phi_discrepancy() <= 1e-3);
    let table = report.table();
    assert!(table.starts_with("time\tu_discrepancy_L2\tphi_discrepancy_sup"));
}

#[test]
fn vorticity_is_transported() {
    let g = grid(32);
    for (u0, tol) in [
        (presets::shear(&g, 1.0), 1e-6),
        (Field::zeros(&g, 2), 0.0),
        (presets::taylor_green(&g, 1.0), 1e-3),
    ] {
        let run = integrate_geodesic(&u0, &GeodesicConfig::new(0.25, 1e-2).with_record_every(5)).unwrap();
        assert!(vorticity_check_2d(&run).unwrap() <= tol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dealiased_advection_is_skew(seed in 0u64..10_000) {
        let g = grid(32);
        let u = spectral::dealias(&divfree(&g, seed));
        let adv = spectral::dealias(&spectral::advect(&u, &u));
        prop_assert!(adv.inner(&u).abs() <= 1e-10);
    }
}
