mod common;

use lagrange_core::diffeo::DiffeoMap;
use lagrange_core::field::Field;
use lagrange_core::geodesic::{
    gamma, geodesic_rhs, integrate_geodesic, integrate_geodesic_from, reconstruct_velocity, GammaStrategy,
    GeodesicConfig, GeodesicState,
};
use lagrange_core::pressure::PressureOperator;
use lagrange_core::presets;
use lagrange_core::spectral;
use proptest::prelude::*;

use common::{divfree, grid, smooth};

fn shear_state(n: usize, t: f64) -> GeodesicState {
    let g = grid(n);
    let d = Field::vector_from_fn(&g, |x| vec![t * x[1].sin(), 0.0]);
    GeodesicState {
        time: t,
        phi: DiffeoMap::from_displacement(d).unwrap(),
        phi_t: presets::shear(&g, 1.0),
    }
}

#[test]
fn gamma_at_identity_is_grad_b() {
    let g = grid(32);
    let v = smooth(&g, 1, 3.0, 1.0);
    let w = smooth(&g, 2, 3.0, 1.0);
    let id = DiffeoMap::identity(&g);
    let expect = PressureOperator::new(&g).grad_b(&v, &w).unwrap();
    for s in [GammaStrategy::Pullback, GammaStrategy::conjugated()] {
        let out = gamma(&id, &v, &w, s).unwrap();
        assert!(out.sub(&expect).sup_norm() < 1e-10 * expect.sup_norm(), "{}", s.name());
    }
}

#[test]
fn shear_state_has_no_acceleration() {
    let state = shear_state(32, 0.6);
    for s in [GammaStrategy::Pullback, GammaStrategy::conjugated()] {
        let (dphi, dphi_t) = geodesic_rhs(&state, s).unwrap();
        assert!(dphi.sub(&state.phi_t).sup_norm() == 0.0);
        assert!(dphi_t.sup_norm() < 1e-10, "{}: {}", s.name(), dphi_t.sup_norm());
    }
    let u = reconstruct_velocity(&state).unwrap();
    assert!(u.sub(&state.phi_t).sup_norm() < 1e-12);
}

#[test]
fn rest_state_is_fixed() {
    let g = grid(16);
    let state = GeodesicState::initial(&Field::zeros(&g, 2));
    let (a, b) = geodesic_rhs(&state, GammaStrategy::Pullback).unwrap();
    assert_eq!(a.sup_norm(), 0.0);
    assert_eq!(b.sup_norm(), 0.0);
    let run = integrate_geodesic(&Field::zeros(&g, 2), &GeodesicConfig::new(0.5, 0.1)).unwrap();
    assert!(run.path.iter().all(|s| s.phi.displacement().sup_norm() == 0.0));
}

#[test]
fn taylor_green_initial_acceleration_balances_advection() {
    let g = grid(32);
    let u = presets::taylor_green(&g, 1.0);
    let (_, acc) = geodesic_rhs(&GeodesicState::initial(&u), GammaStrategy::Pullback).unwrap();
    assert!(acc.sub(&spectral::advect(&u, &u)).sup_norm() < 1e-12);
}

#[test]
fn shear_geodesic_in_closed_form() {
    let g = grid(32);
    let u0 = presets::shear(&g, 1.0);
    let run = integrate_geodesic(&u0, &GeodesicConfig::new(1.0, 1e-2).with_record_every(25)).unwrap();
    let last = run.final_state();
    assert!((last.time - 1.0).abs() < 1e-12);
    let expect = Field::vector_from_fn(&g, |x| vec![x[1].sin(), 0.0]);
    assert!(last.phi.displacement().sub(&expect).sup_norm() < 1e-6);
    for state in &run.path {
        assert!(reconstruct_velocity(state).unwrap().sub(&u0).sup_norm() < 1e-6);
    }
}

#[test]
fn runs_are_reproducible() {
    let g = grid(16);
    let u0 = divfree(&g, 5);
    let cfg = GeodesicConfig::new(0.1, 2e-2).with_diagnostics(true);
    let a = integrate_geodesic(&u0, &cfg).unwrap();
    let b = integrate_geodesic(&u0, &cfg).unwrap();
    assert_eq!(a.final_state().phi.displacement().values(), b.final_state().phi.displacement().values());
    assert_eq!(a.diagnostics, b.diagnostics);
}

#[test]
fn time_reversal_returns_to_identity() {
    let g = grid(32);
    let u0 = divfree(&g, 2);
    let cfg = GeodesicConfig::new(0.25, 1e-2).with_record_every(usize::MAX);
    let fwd = integrate_geodesic(&u0, &cfg).unwrap();
    let end = fwd.final_state();
    let reversed = GeodesicState {
        time: 0.0,
        phi: end.phi.clone(),
        phi_t: end.phi_t.scale(-1.0),
    };
    let back = integrate_geodesic_from(reversed, &cfg).unwrap();
    let last = back.final_state();
    assert!(last.phi.displacement().sup_norm() < 1e-5);
    assert!(last.phi_t.add(&u0).sup_norm() < 1e-5);
}

#[test]
fn large_velocity_fails_as_data() {
    let g = grid(16);
    let u0 = presets::taylor_green(&g, 40.0);
    let cfg = GeodesicConfig::new(1.0, 1e-2);
    assert!(integrate_geodesic(&u0, &cfg).is_err());
    let run = lagrange_core::geodesic::GeodesicIntegrator::new(&g, cfg).run_from(GeodesicState::initial(&u0));
    let failure = run.failure.expect("blow-up recorded");
    assert!(failure.time < 1.0);
    assert!(failure.last_good.phi.jacobian().is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gamma_is_bilinear(seed in 0u64..10_000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let g = grid(32);
        let phi = DiffeoMap::from_displacement(smooth(&g, seed, 1.5, 0.3)).unwrap();
        let v1 = smooth(&g, seed + 1, 3.0, 1.0);
        let v2 = smooth(&g, seed + 2, 3.0, 1.0);
        let w = smooth(&g, seed + 3, 3.0, 1.0);
        let s = GammaStrategy::Pullback;
        let lhs = gamma(&phi, &v1.scale(a).add(&v2.scale(b)), &w, s).unwrap();
        let rhs = gamma(&phi, &v1, &w, s).unwrap().scale(a).add(&gamma(&phi, &v2, &w, s).unwrap().scale(b));
        prop_assert!(lhs.sub(&rhs).sup_norm() <= 1e-10 * (1.0 + rhs.sup_norm()));
        let lhs = gamma(&phi, &w, &v1.scale(a).add(&v2.scale(b)), s).unwrap();
        let rhs = gamma(&phi, &w, &v1, s).unwrap().scale(a).add(&gamma(&phi, &w, &v2, s).unwrap().scale(b));
        prop_assert!(lhs.sub(&rhs).sup_norm() <= 1e-10 * (1.0 + rhs.sup_norm()));
    }

    #[test]
    fn strategies_agree_on_mild_states(seed in 0u64..10_000) {
        let g = grid(32);
        let phi = DiffeoMap::from_displacement(smooth(&g, seed, 1.5, 0.2)).unwrap();
        let v = smooth(&g, seed + 1, 3.0, 1.0);
        let w = smooth(&g, seed + 2, 3.0, 1.0);
        let a = gamma(&phi, &v, &w, GammaStrategy::Pullback).unwrap();
        let b = gamma(&phi, &v, &w, GammaStrategy::conjugated()).unwrap();
        prop_assert!(a.sub(&b).sup_norm() <= 1e-6 * a.sup_norm());
    }
}
