mod common;

use lagrange_core::diffeo::{
    compose_field, compose_field_direct, conjugated_derivative, flow_integrate, invert, DiffeoMap,
};
use lagrange_core::error::FlowError;
use lagrange_core::field::Field;
use lagrange_core::spectral;
use proptest::prelude::*;

use common::{grid, smooth, smooth_scalar};

fn small_map(n: usize, seed: u64, amp: f64) -> DiffeoMap {
    DiffeoMap::from_displacement(smooth(&grid(n), seed, 1.5, amp)).unwrap()
}

fn shear_map(n: usize, t: f64) -> DiffeoMap {
    let g = grid(n);
    DiffeoMap::from_displacement(Field::vector_from_fn(&g, |x| vec![t * x[1].sin(), 0.0])).unwrap()
}

#[test]
fn constant_shift_is_a_phase_rotation() {
    let g = grid(16);
    let c = [0.3, -1.1];
    let f = Field::scalar_from_fn(&g, |x| (2.0 * x[0] - x[1]).cos());
    let phi = DiffeoMap::from_displacement(Field::vector_from_fn(&g, |_| c.to_vec())).unwrap();
    let moved = compose_field(&f, &phi).unwrap();
    let expect = Field::scalar_from_fn(&g, |x| (2.0 * (x[0] + c[0]) - (x[1] + c[1])).cos());
    assert!(moved.sub(&expect).sup_norm() < 1e-13);
    let direct = compose_field_direct(&f, &phi).unwrap();
    assert!(moved.sub(&direct).sup_norm() < 1e-13);
    let psi = invert(&phi).unwrap();
    for (a, ca) in c.iter().enumerate() {
        assert!(psi.displacement().component(a).iter().all(|v| (v + ca).abs() < 1e-12));
    }
}

#[test]
fn identity_leaves_fields_unchanged() {
    let g = grid(16);
    let f = smooth(&g, 5, 3.0, 1.0);
    let id = DiffeoMap::identity(&g);
    assert!(compose_field(&f, &id).unwrap().sub(&f).sup_norm() < 1e-14);
}

#[test]
fn shear_inverse_in_closed_form() {
    let phi = shear_map(32, 0.7);
    let psi = invert(&phi).unwrap();
    let g = phi.grid();
    let expect = Field::vector_from_fn(g, |x| vec![-0.7 * x[1].sin(), 0.0]);
    assert!(psi.displacement().sub(&expect).sup_norm() < 1e-12);
}

#[test]
fn conjugated_derivative_under_shear_is_dx() {
    let phi = shear_map(32, 0.4);
    let jac = phi.jacobian().unwrap();
    let f = smooth_scalar(phi.grid(), 9, 3.0);
    let cd = conjugated_derivative(&f, 0, &jac);
    assert!(cd.sub(&spectral::derivative(&f, 0)).sup_norm() < 1e-13);
}

#[test]
fn conjugated_derivative_at_identity() {
    let g = grid(16);
    let jac = DiffeoMap::identity(&g).jacobian().unwrap();
    let f = smooth_scalar(&g, 2, 3.0);
    for k in 0..2 {
        let cd = conjugated_derivative(&f, k, &jac);
        assert!(cd.sub(&spectral::derivative(&f, k)).sup_norm() < 1e-14);
    }
}

#[test]
fn conjugated_derivative_matches_composition_oracle() {
    let phi = small_map(64, 4, 0.2);
    let psi = invert(&phi).unwrap();
    let jac = phi.jacobian().unwrap();
    let f = smooth_scalar(phi.grid(), 8, 2.0);
    for k in 0..2 {
        let pulled = compose_field(&f, &psi).unwrap();
        let oracle = compose_field(&spectral::derivative(&pulled, k), &phi).unwrap();
        let cd = conjugated_derivative(&f, k, &jac);
        assert!(cd.sub(&oracle).sup_norm() < 1e-8, "axis {k}: {}", cd.sub(&oracle).sup_norm());
    }
}

#[test]
fn chart_exit_on_folding_displacement() {
    let g = grid(16);
    let d = Field::vector_from_fn(&g, |x| vec![2.0 * x[0].sin(), 0.0]);
    let phi = DiffeoMap::from_displacement(d).unwrap();
    assert!(matches!(phi.jacobian(), Err(FlowError::ChartExit { .. })));
}

#[test]
fn flows_of_simple_velocities() {
    let g = grid(32);
    let zero = |_t: f64| Ok(Field::zeros(&g, 2));
    let path = flow_integrate(&g, &zero, 0.5, 0.1).unwrap();
    assert!(path.iter().all(|(_, p)| p.displacement().sup_norm() == 0.0));

    let constant = |_t: f64| Ok(Field::vector_from_fn(&g, |_| vec![0.5, -0.25]));
    let path = flow_integrate(&g, &constant, 1.0, 0.1).unwrap();
    let (t, last) = path.last().unwrap();
    assert!((t - 1.0).abs() < 1e-15);
    let d = last.displacement();
    assert!(d.component(0).iter().all(|v| (v - 0.5).abs() < 1e-13));
    assert!(d.component(1).iter().all(|v| (v + 0.25).abs() < 1e-13));

    let shear = |_t: f64| Ok(Field::vector_from_fn(&g, |x| vec![x[1].sin(), 0.0]));
    let path = flow_integrate(&g, &shear, 1.0, 1e-2).unwrap();
    let expect = Field::vector_from_fn(&g, |x| vec![x[1].sin(), 0.0]);
    assert!(path.last().unwrap().1.displacement().sub(&expect).sup_norm() < 1e-6);
}

#[test]
fn volume_preserving_flow_keeps_unit_determinant() {
    let g = grid(64);
    let u = common::divfree(&g, 11);
    let steady = |_t: f64| Ok(u.clone());
    let path = flow_integrate(&g, &steady, 0.5, 1e-2).unwrap();
    let jac = path.last().unwrap().1.jacobian().unwrap();
    assert!(jac.volume_defect() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn inverse_is_two_sided(seed in 0u64..1000, amp in 0.05f64..0.3) {
        let phi = small_map(32, seed, amp);
        let psi = invert(&phi).unwrap();
        prop_assert!(phi.inverse_residual(&psi).unwrap() <= 1e-10);
        prop_assert!(psi.inverse_residual(&phi).unwrap() <= 1e-8);
        let back = invert(&psi).unwrap();
        prop_assert!(back.displacement().sub(phi.displacement()).sup_norm() <= 1e-8);
    }

    #[test]
    fn compose_round_trip(seed in 0u64..1000, amp in 0.05f64..0.3) {
        let phi = small_map(64, seed, amp);
        let psi = invert(&phi).unwrap();
        let f = smooth_scalar(phi.grid(), seed + 1, 2.0);
        let back = compose_field(&compose_field(&f, &phi).unwrap(), &psi).unwrap();
        prop_assert!(back.sub(&f).sup_norm() <= 1e-8);
    }

    #[test]
    fn group_action(seed in 0u64..1000, amp in 0.05f64..0.2) {
        let phi = small_map(64, seed, amp);
        let psi = small_map(64, seed + 7, amp);
        let f = smooth_scalar(phi.grid(), seed + 3, 2.0);
        let lhs = compose_field(&f, &phi.compose(&psi).unwrap()).unwrap();
        let rhs = compose_field(&compose_field(&f, &phi).unwrap(), &psi).unwrap();
        prop_assert!(lhs.sub(&rhs).sup_norm() <= 1e-8);
    }

    #[test]
    fn conjugated_derivative_is_a_derivation(seed in 0u64..1000, amp in 0.05f64..0.3, k in 0usize..2) {
        let phi = small_map(32, seed, amp);
        let jac = phi.jacobian().unwrap();
        let f = smooth_scalar(phi.grid(), seed + 1, 3.0);
        let g = smooth_scalar(phi.grid(), seed + 2, 3.0);
        let lhs = conjugated_derivative(&f.mul(&g), k, &jac);
        let rhs = f.mul(&conjugated_derivative(&g, k, &jac)).add(&g.mul(&conjugated_derivative(&f, k, &jac)));
        prop_assert!(lhs.sub(&rhs).sup_norm() <= 1e-8);
    }

    #[test]
    fn jacobian_times_inverse_is_identity(seed in 0u64..1000, amp in 0.05f64..0.4) {
        let phi = small_map(32, seed, amp);
        let jac = phi.jacobian().unwrap();
        for i in 0..phi.grid().len() {
            for a in 0..2 {
                for b in 0..2 {
                    let s: f64 = (0..2).map(|c| jac.entry(a, c)[i] * jac.inverse_entry(c, b)[i]).sum();
                    let id = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((s - id).abs() <= 1e-10);
                }
            }
        }
    }
}
