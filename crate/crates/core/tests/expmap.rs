mod common;

use std::f64::consts::PI;

use lagrange_core::error::FlowError;
use lagrange_core::expmap::{
    analyticity_diagnostic, exp_map, geodesic_state_at, homogeneity_defect, sample_trajectory, star_probe,
};
use lagrange_core::field::Field;
use lagrange_core::presets;

use common::{divfree, grid};

#[test]
fn exp_of_zero_is_identity() {
    let g = grid(16);
    let r = exp_map(&Field::zeros(&g, 2), 0.1);
    assert!(r.succeeded());
    assert_eq!(r.max_time_reached, 1.0);
    assert_eq!(r.phi_at_1.unwrap().displacement().sup_norm(), 0.0);
}

#[test]
fn exp_of_shear_in_closed_form() {
    let g = grid(32);
    let r = exp_map(&presets::shear(&g, 1.0), 1e-2);
    let expect = Field::vector_from_fn(&g, |x| vec![x[1].sin(), 0.0]);
    assert!(r.phi_at_1.unwrap().displacement().sub(&expect).sup_norm() < 1e-6);
}

#[test]
fn exp_is_homogeneous() {
    let g = grid(32);
    let u0 = divfree(&g, 3);
    let half = exp_map(&u0.scale(0.5), 1e-2).phi_at_1.unwrap();
    let at_half = geodesic_state_at(&u0, 0.5, 5e-3).unwrap();
    assert!(half.displacement().sub(at_half.phi.displacement()).sup_norm() < 1e-6);
    assert!(homogeneity_defect(&u0, 2.0, 0.2, 1e-2).unwrap() < 1e-6);
}

#[test]
fn star_probe_of_small_data() {
    let g = grid(32);
    let scales = [0.25, 0.5, 1.0];
    for u0 in [Field::zeros(&g, 2), presets::taylor_green(&g, 1.0)] {
        let probe = star_probe(&u0, &scales, 5e-2).unwrap();
        assert_eq!(probe.flags(), vec![true; 3]);
        assert!(probe.is_monotone());
        assert_eq!(probe.table().lines().count(), 4);
    }
    assert!(star_probe(&Field::zeros(&g, 2), &[0.5, 0.25], 0.1).is_err());
    assert!(star_probe(&Field::zeros(&g, 2), &[0.5, 1.5], 0.1).is_err());
}

#[test]
fn star_probe_reports_failures_as_data() {
    let g = grid(16);
    let probe = star_probe(&presets::taylor_green(&g, 40.0), &[0.01, 1.0], 1e-2).unwrap();
    assert_eq!(probe.flags(), vec![true, false]);
    let failed = &probe.results[1];
    assert!(failed.max_time_reached < 1.0);
    assert!(failed.failure_reason.is_some());
}

#[test]
fn shear_trajectory_is_linear() {
    let g = grid(32);
    let x = [0.0, PI / 2.0];
    let traj = sample_trajectory(&presets::shear(&g, 1.0), &x, 1.0, 2.5e-2).unwrap();
    assert_eq!(traj.positions[0], x.to_vec());
    for (t, p) in traj.times.iter().zip(&traj.positions) {
        assert!((p[0] - t).abs() < 1e-12 && (p[1] - PI / 2.0).abs() < 1e-12);
    }
    let r = analyticity_diagnostic(&traj, &[1, 2, 3, 4, 5, 6]).unwrap();
    assert!(r.iter().all(|(_, res)| *res < 1e-12));
}

#[test]
fn zero_trajectory_fits_exactly() {
    let g = grid(16);
    let traj = sample_trajectory(&Field::zeros(&g, 2), &[1.0, 2.0], 0.5, 1e-2).unwrap();
    let r = analyticity_diagnostic(&traj, &[1, 2, 3]).unwrap();
    assert!(r.iter().all(|(_, res)| *res == 0.0));
}

#[test]
fn taylor_green_particles_follow_streamlines() {
    let g = grid(32);
    let x = [1.1, 0.4];
    let traj = sample_trajectory(&presets::taylor_green(&g, 1.0), &x, 1.0, 1e-2).unwrap();
    let level = presets::taylor_green_stream(&g, &x);
    for p in &traj.positions {
        assert!((presets::taylor_green_stream(&g, p) - level).abs() < 1e-3);
    }
    let r = analyticity_diagnostic(&traj, &[2, 3, 4, 5, 6]).unwrap();
    assert!(r.last().unwrap().1 < r[0].1 * 1e-3);
}

#[test]
fn too_high_degree_is_rejected() {
    let g = grid(16);
    let traj = sample_trajectory(&presets::shear(&g, 1.0), &[0.5, 0.5], 0.1, 1e-2).unwrap();
    assert!(matches!(
        analyticity_diagnostic(&traj, &[2, 3]),
        Err(FlowError::DegreeTooHigh { degree: 3, .. })
    ));
}
