use lagrange_web::{chi_filter, pressure_split, Flow};

#[test]
fn shear_lattice_moves_in_closed_form() {
    let mut flow = Flow::new("shear", 1.0, 0, 16, 0.05).unwrap();
    flow.advance(10).unwrap();
    assert!((flow.time() - 0.5).abs() < 1e-12);
    let n = flow.n();
    let h = flow.box_length() / n as f64;
    let pts = flow.lattice();
    assert_eq!(pts.len(), 2 * n * n);
    for i in 0..n {
        for j in 0..n {
            let k = 2 * (i * n + j);
            let (x, y) = (i as f64 * h, j as f64 * h);
            assert!((pts[k] - (x + 0.5 * y.sin())).abs() < 1e-8);
            assert!((pts[k + 1] - y).abs() < 1e-8);
        }
    }
}

#[test]
fn flow_conserves_energy_and_volume() {
    let mut flow = Flow::new("random_divfree", 0.5, 3, 16, 0.02).unwrap();
    let e0 = flow.energy().unwrap();
    flow.advance(10).unwrap();
    let e1 = flow.energy().unwrap();
    assert!((e1 - e0).abs() <= 1e-6 * e0);
    let det = flow.det_range().unwrap();
    assert!((det[0] - 1.0).abs() < 1e-4 && (det[1] - 1.0).abs() < 1e-4);
    assert_eq!(flow.vorticity().unwrap().len(), 16 * 16);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(Flow::new("vortex", 1.0, 0, 16, 0.05).is_err());
    assert!(Flow::new("zero", 1.0, 0, 16, 0.0).is_err());
    assert!(Flow::new("zero", 1.0, 0, 2, 0.05).is_err());
    assert!(pressure_split("zero", 1.0, 0, 1000, 1.5).is_err());
}

#[test]
fn taylor_green_pressure_split_sums_to_closed_form() {
    let n = 16;
    let out = pressure_split("taylor_green", 1.0, 0, n, 1.5).unwrap();
    assert_eq!(out.len(), 3 * n * n);
    let (b1, rest) = out.split_at(n * n);
    let (b2, p) = rest.split_at(n * n);
    let h = 2.0 * std::f64::consts::PI / n as f64;
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            let (x, y) = (i as f64 * h, j as f64 * h);
            let expect = 0.25 * ((2.0 * x).cos() + (2.0 * y).cos());
            assert!((p[k] - expect).abs() < 1e-12);
            assert!((p[k] + b1[k] + b2[k]).abs() < 1e-14);
        }
    }
    // The modes of the Taylor-Green pressure lie outside the unit-scale ball.
    assert!(b2.iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn chi_filter_is_a_projection() {
    let n = 16;
    let out = chi_filter(4, n, 1.5).unwrap();
    let (f, low) = out.split_at(n * n);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm(low) < norm(f));
    assert!(norm(low) > 0.0);
    assert_eq!(chi_filter(4, n, 1.5).unwrap(), out);
}
