use std::path::Path;
use std::process::{Command, Output};

use lagrange_core::field::Field;
use lagrange_core::grid::{GridSpec, SpectralGrid};
use lagrange_core::snapshot;

fn lagrange(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagrange"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("manifest.txt")).unwrap()
}

#[test]
fn zero_preset_stays_at_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("zero");
    let r = lagrange(&[
        "geodesic", "--set", "N=16", "--set", "preset=zero", "--set", "T=0.2", "--set", "dt=0.05", "--out", path(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let (phi, meta) = snapshot::read_diffeo(&out.join("phi_pullback_000004.bin"), None).unwrap();
    assert_eq!(phi.displacement().sup_norm(), 0.0);
    assert!((meta.time - 0.2).abs() < 1e-12);
    assert!(manifest(&out).contains("failure = none"));
}

#[test]
fn shear_preset_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("shear");
    let r = lagrange(&[
        "geodesic", "--set", "N=16", "--set", "preset=shear", "--set", "T=0.5", "--set", "dt=0.05", "--set",
        "record_every=5", "--out", path(&out),
    ]);
    assert_eq!(code(&r), 0);
    let (phi, _) = snapshot::read_diffeo(&out.join("phi_pullback_000010.bin"), None).unwrap();
    let grid = SpectralGrid::new(GridSpec::desk(2).with_points(16)).unwrap();
    let expect = Field::vector_from_fn(&grid, |x| vec![0.5 * x[1].sin(), 0.0]);
    assert!(phi.displacement().sub(&expect).sup_norm() < 1e-8);
    let u = snapshot::read_field(&out.join("u_pullback_000010.bin"), Some(&grid)).unwrap();
    assert!(u.sub(&Field::vector_from_fn(&grid, |x| vec![x[1].sin(), 0.0])).sup_norm() < 1e-8);
}

#[test]
fn manifest_rerun_reproduces_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let r = lagrange(&[
        "geodesic", "--set", "N=16", "--set", "preset=random_divfree", "--set", "seed=7", "--set", "T=0.1", "--set",
        "dt=0.02", "--out", path(&a),
    ]);
    assert_eq!(code(&r), 0);
    let r = lagrange(&["geodesic", "--config", path(&a.join("manifest.txt")), "--out", path(&b)]);
    assert_eq!(code(&r), 0);
    let ta = std::fs::read(a.join("diagnostics.tsv")).unwrap();
    let tb = std::fs::read(b.join("diagnostics.tsv")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn snapshot_initial_condition_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let r = lagrange(&[
        "euler", "--set", "N=16", "--set", "preset=taylor_green", "--set", "T=0.1", "--set", "dt=0.05", "--out",
        path(&a),
    ]);
    assert_eq!(code(&r), 0);
    let snap = a.join("u_000002.bin");
    let b = tmp.path().join("b");
    let r = lagrange(&[
        "euler", "--set", "N=16", "--set", "preset=from_snapshot", "--set", &format!("snapshot={}", path(&snap)),
        "--set", "T=0.1", "--set", "dt=0.05", "--out", path(&b),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(manifest(&b).contains("summary.relative_change_l2"));
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&lagrange(&["geodesic", "--set", "bogus=1"])), 2);
    assert_eq!(code(&lagrange(&["euler", "--set", "N=abc"])), 2);
    assert_eq!(code(&lagrange(&["selftest", "--tol", "nope=1"])), 2);

    let grid = SpectralGrid::new(GridSpec::desk(2).with_points(16)).unwrap();
    let bad = tmp.path().join("bad.bin");
    snapshot::write_field(&bad, &Field::vector_from_fn(&grid, |x| vec![x[0].sin(), 0.0])).unwrap();
    let snap = format!("snapshot={}", path(&bad));
    let r = lagrange(&[
        "euler", "--set", "N=16", "--set", "preset=from_snapshot", "--set", &snap, "--out", path(&tmp.path().join("e")),
    ]);
    assert_eq!(code(&r), 2);
    // The geodesic equation is posed for any velocity; the run is flagged instead.
    let g = tmp.path().join("g");
    let r = lagrange(&[
        "geodesic", "--set", "N=16", "--set", "preset=from_snapshot", "--set", &snap, "--set", "T=0.1", "--set",
        "dt=0.05", "--out", path(&g),
    ]);
    assert_eq!(code(&r), 0);
    assert!(manifest(&g).contains("summary.divergence_free = false"));

    let r = lagrange(&[
        "expmap", "--set", "N=16", "--set", "degrees=2..40", "--set", "dt=0.05", "--set", "trajectory_T=0.2",
        "--out", path(&tmp.path().join("x")),
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn blow_up_exits_3_with_failure_record() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("blow");
    let r = lagrange(&[
        "geodesic", "--set", "N=16", "--set", "amplitude=40", "--set", "dt=0.01", "--out", path(&out),
    ]);
    assert_eq!(code(&r), 3);
    let m = manifest(&out);
    assert!(m.contains("failure = pullback:"), "{m}");
    let (phi, meta) = snapshot::read_diffeo(&out.join("phi_pullback_last_good.bin"), None).unwrap();
    assert!(meta.time > 0.0 && meta.time < 1.0);
    assert!(phi.jacobian().is_ok());
}

#[test]
fn compare_verdict_exits_4_on_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let base = [
        "compare", "--set", "N=16", "--set", "preset=random_divfree", "--set", "T=0.1", "--set", "dt=0.02",
    ];
    let ok = tmp.path().join("ok");
    let mut args = base.to_vec();
    args.extend(["--out", path(&ok)]);
    let r = lagrange(&args);
    assert_eq!(code(&r), 0);
    assert!(stdout(&r).contains("[PASS] pullback"));
    assert!(ok.join("comparison_pullback.tsv").exists());

    let strict = tmp.path().join("strict");
    let mut args = base.to_vec();
    args.extend(["--set", "tol.compare_u=1e-30", "--out", path(&strict)]);
    let r = lagrange(&args);
    assert_eq!(code(&r), 4);
    assert!(manifest(&strict).contains("summary.pullback.verdict = FAIL"));
}

#[test]
fn expmap_writes_probe_and_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let r = lagrange(&[
        "expmap", "--set", "N=16", "--set", "dt=0.02", "--set", "trajectory_T=0.5", "--set", "degrees=2..5", "--out",
        path(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["exp_phi.bin", "star_probe.tsv", "trajectory_0.tsv", "residuals_3.tsv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(manifest(&out).contains("summary.exp.success = true"));
}

#[test]
fn selftest_passes_and_reports() {
    let r = lagrange(&["selftest", "--only", "1,3,9"]);
    assert_eq!(code(&r), 0, "{}", stdout(&r));
    assert_eq!(stdout(&r).matches("[PASS]").count(), 3);
}

#[test]
fn selftest_catches_injected_fault() {
    let r = lagrange(&["selftest", "--inject-fault", "--only", "1,3"]);
    assert_eq!(code(&r), 1);
    assert!(stdout(&r).contains("[FAIL]  1."));
}

#[test]
fn selftest_flags_infeasible_tolerance() {
    let r = lagrange(&["selftest", "--only", "9", "--tol", "homogeneity=1e-20"]);
    assert_eq!(code(&r), 1);
    assert!(stdout(&r).contains("INFEASIBLE"));
}
