//! Subcommand drivers. Each returns the process exit code on completion.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use lagrange_core::diagnostics::{diagnostics_table, num};
use lagrange_core::diffeo::step_count;
use lagrange_core::error::FlowError;
use lagrange_core::euler::{cross_validate, integrate_euler};
use lagrange_core::expmap::{
    analyticity_diagnostic, decays_geometrically, exp_map_with, residual_table, star_probe, trajectory_from_path,
};
use lagrange_core::geodesic::{GeodesicConfig, GeodesicIntegrator, GeodesicState};
use lagrange_core::grid::SpectralGrid;
use lagrange_core::pressure::DIVERGENCE_TOL;
use lagrange_core::snapshot::{self, DiffeoMeta};
use lagrange_core::validation::{envelope_rate, run_criterion, run_suite, Status, SuiteConfig, FIT_FLOOR, TOLERANCES};

use crate::config::{ConfigError, RunConfig};
use crate::manifest::Manifest;

pub const EXIT_OK: u8 = 0;
pub const EXIT_SELFTEST: u8 = 1;
pub const EXIT_BLOWUP: u8 = 3;
pub const EXIT_VERDICT: u8 = 4;

fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Divergence-free preconditions are configuration problems, not run failures.
fn classify(e: FlowError) -> anyhow::Error {
    match e {
        FlowError::NotDivergenceFree { .. } | FlowError::GridMismatch | FlowError::InvalidField(_) => {
            ConfigError(e.to_string()).into()
        }
        other => other.into(),
    }
}

fn step_index(time: f64, t_end: f64, dt: f64) -> usize {
    let steps = step_count(t_end, dt);
    if steps == 0 {
        0
    } else {
        (time / (t_end / steps as f64)).round() as usize
    }
}

pub fn geodesic(cfg: &RunConfig) -> Result<u8> {
    let mut manifest = Manifest::new("geodesic", cfg.echo());
    let grid = cfg.spectral_grid();
    let u0 = cfg.initial_velocity(&grid)?;
    let dir = &cfg.output;
    prepare(dir)?;
    snapshot::write_field(&dir.join("u0.bin"), &u0)?;
    let div0 = lagrange_core::spectral::divergence(&u0).l2_norm();
    manifest.summary("initial_div_norm", num(div0));
    if div0 > DIVERGENCE_TOL {
        eprintln!("warning: initial velocity is not divergence-free (|div u0| = {div0:.3e})");
        manifest.summary("divergence_free", false);
    }
    manifest.phase("setup");

    let mut table = String::new();
    let mut code = EXIT_OK;
    let mut finals = Vec::new();
    for strategy in cfg.strategy.strategies() {
        let config = GeodesicConfig::new(cfg.t_end, cfg.dt)
            .with_strategy(strategy)
            .with_record_every(cfg.record_every)
            .with_diagnostics(true);
        let run = GeodesicIntegrator::new(&grid, config).run_from(GeodesicState::initial(&u0));
        let name = strategy.name();
        for (i, state) in run.path.iter().enumerate() {
            let step = step_index(state.time, cfg.t_end, cfg.dt);
            let meta = DiffeoMeta {
                time: state.time,
                initial_velocity: cfg.initial_identifier(),
            };
            snapshot::write_diffeo(&dir.join(format!("phi_{name}_{step:06}.bin")), &state.phi, &meta)?;
            if let Some(u) = run.velocities.get(i) {
                snapshot::write_field(&dir.join(format!("u_{name}_{step:06}.bin")), u)?;
            }
        }
        let rendered = diagnostics_table(&run.diagnostics);
        if table.is_empty() {
            table = rendered;
        } else {
            table.extend(rendered.lines().skip(1).map(|l| format!("{l}\n")));
        }
        let d = &run.diagnostics;
        let max = |f: &dyn Fn(&lagrange_core::diagnostics::DiagnosticsRecord) -> f64| {
            d.iter().map(f).fold(0.0f64, f64::max)
        };
        manifest.summary(&format!("{name}.final_time"), num(run.max_time_reached()));
        manifest.summary(&format!("{name}.records"), d.len());
        manifest.summary(&format!("{name}.max_energy_drift_rel"), num(max(&|r| r.energy_drift_rel.abs())));
        manifest.summary(
            &format!("{name}.max_det_defect"),
            num(max(&|r| (r.det_min - 1.0).abs().max((r.det_max - 1.0).abs()))),
        );
        manifest.summary(&format!("{name}.max_div_u_norm"), num(max(&|r| r.div_u_norm)));
        if let Some(f) = &run.failure {
            manifest.fail(format!("{name}: {} at t = {}: {}", f.error.tag(), num(f.time), f.error));
            snapshot::write_diffeo(
                &dir.join(format!("phi_{name}_last_good.bin")),
                &f.last_good.phi,
                &DiffeoMeta {
                    time: f.last_good.time,
                    initial_velocity: cfg.initial_identifier(),
                },
            )?;
            eprintln!("{name}: blow-up at t = {}: {}", num(f.time), f.error);
            code = EXIT_BLOWUP;
        }
        finals.push(run.final_state().phi.displacement().clone());
        println!("{name}: reached t = {}", num(run.max_time_reached()));
    }
    if let [a, b] = finals.as_slice() {
        manifest.summary("strategy_discrepancy_sup", num(a.sub(b).sup_norm()));
    }
    manifest.phase("integrate");
    write(dir, "diagnostics.tsv", &table)?;
    manifest.phase("write");
    manifest.write(dir)?;
    Ok(code)
}

pub fn euler(cfg: &RunConfig) -> Result<u8> {
    let mut manifest = Manifest::new("euler", cfg.echo());
    let grid = cfg.spectral_grid();
    let u0 = cfg.initial_velocity(&grid)?;
    let dir = &cfg.output;
    prepare(dir)?;
    manifest.phase("setup");
    let run = match integrate_euler(&u0, cfg.t_end, cfg.dt, cfg.record_every) {
        Ok(run) => run,
        Err(e @ FlowError::NonFinite { .. }) => {
            manifest.fail(format!("{}: {e}", e.tag()));
            manifest.write(dir)?;
            eprintln!("blow-up: {e}");
            return Ok(EXIT_BLOWUP);
        }
        Err(e) => return Err(classify(e)),
    };
    manifest.phase("integrate");
    for (t, u) in run.times.iter().zip(&run.velocities) {
        let step = step_index(*t, cfg.t_end, cfg.dt);
        snapshot::write_field(&dir.join(format!("u_{step:06}.bin")), u)?;
    }
    write(dir, "euler_diagnostics.tsv", &run.table())?;
    let last = run.velocities.last().expect("initial velocity recorded");
    let norm0 = u0.l2_norm();
    let change = last.sub(&u0).l2_norm() / if norm0 > 0.0 { norm0 } else { 1.0 };
    let d = &run.diagnostics;
    manifest.summary("final_time", num(*run.times.last().unwrap()));
    manifest.summary("relative_change_l2", num(change));
    manifest.summary(
        "max_energy_drift_rel",
        num(d.iter().map(|r| r.energy_drift_rel.abs()).fold(0.0, f64::max)),
    );
    manifest.summary("max_div_u_norm", num(d.iter().map(|r| r.div_u_norm).fold(0.0, f64::max)));
    manifest.phase("write");
    manifest.write(dir)?;
    println!("euler: reached t = {}, relative change {}", num(*run.times.last().unwrap()), num(change));
    Ok(EXIT_OK)
}

pub fn compare(cfg: &RunConfig) -> Result<u8> {
    let mut manifest = Manifest::new("compare", cfg.echo());
    let grid = cfg.spectral_grid();
    let u0 = cfg.initial_velocity(&grid)?;
    let dir = &cfg.output;
    prepare(dir)?;
    manifest.phase("setup");
    let tol_u = cfg.tolerance("compare_u");
    let tol_phi = cfg.tolerance("compare_phi");
    let mut code = EXIT_OK;
    for strategy in cfg.strategy.strategies() {
        let name = strategy.name();
        let report = match cross_validate(&u0, cfg.t_end, cfg.dt, strategy) {
            Ok(r) => r,
            Err(e @ (FlowError::NotDivergenceFree { .. } | FlowError::GridMismatch)) => return Err(classify(e)),
            Err(e) => {
                manifest.fail(format!("{name}: {}: {e}", e.tag()));
                manifest.write(dir)?;
                eprintln!("{name}: blow-up: {e}");
                return Ok(EXIT_BLOWUP);
            }
        };
        write(dir, &format!("comparison_{name}.tsv"), &report.table())?;
        let (du, dphi) = (report.u_discrepancy(), report.phi_discrepancy());
        let ok = du <= tol_u && dphi <= tol_phi;
        let verdict = if ok { "PASS" } else { "FAIL" };
        manifest.summary(&format!("{name}.u_discrepancy"), num(du));
        manifest.summary(&format!("{name}.phi_discrepancy"), num(dphi));
        manifest.summary(&format!("{name}.verdict"), verdict);
        println!(
            "[{verdict}] {name}: u discrepancy {} (<= {tol_u:e}), phi discrepancy {} (<= {tol_phi:e})",
            num(du),
            num(dphi)
        );
        if !ok {
            code = EXIT_VERDICT;
        }
    }
    manifest.phase("compare");
    manifest.write(dir)?;
    Ok(code)
}

pub fn expmap(cfg: &RunConfig) -> Result<u8> {
    let mut manifest = Manifest::new("expmap", cfg.echo());
    let grid = cfg.spectral_grid();
    let u0 = cfg.initial_velocity(&grid)?;
    let dir = &cfg.output;
    prepare(dir)?;
    manifest.phase("setup");
    let strategy = cfg.strategy.strategies()[0];

    let exp = exp_map_with(&u0, cfg.dt, strategy);
    manifest.summary("exp.success", exp.succeeded());
    manifest.summary("exp.max_time_reached", num(exp.max_time_reached));
    manifest.summary("exp.failure_reason", exp.failure_reason.as_deref().unwrap_or("none"));
    if let Some(phi) = &exp.phi_at_1 {
        let meta = DiffeoMeta {
            time: 1.0,
            initial_velocity: cfg.initial_identifier(),
        };
        snapshot::write_diffeo(&dir.join("exp_phi.bin"), phi, &meta)?;
    }
    println!(
        "exp: {} (reached t = {})",
        if exp.succeeded() { "success" } else { "failure" },
        num(exp.max_time_reached)
    );
    manifest.phase("exp_map");

    let probe = star_probe(&u0, &cfg.scales, cfg.dt).map_err(classify)?;
    write(dir, "star_probe.tsv", &probe.table())?;
    manifest.summary("star_probe.flags", format!("{:?}", probe.flags()));
    manifest.summary("star_probe.monotone", probe.is_monotone());
    println!("star probe: flags {:?}, monotone {}", probe.flags(), probe.is_monotone());
    manifest.phase("star_probe");

    let config = GeodesicConfig::new(cfg.trajectory_t_end, cfg.dt).with_strategy(strategy);
    let run = GeodesicIntegrator::new(&grid, config).run_from(GeodesicState::initial(&u0));
    if let Some(f) = &run.failure {
        manifest.fail(format!("trajectory run: {} at t = {}: {}", f.error.tag(), num(f.time), f.error));
        manifest.write(dir)?;
        eprintln!("trajectory run blew up: {}", f.error);
        return Ok(EXIT_BLOWUP);
    }
    let factor = cfg.tolerance("analyticity_decay");
    let mut all = true;
    let mut summary = String::new();
    for (i, x) in cfg.seed_points().iter().enumerate() {
        let traj = trajectory_from_path(&run.path, x);
        write(dir, &format!("trajectory_{i}.tsv"), &traj.table())?;
        let residuals = analyticity_diagnostic(&traj, &cfg.degrees).map_err(|e| ConfigError(e.to_string()))?;
        write(dir, &format!("residuals_{i}.tsv"), &residual_table(&residuals))?;
        let ok = decays_geometrically(&residuals, factor, FIT_FLOOR);
        all &= ok;
        let rate = envelope_rate(&residuals, FIT_FLOOR);
        let _ = write!(summary, "{}{}", if i > 0 { ", " } else { "" }, ok);
        manifest.summary(&format!("trajectory_{i}.envelope_rate"), num(rate));
        println!(
            "trajectory {i}: residuals {} decay per degree >= {factor}: {ok}, envelope rate {}",
            residuals
                .iter()
                .map(|(_, r)| format!("{r:.2e}"))
                .collect::<Vec<_>>()
                .join(" "),
            num(rate)
        );
    }
    manifest.summary("analyticity.per_degree", format!("[{summary}]"));
    manifest.summary("analyticity.all_decay", all);
    manifest.phase("trajectories");
    manifest.write(dir)?;
    Ok(EXIT_OK)
}

/// Options of the self test.
pub struct SelftestOptions {
    pub inject_fault: bool,
    pub overrides: Vec<(String, f64)>,
    pub desk: bool,
    /// Criterion ids to run; empty runs all.
    pub only: Vec<usize>,
}

pub fn selftest(opts: &SelftestOptions) -> Result<u8> {
    let mut cfg = if opts.desk { SuiteConfig::desk() } else { SuiteConfig::reduced() };
    for (k, v) in &opts.overrides {
        if !TOLERANCES.iter().any(|(t, _)| t == k) {
            return Err(ConfigError(format!("unknown tolerance `{k}`")).into());
        }
        cfg.overrides.insert(k.clone(), *v);
    }
    let grid = if opts.inject_fault {
        // Perturb one high-frequency entry of the Delta^{-1}(1 - chi) table.
        let clean = SpectralGrid::new(cfg.grid)?;
        let idx = clean.mode_index(&[3, 1]);
        let value = clean.tables().inv_laplace_high[idx] * (1.0 + 1e-6);
        SpectralGrid::corrupted(cfg.grid, idx, value)?
    } else {
        SpectralGrid::new(cfg.grid)?
    };
    println!(
        "selftest: N = {}, T = {}{}",
        cfg.grid.points_per_axis,
        cfg.t_end,
        if opts.inject_fault { " (fault injected)" } else { "" }
    );
    let report = |c: &lagrange_core::validation::Criterion| {
        println!("{}", c.line());
        for check in &c.checks {
            println!("      {check}");
        }
    };
    let criteria = if opts.only.is_empty() {
        run_suite(&grid, &cfg, report)
    } else {
        let mut out = Vec::new();
        for &id in &opts.only {
            let c = run_criterion(&grid, &cfg, id).ok_or_else(|| ConfigError(format!("no criterion {id}")))?;
            report(&c);
            out.push(c);
        }
        out
    };
    let failed: Vec<String> = criteria
        .iter()
        .flat_map(|c| {
            c.checks
                .iter()
                .filter(|k| k.status != Status::Pass)
                .map(move |k| format!("{}:{} {}", c.id, k.key, k.status))
        })
        .collect();
    if failed.is_empty() {
        println!("selftest: all {} criteria passed", criteria.len());
        Ok(EXIT_OK)
    } else {
        println!("selftest: {} check(s) not passed: {}", failed.len(), failed.join(", "));
        Ok(EXIT_SELFTEST)
    }
}
