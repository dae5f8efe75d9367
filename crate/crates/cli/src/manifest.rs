//! `manifest.txt`: the `[config]` echo followed by a `[run]` record.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;

pub struct Manifest {
    command: &'static str,
    config: String,
    phases: Vec<(String, f64)>,
    summary: Vec<(String, String)>,
    failure: Option<String>,
    clock: Instant,
}

impl Manifest {
    pub fn new(command: &'static str, config: String) -> Self {
        Manifest {
            command,
            config,
            phases: Vec::new(),
            summary: Vec::new(),
            failure: None,
            clock: Instant::now(),
        }
    }

    /// Closes the current phase and records its wall-clock time.
    pub fn phase(&mut self, name: &str) {
        self.phases.push((name.to_string(), self.clock.elapsed().as_secs_f64()));
        self.clock = Instant::now();
    }

    pub fn summary(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn fail(&mut self, record: String) {
        self.failure = Some(record);
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# lagrange run manifest\n[config]\n");
        out.push_str(&self.config);
        out.push_str("\n[run]\n");
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
        for (name, secs) in &self.phases {
            let _ = writeln!(out, "wall_seconds.{name} = {secs:.3}");
        }
        for (k, v) in &self.summary {
            let _ = writeln!(out, "summary.{k} = {v}");
        }
        let _ = writeln!(out, "failure = {}", self.failure.as_deref().unwrap_or("none"));
        out
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join("manifest.txt");
        std::fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}
