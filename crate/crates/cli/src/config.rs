//! Run configuration: a flat `key = value` file, optionally inside a `[config]`
//! section, with command-line overrides. Unknown and duplicate keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lagrange_core::field::Field;
use lagrange_core::geodesic::GammaStrategy;
use lagrange_core::grid::{GridSpec, SpectralGrid};
use lagrange_core::presets::Preset;
use lagrange_core::snapshot;
use lagrange_core::validation::TOLERANCES;

/// Invalid configuration; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

const KEYS: &[&str] = &[
    "dim",
    "N",
    "box_length",
    "cutoff_radius",
    "dt",
    "T",
    "record_every",
    "strategy",
    "preset",
    "amplitude",
    "decay",
    "seed",
    "snapshot",
    "output",
    "scales",
    "degrees",
    "points",
    "trajectory_T",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyChoice {
    Pullback,
    Conjugated,
    Both,
}

impl StrategyChoice {
    pub fn strategies(self) -> Vec<GammaStrategy> {
        match self {
            StrategyChoice::Pullback => vec![GammaStrategy::Pullback],
            StrategyChoice::Conjugated => vec![GammaStrategy::conjugated()],
            StrategyChoice::Both => vec![GammaStrategy::Pullback, GammaStrategy::conjugated()],
        }
    }

    fn name(self) -> &'static str {
        match self {
            StrategyChoice::Pullback => "pullback",
            StrategyChoice::Conjugated => "conjugated",
            StrategyChoice::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Preset(Preset),
    Snapshot(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub strategy: StrategyChoice,
    pub initial: InitialCondition,
    pub seed: u64,
    pub output: PathBuf,
    pub scales: Vec<f64>,
    pub degrees: Vec<usize>,
    /// Seed points as fractions of the box length.
    pub points: Vec<Vec<f64>>,
    pub trajectory_t_end: f64,
    pub tolerances: BTreeMap<String, f64>,
}

/// Raw key/value pairs in insertion order.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses the text of a config file (or a run manifest).
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        let mut active = true;
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                active = &line[1..line.len() - 1] == "config";
                continue;
            }
            if !active {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", no + 1));
            };
            let (k, v) = (k.trim(), v.trim());
            if raw.entries.contains_key(k) {
                return err(format!("line {}: duplicate key `{k}`", no + 1));
            }
            check_key(k)?;
            raw.entries.insert(k.to_string(), v.to_string());
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies a `key=value` override, replacing any earlier value.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let Some((k, v)) = assignment.split_once('=') else {
            return err(format!("override `{assignment}` is not `key=value`"));
        };
        let k = k.trim();
        check_key(k)?;
        self.entries.insert(k.to_string(), v.trim().to_string());
        Ok(())
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let dim: usize = self.get("dim", 2)?;
        if dim != 2 && dim != 3 {
            return err("`dim` must be 2 or 3");
        }
        let desk = GridSpec::desk(dim);
        let grid = GridSpec {
            dim,
            points_per_axis: self.get("N", desk.points_per_axis)?,
            box_length: self.get("box_length", desk.box_length)?,
            cutoff_radius: self.get("cutoff_radius", desk.cutoff_radius)?,
        };
        SpectralGrid::new(grid).map_err(|e| ConfigError(e.to_string()))?;
        let dt: f64 = self.get("dt", 5e-3)?;
        let t_end: f64 = self.get("T", 1.0)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return err("`dt` must be positive");
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return err("`T` must be non-negative");
        }
        let record_every: usize = self.get("record_every", 10)?;
        if record_every == 0 {
            return err("`record_every` must be at least 1");
        }
        let strategy = match self.get("strategy", "pullback".to_string())?.as_str() {
            "pullback" => StrategyChoice::Pullback,
            "conjugated" => StrategyChoice::Conjugated,
            "both" => StrategyChoice::Both,
            other => return err(format!("unknown strategy `{other}`")),
        };
        let seed: u64 = self.get("seed", 1)?;
        let preset = self.get("preset", "taylor_green".to_string())?;
        let default_amp = if preset == "random_divfree" { 0.5 } else { 1.0 };
        let amplitude: f64 = self.get("amplitude", default_amp)?;
        let decay: f64 = self.get("decay", 2.0)?;
        let initial = match preset.as_str() {
            "zero" => InitialCondition::Preset(Preset::Zero),
            "shear" => InitialCondition::Preset(Preset::Shear { amplitude }),
            "taylor_green" => InitialCondition::Preset(Preset::TaylorGreen { amplitude }),
            "random_divfree" => InitialCondition::Preset(Preset::RandomDivFree { seed, decay, amplitude }),
            "from_snapshot" => match self.entries.get("snapshot") {
                Some(p) => InitialCondition::Snapshot(PathBuf::from(p)),
                None => return err("preset `from_snapshot` needs `snapshot`"),
            },
            other => return err(format!("unknown preset `{other}`")),
        };
        if self.entries.contains_key("snapshot") && preset != "from_snapshot" {
            return err("`snapshot` is only used with preset `from_snapshot`");
        }
        let scales = parse_list(&self.get("scales", "0.25, 0.5, 0.75, 1".to_string())?, "scales")?;
        let degrees = parse_degrees(&self.get("degrees", "2..8".to_string())?)?;
        let points = parse_points(
            &self.get("points", "0.13 0.41; 0.37 0.22; 0.61 0.83; 0.9 0.55".to_string())?,
            dim,
        )?;
        let trajectory_t_end: f64 = self.get("trajectory_T", 0.5)?;
        let mut tolerances = BTreeMap::new();
        for (k, v) in &self.entries {
            if let Some(name) = k.strip_prefix("tol.") {
                let val: f64 = v
                    .parse()
                    .map_err(|_| ConfigError(format!("`{k}`: cannot parse `{v}`")))?;
                tolerances.insert(name.to_string(), val);
            }
        }
        Ok(RunConfig {
            grid,
            dt,
            t_end,
            record_every,
            strategy,
            initial,
            seed,
            output: PathBuf::from(self.get("output", "out".to_string())?),
            scales,
            degrees,
            points,
            trajectory_t_end,
            tolerances,
        })
    }
}

fn check_key(k: &str) -> Result<(), ConfigError> {
    if KEYS.contains(&k) {
        return Ok(());
    }
    if let Some(name) = k.strip_prefix("tol.") {
        if TOLERANCES.iter().any(|(t, _)| *t == name) {
            return Ok(());
        }
        return err(format!("unknown tolerance `{name}`"));
    }
    err(format!("unknown key `{k}`"))
}

fn parse_list(s: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| ConfigError(format!("`{key}`: cannot parse `{v}`")))
        })
        .collect()
}

fn parse_degrees(s: &str) -> Result<Vec<usize>, ConfigError> {
    let bad = || ConfigError(format!("`degrees`: expected `a..b` or a comma list, got `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
}

fn parse_points(s: &str, dim: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
    s.split(';')
        .map(|p| {
            let coords: Vec<f64> = p
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| ConfigError(format!("`points`: cannot parse `{v}`"))))
                .collect::<Result<_, _>>()?;
            if coords.len() != dim {
                return err(format!("`points`: `{}` needs {dim} coordinates", p.trim()));
            }
            Ok(coords)
        })
        .collect()
}

impl RunConfig {
    pub fn spectral_grid(&self) -> Arc<SpectralGrid> {
        SpectralGrid::new(self.grid).expect("validated grid")
    }

    /// Initial velocity on the configured grid.
    pub fn initial_velocity(&self, grid: &Arc<SpectralGrid>) -> Result<Field, ConfigError> {
        match &self.initial {
            InitialCondition::Preset(p) => Ok(p.build(grid)),
            InitialCondition::Snapshot(path) => {
                let f = snapshot::read_field(path, Some(grid))
                    .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
                if f.components() != grid.dim() {
                    return err("snapshot is not a velocity field");
                }
                Ok(f)
            }
        }
    }

    /// Identifier of the initial velocity recorded next to flow-map snapshots.
    pub fn initial_identifier(&self) -> String {
        match &self.initial {
            InitialCondition::Preset(p) => p.identifier(),
            InitialCondition::Snapshot(p) => format!("from_snapshot({})", p.display()),
        }
    }

    pub fn tolerance(&self, key: &str) -> f64 {
        self.tolerances.get(key).copied().unwrap_or_else(|| {
            TOLERANCES
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .expect("known tolerance key")
        })
    }

    /// Seed points in box coordinates.
    pub fn seed_points(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .map(|p| p.iter().map(|f| f * self.grid.box_length).collect())
            .collect()
    }

    /// Complete `[config]` section; feeding it back reproduces the run.
    pub fn echo(&self) -> String {
        let mut lines = vec![
            format!("dim = {}", self.grid.dim),
            format!("N = {}", self.grid.points_per_axis),
            format!("box_length = {}", self.grid.box_length),
            format!("cutoff_radius = {}", self.grid.cutoff_radius),
            format!("dt = {}", self.dt),
            format!("T = {}", self.t_end),
            format!("record_every = {}", self.record_every),
            format!("strategy = {}", self.strategy.name()),
        ];
        match &self.initial {
            InitialCondition::Preset(p) => {
                lines.push(format!("preset = {}", p.name()));
                match p {
                    Preset::Zero => {}
                    Preset::Shear { amplitude } | Preset::TaylorGreen { amplitude } => {
                        lines.push(format!("amplitude = {amplitude}"))
                    }
                    Preset::RandomDivFree { decay, amplitude, .. } => {
                        lines.push(format!("amplitude = {amplitude}"));
                        lines.push(format!("decay = {decay}"));
                    }
                }
            }
            InitialCondition::Snapshot(p) => {
                lines.push("preset = from_snapshot".into());
                lines.push(format!("snapshot = {}", p.display()));
            }
        }
        lines.push(format!("seed = {}", self.seed));
        lines.push(format!("output = {}", self.output.display()));
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        lines.push(format!("scales = {}", join(&self.scales)));
        lines.push(format!(
            "degrees = {}",
            self.degrees.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ));
        lines.push(format!(
            "points = {}",
            self.points
                .iter()
                .map(|p| p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
                .collect::<Vec<_>>()
                .join("; ")
        ));
        lines.push(format!("trajectory_T = {}", self.trajectory_t_end));
        for (k, v) in &self.tolerances {
            lines.push(format!("tol.{k} = {v}"));
        }
        lines.join("\n") + "\n"
    }
}
