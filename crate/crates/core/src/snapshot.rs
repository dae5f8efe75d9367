//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `LGFIELD1` |
//! | 4     | `u32` dimension |
//! | 4     | `u32` points per axis |
//! | 8     | `f64` box length |
//! | 8     | `f64` cutoff radius |
//! | 4     | `u32` component count |
//! | rest  | `f64` samples, component after component, each row-major (last axis fastest) |
//!
//! A flow-map snapshot is the snapshot of its displacement plus a text sidecar
//! (`<file>.meta`) holding `time` and `initial_velocity` lines.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::diffeo::DiffeoMap;
use crate::error::{FlowError, Result};
use crate::field::Field;
use crate::grid::{GridSpec, SpectralGrid};

pub const MAGIC: &[u8; 8] = b"LGFIELD1";

fn io(e: std::io::Error) -> FlowError {
    FlowError::Snapshot(e.to_string())
}

pub fn encode_field(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(36 + 8 * f.components() * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.points_per_axis() as u32).to_le_bytes());
    out.extend_from_slice(&g.box_length().to_le_bytes());
    out.extend_from_slice(&g.cutoff_radius().to_le_bytes());
    out.extend_from_slice(&(f.components() as u32).to_le_bytes());
    for c in f.values() {
        for v in c {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Header of a snapshot: grid parameters and component count.
pub fn decode_header(bytes: &[u8]) -> Result<(GridSpec, usize)> {
    if bytes.len() < 36 || &bytes[..8] != MAGIC {
        return Err(FlowError::Snapshot("not a field snapshot".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let spec = GridSpec {
        dim: u32_at(8),
        points_per_axis: u32_at(12),
        box_length: f64_at(16),
        cutoff_radius: f64_at(24),
    };
    Ok((spec, u32_at(32)))
}

/// Decodes a snapshot; with `grid` given the stored parameters must match it.
pub fn decode_field(bytes: &[u8], grid: Option<&Arc<SpectralGrid>>) -> Result<Field> {
    let (spec, components) = decode_header(bytes)?;
    let grid = match grid {
        Some(g) => {
            if g.spec() != spec {
                return Err(FlowError::Snapshot(format!(
                    "snapshot grid {spec:?} differs from run grid {:?}",
                    g.spec()
                )));
            }
            Arc::clone(g)
        }
        None => SpectralGrid::new(spec)?,
    };
    let n = grid.len();
    if components == 0 || bytes.len() != 36 + 8 * components * n {
        return Err(FlowError::Snapshot(format!(
            "expected {} sample bytes for {components} component(s), found {}",
            8 * components * n,
            bytes.len().saturating_sub(36)
        )));
    }
    let values = (0..components)
        .map(|c| {
            (0..n)
                .map(|i| {
                    let o = 36 + 8 * (c * n + i);
                    f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap())
                })
                .collect()
        })
        .collect();
    Field::from_values(&grid, values)
}

pub fn write_field(path: &Path, f: &Field) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(io)?;
    file.write_all(&encode_field(f)).map_err(io)
}

pub fn read_field(path: &Path, grid: Option<&Arc<SpectralGrid>>) -> Result<Field> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io)?;
    decode_field(&bytes, grid)
}

/// Metadata stored next to a flow-map snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffeoMeta {
    pub time: f64,
    pub initial_velocity: String,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_diffeo(path: &Path, phi: &DiffeoMap, meta: &DiffeoMeta) -> Result<()> {
    write_field(path, phi.displacement())?;
    let text = format!(
        "time = {:.16e}\ninitial_velocity = {}\n",
        meta.time, meta.initial_velocity
    );
    std::fs::write(meta_path(path), text).map_err(io)
}

pub fn read_diffeo(path: &Path, grid: Option<&Arc<SpectralGrid>>) -> Result<(DiffeoMap, DiffeoMeta)> {
    let d = read_field(path, grid)?;
    let phi = DiffeoMap::from_displacement(d)?;
    let text = std::fs::read_to_string(meta_path(path)).map_err(io)?;
    let mut time = None;
    let mut initial_velocity = None;
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            match k.trim() {
                "time" => time = v.trim().parse::<f64>().ok(),
                "initial_velocity" => initial_velocity = Some(v.trim().to_string()),
                _ => {}
            }
        }
    }
    match (time, initial_velocity) {
        (Some(time), Some(initial_velocity)) => Ok((phi, DiffeoMeta { time, initial_velocity })),
        _ => Err(FlowError::Snapshot("incomplete flow-map metadata".into())),
    }
}
