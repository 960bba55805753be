//! Versioned little-endian binary container for grid fields.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | content                                  |
//! |--------|------|------------------------------------------|
//! | 0      | 8    | magic `LLGHOMCF`                          |
//! | 8      | 4    | format version (u32)                      |
//! | 12     | 4    | kind (u32, see [`Kind`])                  |
//! | 16     | 4    | dimension n (u32)                         |
//! | 20     | 4    | reserved, zero                            |
//! | 24     | 8    | cells per axis (u64)                      |
//! | 32     | 8    | metadata length in bytes (u64)            |
//! | 40     | …    | metadata, UTF-8 `key = value` lines       |
//! | …      | 8    | field count (u64)                         |
//! | …      | …    | directory: per field u32 name length, name bytes, u64 byte offset, u64 value count |
//! | …      | …    | field data, f64 little-endian             |

use std::collections::BTreeMap;
use std::path::Path;

use crate::cellsolve::{CellDiagnostics, CellSolutions, HomogenizedModel};
use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::llg::{EnergyBreakdown, EnergyLogEntry, MagnetizationField, Trajectory};
use crate::material::Mat3;

pub const MAGIC: &[u8; 8] = b"LLGHOMCF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Cell solutions and the homogenized model.
    Cell = 1,
    /// Magnetization snapshots of one run.
    Trajectory = 2,
    /// Corrected approximations of `m^ε` at snapshot times.
    Approximation = 3,
}

impl Kind {
    fn from_code(c: u32) -> Result<Self> {
        match c {
            1 => Ok(Kind::Cell),
            2 => Ok(Kind::Trajectory),
            3 => Ok(Kind::Approximation),
            _ => Err(Error::Container(format!("unknown kind {c}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Cell => "cell",
            Kind::Trajectory => "trajectory",
            Kind::Approximation => "approximation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: Kind,
    pub dim: usize,
    pub cells: usize,
    pub meta: BTreeMap<String, String>,
    fields: Vec<(String, Vec<f64>)>,
}

impl Container {
    pub fn new(kind: Kind, grid: Grid) -> Self {
        Self { kind, dim: grid.dim(), cells: grid.cells(), meta: BTreeMap::new(), fields: Vec::new() }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim, self.cells).map_err(|e| Error::Container(e.to_string()))
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta_f64(&self, key: &str) -> Result<f64> {
        let v = self.meta.get(key).ok_or_else(|| Error::Container(format!("metadata key '{key}' missing")))?;
        v.parse().map_err(|_| Error::Container(format!("metadata key '{key}' is not a number: {v}")))
    }

    /// Adds a field, replacing any field of the same name.
    pub fn push(&mut self, name: &str, data: Vec<f64>) {
        if let Some(slot) = self.fields.iter_mut().find(|(n, _)| n == name) {
            slot.1 = data;
        } else {
            self.fields.push((name.to_string(), data));
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, d)| d.as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.get(name).ok_or_else(|| Error::Container(format!("field '{name}' missing")))
    }

    /// Stores the three components back to back.
    pub fn push_vector(&mut self, name: &str, f: &VectorField) {
        let mut d = Vec::with_capacity(3 * f.len());
        for c in &f.comps {
            d.extend_from_slice(c);
        }
        self.push(name, d);
    }

    pub fn vector(&self, name: &str) -> Result<VectorField> {
        let grid = self.grid()?;
        let d = self.require(name)?;
        let n = grid.len();
        if d.len() != 3 * n {
            return Err(Error::Container(format!("field '{name}' has {} values, expected {}", d.len(), 3 * n)));
        }
        let mut f = VectorField::zeros(grid);
        for c in 0..3 {
            f.comps[c].copy_from_slice(&d[c * n..(c + 1) * n]);
        }
        Ok(f)
    }

    pub fn expect_kind(&self, kind: Kind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Container(format!("expected a {} container, found {}", kind.name(), self.kind.name())));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta: String = self.meta.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.kind as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&(self.cells as u64).to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        out.extend_from_slice(&(self.fields.len() as u64).to_le_bytes());
        let dir_len: usize = self.fields.iter().map(|(n, _)| 4 + n.len() + 16).sum();
        let mut offset = out.len() + dir_len;
        for (name, data) in &self.fields {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(offset as u64).to_le_bytes());
            out.extend_from_slice(&(data.len() as u64).to_le_bytes());
            offset += 8 * data.len();
        }
        for (_, data) in &self.fields {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Container("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Container(format!("unsupported version {version}")));
        }
        let kind = Kind::from_code(r.u32()?)?;
        let dim = r.u32()? as usize;
        r.u32()?;
        let cells = r.u64()? as usize;
        let meta_len = r.u64()? as usize;
        let meta_text =
            std::str::from_utf8(r.take(meta_len)?).map_err(|_| Error::Container("metadata is not UTF-8".into()))?;
        let mut meta = BTreeMap::new();
        for line in meta_text.lines() {
            let (k, v) =
                line.split_once(" = ").ok_or_else(|| Error::Container(format!("bad metadata line '{line}'")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let count = r.u64()? as usize;
        let mut dir = Vec::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name =
                std::str::from_utf8(r.take(len)?).map_err(|_| Error::Container("field name is not UTF-8".into()))?;
            dir.push((name.to_string(), r.u64()? as usize, r.u64()? as usize));
        }
        let mut fields = Vec::with_capacity(count);
        for (name, offset, len) in dir {
            let end = len.checked_mul(8).and_then(|b| b.checked_add(offset));
            let chunk = match end {
                Some(end) if end <= bytes.len() => &bytes[offset..end],
                _ => return Err(Error::Container(format!("field '{name}' runs past the end of the file"))),
            };
            let data = chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            fields.push((name, data));
        }
        let c = Self { kind, dim, cells, meta, fields };
        c.grid()?;
        Ok(c)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Reads a container; a missing file is a [`Error::MissingArtifact`].
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.display().to_string()),
            _ => Error::from(e),
        })?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Container("truncated header".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn flat(m: &Mat3) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

fn mat(d: &[f64]) -> Result<Mat3> {
    if d.len() != 9 {
        return Err(Error::Container(format!("3x3 matrix needs 9 values, got {}", d.len())));
    }
    let mut m = [[0.0; 3]; 3];
    for (k, v) in d.iter().enumerate() {
        m[k / 3][k % 3] = *v;
    }
    Ok(m)
}

/// Packs cell solutions and the homogenized model.
pub fn cell_container(cells: &CellSolutions, hom: &HomogenizedModel) -> Container {
    let mut c = Container::new(Kind::Cell, cells.grid);
    c.set_meta("a0_asymmetry", format!("{:e}", hom.a0_asymmetry));
    c.set_meta("max_second_order_rhs_mean", format!("{:e}", cells.diagnostics.max_second_order_rhs_mean));
    c.set_meta("hessian_symmetry_defect", format!("{:e}", cells.diagnostics.hessian_symmetry_defect));
    c.set_meta("total_iterations", cells.diagnostics.total_iterations);
    c.set_meta("theta_size", cells.theta.len());
    c.set_meta("lambda_size", cells.lambda.len());
    c.push("a0", flat(&hom.a0));
    c.push("m0", vec![hom.m0]);
    c.push("k0", vec![hom.k0]);
    c.push("hd0", flat(&hom.hd0));
    for (i, chi) in cells.chi.iter().enumerate() {
        c.push(&format!("chi.{i}"), chi.clone());
    }
    for (i, row) in cells.theta.iter().enumerate() {
        for (j, f) in row.iter().enumerate() {
            c.push(&format!("theta.{i}.{j}"), f.clone());
        }
    }
    for (i, row) in cells.lambda.iter().enumerate() {
        for (j, f) in row.iter().enumerate() {
            c.push(&format!("lambda.{i}.{j}"), f.clone());
        }
    }
    c.push("kappa", cells.kappa.clone());
    c.push("rho", cells.rho.clone());
    c.push("u_tilde", cells.u_tilde.clone());
    c.push("hd_cell", cells.hd_cell.iter().flat_map(flat).collect());
    c
}

/// Inverse of [`cell_container`].
pub fn read_cell(c: &Container) -> Result<(CellSolutions, HomogenizedModel)> {
    c.expect_kind(Kind::Cell)?;
    let grid = c.grid()?;
    let dim = c.dim;
    let field = |name: &str| -> Result<Vec<f64>> {
        let d = c.require(name)?;
        if d.len() != grid.len() {
            return Err(Error::Container(format!("field '{name}' has {} values, expected {}", d.len(), grid.len())));
        }
        Ok(d.to_vec())
    };
    let square = |prefix: &str, size: usize| -> Result<Vec<Vec<Vec<f64>>>> {
        (0..size).map(|i| (0..size).map(|j| field(&format!("{prefix}.{i}.{j}"))).collect()).collect()
    };
    let hom = HomogenizedModel {
        dim,
        a0: mat(c.require("a0")?)?,
        m0: c.require("m0")?[0],
        k0: c.require("k0")?[0],
        hd0: mat(c.require("hd0")?)?,
        a0_asymmetry: c.meta_f64("a0_asymmetry")?,
    };
    let hd_flat = c.require("hd_cell")?;
    if hd_flat.len() != 9 * grid.len() {
        return Err(Error::Container("field 'hd_cell' has the wrong length".into()));
    }
    let cells = CellSolutions {
        grid,
        chi: (0..dim).map(|i| field(&format!("chi.{i}"))).collect::<Result<_>>()?,
        theta: square("theta", c.meta_f64("theta_size")? as usize)?,
        kappa: field("kappa")?,
        rho: field("rho")?,
        lambda: square("lambda", c.meta_f64("lambda_size")? as usize)?,
        u_tilde: field("u_tilde")?,
        hd_cell: hd_flat.chunks_exact(9).map(mat).collect::<Result<_>>()?,
        diagnostics: CellDiagnostics {
            max_second_order_rhs_mean: c.meta_f64("max_second_order_rhs_mean")?,
            hessian_symmetry_defect: c.meta_f64("hessian_symmetry_defect")?,
            total_iterations: c.meta_f64("total_iterations")? as usize,
        },
    };
    Ok((cells, hom))
}

/// Packs snapshots as `m.<k>` plus their times in `t`.
pub fn snapshot_container(kind: Kind, grid: Grid, snapshots: &[MagnetizationField]) -> Container {
    let mut c = Container::new(kind, grid);
    c.push("t", snapshots.iter().map(|s| s.t).collect());
    for (k, s) in snapshots.iter().enumerate() {
        c.push_vector(&format!("m.{k}"), &s.m);
    }
    c
}

/// Snapshots of a trajectory container, in time order.
pub fn read_snapshots(c: &Container) -> Result<Vec<MagnetizationField>> {
    c.expect_kind(Kind::Trajectory)?;
    let times = c.require("t")?.to_vec();
    times.iter().enumerate().map(|(k, &t)| MagnetizationField::new(c.vector(&format!("m.{k}"))?, t)).collect()
}

const LOG_COLUMNS: [&str; 13] = [
    "t",
    "exchange",
    "anisotropy",
    "stray",
    "microscale",
    "zeeman",
    "total",
    "damping_integral",
    "kinetic_integral",
    "max_norm_deviation",
    "field_norm",
    "inner_iterations",
    "renormalization_defect",
];

fn log_row(e: &EnergyLogEntry) -> [f64; 13] {
    let g = &e.energy;
    [
        e.t,
        g.exchange,
        g.anisotropy,
        g.stray,
        g.microscale,
        g.zeeman,
        g.total,
        e.damping_integral,
        e.kinetic_integral,
        e.max_norm_deviation,
        e.field_norm,
        e.inner_iterations as f64,
        e.renormalization_defect,
    ]
}

/// Snapshots, the final field and the full energy log of a run.
pub fn trajectory_container(traj: &Trajectory) -> Container {
    let mut c = snapshot_container(Kind::Trajectory, traj.final_field.grid(), &traj.snapshots);
    c.set_meta("tau", format!("{:?}", traj.tau));
    c.set_meta("alpha", format!("{:?}", traj.alpha));
    c.set_meta("zeeman_floor", format!("{:?}", traj.zeeman_floor));
    c.set_meta("final_t", format!("{:?}", traj.final_field.t));
    c.push_vector("final", &traj.final_field.m);
    for (j, name) in LOG_COLUMNS.iter().enumerate() {
        c.push(&format!("log.{name}"), traj.log.iter().map(|e| log_row(e)[j]).collect());
    }
    c
}

/// Inverse of [`trajectory_container`].
pub fn read_trajectory(c: &Container) -> Result<Trajectory> {
    let snapshots = read_snapshots(c)?;
    let cols: Vec<&[f64]> = LOG_COLUMNS.iter().map(|n| c.require(&format!("log.{n}"))).collect::<Result<_>>()?;
    let rows = cols[0].len();
    if cols.iter().any(|col| col.len() != rows) {
        return Err(Error::Container("energy log columns differ in length".into()));
    }
    let log = (0..rows)
        .map(|r| EnergyLogEntry {
            t: cols[0][r],
            energy: EnergyBreakdown {
                exchange: cols[1][r],
                anisotropy: cols[2][r],
                stray: cols[3][r],
                microscale: cols[4][r],
                zeeman: cols[5][r],
                total: cols[6][r],
            },
            damping_integral: cols[7][r],
            kinetic_integral: cols[8][r],
            max_norm_deviation: cols[9][r],
            field_norm: cols[10][r],
            inner_iterations: cols[11][r] as usize,
            renormalization_defect: cols[12][r],
        })
        .collect();
    Ok(Trajectory {
        tau: c.meta_f64("tau")?,
        snapshots,
        log,
        final_field: MagnetizationField::new(c.vector("final")?, c.meta_f64("final_t")?)?,
        alpha: c.meta_f64("alpha")?,
        zeeman_floor: c.meta_f64("zeeman_floor")?,
    })
}
