//! Line-oriented `key = value` run configuration.
//!
//! `#` starts a comment. Every key may appear at most once and unknown keys are
//! rejected. See `docs/config.md` for the schema.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::cellsolve::{CellSettings, CellSolutions, HomogenizedModel};
use crate::correctors::{self, Profile, ZeemanCorrector};
use crate::error::{Error, Result};
use crate::grid::{Grid, Vec3};
use crate::harness::SweepConfig;
use crate::llg::{kernel_for, LlgProblem, MagnetizationField, SimulationConfig};
use crate::material::{CoefficientFamily, ExchangeTensor, HarmonicMode, MaterialModel};

pub const KEYS: [&str; 30] = [
    "dim",
    "a",
    "a11",
    "a22",
    "a33",
    "a12",
    "a13",
    "a23",
    "K",
    "Ms",
    "u",
    "h_a",
    "alpha",
    "mu0",
    "n_cell",
    "eps",
    "cells",
    "tau",
    "T",
    "tol",
    "max_iter",
    "output_every",
    "profile",
    "zeeman_corrector",
    "sweep_eps",
    "points_per_period",
    "coarse_cells",
    "spot_check",
    "workers",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub model: MaterialModel,
    pub n_cell: usize,
    /// `0` selects the homogenized problem.
    pub eps: f64,
    pub cells: usize,
    pub tau: f64,
    pub t_final: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub output_every: usize,
    pub profile: Profile,
    pub zeeman: ZeemanCorrector,
    pub sweep_eps: Vec<f64>,
    pub points_per_period: usize,
    pub coarse_cells: usize,
    pub spot_check: bool,
    /// Worker threads (`0` = all cores). Never affects results.
    pub workers: usize,
    /// Seed for randomized inputs; unused by the deterministic pipelines.
    pub seed: u64,
}

struct Entry {
    line: usize,
    value: String,
}

struct Raw {
    entries: HashMap<String, Entry>,
}

fn parse_err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Parse { line, key: key.to_string(), message: message.into() }
}

fn invalid(line: Option<usize>, constraint: impl Into<String>) -> Error {
    Error::Validation { line, constraint: constraint.into() }
}

fn number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let (p, q): (f64, f64) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
        return (q != 0.0).then_some(p / q);
    }
    s.parse().ok().filter(|v: &f64| v.is_finite())
}

fn numbers(s: &str) -> Option<Vec<f64>> {
    s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).map(number).collect()
}

fn parse_family(s: &str) -> std::result::Result<CoefficientFamily, String> {
    let mut it = s.split_whitespace();
    let head = it.next().ok_or("empty coefficient")?;
    if let Some(v) = number(head) {
        return if it.next().is_none() { Ok(CoefficientFamily::Constant(v)) } else { Err("trailing tokens".into()) };
    }
    let mut params: HashMap<&str, &str> = HashMap::new();
    let mut modes = Vec::new();
    for tok in it {
        let (k, v) = tok.split_once('=').ok_or_else(|| format!("expected name=value, got '{tok}'"))?;
        if k == "mode" {
            modes.push(parse_mode(v)?);
        } else if params.insert(k, v).is_some() {
            return Err(format!("parameter '{k}' repeated"));
        }
    }
    let take = |params: &mut HashMap<&str, &str>, k: &str, default: Option<f64>| -> std::result::Result<f64, String> {
        match params.remove(k) {
            Some(v) => number(v).ok_or_else(|| format!("parameter '{k}' is not a number")),
            None => default.ok_or_else(|| format!("missing parameter '{k}'")),
        }
    };
    let fam = match head {
        "constant" => {
            let v = take(&mut params, "value", None)?;
            CoefficientFamily::Constant(v)
        }
        "harmonic" => {
            let mean = take(&mut params, "mean", None)?;
            let amp = take(&mut params, "amp", None)?;
            let phase = take(&mut params, "phase", Some(0.0))?;
            let k = parse_wave_vector(params.remove("k").ok_or("missing parameter 'k'")?)?;
            CoefficientFamily::SingleHarmonic { mean, mode: HarmonicMode { amp, k, phase } }
        }
        "multiharmonic" => {
            let mean = take(&mut params, "mean", None)?;
            if modes.is_empty() {
                return Err("multiharmonic needs at least one mode=amp:k1,k2,k3:phase".into());
            }
            CoefficientFamily::MultiHarmonic { mean, modes: std::mem::take(&mut modes) }
        }
        "checkerboard" => {
            let low = take(&mut params, "low", None)?;
            let high = take(&mut params, "high", None)?;
            let sharpness = take(&mut params, "sharpness", None)?;
            CoefficientFamily::SmoothedCheckerboard { low, high, sharpness }
        }
        other => return Err(format!("unknown family '{other}' (constant, harmonic, multiharmonic, checkerboard)")),
    };
    if let Some(k) = params.keys().next() {
        return Err(format!("unknown parameter '{k}' for family '{head}'"));
    }
    if !modes.is_empty() {
        return Err(format!("'mode' is only valid for multiharmonic, not '{head}'"));
    }
    Ok(fam)
}

fn parse_wave_vector(s: &str) -> std::result::Result<[i32; 3], String> {
    let v: Vec<i32> = s
        .split(',')
        .map(|t| t.trim().parse::<i32>().map_err(|_| format!("wave vector entry '{t}' is not an integer")))
        .collect::<std::result::Result<_, _>>()?;
    if v.is_empty() || v.len() > 3 {
        return Err("wave vector needs 1 to 3 integers".into());
    }
    let mut k = [0; 3];
    k[..v.len()].copy_from_slice(&v);
    Ok(k)
}

fn parse_mode(s: &str) -> std::result::Result<HarmonicMode, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("mode '{s}' must read amp:k1,k2,k3:phase"));
    }
    let amp = number(parts[0]).ok_or("mode amplitude is not a number")?;
    let phase = number(parts[2]).ok_or("mode phase is not a number")?;
    Ok(HarmonicMode { amp, k: parse_wave_vector(parts[1])?, phase })
}

/// Canonical text of a family, accepted back by the parser.
pub fn format_family(f: &CoefficientFamily) -> String {
    let k = |k: [i32; 3]| format!("{},{},{}", k[0], k[1], k[2]);
    match f {
        CoefficientFamily::Constant(v) => format!("constant value={v:?}"),
        CoefficientFamily::SingleHarmonic { mean, mode } => {
            format!("harmonic mean={mean:?} amp={:?} k={} phase={:?}", mode.amp, k(mode.k), mode.phase)
        }
        CoefficientFamily::MultiHarmonic { mean, modes } => {
            let mut s = format!("multiharmonic mean={mean:?}");
            for m in modes {
                let _ = write!(s, " mode={:?}:{}:{:?}", m.amp, k(m.k), m.phase);
            }
            s
        }
        CoefficientFamily::SmoothedCheckerboard { low, high, sharpness } => {
            format!("checkerboard low={low:?} high={high:?} sharpness={sharpness:?}")
        }
    }
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) =
                content.split_once('=').ok_or_else(|| parse_err(line, content, "expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(parse_err(line, key, "empty key"));
            }
            if !KEYS.contains(&key) {
                return Err(parse_err(line, key, "unknown key"));
            }
            if value.is_empty() {
                return Err(parse_err(line, key, "empty value"));
            }
            if let Some(prev) = entries.insert(key.to_string(), Entry { line, value: value.to_string() }) {
                return Err(parse_err(line, key, format!("duplicate key (first given on line {})", prev.line)));
            }
        }
        Ok(Self { entries })
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn get<T>(&self, key: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).map_err(|m| parse_err(e.line, key, m)),
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        self.get(key, |v| number(v).ok_or_else(|| format!("'{v}' is not a finite number")))
    }

    fn int(&self, key: &str) -> Result<Option<usize>> {
        self.get(key, |v| v.parse::<usize>().map_err(|_| format!("'{v}' is not a non-negative integer")))
    }

    fn vec3(&self, key: &str) -> Result<Option<Vec3>> {
        self.get(key, |v| match numbers(v) {
            Some(x) if x.len() == 3 => Ok([x[0], x[1], x[2]]),
            _ => Err(format!("'{v}' is not a 3-vector")),
        })
    }

    fn family(&self, key: &str) -> Result<Option<CoefficientFamily>> {
        self.get(key, parse_family)
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key, |v| match v {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(format!("'{v}' is not a boolean")),
        })
    }
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::MissingArtifact(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw = Raw::parse(text)?;
        let dim = raw.int("dim")?.ok_or_else(|| invalid(None, "dim is required (1, 2 or 3)"))?;
        if !(1..=3).contains(&dim) {
            return Err(invalid(raw.line("dim"), "dim in {1, 2, 3}"));
        }
        for (d, key) in ["a22", "a33", "a12", "a13", "a23"].iter().enumerate() {
            let needed = [2, 3, 2, 3, 3][d];
            if dim < needed && raw.line(key).is_some() {
                return Err(invalid(raw.line(key), format!("{key} needs dim >= {needed}")));
            }
        }
        let tensor_keys = ["a11", "a22", "a33", "a12", "a13", "a23"];
        let a = if let Some(iso) = raw.family("a")? {
            if let Some(k) = tensor_keys.iter().find(|k| raw.line(k).is_some()) {
                return Err(invalid(raw.line(k), "give either 'a' or the entries a11, a12, ..., not both"));
            }
            ExchangeTensor::isotropic(dim, iso)
        } else {
            let mut diag = Vec::new();
            for d in 0..dim {
                diag.push(raw.family(&format!("a{}{}", d + 1, d + 1))?.unwrap_or(CoefficientFamily::Constant(1.0)));
            }
            let mut off = Vec::new();
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                if let Some(f) = raw.family(&format!("a{}{}", i + 1, j + 1))? {
                    off.push((i, j, f));
                }
            }
            ExchangeTensor::new(dim, diag, off)?
        };
        let model = MaterialModel {
            dim,
            a_min: 0.0,
            a_max: 0.0,
            a,
            anisotropy: raw.family("K")?.unwrap_or(CoefficientFamily::Constant(0.0)),
            ms: raw.family("Ms")?.unwrap_or(CoefficientFamily::Constant(1.0)),
            easy_axis: raw.vec3("u")?.unwrap_or([0.0, 0.0, 1.0]),
            alpha: raw.float("alpha")?.unwrap_or(1.0),
            mu0: raw.float("mu0")?.unwrap_or(0.0),
            h_applied: raw.vec3("h_a")?.unwrap_or([0.0; 3]),
        };
        if !(model.alpha > 0.0) {
            return Err(invalid(raw.line("alpha"), "alpha > 0"));
        }
        if model.mu0 < 0.0 {
            return Err(invalid(raw.line("mu0"), "mu0 >= 0"));
        }
        if model.mu0 > 0.0 && dim == 1 {
            return Err(invalid(
                raw.line("mu0"),
                "mu0 > 0 requires n != 1 (the stray-field problem and its homogenization are posed for n = 2, 3)",
            ));
        }
        let u = crate::grid::norm(model.easy_axis);
        if (u - 1.0).abs() > 1e-12 {
            return Err(invalid(raw.line("u"), format!("|u| = 1 (got {u})")));
        }
        let model = MaterialModel::new(
            model.a,
            model.anisotropy,
            model.ms,
            model.easy_axis,
            model.alpha,
            model.mu0,
            model.h_applied,
        )
        .map_err(|e| invalid(None, e.to_string()))?;

        let n_cell = raw.int("n_cell")?.unwrap_or([256, 64, 32][dim - 1]);
        if n_cell < 4 {
            return Err(invalid(raw.line("n_cell"), "n_cell >= 4"));
        }
        let eps = raw.float("eps")?.unwrap_or(0.0);
        if !(0.0..=1.0).contains(&eps) {
            return Err(invalid(raw.line("eps"), "0 <= eps <= 1"));
        }
        let points_per_period = raw.int("points_per_period")?.unwrap_or(if dim == 1 { 16 } else { 8 });
        if points_per_period < 8 {
            return Err(invalid(raw.line("points_per_period"), "points_per_period >= 8"));
        }
        let cells = match raw.int("cells")? {
            Some(n) => n,
            None if eps > 0.0 => (points_per_period as f64 / eps - 1e-9).ceil() as usize,
            None => 64,
        };
        if cells < 4 {
            return Err(invalid(raw.line("cells"), "cells >= 4"));
        }
        let grid = Grid::new(dim, cells).map_err(|e| invalid(raw.line("cells"), e.to_string()))?;
        if eps > 0.0 && grid.h() > eps / 8.0 * (1.0 + 1e-12) {
            return Err(invalid(raw.line("cells"), format!("h <= eps/8 (h = {}, eps = {eps})", grid.h())));
        }
        let tau = raw.float("tau")?.unwrap_or_else(|| SimulationConfig::default_tau(grid.h(), model.a_max));
        if !(tau > 0.0) {
            return Err(invalid(raw.line("tau"), "tau > 0"));
        }
        let t_final = raw.float("T")?.unwrap_or(0.1);
        if t_final < 0.0 {
            return Err(invalid(raw.line("T"), "T >= 0"));
        }
        if t_final > 0.0 && t_final < tau * (1.0 - 1e-12) {
            return Err(invalid(raw.line("T"), "T >= tau"));
        }
        let tol = raw.float("tol")?.unwrap_or(1e-10);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(invalid(raw.line("tol"), "0 < tol < 1"));
        }
        let max_iter = raw.int("max_iter")?.unwrap_or(5000);
        if max_iter == 0 {
            return Err(invalid(raw.line("max_iter"), "max_iter >= 1"));
        }
        let profile = match raw.entries.get("profile") {
            Some(e) => Profile::from_name(&e.value).map_err(|err| parse_err(e.line, "profile", err.to_string()))?,
            None => Profile::Bump,
        };
        let zeeman = raw
            .get("zeeman_corrector", |v| match v {
                "literal" => Ok(ZeemanCorrector::Literal),
                "centered" => Ok(ZeemanCorrector::Centered),
                _ => Err(format!("'{v}' is not one of literal, centered")),
            })?
            .unwrap_or_default();
        let sweep_eps =
            match raw.get("sweep_eps", |v| numbers(v).ok_or_else(|| format!("'{v}' is not a list of numbers")))? {
                Some(v) => v,
                None => (2..=if dim == 1 { 6 } else { 5 }).map(|k| 2f64.powi(-k)).collect(),
            };
        if sweep_eps.is_empty() || sweep_eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(invalid(raw.line("sweep_eps"), "every sweep eps in (0, 1]"));
        }
        let coarse_cells = raw.int("coarse_cells")?.unwrap_or(if dim == 1 { 512 } else { 128 });
        if coarse_cells < 4 {
            return Err(invalid(raw.line("coarse_cells"), "coarse_cells >= 4"));
        }
        Grid::new(dim, coarse_cells).map_err(|e| invalid(raw.line("coarse_cells"), e.to_string()))?;
        Ok(Self {
            model,
            n_cell,
            eps,
            cells,
            tau,
            t_final,
            tol,
            max_iter,
            output_every: raw.int("output_every")?.unwrap_or(0),
            profile,
            zeeman,
            sweep_eps,
            points_per_period,
            coarse_cells,
            spot_check: raw.bool("spot_check")?.unwrap_or(false),
            workers: raw.int("workers")?.unwrap_or(0),
            seed: raw
                .get("seed", |v| v.parse::<u64>().map_err(|_| format!("'{v}' is not an unsigned integer")))?
                .unwrap_or(0),
        })
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.model.dim, self.cells).expect("validated at parse time")
    }

    pub fn cell_settings(&self) -> CellSettings {
        CellSettings { tol: self.tol.min(1e-10), ..CellSettings::new(self.n_cell) }
    }

    /// The ε-problem for `eps > 0`, otherwise the homogenized one.
    pub fn problem(&self, hom: &HomogenizedModel) -> Result<LlgProblem> {
        let grid = self.grid();
        let kernel = kernel_for(&self.model, grid)?;
        if self.eps > 0.0 {
            LlgProblem::epsilon(&self.model, self.eps, grid, kernel)
        } else {
            LlgProblem::homogenized(&self.model, hom, grid, kernel)
        }
    }

    /// Initial data matching [`Config::problem`].
    pub fn initial(&self, cells: &CellSolutions) -> Result<MagnetizationField> {
        let grid = self.grid();
        let m = if self.eps > 0.0 {
            correctors::make_initial_data(self.profile, cells, self.eps, grid)?.1
        } else {
            self.profile.sample(grid)
        };
        MagnetizationField::new(m, 0.0)
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            tau: self.tau,
            t_final: self.t_final,
            tol: self.tol,
            max_iter: self.max_iter,
            output_every: self.output_every,
        }
    }

    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            model: self.model.clone(),
            eps: self.sweep_eps.clone(),
            profile: self.profile,
            t_final: self.t_final,
            tau: self.tau,
            points_per_period: self.points_per_period,
            coarse_cells: self.coarse_cells,
            cell_cells: self.n_cell,
            tol: self.tol,
            max_iter: self.max_iter,
            spot_check: self.spot_check,
        }
    }

    /// Every setting, defaults included, in canonical `key = value` form.
    /// Parsing the echo gives back an equal config, minus `workers`.
    pub fn echo(&self) -> String {
        let m = &self.model;
        let v = |x: Vec3| format!("{:?} {:?} {:?}", x[0], x[1], x[2]);
        let mut s = format!("dim = {}\n", m.dim);
        for d in 0..m.dim {
            let _ = writeln!(s, "a{}{} = {}", d + 1, d + 1, format_family(&m.a.diagonal()[d]));
        }
        for (i, j, f) in m.a.off_diagonal() {
            let _ = writeln!(s, "a{}{} = {}", i + 1, j + 1, format_family(f));
        }
        let _ = writeln!(s, "K = {}", format_family(&m.anisotropy));
        let _ = writeln!(s, "Ms = {}", format_family(&m.ms));
        let _ = writeln!(s, "u = {}", v(m.easy_axis));
        let _ = writeln!(s, "h_a = {}", v(m.h_applied));
        let _ = writeln!(s, "alpha = {:?}", m.alpha);
        let _ = writeln!(s, "mu0 = {:?}", m.mu0);
        let _ = writeln!(s, "n_cell = {}", self.n_cell);
        let _ = writeln!(s, "eps = {:?}", self.eps);
        let _ = writeln!(s, "cells = {}", self.cells);
        let _ = writeln!(s, "tau = {:?}", self.tau);
        let _ = writeln!(s, "T = {:?}", self.t_final);
        let _ = writeln!(s, "tol = {:?}", self.tol);
        let _ = writeln!(s, "max_iter = {}", self.max_iter);
        let _ = writeln!(s, "output_every = {}", self.output_every);
        let _ = writeln!(s, "profile = {}", self.profile.name());
        let _ = writeln!(
            s,
            "zeeman_corrector = {}",
            match self.zeeman {
                ZeemanCorrector::Literal => "literal",
                ZeemanCorrector::Centered => "centered",
            }
        );
        let eps: Vec<String> = self.sweep_eps.iter().map(|e| format!("{e:?}")).collect();
        let _ = writeln!(s, "sweep_eps = {}", eps.join(" "));
        let _ = writeln!(s, "points_per_period = {}", self.points_per_period);
        let _ = writeln!(s, "coarse_cells = {}", self.coarse_cells);
        let _ = writeln!(s, "spot_check = {}", self.spot_check);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}
