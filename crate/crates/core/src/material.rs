//! Periodic coefficient families and the physical material model.
//!
//! All coefficient functions are `Y`-periodic with `Y = [0,1]^n`. The exchange
//! tensor is a symmetric `n×n` field acting on gradient indices; each entry is
//! an independent [`CoefficientFamily`].

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Grid, Vec3};

pub type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicMode {
    pub amp: f64,
    /// Integer wave vector; entries beyond the dimension are ignored.
    pub k: [i32; 3],
    pub phase: f64,
}

impl HarmonicMode {
    fn eval(&self, y: Vec3, dim: usize) -> f64 {
        let mut arg = self.phase;
        for d in 0..dim {
            arg += 2.0 * PI * self.k[d] as f64 * y[d];
        }
        self.amp * arg.sin()
    }
}

/// Closed registry of smooth periodic scalar functions.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientFamily {
    Constant(f64),
    /// `mean + amp·sin(2π k·y + phase)`
    SingleHarmonic {
        mean: f64,
        mode: HarmonicMode,
    },
    /// `mean + Σ amp_l·sin(2π k_l·y + phase_l)`
    MultiHarmonic {
        mean: f64,
        modes: Vec<HarmonicMode>,
    },
    /// `mid + half·tanh(s·Π_d sin 2πy_d) / tanh(s)`, ranging over `[low, high]`.
    SmoothedCheckerboard {
        low: f64,
        high: f64,
        sharpness: f64,
    },
}

impl CoefficientFamily {
    pub fn eval(&self, y: Vec3, dim: usize) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::SingleHarmonic { mean, mode } => mean + mode.eval(y, dim),
            Self::MultiHarmonic { mean, modes } => mean + modes.iter().map(|m| m.eval(y, dim)).sum::<f64>(),
            Self::SmoothedCheckerboard { low, high, sharpness } => {
                let mut p = 1.0;
                for yd in y.iter().take(dim) {
                    p *= (2.0 * PI * yd).sin();
                }
                let mid = 0.5 * (low + high);
                let half = 0.5 * (high - low);
                mid + half * (sharpness * p).tanh() / sharpness.tanh()
            }
        }
    }

    /// Guaranteed `(lower, upper)` bounds over all `y`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Constant(c) => (*c, *c),
            Self::SingleHarmonic { mean, mode } => (mean - mode.amp.abs(), mean + mode.amp.abs()),
            Self::MultiHarmonic { mean, modes } => {
                let s: f64 = modes.iter().map(|m| m.amp.abs()).sum();
                (mean - s, mean + s)
            }
            Self::SmoothedCheckerboard { low, high, .. } => (*low, *high),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant(_) => true,
            Self::SingleHarmonic { mode, .. } => mode.amp == 0.0,
            Self::MultiHarmonic { modes, .. } => modes.iter().all(|m| m.amp == 0.0),
            Self::SmoothedCheckerboard { low, high, .. } => low == high,
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let finite = match self {
            Self::Constant(c) => c.is_finite(),
            Self::SingleHarmonic { mean, mode } => mean.is_finite() && mode.amp.is_finite() && mode.phase.is_finite(),
            Self::MultiHarmonic { mean, modes } => {
                mean.is_finite() && modes.iter().all(|m| m.amp.is_finite() && m.phase.is_finite())
            }
            Self::SmoothedCheckerboard { low, high, sharpness } => {
                if !(*sharpness > 0.0) {
                    return Err(Error::InvalidMaterial(format!("{what}: checkerboard sharpness must be > 0")));
                }
                if low > high {
                    return Err(Error::InvalidMaterial(format!("{what}: checkerboard needs low <= high")));
                }
                low.is_finite() && high.is_finite() && sharpness.is_finite()
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidMaterial(format!("{what}: non-finite parameter")))
        }
    }
}

/// Symmetric exchange tensor `a(y)`; `entries[i][j]` for `i <= j < dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeTensor {
    dim: usize,
    diag: Vec<CoefficientFamily>,
    /// `(i, j, family)` with `i < j`.
    off: Vec<(usize, usize, CoefficientFamily)>,
}

impl ExchangeTensor {
    pub fn isotropic(dim: usize, f: CoefficientFamily) -> Self {
        Self { dim, diag: vec![f; dim], off: Vec::new() }
    }

    pub fn new(dim: usize, diag: Vec<CoefficientFamily>, off: Vec<(usize, usize, CoefficientFamily)>) -> Result<Self> {
        if diag.len() != dim {
            return Err(Error::InvalidMaterial(format!("exchange tensor needs {dim} diagonal entries")));
        }
        for (i, j, _) in &off {
            if !(i < j && *j < dim) {
                return Err(Error::InvalidMaterial(format!("off-diagonal entry a{}{} out of range", i + 1, j + 1)));
            }
        }
        Ok(Self { dim, diag, off })
    }

    pub fn diagonal(&self) -> &[CoefficientFamily] {
        &self.diag
    }

    pub fn off_diagonal(&self) -> &[(usize, usize, CoefficientFamily)] {
        &self.off
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<&CoefficientFamily> {
        if i == j {
            return self.diag.get(i);
        }
        let (lo, hi) = (i.min(j), i.max(j));
        self.off.iter().find(|(a, b, _)| *a == lo && *b == hi).map(|(_, _, f)| f)
    }

    pub fn off_diagonal_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.off
            .iter()
            .filter(|(_, _, f)| !(f.is_constant() && f.eval([0.0; 3], self.dim) == 0.0))
            .map(|(i, j, _)| (*i, *j))
    }

    pub fn eval(&self, y: Vec3) -> Mat3 {
        let mut a = [[0.0; 3]; 3];
        for (i, f) in self.diag.iter().enumerate() {
            a[i][i] = f.eval(y, self.dim);
        }
        for (i, j, f) in &self.off {
            let v = f.eval(y, self.dim);
            a[*i][*j] = v;
            a[*j][*i] = v;
        }
        a
    }

    pub fn is_constant(&self) -> bool {
        self.diag.iter().all(|f| f.is_constant()) && self.off.iter().all(|(_, _, f)| f.is_constant())
    }

    /// Gershgorin bounds `(a_min, a_max)` valid for every `y`.
    pub fn coercivity_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.dim {
            let (dl, dh) = self.diag[i].bounds();
            let radius: f64 = self
                .off
                .iter()
                .filter(|(a, b, _)| *a == i || *b == i)
                .map(|(_, _, f)| {
                    let (l, h) = f.bounds();
                    l.abs().max(h.abs())
                })
                .sum();
            lo = lo.min(dl - radius);
            hi = hi.max(dh + radius);
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    pub dim: usize,
    pub a: ExchangeTensor,
    pub anisotropy: CoefficientFamily,
    pub ms: CoefficientFamily,
    pub easy_axis: Vec3,
    pub alpha: f64,
    pub mu0: f64,
    pub h_applied: Vec3,
    pub a_min: f64,
    pub a_max: f64,
}

impl MaterialModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: ExchangeTensor,
        anisotropy: CoefficientFamily,
        ms: CoefficientFamily,
        easy_axis: Vec3,
        alpha: f64,
        mu0: f64,
        h_applied: Vec3,
    ) -> Result<Self> {
        let dim = a.dim();
        let (a_min, a_max) = a.coercivity_bounds();
        let model = Self { dim, a, anisotropy, ms, easy_axis, alpha, mu0, h_applied, a_min, a_max };
        model.validate()?;
        Ok(model)
    }

    /// A constant-coefficient material with isotropic exchange `a`.
    pub fn uniform(dim: usize, a: f64, k: f64, ms: f64) -> Result<Self> {
        Self::new(
            ExchangeTensor::isotropic(dim, CoefficientFamily::Constant(a)),
            CoefficientFamily::Constant(k),
            CoefficientFamily::Constant(ms),
            [0.0, 0.0, 1.0],
            1.0,
            0.0,
            [0.0; 3],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidMaterial(format!("dimension {} not in 1..=3", self.dim)));
        }
        for (i, f) in self.a.diag.iter().enumerate() {
            f.validate(&format!("a{}{}", i + 1, i + 1))?;
        }
        for (i, j, f) in &self.a.off {
            f.validate(&format!("a{}{}", i + 1, j + 1))?;
        }
        self.anisotropy.validate("K")?;
        self.ms.validate("Ms")?;
        if !(self.a_min > 0.0) {
            return Err(Error::InvalidMaterial(format!(
                "exchange tensor is not uniformly coercive (a_min = {:.3e})",
                self.a_min
            )));
        }
        let u = crate::grid::norm(self.easy_axis);
        if !((u - 1.0).abs() <= 1e-12) {
            return Err(Error::InvalidMaterial(format!("easy axis must have unit length (|u| = {u})")));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidMaterial("alpha > 0 required".into()));
        }
        if !(self.mu0 >= 0.0 && self.mu0.is_finite()) {
            return Err(Error::InvalidMaterial("mu0 >= 0 required".into()));
        }
        if self.mu0 > 0.0 && self.dim == 1 {
            return Err(Error::InvalidMaterial("stray field (mu0 > 0) requires dimension 2 or 3".into()));
        }
        if !self.h_applied.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidMaterial("applied field must be finite".into()));
        }
        if !(self.ms.bounds().0 > 0.0) {
            return Err(Error::InvalidMaterial("Ms must be bounded below by a positive constant".into()));
        }
        if self.anisotropy.bounds().0 < 0.0 {
            return Err(Error::InvalidMaterial("K must be non-negative".into()));
        }
        Ok(())
    }

    pub fn a_at(&self, y: Vec3) -> Mat3 {
        self.a.eval(y)
    }

    pub fn k_at(&self, y: Vec3) -> f64 {
        self.anisotropy.eval(y, self.dim)
    }

    pub fn ms_at(&self, y: Vec3) -> f64 {
        self.ms.eval(y, self.dim)
    }

    pub fn is_constant(&self) -> bool {
        self.a.is_constant() && self.anisotropy.is_constant() && self.ms.is_constant()
    }
}

/// Coefficients sampled at the cell centres of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCoefficients {
    pub grid: Grid,
    pub a: Vec<Mat3>,
    pub k: Vec<f64>,
    pub ms: Vec<f64>,
}

impl SampledCoefficients {
    pub fn min_eigenvalue(&self) -> f64 {
        let dim = self.grid.dim();
        self.a.iter().map(|m| min_eigenvalue(m, dim)).fold(f64::INFINITY, f64::min)
    }
}

/// Samples `a, K, M_s` at the cell centres `y_k = (k + 1/2)/N` of the unit cell.
/// Periodic indexing: cell `k` and cell `k + N` are the same sample.
pub fn evaluate_on_cell_grid(model: &MaterialModel, n_cell: usize) -> Result<SampledCoefficients> {
    if n_cell < 8 || !n_cell.is_power_of_two() {
        return Err(Error::InvalidGrid(format!("N_cell must be a power of two >= 8 (got {n_cell})")));
    }
    let grid = Grid::new(model.dim, n_cell)?;
    let s = sample(model, grid, |y| y);
    check_sampled(&s)?;
    Ok(s)
}

/// Samples `a(x/ε mod 1)`, `K(x/ε mod 1)`, `M_s(x/ε mod 1)` at the cell centres of `grid`.
pub fn evaluate_epsilon_coefficients(model: &MaterialModel, eps: f64, grid: Grid) -> Result<SampledCoefficients> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("eps must be positive (got {eps})")));
    }
    if grid.dim() != model.dim {
        return Err(Error::GridMismatch(format!("grid dimension {} vs material {}", grid.dim(), model.dim)));
    }
    let s = sample(model, grid, |x| fast_variable(x, eps));
    check_sampled(&s)?;
    Ok(s)
}

/// `frac(x/ε)` componentwise.
pub fn fast_variable(x: Vec3, eps: f64) -> Vec3 {
    x.map(|v| (v / eps).rem_euclid(1.0))
}

fn sample(model: &MaterialModel, grid: Grid, to_cell: impl Fn(Vec3) -> Vec3) -> SampledCoefficients {
    let ys: Vec<Vec3> = (0..grid.len()).map(|k| to_cell(grid.center(k))).collect();
    SampledCoefficients {
        grid,
        a: ys.iter().map(|&y| model.a_at(y)).collect(),
        k: ys.iter().map(|&y| model.k_at(y)).collect(),
        ms: ys.iter().map(|&y| model.ms_at(y)).collect(),
    }
}

fn check_sampled(s: &SampledCoefficients) -> Result<()> {
    let finite =
        s.a.iter().all(|m| m.iter().flatten().all(|v| v.is_finite())) && s.k.iter().chain(&s.ms).all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidMaterial("non-finite coefficient sample".into()));
    }
    let lmin = s.min_eigenvalue();
    if !(lmin > 0.0) {
        return Err(Error::InvalidMaterial(format!(
            "sampled exchange tensor not positive definite (min eigenvalue {lmin:.3e})"
        )));
    }
    if s.ms.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidMaterial("sampled Ms not positive".into()));
    }
    Ok(())
}

/// Smallest eigenvalue of the leading `dim×dim` block of a symmetric matrix (cyclic Jacobi).
pub fn min_eigenvalue(m: &Mat3, dim: usize) -> f64 {
    let mut a = *m;
    for _sweep in 0..50 {
        let mut off = 0.0;
        for p in 0..dim {
            for q in (p + 1)..dim {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..dim).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(mean: f64, amp: f64, k: [i32; 3]) -> CoefficientFamily {
        CoefficientFamily::SingleHarmonic { mean, mode: HarmonicMode { amp, k, phase: 0.0 } }
    }

    fn model_with_a(dim: usize, a: CoefficientFamily) -> MaterialModel {
        MaterialModel::new(
            ExchangeTensor::isotropic(dim, a),
            CoefficientFamily::Constant(0.0),
            CoefficientFamily::Constant(1.0),
            [0.0, 0.0, 1.0],
            1.0,
            0.0,
            [0.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn constant_family_samples_are_constant() {
        let m = model_with_a(2, CoefficientFamily::Constant(2.0));
        let s = evaluate_on_cell_grid(&m, 8).unwrap();
        assert!(s.a.iter().all(|a| a[0][0] == 2.0 && a[1][1] == 2.0 && a[0][1] == 0.0));
    }

    #[test]
    fn single_harmonic_first_sample() {
        let m = model_with_a(1, harmonic(2.0, 1.0, [1, 0, 0]));
        let s = evaluate_on_cell_grid(&m, 16).unwrap();
        let expected = 2.0 + (PI / 16.0).sin();
        assert!((s.a[0][0][0] - expected).abs() < 1e-15);
    }

    #[test]
    fn checkerboard_respects_contrast() {
        let f = CoefficientFamily::SmoothedCheckerboard { low: 1.0, high: 4.0, sharpness: 3.0 };
        let m = model_with_a(2, f);
        let s = evaluate_on_cell_grid(&m, 256).unwrap();
        let (lo, hi) =
            s.a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), a| (l.min(a[0][0]), h.max(a[0][0])));
        assert!(lo >= 1.0 && hi <= 4.0);
        // dense scan reaches close to both ends
        assert!(lo < 1.01 && hi > 3.99);
    }

    #[test]
    fn rejects_bad_cell_resolution() {
        let m = model_with_a(1, CoefficientFamily::Constant(1.0));
        assert!(evaluate_on_cell_grid(&m, 4).is_err());
        assert!(evaluate_on_cell_grid(&m, 24).is_err());
    }

    #[test]
    fn rejects_non_coercive_exchange() {
        let err = MaterialModel::new(
            ExchangeTensor::isotropic(1, harmonic(1.0, 1.5, [1, 0, 0])),
            CoefficientFamily::Constant(0.0),
            CoefficientFamily::Constant(1.0),
            [0.0, 0.0, 1.0],
            1.0,
            0.0,
            [0.0; 3],
        );
        assert!(matches!(err, Err(Error::InvalidMaterial(_))));
    }

    #[test]
    fn rejects_stray_field_in_1d_and_bad_alpha() {
        let base = model_with_a(1, CoefficientFamily::Constant(1.0));
        let mut m = base.clone();
        m.mu0 = 0.5;
        assert!(m.validate().is_err());
        let mut m = base;
        m.alpha = -1.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn epsilon_identity_and_scaling() {
        let m = model_with_a(1, harmonic(2.0, 1.0, [1, 0, 0]));
        let g = Grid::new(1, 16).unwrap();
        let cell = evaluate_on_cell_grid(&m, 16).unwrap();
        let eps1 = evaluate_epsilon_coefficients(&m, 1.0, g).unwrap();
        assert_eq!(cell.a, eps1.a);
        // eps = 1/4 at x = 1/8: a = 2 + sin(π) = 2
        let g8 = Grid::new(1, 4).unwrap(); // centres 1/8, 3/8, ...
        let s = evaluate_epsilon_coefficients(&m, 0.25, g8).unwrap();
        assert!((s.a[0][0][0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_min_eigenvalue() {
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        assert!((min_eigenvalue(&m, 3) - 1.0).abs() < 1e-12);
        assert!((min_eigenvalue(&m, 1) - 2.0).abs() < 1e-12);
    }
}
