//! Problem setup for the ε-level and homogenized LLG systems and their
//! effective fields.

use std::sync::Arc;

use crate::cellsolve::HomogenizedModel;
use crate::divform::{Boundary, DivFormOperator};
use crate::error::{Error, Result};
use crate::grid::{Grid, Vec3, VectorField};
use crate::material::{evaluate_epsilon_coefficients, fast_variable, Mat3, MaterialModel};
use crate::strayfield::{stray_field, DemagKernel, Weight};

/// Unit magnetization on a grid over Ω at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationField {
    pub m: VectorField,
    pub t: f64,
}

impl MagnetizationField {
    pub fn new(m: VectorField, t: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidProfile("magnetization contains non-finite values".into()));
        }
        let dev = m.max_norm_deviation();
        if dev > 1e-10 {
            return Err(Error::InvalidProfile(format!("magnetization is not unit length (max deviation {dev:.3e})")));
        }
        Ok(Self { m, t })
    }

    pub fn grid(&self) -> Grid {
        self.m.grid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    /// Oscillating coefficients `a(x/ε)`, `K(x/ε)`, `M_s(x/ε)`.
    Epsilon(f64),
    Homogenized,
}

/// Everything needed to evaluate `H_e` on one grid: exchange operator with
/// Neumann closure, sampled `K` and `M`, and the optional demag kernel.
#[derive(Clone)]
pub struct LlgProblem {
    pub level: Level,
    pub grid: Grid,
    pub exchange: DivFormOperator,
    pub k: Vec<f64>,
    pub ms: Vec<f64>,
    pub easy_axis: Vec3,
    pub alpha: f64,
    pub mu0: f64,
    pub h_applied: Vec3,
    /// `H_d⁰`, zero at the ε-level.
    pub hd0: Mat3,
    pub kernel: Option<Arc<DemagKernel>>,
}

/// A demag kernel for `grid` when the material has `mu0 > 0`.
pub fn kernel_for(model: &MaterialModel, grid: Grid) -> Result<Option<Arc<DemagKernel>>> {
    if model.mu0 > 0.0 {
        Ok(Some(Arc::new(DemagKernel::build(grid)?)))
    } else {
        Ok(None)
    }
}

fn check_kernel(mu0: f64, grid: Grid, kernel: &Option<Arc<DemagKernel>>) -> Result<()> {
    match kernel {
        None if mu0 > 0.0 => Err(Error::MissingKernel),
        Some(k) if k.grid() != grid => Err(Error::GridMismatch("demag kernel built for a different grid".into())),
        _ => Ok(()),
    }
}

impl LlgProblem {
    pub fn epsilon(model: &MaterialModel, eps: f64, grid: Grid, kernel: Option<Arc<DemagKernel>>) -> Result<Self> {
        check_kernel(model.mu0, grid, &kernel)?;
        let samples = evaluate_epsilon_coefficients(model, eps, grid)?;
        let pairs: Vec<(usize, usize)> = model.a.off_diagonal_pairs().collect();
        let exchange = DivFormOperator::from_fn(grid, Boundary::Neumann, &pairs, |x| model.a_at(fast_variable(x, eps)));
        Ok(Self {
            level: Level::Epsilon(eps),
            grid,
            exchange,
            k: samples.k,
            ms: samples.ms,
            easy_axis: model.easy_axis,
            alpha: model.alpha,
            mu0: model.mu0,
            h_applied: model.h_applied,
            hd0: [[0.0; 3]; 3],
            kernel,
        })
    }

    pub fn homogenized(
        model: &MaterialModel,
        hom: &HomogenizedModel,
        grid: Grid,
        kernel: Option<Arc<DemagKernel>>,
    ) -> Result<Self> {
        check_kernel(model.mu0, grid, &kernel)?;
        if hom.dim != grid.dim() {
            return Err(Error::GridMismatch(format!("homogenized model is {}-D, grid {}-D", hom.dim, grid.dim())));
        }
        Ok(Self {
            level: Level::Homogenized,
            grid,
            exchange: DivFormOperator::constant(grid, Boundary::Neumann, hom.a0),
            k: vec![hom.k0; grid.len()],
            ms: vec![hom.m0; grid.len()],
            easy_axis: model.easy_axis,
            alpha: model.alpha,
            mu0: model.mu0,
            h_applied: model.h_applied,
            hd0: hom.hd0,
            kernel,
        })
    }

    pub fn check_grid(&self, m: &VectorField) -> Result<()> {
        if m.grid != self.grid {
            return Err(Error::GridMismatch(format!(
                "field on {}^{} grid, problem on {}^{}",
                m.grid.cells(),
                m.grid.dim(),
                self.grid.cells(),
                self.grid.dim()
            )));
        }
        Ok(())
    }

    /// `A m` componentwise, `A = div(a∇·)` with Neumann closure.
    pub fn exchange_field(&self, m: &VectorField) -> VectorField {
        let mut out = VectorField::zeros(self.grid);
        for c in 0..3 {
            self.exchange.apply(&m.comps[c], &mut out.comps[c]);
        }
        out
    }

    /// `h_d[M m]`, or `None` when the stray field is off.
    pub fn demag(&self, m: &VectorField) -> Result<Option<VectorField>> {
        match &self.kernel {
            Some(k) if self.mu0 > 0.0 => Ok(Some(stray_field(m, Weight::Field(&self.ms), k)?)),
            _ => Ok(None),
        }
    }

    /// All local (non-exchange, non-stray) field terms added to `out`.
    fn add_local_terms(&self, m: &VectorField, out: &mut VectorField) {
        let u = self.easy_axis;
        let dim = self.grid.dim();
        for k in 0..self.grid.len() {
            let mk = m.get(k);
            let mu = crate::grid::dot(mk, u);
            let mut v = out.get(k);
            for c in 0..3 {
                v[c] += -self.k[k] * mu * u[c] + self.ms[k] * self.h_applied[c];
            }
            if self.mu0 > 0.0 {
                for i in 0..dim {
                    for j in 0..dim {
                        v[i] += self.mu0 * self.hd0[i][j] * mk[j];
                    }
                }
            }
            out.set(k, v);
        }
    }

    /// Effective field from precomputed exchange and stray parts.
    pub fn assemble_field(&self, m: &VectorField, exchange: &VectorField, demag: Option<&VectorField>) -> VectorField {
        let mut h = exchange.clone();
        self.add_local_terms(m, &mut h);
        if let Some(hd) = demag {
            for c in 0..3 {
                for k in 0..self.grid.len() {
                    h.comps[c][k] += self.mu0 * self.ms[k] * hd.comps[c][k];
                }
            }
        }
        h
    }

    /// `H_e[m]`.
    pub fn effective_field(&self, m: &VectorField) -> Result<VectorField> {
        self.check_grid(m)?;
        let ex = self.exchange_field(m);
        let hd = self.demag(m)?;
        Ok(self.assemble_field(m, &ex, hd.as_ref()))
    }
}

/// `H = div(a^ε∇m) − K^ε(m·u)u + μ₀M^ε h_d[M^ε m] + M^ε h_a`.
pub fn effective_field_eps(m: &VectorField, problem: &LlgProblem) -> Result<VectorField> {
    problem.effective_field(m)
}

/// `H = div(a⁰∇m) − K⁰(m·u)u + μ₀(M⁰)² h_d[m] + μ₀H_d⁰m + M⁰h_a`.
pub fn effective_field_hom(m: &VectorField, problem: &LlgProblem) -> Result<VectorField> {
    problem.effective_field(m)
}
