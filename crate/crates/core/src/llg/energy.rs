//! Landau–Lifshitz energies.
//!
//! Each reported term is the plain integral (`∫a∇m·∇m`, `∫K(m·u)²`,
//! `−μ₀∫h_d·Mm`, `−μ₀∫m·H_d⁰m`, `−∫M h_a·m`). The total is the potential of
//! the effective field, `G = ½(exchange + anisotropy + stray + microscale) + zeeman`,
//! so that `H_e = −δG/δm` holds for the discrete field as well.

use crate::error::Result;
use crate::grid::{dot, VectorField};
use crate::reduce;

use super::field::LlgProblem;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub exchange: f64,
    pub anisotropy: f64,
    pub stray: f64,
    pub microscale: f64,
    pub zeeman: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn finish(mut self) -> Self {
        self.total = 0.5 * (self.exchange + self.anisotropy + self.stray + self.microscale) + self.zeeman;
        self
    }
}

/// Energy from a precomputed stray field `h_d[M m]` (or `None`).
pub fn energy_with_demag(problem: &LlgProblem, m: &VectorField, demag: Option<&VectorField>) -> EnergyBreakdown {
    let grid = problem.grid;
    let vol = grid.cell_volume();
    let dim = grid.dim();
    let exchange: Vec<f64> = (0..3).map(|c| problem.exchange.energy(&m.comps[c])).collect();
    let mut anis = Vec::with_capacity(grid.len());
    let mut zee = Vec::with_capacity(grid.len());
    let mut micro = Vec::with_capacity(grid.len());
    let mut stray = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let mk = m.get(k);
        let mu = dot(mk, problem.easy_axis);
        anis.push(problem.k[k] * mu * mu);
        zee.push(-problem.ms[k] * dot(problem.h_applied, mk));
        if problem.mu0 > 0.0 {
            let mut q = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    q += mk[i] * problem.hd0[i][j] * mk[j];
                }
            }
            micro.push(-problem.mu0 * q);
        }
        if let Some(hd) = demag {
            stray.push(-problem.mu0 * problem.ms[k] * dot(hd.get(k), mk));
        }
    }
    EnergyBreakdown {
        exchange: reduce::sum(&exchange),
        anisotropy: reduce::sum(&anis) * vol,
        stray: reduce::sum(&stray) * vol,
        microscale: reduce::sum(&micro) * vol,
        zeeman: reduce::sum(&zee) * vol,
        total: 0.0,
    }
    .finish()
}

pub fn energy_total(problem: &LlgProblem, m: &VectorField) -> Result<EnergyBreakdown> {
    problem.check_grid(m)?;
    let hd = problem.demag(m)?;
    Ok(energy_with_demag(problem, m, hd.as_ref()))
}

/// Pointwise density `g_l = a∇m·∇m + K(m·u)² − μ₀M h_d·m − μ₀m·H_d⁰m − M h_a·m`,
/// with centred gradients in the interior and one-sided ones on boundary cells.
pub fn energy_density_gl(problem: &LlgProblem, m: &VectorField) -> Result<Vec<f64>> {
    problem.check_grid(m)?;
    let grid = problem.grid;
    let dim = grid.dim();
    let hd = problem.demag(m)?;
    let grads: Vec<Vec<[f64; 3]>> = (0..3).map(|c| gradient(grid, &m.comps[c])).collect();
    let tensors = cell_tensors(problem);
    let mut out = vec![0.0; grid.len()];
    for (k, o) in out.iter_mut().enumerate() {
        let a = tensors[k];
        let mut ex = 0.0;
        for g in &grads {
            for i in 0..dim {
                for j in 0..dim {
                    ex += a[i][j] * g[k][i] * g[k][j];
                }
            }
        }
        let mk = m.get(k);
        let mu = dot(mk, problem.easy_axis);
        let mut v = ex + problem.k[k] * mu * mu - problem.ms[k] * dot(problem.h_applied, mk);
        if problem.mu0 > 0.0 {
            let mut q = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    q += mk[i] * problem.hd0[i][j] * mk[j];
                }
            }
            v -= problem.mu0 * q;
            if let Some(h) = &hd {
                v -= problem.mu0 * problem.ms[k] * dot(h.get(k), mk);
            }
        }
        *o = v;
    }
    Ok(out)
}

/// Exchange tensor at each cell, averaged from the surrounding faces and corners.
fn cell_tensors(problem: &LlgProblem) -> Vec<crate::material::Mat3> {
    let grid = problem.grid;
    let zero = vec![0.0; grid.len()];
    let mut a = vec![[[0.0; 3]; 3]; grid.len()];
    for d in 0..grid.dim() {
        let mut g = [0.0; 3];
        g[d] = 1.0;
        for (ak, f) in a.iter_mut().zip(problem.exchange.flux_at_cells(&zero, g)) {
            for i in 0..3 {
                ak[i][d] = f[i];
            }
        }
    }
    a
}

/// Centred gradient with one-sided second-order closure on boundary cells.
pub fn gradient(grid: crate::grid::Grid, u: &[f64]) -> Vec<[f64; 3]> {
    let n = grid.cells();
    let h = grid.h();
    let mut out = vec![[0.0; 3]; grid.len()];
    for (k, o) in out.iter_mut().enumerate() {
        let c = grid.coords(k);
        for d in 0..grid.dim() {
            let s = grid.stride(d);
            o[d] = if c[d] == 0 {
                (-3.0 * u[k] + 4.0 * u[k + s] - u[k + 2 * s]) / (2.0 * h)
            } else if c[d] == n - 1 {
                (3.0 * u[k] - 4.0 * u[k - s] + u[k - 2 * s]) / (2.0 * h)
            } else {
                (u[k + s] - u[k - s]) / (2.0 * h)
            };
        }
    }
    out
}
