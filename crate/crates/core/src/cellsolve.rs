//! Periodic cell problems on the unit cell `Y` and the homogenized coefficients
//! assembled from them.
//!
//! All cell fields are normalized to zero mean over `Y`. The operator
//! `𝒜₀ = div_y(a(y)∇_y ·)` is discretized by [`DivFormOperator`] with periodic
//! wrap, and every quadrature is the midpoint sum on the cell grid.

use crate::divform::{Boundary, DivFormOperator};
use crate::error::{Error, Result};
use crate::grid::{Grid, Vec3};
use crate::material::{evaluate_on_cell_grid, Mat3, MaterialModel, SampledCoefficients};
use crate::reduce;
use crate::solver::{pcg, CgOutcome, CgSettings};
use crate::spectral::SpectralPreconditioner;

/// Preconditioner used by the periodic solver. Both give the same answer up to
/// the solver tolerance; `Diagonal` exists as an independent iteration schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioning {
    #[default]
    Spectral,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSettings {
    pub n_cell: usize,
    pub tol: f64,
    /// Iteration cap as a multiple of `n_cell`.
    pub iter_factor: usize,
    pub preconditioning: Preconditioning,
}

impl CellSettings {
    pub fn new(n_cell: usize) -> Self {
        Self { n_cell, tol: 1e-10, iter_factor: 20, preconditioning: Preconditioning::Spectral }
    }

    fn cg(&self) -> CgSettings {
        CgSettings { tol: self.tol, max_iter: self.iter_factor * self.n_cell }
    }
}

/// Relative compatibility threshold of the periodic solver.
pub const COMPATIBILITY_TOL: f64 = 1e-10;
/// Absolute floor for right-hand sides that are pure rounding noise.
const COMPATIBILITY_FLOOR: f64 = 1e-13;

/// Solver for `𝒜₀ u = f` with zero-mean periodic `u`.
pub struct PeriodicSolver {
    op: DivFormOperator,
    precond: SpectralPreconditioner,
    diag: Vec<f64>,
    settings: CellSettings,
}

impl PeriodicSolver {
    pub fn new(op: DivFormOperator, settings: CellSettings) -> Self {
        let grid = op.grid();
        let precond = SpectralPreconditioner::periodic(grid, op.mean_diagonal(), 0.0);
        let diag = match settings.preconditioning {
            Preconditioning::Diagonal => op.negative_diagonal().into_iter().map(|d| d.max(f64::MIN_POSITIVE)).collect(),
            Preconditioning::Spectral => Vec::new(),
        };
        Self { op, precond, diag, settings }
    }

    pub fn operator(&self) -> &DivFormOperator {
        &self.op
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, CgOutcome)> {
        let mean = reduce::mean(rhs);
        let rms = (reduce::dot(rhs, rhs) / rhs.len() as f64).sqrt();
        if mean.abs() > COMPATIBILITY_TOL * rms + COMPATIBILITY_FLOOR {
            return Err(Error::CompatibilityViolated { mean, norm: rms });
        }
        let mut b: Vec<f64> = rhs.iter().map(|v| -(v - mean)).collect();
        reduce::subtract_mean(&mut b);
        let mut u = vec![0.0; rhs.len()];
        let apply = |x: &[f64], out: &mut [f64]| {
            self.op.apply(x, out);
            out.iter_mut().for_each(|v| *v = -*v);
        };
        let outcome = match self.settings.preconditioning {
            Preconditioning::Spectral => {
                pcg(apply, |r, z| self.precond.apply(r, z), &b, &mut u, self.settings.cg(), true)?
            }
            Preconditioning::Diagonal => pcg(
                apply,
                |r, z| {
                    for i in 0..r.len() {
                        z[i] = r[i] / self.diag[i];
                    }
                },
                &b,
                &mut u,
                self.settings.cg(),
                true,
            )?,
        };
        reduce::subtract_mean(&mut u);
        Ok((u, outcome))
    }
}

/// Solves `div(a∇u) = rhs` on the periodic cell with the constant-coefficient
/// spectral preconditioner.
pub fn solve_periodic_divform(op: &DivFormOperator, rhs: &[f64], settings: CellSettings) -> Result<Vec<f64>> {
    let solver = PeriodicSolver::new(op.clone(), settings);
    Ok(solver.solve(rhs)?.0)
}

/// Homogenized constant coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizedModel {
    pub dim: usize,
    pub a0: Mat3,
    pub m0: f64,
    pub k0: f64,
    pub hd0: Mat3,
    /// `max |a0_ij − a0_ji|` before symmetrization.
    pub a0_asymmetry: f64,
}

impl HomogenizedModel {
    /// The trivial homogenization of a constant-coefficient material.
    pub fn of_constant(model: &MaterialModel) -> Self {
        let y = [0.0; 3];
        Self {
            dim: model.dim,
            a0: model.a_at(y),
            m0: model.ms_at(y),
            k0: model.k_at(y),
            hd0: [[0.0; 3]; 3],
            a0_asymmetry: 0.0,
        }
    }
}

/// Zero-mean periodic cell fields on the cell grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolutions {
    pub grid: Grid,
    pub chi: Vec<Vec<f64>>,
    /// `theta[i][j]`
    pub theta: Vec<Vec<Vec<f64>>>,
    pub kappa: Vec<f64>,
    pub rho: Vec<f64>,
    /// `lambda[i][j]`
    pub lambda: Vec<Vec<Vec<f64>>>,
    pub u_tilde: Vec<f64>,
    pub hd_cell: Vec<Mat3>,
    pub diagnostics: CellDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellDiagnostics {
    /// Largest `|mean(rhs)|` over the second-order problems.
    pub max_second_order_rhs_mean: f64,
    /// Largest `max|H − Hᵀ|/2` removed by symmetrization of the Hessian.
    pub hessian_symmetry_defect: f64,
    pub total_iterations: usize,
}

/// Builds the periodic operator `div_y(a(y)∇_y)` on the cell grid.
pub fn cell_operator(model: &MaterialModel, grid: Grid) -> DivFormOperator {
    let pairs: Vec<(usize, usize)> = model.a.off_diagonal_pairs().collect();
    DivFormOperator::from_fn(grid, Boundary::Periodic, &pairs, |y| model.a_at(y))
}

fn unit(j: usize) -> Vec3 {
    let mut g = [0.0; 3];
    g[j] = 1.0;
    g
}

/// `χ_j`, solving `div(a∇χ_j) = −Σ_i ∂_i a_ij`, i.e. `div(a∇(χ_j + y_j)) = 0`.
pub fn solve_chi(solver: &PeriodicSolver) -> Result<(Vec<Vec<f64>>, usize)> {
    let op = solver.operator();
    let grid = op.grid();
    let zero = vec![0.0; grid.len()];
    let mut iters = 0;
    let mut chi = Vec::with_capacity(grid.dim());
    for j in 0..grid.dim() {
        let mut rhs = vec![0.0; grid.len()];
        op.apply_with_gradient(&zero, unit(j), &mut rhs);
        rhs.iter_mut().for_each(|v| *v = -*v);
        let (u, out) = solver.solve(&rhs)?;
        iters += out.iterations;
        chi.push(u);
    }
    Ok((chi, iters))
}

/// `a0_ij = ∫_Y (a_ij + Σ_k a_ik ∂χ_j/∂y_k) dy`, symmetrized. Returns the
/// symmetrized tensor and the asymmetry defect.
pub fn homogenized_tensor(op: &DivFormOperator, chi: &[Vec<f64>]) -> (Mat3, f64) {
    let dim = op.grid().dim();
    let mut raw = [[0.0; 3]; 3];
    for j in 0..dim {
        let flux = op.flux_at_cells(&chi[j], unit(j));
        for i in 0..dim {
            let comp: Vec<f64> = flux.iter().map(|f| f[i]).collect();
            raw[i][j] = reduce::mean(&comp);
        }
    }
    let mut a0 = [[0.0; 3]; 3];
    let mut defect: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            a0[i][j] = 0.5 * (raw[i][j] + raw[j][i]);
            defect = defect.max((raw[i][j] - raw[j][i]).abs());
        }
    }
    (a0, defect)
}

/// `(M0, K0)`: grid means of `M_s` and `K`.
pub fn homogenized_scalars(samples: &SampledCoefficients) -> (f64, f64) {
    (reduce::mean(&samples.ms), reduce::mean(&samples.k))
}

/// Periodic demagnetizing potential `ΔŨ = −(M_s − M0)` and its Hessian
/// `H_d(y) = ∇²Ũ` by centred second differences, symmetrized.
pub fn solve_cell_demag(
    samples: &SampledCoefficients,
    m0: f64,
    settings: CellSettings,
) -> Result<(Vec<f64>, Vec<Mat3>, f64, usize)> {
    let grid = samples.grid;
    let eye = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let lap = PeriodicSolver::new(DivFormOperator::constant(grid, Boundary::Periodic, eye), settings);
    let rhs: Vec<f64> = samples.ms.iter().map(|m| -(m - m0)).collect();
    let (u, out) = lap.solve(&rhs)?;
    let (hess, defect) = periodic_hessian(grid, &u);
    Ok((u, hess, defect, out.iterations))
}

fn periodic_hessian(grid: Grid, u: &[f64]) -> (Vec<Mat3>, f64) {
    let n = grid.cells();
    let dim = grid.dim();
    let h2 = grid.h() * grid.h();
    let shift = |k: usize, d: usize, s: i64| -> usize {
        let mut c = grid.coords(k);
        c[d] = ((c[d] as i64 + s).rem_euclid(n as i64)) as usize;
        grid.index(c)
    };
    let mut defect: f64 = 0.0;
    let hess = (0..grid.len())
        .map(|k| {
            let mut h = [[0.0; 3]; 3];
            for i in 0..dim {
                h[i][i] = (u[shift(k, i, 1)] - 2.0 * u[k] + u[shift(k, i, -1)]) / h2;
                for j in (i + 1)..dim {
                    let pp = shift(shift(k, i, 1), j, 1);
                    let pm = shift(shift(k, i, 1), j, -1);
                    let mp = shift(shift(k, i, -1), j, 1);
                    let mm = shift(shift(k, i, -1), j, -1);
                    let hij = (u[pp] - u[pm] - u[mp] + u[mm]) / (4.0 * h2);
                    let pp2 = shift(shift(k, j, 1), i, 1);
                    let pm2 = shift(shift(k, j, 1), i, -1);
                    let mp2 = shift(shift(k, j, -1), i, 1);
                    let mm2 = shift(shift(k, j, -1), i, -1);
                    let hji = (u[pp2] - u[pm2] - u[mp2] + u[mm2]) / (4.0 * h2);
                    defect = defect.max(0.5 * (hij - hji).abs());
                    h[i][j] = 0.5 * (hij + hji);
                    h[j][i] = h[i][j];
                }
            }
            h
        })
        .collect();
    (hess, defect)
}

/// `H_d0 = ∫_Y M_s(y) H_d(y) dy`, symmetrized.
pub fn homogenized_demag_matrix(samples: &SampledCoefficients, hd_cell: &[Mat3]) -> Mat3 {
    let dim = samples.grid.dim();
    let mut out = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            let vals: Vec<f64> = samples.ms.iter().zip(hd_cell).map(|(m, h)| m * h[i][j]).collect();
            out[i][j] = reduce::mean(&vals);
        }
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            let s = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = s;
            out[j][i] = s;
        }
    }
    out
}

/// Named right-hand sides of the second-order cell problems.
pub struct SecondOrderRhs {
    pub theta: Vec<Vec<Vec<f64>>>,
    pub rho: Vec<f64>,
    pub kappa: Vec<f64>,
    pub lambda: Vec<Vec<Vec<f64>>>,
}

impl SecondOrderRhs {
    /// Largest `|grid mean|` over every right-hand side.
    pub fn max_abs_mean(&self) -> f64 {
        let mut m = reduce::mean(&self.rho).abs().max(reduce::mean(&self.kappa).abs());
        for row in self.theta.iter().chain(&self.lambda) {
            for f in row {
                m = m.max(reduce::mean(f).abs());
            }
        }
        m
    }
}

pub fn second_order_rhs(
    op: &DivFormOperator,
    samples: &SampledCoefficients,
    chi: &[Vec<f64>],
    hom: &HomogenizedModel,
    hd_cell: &[Mat3],
) -> SecondOrderRhs {
    let grid = op.grid();
    let dim = grid.dim();
    let n = grid.cells();
    let h = grid.h();
    let shift = |k: usize, d: usize, s: i64| -> usize {
        let mut c = grid.coords(k);
        c[d] = ((c[d] as i64 + s).rem_euclid(n as i64)) as usize;
        grid.index(c)
    };
    let mut theta = vec![vec![Vec::new(); dim]; dim];
    for j in 0..dim {
        let flux = op.flux_at_cells(&chi[j], unit(j));
        for i in 0..dim {
            let rhs: Vec<f64> = (0..grid.len())
                .map(|k| {
                    let mut div = 0.0;
                    for kk in 0..dim {
                        let fp = samples.a[shift(k, kk, 1)][i][kk] * chi[j][shift(k, kk, 1)];
                        let fm = samples.a[shift(k, kk, -1)][i][kk] * chi[j][shift(k, kk, -1)];
                        div += (fp - fm) / (2.0 * h);
                    }
                    hom.a0[i][j] - flux[k][i] - div
                })
                .collect();
            theta[i][j] = rhs;
        }
    }
    let rho = samples.ms.iter().map(|m| m - hom.m0).collect();
    let kappa = samples.k.iter().map(|k| k - hom.k0).collect();
    let mut lambda = vec![vec![Vec::new(); dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            lambda[i][j] = samples.ms.iter().zip(hd_cell).map(|(m, hd)| m * hd[i][j] - hom.hd0[i][j]).collect();
        }
    }
    SecondOrderRhs { theta, rho, kappa, lambda }
}

/// `(θ, κ, ρ, Λ, CG iterations)`
pub type SecondOrderFields = (Vec<Vec<Vec<f64>>>, Vec<f64>, Vec<f64>, Vec<Vec<Vec<f64>>>, usize);

/// `θ_ij, κ, ρ, Λ` from their right-hand sides.
pub fn solve_second_order_cells(solver: &PeriodicSolver, rhs: &SecondOrderRhs) -> Result<SecondOrderFields> {
    let dim = solver.operator().grid().dim();
    let mut iters = 0;
    let mut run = |f: &[f64]| -> Result<Vec<f64>> {
        let (u, out) = solver.solve(f)?;
        iters += out.iterations;
        Ok(u)
    };
    let mut theta = vec![vec![Vec::new(); dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            theta[i][j] = run(&rhs.theta[i][j])?;
        }
    }
    let kappa = run(&rhs.kappa)?;
    let rho = run(&rhs.rho)?;
    let mut lambda = vec![vec![Vec::new(); dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let u = run(&rhs.lambda[i][j])?;
            lambda[j][i] = u.clone();
            lambda[i][j] = u;
        }
    }
    Ok((theta, kappa, rho, lambda, iters))
}

/// Runs the full cell pipeline for a material.
pub fn solve_cells(model: &MaterialModel, settings: CellSettings) -> Result<(CellSolutions, HomogenizedModel)> {
    let samples = evaluate_on_cell_grid(model, settings.n_cell)?;
    let grid = samples.grid;
    let solver = PeriodicSolver::new(cell_operator(model, grid), settings);
    let (chi, it_chi) = solve_chi(&solver)?;
    let (a0, a0_asymmetry) = homogenized_tensor(solver.operator(), &chi);
    let (m0, k0) = homogenized_scalars(&samples);
    let (u_tilde, hd_cell, hess_defect, it_demag) = solve_cell_demag(&samples, m0, settings)?;
    let hd0 = homogenized_demag_matrix(&samples, &hd_cell);
    let hom = HomogenizedModel { dim: model.dim, a0, m0, k0, hd0, a0_asymmetry };
    let rhs = second_order_rhs(solver.operator(), &samples, &chi, &hom, &hd_cell);
    let max_mean = rhs.max_abs_mean();
    let (theta, kappa, rho, lambda, it_second) = solve_second_order_cells(&solver, &rhs)?;
    let cells = CellSolutions {
        grid,
        chi,
        theta,
        kappa,
        rho,
        lambda,
        u_tilde,
        hd_cell,
        diagnostics: CellDiagnostics {
            max_second_order_rhs_mean: max_mean,
            hessian_symmetry_defect: hess_defect,
            total_iterations: it_chi + it_demag + it_second,
        },
    };
    Ok((cells, hom))
}

impl CellSolutions {
    /// Periodic cubic interpolation of a cell field at the fast variable `y`.
    pub fn sample(&self, field: &[f64], y: Vec3) -> f64 {
        crate::interp::sample(&self.grid, field, y, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{CoefficientFamily, ExchangeTensor, HarmonicMode};
    use std::f64::consts::PI;

    fn harmonic(mean: f64, amp: f64, k: [i32; 3]) -> CoefficientFamily {
        CoefficientFamily::SingleHarmonic { mean, mode: HarmonicMode { amp, k, phase: 0.0 } }
    }

    fn model(dim: usize, a: CoefficientFamily, ms: CoefficientFamily, k: CoefficientFamily) -> MaterialModel {
        MaterialModel::new(ExchangeTensor::isotropic(dim, a), k, ms, [0.0, 0.0, 1.0], 1.0, 0.0, [0.0; 3]).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = Grid::new(2, 16).unwrap();
        let op = DivFormOperator::constant(g, Boundary::Periodic, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]]);
        let u = solve_periodic_divform(&op, &vec![0.0; g.len()], CellSettings::new(16)).unwrap();
        assert!(u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sine_rhs_inverts_to_scaled_sine() {
        // a ≡ 1: sin(2πy) is an eigenvector with eigenvalue −4 sin²(πh)/h²
        let n = 64;
        let g = Grid::new(1, n).unwrap();
        let op = DivFormOperator::constant(g, Boundary::Periodic, [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]]);
        let rhs: Vec<f64> = g.centers().iter().map(|x| (2.0 * PI * x[0]).sin()).collect();
        let u = solve_periodic_divform(&op, &rhs, CellSettings::new(n)).unwrap();
        let lam = 4.0 * (PI * g.h()).sin().powi(2) / (g.h() * g.h());
        let mut err: f64 = 0.0;
        for (k, x) in g.centers().iter().enumerate() {
            err = err.max((u[k] + (2.0 * PI * x[0]).sin() / lam).abs());
        }
        assert!(err < 1e-11, "err {err}");
    }

    #[test]
    fn nonzero_mean_rhs_is_rejected() {
        let g = Grid::new(1, 16).unwrap();
        let op = DivFormOperator::constant(g, Boundary::Periodic, [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]]);
        let rhs: Vec<f64> = g.centers().iter().map(|x| 0.1 + (2.0 * PI * x[0]).sin()).collect();
        assert!(matches!(
            solve_periodic_divform(&op, &rhs, CellSettings::new(16)),
            Err(Error::CompatibilityViolated { .. })
        ));
    }

    #[test]
    fn constant_material_has_trivial_cells() {
        let m = model(
            2,
            CoefficientFamily::Constant(2.0),
            CoefficientFamily::Constant(1.5),
            CoefficientFamily::Constant(1.0),
        );
        let (cells, hom) = solve_cells(&m, CellSettings::new(16)).unwrap();
        assert!(cells.chi.iter().flatten().all(|v| v.abs() < 1e-14));
        assert!((hom.a0[0][0] - 2.0).abs() < 1e-14 && hom.a0[0][1].abs() < 1e-14);
        assert!(hom.hd0.iter().flatten().all(|v| v.abs() < 1e-14));
        assert!(cells.rho.iter().chain(&cells.kappa).all(|v| v.abs() < 1e-14));
        assert!(cells.theta.iter().flatten().flatten().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn one_dimensional_chi_derivative() {
        // χ'(y) = a0/a(y) − 1 with a0 = √3
        let m =
            model(1, harmonic(2.0, 1.0, [1, 0, 0]), CoefficientFamily::Constant(1.0), CoefficientFamily::Constant(0.0));
        let (cells, hom) = solve_cells(&m, CellSettings::new(256)).unwrap();
        assert!((hom.a0[0][0] - 3f64.sqrt()).abs() < 1e-6);
        let g = cells.grid;
        let h = g.h();
        for k in 0..g.len() - 1 {
            let face = (k as f64 + 1.0) * h;
            let d = (cells.chi[0][k + 1] - cells.chi[0][k]) / h;
            let exact = 3f64.sqrt() / (2.0 + (2.0 * PI * face).sin()) - 1.0;
            assert!((d - exact).abs() < 1e-6, "k={k}: {d} vs {exact}");
        }
    }

    #[test]
    fn layered_2d_chi2_vanishes_and_a0_is_harmonic_arithmetic() {
        let a =
            ExchangeTensor::new(2, vec![harmonic(2.0, 1.0, [1, 0, 0]), harmonic(2.0, 1.0, [1, 0, 0])], vec![]).unwrap();
        let m = MaterialModel::new(
            a,
            CoefficientFamily::Constant(0.0),
            CoefficientFamily::Constant(1.0),
            [0.0, 0.0, 1.0],
            1.0,
            0.0,
            [0.0; 3],
        )
        .unwrap();
        let (cells, hom) = solve_cells(&m, CellSettings::new(64)).unwrap();
        assert!(cells.chi[1].iter().all(|v| v.abs() < 1e-12));
        assert!((hom.a0[0][0] - 3f64.sqrt()).abs() < 1e-5);
        assert!((hom.a0[1][1] - 2.0).abs() < 1e-5);
        assert!(hom.a0[0][1].abs() < 1e-10);
    }

    #[test]
    fn demag_of_cosine_profile() {
        let ms = CoefficientFamily::SingleHarmonic {
            mean: 2.0,
            mode: HarmonicMode { amp: 1.0, k: [1, 0, 0], phase: PI / 2.0 },
        };
        let m = model(2, CoefficientFamily::Constant(1.0), ms, CoefficientFamily::Constant(0.0));
        let (cells, hom) = solve_cells(&m, CellSettings::new(32)).unwrap();
        for (k, y) in cells.grid.centers().iter().enumerate() {
            let h = cells.hd_cell[k];
            assert!((h[0][0] + (2.0 * PI * y[0]).cos()).abs() < 1e-6);
            assert!(h[1][1].abs() < 1e-9 && h[0][1].abs() < 1e-9);
        }
        assert!((hom.hd0[0][0] + 0.5).abs() < 1e-5);
        assert!(hom.hd0[1][1].abs() < 1e-9);
        let trace: Vec<f64> = cells.hd_cell.iter().map(|h| h[0][0] + h[1][1]).collect();
        assert!(reduce::mean(&trace).abs() < 1e-12);
    }

    #[test]
    fn rho_for_cosine_ms_with_unit_exchange() {
        // 𝒜₀ρ = cos(2πy) ⇒ ρ = −cos(2πy)/(4π²) up to the discrete symbol
        let ms = CoefficientFamily::SingleHarmonic {
            mean: 2.0,
            mode: HarmonicMode { amp: 1.0, k: [1, 0, 0], phase: PI / 2.0 },
        };
        let m = model(1, CoefficientFamily::Constant(1.0), ms, CoefficientFamily::Constant(0.0));
        let (cells, _) = solve_cells(&m, CellSettings::new(1024)).unwrap();
        for (k, y) in cells.grid.centers().iter().enumerate() {
            let exact = -(2.0 * PI * y[0]).cos() / (4.0 * PI * PI);
            assert!((cells.rho[k] - exact).abs() < 1e-7, "{} vs {exact}", cells.rho[k]);
        }
    }

    #[test]
    fn schedules_agree() {
        let m =
            model(2, harmonic(2.0, 0.8, [1, 1, 0]), CoefficientFamily::Constant(1.0), CoefficientFamily::Constant(0.0));
        let mut s = CellSettings::new(16);
        let (a, _) = solve_cells(&m, s).unwrap();
        s.preconditioning = Preconditioning::Diagonal;
        let (b, _) = solve_cells(&m, s).unwrap();
        for (x, y) in a.chi.iter().flatten().zip(b.chi.iter().flatten()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
