//! Discrete `div(a ∇u)` on a cell-centred grid.
//!
//! The operator is the variational derivative of the discrete exchange energy
//!
//! ```text
//! E(u) = Σ_d Σ_faces a_dd(face) |Δ_d u / h|² hⁿ  +  Σ_{i<j} Σ_corners 2 a_ij(corner) (D_i u)(D_j u) hⁿ
//! ```
//!
//! where diagonal entries are sampled at face centres and off-diagonal entries
//! at the centres of the `(i, j)` cell corners, `D_i` being the two-point average
//! of the differences around that corner. `A u = −½ h⁻ⁿ ∂E/∂u`, so `A` is
//! symmetric negative semidefinite and `−hⁿ Σ u·Au = E(u)` holds exactly.
//!
//! With [`Boundary::Neumann`] only faces and corners interior to Ω carry terms,
//! which is the discrete co-normal condition `ν·a∇u = 0`.

use crate::grid::{Grid, Vec3};
use crate::material::Mat3;
use crate::reduce;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Neumann,
}

#[derive(Debug, Clone)]
pub struct DivFormOperator {
    grid: Grid,
    boundary: Boundary,
    /// `faces[d][k]`: `a_dd` on the face between cell `k` and `k + e_d`.
    faces: Vec<Vec<f64>>,
    /// `(i, j, c)`: `c[k] = a_ij` at the corner shared by `k, k+e_i, k+e_j, k+e_i+e_j`.
    corners: Vec<(usize, usize, Vec<f64>)>,
}

impl DivFormOperator {
    /// Builds the operator from a tensor field evaluated at physical positions.
    /// `offdiag` lists the `(i, j)` pairs (`i < j`) that may be nonzero.
    pub fn from_fn(grid: Grid, boundary: Boundary, offdiag: &[(usize, usize)], coeff: impl Fn(Vec3) -> Mat3) -> Self {
        let dim = grid.dim();
        let h = grid.h();
        let faces = (0..dim)
            .map(|d| {
                (0..grid.len())
                    .map(|k| {
                        let mut x = grid.center(k);
                        x[d] += 0.5 * h;
                        coeff(x)[d][d]
                    })
                    .collect()
            })
            .collect();
        let corners = offdiag
            .iter()
            .filter(|(i, j)| i < j && *j < dim)
            .map(|&(i, j)| {
                let c = (0..grid.len())
                    .map(|k| {
                        let mut x = grid.center(k);
                        x[i] += 0.5 * h;
                        x[j] += 0.5 * h;
                        coeff(x)[i][j]
                    })
                    .collect();
                (i, j, c)
            })
            .collect();
        Self { grid, boundary, faces, corners }
    }

    /// Constant tensor; off-diagonal pairs are included when nonzero.
    pub fn constant(grid: Grid, boundary: Boundary, a: Mat3) -> Self {
        let dim = grid.dim();
        let mut pairs = Vec::new();
        for i in 0..dim {
            for j in (i + 1)..dim {
                if a[i][j] != 0.0 {
                    pairs.push((i, j));
                }
            }
        }
        Self::from_fn(grid, boundary, &pairs, |_| a)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Mean face coefficient per axis (used by the spectral preconditioner).
    pub fn mean_diagonal(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (d, f) in self.faces.iter().enumerate() {
            out[d] = reduce::mean(f);
        }
        out
    }

    pub fn max_diagonal(&self) -> f64 {
        self.faces.iter().flatten().fold(0.0f64, |m, &v| m.max(v))
    }

    /// Diagonal of `−A`.
    pub fn negative_diagonal(&self) -> Vec<f64> {
        let h2 = self.grid.h() * self.grid.h();
        let mut diag = vec![0.0; self.grid.len()];
        for (d, face) in self.faces.iter().enumerate() {
            for k in 0..diag.len() {
                if let Some(kp) = self.neighbor(k, d) {
                    diag[k] += face[k] / h2;
                    diag[kp] += face[k] / h2;
                }
            }
        }
        for (i, j, c) in &self.corners {
            for k in 0..diag.len() {
                let Some(k10) = self.neighbor(k, *i) else { continue };
                let Some(k01) = self.neighbor(k, *j) else { continue };
                let Some(k11) = self.neighbor(k10, *j) else { continue };
                let w = c[k] / (2.0 * h2);
                diag[k] += w;
                diag[k10] -= w;
                diag[k01] -= w;
                diag[k11] += w;
            }
        }
        diag
    }

    #[inline]
    fn neighbor(&self, k: usize, axis: usize) -> Option<usize> {
        let n = self.grid.cells();
        let s = self.grid.stride(axis);
        let c = (k / s) % n;
        if c + 1 < n {
            Some(k + s)
        } else {
            match self.boundary {
                Boundary::Periodic => Some(k + s - n * s),
                Boundary::Neumann => None,
            }
        }
    }

    /// `out = A u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.apply_with_gradient(u, [0.0; 3], out);
    }

    /// `out = A (u + g·y)`: the affine part enters only through differences,
    /// so `u` may be periodic while the total field is not.
    pub fn apply_with_gradient(&self, u: &[f64], g: Vec3, out: &mut [f64]) {
        let h = self.grid.h();
        let h2 = h * h;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (d, face) in self.faces.iter().enumerate() {
            for k in 0..u.len() {
                if let Some(kp) = self.neighbor(k, d) {
                    let f = face[k] * (u[kp] - u[k] + h * g[d]) / h2;
                    out[k] += f;
                    out[kp] -= f;
                }
            }
        }
        for (i, j, c) in &self.corners {
            let (i, j) = (*i, *j);
            for k in 0..u.len() {
                let Some(k10) = self.neighbor(k, i) else { continue };
                let Some(k01) = self.neighbor(k, j) else { continue };
                let Some(k11) = self.neighbor(k10, j) else { continue };
                let di = ((u[k10] - u[k]) + (u[k11] - u[k01])) / (2.0 * h) + g[i];
                let dj = ((u[k01] - u[k]) + (u[k11] - u[k10])) / (2.0 * h) + g[j];
                let w = c[k] / (2.0 * h);
                // s_i = (-1, +1, -1, +1), s_j = (-1, -1, +1, +1) for (k, k10, k01, k11)
                out[k] -= w * (-dj - di);
                out[k10] -= w * (dj - di);
                out[k01] -= w * (-dj + di);
                out[k11] -= w * (dj + di);
            }
        }
    }

    /// `E(u) = ∫ a∇u·∇u` in the discretization above.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let h = self.grid.h();
        let vol = self.grid.cell_volume();
        let mut terms = Vec::with_capacity(u.len() * (self.faces.len() + self.corners.len()));
        for (d, face) in self.faces.iter().enumerate() {
            for k in 0..u.len() {
                if let Some(kp) = self.neighbor(k, d) {
                    let g = (u[kp] - u[k]) / h;
                    terms.push(face[k] * g * g);
                }
            }
        }
        for (i, j, c) in &self.corners {
            for k in 0..u.len() {
                let Some(k10) = self.neighbor(k, *i) else { continue };
                let Some(k01) = self.neighbor(k, *j) else { continue };
                let Some(k11) = self.neighbor(k10, *j) else { continue };
                let di = ((u[k10] - u[k]) + (u[k11] - u[k01])) / (2.0 * h);
                let dj = ((u[k01] - u[k]) + (u[k11] - u[k10])) / (2.0 * h);
                terms.push(2.0 * c[k] * di * dj);
            }
        }
        reduce::sum(&terms) * vol
    }

    /// Flux `a(∇u + g)` interpolated to cell centres. Face values are averaged
    /// from the two faces of each cell and corner values from the surrounding
    /// corners, so on a periodic grid the cell mean equals the face/corner mean.
    pub fn flux_at_cells(&self, u: &[f64], g: Vec3) -> Vec<Vec3> {
        let h = self.grid.h();
        let n = u.len();
        let mut flux = vec![[0.0; 3]; n];
        for (d, face) in self.faces.iter().enumerate() {
            for k in 0..n {
                if let Some(kp) = self.neighbor(k, d) {
                    let f = face[k] * ((u[kp] - u[k]) / h + g[d]);
                    flux[k][d] += 0.5 * f;
                    flux[kp][d] += 0.5 * f;
                }
            }
        }
        for (i, j, c) in &self.corners {
            let (i, j) = (*i, *j);
            for k in 0..n {
                let Some(k10) = self.neighbor(k, i) else { continue };
                let Some(k01) = self.neighbor(k, j) else { continue };
                let Some(k11) = self.neighbor(k10, j) else { continue };
                let di = ((u[k10] - u[k]) + (u[k11] - u[k01])) / (2.0 * h) + g[i];
                let dj = ((u[k01] - u[k]) + (u[k11] - u[k10])) / (2.0 * h) + g[j];
                for p in [k, k10, k01, k11] {
                    flux[p][i] += 0.25 * c[k] * dj;
                    flux[p][j] += 0.25 * c[k] * di;
                }
            }
        }
        flux
    }

    /// Cell-wise source `b` such that `A u + b = 0` imposes the outward boundary
    /// flux `ν·q` on every boundary face, with `q` a constant vector (Neumann only).
    pub fn boundary_flux_source(&self, q: Vec3) -> Vec<f64> {
        let n = self.grid.cells();
        let h = self.grid.h();
        let mut b = vec![0.0; self.grid.len()];
        if self.boundary == Boundary::Periodic {
            return b;
        }
        for k in 0..self.grid.len() {
            let c = self.grid.coords(k);
            for d in 0..self.grid.dim() {
                if c[d] == 0 {
                    b[k] -= q[d] / h;
                }
                if c[d] == n - 1 {
                    b[k] += q[d] / h;
                }
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn isotropic(a: f64) -> Mat3 {
        [[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]]
    }

    #[test]
    fn periodic_laplacian_of_sine() {
        let g = Grid::new(1, 64).unwrap();
        let op = DivFormOperator::constant(g, Boundary::Periodic, isotropic(1.0));
        let u: Vec<f64> = g.centers().iter().map(|x| (2.0 * PI * x[0]).sin()).collect();
        let mut out = vec![0.0; g.len()];
        op.apply(&u, &mut out);
        let lam = 4.0 * (PI * g.h()).sin().powi(2) / (g.h() * g.h());
        for k in 0..g.len() {
            assert!((out[k] + lam * u[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn energy_is_minus_u_dot_au() {
        let g = Grid::new(2, 12).unwrap();
        let a = |x: Vec3| {
            let s = 2.0 + (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos();
            [[s, 0.3, 0.0], [0.3, 1.5 + 0.2 * x[0], 0.0], [0.0, 0.0, 1.0]]
        };
        for b in [Boundary::Periodic, Boundary::Neumann] {
            let op = DivFormOperator::from_fn(g, b, &[(0, 1)], a);
            let u: Vec<f64> = (0..g.len()).map(|k| ((k * 7 % 13) as f64).sin()).collect();
            let mut au = vec![0.0; g.len()];
            op.apply(&u, &mut au);
            let lhs = -reduce::dot(&u, &au) * g.cell_volume();
            assert!((lhs - op.energy(&u)).abs() < 1e-10 * op.energy(&u));
        }
    }

    #[test]
    fn operator_is_symmetric_and_kills_constants() {
        let g = Grid::new(2, 8).unwrap();
        let op = DivFormOperator::from_fn(g, Boundary::Neumann, &[(0, 1)], |x| {
            [[1.0 + x[0], 0.2 * x[1], 0.0], [0.2 * x[1], 2.0, 0.0], [0.0; 3]]
        });
        let u: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.37).cos()).collect();
        let v: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.11).sin()).collect();
        let mut au = vec![0.0; g.len()];
        let mut av = vec![0.0; g.len()];
        op.apply(&u, &mut au);
        op.apply(&v, &mut av);
        assert!((reduce::dot(&v, &au) - reduce::dot(&u, &av)).abs() < 1e-9);
        let ones = vec![1.0; g.len()];
        op.apply(&ones, &mut au);
        assert!(au.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn mixed_derivative_term_matches_continuum_in_interior() {
        // constant a12 = 0.5: div(a∇u) = 2 a12 ∂1∂2 u for u = sin(2πx) sin(2πy)
        let g = Grid::new(2, 64).unwrap();
        let a = [[0.0, 0.5, 0.0], [0.5, 0.0, 0.0], [0.0; 3]];
        let op = DivFormOperator::from_fn(g, Boundary::Periodic, &[(0, 1)], |_| a);
        let u: Vec<f64> = g.centers().iter().map(|x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()).collect();
        let mut out = vec![0.0; g.len()];
        op.apply(&u, &mut out);
        let mut err: f64 = 0.0;
        for (k, x) in g.centers().iter().enumerate() {
            let exact = 2.0 * 0.5 * 4.0 * PI * PI * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos();
            err = err.max((out[k] - exact).abs());
        }
        assert!(err < 0.05 * 4.0 * PI * PI, "err {err}");
    }

    #[test]
    fn boundary_source_reproduces_linear_field() {
        let g = Grid::new(2, 10).unwrap();
        let op = DivFormOperator::constant(g, Boundary::Neumann, isotropic(2.5));
        let u: Vec<f64> = g.centers().iter().map(|x| x[1]).collect();
        let b = op.boundary_flux_source([0.0, 2.5, 0.0]);
        let mut au = vec![0.0; g.len()];
        op.apply(&u, &mut au);
        for k in 0..g.len() {
            assert!((au[k] + b[k]).abs() < 1e-10);
        }
    }
}
