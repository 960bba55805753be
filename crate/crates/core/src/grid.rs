//! Uniform cell-centred grids over the unit cube `[0,1]^n` and the field
//! containers that live on them.
//!
//! Cells are indexed with axis 0 running fastest: `k = i0 + N*(i1 + N*i2)`.
//! Cell `i` along an axis has its centre at `(i + 1/2) h` with `h = 1/N`.
//! The same type describes the physical domain Ω and the periodic unit cell Y.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    cells: usize,
}

/// Upper bound on the total number of cells of one grid.
pub const MAX_GRID_CELLS: usize = 1 << 26;

impl Grid {
    pub fn new(dim: usize, cells: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3 (got {dim})")));
        }
        if cells < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 cells per axis (got {cells})")));
        }
        if (cells as f64).powi(dim as i32) > MAX_GRID_CELLS as f64 {
            return Err(Error::InvalidGrid(format!("{cells}^{dim} cells exceeds the limit of {MAX_GRID_CELLS}")));
        }
        Ok(Self { dim, cells })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.cells.pow(axis as u32)
    }

    pub fn coords(&self, mut k: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for slot in c.iter_mut().take(self.dim) {
            *slot = k % self.cells;
            k /= self.cells;
        }
        c
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        let mut k = 0;
        for d in (0..self.dim).rev() {
            k = k * self.cells + c[d];
        }
        k
    }

    /// Cell centre; unused trailing coordinates are zero.
    pub fn center(&self, k: usize) -> Vec3 {
        let c = self.coords(k);
        let h = self.h();
        let mut x = [0.0; 3];
        for d in 0..self.dim {
            x[d] = (c[d] as f64 + 0.5) * h;
        }
        x
    }

    pub fn centers(&self) -> Vec<Vec3> {
        (0..self.len()).map(|k| self.center(k)).collect()
    }

    /// Index of the cell nearest to the domain centre (the lower one for even N).
    pub fn center_cell(&self) -> usize {
        let mid = (self.cells - 1) / 2;
        self.index([mid; 3].map(|v| v.min(self.cells - 1)))
    }
}

/// A scalar field sampled at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Vec3) -> f64) -> Self {
        let data = (0..grid.len()).map(|k| f(grid.center(k))).collect();
        Self { grid, data }
    }

    pub fn mean(&self) -> f64 {
        crate::reduce::mean(&self.data)
    }
}

/// A 3-vector field sampled at cell centres, stored component-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub comps: [Vec<f64>; 3],
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n]] }
    }

    pub fn uniform(grid: Grid, v: Vec3) -> Self {
        let n = grid.len();
        Self { grid, comps: [vec![v[0]; n], vec![v[1]; n], vec![v[2]; n]] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Vec3) -> Vec3) -> Self {
        let mut out = Self::zeros(grid);
        for k in 0..grid.len() {
            out.set(k, f(grid.center(k)));
        }
        out
    }

    #[inline]
    pub fn get(&self, k: usize) -> Vec3 {
        [self.comps[0][k], self.comps[1][k], self.comps[2][k]]
    }

    #[inline]
    pub fn set(&mut self, k: usize, v: Vec3) {
        self.comps[0][k] = v[0];
        self.comps[1][k] = v[1];
        self.comps[2][k] = v[2];
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axpy(&mut self, alpha: f64, other: &VectorField) {
        for c in 0..3 {
            for (a, b) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *a += alpha * b;
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> VectorField {
        let mut out = self.clone();
        for c in 0..3 {
            out.comps[c].iter_mut().for_each(|v| *v *= alpha);
        }
        out
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &VectorField) -> Vec<f64> {
        (0..self.len()).map(|k| dot(self.get(k), other.get(k))).collect()
    }

    /// `∫ u·v dx` by midpoint quadrature.
    pub fn inner(&self, other: &VectorField) -> f64 {
        crate::reduce::sum(&self.dot(other)) * self.grid.cell_volume()
    }

    pub fn max_norm_deviation(&self) -> f64 {
        (0..self.len()).map(|k| (norm(self.get(k)) - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Component of `v` orthogonal to the unit vector `m`.
#[inline]
pub fn tangential(m: Vec3, v: Vec3) -> Vec3 {
    sub(v, scale(m, dot(m, v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = Grid::new(3, 5).unwrap();
        for k in 0..g.len() {
            assert_eq!(g.index(g.coords(k)), k);
        }
        assert_eq!(g.stride(2), 25);
    }

    #[test]
    fn centers_are_cell_midpoints() {
        let g = Grid::new(2, 4).unwrap();
        assert_eq!(g.center(0), [0.125, 0.125, 0.0]);
        assert_eq!(g.center(g.index([3, 1, 0])), [0.875, 0.375, 0.0]);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(Grid::new(0, 8).is_err());
        assert!(Grid::new(4, 8).is_err());
        assert!(Grid::new(2, 1).is_err());
    }

    #[test]
    fn cross_is_orthogonal() {
        let a = [0.3, -1.2, 0.5];
        let b = [2.0, 0.1, -0.7];
        let c = cross(a, b);
        assert!(dot(a, c).abs() < 1e-14);
        assert!(dot(b, c).abs() < 1e-14);
    }
}
