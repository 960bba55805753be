//! Multi-dimensional FFT and cosine transforms on top of `rustfft`, and the
//! constant-coefficient spectral preconditioners built from them.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Separable complex FFT over a row-major box (axis 0 fastest).
pub struct FftNd {
    dims: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl FftNd {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self { dims: dims.to_vec(), fwd, inv }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        for (axis, plan) in self.fwd.iter().enumerate() {
            along_axis(data, &self.dims, axis, |line| plan.process(line));
        }
    }

    /// Normalized inverse: `inverse(forward(x)) == x`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        for (axis, plan) in self.inv.iter().enumerate() {
            along_axis(data, &self.dims, axis, |line| plan.process(line));
        }
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }
}

fn along_axis<T: Copy + Default>(data: &mut [T], dims: &[usize], axis: usize, mut f: impl FnMut(&mut [T])) {
    let stride: usize = dims[..axis].iter().product();
    let n = dims[axis];
    let block = stride * n;
    let outer = data.len() / block;
    let mut line = vec![T::default(); n];
    for o in 0..outer {
        for i in 0..stride {
            let base = o * block + i;
            for (j, v) in line.iter_mut().enumerate() {
                *v = data[base + j * stride];
            }
            f(&mut line);
            for (j, v) in line.iter().enumerate() {
                data[base + j * stride] = *v;
            }
        }
    }
}

/// Unnormalized DCT-II of length `n`, `X_k = Σ x_j cos(π k (2j+1) / 2n)`,
/// and its exact inverse, both evaluated through a length-`2n` FFT.
pub struct CosineTransform {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    twiddle: Vec<Complex64>,
}

impl CosineTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let twiddle =
            (0..n).map(|k| Complex64::from_polar(1.0, -std::f64::consts::PI * k as f64 / (2 * n) as f64)).collect();
        Self { n, fwd: planner.plan_fft_forward(2 * n), inv: planner.plan_fft_inverse(2 * n), twiddle }
    }

    pub fn dct2(&self, x: &mut [f64]) {
        let n = self.n;
        let mut buf: Vec<Complex64> = Vec::with_capacity(2 * n);
        buf.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
        buf.extend(x.iter().rev().map(|&v| Complex64::new(v, 0.0)));
        self.fwd.process(&mut buf);
        for k in 0..n {
            x[k] = 0.5 * (buf[k] * self.twiddle[k]).re;
        }
    }

    pub fn idct2(&self, x: &mut [f64]) {
        let n = self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        for k in 0..n {
            let w = if k == 0 { 0.5 } else { 1.0 };
            buf[k] = x[k] * w * self.twiddle[k].conj();
        }
        self.inv.process(&mut buf);
        let s = 2.0 / n as f64;
        for j in 0..n {
            x[j] = s * buf[j].re;
        }
    }
}

/// Separable DCT-II over all axes of a grid.
pub struct CosineNd {
    grid: Grid,
    tr: CosineTransform,
}

impl CosineNd {
    pub fn new(grid: Grid) -> Self {
        Self { grid, tr: CosineTransform::new(grid.cells()) }
    }

    pub fn forward(&self, data: &mut [f64]) {
        let dims = vec![self.grid.cells(); self.grid.dim()];
        for axis in 0..dims.len() {
            along_axis(data, &dims, axis, |line| self.tr.dct2(line));
        }
    }

    pub fn inverse(&self, data: &mut [f64]) {
        let dims = vec![self.grid.cells(); self.grid.dim()];
        for axis in 0..dims.len() {
            along_axis(data, &dims, axis, |line| self.tr.idct2(line));
        }
    }
}

/// Inverse of `shift + Σ_d c_d (−D²_d)` for a constant-coefficient operator,
/// diagonalized by the FFT (periodic) or DCT-II (homogeneous Neumann).
/// The zero mode is mapped to zero when the symbol vanishes there.
pub enum SpectralPreconditioner {
    Periodic { fft: FftNd, inv_symbol: Vec<f64> },
    Neumann { dct: CosineNd, inv_symbol: Vec<f64> },
}

impl SpectralPreconditioner {
    pub fn periodic(grid: Grid, coeffs: [f64; 3], shift: f64) -> Self {
        let inv_symbol = symbol(grid, coeffs, shift, 2.0);
        Self::Periodic { fft: FftNd::new(&vec![grid.cells(); grid.dim()]), inv_symbol }
    }

    pub fn neumann(grid: Grid, coeffs: [f64; 3], shift: f64) -> Self {
        let inv_symbol = symbol(grid, coeffs, shift, 1.0);
        Self::Neumann { dct: CosineNd::new(grid), inv_symbol }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Self::Periodic { fft, inv_symbol } => {
                let mut buf: Vec<Complex64> = r.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft.forward(&mut buf);
                for (b, s) in buf.iter_mut().zip(inv_symbol) {
                    *b *= *s;
                }
                fft.inverse(&mut buf);
                for (zi, b) in z.iter_mut().zip(&buf) {
                    *zi = b.re;
                }
            }
            Self::Neumann { dct, inv_symbol } => {
                z.copy_from_slice(r);
                dct.forward(z);
                for (v, s) in z.iter_mut().zip(inv_symbol) {
                    *v *= *s;
                }
                dct.inverse(z);
            }
        }
    }
}

/// `period_factor` is 2 for periodic (θ = 2πk/N) and 1 for Neumann (θ = πk/N).
fn symbol(grid: Grid, coeffs: [f64; 3], shift: f64, period_factor: f64) -> Vec<f64> {
    let n = grid.cells() as f64;
    let h2 = grid.h() * grid.h();
    (0..grid.len())
        .map(|k| {
            let c = grid.coords(k);
            let mut s = shift;
            for d in 0..grid.dim() {
                let half = std::f64::consts::PI * period_factor * c[d] as f64 / (2.0 * n);
                s += coeffs[d] * 4.0 * half.sin().powi(2) / h2;
            }
            if s.abs() < 1e-300 {
                0.0
            } else {
                1.0 / s
            }
        })
        .collect()
}
