//! Four-point (cubic) Lagrange interpolation of cell-centred data, either
//! periodic on the unit cell or bounded to Ω with one-sided stencils near ∂Ω.

use crate::grid::{Grid, Vec3};

#[inline]
fn lagrange4(t: f64) -> [f64; 4] {
    // nodes at -1, 0, 1, 2
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Stencil start index and weights along one axis for coordinate `x ∈ [0,1]`.
fn axis_stencil(x: f64, n: usize, periodic: bool) -> ([usize; 4], [f64; 4]) {
    let s = x * n as f64 - 0.5;
    if periodic {
        let j0 = s.floor();
        let t = s - j0;
        let w = lagrange4(t);
        let j0 = j0 as i64;
        let idx = [0i64, 1, 2, 3].map(|o| (j0 - 1 + o).rem_euclid(n as i64) as usize);
        (idx, w)
    } else {
        // clamp the 4-point window inside [0, n-1]
        let j0 = s.floor() as i64;
        let start = (j0 - 1).clamp(0, n as i64 - 4);
        let t = s - (start + 1) as f64;
        let w = lagrange4(t);
        let idx = [0i64, 1, 2, 3].map(|o| (start + o) as usize);
        (idx, w)
    }
}

/// Interpolates a scalar field given on `grid` at point `x`.
pub fn sample(grid: &Grid, data: &[f64], x: Vec3, periodic: bool) -> f64 {
    let n = grid.cells();
    let dim = grid.dim();
    let stencils: Vec<([usize; 4], [f64; 4])> = (0..dim).map(|d| axis_stencil(x[d], n, periodic)).collect();
    let mut total = 0.0;
    match dim {
        1 => {
            let (i0, w0) = stencils[0];
            for a in 0..4 {
                total += w0[a] * data[i0[a]];
            }
        }
        2 => {
            let (i0, w0) = stencils[0];
            let (i1, w1) = stencils[1];
            for b in 0..4 {
                let mut row = 0.0;
                for a in 0..4 {
                    row += w0[a] * data[i0[a] + n * i1[b]];
                }
                total += w1[b] * row;
            }
        }
        _ => {
            let (i0, w0) = stencils[0];
            let (i1, w1) = stencils[1];
            let (i2, w2) = stencils[2];
            for c in 0..4 {
                let mut plane = 0.0;
                for b in 0..4 {
                    let mut row = 0.0;
                    for a in 0..4 {
                        row += w0[a] * data[i0[a] + n * (i1[b] + n * i2[c])];
                    }
                    plane += w1[b] * row;
                }
                total += w2[c] * plane;
            }
        }
    }
    total
}
