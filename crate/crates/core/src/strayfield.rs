//! Free-space stray field of a cellwise-constant magnetization,
//! `h_d[M m] = −N̄ * (M m)`, where `N̄(d)` is the demagnetizing tensor averaged
//! over a target cell and integrated over a source cell at offset `d`.
//!
//! Near offsets use the closed-form antiderivatives (`ln`/`atan` in 2D, Newell's
//! `f`/`g` in 3D) with the 9- or 27-point second-difference stencil. Far offsets,
//! where that stencil cancels badly, integrate `∂ᵢ∂ⱼΦ` against the tent weight
//! with tensor Gauss–Legendre rules. The convolution runs by FFT on a
//! zero-padded box.
//!
//! `N̄` is symmetric positive semi-definite as an operator, so `−∫ h_d·M m ≥ 0`
//! and `‖h_d‖ ≤ ‖M m‖`. For `n = 2` only `(m₁, m₂)` source the field and `h_d`
//! has no third component.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::spectral::FftNd;

/// Offsets with `|d|∞` up to this use the closed form.
const NEAR: i64 = 8;

/// Fundamental solution of the Laplacian, `ΔΦ = δ`.
pub fn fundamental_solution(dim: usize, r: f64) -> f64 {
    match dim {
        2 => r.ln() / (2.0 * PI),
        _ => -1.0 / (4.0 * PI * r),
    }
}

/// `∂ᵢ∂ⱼΦ` at a nonzero point.
fn hessian_phi(dim: usize, x: [f64; 3], i: usize, j: usize) -> f64 {
    let r2: f64 = x.iter().take(dim).map(|v| v * v).sum();
    let delta = if i == j { r2 } else { 0.0 };
    match dim {
        2 => (delta - 2.0 * x[i] * x[j]) / (2.0 * PI * r2 * r2),
        _ => (delta - 3.0 * x[i] * x[j]) / (4.0 * PI * r2 * r2 * r2.sqrt()),
    }
}

fn safe_atan(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        (num / den).atan()
    }
}

fn safe_asinh(num: f64, den2: f64) -> f64 {
    if den2 == 0.0 {
        0.0
    } else {
        (num / den2.sqrt()).asinh()
    }
}

fn safe_log(r2: f64) -> f64 {
    if r2 == 0.0 {
        0.0
    } else {
        r2.ln()
    }
}

fn xat(x: f64, y: f64) -> f64 {
    x * safe_atan(y, x)
}

fn a2(x: f64, y: f64) -> f64 {
    y * xat(x, y) - 0.75 * y * y + 0.25 * (y * y - x * x) * safe_log(x * x + y * y)
}

fn b2(x: f64, y: f64) -> f64 {
    0.5 * (x * xat(x, y) + y * xat(y, x) + x * y * safe_log(x * x + y * y) - 3.0 * x * y)
}

fn newell_f(x: f64, y: f64, z: f64) -> f64 {
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut v = 0.5 * y * (z2 - x2) * safe_asinh(y, x2 + z2);
    v += 0.5 * z * (y2 - x2) * safe_asinh(z, x2 + y2);
    v -= x * y * z * safe_atan(y * z, x * r);
    v + (2.0 * x2 - y2 - z2) * r / 6.0
}

fn newell_g(x: f64, y: f64, z: f64) -> f64 {
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut v = x * y * z * safe_asinh(z, x2 + y2);
    v += y / 6.0 * (3.0 * z2 - y2) * safe_asinh(x, y2 + z2);
    v += x / 6.0 * (3.0 * z2 - x2) * safe_asinh(y, x2 + z2);
    v -= z * z2 / 6.0 * safe_atan(x * y, z * r);
    v -= 0.5 * z * y2 * safe_atan(x * z, y * r);
    v -= 0.5 * z * x2 * safe_atan(y * z, x * r);
    v - x * y * r / 3.0
}

const STENCIL: [(f64, f64); 3] = [(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)];

fn closed_form(dim: usize, d: [f64; 3]) -> [[f64; 3]; 3] {
    let mut n = [[0.0; 3]; 3];
    if dim == 2 {
        let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
        for (a, ca) in STENCIL {
            for (b, cb) in STENCIL {
                let (x, y) = (d[0] + a, d[1] + b);
                let c = ca * cb;
                xx += c * a2(x, y);
                yy += c * a2(y, x);
                xy += c * b2(x, y);
            }
        }
        let s = 1.0 / (2.0 * PI);
        n[0][0] = s * xx;
        n[1][1] = s * yy;
        n[0][1] = s * xy;
    } else {
        let mut acc = [0.0; 6];
        for (a, ca) in STENCIL {
            for (b, cb) in STENCIL {
                for (e, ce) in STENCIL {
                    let (x, y, z) = (d[0] + a, d[1] + b, d[2] + e);
                    let c = ca * cb * ce;
                    acc[0] += c * newell_f(x, y, z);
                    acc[1] += c * newell_f(y, x, z);
                    acc[2] += c * newell_f(z, y, x);
                    acc[3] += c * newell_g(x, y, z);
                    acc[4] += c * newell_g(x, z, y);
                    acc[5] += c * newell_g(y, z, x);
                }
            }
        }
        let s = -1.0 / (4.0 * PI);
        n[0][0] = s * acc[0];
        n[1][1] = s * acc[1];
        n[2][2] = s * acc[2];
        n[0][1] = s * acc[3];
        n[0][2] = s * acc[4];
        n[1][2] = s * acc[5];
    }
    for i in 0..3 {
        for j in 0..i {
            n[i][j] = n[j][i];
        }
    }
    n
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(q: usize) -> Vec<(f64, f64)> {
    (0..q)
        .map(|k| {
            let mut x = (PI * (k as f64 + 0.75) / (q as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for l in 2..=q {
                    let p2 = ((2 * l - 1) as f64 * x * p1 - (l - 1) as f64 * p0) / l as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Nodes on `[−1, 1]` for `∫ (1 − |s|) φ(s) ds`, `q` per half.
fn tent_rule(q: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2 * q);
    for (x, w) in gauss_legendre(q) {
        let t = 0.5 * (1.0 + x);
        out.push((t, 0.5 * w * (1.0 - t)));
        out.push((-t, 0.5 * w * (1.0 - t)));
    }
    out
}

fn far_points(r: i64) -> usize {
    match r {
        ..=15 => 8,
        16..=47 => 5,
        48..=199 => 4,
        _ => 3,
    }
}

fn quadrature(dim: usize, d: [f64; 3], rule: &[(f64, f64)]) -> [[f64; 3]; 3] {
    let mut n = [[0.0; 3]; 3];
    let third: &[(f64, f64)] = if dim == 3 { rule } else { &[(0.0, 1.0)] };
    for &(sx, wx) in rule {
        for &(sy, wy) in rule {
            for &(sz, wz) in third {
                let p = [d[0] + sx, d[1] + sy, d[2] + sz];
                let w = wx * wy * wz;
                for i in 0..dim {
                    for j in i..dim {
                        n[i][j] += w * hessian_phi(dim, p, i, j);
                    }
                }
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            n[i][j] = n[j][i];
        }
    }
    n
}

/// Cell-averaged demagnetizing tensor for the offset `o` in cells. It does not
/// depend on the spacing. `N̄(0)` has trace 1.
pub fn demag_tensor(dim: usize, o: [i64; 3]) -> [[f64; 3]; 3] {
    let r = o.iter().take(dim).map(|v| v.abs()).max().unwrap_or(0);
    let d = [o[0] as f64, o[1] as f64, if dim == 3 { o[2] as f64 } else { 0.0 }];
    if r <= NEAR {
        closed_form(dim, d)
    } else {
        quadrature(dim, d, &tent_rule(far_points(r)))
    }
}

/// Precomputed spectra of the padded tensor components for one domain grid.
pub struct DemagKernel {
    grid: Grid,
    pad: usize,
    fft: FftNd,
    pairs: Vec<(usize, usize)>,
    spectra: Vec<Vec<Complex64>>,
}

/// Smallest `2^a 3^b ≥ n`.
fn smooth_size(n: usize) -> usize {
    let mut best = usize::MAX;
    let mut p3 = 1;
    while p3 < 2 * n {
        let mut v = p3;
        while v < n {
            v *= 2;
        }
        best = best.min(v);
        p3 *= 3;
    }
    best
}

impl DemagKernel {
    /// Kernel with the default padding (≥ 2N per axis).
    pub fn build(grid: Grid) -> Result<Self> {
        Self::with_padding(grid, smooth_size(2 * grid.cells()))
    }

    pub fn with_padding(grid: Grid, pad: usize) -> Result<Self> {
        let dim = grid.dim();
        if dim == 1 {
            return Err(Error::InvalidMaterial("stray field (mu0 > 0) requires dimension 2 or 3".into()));
        }
        let n = grid.cells();
        if pad < 2 * n - 1 {
            return Err(Error::InvalidGrid(format!("padding {pad} too small for {n} cells")));
        }
        let pairs: Vec<(usize, usize)> =
            if dim == 2 { vec![(0, 0), (1, 1), (0, 1)] } else { vec![(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)] };
        let rules: Vec<(usize, Vec<(f64, f64)>)> = [3, 4, 5, 8].iter().map(|&q| (q, tent_rule(q))).collect();
        let rule_for = |r: i64| -> &[(f64, f64)] {
            let q = far_points(r);
            &rules.iter().find(|(p, _)| *p == q).expect("rule").1
        };
        // tensor on the nonnegative octant, reflected below
        let octant_len = n.pow(dim as u32);
        let octant: Vec<[[f64; 3]; 3]> = (0..octant_len)
            .into_par_iter()
            .map(|k| {
                let mut o = [0i64; 3];
                let mut r = k;
                for od in o.iter_mut().take(dim) {
                    *od = (r % n) as i64;
                    r /= n;
                }
                let dist = o.iter().take(dim).copied().max().unwrap_or(0);
                let d = [o[0] as f64, o[1] as f64, o[2] as f64];
                if dist <= NEAR {
                    closed_form(dim, d)
                } else {
                    quadrature(dim, d, rule_for(dist))
                }
            })
            .collect();
        let dims = vec![pad; dim];
        let fft = FftNd::new(&dims);
        let total = fft.len();
        let spectra = pairs
            .iter()
            .map(|&(i, j)| {
                let mut buf: Vec<Complex64> = (0..total)
                    .map(|k| {
                        let mut idx = 0;
                        let mut stride = 1;
                        let mut sign = 1.0;
                        let mut r = k;
                        for a in 0..dim {
                            let p = r % pad;
                            r /= pad;
                            let o = if p <= pad / 2 { p as i64 } else { p as i64 - pad as i64 };
                            if o.unsigned_abs() as usize >= n {
                                return Complex64::new(0.0, 0.0);
                            }
                            if o < 0 && (a == i) != (a == j) {
                                sign = -sign;
                            }
                            idx += o.unsigned_abs() as usize * stride;
                            stride *= n;
                        }
                        Complex64::new(sign * octant[idx][i][j], 0.0)
                    })
                    .collect();
                fft.forward(&mut buf);
                buf
            })
            .collect();
        Ok(Self { grid, pad, fft, pairs, spectra })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn padding(&self) -> usize {
        self.pad
    }

    fn embed(&self, values: impl Fn(usize) -> f64) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft.len()];
        for k in 0..self.grid.len() {
            buf[self.to_pad(k)] = Complex64::new(values(k), 0.0);
        }
        buf
    }

    fn to_pad(&self, k: usize) -> usize {
        let c = self.grid.coords(k);
        let mut idx = 0;
        let mut stride = 1;
        for cd in c.iter().take(self.grid.dim()) {
            idx += cd * stride;
            stride *= self.pad;
        }
        idx
    }
}

/// Saturation weight multiplying `m`.
#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    Constant(f64),
    Field(&'a [f64]),
}

impl Weight<'_> {
    fn at(&self, k: usize) -> f64 {
        match self {
            Weight::Constant(c) => *c,
            Weight::Field(f) => f[k],
        }
    }
}

/// `h_d[M m]` on Ω.
pub fn stray_field(m: &VectorField, weight: Weight<'_>, kernel: &DemagKernel) -> Result<VectorField> {
    let grid = kernel.grid;
    if m.grid != grid {
        return Err(Error::GridMismatch(format!(
            "field on {}^{} grid, kernel built for {}^{}",
            m.grid.cells(),
            m.grid.dim(),
            grid.cells(),
            grid.dim()
        )));
    }
    if let Weight::Field(f) = weight {
        if f.len() != grid.len() {
            return Err(Error::GridMismatch("weight length differs from grid".into()));
        }
    }
    let dim = grid.dim();
    let sources: Vec<Vec<Complex64>> = (0..dim)
        .map(|d| {
            let mut b = kernel.embed(|k| weight.at(k) * m.comps[d][k]);
            kernel.fft.forward(&mut b);
            b
        })
        .collect();
    let mut out = VectorField::zeros(grid);
    for i in 0..dim {
        let mut acc = vec![Complex64::new(0.0, 0.0); kernel.fft.len()];
        for (p, &(a, b)) in kernel.pairs.iter().enumerate() {
            let j = if a == i {
                b
            } else if b == i {
                a
            } else {
                continue;
            };
            for ((z, s), n) in acc.iter_mut().zip(&sources[j]).zip(&kernel.spectra[p]) {
                *z -= s * n;
            }
        }
        kernel.fft.inverse(&mut acc);
        for k in 0..grid.len() {
            out.comps[i][k] = acc[kernel.to_pad(k)].re;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_smooth(grid: Grid, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coef = [[0.0; 6]; 3];
        for c in coef.iter_mut().flatten() {
            *c = rng.gen_range(-1.0..1.0);
        }
        VectorField::from_fn(grid, |x| {
            let mut v = [0.0; 3];
            for (d, c) in coef.iter().enumerate() {
                v[d] = c[0]
                    + c[1] * (2.0 * PI * x[0]).sin()
                    + c[2] * (PI * x[1]).cos()
                    + c[3] * (2.0 * PI * (x[0] + x[1])).cos()
                    + c[4] * x[0] * x[1]
                    + c[5] * (3.0 * x[2]).sin();
            }
            let n = crate::grid::norm(v).max(1e-3);
            v.map(|c| c / n)
        })
    }

    fn l2(f: &VectorField) -> f64 {
        f.inner(f).sqrt()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rejects_one_dimension() {
        assert!(DemagKernel::build(Grid::new(1, 16).unwrap()).is_err());
    }

    #[test]
    fn self_terms() {
        let n2 = demag_tensor(2, [0, 0, 0]);
        assert!(close(n2[0][0], 0.5, 1e-14) && close(n2[1][1], 0.5, 1e-14) && n2[0][1].abs() < 1e-14);
        let n3 = demag_tensor(3, [0, 0, 0]);
        for i in 0..3 {
            assert!(close(n3[i][i], 1.0 / 3.0, 1e-14));
            for j in 0..i {
                assert!(n3[i][j].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn matches_quadrature_oracle_2d() {
        let cases = [
            ([1, 0, 0], 0, 0, -0.14778656343891),
            ([2, 0, 0], 0, 0, -0.03940273728506),
            ([2, 1, 0], 0, 0, -0.019295823716983),
            ([1, 1, 0], 0, 1, -0.0848084497942456),
            ([2, 1, 0], 0, 1, -0.025379856378677),
        ];
        for (o, i, j, v) in cases {
            let n = demag_tensor(2, o);
            assert!(close(n[i][j], v, 1e-13), "{o:?} {i}{j}: {}", n[i][j]);
        }
    }

    #[test]
    fn matches_quadrature_oracle_3d() {
        let cases = [
            ([2, 0, 0], 0, 0, -0.019421487569729),
            ([2, 1, 0], 0, 0, -0.010008545592366),
            ([2, 1, 0], 0, 1, -0.008452105908238),
            ([0, 2, 1], 0, 0, 0.007051600954448),
            ([3, -2, 2], 0, 0, -0.000669309340438),
            ([3, -2, 2], 0, 1, 0.001203111668768),
        ];
        for (o, i, j, v) in cases {
            let n = demag_tensor(3, o);
            assert!(close(n[i][j], v, 1e-12), "{o:?} {i}{j}: {}", n[i][j]);
        }
    }

    #[test]
    fn reflections_and_permutations() {
        for dim in [2, 3] {
            let o = [3, 5, if dim == 3 { 2 } else { 0 }];
            let n = demag_tensor(dim, o);
            let nx = demag_tensor(dim, [-o[0], o[1], o[2]]);
            assert!(close(n[0][0], nx[0][0], 1e-15) && close(n[0][1], -nx[0][1], 1e-15));
            let ny = demag_tensor(dim, [o[1], o[0], o[2]]);
            assert!(close(n[0][0], ny[1][1], 1e-14) && close(n[0][1], ny[0][1], 1e-14));
        }
    }

    #[test]
    fn near_and_far_rules_agree() {
        for dim in [2, 3] {
            for o in [[6, 2, 1], [8, -3, 2], [5, 8, 0]] {
                let d = [o[0] as f64, o[1] as f64, if dim == 3 { o[2] as f64 } else { 0.0 }];
                let a = closed_form(dim, d);
                let b = quadrature(dim, d, &tent_rule(8));
                for i in 0..dim {
                    for j in 0..dim {
                        assert!(close(a[i][j], b[i][j], 1e-12), "{dim} {o:?}: {} {}", a[i][j], b[i][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn far_field_tends_to_point_hessian() {
        let o = [60, 25, 10];
        for dim in [2, 3] {
            let n = demag_tensor(dim, o);
            let x: [f64; 3] = [60.0, 25.0, if dim == 3 { 10.0 } else { 0.0 }];
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let p = hessian_phi(dim, x, 0, 1);
            assert!(close(n[0][1], p, 1e-2 * p.abs()), "{} {p}", n[0][1]);
            assert!((n[0][1] - p).abs() < 2.0 * p.abs() / (r * r));
        }
    }

    #[test]
    fn distant_tensor_matches_point_hessian() {
        for dim in [2, 3] {
            let o = [60_000, 80_000, 0];
            let n = demag_tensor(dim, o);
            let x = [60_000.0, 80_000.0, 0.0];
            for (i, j) in [(0, 0), (1, 1), (0, 1)] {
                let p = hessian_phi(dim, x, i, j);
                assert!((n[i][j] - p).abs() <= 1e-10 * p.abs(), "{dim} {i}{j}");
            }
            assert!(demag_tensor(dim, [0, 0, 0]).iter().flatten().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn zero_field_gives_zero() {
        let g = Grid::new(2, 16).unwrap();
        let k = DemagKernel::build(g).unwrap();
        let h = stray_field(&VectorField::zeros(g), Weight::Constant(1.0), &k).unwrap();
        assert!(h.comps.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn fft_matches_direct_sum() {
        for dim in [2, 3] {
            let g = Grid::new(dim, 6).unwrap();
            let kernel = DemagKernel::build(g).unwrap();
            let m = random_smooth(g, 3);
            let ms: Vec<f64> = (0..g.len()).map(|k| 1.0 + 0.1 * k as f64).collect();
            let fast = stray_field(&m, Weight::Field(&ms), &kernel).unwrap();
            let (m, ms) = (&m, &ms);
            for x in 0..g.len() {
                let cx = g.coords(x);
                for i in 0..dim {
                    let terms: Vec<f64> = (0..g.len())
                        .flat_map(|y| {
                            let cy = g.coords(y);
                            let o = [0, 1, 2].map(|a| cx[a] as i64 - cy[a] as i64);
                            let n = demag_tensor(dim, o);
                            (0..dim).map(move |j| -n[i][j] * ms[y] * m.comps[j][y]).collect::<Vec<_>>()
                        })
                        .collect();
                    let slow = reduce::sum(&terms);
                    assert!(close(fast.comps[i][x], slow, 1e-12), "{} {slow}", fast.comps[i][x]);
                }
            }
        }
    }

    #[test]
    fn doubling_padding_is_invisible() {
        let g = Grid::new(2, 24).unwrap();
        let m = random_smooth(g, 11);
        let k1 = DemagKernel::build(g).unwrap();
        let k2 = DemagKernel::with_padding(g, 2 * k1.padding()).unwrap();
        let a = stray_field(&m, Weight::Constant(1.0), &k1).unwrap();
        let b = stray_field(&m, Weight::Constant(1.0), &k2).unwrap();
        let d = a.sub(&b);
        assert!(d.comps.iter().flatten().all(|v| v.abs() < 1e-12));
        assert!(DemagKernel::with_padding(g, 40).is_err());
    }

    #[test]
    fn linear_and_energy_nonnegative() {
        let g = Grid::new(2, 32).unwrap();
        let k = DemagKernel::build(g).unwrap();
        let m1 = random_smooth(g, 1);
        let m2 = random_smooth(g, 2);
        let mut comb = m1.scaled(0.3);
        comb.axpy(-1.7, &m2);
        let h1 = stray_field(&m1, Weight::Constant(1.0), &k).unwrap();
        let h2 = stray_field(&m2, Weight::Constant(1.0), &k).unwrap();
        let hc = stray_field(&comb, Weight::Constant(1.0), &k).unwrap();
        let mut expect = h1.scaled(0.3);
        expect.axpy(-1.7, &h2);
        assert!(hc.sub(&expect).comps.iter().flatten().all(|v| v.abs() < 1e-12));
        for m in [&m1, &m2, &comb] {
            let h = stray_field(m, Weight::Constant(1.0), &k).unwrap();
            assert!(-h.inner(m) >= -1e-12);
        }
    }

    #[test]
    fn self_adjoint() {
        let g = Grid::new(3, 8).unwrap();
        let k = DemagKernel::build(g).unwrap();
        let (a, b) = (random_smooth(g, 5), random_smooth(g, 6));
        let ha = stray_field(&a, Weight::Constant(1.0), &k).unwrap();
        let hb = stray_field(&b, Weight::Constant(1.0), &k).unwrap();
        assert!(close(ha.inner(&b), hb.inner(&a), 1e-12));
    }

    #[test]
    fn third_component_does_not_source_in_plane_field() {
        let g = Grid::new(2, 16).unwrap();
        let k = DemagKernel::build(g).unwrap();
        let m = VectorField::uniform(g, [0.0, 0.0, 1.0]);
        let h = stray_field(&m, Weight::Constant(1.0), &k).unwrap();
        assert!(h.comps.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn square_demag_factor() {
        for n in [2, 7, 64] {
            let g = Grid::new(2, n).unwrap();
            let k = DemagKernel::build(g).unwrap();
            let h = stray_field(&VectorField::uniform(g, [1.0, 0.0, 0.0]), Weight::Constant(1.0), &k).unwrap();
            assert!(close(-reduce::mean(&h.comps[0]), 0.5, 1e-11), "{n}");
            assert!(reduce::mean(&h.comps[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn cube_demag_factor() {
        for n in [2, 5, 16] {
            let g = Grid::new(3, n).unwrap();
            let k = DemagKernel::build(g).unwrap();
            let h = stray_field(&VectorField::uniform(g, [0.0, 0.0, 1.0]), Weight::Constant(1.0), &k).unwrap();
            assert!(close(reduce::mean(&h.comps[2]), -1.0 / 3.0, 1e-11), "{n}");
        }
    }

    #[test]
    fn bounded_by_magnetization() {
        let g = Grid::new(2, 48).unwrap();
        let k = DemagKernel::build(g).unwrap();
        for seed in 0..5 {
            let m = random_smooth(g, 100 + seed);
            let h = stray_field(&m, Weight::Constant(1.0), &k).unwrap();
            assert!(l2(&h) <= l2(&m) * (1.0 + 1e-12));
        }
    }
}
