//! First- and second-order correctors, the Neumann corrector `Φ`, initial data
//! and the corrected approximations of `m^ε`.
//!
//! Derivatives of `m₀` are taken by finite differences on the grid where `m₀`
//! lives and carried to the target grid by cubic interpolation. They are then
//! made consistent with `|m₀| = 1`: first derivatives are projected onto the
//! tangent plane and the normal part of `∂ᵢⱼm₀` is set to `−(∂ᵢm₀·∂ⱼm₀)m₀`.

use crate::cellsolve::{CellSolutions, HomogenizedModel};
use crate::divform::{Boundary, DivFormOperator};
use crate::error::{Error, Result};
use crate::grid::{dot, norm, tangential, Grid, Vec3, VectorField};
use crate::interp;
use crate::material::{fast_variable, MaterialModel};
use crate::reduce;
use crate::solver::{pcg, CgSettings};
use crate::spectral::SpectralPreconditioner;
use crate::strayfield::{stray_field, DemagKernel, Weight};

/// `m₀` with its first and second derivatives on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct M0Jet {
    pub grid: Grid,
    pub m: VectorField,
    /// `d1[j] = ∂ⱼm₀`
    pub d1: Vec<VectorField>,
    /// `d2[i][j] = ∂ᵢⱼm₀`
    pub d2: Vec<Vec<VectorField>>,
}

/// First derivative along `d`: fourth-order centred where possible.
fn diff1(grid: Grid, u: &[f64], d: usize) -> Vec<f64> {
    let n = grid.cells();
    let h = grid.h();
    let s = grid.stride(d);
    (0..grid.len())
        .map(|k| {
            let c = grid.coords(k)[d];
            if c >= 2 && c + 2 < n {
                (-u[k + 2 * s] + 8.0 * u[k + s] - 8.0 * u[k - s] + u[k - 2 * s]) / (12.0 * h)
            } else if c >= 1 && c + 1 < n {
                (u[k + s] - u[k - s]) / (2.0 * h)
            } else if c == 0 {
                (-3.0 * u[k] + 4.0 * u[k + s] - u[k + 2 * s]) / (2.0 * h)
            } else {
                (3.0 * u[k] - 4.0 * u[k - s] + u[k - 2 * s]) / (2.0 * h)
            }
        })
        .collect()
}

/// Second derivative along `d`: fourth-order centred where possible.
fn diff2(grid: Grid, u: &[f64], d: usize) -> Vec<f64> {
    let n = grid.cells();
    let h2 = grid.h() * grid.h();
    let s = grid.stride(d);
    (0..grid.len())
        .map(|k| {
            let c = grid.coords(k)[d];
            if c >= 2 && c + 2 < n {
                (-u[k + 2 * s] + 16.0 * u[k + s] - 30.0 * u[k] + 16.0 * u[k - s] - u[k - 2 * s]) / (12.0 * h2)
            } else if c >= 1 && c + 1 < n {
                (u[k + s] - 2.0 * u[k] + u[k - s]) / h2
            } else if c == 0 {
                (2.0 * u[k] - 5.0 * u[k + s] + 4.0 * u[k + 2 * s] - u[k + 3 * s]) / h2
            } else {
                (2.0 * u[k] - 5.0 * u[k - s] + 4.0 * u[k - 2 * s] - u[k - 3 * s]) / h2
            }
        })
        .collect()
}

/// Cubic transfer of a scalar field between grids over Ω.
pub fn transfer_scalar(src: Grid, data: &[f64], dst: Grid) -> Result<Vec<f64>> {
    if src.dim() != dst.dim() {
        return Err(Error::GridMismatch(format!("cannot transfer {}-D data to a {}-D grid", src.dim(), dst.dim())));
    }
    if src.cells() < 4 {
        return Err(Error::InvalidGrid("cubic transfer needs at least 4 cells per axis".into()));
    }
    if src == dst {
        return Ok(data.to_vec());
    }
    Ok((0..dst.len()).map(|k| interp::sample(&src, data, dst.center(k), false)).collect())
}

pub fn transfer_vector(f: &VectorField, dst: Grid) -> Result<VectorField> {
    let mut out = VectorField::zeros(dst);
    for c in 0..3 {
        out.comps[c] = transfer_scalar(f.grid, &f.comps[c], dst)?;
    }
    Ok(out)
}

impl M0Jet {
    /// Differentiates `m0` on its own grid and transfers everything to `target`.
    pub fn from_field(m0: &VectorField, target: Grid) -> Result<Self> {
        let src = m0.grid;
        if src.cells() < 4 {
            return Err(Error::InvalidGrid("m0 grid needs at least 4 cells per axis".into()));
        }
        let dim = src.dim();
        let mut d1 = Vec::with_capacity(dim);
        let mut d2 = vec![Vec::with_capacity(dim); dim];
        for j in 0..dim {
            let mut f = VectorField::zeros(src);
            for c in 0..3 {
                f.comps[c] = diff1(src, &m0.comps[c], j);
            }
            d1.push(f);
        }
        for i in 0..dim {
            for j in 0..dim {
                let mut f = VectorField::zeros(src);
                for c in 0..3 {
                    f.comps[c] = if i == j { diff2(src, &m0.comps[c], i) } else { diff1(src, &d1[j].comps[c], i) };
                }
                d2[i].push(f);
            }
        }
        let mut jet = Self {
            grid: target,
            m: transfer_vector(m0, target)?,
            d1: d1.iter().map(|f| transfer_vector(f, target)).collect::<Result<_>>()?,
            d2: d2
                .iter()
                .map(|row| row.iter().map(|f| transfer_vector(f, target)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?,
        };
        jet.project();
        Ok(jet)
    }

    /// Jet of a closed-form field by centred differences with step `δ`.
    pub fn from_fn(f: impl Fn(Vec3) -> Vec3, target: Grid) -> Self {
        let dim = target.dim();
        let delta = 1e-4;
        let shift = |x: Vec3, d: usize, s: f64| {
            let mut y = x;
            y[d] += s;
            y
        };
        let mut jet = Self {
            grid: target,
            m: VectorField::from_fn(target, &f),
            d1: (0..dim)
                .map(|j| {
                    VectorField::from_fn(target, |x| {
                        let (a, b) = (f(shift(x, j, delta)), f(shift(x, j, -delta)));
                        [0, 1, 2].map(|c| (a[c] - b[c]) / (2.0 * delta))
                    })
                })
                .collect(),
            d2: (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| {
                            VectorField::from_fn(target, |x| {
                                if i == j {
                                    let (a, m, b) = (f(shift(x, i, delta)), f(x), f(shift(x, i, -delta)));
                                    [0, 1, 2].map(|c| (a[c] - 2.0 * m[c] + b[c]) / (delta * delta))
                                } else {
                                    let pp = f(shift(shift(x, i, delta), j, delta));
                                    let pm = f(shift(shift(x, i, delta), j, -delta));
                                    let mp = f(shift(shift(x, i, -delta), j, delta));
                                    let mm = f(shift(shift(x, i, -delta), j, -delta));
                                    [0, 1, 2].map(|c| (pp[c] - pm[c] - mp[c] + mm[c]) / (4.0 * delta * delta))
                                }
                            })
                        })
                        .collect()
                })
                .collect(),
        };
        jet.project();
        jet
    }

    fn project(&mut self) {
        let dim = self.grid.dim();
        for k in 0..self.grid.len() {
            let v = self.m.get(k);
            let n = norm(v);
            let m = if n > 0.0 { v.map(|c| c / n) } else { [0.0, 0.0, 1.0] };
            self.m.set(k, m);
            let mut t = Vec::with_capacity(dim);
            for j in 0..dim {
                let dj = tangential(m, self.d1[j].get(k));
                self.d1[j].set(k, dj);
                t.push(dj);
            }
            for i in 0..dim {
                for j in 0..dim {
                    let tan = tangential(m, self.d2[i][j].get(k));
                    let s = -dot(t[i], t[j]);
                    self.d2[i][j].set(k, [0, 1, 2].map(|c| tan[c] + s * m[c]));
                }
            }
        }
    }
}

/// Zeeman entry of the lower-order source of `m₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeemanCorrector {
    /// `M_s(y) h_a`
    #[default]
    Literal,
    /// `(M_s(y) − M⁰) h_a`
    Centered,
}

/// Cell fields sampled at the fast variable of every target-grid cell.
struct FastSampler<'a> {
    cells: &'a CellSolutions,
    ys: Vec<Vec3>,
}

impl<'a> FastSampler<'a> {
    fn new(cells: &'a CellSolutions, grid: Grid, eps: f64) -> Result<Self> {
        if cells.grid.dim() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "cell solutions are {}-D, target grid {}-D",
                cells.grid.dim(),
                grid.dim()
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidConfig("eps must be positive".into()));
        }
        Ok(Self { cells, ys: (0..grid.len()).map(|k| fast_variable(grid.center(k), eps)).collect() })
    }

    fn sample(&self, field: &[f64]) -> Vec<f64> {
        self.ys.iter().map(|&y| self.cells.sample(field, y)).collect()
    }
}

/// `m₁ = Σⱼ χⱼ(x/ε) ∂ⱼm₀(x)`.
pub fn build_m1(jet: &M0Jet, cells: &CellSolutions, eps: f64) -> Result<VectorField> {
    let fs = FastSampler::new(cells, jet.grid, eps)?;
    let mut m1 = VectorField::zeros(jet.grid);
    for (j, chi) in cells.chi.iter().enumerate() {
        let cj = fs.sample(chi);
        for c in 0..3 {
            for (k, v) in m1.comps[c].iter_mut().enumerate() {
                *v += cj[k] * jet.d1[j].comps[c][k];
            }
        }
    }
    Ok(m1)
}

/// `m₂ = Σθᵢⱼ∂ᵢⱼm₀ + Σ(θᵢⱼ − ½χᵢχⱼ)(∂ᵢm₀·∂ⱼm₀)m₀ + T − (m₀·T)m₀`,
/// `T = −κ(m₀·u)u + μ₀ρ h_d[M⁰m₀] + μ₀Λm₀ + (Zeeman entry)`.
///
/// `kernel` must be built for the jet grid when `μ₀ > 0`.
pub fn build_m2(
    jet: &M0Jet,
    cells: &CellSolutions,
    hom: &HomogenizedModel,
    model: &MaterialModel,
    eps: f64,
    kernel: Option<&DemagKernel>,
    zeeman: ZeemanCorrector,
) -> Result<VectorField> {
    let grid = jet.grid;
    let dim = grid.dim();
    let fs = FastSampler::new(cells, grid, eps)?;
    let chi: Vec<Vec<f64>> = cells.chi.iter().map(|c| fs.sample(c)).collect();
    let theta: Vec<Vec<Vec<f64>>> = cells.theta.iter().map(|row| row.iter().map(|t| fs.sample(t)).collect()).collect();
    let kappa = fs.sample(&cells.kappa);
    let stray = if model.mu0 > 0.0 {
        let k = kernel.ok_or(Error::MissingKernel)?;
        let rho = fs.sample(&cells.rho);
        let lambda: Vec<Vec<Vec<f64>>> =
            cells.lambda.iter().map(|row| row.iter().map(|l| fs.sample(l)).collect()).collect();
        Some((stray_field(&jet.m, Weight::Constant(hom.m0), k)?, rho, lambda))
    } else {
        None
    };
    let u = model.easy_axis;
    let mut m2 = VectorField::zeros(grid);
    for k in 0..grid.len() {
        let m0 = jet.m.get(k);
        let mut v = [0.0; 3];
        for i in 0..dim {
            for j in 0..dim {
                let d2 = jet.d2[i][j].get(k);
                let g = dot(jet.d1[i].get(k), jet.d1[j].get(k));
                let w = theta[i][j][k] - 0.5 * chi[i][k] * chi[j][k];
                for c in 0..3 {
                    v[c] += theta[i][j][k] * d2[c] + w * g * m0[c];
                }
            }
        }
        let mu = dot(m0, u);
        let ms = model.ms_at(fast_variable(grid.center(k), eps));
        let zee = match zeeman {
            ZeemanCorrector::Literal => ms,
            ZeemanCorrector::Centered => ms - hom.m0,
        };
        let mut t = [0, 1, 2].map(|c| -kappa[k] * mu * u[c] + zee * model.h_applied[c]);
        if let Some((hd, rho, lambda)) = &stray {
            let h = hd.get(k);
            for c in 0..3 {
                t[c] += model.mu0 * rho[k] * h[c];
            }
            for i in 0..dim {
                for j in 0..dim {
                    t[i] += model.mu0 * lambda[i][j][k] * m0[j];
                }
            }
        }
        let tt = tangential(m0, t);
        for c in 0..3 {
            v[c] += tt[c];
        }
        m2.set(k, v);
    }
    Ok(m2)
}

/// `Φᵢ` with `div(a^ε∇Φᵢ) = div(a⁰∇xᵢ)` under the common discrete Neumann closure,
/// anchored so that `Φᵢ(x̃) = x̃ᵢ` at the centre cell.
pub fn solve_neumann_phi(
    model: &MaterialModel,
    hom: &HomogenizedModel,
    eps: f64,
    grid: Grid,
    cg: CgSettings,
) -> Result<Vec<Vec<f64>>> {
    if grid.dim() != model.dim {
        return Err(Error::GridMismatch("material and grid dimensions differ".into()));
    }
    if grid.h() > eps / 8.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidConfig(format!("h = {} does not resolve eps = {eps}", grid.h())));
    }
    let pairs: Vec<(usize, usize)> = model.a.off_diagonal_pairs().collect();
    let op = DivFormOperator::from_fn(grid, Boundary::Neumann, &pairs, |x| model.a_at(fast_variable(x, eps)));
    let op0 = DivFormOperator::constant(grid, Boundary::Neumann, hom.a0);
    let precond = SpectralPreconditioner::neumann(grid, op.mean_diagonal(), 0.0);
    let center = grid.center_cell();
    let mut out = Vec::with_capacity(grid.dim());
    for i in 0..grid.dim() {
        let xi: Vec<f64> = (0..grid.len()).map(|k| grid.center(k)[i]).collect();
        let mut b = vec![0.0; grid.len()];
        op0.apply(&xi, &mut b);
        // −A^ε Φ = −A⁰ x
        b.iter_mut().for_each(|v| *v = -*v);
        reduce::subtract_mean(&mut b);
        let mut phi = xi.clone();
        let apply = |x: &[f64], o: &mut [f64]| {
            op.apply(x, o);
            o.iter_mut().for_each(|v| *v = -*v);
        };
        pcg(apply, |r, z| precond.apply(r, z), &b, &mut phi, cg, true)?;
        let shift = grid.center(center)[i] - phi[center];
        phi.iter_mut().for_each(|v| *v += shift);
        out.push(phi);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorBundle {
    pub eps: f64,
    pub m1: VectorField,
    pub m2: VectorField,
    pub phi: Vec<Vec<f64>>,
    /// `Σᵢ(Φᵢ − xᵢ − εχᵢ^ε)∂ᵢm₀`
    pub omega_n: VectorField,
}

/// `Σᵢ(Φᵢ − xᵢ)∂ᵢm₀`
pub fn neumann_correction(jet: &M0Jet, phi: &[Vec<f64>]) -> VectorField {
    let grid = jet.grid;
    let mut out = VectorField::zeros(grid);
    for (i, p) in phi.iter().enumerate() {
        for k in 0..grid.len() {
            let w = p[k] - grid.center(k)[i];
            for c in 0..3 {
                out.comps[c][k] += w * jet.d1[i].comps[c][k];
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn build_bundle(
    jet: &M0Jet,
    cells: &CellSolutions,
    hom: &HomogenizedModel,
    model: &MaterialModel,
    eps: f64,
    kernel: Option<&DemagKernel>,
    zeeman: ZeemanCorrector,
    cg: CgSettings,
) -> Result<CorrectorBundle> {
    let m1 = build_m1(jet, cells, eps)?;
    let m2 = build_m2(jet, cells, hom, model, eps, kernel, zeeman)?;
    let phi = solve_neumann_phi(model, hom, eps, jet.grid, cg)?;
    let mut omega_n = neumann_correction(jet, &phi);
    omega_n.axpy(-eps, &m1);
    Ok(CorrectorBundle { eps, m1, m2, phi, omega_n })
}

/// The three comparison fields, not renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Approximations {
    /// `m₀ + εm₁ + ε²m₂`
    pub tilde_m: VectorField,
    /// `m₀ + (Φ − x)∇m₀`
    pub neumann_corrected: VectorField,
    /// `m₀ + εχ(x/ε)∇m₀`
    pub twoscale_corrected: VectorField,
}

/// `jet_time` is the time of the `m₀` snapshot the jet was built from.
pub fn build_approximations(
    jet: &M0Jet,
    bundle: &CorrectorBundle,
    jet_time: f64,
    target_time: f64,
) -> Result<Approximations> {
    if (jet_time - target_time).abs() > 1e-12 * (1.0 + target_time.abs()) {
        return Err(Error::TimeMismatch(format!("m0 snapshot at t = {jet_time}, requested t = {target_time}")));
    }
    if bundle.m1.grid != jet.grid {
        return Err(Error::GridMismatch("corrector bundle and m0 jet live on different grids".into()));
    }
    let eps = bundle.eps;
    let mut tilde_m = jet.m.clone();
    tilde_m.axpy(eps, &bundle.m1);
    tilde_m.axpy(eps * eps, &bundle.m2);
    let mut neumann_corrected = jet.m.clone();
    neumann_corrected.axpy(1.0, &neumann_correction(jet, &bundle.phi));
    let mut twoscale_corrected = jet.m.clone();
    twoscale_corrected.axpy(eps, &bundle.m1);
    Ok(Approximations { tilde_m, neumann_corrected, twoscale_corrected })
}

/// Smooth initial profiles whose gradients vanish in the collar
/// `{x : min_d min(x_d, 1 − x_d) < 0.1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `m ≡ (0, 0, 1)`
    Uniform,
    /// Polar tilt `θ = 0.25 + ψ(x)` at fixed azimuth.
    Bump,
    /// Tilt and azimuth both varying with `ψ(x)`.
    Twist,
}

impl Profile {
    pub const NAMES: [&'static str; 3] = ["uniform", "bump", "twist"];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "uniform" => Ok(Self::Uniform),
            "bump" => Ok(Self::Bump),
            "twist" => Ok(Self::Twist),
            other => {
                Err(Error::InvalidProfile(format!("unknown profile '{other}' (known: {})", Self::NAMES.join(", "))))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Bump => "bump",
            Self::Twist => "twist",
        }
    }

    pub fn eval(&self, x: Vec3, dim: usize) -> Vec3 {
        let psi: f64 = (0..dim).map(|d| collar_bump(x[d])).product();
        let (theta, phi) = match self {
            Self::Uniform => return [0.0, 0.0, 1.0],
            Self::Bump => (0.25 + psi, 0.3),
            Self::Twist => (0.4 + 0.8 * psi, 0.2 + 1.5 * psi * (1.0 + 0.3 * x[0])),
        };
        [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
    }

    pub fn sample(&self, grid: Grid) -> VectorField {
        VectorField::from_fn(grid, |x| self.eval(x, grid.dim()))
    }
}

/// `C^∞` bump equal to 1 at `t = ½` and vanishing with all derivatives outside `(0.1, 0.9)`.
pub fn collar_bump(t: f64) -> f64 {
    let s = (t - 0.5) / 0.4;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// `m_init⁰ = profile`, `m_init^ε = normalize(m_init⁰ + ε m₁[profile])` on `grid`.
pub fn make_initial_data(
    profile: Profile,
    cells: &CellSolutions,
    eps: f64,
    grid: Grid,
) -> Result<(VectorField, VectorField)> {
    let dim = grid.dim();
    let m0 = profile.sample(grid);
    let dev = m0.max_norm_deviation();
    if dev > 1e-12 {
        return Err(Error::InvalidProfile(format!("profile is not unit length (deviation {dev:.3e})")));
    }
    let jet = M0Jet::from_fn(|x| profile.eval(x, dim), grid);
    let m1 = build_m1(&jet, cells, eps)?;
    let mut me = m0.clone();
    me.axpy(eps, &m1);
    for k in 0..grid.len() {
        let v = me.get(k);
        let n = norm(v);
        me.set(k, v.map(|c| c / n));
    }
    Ok((m0, me))
}
