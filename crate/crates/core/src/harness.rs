//! ε-sweeps, error norms and rate fits.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::cellsolve::{solve_cells, CellSettings, CellSolutions, HomogenizedModel};
use crate::correctors::{self, M0Jet, Profile, ZeemanCorrector};
use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::llg::{self, gradient, kernel_for, LlgProblem, MagnetizationField, SimulationConfig};
use crate::material::MaterialModel;
use crate::reduce;
use crate::solver::CgSettings;

/// Cubic interpolation of a vector field onto `dst`.
pub fn transfer(field: &VectorField, dst: Grid) -> Result<VectorField> {
    correctors::transfer_vector(field, dst)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Norms {
    pub l2: f64,
    /// `‖∇f‖_{L²}`
    pub h1_semi: f64,
    /// `(‖f‖² + ‖∇f‖²)^{1/2}`
    pub h1: f64,
}

/// Midpoint-rule L² and centred-difference H¹ norms.
pub fn norms(f: &VectorField) -> Norms {
    let grid = f.grid;
    let vol = grid.cell_volume();
    let l2sq = f.inner(f);
    let mut semi = Vec::with_capacity(3 * grid.len());
    for c in 0..3 {
        semi.extend(gradient(grid, &f.comps[c]).iter().map(|g| g[0] * g[0] + g[1] * g[1] + g[2] * g[2]));
    }
    let semisq = reduce::sum(&semi) * vol;
    Norms { l2: l2sq.sqrt(), h1_semi: semisq.sqrt(), h1: (l2sq + semisq).sqrt() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    /// Half-width of the 95% confidence interval of the slope (0 for two points... never, needs ≥ 3).
    pub band: f64,
    /// `log₂(e(εₖ)/e(εₖ₊₁))` for consecutive rows.
    pub pairwise: Vec<f64>,
}

/// Least-squares fit of `log e = slope·log ε + intercept`.
pub fn fit_rate(eps: &[f64], err: &[f64]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(err)
        .filter(|(e, v)| **e > 0.0 && v.is_finite() && **v > 0.0)
        .map(|(e, v)| (e.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints { needed: 3, got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let dof = n - 2.0;
    let se = (ssr / dof / sxx).sqrt();
    let t = <statrs::distribution::StudentsT as statrs::distribution::ContinuousCDF<f64, f64>>::inverse_cdf(
        &statrs::distribution::StudentsT::new(0.0, 1.0, dof).expect("dof >= 1"),
        0.975,
    );
    let pairwise = pts.windows(2).map(|w| (w[0].1 - w[1].1) / (w[0].0 - w[1].0)).collect();
    Ok(RateFit { slope, intercept, residual: (ssr / n).sqrt(), band: t * se, pairwise })
}

/// `ε ln²(ε⁻¹ + 1)`
pub fn log_squared_law(eps: f64) -> f64 {
    eps * (1.0 / eps + 1.0).ln().powi(2)
}

/// `β(ε)` of the L² estimate with stray field: `ε ln²(ε⁻¹+1)` for n ≤ 2, `ε^{5/6}` for n = 3.
pub fn beta_law(dim: usize, eps: f64) -> f64 {
    if dim == 3 {
        eps.powf(5.0 / 6.0)
    } else {
        log_squared_law(eps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: MaterialModel,
    /// Sorted into decreasing order by [`SweepConfig::validate`].
    pub eps: Vec<f64>,
    pub profile: Profile,
    pub t_final: f64,
    pub tau: f64,
    /// ε-grid spacing is `h = ε / points_per_period`.
    pub points_per_period: usize,
    /// Cells per axis of the shared `m₀` grid.
    pub coarse_cells: usize,
    pub cell_cells: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Repeat the largest-ε row with `h/2` and report the change.
    pub spot_check: bool,
}

impl SweepConfig {
    pub fn new(model: MaterialModel, eps: Vec<f64>, profile: Profile) -> Self {
        let dim = model.dim;
        Self {
            model,
            eps,
            profile,
            t_final: 0.1,
            tau: 1e-3,
            points_per_period: if dim == 1 { 16 } else { 8 },
            coarse_cells: if dim == 1 { 512 } else { 128 },
            cell_cells: if dim == 1 { 256 } else { 64 },
            tol: 1e-10,
            max_iter: 5000,
            spot_check: false,
        }
    }

    pub fn validate(&mut self) -> Result<()> {
        self.model.validate()?;
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::InvalidConfig("eps values must lie in (0, 1]".into()));
        }
        self.eps.sort_by(|a, b| b.total_cmp(a));
        self.eps.dedup();
        if self.points_per_period < 8 {
            return Err(Error::InvalidConfig("points_per_period >= 8 required".into()));
        }
        if self.coarse_cells < 4 || self.cell_cells < 4 {
            return Err(Error::InvalidConfig("coarse and cell grids need at least 4 cells".into()));
        }
        self.simulation().validate()
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            tau: self.tau,
            t_final: self.t_final,
            tol: self.tol,
            max_iter: self.max_iter,
            output_every: 0,
        }
    }

    pub fn cg(&self) -> CgSettings {
        CgSettings { tol: self.tol, max_iter: self.max_iter }
    }

    pub fn eps_grid(&self, eps: f64) -> Result<Grid> {
        let n = (self.points_per_period as f64 / eps - 1e-9).ceil() as usize;
        Grid::new(self.model.dim, n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRow {
    pub eps: f64,
    pub h: f64,
    pub cells: usize,
    pub steps: usize,
}

/// The rows a sweep would run, in report order.
pub fn plan(config: &SweepConfig) -> Result<Vec<PlannedRow>> {
    let mut c = config.clone();
    c.validate()?;
    let (steps, _) = c.simulation().schedule();
    c.eps
        .iter()
        .map(|&eps| {
            let g = c.eps_grid(eps)?;
            Ok(PlannedRow { eps, h: g.h(), cells: g.cells(), steps })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub h: f64,
    pub cells: usize,
    pub l2_error: f64,
    pub h1_error: f64,
    pub l2_corrected_twoscale: f64,
    pub h1_corrected_neumann: f64,
    pub l2_tilde_literal: f64,
    pub l2_tilde_centered: f64,
    /// `‖m_init^ε − m_init⁰‖_{L²}`
    pub init_deviation: f64,
    pub status: RowStatus,
    /// Wall-clock seconds (kept out of the CSV).
    pub runtime: f64,
}

impl SweepRow {
    fn failed(eps: f64, grid: Option<Grid>, msg: String, runtime: f64) -> Self {
        Self {
            eps,
            h: grid.map_or(f64::NAN, |g| g.h()),
            cells: grid.map_or(0, |g| g.cells()),
            l2_error: f64::NAN,
            h1_error: f64::NAN,
            l2_corrected_twoscale: f64::NAN,
            h1_corrected_neumann: f64::NAN,
            l2_tilde_literal: f64::NAN,
            l2_tilde_centered: f64::NAN,
            init_deviation: f64::NAN,
            status: RowStatus::Failed(msg),
            runtime,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

/// Metrics of one row, in CSV column order after `eps, h, cells`.
pub const METRICS: [&str; 7] = [
    "L2_error",
    "H1_error",
    "L2_corrected_twoscale",
    "H1_corrected_neumann",
    "L2_tilde_literal",
    "L2_tilde_centered",
    "init_deviation",
];

impl SweepRow {
    pub fn metric(&self, i: usize) -> f64 {
        [
            self.l2_error,
            self.h1_error,
            self.l2_corrected_twoscale,
            self.h1_corrected_neumann,
            self.l2_tilde_literal,
            self.l2_tilde_centered,
            self.init_deviation,
        ][i]
    }
}

/// Errors below this are treated as the solver-tolerance floor.
pub const DEGENERATE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum SlopeFit {
    Fit(RateFit),
    /// All errors at the floor.
    Degenerate,
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub dim: usize,
    pub mu0: f64,
    pub t_final: f64,
    pub tau: f64,
    pub profile: String,
    pub rows: Vec<SweepRow>,
    /// One entry per [`METRICS`] name.
    pub fits: Vec<(String, SlopeFit)>,
    /// Slopes of the reference laws over the same ε values.
    pub reference: Vec<(String, f64)>,
    /// `‖m₀‖`-run and cell-problem wall-clock seconds.
    pub setup_runtime: f64,
    /// L² error at the largest ε with the ε-grid refined by 2.
    pub spot_check: Option<(f64, f64)>,
}

impl ConvergenceReport {
    pub fn fit(&self, metric: &str) -> Option<&SlopeFit> {
        self.fits.iter().find(|(n, _)| n == metric).map(|(_, f)| f)
    }

    /// Each ok row ≤ previous ok row × 1.05.
    pub fn monotone(&self, metric: usize) -> bool {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.is_ok()).map(|r| r.metric(metric)).collect();
        v.windows(2).all(|w| w[1] <= 1.05 * w[0])
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("eps,h,cells");
        for m in METRICS {
            s.push(',');
            s.push_str(m);
        }
        s.push_str(",status\n");
        for r in &self.rows {
            s.push_str(&format!("{:.12e},{:.12e},{}", r.eps, r.h, r.cells));
            for i in 0..METRICS.len() {
                s.push_str(&format!(",{:.12e}", r.metric(i)));
            }
            match &r.status {
                RowStatus::Ok => s.push_str(",ok\n"),
                RowStatus::Failed(m) => s.push_str(&format!(",failed: {}\n", m.replace([',', '\n'], ";"))),
            }
        }
        s
    }

    pub fn rates_text(&self) -> String {
        let mut s = format!(
            "# convergence rates\nn = {}\nmu0 = {}\nT = {}\ntau = {}\nprofile = {}\n\n",
            self.dim, self.mu0, self.t_final, self.tau, self.profile
        );
        s.push_str("## fitted slopes (least squares on log e vs log eps, 95% band)\n");
        for (name, fit) in &self.fits {
            match fit {
                SlopeFit::Fit(f) => {
                    let pw: Vec<String> = f.pairwise.iter().map(|p| format!("{p:.4}")).collect();
                    s.push_str(&format!(
                        "{name:<24} slope = {:.4} +- {:.4}  residual = {:.3e}  pairwise = [{}]\n",
                        f.slope,
                        f.band,
                        f.residual,
                        pw.join(", ")
                    ));
                }
                SlopeFit::Degenerate => s.push_str(&format!("{name:<24} degenerate (errors at solver floor)\n")),
                SlopeFit::Unavailable(m) => s.push_str(&format!("{name:<24} unavailable ({m})\n")),
            }
        }
        s.push_str("\n## reference laws over the same eps values\n");
        for (name, slope) in &self.reference {
            s.push_str(&format!("{name:<24} slope = {slope:.4}\n"));
        }
        s.push_str("\n## checks\n");
        s.push_str(&format!("monotone L2_error        = {}\n", self.monotone(0)));
        s.push_str(&format!("monotone H1_error        = {}\n", self.monotone(1)));
        let corrected_better = self.rows.iter().filter(|r| r.is_ok()).all(|r| r.h1_corrected_neumann <= r.h1_error);
        s.push_str(&format!("corrected H1 <= H1      = {corrected_better}\n"));
        if let Some((coarse, fine)) = self.spot_check {
            s.push_str(&format!("h-halving spot check    L2 = {coarse:.6e} -> {fine:.6e}\n"));
        }
        s.push_str("\n## runtime (s)\n");
        s.push_str(&format!("setup = {:.3}\n", self.setup_runtime));
        for r in &self.rows {
            s.push_str(&format!("eps = {:.6e}  runtime = {:.3}\n", r.eps, r.runtime));
        }
        s.push_str("\nOnly slopes are meaningful here; the error constants depend on high Sobolev norms of m0.\n");
        s
    }

    pub fn gnuplot_script(&self, csv_name: &str) -> String {
        format!(
            "set datafile separator ','\nset logscale xy\nset key left top\nset xlabel 'eps'\nset ylabel 'error'\n\
             plot '{csv_name}' using 1:4 skip 1 with linespoints title 'L2', \\\n\
             '{csv_name}' using 1:5 skip 1 with linespoints title 'H1', \\\n\
             '{csv_name}' using 1:6 skip 1 with linespoints title 'L2 two-scale', \\\n\
             '{csv_name}' using 1:7 skip 1 with linespoints title 'H1 Neumann-corrected', \\\n\
             '{csv_name}' using 1:(($1)*log(1/($1)+1)**2) skip 1 with lines title 'eps ln^2', \\\n\
             '{csv_name}' using 1:(sqrt($1)) skip 1 with lines title 'eps^(1/2)'\npause -1\n"
        )
    }
}

struct Shared {
    cells: CellSolutions,
    hom: HomogenizedModel,
    m0: VectorField,
    t: f64,
}

fn run_row(config: &SweepConfig, shared: &Shared, eps: f64, grid: Grid) -> Result<SweepRow> {
    let start = Instant::now();
    let model = &config.model;
    let kernel = kernel_for(model, grid)?;
    let problem = LlgProblem::epsilon(model, eps, grid, kernel.clone())?;
    let (init0, init_eps) = correctors::make_initial_data(config.profile, &shared.cells, eps, grid)?;
    let init_deviation = norms(&init_eps.sub(&init0)).l2;
    let traj = llg::run(&problem, &MagnetizationField::new(init_eps, 0.0)?, &config.simulation())?;
    let me = traj.final_field.m;

    let jet = M0Jet::from_field(&shared.m0, grid)?;
    let cg = config.cg();
    let bundle = correctors::build_bundle(
        &jet,
        &shared.cells,
        &shared.hom,
        model,
        eps,
        kernel.as_deref(),
        ZeemanCorrector::Literal,
        cg,
    )?;
    let approx = correctors::build_approximations(&jet, &bundle, shared.t, traj.final_field.t)?;
    let m2c = correctors::build_m2(
        &jet,
        &shared.cells,
        &shared.hom,
        model,
        eps,
        kernel.as_deref(),
        ZeemanCorrector::Centered,
    )?;
    let mut tilde_c = jet.m.clone();
    tilde_c.axpy(eps, &bundle.m1);
    tilde_c.axpy(eps * eps, &m2c);

    let plain = norms(&me.sub(&jet.m));
    Ok(SweepRow {
        eps,
        h: grid.h(),
        cells: grid.cells(),
        l2_error: plain.l2,
        h1_error: plain.h1,
        l2_corrected_twoscale: norms(&me.sub(&approx.twoscale_corrected)).l2,
        h1_corrected_neumann: norms(&me.sub(&approx.neumann_corrected)).h1,
        l2_tilde_literal: norms(&me.sub(&approx.tilde_m)).l2,
        l2_tilde_centered: norms(&me.sub(&tilde_c)).l2,
        init_deviation,
        status: RowStatus::Ok,
        runtime: start.elapsed().as_secs_f64(),
    })
}

fn setup(config: &SweepConfig) -> Result<Shared> {
    let model = &config.model;
    let (cells, hom) = solve_cells(model, CellSettings::new(config.cell_cells))?;
    let coarse = Grid::new(model.dim, config.coarse_cells)?;
    let kernel: Option<Arc<_>> = kernel_for(model, coarse)?;
    let problem = LlgProblem::homogenized(model, &hom, coarse, kernel)?;
    let init = MagnetizationField::new(config.profile.sample(coarse), 0.0)?;
    let traj = llg::run(&problem, &init, &config.simulation())?;
    Ok(Shared { cells, hom, m0: traj.final_field.m, t: traj.final_field.t })
}

/// Runs the homogenized problem once, every ε-row in parallel, and fits rates.
pub fn run_sweep(config: &SweepConfig) -> Result<ConvergenceReport> {
    let mut config = config.clone();
    config.validate()?;
    let start = Instant::now();
    let shared = setup(&config)?;
    let setup_runtime = start.elapsed().as_secs_f64();
    let rows: Vec<SweepRow> = config
        .eps
        .par_iter()
        .map(|&eps| {
            let t0 = Instant::now();
            match config.eps_grid(eps) {
                Ok(g) => run_row(&config, &shared, eps, g)
                    .unwrap_or_else(|e| SweepRow::failed(eps, Some(g), e.to_string(), t0.elapsed().as_secs_f64())),
                Err(e) => SweepRow::failed(eps, None, e.to_string(), t0.elapsed().as_secs_f64()),
            }
        })
        .collect();

    let spot_check = if config.spot_check {
        let eps = config.eps[0];
        let g = Grid::new(config.model.dim, 2 * config.eps_grid(eps)?.cells())?;
        let fine = run_row(&config, &shared, eps, g)?;
        rows.first().filter(|r| r.is_ok()).map(|r| (r.l2_error, fine.l2_error))
    } else {
        None
    };

    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.is_ok()).collect();
    let eps_ok: Vec<f64> = ok.iter().map(|r| r.eps).collect();
    let fits = METRICS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let vals: Vec<f64> = ok.iter().map(|r| r.metric(i)).collect();
            let fit = if !vals.is_empty() && vals.iter().all(|v| *v < DEGENERATE_FLOOR) {
                SlopeFit::Degenerate
            } else {
                match fit_rate(&eps_ok, &vals) {
                    Ok(f) => SlopeFit::Fit(f),
                    Err(e) => SlopeFit::Unavailable(e.to_string()),
                }
            };
            (name.to_string(), fit)
        })
        .collect();
    let dim = config.model.dim;
    let law = |f: &dyn Fn(f64) -> f64| {
        let v: Vec<f64> = config.eps.iter().map(|&e| f(e)).collect();
        fit_rate(&config.eps, &v).map(|r| r.slope).unwrap_or(f64::NAN)
    };
    let reference = vec![
        ("eps ln^2(1/eps+1)".to_string(), law(&log_squared_law)),
        ("beta(eps)".to_string(), law(&|e| beta_law(dim, e))),
        ("eps^(5/6)".to_string(), law(&|e: f64| e.powf(5.0 / 6.0))),
        ("eps^(1/2)".to_string(), law(&|e: f64| e.sqrt())),
    ];
    Ok(ConvergenceReport {
        dim,
        mu0: config.model.mu0,
        t_final: config.t_final,
        tau: config.simulation().schedule().1,
        profile: config.profile.name().to_string(),
        rows,
        fits,
        reference,
        setup_runtime,
        spot_check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{CoefficientFamily, ExchangeTensor, HarmonicMode};
    use std::f64::consts::PI;

    #[test]
    fn synthetic_rates() {
        let eps: Vec<f64> = (2..=6).map(|k| 2f64.powi(-k)).collect();
        let lin: Vec<f64> = eps.clone();
        let f = fit_rate(&eps, &lin).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(f.pairwise.iter().all(|p| (p - 1.0).abs() < 1e-12));
        let sq: Vec<f64> = eps.iter().map(|e| e.sqrt()).collect();
        assert!((fit_rate(&eps, &sq).unwrap().slope - 0.5).abs() < 1e-12);
        let lg: Vec<f64> = eps.iter().map(|&e| log_squared_law(e)).collect();
        // independent numpy polyfit value
        assert!((fit_rate(&eps, &lg).unwrap().slope - 0.31595053).abs() < 1e-7);
    }

    #[test]
    fn fit_needs_three_points() {
        assert!(matches!(fit_rate(&[0.5, 0.25], &[1.0, 0.5]), Err(Error::InsufficientPoints { needed: 3, got: 2 })));
        assert!(matches!(fit_rate(&[0.5, 0.25, 0.125], &[1.0, f64::NAN, 0.1]), Err(Error::InsufficientPoints { .. })));
    }

    #[test]
    fn norms_of_sine() {
        let mut prev = None;
        for n in [64usize, 128] {
            let g = Grid::new(1, n).unwrap();
            let f = VectorField::from_fn(g, |x| [0.0, 0.0, (2.0 * PI * x[0]).sin()]);
            let nm = norms(&f);
            let e = ((nm.l2 - 0.5f64.sqrt()).abs(), (nm.h1_semi - (2.0 * PI * PI).sqrt()).abs());
            assert!(e.0 < 1e-12 && e.1 < 0.1);
            if let Some((_, p1)) = prev {
                assert!(p1 / e.1 > 3.0);
            }
            prev = Some(e);
        }
        let z = norms(&VectorField::zeros(Grid::new(2, 8).unwrap()));
        assert_eq!((z.l2, z.h1), (0.0, 0.0));
    }

    #[test]
    fn transfer_round_trip_is_fourth_order() {
        let f = |x: crate::grid::Vec3| [(3.0 * x[0]).sin() * x[1].cos(), x[0] * x[1], (x[0] - x[1]).exp()];
        let mut errs = Vec::new();
        for n in [16usize, 32] {
            let coarse = Grid::new(2, n).unwrap();
            let fine = Grid::new(2, 2 * n + 1).unwrap();
            let orig = VectorField::from_fn(fine, f);
            let back = transfer(&transfer(&orig, coarse).unwrap(), fine).unwrap();
            let d = back.sub(&orig);
            errs.push(d.comps.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())));
        }
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
        let g = Grid::new(2, 16).unwrap();
        let a = VectorField::from_fn(g, f);
        assert_eq!(transfer(&a, g).unwrap(), a);
        assert!(transfer(&a, Grid::new(1, 16).unwrap()).is_err());
    }

    #[test]
    fn norms_are_transfer_consistent() {
        let f = |x: crate::grid::Vec3| [(2.0 * x[0]).sin() + x[1], x[0] * x[1], 0.3];
        let fine = Grid::new(2, 128).unwrap();
        let coarse = Grid::new(2, 64).unwrap();
        let a = norms(&VectorField::from_fn(fine, f));
        let b = norms(&transfer(&VectorField::from_fn(fine, f), coarse).unwrap());
        assert!((a.l2 - b.l2).abs() < 1e-4 && (a.h1 - b.h1).abs() < 1e-3);
    }

    fn small_sweep(model: MaterialModel) -> SweepConfig {
        let mut c = SweepConfig::new(model, vec![0.25, 0.5, 0.125], Profile::Bump);
        c.t_final = 0.01;
        c.tau = 2e-3;
        c.coarse_cells = 64;
        c.cell_cells = 32;
        c
    }

    #[test]
    fn constant_material_sweep_is_degenerate() {
        let model = MaterialModel::uniform(1, 1.5, 0.3, 1.0).unwrap();
        let r = run_sweep(&small_sweep(model)).unwrap();
        assert_eq!(r.rows.iter().map(|r| r.eps).collect::<Vec<_>>(), vec![0.5, 0.25, 0.125]);
        assert!(r.rows.iter().all(|r| r.is_ok()));
        // m₀ grid and ε-grids differ, so only the corrected variants sit at the floor
        assert!(matches!(r.fit("init_deviation"), Some(SlopeFit::Degenerate)));
        assert!(r.rows.iter().all(|r| r.init_deviation < 1e-14 && r.l2_error < 2e-3));
        // the row sharing the m₀ grid sits at the floor
        assert!(r.rows[1].l2_error < 1e-12 && r.rows[1].h1_error < 1e-12);
    }

    #[test]
    fn sweep_is_deterministic_and_plans_rows() {
        let a =
            CoefficientFamily::SingleHarmonic { mean: 2.0, mode: HarmonicMode { amp: 1.0, k: [1, 0, 0], phase: 0.0 } };
        let model = MaterialModel::new(
            ExchangeTensor::isotropic(1, a),
            CoefficientFamily::Constant(0.2),
            CoefficientFamily::Constant(1.0),
            [0.0, 0.0, 1.0],
            1.0,
            0.0,
            [0.0; 3],
        )
        .unwrap();
        let c = small_sweep(model);
        let p = plan(&c).unwrap();
        assert_eq!(p.iter().map(|r| r.cells).collect::<Vec<_>>(), vec![32, 64, 128]);
        assert_eq!(p[0].steps, 5);
        let r1 = run_sweep(&c).unwrap();
        let r2 = run_sweep(&c).unwrap();
        assert_eq!(r1.csv(), r2.csv());
        assert!(r1.rows.iter().all(|r| r.is_ok() && r.l2_error > 0.0));
        assert!(r1.rates_text().contains("L2_error"));
    }

    #[test]
    fn failing_row_is_marked_not_fatal() {
        let model = MaterialModel::uniform(1, 1.0, 0.0, 1.0).unwrap();
        let mut c = small_sweep(model);
        c.max_iter = 1;
        c.tol = 1e-300;
        // the shared run fails too, so the sweep itself reports the error
        assert!(run_sweep(&c).is_err());
        let mut c = small_sweep(MaterialModel::uniform(1, 1.0, 0.0, 1.0).unwrap());
        c.eps = vec![0.5, 0.25, 1e-9];
        let r = run_sweep(&c).unwrap();
        assert!(matches!(r.rows[2].status, RowStatus::Failed(_)));
        assert!(r.csv().lines().nth(3).unwrap().contains("failed"));
    }
}
