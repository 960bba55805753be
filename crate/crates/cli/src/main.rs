//! `llghom`: cell problems, LLG runs, correctors and ε-convergence sweeps.

mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use llghom::cellsolve::{solve_cells, CellSolutions, HomogenizedModel};
use llghom::config::Config;
use llghom::container::{self, Container, Kind};
use llghom::correctors::{self, CorrectorBundle, M0Jet};
use llghom::harness;
use llghom::llg::{self, kernel_for, Trajectory};
use llghom::solver::CgSettings;
use llghom::{Error, Result};

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "llghom", version, about = "Periodic homogenization of Landau-Lifshitz-Gilbert micromagnetics")]
struct Cli {
    /// Worker threads (0 = all cores); overrides the config's `workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines).
    config: PathBuf,
    /// Output directory (default: runs/<subcommand>-<hash>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problems and write the homogenized model.
    Cell(Common),
    /// Integrate the ε-problem (eps > 0) or the homogenized problem (eps = 0).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Reuse a cell container instead of solving the cell problems.
        #[arg(long)]
        cell: Option<PathBuf>,
    },
    /// Build corrected approximations of m^ε from a homogenized trajectory.
    Correct {
        #[command(flatten)]
        common: Common,
        /// Homogenized trajectory container.
        #[arg(long)]
        trajectory: PathBuf,
        /// Cell container.
        #[arg(long)]
        cell: PathBuf,
        /// Period ε (default: the config's eps).
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Run an ε-sweep and fit convergence rates.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Print the planned rows and exit.
        #[arg(long)]
        dry_run: bool,
        /// Also write a gnuplot script for report.csv.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Energy dissipation diagnostics, for a stored trajectory or by τ-refinement.
    Energy {
        #[command(flatten)]
        common: Common,
        /// Trajectory container to audit; without it a τ-halving study is run.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Cell container for homogenized problems.
        #[arg(long)]
        cell: Option<PathBuf>,
        /// Number of τ levels in the refinement study.
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

/// Process exit status per error class.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } => 2,
        Error::Validation { .. }
        | Error::InvalidConfig(_)
        | Error::InvalidMaterial(_)
        | Error::InvalidGrid(_)
        | Error::InvalidProfile(_) => 3,
        Error::CompatibilityViolated { .. }
        | Error::NoConvergence { .. }
        | Error::InnerSolveDiverged(_)
        | Error::RenormalizationDefectTooLarge { .. }
        | Error::EnergyIncrease { .. }
        | Error::MissingKernel
        | Error::GridMismatch(_)
        | Error::TimeMismatch(_)
        | Error::InsufficientPoints { .. } => 4,
        Error::MissingArtifact(_) | Error::Container(_) => 5,
        Error::Io(_) => 6,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Cell(c) => c,
        Command::Simulate { common, .. }
        | Command::Correct { common, .. }
        | Command::Converge { common, .. }
        | Command::Energy { common, .. } => common,
    };
    let config = Config::from_path(&common.config)?;
    let workers = cli.workers.unwrap_or(config.workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Cell(c) => cell(&config, &c),
        Command::Simulate { common, cell } => simulate(&config, &common, cell.as_deref()),
        Command::Correct { common, trajectory, cell, eps } => correct(&config, &common, &trajectory, &cell, eps),
        Command::Converge { common, dry_run, gnuplot } => converge(&config, &common, dry_run, gnuplot),
        Command::Energy { common, trajectory, cell, levels } => {
            energy(&config, &common, trajectory.as_deref(), cell.as_deref(), levels)
        }
    })
}

/// An output directory with its pending manifest.
struct Output {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Output {
    fn open(common: &Common, manifest: RunManifest) -> Result<Self> {
        let dir = common.out.clone().unwrap_or_else(|| manifest.default_dir());
        manifest::prepare_dir(&dir, &manifest)?;
        let mut out = Self { dir, manifest };
        out.text("config.txt", &out.manifest.config.clone())?;
        Ok(out)
    }

    fn text(&mut self, name: &str, content: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), content)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn container(&mut self, name: &str, c: &Container) -> Result<()> {
        c.write(&self.dir.join(name))?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let dir = self.dir.clone();
        self.manifest.finish(&dir)?;
        println!("{}", dir.display());
        Ok(())
    }
}

fn cell_solutions(config: &Config, cell: Option<&Path>) -> Result<(CellSolutions, HomogenizedModel)> {
    match cell {
        Some(path) => {
            let c = Container::read(path)?;
            let (cells, hom) = container::read_cell(&c)?;
            if hom.dim != config.model.dim {
                return Err(Error::GridMismatch(format!(
                    "cell container is {}-D, config is {}-D",
                    hom.dim, config.model.dim
                )));
            }
            Ok((cells, hom))
        }
        None => solve_cells(&config.model, config.cell_settings()),
    }
}

fn inputs(paths: &[Option<&Path>]) -> Result<Vec<manifest::InputArtifact>> {
    paths.iter().flatten().map(|p| manifest::input(p)).collect()
}

fn fmt_mat(m: &[[f64; 3]; 3], dim: usize) -> String {
    (0..dim)
        .map(|i| (0..dim).map(|j| format!("{:.12e}", m[i][j])).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

fn cell(config: &Config, common: &Common) -> Result<()> {
    let mut out = Output::open(common, RunManifest::new("cell", config.echo(), vec![], vec![]))?;
    let (cells, hom) = solve_cells(&config.model, config.cell_settings())?;
    out.container("cell.bin", &container::cell_container(&cells, &hom))?;
    let dim = hom.dim;
    let mut s = String::new();
    let _ = writeln!(s, "n = {dim}\nN_cell = {}\n", cells.grid.cells());
    let _ = writeln!(s, "a0 =\n{}\n", fmt_mat(&hom.a0, dim));
    let _ = writeln!(s, "M0 = {:.12e}", hom.m0);
    let _ = writeln!(s, "K0 = {:.12e}\n", hom.k0);
    let _ = writeln!(s, "H_d0 =\n{}\n", fmt_mat(&hom.hd0, dim));
    let d = &cells.diagnostics;
    let _ = writeln!(s, "a0 asymmetry before symmetrization = {:.3e}", hom.a0_asymmetry);
    let _ = writeln!(s, "max second-order rhs mean = {:.3e}", d.max_second_order_rhs_mean);
    let _ = writeln!(s, "hessian symmetry defect = {:.3e}", d.hessian_symmetry_defect);
    let _ = writeln!(s, "CG iterations = {}", d.total_iterations);
    out.text("summary.txt", &s)?;
    out.finish()
}

fn energy_csv(traj: &Trajectory) -> String {
    let mut s = String::from(
        "t,G_total,exchange,anisotropy,stray,microscale,zeeman,damping_integral,kinetic_integral,max_norm_deviation\n",
    );
    for e in &traj.log {
        let g = &e.energy;
        let _ = writeln!(
            s,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            e.t,
            g.total,
            g.exchange,
            g.anisotropy,
            g.stray,
            g.microscale,
            g.zeeman,
            e.damping_integral,
            e.kinetic_integral,
            e.max_norm_deviation
        );
    }
    s
}

fn dissipation_text(traj: &Trajectory) -> String {
    let r = llg::dissipation_report(traj);
    let max_rise = r.delta_g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = String::new();
    let _ = writeln!(s, "tau = {:?}", traj.tau);
    let _ = writeln!(s, "steps = {}", traj.log.len().saturating_sub(1));
    let _ = writeln!(s, "G(0) = {:.12e}", traj.log.first().map(|e| e.energy.total).unwrap_or(0.0));
    let _ = writeln!(s, "G(T) = {:.12e}", traj.log.last().map(|e| e.energy.total).unwrap_or(0.0));
    let _ = writeln!(s, "max dissipation defect = {:.6e}", r.max_abs_defect);
    let _ = writeln!(s, "largest per-step change of G = {max_rise:.6e}");
    let _ = writeln!(s, "damping integral = {:.12e}", r.damping_integral);
    let _ = writeln!(s, "kinetic integral = {:.12e}", r.kinetic_integral);
    let _ = writeln!(s, "kinetic bound = {:.12e}", r.kinetic_bound);
    let _ = writeln!(s, "kinetic within bound = {}", r.kinetic_within_bound(1e-10));
    s
}

fn simulate(config: &Config, common: &Common, cell: Option<&Path>) -> Result<()> {
    let manifest = RunManifest::new("simulate", config.echo(), vec![], inputs(&[cell])?);
    let mut out = Output::open(common, manifest)?;
    let (cells, hom) = cell_solutions(config, cell)?;
    let p = config.problem(&hom)?;
    let traj = llg::run(&p, &config.initial(&cells)?, &config.simulation())?;
    let mut c = container::trajectory_container(&traj);
    c.set_meta("level", if config.eps > 0.0 { "epsilon" } else { "homogenized" });
    c.set_meta("eps", format!("{:?}", config.eps));
    out.container("trajectory.bin", &c)?;
    out.text("energy.csv", &energy_csv(&traj))?;
    out.text("dissipation.txt", &dissipation_text(&traj))?;
    out.finish()
}

fn correct(config: &Config, common: &Common, traj_path: &Path, cell_path: &Path, eps: Option<f64>) -> Result<()> {
    let eps = eps.unwrap_or(config.eps);
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Validation {
            line: None,
            constraint: "eps > 0 (set eps in the config or pass --eps)".into(),
        });
    }
    let cells_eps =
        if eps == config.eps { config.cells } else { (config.points_per_period as f64 / eps).round() as usize };
    let args = vec![("eps".to_string(), format!("{eps:?}")), ("cells".to_string(), cells_eps.to_string())];
    let manifest = RunManifest::new("correct", config.echo(), args, inputs(&[Some(traj_path), Some(cell_path)])?);
    let traj_c = Container::read(traj_path)?;
    let cell_c = Container::read(cell_path)?;
    if traj_c.meta.get("level").map(String::as_str) != Some("homogenized") {
        return Err(Error::Container("trajectory container does not hold a homogenized run".into()));
    }
    let snapshots = container::read_snapshots(&traj_c)?;
    let (cells, hom) = container::read_cell(&cell_c)?;
    let grid = llghom::grid::Grid::new(config.model.dim, cells_eps)?;
    if traj_c.dim != grid.dim() || hom.dim != grid.dim() {
        return Err(Error::GridMismatch("trajectory, cell container and config disagree on the dimension".into()));
    }
    let mut out = Output::open(common, manifest)?;
    let kernel: Option<Arc<_>> = kernel_for(&config.model, grid)?;
    let cg = CgSettings { tol: config.tol, max_iter: config.max_iter };
    let phi = correctors::solve_neumann_phi(&config.model, &hom, eps, grid, cg)?;
    let mut c = Container::new(Kind::Approximation, grid);
    c.set_meta("eps", format!("{eps:?}"));
    c.push("t", snapshots.iter().map(|s| s.t).collect());
    for (i, p) in phi.iter().enumerate() {
        c.push(&format!("phi.{i}"), p.clone());
    }
    for (k, snap) in snapshots.iter().enumerate() {
        let jet = M0Jet::from_field(&snap.m, grid)?;
        let m1 = correctors::build_m1(&jet, &cells, eps)?;
        let m2 = correctors::build_m2(&jet, &cells, &hom, &config.model, eps, kernel.as_deref(), config.zeeman)?;
        let mut omega_n = correctors::neumann_correction(&jet, &phi);
        omega_n.axpy(-eps, &m1);
        let bundle = CorrectorBundle { eps, m1, m2, phi: phi.clone(), omega_n };
        let a = correctors::build_approximations(&jet, &bundle, snap.t, snap.t)?;
        c.push_vector(&format!("m0.{k}"), &jet.m);
        c.push_vector(&format!("m1.{k}"), &bundle.m1);
        c.push_vector(&format!("m2.{k}"), &bundle.m2);
        c.push_vector(&format!("tilde_m.{k}"), &a.tilde_m);
        c.push_vector(&format!("neumann_corrected.{k}"), &a.neumann_corrected);
        c.push_vector(&format!("twoscale_corrected.{k}"), &a.twoscale_corrected);
    }
    out.container("approximations.bin", &c)?;
    out.finish()
}

fn converge(config: &Config, common: &Common, dry_run: bool, gnuplot: bool) -> Result<()> {
    let mut sweep = config.sweep();
    sweep.validate()?;
    if dry_run {
        println!("{:>14} {:>14} {:>8} {:>8}", "eps", "h", "cells", "steps");
        for r in harness::plan(&sweep)? {
            println!("{:>14.6e} {:>14.6e} {:>8} {:>8}", r.eps, r.h, r.cells, r.steps);
        }
        return Ok(());
    }
    let mut out = Output::open(common, RunManifest::new("converge", config.echo(), vec![], vec![]))?;
    let report = harness::run_sweep(&sweep)?;
    out.text("report.csv", &report.csv())?;
    out.text("rates.txt", &report.rates_text())?;
    if gnuplot {
        out.text("report.gp", &report.gnuplot_script("report.csv"))?;
    }
    out.finish()
}

fn energy(config: &Config, common: &Common, traj: Option<&Path>, cell: Option<&Path>, levels: usize) -> Result<()> {
    let args = vec![("levels".to_string(), levels.to_string())];
    let mut out = Output::open(common, RunManifest::new("energy", config.echo(), args, inputs(&[traj, cell])?))?;
    let (cells, hom) = cell_solutions(config, cell)?;
    let p = config.problem(&hom)?;
    let mut s = String::new();
    match traj {
        Some(path) => {
            let t = container::read_trajectory(&Container::read(path)?)?;
            s.push_str(&dissipation_text(&t));
            // energies recomputed from the stored snapshots
            let mut worst: f64 = 0.0;
            for snap in &t.snapshots {
                let g = llg::energy_total(&p, &snap.m)?.total;
                let logged = t.log.iter().find(|e| e.t == snap.t).map(|e| e.energy.total);
                if let Some(l) = logged {
                    worst = worst.max((g - l).abs());
                }
            }
            let _ = writeln!(s, "max |G(snapshot) - G(log)| = {worst:.3e}");
        }
        None => {
            if levels < 2 {
                return Err(Error::Validation { line: None, constraint: "levels >= 2".into() });
            }
            let study = llg::defect_refinement(&p, &config.initial(&cells)?, &config.simulation(), levels)?;
            let _ = writeln!(s, "{:>14} {:>16}", "tau", "max defect");
            for (tau, d) in study.taus.iter().zip(&study.defects) {
                let _ = writeln!(s, "{tau:>14.6e} {d:>16.6e}");
            }
            let orders: Vec<String> = study.orders.iter().map(|o| format!("{o:.4}")).collect();
            let _ = writeln!(s, "orders = [{}]", orders.join(", "));
            let _ = writeln!(s, "min order = {:.4}", study.min_order());
            let _ = writeln!(s, "energy non-increasing within the per-step bound = true");
            let _ = writeln!(s, "kinetic within bound = {}", study.kinetic_within_bound);
        }
    }
    out.text("energy.txt", &s)?;
    out.finish()
}
