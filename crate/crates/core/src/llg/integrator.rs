//! Semi-implicit, sphere-projected time stepping of
//! `∂_t m = −m×H − α m×(m×H)`.
//!
//! One step solves, per component,
//!
//! ```text
//! (I − τβA) m* = mⁿ + τ (F(mⁿ) − βA mⁿ),    F(m) = −m×H(m) − α m×(m×H(m))
//! ```
//!
//! then sets `mⁿ⁺¹ = m*/|m*|`. With `β ≥ (1+α²)/(2α)` the linearized exchange
//! part is unconditionally stable. The stray field is evaluated at `mⁿ`.

use rayon::prelude::*;

use crate::divform::DivFormOperator;
use crate::error::{Error, Result};
use crate::grid::{cross, norm, VectorField};
use crate::reduce;
use crate::solver::{pcg, CgSettings};
use crate::spectral::SpectralPreconditioner;

use super::energy::{energy_with_demag, EnergyBreakdown};
use super::field::{Level, LlgProblem, MagnetizationField};

/// Largest allowed `max ||m*| − 1|` before projection.
pub const MAX_RENORMALIZATION_DEFECT: f64 = 0.1;

/// Constant `C` of the logged per-step energy bound `C τ² (1 + ‖H‖²)`.
pub const ENERGY_BOUND_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub tau: f64,
    pub t_final: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Store a snapshot every this many steps (the final state is always stored).
    pub output_every: usize,
}

impl SimulationConfig {
    /// `τ = min(h²/a_max, 1e−3)`.
    pub fn default_tau(h: f64, a_max: f64) -> f64 {
        (h * h / a_max).min(1e-3)
    }

    pub fn new(tau: f64, t_final: f64) -> Self {
        Self { tau, t_final, tol: 1e-10, max_iter: 2000, output_every: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig("tau > 0 required".into()));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidConfig("T >= 0 required".into()));
        }
        if self.t_final > 0.0 && self.t_final < self.tau * (1.0 - 1e-12) {
            return Err(Error::InvalidConfig("T >= tau required".into()));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("solver tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps and the uniform step that lands exactly on `T`.
    pub fn schedule(&self) -> (usize, f64) {
        if self.t_final == 0.0 {
            return (0, self.tau);
        }
        let n = (self.t_final / self.tau - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }
}

/// Resolution policy `h ≤ ε/8` for ε-runs.
pub fn check_resolution(problem: &LlgProblem) -> Result<()> {
    if let Level::Epsilon(eps) = problem.level {
        let h = problem.grid.h();
        if h > eps / 8.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!("h = {h} does not resolve eps = {eps} (need h <= eps/8)")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    pub inner_iterations: usize,
    pub renormalization_defect: f64,
}

/// Field-dependent quantities at one time level, reused by the energy log and
/// the next step.
pub struct State {
    pub exchange: VectorField,
    pub demag: Option<VectorField>,
    pub h: VectorField,
    pub energy: EnergyBreakdown,
}

impl State {
    pub fn new(problem: &LlgProblem, m: &VectorField) -> Result<Self> {
        problem.check_grid(m)?;
        let exchange = problem.exchange_field(m);
        let demag = problem.demag(m)?;
        let h = problem.assemble_field(m, &exchange, demag.as_ref());
        let energy = energy_with_demag(problem, m, demag.as_ref());
        Ok(Self { exchange, demag, h, energy })
    }
}

/// Precomputed implicit operator `I − τβA` and its preconditioner.
pub struct Stepper<'a> {
    problem: &'a LlgProblem,
    tau: f64,
    beta: f64,
    precond: SpectralPreconditioner,
    cg: CgSettings,
}

/// Stabilization weight `β = max(α, (1+α²)/(2α))`.
pub fn stabilization(alpha: f64) -> f64 {
    alpha.max((1.0 + alpha * alpha) / (2.0 * alpha))
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a LlgProblem, tau: f64, cg: CgSettings) -> Self {
        let beta = stabilization(problem.alpha);
        let c = problem.exchange.mean_diagonal().map(|v| v * tau * beta);
        let precond = SpectralPreconditioner::neumann(problem.grid, c, 1.0);
        Self { problem, tau, beta, precond, cg }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn op(&self) -> &DivFormOperator {
        &self.problem.exchange
    }

    /// Advances `m` by one step given its [`State`].
    pub fn step(&self, m: &VectorField, state: &State) -> Result<(VectorField, StepDiagnostics)> {
        let grid = self.problem.grid;
        let (tau, beta, alpha) = (self.tau, self.beta, self.problem.alpha);
        let mut rhs = VectorField::zeros(grid);
        let mut guess = VectorField::zeros(grid);
        for k in 0..grid.len() {
            let mk = m.get(k);
            let hk = state.h.get(k);
            let mxh = cross(mk, hk);
            let mxmxh = cross(mk, mxh);
            let ak = state.exchange.get(k);
            let mut r = [0.0; 3];
            let mut g = [0.0; 3];
            for c in 0..3 {
                let f = -mxh[c] - alpha * mxmxh[c];
                r[c] = mk[c] + tau * (f - beta * ak[c]);
                g[c] = mk[c] + tau * f;
            }
            rhs.set(k, r);
            guess.set(k, g);
        }
        let apply = |x: &[f64], out: &mut [f64]| {
            self.op().apply(x, out);
            for (o, xi) in out.iter_mut().zip(x) {
                *o = xi - tau * beta * *o;
            }
        };
        let results: Vec<Result<(Vec<f64>, usize)>> = (0..3)
            .into_par_iter()
            .map(|c| {
                let mut x = guess.comps[c].clone();
                let out = pcg(apply, |r, z| self.precond.apply(r, z), &rhs.comps[c], &mut x, self.cg, false)?;
                Ok((x, out.iterations))
            })
            .collect();
        let mut next = VectorField::zeros(grid);
        let mut iters = 0;
        for (c, r) in results.into_iter().enumerate() {
            let (x, it) = r?;
            next.comps[c] = x;
            iters += it;
        }
        let mut defect: f64 = 0.0;
        for k in 0..grid.len() {
            let v = next.get(k);
            let n = norm(v);
            if !n.is_finite() || n == 0.0 {
                return Err(Error::InnerSolveDiverged("non-finite or zero magnetization after inner solve".into()));
            }
            defect = defect.max((n - 1.0).abs());
            next.set(k, v.map(|c| c / n));
        }
        if defect > MAX_RENORMALIZATION_DEFECT {
            return Err(Error::RenormalizationDefectTooLarge { defect });
        }
        Ok((next, StepDiagnostics { inner_iterations: iters, renormalization_defect: defect }))
    }
}

/// One step from scratch, recomputing the field state of `m`.
pub fn step(
    problem: &LlgProblem,
    m: &MagnetizationField,
    tau: f64,
    cg: CgSettings,
) -> Result<(MagnetizationField, StepDiagnostics)> {
    let state = State::new(problem, &m.m)?;
    let (next, d) = Stepper::new(problem, tau, cg).step(&m.m, &state)?;
    Ok((MagnetizationField { m: next, t: m.t + tau }, d))
}

/// One row of the energy log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLogEntry {
    pub t: f64,
    pub energy: EnergyBreakdown,
    /// `α Σ τ ‖mᵏ × Hᵏ‖²` up to this time.
    pub damping_integral: f64,
    /// `Σ ‖mᵏ⁺¹ − mᵏ‖² / τ` up to this time.
    pub kinetic_integral: f64,
    pub max_norm_deviation: f64,
    /// `‖H‖_{L²}` at this time.
    pub field_norm: f64,
    pub inner_iterations: usize,
    pub renormalization_defect: f64,
}

pub struct Trajectory {
    pub tau: f64,
    pub snapshots: Vec<MagnetizationField>,
    pub log: Vec<EnergyLogEntry>,
    pub final_field: MagnetizationField,
    pub alpha: f64,
    /// `max_x M(x) |h_a| |Ω|`, bounding the Zeeman energy from below by its negative.
    pub zeeman_floor: f64,
}

fn l2_cross_norm2(m: &VectorField, h: &VectorField) -> f64 {
    let v: Vec<f64> = (0..m.len())
        .map(|k| {
            let c = cross(m.get(k), h.get(k));
            c[0] * c[0] + c[1] * c[1] + c[2] * c[2]
        })
        .collect();
    reduce::sum(&v) * m.grid.cell_volume()
}

/// Integrates from `init` to `config.t_final`, logging energies every step and
/// failing if an energy increase exceeds the logged bound.
pub fn run(problem: &LlgProblem, init: &MagnetizationField, config: &SimulationConfig) -> Result<Trajectory> {
    config.validate()?;
    check_resolution(problem)?;
    problem.check_grid(&init.m)?;
    let (steps, tau) = config.schedule();
    let cg = CgSettings { tol: config.tol, max_iter: config.max_iter };
    let stepper = Stepper::new(problem, tau, cg);
    let mut m = init.m.clone();
    let mut state = State::new(problem, &m)?;
    let mut log = vec![EnergyLogEntry {
        t: init.t,
        energy: state.energy,
        damping_integral: 0.0,
        kinetic_integral: 0.0,
        max_norm_deviation: m.max_norm_deviation(),
        field_norm: state.h.inner(&state.h).sqrt(),
        inner_iterations: 0,
        renormalization_defect: 0.0,
    }];
    let mut snapshots = vec![init.clone()];
    let (mut damping, mut kinetic) = (0.0, 0.0);
    for n in 1..=steps {
        let t = init.t + n as f64 * tau;
        let (next, diag) = stepper.step(&m, &state)?;
        damping += problem.alpha * tau * l2_cross_norm2(&m, &state.h);
        let dm = next.sub(&m);
        kinetic += dm.inner(&dm) / tau;
        let next_state = State::new(problem, &next)?;
        let prev = log.last().expect("log starts non-empty");
        let bound = ENERGY_BOUND_CONSTANT * tau * tau * (1.0 + prev.field_norm * prev.field_norm);
        let increase = next_state.energy.total - prev.energy.total;
        if increase > bound {
            return Err(Error::EnergyIncrease { step: n, increase, bound });
        }
        m = next;
        state = next_state;
        log.push(EnergyLogEntry {
            t,
            energy: state.energy,
            damping_integral: damping,
            kinetic_integral: kinetic,
            max_norm_deviation: m.max_norm_deviation(),
            field_norm: state.h.inner(&state.h).sqrt(),
            inner_iterations: diag.inner_iterations,
            renormalization_defect: diag.renormalization_defect,
        });
        if n == steps || (config.output_every > 0 && n % config.output_every == 0) {
            snapshots.push(MagnetizationField { m: m.clone(), t });
        }
    }
    let ms_max = problem.ms.iter().cloned().fold(0.0, f64::max);
    Ok(Trajectory {
        tau,
        snapshots,
        final_field: MagnetizationField { m, t: init.t + steps as f64 * tau },
        log,
        alpha: problem.alpha,
        zeeman_floor: ms_max * norm(problem.h_applied),
    })
}
