//! Discrete counterparts of the energy dissipation identity
//! `G(t) + α∫₀ᵗ‖m×H‖² = G(0)` and of the kinetic-energy bound.

use super::field::{LlgProblem, MagnetizationField};
use super::integrator::{run, SimulationConfig, Trajectory};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    /// `G(tₖ₊₁) − G(tₖ)` per step.
    pub delta_g: Vec<f64>,
    /// `G(tₖ) + α Σ τ‖m×H‖² − G(0)` at every logged time.
    pub defect: Vec<f64>,
    pub damping_integral: f64,
    pub kinetic_integral: f64,
    /// `(1+α²)/α · (G(0) + max M |h_a| |Ω|)`.
    pub kinetic_bound: f64,
    pub max_abs_defect: f64,
}

impl DissipationReport {
    pub fn kinetic_within_bound(&self, tol: f64) -> bool {
        self.kinetic_integral <= self.kinetic_bound + tol
    }
}

pub fn dissipation_report(traj: &Trajectory) -> DissipationReport {
    let g0 = traj.log.first().map(|e| e.energy.total).unwrap_or(0.0);
    let delta_g = traj.log.windows(2).map(|w| w[1].energy.total - w[0].energy.total).collect();
    let defect: Vec<f64> = traj.log.iter().map(|e| e.energy.total + e.damping_integral - g0).collect();
    let last = traj.log.last();
    let alpha = traj.alpha;
    DissipationReport {
        delta_g,
        max_abs_defect: defect.iter().fold(0.0f64, |m, d| m.max(d.abs())),
        defect,
        damping_integral: last.map(|e| e.damping_integral).unwrap_or(0.0),
        kinetic_integral: last.map(|e| e.kinetic_integral).unwrap_or(0.0),
        kinetic_bound: (1.0 + alpha * alpha) / alpha * (g0 + traj.zeeman_floor),
    }
}

/// Maximal dissipation defect under successive τ-halving.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectRefinement {
    pub taus: Vec<f64>,
    pub defects: Vec<f64>,
    /// `log₂(defectₖ / defectₖ₊₁)`
    pub orders: Vec<f64>,
    pub kinetic_within_bound: bool,
}

impl DefectRefinement {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Runs `levels` simulations at `τ, τ/2, …`. Each run already fails if the
/// energy rises above its logged per-step bound.
pub fn defect_refinement(
    problem: &LlgProblem,
    init: &MagnetizationField,
    config: &SimulationConfig,
    levels: usize,
) -> Result<DefectRefinement> {
    let mut taus = Vec::with_capacity(levels);
    let mut defects = Vec::with_capacity(levels);
    let mut kinetic_within_bound = true;
    for k in 0..levels {
        let cfg = SimulationConfig { tau: config.tau / 2f64.powi(k as i32), ..*config };
        let traj = run(problem, init, &cfg)?;
        let rep = dissipation_report(&traj);
        kinetic_within_bound &= rep.kinetic_within_bound(1e-10);
        taus.push(traj.tau);
        defects.push(rep.max_abs_defect);
    }
    let orders = defects.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(DefectRefinement { taus, defects, orders, kinetic_within_bound })
}
