//! Landau–Lifshitz–Gilbert dynamics at the ε-level and the homogenized level.

mod dissipation;
mod energy;
mod field;
mod integrator;

pub use dissipation::{defect_refinement, dissipation_report, DefectRefinement, DissipationReport};
pub use energy::{energy_density_gl, energy_total, energy_with_demag, gradient, EnergyBreakdown};
pub use field::{effective_field_eps, effective_field_hom, kernel_for, Level, LlgProblem, MagnetizationField};
pub use integrator::{
    check_resolution, run, stabilization, step, EnergyLogEntry, SimulationConfig, State, StepDiagnostics, Stepper,
    Trajectory, ENERGY_BOUND_CONSTANT, MAX_RENORMALIZATION_DEFECT,
};
