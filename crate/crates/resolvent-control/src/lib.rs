//! Simulation and approximate-controllability synthesis for second-order
//! non-autonomous neutral integrodifferential systems with impulses.
//!
//! The crate discretizes the two-parameter resolvent family that plays the
//! role of the solution operator for
//!
//! ```text
//! (d²/dt²)[ϑ(t) + f₂(t, ϑ_t)] = A(t)[ϑ + f₂] + ∫₀ᵗ ζ(t,s)[ϑ + f₂] ds
//!                              + f₁(t, ϑ(t)) + B u(t),
//! Δϑ(t_q) = I_q(ϑ(t_q⁻)),   Δϑ'(t_q) = J_q(ϑ(t_q⁻)),
//! ϑ₀ = Φ,   ϑ'(0) = v₀,
//! ```
//!
//! on a truncated modal state space, evaluates the associated mild-solution
//! map, and synthesizes steering controls through the regularized
//! controllability Gramian `(εI + Γ)⁻¹`, with the steering error driven to
//! zero along ε → 0⁺ whenever the Gramian is positive.
//!
//! Module map:
//!
//! * [`problem`] — problem instances, structural validation, hypothesis
//!   plumbing ([`problem::ProblemSpec`], [`problem::validate_spec`]);
//! * [`modal`] — sine-basis Galerkin reduction of the wave-with-memory
//!   scenario on `(0, 2π)`;
//! * [`resolvent`] — construction and interpolation of `R(t,s)` and
//!   `∂R/∂s(t,s)` from their defining Volterra IVPs;
//! * [`solver`] — history segments, the mild-solution map, Picard solves
//!   and impulse bookkeeping;
//! * [`hypotheses`] — sampled constants and the solvability condition;
//! * [`control`] — Gramian assembly, the `ε(εI+Γ)⁻¹` filter, terminal
//!   defects, control synthesis and ε-sweeps;
//! * [`config`], [`pipeline`], [`export`], [`manifest`], [`cache`] — the
//!   batch front end: TOML scenarios, CSV artifacts, run manifests and the
//!   binary resolvent cache.
//!
//! Start with the runnable examples (`cargo run --example free_wave`, see
//! `examples/`), which walk each capability end to end.

// `!(x > 0.0)`-style guards are deliberate: they reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod config;
pub mod control;
pub mod error;
pub mod export;
pub mod grid;
pub mod hypotheses;
pub mod manifest;
pub mod modal;
pub mod pipeline;
pub mod problem;
pub mod registry;
pub mod resolvent;
pub mod solver;

pub use cache::{build_resolvent_grid_cached, ResolventCache};
pub use config::{RunConfig, ScenarioConfig};
pub use control::{
    assemble_gramian, compute_defect, epsilon_sweep, synthesize_control,
    test_linear_controllability, ControlSynthesis, ControllabilityVerdict, DecayTable,
    GramianPackage, RegularizedResolvent, SweepRow, SynthesisParams,
};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use hypotheses::{
    check_solvability, estimate_constants, SolvabilityCondition, HypothesisReport, SolvabilityVerdict,
};
pub use modal::{build_wave_memory_scenario, ModeBasis, WaveMemoryParams};
pub use problem::{
    control_rank, validate_spec, HistoryFunction, ImpulseSchedule, OperatorStructure, ProblemSpec,
    Violation,
};
pub use resolvent::{build_resolvent_grid, ResolventBounds, ResolventGrid};
pub use solver::{
    apply_jump, effective_initial_velocity, evaluate_mild_map, picard_solve, segment_history,
    GridControl, HistorySegment, PicardReport, Trajectory,
};

/// Shared spec builders for unit tests.
#[cfg(test)]
pub(crate) mod testutil {
    use nalgebra::{DMatrix, DVector};

    use crate::problem::{HistoryFunction, ImpulseSchedule, OperatorStructure, ProblemSpec};

    /// Scalar oscillator `ϑ'' = -m²ϑ` with zero data and unit actuation:
    /// the closed-form family is `R(t,s) = sin(m(t-s))/m`.
    pub fn scalar_wave_spec(m: f64, horizon: f64) -> ProblemSpec {
        ProblemSpec {
            state_dim: 1,
            horizon,
            a_op: Box::new(move |_| DMatrix::from_element(1, 1, -m * m)),
            kernel: None,
            f1: None,
            f2: None,
            b_op: DMatrix::from_element(1, 1, 1.0),
            impulses: ImpulseSchedule::empty(),
            history: HistoryFunction::constant(DVector::zeros(1)),
            v0: DVector::zeros(1),
            v0_neutral: None,
            structure: OperatorStructure::Diagonal,
        }
    }

    /// Diagonal multi-mode oscillator, optionally with the exponential
    /// memory kernel `ζ(t,s) = e^(-rate(t-s))·diag(-m²)`.
    pub fn diag_wave_spec(modes: &[f64], horizon: f64, kernel_rate: Option<f64>) -> ProblemSpec {
        let dim = modes.len();
        let eigen: Vec<f64> = modes.iter().map(|&m| -m * m).collect();
        let a_eigen = eigen.clone();
        let kernel = kernel_rate.map(|rate| {
            let k_eigen = eigen.clone();
            Box::new(move |t: f64, s: f64| {
                let mut z = DMatrix::zeros(dim, dim);
                let h = (-rate * (t - s)).exp();
                for i in 0..dim {
                    z[(i, i)] = h * k_eigen[i];
                }
                z
            }) as crate::problem::KernelFn
        });
        ProblemSpec {
            state_dim: dim,
            horizon,
            a_op: Box::new(move |_| {
                let mut a = DMatrix::zeros(dim, dim);
                for i in 0..dim {
                    a[(i, i)] = a_eigen[i];
                }
                a
            }),
            kernel,
            f1: None,
            f2: None,
            b_op: DMatrix::identity(dim, dim),
            impulses: ImpulseSchedule::empty(),
            history: HistoryFunction::constant(DVector::zeros(dim)),
            v0: DVector::zeros(dim),
            v0_neutral: None,
            structure: OperatorStructure::Diagonal,
        }
    }
}
