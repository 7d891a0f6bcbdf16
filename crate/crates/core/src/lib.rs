//! Simulation and verification toolkit for generalized Forchheimer flows.
//!
//! The crate is generic over the floating point type through [`Real`]; the
//! `*64` aliases at the root fix it to `f64`, which is what the solver and
//! the command line tool use.

pub mod constitutive;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod initial;
pub mod linalg;
pub mod quadrature;
pub mod scalar;
pub mod sequences;
pub mod solver;
pub mod stability;

pub use constitutive::{
    degree_condition, monotonicity_gap, ConductivityKernel, DegeneracyExponents, DegreeCondition,
    ForchheimerPolynomial, KernelEvaluation, MonotonicityGap,
};
pub use error::{Error, Result};
pub use estimates::{EstimateReport, Exponents, TargetRecord};
pub use grid::flux::{BoundaryFluxSpec, FluxRegime, FluxTerm, Profile, Shape};
pub use grid::{Grid, Region, ScalarField};
pub use initial::InitialData;
pub use scalar::Real;
pub use sequences::{GeometricRecurrence, LogValue, RecurrenceTerm};
pub use solver::{
    LinearSolverKind, Observation, ObservationConfig, RunOutput, Solver, SolverConfig, SolverState, StepRecord,
};
pub use stability::{OrderFit, PairConfig, Perturbation, RunSpec, SweepAxis, SweepReport, SweepSpec};

pub type Polynomial64 = ForchheimerPolynomial<f64>;
pub type Kernel64 = ConductivityKernel<f64>;
pub type Polynomial32 = ForchheimerPolynomial<f32>;
pub type Kernel32 = ConductivityKernel<f32>;
pub type Grid64 = Grid<f64>;
pub type Field64 = ScalarField<f64>;
pub type Flux64 = BoundaryFluxSpec<f64>;
pub type State64 = SolverState<f64>;
pub type Config64 = SolverConfig<f64>;
pub type RunSpec64 = RunSpec<f64>;
