//! Domain types shared by every solver.

mod grid;
mod solution;
mod spec;
mod validate;

pub use grid::TimeGrid;
pub use solution::{DiscreteSolution, InvariantReport, Layout, RegressionFallback, SolverFlags, StopMask};
pub(crate) use solution::mean;
pub use spec::{
    ConstantCoeffs, GeneratorSpec, ItoForm, ObstacleKind, ObstacleSpec, SdeCoeffs, NO_OBSTACLE,
};
pub(crate) use spec::dot;
pub use validate::{validate_spec, validate_spec_in, AssumptionCheck, SampleBox, SamplePoint, ValidationReport};

/// Default relative tolerance of the discrete flat-off check.
pub const DEFAULT_SKOROKHOD_TOL: f64 = 1e-6;
