//! Bound calculators, constant extraction, the pathwise bias decomposition
//! and the invariant suite.

pub mod bounds;
pub mod constants;
pub mod decomposition;
pub mod suite;

pub use bounds::{
    l_constant, noise_constant, psi_bound, remark_schedules, theorem_bound, theorem_optimal_eta, xi, BoundInputs,
    RemarkSchedule, ScheduleKind, Statement,
};
pub use constants::{
    extract_constants, extract_constants_mixed, initial_divergence, running_sigma_floor, sampled_policies,
    tight_mixing,
};
pub use decomposition::{bias_decomposition, bias_decomposition_explicit, BiasDecomposition};
pub use suite::{run_property_suite, Report, ReportEntry, SuiteOptions};
