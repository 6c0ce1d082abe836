//! Partitioned ALE scheme: explicit momentum, Robin-coupled pressure Poisson and structure
//! solves iterated to a fixed point each step.

mod run;
mod system;

pub use run::{run_offline_partitioned, OfflinePartitionedRun, D_S, LIFT, P0, Z};
pub use system::{
    compute_alpha_rob, fixed_point_converged, relative_increments, ExplicitSystem, PartitionedProblem,
    PartitionedReport, PartitionedSpaces, PartitionedState, PressureSystem, RobinParams,
};
