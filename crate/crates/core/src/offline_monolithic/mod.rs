//! Fully coupled ALE scheme: BDF2 fluid, Newmark solid, interface multipliers.

mod lifting;
mod run;
mod system;

pub use crate::time::{bdf2, inlet_profile, newmark_rates};
pub use lifting::{compute_lifting, compute_supremizer, Lifting, SupremizerSolver};
pub use run::{run_offline_monolithic, OfflineMonolithicRun, LIFT, SUPREMIZER, U0};
pub use system::{MonoField, MonolithicProblem, MonolithicSpaces, MonolithicState, StepReport, StepSystem};
