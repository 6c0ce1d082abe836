use std::collections::BTreeMap;

use super::lifting::{Lifting, SupremizerSolver};
use super::system::{MonoField, MonolithicProblem, MonolithicState, StepReport};
use crate::error::Result;
use crate::reduction::SnapshotSet;

/// Snapshot field names of the monolithic pipeline.
pub const U0: &str = "u0";
pub const SUPREMIZER: &str = "s";
pub const LIFT: &str = "lift";

/// Trajectory and snapshots of an offline monolithic run.
#[derive(Debug)]
pub struct OfflineMonolithicRun {
    /// States at steps `0..=n_steps`.
    pub states: Vec<MonolithicState>,
    pub reports: Vec<StepReport>,
    /// One column per step for `u0`, `s`, `p`, `d_f`, `d_s`, `lambda_u`, `lambda_d`, `lift`.
    pub snapshots: BTreeMap<String, SnapshotSet>,
    pub lifting: Lifting,
}

/// Marches `n_steps` from rest, homogenizing velocities by the lifting and computing a
/// supremizer for every pressure snapshot. `observe` sees every accepted step.
pub fn run_offline_monolithic(
    prob: &MonolithicProblem,
    n_steps: usize,
    mut observe: impl FnMut(&MonolithicState, &StepReport),
) -> Result<OfflineMonolithicRun> {
    let sp = &prob.spaces;
    let lifting = Lifting::new(&sp.v, &sp.q, prob.phys.u_bar)?;
    let sup = SupremizerSolver::new(&sp.v, &sp.q)?;
    let mut snaps: BTreeMap<String, SnapshotSet> = BTreeMap::new();
    let mut add = |name: &str, f: &crate::fem::FieldVec| {
        snaps.entry(name.to_string()).or_insert_with(|| SnapshotSet::new(name, f.space())).push_unchecked(f.values.clone());
    };
    let mut states = vec![MonolithicState::rest(sp)];
    let mut reports = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let (next, rep) = prob.step(&states[k]).map_err(|e| e.at_step(k + 1))?;
        observe(&next, &rep);
        let lift = lifting.at(next.t);
        let mut u0 = next.u.clone();
        for (a, b) in u0.values.iter_mut().zip(&lift.values) {
            *a -= b;
        }
        let s = sup.solve(&next.p).map_err(|e| e.at_step(k + 1))?;
        add(U0, &u0);
        add(SUPREMIZER, &s);
        for f in [MonoField::P, MonoField::Df, MonoField::Ds, MonoField::Lu, MonoField::Ld] {
            add(f.name(), next.field(f));
        }
        add(LIFT, &lift);
        states.push(next);
        reports.push(rep);
    }
    Ok(OfflineMonolithicRun { states, reports, snapshots: snaps, lifting })
}
