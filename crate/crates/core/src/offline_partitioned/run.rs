use std::collections::BTreeMap;

use super::system::{PartitionedProblem, PartitionedReport, PartitionedState};
use crate::error::Result;
use crate::fem::FieldVec;
use crate::offline_monolithic::Lifting;
use crate::reduction::{change_of_variable_z, SnapshotSet};

/// Snapshot field names of the partitioned pipeline.
pub const Z: &str = "z";
pub const P0: &str = "p0";
pub const D_S: &str = "d_s";
pub const LIFT: &str = "lift";

#[derive(Debug)]
pub struct OfflinePartitionedRun {
    /// States at steps `0..=n_steps`.
    pub states: Vec<PartitionedState>,
    pub reports: Vec<PartitionedReport>,
    /// One column per step for `z`, `p0`, `d_s` and `lift`.
    pub snapshots: BTreeMap<String, SnapshotSet>,
    /// Inlet pressure value imposed at each step (index `k` for step `k + 1`).
    pub p_bar: Vec<f64>,
    pub lifting: Lifting,
}

impl OfflinePartitionedRun {
    pub fn average_iterations(&self) -> f64 {
        if self.reports.is_empty() {
            return 0.0;
        }
        self.reports.iter().map(|r| r.iterations as f64).sum::<f64>() / self.reports.len() as f64
    }

    /// Largest `L2` pressure norm over the trajectory.
    pub fn max_pressure_norm(&self, prob: &PartitionedProblem) -> f64 {
        self.states.iter().map(|s| prob.x_p.norm(&s.p.values)).fold(0.0, f64::max)
    }
}

/// Marches `n_steps` from rest and records homogenized snapshots:
/// `z = u - lift - (d_f^{n+1} - d_f^n)/dt`, `p0 = p - p_bar`, and `d_s`.
pub fn run_offline_partitioned(
    prob: &PartitionedProblem,
    n_steps: usize,
    mut observe: impl FnMut(&PartitionedState, &PartitionedReport),
) -> Result<OfflinePartitionedRun> {
    let sp = &prob.spaces;
    let lifting = prob.lifting.clone();
    let mut snaps: BTreeMap<String, SnapshotSet> = BTreeMap::new();
    let mut add = |name: &str, f: &FieldVec| {
        snaps.entry(name.to_string()).or_insert_with(|| SnapshotSet::new(name, f.space())).push_unchecked(f.values.clone());
    };
    let mut states = vec![PartitionedState::rest(sp)];
    let mut reports = Vec::with_capacity(n_steps);
    let mut p_bar = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let (next, rep) = prob.step(&states[k]).map_err(|e| e.at_step(k + 1))?;
        observe(&next, &rep);
        let lift = lifting.at(next.t);
        let mut u0 = next.u.clone();
        u0.values.iter_mut().zip(&lift.values).for_each(|(a, b)| *a -= b);
        let z = change_of_variable_z(&u0, &next.d_f, &states[k].d_f, prob.time.dt)?;
        let mut p0 = next.p.clone();
        p0.values.iter_mut().for_each(|v| *v -= rep.p_bar);
        add(Z, &z);
        add(P0, &p0);
        add(D_S, &next.d_s);
        add(LIFT, &lift);
        p_bar.push(rep.p_bar);
        states.push(next);
        reports.push(rep);
    }
    Ok(OfflinePartitionedRun { states, reports, snapshots: snaps, p_bar, lifting })
}
