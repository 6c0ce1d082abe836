use std::collections::BTreeMap;

use nalgebra::DVector;

use super::BlockMap;
use crate::ale::check_distortion;
use crate::error::{FsiError, Result};
use crate::fem::{newton_solve, FieldVec, LuCache, NewtonOptions};
use crate::offline_partitioned::{PartitionedProblem, PartitionedReport, PartitionedState, D_S, P0, Z};
use crate::reduction::{change_of_variable_z, extend_solid_modes, pod, InnerProduct, NormKind, PodSelect, ReducedBasis, SnapshotSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartSizes {
    pub n_z: usize,
    pub n_p: usize,
    pub n_ds: usize,
}

impl PartSizes {
    pub fn uniform(n: usize) -> Self {
        PartSizes { n_z: n, n_p: n, n_ds: n }
    }
}

impl Default for PartSizes {
    fn default() -> Self {
        Self::uniform(13)
    }
}

/// Bases of the partitioned ROM: `z`, `p0`, `d_s`, and the harmonic extensions of the solid
/// modes that carry the fluid mesh motion.
#[derive(Debug, Clone)]
pub struct PartitionedBases {
    pub z: ReducedBasis,
    pub p: ReducedBasis,
    pub d_s: ReducedBasis,
    pub d_f: ReducedBasis,
    pub x_z: InnerProduct,
}

impl PartitionedBases {
    /// Full POD of `z`, `p0` and `d_s`.
    pub fn full_pods(snaps: &BTreeMap<String, SnapshotSet>, prob: &PartitionedProblem) -> Result<BTreeMap<String, ReducedBasis>> {
        let get = |n: &str| snaps.get(n).ok_or_else(|| FsiError::Invalid(format!("missing snapshot field {n}")));
        let x_z = InnerProduct::new(&prob.spaces.v, NormKind::H1Seminorm)?;
        let mut out = BTreeMap::new();
        out.insert(Z.to_string(), pod(get(Z)?, &x_z, PodSelect::All)?);
        out.insert(P0.to_string(), pod(get(P0)?, &prob.x_p, PodSelect::All)?);
        out.insert(D_S.to_string(), pod(get(D_S)?, &prob.x_d, PodSelect::All)?);
        Ok(out)
    }

    pub fn build(pods: &BTreeMap<String, ReducedBasis>, sizes: PartSizes, prob: &PartitionedProblem) -> Result<Self> {
        let get = |name: &str, n: usize| -> Result<ReducedBasis> {
            Ok(pods.get(name).ok_or_else(|| FsiError::Invalid(format!("missing basis {name}")))?.truncated(n))
        };
        let d_s = get(D_S, sizes.n_ds)?;
        let d_f = extend_solid_modes(&d_s, &prob.extension)?;
        let b = PartitionedBases {
            z: get(Z, sizes.n_z)?,
            p: get(P0, sizes.n_p)?,
            d_s,
            d_f,
            x_z: InnerProduct::new(&prob.spaces.v, NormKind::H1Seminorm)?,
        };
        let sp = &prob.spaces;
        if !b.z.space().same_as(&sp.v) || !b.p.space().same_as(&sp.q) || !b.d_s.space().same_as(&sp.es) {
            return Err(FsiError::Invalid("partitioned bases live on the wrong spaces".into()));
        }
        Ok(b)
    }
}

/// Reduced coefficients of the current and previous solid displacement, and the current
/// `z` and `p0`, alongside the reconstructed full state.
#[derive(Debug, Clone)]
pub struct PartitionedRomState {
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub d_s: Vec<f64>,
    pub d_s_prev: Vec<f64>,
    pub full: PartitionedState,
}

#[derive(Debug)]
pub struct PartitionedRomRun {
    pub states: Vec<PartitionedRomState>,
    pub reports: Vec<PartitionedReport>,
}

impl PartitionedRomRun {
    pub fn average_iterations(&self) -> f64 {
        if self.reports.is_empty() {
            return 0.0;
        }
        self.reports.iter().map(|r| r.iterations as f64).sum::<f64>() / self.reports.len() as f64
    }
}

/// Online partitioned solver.
#[derive(Debug)]
pub struct PartitionedRom<'a> {
    pub prob: &'a PartitionedProblem,
    pub bases: PartitionedBases,
    /// Fixed-point tolerance of the online loop.
    pub eps: f64,
    pub max_fp_iters: usize,
    pub newton: NewtonOptions,
    z_map: BlockMap,
    p_map: BlockMap,
    d_map: BlockMap,
    /// LU of the reduced structure operator.
    structure: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> PartitionedRom<'a> {
    pub fn new(prob: &'a PartitionedProblem, bases: PartitionedBases) -> Result<Self> {
        let sp = &prob.spaces;
        let z_map = BlockMap::new(sp.v.n_dofs(), vec![(0, bases.z.modes.clone())]);
        let p_map = BlockMap::new(sp.q.n_dofs(), vec![(0, bases.p.modes.clone())]);
        let d_map = BlockMap::new(sp.es.n_dofs(), vec![(0, bases.d_s.modes.clone())]);
        let structure = d_map.galerkin(prob.structure_matrix()).to_dense().lu();
        let newton = NewtonOptions { tol: prob.time.newton_tol, max_iters: prob.time.max_newton_iters, ..Default::default() };
        Ok(PartitionedRom {
            prob,
            bases,
            eps: prob.time.eps,
            max_fp_iters: prob.time.max_fp_iters,
            newton,
            z_map,
            p_map,
            d_map,
            structure,
        })
    }

    /// Quiescent reduced state at time `t`.
    pub fn rest(&self, t: f64) -> PartitionedRomState {
        let mut full = PartitionedState::rest(&self.prob.spaces);
        full.t = t;
        PartitionedRomState {
            z: vec![0.0; self.bases.z.n()],
            p: vec![0.0; self.bases.p.n()],
            d_s: vec![0.0; self.bases.d_s.n()],
            d_s_prev: vec![0.0; self.bases.d_s.n()],
            full,
        }
    }

    /// Reduced state from two consecutive full-order states; `p_bar` is the inlet pressure
    /// value imposed at `cur`. `z`, `p0` and `d_s` are projected; the mesh displacement is
    /// kept, as it already lies in the span of the extended modes when the solid history does.
    pub fn restart(&self, prev: &PartitionedState, cur: &PartitionedState, p_bar: f64) -> Result<PartitionedRomState> {
        let prob = self.prob;
        let sp = &prob.spaces;
        let dt = prob.time.dt;
        let cd = self.bases.d_s.project(&cur.d_s.values, &prob.x_d);
        let cd_prev = self.bases.d_s.project(&cur.d_s_prev.values, &prob.x_d);
        let lift = prob.lifting.at(cur.t);
        let mut u0 = cur.u.clone();
        u0.values.iter_mut().zip(&lift.values).for_each(|(a, b)| *a -= b);
        let z_full = change_of_variable_z(&u0, &cur.d_f, &prev.d_f, dt)?;
        let z = self.bases.z.project(&z_full.values, &self.bases.x_z);
        let u: Vec<f64> = self
            .bases
            .z
            .expand(&z)
            .iter()
            .zip(&lift.values)
            .zip(cur.d_f.values.iter().zip(&prev.d_f.values))
            .map(|((a, l), (dn, dp))| a + l + (dn - dp) / dt)
            .collect();
        let p0: Vec<f64> = cur.p.values.iter().map(|v| v - p_bar).collect();
        let p = self.bases.p.project(&p0, &prob.x_p);
        let p_full: Vec<f64> = self.bases.p.expand(&p).iter().map(|v| v + p_bar).collect();
        let full = PartitionedState {
            step: cur.step,
            t: cur.t,
            u: FieldVec::from_values(&sp.v, u)?,
            p: FieldVec::from_values(&sp.q, p_full)?,
            d_f: cur.d_f.clone(),
            d_s: FieldVec::from_values(&sp.es, self.bases.d_s.expand(&cd))?,
            d_s_prev: FieldVec::from_values(&sp.es, self.bases.d_s.expand(&cd_prev))?,
        };
        Ok(PartitionedRomState { z, p, d_s: cd, d_s_prev: cd_prev, full })
    }

    fn solve_dense(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, rhs: Vec<f64>) -> Result<Vec<f64>> {
        let x = lu.solve(&DVector::from_vec(rhs)).ok_or(FsiError::Singular { index: 0 })?;
        Ok(x.iter().copied().collect())
    }

    pub fn step(&self, s: &PartitionedRomState) -> Result<(PartitionedRomState, PartitionedReport)> {
        let prob = self.prob;
        let sp = &prob.spaces;
        let dt = prob.time.dt;
        let t_next = s.full.t + dt;

        // Mesh motion driven by the solid coefficients.
        let d_f_next = FieldVec::from_values(&sp.v, self.bases.d_f.expand(&s.d_s))?;
        check_distortion(&s.full.d_f, &d_f_next)?;

        // Explicit momentum step in z.
        let sys = prob.explicit_system(&s.full.u, &s.full.p, &d_f_next, &s.full.d_f, t_next);
        let lift = prob.lifting.at(t_next);
        let shift: Vec<f64> = lift.values.iter().zip(&sys.w).map(|(a, b)| a + b).collect();
        let mut z = s.z.clone();
        let mut cache = LuCache::default();
        let newton = newton_solve(&mut z, &self.newton, &mut cache, |c, jac| {
            let x = self.z_map.expand(c, &shift);
            let (r, j) = sys.eval(&x, jac)?;
            Ok((self.z_map.restrict(&r), j.map(|j| self.z_map.galerkin(&j))))
        })?;
        let u_next = FieldVec::from_values(&sp.v, self.z_map.expand(&z, &shift))?;

        // Robin pressure / structure loop.
        let p_bar = prob.inlet_pressure_value(&s.full.u, &s.full.p)?;
        let psys = prob.pressure_system(&u_next, &d_f_next)?;
        let a_red = self.p_map.galerkin(&psys.matrix).to_dense().lu();
        let a_one = psys.matrix.mul_vec(&vec![p_bar; sp.q.n_dofs()]);
        let (d_n, d_nm1) = (&s.full.d_s.values, &s.full.d_s_prev.values);
        let mut p_it = s.full.p.values.clone();
        let mut d_it = d_n.clone();
        let mut last = f64::INFINITY;
        for j in 1..=self.max_fp_iters {
            let acc = prob.solid_accel(&d_it, d_n, d_nm1);
            let rhs: Vec<f64> = psys.rhs(&acc, &p_it, prob.robin_mass()).iter().zip(&a_one).map(|(a, b)| a - b).collect();
            let cp = Self::solve_dense(&a_red, self.p_map.restrict(&rhs))?;
            let p_new = self.p_map.expand(&cp, &vec![p_bar; sp.q.n_dofs()]);
            let pf = FieldVec::from_values(&sp.q, p_new)?;
            let load = prob.traction_load(&u_next, &pf, &d_f_next)?;
            let rs = self.d_map.restrict(&prob.structure_rhs(&load, d_n, d_nm1));
            let cd = Self::solve_dense(&self.structure, rs)?;
            let d_new = self.d_map.expand(&cd, &vec![0.0; sp.es.n_dofs()]);
            let (ip, id) = prob.increments(&pf.values, &p_it, &d_new, &d_it);
            last = ip.max(id);
            p_it = pf.values;
            d_it = d_new;
            if !last.is_finite() {
                return Err(FsiError::NonFinite);
            }
            if last < self.eps {
                let full = PartitionedState {
                    step: s.full.step + 1,
                    t: t_next,
                    u: u_next,
                    p: FieldVec::from_values(&sp.q, p_it)?,
                    d_f: d_f_next,
                    d_s: FieldVec::from_values(&sp.es, d_it)?,
                    d_s_prev: s.full.d_s.clone(),
                };
                let next = PartitionedRomState { z, p: cp, d_s: cd, d_s_prev: s.d_s.clone(), full };
                let rep = PartitionedReport { iterations: j, increment: last, p_bar, newton_iterations: newton.iterations };
                return Ok((next, rep));
            }
        }
        Err(FsiError::FixedPointFailed { iterations: self.max_fp_iters, increment: last })
    }

    pub fn run(
        &self,
        start: PartitionedRomState,
        n_steps: usize,
        mut observe: impl FnMut(&PartitionedRomState, &PartitionedReport),
    ) -> Result<PartitionedRomRun> {
        let mut states = vec![start];
        let mut reports = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let cur = states.last().unwrap();
            let step = cur.full.step + 1;
            let (next, rep) = self.step(cur).map_err(|e| e.at_step(step))?;
            observe(&next, &rep);
            states.push(next);
            reports.push(rep);
        }
        Ok(PartitionedRomRun { states, reports })
    }
}
