//! Velocity lifting and pressure supremizers.

use std::sync::Arc;

use crate::error::{FsiError, Result};
use crate::fem::{apply_dirichlet, assemble, DirichletSet, FeSpace, FieldVec, Form, SparseLu, SparseOp, Triplets};
use crate::mesh::BoundaryTag;
use crate::time::{inlet_profile, ramp};

/// Steady Stokes lifting of the inlet profile. The problem is linear in the boundary data and
/// the data scale with the ramp, so one solve at full inflow serves every time.
#[derive(Debug, Clone)]
pub struct Lifting {
    reference: FieldVec,
}

impl Lifting {
    /// Solves `(grad l, grad v) - (p, div v) = 0`, `(div l, q) = 0` with the inflow profile on
    /// the inlet, zero on walls and interface, and a do-nothing outlet.
    pub fn new(v: &Arc<FeSpace>, q: &Arc<FeSpace>, u_bar: f64) -> Result<Self> {
        let (nv, nq) = (v.n_dofs(), q.n_dofs());
        let k = assemble(&Form::Stiffness { coef: 1.0 }, v, v)?;
        let b = assemble(&Form::Divergence { d_f: None }, v, q)?;
        let mut t = Triplets::new(nv + nq, nv + nq);
        t.append_op(&k, 0, 0, 1.0);
        t.append_op(&b.transpose(), 0, nv, 1.0);
        t.append_op(&b, nv, 0, 1.0);
        let a = t.to_op();
        let inflow = DirichletSet::on_tag(v, BoundaryTag::Inlet, |p, c| inlet_profile(2.0, p[1], u_bar)[c])?;
        let bc = inflow.merge(DirichletSet::zero_on(v, &[BoundaryTag::Walls, BoundaryTag::FsiInterface])?);
        let mut rhs = vec![0.0; nv + nq];
        let a = apply_dirichlet(&a, &mut rhs, &bc)?;
        let mut x = crate::fem::solve_linear(&a, &rhs)?;
        bc.impose(&mut x);
        x.truncate(nv);
        Ok(Lifting { reference: FieldVec::from_values(v, x)? })
    }

    /// Lifting at time `t`.
    pub fn at(&self, t: f64) -> FieldVec {
        let s = ramp(t);
        let mut f = self.reference.clone();
        f.values.iter_mut().for_each(|v| *v *= s);
        f.step = None;
        f
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        self.reference.space()
    }
}

/// `compute_lifting(t)` for a one-off evaluation.
pub fn compute_lifting(v: &Arc<FeSpace>, q: &Arc<FeSpace>, u_bar: f64, t: f64) -> Result<FieldVec> {
    Ok(Lifting::new(v, q, u_bar)?.at(t))
}

/// Solver for `(grad s, grad v) = -(div v, p)` on velocities vanishing on inlet and walls.
#[derive(Debug)]
pub struct SupremizerSolver {
    v: Arc<FeSpace>,
    q: Arc<FeSpace>,
    /// `-(div v, p)` as an operator from pressures to velocity test functions.
    coupling: SparseOp,
    stiffness: SparseOp,
    bc: DirichletSet,
    lu: SparseLu,
}

impl SupremizerSolver {
    pub fn new(v: &Arc<FeSpace>, q: &Arc<FeSpace>) -> Result<Self> {
        let k = assemble(&Form::Stiffness { coef: 1.0 }, v, v)?;
        let coupling = assemble(&Form::Divergence { d_f: None }, v, q)?.transpose();
        let bc = DirichletSet::zero_on(v, &[BoundaryTag::Inlet, BoundaryTag::Walls])?;
        let a = apply_dirichlet(&k, &mut vec![0.0; v.n_dofs()], &bc)?;
        let lu = SparseLu::factor(&a)?;
        Ok(SupremizerSolver { v: v.clone(), q: q.clone(), coupling, stiffness: k, bc, lu })
    }

    pub fn solve(&self, p: &FieldVec) -> Result<FieldVec> {
        if !p.space().same_as(&self.q) {
            return Err(FsiError::Invalid(format!("pressure on space {}", p.space().descriptor())));
        }
        let mut rhs = self.coupling.mul_vec(&p.values);
        self.bc.zero(&mut rhs);
        let mut s = self.lu.solve(&rhs)?;
        self.bc.zero(&mut s);
        FieldVec::from_values(&self.v, s)
    }

    /// Max-norm residual of the defining identity over free velocity test functions.
    pub fn residual(&self, s: &FieldVec, p: &FieldVec) -> f64 {
        let mut r = self.stiffness.mul_vec(&s.values);
        let b = self.coupling.mul_vec(&p.values);
        for (ri, bi) in r.iter_mut().zip(&b) {
            *ri -= bi;
        }
        self.bc.zero(&mut r);
        crate::fem::field::max_abs(&r)
    }
}

pub fn compute_supremizer(v: &Arc<FeSpace>, q: &Arc<FeSpace>, p: &FieldVec) -> Result<FieldVec> {
    SupremizerSolver::new(v, q)?.solve(p)
}
