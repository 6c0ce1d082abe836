//! Semi-implicit projection scheme: mesh extrapolation, explicit ALE momentum step, and a
//! Robin-coupled pressure/structure fixed point.

use std::sync::Arc;

use crate::ale::{ExtensionMode, HarmonicExtension};
use crate::error::{FsiError, Result};
use crate::fem::dual::{Dual, Real};
use crate::fem::forms::{adj_det, edge_qps, eval_field, trace_basis, viscous_flux, Basis, INVERSION_LIMIT};
use crate::fem::quadrature::TRI_DEG4;
use crate::fem::space::CellGeom;
use crate::fem::{
    apply_dirichlet, assemble, build_space, newton_solve, DirichletSet, Domain, FeSpace, FieldVec, Form, LuCache,
    NewtonOptions, SparseLu, SparseOp, Triplets,
};
use crate::mesh::{BoundaryTag, Mesh};
use crate::offline_monolithic::Lifting;
use crate::params::{PhysicalParams, TimeParamsPart};
use crate::reduction::{InnerProduct, NormKind};
use crate::time::inlet_profile;

/// Robin coupling weight `alpha = rho_f / (z_p dt)` with impedance `z_p = rho_s c_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinParams {
    pub c_p: f64,
    pub z_p: f64,
    pub alpha: f64,
}

pub fn compute_alpha_rob(rho_f: f64, rho_s: f64, mu_s: f64, lambda_s: f64, dt: f64) -> Result<RobinParams> {
    if !(rho_f > 0.0 && rho_s > 0.0 && dt > 0.0) || mu_s < 0.0 || lambda_s < 0.0 || !(lambda_s + 2.0 * mu_s > 0.0) {
        return Err(FsiError::Invalid("Robin parameters need positive densities, moduli and time step".into()));
    }
    let c_p = ((lambda_s + 2.0 * mu_s) / rho_s).sqrt();
    let z_p = rho_s * c_p;
    Ok(RobinParams { c_p, z_p, alpha: rho_f / (z_p * dt) })
}

#[derive(Debug, Clone)]
pub struct PartitionedSpaces {
    pub mesh: Arc<Mesh>,
    /// Velocity and mesh displacement.
    pub v: Arc<FeSpace>,
    pub q: Arc<FeSpace>,
    pub es: Arc<FeSpace>,
}

impl PartitionedSpaces {
    pub fn new(mesh: &Arc<Mesh>) -> Result<Self> {
        Ok(PartitionedSpaces {
            mesh: mesh.clone(),
            v: build_space(mesh, Domain::Fluid, 2, 2)?,
            q: build_space(mesh, Domain::Fluid, 1, 1)?,
            es: build_space(mesh, Domain::Solid, 2, 2)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PartitionedState {
    pub step: usize,
    pub t: f64,
    pub u: FieldVec,
    pub p: FieldVec,
    pub d_f: FieldVec,
    pub d_s: FieldVec,
    /// Solid displacement one step back.
    pub d_s_prev: FieldVec,
}

impl PartitionedState {
    pub fn rest(sp: &PartitionedSpaces) -> Self {
        PartitionedState {
            step: 0,
            t: 0.0,
            u: FieldVec::zeros(&sp.v),
            p: FieldVec::zeros(&sp.q),
            d_f: FieldVec::zeros(&sp.v),
            d_s: FieldVec::zeros(&sp.es),
            d_s_prev: FieldVec::zeros(&sp.es),
        }
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionedReport {
    pub iterations: usize,
    pub increment: f64,
    pub p_bar: f64,
    pub newton_iterations: usize,
}

#[derive(Debug)]
pub struct PartitionedProblem {
    pub spaces: PartitionedSpaces,
    pub phys: PhysicalParams,
    pub time: TimeParamsPart,
    pub robin: RobinParams,
    pub extension: HarmonicExtension,
    pub lifting: Lifting,
    /// `L2(fluid)` Gram of the pressure and `H1` seminorm Gram of the solid displacement.
    pub x_p: InnerProduct,
    pub x_d: InnerProduct,
    m_s: SparseOp,
    /// `rho_s / dt^2 M + K` without boundary rows.
    structure: SparseOp,
    structure_lu: SparseLu,
    bc_s: DirichletSet,
    f_bs: Vec<f64>,
    /// `alpha (p, q)_G`.
    robin_mass: SparseOp,
    inlet_q: Vec<usize>,
    inlet_v: Vec<usize>,
    fsi_v: Vec<usize>,
    walls_v: Vec<usize>,
    inlet_length: f64,
    newton_cache: std::sync::Mutex<LuCache>,
}

impl PartitionedProblem {
    pub fn new(spaces: PartitionedSpaces, phys: PhysicalParams, time: TimeParamsPart) -> Result<Self> {
        phys.validate()?;
        time.validate()?;
        let sp = &spaces;
        let robin = compute_alpha_rob(phys.rho_f, phys.rho_s, phys.mu_s, phys.lambda_s, time.dt)?;
        let extension = HarmonicExtension::new(&sp.v, ExtensionMode::Plain)?;
        let lifting = Lifting::new(&sp.v, &sp.q, phys.u_bar)?;
        let m_s = assemble(&Form::Mass { coef: 1.0 }, &sp.es, &sp.es)?;
        let k_s = assemble(&Form::Elasticity { mu: phys.mu_s, lambda: phys.lambda_s }, &sp.es, &sp.es)?;
        let mut t = Triplets::new(sp.es.n_dofs(), sp.es.n_dofs());
        t.append_op(&m_s, 0, 0, phys.rho_s / (time.dt * time.dt));
        t.append_op(&k_s, 0, 0, 1.0);
        let structure = t.to_op();
        let bc_s = DirichletSet::zero_on(&sp.es, &[BoundaryTag::SolidDirichlet])?;
        let structure_lu = SparseLu::factor(&apply_dirichlet(&structure, &mut vec![0.0; sp.es.n_dofs()], &bc_s)?)?;
        let f_bs = m_s.mul_vec(&sp.es.interpolate(|_, c| phys.b_s[c]));
        let robin_mass = assemble(&Form::InterfaceMass { coef: robin.alpha }, &sp.q, &sp.q)?;
        let inlet_length: f64 = sp
            .mesh
            .edges_with_tag(BoundaryTag::Inlet)
            .map(|e| {
                let [a, b] = e.nodes.map(|i| sp.mesh.nodes()[i]);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            })
            .sum();
        Ok(PartitionedProblem {
            x_p: InnerProduct::new(&sp.q, NormKind::L2Volume)?,
            x_d: InnerProduct::new(&sp.es, NormKind::H1Seminorm)?,
            inlet_q: sp.q.scalar_dofs_on(BoundaryTag::Inlet),
            inlet_v: sp.v.dofs_on(BoundaryTag::Inlet),
            fsi_v: sp.v.dofs_on(BoundaryTag::FsiInterface),
            walls_v: sp.v.dofs_on(BoundaryTag::Walls),
            spaces,
            phys,
            time,
            robin,
            extension,
            lifting,
            m_s,
            structure,
            structure_lu,
            bc_s,
            f_bs,
            robin_mass,
            inlet_length,
            newton_cache: Default::default(),
        })
    }

    /// Plain harmonic extension of the interface trace of `d_s`.
    pub fn extrapolate_mesh(&self, d_s: &FieldVec) -> Result<FieldVec> {
        self.extension.apply(d_s)
    }

    /// Velocity Dirichlet data: inflow profile, zero walls, mesh velocity `w` on the interface.
    /// Interface values win at the corners shared with the walls (where `w` vanishes).
    pub fn velocity_dirichlet(&self, t: f64, w: &[f64]) -> DirichletSet {
        let v = &self.spaces.v;
        let mut dofs = Vec::with_capacity(self.inlet_v.len() + self.walls_v.len() + self.fsi_v.len());
        let mut vals = Vec::with_capacity(dofs.capacity());
        for &d in &self.fsi_v {
            dofs.push(d);
            vals.push(w[d]);
        }
        let fsi = DirichletSet { dofs, values: vals };
        let inflow = DirichletSet {
            dofs: self.inlet_v.clone(),
            values: self.inlet_v.iter().map(|&d| inlet_profile(t, v.dof_point(d / 2)[1], self.phys.u_bar)[d % 2]).collect(),
        };
        let walls = DirichletSet { dofs: self.walls_v.clone(), values: vec![0.0; self.walls_v.len()] };
        fsi.merge(inflow).merge(walls)
    }

    /// Explicit momentum system on the mesh `d_next`.
    pub fn explicit_system<'a>(
        &'a self,
        u_prev: &'a FieldVec,
        p_prev: &'a FieldVec,
        d_next: &'a FieldVec,
        d_prev: &'a FieldVec,
        t_next: f64,
    ) -> ExplicitSystem<'a> {
        let dt = self.time.dt;
        let w: Vec<f64> = d_next.values.iter().zip(&d_prev.values).map(|(a, b)| (a - b) / dt).collect();
        let bc = self.velocity_dirichlet(t_next, &w);
        ExplicitSystem { prob: self, u_prev, p_prev, d_next, w, bc }
    }

    /// Explicit ALE momentum step; returns the new velocity and the Newton iteration count.
    pub fn fluid_explicit_step(
        &self,
        u_prev: &FieldVec,
        p_prev: &FieldVec,
        d_next: &FieldVec,
        d_prev: &FieldVec,
        t_next: f64,
    ) -> Result<(FieldVec, usize)> {
        let sys = self.explicit_system(u_prev, p_prev, d_next, d_prev, t_next);
        let mut x = u_prev.values.clone();
        sys.bc.impose(&mut x);
        let opts = NewtonOptions { tol: self.time.newton_tol, max_iters: self.time.max_newton_iters, ..Default::default() };
        let mut cache = self.newton_cache.lock().unwrap_or_else(|e| e.into_inner());
        let rep = newton_solve(&mut x, &opts, &mut cache, |x, jac| {
            let (mut r, j) = sys.eval(x, jac)?;
            for (&d, &g) in sys.bc.dofs.iter().zip(&sys.bc.values) {
                r[d] = x[d] - g;
            }
            let j = match j {
                Some(j) => Some(apply_dirichlet(&j, &mut vec![0.0; r.len()], &sys.bc)?),
                None => None,
            };
            Ok((r, j))
        })?;
        sys.bc.impose(&mut x);
        Ok((FieldVec::from_values(&self.spaces.v, x)?, rep.iterations))
    }

    /// Inlet-averaged `-(sigma n) . n` with the reference geometry: the mean of
    /// `p - 2 rho nu du_x/dx` over the inlet.
    pub fn inlet_pressure_value(&self, u: &FieldVec, p: &FieldVec) -> Result<f64> {
        let sp = &self.spaces;
        let mesh = &sp.mesh;
        let rho_nu = self.phys.rho_f * self.phys.nu_f;
        let mut acc = 0.0;
        for e in mesh.edges_with_tag(BoundaryTag::Inlet) {
            let (a, b) = (e.nodes[0], e.nodes[1]);
            let eid = mesh.edge_id(a, b).ok_or_else(|| FsiError::InvalidMesh("inlet edge missing".into()))?;
            let tri = mesh.edge_cells(eid)[0];
            let c = sp.v.cell_of_entity(tri).ok_or_else(|| FsiError::InvalidMesh("inlet cell outside fluid".into()))?;
            let g = sp.v.cell_geom(c);
            for qp in edge_qps(mesh, [a, b], tri) {
                let bary = g.bary(qp.point);
                let (_, gu) = eval_field(u, c, &Basis::tri(2, bary, &g));
                let (pv, _) = eval_field(p, c, &Basis::tri(sp.q.order(), bary, &g));
                // n = (-1, 0): sigma n . n = sigma_xx = 2 rho nu du_x/dx - p.
                acc += qp.weight * (pv[0] - 2.0 * rho_nu * gu[0][0]);
            }
        }
        Ok(acc / self.inlet_length)
    }

    /// Operators of the pressure Poisson problem on the mesh `d_next` for velocity `u_next`.
    pub fn pressure_system(&self, u_next: &FieldVec, d_next: &FieldVec) -> Result<PressureSystem> {
        let sp = &self.spaces;
        let lap = assemble(&Form::PressurePoisson { d_f: Some(d_next) }, &sp.q, &sp.q)?;
        let mut t = Triplets::new(sp.q.n_dofs(), sp.q.n_dofs());
        t.append_op(&lap, 0, 0, 1.0);
        t.append_op(&self.robin_mass, 0, 0, 1.0);
        let matrix = t.to_op();
        let div = assemble(&Form::Divergence { d_f: Some(d_next) }, &sp.v, &sp.q)?;
        // -(rho/dt)(tr(grad u A), q) = (rho/dt) * [-(div(A u), q)].
        let base: Vec<f64> = div.mul_vec(&u_next.values).iter().map(|v| v * self.phys.rho_f / self.time.dt).collect();
        let accel_load = self.accel_coupling(d_next)?;
        let bc_values = vec![0.0; self.inlet_q.len()];
        let bc = DirichletSet { dofs: self.inlet_q.clone(), values: bc_values };
        let lu = SparseLu::factor(&apply_dirichlet(&matrix, &mut vec![0.0; sp.q.n_dofs()], &bc)?)?;
        Ok(PressureSystem { matrix, base, accel_load, lu, inlet: self.inlet_q.clone() })
    }

    /// `rho_f (a . A^T n_f, q)_G` as an operator from solid accelerations to pressure tests.
    fn accel_coupling(&self, d_next: &FieldVec) -> Result<SparseOp> {
        let sp = &self.spaces;
        let mesh = &sp.mesh;
        let mut t = Triplets::new(sp.q.n_dofs(), sp.es.n_dofs());
        for (pos, ie) in mesh.interface_edges().iter().enumerate() {
            for qp in edge_qps(mesh, ie.nodes, ie.fluid_cell) {
                let (cq, bq) = trace_basis(&sp.q, pos, ie, &qp)?;
                let (cs, bs) = trace_basis(&sp.es, pos, ie, &qp)?;
                let (cv, bv) = trace_basis(&sp.v, pos, ie, &qp)?;
                let (_, h) = eval_field(d_next, cv, &bv);
                let (am, j) = adj_det(&h);
                if j <= INVERSION_LIMIT {
                    return Err(FsiError::InvertedElement { cell: ie.fluid_cell, jacobian: j });
                }
                let n = qp.n_f;
                let atn = [am[0][0] * n[0] + am[1][0] * n[1], am[0][1] * n[0] + am[1][1] * n[1]];
                let qd = sp.q.cell_dofs(cq);
                let sd = sp.es.cell_dofs(cs);
                for k in 0..bq.n {
                    for i in 0..bs.n {
                        for a in 0..2 {
                            let v = self.phys.rho_f * qp.weight * bq.vals[k] * bs.vals[i] * atn[a];
                            if v != 0.0 {
                                t.push(qd[k], 2 * sd[i] + a, v);
                            }
                        }
                    }
                }
            }
        }
        Ok(t.to_op())
    }

    /// Solid acceleration `(d - 2 d^n + d^{n-1}) / dt^2`.
    pub fn solid_accel(&self, d: &[f64], d_n: &[f64], d_nm1: &[f64]) -> Vec<f64> {
        let dt2 = self.time.dt * self.time.dt;
        (0..d.len()).map(|i| (d[i] - 2.0 * d_n[i] + d_nm1[i]) / dt2).collect()
    }

    /// Pressure iterate from the structure iterate `d_iter` and pressure iterate `p_iter`.
    pub fn pressure_poisson_step(
        &self,
        sys: &PressureSystem,
        d_iter: &[f64],
        d_n: &[f64],
        d_nm1: &[f64],
        p_iter: &[f64],
        p_bar: f64,
    ) -> Result<FieldVec> {
        let acc = self.solid_accel(d_iter, d_n, d_nm1);
        let mut rhs = sys.rhs(&acc, p_iter, &self.robin_mass);
        for &d in &sys.inlet {
            rhs[d] = p_bar;
        }
        let mut x = sys.lu.solve(&rhs)?;
        for &d in &sys.inlet {
            x[d] = p_bar;
        }
        FieldVec::from_values(&self.spaces.q, x)
    }

    pub fn robin_mass(&self) -> &SparseOp {
        &self.robin_mass
    }

    /// `(J sigma F^-T n_f, e)_G` for fluid state `(u, p)` on mesh `d_f`, as a solid load vector.
    pub fn traction_load(&self, u: &FieldVec, p: &FieldVec, d_f: &FieldVec) -> Result<Vec<f64>> {
        let sp = &self.spaces;
        let mesh = &sp.mesh;
        let rho_nu = self.phys.rho_f * self.phys.nu_f;
        let mut out = vec![0.0; sp.es.n_dofs()];
        for (pos, ie) in mesh.interface_edges().iter().enumerate() {
            for qp in edge_qps(mesh, ie.nodes, ie.fluid_cell) {
                let (cv, bv) = trace_basis(&sp.v, pos, ie, &qp)?;
                let (cq, bq) = trace_basis(&sp.q, pos, ie, &qp)?;
                let (cs, bs) = trace_basis(&sp.es, pos, ie, &qp)?;
                let tr = mapped_traction(u, p, d_f, rho_nu, (cv, &bv), (cq, &bq), qp.n_f, ie.fluid_cell)?;
                for (i, &s) in sp.es.cell_dofs(cs).iter().enumerate() {
                    for a in 0..2 {
                        out[2 * s + a] += qp.weight * tr[a] * bs.vals[i];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Structure iterate for a given interface load.
    pub fn structure_step(&self, load: &[f64], d_n: &[f64], d_nm1: &[f64]) -> Result<FieldVec> {
        let mut rhs = self.structure_rhs(load, d_n, d_nm1);
        self.bc_s.impose(&mut rhs);
        let mut x = self.structure_lu.solve(&rhs)?;
        self.bc_s.impose(&mut x);
        FieldVec::from_values(&self.spaces.es, x)
    }

    /// `rho_s/dt^2 M (2 d^n - d^{n-1}) - load + f_b`.
    pub fn structure_rhs(&self, load: &[f64], d_n: &[f64], d_nm1: &[f64]) -> Vec<f64> {
        let c = self.phys.rho_s / (self.time.dt * self.time.dt);
        let hist: Vec<f64> = (0..d_n.len()).map(|i| 2.0 * d_n[i] - d_nm1[i]).collect();
        let mh = self.m_s.mul_vec(&hist);
        (0..mh.len()).map(|i| c * mh[i] - load[i] + self.f_bs[i]).collect()
    }

    /// Structure operator without boundary rows.
    pub fn structure_matrix(&self) -> &SparseOp {
        &self.structure
    }

    pub fn structure_dirichlet(&self) -> &DirichletSet {
        &self.bc_s
    }

    /// Relative increments `(|dp|/|p_new|, |dd|/|d_new|)`; a new-iterate norm below 1e-14
    /// counts as a converged component.
    pub fn increments(&self, p_new: &[f64], p_old: &[f64], d_new: &[f64], d_old: &[f64]) -> (f64, f64) {
        relative_increments(&self.x_p, &self.x_d, p_new, p_old, d_new, d_old)
    }

    /// One full step; errors carry no step index (the caller adds it).
    pub fn step(&self, s: &PartitionedState) -> Result<(PartitionedState, PartitionedReport)> {
        let t_next = s.t + self.time.dt;
        let d_f_next = self.extrapolate_mesh(&s.d_s)?;
        crate::ale::check_distortion(&s.d_f, &d_f_next)?;
        let (u_next, newton_iterations) = self.fluid_explicit_step(&s.u, &s.p, &d_f_next, &s.d_f, t_next)?;
        let p_bar = self.inlet_pressure_value(&s.u, &s.p)?;
        let psys = self.pressure_system(&u_next, &d_f_next)?;
        let mut p_it = s.p.values.clone();
        let mut d_it = s.d_s.values.clone();
        let mut last = f64::INFINITY;
        for j in 1..=self.time.max_fp_iters {
            let p_new = self.pressure_poisson_step(&psys, &d_it, &s.d_s.values, &s.d_s_prev.values, &p_it, p_bar)?;
            let load = self.traction_load(&u_next, &p_new, &d_f_next)?;
            let d_new = self.structure_step(&load, &s.d_s.values, &s.d_s_prev.values)?;
            let (ip, id) = self.increments(&p_new.values, &p_it, &d_new.values, &d_it);
            last = ip.max(id);
            p_it = p_new.values;
            d_it = d_new.values;
            if !last.is_finite() {
                return Err(FsiError::NonFinite);
            }
            if last < self.time.eps {
                let next = PartitionedState {
                    step: s.step + 1,
                    t: t_next,
                    u: u_next,
                    p: FieldVec::from_values(&self.spaces.q, p_it)?,
                    d_f: d_f_next,
                    d_s: FieldVec::from_values(&self.spaces.es, d_it)?,
                    d_s_prev: s.d_s.clone(),
                };
                let rep = PartitionedReport { iterations: j, increment: last, p_bar, newton_iterations };
                return Ok((next, rep));
            }
        }
        Err(FsiError::FixedPointFailed { iterations: self.time.max_fp_iters, increment: last })
    }
}

/// Relative increments in the pressure and displacement norms.
pub fn relative_increments(
    x_p: &InnerProduct,
    x_d: &InnerProduct,
    p_new: &[f64],
    p_old: &[f64],
    d_new: &[f64],
    d_old: &[f64],
) -> (f64, f64) {
    let rel = |ip: &InnerProduct, new: &[f64], old: &[f64]| {
        let n = ip.norm(new);
        if n < 1e-14 {
            return 0.0;
        }
        let diff: Vec<f64> = new.iter().zip(old).map(|(a, b)| a - b).collect();
        ip.norm(&diff) / n
    };
    (rel(x_p, p_new, p_old), rel(x_d, d_new, d_old))
}

/// True iff the larger relative increment is below `eps`.
pub fn fixed_point_converged(increments: (f64, f64), eps: f64) -> bool {
    increments.0.max(increments.1) < eps
}

/// `J sigma F^-T n` at an interface point of fluid cell `cell`.
#[allow(clippy::too_many_arguments)]
fn mapped_traction(
    u: &FieldVec,
    p: &FieldVec,
    d_f: &FieldVec,
    rho_nu: f64,
    v: (usize, &Basis),
    q: (usize, &Basis),
    n: [f64; 2],
    cell: usize,
) -> Result<[f64; 2]> {
    let (_, g) = eval_field(u, v.0, v.1);
    let (_, h) = eval_field(d_f, v.0, v.1);
    let (pv, _) = eval_field(p, q.0, q.1);
    let (am, j) = adj_det(&h);
    if j <= INVERSION_LIMIT {
        return Err(FsiError::InvertedElement { cell, jacobian: j });
    }
    let mut s = viscous_flux(&g, &am, j, rho_nu);
    for a in 0..2 {
        for m in 0..2 {
            s[a][m] -= pv[0] * am[m][a];
        }
    }
    Ok([s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]])
}

/// Pressure Poisson operators of one time step.
#[derive(Debug)]
pub struct PressureSystem {
    /// Poisson plus Robin mass, without boundary rows.
    pub matrix: SparseOp,
    /// `-(rho/dt)(tr(grad u A), q)`.
    pub base: Vec<f64>,
    /// `rho (a . A^T n, q)_G` from solid accelerations.
    pub accel_load: SparseOp,
    lu: SparseLu,
    pub inlet: Vec<usize>,
}

impl PressureSystem {
    /// Right side without inlet rows.
    pub fn rhs(&self, accel: &[f64], p_iter: &[f64], robin_mass: &SparseOp) -> Vec<f64> {
        let a = self.accel_load.mul_vec(accel);
        let r = robin_mass.mul_vec(p_iter);
        (0..self.base.len()).map(|i| self.base[i] - a[i] + r[i]).collect()
    }
}

/// Explicit momentum residual in the velocity alone.
pub struct ExplicitSystem<'a> {
    prob: &'a PartitionedProblem,
    u_prev: &'a FieldVec,
    p_prev: &'a FieldVec,
    d_next: &'a FieldVec,
    /// Mesh velocity `(d_next - d_prev) / dt`.
    pub w: Vec<f64>,
    pub bc: DirichletSet,
}

impl ExplicitSystem<'_> {
    /// Raw residual and Jacobian (no boundary rows).
    pub fn eval(&self, x: &[f64], jac: bool) -> Result<(Vec<f64>, Option<SparseOp>)> {
        let sp = &self.prob.spaces;
        let n = sp.v.n_dofs();
        if x.len() != n {
            return Err(FsiError::Dimension(format!("velocity of length {} (expected {n})", x.len())));
        }
        let ctx = ExplicitCtx {
            rho: self.prob.phys.rho_f,
            rho_nu: self.prob.phys.rho_f * self.prob.phys.nu_f,
            b_f: self.prob.phys.b_f,
            dt: self.prob.time.dt,
        };
        let mut r = vec![0.0; n];
        let mut trip = jac.then(|| Triplets::new(n, n));
        for c in 0..sp.v.n_cells() {
            let vd = sp.v.cell_dofs(c);
            let gi: [usize; 12] = std::array::from_fn(|k| 2 * vd[k / 2] + k % 2);
            let data = ExplicitData {
                u_prev: std::array::from_fn(|k| self.u_prev.values[gi[k]]),
                d: std::array::from_fn(|k| self.d_next.values[gi[k]]),
                w: std::array::from_fn(|k| self.w[gi[k]]),
                p: std::array::from_fn(|k| if k < sp.q.n_local() { self.p_prev.values[sp.q.cell_dofs(c)[k]] } else { 0.0 }),
                q_order: sp.q.order(),
            };
            let geom = sp.v.cell_geom(c);
            let cell = sp.v.cell_entity(c);
            if let Some(t) = trip.as_mut() {
                let u: [Dual<12>; 12] = std::array::from_fn(|k| Dual::var(x[gi[k]], k));
                let ru = explicit_cell(&ctx, &geom, cell, &u, &data)?;
                for (k, rk) in ru.iter().enumerate() {
                    r[gi[k]] += rk.v;
                    for (m, &dv) in rk.d.iter().enumerate() {
                        if dv != 0.0 {
                            t.push(gi[k], gi[m], dv);
                        }
                    }
                }
            } else {
                let u: [f64; 12] = std::array::from_fn(|k| x[gi[k]]);
                let ru = explicit_cell(&ctx, &geom, cell, &u, &data)?;
                for (k, rk) in ru.iter().enumerate() {
                    r[gi[k]] += rk;
                }
            }
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(FsiError::NonFinite);
        }
        Ok((r, trip.map(|t| t.to_op())))
    }
}

struct ExplicitCtx {
    rho: f64,
    rho_nu: f64,
    b_f: [f64; 2],
    dt: f64,
}

struct ExplicitData {
    u_prev: [f64; 12],
    d: [f64; 12],
    w: [f64; 12],
    p: [f64; 6],
    q_order: usize,
}

/// `rho J (u - u^n)/dt . v + rho (grad u A (u - w)) . v + (J sigma_visc F^-T, grad v)
///  + (A^T grad p^n) . v - J b . v` on one cell.
fn explicit_cell<T: Real>(ctx: &ExplicitCtx, geom: &CellGeom, cell: usize, u: &[T; 12], dat: &ExplicitData) -> Result<[T; 12]> {
    let zero = T::cst(0.0);
    let mut ru = [zero; 12];
    for qp in TRI_DEG4.iter() {
        let wq = qp.weight * geom.area;
        let bv = Basis::tri(2, qp.bary, geom);
        let bq = Basis::tri(dat.q_order, qp.bary, geom);
        let mut uv = [zero; 2];
        let mut g = [[zero; 2]; 2];
        let mut un = [0.0; 2];
        let mut wv = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for i in 0..6 {
            let (phi, gr) = (bv.vals[i], bv.grads[i]);
            for a in 0..2 {
                let k = 2 * i + a;
                uv[a] += u[k] * phi;
                g[a][0] += u[k] * gr[0];
                g[a][1] += u[k] * gr[1];
                un[a] += dat.u_prev[k] * phi;
                wv[a] += dat.w[k] * phi;
                h[a][0] += dat.d[k] * gr[0];
                h[a][1] += dat.d[k] * gr[1];
            }
        }
        let mut gp = [0.0; 2];
        for k in 0..bq.n {
            gp[0] += dat.p[k] * bq.grads[k][0];
            gp[1] += dat.p[k] * bq.grads[k][1];
        }
        let (am, j) = adj_det(&h);
        if j <= INVERSION_LIMIT {
            return Err(FsiError::InvertedElement { cell, jacobian: j });
        }
        let mut ga = [[zero; 2]; 2];
        for a in 0..2 {
            for m in 0..2 {
                ga[a][m] = g[a][0] * am[0][m] + g[a][1] * am[1][m];
            }
        }
        let adv = [uv[0] - wv[0], uv[1] - wv[1]];
        let mut f0 = [zero; 2];
        for a in 0..2 {
            let atgp = am[0][a] * gp[0] + am[1][a] * gp[1];
            let conv = ga[a][0] * adv[0] + ga[a][1] * adv[1];
            f0[a] = (uv[a] - un[a]) * (ctx.rho * j / ctx.dt) + conv * ctx.rho + (atgp - j * ctx.b_f[a]);
        }
        let sym = [[ga[0][0] + ga[0][0], ga[0][1] + ga[1][0]], [ga[1][0] + ga[0][1], ga[1][1] + ga[1][1]]];
        let scale = ctx.rho_nu / j;
        for i in 0..6 {
            let (phi, gr) = (bv.vals[i], bv.grads[i]);
            for a in 0..2 {
                let mut f1g = zero;
                for m in 0..2 {
                    let s = sym[a][0] * am[m][0] + sym[a][1] * am[m][1];
                    f1g += s * (scale * gr[m]);
                }
                ru[2 * i + a] += (f0[a] * phi + f1g) * wq;
            }
        }
    }
    Ok(ru)
}
