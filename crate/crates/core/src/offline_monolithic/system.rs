//! Six-field monolithic system `[u, p, d_f, d_s, lambda_u, lambda_d]` for one time step.

use std::sync::Arc;

use crate::ale::check_distortion;
use crate::error::{FsiError, Result};
use crate::fem::dual::{Dual, Real};
use crate::fem::forms::{Basis, INVERSION_LIMIT};
use crate::fem::quadrature::TRI_DEG4;
use crate::fem::space::CellGeom;
use crate::fem::{
    apply_dirichlet, assemble, build_space, newton_solve, DirichletSet, Domain, FeSpace, FieldVec, Form, LuCache,
    NewtonOptions, NewtonReport, SparseOp, Triplets,
};
use crate::mesh::{BoundaryTag, Mesh};
use crate::params::{PhysicalParams, TimeParamsMono};
use crate::time::{bdf_coeffs, inlet_profile, NewmarkCoeffs};

/// Field blocks of the monolithic unknown, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MonoField {
    U,
    P,
    Df,
    Ds,
    Lu,
    Ld,
}

impl MonoField {
    pub const ALL: [MonoField; 6] = [MonoField::U, MonoField::P, MonoField::Df, MonoField::Ds, MonoField::Lu, MonoField::Ld];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MonoField::U => "u",
            MonoField::P => "p",
            MonoField::Df => "d_f",
            MonoField::Ds => "d_s",
            MonoField::Lu => "lambda_u",
            MonoField::Ld => "lambda_d",
        }
    }
}

/// Finite element spaces of the monolithic scheme. `d_f` shares the velocity space and both
/// multipliers share the trace space.
#[derive(Debug, Clone)]
pub struct MonolithicSpaces {
    pub mesh: Arc<Mesh>,
    pub v: Arc<FeSpace>,
    pub q: Arc<FeSpace>,
    pub es: Arc<FeSpace>,
    pub l: Arc<FeSpace>,
}

impl MonolithicSpaces {
    pub fn new(mesh: &Arc<Mesh>, pressure_order: usize) -> Result<Self> {
        Ok(MonolithicSpaces {
            mesh: mesh.clone(),
            v: build_space(mesh, Domain::Fluid, 2, 2)?,
            q: build_space(mesh, Domain::Fluid, pressure_order, 1)?,
            es: build_space(mesh, Domain::Solid, 2, 2)?,
            l: build_space(mesh, Domain::Interface, 1, 2)?,
        })
    }

    pub fn space(&self, f: MonoField) -> &Arc<FeSpace> {
        match f {
            MonoField::U | MonoField::Df => &self.v,
            MonoField::P => &self.q,
            MonoField::Ds => &self.es,
            MonoField::Lu | MonoField::Ld => &self.l,
        }
    }

    /// Block offsets; field `f` occupies `off[f]..off[f + 1]`.
    pub fn offsets(&self) -> [usize; 7] {
        let mut off = [0; 7];
        for f in MonoField::ALL {
            off[f.index() + 1] = off[f.index()] + self.space(f).n_dofs();
        }
        off
    }

    pub fn n_dofs(&self) -> usize {
        self.offsets()[6]
    }
}

#[derive(Debug, Clone)]
pub struct MonolithicState {
    pub step: usize,
    pub t: f64,
    pub u: FieldVec,
    pub p: FieldVec,
    pub d_f: FieldVec,
    pub d_s: FieldVec,
    pub l_u: FieldVec,
    pub l_d: FieldVec,
    /// Velocity and mesh displacement one step back; `None` before the first step.
    pub u_prev: Option<FieldVec>,
    pub d_f_prev: Option<FieldVec>,
    /// Solid velocity and acceleration (Newmark rates).
    pub v_s: FieldVec,
    pub a_s: FieldVec,
}

impl MonolithicState {
    /// Everything zero at `t = 0`.
    pub fn rest(sp: &MonolithicSpaces) -> Self {
        MonolithicState {
            step: 0,
            t: 0.0,
            u: FieldVec::zeros(&sp.v),
            p: FieldVec::zeros(&sp.q),
            d_f: FieldVec::zeros(&sp.v),
            d_s: FieldVec::zeros(&sp.es),
            l_u: FieldVec::zeros(&sp.l),
            l_d: FieldVec::zeros(&sp.l),
            u_prev: None,
            d_f_prev: None,
            v_s: FieldVec::zeros(&sp.es),
            a_s: FieldVec::zeros(&sp.es),
        }
    }

    pub fn field(&self, f: MonoField) -> &FieldVec {
        match f {
            MonoField::U => &self.u,
            MonoField::P => &self.p,
            MonoField::Df => &self.d_f,
            MonoField::Ds => &self.d_s,
            MonoField::Lu => &self.l_u,
            MonoField::Ld => &self.l_d,
        }
    }

    fn field_mut(&mut self, f: MonoField) -> &mut FieldVec {
        match f {
            MonoField::U => &mut self.u,
            MonoField::P => &mut self.p,
            MonoField::Df => &mut self.d_f,
            MonoField::Ds => &mut self.d_s,
            MonoField::Lu => &mut self.l_u,
            MonoField::Ld => &mut self.l_d,
        }
    }

    /// Concatenated unknown vector.
    pub fn pack(&self) -> Vec<f64> {
        MonoField::ALL.iter().flat_map(|&f| self.field(f).values.iter().copied()).collect()
    }

    fn unpack(&mut self, x: &[f64], off: &[usize; 7]) {
        for f in MonoField::ALL {
            let i = f.index();
            self.field_mut(f).values.copy_from_slice(&x[off[i]..off[i + 1]]);
        }
    }
}

/// Step-independent operators of the monolithic scheme.
#[derive(Debug)]
pub struct MonolithicProblem {
    pub spaces: MonolithicSpaces,
    pub phys: PhysicalParams,
    pub time: TimeParamsMono,
    newmark: NewmarkCoeffs,
    m_s: SparseOp,
    k_s: SparseOp,
    /// `(lambda, v)_G`: rows V, columns L.
    i_lv: SparseOp,
    /// `(lambda, e)_G`: rows E_s, columns L.
    i_ls: SparseOp,
    /// `(u, mu)_G`: rows L, columns V.
    i_vl: SparseOp,
    /// `(d, mu)_G`: rows L, columns E_s.
    i_sl: SparseOp,
    f_bs: Vec<f64>,
    inlet_scalar: Vec<usize>,
    bc_static: DirichletSet,
    cache: std::sync::Mutex<LuCache>,
}

/// Diagnostics of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub newton: NewtonReport,
    /// Max-norms of the two multiplier-equation residuals.
    pub velocity_continuity: f64,
    pub displacement_continuity: f64,
}

impl MonolithicProblem {
    pub fn new(spaces: MonolithicSpaces, phys: PhysicalParams, time: TimeParamsMono) -> Result<Self> {
        phys.validate()?;
        time.validate()?;
        let sp = &spaces;
        let m_s = assemble(&Form::Mass { coef: 1.0 }, &sp.es, &sp.es)?;
        let k_s = assemble(&Form::Elasticity { mu: phys.mu_s, lambda: phys.lambda_s }, &sp.es, &sp.es)?;
        let im = Form::InterfaceMass { coef: 1.0 };
        let i_lv = assemble(&im, &sp.l, &sp.v)?;
        let i_ls = assemble(&im, &sp.l, &sp.es)?;
        let i_vl = assemble(&im, &sp.v, &sp.l)?;
        let i_sl = assemble(&im, &sp.es, &sp.l)?;
        let bs = sp.es.interpolate(|_, c| phys.b_s[c]);
        let f_bs = m_s.mul_vec(&bs);
        let off = sp.offsets();
        let u_bc = DirichletSet::zero_on(&sp.v, &[BoundaryTag::Inlet, BoundaryTag::Walls])?;
        let df_bc = DirichletSet::zero_on(&sp.v, &[BoundaryTag::Inlet, BoundaryTag::Walls, BoundaryTag::Outlet])?;
        let ds_bc = DirichletSet::zero_on(&sp.es, &[BoundaryTag::SolidDirichlet])?;
        let bc_static = u_bc
            .shifted(off[MonoField::U.index()])
            .merge(df_bc.shifted(off[MonoField::Df.index()]))
            .merge(ds_bc.shifted(off[MonoField::Ds.index()]));
        let inlet_scalar = sp.v.scalar_dofs_on(BoundaryTag::Inlet);
        let newmark = NewmarkCoeffs::new(time.gamma, time.beta, time.dt, time.newmark_form);
        Ok(MonolithicProblem {
            spaces,
            phys,
            time,
            newmark,
            m_s,
            k_s,
            i_lv,
            i_ls,
            i_vl,
            i_sl,
            f_bs,
            inlet_scalar,
            bc_static,
            cache: Default::default(),
        })
    }

    pub fn newmark(&self) -> &NewmarkCoeffs {
        &self.newmark
    }

    /// Dirichlet data of the packed system at time `t`: inlet profile and zero walls for `u`,
    /// zero outer boundary for `d_f`, clamped root for `d_s`.
    pub fn dirichlet(&self, t: f64) -> DirichletSet {
        let mut set = self.bc_static.clone();
        let u0 = self.spaces.offsets()[MonoField::U.index()];
        for &s in &self.inlet_scalar {
            let y = self.spaces.v.dof_point(s)[1];
            let g = inlet_profile(t, y, self.phys.u_bar);
            for c in 0..2 {
                if let Ok(k) = set.dofs.binary_search(&(u0 + 2 * s + c)) {
                    set.values[k] = g[c];
                }
            }
        }
        set
    }

    /// System for the step from `state` to `state.t + dt`.
    pub fn step_system<'a>(&'a self, state: &'a MonolithicState) -> Result<StepSystem<'a>> {
        StepSystem::new(self, state)
    }

    /// Advances one step with Newton's method.
    pub fn step(&self, state: &MonolithicState) -> Result<(MonolithicState, StepReport)> {
        let sys = self.step_system(state)?;
        let bc = self.dirichlet(sys.t_next);
        let mut x = state.pack();
        bc.impose(&mut x);
        let opts = NewtonOptions {
            tol: self.time.newton_tol,
            max_iters: self.time.max_newton_iters,
            ..Default::default()
        };
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        let rep = newton_solve(&mut x, &opts, &mut cache, |x, jac| {
            let (mut r, j) = sys.eval(x, jac)?;
            for (&d, &g) in bc.dofs.iter().zip(&bc.values) {
                r[d] = x[d] - g;
            }
            let j = match j {
                Some(j) => Some(apply_dirichlet(&j, &mut vec![0.0; r.len()], &bc)?),
                None => None,
            };
            Ok((r, j))
        })?;
        drop(cache);
        bc.impose(&mut x);
        let (r, _) = sys.eval(&x, false)?;
        let off = self.spaces.offsets();
        let cont = |f: MonoField| crate::fem::field::max_abs(&r[off[f.index()]..off[f.index() + 1]]);
        let report = StepReport {
            newton: rep,
            velocity_continuity: cont(MonoField::Lu),
            displacement_continuity: cont(MonoField::Ld),
        };
        let next = sys.advance(&x)?;
        Ok((next, report))
    }
}

/// One-step residual `R(x) = L x - c + N(x)`; `N` is the nonlinear fluid part.
pub struct StepSystem<'a> {
    prob: &'a MonolithicProblem,
    state: &'a MonolithicState,
    pub t_next: f64,
    bdf: [f64; 3],
    linear: SparseOp,
    constant: Vec<f64>,
    hist: FluidHistory,
}

/// Velocity and mesh displacement at the two previous levels.
struct FluidHistory {
    u_n: Vec<f64>,
    u_nm1: Vec<f64>,
    d_n: Vec<f64>,
    d_nm1: Vec<f64>,
}

impl<'a> StepSystem<'a> {
    fn new(prob: &'a MonolithicProblem, state: &'a MonolithicState) -> Result<Self> {
        let sp = &prob.spaces;
        let off = sp.offsets();
        let n = off[6];
        let dt = prob.time.dt;
        let first = state.u_prev.is_none();
        let bdf = bdf_coeffs(dt, first);
        let nm = &prob.newmark;
        let rho_s = prob.phys.rho_s;
        let o = |f: MonoField| off[f.index()];

        let mesh_op = assemble(&Form::ScaledLaplacian { d_f_lag: Some(&state.d_f) }, &sp.v, &sp.v)?;
        let mut t = Triplets::new(n, n);
        t.append_op(&prob.i_lv, o(MonoField::U), o(MonoField::Lu), -1.0);
        t.append_op(&mesh_op, o(MonoField::Df), o(MonoField::Df), 1.0);
        t.append_op(&prob.i_lv, o(MonoField::Df), o(MonoField::Ld), -1.0);
        t.append_op(&prob.m_s, o(MonoField::Ds), o(MonoField::Ds), rho_s * nm.c_a);
        t.append_op(&prob.k_s, o(MonoField::Ds), o(MonoField::Ds), 1.0);
        t.append_op(&prob.i_ls, o(MonoField::Ds), o(MonoField::Lu), 1.0);
        t.append_op(&prob.i_vl, o(MonoField::Lu), o(MonoField::U), 1.0);
        t.append_op(&prob.i_sl, o(MonoField::Lu), o(MonoField::Ds), -nm.c_r);
        t.append_op(&prob.i_vl, o(MonoField::Ld), o(MonoField::Df), 1.0);
        t.append_op(&prob.i_sl, o(MonoField::Ld), o(MonoField::Ds), -1.0);
        let linear = t.to_op();

        // accel(d) = c_a d - (c_a d^n + c_av v^n + c_aa a^n), rate likewise.
        let (dn, vn, an) = (&state.d_s.values, &state.v_s.values, &state.a_s.values);
        let acc_h: Vec<f64> = (0..dn.len()).map(|i| nm.c_a * dn[i] + nm.c_av * vn[i] + nm.c_aa * an[i]).collect();
        let rate_h: Vec<f64> = (0..dn.len()).map(|i| nm.c_r * dn[i] + nm.c_rv * vn[i] + nm.c_ra * an[i]).collect();
        let mut constant = vec![0.0; n];
        let ms = prob.m_s.mul_vec(&acc_h);
        for (i, v) in ms.iter().enumerate() {
            constant[o(MonoField::Ds) + i] = rho_s * v + prob.f_bs[i];
        }
        let sl = prob.i_sl.mul_vec(&rate_h);
        for (i, v) in sl.iter().enumerate() {
            constant[o(MonoField::Lu) + i] = -v;
        }
        let zeros = vec![0.0; sp.v.n_dofs()];
        let hist = FluidHistory {
            u_n: state.u.values.clone(),
            u_nm1: state.u_prev.as_ref().map_or(zeros.clone(), |f| f.values.clone()),
            d_n: state.d_f.values.clone(),
            d_nm1: state.d_f_prev.as_ref().map_or(zeros, |f| f.values.clone()),
        };
        Ok(StepSystem { prob, state, t_next: state.t + dt, bdf, linear, constant, hist })
    }

    pub fn problem(&self) -> &MonolithicProblem {
        self.prob
    }

    /// Raw residual and, if requested, Jacobian at the packed unknown `x`; no Dirichlet rows.
    pub fn eval(&self, x: &[f64], jac: bool) -> Result<(Vec<f64>, Option<SparseOp>)> {
        let n = self.linear.nrows();
        if x.len() != n {
            return Err(FsiError::Dimension(format!("monolithic unknown of length {} (expected {n})", x.len())));
        }
        let mut r = self.linear.mul_vec(x);
        for (ri, ci) in r.iter_mut().zip(&self.constant) {
            *ri -= ci;
        }
        let jt = self.fluid_terms(x, &mut r, jac)?;
        let j = jt.map(|mut t| {
            t.append_op(&self.linear, 0, 0, 1.0);
            t.to_op()
        });
        if r.iter().any(|v| !v.is_finite()) {
            return Err(FsiError::NonFinite);
        }
        Ok((r, j))
    }

    fn fluid_terms(&self, x: &[f64], r: &mut [f64], jac: bool) -> Result<Option<Triplets>> {
        let sp = &self.prob.spaces;
        let off = sp.offsets();
        let (ou, op, od) = (off[0], off[1], off[2]);
        let ctx = FluidCtx {
            rho: self.prob.phys.rho_f,
            rho_nu: self.prob.phys.rho_f * self.prob.phys.nu_f,
            b_f: self.prob.phys.b_f,
            bdf: self.bdf,
            q_order: sp.q.order(),
        };
        let nq = sp.q.n_local();
        let mut trip = jac.then(|| Triplets::new(off[6], off[6]));
        for c in 0..sp.v.n_cells() {
            let vd = sp.v.cell_dofs(c);
            let qd = sp.q.cell_dofs(c);
            let gidx_u: Vec<usize> = (0..12).map(|k| 2 * vd[k / 2] + k % 2).collect();
            let mut hist = [[0.0; 12]; 4];
            for (k, &g) in gidx_u.iter().enumerate() {
                hist[0][k] = self.hist.u_n[g];
                hist[1][k] = self.hist.u_nm1[g];
                hist[2][k] = self.hist.d_n[g];
                hist[3][k] = self.hist.d_nm1[g];
            }
            let geom = sp.v.cell_geom(c);
            let cell = sp.v.cell_entity(c);
            if let Some(t) = trip.as_mut() {
                type D = Dual<30>;
                let u: [D; 12] = std::array::from_fn(|k| D::var(x[ou + gidx_u[k]], k));
                let p: [D; 6] = std::array::from_fn(|k| if k < nq { D::var(x[op + qd[k]], 12 + k) } else { D::cst(0.0) });
                let d: [D; 12] = std::array::from_fn(|k| D::var(x[od + gidx_u[k]], 18 + k));
                let (ru, rp) = fluid_cell(&ctx, &geom, cell, &u, &p, &d, &hist)?;
                let col = |k: usize| -> usize {
                    if k < 12 {
                        ou + gidx_u[k]
                    } else if k < 18 {
                        op + qd[k - 12]
                    } else {
                        od + gidx_u[k - 18]
                    }
                };
                for (k, ri) in ru.iter().enumerate() {
                    let row = ou + gidx_u[k];
                    r[row] += ri.v;
                    for (m, &dv) in ri.d.iter().enumerate() {
                        if dv != 0.0 && (m < 12 + nq || m >= 18) {
                            t.push(row, col(m), dv);
                        }
                    }
                }
                for (k, ri) in rp.iter().enumerate().take(nq) {
                    let row = op + qd[k];
                    r[row] += ri.v;
                    for (m, &dv) in ri.d.iter().enumerate() {
                        if dv != 0.0 && (m < 12 + nq || m >= 18) {
                            t.push(row, col(m), dv);
                        }
                    }
                }
            } else {
                let u: [f64; 12] = std::array::from_fn(|k| x[ou + gidx_u[k]]);
                let p: [f64; 6] = std::array::from_fn(|k| if k < nq { x[op + qd[k]] } else { 0.0 });
                let d: [f64; 12] = std::array::from_fn(|k| x[od + gidx_u[k]]);
                let (ru, rp) = fluid_cell(&ctx, &geom, cell, &u, &p, &d, &hist)?;
                for (k, v) in ru.iter().enumerate() {
                    r[ou + gidx_u[k]] += v;
                }
                for (k, v) in rp.iter().enumerate().take(nq) {
                    r[op + qd[k]] += v;
                }
            }
        }
        Ok(trip)
    }

    /// State after accepting the converged unknown `x`.
    pub fn advance(&self, x: &[f64]) -> Result<MonolithicState> {
        let off = self.prob.spaces.offsets();
        let old = self.state;
        let mut next = old.clone();
        next.unpack(x, &off);
        check_distortion(&old.d_f, &next.d_f)?;
        let nm = &self.prob.newmark;
        for i in 0..next.d_s.len() {
            let dd = next.d_s.values[i] - old.d_s.values[i];
            next.a_s.values[i] = nm.accel(dd, old.v_s.values[i], old.a_s.values[i]);
            next.v_s.values[i] = nm.rate(dd, old.v_s.values[i], old.a_s.values[i]);
        }
        next.u_prev = Some(old.u.clone());
        next.d_f_prev = Some(old.d_f.clone());
        next.step = old.step + 1;
        next.t = self.t_next;
        Ok(next)
    }
}

struct FluidCtx {
    rho: f64,
    rho_nu: f64,
    b_f: [f64; 2],
    bdf: [f64; 3],
    q_order: usize,
}

/// Momentum and continuity residuals of one fluid cell. Local vectors are interleaved by
/// component (`2 i + a`); `hist` holds `u^n, u^{n-1}, d^n, d^{n-1}`.
fn fluid_cell<T: Real>(
    ctx: &FluidCtx,
    geom: &CellGeom,
    cell: usize,
    u: &[T; 12],
    p: &[T; 6],
    d: &[T; 12],
    hist: &[[f64; 12]; 4],
) -> Result<([T; 12], [T; 6])> {
    let zero = T::cst(0.0);
    let mut ru = [zero; 12];
    let mut rp = [zero; 6];
    let [a0, a1, a2] = ctx.bdf;
    for qp in TRI_DEG4.iter() {
        let w = qp.weight * geom.area;
        let bv = Basis::tri(2, qp.bary, geom);
        let bq = Basis::tri(ctx.q_order, qp.bary, geom);
        let mut uv = [zero; 2];
        let mut g = [[zero; 2]; 2];
        let mut h = [[zero; 2]; 2];
        let mut wv = [zero; 2];
        let mut hist_u = [0.0; 2];
        for i in 0..6 {
            let (phi, gr) = (bv.vals[i], bv.grads[i]);
            for a in 0..2 {
                let k = 2 * i + a;
                uv[a] += u[k] * phi;
                g[a][0] += u[k] * gr[0];
                g[a][1] += u[k] * gr[1];
                h[a][0] += d[k] * gr[0];
                h[a][1] += d[k] * gr[1];
                wv[a] += (d[k] * a0 + (a1 * hist[2][k] + a2 * hist[3][k])) * phi;
                hist_u[a] += (a1 * hist[0][k] + a2 * hist[1][k]) * phi;
            }
        }
        let mut pv = zero;
        for k in 0..bq.n {
            pv += p[k] * bq.vals[k];
        }
        // A = adj(I + H), J = det(I + H).
        let f00 = h[0][0] + 1.0;
        let f11 = h[1][1] + 1.0;
        let jac = f00 * f11 - h[0][1] * h[1][0];
        if jac.value() <= INVERSION_LIMIT {
            return Err(FsiError::InvertedElement { cell, jacobian: jac.value() });
        }
        let am = [[f11, -h[0][1]], [-h[1][0], f00]];
        // G A
        let mut ga = [[zero; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                ga[i][j] = g[i][0] * am[0][j] + g[i][1] * am[1][j];
            }
        }
        let adv = [uv[0] - wv[0], uv[1] - wv[1]];
        let mut f0 = [zero; 2];
        for a in 0..2 {
            let dudt = uv[a] * a0 + hist_u[a];
            let conv = ga[a][0] * adv[0] + ga[a][1] * adv[1];
            f0[a] = jac * dudt * ctx.rho + conv * ctx.rho - jac * ctx.b_f[a];
        }
        let sym = [[ga[0][0] + ga[0][0], ga[0][1] + ga[1][0]], [ga[1][0] + ga[0][1], ga[1][1] + ga[1][1]]];
        let scale = T::cst(ctx.rho_nu) / jac;
        let mut f1 = [[zero; 2]; 2];
        for a in 0..2 {
            for m in 0..2 {
                // (sym A^T)_{am} = sum_k sym_{ak} A_{mk}
                let s = sym[a][0] * am[m][0] + sym[a][1] * am[m][1];
                f1[a][m] = s * scale - pv * am[m][a];
            }
        }
        let g0 = -(ga[0][0] + ga[1][1]);
        for i in 0..6 {
            let (phi, gr) = (bv.vals[i], bv.grads[i]);
            for a in 0..2 {
                ru[2 * i + a] += (f0[a] * phi + f1[a][0] * gr[0] + f1[a][1] * gr[1]) * w;
            }
        }
        for k in 0..bq.n {
            rp[k] += g0 * (bq.vals[k] * w);
        }
    }
    Ok((ru, rp))
}
