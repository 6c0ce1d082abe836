//! Bilinear form catalog. ALE forms take the mesh displacement `d_f`; with `None` they fall
//! back to separately coded Eulerian counterparts.

use super::field::FieldVec;
use super::quadrature::{edge_gauss3, TRI_DEG4};
use super::space::{edge_basis, tri_basis, CellGeom, Domain, FeSpace};
use super::sparse::{SparseOp, Triplets};
use crate::error::{FsiError, Result};
use crate::mesh::{InterfaceEdge, Mesh, Point};

pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy)]
pub enum Form<'a> {
    /// `c (u, v)`.
    Mass { coef: f64 },
    /// `c (grad u, grad v)`, componentwise for vector spaces.
    Stiffness { coef: f64 },
    /// `(P(u), grad v)` with `P = 2 mu eps + lambda tr(eps) I`.
    Elasticity { mu: f64, lambda: f64 },
    /// `rho (J u, v)`.
    AleMass { rho: f64, d_f: &'a FieldVec },
    /// `(J sigma_visc(u) F^-T, grad v)` with `sigma_visc = rho_nu (grad u F^-1 + F^-T grad u^T)`.
    Viscous { rho_nu: f64, d_f: Option<&'a FieldVec> },
    /// `rho (J grad u F^-1 a, v)` for a given advecting field `a`.
    Convection { rho: f64, advect: &'a FieldVec, d_f: Option<&'a FieldVec> },
    /// `-(div(J F^-1 u), q)`; trial is the velocity space, test the pressure space.
    Divergence { d_f: Option<&'a FieldVec> },
    /// `(J F^-T grad p, v)`; trial is the pressure space, test the velocity space.
    PressureGradient { d_f: Option<&'a FieldVec> },
    /// `(1/J grad d, grad e)` with `J` taken from the given (lagged) displacement.
    ScaledLaplacian { d_f_lag: Option<&'a FieldVec> },
    /// `(J F^-1 F^-T grad p, grad q)`.
    PressurePoisson { d_f: Option<&'a FieldVec> },
    /// `c (u, v)` over the fluid-solid interface; spaces may live on either side or on the trace.
    InterfaceMass { coef: f64 },
}

/// Adjugate `J F^-1` and determinant of `F = I + H`.
#[inline]
pub fn adj_det(h: &Mat2) -> (Mat2, f64) {
    let f = [[1.0 + h[0][0], h[0][1]], [h[1][0], 1.0 + h[1][1]]];
    let j = f[0][0] * f[1][1] - f[0][1] * f[1][0];
    ([[f[1][1], -f[0][1]], [-f[1][0], f[0][0]]], j)
}

pub const INVERSION_LIMIT: f64 = 1e-8;

/// Per-quadrature-point basis data for one space.
#[derive(Clone, Copy)]
pub struct Basis {
    pub n: usize,
    pub vals: [f64; 6],
    pub grads: [[f64; 2]; 6],
}

impl Basis {
    pub fn tri(order: usize, bary: [f64; 3], g: &CellGeom) -> Self {
        let mut b = Basis { n: if order == 1 { 3 } else { 6 }, vals: [0.0; 6], grads: [[0.0; 2]; 6] };
        tri_basis(order, bary, g, &mut b.vals, &mut b.grads);
        b
    }

    pub fn edge(order: usize, t: f64) -> Self {
        let mut b = Basis { n: order + 1, vals: [0.0; 6], grads: [[0.0; 2]; 6] };
        edge_basis(order, t, &mut b.vals);
        b
    }
}

/// Value and gradient of a (scalar or 2-vector) field inside a cell.
pub fn eval_field(f: &FieldVec, c: usize, b: &Basis) -> ([f64; 2], Mat2) {
    let sp = f.space();
    let nc = sp.comps();
    let mut v = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for (i, &s) in sp.cell_dofs(c).iter().enumerate() {
        for a in 0..nc {
            let x = f.values[nc * s + a];
            v[a] += x * b.vals[i];
            g[a][0] += x * b.grads[i][0];
            g[a][1] += x * b.grads[i][1];
        }
    }
    (v, g)
}

fn check_coef(f: &FieldVec, domain: Domain, comps: usize, what: &str) -> Result<()> {
    if f.space().domain() != domain || f.space().comps() != comps {
        return Err(FsiError::Invalid(format!(
            "{what} must live on a {}-component {} space, got {}",
            comps,
            domain.as_str(),
            f.space().descriptor()
        )));
    }
    if !f.is_finite() {
        return Err(FsiError::Invalid(format!("{what} has non-finite values")));
    }
    Ok(())
}

/// ALE kinematics at a quadrature point: adjugate and determinant; identity for `None`.
fn kin(d_f: Option<&FieldVec>, c: usize, bary: [f64; 3], g: &CellGeom) -> Result<(Mat2, f64)> {
    let Some(d) = d_f else {
        return Ok(([[1.0, 0.0], [0.0, 1.0]], 1.0));
    };
    let b = Basis::tri(d.space().order(), bary, g);
    let (_, h) = eval_field(d, c, &b);
    let (a, j) = adj_det(&h);
    if j <= INVERSION_LIMIT {
        return Err(FsiError::InvertedElement { cell: d.space().cell_entity(c), jacobian: j });
    }
    Ok((a, j))
}

/// Assembles `form` into an operator with rows indexed by `test` and columns by `trial`.
pub fn assemble(form: &Form, trial: &FeSpace, test: &FeSpace) -> Result<SparseOp> {
    if !std::sync::Arc::ptr_eq(trial.mesh(), test.mesh()) {
        return Err(FsiError::Invalid("trial and test spaces live on different meshes".into()));
    }
    if let Form::InterfaceMass { coef } = *form {
        return assemble_interface_mass(coef, trial, test);
    }
    if trial.domain() == Domain::Interface || trial.domain() != test.domain() {
        return Err(FsiError::Invalid(format!(
            "volume form needs trial and test on the same subdomain (got {} and {})",
            trial.descriptor(),
            test.descriptor()
        )));
    }
    let need = |vec_trial: Option<usize>, vec_test: Option<usize>| -> Result<()> {
        if vec_trial.is_some_and(|n| trial.comps() != n) || vec_test.is_some_and(|n| test.comps() != n) {
            return Err(FsiError::Invalid(format!(
                "form {form:?} is incompatible with spaces {} and {}",
                trial.descriptor(),
                test.descriptor()
            )));
        }
        Ok(())
    };
    let fluid = Domain::Fluid;
    match form {
        Form::Mass { .. } | Form::Stiffness { .. } => {
            if trial.comps() != test.comps() {
                need(Some(test.comps()), None)?;
            }
        }
        Form::Elasticity { .. } => need(Some(2), Some(2))?,
        Form::AleMass { d_f, .. } => {
            check_coef(d_f, fluid, 2, "mesh displacement")?;
            if trial.comps() != test.comps() {
                need(Some(test.comps()), None)?;
            }
        }
        Form::Viscous { d_f, .. } => {
            need(Some(2), Some(2))?;
            if let Some(d) = d_f {
                check_coef(d, fluid, 2, "mesh displacement")?;
            }
        }
        Form::Convection { advect, d_f, .. } => {
            need(Some(2), Some(2))?;
            check_coef(advect, trial.domain(), 2, "advecting velocity")?;
            if let Some(d) = d_f {
                check_coef(d, fluid, 2, "mesh displacement")?;
            }
        }
        Form::Divergence { d_f } => {
            need(Some(2), Some(1))?;
            if let Some(d) = d_f {
                check_coef(d, fluid, 2, "mesh displacement")?;
            }
        }
        Form::PressureGradient { d_f } => {
            need(Some(1), Some(2))?;
            if let Some(d) = d_f {
                check_coef(d, fluid, 2, "mesh displacement")?;
            }
        }
        Form::ScaledLaplacian { d_f_lag } => {
            if trial.comps() != test.comps() {
                need(Some(test.comps()), None)?;
            }
            if let Some(d) = d_f_lag {
                check_coef(d, fluid, 2, "lagged mesh displacement")?;
            }
        }
        Form::PressurePoisson { d_f } => {
            need(Some(1), Some(1))?;
            if let Some(d) = d_f {
                check_coef(d, fluid, 2, "mesh displacement")?;
            }
        }
        Form::InterfaceMass { .. } => unreachable!(),
    }

    let (tc, sc) = (trial.comps(), test.comps());
    let mut trip = Triplets::new(test.n_dofs(), trial.n_dofs());
    let nt = trial.n_local() * tc;
    let ns = test.n_local() * sc;
    let mut local = vec![0.0; nt * ns];
    for c in 0..trial.n_cells() {
        let g = trial.cell_geom(c);
        local.iter_mut().for_each(|x| *x = 0.0);
        for qp in TRI_DEG4.iter() {
            let w = qp.weight * g.area;
            let bt = Basis::tri(trial.order(), qp.bary, &g);
            let bs = Basis::tri(test.order(), qp.bary, &g);
            let d_f = match form {
                Form::AleMass { d_f, .. } => Some(*d_f),
                Form::Viscous { d_f, .. }
                | Form::Convection { d_f, .. }
                | Form::Divergence { d_f }
                | Form::PressureGradient { d_f }
                | Form::PressurePoisson { d_f } => *d_f,
                Form::ScaledLaplacian { d_f_lag } => *d_f_lag,
                _ => None,
            };
            let (am, jac) = kin(d_f, c, qp.bary, &g)?;
            let ale = d_f.is_some();
            let adv = match form {
                Form::Convection { advect, .. } => {
                    let ba = Basis::tri(advect.space().order(), qp.bary, &g);
                    eval_field(advect, c, &ba).0
                }
                _ => [0.0; 2],
            };
            for i in 0..bt.n {
                for a in 0..tc {
                    for k in 0..bs.n {
                        for b in 0..sc {
                            let gi = bt.grads[i];
                            let gk = bs.grads[k];
                            let same = if tc == sc { a == b } else { true };
                            let val = match *form {
                                Form::Mass { coef } => {
                                    if same {
                                        coef * bt.vals[i] * bs.vals[k]
                                    } else {
                                        0.0
                                    }
                                }
                                Form::Stiffness { coef } => {
                                    if same {
                                        coef * (gi[0] * gk[0] + gi[1] * gk[1])
                                    } else {
                                        0.0
                                    }
                                }
                                Form::Elasticity { mu, lambda } => {
                                    let dot = if a == b { gi[0] * gk[0] + gi[1] * gk[1] } else { 0.0 };
                                    mu * dot + mu * gi[b] * gk[a] + lambda * gi[a] * gk[b]
                                }
                                Form::AleMass { rho, .. } => {
                                    if same {
                                        rho * jac * bt.vals[i] * bs.vals[k]
                                    } else {
                                        0.0
                                    }
                                }
                                Form::Viscous { rho_nu, .. } => {
                                    if ale {
                                        let mut gm = [[0.0; 2]; 2];
                                        gm[a] = gi;
                                        let m = viscous_flux(&gm, &am, jac, rho_nu);
                                        m[b][0] * gk[0] + m[b][1] * gk[1]
                                    } else {
                                        let dot = if a == b { gi[0] * gk[0] + gi[1] * gk[1] } else { 0.0 };
                                        rho_nu * (dot + gi[b] * gk[a])
                                    }
                                }
                                Form::Convection { rho, .. } => {
                                    if a != b {
                                        0.0
                                    } else if ale {
                                        let aa = [
                                            am[0][0] * adv[0] + am[0][1] * adv[1],
                                            am[1][0] * adv[0] + am[1][1] * adv[1],
                                        ];
                                        rho * (gi[0] * aa[0] + gi[1] * aa[1]) * bs.vals[k]
                                    } else {
                                        rho * (adv[0] * gi[0] + adv[1] * gi[1]) * bs.vals[k]
                                    }
                                }
                                Form::Divergence { .. } => {
                                    if ale {
                                        -bs.vals[k] * (gi[0] * am[0][a] + gi[1] * am[1][a])
                                    } else {
                                        -bs.vals[k] * gi[a]
                                    }
                                }
                                Form::PressureGradient { .. } => {
                                    if ale {
                                        (am[0][b] * gi[0] + am[1][b] * gi[1]) * bs.vals[k]
                                    } else {
                                        gi[b] * bs.vals[k]
                                    }
                                }
                                Form::ScaledLaplacian { .. } => {
                                    if same {
                                        (gi[0] * gk[0] + gi[1] * gk[1]) / jac
                                    } else {
                                        0.0
                                    }
                                }
                                Form::PressurePoisson { .. } => {
                                    if ale {
                                        let ti = [am[0][0] * gi[0] + am[1][0] * gi[1], am[0][1] * gi[0] + am[1][1] * gi[1]];
                                        let tk = [am[0][0] * gk[0] + am[1][0] * gk[1], am[0][1] * gk[0] + am[1][1] * gk[1]];
                                        (ti[0] * tk[0] + ti[1] * tk[1]) / jac
                                    } else {
                                        gi[0] * gk[0] + gi[1] * gk[1]
                                    }
                                }
                                Form::InterfaceMass { .. } => unreachable!(),
                            };
                            local[(sc * k + b) * nt + tc * i + a] += w * val;
                        }
                    }
                }
            }
        }
        let td = trial.cell_dofs(c);
        let sd = test.cell_dofs(c);
        for k in 0..test.n_local() {
            for b in 0..sc {
                let row = sc * sd[k] + b;
                for i in 0..trial.n_local() {
                    for a in 0..tc {
                        let v = local[(sc * k + b) * nt + tc * i + a];
                        if v != 0.0 {
                            trip.push(row, tc * td[i] + a, v);
                        }
                    }
                }
            }
        }
    }
    let _ = ns;
    Ok(trip.to_op())
}

/// `J sigma_visc F^-T = rho_nu (G A + A^T G^T) A^T / J` for `G = grad u`, `A = adj F`.
pub fn viscous_flux(g: &Mat2, a: &Mat2, j: f64, rho_nu: f64) -> Mat2 {
    let ga = mul(g, a);
    let s = [[ga[0][0] + ga[0][0], ga[0][1] + ga[1][0]], [ga[1][0] + ga[0][1], ga[1][1] + ga[1][1]]];
    let at = transpose(a);
    let m = mul(&s, &at);
    let f = rho_nu / j;
    [[f * m[0][0], f * m[0][1]], [f * m[1][0], f * m[1][1]]]
}

pub fn mul(x: &Mat2, y: &Mat2) -> Mat2 {
    let mut r = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    r
}

pub fn transpose(x: &Mat2) -> Mat2 {
    [[x[0][0], x[1][0]], [x[0][1], x[1][1]]]
}

/// One quadrature point on an interface edge.
#[derive(Debug, Clone, Copy)]
pub struct EdgeQp {
    /// Edge parameter from `nodes[0]` to `nodes[1]`.
    pub t: f64,
    pub point: Point,
    /// Weight including the edge length.
    pub weight: f64,
    /// Unit normal pointing out of the fluid cell.
    pub n_f: [f64; 2],
}

/// Quadrature points on boundary edge `[a, b]` of triangle `cell`, with outward normal.
pub fn edge_qps(mesh: &Mesh, nodes: [usize; 2], cell: usize) -> [EdgeQp; 3] {
    let [pa, pb] = nodes.map(|i| mesh.nodes()[i]);
    let tau = [pb[0] - pa[0], pb[1] - pa[1]];
    let len = (tau[0] * tau[0] + tau[1] * tau[1]).sqrt();
    let mut n = [tau[1] / len, -tau[0] / len];
    let tri = mesh.triangle_points(cell);
    let cen = [(tri[0][0] + tri[1][0] + tri[2][0]) / 3.0, (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0];
    if (cen[0] - pa[0]) * n[0] + (cen[1] - pa[1]) * n[1] > 0.0 {
        n = [-n[0], -n[1]];
    }
    edge_gauss3().map(|(t, w)| EdgeQp {
        t,
        point: [pa[0] + t * tau[0], pa[1] + t * tau[1]],
        weight: w * len,
        n_f: n,
    })
}

/// Local cell and basis of `space` at an interface quadrature point.
pub fn trace_basis(space: &FeSpace, pos: usize, ie: &InterfaceEdge, qp: &EdgeQp) -> Result<(usize, Basis)> {
    match space.domain() {
        Domain::Interface => Ok((pos, Basis::edge(space.order(), qp.t))),
        Domain::Fluid | Domain::Solid => {
            let tri = if space.domain() == Domain::Fluid { ie.fluid_cell } else { ie.solid_cell };
            let c = space
                .cell_of_entity(tri)
                .ok_or_else(|| FsiError::Invalid("interface cell missing from space".into()))?;
            let g = space.cell_geom(c);
            let mut bary = g.bary(qp.point);
            // Snap the coordinate of the vertex opposite the edge to exactly zero.
            let [na, nb] = ie.nodes;
            let nodes = space.mesh().triangles()[tri].nodes;
            for (k, &n) in nodes.iter().enumerate() {
                if n != na && n != nb {
                    bary[k] = 0.0;
                }
            }
            Ok((c, Basis::tri(space.order(), bary, &g)))
        }
    }
}

fn assemble_interface_mass(coef: f64, trial: &FeSpace, test: &FeSpace) -> Result<SparseOp> {
    if trial.comps() != test.comps() {
        return Err(FsiError::Invalid("interface mass needs equal component counts".into()));
    }
    let nc = trial.comps();
    let mesh = trial.mesh();
    let mut trip = Triplets::new(test.n_dofs(), trial.n_dofs());
    for (pos, ie) in mesh.interface_edges().iter().enumerate() {
        for qp in edge_qps(mesh, ie.nodes, ie.fluid_cell) {
            let (ct, bt) = trace_basis(trial, pos, ie, &qp)?;
            let (cs, bs) = trace_basis(test, pos, ie, &qp)?;
            let td = trial.cell_dofs(ct);
            let sd = test.cell_dofs(cs);
            for k in 0..bs.n {
                for i in 0..bt.n {
                    let v = coef * qp.weight * bt.vals[i] * bs.vals[k];
                    if v == 0.0 {
                        continue;
                    }
                    for a in 0..nc {
                        trip.push(nc * sd[k] + a, nc * td[i] + a, v);
                    }
                }
            }
        }
    }
    Ok(trip.to_op())
}
