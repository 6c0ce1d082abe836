//! Pointwise ALE kinematics, stress evaluations and harmonic mesh extensions.

use std::sync::Arc;

use crate::error::{FsiError, Result};
use crate::fem::forms::{adj_det, eval_field, mul, transpose, Basis, Mat2, INVERSION_LIMIT};
use crate::fem::quadrature::TRI_DEG4;
use crate::fem::sparse::{LuCache, SparseLu};
use crate::fem::{apply_dirichlet, assemble, DirichletSet, Domain, FeSpace, FieldVec, Form};
use crate::mesh::BoundaryTag;

/// Map gradient `F = I + grad d_f` at one point, with `J = det F > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AleKinematics {
    pub f: Mat2,
    pub j: f64,
    pub f_inv: Mat2,
    pub f_inv_t: Mat2,
}

impl AleKinematics {
    pub fn identity() -> Self {
        let i = [[1.0, 0.0], [0.0, 1.0]];
        AleKinematics { f: i, j: 1.0, f_inv: i, f_inv_t: i }
    }

    /// From the displacement gradient `H`; `cell` only labels the error.
    pub fn from_grad(h: &Mat2, cell: usize) -> Result<Self> {
        let (adj, j) = adj_det(h);
        if j <= INVERSION_LIMIT || !j.is_finite() {
            return Err(FsiError::InvertedElement { cell, jacobian: j });
        }
        let f = [[1.0 + h[0][0], h[0][1]], [h[1][0], 1.0 + h[1][1]]];
        let f_inv = [[adj[0][0] / j, adj[0][1] / j], [adj[1][0] / j, adj[1][1] / j]];
        Ok(AleKinematics { f, j, f_inv, f_inv_t: transpose(&f_inv) })
    }

    /// `J F^-1`.
    pub fn adj(&self) -> Mat2 {
        let j = self.j;
        [[j * self.f_inv[0][0], j * self.f_inv[0][1]], [j * self.f_inv[1][0], j * self.f_inv[1][1]]]
    }

    /// `J A F^-T` for a matrix `A`.
    pub fn piola_map(&self, a: &Mat2) -> Mat2 {
        let m = mul(a, &self.f_inv_t);
        [[self.j * m[0][0], self.j * m[0][1]], [self.j * m[1][0], self.j * m[1][1]]]
    }
}

/// Kinematics of `d_f` in local cell `cell` at barycentric point `bary`.
pub fn deformation_gradient(d_f: &FieldVec, cell: usize, bary: [f64; 3]) -> Result<AleKinematics> {
    let sp = d_f.space();
    if sp.domain() != Domain::Fluid || sp.comps() != 2 {
        return Err(FsiError::Invalid(format!("mesh displacement on space {}", sp.descriptor())));
    }
    if cell >= sp.n_cells() {
        return Err(FsiError::Dimension(format!("cell {cell} of {}", sp.n_cells())));
    }
    let g = sp.cell_geom(cell);
    let b = Basis::tri(sp.order(), bary, &g);
    let (_, h) = eval_field(d_f, cell, &b);
    AleKinematics::from_grad(&h, sp.cell_entity(cell))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StressPart {
    Viscous,
    Full,
}

/// Fluid Cauchy stress `rho nu (grad u F^-1 + F^-T grad u^T) - p I` in the reference
/// configuration; `grad_u` is the reference gradient.
pub fn fluid_stress(grad_u: &Mat2, p: f64, kin: &AleKinematics, rho_f: f64, nu_f: f64, part: StressPart) -> Mat2 {
    let g = mul(grad_u, &kin.f_inv);
    let mut s = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            s[a][b] = rho_f * nu_f * (g[a][b] + g[b][a]);
        }
    }
    if part == StressPart::Full {
        s[0][0] -= p;
        s[1][1] -= p;
    }
    s
}

/// Linear Piola stress `2 mu eps + lambda tr(eps) I`.
pub fn piola_stress(grad_d: &Mat2, mu: f64, lambda: f64) -> Mat2 {
    let e01 = 0.5 * (grad_d[0][1] + grad_d[1][0]);
    let tr = grad_d[0][0] + grad_d[1][1];
    [[2.0 * mu * grad_d[0][0] + lambda * tr, 2.0 * mu * e01], [2.0 * mu * e01, 2.0 * mu * grad_d[1][1] + lambda * tr]]
}

/// Extension operator coefficient.
#[derive(Debug, Clone, Copy)]
pub enum ExtensionMode<'a> {
    /// `-div(grad d) = 0`.
    Plain,
    /// `-div(1/J grad d) = 0` with `J` from a given (lagged) displacement.
    Scaled { d_f_lag: &'a FieldVec },
}

/// Harmonic extension into the fluid mesh of interface data, with zero data on every other
/// fluid boundary. The plain operator is factorized once and reused.
#[derive(Debug)]
pub struct HarmonicExtension {
    space: Arc<FeSpace>,
    lu: SparseLu,
    bc: DirichletSet,
    fsi: Vec<usize>,
}

impl HarmonicExtension {
    pub fn new(space: &Arc<FeSpace>, mode: ExtensionMode) -> Result<Self> {
        if space.domain() != Domain::Fluid || space.comps() != 2 {
            return Err(FsiError::Invalid(format!("extension into space {}", space.descriptor())));
        }
        let form = match mode {
            ExtensionMode::Plain => Form::Stiffness { coef: 1.0 },
            ExtensionMode::Scaled { d_f_lag } => Form::ScaledLaplacian { d_f_lag: Some(d_f_lag) },
        };
        let k = assemble(&form, space, space)?;
        let fsi = space.dofs_on(BoundaryTag::FsiInterface);
        let outer = DirichletSet::zero_on(space, &[BoundaryTag::Inlet, BoundaryTag::Walls, BoundaryTag::Outlet])?;
        let bc = DirichletSet { dofs: fsi.clone(), values: vec![0.0; fsi.len()] }.merge(outer);
        let mut rhs = vec![0.0; space.n_dofs()];
        let a = apply_dirichlet(&k, &mut rhs, &bc)?;
        let lu = LuCache::default().factor(&a)?;
        Ok(HarmonicExtension { space: space.clone(), lu, bc, fsi })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    /// Extends the interface trace of `data`, a vector field on the solid or interface space.
    pub fn apply(&self, data: &FieldVec) -> Result<FieldVec> {
        let trace = interface_trace(&self.space, data)?;
        self.apply_trace(&trace)
    }

    /// Extends values given on the fluid-space interface DOFs (as returned by [`interface_trace`]).
    pub fn apply_trace(&self, trace: &[(usize, f64)]) -> Result<FieldVec> {
        let mut rhs = vec![0.0; self.space.n_dofs()];
        let mut bc = self.bc.clone();
        // Interface values take precedence over the zero data of the outer boundary,
        // except where both meet (the clamped bar root) and the data must already vanish.
        let mask = {
            let mut m = vec![false; rhs.len()];
            for &d in &self.fsi {
                m[d] = true;
            }
            m
        };
        for &(d, v) in trace {
            if mask[d] {
                if let Ok(k) = bc.dofs.binary_search(&d) {
                    bc.values[k] = v;
                }
            }
        }
        bc.impose(&mut rhs);
        let mut x = self.lu.solve(&rhs)?;
        bc.impose(&mut x);
        FieldVec::from_values(&self.space, x)
    }
}

/// Fluid-space interface DOFs paired with the values of `data` (a vector field on the solid
/// or interface space) at the same Lagrange nodes.
pub fn interface_trace(fluid: &FeSpace, data: &FieldVec) -> Result<Vec<(usize, f64)>> {
    let ds = data.space();
    if ds.comps() != fluid.comps() || ds.domain() == Domain::Fluid {
        return Err(FsiError::Invalid(format!("interface data on space {}", ds.descriptor())));
    }
    let fsi: std::collections::BTreeSet<usize> = fluid.scalar_dofs_on(BoundaryTag::FsiInterface).into_iter().collect();
    let nc = fluid.comps();
    let mut out = Vec::new();
    for (fd, od) in fluid.shared_scalar_dofs(ds) {
        if fsi.contains(&fd) {
            for c in 0..nc {
                out.push((nc * fd + c, data.values[nc * od + c]));
            }
        }
    }
    if out.len() != nc * fsi.len() {
        return Err(FsiError::Invalid(format!(
            "interface data covers {} of {} interface DOFs (order mismatch?)",
            out.len() / nc,
            fsi.len()
        )));
    }
    Ok(out)
}

/// Plain or scaled harmonic extension of the interface trace of `data`.
pub fn harmonic_extension(space: &Arc<FeSpace>, data: &FieldVec, mode: ExtensionMode) -> Result<FieldVec> {
    HarmonicExtension::new(space, mode)?.apply(data)
}

/// Largest change of `J` over all quadrature points between two mesh displacements.
/// Returns the offending cell and change.
pub fn max_jacobian_change(d_old: &FieldVec, d_new: &FieldVec) -> Result<(usize, f64)> {
    let sp = d_new.space();
    let mut worst = (0, 0.0);
    for c in 0..sp.n_cells() {
        for qp in TRI_DEG4.iter() {
            let j_new = deformation_gradient(d_new, c, qp.bary)?.j;
            let j_old = deformation_gradient(d_old, c, qp.bary)?.j;
            let delta = (j_new - j_old).abs();
            if delta > worst.1 {
                worst = (sp.cell_entity(c), delta);
            }
        }
    }
    Ok(worst)
}

pub const MAX_JACOBIAN_CHANGE: f64 = 0.5;

/// Rejects a step whose cell-wise `|dJ|` reaches [`MAX_JACOBIAN_CHANGE`].
pub fn check_distortion(d_old: &FieldVec, d_new: &FieldVec) -> Result<()> {
    let (cell, delta) = max_jacobian_change(d_old, d_new)?;
    if delta >= MAX_JACOBIAN_CHANGE {
        return Err(FsiError::MeshDistortion { cell, delta });
    }
    Ok(())
}
