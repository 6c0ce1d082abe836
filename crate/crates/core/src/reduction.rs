//! Inner products, snapshot sets and POD bases.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::ale::HarmonicExtension;
use crate::error::{FsiError, Result};
use crate::fem::field::{axpy, dot};
use crate::fem::{assemble, Domain, FeSpace, FieldVec, Form, SparseOp};

/// Eigenvalues at or below this fraction of the largest are discarded.
pub const EIGEN_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    H1Seminorm,
    L2Volume,
    L2Interface,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::H1Seminorm => "h1_seminorm",
            NormKind::L2Volume => "l2",
            NormKind::L2Interface => "l2_interface",
        }
    }
}

/// Symmetric positive semidefinite Gram operator `X` of a field norm.
#[derive(Debug, Clone)]
pub struct InnerProduct {
    pub kind: NormKind,
    space: Arc<FeSpace>,
    pub matrix: SparseOp,
}

impl InnerProduct {
    pub fn new(space: &Arc<FeSpace>, kind: NormKind) -> Result<Self> {
        let form = match (kind, space.domain()) {
            (NormKind::H1Seminorm, Domain::Fluid | Domain::Solid) => Form::Stiffness { coef: 1.0 },
            (NormKind::L2Volume, Domain::Fluid | Domain::Solid) => Form::Mass { coef: 1.0 },
            (NormKind::L2Interface, _) => Form::InterfaceMass { coef: 1.0 },
            _ => {
                return Err(FsiError::Invalid(format!("norm {} on space {}", kind.as_str(), space.descriptor())));
            }
        };
        Ok(InnerProduct { kind, space: space.clone(), matrix: assemble(&form, space, space)? })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.matrix.inner(a, b)
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }
}

/// Ordered snapshot columns of one field.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub name: String,
    space: Arc<FeSpace>,
    pub columns: Vec<Vec<f64>>,
}

impl SnapshotSet {
    pub fn new(name: &str, space: &Arc<FeSpace>) -> Self {
        SnapshotSet { name: name.to_string(), space: space.clone(), columns: Vec::new() }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn push(&mut self, col: Vec<f64>) -> Result<()> {
        if col.len() != self.space.n_dofs() {
            return Err(FsiError::Dimension(format!(
                "snapshot of length {} for field {} with {} DOFs",
                col.len(),
                self.name,
                self.space.n_dofs()
            )));
        }
        self.columns.push(col);
        Ok(())
    }

    /// Caller guarantees the length.
    pub(crate) fn push_unchecked(&mut self, col: Vec<f64>) {
        debug_assert_eq!(col.len(), self.space.n_dofs());
        self.columns.push(col);
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, i: usize) -> Result<FieldVec> {
        FieldVec::from_values(&self.space, self.columns[i].clone())
    }
}

/// X-orthonormal modes with the eigenvalues they came from (descending).
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    pub name: String,
    space: Arc<FeSpace>,
    pub modes: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl ReducedBasis {
    pub fn new(name: &str, space: &Arc<FeSpace>, modes: Vec<Vec<f64>>, eigenvalues: Vec<f64>) -> Result<Self> {
        if let Some(m) = modes.iter().find(|m| m.len() != space.n_dofs()) {
            return Err(FsiError::Dimension(format!("mode of length {} on a {}-DOF space", m.len(), space.n_dofs())));
        }
        Ok(ReducedBasis { name: name.to_string(), space: space.clone(), modes, eigenvalues })
    }

    pub fn empty(name: &str, space: &Arc<FeSpace>) -> Self {
        ReducedBasis { name: name.to_string(), space: space.clone(), modes: Vec::new(), eigenvalues: Vec::new() }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.modes.len()
    }

    /// First `n` modes (all if fewer are available).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n());
        ReducedBasis {
            name: self.name.clone(),
            space: self.space.clone(),
            modes: self.modes[..n].to_vec(),
            eigenvalues: self.eigenvalues.clone(),
        }
    }

    /// Coefficients `Phi^T X x`.
    pub fn project(&self, x: &[f64], ip: &InnerProduct) -> Vec<f64> {
        let xx = ip.matrix.mul_vec(x);
        self.modes.iter().map(|m| dot(m, &xx)).collect()
    }

    /// `Phi c`.
    pub fn expand(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.space.n_dofs()];
        for (m, &ck) in self.modes.iter().zip(c) {
            axpy(ck, m, &mut out);
        }
        out
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self, ip: &InnerProduct) -> f64 {
        let xm: Vec<Vec<f64>> = self.modes.iter().map(|m| ip.matrix.mul_vec(m)).collect();
        let mut worst: f64 = 0.0;
        for (i, a) in self.modes.iter().enumerate() {
            for (j, xb) in xm.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, xb) - target).abs());
            }
        }
        worst
    }
}

/// `C = S^T X S`.
pub fn correlation_matrix(s: &SnapshotSet, ip: &InnerProduct) -> Result<DMatrix<f64>> {
    if s.is_empty() {
        return Err(FsiError::Invalid(format!("empty snapshot set {}", s.name)));
    }
    let xs: Vec<Vec<f64>> = s.columns.iter().map(|c| ip.matrix.mul_vec(c)).collect();
    let m = s.len();
    let mut c = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            // Symmetrized to remove roundoff asymmetry.
            let v = 0.5 * (dot(&s.columns[i], &xs[j]) + dot(&s.columns[j], &xs[i]));
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PodSelect {
    All,
    Count(usize),
    /// Smallest N with retained energy at least this fraction.
    Energy(f64),
}

/// Proper orthogonal decomposition by the method of snapshots.
pub fn pod(s: &SnapshotSet, ip: &InnerProduct, select: PodSelect) -> Result<ReducedBasis> {
    let c = correlation_matrix(s, ip)?;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let lmax = eigenvalues.first().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return Ok(ReducedBasis { name: s.name.clone(), space: s.space.clone(), modes: vec![], eigenvalues });
    }
    let usable = eigenvalues.iter().take_while(|&&l| l > EIGEN_CUTOFF * lmax).count();
    let n = match select {
        PodSelect::All => usable,
        PodSelect::Count(n) => n.min(usable),
        PodSelect::Energy(frac) => {
            let mut n = usable;
            for k in 1..=usable {
                if retained_energy(&eigenvalues, k)? >= frac {
                    n = k;
                    break;
                }
            }
            n
        }
    };
    let mut modes = Vec::with_capacity(n);
    for &k in order.iter().take(n) {
        let v = eig.eigenvectors.column(k);
        let mut m = vec![0.0; s.space.n_dofs()];
        for (j, col) in s.columns.iter().enumerate() {
            axpy(v[j], col, &mut m);
        }
        let scale = 1.0 / eig.eigenvalues[k].sqrt();
        m.iter_mut().for_each(|x| *x *= scale);
        modes.push(m);
    }
    // The method of snapshots loses orthogonality in the weak modes; restore it.
    let modes = gram_schmidt(modes, ip, 1e-8).0;
    Ok(ReducedBasis { name: s.name.clone(), space: s.space.clone(), modes, eigenvalues })
}

/// `E_N = sum_{k<=N} |l_k| / sum |l_k|`.
pub fn retained_energy(eigenvalues: &[f64], n: usize) -> Result<f64> {
    if eigenvalues.is_empty() {
        return Err(FsiError::Invalid("retained energy of an empty spectrum".into()));
    }
    if n > eigenvalues.len() {
        return Err(FsiError::Invalid(format!("N = {n} exceeds {} eigenvalues", eigenvalues.len())));
    }
    let total: f64 = eigenvalues.iter().map(|l| l.abs()).sum();
    if total == 0.0 {
        return Ok(1.0);
    }
    let part: f64 = eigenvalues[..n].iter().map(|l| l.abs()).sum();
    Ok(part / total)
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. A vector whose norm falls below
/// `rank_tol` times its original norm is dropped; returns kept vectors and dropped indices.
pub fn gram_schmidt(vs: Vec<Vec<f64>>, ip: &InnerProduct, rank_tol: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    let mut xout: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    let mut dropped = Vec::new();
    for (i, mut v) in vs.into_iter().enumerate() {
        let n0 = ip.norm(&v);
        if n0 == 0.0 || !n0.is_finite() {
            dropped.push(i);
            continue;
        }
        for _pass in 0..2 {
            for (q, xq) in out.iter().zip(&xout) {
                let c = dot(&v, xq);
                axpy(-c, q, &mut v);
            }
        }
        let n1 = ip.norm(&v);
        if n1 <= rank_tol * n0 {
            dropped.push(i);
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n1);
        xout.push(ip.matrix.mul_vec(&v));
        out.push(v);
    }
    (out, dropped)
}

/// Velocity modes followed by supremizer modes, X-orthonormalized. Dependent supremizers are
/// dropped with a warning.
pub fn build_monolithic_velocity_basis(u0: &ReducedBasis, sup: &ReducedBasis, ip: &InnerProduct) -> Result<ReducedBasis> {
    if !u0.space.same_as(&sup.space) || !u0.space.same_as(ip.space()) {
        return Err(FsiError::Invalid("velocity and supremizer bases live on different spaces".into()));
    }
    if sup.n() == 0 {
        return Ok(u0.clone());
    }
    let all: Vec<Vec<f64>> = u0.modes.iter().chain(&sup.modes).cloned().collect();
    let (modes, dropped) = gram_schmidt(all, ip, EIGEN_CUTOFF);
    if !dropped.is_empty() {
        log::warn!("velocity basis: dropped {} linearly dependent modes", dropped.len());
    }
    let mut eig = u0.eigenvalues.clone();
    eig.extend(&sup.eigenvalues);
    ReducedBasis::new(&u0.name, &u0.space, modes, eig)
}

/// Plain harmonic extension of every solid mode into the fluid mesh.
pub fn extend_solid_modes(ds: &ReducedBasis, ext: &HarmonicExtension) -> Result<ReducedBasis> {
    let mut modes = Vec::with_capacity(ds.n());
    for m in &ds.modes {
        let f = FieldVec::from_values(&ds.space, m.clone())?;
        modes.push(ext.apply(&f)?.values);
    }
    ReducedBasis::new("d_f", ext.space(), modes, ds.eigenvalues.clone())
}

/// `z = u0 - (d_next - d_prev) / dt`, with `d_f` sharing the velocity space.
pub fn change_of_variable_z(u0: &FieldVec, d_next: &FieldVec, d_prev: &FieldVec, dt: f64) -> Result<FieldVec> {
    if !u0.space().same_as(d_next.space()) || !u0.space().same_as(d_prev.space()) {
        return Err(FsiError::Invalid("z needs velocity and mesh displacement on one space".into()));
    }
    let values = (0..u0.len()).map(|i| u0.values[i] - (d_next.values[i] - d_prev.values[i]) / dt).collect();
    FieldVec::from_values(u0.space(), values)
}
