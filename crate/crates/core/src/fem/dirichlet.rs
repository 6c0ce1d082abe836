//! Strong Dirichlet conditions by identity-row replacement.

use super::space::FeSpace;
use super::sparse::{SparseOp, Triplets};
use crate::error::{FsiError, Result};
use crate::mesh::BoundaryTag;

/// Constrained DOFs with their prescribed values, sorted by DOF and duplicate-free.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirichletSet {
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
}

impl DirichletSet {
    /// Every component on the edges tagged `tag`, prescribed by `f(point, comp)`.
    /// Fails if the tag has no DOFs in `space`.
    pub fn on_tag(space: &FeSpace, tag: BoundaryTag, f: impl Fn([f64; 2], usize) -> f64) -> Result<Self> {
        let scalars = space.scalar_dofs_on(tag);
        if scalars.is_empty() {
            return Err(FsiError::Invalid(format!("tag {tag} has no DOFs in space {}", space.descriptor())));
        }
        let nc = space.comps();
        let mut s = DirichletSet::default();
        for d in scalars {
            let p = space.dof_point(d);
            for c in 0..nc {
                s.dofs.push(nc * d + c);
                s.values.push(f(p, c));
            }
        }
        Ok(s)
    }

    pub fn zero_on(space: &FeSpace, tags: &[BoundaryTag]) -> Result<Self> {
        let mut s = DirichletSet::default();
        for &t in tags {
            s = s.merge(DirichletSet::on_tag(space, t, |_, _| 0.0)?);
        }
        Ok(s)
    }

    /// Union; on overlap the entries of `self` win.
    pub fn merge(self, other: DirichletSet) -> Self {
        let mut pairs: Vec<(usize, f64)> = self.dofs.into_iter().zip(self.values).collect();
        pairs.extend(other.dofs.into_iter().zip(other.values));
        pairs.sort_by_key(|p| p.0);
        pairs.dedup_by_key(|p| p.0);
        DirichletSet { dofs: pairs.iter().map(|p| p.0).collect(), values: pairs.iter().map(|p| p.1).collect() }
    }

    /// Shifts DOF indices by `offset` (placement inside a block system).
    pub fn shifted(&self, offset: usize) -> Self {
        DirichletSet { dofs: self.dofs.iter().map(|d| d + offset).collect(), values: self.values.clone() }
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &d in &self.dofs {
            m[d] = true;
        }
        m
    }

    /// Overwrites constrained entries of `x` with their prescribed values.
    pub fn impose(&self, x: &mut [f64]) {
        for (&d, &v) in self.dofs.iter().zip(&self.values) {
            x[d] = v;
        }
    }

    /// Zeroes constrained entries (homogeneous version, for Newton corrections).
    pub fn zero(&self, x: &mut [f64]) {
        for &d in &self.dofs {
            x[d] = 0.0;
        }
    }
}

/// Replaces constrained rows by identity rows and sets `rhs[d] = value`.
/// Applying the same set twice yields the same system.
pub fn apply_dirichlet(op: &SparseOp, rhs: &mut [f64], set: &DirichletSet) -> Result<SparseOp> {
    if op.nrows() != op.ncols() || rhs.len() != op.nrows() {
        return Err(FsiError::Dimension(format!(
            "Dirichlet on a {}x{} system with rhs {}",
            op.nrows(),
            op.ncols(),
            rhs.len()
        )));
    }
    if let Some(&d) = set.dofs.iter().find(|&&d| d >= op.nrows()) {
        return Err(FsiError::Dimension(format!("constrained DOF {d} outside a {}-system", op.nrows())));
    }
    let mask = set.mask(op.nrows());
    let mut t = Triplets::new(op.nrows(), op.ncols());
    for j in 0..op.ncols() {
        for k in op.col_ptr()[j]..op.col_ptr()[j + 1] {
            let r = op.row_idx()[k];
            if !mask[r] {
                t.push(r, j, op.values[k]);
            }
        }
    }
    for (&d, &v) in set.dofs.iter().zip(&set.values) {
        t.push(d, d, 1.0);
        rhs[d] = v;
    }
    Ok(t.to_op())
}
