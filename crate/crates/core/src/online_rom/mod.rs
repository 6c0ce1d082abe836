//! Galerkin reduced-order stepping for both offline schemes. Nonlinear ALE terms are
//! reassembled at full order every iteration and projected onto the bases.

mod monolithic;
mod partitioned;

use std::fmt::Write as _;

use crate::error::{FsiError, Result};
use crate::fem::field::dot;
use crate::fem::{FieldVec, SparseOp, Triplets};
use crate::reduction::{InnerProduct, ReducedBasis};

pub use monolithic::{monolithic_norm, MonoSizes, MonolithicBases, MonolithicRom, MonolithicRomState, RomRun, RomStepReport};
pub use partitioned::{PartSizes, PartitionedBases, PartitionedRom, PartitionedRomRun, PartitionedRomState};

/// `Phi^T X l`: coefficients of the X-orthogonal projection of `lift`.
pub fn project_lifting(lift: &FieldVec, basis: &ReducedBasis, ip: &InnerProduct) -> Result<Vec<f64>> {
    if !lift.space().same_as(basis.space()) || !ip.space().same_as(basis.space()) {
        return Err(FsiError::Invalid("lifting, basis and inner product live on different spaces".into()));
    }
    Ok(basis.project(&lift.values, ip))
}

/// `sum_k c_k phi_k`, plus the lifting when given.
pub fn reconstruct_field(coeffs: &[f64], basis: &ReducedBasis, lifting: Option<&FieldVec>) -> Result<FieldVec> {
    if coeffs.len() != basis.n() {
        return Err(FsiError::Dimension(format!("{} coefficients for {} modes of {}", coeffs.len(), basis.n(), basis.name)));
    }
    let mut v = basis.expand(coeffs);
    if let Some(l) = lifting {
        if !l.space().same_as(basis.space()) {
            return Err(FsiError::Invalid("lifting and basis live on different spaces".into()));
        }
        v.iter_mut().zip(&l.values).for_each(|(a, b)| *a += b);
    }
    FieldVec::from_values(basis.space(), v)
}

/// Block-diagonal trial/test map between reduced coefficients and a stacked full vector.
#[derive(Debug, Clone)]
pub(crate) struct BlockMap {
    n_full: usize,
    /// `(full offset, modes)` per block, in reduced order.
    blocks: Vec<(usize, Vec<Vec<f64>>)>,
}

impl BlockMap {
    pub fn new(n_full: usize, blocks: Vec<(usize, Vec<Vec<f64>>)>) -> Self {
        BlockMap { n_full, blocks }
    }

    pub fn n_reduced(&self) -> usize {
        self.blocks.iter().map(|b| b.1.len()).sum()
    }

    /// Reduced offsets of every block plus the total.
    pub fn offsets(&self) -> Vec<usize> {
        let mut o = vec![0];
        for b in &self.blocks {
            o.push(o.last().unwrap() + b.1.len());
        }
        o
    }

    /// `shift + Phi c`.
    pub fn expand(&self, c: &[f64], shift: &[f64]) -> Vec<f64> {
        let mut x = shift.to_vec();
        let mut k = 0;
        for (off, modes) in &self.blocks {
            for m in modes {
                let ck = c[k];
                k += 1;
                if ck != 0.0 {
                    for (i, v) in m.iter().enumerate() {
                        x[off + i] += ck * v;
                    }
                }
            }
        }
        x
    }

    /// `Phi^T r`.
    pub fn restrict(&self, r: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_reduced());
        for (off, modes) in &self.blocks {
            for m in modes {
                out.push(dot(m, &r[*off..off + m.len()]));
            }
        }
        out
    }

    /// Dense `Phi^T J Phi` stored as a sparse operator with a full pattern, so the symbolic
    /// factorization is reused across iterations.
    pub fn galerkin(&self, j: &SparseOp) -> SparseOp {
        let n = self.n_reduced();
        let mut t = Triplets::new(n, n);
        let mut col = 0;
        for (off, modes) in &self.blocks {
            for m in modes {
                let mut e = vec![0.0; self.n_full];
                e[*off..off + m.len()].copy_from_slice(m);
                let jm = j.mul_vec(&e);
                for (row, v) in self.restrict(&jm).into_iter().enumerate() {
                    t.push(row, col, v);
                }
                col += 1;
            }
        }
        t.to_op()
    }
}

/// One coefficient record per row: `step,field,k,value`.
pub fn coefficients_csv(rows: &[(usize, &str, &[f64])]) -> String {
    let mut s = String::from("step,field,k,value\n");
    for (step, field, c) in rows {
        for (k, v) in c.iter().enumerate() {
            let _ = writeln!(s, "{step},{field},{k},{v:e}");
        }
    }
    s
}
