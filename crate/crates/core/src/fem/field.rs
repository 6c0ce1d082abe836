use std::sync::Arc;

use super::space::FeSpace;
use crate::error::{FsiError, Result};

/// Coefficient vector over a space, optionally stamped with a time-step index.
#[derive(Debug, Clone)]
pub struct FieldVec {
    space: Arc<FeSpace>,
    pub values: Vec<f64>,
    pub step: Option<usize>,
}

impl FieldVec {
    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        FieldVec { space: space.clone(), values: vec![0.0; space.n_dofs()], step: None }
    }

    pub fn from_values(space: &Arc<FeSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n_dofs() {
            return Err(FsiError::Dimension(format!(
                "{} values for a space with {} DOFs",
                values.len(),
                space.n_dofs()
            )));
        }
        Ok(FieldVec { space: space.clone(), values, step: None })
    }

    pub fn with_step(mut self, step: usize) -> Self {
        self.step = Some(step);
        self
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Values of the scalar basis functions of cell `c`, gathered component-interleaved.
    pub fn gather(&self, c: usize, out: &mut [f64]) {
        let nc = self.space.comps();
        for (i, &s) in self.space.cell_dofs(c).iter().enumerate() {
            for k in 0..nc {
                out[nc * i + k] = self.values[nc * s + k];
            }
        }
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Elementwise `a * x + b * y`.
pub fn lincomb(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()
}
