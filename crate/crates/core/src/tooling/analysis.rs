//! Relative error series between full-order and reduced trajectories.

use crate::ale::piola_stress;
use crate::error::{FsiError, Result};
use crate::fem::forms::{edge_qps, eval_field, trace_basis};
use crate::fem::{Domain, FieldVec};
use crate::reduction::InnerProduct;

/// Reference norms below this are treated as zero and the step is skipped.
pub const ZERO_NORM: f64 = 1e-14;

/// Per-step relative errors of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    /// `(step, relative error)` for every step with a non-zero reference.
    pub series: Vec<(usize, f64)>,
    /// Steps dropped for a zero reference norm.
    pub skipped: usize,
}

impl FieldError {
    /// Mean of the series; zero when every step was skipped.
    pub fn average(&self) -> f64 {
        if self.series.is_empty() {
            0.0
        } else {
            self.series.iter().map(|s| s.1).sum::<f64>() / self.series.len() as f64
        }
    }

    pub fn max(&self) -> f64 {
        self.series.iter().map(|s| s.1).fold(0.0, f64::max)
    }
}

/// Interface stress error `|P(d_h) n - P(d_N) n|_{L2(G)}` per step.
#[derive(Debug, Clone, PartialEq)]
pub struct StressError {
    pub series: Vec<(usize, f64)>,
}

impl StressError {
    pub fn average(&self) -> f64 {
        if self.series.is_empty() {
            0.0
        } else {
            self.series.iter().map(|s| s.1).sum::<f64>() / self.series.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub fields: Vec<FieldError>,
    pub stress: Option<StressError>,
}

impl ErrorReport {
    pub fn field(&self, name: &str) -> Option<&FieldError> {
        self.fields.iter().find(|f| f.field == name)
    }
}

/// One field of twin trajectories, aligned by step index.
#[derive(Debug, Clone, Copy)]
pub struct SeriesPair<'a> {
    pub field: &'a str,
    pub steps: &'a [usize],
    pub fe: &'a [Vec<f64>],
    pub rom: &'a [Vec<f64>],
    pub norm: &'a InnerProduct,
}

/// `|fe - rom|_X / |fe|_X` at every step.
pub fn relative_errors(s: &SeriesPair) -> Result<FieldError> {
    if s.fe.len() != s.steps.len() || s.rom.len() != s.steps.len() {
        return Err(FsiError::Dimension(format!(
            "{}: {} steps, {} full-order and {} reduced states",
            s.field,
            s.steps.len(),
            s.fe.len(),
            s.rom.len()
        )));
    }
    let n = s.norm.space().n_dofs();
    let mut out = FieldError { field: s.field.to_string(), series: Vec::with_capacity(s.steps.len()), skipped: 0 };
    for ((&k, a), b) in s.steps.iter().zip(s.fe).zip(s.rom) {
        if a.len() != n || b.len() != n {
            return Err(FsiError::Dimension(format!("{} at step {k}: vectors of length {} and {}, norm on {n}", s.field, a.len(), b.len())));
        }
        let reference = s.norm.norm(a);
        if reference < ZERO_NORM {
            out.skipped += 1;
            continue;
        }
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        out.series.push((k, s.norm.norm(&d) / reference));
    }
    Ok(out)
}

/// `|P(d) n|_{L2(G)}` of a solid displacement with the linear Piola stress.
pub fn interface_stress_norm(d: &FieldVec, mu: f64, lambda: f64) -> Result<f64> {
    let sp = d.space();
    if sp.domain() != Domain::Solid || sp.comps() != 2 {
        return Err(FsiError::Invalid(format!("interface stress needs a solid vector field, got {}", sp.descriptor())));
    }
    let mesh = sp.mesh();
    let mut sum = 0.0;
    for (pos, ie) in mesh.interface_edges().iter().enumerate() {
        for qp in edge_qps(mesh, ie.nodes, ie.fluid_cell) {
            let (c, b) = trace_basis(sp, pos, ie, &qp)?;
            let (_, g) = eval_field(d, c, &b);
            let p = piola_stress(&g, mu, lambda);
            // The solid normal is opposite to the fluid one; the sign drops out of the norm.
            let t = [p[0][0] * qp.n_f[0] + p[0][1] * qp.n_f[1], p[1][0] * qp.n_f[0] + p[1][1] * qp.n_f[1]];
            sum += qp.weight * (t[0] * t[0] + t[1] * t[1]);
        }
    }
    Ok(sum.sqrt())
}

/// Absolute interface stress error at every aligned step.
pub fn interface_stress_errors(steps: &[usize], fe: &[FieldVec], rom: &[FieldVec], mu: f64, lambda: f64) -> Result<StressError> {
    if fe.len() != steps.len() || rom.len() != steps.len() {
        return Err(FsiError::Dimension("misaligned displacement series".into()));
    }
    let mut series = Vec::with_capacity(steps.len());
    for ((&k, a), b) in steps.iter().zip(fe).zip(rom) {
        if !a.space().same_as(b.space()) {
            return Err(FsiError::Invalid(format!("step {k}: displacements on different spaces")));
        }
        let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        series.push((k, interface_stress_norm(&FieldVec::from_values(a.space(), d)?, mu, lambda)?));
    }
    Ok(StressError { series })
}

/// Relative errors of every field plus, when displacements are given, the interface stress error.
pub fn error_analysis(pairs: &[SeriesPair], stress: Option<(&[usize], &[FieldVec], &[FieldVec], f64, f64)>) -> Result<ErrorReport> {
    let fields = pairs.iter().map(relative_errors).collect::<Result<Vec<_>>>()?;
    let stress = stress.map(|(s, fe, rom, mu, lambda)| interface_stress_errors(s, fe, rom, mu, lambda)).transpose()?;
    Ok(ErrorReport { fields, stress })
}
