//! CSV emitters. Floats use the shortest round-trip representation, so output is
//! deterministic and exact.

use std::fmt::Write as _;

use super::analysis::{ErrorReport, StressError};
use crate::error::Result;
use crate::reduction::retained_energy;

/// `index,lambda`, 1-based.
pub fn eigenvalues_csv(eigenvalues: &[f64]) -> String {
    let mut s = String::from("index,lambda\n");
    for (k, l) in eigenvalues.iter().enumerate() {
        let _ = writeln!(s, "{},{l:e}", k + 1);
    }
    s
}

/// `N,E_N` for every `N` up to the spectrum length.
pub fn energy_csv(eigenvalues: &[f64]) -> Result<String> {
    let mut s = String::from("N,E_N\n");
    for n in 1..=eigenvalues.len() {
        let _ = writeln!(s, "{n},{:e}", retained_energy(eigenvalues, n)?);
    }
    Ok(s)
}

/// `step,field,rel_error`, field by field.
pub fn errors_csv(report: &ErrorReport) -> String {
    let mut s = String::from("step,field,rel_error\n");
    for f in &report.fields {
        for (k, e) in &f.series {
            let _ = writeln!(s, "{k},{},{e:e}", f.field);
        }
    }
    s
}

/// `field,average,max,steps,skipped`.
pub fn error_summary_csv(report: &ErrorReport) -> String {
    let mut s = String::from("field,average,max,steps,skipped\n");
    for f in &report.fields {
        let _ = writeln!(s, "{},{:e},{:e},{},{}", f.field, f.average(), f.max(), f.series.len(), f.skipped);
    }
    if let Some(st) = &report.stress {
        let max = st.series.iter().map(|x| x.1).fold(0.0, f64::max);
        let _ = writeln!(s, "interface_stress,{:e},{max:e},{},0", st.average(), st.series.len());
    }
    s
}

/// `step,abs_error`.
pub fn stress_csv(stress: &StressError) -> String {
    let mut s = String::from("step,abs_error\n");
    for (k, e) in &stress.series {
        let _ = writeln!(s, "{k},{e:e}");
    }
    s
}

/// `step,iterations`.
pub fn iterations_csv(rows: impl IntoIterator<Item = (usize, usize)>) -> String {
    let mut s = String::from("step,iterations\n");
    for (k, n) in rows {
        let _ = writeln!(s, "{k},{n}");
    }
    s
}
