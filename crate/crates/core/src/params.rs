//! Physical and discretization parameters. All values are stored in SI units.

use crate::error::{FsiError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// kg/m^3
    pub rho_f: f64,
    /// m^2/s
    pub nu_f: f64,
    /// Mean inflow velocity, m/s.
    pub u_bar: f64,
    /// Fluid body force density.
    pub b_f: [f64; 2],
    pub rho_s: f64,
    /// Lame constants, kg/(m s^2).
    pub mu_s: f64,
    pub lambda_s: f64,
    pub b_s: [f64; 2],
}

/// Multipliers from the table units (10^3 kg/m^3, 10^-3 m^2/s, 10^6 kg/(m s^2)) to SI.
pub const DENSITY_UNIT: f64 = 1e3;
pub const VISCOSITY_UNIT: f64 = 1e-3;
pub const LAME_UNIT: f64 = 1e6;

impl PhysicalParams {
    /// Benchmark values given in table units.
    #[allow(clippy::too_many_arguments)]
    pub fn from_table_units(
        rho_f: f64,
        nu_f: f64,
        u_bar: f64,
        b_f: [f64; 2],
        rho_s: f64,
        mu_s: f64,
        lambda_s: f64,
        b_s: [f64; 2],
    ) -> Self {
        PhysicalParams {
            rho_f: rho_f * DENSITY_UNIT,
            nu_f: nu_f * VISCOSITY_UNIT,
            u_bar,
            b_f,
            rho_s: rho_s * DENSITY_UNIT,
            mu_s: mu_s * LAME_UNIT,
            lambda_s: lambda_s * LAME_UNIT,
            b_s,
        }
    }

    /// Cylinder-with-flap benchmark preset; `lambda_s` is 2.0 in table units.
    pub fn benchmark() -> Self {
        Self::from_table_units(1.0, 1.0, 1.0, [0.0; 2], 1.0, 0.5, 2.0, [0.0; 2])
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [("rho_f", self.rho_f), ("nu_f", self.nu_f), ("rho_s", self.rho_s), ("mu_s", self.mu_s)];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FsiError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.lambda_s.is_finite() || self.lambda_s < 0.0 {
            return Err(FsiError::Invalid(format!("lambda_s must be non-negative, got {}", self.lambda_s)));
        }
        let all = [self.u_bar, self.b_f[0], self.b_f[1], self.b_s[0], self.b_s[1]];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(FsiError::Invalid("non-finite physical parameter".into()));
        }
        Ok(())
    }
}

/// Which acceleration prefactor the Newmark update uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewmarkForm {
    /// `1 / (beta dt)`: one power of `dt` short of consistent. Kept for comparison only.
    SingleDt,
    /// Classical `1 / (beta dt^2)`.
    Standard,
}

impl std::str::FromStr for NewmarkForm {
    type Err = FsiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-dt" => Ok(NewmarkForm::SingleDt),
            "standard" => Ok(NewmarkForm::Standard),
            _ => Err(FsiError::Invalid(format!("unknown Newmark form '{s}' (single-dt|standard)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeParamsMono {
    pub dt: f64,
    pub n_steps: usize,
    pub gamma: f64,
    pub beta: f64,
    /// Max-norm tolerance on the Newton residual.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub newmark_form: NewmarkForm,
}

impl Default for TimeParamsMono {
    fn default() -> Self {
        TimeParamsMono {
            dt: 0.01,
            n_steps: 1000,
            gamma: 0.25,
            beta: 0.5,
            newton_tol: 6e-6,
            max_newton_iters: 25,
            newmark_form: NewmarkForm::Standard,
        }
    }
}

impl TimeParamsMono {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(FsiError::Invalid(format!("dt must be positive, got {}", self.dt)));
        }
        for (name, v) in [("gamma", self.gamma), ("beta", self.beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(FsiError::Invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.newton_tol > 0.0) {
            return Err(FsiError::Invalid("newton_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeParamsPart {
    pub dt: f64,
    pub n_steps: usize,
    /// Relative fixed-point tolerance.
    pub eps: f64,
    pub max_fp_iters: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
}

impl Default for TimeParamsPart {
    fn default() -> Self {
        TimeParamsPart { dt: 1e-4, n_steps: 10_000, eps: 1e-5, max_fp_iters: 50, newton_tol: 6e-6, max_newton_iters: 25 }
    }
}

impl TimeParamsPart {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(FsiError::Invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.eps > 0.0) {
            return Err(FsiError::Invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if self.max_fp_iters == 0 {
            return Err(FsiError::Invalid("max_fp_iters must be at least 1".into()));
        }
        Ok(())
    }
}
