//! Time-discretization primitives shared by the offline and online schemes.

use crate::params::NewmarkForm;

/// Inlet velocity at height `y` (m) and time `t` (s): a parabola of peak `1.5 u_bar` in a
/// channel of height 0.41 m, ramped smoothly over the first two seconds.
pub fn inlet_profile(t: f64, y: f64, u_bar: f64) -> [f64; 2] {
    [1.5 * u_bar * (4.0 / 0.1681) * y * (0.41 - y) * ramp(t), 0.0]
}

pub fn ramp(t: f64) -> f64 {
    if t < 2.0 {
        0.5 * (1.0 - (std::f64::consts::PI * t / 2.0).cos())
    } else {
        1.0
    }
}

/// Backward-difference weights `(a0, a1, a2)` with `D_t x = a0 x^{n+1} + a1 x^n + a2 x^{n-1}`.
/// The first step (no second history level) uses BDF1.
pub fn bdf_coeffs(dt: f64, first_step: bool) -> [f64; 3] {
    if first_step {
        [1.0 / dt, -1.0 / dt, 0.0]
    } else {
        [1.5 / dt, -2.0 / dt, 0.5 / dt]
    }
}

/// BDF2 derivative of a sequence.
pub fn bdf2(next: &[f64], curr: &[f64], prev: &[f64], dt: f64) -> Vec<f64> {
    let [a0, a1, a2] = bdf_coeffs(dt, false);
    next.iter().zip(curr).zip(prev).map(|((x, y), z)| a0 * x + a1 * y + a2 * z).collect()
}

/// Newmark update written as affine maps of the displacement increment `dd`:
/// `accel = c_a dd - c_av v - c_aa a`, `rate = c_r dd - c_rv v - c_ra a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewmarkCoeffs {
    pub c_a: f64,
    pub c_av: f64,
    pub c_aa: f64,
    pub c_r: f64,
    pub c_rv: f64,
    pub c_ra: f64,
}

impl NewmarkCoeffs {
    pub fn new(gamma: f64, beta: f64, dt: f64, form: NewmarkForm) -> Self {
        let c_a = match form {
            NewmarkForm::SingleDt => 1.0 / (beta * dt),
            NewmarkForm::Standard => 1.0 / (beta * dt * dt),
        };
        NewmarkCoeffs {
            c_a,
            c_av: 1.0 / (beta * dt),
            c_aa: 1.0 / (2.0 * beta) - 1.0,
            c_r: gamma / (beta * dt),
            c_rv: gamma / beta - 1.0,
            c_ra: dt * (gamma / (2.0 * beta) - 1.0),
        }
    }

    #[inline]
    pub fn accel(&self, dd: f64, v: f64, a: f64) -> f64 {
        self.c_a * dd - self.c_av * v - self.c_aa * a
    }

    #[inline]
    pub fn rate(&self, dd: f64, v: f64, a: f64) -> f64 {
        self.c_r * dd - self.c_rv * v - self.c_ra * a
    }
}

/// New acceleration and rate from the displacement pair and the current rates.
#[allow(clippy::too_many_arguments)]
pub fn newmark_rates(
    d_next: &[f64],
    d_curr: &[f64],
    rate_curr: &[f64],
    accel_curr: &[f64],
    gamma: f64,
    beta: f64,
    dt: f64,
    form: NewmarkForm,
) -> (Vec<f64>, Vec<f64>) {
    let c = NewmarkCoeffs::new(gamma, beta, dt, form);
    let n = d_next.len();
    let mut acc = Vec::with_capacity(n);
    let mut rate = Vec::with_capacity(n);
    for i in 0..n {
        let dd = d_next[i] - d_curr[i];
        acc.push(c.accel(dd, rate_curr[i], accel_curr[i]));
        rate.push(c.rate(dd, rate_curr[i], accel_curr[i]));
    }
    (acc, rate)
}
