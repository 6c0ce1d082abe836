//! Quadrature rules on the reference triangle and the unit interval.

/// Point in barycentric coordinates with a weight summing to 1 over the rule.
#[derive(Debug, Clone, Copy)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

const A1: f64 = 0.445_948_490_915_965;
const W1: f64 = 0.223_381_589_678_011;
const A2: f64 = 0.091_576_213_509_771;
const W2: f64 = 0.109_951_743_655_322;

/// Six-point rule exact for polynomials of degree 4. Weights are relative to the cell area.
pub const TRI_DEG4: [TriPoint; 6] = [
    TriPoint { bary: [1.0 - 2.0 * A1, A1, A1], weight: W1 },
    TriPoint { bary: [A1, 1.0 - 2.0 * A1, A1], weight: W1 },
    TriPoint { bary: [A1, A1, 1.0 - 2.0 * A1], weight: W1 },
    TriPoint { bary: [1.0 - 2.0 * A2, A2, A2], weight: W2 },
    TriPoint { bary: [A2, 1.0 - 2.0 * A2, A2], weight: W2 },
    TriPoint { bary: [A2, A2, 1.0 - 2.0 * A2], weight: W2 },
];

/// Gauss-Legendre on [0, 1]: (parameter, weight), exact to degree 5.
pub fn edge_gauss3() -> [(f64, f64); 3] {
    let s = (0.6f64).sqrt();
    [
        (0.5 * (1.0 - s), 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 * (1.0 + s), 5.0 / 18.0),
    ]
}

/// Gauss-Legendre on [0, 1] with `n` points, computed by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Collapsed tensor-product rule with `n * n` points; exact to degree `2n - 2` or better.
/// Used for error norms where the integrand is not a polynomial.
pub fn tri_collapsed(n: usize) -> Vec<TriPoint> {
    let g = gauss_legendre(n);
    let mut pts = Vec::with_capacity(n * n);
    for &(s, ws) in &g {
        for &(t, wt) in &g {
            let l1 = s;
            let l2 = (1.0 - s) * t;
            pts.push(TriPoint { bary: [1.0 - l1 - l2, l1, l2], weight: 2.0 * ws * wt * (1.0 - s) });
        }
    }
    pts
}
