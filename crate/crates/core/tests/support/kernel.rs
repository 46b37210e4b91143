//! Brute-force reference values for the scattering kernel.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Composite 10-point Gauss-Legendre rule on `panels` equal panels.
pub fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(10).unwrap());
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + h * p as f64;
            rule.as_node_weight_pairs().iter().map(|&(x, w)| 0.5 * h * w * f(lo + 0.5 * h * (x + 1.0))).sum::<f64>()
        })
        .sum()
}

/// Direct convolution of the Green's function profiles, with `t = r + u^2`
/// removing the endpoint singularity; the integrand is symmetric about `s/2`.
pub fn brute_force_k(r: f64, s: f64) -> f64 {
    let u_end = (0.5 * s - r).sqrt();
    let half = gauss(
        |u| {
            let t = r + u * u;
            let other = ((s - t) * (s - t) - r * r).sqrt();
            2.0 / ((2.0 * r + u * u).sqrt() * other)
        },
        0.0,
        u_end,
        2000,
    );
    2.0 * half / (4.0 * PI * PI)
}

/// `4 pi^2 K = (2/B) K_ell(A/B)` with the complete elliptic integral by AGM.
pub fn elliptic_k(r: f64, s: f64) -> f64 {
    let a = 0.5 * s - r;
    let b = 0.5 * s + r;
    let k = a / b;
    let (mut x, mut y) = (1.0f64, (1.0 - k * k).sqrt());
    for _ in 0..40 {
        let m = 0.5 * (x + y);
        y = (x * y).sqrt();
        x = m;
    }
    (2.0 / b) * (PI / (2.0 * x)) / (4.0 * PI * PI)
}

/// Smooth radial profile vanishing near both ends of `[0, 2]`.
pub fn smooth_profile(r: f64) -> f64 {
    let t = ((r - 0.3) / 1.2).clamp(0.0, 1.0);
    (PI * t).sin().powi(4) * (1.0 + 0.5 * (5.0 * r).cos())
}

pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    let n: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let d: f64 = b.iter().map(|y| y * y).sum();
    (n / d).sqrt()
}
