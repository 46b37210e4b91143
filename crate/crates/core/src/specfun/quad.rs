//! Real-line quadrature helpers.

use std::f64::consts::FRAC_PI_2;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{domain, Result};

const GL_POINTS: usize = 4;

/// Composite trapezoid weights for `n` uniformly spaced samples.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
    }
    if n == 1 {
        w[0] = 0.0;
    }
    w
}

/// Four-point Lagrange interpolation of uniformly spaced samples
/// (`samples[k]` at `k * spacing`). Falls back to linear for short arrays.
pub fn interp_uniform(samples: &[f64], spacing: f64, t: f64) -> f64 {
    match samples.len() {
        0 => 0.0,
        1 => samples[0],
        n => {
            let (s, w) = lagrange_stencil(n, spacing, t);
            w.iter().enumerate().map(|(k, wk)| wk * samples.get(s + k).copied().unwrap_or(0.0)).sum()
        }
    }
}

/// Start index and weights of the interpolation stencil used by
/// [`interp_uniform`] for `n >= 2` samples; unused weights are zero.
pub fn lagrange_stencil(n: usize, spacing: f64, t: f64) -> (usize, [f64; 4]) {
    let x = t / spacing;
    if n < 4 {
        let i = (x.floor().max(0.0) as usize).min(n - 2);
        let f = x - i as f64;
        return (i, [1.0 - f, f, 0.0, 0.0]);
    }
    let i = x.floor().max(0.0) as usize;
    let s = i.saturating_sub(1).min(n - 4);
    let u = x - s as f64;
    let (u0, u1, u2, u3) = (u, u - 1.0, u - 2.0, u - 3.0);
    (s, [-u1 * u2 * u3 / 6.0, u0 * u2 * u3 / 2.0, -u0 * u1 * u3 / 2.0, u0 * u1 * u2 / 6.0])
}

/// Composite Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre_panels(a: f64, b: f64, panels: usize, points: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(NonZeroUsize::new(points.max(1)).expect("nonzero"));
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * points);
    let mut ws = Vec::with_capacity(panels * points);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for &(x, w) in rule.as_node_weight_pairs() {
            xs.push(lo + 0.5 * h * (x + 1.0));
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Precomputed rule for `int_0^r h(t) / sqrt(r^2 - t^2) dt` through the
/// substitution `t = r sin(theta)`, which turns the integral into
/// `int_0^{pi/2} h(r sin theta) d theta` with a smooth integrand.
#[derive(Debug, Clone)]
pub struct AbelRule {
    sin_theta: Vec<f64>,
    weights: Vec<f64>,
}

impl AbelRule {
    /// `panels` Gauss-Legendre panels on `[0, pi/2]`; use at least as many
    /// panels as sample intervals under the largest radius.
    pub fn new(panels: usize) -> Self {
        let (theta, weights) = gauss_legendre_panels(0.0, FRAC_PI_2, panels.max(8), GL_POINTS);
        AbelRule { sin_theta: theta.into_iter().map(f64::sin).collect(), weights }
    }

    /// Applies the rule to uniformly spaced samples covering `[0, r]`.
    pub fn apply(&self, samples: &[f64], spacing: f64, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.sin_theta
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * interp_uniform(samples, spacing, r * s))
            .sum()
    }
}

/// `int_0^r h(t) / sqrt(r^2 - t^2) dt` for `h` sampled at `k * spacing`,
/// the samples covering at least `[0, r]`.
pub fn abel_weighted_integral(samples: &[f64], spacing: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return domain(format!("Abel radius must be positive, got {r}"));
    }
    if !(spacing > 0.0) || samples.len() < 2 {
        return domain("Abel integrand needs at least two uniformly spaced samples");
    }
    let covered = spacing * (samples.len() - 1) as f64;
    if covered < r * (1.0 - 1e-12) {
        return domain(format!("samples cover [0, {covered}] but r = {r}"));
    }
    let intervals = (r / spacing).ceil() as usize;
    Ok(AbelRule::new(2 * intervals + 8).apply(samples, spacing, r))
}
