use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Discretized integration path: the segment `[0, ia]` followed by
/// `[ia, ia + M]`, with complex line-element weights.
///
/// The corner node `ia` appears twice, once as the last vertical node and
/// once as the first horizontal node.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourC {
    pub a: f64,
    pub m: f64,
    pub n_vertical: usize,
    pub n_horizontal: usize,
    pub nodes: Vec<Complex64>,
    pub weights: Vec<Complex64>,
}

/// Parameters that reproduce a contour; stored in sidecars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourParams {
    pub a: f64,
    pub m: f64,
    pub n_vertical: usize,
    pub n_horizontal: usize,
}

impl ContourC {
    pub fn params(&self) -> ContourParams {
        ContourParams {
            a: self.a,
            m: self.m,
            n_vertical: self.n_vertical,
            n_horizontal: self.n_horizontal,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Range of node indices on the vertical segment.
    pub fn vertical(&self) -> std::ops::Range<usize> {
        0..self.n_vertical
    }

    /// Range of node indices on the horizontal segment.
    pub fn horizontal(&self) -> std::ops::Range<usize> {
        self.n_vertical..self.nodes.len()
    }

    /// Quadrature of `f` along the contour.
    pub fn integrate(&self, mut f: impl FnMut(Complex64) -> Complex64) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }
}

impl ContourParams {
    pub fn build(&self) -> Result<ContourC> {
        build_contour(self.a, self.m, self.n_vertical, self.n_horizontal)
    }
}

/// Trapezoid weights with Gregory end corrections through second
/// differences, scaled by the (possibly complex) step `h`.
///
/// Exact for cubics whenever `n >= 3`; plain trapezoid for `n == 2`.
fn segment_weights(n: usize, h: Complex64) -> Vec<Complex64> {
    let mut c = vec![1.0f64; n];
    c[0] = 0.5;
    c[n - 1] = 0.5;
    if n >= 3 {
        // -h/12 (nabla f_n - delta f_0)
        c[0] -= 1.0 / 12.0;
        c[1] += 1.0 / 12.0;
        c[n - 1] -= 1.0 / 12.0;
        c[n - 2] += 1.0 / 12.0;
        // -h/24 (nabla^2 f_n + delta^2 f_0)
        c[0] -= 1.0 / 24.0;
        c[1] += 2.0 / 24.0;
        c[2] -= 1.0 / 24.0;
        c[n - 1] -= 1.0 / 24.0;
        c[n - 2] += 2.0 / 24.0;
        c[n - 3] -= 1.0 / 24.0;
    }
    c.into_iter().map(|ci| h * ci).collect()
}

/// Builds the deformed contour with `n_seg1` nodes on `[0, ia]` and
/// `n_seg2` uniformly spaced nodes on `[ia, ia + M]`.
pub fn build_contour(a: f64, m: f64, n_seg1: usize, n_seg2: usize) -> Result<ContourC> {
    if !(a > 0.0 && a.is_finite()) {
        return config(format!("contour shift a must be positive, got {a}"));
    }
    if !(m > 0.0 && m.is_finite()) {
        return config(format!("contour extent M must be positive, got {m}"));
    }
    if n_seg1 < 2 || n_seg2 < 2 {
        return config("each contour segment needs at least 2 nodes");
    }
    let ia = Complex64::new(0.0, a);
    let mut nodes = Vec::with_capacity(n_seg1 + n_seg2);
    for k in 0..n_seg1 {
        nodes.push(Complex64::new(0.0, a * k as f64 / (n_seg1 - 1) as f64));
    }
    nodes[n_seg1 - 1] = ia;
    for k in 0..n_seg2 {
        nodes.push(ia + m * k as f64 / (n_seg2 - 1) as f64);
    }
    let mut weights = segment_weights(n_seg1, ia / (n_seg1 - 1) as f64);
    weights.extend(segment_weights(n_seg2, Complex64::new(m / (n_seg2 - 1) as f64, 0.0)));
    Ok(ContourC { a, m, n_vertical: n_seg1, n_horizontal: n_seg2, nodes, weights })
}
