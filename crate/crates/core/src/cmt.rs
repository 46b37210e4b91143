//! Circular-means transform with centers on a circle of radius `R0`, and its
//! inversion by Hankel transform along a deformed contour, angular Fourier
//! decomposition and cone-regularized spectral division.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::phantom::ImageGrid;
use crate::specfun::bessel::{bessel_j_orders, bessel_j_orders_unchecked};
use crate::specfun::quad::{lagrange_stencil, trapezoid_weights};
use crate::specfun::{build_contour, ContourC, ContourParams};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Smallest admissible `|J_l(lambda R0)|` inside the kept spectral region.
pub const DENOMINATOR_FLOOR: f64 = 1e-13;
/// Imaginary-to-real norm ratio above which an assembled image is flagged.
pub const IMAG_WARNING_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionGeometry {
    pub r0: f64,
    pub r1: f64,
    pub n_phi: usize,
    pub n_r: usize,
}

impl AcquisitionGeometry {
    pub fn new(r0: f64, r1: f64, n_phi: usize, n_r: usize) -> Result<Self> {
        let g = AcquisitionGeometry { r0, r1, n_phi, n_r };
        g.validate()?;
        Ok(g)
    }

    /// 256 transducers on radius 0.5, support radius 1.5, 401 radii on [0, 2].
    pub fn full() -> Self {
        AcquisitionGeometry { r0: 0.5, r1: 1.5, n_phi: 256, n_r: 401 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0 < self.r1 && self.r1.is_finite()) {
            return config(format!("need 0 < R0 < R1, got R0={} R1={}", self.r0, self.r1));
        }
        if self.n_phi < 4 || !self.n_phi.is_power_of_two() {
            return config(format!("transducer count must be a power of two >= 4, got {}", self.n_phi));
        }
        if self.n_r < 8 {
            return config(format!("need at least 8 radii, got {}", self.n_r));
        }
        Ok(())
    }

    pub fn r_max(&self) -> f64 {
        self.r0 + self.r1
    }

    pub fn dr(&self) -> f64 {
        self.r_max() / (self.n_r - 1) as f64
    }

    pub fn radius(&self, j: usize) -> f64 {
        self.dr() * j as f64
    }

    pub fn angle(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n_phi as f64
    }

    pub fn transducer(&self, i: usize) -> [f64; 2] {
        let phi = self.angle(i);
        [self.r0 * phi.cos(), self.r0 * phi.sin()]
    }

    pub fn l_max(&self) -> usize {
        self.n_phi / 2 - 1
    }
}

/// `values[i * n_r + j]` holds the integral of `f` over the circle of
/// radius `r_j` around transducer `i`, with arc-length measure.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularMeansSinogram {
    pub geom: AcquisitionGeometry,
    pub values: Vec<f64>,
}

impl CircularMeansSinogram {
    pub fn zeros(geom: AcquisitionGeometry) -> Self {
        CircularMeansSinogram { geom, values: vec![0.0; geom.n_phi * geom.n_r] }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.geom.n_r..(i + 1) * self.geom.n_r]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.geom.n_r + j]
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rejects a value count that disagrees with the geometry, or non-finite values.
    pub fn check(&self) -> Result<()> {
        self.geom.validate()?;
        if self.values.len() != self.geom.n_phi * self.geom.n_r {
            return config("sinogram size does not match its geometry");
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("sinogram contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Hankel transform of each sinogram row: `values[i * n_nodes + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelData {
    pub n_phi: usize,
    pub lambdas: Vec<Complex64>,
    pub values: Vec<Complex64>,
}

/// Angular modes on the contour nodes: `coeffs[(l + l_max) * n_nodes + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    pub contour: ContourC,
    pub l_max: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralCoefficients {
    pub fn n_nodes(&self) -> usize {
        self.contour.len()
    }

    pub fn get(&self, l: i64, j: usize) -> Complex64 {
        self.coeffs[self.index(l, j)]
    }

    pub fn index(&self, l: i64, j: usize) -> usize {
        (l + self.l_max as i64) as usize * self.n_nodes() + j
    }

    pub fn mode(&self, l: i64) -> &[Complex64] {
        let start = self.index(l, 0);
        &self.coeffs[start..start + self.n_nodes()]
    }
}

/// Radial profiles `f_l(r_k)` on `r_k = k * spacing`:
/// `values[(l + l_max) * n_radii + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialModes {
    pub l_max: usize,
    pub spacing: f64,
    pub n_radii: usize,
    pub values: Vec<Complex64>,
    /// Relative size of the part that would make the image non-real.
    pub imag_residue: f64,
}

impl RadialModes {
    pub fn mode(&self, l: i64) -> &[Complex64] {
        let start = (l + self.l_max as i64) as usize * self.n_radii;
        &self.values[start..start + self.n_radii]
    }

    pub fn r_end(&self) -> f64 {
        self.spacing * (self.n_radii - 1) as f64
    }
}

/// Whether `F_l(lambda)` survives cone regularization.
pub fn kept(l: i64, lambda: Complex64, r0: f64, margin: f64) -> bool {
    l == 0 || (l.unsigned_abs() as f64) < r0 * lambda.re * (1.0 - margin)
}

/// Trapezoid arc quadrature of circle integrals, bilinear sampling of `f`.
pub fn forward_cmt(f: &ImageGrid, geom: &AcquisitionGeometry, n_arc: usize) -> Result<CircularMeansSinogram> {
    geom.validate()?;
    if n_arc < 16 {
        return config(format!("arc quadrature needs at least 16 points, got {n_arc}"));
    }
    let dpsi = 2.0 * PI / n_arc as f64;
    let dirs: Vec<(f64, f64)> = (0..n_arc).map(|k| (k as f64 * dpsi).sin_cos()).collect();
    let n_r = geom.n_r;
    let rows: Vec<Vec<f64>> = (0..geom.n_phi)
        .into_par_iter()
        .map(|i| {
            let [zx, zy] = geom.transducer(i);
            let mut row = vec![0.0; n_r];
            for (j, out) in row.iter_mut().enumerate().skip(1) {
                let r = geom.radius(j);
                let s: f64 = dirs.iter().map(|&(sn, cs)| f.sample(zx + r * cs, zy + r * sn)).sum();
                *out = r * s * dpsi;
            }
            row
        })
        .collect();
    Ok(CircularMeansSinogram { geom: *geom, values: rows.concat() })
}

/// `int_0^{r_max} J_0(lambda r) g(z_i, r) dr` by the trapezoid rule, at arbitrary `lambdas`.
pub fn hankel_data_at(sino: &CircularMeansSinogram, lambdas: &[Complex64]) -> Result<HankelData> {
    sino.check()?;
    let geom = sino.geom;
    let w = trapezoid_weights(geom.n_r, geom.dr());
    let r_max = geom.r_max();
    for &lam in lambdas {
        // validates the largest argument each node will see
        bessel_j_orders(lam * r_max, &mut [ZERO])?;
    }
    // kernel[j * n_r + m] = w_m J_0(lambda_j r_m)
    let kernel: Vec<Complex64> = lambdas
        .par_iter()
        .flat_map_iter(|&lam| {
            let w = &w;
            (0..geom.n_r).map(move |m| {
                let mut j0 = [ZERO];
                bessel_j_orders_unchecked(lam * geom.radius(m), &mut j0);
                j0[0] * w[m]
            })
        })
        .collect();
    let n_nodes = lambdas.len();
    let values: Vec<Complex64> = (0..geom.n_phi)
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = sino.row(i);
            let kernel = &kernel;
            (0..n_nodes).map(move |j| {
                let k = &kernel[j * geom.n_r..(j + 1) * geom.n_r];
                k.iter().zip(row).map(|(kv, g)| kv * g).sum::<Complex64>()
            })
        })
        .collect();
    Ok(HankelData { n_phi: geom.n_phi, lambdas: lambdas.to_vec(), values })
}

pub fn hankel_data(sino: &CircularMeansSinogram, contour: &ContourC) -> Result<HankelData> {
    hankel_data_at(sino, &contour.nodes)
}

/// `(1/n_phi) sum_i exp(-i l phi_i) h(z_i, lambda_j)` for `|l| <= n_phi/2 - 1`.
pub fn angular_fourier(h: &HankelData, contour: &ContourC) -> Result<SpectralCoefficients> {
    let n_phi = h.n_phi;
    if n_phi < 4 || !n_phi.is_power_of_two() {
        return config(format!("angular transform size must be a power of two >= 4, got {n_phi}"));
    }
    let n_nodes = contour.len();
    if h.lambdas.len() != n_nodes || h.values.len() != n_phi * n_nodes {
        return config("Hankel data does not match the contour");
    }
    let l_max = n_phi / 2 - 1;
    let fft = FftPlanner::new().plan_fft_forward(n_phi);
    let scale = 1.0 / n_phi as f64;
    let columns: Vec<Vec<Complex64>> = (0..n_nodes)
        .into_par_iter()
        .map(|j| {
            let mut col: Vec<Complex64> = (0..n_phi).map(|i| h.values[i * n_nodes + j]).collect();
            fft.process(&mut col);
            col
        })
        .collect();
    let mut coeffs = vec![ZERO; (2 * l_max + 1) * n_nodes];
    for l in -(l_max as i64)..=l_max as i64 {
        let bin = l.rem_euclid(n_phi as i64) as usize;
        let base = (l + l_max as i64) as usize * n_nodes;
        for (j, col) in columns.iter().enumerate() {
            coeffs[base + j] = col[bin] * scale;
        }
    }
    Ok(SpectralCoefficients { contour: contour.clone(), l_max, coeffs })
}

/// `F_l = g_l / (2 pi J_|l|(lambda R0))` inside the visible region, exactly
/// zero in the cone `|l| >= R0 Re(lambda) (1 - margin)`.
pub fn spectral_divide_regularize(
    ghat: &SpectralCoefficients,
    geom: &AcquisitionGeometry,
    margin: f64,
) -> Result<SpectralCoefficients> {
    if !(0.0..1.0).contains(&margin) {
        return config(format!("cone margin must lie in [0, 1), got {margin}"));
    }
    let n_nodes = ghat.n_nodes();
    let l_max = ghat.l_max;
    // J_k(lambda_j R0) for every node, k = 0..=l_max
    let bess: Vec<Vec<Complex64>> = ghat
        .contour
        .nodes
        .par_iter()
        .map(|&lam| {
            let mut b = vec![ZERO; l_max + 1];
            bessel_j_orders(lam * geom.r0, &mut b).map(|_| b)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![ZERO; ghat.coeffs.len()];
    out.par_chunks_mut(n_nodes).enumerate().try_for_each(|(row, chunk)| {
        let l = row as i64 - l_max as i64;
        for (j, o) in chunk.iter_mut().enumerate() {
            let lam = ghat.contour.nodes[j];
            if !kept(l, lam, geom.r0, margin) {
                continue;
            }
            let jl = bess[j][l.unsigned_abs() as usize];
            if jl.norm() < DENOMINATOR_FLOOR {
                return Err(Error::NumericGuard(format!(
                    "|J_{}({})| = {:e} below floor inside the kept region",
                    l.abs(),
                    lam * geom.r0,
                    jl.norm()
                )));
            }
            *o = ghat.coeffs[row * n_nodes + j] / (2.0 * PI * jl);
        }
        Ok(())
    })?;
    Ok(SpectralCoefficients { contour: ghat.contour.clone(), l_max, coeffs: out })
}

/// `f_l(r) = int_C F_l(lambda) J_|l|(lambda r) lambda d lambda` on
/// `n_radii` uniform radii over `[0, r_end]`.
pub fn inverse_contour(f: &SpectralCoefficients, n_radii: usize, r_end: f64) -> Result<RadialModes> {
    if n_radii < 4 || !(r_end > 0.0) {
        return config("inverse needs at least 4 radii and a positive end radius");
    }
    let c = &f.contour;
    let l_max = f.l_max as i64;
    let n_nodes = c.len();
    let n_modes = 2 * f.l_max + 1;
    // highest |l| with a nonzero coefficient at each node
    let top: Vec<Option<usize>> = (0..n_nodes)
        .map(|j| (0..=l_max).rev().find(|&l| f.get(l, j) != ZERO || f.get(-l, j) != ZERO).map(|l| l as usize))
        .collect();
    for (j, t) in top.iter().enumerate() {
        if let Some(t) = t {
            bessel_j_orders(c.nodes[j] * r_end, &mut vec![ZERO; t + 1])?;
        }
    }
    let spacing = r_end / (n_radii - 1) as f64;
    let columns: Vec<Vec<Complex64>> = (0..n_radii)
        .into_par_iter()
        .map(|k| {
            let r = spacing * k as f64;
            let mut acc = vec![ZERO; n_modes];
            let mut buf = Vec::new();
            for j in 0..n_nodes {
                let Some(t) = top[j] else { continue };
                let lam = c.nodes[j];
                buf.resize(t + 1, ZERO);
                bessel_j_orders_unchecked(lam * r, &mut buf);
                let w = c.weights[j] * lam;
                for l in -(t as i64)..=t as i64 {
                    let idx = (l + l_max) as usize;
                    acc[idx] += w * f.coeffs[idx * n_nodes + j] * buf[l.unsigned_abs() as usize];
                }
            }
            acc
        })
        .collect();
    let mut values = vec![ZERO; n_modes * n_radii];
    for (k, col) in columns.iter().enumerate() {
        for (m, v) in col.iter().enumerate() {
            values[m * n_radii + k] = *v;
        }
    }
    let mut modes = RadialModes { l_max: f.l_max, spacing, n_radii, values, imag_residue: 0.0 };
    modes.imag_residue = hermitian_residue(&modes);
    Ok(modes)
}

/// `||f_{-l} - conj f_l|| / (2 ||f||)`, the relative imaginary part of the
/// assembled image by Parseval.
fn hermitian_residue(m: &RadialModes) -> f64 {
    let l_max = m.l_max as i64;
    let mut anti = 0.0;
    let mut total = 0.0;
    for l in -l_max..=l_max {
        let (a, b) = (m.mode(l), m.mode(-l));
        for k in 0..m.n_radii {
            anti += (b[k] - a[k].conj()).norm_sqr();
            total += a[k].norm_sqr();
        }
    }
    if total == 0.0 {
        0.0
    } else {
        (anti / total).sqrt() / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledImage {
    pub image: ImageGrid,
    /// `||Im f|| / ||Re f||` over the pixels.
    pub imag_ratio: f64,
    pub imag_warning: bool,
}

/// `f(r, theta) = sum_l f_l(r) exp(i l theta)` on Cartesian pixels; zero
/// beyond the last radius.
pub fn assemble_image(modes: &RadialModes, n: usize, half_width: f64) -> Result<AssembledImage> {
    let mut image = ImageGrid::zeros(n, half_width)?;
    let l_max = modes.l_max as i64;
    let r_end = modes.r_end();
    let coords: Vec<f64> = (0..n).map(|k| image.coord(k)).collect();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|iy| {
            let y = coords[iy];
            let mut row = vec![0.0; n];
            let mut imag_sq = 0.0;
            for (ix, out) in row.iter_mut().enumerate() {
                let x = coords[ix];
                let r = x.hypot(y);
                if r > r_end {
                    continue;
                }
                let (s, w) = lagrange_stencil(modes.n_radii, modes.spacing, r);
                let at = |l: i64| -> Complex64 {
                    let m = modes.mode(l);
                    (0..4).filter(|&q| w[q] != 0.0).map(|q| m[s + q] * w[q]).sum()
                };
                let step = Complex64::from_polar(1.0, y.atan2(x));
                let mut e = Complex64::new(1.0, 0.0);
                let mut v = at(0);
                for l in 1..=l_max {
                    e *= step;
                    v += at(l) * e + at(-l) * e.conj();
                }
                *out = v.re;
                imag_sq += v.im * v.im;
            }
            (row, imag_sq)
        })
        .collect();
    let mut imag_sq = 0.0;
    for (iy, (row, im)) in rows.into_iter().enumerate() {
        image.values[iy * n..(iy + 1) * n].copy_from_slice(&row);
        imag_sq += im;
    }
    let re = image.l2_norm();
    let imag_ratio = if re > 0.0 { imag_sq.sqrt() / re } else { 0.0 };
    Ok(AssembledImage { image, imag_ratio, imag_warning: imag_ratio > IMAG_WARNING_RATIO })
}

/// Tunables of [`invert`]; `None` selects the data-driven default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionParams {
    /// Height of the vertical contour segment (default `1/R1`).
    pub a: Option<f64>,
    /// Length of the horizontal segment (default `pi n_r / r_max`).
    pub m: Option<f64>,
    /// Horizontal nodes (default `2 n_r`).
    pub n_horizontal: Option<usize>,
    pub n_vertical: usize,
    pub margin: f64,
    pub image_n: usize,
    /// Default `R1`.
    pub image_half_width: Option<f64>,
}

impl Default for InversionParams {
    fn default() -> Self {
        InversionParams {
            a: None,
            m: None,
            n_horizontal: None,
            n_vertical: 8,
            margin: 0.0,
            image_n: 256,
            image_half_width: None,
        }
    }
}

impl InversionParams {
    pub fn contour_params(&self, geom: &AcquisitionGeometry) -> ContourParams {
        ContourParams {
            a: self.a.unwrap_or(1.0 / geom.r1),
            m: self.m.unwrap_or(PI * geom.n_r as f64 / geom.r_max()),
            n_vertical: self.n_vertical,
            n_horizontal: self.n_horizontal.unwrap_or(2 * geom.n_r),
        }
    }

    pub fn half_width(&self, geom: &AcquisitionGeometry) -> f64 {
        self.image_half_width.unwrap_or(geom.r1)
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: ImageGrid,
    /// Regularized `F_l` on the contour.
    pub spectral: SpectralCoefficients,
    pub imag_ratio: f64,
    pub imag_warning: bool,
    pub imag_residue: f64,
    pub stage_timings_ms: BTreeMap<String, f64>,
}

/// Full inversion of a circular-means sinogram.
pub fn invert(sino: &CircularMeansSinogram, params: &InversionParams) -> Result<Reconstruction> {
    let geom = sino.geom;
    sino.check()?;
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        clock = Instant::now();
    };
    let cp = params.contour_params(&geom);
    let contour = build_contour(cp.a, cp.m, cp.n_vertical, cp.n_horizontal)?;
    let hd = hankel_data(sino, &contour)?;
    lap("hankel", &mut timings);
    let ghat = angular_fourier(&hd, &contour)?;
    lap("angular_fourier", &mut timings);
    let spectral = spectral_divide_regularize(&ghat, &geom, params.margin)?;
    lap("spectral_divide", &mut timings);
    let half_width = params.half_width(&geom);
    let n_radii = (half_width / geom.dr()).ceil() as usize + 1;
    let modes = inverse_contour(&spectral, n_radii, geom.dr() * (n_radii - 1) as f64)?;
    lap("inverse_contour", &mut timings);
    let assembled = assemble_image(&modes, params.image_n, half_width)?;
    lap("assemble", &mut timings);
    Ok(Reconstruction {
        image: assembled.image,
        spectral,
        imag_ratio: assembled.imag_ratio,
        imag_warning: assembled.imag_warning,
        imag_residue: modes.imag_residue,
        stage_timings_ms: timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::bessel_j;

    fn small_geom() -> AcquisitionGeometry {
        AcquisitionGeometry::new(0.5, 1.5, 32, 81).unwrap()
    }

    #[test]
    fn geometry_validation() {
        assert!(AcquisitionGeometry::new(0.5, 1.5, 48, 81).is_err());
        assert!(AcquisitionGeometry::new(1.5, 0.5, 32, 81).is_err());
        let g = AcquisitionGeometry::full();
        assert_eq!(g.r_max(), 2.0);
        assert_eq!(g.dr(), 0.005);
        assert_eq!(g.l_max(), 127);
    }

    #[test]
    fn forward_of_zero_and_arc_count() {
        let g = small_geom();
        let f = ImageGrid::zeros(64, 1.5).unwrap();
        assert!(forward_cmt(&f, &g, 64).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(matches!(forward_cmt(&f, &g, 15), Err(Error::Config(_))));
    }

    #[test]
    fn hankel_of_zero_and_zero_node() {
        let g = small_geom();
        let sino = CircularMeansSinogram::zeros(g);
        let c = build_contour(1.0, 20.0, 4, 20).unwrap();
        assert!(hankel_data(&sino, &c).unwrap().values.iter().all(|v| *v == ZERO));

        let values: Vec<f64> = (0..g.n_phi * g.n_r).map(|k| ((k % g.n_r) as f64 * 0.1).sin()).collect();
        let sino = CircularMeansSinogram { geom: g, values };
        let h = hankel_data(&sino, &c).unwrap();
        let w = trapezoid_weights(g.n_r, g.dr());
        let direct: f64 = sino.row(3).iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((h.values[3 * c.len()] - direct).norm() < 1e-14);
    }

    #[test]
    fn angular_orthogonality() {
        let c = build_contour(1.0, 5.0, 3, 4).unwrap();
        let n_phi = 16;
        let values: Vec<Complex64> = (0..n_phi)
            .flat_map(|i| {
                let phi = 2.0 * PI * i as f64 / n_phi as f64;
                (0..c.len()).map(move |_| Complex64::from_polar(1.0, 3.0 * phi))
            })
            .collect();
        let h = HankelData { n_phi, lambdas: c.nodes.clone(), values };
        let s = angular_fourier(&h, &c).unwrap();
        for l in -7..=7i64 {
            for j in 0..c.len() {
                let want = if l == 3 { Complex64::new(1.0, 0.0) } else { ZERO };
                assert!((s.get(l, j) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cone_rule() {
        assert!(kept(0, Complex64::new(0.0, 0.3), 0.5, 0.0));
        assert!(!kept(40, Complex64::new(1.0, 1.0), 0.5, 0.0));
        assert!(!kept(1, Complex64::new(0.0, 0.0), 0.5, 0.0));
        assert!(kept(2, Complex64::new(4.1, 0.6), 0.5, 0.0));
        assert!(!kept(2, Complex64::new(4.1, 0.6), 0.5, 0.1));
    }

    #[test]
    fn kept_entries_are_plain_ratios() {
        let g = small_geom();
        let c = build_contour(0.7, 60.0, 5, 40).unwrap();
        let l_max = g.l_max();
        let coeffs: Vec<Complex64> = (0..(2 * l_max + 1) * c.len())
            .map(|k| Complex64::new((k as f64 * 0.3).cos(), (k as f64 * 0.7).sin()))
            .collect();
        let ghat = SpectralCoefficients { contour: c.clone(), l_max, coeffs };
        let f = spectral_divide_regularize(&ghat, &g, 0.0).unwrap();
        let mut n_kept = 0;
        for l in -(l_max as i64)..=l_max as i64 {
            for j in 0..c.len() {
                let lam = c.nodes[j];
                if kept(l, lam, g.r0, 0.0) {
                    n_kept += 1;
                    let want = ghat.get(l, j) / (2.0 * PI * bessel_j(l.unsigned_abs() as usize, lam * g.r0).unwrap());
                    assert!((f.get(l, j) - want).norm() <= 1e-14 * want.norm());
                } else {
                    assert_eq!(f.get(l, j).re.to_bits(), 0);
                    assert_eq!(f.get(l, j).im.to_bits(), 0);
                }
            }
        }
        assert!(n_kept > c.len());
        assert!(spectral_divide_regularize(&ghat, &g, 1.0).is_err());
    }

    #[test]
    fn zero_spectrum_gives_zero_modes() {
        let c = build_contour(0.7, 60.0, 5, 40).unwrap();
        let f = SpectralCoefficients { contour: c.clone(), l_max: 3, coeffs: vec![ZERO; 7 * c.len()] };
        let m = inverse_contour(&f, 10, 1.0).unwrap();
        assert!(m.values.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn only_zero_mode_is_radial() {
        let n_radii = 50;
        let mut values = vec![ZERO; 5 * n_radii];
        for k in 0..n_radii {
            values[2 * n_radii + k] = Complex64::new((k as f64 * 0.1).cos(), 0.0);
        }
        let modes = RadialModes { l_max: 2, spacing: 0.02, n_radii, values, imag_residue: 0.0 };
        let img = assemble_image(&modes, 33, 0.5).unwrap();
        let a = img.image.get(16 + 10, 16);
        let b = img.image.get(16, 16 + 10);
        let c = img.image.get(16 - 10, 16);
        assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
        assert_eq!(img.imag_ratio, 0.0);
    }

    #[test]
    fn zero_sinogram_inverts_to_zero() {
        let g = small_geom();
        let params = InversionParams { image_n: 32, ..Default::default() };
        let rec = invert(&CircularMeansSinogram::zeros(g), &params).unwrap();
        assert!(rec.image.values.iter().all(|&v| v == 0.0));
        assert!(!rec.imag_warning);
    }
}
