//! Photoacoustic measurement model: pressure traces from circular integrals
//! through an Abel-type transform, and the inverse map back to a sinogram.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::cmt::{invert, AcquisitionGeometry, CircularMeansSinogram, InversionParams, Reconstruction};
use crate::error::{config, Result};
use crate::specfun::AbelRule;

/// `values[i * n_t + k]` is the pressure at transducer `i`, time `k * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransducerTraces {
    pub geom: AcquisitionGeometry,
    pub dt: f64,
    pub n_t: usize,
    pub values: Vec<f64>,
}

impl TransducerTraces {
    pub fn trace(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_t..(i + 1) * self.n_t]
    }
}

fn rule_for(r: f64, spacing: f64) -> AbelRule {
    AbelRule::new(2 * (r / spacing).ceil() as usize + 8)
}

/// Second-order derivative of uniform samples, one-sided at the ends.
fn derivative(a: &[f64], h: f64) -> Vec<f64> {
    let n = a.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    for k in 1..n - 1 {
        d[k] = (a[k + 1] - a[k - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h);
    d[n - 1] = (3.0 * a[n - 1] - 4.0 * a[n - 2] + a[n - 3]) / (2.0 * h);
    d
}

/// `u(t) = (1/2pi) d/dt int_0^t g(r) / (2 pi sqrt(t^2 - r^2)) dr` for one
/// transducer; `g` sampled at spacing `dr`, zero beyond its last sample.
fn abel_forward_row(g: &[f64], dr: f64, dt: f64, n_t: usize, rules: &[AbelRule]) -> Vec<f64> {
    let t_end = dt * (n_t - 1) as f64;
    let need = (t_end / dr).ceil() as usize + 4;
    let mut padded = g.to_vec();
    if padded.len() < need {
        padded.resize(need, 0.0);
    }
    let inner: Vec<f64> = (0..n_t)
        .map(|k| rules[k].apply(&padded, dr, dt * k as f64) / (2.0 * PI))
        .collect();
    let mut u: Vec<f64> = derivative(&inner, dt).into_iter().map(|v| v / (2.0 * PI)).collect();
    // g vanishes at r = 0, so the trace starts at rest
    u[0] = 0.0;
    u
}

/// Pressure traces on `t in [0, r_max]` with step `dt <= dr`.
pub fn abel_forward(sino: &CircularMeansSinogram, dt: f64) -> Result<TransducerTraces> {
    let geom = sino.geom;
    geom.validate()?;
    let dr = geom.dr();
    if !(dt > 0.0) {
        return config(format!("time step must be positive, got {dt}"));
    }
    if dt > dr * (1.0 + 1e-12) {
        return config(format!("time step {dt} exceeds the radius spacing {dr}"));
    }
    let n_t = (geom.r_max() / dt - 1e-9).ceil() as usize + 1;
    let rules: Vec<AbelRule> = (0..n_t).map(|k| rule_for(dt * k as f64, dr)).collect();
    let rows: Vec<Vec<f64>> = (0..geom.n_phi)
        .into_par_iter()
        .map(|i| abel_forward_row(sino.row(i), dr, dt, n_t, &rules))
        .collect();
    Ok(TransducerTraces { geom, dt, n_t, values: rows.concat() })
}

/// Printed inverse `g(r) = 4 r int_0^r u(t) / (2 pi sqrt(r^2 - t^2)) dt`
/// without any calibration.
fn printed_inverse_row(u: &[f64], dt: f64, geom: &AcquisitionGeometry, rules: &[AbelRule]) -> Vec<f64> {
    let t_end = dt * (u.len() - 1) as f64;
    (0..geom.n_r)
        .map(|j| {
            let r = geom.radius(j);
            if j == 0 || r > t_end * (1.0 + 1e-12) {
                return 0.0;
            }
            4.0 * r * rules[j].apply(u, dt, r) / (2.0 * PI)
        })
        .collect()
}

/// Factor that turns the printed inverse into a left inverse of
/// [`abel_forward`], measured once on a smooth reference profile.
///
/// For an exact Abel pair this is `4 pi^2`.
pub fn abel_calibration() -> f64 {
    static CAL: OnceLock<f64> = OnceLock::new();
    *CAL.get_or_init(|| {
        let geom = AcquisitionGeometry { r0: 0.5, r1: 1.5, n_phi: 4, n_r: 1601 };
        let g: Vec<f64> = (0..geom.n_r)
            .map(|j| {
                let r = geom.radius(j);
                let t = ((r - 0.3) / 1.2).clamp(0.0, 1.0);
                r * (PI * t).sin().powi(4)
            })
            .collect();
        let dr = geom.dr();
        let rules: Vec<AbelRule> = (0..geom.n_r).map(|k| rule_for(dr * k as f64, dr)).collect();
        let u = abel_forward_row(&g, dr, dr, geom.n_r, &rules);
        let back = printed_inverse_row(&u, dr, &geom, &rules);
        let num: f64 = back.iter().zip(&g).map(|(b, a)| a * b).sum();
        let den: f64 = back.iter().map(|b| b * b).sum();
        num / den
    })
}

/// Sinogram on the geometry's radii from pressure traces; applies
/// [`abel_calibration`] to the printed inverse.
pub fn abel_inverse(traces: &TransducerTraces) -> Result<CircularMeansSinogram> {
    let geom = traces.geom;
    geom.validate()?;
    if traces.values.len() != geom.n_phi * traces.n_t || traces.n_t < 3 || !(traces.dt > 0.0) {
        return config("trace array does not match its geometry");
    }
    let t_end = traces.dt * (traces.n_t - 1) as f64;
    if t_end < geom.r_max() * (1.0 - 1e-9) {
        return config(format!("traces end at t = {t_end}, before r_max = {}", geom.r_max()));
    }
    let cal = abel_calibration();
    let rules: Vec<AbelRule> = (0..geom.n_r).map(|j| rule_for(geom.radius(j), traces.dt)).collect();
    let rows: Vec<Vec<f64>> = (0..geom.n_phi)
        .into_par_iter()
        .map(|i| {
            let mut row = printed_inverse_row(traces.trace(i), traces.dt, &geom, &rules);
            row.iter_mut().for_each(|v| *v *= cal);
            row
        })
        .collect();
    Ok(CircularMeansSinogram { geom, values: rows.concat() })
}

pub fn ivpa_reconstruct(traces: &TransducerTraces, params: &InversionParams) -> Result<Reconstruction> {
    let sino = abel_inverse(traces)?;
    invert(&sino, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n_r: usize) -> AcquisitionGeometry {
        AcquisitionGeometry::new(0.5, 1.5, 4, n_r).unwrap()
    }

    fn bump_sino(geom: AcquisitionGeometry) -> CircularMeansSinogram {
        let values = (0..geom.n_phi)
            .flat_map(|i| {
                (0..geom.n_r).map(move |j| {
                    let r = geom.radius(j);
                    let t = ((r - 0.4 - 0.05 * i as f64) / 0.9).clamp(0.0, 1.0);
                    r * (PI * t).sin().powi(4)
                })
            })
            .collect();
        CircularMeansSinogram { geom, values }
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let n: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let d: f64 = b.iter().map(|y| y * y).sum();
        (n / d).sqrt()
    }

    #[test]
    fn calibration_is_four_pi_squared() {
        let c = abel_calibration();
        assert!((c / (4.0 * PI * PI) - 1.0).abs() < 1e-4, "{c}");
    }

    #[test]
    fn zero_in_zero_out() {
        let g = geom(101);
        let t = abel_forward(&CircularMeansSinogram::zeros(g), g.dr()).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.0));
        let back = abel_inverse(&t).unwrap();
        assert!(back.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_coarse_time_axis() {
        let g = geom(101);
        assert!(abel_forward(&CircularMeansSinogram::zeros(g), 1.5 * g.dr()).is_err());
    }

    #[test]
    fn round_trip_and_linearity() {
        let g = geom(401);
        let sino = bump_sino(g);
        let t = abel_forward(&sino, g.dr()).unwrap();
        let back = abel_inverse(&t).unwrap();
        assert!(rel(&back.values, &sino.values) < 0.01);
        // scaling by a power of two commutes exactly with every rounding step
        let scaled = TransducerTraces { values: t.values.iter().map(|v| 4.0 * v).collect(), ..t.clone() };
        let back4 = abel_inverse(&scaled).unwrap();
        assert!(back4.values.iter().zip(&back.values).all(|(a, b)| *a == 4.0 * b));
        let scaled = TransducerTraces { values: t.values.iter().map(|v| 3.0 * v).collect(), ..t.clone() };
        let back3 = abel_inverse(&scaled).unwrap();
        let tripled: Vec<f64> = back.values.iter().map(|v| 3.0 * v).collect();
        assert!(rel(&back3.values, &tripled) < 1e-14);
    }

    #[test]
    fn traces_are_causal() {
        let g = geom(201);
        let sino = bump_sino(g);
        let t = abel_forward(&sino, g.dr()).unwrap();
        for i in 0..g.n_phi {
            let onset = 0.4 + 0.05 * i as f64 - 4.0 * g.dr();
            for k in 0..t.n_t {
                if (k as f64) * t.dt < onset {
                    assert_eq!(t.trace(i)[k], 0.0);
                }
            }
        }
    }

    #[test]
    fn finer_time_step() {
        let g = geom(201);
        let sino = bump_sino(g);
        let t = abel_forward(&sino, g.dr() / 2.0).unwrap();
        assert_eq!(t.n_t, 401);
        let back = abel_inverse(&t).unwrap();
        assert!(rel(&back.values, &sino.values) < 0.01);
    }
}
