//! Integer-order Bessel functions of the first kind on the upper strip.
//!
//! Three regimes are used:
//!
//! * a power series for small `|z|`,
//! * the Hankel large-argument expansion once its smallest term is below
//!   double precision,
//! * Miller's backward recurrence everywhere else, normalized with the
//!   Jacobi-Anger identity `J_0 + 2 sum (-i)^k J_k = exp(-iz)`.
//!
//! The normalization sum is chosen so that its terms never exceed the size
//! of the target `exp(-iz)` when `Im z >= 0`, which keeps the recurrence
//! accurate on the imaginary axis as well as the real one.

use num_complex::Complex64;

use crate::error::{domain, Result};

/// Largest order accepted.
pub const MAX_ORDER: usize = 8192;
/// Largest `|z|` accepted.
pub const MAX_ABS_ARG: f64 = 2.0e4;
/// Largest `Im z` accepted; `exp(Im z)` must stay well inside f64 range.
pub const MAX_IM_ARG: f64 = 40.0;

const SERIES_RADIUS: f64 = 2.0;
const ASYMPTOTIC_RADIUS: f64 = 30.0;
const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_BY: f64 = 1e-250;

fn check_args(n_max: usize, z: Complex64) -> Result<()> {
    if n_max > MAX_ORDER {
        return domain(format!("Bessel order {n_max} exceeds {MAX_ORDER}"));
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return domain("non-finite Bessel argument");
    }
    let abs = z.norm();
    if z.im < -1e-12 * abs.max(1.0) {
        return domain(format!("Bessel argument {z} lies below the real axis"));
    }
    if z.im > MAX_IM_ARG {
        return domain(format!("Bessel argument {z} has Im z above {MAX_IM_ARG}"));
    }
    if abs > MAX_ABS_ARG {
        return domain(format!("|z| = {abs} exceeds {MAX_ABS_ARG}"));
    }
    Ok(())
}

/// `J_n(z)` for integer `n >= 0` and `0 <= Im z`.
pub fn bessel_j(n: usize, z: Complex64) -> Result<Complex64> {
    check_args(n, z)?;
    Ok(bessel_j_unchecked(n, z))
}

pub(crate) fn bessel_j_unchecked(n: usize, z: Complex64) -> Complex64 {
    if z.re == 0.0 && z.im == 0.0 {
        return if n == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
    }
    if z.norm() <= SERIES_RADIUS {
        return series(n, z);
    }
    if let Some(v) = hankel_asymptotic(n, z) {
        return v;
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n + 1];
    miller(z, &mut buf);
    buf[n]
}

/// Fills `out[k] = J_k(z)` for `k = 0..out.len()`.
pub fn bessel_j_orders(z: Complex64, out: &mut [Complex64]) -> Result<()> {
    if out.is_empty() {
        return Ok(());
    }
    check_args(out.len() - 1, z)?;
    bessel_j_orders_unchecked(z, out);
    Ok(())
}

pub(crate) fn bessel_j_orders_unchecked(z: Complex64, out: &mut [Complex64]) {
    let n_max = out.len() - 1;
    if z.re == 0.0 && z.im == 0.0 {
        out.fill(Complex64::new(0.0, 0.0));
        out[0] = Complex64::new(1.0, 0.0);
        return;
    }
    let abs = z.norm();
    // Upward recurrence is neutrally stable while k < |z|.
    if abs >= ASYMPTOTIC_RADIUS && 2 * n_max < abs as usize {
        if let (Some(j0), Some(j1)) = (hankel_asymptotic(0, z), hankel_asymptotic(1, z)) {
            out[0] = j0;
            if n_max >= 1 {
                out[1] = j1;
            }
            let two_over_z = 2.0 / z;
            for k in 1..n_max {
                out[k + 1] = two_over_z * (k as f64) * out[k] - out[k - 1];
            }
            return;
        }
    }
    if abs <= SERIES_RADIUS && n_max < 4 {
        for (k, o) in out.iter_mut().enumerate() {
            *o = series(k, z);
        }
        return;
    }
    miller(z, out);
}

fn series(n: usize, z: Complex64) -> Complex64 {
    let half = z * 0.5;
    let q = -half * half;
    let mut lead = Complex64::new(1.0, 0.0);
    for j in 1..=n {
        lead *= half / j as f64;
    }
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..200usize {
        term *= q / ((k * (n + k)) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    lead * sum
}

/// Hankel expansion; `None` when the series never drops below round-off.
fn hankel_asymptotic(n: usize, z: Complex64) -> Option<Complex64> {
    let abs = z.norm();
    if abs < ASYMPTOTIC_RADIUS {
        return None;
    }
    let mu = 4.0 * (n as f64) * (n as f64);
    let inv8z = 1.0 / (8.0 * z);
    let mut p = Complex64::new(1.0, 0.0);
    let mut q = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut prev = f64::INFINITY;
    let mut converged = false;
    for k in 1..80usize {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) * inv8z / k as f64;
        let size = term.norm();
        if size > prev {
            break;
        }
        prev = size;
        // a_k contributes to Q for odd k and to P for even k, with sign (-1)^floor(k/2).
        let signed = if (k / 2) % 2 == 0 { term } else { -term };
        if k % 2 == 1 {
            q += signed;
        } else {
            p += signed;
        }
        if size < 1e-17 {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let chi = z - (0.5 * n as f64 + 0.25) * std::f64::consts::PI;
    let pref = (2.0 / (std::f64::consts::PI * z)).sqrt();
    Some(pref * (p * chi.cos() - q * chi.sin()))
}

/// Crude `-log10 |J_n(x)|` envelope for `n` beyond the turning point.
fn envelope(n: f64, x: f64) -> f64 {
    let n = n.max(1.0);
    0.5 * (6.28 * n).log10() - n * (1.36 * x / n).log10()
}

fn miller_start(n_max: usize, x: f64) -> usize {
    let airy_tail = (x + 15.0 * x.cbrt() + 20.0).ceil() as usize;
    let base = envelope(n_max as f64, x).max(0.0);
    let mut start = n_max + 10;
    while envelope(start as f64, x) - base < 18.0 {
        start += 1 + start / 64;
    }
    start.max(airy_tail)
}

fn miller(z: Complex64, out: &mut [Complex64]) {
    let n_max = out.len() - 1;
    let start = miller_start(n_max, z.norm());
    let two_over_z = 2.0 / z;
    // powers of -i, indexed by k mod 4
    let phase = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    let mut f_next = Complex64::new(0.0, 0.0);
    let mut f = Complex64::new(1e-30, 0.0);
    let mut norm = Complex64::new(0.0, 0.0);
    for k in (1..=start).rev() {
        if k <= n_max {
            out[k] = f;
        }
        norm += 2.0 * phase[k % 4] * f;
        let f_prev = two_over_z * (k as f64) * f - f_next;
        f_next = f;
        f = f_prev;
        if f.norm() > RESCALE_ABOVE {
            f *= RESCALE_BY;
            f_next *= RESCALE_BY;
            norm *= RESCALE_BY;
            if k <= n_max {
                for o in &mut out[k..] {
                    *o *= RESCALE_BY;
                }
            }
        }
    }
    out[0] = f;
    norm += f;
    // Complex division squares |norm|, which overflows past 1e154.
    let size = norm.norm();
    let scale = (-Complex64::i() * z).exp() / size * (norm / size).conj();
    for o in out.iter_mut() {
        *o *= scale;
    }
}
