mod support;

use std::f64::consts::PI;

use ivtomo::ivus::*;
use support::kernel::{brute_force_k, elliptic_k, gauss, rel, smooth_profile};

#[test]
fn kernel_matches_brute_force_convolution() {
    let pts = [(0.3, 1.0), (0.1, 0.5), (0.05, 3.0), (0.7, 1.6), (1.0, 4.0)];
    for &(r, s) in &pts {
        let got = kernel_k(r, s).unwrap();
        let oracle = brute_force_k(r, s);
        let rel = (got - oracle).abs() / oracle;
        println!("K({r}, {s}) = {got:.12e}, oracle {oracle:.12e}, rel {rel:.2e}");
        assert!(rel < 1e-5);
        assert!((got - elliptic_k(r, s)).abs() / oracle < 1e-12);
    }
}

#[test]
fn jump_remainder_is_quadratic() {
    let r = 0.4;
    let hs = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let rem: Vec<f64> = hs
        .iter()
        .map(|&h| (4.0 * PI * PI * kernel_k(r, 2.0 * r + 2.0 * h).unwrap() - PI / (2.0 * r) - kernel_k1_linear(r, h)).abs())
        .collect();
    // K1 itself is linear in (s/2 - r) through the first term; its quadratic
    // part is what the integral term contributes
    let slope = (rem[0].ln() - rem[3].ln()) / (hs[0].ln() - hs[3].ln());
    println!("integral-term remainder exponent {slope:.3}");
    assert!(slope >= 1.9);
}

/// First-order Taylor part of `pi / sqrt(2 r s) - pi/(2r)` at `s = 2r + 2h`.
fn kernel_k1_linear(r: f64, h: f64) -> f64 {
    let s = 2.0 * r + 2.0 * h;
    PI / (2.0 * r * s).sqrt() - PI / (2.0 * r)
}

#[test]
fn derivative_against_finite_differences() {
    let (r, s) = (0.3, 1.0);
    let exact = kernel_k1_ds(r, s).unwrap();
    let err = |h: f64| ((kernel_k1(r, s + h).unwrap() - kernel_k1(r, s - h).unwrap()) / (2.0 * h) - exact).abs();
    let (e1, e2) = (err(1e-3), err(5e-4));
    println!("fd errors {e1:.3e} {e2:.3e} ratio {:.3}", e1 / e2);
    assert!(e1 < 1e-5 * exact.abs());
    assert!((e1 / e2 - 4.0).abs() < 0.5);
}

#[test]
fn derivative_bounded_on_scan() {
    let mut worst = 0.0f64;
    for i in 0..=18 {
        let r = 0.1 + 0.05 * i as f64;
        for j in 0..=60 {
            let s = 2.0 * r + (4.0 - 2.0 * r) * j as f64 / 60.0;
            let v = kernel_k1_ds(r, s).unwrap();
            assert!(v.is_finite());
            worst = worst.max(v.abs());
        }
    }
    println!("max |dK1/ds| on scan: {worst:.3}");
    assert!(worst < 1e3);
}

#[test]
fn forward_matches_double_quadrature() {
    let n = 256;
    let dr = 2.0 / n as f64;
    let (r, s) = volterra_grids(n, dr);
    let table = build_kernel_table(&r, &s).unwrap();
    let m: Vec<f64> = r.iter().map(|&x| smooth_profile(x)).collect();
    let w = volterra_forward(&m, &table).unwrap();
    let oracle: Vec<f64> = s
        .iter()
        .map(|&sj| {
            let top = 0.5 * sj;
            let integral =
                gauss(|x| if x <= 0.0 { 0.0 } else { x * smooth_profile(x) * kernel_k1_ds(x, sj).unwrap() }, 0.0, top, 40);
            smooth_profile(top) / (16.0 * PI) + integral / (4.0 * PI * PI)
        })
        .collect();
    let e = rel(&w, &oracle);
    println!("discrete forward vs double quadrature: rel_l2 {e:.3e}");
    assert!(e < 0.01);
}

#[test]
fn solvers_round_trip_and_agree() {
    let n = 256;
    let (r, s) = volterra_grids(n, 2.0 / n as f64);
    let table = build_kernel_table(&r, &s).unwrap();
    let m: Vec<f64> = r.iter().map(|&x| smooth_profile(x)).collect();
    let w = volterra_forward(&m, &table).unwrap();
    let tri = solve_volterra_triangular(&w, &table).unwrap();
    let it = solve_volterra_iter(&w, &table, 200, 1e-12).unwrap();
    let (e_tri, e_it, agree) = (rel(&tri, &m), rel(&it.m, &m), rel(&it.m, &tri));
    println!("round trip: triangular {e_tri:.2e}, iterative {e_it:.2e} after {} its, agreement {agree:.2e}", it.iterations);
    assert!(e_tri < 0.02 && e_it < 0.02 && agree < 1e-3);
    // residual decreases monotonically for small-contrast data
    assert!(it.residuals.windows(2).all(|p| p[1] <= p[0] || p[1] < 1e-13));
}

fn condition_number(n: usize) -> f64 {
    let (r, s) = volterra_grids(n, 2.0 / n as f64);
    let table = build_kernel_table(&r, &s).unwrap();
    let a = volterra_matrix(&table).unwrap();
    let norm1 = |m: &[f64]| (0..n).map(|k| (0..n).map(|j| m[j * n + k].abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        let e: Vec<f64> = (0..n).map(|j| if j == col { 1.0 } else { 0.0 }).collect();
        let x = solve_volterra_triangular(&e, &table).unwrap();
        for j in 0..n {
            inv[j * n + col] = x[j];
        }
    }
    norm1(&a) * norm1(&inv)
}

#[test]
fn conditioning_grows_at_most_linearly() {
    let conds: Vec<f64> = [64, 128, 256, 512].iter().map(|&n| condition_number(n)).collect();
    println!("condition numbers {conds:?}");
    for (k, c) in conds.iter().enumerate().skip(1) {
        assert!(c / conds[0] <= 1.5 * (1 << k) as f64);
    }
}
