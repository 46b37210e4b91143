//! Born-approximation ultrasound model.
//!
//! With `K(r, s)` the self-convolution of the 2D wave Green's function
//! profile, the integrated echo of one transducer is
//! `W(s) = int r M(r) dK/ds(r, s) dr`, where `M` holds the circular
//! averages of the speed perturbation around the transducer. Splitting
//! `4 pi^2 K = pi/(2r) H(s - 2r) + K1` turns this into a second-kind
//! Volterra equation
//!
//! `W(s) = M(s/2) / (16 pi) + (1/4pi^2) int_0^{s/2} r M(r) dK1/ds(r, s) dr`.
//!
//! The diagonal constant comes from `delta(s - 2r) = delta(r - s/2) / 2`
//! applied to the jump `1/(8 pi r)` of `K`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use quadrature::double_exponential;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::cmt::{invert, AcquisitionGeometry, CircularMeansSinogram, InversionParams, Reconstruction};
use crate::error::{config, domain, Error, Result};
use crate::io;

/// Coefficient of `M(s/2)` in the Volterra equation.
pub const C_JUMP: f64 = 1.0 / (16.0 * PI);

const QUAD_TOL: f64 = 1e-14;

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return domain(format!("kernel radius must be positive, got {r}"));
    }
    Ok(())
}

/// `(I, dI/ds)` for `I = int_0^1 eta asin(eta) / (B^2 - A^2 eta^2)^{3/2} d eta`,
/// integrated in `eta = sin(theta)` where the integrand is smooth.
fn eta_integrals(r: f64, s: f64) -> (f64, f64) {
    let a = 0.5 * s - r;
    let b = 0.5 * s + r;
    // scale by B^3 so the integrands are O(1) at the peak's base
    let b3 = b * b * b;
    let i = double_exponential::integrate(
        |th: f64| {
            let (sn, cs) = th.sin_cos();
            let q = 1.0 - (a / b * sn).powi(2);
            th * sn * cs / (q * q.sqrt())
        },
        0.0,
        FRAC_PI_2,
        QUAD_TOL,
    )
    .integral
        / b3;
    let is = -1.5
        * double_exponential::integrate(
            |th: f64| {
                let (sn, cs) = th.sin_cos();
                let q = 1.0 - (a / b * sn).powi(2);
                th * sn * cs * (1.0 - a / b * sn * sn) / (q * q * q.sqrt())
            },
            0.0,
            FRAC_PI_2,
            QUAD_TOL,
        )
        .integral
        / (b3 * b);
    (i, is)
}

/// `K(r, s)`; zero for `s <= 2r`.
pub fn kernel_k(r: f64, s: f64) -> Result<f64> {
    check_r(r)?;
    if s <= 2.0 * r {
        return Ok(0.0);
    }
    let a = 0.5 * s - r;
    let (i, _) = eta_integrals(r, s);
    Ok((PI / (2.0 * r * s).sqrt() - 2.0 * a * a * i) / (4.0 * PI * PI))
}

/// Continuous part `K1 = 4 pi^2 K - pi/(2r)` for `s > 2r`, zero otherwise.
pub fn kernel_k1(r: f64, s: f64) -> Result<f64> {
    check_r(r)?;
    if s <= 2.0 * r {
        return Ok(0.0);
    }
    Ok(4.0 * PI * PI * kernel_k(r, s)? - PI / (2.0 * r))
}

/// `dK1/ds`, zero for `s < 2r` and extended by continuity to `s = 2r`,
/// where it equals `-pi / (8 r^2)`.
pub fn kernel_k1_ds(r: f64, s: f64) -> Result<f64> {
    check_r(r)?;
    if s < 2.0 * r {
        return Ok(0.0);
    }
    if s == 2.0 * r {
        return Ok(-PI / (8.0 * r * r));
    }
    let a = 0.5 * s - r;
    let (i, is) = eta_integrals(r, s);
    Ok(-0.5 * PI / ((2.0 * r).sqrt() * s * s.sqrt()) - 2.0 * a * i - 2.0 * a * a * is)
}

/// Tabulated kernels: row `i` is `r_grid[i]`, column `j` is `s_grid[j]`.
///
/// Both tables are exactly zero wherever `s <= 2r`. `dk1_ds_edge[i]` holds
/// the continuous extension of `dK1/ds` at `s = 2 r_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub r_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub k1: Vec<f64>,
    pub dk1_ds: Vec<f64>,
    pub dk1_ds_edge: Vec<f64>,
}

impl KernelTable {
    pub fn k1_at(&self, i: usize, j: usize) -> f64 {
        self.k1[i * self.s_grid.len() + j]
    }

    pub fn dk1_ds_at(&self, i: usize, j: usize) -> f64 {
        self.dk1_ds[i * self.s_grid.len() + j]
    }

    /// Content hash of the grids, used as the cache key.
    pub fn grid_hash(r_grid: &[f64], s_grid: &[f64]) -> String {
        let mut h = Sha256::new();
        h.update(b"ivtomo-kernel-v1");
        for part in [r_grid, s_grid] {
            h.update((part.len() as u64).to_le_bytes());
            for v in part {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Grid spacing when `r_grid = (1..=n) * dr` and `s_grid = 2 r_grid`.
    fn volterra_spacing(&self) -> Result<f64> {
        let n = self.r_grid.len();
        if n == 0 || self.s_grid.len() != n {
            return config("Volterra solves need matching r and s grids");
        }
        let dr = self.r_grid[0];
        for k in 0..n {
            let r = dr * (k + 1) as f64;
            if (self.r_grid[k] - r).abs() > 1e-12 * r || (self.s_grid[k] - 2.0 * r).abs() > 1e-12 * r {
                return config("Volterra solves need r_grid = k*dr (k >= 1) and s_grid = 2*r_grid");
            }
        }
        Ok(dr)
    }
}

fn check_uniform(grid: &[f64], name: &str) -> Result<()> {
    if grid.len() < 2 {
        return config(format!("{name} needs at least two points"));
    }
    let h = grid[1] - grid[0];
    if !(h > 0.0) || grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return config(format!("{name} must be uniform and increasing"));
    }
    Ok(())
}

pub fn build_kernel_table(r_grid: &[f64], s_grid: &[f64]) -> Result<KernelTable> {
    check_uniform(r_grid, "r_grid")?;
    check_uniform(s_grid, "s_grid")?;
    check_r(r_grid[0])?;
    let n_s = s_grid.len();
    let rows: Vec<(Vec<f64>, Vec<f64>, f64)> = r_grid
        .par_iter()
        .map(|&r| {
            let mut k1 = vec![0.0; n_s];
            let mut dk = vec![0.0; n_s];
            for (j, &s) in s_grid.iter().enumerate() {
                if s > 2.0 * r {
                    k1[j] = kernel_k1(r, s)?;
                    dk[j] = kernel_k1_ds(r, s)?;
                }
            }
            Ok((k1, dk, kernel_k1_ds(r, 2.0 * r)?))
        })
        .collect::<Result<_>>()?;
    let mut table = KernelTable {
        r_grid: r_grid.to_vec(),
        s_grid: s_grid.to_vec(),
        k1: Vec::with_capacity(r_grid.len() * n_s),
        dk1_ds: Vec::with_capacity(r_grid.len() * n_s),
        dk1_ds_edge: Vec::with_capacity(r_grid.len()),
    };
    for (k1, dk, edge) in rows {
        table.k1.extend(k1);
        table.dk1_ds.extend(dk);
        table.dk1_ds_edge.push(edge);
    }
    Ok(table)
}

/// Grids for the Volterra discretization: `r_k = k dr` for `k = 1..=n`, `s = 2r`.
pub fn volterra_grids(n: usize, dr: f64) -> (Vec<f64>, Vec<f64>) {
    let r: Vec<f64> = (1..=n).map(|k| dr * k as f64).collect();
    let s = r.iter().map(|v| 2.0 * v).collect();
    (r, s)
}

/// Loads the table for these grids from `cache_dir`, building and storing
/// it on a miss.
pub fn cached_kernel_table(cache_dir: &Path, r_grid: &[f64], s_grid: &[f64]) -> Result<KernelTable> {
    let key = KernelTable::grid_hash(r_grid, s_grid);
    let base = cache_dir.join(format!("kernel-{key}"));
    if let Ok((data, sc)) = io::read_f64(&base) {
        if sc.shape == [2, r_grid.len(), s_grid.len()] {
            if let Some(t) = table_from_flat(r_grid, s_grid, &data, &sc.meta) {
                return Ok(t);
            }
        }
    }
    let table = build_kernel_table(r_grid, s_grid)?;
    let mut flat = table.k1.clone();
    flat.extend_from_slice(&table.dk1_ds);
    let meta = json!({
        "grid_hash": key,
        "r_grid": r_grid,
        "s_grid": s_grid,
        "dk1_ds_edge": table.dk1_ds_edge,
        "c_jump": C_JUMP,
    });
    io::write_f64(&base, &[2, r_grid.len(), s_grid.len()], &flat, meta)?;
    Ok(table)
}

fn table_from_flat(r_grid: &[f64], s_grid: &[f64], data: &[f64], meta: &serde_json::Value) -> Option<KernelTable> {
    let n = r_grid.len() * s_grid.len();
    let edge: Vec<f64> = serde_json::from_value(meta.get("dk1_ds_edge")?.clone()).ok()?;
    let stored_r: Vec<f64> = serde_json::from_value(meta.get("r_grid")?.clone()).ok()?;
    let stored_s: Vec<f64> = serde_json::from_value(meta.get("s_grid")?.clone()).ok()?;
    if data.len() != 2 * n || edge.len() != r_grid.len() || stored_r != r_grid || stored_s != s_grid {
        return None;
    }
    Some(KernelTable {
        r_grid: r_grid.to_vec(),
        s_grid: s_grid.to_vec(),
        k1: data[..n].to_vec(),
        dk1_ds: data[n..].to_vec(),
        dk1_ds_edge: edge,
    })
}

/// Lower-triangular matrix `A` of the discrete Volterra operator, row `j`
/// for `s_j`, column `k` for `r_k`: `W = A M`. Trapezoid in `r` with the
/// `r = 0` end contributing nothing.
pub fn volterra_matrix(table: &KernelTable) -> Result<Vec<f64>> {
    let dr = table.volterra_spacing()?;
    let n = table.r_grid.len();
    let mut a = vec![0.0; n * n];
    let scale = 1.0 / (4.0 * PI * PI);
    for j in 0..n {
        for k in 0..j {
            a[j * n + k] = scale * dr * table.r_grid[k] * table.dk1_ds_at(k, j);
        }
        a[j * n + j] = C_JUMP + scale * 0.5 * dr * table.r_grid[j] * table.dk1_ds_edge[j];
    }
    Ok(a)
}

/// Integrated echo `W(s_j)` of circular averages `M(r_k)`.
pub fn volterra_forward(m: &[f64], table: &KernelTable) -> Result<Vec<f64>> {
    let n = table.r_grid.len();
    if m.len() != n {
        return config(format!("profile has {} samples, table has {n} radii", m.len()));
    }
    let a = volterra_matrix(table)?;
    Ok((0..n).map(|j| (0..=j).map(|k| a[j * n + k] * m[k]).sum()).collect())
}

/// Forward substitution on the triangular system.
pub fn solve_volterra_triangular(w: &[f64], table: &KernelTable) -> Result<Vec<f64>> {
    let n = table.r_grid.len();
    if w.len() != n {
        return config(format!("data has {} samples, table has {n} times", w.len()));
    }
    let a = volterra_matrix(table)?;
    let mut m = vec![0.0; n];
    for j in 0..n {
        let acc: f64 = (0..j).map(|k| a[j * n + k] * m[k]).sum();
        m[j] = (w[j] - acc) / a[j * n + j];
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeSolution {
    pub m: Vec<f64>,
    pub iterations: usize,
    /// Relative change between successive iterates.
    pub changes: Vec<f64>,
    /// Relative residual `||A M - W|| / ||W||` after each iteration.
    pub residuals: Vec<f64>,
}

/// Successive approximations `M <- (W - A_int M) / C_JUMP`, where `A_int`
/// is the integral part of the operator (diagonal quadrature term included).
pub fn solve_volterra_iter(w: &[f64], table: &KernelTable, max_iter: usize, tol: f64) -> Result<IterativeSolution> {
    let n = table.r_grid.len();
    if w.len() != n {
        return config(format!("data has {} samples, table has {n} times", w.len()));
    }
    let mut a = volterra_matrix(table)?;
    for j in 0..n {
        a[j * n + j] -= C_JUMP;
    }
    let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut m = vec![0.0; n];
    let mut sol = IterativeSolution { m: Vec::new(), iterations: 0, changes: Vec::new(), residuals: Vec::new() };
    let mut growing = 0;
    for it in 1..=max_iter.max(1) {
        let next: Vec<f64> = (0..n)
            .map(|j| (w[j] - (0..=j).map(|k| a[j * n + k] * m[k]).sum::<f64>()) / C_JUMP)
            .collect();
        let diff = next.iter().zip(&m).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let size = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        let change = if size > 0.0 { diff / size } else { 0.0 };
        m = next;
        let resid = if w_norm > 0.0 {
            (0..n)
                .map(|j| ((0..=j).map(|k| a[j * n + k] * m[k]).sum::<f64>() + C_JUMP * m[j] - w[j]).powi(2))
                .sum::<f64>()
                .sqrt()
                / w_norm
        } else {
            0.0
        };
        if let Some(&prev) = sol.changes.last() {
            growing = if change > prev { growing + 1 } else { 0 };
        }
        sol.changes.push(change);
        sol.residuals.push(resid);
        sol.iterations = it;
        if !change.is_finite() || growing >= 5 {
            return Err(Error::NumericGuard(format!("successive approximations diverge at iteration {it}")));
        }
        if change < tol {
            break;
        }
    }
    sol.m = m;
    Ok(sol)
}

/// Integrated echoes of every transducer: `values[i * n_s + j]` is `W_i(s_grid[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub geom: AcquisitionGeometry,
    pub s_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl MeasurementSet {
    pub fn trace(&self, i: usize) -> &[f64] {
        let n = self.s_grid.len();
        &self.values[i * n..(i + 1) * n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolterraSolver {
    Triangular,
    Iterative,
}

/// Kernel table matching the sinogram radii of `geom`.
pub fn table_for_geometry(geom: &AcquisitionGeometry, cache_dir: Option<&Path>) -> Result<KernelTable> {
    let (r, s) = volterra_grids(geom.n_r - 1, geom.dr());
    match cache_dir {
        Some(dir) => cached_kernel_table(dir, &r, &s),
        None => build_kernel_table(&r, &s),
    }
}

/// Echoes from a sinogram (`g = r M`), one Volterra forward map per transducer.
pub fn measurements_from_sinogram(sino: &CircularMeansSinogram, table: &KernelTable) -> Result<MeasurementSet> {
    let geom = sino.geom;
    if table.r_grid.len() != geom.n_r - 1 {
        return config("kernel table does not match the sinogram radii");
    }
    let rows: Vec<Vec<f64>> = (0..geom.n_phi)
        .into_par_iter()
        .map(|i| {
            let row = sino.row(i);
            let m: Vec<f64> = (1..geom.n_r).map(|j| row[j] / geom.radius(j)).collect();
            volterra_forward(&m, table)
        })
        .collect::<Result<_>>()?;
    Ok(MeasurementSet { geom, s_grid: table.s_grid.clone(), values: rows.concat() })
}

/// Solves for `M_z` per transducer, forms `g(z, r) = r M_z(r)` and inverts.
pub fn ivus_sinogram(w: &MeasurementSet, table: &KernelTable, solver: VolterraSolver) -> Result<CircularMeansSinogram> {
    let geom = w.geom;
    geom.validate()?;
    let n = table.r_grid.len();
    if n != geom.n_r - 1 || w.s_grid.len() != n || w.values.len() != geom.n_phi * n {
        return config("measurements do not match the kernel table and geometry");
    }
    for (a, b) in w.s_grid.iter().zip(&table.s_grid) {
        if (a - b).abs() > 1e-12 * b {
            return config("measurement times differ from the kernel table");
        }
    }
    let rows: Vec<Vec<f64>> = (0..geom.n_phi)
        .into_par_iter()
        .map(|i| {
            let m = match solver {
                VolterraSolver::Triangular => solve_volterra_triangular(w.trace(i), table)?,
                VolterraSolver::Iterative => solve_volterra_iter(w.trace(i), table, 200, 1e-13)?.m,
            };
            let mut row = vec![0.0; geom.n_r];
            for j in 1..geom.n_r {
                row[j] = geom.radius(j) * m[j - 1];
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(CircularMeansSinogram { geom, values: rows.concat() })
}

pub fn ivus_reconstruct(
    w: &MeasurementSet,
    table: &KernelTable,
    solver: VolterraSolver,
    params: &InversionParams,
) -> Result<Reconstruction> {
    invert(&ivus_sinogram(w, table, solver)?, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_and_jump() {
        assert_eq!(kernel_k(0.5, 0.9).unwrap(), 0.0);
        assert_eq!(kernel_k(0.5, 1.0).unwrap(), 0.0);
        let r = 0.3;
        let k = 4.0 * PI * PI * kernel_k(r, 2.0 * r * (1.0 + 1e-6)).unwrap();
        assert!((k - PI / (2.0 * r)).abs() < 1e-4);
        assert!(kernel_k(0.0, 1.0).is_err());
        assert!(kernel_k1_ds(-1.0, 1.0).is_err());
    }

    #[test]
    fn derivative_limit_at_edge() {
        let r = 0.25;
        let near = kernel_k1_ds(r, 2.0 * r * (1.0 + 1e-7)).unwrap();
        let edge = kernel_k1_ds(r, 2.0 * r).unwrap();
        assert!((near - edge).abs() < 1e-5 * edge.abs());
        assert_eq!(kernel_k1_ds(r, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn table_matches_scalar_calls() {
        let (r, s) = volterra_grids(12, 0.1);
        let t = build_kernel_table(&r, &s).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                if s[j] <= 2.0 * r[i] {
                    assert_eq!(t.k1_at(i, j), 0.0);
                    assert_eq!(t.dk1_ds_at(i, j), 0.0);
                } else {
                    assert_eq!(t.k1_at(i, j), kernel_k1(r[i], s[j]).unwrap());
                    assert_eq!(t.dk1_ds_at(i, j), kernel_k1_ds(r[i], s[j]).unwrap());
                }
            }
        }
        assert_eq!(t, build_kernel_table(&r, &s).unwrap());
        assert!(build_kernel_table(&[0.1, 0.2, 0.4], &s).is_err());
    }

    #[test]
    fn diagonal_constant() {
        let (r, s) = volterra_grids(8, 0.05);
        let t = build_kernel_table(&r, &s).unwrap();
        let a = volterra_matrix(&t).unwrap();
        for j in 0..8 {
            let want = C_JUMP * (1.0 - 1.0 / (4.0 * (j + 1) as f64));
            assert!((a[j * 8 + j] - want).abs() < 1e-14);
            for k in j + 1..8 {
                assert_eq!(a[j * 8 + k], 0.0);
            }
        }
    }

    #[test]
    fn zero_data() {
        let (r, s) = volterra_grids(16, 0.05);
        let t = build_kernel_table(&r, &s).unwrap();
        assert!(volterra_forward(&[0.0; 16], &t).unwrap().iter().all(|&v| v == 0.0));
        assert!(solve_volterra_triangular(&[0.0; 16], &t).unwrap().iter().all(|&v| v == 0.0));
        let it = solve_volterra_iter(&[0.0; 16], &t, 50, 1e-12).unwrap();
        assert_eq!(it.iterations, 1);
        assert!(it.m.iter().all(|&v| v == 0.0));
        assert!(volterra_forward(&[0.0; 15], &t).is_err());
    }

    #[test]
    fn causality() {
        let (r, s) = volterra_grids(64, 0.03);
        let t = build_kernel_table(&r, &s).unwrap();
        let mut m = vec![0.0; 64];
        m[30] = 1.0;
        let w = volterra_forward(&m, &t).unwrap();
        assert!(w[..30].iter().all(|&v| v == 0.0));
        assert!(w[30] != 0.0);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let r: Vec<f64> = (1..=8).map(|k| 0.1 * k as f64).collect();
        let s: Vec<f64> = (1..=8).map(|k| 0.3 * k as f64).collect();
        let t = build_kernel_table(&r, &s).unwrap();
        assert!(matches!(volterra_forward(&[0.0; 8], &t), Err(Error::Config(_))));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (r, s) = volterra_grids(10, 0.07);
        let built = cached_kernel_table(dir.path(), &r, &s).unwrap();
        let loaded = cached_kernel_table(dir.path(), &r, &s).unwrap();
        assert_eq!(built, loaded);
        let key = KernelTable::grid_hash(&r, &s);
        assert!(dir.path().join(format!("kernel-{key}.bin")).exists());
        assert_ne!(key, KernelTable::grid_hash(&r[..9], &s[..9]));
    }
}
