//! Finite-difference wave propagation for synthetic IVUS echoes.
//!
//! Each transducer fires a short pulse twice, once into the perturbed medium
//! `c^2 = 1 + m` and once into the unit-speed medium. The difference of the
//! two pressures at the transducer, integrated in time, is the echo `W(s)`
//! consumed by [`crate::ivus`].

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmt::AcquisitionGeometry;
use crate::error::{config, Error, Result};
use crate::ivus::MeasurementSet;
use crate::phantom::ImageGrid;
use crate::specfun::quad::lagrange_stencil;

/// Largest `|m|` accepted before the linearized model stops being meaningful.
pub const BORN_GUARD: f64 = 0.2;
pub const MIN_SPONGE_CELLS: usize = 16;

/// Speed perturbation `m` with `c^2 = 1 + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedField {
    pub grid: ImageGrid,
}

impl SpeedField {
    pub fn new(grid: ImageGrid) -> Result<Self> {
        let worst = grid.max_abs();
        if !worst.is_finite() || worst >= BORN_GUARD {
            return config(format!("speed perturbation max |m| = {worst} is outside the Born regime (< {BORN_GUARD})"));
        }
        Ok(SpeedField { grid })
    }

    /// Zero perturbation on a tiny grid.
    pub fn homogeneous() -> Self {
        SpeedField { grid: ImageGrid::zeros(8, 1.0).expect("valid grid") }
    }

    /// `c = 1 + contrast * p`, so the peak speed is `1 + contrast` for a
    /// phantom with unit maximum.
    pub fn from_phantom(p: &ImageGrid, contrast: f64) -> Result<Self> {
        let grid = ImageGrid { values: p.values.iter().map(|v| (1.0 + contrast * v).powi(2) - 1.0).collect(), ..p.clone() };
        Self::new(grid)
    }

    pub fn m_at(&self, x: f64, y: f64) -> f64 {
        self.grid.sample(x, y)
    }

    pub fn c_max(&self) -> f64 {
        let top = self.grid.values.iter().cloned().fold(0.0f64, f64::max);
        (1.0 + top).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dx: f64,
    pub dt: f64,
    pub n_steps: usize,
    /// Duration of the source pulse.
    pub source_width: f64,
    pub sponge_width: usize,
    /// Peak damping rate inside the sponge.
    pub sponge_strength: f64,
    /// Half-width of the undamped region; the sponge lies outside it.
    pub half_width: f64,
}

impl SimConfig {
    /// Grid for recording echoes up to `s_end` from transducers on `geom`,
    /// with a medium whose perturbation lives inside radius `geom.r1`.
    ///
    /// The sponge cannot absorb the slowly varying part of a unit-mass pulse,
    /// so the undamped region is made wide enough that anything returning
    /// from the boundary reaches a transducer only after `s_end`.
    pub fn for_geometry(geom: &AcquisitionGeometry, dx: f64, c_max: f64, s_end: f64) -> Self {
        let dt = 0.6 * dx / c_max;
        let source_width = 12.0 * dx;
        let n_steps = ((s_end + source_width) / dt).ceil() as usize + 4;
        let sponge_width = 24;
        SimConfig {
            dx,
            dt,
            n_steps,
            source_width,
            sponge_width,
            sponge_strength: default_sponge_strength(sponge_width, dx),
            half_width: (geom.r0 + 0.5 * (s_end + source_width) + 4.0 * dx).max(geom.r1 + 4.0 * dx),
        }
    }

    pub fn validate(&self, c_max: f64) -> Result<()> {
        if !(self.dx > 0.0 && self.dt > 0.0 && self.half_width > 0.0) {
            return config("dx, dt and half_width must be positive");
        }
        let limit = self.dx / (2f64.sqrt() * c_max);
        if self.dt > limit {
            return config(format!("time step {} violates the CFL bound {limit}", self.dt));
        }
        if self.sponge_width < MIN_SPONGE_CELLS {
            return config(format!("sponge needs at least {MIN_SPONGE_CELLS} cells, got {}", self.sponge_width));
        }
        if !(self.sponge_strength >= 0.0) {
            return config("sponge strength must be non-negative");
        }
        if !(self.source_width >= 2.0 * self.dt) {
            return config("source pulse must span at least two time steps");
        }
        if self.n_steps < 2 {
            return config("need at least two time steps");
        }
        Ok(())
    }

    /// Time at which the pulse peaks; echo times are measured from here.
    pub fn pulse_center(&self) -> f64 {
        0.5 * self.source_width
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    /// Nodes per side.
    pub fn n_grid(&self) -> usize {
        2 * self.half_nodes() + 1
    }

    fn half_nodes(&self) -> usize {
        (self.half_width / self.dx).ceil() as usize + self.sponge_width
    }
}

/// Round-trip amplitude loss of about `e^-9` through a quadratic profile.
pub fn default_sponge_strength(width: usize, dx: f64) -> f64 {
    13.5 / (width as f64 * dx)
}

/// Unit-mass Blackman window on `[0, width]`.
pub fn source_pulse(t: f64, width: f64) -> f64 {
    if t <= 0.0 || t >= width {
        return 0.0;
    }
    let x = t / width;
    (0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos()) / (0.42 * width)
}

/// Bilinear stencil of a point on the simulation grid.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    idx: [usize; 4],
    w: [f64; 4],
}

/// Leapfrog solver for `u_tt + sigma u_t = c^2 (Lap u) + q(t) delta_src`
/// with a 5-point Laplacian and zero values on the outer frame.
pub struct WaveSolver {
    n: usize,
    half: usize,
    dx: f64,
    dt: f64,
    c2: Vec<f64>,
    sigma: Vec<f64>,
    prev: Vec<f64>,
    cur: Vec<f64>,
    next: Vec<f64>,
    step: usize,
}

impl WaveSolver {
    pub fn new(field: &SpeedField, cfg: &SimConfig) -> Result<Self> {
        cfg.validate(field.c_max())?;
        let half = cfg.half_nodes();
        let n = 2 * half + 1;
        let inner = (cfg.half_width / cfg.dx).ceil() as usize;
        let mut c2 = vec![1.0; n * n];
        let mut sigma = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = (coord(ix, half, cfg.dx), coord(iy, half, cfg.dx));
                c2[iy * n + ix] = 1.0 + field.m_at(x, y);
                let depth = ix.abs_diff(half).max(iy.abs_diff(half)).saturating_sub(inner);
                let d = depth as f64 / cfg.sponge_width as f64;
                sigma[iy * n + ix] = cfg.sponge_strength * d * d;
            }
        }
        Ok(WaveSolver { n, half, dx: cfg.dx, dt: cfg.dt, c2, sigma, prev: vec![0.0; n * n], cur: vec![0.0; n * n], next: vec![0.0; n * n], step: 0 })
    }

    pub fn n_grid(&self) -> usize {
        self.n
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    fn stencil(&self, p: [f64; 2]) -> Result<Stencil> {
        let fx = p[0] / self.dx + self.half as f64;
        let fy = p[1] / self.dx + self.half as f64;
        if !(fx >= 1.0 && fy >= 1.0 && fx <= (self.n - 2) as f64 && fy <= (self.n - 2) as f64) {
            return config(format!("point ({}, {}) lies outside the simulation grid", p[0], p[1]));
        }
        let (ix, iy) = ((fx.floor() as usize).min(self.n - 3), (fy.floor() as usize).min(self.n - 3));
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let n = self.n;
        Ok(Stencil {
            idx: [iy * n + ix, iy * n + ix + 1, (iy + 1) * n + ix, (iy + 1) * n + ix + 1],
            w: [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty],
        })
    }

    /// Advances one step with point-source amplitude `q` spread over the
    /// bilinear neighbours of `src` (a discrete delta of unit mass).
    fn advance(&mut self, q: f64, src: &Stencil) {
        let n = self.n;
        let r = (self.dt / self.dx).powi(2);
        let dt = self.dt;
        for iy in 1..n - 1 {
            let row = iy * n;
            let (up, mid, down) = (&self.cur[row - n..row], &self.cur[row..row + n], &self.cur[row + n..row + 2 * n]);
            let prev = &self.prev[row..row + n];
            let c2 = &self.c2[row..row + n];
            let sg = &self.sigma[row..row + n];
            let out = &mut self.next[row..row + n];
            for ix in 1..n - 1 {
                let lap = up[ix] + down[ix] + mid[ix - 1] + mid[ix + 1] - 4.0 * mid[ix];
                let damp = 0.5 * sg[ix] * dt;
                out[ix] = (2.0 * mid[ix] - (1.0 - damp) * prev[ix] + r * c2[ix] * lap) / (1.0 + damp);
            }
        }
        if q != 0.0 {
            let amp = dt * dt * q / (self.dx * self.dx);
            for k in 0..4 {
                let i = src.idx[k];
                self.next[i] += amp * src.w[k] / (1.0 + 0.5 * self.sigma[i] * dt);
            }
        }
        std::mem::swap(&mut self.prev, &mut self.cur);
        std::mem::swap(&mut self.cur, &mut self.next);
        self.step += 1;
    }

    /// One time step with source amplitude `q` injected at `src`.
    pub fn step_with(&mut self, q: f64, src: [f64; 2]) -> Result<()> {
        let s = self.stencil(src)?;
        self.advance(q, &s);
        Ok(())
    }

    fn sample(&self, s: &Stencil) -> f64 {
        (0..4).map(|k| s.w[k] * self.cur[s.idx[k]]).sum()
    }

    /// Discrete energy between the two stored time levels; conserved by the
    /// undamped scheme and non-increasing once the source is off.
    pub fn energy(&self) -> f64 {
        let n = self.n;
        let mut kinetic = 0.0;
        let mut strain = 0.0;
        for iy in 0..n {
            for ix in 0..n {
                let i = iy * n + ix;
                let v = (self.cur[i] - self.prev[i]) / self.dt;
                kinetic += v * v / self.c2[i];
                if ix + 1 < n {
                    strain += (self.cur[i + 1] - self.cur[i]) * (self.prev[i + 1] - self.prev[i]);
                }
                if iy + 1 < n {
                    strain += (self.cur[i + n] - self.cur[i]) * (self.prev[i + n] - self.prev[i]);
                }
            }
        }
        0.5 * (kinetic + strain / (self.dx * self.dx)) * self.dx * self.dx
    }

    fn check_finite(&self, what: &str) -> Result<()> {
        if self.cur.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Stability(format!("{what}: non-finite pressure at step {}", self.step)))
        }
    }

    /// Fires the pulse from `src` and records the pressure at each probe for
    /// every time level `0..=n_steps`. Returns one trace per probe.
    pub fn run(&mut self, cfg: &SimConfig, src: [f64; 2], probes: &[[f64; 2]]) -> Result<Vec<Vec<f64>>> {
        let s = self.stencil(src)?;
        let ps: Vec<Stencil> = probes.iter().map(|&p| self.stencil(p)).collect::<Result<_>>()?;
        let mut traces: Vec<Vec<f64>> = ps.iter().map(|p| vec![self.sample(p)]).collect();
        for k in 0..cfg.n_steps {
            let q = source_pulse(cfg.time(k), cfg.source_width);
            self.advance(q, &s);
            for (t, p) in traces.iter_mut().zip(&ps) {
                t.push(self.sample(p));
            }
            if (k + 1) % 64 == 0 {
                self.check_finite("wave run")?;
            }
        }
        self.check_finite("wave run")?;
        Ok(traces)
    }
}

fn coord(k: usize, half: usize, dx: f64) -> f64 {
    (k as f64 - half as f64) * dx
}

/// Pressure at the transducer in the perturbed medium minus that in the
/// unit-speed medium, sampled at `t = k dt`, `k = 0..=n_steps`.
pub fn simulate_difference(field: &SpeedField, source_pos: [f64; 2], cfg: &SimConfig) -> Result<Vec<f64>> {
    let mut exc = WaveSolver::new(field, cfg)?;
    let u_exc = exc.run(cfg, source_pos, &[source_pos])?.remove(0);
    drop(exc);
    let mut free = WaveSolver::new(&SpeedField::homogeneous(), cfg)?;
    let u0 = free.run(cfg, source_pos, &[source_pos])?.remove(0);
    Ok(u_exc.iter().zip(&u0).map(|(a, b)| a - b).collect())
}

/// Cumulative trapezoid with `W(0) = 0`.
pub fn integrate_trace(w: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for (k, v) in w.iter().enumerate() {
        if k > 0 {
            acc += 0.5 * dt * (w[k - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// `W` on `s_grid`, with `s` counted from the pulse center.
pub fn resample_echo(big_w: &[f64], cfg: &SimConfig, s_grid: &[f64]) -> Result<Vec<f64>> {
    let t_last = cfg.time(big_w.len().saturating_sub(1));
    s_grid
        .iter()
        .map(|&s| {
            let t = s + cfg.pulse_center();
            if t > t_last {
                return config(format!("echo time {s} lies past the simulated window"));
            }
            let (i, w) = lagrange_stencil(big_w.len(), cfg.dt, t);
            Ok(w.iter().enumerate().map(|(k, wk)| wk * big_w.get(i + k).copied().unwrap_or(0.0)).sum())
        })
        .collect()
}

/// Integrated echoes for every transducer of `geom`, resampled on `s_grid`.
pub fn acquire_all(field: &SpeedField, geom: &AcquisitionGeometry, cfg: &SimConfig, s_grid: &[f64]) -> Result<MeasurementSet> {
    geom.validate()?;
    cfg.validate(field.c_max())?;
    if let Some(&s_end) = s_grid.last() {
        if cfg.time(cfg.n_steps) < s_end + cfg.pulse_center() {
            return config(format!("{} steps do not reach echo time {s_end}", cfg.n_steps));
        }
    }
    let rows: Vec<Vec<f64>> = (0..geom.n_phi)
        .into_par_iter()
        .map(|i| {
            let w = simulate_difference(field, geom.transducer(i), cfg)?;
            resample_echo(&integrate_trace(&w, cfg.dt), cfg, s_grid)
        })
        .collect::<Result<_>>()?;
    Ok(MeasurementSet { geom: *geom, s_grid: s_grid.to_vec(), values: rows.concat() })
}
