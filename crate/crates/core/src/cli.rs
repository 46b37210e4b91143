//! Experiment runner behind the `ivtomo` binary.
//!
//! A run writes everything it computes into one directory:
//!
//! | file | contents |
//! |------|----------|
//! | `config.json` | the resolved configuration (rerunnable as `--config`) |
//! | `phantom.{bin,json,pgm}` | ground truth on the reconstruction grid |
//! | `sinogram`, `traces` or `echoes` `.{bin,json}` | measured data after noise |
//! | `spectral.{bin,json}` | regularized angular-spectral coefficients |
//! | `reconstruction.{bin,json,pgm}` | the image |
//! | `metrics.json` | `{rel_l2, linf, ncc, stage_timings_ms}` |
//!
//! [`resume`] reloads the configuration and measured data from such a
//! directory and redoes the reconstruction.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cmt::{forward_cmt, invert, AcquisitionGeometry, CircularMeansSinogram, InversionParams, Reconstruction};
use crate::error::{config, Error, Result};
use crate::io;
use crate::ivpa::{abel_forward, abel_inverse, TransducerTraces};
use crate::ivus::{ivus_sinogram, measurements_from_sinogram, table_for_geometry, KernelTable, MeasurementSet, VolterraSolver};
use crate::phantom::{add_noise, add_noise_values, compare, make_phantom, presets, ImageGrid, PhantomSpec};
use crate::wavesim::{acquire_all, SimConfig, SpeedField};

/// Horizontal contour length used for noisy data when none is given.
pub const NOISY_CONTOUR_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Interior disks, transducers surround the support.
    Interior,
    /// Interior disks plus vessel walls outside the transducer circle.
    ExtInt,
    /// Walls plus small inclusions with partly invisible boundaries.
    ExtInvisible,
    /// Photoacoustic traces through the Abel pair.
    Ivpa,
    /// Ultrasound echoes from the Born/Volterra model.
    IvusBorn,
    /// Ultrasound echoes from finite-difference wave simulation.
    IvusWave,
}

impl Experiment {
    fn default_preset(self) -> GeomPreset {
        match self {
            Experiment::IvusWave => GeomPreset::Desk,
            _ => GeomPreset::Full,
        }
    }

    fn default_phantom(self, support_radius: f64) -> PhantomSpec {
        match self {
            Experiment::Interior => presets::interior(support_radius),
            Experiment::ExtInt | Experiment::Ivpa => presets::walls(support_radius),
            Experiment::ExtInvisible | Experiment::IvusBorn | Experiment::IvusWave => presets::inclusions(support_radius),
        }
    }

    fn is_ivus(self) -> bool {
        matches!(self, Experiment::IvusBorn | Experiment::IvusWave)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeomPreset {
    /// 256 transducers, 401 radii.
    Full,
    /// 64 transducers, 201 radii.
    Desk,
    /// 32 transducers, 101 radii.
    Small,
}

impl GeomPreset {
    pub fn geometry(self) -> AcquisitionGeometry {
        let (n_phi, n_r) = match self {
            GeomPreset::Full => (256, 401),
            GeomPreset::Desk => (64, 201),
            GeomPreset::Small => (32, 101),
        };
        AcquisitionGeometry { r0: 0.5, r1: 1.5, n_phi, n_r }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub geom_preset: Option<GeomPreset>,
    /// Overrides the preset when present.
    pub geometry: Option<AcquisitionGeometry>,
    pub phantom: Option<PhantomSpec>,
    pub phantom_file: Option<PathBuf>,
    /// Resolution of the phantom raster fed to the forward models.
    pub phantom_n: usize,
    /// Points per integration circle, as a multiple of `n_phi`.
    pub arc_factor: usize,
    pub inversion: InversionParams,
    /// Relative L2 noise added to the measured data.
    pub noise: f64,
    pub seed: u64,
    /// Peak relative speed perturbation for the ultrasound experiments.
    pub contrast: f64,
    pub sim_dx: f64,
    pub solver: VolterraSolver,
    /// Kernel tables are cached here; defaults to `<out>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::Interior,
            geom_preset: None,
            geometry: None,
            phantom: None,
            phantom_file: None,
            phantom_n: 1024,
            arc_factor: 4,
            inversion: InversionParams::default(),
            noise: 0.0,
            seed: 0,
            contrast: 0.01,
            sim_dx: 0.01,
            solver: VolterraSolver::Triangular,
            cache_dir: None,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Fills every default so the written config reproduces the run alone.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = self.clone();
        let geom = match c.geometry {
            Some(g) => g,
            None => c.geom_preset.unwrap_or(c.experiment.default_preset()).geometry(),
        };
        geom.validate()?;
        c.geometry = Some(geom);
        if c.phantom.is_none() {
            c.phantom = Some(match &c.phantom_file {
                Some(p) => PhantomSpec::from_json_file(p)?,
                None => c.experiment.default_phantom(geom.r1),
            });
        }
        c.phantom.as_ref().expect("set above").validate()?;
        if !(c.noise >= 0.0 && c.noise.is_finite()) {
            return config(format!("noise level must be a finite non-negative number, got {}", c.noise));
        }
        if c.experiment.is_ivus() && !(c.contrast > 0.0 && c.contrast.is_finite()) {
            return config(format!("contrast must be positive, got {}", c.contrast));
        }
        if c.phantom_n < 8 || c.arc_factor == 0 {
            return config("phantom_n must be at least 8 and arc_factor positive");
        }
        if !(c.sim_dx > 0.0) {
            return config("sim_dx must be positive");
        }
        if c.noise > 0.0 && c.inversion.m.is_none() {
            c.inversion.m = Some(NOISY_CONTOUR_M);
        }
        let cp = c.inversion.contour_params(&geom);
        c.inversion.a = Some(cp.a);
        c.inversion.m = Some(cp.m);
        c.inversion.n_horizontal = Some(cp.n_horizontal);
        c.inversion.image_half_width = Some(c.inversion.half_width(&geom));
        if c.cache_dir.is_none() {
            c.cache_dir = Some(c.out.join("cache"));
        }
        Ok(c)
    }

    pub fn geom(&self) -> AcquisitionGeometry {
        self.geometry.unwrap_or(self.experiment.default_preset().geometry())
    }
}

/// Built-in phantoms by name, for the transducer geometry `R1 = 1.5`.
pub fn preset_specs() -> [(&'static str, PhantomSpec); 3] {
    [
        ("interior", presets::interior(1.5)),
        ("walls", presets::walls(1.5)),
        ("inclusions", presets::inclusions(1.5)),
    ]
}

/// Writes each built-in phantom as `<dir>/<name>.json`, loadable with `--phantom`.
pub fn write_presets(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    preset_specs()
        .into_iter()
        .map(|(name, spec)| {
            let path = dir.join(format!("{name}.json"));
            write_json(&path, &spec)?;
            Ok(path)
        })
        .collect()
}

/// Error tagged with the pipeline stage that produced it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.error.exit_code()
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

pub type StageResult<T> = std::result::Result<T, StageError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub rel_l2: f64,
    pub linf: f64,
    pub ncc: f64,
    pub stage_timings_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub metrics: RunMetrics,
    pub reconstruction: ImageGrid,
    pub truth: ImageGrid,
    pub imag_warning: bool,
}

/// Measured data of one run, in whichever form the experiment produces.
#[derive(Debug, Clone)]
pub enum Measured {
    Sinogram(CircularMeansSinogram),
    Traces(TransducerTraces),
    Echoes(MeasurementSet),
}

struct Stages {
    timings: BTreeMap<String, f64>,
}

impl Stages {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> StageResult<T> {
        let start = Instant::now();
        let out = f().map_err(|error| StageError { stage, error })?;
        *self.timings.entry(stage.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64() * 1e3;
        Ok(out)
    }
}

fn tag<T>(stage: &'static str, r: Result<T>) -> StageResult<T> {
    r.map_err(|error| StageError { stage, error })
}

/// Ground truth on the reconstruction grid: the phantom for the CMT and
/// photoacoustic runs, `m = c^2 - 1` for the ultrasound runs.
fn truth_image(cfg: &RunConfig, spec: &PhantomSpec, n: usize, half_width: f64) -> Result<ImageGrid> {
    let p = make_phantom(spec, n, half_width)?;
    Ok(if cfg.experiment.is_ivus() { SpeedField::from_phantom(&p, cfg.contrast)?.grid } else { p })
}

fn kernel(cfg: &RunConfig, geom: &AcquisitionGeometry) -> Result<KernelTable> {
    table_for_geometry(geom, cfg.cache_dir.as_deref())
}

/// Runs one experiment end to end; `cfg` is resolved first.
pub fn run(cfg: &RunConfig) -> StageResult<RunReport> {
    let cfg = tag("config", cfg.resolve())?;
    let out = cfg.out.clone();
    tag("output", fs::create_dir_all(&out).map_err(Error::from))?;
    tag("output", write_json(&out.join("config.json"), &cfg))?;
    let geom = cfg.geom();
    let spec = cfg.phantom.clone().expect("resolved");
    let mut st = Stages { timings: BTreeMap::new() };

    let field = st.run("phantom", || truth_image(&cfg, &spec, cfg.phantom_n, geom.r1))?;
    let n_arc = cfg.arc_factor * geom.n_phi;
    let measured = match cfg.experiment {
        Experiment::Interior | Experiment::ExtInt | Experiment::ExtInvisible => {
            let sino = st.run("forward", || forward_cmt(&field, &geom, n_arc))?;
            let sino = st.run("noise", || if cfg.noise > 0.0 { add_noise(&sino, cfg.noise, cfg.seed) } else { Ok(sino) })?;
            tag("output", io::save_sinogram(&out.join("sinogram"), &sino, json!({ "noise": cfg.noise, "seed": cfg.seed })))?;
            Measured::Sinogram(sino)
        }
        Experiment::Ivpa => {
            let sino = st.run("forward", || forward_cmt(&field, &geom, n_arc))?;
            let mut traces = st.run("abel_forward", || abel_forward(&sino, geom.dr()))?;
            st.run("noise", || {
                if cfg.noise > 0.0 {
                    let n_t = traces.n_t;
                    traces.values = add_noise_values(&traces.values, cfg.noise, cfg.seed, |k| k % n_t == 0)?;
                }
                Ok(())
            })?;
            tag("output", io::save_traces(&out.join("traces"), &traces, json!({ "noise": cfg.noise, "seed": cfg.seed })))?;
            Measured::Traces(traces)
        }
        Experiment::IvusBorn | Experiment::IvusWave => {
            let table = st.run("kernel_table", || kernel(&cfg, &geom))?;
            let (mut echoes, sim) = if cfg.experiment == Experiment::IvusBorn {
                let sino = st.run("forward", || forward_cmt(&field, &geom, n_arc))?;
                (st.run("volterra_forward", || measurements_from_sinogram(&sino, &table))?, None)
            } else {
                let speed = tag("wave_sim", SpeedField::new(field.clone()))?;
                let s_end = *table.s_grid.last().expect("non-empty grid");
                let sim = SimConfig::for_geometry(&geom, cfg.sim_dx, speed.c_max(), s_end);
                (st.run("wave_sim", || acquire_all(&speed, &geom, &sim, &table.s_grid))?, Some(sim))
            };
            st.run("noise", || {
                if cfg.noise > 0.0 {
                    echoes.values = add_noise_values(&echoes.values, cfg.noise, cfg.seed, |_| false)?;
                }
                Ok(())
            })?;
            let extra = json!({ "noise": cfg.noise, "seed": cfg.seed, "contrast": cfg.contrast, "sim": sim });
            tag("output", io::save_echoes(&out.join("echoes"), &echoes, extra))?;
            Measured::Echoes(echoes)
        }
    };
    reconstruct(&cfg, &spec, measured, st)
}

/// Reloads `config.json` and the measured data written by [`run`] in `dir`
/// and repeats the reconstruction stages, overwriting their outputs.
pub fn resume(dir: &Path) -> StageResult<RunReport> {
    let mut cfg = tag("config", RunConfig::from_json_file(&dir.join("config.json")))?;
    cfg.out = dir.to_path_buf();
    let cfg = tag("config", cfg.resolve())?;
    let spec = cfg.phantom.clone().expect("resolved");
    let measured = tag(
        "load",
        match cfg.experiment {
            Experiment::Interior | Experiment::ExtInt | Experiment::ExtInvisible => {
                io::load_sinogram(&dir.join("sinogram")).map(Measured::Sinogram)
            }
            Experiment::Ivpa => io::load_traces(&dir.join("traces")).map(Measured::Traces),
            Experiment::IvusBorn | Experiment::IvusWave => io::load_echoes(&dir.join("echoes")).map(Measured::Echoes),
        },
    )?;
    reconstruct(&cfg, &spec, measured, Stages { timings: BTreeMap::new() })
}

fn reconstruct(cfg: &RunConfig, spec: &PhantomSpec, measured: Measured, mut st: Stages) -> StageResult<RunReport> {
    let out = &cfg.out;
    let geom = cfg.geom();
    let sino = match measured {
        Measured::Sinogram(s) => s,
        Measured::Traces(t) => st.run("abel_inverse", || abel_inverse(&t))?,
        Measured::Echoes(w) => {
            let table = st.run("kernel_table", || kernel(cfg, &geom))?;
            st.run("volterra_solve", || ivus_sinogram(&w, &table, cfg.solver))?
        }
    };
    let rec: Reconstruction = st.run("invert", || invert(&sino, &cfg.inversion))?;
    for (k, v) in &rec.stage_timings_ms {
        st.timings.insert(format!("invert.{k}"), *v);
    }
    if rec.imag_warning {
        eprintln!("warning: imaginary part of the image is {:.3e} of its real part", rec.imag_ratio);
    }
    let half_width = cfg.inversion.half_width(&geom);
    let truth = tag("metrics", truth_image(cfg, spec, rec.image.n, half_width))?;
    let m = tag("metrics", compare(&rec.image, &truth))?;

    tag("output", io::save_image(&out.join("phantom"), &truth, json!({ "experiment": cfg.experiment })))?;
    tag("output", io::save_spectral(&out.join("spectral"), &rec.spectral, &geom))?;
    tag("output", io::save_image(&out.join("reconstruction"), &rec.image, json!({ "experiment": cfg.experiment })))?;
    let peak = truth.max_abs().max(f64::MIN_POSITIVE);
    let (lo, hi) = (-0.1 * peak, 1.1 * peak);
    tag("output", io::render(&truth, &out.join("phantom.pgm"), lo, hi))?;
    tag("output", io::render(&rec.image, &out.join("reconstruction.pgm"), lo, hi))?;

    let metrics = RunMetrics { rel_l2: m.rel_l2, linf: m.linf, ncc: m.ncc, stage_timings_ms: st.timings };
    tag("output", write_json(&out.join("metrics.json"), &metrics))?;
    Ok(RunReport { metrics, reconstruction: rec.image, truth, imag_warning: rec.imag_warning })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
