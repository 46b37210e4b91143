//! Smooth test phantoms, polar resampling, noise injection and error metrics.

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cmt::CircularMeansSinogram;
use crate::error::{config, Error, Result};

/// Scalar field sampled on an `n x n` Cartesian grid covering
/// `[-half_width, half_width]^2`, pixel centers on the boundary included.
///
/// `values` is row-major with rows along `y`: `values[iy * n + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub n: usize,
    pub half_width: f64,
    pub values: Vec<f64>,
}

impl ImageGrid {
    pub fn zeros(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 {
            return config(format!("image grid needs n >= 8, got {n}"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return config(format!("image half width must be positive, got {half_width}"));
        }
        Ok(ImageGrid { n, half_width, values: vec![0.0; n * n] })
    }

    pub fn from_fn(n: usize, half_width: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut g = Self::zeros(n, half_width)?;
        for iy in 0..n {
            let y = g.coord(iy);
            for ix in 0..n {
                g.values[iy * n + ix] = f(g.coord(ix), y);
            }
        }
        Ok(g)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn coord(&self, k: usize) -> f64 {
        -self.half_width + self.spacing() * k as f64
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.n + ix]
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let h = self.spacing();
        let fx = (x + self.half_width) / h;
        let fy = (y + self.half_width) / h;
        let last = (self.n - 1) as f64;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= last && fy <= last) {
            return 0.0;
        }
        let ix = (fx.floor() as usize).min(self.n - 2);
        let iy = (fy.floor() as usize).min(self.n - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let n = self.n;
        let v = &self.values;
        let row0 = v[iy * n + ix] * (1.0 - tx) + v[iy * n + ix + 1] * tx;
        let row1 = v[(iy + 1) * n + ix] * (1.0 - tx) + v[(iy + 1) * n + ix + 1] * tx;
        row0 * (1.0 - ty) + row1 * ty
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ImageGrid { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Disk,
    Annulus,
}

/// One smooth feature; an annulus spans radii `[radius - thickness, radius]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub kind: FeatureKind,
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default)]
    pub thickness: f64,
    pub amplitude: f64,
    pub smoothing_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    /// Every feature must lie strictly inside this radius.
    pub support_radius: f64,
    pub features: Vec<Feature>,
}

/// Cosine taper: 0 below 0, 1 above 1.
pub fn ramp(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        0.5 * (1.0 - (PI * t).cos())
    }
}

impl Feature {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let d = (x - self.center[0]).hypot(y - self.center[1]);
        let w = self.smoothing_width;
        let outer = ramp((self.radius - d) / w);
        match self.kind {
            FeatureKind::Disk => self.amplitude * outer,
            FeatureKind::Annulus => {
                let inner = self.radius - self.thickness;
                self.amplitude * outer * ramp((d - inner) / w)
            }
        }
    }

    fn extent(&self) -> f64 {
        self.center[0].hypot(self.center[1]) + self.radius
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.support_radius > 0.0) {
            return Err(Error::Spec("support radius must be positive".into()));
        }
        for (k, f) in self.features.iter().enumerate() {
            if !(f.smoothing_width > 0.0) {
                return Err(Error::Spec(format!("feature {k}: smoothing width must be positive")));
            }
            if !(f.radius > 0.0) || !f.amplitude.is_finite() {
                return Err(Error::Spec(format!("feature {k}: bad radius or amplitude")));
            }
            if f.kind == FeatureKind::Annulus && !(f.thickness > 0.0 && f.thickness < f.radius) {
                return Err(Error::Spec(format!("feature {k}: annulus thickness must be in (0, radius)")));
            }
            if f.extent() >= self.support_radius {
                return Err(Error::Spec(format!(
                    "feature {k} reaches radius {} outside support {}",
                    f.extent(),
                    self.support_radius
                )));
            }
        }
        Ok(())
    }

    /// Analytic value of the phantom at a point.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.features.iter().map(|f| f.eval(x, y)).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        for f in &mut s.features {
            f.amplitude *= factor;
        }
        s
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let spec: PhantomSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Renders the phantom on an `n x n` grid.
pub fn make_phantom(spec: &PhantomSpec, n: usize, half_width: f64) -> Result<ImageGrid> {
    spec.validate()?;
    ImageGrid::from_fn(n, half_width, |x, y| spec.eval(x, y))
}

/// Built-in phantoms: disks inside the transducer circle, two vessel
/// walls around it and small inclusions between the walls.
pub mod presets {
    use super::{Feature, FeatureKind, PhantomSpec};

    pub const SMOOTHING: f64 = 0.04;

    fn disk(cx: f64, cy: f64, radius: f64, amplitude: f64) -> Feature {
        Feature {
            kind: FeatureKind::Disk,
            center: [cx, cy],
            radius,
            thickness: 0.0,
            amplitude,
            smoothing_width: SMOOTHING,
        }
    }

    fn annulus(radius: f64, thickness: f64, amplitude: f64) -> Feature {
        Feature {
            kind: FeatureKind::Annulus,
            center: [0.0, 0.0],
            radius,
            thickness,
            amplitude,
            smoothing_width: SMOOTHING,
        }
    }

    /// Disks inside the transducer circle of radius 0.5.
    pub fn interior_features() -> Vec<Feature> {
        vec![
            disk(-0.08, 0.08, 0.2, 1.0),
            disk(0.22, -0.12, 0.12, 1.0),
            disk(-0.12, -0.26, 0.1, 0.6),
            disk(0.24, 0.22, 0.08, 1.0),
        ]
    }

    /// Two concentric walls outside the transducer circle.
    pub fn wall_features() -> Vec<Feature> {
        vec![annulus(0.95, 0.14, 1.0), annulus(1.3, 0.12, 0.7)]
    }

    /// Small exterior inclusions with partly invisible boundaries.
    pub fn inclusion_features() -> Vec<Feature> {
        vec![
            disk(0.0, 1.12, 0.07, 1.0),
            disk(1.12 * (-2.1f64).cos(), 1.12 * (-2.1f64).sin(), 0.07, 1.0),
            disk(0.68, -0.18, 0.08, 0.8),
            disk(-0.66, 0.2, 0.06, 1.0),
        ]
    }

    pub fn interior(support_radius: f64) -> PhantomSpec {
        PhantomSpec { support_radius, features: interior_features() }
    }

    pub fn walls(support_radius: f64) -> PhantomSpec {
        let mut features = interior_features();
        features.extend(wall_features());
        PhantomSpec { support_radius, features }
    }

    pub fn inclusions(support_radius: f64) -> PhantomSpec {
        let mut spec = walls(support_radius);
        spec.features.extend(inclusion_features());
        spec
    }

    /// Low-bandwidth radially symmetric disk at the origin.
    pub fn centered_disk(support_radius: f64, radius: f64, smoothing: f64) -> PhantomSpec {
        PhantomSpec {
            support_radius,
            features: vec![Feature { smoothing_width: smoothing, ..disk(0.0, 0.0, radius, 1.0) }],
        }
    }
}

/// Samples of an image on a polar grid: `values[ir * n_theta + it]` is the
/// value at radius `ir * r_max / (n_r - 1)` and angle `2 pi it / n_theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSamples {
    pub n_r: usize,
    pub n_theta: usize,
    pub r_max: f64,
    pub values: Vec<f64>,
}

impl PolarSamples {
    pub fn radius(&self, ir: usize) -> f64 {
        self.r_max * ir as f64 / (self.n_r - 1) as f64
    }
    pub fn angle(&self, it: usize) -> f64 {
        2.0 * PI * it as f64 / self.n_theta as f64
    }
}

/// Bilinear resampling onto radii `[0, half_width]`.
pub fn cartesian_to_polar(img: &ImageGrid, n_r: usize, n_theta: usize) -> Result<PolarSamples> {
    if n_r < 4 || n_theta < 4 {
        return config("polar grid needs at least 4 radii and 4 angles");
    }
    let mut p = PolarSamples { n_r, n_theta, r_max: img.half_width, values: vec![0.0; n_r * n_theta] };
    for ir in 0..n_r {
        let r = p.radius(ir);
        for it in 0..n_theta {
            let th = p.angle(it);
            p.values[ir * n_theta + it] = img.sample(r * th.cos(), r * th.sin());
        }
    }
    Ok(p)
}

/// Inverse of [`cartesian_to_polar`]: bilinear in `(r, theta)`, periodic in
/// angle, zero beyond `r_max`.
pub fn polar_to_cartesian(p: &PolarSamples, n: usize, half_width: f64) -> Result<ImageGrid> {
    let dr = p.r_max / (p.n_r - 1) as f64;
    let dth = 2.0 * PI / p.n_theta as f64;
    ImageGrid::from_fn(n, half_width, |x, y| {
        let r = x.hypot(y);
        if r > p.r_max {
            return 0.0;
        }
        let th = y.atan2(x).rem_euclid(2.0 * PI);
        let fr = r / dr;
        let ir = (fr.floor() as usize).min(p.n_r - 2);
        let tr = fr - ir as f64;
        let ft = th / dth;
        let it = (ft.floor() as usize) % p.n_theta;
        let tt = ft - ft.floor();
        let it1 = (it + 1) % p.n_theta;
        let v = |a: usize, b: usize| p.values[a * p.n_theta + b];
        let lo = v(ir, it) * (1.0 - tt) + v(ir, it1) * tt;
        let hi = v(ir + 1, it) * (1.0 - tt) + v(ir + 1, it1) * tt;
        lo * (1.0 - tr) + hi * tr
    })
}

/// Adds white Gaussian noise scaled to `level * ||values||_2`.
///
/// Entries flagged in `skip` are left untouched (used for the `r = 0`
/// column of a sinogram, which is identically zero).
pub fn add_noise_values(values: &[f64], level: f64, seed: u64, skip: impl Fn(usize) -> bool) -> Result<Vec<f64>> {
    if !(level >= 0.0 && level.is_finite()) {
        return config(format!("noise level must be nonnegative, got {level}"));
    }
    if level == 0.0 {
        return Ok(values.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta: Vec<f64> = (0..values.len())
        .map(|k| {
            let x: f64 = StandardNormal.sample(&mut rng);
            if skip(k) {
                0.0
            } else {
                x
            }
        })
        .collect();
    let signal = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let raw = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if raw > 0.0 { level * signal / raw } else { 0.0 };
    Ok(values.iter().zip(&eta).map(|(v, e)| v + scale * e).collect())
}

/// Sinogram plus noise at `level` of its L2 norm; deterministic in `seed`.
pub fn add_noise(sino: &CircularMeansSinogram, level: f64, seed: u64) -> Result<CircularMeansSinogram> {
    let n_r = sino.geom.n_r;
    let values = add_noise_values(&sino.values, level, seed, |k| k % n_r == 0)?;
    Ok(CircularMeansSinogram { geom: sino.geom, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rel_l2: f64,
    pub linf: f64,
    pub ncc: f64,
}

/// Centered cosine similarity of two equally long vectors.
pub fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x - ma, y - mb);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    match (aa > 0.0, bb > 0.0) {
        (true, true) => (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0),
        (false, false) => 1.0,
        _ => 0.0,
    }
}

fn metrics_of(rec: &[f64], truth: &[f64]) -> Result<Metrics> {
    let tn = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if tn == 0.0 {
        return Err(Error::UndefinedMetric("reference image has zero norm".into()));
    }
    let mut diff = 0.0;
    let mut linf = 0.0f64;
    for (r, t) in rec.iter().zip(truth) {
        let d = r - t;
        diff += d * d;
        linf = linf.max(d.abs());
    }
    Ok(Metrics { rel_l2: diff.sqrt() / tn, linf, ncc: ncc(rec, truth) })
}

pub fn compare(rec: &ImageGrid, truth: &ImageGrid) -> Result<Metrics> {
    if rec.n != truth.n || rec.half_width != truth.half_width {
        return config("compared images must share grid size and extent");
    }
    metrics_of(&rec.values, &truth.values)
}

/// Metrics restricted to pixels where `mask(x, y)` holds.
pub fn compare_masked(rec: &ImageGrid, truth: &ImageGrid, mask: impl Fn(f64, f64) -> bool) -> Result<Metrics> {
    if rec.n != truth.n || rec.half_width != truth.half_width {
        return config("compared images must share grid size and extent");
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for iy in 0..rec.n {
        for ix in 0..rec.n {
            if mask(rec.coord(ix), rec.coord(iy)) {
                a.push(rec.get(ix, iy));
                b.push(truth.get(ix, iy));
            }
        }
    }
    if a.is_empty() {
        return Err(Error::UndefinedMetric("mask selects no pixels".into()));
    }
    metrics_of(&a, &b)
}

/// Mean of the image over the masked pixels.
pub fn masked_mean(img: &ImageGrid, mask: impl Fn(f64, f64) -> bool) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for iy in 0..img.n {
        for ix in 0..img.n {
            if mask(img.coord(ix), img.coord(iy)) {
                sum += img.get(ix, iy);
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
