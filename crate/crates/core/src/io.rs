//! Array files: raw little-endian `f64` (complex values interleaved re/im)
//! next to a JSON sidecar `{shape, dtype, meta}`, plus binary PGM export.
//!
//! An array stored at base path `out/sino` lives in `out/sino.bin` and
//! `out/sino.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cmt::{AcquisitionGeometry, CircularMeansSinogram, SpectralCoefficients};
use crate::error::{config, Error, Result};
use crate::ivpa::TransducerTraces;
use crate::ivus::MeasurementSet;
use crate::phantom::ImageGrid;
use crate::specfun::ContourParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub shape: Vec<usize>,
    pub dtype: String,
    #[serde(default)]
    pub meta: Value,
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_raw(base: &Path, sidecar: &Sidecar, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = base.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(with_ext(base, "bin"), bytes)?;
    let mut text = serde_json::to_string_pretty(sidecar)?;
    text.push('\n');
    fs::write(with_ext(base, "json"), text)?;
    Ok(())
}

fn read_raw(base: &Path, dtype: &str) -> Result<(Vec<f64>, Sidecar)> {
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(with_ext(base, "json"))?)?;
    if sidecar.dtype != dtype {
        return config(format!("{}: expected dtype {dtype}, found {}", base.display(), sidecar.dtype));
    }
    let bytes = fs::read(with_ext(base, "bin"))?;
    let per = if dtype == "c16" { 2 } else { 1 };
    let count: usize = sidecar.shape.iter().product::<usize>() * per;
    if bytes.len() != 8 * count {
        return config(format!("{}: {} bytes do not match shape {:?}", base.display(), bytes.len(), sidecar.shape));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((data, sidecar))
}

fn check_len(shape: &[usize], len: usize) -> Result<()> {
    if shape.iter().product::<usize>() != len {
        return config(format!("shape {shape:?} does not match {len} values"));
    }
    Ok(())
}

pub fn write_f64(base: &Path, shape: &[usize], data: &[f64], meta: Value) -> Result<()> {
    check_len(shape, data.len())?;
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_raw(base, &Sidecar { shape: shape.to_vec(), dtype: "f8".into(), meta }, &bytes)
}

pub fn write_c16(base: &Path, shape: &[usize], data: &[Complex64], meta: Value) -> Result<()> {
    check_len(shape, data.len())?;
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.re.to_le_bytes().into_iter().chain(v.im.to_le_bytes())).collect();
    write_raw(base, &Sidecar { shape: shape.to_vec(), dtype: "c16".into(), meta }, &bytes)
}

pub fn read_f64(base: &Path) -> Result<(Vec<f64>, Sidecar)> {
    read_raw(base, "f8")
}

pub fn read_c16(base: &Path) -> Result<(Vec<Complex64>, Sidecar)> {
    let (flat, sidecar) = read_raw(base, "c16")?;
    Ok((flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(), sidecar))
}

fn meta_field<T: for<'de> Deserialize<'de>>(sidecar: &Sidecar, key: &str) -> Result<T> {
    let v = sidecar.meta.get(key).ok_or_else(|| Error::Config(format!("sidecar lacks meta.{key}")))?;
    Ok(serde_json::from_value(v.clone())?)
}

pub fn save_sinogram(base: &Path, sino: &CircularMeansSinogram, extra: Value) -> Result<()> {
    let g = sino.geom;
    let meta = json!({ "geom": g, "r_max": g.r_max(), "extra": extra });
    write_f64(base, &[g.n_phi, g.n_r], &sino.values, meta)
}

pub fn load_sinogram(base: &Path) -> Result<CircularMeansSinogram> {
    let (values, sc) = read_f64(base)?;
    let geom: AcquisitionGeometry = meta_field(&sc, "geom")?;
    geom.validate()?;
    if sc.shape != [geom.n_phi, geom.n_r] {
        return config("sinogram shape disagrees with its geometry");
    }
    Ok(CircularMeansSinogram { geom, values })
}

pub fn save_spectral(base: &Path, s: &SpectralCoefficients, geom: &AcquisitionGeometry) -> Result<()> {
    let meta = json!({ "geom": geom, "contour": s.contour.params(), "l_max": s.l_max });
    write_c16(base, &[2 * s.l_max + 1, s.n_nodes()], &s.coeffs, meta)
}

pub fn load_spectral(base: &Path) -> Result<(SpectralCoefficients, AcquisitionGeometry)> {
    let (coeffs, sc) = read_c16(base)?;
    let params: ContourParams = meta_field(&sc, "contour")?;
    let l_max: usize = meta_field(&sc, "l_max")?;
    let geom: AcquisitionGeometry = meta_field(&sc, "geom")?;
    let contour = params.build()?;
    if sc.shape != [2 * l_max + 1, contour.len()] {
        return config("spectral array shape disagrees with its contour");
    }
    Ok((SpectralCoefficients { contour, l_max, coeffs }, geom))
}

pub fn save_traces(base: &Path, t: &TransducerTraces, extra: Value) -> Result<()> {
    let meta = json!({ "geom": t.geom, "dt": t.dt, "n_t": t.n_t, "extra": extra });
    write_f64(base, &[t.geom.n_phi, t.n_t], &t.values, meta)
}

pub fn load_traces(base: &Path) -> Result<TransducerTraces> {
    let (values, sc) = read_f64(base)?;
    let geom: AcquisitionGeometry = meta_field(&sc, "geom")?;
    let dt: f64 = meta_field(&sc, "dt")?;
    let n_t: usize = meta_field(&sc, "n_t")?;
    if sc.shape != [geom.n_phi, n_t] {
        return config("trace array shape disagrees with its sidecar");
    }
    Ok(TransducerTraces { geom, dt, n_t, values })
}

/// Integrated echoes `[n_phi, n_s]`; `extra` carries e.g. the simulation config.
pub fn save_echoes(base: &Path, w: &MeasurementSet, extra: Value) -> Result<()> {
    let meta = json!({ "geom": w.geom, "s_grid": w.s_grid, "extra": extra });
    write_f64(base, &[w.geom.n_phi, w.s_grid.len()], &w.values, meta)
}

pub fn load_echoes(base: &Path) -> Result<MeasurementSet> {
    let (values, sc) = read_f64(base)?;
    let geom: AcquisitionGeometry = meta_field(&sc, "geom")?;
    let s_grid: Vec<f64> = meta_field(&sc, "s_grid")?;
    if sc.shape != [geom.n_phi, s_grid.len()] {
        return config("echo array shape disagrees with its sidecar");
    }
    Ok(MeasurementSet { geom, s_grid, values })
}

pub fn save_image(base: &Path, img: &ImageGrid, extra: Value) -> Result<()> {
    let meta = json!({ "half_width": img.half_width, "extra": extra });
    write_f64(base, &[img.n, img.n], &img.values, meta)
}

pub fn load_image(base: &Path) -> Result<ImageGrid> {
    let (values, sc) = read_f64(base)?;
    let half_width: f64 = meta_field(&sc, "half_width")?;
    if sc.shape.len() != 2 || sc.shape[0] != sc.shape[1] {
        return config("image arrays must be square");
    }
    let mut img = ImageGrid::zeros(sc.shape[0], half_width)?;
    img.values = values;
    Ok(img)
}

/// 8-bit binary PGM with a fixed window: `lo` maps to 0, `hi` to 255.
/// Row 0 of the file is the top of the image (largest `y`).
pub fn render(img: &ImageGrid, path: &Path, lo: f64, hi: f64) -> Result<()> {
    if !(hi > lo) {
        return config(format!("render window needs hi > lo, got [{lo}, {hi}]"));
    }
    let n = img.n;
    let mut out = Vec::with_capacity(n * n + 32);
    write!(out, "P5\n{n} {n}\n255\n")?;
    for iy in (0..n).rev() {
        for ix in 0..n {
            let t = ((img.get(ix, iy) - lo) / (hi - lo)).clamp(0.0, 1.0);
            out.push((t * 255.0).round() as u8);
        }
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrays_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("a");
        let data = vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300, std::f64::consts::PI, -2.5];
        write_f64(&base, &[2, 3], &data, json!({"k": 1})).unwrap();
        let (back, sc) = read_f64(&base).unwrap();
        assert_eq!(sc.shape, vec![2, 3]);
        assert!(back.iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(std::fs::metadata(dir.path().join("a.bin")).unwrap().len(), 48);

        let c: Vec<Complex64> = (0..4).map(|k| Complex64::new(k as f64, -0.5 * k as f64)).collect();
        write_c16(&base, &[4], &c, Value::Null).unwrap();
        assert_eq!(read_c16(&base).unwrap().0, c);
        assert!(read_f64(&base).is_err());
        assert!(write_f64(&base, &[5], &data, Value::Null).is_err());
    }

    #[test]
    fn pgm_window() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.pgm");
        let img = ImageGrid::from_fn(8, 1.0, |x, _| if x < 0.0 { 0.0 } else { 2.0 }).unwrap();
        render(&img, &p, 0.0, 2.0).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let header = b"P5\n8 8\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let px = &bytes[header.len()..];
        assert_eq!(px.len(), 64);
        assert_eq!((px[0], px[7]), (0, 255));

        let flat = ImageGrid::from_fn(8, 1.0, |_, _| 0.5).unwrap();
        render(&flat, &p, 0.0, 1.0).unwrap();
        let a = std::fs::read(&p).unwrap();
        assert!(a[header.len()..].iter().all(|&b| b == 128));
        render(&flat, &p, 0.0, 1.0).unwrap();
        assert_eq!(a, std::fs::read(&p).unwrap());
        assert!(render(&flat, &p, 1.0, 1.0).is_err());
    }
}
