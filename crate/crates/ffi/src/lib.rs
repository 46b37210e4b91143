//! C ABI over `ivtomo`.
//!
//! Objects cross the boundary as opaque pointers created by `ivt_*_new`
//! style constructors and released with the matching `ivt_*_free`. Every
//! fallible call returns an [`IvtStatus`]; on failure the message is kept
//! per thread and can be read with [`ivt_last_error`].
//!
//! Arrays are row-major `double`. Images are `n * n` values indexed
//! `[iy * n + ix]`; sinograms are `n_phi * n_r` values indexed
//! `[i * n_r + j]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ivtomo::cli::{run, RunConfig};
use ivtomo::cmt::{forward_cmt, invert, AcquisitionGeometry, CircularMeansSinogram, InversionParams};
use ivtomo::phantom::{add_noise, compare, make_phantom, presets, ImageGrid, PhantomSpec};
use ivtomo::Error;

/// Result codes. The numeric values are part of the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvtStatus {
    Ok = 0,
    Config = 1,
    Domain = 2,
    Spec = 3,
    NumericGuard = 4,
    Stability = 5,
    UndefinedMetric = 6,
    Io = 7,
    Json = 8,
    NullPointer = 9,
    InvalidArgument = 10,
    Panic = 11,
}

impl From<&Error> for IvtStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => IvtStatus::Config,
            Error::Domain(_) => IvtStatus::Domain,
            Error::Spec(_) => IvtStatus::Spec,
            Error::NumericGuard(_) => IvtStatus::NumericGuard,
            Error::Stability(_) => IvtStatus::Stability,
            Error::UndefinedMetric(_) => IvtStatus::UndefinedMetric,
            Error::Io(_) => IvtStatus::Io,
            Error::Json(_) => IvtStatus::Json,
        }
    }
}

/// Square image on `[-half_width, half_width]^2`.
pub struct IvtImage(ImageGrid);

/// Circular integrals `g(z_i, r_j)` with their acquisition geometry.
pub struct IvtSinogram(CircularMeansSinogram);

/// Error metrics of a reconstruction against a reference image.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IvtMetrics {
    pub rel_l2: f64,
    pub linf: f64,
    pub ncc: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(IvtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(IvtStatus::from(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IvtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            IvtStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            IvtStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(IvtStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(IvtStatus::InvalidArgument, msg.into())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_ptr<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len != src.len() {
        return Err(invalid(format!("buffer holds {len} values, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ivt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ivt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Image from `n * n` values.
///
/// # Safety
/// `values` must point to `n * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ivt_image_new(n: usize, half_width: f64, values: *const f64, out: *mut *mut IvtImage) -> IvtStatus {
    guard(|| {
        let mut img = ImageGrid::zeros(n, half_width)?;
        img.values.copy_from_slice(slice(values, n * n, "values")?);
        out_ptr(out, IvtImage(img))
    })
}

/// Built-in phantom (`interior`, `walls` or `inclusions`) rendered on an
/// `n * n` grid.
///
/// # Safety
/// `name` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ivt_phantom_preset(name: *const c_char, n: usize, half_width: f64, out: *mut *mut IvtImage) -> IvtStatus {
    guard(|| {
        let spec = match text(name, "name")? {
            "interior" => presets::interior(half_width),
            "walls" => presets::walls(half_width),
            "inclusions" => presets::inclusions(half_width),
            other => return Err(invalid(format!("unknown phantom preset {other:?}"))),
        };
        out_ptr(out, IvtImage(make_phantom(&spec, n, half_width)?))
    })
}

/// Phantom from a JSON feature list (`{"support_radius": .., "features": [..]}`).
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ivt_phantom_from_json(json: *const c_char, n: usize, half_width: f64, out: *mut *mut IvtImage) -> IvtStatus {
    guard(|| {
        let spec: PhantomSpec = serde_json::from_str(text(json, "json")?).map_err(Error::from)?;
        out_ptr(out, IvtImage(make_phantom(&spec, n, half_width)?))
    })
}

/// Side length of the image, 0 for null.
///
/// # Safety
/// `img` must be null or a live image.
#[no_mangle]
pub unsafe extern "C" fn ivt_image_size(img: *const IvtImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.n)
}

/// # Safety
/// `img` must be null or a live image.
#[no_mangle]
pub unsafe extern "C" fn ivt_image_half_width(img: *const IvtImage) -> f64 {
    img.as_ref().map_or(f64::NAN, |i| i.0.half_width)
}

/// Copies the `n * n` pixel values into `buf`.
///
/// # Safety
/// `img` must be a live image and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ivt_image_copy(img: *const IvtImage, buf: *mut f64, len: usize) -> IvtStatus {
    guard(|| copy_out(&get(img, "image")?.0.values, buf, len))
}

/// # Safety
/// `img` must be null or a pointer returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ivt_image_free(img: *mut IvtImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Sinogram from `n_phi * n_r` values on the geometry `(r0, r1, n_phi, n_r)`.
///
/// # Safety
/// `values` must point to `n_phi * n_r` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ivt_sinogram_new(
    r0: f64,
    r1: f64,
    n_phi: usize,
    n_r: usize,
    values: *const f64,
    out: *mut *mut IvtSinogram,
) -> IvtStatus {
    guard(|| {
        let geom = AcquisitionGeometry::new(r0, r1, n_phi, n_r)?;
        let values = slice(values, n_phi * n_r, "values")?.to_vec();
        let sino = CircularMeansSinogram { geom, values };
        sino.check()?;
        out_ptr(out, IvtSinogram(sino))
    })
}

/// Circular integrals of `img` for transducers at radius `r0`, with
/// `n_arc` points per circle.
///
/// # Safety
/// `img` must be a live image; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ivt_forward_cmt(
    img: *const IvtImage,
    r0: f64,
    r1: f64,
    n_phi: usize,
    n_r: usize,
    n_arc: usize,
    out: *mut *mut IvtSinogram,
) -> IvtStatus {
    guard(|| {
        let geom = AcquisitionGeometry::new(r0, r1, n_phi, n_r)?;
        out_ptr(out, IvtSinogram(forward_cmt(&get(img, "image")?.0, &geom, n_arc)?))
    })
}

/// Writes `n_phi` and `n_r`; either pointer may be null.
///
/// # Safety
/// `sino` must be a live sinogram.
#[no_mangle]
pub unsafe extern "C" fn ivt_sinogram_dims(sino: *const IvtSinogram, n_phi: *mut usize, n_r: *mut usize) -> IvtStatus {
    guard(|| {
        let g = get(sino, "sinogram")?.0.geom;
        if let Some(p) = n_phi.as_mut() {
            *p = g.n_phi;
        }
        if let Some(p) = n_r.as_mut() {
            *p = g.n_r;
        }
        Ok(())
    })
}

/// # Safety
/// `sino` must be a live sinogram and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ivt_sinogram_copy(sino: *const IvtSinogram, buf: *mut f64, len: usize) -> IvtStatus {
    guard(|| copy_out(&get(sino, "sinogram")?.0.values, buf, len))
}

/// New sinogram with seeded Gaussian noise of relative L2 size `level`.
///
/// # Safety
/// `sino` must be a live sinogram; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ivt_sinogram_add_noise(sino: *const IvtSinogram, level: f64, seed: u64, out: *mut *mut IvtSinogram) -> IvtStatus {
    guard(|| out_ptr(out, IvtSinogram(add_noise(&get(sino, "sinogram")?.0, level, seed)?)))
}

/// # Safety
/// `sino` must be null or a pointer returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ivt_sinogram_free(sino: *mut IvtSinogram) {
    if !sino.is_null() {
        drop(Box::from_raw(sino));
    }
}

/// Reconstructs an image. `params_json` may be null for the defaults or a
/// JSON object with any of `a`, `m`, `n_horizontal`, `n_vertical`,
/// `margin`, `image_n`, `image_half_width`.
///
/// # Safety
/// `sino` must be a live sinogram, `params_json` null or nul-terminated,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ivt_invert(sino: *const IvtSinogram, params_json: *const c_char, out: *mut *mut IvtImage) -> IvtStatus {
    guard(|| {
        let params: InversionParams = if params_json.is_null() {
            InversionParams::default()
        } else {
            serde_json::from_str(text(params_json, "params_json")?).map_err(Error::from)?
        };
        let rec = invert(&get(sino, "sinogram")?.0, &params)?;
        out_ptr(out, IvtImage(rec.image))
    })
}

/// # Safety
/// Both images must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ivt_compare(rec: *const IvtImage, truth: *const IvtImage, out: *mut IvtMetrics) -> IvtStatus {
    guard(|| {
        let m = compare(&get(rec, "reconstruction")?.0, &get(truth, "truth")?.0)?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = IvtMetrics { rel_l2: m.rel_l2, linf: m.linf, ncc: m.ncc };
        Ok(())
    })
}

/// Runs a whole experiment from a JSON run configuration (the same schema
/// as the command-line `--config` file) and writes its artifacts.
///
/// # Safety
/// `config_json` must be nul-terminated; `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn ivt_run_experiment(config_json: *const c_char, out: *mut IvtMetrics) -> IvtStatus {
    guard(|| {
        let cfg: RunConfig = serde_json::from_str(text(config_json, "config_json")?).map_err(Error::from)?;
        let report = run(&cfg).map_err(|e| Failure(IvtStatus::from(&e.error), e.to_string()))?;
        if let Some(o) = out.as_mut() {
            let m = &report.metrics;
            *o = IvtMetrics { rel_l2: m.rel_l2, linf: m.linf, ncc: m.ncc };
        }
        Ok(())
    })
}
