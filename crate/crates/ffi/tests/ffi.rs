use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use ivtomo_ffi::*;

fn last_error() -> String {
    let p = ivt_last_error();
    assert!(!p.is_null(), "no error message recorded");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn phantom_forward_invert_compare() {
    unsafe {
        let name = CString::new("interior").unwrap();
        let mut truth = ptr::null_mut();
        assert_eq!(ivt_phantom_preset(name.as_ptr(), 256, 1.5, &mut truth), IvtStatus::Ok);
        assert_eq!(ivt_image_size(truth), 256);
        assert_eq!(ivt_image_half_width(truth), 1.5);

        let mut sino = ptr::null_mut();
        assert_eq!(ivt_forward_cmt(truth, 0.5, 1.5, 32, 101, 128, &mut sino), IvtStatus::Ok);
        let (mut n_phi, mut n_r) = (0, 0);
        assert_eq!(ivt_sinogram_dims(sino, &mut n_phi, &mut n_r), IvtStatus::Ok);
        assert_eq!((n_phi, n_r), (32, 101));

        let mut rec = ptr::null_mut();
        assert_eq!(ivt_invert(sino, ptr::null(), &mut rec), IvtStatus::Ok);
        assert!(ivt_last_error().is_null());
        let mut m = IvtMetrics::default();
        assert_eq!(ivt_compare(rec, truth, &mut m), IvtStatus::Ok);
        assert!(m.ncc > 0.95 && m.rel_l2 < 0.3, "{m:?}");

        let mut buf = vec![0.0; 256 * 256];
        assert_eq!(ivt_image_copy(rec, buf.as_mut_ptr(), buf.len()), IvtStatus::Ok);
        assert!(buf.iter().all(|v| v.is_finite()));
        assert_eq!(ivt_image_copy(rec, buf.as_mut_ptr(), 10), IvtStatus::InvalidArgument);

        // sinogram values survive a copy-out and rebuild
        let mut vals = vec![0.0; n_phi * n_r];
        assert_eq!(ivt_sinogram_copy(sino, vals.as_mut_ptr(), vals.len()), IvtStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(ivt_sinogram_new(0.5, 1.5, n_phi, n_r, vals.as_ptr(), &mut again), IvtStatus::Ok);
        let mut noisy = ptr::null_mut();
        assert_eq!(ivt_sinogram_add_noise(again, 0.05, 7, &mut noisy), IvtStatus::Ok);
        let mut nv = vec![0.0; vals.len()];
        ivt_sinogram_copy(noisy, nv.as_mut_ptr(), nv.len());
        let diff: f64 = nv.iter().zip(&vals).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((diff / norm - 0.05).abs() < 1e-12);

        ivt_sinogram_free(noisy);
        ivt_sinogram_free(again);
        ivt_image_free(rec);
        ivt_sinogram_free(sino);
        ivt_image_free(truth);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(ivt_phantom_preset(ptr::null(), 64, 1.5, &mut img), IvtStatus::NullPointer);
        assert!(last_error().contains("null"));

        let bogus = CString::new("bogus").unwrap();
        assert_eq!(ivt_phantom_preset(bogus.as_ptr(), 64, 1.5, &mut img), IvtStatus::InvalidArgument);
        assert!(last_error().contains("bogus"));
        assert!(img.is_null());

        let bad = CString::new("{not json").unwrap();
        assert_eq!(ivt_phantom_from_json(bad.as_ptr(), 64, 1.5, &mut img), IvtStatus::Json);

        let vals = vec![0.0; 3 * 16];
        let mut sino = ptr::null_mut();
        assert_eq!(ivt_sinogram_new(0.5, 1.5, 3, 16, vals.as_ptr(), &mut sino), IvtStatus::Config);
        assert!(last_error().contains("power of two"));
        let nan = vec![f64::NAN; 4 * 16];
        assert_eq!(ivt_sinogram_new(0.5, 1.5, 4, 16, nan.as_ptr(), &mut sino), IvtStatus::Domain);
        assert!(sino.is_null());

        let name = CString::new("walls").unwrap();
        assert_eq!(ivt_phantom_preset(name.as_ptr(), 64, 1.5, ptr::null_mut()), IvtStatus::NullPointer);

        // an error message is cleared by the next successful call
        assert_eq!(ivt_phantom_preset(name.as_ptr(), 64, 1.5, &mut img), IvtStatus::Ok);
        assert!(ivt_last_error().is_null());
        let zero = IvtMetrics::default();
        let mut m = zero;
        let mut flat = ptr::null_mut();
        let z = vec![0.0; 64 * 64];
        assert_eq!(ivt_image_new(64, 1.5, z.as_ptr(), &mut flat), IvtStatus::Ok);
        assert_eq!(ivt_compare(img, flat, &mut m), IvtStatus::UndefinedMetric);
        ivt_image_free(flat);
        ivt_image_free(img);

        ivt_image_free(ptr::null_mut());
        ivt_sinogram_free(ptr::null_mut());
        assert_eq!(ivt_image_size(ptr::null()), 0);
        assert!(ivt_image_half_width(ptr::null()).is_nan());
    }
}

#[test]
fn invert_params_from_json() {
    unsafe {
        let name = CString::new("interior").unwrap();
        let mut truth = ptr::null_mut();
        ivt_phantom_preset(name.as_ptr(), 128, 1.5, &mut truth);
        let mut sino = ptr::null_mut();
        ivt_forward_cmt(truth, 0.5, 1.5, 16, 51, 64, &mut sino);
        let params = CString::new(r#"{"image_n": 64, "margin": 0.1}"#).unwrap();
        let mut rec = ptr::null_mut();
        assert_eq!(ivt_invert(sino, params.as_ptr(), &mut rec), IvtStatus::Ok);
        assert_eq!(ivt_image_size(rec), 64);
        ivt_image_free(rec);
        let params = CString::new(r#"{"m": 1e9}"#).unwrap();
        let status = ivt_invert(sino, params.as_ptr(), &mut rec);
        assert!(matches!(status, IvtStatus::Domain | IvtStatus::NumericGuard), "{status:?}");
        ivt_sinogram_free(sino);
        ivt_image_free(truth);
    }
}

#[test]
fn run_experiment_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "experiment": "interior",
        "geom_preset": "small",
        "phantom_n": 256,
        "out": dir.path().join("run"),
    });
    let cfg = CString::new(cfg.to_string()).unwrap();
    let mut m = IvtMetrics::default();
    assert_eq!(unsafe { ivt_run_experiment(cfg.as_ptr(), &mut m) }, IvtStatus::Ok);
    assert!(m.ncc > 0.95);
    assert!(dir.path().join("run/metrics.json").exists());

    let cfg = CString::new(r#"{"experiment": "interior", "noise": -1}"#).unwrap();
    assert_eq!(unsafe { ivt_run_experiment(cfg.as_ptr(), ptr::null_mut()) }, IvtStatus::Config);
    assert!(last_error().starts_with('['));
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ivt_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ivtomo.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["ivt_last_error", "ivt_phantom_preset", "ivt_forward_cmt", "ivt_invert", "ivt_compare", "ivt_run_experiment", "IVT_STATUS_NULL_POINTER"] {
        assert!(text.contains(f), "header lacks {f}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"ivtomo.h\"\n\
         int main(void) {\n\
           IvtImage *img = 0;\n\
           IvtStatus s = ivt_phantom_preset(\"interior\", 64, 1.5, &img);\n\
           IvtMetrics m;\n\
           (void)m;\n\
           ivt_image_free(img);\n\
           return s == IVT_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc).arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(header.parent().unwrap()).arg(&src).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler ({cc}); skipped the compile check"),
    }
}
