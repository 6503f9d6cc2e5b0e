use std::ffi::{c_void, CStr, CString};
use std::process::Command;
use std::ptr;

use gauss_trace_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gt_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn space(eigs: &[f64]) -> *mut GtSpace {
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { gt_space_diagonal(eigs.as_ptr(), eigs.len(), &mut s) },
        GtStatus::Ok
    );
    s
}

unsafe extern "C" fn one(_x: *const f64, _n: usize, _u: *mut c_void) -> f64 {
    1.0
}

unsafe extern "C" fn x0_squared(x: *const f64, _n: usize, u: *mut c_void) -> f64 {
    *(u as *mut usize) += 1;
    *x * *x
}

unsafe extern "C" fn boom(_x: *const f64, _n: usize, _u: *mut c_void) -> f64 {
    f64::NAN
}

#[test]
fn space_lifecycle_and_dim() {
    let s = space(&[1.0, 0.5, 0.25]);
    let mut n = 0usize;
    assert_eq!(unsafe { gt_space_dim(s, &mut n) }, GtStatus::Ok);
    assert_eq!(n, 3);
    assert_eq!(last_error(), "");
    unsafe { gt_space_free(s) };
    unsafe { gt_space_free(ptr::null_mut()) };
}

#[test]
fn invalid_inputs_map_to_codes() {
    let mut s = ptr::null_mut();
    let bad = [1.0, -2.0];
    assert_eq!(
        unsafe { gt_space_diagonal(bad.as_ptr(), 2, &mut s) },
        GtStatus::InvalidArgument
    );
    assert!(s.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(
        unsafe { gt_space_diagonal(ptr::null(), 2, &mut s) },
        GtStatus::NullPointer
    );
    assert!(last_error().contains("eigenvalues"));

    let sp = space(&[1.0, 1.0]);
    let mut d = ptr::null_mut();
    let h = [1.0, 0.0, 0.0];
    assert_eq!(
        unsafe { gt_domain_halfspace(sp, h.as_ptr(), 3, &mut d) },
        GtStatus::DimensionMismatch
    );
    assert_eq!(unsafe { gt_domain_ball(sp, -1.0, &mut d) }, GtStatus::InvalidArgument);
    assert_eq!(
        unsafe { gt_domain_ball(ptr::null(), 1.0, &mut d) },
        GtStatus::NullPointer
    );
    assert!(d.is_null());
    unsafe { gt_space_free(sp) };
}

#[test]
fn hyperplane_surface_integral_through_callback() {
    let sp = space(&[1.0, 0.5]);
    let mut d = ptr::null_mut();
    let h = [0.0, 1.0];
    assert_eq!(unsafe { gt_domain_halfspace(sp, h.as_ptr(), 2, &mut d) }, GtStatus::Ok);
    let (mut v, mut e) = (0.0, 0.0);
    let st = unsafe { gt_surface_integral(sp, d, 16, Some(one), ptr::null_mut(), &mut v, &mut e) };
    assert_eq!(st, GtStatus::Ok, "{}", last_error());
    let want = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    assert!((v - want).abs() < 1e-12, "{v}");

    // on {x_1 = 0} the remaining coordinate x_0 has variance 1
    let mut calls = 0usize;
    let st = unsafe {
        gt_surface_integral(
            sp,
            d,
            16,
            Some(x0_squared),
            &mut calls as *mut usize as *mut c_void,
            &mut v,
            &mut e,
        )
    };
    assert_eq!(st, GtStatus::Ok);
    assert!(calls > 0);
    assert!((v - want).abs() < 1e-10, "{v}");

    assert_eq!(
        unsafe { gt_surface_integral(sp, d, 16, None, ptr::null_mut(), &mut v, &mut e) },
        GtStatus::NullPointer
    );
    let st = unsafe { gt_surface_integral(sp, d, 16, Some(boom), ptr::null_mut(), &mut v, &mut e) };
    assert_eq!(st, GtStatus::Ok);
    assert!(v.is_nan());
    unsafe {
        gt_domain_free(d);
        gt_space_free(sp);
    }
}

#[test]
fn rho_total_matches_quadrature_on_ball() {
    let sp = space(&[1.0, 0.5]);
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { gt_domain_ball(sp, 1.0, &mut d) }, GtStatus::Ok);
    let (mut q, mut qe) = (0.0, 0.0);
    assert_eq!(
        unsafe { gt_surface_integral(sp, d, 32, Some(one), ptr::null_mut(), &mut q, &mut qe) },
        GtStatus::Ok
    );
    let (mut m, mut se) = (0.0, 0.0);
    assert_eq!(
        unsafe { gt_rho_total(sp, d, 11, 200_000, &mut m, &mut se) },
        GtStatus::Ok
    );
    assert!(se > 0.0);
    assert!((m - q).abs() <= 4.0 * (se * se + qe * qe).sqrt(), "{m} ± {se} vs {q}");

    let (mut m2, mut se2) = (0.0, 0.0);
    assert_eq!(
        unsafe { gt_rho_total(sp, d, 11, 200_000, &mut m2, &mut se2) },
        GtStatus::Ok
    );
    assert_eq!((m, se), (m2, se2));
    assert_eq!(
        unsafe { gt_rho_total(sp, d, 11, 1, &mut m, &mut se) },
        GtStatus::InvalidArgument
    );
    unsafe {
        gt_domain_free(d);
        gt_space_free(sp);
    }
}

#[test]
fn ellipsoid_and_mismatched_handles() {
    let sp2 = space(&[1.0, 0.5]);
    let sp3 = space(&[1.0, 0.5, 0.2]);
    let mut d = ptr::null_mut();
    let a = [1.0, 2.0];
    assert_eq!(
        unsafe { gt_domain_ellipsoid(sp2, a.as_ptr(), 2, 1.0, &mut d) },
        GtStatus::Ok
    );
    let (mut m, mut se) = (0.0, 0.0);
    assert_eq!(
        unsafe { gt_rho_total(sp3, d, 1, 1000, &mut m, &mut se) },
        GtStatus::DimensionMismatch
    );
    unsafe {
        gt_domain_free(d);
        gt_space_free(sp2);
        gt_space_free(sp3);
    }
}

#[test]
fn t2_norm_of_hermite_modes() {
    let sp = space(&[1.0, 1.0, 0.5]);
    for k in 0..6u32 {
        let mut v = 0.0;
        assert_eq!(unsafe { gt_halfspace_t2_norm(sp, 0, 1, k, &mut v) }, GtStatus::Ok);
        let want = (1.0 + (k as f64).sqrt()).sqrt();
        assert!((v - want).abs() < 1e-12, "k={k}: {v}");
    }
    let mut v = 0.0;
    assert_eq!(
        unsafe { gt_halfspace_t2_norm(sp, 5, 0, 1, &mut v) },
        GtStatus::InvalidArgument
    );
    unsafe { gt_space_free(sp) };
}

#[test]
fn run_config_writes_outputs_and_reports_errors() {
    let dir = std::env::temp_dir().join(format!("gt-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("c.toml");
    std::fs::write(
        &cfg,
        "experiment = \"halfspace_norms\"\nsamples = 1\nseed = 1\n[options]\nmax_degree = 12\n",
    )
    .unwrap();
    let out = dir.join("out");
    let c = CString::new(cfg.to_str().unwrap()).unwrap();
    let o = CString::new(out.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { gt_run_config(c.as_ptr(), o.as_ptr()) },
        GtStatus::Ok,
        "{}",
        last_error()
    );
    assert!(out.join("manifest.txt").exists());
    assert!(out.join("trace_norms.csv").exists());

    // below degree 12 the interp4 ratios still drift: slope ¼/(1+√k) is near 0.1
    std::fs::write(
        &cfg,
        "experiment = \"halfspace_norms\"\nsamples = 1\nseed = 1\n[options]\nmax_degree = 4\n",
    )
    .unwrap();
    assert_eq!(unsafe { gt_run_config(c.as_ptr(), o.as_ptr()) }, GtStatus::GateFailed);
    assert!(last_error().contains("slope[interp1/interp4]"), "{}", last_error());

    std::fs::write(&cfg, "experiment = \"nope\"\nsamples = 1\nseed = 1\n").unwrap();
    assert_eq!(unsafe { gt_run_config(c.as_ptr(), o.as_ptr()) }, GtStatus::Config);
    assert!(last_error().contains("line 1"), "{}", last_error());

    let missing = CString::new(dir.join("missing.toml").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { gt_run_config(missing.as_ptr(), ptr::null()) }, GtStatus::Io);
    assert_eq!(
        unsafe { gt_run_config(ptr::null(), ptr::null()) },
        GtStatus::NullPointer
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(gt_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point_and_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/gauss_trace.h");
    let text = std::fs::read_to_string(header).unwrap();
    for sym in [
        "gt_last_error_message",
        "gt_version",
        "gt_space_diagonal",
        "gt_space_free",
        "gt_space_dim",
        "gt_domain_halfspace",
        "gt_domain_ball",
        "gt_domain_ellipsoid",
        "gt_domain_free",
        "gt_surface_integral",
        "gt_rho_total",
        "gt_halfspace_t2_norm",
        "gt_run_config",
        "GT_STATUS_GATE_FAILED",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let src = std::env::temp_dir().join(format!("gt-header-{}.c", std::process::id()));
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ GtSpace *s = 0; double e[1] = {{1.0}};\n\
             return gt_space_diagonal(e, 1, &s) == GT_STATUS_OK ? 0 : 1; }}\n"
        ),
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .output()
        .unwrap();
    std::fs::remove_file(&src).ok();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
