//! C interface to `gauss-trace`.
//!
//! Every entry point returns a [`GtStatus`]. On failure the message is kept
//! per thread and can be read with [`gt_last_error_message`]. Objects are
//! opaque handles released with the matching `_free` function. Panics never
//! cross the boundary; they are reported as [`GtStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use gauss_trace::cli::{run, ExperimentConfig, RunOptions};
use gauss_trace::domains::{make_ball, make_ellipsoid, make_halfspace};
use gauss_trace::halfspace_spectral::{split, t2_norm_spectral};
use gauss_trace::surface_measure::{rho_total_via_identity, surface_integral_fn};
use gauss_trace::{EllipsoidSpec, Error, GaussianSpace, HermiteExpansion, LevelSetDomain, SamplerState};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Unsupported = 4,
    Degenerate = 5,
    Numerical = 6,
    Config = 7,
    Io = 8,
    /// The run finished but at least one gated check failed.
    GateFailed = 9,
    Panic = 10,
}

/// A Gaussian space `N(0, Q)` with diagonal `Q`.
pub struct GtSpace(GaussianSpace);

/// A sublevel domain `{G < 0}` bound to the space it was built for.
pub struct GtDomain(LevelSetDomain);

/// Integrand callback: `x` points to `dim` coordinates.
pub type GtIntegrand = Option<unsafe extern "C" fn(x: *const f64, dim: usize, user: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> GtStatus {
    match e {
        Error::InvalidArgument(_) | Error::IndexOutOfRange { .. } | Error::InapplicableAxis { .. } => {
            GtStatus::InvalidArgument
        }
        Error::DimensionMismatch { .. } => GtStatus::DimensionMismatch,
        Error::Unsupported(_) | Error::TensorBudgetExceeded { .. } => GtStatus::Unsupported,
        Error::Degenerate(_) => GtStatus::Degenerate,
        Error::Starvation { .. } | Error::VarianceExplosion(_) => GtStatus::Numerical,
        Error::Config { .. } => GtStatus::Config,
        Error::Io(_) | Error::Csv(_) => GtStatus::Io,
    }
}

struct Fail(GtStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GtStatus::Ok
        }
        Ok(Err(Fail(s, m))) => {
            set_error(&m);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            GtStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(GtStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds `N(0, diag(eigenvalues))`.
///
/// # Safety
/// `eigenvalues` must point to `dim` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gt_space_diagonal(eigenvalues: *const f64, dim: usize, out: *mut *mut GtSpace) -> GtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let l = slice(eigenvalues, dim, "eigenvalues")?;
        let s = GaussianSpace::diagonal(l.to_vec())?;
        write(out, Box::into_raw(Box::new(GtSpace(s))), "out")
    })
}

/// # Safety
/// `space` must come from [`gt_space_diagonal`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gt_space_free(space: *mut GtSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// # Safety
/// `space` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gt_space_dim(space: *const GtSpace, out: *mut usize) -> GtStatus {
    guard(|| write(out, deref(space, "space")?.0.dim(), "out"))
}

unsafe fn new_domain(
    space: *const GtSpace,
    out: *mut *mut GtDomain,
    make: impl FnOnce(&GaussianSpace) -> Result<LevelSetDomain, Fail>,
) -> GtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let d = make(&deref(space, "space")?.0)?;
        write(out, Box::into_raw(Box::new(GtDomain(d))), "out")
    })
}

/// Halfspace `{⟨hhat, x⟩ > 0}`, `hhat` given by its `dim` coordinates.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn gt_domain_halfspace(
    space: *const GtSpace,
    hhat: *const f64,
    dim: usize,
    out: *mut *mut GtDomain,
) -> GtStatus {
    new_domain(space, out, |s| Ok(make_halfspace(s, slice(hhat, dim, "hhat")?)?))
}

/// Centred ball `{|x| < r}`.
///
/// # Safety
/// `space` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gt_domain_ball(space: *const GtSpace, radius: f64, out: *mut *mut GtDomain) -> GtStatus {
    new_domain(space, out, |s| Ok(make_ball(s, radius)?))
}

/// Ellipsoid `{Σ α_k x_k² < r²}`.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn gt_domain_ellipsoid(
    space: *const GtSpace,
    alphas: *const f64,
    dim: usize,
    radius: f64,
    out: *mut *mut GtDomain,
) -> GtStatus {
    new_domain(space, out, |s| {
        let spec = EllipsoidSpec::new(slice(alphas, dim, "alphas")?.to_vec(), radius)?;
        Ok(make_ellipsoid(s, &spec)?)
    })
}

/// # Safety
/// `domain` must come from a `gt_domain_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn gt_domain_free(domain: *mut GtDomain) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

fn same_dim(space: &GaussianSpace, domain: &LevelSetDomain) -> Result<(), Fail> {
    if space.dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: domain.dim(),
        }
        .into());
    }
    Ok(())
}

/// `∫ f dρ` over `{G = 0}` by deterministic surface quadrature. `err` is
/// the difference between orders `resolution` and `2·resolution`.
///
/// # Safety
/// Handles must be live, `f` non-null, outputs writable. The callback must
/// not unwind.
#[no_mangle]
pub unsafe extern "C" fn gt_surface_integral(
    space: *const GtSpace,
    domain: *const GtDomain,
    resolution: usize,
    f: GtIntegrand,
    user: *mut c_void,
    value: *mut f64,
    err: *mut f64,
) -> GtStatus {
    guard(|| {
        let s = &deref(space, "space")?.0;
        let d = &deref(domain, "domain")?.0;
        same_dim(s, d)?;
        let f = f.ok_or_else(|| null("f"))?;
        if resolution == 0 {
            return Err(Fail(GtStatus::InvalidArgument, "resolution must be positive".into()));
        }
        let (v, e) = surface_integral_fn(s, d, 0.0, resolution, &|x| f(x.as_ptr(), x.len(), user))?;
        write(value, v, "value")?;
        write(err, e, "err")
    })
}

/// Monte Carlo estimate of the total surface measure `ρ({G = 0})` through
/// the divergence identity.
///
/// # Safety
/// Handles must be live and outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gt_rho_total(
    space: *const GtSpace,
    domain: *const GtDomain,
    seed: u64,
    samples: usize,
    mean: *mut f64,
    stderr: *mut f64,
) -> GtStatus {
    guard(|| {
        let s = &deref(space, "space")?.0;
        let d = &deref(domain, "domain")?.0;
        same_dim(s, d)?;
        if samples < 2 {
            return Err(Fail(GtStatus::InvalidArgument, "need at least two samples".into()));
        }
        let e = rho_total_via_identity(s, d, SamplerState::new(seed, 0), samples)?;
        write(mean, e.mean, "mean")?;
        write(stderr, e.stderr, "stderr")
    })
}

/// Trace-space norm `‖f‖_{T_2}` of the Hermite mode of order `degree` along
/// `axis` of the boundary `{x_{h_index} = 0}`.
///
/// # Safety
/// `space` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gt_halfspace_t2_norm(
    space: *const GtSpace,
    h_index: usize,
    axis: usize,
    degree: u32,
    out: *mut f64,
) -> GtStatus {
    guard(|| {
        let sp = split(&deref(space, "space")?.0, h_index)?;
        let f = HermiteExpansion::axis_mode(sp.y_space(), axis, degree)?;
        write(out, t2_norm_spectral(&sp, &f)?, "out")
    })
}

/// Runs the experiment described by the TOML file at `config_path`. A null
/// `out_dir` keeps the directory from the config. Returns
/// [`GtStatus::GateFailed`] when a gated check fails.
///
/// # Safety
/// Strings must be NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn gt_run_config(config_path: *const c_char, out_dir: *const c_char) -> GtStatus {
    guard(|| {
        let utf8 = |p: *const c_char, what: &str| -> Result<String, Fail> {
            CStr::from_ptr(p)
                .to_str()
                .map(str::to_owned)
                .map_err(|_| Fail(GtStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
        };
        if config_path.is_null() {
            return Err(null("config_path"));
        }
        let path = PathBuf::from(utf8(config_path, "config_path")?);
        let (cfg, _) = ExperimentConfig::load(&path)?;
        let opts = RunOptions {
            out_dir: if out_dir.is_null() {
                None
            } else {
                Some(PathBuf::from(utf8(out_dir, "out_dir")?))
            },
            ..Default::default()
        };
        let outcome = run(&cfg, &opts)?;
        if !outcome.passed() {
            let failed: Vec<_> = outcome
                .checks
                .iter()
                .filter(|c| c.gated && !c.pass)
                .map(|c| c.name.clone())
                .collect();
            return Err(Fail(
                GtStatus::GateFailed,
                format!("failed checks: {}", failed.join(", ")),
            ));
        }
        Ok(())
    })
}
