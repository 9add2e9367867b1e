//! C ABI over `mfa-core`.
//!
//! Matrices cross the boundary as 9 doubles in row-major order. Objects are
//! opaque handles created by `*_new` functions and released with the
//! matching `*_free`. Every fallible call returns an [`MfaStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`mfa_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mfa_core::bayes_filter::{self, AttitudeModel, FilterState, GyroModel, ProcessNoise};
use mfa_core::matrix_fisher::MatrixFisher;
use mfa_core::so3::{from_row_major, row_major, Rotation};
use mfa_core::{normalizer, unscented, Error};
use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MfaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    NoConvergence = 4,
    Stream = 5,
    Io = 6,
    Panic = 7,
}

impl From<&Error> for MfaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InfeasibleSpread { .. } | Error::DegenerateDistribution(_) | Error::InfeasibleMoment(_) => {
                MfaStatus::Infeasible
            }
            Error::NoConvergence { .. } => MfaStatus::NoConvergence,
            Error::Stream(_) => MfaStatus::Stream,
            Error::Io(_) | Error::Format(_) => MfaStatus::Io,
            _ => MfaStatus::InvalidArgument,
        }
    }
}

/// A matrix Fisher distribution on SO(3).
pub struct MfaDistribution {
    inner: MatrixFisher,
}

/// Attitude filter state with its sensor models and random stream.
pub struct MfaFilter {
    state: FilterState,
    sigma: f64,
    gyro: GyroModel,
    attitude: AttitudeModel,
    rng: ChaCha8Rng,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Failure {
    Null(&'static str),
    Core(Error),
    Arg(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `body`, recording its failure (or panic) as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MfaStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MfaStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            MfaStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            MfaStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            MfaStatus::from(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MfaStatus::Panic
        }
    }
}

unsafe fn read<const N: usize>(p: *const f64, what: &'static str) -> Result<[f64; N], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let mut out = [0.0; N];
    ptr::copy_nonoverlapping(p, out.as_mut_ptr(), N);
    Ok(out)
}

unsafe fn write<const N: usize>(p: *mut f64, v: [f64; N], what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    ptr::copy_nonoverlapping(v.as_ptr(), p, N);
    Ok(())
}

unsafe fn read_matrix(p: *const f64, what: &'static str) -> Result<Matrix3<f64>, Failure> {
    Ok(from_row_major(&read::<9>(p, what)?))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn mfa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mfa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `log c(S)` for non-negative singular values `s[3]`.
///
/// # Safety
/// `s` must point to 3 doubles and `out` to writable storage for one.
#[no_mangle]
pub unsafe extern "C" fn mfa_log_c(s: *const f64, out: *mut f64) -> MfaStatus {
    guard(|| {
        let s = Vector3::from(read::<3>(s, "s")?);
        *out_ptr(out, "out")? = normalizer::log_c(&s)?;
        Ok(())
    })
}

/// Creates `M(F)`; `det F` must be positive.
///
/// # Safety
/// `f` must point to 9 doubles and `out` to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn mfa_distribution_new(f: *const f64, out: *mut *mut MfaDistribution) -> MfaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let inner = MatrixFisher::new(read_matrix(f, "f")?)?;
        *out = boxed(MfaDistribution { inner });
        Ok(())
    })
}

/// Releases a distribution. Null is ignored.
///
/// # Safety
/// `d` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfa_distribution_free(d: *mut MfaDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Writes `F` (9 doubles, row-major).
///
/// # Safety
/// `d` must be a live handle and `out` must hold 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn mfa_distribution_f(d: *const MfaDistribution, out: *mut f64) -> MfaStatus {
    guard(|| write(out, row_major(handle(d, "d")?.inner.f()), "out"))
}

/// # Safety
/// `d` must be a live handle and `out` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn mfa_distribution_singular_values(d: *const MfaDistribution, out: *mut f64) -> MfaStatus {
    guard(|| {
        let s = handle(d, "d")?.inner.singular_values();
        write(out, [s[0], s[1], s[2]], "out")
    })
}

/// # Safety
/// `d` must be a live handle and `out` must point to one double.
#[no_mangle]
pub unsafe extern "C" fn mfa_distribution_log_c(d: *const MfaDistribution, out: *mut f64) -> MfaStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(d, "d")?.inner.log_c();
        Ok(())
    })
}

/// Writes the mode `U Vᵀ` (9 doubles, row-major).
///
/// # Safety
/// `d` must be a live handle and `out` must hold 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn mfa_distribution_mode(d: *const MfaDistribution, out: *mut f64) -> MfaStatus {
    guard(|| write(out, handle(d, "d")?.inner.mode().to_row_major(), "out"))
}

/// Log density at the rotation `r` (row-major) relative to Haar measure.
///
/// # Safety
/// `d` must be a live handle, `r` must point to 9 doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn mfa_distribution_log_density(
    d: *const MfaDistribution,
    r: *const f64,
    out: *mut f64,
) -> MfaStatus {
    guard(|| {
        let r = Rotation::from_matrix(read_matrix(r, "r")?)?;
        *out_ptr(out, "out")? = handle(d, "d")?.inner.log_density(&r);
        Ok(())
    })
}

/// Marginal density of body axis `axis` (0, 1 or 2) at the unit vector `r`,
/// relative to the uniform distribution on the sphere.
///
/// # Safety
/// `d` must be a live handle, `r` must point to 3 doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn mfa_distribution_marginal_density(
    d: *const MfaDistribution,
    axis: u32,
    r: *const f64,
    out: *mut f64,
) -> MfaStatus {
    guard(|| {
        let r = Vector3::from(read::<3>(r, "r")?);
        *out_ptr(out, "out")? = handle(d, "d")?.inner.marginal_axis_density(axis as usize, &r)?;
        Ok(())
    })
}

/// Draws `n` rotations into `out` (`9 n` doubles, one row-major matrix per
/// draw). The same seed gives the same draws.
///
/// # Safety
/// `d` must be a live handle and `out` must hold `9 n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mfa_distribution_sample(
    d: *const MfaDistribution,
    seed: u64,
    n: usize,
    out: *mut f64,
) -> MfaStatus {
    guard(|| {
        let d = handle(d, "d")?;
        if n == 0 {
            return Ok(());
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let len = n.checked_mul(9).ok_or_else(|| Failure::Arg(format!("sample count {n} is too large")))?;
        let buf = std::slice::from_raw_parts_mut(out, len);
        let draws = d.inner.sample(n, &mut ChaCha8Rng::seed_from_u64(seed));
        for (chunk, r) in buf.chunks_exact_mut(9).zip(&draws) {
            chunk.copy_from_slice(&r.to_row_major());
        }
        Ok(())
    })
}

/// Writes the seven sigma points (`63` doubles: mode first, then
/// `+θ1, −θ1, +θ2, −θ2, +θ3, −θ3`).
///
/// # Safety
/// `d` must be a live handle and `out` must hold 63 doubles.
#[no_mangle]
pub unsafe extern "C" fn mfa_sigma_points(d: *const MfaDistribution, sigma: f64, out: *mut f64) -> MfaStatus {
    guard(|| {
        let set = unscented::sigma_points(&handle(d, "d")?.inner, sigma)?;
        let mut all = [0.0; 63];
        for (chunk, p) in all.chunks_exact_mut(9).zip(&set.points) {
            chunk.copy_from_slice(&p.to_row_major());
        }
        write(out, all, "out")
    })
}

/// Recovers the distribution whose sigma points have arithmetic mean `mean`.
///
/// # Safety
/// `mean` must point to 9 doubles and `out` to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn mfa_reconstruct(mean: *const f64, sigma: f64, out: *mut *mut MfaDistribution) -> MfaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let inner = unscented::reconstruct(&read_matrix(mean, "mean")?, sigma)?;
        *out = boxed(MfaDistribution { inner });
        Ok(())
    })
}

/// Creates a filter at time `t0` with prior `M(F0)`, gyro noise covariance
/// and rate, and attitude noise `M(Fz)` and rate.
///
/// # Safety
/// `f0`, `gyro_cov` and `fz` must each point to 9 doubles; `out` to writable
/// storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn mfa_filter_new(
    f0: *const f64,
    t0: f64,
    sigma: f64,
    gyro_cov: *const f64,
    gyro_rate: f64,
    fz: *const f64,
    attitude_rate: f64,
    seed: u64,
    out: *mut *mut MfaFilter,
) -> MfaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if !(sigma.is_finite() && sigma < 1.0) {
            return Err(Failure::Arg(format!("sigma must be below 1, got {sigma}")));
        }
        let prior = MatrixFisher::new(read_matrix(f0, "f0")?)?;
        let gyro = GyroModel::new(read_matrix(gyro_cov, "gyro_cov")?, gyro_rate)?;
        let attitude = AttitudeModel::new(read_matrix(fz, "fz")?, attitude_rate)?;
        *out = boxed(MfaFilter {
            state: FilterState::new(prior, t0),
            sigma,
            gyro,
            attitude,
            rng: ChaCha8Rng::seed_from_u64(seed),
        });
        Ok(())
    })
}

/// Releases a filter. Null is ignored.
///
/// # Safety
/// `f` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfa_filter_free(f: *mut MfaFilter) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Propagates over one gyro interval of length `h` with body rates
/// `omega_k` at its start and `omega_k1` at its end.
///
/// # Safety
/// `f` must be a live handle; `omega_k` and `omega_k1` must point to 3
/// doubles each.
#[no_mangle]
pub unsafe extern "C" fn mfa_filter_propagate(
    f: *mut MfaFilter,
    omega_k: *const f64,
    omega_k1: *const f64,
    h: f64,
) -> MfaStatus {
    guard(|| {
        let f = out_ptr(f, "f")?;
        let a = Vector3::from(read::<3>(omega_k, "omega_k")?);
        let b = Vector3::from(read::<3>(omega_k1, "omega_k1")?);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Failure::Arg(format!("step must be positive, got {h}")));
        }
        f.state = bayes_filter::propagate(
            &f.state,
            &a,
            &b,
            h,
            f.sigma,
            &f.gyro,
            ProcessNoise::default(),
            &mut f.rng,
        )?;
        Ok(())
    })
}

/// Fuses an attitude measurement `rz` (row-major rotation).
///
/// # Safety
/// `f` must be a live handle and `rz` must point to 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn mfa_filter_update(f: *mut MfaFilter, rz: *const f64) -> MfaStatus {
    guard(|| {
        let f = out_ptr(f, "f")?;
        let rz = Rotation::from_matrix(read_matrix(rz, "rz")?)?;
        f.state = bayes_filter::update(&f.state, &rz, &f.attitude)?;
        Ok(())
    })
}

/// Current time of the filter.
///
/// # Safety
/// `f` must be a live handle and `out` must point to one double.
#[no_mangle]
pub unsafe extern "C" fn mfa_filter_time(f: *const MfaFilter, out: *mut f64) -> MfaStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(f, "f")?.state.t;
        Ok(())
    })
}

/// Copies the current estimate into a new distribution handle.
///
/// # Safety
/// `f` must be a live handle and `out` writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn mfa_filter_estimate(f: *const MfaFilter, out: *mut *mut MfaDistribution) -> MfaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let inner = handle(f, "f")?.state.estimate.clone();
        *out = boxed(MfaDistribution { inner });
        Ok(())
    })
}
