//! C ABI for `beliefmdp`.
//!
//! Every fallible function returns a [`BmdpStatus`] and writes results
//! through out-pointers. On failure the message is kept per thread and read
//! with [`bmdp_last_error`]. Models are opaque handles created by
//! [`bmdp_model_from_json`] or [`bmdp_model_load`] and released with
//! [`bmdp_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use beliefmdp::measures::{kr_distance, tv_weights, Dist, FiniteSpace};
use beliefmdp::models::MdpiiModel;
use beliefmdp::runtime::{lift_policy, load_model, load_model_str, monte_carlo_value, BeliefPolicy, Model, ModelFile};
use beliefmdp::solver::{brute_force_optimal, finite_horizon_solve};
use beliefmdp::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BmdpStatus {
    Ok = 0,
    /// Bad argument, including a null pointer or wrong length.
    InvalidArgument = 1,
    /// The model or a distribution failed validation.
    Validation = 2,
    /// A size guard refused the computation.
    ResourceGuard = 3,
    Parse = 4,
    Io = 5,
    /// Any other library error, or a caught panic.
    Internal = 6,
}

/// Opaque model handle.
pub struct BmdpModel {
    file: ModelFile,
    mdpii: MdpiiModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BmdpStatus {
    match e {
        Error::Invalid(_) | Error::InvalidDistribution(_) => BmdpStatus::Validation,
        Error::ResourceGuard(_) => BmdpStatus::ResourceGuard,
        Error::Parse(_) => BmdpStatus::Parse,
        Error::Io(_) => BmdpStatus::Io,
        Error::InvalidArgument(_)
        | Error::SpaceMismatch(_)
        | Error::InvalidSpace(_)
        | Error::MissingMetric
        | Error::IndexOutOfRange { .. } => {
            BmdpStatus::InvalidArgument
        }
        _ => BmdpStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> BmdpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BmdpStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            BmdpStatus::Internal
        }
    }
}

fn null(what: &str) -> Error {
    Error::InvalidArgument(format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Error> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Error> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn model<'a>(m: *const BmdpModel) -> Result<&'a BmdpModel, Error> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn cstr<'a>(s: *const c_char, what: &str) -> Result<&'a str, Error> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Error::InvalidArgument(format!("{what} is not UTF-8: {e}")))
}

fn handle(file: ModelFile) -> Result<*mut BmdpModel, Error> {
    let mdpii = file.model.to_mdpii()?;
    Ok(Box::into_raw(Box::new(BmdpModel { file, mdpii })))
}

/// Prior from `(p, n)`, or the file's default when `p` is null.
unsafe fn prior(m: &BmdpModel, p: *const f64, n: usize) -> Result<Dist, Error> {
    let states = m.mdpii.states.clone();
    if p.is_null() {
        let w = match m.file.model {
            Model::Mdp { .. } => vec![1.0],
            _ => m.file.prior_or_uniform(states.len()),
        };
        return Dist::new(states, w);
    }
    Dist::new(states, slice(p, n, "prior")?.to_vec())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn bmdp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bmdp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a JSON model document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn bmdp_model_from_json(json: *const c_char, out_model: *mut *mut BmdpModel) -> BmdpStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = handle(load_model_str(cstr(json, "json")?)?)?;
        Ok(())
    })
}

/// Loads and validates a JSON model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn bmdp_model_load(path: *const c_char, out_model: *mut *mut BmdpModel) -> BmdpStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = handle(load_model(cstr(path, "path")?)?)?;
        Ok(())
    })
}

/// Releases a model handle; null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bmdp_model_free(model: *mut BmdpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Sizes of the embedded MDPII: unobservable states, observations, actions.
///
/// # Safety
/// `model` must be a live handle; each out-pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn bmdp_model_dims(
    model: *const BmdpModel,
    states: *mut usize,
    observations: *mut usize,
    actions: *mut usize,
) -> BmdpStatus {
    guard(|| {
        let m = &self::model(model)?.mdpii;
        for (p, v) in [(states, m.num_states()), (observations, m.num_observations()), (actions, m.num_actions())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Discount declared by the model file.
///
/// # Safety
/// `model` must be a live handle and `out_alpha` writable.
#[no_mangle]
pub unsafe extern "C" fn bmdp_model_discount(model: *const BmdpModel, out_alpha: *mut f64) -> BmdpStatus {
    guard(|| {
        *out(out_alpha, "out_alpha")? = self::model(model)?.mdpii.discount;
        Ok(())
    })
}

/// Optimal `T`-step expected discounted cost by finite-horizon dynamic
/// programming. `prior` may be null for the file's prior.
///
/// # Safety
/// `model` must be a live handle, `prior` null or `prior_len` readable
/// doubles, `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn bmdp_finite_horizon_value(
    model: *const BmdpModel,
    prior: *const f64,
    prior_len: usize,
    horizon: usize,
    alpha: f64,
    out_value: *mut f64,
) -> BmdpStatus {
    guard(|| {
        let m = self::model(model)?;
        let p = self::prior(m, prior, prior_len)?;
        let v = finite_horizon_solve(&m.mdpii, &p, horizon, alpha)?.value;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Same quantity by enumerating deterministic observation-history policies.
///
/// # Safety
/// As for [`bmdp_finite_horizon_value`].
#[no_mangle]
pub unsafe extern "C" fn bmdp_brute_force_value(
    model: *const BmdpModel,
    prior: *const f64,
    prior_len: usize,
    horizon: usize,
    alpha: f64,
    out_value: *mut f64,
) -> BmdpStatus {
    guard(|| {
        let m = self::model(model)?;
        let p = self::prior(m, prior, prior_len)?;
        *out(out_value, "out_value")? = brute_force_optimal(&m.mdpii, &p, horizon, alpha)?;
        Ok(())
    })
}

/// Monte Carlo mean and standard error of the finite-horizon optimal policy
/// over `runs` trajectories; run `i` uses ChaCha8 seeded from `seed` on
/// stream `i`.
///
/// # Safety
/// As for [`bmdp_finite_horizon_value`]; `out_mean` and `out_stderr` writable.
#[no_mangle]
pub unsafe extern "C" fn bmdp_monte_carlo_optimal(
    model: *const BmdpModel,
    prior: *const f64,
    prior_len: usize,
    horizon: usize,
    alpha: f64,
    runs: usize,
    seed: u64,
    out_mean: *mut f64,
    out_stderr: *mut f64,
) -> BmdpStatus {
    guard(|| {
        let m = self::model(model)?;
        let p = self::prior(m, prior, prior_len)?;
        let (mean, se) = (out(out_mean, "out_mean")?, out(out_stderr, "out_stderr")?);
        let policy = BeliefPolicy::Tree(finite_horizon_solve(&m.mdpii, &p, horizon, alpha)?.policy);
        let h = lift_policy(&m.mdpii, &policy, &p)?;
        let est = monte_carlo_value(&m.mdpii, &h, &p, horizon, alpha, runs, seed)?;
        *mean = est.mean;
        *se = est.stderr;
        Ok(())
    })
}

/// Total variation `½ Σ |a − b|` of two length-`n` weight vectors.
///
/// # Safety
/// `a` and `b` must point to `n` readable doubles; `out_tv` writable.
#[no_mangle]
pub unsafe extern "C" fn bmdp_tv_distance(a: *const f64, b: *const f64, n: usize, out_tv: *mut f64) -> BmdpStatus {
    guard(|| {
        let (a, b) = (slice(a, n, "a")?, slice(b, n, "b")?);
        *out(out_tv, "out_tv")? = tv_weights(a, b);
        Ok(())
    })
}

/// Kantorovich–Rubinshtein distance of two distributions on `n` points with
/// the row-major `n × n` metric.
///
/// # Safety
/// `a`, `b` must point to `n` doubles, `metric` to `n * n`; `out_kr` writable.
#[no_mangle]
pub unsafe extern "C" fn bmdp_kr_distance(
    a: *const f64,
    b: *const f64,
    n: usize,
    metric: *const f64,
    out_kr: *mut f64,
) -> BmdpStatus {
    guard(|| {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let d = slice(metric, n * n, "metric")?.to_vec();
        let space = Arc::new(FiniteSpace::indexed(n)?.with_metric(d)?);
        let mu = Dist::new(space.clone(), slice(a, n, "a")?.to_vec())?;
        let nu = Dist::new(space, slice(b, n, "b")?.to_vec())?;
        *out(out_kr, "out_kr")? = kr_distance(&mu, &nu)?;
        Ok(())
    })
}
