//! C ABI over the `mechlab` core.
//!
//! Conventions:
//! * Every function returns an [`MlStatus`]; results go through out
//!   pointers, which are written only on success.
//! * Handles are opaque and owned by the caller; release them with the
//!   matching `*_free` function. Strings returned by the library are
//!   released with [`ml_string_free`].
//! * On failure, [`ml_last_error_message`] describes the most recent error
//!   on the calling thread.
//! * Panics never cross the boundary; they are reported as
//!   `ML_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mechlab::equilibrium::DEFAULT_PROFILE_CAP;
use mechlab::prop1::run_suite;
use mechlab::schema::{parse_environment, parse_mechanism};
use mechlab::sim::dataset::to_csv_string;
use mechlab::sim::{run_experiment, ExperimentPlan};
use mechlab::{is_strategy_proof, Environment, Error, Game, Mechanism, SocialChoiceFunction};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range or not valid UTF-8.
    InvalidArgument = 2,
    /// The request is well-formed but violates a domain rule.
    Domain = 3,
    /// Structured text failed to parse.
    Parse = 4,
    /// The enumeration would exceed the strategy-profile cap.
    TooLarge = 5,
    /// Reading or writing data failed.
    Io = 6,
    /// A theorem check found a violation.
    Violation = 7,
    /// An internal panic was caught.
    Panic = 8,
}

/// An environment: agents, type spaces, outcomes and payoffs.
pub struct MlEnvironment {
    env: Environment,
}

/// A mechanism together with the environment it is played in.
pub struct MlMechanism {
    mech: Mechanism,
    env: Environment,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> MlStatus {
    match err {
        Error::Parse(_) => MlStatus::Parse,
        Error::TooLarge { .. } => MlStatus::TooLarge,
        Error::Io(_) | Error::Csv(_) => MlStatus::Io,
        _ => MlStatus::Domain,
    }
}

struct Failure(MlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, records any failure message and converts panics.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            MlStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            MlStatus::Panic
        }
    }
}

/// # Safety
/// `s` must be null or point to a nul-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(MlStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(MlStatus::InvalidArgument, "output contains a nul byte".into()))
}

/// # Safety
/// `out` must be null or valid for writes.
unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Message describing the last failure on this thread; empty after a
/// success. The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ml_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ml_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates the two-worker principal-worker environment.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ml_environment_principal_worker(out: *mut *mut MlEnvironment) -> MlStatus {
    guard(|| {
        let handle = Box::into_raw(Box::new(MlEnvironment { env: Environment::principal_worker() }));
        write_out(out, handle).inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// Parses an environment from TOML text. Any `scf` table in the text is
/// ignored here.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ml_environment_from_toml(text: *const c_char, out: *mut *mut MlEnvironment) -> MlStatus {
    guard(|| {
        let (env, _) = parse_environment(read_str(text, "text")?)?;
        let handle = Box::into_raw(Box::new(MlEnvironment { env }));
        write_out(out, handle).inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// # Safety
/// `env` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ml_environment_free(env: *mut MlEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Creates a built-in mechanism (`2x2-I`, `2x2-E`, `3x3-I` or `3x3-E`) in
/// the principal-worker environment.
///
/// # Safety
/// `name` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ml_mechanism_builtin(name: *const c_char, out: *mut *mut MlMechanism) -> MlStatus {
    guard(|| {
        let mech = Mechanism::builtin(read_str(name, "name")?)?;
        let handle = Box::into_raw(Box::new(MlMechanism { mech, env: Environment::principal_worker() }));
        write_out(out, handle).inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// Parses a mechanism file (TOML). Parse failures carry line and column in
/// the error message.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ml_mechanism_from_toml(text: *const c_char, out: *mut *mut MlMechanism) -> MlStatus {
    guard(|| {
        let (mech, env) = parse_mechanism(read_str(text, "text")?)?;
        let handle = Box::into_raw(Box::new(MlMechanism { mech, env }));
        write_out(out, handle).inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// # Safety
/// `mech` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ml_mechanism_free(mech: *mut MlMechanism) {
    if !mech.is_null() {
        drop(Box::from_raw(mech));
    }
}

/// Number of agents of the mechanism.
///
/// # Safety
/// `mech` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ml_mechanism_agent_count(mech: *const MlMechanism, out: *mut usize) -> MlStatus {
    guard(|| {
        let m = mech.as_ref().ok_or_else(|| null("mechanism"))?;
        write_out(out, m.mech.n_agents())
    })
}

/// Outcome index selected by a message profile (`n` message indices, one
/// per agent).
///
/// # Safety
/// `mech` must be a live handle, `messages` must point to `n` values and
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ml_mechanism_outcome(
    mech: *const MlMechanism,
    messages: *const usize,
    n: usize,
    out: *mut usize,
) -> MlStatus {
    guard(|| {
        let m = mech.as_ref().ok_or_else(|| null("mechanism"))?;
        if messages.is_null() {
            return Err(null("messages"));
        }
        let msgs = std::slice::from_raw_parts(messages, n);
        if n != m.mech.n_agents() {
            return Err(Failure(
                MlStatus::InvalidArgument,
                format!("expected {} messages, got {n}", m.mech.n_agents()),
            ));
        }
        write_out(out, m.mech.outcome(msgs)?)
    })
}

/// Aligned text rendering of the outcome table. Free the result with
/// [`ml_string_free`].
///
/// # Safety
/// `mech` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ml_mechanism_render(mech: *const MlMechanism, out: *mut *mut c_char) -> MlStatus {
    guard(|| {
        let m = mech.as_ref().ok_or_else(|| null("mechanism"))?;
        let s = into_c_string(m.mech.render()?)?;
        write_out(out, s).inspect_err(|_| drop(CString::from_raw(s)))
    })
}

/// Counts pure-strategy ex-post equilibria and, among them, the
/// dominant-strategy ones. Either output pointer may be null.
///
/// # Safety
/// `mech` must be a live handle; non-null outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ml_count_ex_post_equilibria(
    mech: *const MlMechanism,
    out_total: *mut usize,
    out_dominant: *mut usize,
) -> MlStatus {
    guard(|| {
        let m = mech.as_ref().ok_or_else(|| null("mechanism"))?;
        let reports = Game::new(&m.env, &m.mech)?.enumerate_ex_post_equilibria(DEFAULT_PROFILE_CAP)?;
        if !out_total.is_null() {
            out_total.write(reports.len());
        }
        if !out_dominant.is_null() {
            out_dominant.write(reports.iter().filter(|r| r.dominant_strategy).count());
        }
        Ok(())
    })
}

/// Whether the social choice function given by `table` (outcome index per
/// type profile, row-major with agent 1 slowest) is strategy-proof.
///
/// # Safety
/// `env` must be a live handle, `table` must point to `n` values and `out`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ml_is_strategy_proof(
    env: *const MlEnvironment,
    table: *const usize,
    n: usize,
    out: *mut bool,
) -> MlStatus {
    guard(|| {
        let e = env.as_ref().ok_or_else(|| null("environment"))?;
        if table.is_null() {
            return Err(null("table"));
        }
        let values = std::slice::from_raw_parts(table, n).to_vec();
        let f = SocialChoiceFunction::new(e.env.type_counts(), values)?;
        f.validate_for(&e.env)?;
        write_out(out, is_strategy_proof(&e.env, &f)?)
    })
}

/// Runs the composition suite: the principal-worker instance plus `trials`
/// random environments. Writes the number of failed trials to
/// `out_violations` and returns `ML_STATUS_VIOLATION` when it is nonzero.
///
/// # Safety
/// `out_violations` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ml_verify_prop1(trials: usize, seed: u64, out_violations: *mut usize) -> MlStatus {
    guard(|| {
        if trials == 0 {
            return Err(Failure(MlStatus::InvalidArgument, "trials must be at least 1".into()));
        }
        let suite = run_suite(trials, seed)?;
        let failed = std::iter::once(&suite.principal_worker).chain(&suite.random).filter(|t| t.failures > 0).count();
        if !out_violations.is_null() {
            out_violations.write(failed);
        }
        if failed > 0 {
            return Err(Failure(MlStatus::Violation, format!("{failed} trial(s) violated the composition property")));
        }
        Ok(())
    })
}

/// Simulates the calibrated fourteen-session experiment with `seed` and
/// returns the dataset as CSV. Free the result with [`ml_string_free`].
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ml_simulate_csv(seed: u64, out: *mut *mut c_char) -> MlStatus {
    guard(|| {
        let ds = run_experiment(&ExperimentPlan::calibrated(seed))?;
        let s = into_c_string(to_csv_string(&ds)?)?;
        write_out(out, s).inspect_err(|_| drop(CString::from_raw(s)))
    })
}
