//! C ABI over `compcbf`.
//!
//! Objects cross the boundary as opaque handles created by a `*_from_json`
//! or constructor function and released with the matching `*_free`. Every
//! fallible call returns a [`CompcbfStatus`]; on failure the message is
//! available from [`compcbf_last_error`] on the same thread. Strings returned
//! through `char **` out-parameters are owned by the caller and must be
//! released with [`compcbf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use compcbf::automata::{Acceptance, Automaton, Decomposition};
use compcbf::barrier::{gamma_matrix, verify_local, GridSpec, LocalCertificate};
use compcbf::comparison::{check_small_gain, DEFAULT_PSI};
use compcbf::system::{
    build_kuramoto_network, build_room_network, CustomSystemJson, InterconnectedSystem, KuramotoParams,
    LabelingFunction, RoomParams,
};
use compcbf::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompcbfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    Model = 5,
    CheckFailed = 6,
    SmallGainViolated = 7,
    Panic = 8,
}

/// A deterministic Büchi or co-Büchi automaton.
pub struct CompcbfAutomaton(Automaton);

/// A local barrier certificate.
pub struct CompcbfCertificate(Arc<LocalCertificate>);

/// A network of subsystems and, when known, its labeling function.
pub struct CompcbfNetwork {
    system: InterconnectedSystem,
    labeling: Option<LabelingFunction>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CompcbfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::SmallGainViolated { .. } | Error::SmallGainUndecided { .. } => CompcbfStatus::SmallGainViolated,
            Error::Json(_) | Error::MalformedAutomaton(_) | Error::Config(_) => CompcbfStatus::Parse,
            _ => CompcbfStatus::Model,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: CompcbfStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CompcbfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CompcbfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            CompcbfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(fail(CompcbfStatus::NullPointer, format!("`{what}` is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(CompcbfStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(CompcbfStatus::NullPointer, format!("`{what}` is null")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(CompcbfStatus::NullPointer, format!("`{what}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(CompcbfStatus::NullPointer, format!("`{what}` is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| fail(CompcbfStatus::Model, "output contains a NUL byte"))?;
    put(out, c.into_raw(), "out")
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(CompcbfStatus::NullPointer, "`out` is null"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next `compcbf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn compcbf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn compcbf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn compcbf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an automaton from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn compcbf_automaton_from_json(
    json: *const c_char,
    out: *mut *mut CompcbfAutomaton,
) -> CompcbfStatus {
    guard(|| {
        let a = Automaton::from_json_str(str_arg(json, "json")?)?;
        put_handle(out, CompcbfAutomaton(a))
    })
}

/// Complement of `a` as a new handle.
///
/// # Safety
/// `a` must be a live automaton handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn compcbf_automaton_complement(
    a: *const CompcbfAutomaton,
    out: *mut *mut CompcbfAutomaton,
) -> CompcbfStatus {
    guard(|| {
        let a = ref_arg(a, "automaton")?;
        put_handle(out, CompcbfAutomaton(a.0.complement()))
    })
}

/// Number of states of `a`, or 0 for NULL.
///
/// # Safety
/// `a` must be NULL or a live automaton handle.
#[no_mangle]
pub unsafe extern "C" fn compcbf_automaton_state_count(a: *const CompcbfAutomaton) -> usize {
    a.as_ref().map_or(0, |a| a.0.states().len())
}

/// # Safety
/// `a` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn compcbf_automaton_free(a: *mut CompcbfAutomaton) {
    free_handle(a)
}

/// Decomposes the specification into run fragments, triplets and partition
/// keys and writes the result as JSON. A co-Büchi automaton is complemented
/// first. When `network` carries a labeling, partitions are marked feasible
/// or infeasible and the required certificates are listed.
///
/// # Safety
/// `a` must be a live automaton handle, `network` NULL or a live network
/// handle, `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn compcbf_decompose_json(
    a: *const CompcbfAutomaton,
    network: *const CompcbfNetwork,
    out_json: *mut *mut c_char,
) -> CompcbfStatus {
    guard(|| {
        let a = &ref_arg(a, "automaton")?.0;
        let spec = match a.acceptance() {
            Acceptance::Cobuchi => a.complement(),
            Acceptance::Buchi => a.clone(),
        };
        let labeling = network.as_ref().and_then(|n| n.labeling.as_ref());
        let d = Decomposition::compute(&spec, labeling)?;
        put_string(out_json, serde_json::to_string(&d).map_err(Error::from)?)
    })
}

/// Parses a local certificate from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn compcbf_certificate_from_json(
    json: *const c_char,
    out: *mut *mut CompcbfCertificate,
) -> CompcbfStatus {
    guard(|| {
        let c = LocalCertificate::from_json_str(str_arg(json, "json")?)?;
        put_handle(out, CompcbfCertificate(Arc::new(c)))
    })
}

/// State dimension of the certificate's barrier, or 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live certificate handle.
#[no_mangle]
pub unsafe extern "C" fn compcbf_certificate_dim(c: *const CompcbfCertificate) -> usize {
    c.as_ref().map_or(0, |c| c.0.dim())
}

/// Evaluates `B(x)` for a local state `x` of length `len`.
///
/// # Safety
/// `c` must be a live certificate handle, `x` must point to `len` doubles,
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn compcbf_certificate_eval(
    c: *const CompcbfCertificate,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> CompcbfStatus {
    guard(|| {
        let c = ref_arg(c, "certificate")?;
        let x = slice_arg(x, len, "x")?;
        if x.len() != c.0.dim() {
            return Err(fail(
                CompcbfStatus::InvalidArgument,
                format!("state has length {}, certificate expects {}", x.len(), c.0.dim()),
            ));
        }
        put(out, c.0.barrier.eval(x), "out")
    })
}

/// # Safety
/// `c` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn compcbf_certificate_free(c: *mut CompcbfCertificate) {
    free_handle(c)
}

/// Ring of `n` rooms with the default parameters.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn compcbf_network_rooms(n: usize, out: *mut *mut CompcbfNetwork) -> CompcbfStatus {
    guard(|| {
        let (system, labeling) = build_room_network(n, RoomParams::default())?;
        put_handle(out, CompcbfNetwork { system, labeling: Some(labeling) })
    })
}

/// All-to-all network of `n` Kuramoto oscillators with the default parameters.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn compcbf_network_kuramoto(n: usize, out: *mut *mut CompcbfNetwork) -> CompcbfStatus {
    guard(|| {
        let (system, labeling) = build_kuramoto_network(n, KuramotoParams::default())?;
        put_handle(out, CompcbfNetwork { system, labeling: Some(labeling) })
    })
}

/// Network described by a custom system JSON file's contents.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn compcbf_network_from_json(
    json: *const c_char,
    out: *mut *mut CompcbfNetwork,
) -> CompcbfStatus {
    guard(|| {
        let desc = CustomSystemJson::from_json_str(str_arg(json, "json")?)?;
        let system = desc.build_network()?;
        let labeling = desc.build_labeling()?;
        put_handle(out, CompcbfNetwork { system, labeling })
    })
}

/// Number of subsystems, or 0 for NULL.
///
/// # Safety
/// `net` must be NULL or a live network handle.
#[no_mangle]
pub unsafe extern "C" fn compcbf_network_size(net: *const CompcbfNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.system.n())
}

/// Length of the stacked state vector, or 0 for NULL.
///
/// # Safety
/// `net` must be NULL or a live network handle.
#[no_mangle]
pub unsafe extern "C" fn compcbf_network_state_dim(net: *const CompcbfNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.system.state_dim())
}

/// Length of the stacked input vector, or 0 for NULL.
///
/// # Safety
/// `net` must be NULL or a live network handle.
#[no_mangle]
pub unsafe extern "C" fn compcbf_network_input_dim(net: *const CompcbfNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.system.input_dim())
}

/// One step of the network: writes `x⁺` into `next`. All three buffers are
/// checked against the network's dimensions.
///
/// # Safety
/// `net` must be a live network handle; `x`, `u` and `next` must point to
/// `x_len`, `u_len` and `next_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn compcbf_network_step(
    net: *const CompcbfNetwork,
    x: *const f64,
    x_len: usize,
    u: *const f64,
    u_len: usize,
    next: *mut f64,
    next_len: usize,
) -> CompcbfStatus {
    guard(|| {
        let sys = &ref_arg(net, "network")?.system;
        let (nx, nu) = (sys.state_dim(), sys.input_dim());
        if x_len != nx || next_len != nx || u_len != nu {
            return Err(fail(
                CompcbfStatus::InvalidArgument,
                format!("expected state length {nx} and input length {nu}, got x {x_len}, u {u_len}, next {next_len}"),
            ));
        }
        let x = slice_arg(x, x_len, "x")?;
        let u = slice_arg(u, u_len, "u")?;
        if next.is_null() && next_len > 0 {
            return Err(fail(CompcbfStatus::NullPointer, "`next` is null"));
        }
        let x1 = sys.step(x, u)?;
        if next_len > 0 {
            std::slice::from_raw_parts_mut(next, next_len).copy_from_slice(&x1);
        }
        Ok(())
    })
}

/// Proposition labeling the stacked state `x`.
///
/// # Safety
/// `net` must be a live network handle, `x` must point to `len` doubles,
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn compcbf_network_label(
    net: *const CompcbfNetwork,
    x: *const f64,
    len: usize,
    out: *mut *mut c_char,
) -> CompcbfStatus {
    guard(|| {
        let net = ref_arg(net, "network")?;
        let labeling =
            net.labeling.as_ref().ok_or_else(|| fail(CompcbfStatus::InvalidArgument, "network has no labeling"))?;
        let x = slice_arg(x, len, "x")?;
        if len != net.system.state_dim() {
            return Err(fail(CompcbfStatus::InvalidArgument, format!("state has length {len}")));
        }
        let p = labeling.label(x)?.to_string();
        put_string(out, p)
    })
}

/// # Safety
/// `net` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn compcbf_network_free(net: *mut CompcbfNetwork) {
    free_handle(net)
}

fn replicated(c: &CompcbfCertificate, net: &CompcbfNetwork) -> Vec<Arc<LocalCertificate>> {
    vec![c.0.clone(); net.system.n()]
}

fn psi_or_default(psi: f64) -> f64 {
    if psi == 0.0 {
        DEFAULT_PSI
    } else {
        psi
    }
}

/// Gain matrix obtained by placing `c` on every subsystem of `net`, as JSON.
/// `psi` is the slope of the linear ψ used for additive gains; it must lie
/// in (0, 1], and 0 selects the library default.
///
/// # Safety
/// `c` and `net` must be live handles; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn compcbf_gain_matrix_json(
    c: *const CompcbfCertificate,
    net: *const CompcbfNetwork,
    psi: f64,
    out_json: *mut *mut c_char,
) -> CompcbfStatus {
    guard(|| {
        let (c, net) = (ref_arg(c, "certificate")?, ref_arg(net, "network")?);
        let gm = gamma_matrix(&replicated(c, net), net.system.wiring(), psi_or_default(psi))?;
        put_string(out_json, serde_json::to_string(&gm).map_err(Error::from)?)
    })
}

/// Small-gain test for `c` placed on every subsystem of `net`, with `psi` as
/// in [`compcbf_gain_matrix_json`]. Returns
/// `COMPCBF_STATUS_OK` when the condition holds and
/// `COMPCBF_STATUS_SMALL_GAIN_VIOLATED` when it fails or cannot be decided.
///
/// # Safety
/// `c` and `net` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn compcbf_check_small_gain(
    c: *const CompcbfCertificate,
    net: *const CompcbfNetwork,
    psi: f64,
) -> CompcbfStatus {
    guard(|| {
        let (c, net) = (ref_arg(c, "certificate")?, ref_arg(net, "network")?);
        let gm = gamma_matrix(&replicated(c, net), net.system.wiring(), psi_or_default(psi))?;
        check_small_gain(&gm)?;
        Ok(())
    })
}

/// Grid verification of the local conditions of `c` on subsystem `block`.
/// `grid_json` is NULL for the default grid, otherwise a grid specification
/// object whose missing fields take their defaults. The full report is
/// written to `out_report` when it is not NULL. Returns
/// `COMPCBF_STATUS_CHECK_FAILED` when some condition fails.
///
/// # Safety
/// `c` and `net` must be live handles; `grid_json` NULL or a NUL-terminated
/// string; `out_report` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn compcbf_verify_local(
    c: *const CompcbfCertificate,
    net: *const CompcbfNetwork,
    block: usize,
    grid_json: *const c_char,
    out_report: *mut *mut c_char,
) -> CompcbfStatus {
    guard(|| {
        let (c, net) = (ref_arg(c, "certificate")?, ref_arg(net, "network")?);
        if block >= net.system.n() {
            return Err(fail(
                CompcbfStatus::InvalidArgument,
                format!("block {block} out of range for {} subsystems", net.system.n()),
            ));
        }
        let spec: GridSpec = if grid_json.is_null() {
            GridSpec::default()
        } else {
            serde_json::from_str(str_arg(grid_json, "grid_json")?).map_err(Error::from)?
        };
        let report = verify_local(&c.0, net.system.subsystem(block), &spec)?;
        if !out_report.is_null() {
            put_string(out_report, report.to_json_string()?)?;
        }
        if report.passed() {
            Ok(())
        } else {
            let failed: Vec<_> = report.conditions.iter().filter(|r| !r.passed()).map(|r| r.condition.name()).collect();
            Err(fail(CompcbfStatus::CheckFailed, format!("failed conditions: {}", failed.join(", "))))
        }
    })
}
