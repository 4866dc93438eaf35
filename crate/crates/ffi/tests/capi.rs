use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use compcbf_ffi::*;
use serde_json::Value;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn cstring(path: &Path) -> CString {
    CString::new(std::fs::read_to_string(path).unwrap()).unwrap()
}

fn last_error() -> String {
    let p = compcbf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_string_lossy().into_owned();
    compcbf_string_free(s);
    out
}

unsafe fn rooms_certificate() -> *mut CompcbfCertificate {
    let mut c = ptr::null_mut();
    let json = cstring(&data("rooms/certificate.json"));
    assert_eq!(compcbf_certificate_from_json(json.as_ptr(), &mut c), CompcbfStatus::Ok);
    c
}

#[test]
fn rooms_decomposition_lists_one_obligation() {
    unsafe {
        let json = cstring(&data("rooms/automaton.json"));
        let mut a = ptr::null_mut();
        assert_eq!(compcbf_automaton_from_json(json.as_ptr(), &mut a), CompcbfStatus::Ok);
        assert!(compcbf_automaton_state_count(a) > 0);
        let mut net = ptr::null_mut();
        assert_eq!(compcbf_network_rooms(4, &mut net), CompcbfStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(compcbf_decompose_json(a, net, &mut out), CompcbfStatus::Ok);
        let d: Value = serde_json::from_str(&take(out)).unwrap();
        assert!(!d["fragments"].as_array().unwrap().is_empty());
        assert!(d["partitions"].as_array().unwrap().iter().any(|p| p["feasible"] == true));
        assert_eq!(d["obligations"]["required"].as_array().map(Vec::len), Some(1), "{d}");

        let mut comp = ptr::null_mut();
        assert_eq!(compcbf_automaton_complement(a, &mut comp), CompcbfStatus::Ok);
        assert_eq!(compcbf_automaton_state_count(comp), compcbf_automaton_state_count(a));
        compcbf_automaton_free(comp);
        compcbf_automaton_free(a);
        compcbf_network_free(net);
    }
}

#[test]
fn rooms_gain_and_small_gain() {
    unsafe {
        let c = rooms_certificate();
        let mut net = ptr::null_mut();
        assert_eq!(compcbf_network_rooms(10, &mut net), CompcbfStatus::Ok);
        assert_eq!(compcbf_network_size(net), 10);
        assert_eq!(compcbf_check_small_gain(c, net, 0.0), CompcbfStatus::Ok);

        let mut out = ptr::null_mut();
        assert_eq!(compcbf_gain_matrix_json(c, net, 0.0, &mut out), CompcbfStatus::Ok);
        let gm = take(out);
        assert!(gm.contains("0.952"), "{gm}");

        // A contraction no larger than 1 - 1e-9 cannot absorb a gain above 1.
        let mut v: Value =
            serde_json::from_str(&std::fs::read_to_string(data("rooms/certificate.json")).unwrap()).unwrap();
        v["gains"]["additive"]["gamma_hat"] = serde_json::json!({"linear": 5.0});
        let bad = CString::new(v.to_string()).unwrap();
        let mut c2 = ptr::null_mut();
        assert_eq!(compcbf_certificate_from_json(bad.as_ptr(), &mut c2), CompcbfStatus::Ok);
        assert_eq!(compcbf_check_small_gain(c2, net, 0.0), CompcbfStatus::SmallGainViolated);
        assert!(last_error().contains("small-gain"));

        compcbf_certificate_free(c2);
        compcbf_certificate_free(c);
        compcbf_network_free(net);
    }
}

#[test]
fn certificate_eval_and_network_step() {
    unsafe {
        let c = rooms_certificate();
        assert_eq!(compcbf_certificate_dim(c), 1);
        let x = [21.5];
        let mut b = f64::NAN;
        assert_eq!(compcbf_certificate_eval(c, x.as_ptr(), 1, &mut b), CompcbfStatus::Ok);
        assert!(b.is_finite());
        assert_eq!(compcbf_certificate_eval(c, x.as_ptr(), 2, &mut b), CompcbfStatus::InvalidArgument);

        let mut net = ptr::null_mut();
        assert_eq!(compcbf_network_rooms(3, &mut net), CompcbfStatus::Ok);
        let (nx, nu) = (compcbf_network_state_dim(net), compcbf_network_input_dim(net));
        assert_eq!(nx, 3);
        let x = vec![21.0; nx];
        let u = vec![0.5; nu];
        let mut next = vec![0.0; nx];
        assert_eq!(compcbf_network_step(net, x.as_ptr(), nx, u.as_ptr(), nu, next.as_mut_ptr(), nx), CompcbfStatus::Ok);
        // Identical rooms stay identical.
        assert!(next.iter().all(|&v| (v - next[0]).abs() < 1e-12 && v.is_finite()));
        assert_eq!(
            compcbf_network_step(net, x.as_ptr(), nx - 1, u.as_ptr(), nu, next.as_mut_ptr(), nx),
            CompcbfStatus::InvalidArgument
        );

        let mut label = ptr::null_mut();
        assert_eq!(compcbf_network_label(net, x.as_ptr(), nx, &mut label), CompcbfStatus::Ok);
        assert!(!take(label).is_empty());

        compcbf_certificate_free(c);
        compcbf_network_free(net);
    }
}

#[test]
fn verify_local_reports_failed_conditions() {
    unsafe {
        let c = rooms_certificate();
        let mut net = ptr::null_mut();
        assert_eq!(compcbf_network_rooms(3, &mut net), CompcbfStatus::Ok);
        let grid = CString::new(r#"{"step": 0.05, "conditions": ["initial_level", "unsafe_level"]}"#).unwrap();
        let mut report = ptr::null_mut();
        assert_eq!(compcbf_verify_local(c, net, 0, grid.as_ptr(), &mut report), CompcbfStatus::Ok);
        let r: Value = serde_json::from_str(&take(report)).unwrap();
        assert_eq!(r["conditions"].as_array().unwrap().len(), 2);

        // The shipped rooms certificate does not meet the local decrease on the grid.
        let grid = CString::new(r#"{"step": 0.05}"#).unwrap();
        assert_eq!(compcbf_verify_local(c, net, 1, grid.as_ptr(), ptr::null_mut()), CompcbfStatus::CheckFailed);
        assert!(last_error().contains("decrease"), "{}", last_error());

        assert_eq!(compcbf_verify_local(c, net, 7, ptr::null(), ptr::null_mut()), CompcbfStatus::InvalidArgument);
        compcbf_certificate_free(c);
        compcbf_network_free(net);
    }
}

#[test]
fn custom_network_from_json() {
    unsafe {
        let json = cstring(&data("toy/system.json"));
        let mut net = ptr::null_mut();
        assert_eq!(compcbf_network_from_json(json.as_ptr(), &mut net), CompcbfStatus::Ok);
        assert_eq!(compcbf_network_size(net), 2);
        compcbf_network_free(net);
    }
}

#[test]
fn bad_inputs_set_status_and_message() {
    unsafe {
        let mut a = ptr::null_mut();
        assert_eq!(compcbf_automaton_from_json(ptr::null(), &mut a), CompcbfStatus::NullPointer);
        assert!(a.is_null());
        let junk = CString::new("{not json").unwrap();
        assert_eq!(compcbf_automaton_from_json(junk.as_ptr(), &mut a), CompcbfStatus::Parse);
        assert!(!last_error().is_empty());
        let bytes = [0xffu8, 0xfe, 0];
        assert_eq!(compcbf_automaton_from_json(bytes.as_ptr().cast(), &mut a), CompcbfStatus::InvalidUtf8);
        let mut net = ptr::null_mut();
        assert_ne!(compcbf_network_rooms(0, &mut net), CompcbfStatus::Ok);
        assert_eq!(compcbf_decompose_json(ptr::null(), ptr::null(), ptr::null_mut()), CompcbfStatus::NullPointer);

        // A successful call clears the message.
        let mut net = ptr::null_mut();
        assert_eq!(compcbf_network_rooms(3, &mut net), CompcbfStatus::Ok);
        assert!(compcbf_last_error().is_null());
        compcbf_network_free(net);

        // Freeing NULL is a no-op.
        compcbf_automaton_free(ptr::null_mut());
        compcbf_certificate_free(ptr::null_mut());
        compcbf_network_free(ptr::null_mut());
        compcbf_string_free(ptr::null_mut());
        assert!(!CStr::from_ptr(compcbf_version()).to_bytes().is_empty());
    }
}
