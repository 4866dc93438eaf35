//! Builds `tests/c/smoke.c` against the generated header and the shared
//! library and runs it on the rooms example.

use std::path::{Path, PathBuf};
use std::process::Command;

fn manifest() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

/// Directory holding `libcompcbf_ffi.so`: the parent of `deps/`.
fn lib_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(manifest().join("include/compcbf.h")).unwrap();
    for name in [
        "typedef enum CompcbfStatus",
        "typedef struct CompcbfAutomaton CompcbfAutomaton",
        "compcbf_last_error(void)",
        "compcbf_decompose_json",
        "compcbf_check_small_gain",
        "compcbf_verify_local",
        "compcbf_network_step",
        "compcbf_string_free",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

#[test]
fn c_program_links_and_runs() {
    let lib = lib_dir();
    assert!(
        lib.join("libcompcbf_ffi.so").exists() || lib.join("libcompcbf_ffi.dylib").exists(),
        "no shared library in {}",
        lib.display()
    );
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(manifest().join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest().join("include"))
        .arg("-L")
        .arg(&lib)
        .arg("-lcompcbf_ffi")
        .status()
        .unwrap_or_else(|e| panic!("cannot run {cc}: {e}"));
    assert!(status.success());

    let data = manifest().join("../core/data/rooms");
    let run = Command::new(&exe)
        .arg(data.join("automaton.json"))
        .arg(data.join("certificate.json"))
        .env("LD_LIBRARY_PATH", &lib)
        .env("DYLD_LIBRARY_PATH", &lib)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("N=100"), "{stdout}");
}
