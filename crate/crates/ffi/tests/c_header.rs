//! Compiles a small C program against the generated header and the static
//! library and runs it.

use std::path::PathBuf;
use std::process::Command;

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libmajorana_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let bin = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("majorana_smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "compiling the C smoke test failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/majorana.h")).unwrap();
    for name in [
        "mj_chain_new",
        "mj_chain_from_potentials",
        "mj_chain_free",
        "mj_chain_lambdas",
        "mj_exact_fidelity",
        "mj_monte_carlo_fidelity",
        "mj_storage_time",
        "mj_xi_effective",
        "mj_lyapunov_exponent",
        "mj_pfaffian",
        "mj_last_error_message",
        "typedef struct MjChain MjChain",
        "MJ_STATUS_NUMERICAL_FAILURE = 3",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
