use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use gammareg_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe { gr_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(gr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn step_function_norms() {
    // Indicator of [0, 1] times e_1 in ℓ²_1.
    let (knots, vals) = ([0.0, 1.0], [1.0]);
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { gr_step_new(1, knots.as_ptr(), 1, vals.as_ptr(), 2.0, &mut f) }, GrStatus::Ok);
    let mut v = 0.0;
    assert_eq!(unsafe { gr_gamma_norm_hilbert(f, &mut v) }, GrStatus::Ok);
    assert!((v - 1.0).abs() < 1e-12);

    let (mut mc, mut se) = (0.0, 0.0);
    assert_eq!(unsafe { gr_gamma_norm_mc(f, 4096, 3, &mut mc, &mut se) }, GrStatus::Ok);
    assert!((mc - 1.0).abs() < 4.0 * se && se > 0.0);
    assert_eq!(unsafe { gr_gamma_norm_mc(f, 4096, 3, &mut mc, ptr::null_mut()) }, GrStatus::Ok);

    let (mut lhs, mut rhs) = (0.0, 0.0);
    assert_eq!(unsafe { gr_hardy_check(f, 0.5, &mut lhs, &mut rhs) }, GrStatus::Ok);
    assert!((lhs - 2f64.sqrt()).abs() < 1e-6 && (rhs - 2.0).abs() < 1e-6);
    unsafe { gr_step_free(f) };

    let knots = [0.0, 1.0, 0.5];
    let mut g = ptr::null_mut();
    let vals = [1.0, 2.0];
    assert_eq!(unsafe { gr_step_new(2, knots.as_ptr(), 1, vals.as_ptr(), 2.0, &mut g) }, GrStatus::InvalidInput);
    assert!(g.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn operator_calls() {
    let a = [0.5, 0.0, 0.0, 2.0];
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { gr_operator_new(2, a.as_ptr(), &mut op) }, GrStatus::Ok);
    let x = [1.0, -1.0];
    let mut v = 0.0;
    assert_eq!(unsafe { gr_sqfn_norm(op, x.as_ptr(), 2.0, &mut v) }, GrStatus::Ok);
    assert!((v - 1.0).abs() < 1e-6, "{v}");
    assert_eq!(unsafe { gr_maxreg_constant(op, 10, 1, &mut v) }, GrStatus::Ok);
    assert!(v > 0.0 && v <= 1.05);
    assert_eq!(unsafe { gr_maxreg_constant(op, 0, 1, &mut v) }, GrStatus::InvalidInput);
    unsafe { gr_operator_free(op) };
    unsafe { gr_operator_free(ptr::null_mut()) };

    let bad = [-1.0];
    let mut op = ptr::null_mut();
    assert_ne!(unsafe { gr_operator_new(1, bad.as_ptr(), &mut op) }, GrStatus::Ok);
    assert!(op.is_null());
}

#[test]
fn null_pointers_are_reported() {
    let mut v = 0.0;
    assert_eq!(unsafe { gr_gamma_norm_hilbert(ptr::null(), &mut v) }, GrStatus::NullPointer);
    assert!(last_error().contains("null"));
    assert_eq!(unsafe { gr_operator_new(2, ptr::null(), ptr::null_mut()) }, GrStatus::NullPointer);
    assert_eq!(unsafe { gr_report_passed(ptr::null()) }, -1);
    assert_eq!(unsafe { gr_report_csv(ptr::null(), ptr::null_mut(), 0) }, 0);
}

#[test]
fn config_and_suite_round_trip() {
    let mut cfg = ptr::null_mut();
    let bad = CString::new("[gamma]\nsamples = 1\n").unwrap();
    assert_eq!(unsafe { gr_config_parse(bad.as_ptr(), &mut cfg) }, GrStatus::InvalidConfig);
    assert!(last_error().contains("gamma.samples"));
    let typo = CString::new("[gamma]\nsampels = 3\n").unwrap();
    assert_eq!(unsafe { gr_config_parse(typo.as_ptr(), &mut cfg) }, GrStatus::Parse);

    let text = CString::new("seed = 5\n[gamma]\ncases = 3\nhardy_cases = 3\n").unwrap();
    assert_eq!(unsafe { gr_config_parse(text.as_ptr(), &mut cfg) }, GrStatus::Ok);
    let mut rep = ptr::null_mut();
    let name = CString::new("gamma-norm").unwrap();
    assert_eq!(unsafe { gr_run_suite(cfg, name.as_ptr(), &mut rep) }, GrStatus::Ok);
    assert_eq!(unsafe { gr_report_passed(rep) }, 1);
    let n = unsafe { gr_report_check_count(rep) };
    assert!(n > 0);
    for i in 0..n {
        let (mut value, mut bound, mut passed, mut crit) = (0.0, 0.0, 0, 0u8);
        assert_eq!(unsafe { gr_report_check(rep, i, &mut value, &mut bound, &mut passed, &mut crit) }, GrStatus::Ok);
        assert_eq!(passed, 1);
        assert!(crit == 1 || crit == 2);
        let need = unsafe { gr_report_check_name(rep, i, ptr::null_mut(), 0) };
        assert!(need > 1);
    }
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0, 0u8);
    assert_eq!(unsafe { gr_report_check(rep, n, &mut a, &mut b, &mut c, &mut d) }, GrStatus::InvalidInput);

    let need = unsafe { gr_report_csv(rep, ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; need];
    assert_eq!(unsafe { gr_report_csv(rep, buf.as_mut_ptr(), need) }, need);
    let csv = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
    assert!(csv.starts_with("op,dim,q,theta,seed,value,bound,margin\n"));
    // Truncated copies stay NUL-terminated.
    let mut small = vec![1 as c_char; 4];
    unsafe { gr_report_csv(rep, small.as_mut_ptr(), 4) };
    assert_eq!(unsafe { CStr::from_ptr(small.as_ptr()) }.to_str().unwrap(), "op,");
    unsafe { gr_report_free(rep) };

    let unknown = CString::new("nope").unwrap();
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { gr_run_suite(cfg, unknown.as_ptr(), &mut rep) }, GrStatus::InvalidConfig);
    unsafe { gr_config_free(cfg) };
}

#[test]
fn header_declares_every_export_and_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/gammareg.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    for line in src.lines().filter(|l| l.contains("extern \"C\" fn gr_")) {
        let name = line.split("fn ").nth(1).unwrap().split('(').next().unwrap();
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    let Ok(cc) = Command::new("cc").arg("--version").output() else { return };
    assert!(cc.status.success());
    let probe = std::env::temp_dir().join(format!("gammareg_probe_{}.c", std::process::id()));
    std::fs::write(&probe, "#include \"gammareg.h\"\nint main(void) { return gr_version() == 0; }\n").unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&probe)
        .output()
        .unwrap();
    let _ = std::fs::remove_file(&probe);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn c_program_links_and_runs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = Path::new(env!("CARGO_TARGET_TMPDIR")).parent().unwrap().join("debug");
    if !lib_dir.join("libgammareg_ffi.so").exists() || Command::new("cc").arg("--version").output().is_err() {
        return;
    }
    let work = std::env::temp_dir().join(format!("gammareg_c_{}", std::process::id()));
    std::fs::create_dir_all(&work).unwrap();
    let src = work.join("main.c");
    std::fs::write(
        &src,
        r#"#include <math.h>
#include <stdio.h>
#include "gammareg.h"

int main(void) {
    double knots[3] = {0.0, 1.0, 3.0};
    double vals[4] = {1.0, 0.0, 0.0, 2.0};
    GrStep *f = NULL;
    if (gr_step_new(2, knots, 2, vals, 2.0, &f) != GR_STATUS_OK) return 1;
    double v = 0.0;
    if (gr_gamma_norm_hilbert(f, &v) != GR_STATUS_OK) return 2;
    gr_step_free(f);
    /* ‖f‖² = 1·1 + 2·4 */
    if (fabs(v - 3.0) > 1e-12) return 3;
    GrOperator *a = NULL;
    double m[1] = {-1.0};
    if (gr_operator_new(1, m, &a) == GR_STATUS_OK) return 4;
    char buf[128];
    if (gr_last_error(buf, sizeof buf) < 2) return 5;
    printf("%s\n", gr_version());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = work.join("probe");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .arg("-L")
        .arg(&lib_dir)
        .args(["-lgammareg_ffi", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    let _ = std::fs::remove_dir_all(&work);
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
