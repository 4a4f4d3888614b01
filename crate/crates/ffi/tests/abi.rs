use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use grcc_ffi::*;

fn fixture(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = grcc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Loaded {
    case: *mut GrccCase,
    cfg: *mut GrccConfig,
}

impl Drop for Loaded {
    fn drop(&mut self) {
        unsafe {
            grcc_config_free(self.cfg);
            grcc_case_free(self.case);
        }
    }
}

fn load(case: &str, cfg: Option<&str>) -> Loaded {
    let mut l = Loaded { case: ptr::null_mut(), cfg: ptr::null_mut() };
    unsafe {
        assert_eq!(grcc_case_load(fixture(case).as_ptr(), &mut l.case), GrccStatus::Ok);
        let cfg_path = cfg.map(fixture);
        let p = cfg_path.as_ref().map_or(ptr::null(), |c| c.as_ptr());
        assert_eq!(grcc_config_load(p, l.case, &mut l.cfg), GrccStatus::Ok);
    }
    l
}

#[test]
fn safety_factor_matches_closed_form() {
    let mut k = 0.0;
    let mut b = GrccSafetyBranch::SpreadOnly;
    unsafe {
        assert_eq!(grcc_safety_factor(0.2, 0.1, 1.1, &mut k, &mut b), GrccStatus::Ok);
    }
    let want = 0.1f64.sqrt() + (0.8f64 / 0.2).sqrt();
    assert!((k - want).abs() < 1e-12);
    assert_eq!(b, GrccSafetyBranch::MeanAndSpread);
    unsafe {
        assert_eq!(grcc_safety_factor(0.05, 0.5, 1.1, &mut k, ptr::null_mut()), GrccStatus::Ok);
    }
    assert!((k - (1.1f64 / 0.05).sqrt()).abs() < 1e-12);
}

#[test]
fn bad_epsilon_sets_last_error() {
    let mut k = 0.0;
    let s = unsafe { grcc_safety_factor(1.5, 0.1, 1.1, &mut k, ptr::null_mut()) };
    assert_ne!(s, GrccStatus::Ok);
    assert!(!last_error().is_empty());
}

#[test]
fn null_and_missing_inputs() {
    let mut case = ptr::null_mut();
    unsafe {
        assert_eq!(grcc_case_load(ptr::null(), &mut case), GrccStatus::NullPointer);
        let missing = CString::new("/nonexistent/case.m").unwrap();
        assert_eq!(grcc_case_load(missing.as_ptr(), &mut case), GrccStatus::Parse);
        assert!(last_error().contains("/nonexistent/case.m"));
        assert!(case.is_null());
        let mut n = 0;
        assert_eq!(grcc_case_dims(ptr::null(), &mut n, ptr::null_mut(), ptr::null_mut()), GrccStatus::NullPointer);
        grcc_case_free(ptr::null_mut());
        grcc_dispatch_free(ptr::null_mut());
    }
}

#[test]
fn invalid_gammas_rejected() {
    let l = load("case3.toml", None);
    unsafe {
        assert_eq!(grcc_config_set_gammas(l.cfg, 0.1, 0.5), GrccStatus::Parse);
        assert!(last_error().contains("γ₂"));
        assert_eq!(grcc_config_set_gammas(l.cfg, 0.1, 1.1), GrccStatus::Ok);
    }
}

#[test]
fn cone_solve_round_trip() {
    let l = load("case14.m", Some("case14.study.toml"));
    unsafe {
        let mut n_gen = 0;
        let mut n_bus = 0;
        assert_eq!(grcc_case_dims(l.case, &mut n_gen, &mut n_bus, ptr::null_mut()), GrccStatus::Ok);
        assert_eq!(n_bus, 14);

        let mut d = ptr::null_mut();
        assert_eq!(grcc_solve(l.case, l.cfg, GrccFormulation::Cone, &mut d), GrccStatus::Ok);
        let (mut z, mut cert, mut viol) = (0.0, false, 0.0);
        assert_eq!(grcc_dispatch_summary(d, &mut z, &mut cert, &mut viol), GrccStatus::Ok);
        assert!(z.is_finite() && cert);

        let mut p = vec![0.0; n_gen];
        let mut a = vec![0.0; n_gen];
        assert_eq!(grcc_dispatch_copy(d, p.as_mut_ptr(), a.as_mut_ptr(), n_gen - 1), GrccStatus::BufferTooSmall);
        assert_eq!(grcc_dispatch_copy(d, p.as_mut_ptr(), a.as_mut_ptr(), n_gen), GrccStatus::Ok);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-6, "{a:?}");

        let (mut r1, mut se) = (0.0, 0.0);
        assert_eq!(grcc_dispatch_risk(d, GrccFamily::Laplace, 4000, 9, &mut r1, &mut se), GrccStatus::Ok);
        assert!(r1 <= 0.2 + 3.0 * se, "{r1} {se}");
        let mut r2 = 0.0;
        assert_eq!(grcc_dispatch_risk(d, GrccFamily::Laplace, 4000, 9, &mut r2, ptr::null_mut()), GrccStatus::Ok);
        assert_eq!(r1.to_bits(), r2.to_bits());
        grcc_dispatch_free(d);
    }
}

#[test]
fn lp_objective_bounds_cone_objective() {
    let l = load("case5.m", Some("case5.study.toml"));
    let z = |f| unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(grcc_solve(l.case, l.cfg, f, &mut d), GrccStatus::Ok);
        let mut z = 0.0;
        grcc_dispatch_summary(d, &mut z, ptr::null_mut(), ptr::null_mut());
        grcc_dispatch_free(d);
        z
    };
    assert!(z(GrccFormulation::Rlt) <= z(GrccFormulation::Cone) + 1e-6);
}

#[test]
fn infeasible_solve_is_solver_error() {
    let text = std::fs::read_to_string(fixture("case3.toml").to_str().unwrap())
        .unwrap()
        .replace("flow_limit = 1.2", "flow_limit = 0.5");
    let text = CString::new(text).unwrap();
    unsafe {
        let mut case = ptr::null_mut();
        assert_eq!(grcc_case_parse(text.as_ptr(), &mut case), GrccStatus::Ok);
        let mut cfg = ptr::null_mut();
        assert_eq!(grcc_config_load(ptr::null(), case, &mut cfg), GrccStatus::Ok);
        assert_eq!(grcc_check(case, cfg), GrccStatus::Ok);
        let mut d = ptr::null_mut();
        assert_eq!(grcc_solve(case, cfg, GrccFormulation::Cone, &mut d), GrccStatus::Solver);
        assert!(d.is_null());
        grcc_config_free(cfg);
        grcc_case_free(case);
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_drives_a_c_program() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = target_dir();
    if !lib_dir.join("libgrcc_ffi.so").exists() {
        panic!("shared library missing in {}", lib_dir.display());
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "grcc.h"
int main(int argc, char **argv) {
    GrccCase *c = NULL;
    GrccConfig *cfg = NULL;
    GrccDispatch *d = NULL;
    size_t ng = 0;
    double z = 0, p[8], a[8];
    bool cert = false;
    if (grcc_case_load(argv[1], &c) != GRCC_STATUS_OK) return 10;
    if (grcc_config_load(NULL, c, &cfg) != GRCC_STATUS_OK) return 11;
    if (grcc_solve(c, cfg, GRCC_FORMULATION_CONE, &d) != GRCC_STATUS_OK) {
        fprintf(stderr, "%s\n", grcc_last_error());
        return 12;
    }
    grcc_case_dims(c, &ng, NULL, NULL);
    if (grcc_dispatch_copy(d, p, a, 8) != GRCC_STATUS_OK) return 13;
    grcc_dispatch_summary(d, &z, &cert, NULL);
    printf("%zu %.6f %d\n", ng, z, cert);
    if (grcc_case_load("/nonexistent", &c) != GRCC_STATUS_PARSE) return 14;
    grcc_dispatch_free(d);
    grcc_config_free(cfg);
    grcc_case_free(c);
    return argc == 2 ? 0 : 15;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let cc = Command::new("cc")
        .arg(&src)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(root.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lgrcc_ffi")
        .arg("-o")
        .arg(&exe)
        .output()
        .expect("C compiler available");
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let out = Command::new(&exe)
        .arg(fixture("case3.toml").to_str().unwrap())
        .env("LD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    let f: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(f.len(), 3);
    assert!(f[1].parse::<f64>().unwrap() > 0.0);
}
