use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use btl_ffi::*;

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    btl_string_free(s);
    out
}

fn parse(text: &str) -> *mut BtlFormula {
    let c = CString::new(text).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { btl_formula_parse(c.as_ptr(), &mut f) }, BTL_OK);
    f
}

#[test]
fn parse_print_and_evaluate() {
    unsafe {
        let f = parse("props: p q\nE(p U q)");
        assert_eq!(btl_formula_prop_count(f), 2);
        let mut s = ptr::null_mut();
        assert_eq!(btl_formula_print(f, &mut s), BTL_OK);
        assert_eq!(take(s), "E(p U q)");
        let json = CString::new(
            r#"{"props":["p","q"],"nodes":[{"id":0,"label":["p"],"children":[1]},{"id":1,"label":["q"],"children":[]}],"root":0}"#,
        )
        .unwrap();
        let mut t = ptr::null_mut();
        assert_eq!(btl_tree_from_json(json.as_ptr(), &mut t), BTL_OK);
        let mut v = -1;
        assert_eq!(btl_evaluate(f, t, 0, &mut v), BTL_OK);
        assert_eq!(v, 1);
        assert_eq!(btl_evaluate(f, t, 7, &mut v), BTL_ERR_MODEL);
        btl_tree_free(t);
        btl_formula_free(f);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let bad = CString::new("props: p\np & & p").unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(btl_formula_parse(bad.as_ptr(), &mut f), BTL_ERR_PARSE);
        assert!(f.is_null());
        let mut msg = ptr::null_mut();
        assert_eq!(btl_last_error(&mut msg), BTL_OK);
        assert!(!take(msg).is_empty());
        assert_eq!(btl_formula_parse(ptr::null(), &mut f), BTL_ERR_NULL);
        assert_eq!(btl_result_verdict(ptr::null()), BTL_ERR_NULL);
        btl_formula_free(ptr::null_mut());
        btl_string_free(ptr::null_mut());
    }
}

#[test]
fn sat_verdicts() {
    unsafe {
        let f = parse("props: p\nAG EX p");
        let mut r = ptr::null_mut();
        assert_eq!(btl_sat(f, 0, 0, &mut r), BTL_OK);
        assert_eq!(btl_result_verdict(r), BTL_SAT);
        let mut w = ptr::null_mut();
        assert_eq!(btl_result_witness_json(r, &mut w), BTL_OK);
        assert!(take(w).contains("edges"));
        let mut rep = ptr::null_mut();
        assert_eq!(btl_result_report_json(r, &mut rep), BTL_OK);
        assert!(take(rep).contains("\"NONEMPTY\""));
        btl_result_free(r);
        btl_formula_free(f);

        let f = parse("props: p\nEX p & AX !p");
        assert_eq!(btl_sat(f, 2, 0, &mut r), BTL_OK);
        assert_eq!(btl_result_verdict(r), BTL_UNSAT);
        assert_eq!(btl_result_witness_json(r, &mut w), BTL_ERR_NO_WITNESS);
        btl_result_free(r);
        btl_formula_free(f);
    }
}

#[test]
fn header_lists_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/btl.h")).unwrap();
    for name in [
        "btl_formula_parse",
        "btl_sat",
        "btl_result_verdict",
        "typedef struct BtlFormula BtlFormula",
        "#define BTL_ERR_PANIC -7",
    ] {
        assert!(h.contains(name), "{name}");
    }
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links() {
    let exe = std::env::current_exe().unwrap();
    // target/<profile>/deps/capi-* -> target/<profile>
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libbtl_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "btl.h"
int main(void) {
    BtlFormula *f = NULL;
    BtlResult *r = NULL;
    if (btl_formula_parse("props: p\nEF p & AG EX true", &f) != BTL_OK) return 10;
    if (btl_sat(f, 2, 0, &r) != BTL_OK) return 11;
    int v = btl_result_verdict(r);
    btl_result_free(r);
    btl_formula_free(f);
    if (btl_formula_parse("props: p\np &", &f) != BTL_ERR_PARSE) return 12;
    printf("%s %d\n", btl_version(), v);
    return v == BTL_SAT ? 0 : 13;
}
"#,
    )
    .unwrap();
    let bin: PathBuf = dir.path().join("main");
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("cc available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stdout).ends_with(" 0\n"));
}
