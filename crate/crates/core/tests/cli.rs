use std::path::Path;
use std::process::{Command, Output};

use btl_core::formula::{parse, parse_file};
use btl_core::tree_model::{evaluate_state, unfold, KripkeModel};

fn btl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btl"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const CHAIN: &str = r#"{"props":["p","q"],"nodes":[{"id":0,"label":["p"],"children":[1]},{"id":1,"label":["p"],"children":[2]},{"id":2,"label":["q"],"children":[]}],"root":0}"#;

const SECOND_ROW: &str = r#"{"tiles":["a","b"],"H":[["a","a"],["b","b"]],"V":[["a","a"],["a","b"],["b","a"],["b","b"]],"F":["a"],"L":["b"],"n":1}"#;

#[test]
fn unsat_exit_and_caveat() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "contradiction.btl", "props: p\np & !p\n");
    let o = btl(&["sat", "contradiction.btl"], d.path());
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.starts_with("UNSAT(branching <= 2)"), "{out}");
    assert!(out.contains("higher degree are not excluded"));
}

#[test]
fn sat_writes_a_checkable_witness() {
    let d = tempfile::tempdir().unwrap();
    let text = "props: p q\nAG EX p & E(p U q) & A Finf !q\n";
    write(d.path(), "exp.btl", text);
    let o = btl(&["sat", "exp.btl", "--d-max", "2", "--emit-witness", "w.json"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let w = KripkeModel::from_json(&std::fs::read_to_string(d.path().join("w.json")).unwrap()).unwrap();
    let t = unfold(&w, 3 * w.len());
    // the unfolding cuts infinite paths, so only the finite conjuncts are
    // checked there; the full formula goes through `mc`
    let finite = parse("E(p U q)", ["p", "q"]).unwrap();
    assert!(evaluate_state(&t, 0, &finite).unwrap());
    let o = btl(&["mc", "exp.btl", "w.json"], d.path());
    assert_eq!(stdout(&o), "true\n");
}

#[test]
fn tiny_state_cap_is_unknown() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "huge.btl", "props: p q\nAG(EX p & EX q) & AG EF (p & q) & EG !p\n");
    let o = btl(&["sat", "huge.btl", "--state-cap", "10"], d.path());
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}

#[test]
fn model_checking_a_chain() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "chain.json", CHAIN);
    let o = btl(&["mc", "E(p U q)", "chain.json"], d.path());
    assert_eq!((o.status.code(), stdout(&o)), (Some(0), "true\n".to_string()));
    let o = btl(&["mc", "E(p U q)", "chain.json", "--node", "2"], d.path());
    assert_eq!(stdout(&o), "true\n");
    let o = btl(&["mc", "EX EX E(Y p)", "chain.json"], d.path());
    assert_eq!(stdout(&o), "true\n");
    let o = btl(&["mc", "E(p U r)", "chain.json"], d.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn normalize_round_trips() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "f.btl", "props: p q\nAG N E(F p & X q) & !E(X N EF q)\n");
    let o = btl(&["normalize", "f.btl"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let (file, table) = out.split_once("\n\n").unwrap();
    parse_file(file).unwrap();
    assert!(table.contains("_nf"), "{out}");
}

#[test]
fn tiling_gen_then_sat_agrees_with_solve() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "inst.json", SECOND_ROW);
    let o = btl(&["tiling", "solve", "inst.json"], d.path());
    assert_eq!(stdout(&o), "E\n");
    let o = btl(
        &["tiling", "gen", "--encoding", "ubpn", "inst.json", "--emit-seed", "seed.json"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    write(d.path(), "ubpn.btl", &stdout(&o));
    let o = btl(&["sat", "ubpn.btl", "--seed-model", "seed.json"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn invalid_instances_need_padding() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "raw.json",
        r#"{"tiles":["a","b"],"H":[["a","b"]],"V":[["a","a"]],"F":["a"],"L":["b"],"n":1}"#,
    );
    let o = btl(&["tiling", "solve", "raw.json"], d.path());
    assert_eq!(o.status.code(), Some(3));
    let o = btl(&["tiling", "solve", "raw.json", "--pad"], d.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("sink"));
}

#[test]
fn json_reports_are_versioned_and_deterministic() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "f.btl", "props: p q\nAG EF p & EX q\n");
    let run = || {
        let o = btl(&["--format", "json", "sat", "f.btl"], d.path());
        let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v["stats"]["millis"] = 0.into();
        v
    };
    let a = run();
    assert_eq!(a["schema"], 1);
    assert_eq!(a["verdict"], "SAT");
    assert_eq!(a, run());
    let o = btl(&["random", "--seed", "7"], d.path());
    assert_eq!(stdout(&o), stdout(&btl(&["random", "--seed", "7"], d.path())));
    parse_file(&stdout(&o)).unwrap();
}

#[test]
fn input_errors_exit_3() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad.btl", "props: p\np &\n");
    assert_eq!(btl(&["sat", "bad.btl"], d.path()).status.code(), Some(3));
    assert_eq!(btl(&["sat", "missing.btl"], d.path()).status.code(), Some(3));
    assert_eq!(btl(&["sat", "bad.btl", "--d-max", "0"], d.path()).status.code(), Some(3));
    assert_eq!(btl(&["frobnicate"], d.path()).status.code(), Some(3));
}

#[test]
fn compile_dumps() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "f.btl", "props: p\nE(p S true) & EX p\n");
    let o = btl(&["compile", "f.btl", "--emit", "haa"], d.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_object());
    write(d.path(), "g.btl", "props: p\nAG EX p\n");
    let o = btl(&["--format", "json", "compile", "g.btl", "--emit", "nra", "--node-cap", "3"], d.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["shown"].as_u64().unwrap() <= 3);
    assert!(v["reachable"].as_u64().unwrap() >= 1);
}
