use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_folnerlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn folnerlab")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn cover_interval_is_two() {
    let out = run(&["cover", "--group", "z", "--set", "-5..5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["status"], "computed");
    assert_eq!(v["result"]["L"], 2);
    assert_eq!(v["result"]["witness"]["mode"], "exact");
    assert_eq!(v["tool"], "folnerlab");
    assert_eq!(v["config"]["command"], "cover");
}

#[test]
fn singleton_is_one() {
    let v = json(&run(&["cover", "--group", "z", "--set", "0"]));
    assert_eq!(v["result"]["L"], 1);
}

#[test]
fn exit_codes() {
    let ok = run(&["cover", "--group", "z2", "--set", "0..2,0..2", "--check", "approximate", "--L", "4"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["status"], "true");
    let no = run(&["cover", "--group", "z2", "--set", "0..2,0..2", "--check", "approximate", "--L", "3"]);
    assert_eq!(no.status.code(), Some(2));
    assert_eq!(json(&no)["status"], "false");
    // a greedy answer above the budget with a lower bound below it decides nothing
    let ind = run(&[
        "cover", "--group", "heis1", "--family", "heisenberg_sqrt", "--index", "1", "--check", "approximate",
        "--L", "8", "--max-universe", "1",
    ]);
    assert_eq!(ind.status.code(), Some(3), "{}", String::from_utf8_lossy(&ind.stdout));
    assert_eq!(run(&["cover", "--group", "nope", "--set", "0"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn bounds_example() {
    let v = json(&run(&["bounds", "--Lg", "2", "--d", "0", "--m", "1"]));
    let s = &v["result"]["summary"];
    assert_eq!((s["rok"].as_u64(), s["am"].as_u64(), s["nuc"].as_u64(), s["Q"].as_u64()), (Some(1), Some(2), Some(2), Some(4)));
}

#[test]
fn wafc_z2_boxes() {
    let out = run(&["folner", "--family", "zm_box", "--m", "2", "--check", "wafc", "--lmax", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["L_G"], 4);
    assert_eq!(v["result"]["scope"], "verified for 1 <= l <= 6");
}

#[test]
fn csv_output() {
    let out = run(&["folner", "--family", "zm_box", "--m", "1", "--lmax", "3", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,size,L,mode,symmetric,defect_0,defect_1"));
    assert_eq!(lines.next(), Some("1,3,2,exact,true,2/3,2/3"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn out_refuses_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let p = path.to_str().unwrap();
    let a = run(&["bounds", "--Lg", "3", "--d", "1", "--out", p]);
    assert_eq!(a.status.code(), Some(0));
    assert!(a.stdout.is_empty());
    let first = std::fs::read(&path).unwrap();
    let b = run(&["bounds", "--Lg", "5", "--d", "1", "--out", p]);
    assert_eq!(b.status.code(), Some(1));
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn campaign_status_is_worst() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"[
          {"command": "bounds", "Lg": 2, "d": 0},
          {"command": "cover", "group": "z", "set": "0..3", "check": "approximate", "L": 1},
          {"command": "marker", "group": "z", "set": "-2..2", "radius": 40}
        ]"#,
    );
    let out = run(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["status"], "false");
    let st: Vec<&str> = v["runs"].as_array().unwrap().iter().map(|r| r["status"].as_str().unwrap()).collect();
    assert_eq!(st, ["computed", "false", "true"]);
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"command": "bounds", "Lg": 2, "d": 0, "colour": 1}"#);
    let out = run(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let cfg = write(
        dir.path(),
        "d.json",
        r#"{"command": "cover", "group": "z", "set": "0", "budget": {"max_universe": 5, "depth": 1}}"#,
    );
    assert_eq!(run(&["--config", &cfg]).status.code(), Some(1));
}

#[test]
fn config_and_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let flags = run(&["cover", "--group", "z2", "--set", "ball:2"]);
    let cfg = write(dir.path(), "c.json", r#"{"command": "cover", "group": "z2", "set": "ball:2"}"#);
    let file = run(&["--config", &cfg]);
    assert_eq!(flags.stdout, file.stdout);
}

#[test]
fn castle_csv_and_json() {
    let out = run(&["castle", "--group", "z", "--family", "zm_box", "--n", "2", "--radius", "60", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("i,j,base_size\n"));
    let v = json(&run(&["castle", "--group", "z", "--family", "zm_box", "--n", "2", "--radius", "60", "--strong"]));
    assert_eq!(v["status"], "true");
    assert_eq!(v["result"]["verdicts"]["strong_disjoint"], "true");
}

#[test]
fn amdim_on_z() {
    let out = run(&[
        "amdim", "--group", "z", "--family", "zm_box", "--n", "2", "--radius", "80", "--strong", "--g", "-3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["result"]["partition"]["verdict"], "true");
    assert_eq!(v["result"]["orthogonality"]["verdict"], "true");
    assert_eq!(v["result"]["equivariance"][0]["g"], serde_json::json!([-3]));
}

#[test]
fn amdim_refuses_plain_castle() {
    let out = run(&["amdim", "--group", "z", "--family", "zm_box", "--n", "2", "--radius", "40"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn thread_cap_is_honoured() {
    let one = bin()
        .env("FOLNERLAB_THREADS", "1")
        .args(["folner", "--family", "zm_box", "--m", "2", "--lmax", "4"])
        .output()
        .unwrap();
    let many = bin()
        .env("FOLNERLAB_THREADS", "4")
        .args(["folner", "--family", "zm_box", "--m", "2", "--lmax", "4"])
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, many.stdout);
    let bad = bin().env("FOLNERLAB_THREADS", "0").args(["bounds", "--Lg", "1", "--d", "0"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn report_matches_schema_shape() {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/report.schema.json")).unwrap())
            .unwrap();
    let required: Vec<&str> = schema["$defs"]["run"]["required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_str().unwrap())
        .collect();
    let v = json(&run(&["cover", "--group", "z", "--set", "0..4"]));
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    let mut req = required.clone();
    req.sort();
    assert_eq!(keys, req);
}
