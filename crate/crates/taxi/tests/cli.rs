//! The `skillsym` binary: outputs and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

use taxi::bench::CSV_HEADER;
use taxi::{Cell, TaxiSpec};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skillsym")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("skillsym-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn build_prints_a_snapshot() {
    let o = run(&["build"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.is_object());
    assert!(String::from_utf8_lossy(&o.stderr).contains("650 / 20 / 4"));
}

#[test]
fn plan_q1_solves_at_the_top() {
    let q = scratch("q1.json");
    std::fs::write(
        &q,
        r#"{"name": "Q1", "B": {"taxi-at": "any-depot", "pass-at": "blue", "in-taxi": false}, "G": {"pass-at": "red"}}"#,
    )
    .unwrap();
    let o = run(&["plan", "--query", q.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["solution_level"], 2);
    assert_eq!(v["starts"].as_array().unwrap().len(), 4);
    assert_eq!(v["starts"][0]["plan"][0], "passenger-to-red");
}

#[test]
fn plan_from_inline_predicates_and_lower_level() {
    let o = run(&["plan", "--B", "pass-at=blue,taxi-at=red,in-taxi=false", "--G", "pass-at=red", "--at-level", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["search_from"], 1);
    assert_eq!(v["solution_level"], 1);
}

#[test]
fn bad_input_exits_one() {
    assert_eq!(run(&["plan", "--B", "pass-at=nowhere", "--G", "pass-at=red"]).status.code(), Some(1));
    assert_eq!(run(&["plan", "--B", "pass-at=blue"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn unreachable_goal_exits_two() {
    // Wall in cell 4:2 on all three open sides.
    let mut spec = TaxiSpec::canonical();
    let c = Cell::new(4, 2);
    for n in [Cell::new(3, 2), Cell::new(4, 1), Cell::new(4, 3)] {
        spec.walls.push([c, n]);
    }
    let layout = scratch("walled.json");
    std::fs::write(&layout, serde_json::to_string(&spec).unwrap()).unwrap();
    let o = run(&[
        "--layout",
        layout.to_str().unwrap(),
        "plan",
        "--B",
        "taxi-at=red,pass-at=blue,in-taxi=false",
        "--G",
        "taxi-at=4:2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["solution_level"].is_null());
}

#[test]
fn bench_writes_csv_and_json() {
    let o = run(&["bench", "--reps", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("Q1,2,"));
    let o = run(&["bench", "--reps", "1", "--out", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn export_pddl_writes_files() {
    let d = scratch("domain.pddl");
    let p = scratch("problem.pddl");
    let o = run(&[
        "export-pddl",
        "--level",
        "1",
        "--domain-out",
        d.to_str().unwrap(),
        "--problem-out",
        p.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let domain = std::fs::read_to_string(&d).unwrap();
    assert_eq!(taxi::pddl::action_count(&domain), 13);
    assert!(std::fs::read_to_string(&p).unwrap().contains("(:goal"));
    assert_eq!(run(&["export-pddl", "--level", "0"]).status.code(), Some(1));
}
