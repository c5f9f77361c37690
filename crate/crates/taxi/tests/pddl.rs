//! STRIPS export: golden output, well-formedness and error cases.

use std::path::PathBuf;

use skillsym::StateId;
use taxi::pddl::{action_count, export_pddl, taxi_problem, PddlExport, PddlGoal};
use taxi::query::{query1, query2};
use taxi::{build_hierarchy, Taxi, TaxiError};

fn export(level: usize, q: taxi::QuerySpec) -> Result<PddlExport, TaxiError> {
    let taxi = Taxi::canonical();
    let h = build_hierarchy(&taxi).unwrap();
    let (init, goal) = taxi_problem(&h, &taxi, level, &q)?;
    export_pddl(&h, level, init, &goal)
}

fn balanced(text: &str) -> bool {
    let mut depth = 0i64;
    for c in text.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return false;
        }
    }
    depth == 0
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Set `UPDATE_GOLDEN=1` to rewrite the file after an intended change.
fn check_golden(name: &str, text: &str) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() || !path.exists() {
        std::fs::write(&path, text).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, want, "{} differs from the golden copy", path.display());
}

#[test]
fn level1_matches_golden() {
    let e = export(1, query1()).unwrap();
    check_golden("level1.pddl", &format!("{}\n{}", e.domain, e.problem));
}

#[test]
fn level1_is_well_formed() {
    let e = export(1, query1()).unwrap();
    assert!(balanced(&e.domain) && balanced(&e.problem));
    assert_eq!(action_count(&e.domain), 13);
    assert!(e.domain.contains("(:requirements :strips)"));
    assert_eq!(e.domain.matches("(:action drive-to-").count(), 8);
    assert_eq!(e.domain.matches("(:action pick-up").count(), 4);
    assert!(e.domain.contains("(:action put-down\n"));
    // Q1: the lowest-index start has the taxi at yellow; goal is the passenger at red.
    assert!(e.problem.contains("(:init (taxi-x-0) (taxi-y-0) (pass-x-3) (pass-y-0) (in-taxi-false))"));
    assert!(e.problem.contains("(:goal (and (pass-x-0) (pass-y-4)))"));
}

#[test]
fn export_is_deterministic() {
    assert_eq!(export(1, query2()).unwrap(), export(1, query2()).unwrap());
}

#[test]
fn plan_graph_level_exports_edges() {
    let e = export(2, query1()).unwrap();
    assert!(balanced(&e.domain) && balanced(&e.problem));
    assert_eq!(action_count(&e.domain), 12);
    assert!(e.problem.contains("(:init (at-passenger-to-blue))"));
    assert!(e.problem.contains("(:goal (and (at-passenger-to-red)))"));
}

#[test]
fn base_and_missing_levels_are_rejected() {
    let taxi = Taxi::canonical();
    let h = build_hierarchy(&taxi).unwrap();
    for j in [0, 3] {
        assert!(matches!(
            export_pddl(&h, j, StateId(0), &PddlGoal::Literals(vec![])),
            Err(TaxiError::NotFactored(k)) if k == j
        ));
    }
    assert!(matches!(
        export_pddl(&h, 1, StateId(20), &PddlGoal::Literals(vec![])),
        Err(TaxiError::Pddl(_))
    ));
    assert!(matches!(
        export_pddl(&h, 1, StateId(0), &PddlGoal::Literals(vec![(9, 0)])),
        Err(TaxiError::Pddl(_))
    ));
    assert!(matches!(
        export_pddl(&h, 2, StateId(0), &PddlGoal::Literals(vec![])),
        Err(TaxiError::Pddl(_))
    ));
}
