//! STRIPS export of an abstract level.
//!
//! A factored level becomes one proposition per (variable, value) pair and
//! one action per option part and precondition cube. A part's applicable
//! states at the level are covered by cubes (partial assignments) that admit
//! no other state of the level; assignments the level never reaches are
//! treated as don't-cares. Plan-graph levels export one `at-<node>`
//! proposition per node and one action per edge.

use std::fmt::Write;

use skillsym::abstraction::{AbstractLevel, Construction};
use skillsym::planner::candidate_g;
use skillsym::{Hierarchy, Mdp, StateId};

use crate::domain::{Taxi, IN_TAXI, PASS_X, PASS_Y, TAXI_X, TAXI_Y};
use crate::query::{Location, QuerySpec};
use crate::TaxiError;

/// Domain and problem text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PddlExport {
    pub domain: String,
    pub problem: String,
}

/// Goal for the exported problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PddlGoal {
    /// Variable-value literals (factored levels).
    Literals(Vec<(usize, u32)>),
    /// A single node (plan-graph levels).
    State(StateId),
}

type Cube = Vec<(usize, u32)>;

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

fn level_of(h: &Hierarchy, j: usize) -> Result<&AbstractLevel, TaxiError> {
    h.abstract_level(j).ok_or(TaxiError::NotFactored(j))
}

/// Grows each uncovered positive into a cube by dropping variables (in
/// index order) while no negative is admitted.
fn cube_cover(assignments: &[Vec<u32>], positive: &[bool]) -> Vec<Cube> {
    let admits = |cube: &Cube, a: &[u32]| cube.iter().all(|&(v, val)| a[v] == val);
    let mut covered = vec![false; assignments.len()];
    let mut cubes = Vec::new();
    for i in 0..assignments.len() {
        if !positive[i] || covered[i] {
            continue;
        }
        let mut cube: Cube = assignments[i].iter().copied().enumerate().collect();
        let mut v = 0;
        while v < cube.len() {
            let mut trial = cube.clone();
            trial.remove(v);
            let clean = assignments
                .iter()
                .zip(positive)
                .all(|(a, &pos)| pos || !admits(&trial, a));
            if clean {
                cube = trial;
            } else {
                v += 1;
            }
        }
        for (k, a) in assignments.iter().enumerate() {
            if admits(&cube, a) {
                covered[k] = true;
            }
        }
        cubes.push(cube);
    }
    cubes
}

fn prop(m: &Mdp, v: usize, val: u32) -> String {
    let f = m.space().factoring().expect("factored");
    let var = &f.variables()[v];
    format!("{}-{}", sanitize(&var.name), sanitize(&var.values[val as usize]))
}

/// Exports level `j` with the problem starting at level-`j` state `init`.
pub fn export_pddl(h: &Hierarchy, j: usize, init: StateId, goal: &PddlGoal) -> Result<PddlExport, TaxiError> {
    let level = level_of(h, j)?;
    if init.0 >= level.num_states() {
        return Err(TaxiError::Pddl(format!("level {j} has no state {init}")));
    }
    match level.construction() {
        Construction::Factored { partitions } => export_factored(h, j, level, partitions, init, goal),
        Construction::PlanGraph => export_plan_graph(j, level, init, goal),
    }
}

fn export_factored(
    h: &Hierarchy,
    j: usize,
    level: &AbstractLevel,
    partitions: &[skillsym::abstraction::PartitionedOption],
    init: StateId,
    goal: &PddlGoal,
) -> Result<PddlExport, TaxiError> {
    let m = level.mdp();
    let f = m.space().factoring().ok_or(TaxiError::NotFactored(j))?;
    let lower = h.level_mdp(j - 1).expect("lower level");
    let nv = f.variables().len();
    let assignments: Vec<Vec<u32>> = m.space().states().map(|s| f.assignment(s).to_vec()).collect();
    let name = format!("level-{j}");

    let mut d = String::new();
    writeln!(d, "(define (domain {name})").unwrap();
    writeln!(d, "  (:requirements :strips)").unwrap();
    writeln!(d, "  (:predicates").unwrap();
    for (v, var) in f.variables().iter().enumerate() {
        for val in 0..var.values.len() as u32 {
            writeln!(d, "    ({})", prop(m, v, val)).unwrap();
        }
    }
    writeln!(d, "  )").unwrap();

    for (oi, p) in partitions.iter().enumerate() {
        let o = level.option(skillsym::ActionId(oi));
        for part in &p.parts {
            let positive: Vec<bool> = m
                .space()
                .states()
                .map(|s| level.grounding(s).iter().any(|y| part.initiation.contains(y)))
                .collect();
            if !positive.iter().any(|&b| b) {
                continue;
            }
            let cubes = cube_cover(&assignments, &positive);
            let mut base = sanitize(o.id());
            for &(v, val) in &part.selector {
                write!(base, "-{}", prop(lower, v, val)).unwrap();
            }
            for (ci, cube) in cubes.iter().enumerate() {
                let action = if cubes.len() == 1 { base.clone() } else { format!("{base}-{}", ci + 1) };
                writeln!(d, "  (:action {action}").unwrap();
                writeln!(d, "    :parameters ()").unwrap();
                let pre: Vec<String> = cube.iter().map(|&(v, val)| format!("({})", prop(m, v, val))).collect();
                writeln!(d, "    :precondition (and {})", pre.join(" ")).unwrap();
                let mut eff = Vec::new();
                for &(v, val) in &part.effect {
                    if cube.contains(&(v, val)) {
                        continue;
                    }
                    eff.push(format!("({})", prop(m, v, val)));
                    for other in 0..f.variables()[v].values.len() as u32 {
                        if other != val && cube.iter().all(|&(cv, cval)| cv != v || cval == other) {
                            eff.push(format!("(not ({}))", prop(m, v, other)));
                        }
                    }
                }
                writeln!(d, "    :effect (and {}))", eff.join(" ")).unwrap();
            }
        }
    }
    writeln!(d, ")").unwrap();

    let goal_lits = match goal {
        PddlGoal::Literals(l) => l.clone(),
        PddlGoal::State(s) => f.assignment(*s).iter().copied().enumerate().collect(),
    };
    if let Some(&(v, val)) = goal_lits.iter().find(|&&(v, val)| v >= nv || val as usize >= f.variables()[v].values.len()) {
        return Err(TaxiError::Pddl(format!("goal literal ({v}, {val}) is out of range")));
    }
    let mut p = String::new();
    writeln!(p, "(define (problem {name}-task)").unwrap();
    writeln!(p, "  (:domain {name})").unwrap();
    let init_lits: Vec<String> = f
        .assignment(init)
        .iter()
        .enumerate()
        .map(|(v, &val)| format!("({})", prop(m, v, val)))
        .collect();
    writeln!(p, "  (:init {})", init_lits.join(" ")).unwrap();
    let g: Vec<String> = goal_lits.iter().map(|&(v, val)| format!("({})", prop(m, v, val))).collect();
    writeln!(p, "  (:goal (and {})))", g.join(" ")).unwrap();
    Ok(PddlExport { domain: d, problem: p })
}

fn export_plan_graph(j: usize, level: &AbstractLevel, init: StateId, goal: &PddlGoal) -> Result<PddlExport, TaxiError> {
    let m = level.mdp();
    let node = |s: StateId| format!("at-{}", sanitize(&m.space().label(s)));
    let name = format!("level-{j}");
    let mut d = String::new();
    writeln!(d, "(define (domain {name})").unwrap();
    writeln!(d, "  (:requirements :strips)").unwrap();
    writeln!(d, "  (:predicates").unwrap();
    for s in m.space().states() {
        writeln!(d, "    ({})", node(s)).unwrap();
    }
    writeln!(d, "  )").unwrap();
    for (s, a, t, _) in m.transitions() {
        writeln!(d, "  (:action {}-from-{}", sanitize(m.action_name(a)), node(s)).unwrap();
        writeln!(d, "    :parameters ()").unwrap();
        writeln!(d, "    :precondition (and ({}))", node(s)).unwrap();
        if s == t {
            writeln!(d, "    :effect (and ({})))", node(t)).unwrap();
        } else {
            writeln!(d, "    :effect (and ({}) (not ({}))))", node(t), node(s)).unwrap();
        }
    }
    writeln!(d, ")").unwrap();
    let goal = match goal {
        PddlGoal::State(s) if s.0 < m.num_states() => *s,
        other => return Err(TaxiError::Pddl(format!("plan-graph levels need a node goal, got {other:?}"))),
    };
    let mut p = String::new();
    writeln!(p, "(define (problem {name}-task)").unwrap();
    writeln!(p, "  (:domain {name})").unwrap();
    writeln!(p, "  (:init ({}))", node(init)).unwrap();
    writeln!(p, "  (:goal (and ({}))))", node(goal)).unwrap();
    Ok(PddlExport { domain: d, problem: p })
}

/// Initial state and goal for a Taxi query at level `j`: the first level-`j`
/// state covering the first start, and the goal's constraints as literals
/// (factored levels) or the first goal node (plan-graph levels).
pub fn taxi_problem(h: &Hierarchy, taxi: &Taxi, j: usize, q: &QuerySpec) -> Result<(StateId, PddlGoal), TaxiError> {
    let level = level_of(h, j)?;
    let pq = q.expand(taxi)?;
    let x = pq.start().first().expect("non-empty start");
    let init = level
        .mdp()
        .space()
        .states()
        .find(|&s| h.grounds_to(j, s, x))
        .ok_or_else(|| TaxiError::Pddl(format!("no level-{j} state covers the first start state")))?;
    let goal = match level.construction() {
        Construction::PlanGraph => PddlGoal::State(
            candidate_g(h, j, pq.goal())
                .map_err(|_| TaxiError::Pddl(format!("no level-{j} state lies inside the goal")))?
                .first()
                .expect("non-empty"),
        ),
        Construction::Factored { .. } => {
            let mut lits = Vec::new();
            for (loc, xv, yv) in [(&q.goal.taxi_at, TAXI_X, TAXI_Y), (&q.goal.pass_at, PASS_X, PASS_Y)] {
                match loc.cell(&taxi.spec)? {
                    Some(c) => lits.extend([(xv, c.x), (yv, c.y)]),
                    None if *loc == Location::Any => {}
                    None => return Err(TaxiError::Pddl(format!("`{loc}` is not a conjunction of literals"))),
                }
            }
            if let Some(i) = q.goal.in_taxi {
                lits.push((IN_TAXI, i as u32));
            }
            PddlGoal::Literals(lits)
        }
    };
    Ok((init, goal))
}

/// Counts `(:action` forms.
pub fn action_count(domain: &str) -> usize {
    domain.matches("(:action ").count()
}
