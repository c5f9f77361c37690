//! Answering plan queries against a hierarchy.
//!
//! Levels are searched from the top down. At each level the unique maximal
//! candidate pair is built in one pass over the level's states:
//!
//! * `b = { s : G0(s) ∩ B ≠ ∅ }`, usable iff `B ⊆ ∪_{s∈b} G0(s)`;
//! * `g = { s : G0(s) ⊆ G }`, usable iff non-empty.
//!
//! When both are usable the pair is a planmatch and a plan from every state
//! of `b` to some state of `g` is attempted. A match without a plan falls
//! through to the next level down.
//!
//! Costs are counted in operations: one per grounding test while matching
//! (exactly `2·|S_j|` per level) and one per transition examined while
//! planning.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::hierarchy::Hierarchy;
use crate::mdp::{ActionId, Mdp, MdpError, StateId};
use crate::skill::ExecutionTrace;
use crate::symbols::{GroundingSet, SymbolError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid plan query: {0}")]
    InvalidQuery(String),
    #[error("level {level} is outside 0..={top}")]
    LevelOutOfRange { level: usize, top: usize },
    #[error("no candidate match at level {level}")]
    NoMatch { level: usize },
    #[error("base state {0} is not covered by the plan's start set")]
    StartNotCovered(StateId),
    #[error("option `{option}` cannot start from base state {state}")]
    NotApplicable { option: String, state: StateId },
    #[error("refinement left the plan's state cover: {0}")]
    RefinementFault(String),
    #[error("inconsistent instrumentation record: {0}")]
    InconsistentRecord(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PlanMethod {
    /// Backward breadth-first search; every transition costs the same.
    #[default]
    Reachability,
    /// Dynamic programming on the level's rewards. Falls back to
    /// reachability when the greedy policy is not proper.
    ValueIteration,
}

/// A plan query `(B, G)` over base states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanQuery {
    start: GroundingSet,
    goal: GroundingSet,
}

impl PlanQuery {
    pub fn new(start: GroundingSet, goal: GroundingSet) -> Result<Self, PlanError> {
        if start.level() != 0 || goal.level() != 0 {
            return Err(PlanError::InvalidQuery("start and goal must be base-level sets".into()));
        }
        if start.universe() != goal.universe() {
            return Err(PlanError::InvalidQuery("start and goal universes differ".into()));
        }
        if start.is_empty() || goal.is_empty() {
            return Err(PlanError::InvalidQuery("start and goal must be non-empty".into()));
        }
        Ok(Self { start, goal })
    }

    pub fn start(&self) -> &GroundingSet {
        &self.start
    }

    pub fn goal(&self) -> &GroundingSet {
        &self.goal
    }

    fn check(&self, h: &Hierarchy) -> Result<(), PlanError> {
        if self.start.universe() != h.num_states(0) {
            return Err(PlanError::InvalidQuery(format!(
                "query covers {} base states, hierarchy has {}",
                self.start.universe(),
                h.num_states(0)
            )));
        }
        Ok(())
    }
}

/// Candidate start and goal sets at one level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchPair {
    pub level: usize,
    pub b: GroundingSet,
    pub g: GroundingSet,
}

/// A policy at one level leading every start state into the goal set.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    level: usize,
    policy: Vec<Option<ActionId>>,
    starts: GroundingSet,
    goals: GroundingSet,
}

impl Plan {
    pub fn level(&self) -> usize {
        self.level
    }

    /// The action taken at `s`; `None` on goal states and states the plan
    /// does not cover.
    pub fn action(&self, s: StateId) -> Option<ActionId> {
        self.policy.get(s.0).copied().flatten()
    }

    pub fn starts(&self) -> &GroundingSet {
        &self.starts
    }

    pub fn goals(&self) -> &GroundingSet {
        &self.goals
    }

    /// Follows the policy from `s` on `mdp` (the level the plan was made
    /// for) and returns the actions taken, or `None` if it does not reach
    /// the goal set.
    pub fn actions_from(&self, mdp: &Mdp, s: StateId) -> Option<Vec<ActionId>> {
        let mut out = Vec::new();
        let mut cur = s;
        while !self.goals.contains(cur) {
            if out.len() > mdp.num_states() {
                return None;
            }
            let a = self.action(cur)?;
            cur = mdp.successor(cur, a)?;
            out.push(a);
        }
        Some(out)
    }
}

/// Work done at one level by [`answer_query`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LevelCost {
    pub level: usize,
    pub states: usize,
    /// `m(|S_j|)`: grounding tests while building candidates.
    pub match_ops: u64,
    /// `p(|S_j|)`: transitions examined while planning; `None` if the level
    /// had no planmatch.
    pub plan_ops: Option<u64>,
    pub match_time: Duration,
    pub plan_time: Option<Duration>,
}

impl LevelCost {
    pub fn matched(&self) -> bool {
        self.plan_ops.is_some()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InstrumentationRecord {
    /// Top level searched (`n` unless the search started lower).
    pub depth: usize,
    /// One entry per visited level, top first.
    pub levels: Vec<LevelCost>,
    /// `k`: highest level with a planmatch.
    pub first_match: Option<usize>,
    /// `l`: level the plan was found at.
    pub solution: Option<usize>,
    /// `h(k, l, M)` in operations, once a solution exists.
    pub h: Option<f64>,
}

impl InstrumentationRecord {
    pub fn cost(&self, level: usize) -> Option<&LevelCost> {
        self.levels.iter().find(|c| c.level == level)
    }

    pub fn match_time(&self) -> Duration {
        self.levels.iter().map(|c| c.match_time).sum()
    }

    pub fn plan_time(&self) -> Duration {
        self.levels.iter().filter_map(|c| c.plan_time).sum()
    }
}

/// `h(k, l, M) = Σ_{a=k+1}^{n} m(|S_a|) + Σ_{b=l}^{k} [m(|S_b|) + p(|S_b|)]`
/// evaluated from the operation counts in `rec`.
pub fn h_cost(rec: &InstrumentationRecord, n: usize) -> Result<f64, PlanError> {
    let k = rec
        .first_match
        .ok_or_else(|| PlanError::InconsistentRecord("no first-match level".into()))?;
    let l = rec
        .solution
        .ok_or_else(|| PlanError::InconsistentRecord("no solution level".into()))?;
    if l > k || k > n {
        return Err(PlanError::InconsistentRecord(format!(
            "need l ≤ k ≤ n, got l={l}, k={k}, n={n}"
        )));
    }
    let m = |a: usize| {
        rec.cost(a)
            .map(|c| c.match_ops as f64)
            .ok_or_else(|| PlanError::InconsistentRecord(format!("no match cost for level {a}")))
    };
    let p = |b: usize| {
        rec.cost(b)
            .and_then(|c| c.plan_ops)
            .map(|ops| ops as f64)
            .ok_or_else(|| PlanError::InconsistentRecord(format!("no plan cost for level {b}")))
    };
    let mut total = 0.0;
    for a in k + 1..=n {
        total += m(a)?;
    }
    for b in l..=k {
        total += m(b)? + p(b)?;
    }
    Ok(total)
}

fn check_level(h: &Hierarchy, j: usize) -> Result<(), PlanError> {
    if j > h.depth() {
        return Err(PlanError::LevelOutOfRange { level: j, top: h.depth() });
    }
    Ok(())
}

fn check_base_set(h: &Hierarchy, set: &GroundingSet) -> Result<(), PlanError> {
    if set.level() != 0 || set.universe() != h.num_states(0) {
        return Err(PlanError::InvalidQuery("expected a set of base states".into()));
    }
    Ok(())
}

fn start_candidates(h: &Hierarchy, j: usize, start: &GroundingSet, ops: &mut u64) -> Option<GroundingSet> {
    let n = h.num_states(j);
    *ops += n as u64;
    let Some(level) = h.abstract_level(j) else {
        return Some(start.clone());
    };
    let mut b = GroundingSet::empty(j, n);
    let mut covered = GroundingSet::empty(0, start.universe());
    for s in (0..n).map(StateId) {
        let g0 = level.final_grounding(s);
        if g0.intersects(start).expect("base-level sets") {
            b.insert(s);
            covered.union_with(g0).expect("base-level sets");
        }
    }
    start.is_subset(&covered).expect("base-level sets").then_some(b)
}

fn goal_candidates(h: &Hierarchy, j: usize, goal: &GroundingSet, ops: &mut u64) -> Option<GroundingSet> {
    let n = h.num_states(j);
    *ops += n as u64;
    let g = match h.abstract_level(j) {
        None => goal.clone(),
        Some(level) => GroundingSet::from_states(
            j,
            n,
            (0..n)
                .map(StateId)
                .filter(|&s| level.final_grounding(s).is_subset(goal).expect("base-level sets")),
        ),
    };
    (!g.is_empty()).then_some(g)
}

/// The maximal candidate start set at level `j`.
pub fn candidate_b(h: &Hierarchy, j: usize, start: &GroundingSet) -> Result<GroundingSet, PlanError> {
    check_level(h, j)?;
    check_base_set(h, start)?;
    start_candidates(h, j, start, &mut 0).ok_or(PlanError::NoMatch { level: j })
}

/// The maximal candidate goal set at level `j`.
pub fn candidate_g(h: &Hierarchy, j: usize, goal: &GroundingSet) -> Result<GroundingSet, PlanError> {
    check_level(h, j)?;
    check_base_set(h, goal)?;
    goal_candidates(h, j, goal, &mut 0).ok_or(PlanError::NoMatch { level: j })
}

/// `B ⊆ G0(b)` and `G0(g) ⊆ G`. Sets at the wrong level never match.
pub fn planmatch(h: &Hierarchy, pair: &MatchPair, q: &PlanQuery) -> bool {
    let j = pair.level;
    if j > h.depth()
        || pair.b.level() != j
        || pair.g.level() != j
        || pair.b.universe() != h.num_states(j)
        || pair.g.universe() != h.num_states(j)
        || q.start.universe() != h.num_states(0)
    {
        return false;
    }
    let (Ok(b0), Ok(g0)) = (
        crate::symbols::final_ground(h, j, &pair.b),
        crate::symbols::final_ground(h, j, &pair.g),
    ) else {
        return false;
    };
    q.start.is_subset(&b0).unwrap_or(false) && g0.is_subset(&q.goal).unwrap_or(false)
}

fn check_plan_sets(mdp: &Mdp, b: &GroundingSet, g: &GroundingSet) -> bool {
    let (lv, n) = (mdp.level(), mdp.num_states());
    b.level() == lv && g.level() == lv && b.universe() == n && g.universe() == n
}

/// A policy at `mdp` taking every state of `b` to some state of `g`, or
/// `None` if some start cannot reach `g`. Ties between equally good actions
/// go to the lowest action index.
pub fn findplan(mdp: &Mdp, b: &GroundingSet, g: &GroundingSet, method: PlanMethod) -> Option<Plan> {
    findplan_counted(mdp, b, g, method, &mut 0)
}

pub fn findplan_counted(
    mdp: &Mdp,
    b: &GroundingSet,
    g: &GroundingSet,
    method: PlanMethod,
    ops: &mut u64,
) -> Option<Plan> {
    if !check_plan_sets(mdp, b, g) || g.is_empty() {
        return None;
    }
    let policy = match method {
        PlanMethod::Reachability => backward_search(mdp, b, g, ops)?,
        PlanMethod::ValueIteration => match value_iteration(mdp, b, g, ops)? {
            Some(p) => p,
            None => backward_search(mdp, b, g, ops)?,
        },
    };
    Some(Plan {
        level: mdp.level(),
        policy,
        starts: b.clone(),
        goals: g.clone(),
    })
}

fn backward_search(mdp: &Mdp, b: &GroundingSet, g: &GroundingSet, ops: &mut u64) -> Option<Vec<Option<ActionId>>> {
    let n = mdp.num_states();
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for t in g.iter() {
        dist[t.0] = 0;
        queue.push_back(t);
    }
    while let Some(t) = queue.pop_front() {
        for &(s, _) in mdp.predecessors(t) {
            *ops += 1;
            if dist[s.0] == u32::MAX {
                dist[s.0] = dist[t.0] + 1;
                queue.push_back(s);
            }
        }
    }
    if b.iter().any(|s| dist[s.0] == u32::MAX) {
        return None;
    }
    let policy = (0..n)
        .map(|s| {
            let d = dist[s];
            if d == 0 || d == u32::MAX {
                return None;
            }
            mdp.applicable(StateId(s)).find(|&a| {
                *ops += 1;
                mdp.successor(StateId(s), a).is_some_and(|t| dist[t.0] + 1 == d)
            })
        })
        .collect();
    Some(policy)
}

/// `Some(None)` when every start has a value but the greedy policy loops.
fn value_iteration(
    mdp: &Mdp,
    b: &GroundingSet,
    g: &GroundingSet,
    ops: &mut u64,
) -> Option<Option<Vec<Option<ActionId>>>> {
    const TIE: f64 = 1e-9;
    let n = mdp.num_states();
    let gamma = mdp.gamma();
    let mut value = vec![f64::NEG_INFINITY; n];
    for t in g.iter() {
        value[t.0] = 0.0;
    }
    let backup = |value: &[f64], s: StateId, ops: &mut u64| -> (f64, Option<ActionId>) {
        let mut best = (f64::NEG_INFINITY, None);
        for a in mdp.applicable(s) {
            *ops += 1;
            let t = mdp.successor(s, a).expect("applicable");
            if value[t.0] == f64::NEG_INFINITY {
                continue;
            }
            let q = mdp.reward(s, a).expect("applicable") + gamma * value[t.0];
            if q > best.0 + TIE || best.1.is_none() {
                best = (q, Some(a));
            }
        }
        best
    };
    for _ in 0..=n {
        let mut changed = false;
        for s in (0..n).map(StateId) {
            if g.contains(s) {
                continue;
            }
            let (v, _) = backup(&value, s, ops);
            if v > value[s.0] + TIE || (value[s.0] == f64::NEG_INFINITY && v > f64::NEG_INFINITY) {
                value[s.0] = v;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if b.iter().any(|s| value[s.0] == f64::NEG_INFINITY) {
        return None;
    }
    let policy: Vec<Option<ActionId>> = (0..n)
        .map(StateId)
        .map(|s| {
            if g.contains(s) || value[s.0] == f64::NEG_INFINITY {
                None
            } else {
                backup(&value, s, ops).1
            }
        })
        .collect();
    let proper = b.iter().all(|s| {
        let mut cur = s;
        for _ in 0..=n {
            if g.contains(cur) {
                return true;
            }
            match policy[cur.0].and_then(|a| mdp.successor(cur, a)) {
                Some(t) => cur = t,
                None => return false,
            }
        }
        false
    });
    Some(proper.then_some(policy))
}

/// A solved query.
#[derive(Clone, Debug)]
pub struct Answer {
    pub level: usize,
    pub pair: MatchPair,
    pub plan: Plan,
    pub record: InstrumentationRecord,
}

/// Top-down hierarchical planning from the top level.
pub fn answer_query(h: &Hierarchy, q: &PlanQuery, method: PlanMethod) -> Result<Option<Answer>, PlanError> {
    answer_query_from(h, q, method, h.depth())
}

/// Top-down hierarchical planning starting at level `top` instead of the
/// hierarchy's top level.
pub fn answer_query_from(
    h: &Hierarchy,
    q: &PlanQuery,
    method: PlanMethod,
    top: usize,
) -> Result<Option<Answer>, PlanError> {
    check_level(h, top)?;
    q.check(h)?;
    let mut record = InstrumentationRecord {
        depth: top,
        ..Default::default()
    };
    for j in (0..=top).rev() {
        let mut cost = LevelCost {
            level: j,
            states: h.num_states(j),
            ..Default::default()
        };
        let clock = Instant::now();
        let b = start_candidates(h, j, &q.start, &mut cost.match_ops);
        let g = goal_candidates(h, j, &q.goal, &mut cost.match_ops);
        cost.match_time = clock.elapsed();
        let (Some(b), Some(g)) = (b, g) else {
            record.levels.push(cost);
            continue;
        };
        record.first_match.get_or_insert(j);
        let mdp = h.level_mdp(j).expect("level checked");
        let mut plan_ops = 0;
        let clock = Instant::now();
        let plan = findplan_counted(mdp, &b, &g, method, &mut plan_ops);
        cost.plan_time = Some(clock.elapsed());
        cost.plan_ops = Some(plan_ops);
        record.levels.push(cost);
        if let Some(plan) = plan {
            record.solution = Some(j);
            record.h = Some(h_cost(&record, top)?);
            return Ok(Some(Answer {
                level: j,
                pair: MatchPair { level: j, b, g },
                plan,
                record,
            }));
        }
    }
    Ok(None)
}

/// Executes `plan` from base state `start`, expanding every option down to
/// primitive actions. The returned trace is over base states.
pub fn refine(h: &Hierarchy, plan: &Plan, start: StateId) -> Result<ExecutionTrace, PlanError> {
    let j = plan.level;
    check_level(h, j)?;
    let mdp = h.level_mdp(j).expect("level checked");
    let mut s = plan
        .starts
        .iter()
        .find(|&s| h.grounds_to(j, s, start))
        .ok_or(PlanError::StartNotCovered(start))?;
    let mut trace = ExecutionTrace::empty(start);
    let mut x = start;
    let mut steps = 0;
    while !plan.goals.contains(s) {
        if steps > mdp.num_states() {
            return Err(PlanError::RefinementFault(format!("plan at level {j} does not reach its goal")));
        }
        let a = plan
            .action(s)
            .ok_or_else(|| PlanError::RefinementFault(format!("no action at level-{j} state {s}")))?;
        run_action(h, j, s, a, &mut x, &mut trace)?;
        s = mdp
            .successor(s, a)
            .ok_or_else(|| PlanError::RefinementFault(format!("{a} inapplicable at level-{j} state {s}")))?;
        if !h.grounds_to(j, s, x) {
            return Err(PlanError::RefinementFault(format!(
                "base state {x} is outside the grounding of level-{j} state {s}"
            )));
        }
        steps += 1;
    }
    Ok(trace)
}

/// Executes option `a` of level `j ≥ 1` from base state `x`.
pub fn execute_grounded(h: &Hierarchy, j: usize, a: ActionId, x: StateId) -> Result<ExecutionTrace, PlanError> {
    let level = h
        .abstract_level(j)
        .ok_or(PlanError::LevelOutOfRange { level: j, top: h.depth() })?;
    let o = level.option(a);
    let lower = h.level_mdp(j - 1).expect("lower level");
    let y = lower
        .space()
        .states()
        .find(|&y| o.initiation().contains(y) && h.grounds_to(j - 1, y, x))
        .ok_or_else(|| PlanError::NotApplicable {
            option: o.id().to_string(),
            state: x,
        })?;
    let mut trace = ExecutionTrace::empty(x);
    let mut cur = x;
    run_option(h, j, a, y, &mut cur, &mut trace)?;
    Ok(trace)
}

fn run_action(
    h: &Hierarchy,
    k: usize,
    s: StateId,
    a: ActionId,
    x: &mut StateId,
    trace: &mut ExecutionTrace,
) -> Result<(), PlanError> {
    if k == 0 {
        let (next, r) = h.base().step(*x, a)?;
        trace.push(a, next, r);
        *x = next;
        return Ok(());
    }
    let level = h.abstract_level(k).expect("level in range");
    let o = level.option(a);
    let y = level
        .grounding(s)
        .iter()
        .find(|&y| o.initiation().contains(y) && h.grounds_to(k - 1, y, *x))
        .ok_or_else(|| {
            PlanError::RefinementFault(format!(
                "no state in the grounding of level-{k} state {s} starts `{}` from base state {x}",
                o.id()
            ))
        })?;
    run_option(h, k, a, y, x, trace)
}

/// Runs option `a` of level `k` from level-`(k − 1)` state `y`, tracking the
/// base state in `x`.
fn run_option(
    h: &Hierarchy,
    k: usize,
    a: ActionId,
    mut y: StateId,
    x: &mut StateId,
    trace: &mut ExecutionTrace,
) -> Result<(), PlanError> {
    let o = h.abstract_level(k).expect("level in range").option(a);
    let lower = h.level_mdp(k - 1).expect("lower level");
    let bound = o.step_bound(lower.num_states());
    let mut steps = 0;
    while !o.terminates_at(y, steps) {
        if steps >= bound {
            return Err(MdpError::StepBoundExceeded {
                option: o.id().to_string(),
                start: y,
                bound,
            }
            .into());
        }
        let b = o.policy(y).ok_or_else(|| MdpError::MissingPolicy {
            option: o.id().to_string(),
            state: y,
        })?;
        run_action(h, k - 1, y, b, x, trace)?;
        y = lower
            .successor(y, b)
            .ok_or(MdpError::InapplicableAction { state: y, action: b })?;
        if !h.grounds_to(k - 1, y, *x) {
            return Err(PlanError::RefinementFault(format!(
                "base state {x} is outside the grounding of level-{} state {y}",
                k - 1
            )));
        }
        steps += 1;
    }
    Ok(())
}

/// The base MDP with every option of every level added as an extra action:
/// options without a change of representation. Each option transition
/// carries the cumulative base reward of executing it.
pub fn options_smdp(h: &Hierarchy) -> Result<Mdp, PlanError> {
    let base = h.base();
    let mut actions = base.actions().to_vec();
    for j in 1..=h.depth() {
        for o in h.abstract_level(j).expect("level in range").options() {
            actions.push(format!("{}@{}", o.id(), j));
        }
    }
    let mut b = Mdp::builder(base.space().clone(), actions, base.gamma());
    for (s, a, t, r) in base.transitions() {
        b.transition(s, a, t, r)?;
    }
    let mut next_action = base.num_actions();
    for j in 1..=h.depth() {
        let count = h.abstract_level(j).expect("level in range").options().len();
        for oi in 0..count {
            for x in base.space().states() {
                match execute_grounded(h, j, ActionId(oi), x) {
                    Ok(tr) => {
                        b.transition(x, ActionId(next_action), tr.end, tr.cumulative_reward)?;
                    }
                    Err(PlanError::NotApplicable { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            next_action += 1;
        }
    }
    Ok(b.build()?)
}
