//! Options (skills) over a level, and their deterministic execution.

use crate::mdp::{ActionId, Mdp, MdpError, StateId};
use crate::symbols::GroundingSet;

/// Running arithmetic mean.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningMean {
    count: u64,
    mean: f64,
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.mean += (x - self.mean) / self.count as f64;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }
}

/// The record of one option execution.
#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionTrace {
    pub start: StateId,
    pub end: StateId,
    /// Number of decisions taken (τ).
    pub steps: usize,
    pub cumulative_reward: f64,
    /// States passed through, starting with `start`; `steps + 1` entries.
    pub visited: Vec<StateId>,
    pub actions: Vec<ActionId>,
}

impl ExecutionTrace {
    pub fn empty(start: StateId) -> Self {
        Self {
            start,
            end: start,
            steps: 0,
            cumulative_reward: 0.0,
            visited: vec![start],
            actions: Vec::new(),
        }
    }

    pub fn push(&mut self, action: ActionId, next: StateId, reward: f64) {
        self.actions.push(action);
        self.visited.push(next);
        self.cumulative_reward += reward;
        self.steps += 1;
        self.end = next;
    }
}

/// An option `o = (I_o, β_o, π_o)` over the states of one level, where
/// `β_o` is deterministic: execution stops as soon as the current state is
/// in the termination set.
#[derive(Clone, Debug)]
pub struct OptionSkill {
    id: String,
    initiation: GroundingSet,
    termination: GroundingSet,
    policy: Vec<Option<ActionId>>,
    one_step: bool,
    step_bound: Option<usize>,
    reward_stats: RunningMean,
    duration_stats: RunningMean,
}

impl OptionSkill {
    pub fn new(
        id: impl Into<String>,
        initiation: GroundingSet,
        termination: GroundingSet,
        policy: Vec<Option<ActionId>>,
    ) -> Result<Self, MdpError> {
        let id = id.into();
        if initiation.is_empty() {
            return Err(MdpError::InvalidModel(format!(
                "option `{id}` has an empty initiation set"
            )));
        }
        if initiation.level() != termination.level()
            || initiation.universe() != termination.universe()
            || policy.len() != initiation.universe()
        {
            return Err(MdpError::InvalidModel(format!(
                "option `{id}`: initiation, termination and policy must cover the same level"
            )));
        }
        Ok(Self {
            id,
            initiation,
            termination,
            policy,
            one_step: false,
            step_bound: None,
            reward_stats: RunningMean::default(),
            duration_stats: RunningMean::default(),
        })
    }

    /// Wraps a single action of `level` as an option that always takes
    /// exactly one step.
    pub fn primitive(level: &Mdp, action: ActionId) -> Result<Self, MdpError> {
        let n = level.num_states();
        let lv = level.level();
        let init = GroundingSet::from_states(
            lv,
            n,
            level.space().states().filter(|&s| level.is_applicable(s, action)),
        );
        let policy = (0..n)
            .map(|i| level.is_applicable(StateId(i), action).then_some(action))
            .collect();
        let mut o = Self::new(
            level.action_name(action),
            init,
            GroundingSet::full(lv, n),
            policy,
        )?;
        o.one_step = true;
        Ok(o)
    }

    pub fn with_step_bound(mut self, bound: usize) -> Self {
        self.step_bound = Some(bound);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// The level whose states this option is defined over.
    pub fn level(&self) -> usize {
        self.initiation.level()
    }

    pub fn initiation(&self) -> &GroundingSet {
        &self.initiation
    }

    pub fn termination(&self) -> &GroundingSet {
        &self.termination
    }

    pub fn policy(&self, s: StateId) -> Option<ActionId> {
        self.policy.get(s.0).copied().flatten()
    }

    pub fn reward_stats(&self) -> &RunningMean {
        &self.reward_stats
    }

    pub fn duration_stats(&self) -> &RunningMean {
        &self.duration_stats
    }

    pub fn step_bound(&self, level_size: usize) -> usize {
        self.step_bound.unwrap_or(10 * level_size)
    }

    /// Whether execution stops at `s` after `steps` decisions.
    #[inline]
    pub fn terminates_at(&self, s: StateId, steps: usize) -> bool {
        self.termination.contains(s) && !(self.one_step && steps == 0)
    }

    /// Runs the policy from `s` until termination. Does not touch the
    /// statistics; see [`OptionSkill::execute_and_record`].
    pub fn execute(&self, level: &Mdp, s: StateId) -> Result<ExecutionTrace, MdpError> {
        if level.level() != self.level() || level.num_states() != self.initiation.universe() {
            return Err(MdpError::WrongLevel {
                option: self.id.clone(),
                expected: self.level(),
                found: level.level(),
            });
        }
        if !self.initiation.contains(s) {
            return Err(MdpError::NotInInitiationSet {
                option: self.id.clone(),
                state: s,
            });
        }
        let bound = self.step_bound(level.num_states());
        let mut trace = ExecutionTrace::empty(s);
        let mut cur = s;
        while !self.terminates_at(cur, trace.steps) {
            if trace.steps >= bound {
                return Err(MdpError::StepBoundExceeded {
                    option: self.id.clone(),
                    start: s,
                    bound,
                });
            }
            let a = self.policy(cur).ok_or_else(|| MdpError::MissingPolicy {
                option: self.id.clone(),
                state: cur,
            })?;
            let (next, r) = level.step(cur, a)?;
            trace.push(a, next, r);
            cur = next;
        }
        Ok(trace)
    }

    pub fn record(&mut self, trace: &ExecutionTrace) {
        self.reward_stats.push(trace.cumulative_reward);
        self.duration_stats.push(trace.steps as f64);
    }

    pub fn execute_and_record(&mut self, level: &Mdp, s: StateId) -> Result<ExecutionTrace, MdpError> {
        let trace = self.execute(level, s)?;
        self.record(&trace);
        Ok(trace)
    }
}
