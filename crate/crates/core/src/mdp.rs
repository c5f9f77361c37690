//! Discrete, deterministic MDP representation shared by every level of a
//! hierarchy.
//!
//! A level is a state space, a list of named actions and a partial
//! deterministic transition table. Because successors are deterministic the
//! reward `R(s, a, s')` is stored per `(s, a)` pair.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense index of a state within one level's state space.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Index into a level's action list. At level 0 these are primitive
/// actions; above that they index the level's option set.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("action {action} is not applicable in state {state}")]
    InapplicableAction { state: StateId, action: ActionId },
    #[error("state {0} is outside the state space")]
    UnknownState(StateId),
    #[error("action {0} is outside the action set")]
    UnknownAction(ActionId),
    #[error("state {state} is not in the initiation set of option `{option}`")]
    NotInInitiationSet { option: String, state: StateId },
    #[error("option `{option}` did not terminate within {bound} steps from {start}")]
    StepBoundExceeded {
        option: String,
        start: StateId,
        bound: usize,
    },
    #[error("option `{option}` has no policy action at {state}")]
    MissingPolicy { option: String, state: StateId },
    #[error("option `{option}` is defined over level {expected}, executed over level {found}")]
    WrongLevel {
        option: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// A named state variable with a finite, labelled domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub values: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, values: Vec<String>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    /// Variable whose values are the integers `0..n`.
    pub fn range(name: impl Into<String>, n: usize) -> Self {
        Self::new(name, (0..n).map(|v| v.to_string()).collect())
    }

    pub fn boolean(name: impl Into<String>) -> Self {
        Self::new(name, vec!["false".into(), "true".into()])
    }
}

#[derive(Clone, Debug)]
pub struct Factoring {
    variables: Vec<Variable>,
    assignments: Vec<Vec<u32>>,
    lookup: HashMap<Vec<u32>, StateId>,
}

impl Factoring {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn assignment(&self, s: StateId) -> &[u32] {
        &self.assignments[s.0]
    }

    pub fn value(&self, s: StateId, var: usize) -> u32 {
        self.assignments[s.0][var]
    }

    pub fn state_of(&self, assignment: &[u32]) -> Option<StateId> {
        self.lookup.get(assignment).copied()
    }
}

/// The enumerated states of one hierarchy level.
#[derive(Clone, Debug)]
pub struct StateSpace {
    level: usize,
    len: usize,
    labels: Option<Vec<String>>,
    factoring: Option<Factoring>,
}

impl StateSpace {
    pub fn enumerated(level: usize, len: usize) -> Result<Self, MdpError> {
        if len == 0 {
            return Err(MdpError::InvalidModel("state space must be non-empty".into()));
        }
        Ok(Self {
            level,
            len,
            labels: None,
            factoring: None,
        })
    }

    /// A factored space; state `i` has assignment `assignments[i]`.
    pub fn factored(
        level: usize,
        variables: Vec<Variable>,
        assignments: Vec<Vec<u32>>,
    ) -> Result<Self, MdpError> {
        if assignments.is_empty() {
            return Err(MdpError::InvalidModel("state space must be non-empty".into()));
        }
        let mut lookup = HashMap::with_capacity(assignments.len());
        for (i, a) in assignments.iter().enumerate() {
            if a.len() != variables.len() {
                return Err(MdpError::InvalidModel(format!(
                    "state {i} assigns {} variables, expected {}",
                    a.len(),
                    variables.len()
                )));
            }
            for (var, &val) in variables.iter().zip(a) {
                if val as usize >= var.values.len() {
                    return Err(MdpError::InvalidModel(format!(
                        "state {i}: value {val} outside the domain of `{}`",
                        var.name
                    )));
                }
            }
            if lookup.insert(a.clone(), StateId(i)).is_some() {
                return Err(MdpError::InvalidModel(format!(
                    "state {i} duplicates the assignment of an earlier state"
                )));
            }
        }
        Ok(Self {
            level,
            len: assignments.len(),
            labels: None,
            factoring: Some(Factoring {
                variables,
                assignments,
                lookup,
            }),
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, MdpError> {
        if labels.len() != self.len {
            return Err(MdpError::InvalidModel(format!(
                "{} labels for {} states",
                labels.len(),
                self.len
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.len).map(StateId)
    }

    pub fn contains(&self, s: StateId) -> bool {
        s.0 < self.len
    }

    pub fn factoring(&self) -> Option<&Factoring> {
        self.factoring.as_ref()
    }

    pub fn is_factored(&self) -> bool {
        self.factoring.is_some()
    }

    pub fn label(&self, s: StateId) -> String {
        if let Some(labels) = &self.labels {
            return labels[s.0].clone();
        }
        match &self.factoring {
            Some(f) => f
                .variables
                .iter()
                .zip(f.assignment(s))
                .map(|(var, &val)| format!("{}={}", var.name, var.values[val as usize]))
                .collect::<Vec<_>>()
                .join(","),
            None => s.to_string(),
        }
    }

}

/// One level of a hierarchy: `(S, A, R, P, γ)` with deterministic `P`.
#[derive(Clone, Debug)]
pub struct Mdp {
    space: StateSpace,
    actions: Vec<String>,
    transitions: Vec<Option<StateId>>,
    rewards: Vec<f64>,
    gamma: f64,
    predecessors: Vec<Vec<(StateId, ActionId)>>,
}

impl Mdp {
    pub fn builder(space: StateSpace, actions: Vec<String>, gamma: f64) -> MdpBuilder {
        let n = space.len() * actions.len();
        MdpBuilder {
            mdp: Mdp {
                space,
                actions,
                transitions: vec![None; n],
                rewards: vec![0.0; n],
                gamma,
                predecessors: Vec::new(),
            },
        }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn level(&self) -> usize {
        self.space.level()
    }

    pub fn num_states(&self) -> usize {
        self.space.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a.0]
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|n| n == name).map(ActionId)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    fn slot(&self, s: StateId, a: ActionId) -> usize {
        s.0 * self.actions.len() + a.0
    }

    #[inline]
    pub fn successor(&self, s: StateId, a: ActionId) -> Option<StateId> {
        if s.0 >= self.space.len() || a.0 >= self.actions.len() {
            return None;
        }
        self.transitions[self.slot(s, a)]
    }

    pub fn reward(&self, s: StateId, a: ActionId) -> Option<f64> {
        self.successor(s, a).map(|_| self.rewards[self.slot(s, a)])
    }

    pub fn is_applicable(&self, s: StateId, a: ActionId) -> bool {
        self.successor(s, a).is_some()
    }

    pub fn applicable(&self, s: StateId) -> impl Iterator<Item = ActionId> + '_ {
        (0..self.actions.len())
            .map(ActionId)
            .filter(move |&a| self.is_applicable(s, a))
    }

    /// All defined transitions as `(s, a, s', r)`.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, ActionId, StateId, f64)> + '_ {
        let na = self.actions.len();
        self.transitions
            .iter()
            .enumerate()
            .filter_map(move |(i, t)| {
                t.map(|next| (StateId(i / na), ActionId(i % na), next, self.rewards[i]))
            })
    }

    /// `(s, a)` pairs whose successor is `t`.
    pub fn predecessors(&self, t: StateId) -> &[(StateId, ActionId)] {
        &self.predecessors[t.0]
    }

    /// One deterministic step: the successor and `R(s, a, s')`.
    pub fn step(&self, s: StateId, a: ActionId) -> Result<(StateId, f64), MdpError> {
        if !self.space.contains(s) {
            return Err(MdpError::UnknownState(s));
        }
        if a.0 >= self.actions.len() {
            return Err(MdpError::UnknownAction(a));
        }
        let slot = self.slot(s, a);
        match self.transitions[slot] {
            Some(next) => Ok((next, self.rewards[slot])),
            None => Err(MdpError::InapplicableAction {
                state: s,
                action: a,
            }),
        }
    }

    pub(crate) fn set_reward(&mut self, s: StateId, a: ActionId, r: f64) {
        let slot = self.slot(s, a);
        self.rewards[slot] = r;
    }

    #[cfg(test)]
    pub(crate) fn set_transition(&mut self, s: StateId, a: ActionId, next: Option<StateId>) {
        let slot = self.slot(s, a);
        self.transitions[slot] = next;
        self.index_predecessors();
    }

    fn index_predecessors(&mut self) {
        let mut preds = vec![Vec::new(); self.space.len()];
        let na = self.actions.len();
        for (i, t) in self.transitions.iter().enumerate() {
            if let Some(next) = t {
                preds[next.0].push((StateId(i / na), ActionId(i % na)));
            }
        }
        self.predecessors = preds;
    }
}

pub struct MdpBuilder {
    mdp: Mdp,
}

impl MdpBuilder {
    pub fn transition(
        &mut self,
        s: StateId,
        a: ActionId,
        next: StateId,
        reward: f64,
    ) -> Result<&mut Self, MdpError> {
        let m = &mut self.mdp;
        if !m.space.contains(s) {
            return Err(MdpError::UnknownState(s));
        }
        if !m.space.contains(next) {
            return Err(MdpError::UnknownState(next));
        }
        if a.0 >= m.actions.len() {
            return Err(MdpError::UnknownAction(a));
        }
        let slot = m.slot(s, a);
        m.transitions[slot] = Some(next);
        m.rewards[slot] = reward;
        Ok(self)
    }

    pub fn build(mut self) -> Result<Mdp, MdpError> {
        let g = self.mdp.gamma;
        if !(g > 0.0 && g <= 1.0) {
            return Err(MdpError::InvalidModel(format!("gamma {g} outside (0, 1]")));
        }
        self.mdp.index_predecessors();
        Ok(self.mdp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> Mdp {
        let space = StateSpace::enumerated(0, n).unwrap();
        let mut b = Mdp::builder(space, vec!["right".into(), "stay".into()], 1.0);
        for i in 0..n {
            if i + 1 < n {
                b.transition(StateId(i), ActionId(0), StateId(i + 1), -1.0)
                    .unwrap();
            }
            b.transition(StateId(i), ActionId(1), StateId(i), 0.0).unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn step_and_inapplicable() {
        let m = chain(3);
        assert_eq!(m.step(StateId(0), ActionId(0)).unwrap(), (StateId(1), -1.0));
        assert_eq!(
            m.step(StateId(2), ActionId(0)),
            Err(MdpError::InapplicableAction {
                state: StateId(2),
                action: ActionId(0)
            })
        );
        assert!(matches!(
            m.step(StateId(9), ActionId(0)),
            Err(MdpError::UnknownState(_))
        ));
    }

    #[test]
    fn predecessors_are_indexed() {
        let m = chain(3);
        assert_eq!(
            m.predecessors(StateId(1)),
            &[(StateId(0), ActionId(0)), (StateId(1), ActionId(1))]
        );
        assert_eq!(m.transitions().count(), 5);
    }

    #[test]
    fn gamma_is_checked() {
        let space = StateSpace::enumerated(0, 1).unwrap();
        assert!(Mdp::builder(space.clone(), vec![], 0.0).build().is_err());
        assert!(Mdp::builder(space.clone(), vec![], 1.5).build().is_err());
        assert!(Mdp::builder(space, vec![], 0.9).build().is_ok());
    }

    #[test]
    fn factored_rejects_duplicates_and_bad_values() {
        let vars = vec![Variable::boolean("a"), Variable::range("b", 2)];
        assert!(StateSpace::factored(0, vars.clone(), vec![vec![0, 1], vec![0, 1]]).is_err());
        assert!(StateSpace::factored(0, vars.clone(), vec![vec![0, 2]]).is_err());
        assert!(StateSpace::factored(0, vars.clone(), vec![]).is_err());
        let s = StateSpace::factored(0, vars, vec![vec![0, 1], vec![1, 0]]).unwrap();
        let f = s.factoring().unwrap();
        assert_eq!(f.state_of(&[1, 0]), Some(StateId(1)));
        assert_eq!(s.label(StateId(0)), "a=false,b=1");
    }
}
