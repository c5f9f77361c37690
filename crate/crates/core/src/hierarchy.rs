//! The skill-symbol loop driver: stacks abstract levels on a base MDP and
//! checks the structural invariants of the result.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::abstraction::{
    assign_rewards, build_factored_abstraction, build_plan_graph, classify_option,
    AbstractLevel, AbstractionError, Construction, OptionClass, RewardMode,
    DEFAULT_PARTITION_LIMIT,
};
use crate::mdp::{ActionId, Mdp, StateId, Variable};
use crate::skill::OptionSkill;
use crate::symbols::{GroundingSet, SymbolError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("the base MDP must be level 0, found level {0}")]
    BaseLevel(usize),
}

/// An `n`-level hierarchy `M_0 … M_n`. Level `j ≥ 1` owns its option set
/// `A_j`, defined over level `j − 1`.
///
/// Values are immutable; [`Hierarchy::add_level`] returns a new hierarchy.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    base: Mdp,
    levels: Vec<AbstractLevel>,
    reward_mode: RewardMode,
    partition_limit: usize,
}

impl Hierarchy {
    pub fn new(base: Mdp) -> Result<Self, HierarchyError> {
        if base.level() != 0 {
            return Err(HierarchyError::BaseLevel(base.level()));
        }
        Ok(Self {
            base,
            levels: Vec::new(),
            reward_mode: RewardMode::default(),
            partition_limit: DEFAULT_PARTITION_LIMIT,
        })
    }

    pub fn with_reward_mode(mut self, mode: RewardMode) -> Self {
        self.reward_mode = mode;
        self
    }

    pub fn with_partition_limit(mut self, limit: usize) -> Self {
        self.partition_limit = limit;
        self
    }

    pub fn reward_mode(&self) -> RewardMode {
        self.reward_mode
    }

    /// `n`, the index of the top level.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn base(&self) -> &Mdp {
        &self.base
    }

    pub fn level_mdp(&self, j: usize) -> Option<&Mdp> {
        match j {
            0 => Some(&self.base),
            _ => self.levels.get(j - 1).map(AbstractLevel::mdp),
        }
    }

    pub fn abstract_level(&self, j: usize) -> Option<&AbstractLevel> {
        j.checked_sub(1).and_then(|i| self.levels.get(i))
    }

    pub fn top(&self) -> &Mdp {
        self.level_mdp(self.depth()).expect("top level exists")
    }

    /// Panics if `j > depth()`.
    pub fn num_states(&self, j: usize) -> usize {
        self.level_mdp(j)
            .unwrap_or_else(|| panic!("level {j} outside 0..={}", self.depth()))
            .num_states()
    }

    /// Whether base state `x` is in `G0(s)` for level-`j` state `s`.
    #[inline]
    pub fn grounds_to(&self, j: usize, s: StateId, x: StateId) -> bool {
        match j {
            0 => s == x,
            _ => self.levels[j - 1].final_grounding(s).contains(x),
        }
    }

    /// Appends a level built from `options` over the current top level,
    /// seeding a factored construction with every top-level state.
    pub fn add_level(&self, options: Vec<OptionSkill>) -> Result<Hierarchy, HierarchyError> {
        let top = self.top();
        let seeds = GroundingSet::full(top.level(), top.num_states());
        self.add_level_with_seeds(options, &seeds)
    }

    /// Appends a level built from `options`. A plan graph is built when every
    /// option is a subgoal option; otherwise the top level must be factored
    /// and a factored level is built by closure from `seeds` (plan-graph
    /// construction ignores the seeds).
    pub fn add_level_with_seeds(
        &self,
        options: Vec<OptionSkill>,
        seeds: &GroundingSet,
    ) -> Result<Hierarchy, HierarchyError> {
        if options.is_empty() {
            return Err(AbstractionError::EmptyOptionSet.into());
        }
        let top = self.top();
        let mut all_subgoal = true;
        let mut first_other = None;
        for o in &options {
            let class = classify_option(top, o)?;
            if class != OptionClass::Subgoal {
                all_subgoal = false;
                first_other.get_or_insert_with(|| o.id().to_string());
            }
        }
        let level = if all_subgoal {
            build_plan_graph(top, options)?
        } else if top.space().is_factored() {
            build_factored_abstraction(top, options, seeds, self.partition_limit)?
        } else {
            return Err(AbstractionError::NoSubgoalStructure {
                option: first_other.unwrap_or_default(),
            }
            .into());
        };
        let mut level = assign_rewards(level, self.reward_mode)?;
        level.set_final_groundings(self.final_groundings_for(&level));
        let mut next = self.clone();
        next.levels.push(level);
        Ok(next)
    }

    /// `G0` for every state of a level stacked directly on the current top.
    fn final_groundings_for(&self, level: &AbstractLevel) -> Vec<GroundingSet> {
        let below = level.index() - 1;
        (0..level.num_states())
            .map(|s| {
                let g = level.grounding(StateId(s));
                match self.abstract_level(below) {
                    None => g.clone(),
                    Some(lower) => {
                        let mut out = GroundingSet::empty(0, self.base.num_states());
                        for y in g.iter().filter(|y| y.0 < lower.num_states()) {
                            out.union_with(lower.final_grounding(y))
                                .expect("base-level sets");
                        }
                        out
                    }
                }
            })
            .collect()
    }

    /// Checks every structural invariant; an empty list means the hierarchy
    /// is sound. Transitions touching a state that already has a grounding
    /// violation are not checked further.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for j in 1..=self.depth() {
            self.validate_level(j, &mut out);
        }
        out
    }

    fn validate_level(&self, j: usize, out: &mut Vec<Violation>) {
        let level = &self.levels[j - 1];
        let lower = self.level_mdp(j - 1).expect("lower level");
        let mut push = |kind| out.push(Violation { level: j, kind });

        let mut usable_options = vec![true; level.options().len()];
        for (i, o) in level.options().iter().enumerate() {
            if o.level() != j - 1 || o.initiation().universe() != lower.num_states() {
                push(ViolationKind::OptionLevel { option: o.id().to_string() });
                usable_options[i] = false;
                continue;
            }
            if o.initiation().is_empty() {
                push(ViolationKind::EmptyInitiation { option: o.id().to_string() });
            }
            for s in o.initiation().iter() {
                if let Err(e) = o.execute(lower, s) {
                    push(ViolationKind::OptionExecution {
                        option: o.id().to_string(),
                        state: s,
                        error: e.to_string(),
                    });
                    break;
                }
            }
        }

        let recomputed = self.final_groundings_for(level);
        let mut bad = vec![false; level.num_states()];
        for s in (0..level.num_states()).map(StateId) {
            let g = level.grounding(s);
            if g.level() != j - 1 || g.universe() != lower.num_states() {
                push(ViolationKind::GroundingLevel { state: s });
                bad[s.0] = true;
            } else if g.is_empty() {
                push(ViolationKind::EmptyGrounding { state: s });
                bad[s.0] = true;
            } else if level.final_grounding(s) != &recomputed[s.0] {
                push(ViolationKind::FinalGroundingMismatch { state: s });
                bad[s.0] = true;
            } else if level.final_grounding(s).is_empty() {
                push(ViolationKind::EmptyFinalGrounding { state: s });
                bad[s.0] = true;
            }
        }

        for (s, a, t, _) in level.mdp().transitions() {
            if bad[s.0] || bad[t.0] || !usable_options[a.0] {
                continue;
            }
            let o = level.option(a);
            let g = level.grounding(s);
            if !g.is_subset(o.initiation()).unwrap_or(false) {
                push(ViolationKind::Applicability {
                    state: s,
                    option: o.id().to_string(),
                });
                continue;
            }
            let target = level.grounding(t);
            for x in g.iter() {
                let reached = o.execute(lower, x).map(|tr| tr.end);
                if !matches!(reached, Ok(e) if target.contains(e)) {
                    push(ViolationKind::Image {
                        state: s,
                        option: o.id().to_string(),
                        successor: t,
                        witness: x,
                        reached: reached.ok(),
                    });
                    break;
                }
            }
        }
    }

    pub fn snapshot(&self) -> HierarchySnapshot {
        let mut levels = vec![LevelSnapshot::from_mdp(&self.base, "base", |_| Vec::new())];
        for level in &self.levels {
            let kind = match level.construction() {
                Construction::PlanGraph => "plan-graph",
                Construction::Factored { .. } => "factored",
            };
            let mut snap = LevelSnapshot::from_mdp(
                level.mdp(),
                kind,
                |s| level.grounding(s).iter().map(StateId::index).collect(),
            );
            for st in &mut snap.states {
                st.final_grounding_size = level.final_grounding(StateId(st.id)).len();
            }
            snap.options = level
                .options()
                .iter()
                .enumerate()
                .map(|(i, o)| OptionSnapshot {
                    id: o.id().to_string(),
                    initiation: o.initiation().iter().map(StateId::index).collect(),
                    effect: level.effect(ActionId(i)).iter().map(StateId::index).collect(),
                    executions: o.reward_stats().count(),
                    mean_reward: o.reward_stats().mean(),
                    mean_duration: o.duration_stats().mean(),
                    parts: level
                        .partitions()
                        .map(|p| p[i].parts.len())
                        .unwrap_or(1),
                })
                .collect();
            levels.push(snap);
        }
        HierarchySnapshot {
            reward_mode: match self.reward_mode {
                RewardMode::UniformPenalty => "uniform-penalty",
                RewardMode::EmpiricalMean => "empirical-mean",
            },
            levels,
        }
    }

    #[cfg(test)]
    pub(crate) fn level_mut(&mut self, j: usize) -> &mut AbstractLevel {
        &mut self.levels[j - 1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub level: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    OptionLevel { option: String },
    EmptyInitiation { option: String },
    OptionExecution { option: String, state: StateId, error: String },
    GroundingLevel { state: StateId },
    EmptyGrounding { state: StateId },
    EmptyFinalGrounding { state: StateId },
    FinalGroundingMismatch { state: StateId },
    Applicability { state: StateId, option: String },
    Image {
        state: StateId,
        option: String,
        successor: StateId,
        witness: StateId,
        reached: Option<StateId>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "level {}: ", self.level)?;
        match &self.kind {
            ViolationKind::OptionLevel { option } => {
                write!(f, "option `{option}` is not defined over the level below")
            }
            ViolationKind::EmptyInitiation { option } => {
                write!(f, "option `{option}` has an empty initiation set")
            }
            ViolationKind::OptionExecution { option, state, error } => {
                write!(f, "option `{option}` fails from {state}: {error}")
            }
            ViolationKind::GroundingLevel { state } => {
                write!(f, "grounding of {state} does not live at the level below")
            }
            ViolationKind::EmptyGrounding { state } => write!(f, "state {state} has an empty grounding"),
            ViolationKind::EmptyFinalGrounding { state } => {
                write!(f, "state {state} has an empty final grounding")
            }
            ViolationKind::FinalGroundingMismatch { state } => {
                write!(f, "stored final grounding of {state} is stale")
            }
            ViolationKind::Applicability { state, option } => {
                write!(f, "option `{option}` is applicable at {state} but its grounding leaves the initiation set")
            }
            ViolationKind::Image {
                state,
                option,
                successor,
                witness,
                reached,
            } => write!(
                f,
                "image of `{option}` from {state} escapes the grounding of {successor} \
                 (lower state {witness} reaches {})",
                reached.map_or("nothing".to_string(), |r| r.to_string())
            ),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HierarchySnapshot {
    pub reward_mode: &'static str,
    pub levels: Vec<LevelSnapshot>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSnapshot {
    pub index: usize,
    pub construction: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variables: Option<Vec<Variable>>,
    pub actions: Vec<String>,
    pub states: Vec<StateSnapshot>,
    pub transitions: Vec<TransitionSnapshot>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<OptionSnapshot>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StateSnapshot {
    pub id: usize,
    pub label: String,
    pub grounding: Vec<usize>,
    pub final_grounding_size: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransitionSnapshot {
    pub from: usize,
    pub action: usize,
    pub to: usize,
    pub reward: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptionSnapshot {
    pub id: String,
    pub initiation: Vec<usize>,
    pub effect: Vec<usize>,
    pub executions: u64,
    pub mean_reward: Option<f64>,
    pub mean_duration: Option<f64>,
    pub parts: usize,
}

impl LevelSnapshot {
    fn from_mdp(
        mdp: &Mdp,
        construction: &'static str,
        grounding: impl Fn(StateId) -> Vec<usize>,
    ) -> Self {
        let space = mdp.space();
        Self {
            index: mdp.level(),
            construction,
            variables: space.factoring().map(|f| f.variables().to_vec()),
            actions: mdp.actions().to_vec(),
            states: space
                .states()
                .map(|s| StateSnapshot {
                    id: s.0,
                    label: space.label(s),
                    grounding: grounding(s),
                    final_grounding_size: 1,
                })
                .collect(),
            transitions: mdp
                .transitions()
                .map(|(s, a, t, r)| TransitionSnapshot {
                    from: s.0,
                    action: a.0,
                    to: t.0,
                    reward: r,
                })
                .collect(),
            options: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::common::LineTaxi;
    use super::*;

    #[test]
    fn line_taxi_builds_and_validates() {
        let lt = LineTaxi::new(4);
        let h = lt.hierarchy();
        assert_eq!(h.depth(), 2);
        assert_eq!(h.num_states(0), 20);
        assert_eq!(h.num_states(1), 6);
        assert_eq!(h.num_states(2), 2);
        assert_eq!(h.validate(), vec![]);
    }

    #[test]
    fn emptied_grounding_is_one_violation() {
        let lt = LineTaxi::new(4);
        let mut h = lt.hierarchy();
        let victim = StateId(1);
        h.level_mut(2).grounding_mut(victim).clear();
        let v = h.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].level, 2);
        assert_eq!(v[0].kind, ViolationKind::EmptyGrounding { state: victim });
        assert!(v[0].to_string().contains("s1"));
    }

    #[test]
    fn injected_edge_is_one_image_violation() {
        let lt = LineTaxi::new(4);
        let mut h = lt.hierarchy();
        // Top level: send passenger-to-3 from the pass@0 node back to the
        // pass@0 node, whose grounding misses the option's effect.
        let l2 = h.abstract_level(2).unwrap();
        let to3 = l2.mdp().action_id("passenger-to-3").unwrap();
        let s = StateId(0);
        assert_eq!(l2.mdp().successor(s, to3), Some(StateId(1)));
        h.level_mut(2).mdp_mut().set_transition(s, to3, Some(s));
        let v = h.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(v[0].kind, ViolationKind::Image { state, .. } if state == s));
    }

    #[test]
    fn injected_inapplicable_edge_is_flagged() {
        let lt = LineTaxi::new(4);
        let mut h = lt.hierarchy();
        // passenger-to-0 at the node where the passenger is already at 0.
        let l2 = h.abstract_level(2).unwrap();
        let to0 = l2.mdp().action_id("passenger-to-0").unwrap();
        let node0 = StateId(to0.0);
        assert_eq!(l2.mdp().successor(node0, to0), None);
        h.level_mut(2).mdp_mut().set_transition(node0, to0, Some(node0));
        let v = h.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(v[0].kind, ViolationKind::Applicability { .. }));
    }

    #[test]
    fn empty_option_set_is_rejected() {
        let lt = LineTaxi::new(4);
        let h = Hierarchy::new(lt.base.clone()).unwrap();
        assert_eq!(
            h.add_level(vec![]).err(),
            Some(HierarchyError::Abstraction(AbstractionError::EmptyOptionSet))
        );
    }

    #[test]
    fn snapshot_serializes() {
        let h = LineTaxi::new(4).hierarchy();
        let snap = h.snapshot();
        assert_eq!(snap.levels.len(), 3);
        assert_eq!(snap.levels[2].construction, "plan-graph");
        assert_eq!(snap.levels[1].construction, "factored");
        let json = serde_json::to_value(&snap).unwrap();
        assert_eq!(json["levels"][2]["states"].as_array().unwrap().len(), 2);
        assert_eq!(json["levels"][2]["options"][1]["id"], "passenger-to-3");
    }
}
