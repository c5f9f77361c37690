//! Representation acquisition: turns a set of options over one level into
//! the abstract MDP of the next level.
//!
//! Two constructions are supported. Options whose terminal state does not
//! depend on where they started (subgoal options) produce a plan graph with
//! one node per option. Options that set some variables of a factored level
//! and leave the rest alone (abstract subgoal options) produce a factored
//! level whose states are the variable assignments reachable from a set of
//! seed states.

use std::collections::BTreeMap;

use itertools::Itertools;
use thiserror::Error;

use crate::mdp::{ActionId, Factoring, Mdp, MdpError, StateId, StateSpace};
use crate::skill::{ExecutionTrace, OptionSkill};
use crate::symbols::{GroundingSet, SymbolError, SymbolTable};

/// Variable-value literals.
type Literals = Vec<(usize, u32)>;
/// Execution pairs grouped by the values of the split variables.
type Groups = BTreeMap<Vec<u32>, Vec<(StateId, StateId)>>;

pub const DEFAULT_PARTITION_LIMIT: usize = 64;

/// Variable counts above this skip the minimal-split search in
/// [`partition_option`] and split on every variable.
const MAX_SPLIT_SEARCH_VARIABLES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbstractionError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("level {0} is not factored")]
    NotFactored(usize),
    #[error("option `{option}` splits into {parts} parts (limit {limit})")]
    PartitionExplosion {
        option: String,
        parts: usize,
        limit: usize,
    },
    #[error("option `{option}` is not a subgoal option")]
    NoSubgoalStructure { option: String },
    #[error("option `{option}` has no factored image: {reason}")]
    NoFactoredStructure { option: String, reason: String },
    #[error("the seed set for a factored level is empty")]
    EmptySeeds,
    #[error("option set is empty")]
    EmptyOptionSet,
    #[error("option `{option}` has no recorded executions")]
    MissingStatistics { option: String },
}

/// All states an option may terminate in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EffectSet {
    pub option_id: String,
    pub states: GroundingSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OptionClass {
    /// Terminal state is the same from every initiation state.
    Subgoal,
    /// The masked variables (by index) are set to start-independent values
    /// and every other variable is left unchanged.
    AbstractSubgoal { mask: Vec<usize> },
    Unclassifiable,
}

impl OptionClass {
    pub fn mask_names(&self, f: &Factoring) -> Vec<String> {
        match self {
            OptionClass::AbstractSubgoal { mask } => {
                mask.iter().map(|&v| f.variables()[v].name.clone()).collect()
            }
            _ => Vec::new(),
        }
    }
}

/// One piece of a partitioned option.
#[derive(Clone, Debug, PartialEq)]
pub struct OptionPart {
    pub initiation: GroundingSet,
    pub class: OptionClass,
    /// Variable values shared by every initiation state of this part that
    /// distinguish it from the other parts. Empty for a single part.
    pub selector: Vec<(usize, u32)>,
    /// Terminal values written by the part. For an abstract subgoal part
    /// these are the masked variables; a subgoal part writes every variable.
    pub effect: Vec<(usize, u32)>,
}

impl OptionPart {
    /// Assignment reached from `start` under this part.
    pub fn image(&self, start: &[u32]) -> Vec<u32> {
        let mut out = start.to_vec();
        for &(v, val) in &self.effect {
            out[v] = val;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionedOption {
    pub option_id: String,
    pub parts: Vec<OptionPart>,
}

impl PartitionedOption {
    pub fn part_for(&self, s: StateId) -> Option<&OptionPart> {
        self.parts.iter().find(|p| p.initiation.contains(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RewardMode {
    /// Every abstract transition costs −1.
    #[default]
    UniformPenalty,
    /// Each option's transitions carry the mean cumulative reward observed
    /// while executing it.
    EmpiricalMean,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Construction {
    PlanGraph,
    Factored { partitions: Vec<PartitionedOption> },
}

/// Level `j ≥ 1` of a hierarchy.
#[derive(Clone, Debug)]
pub struct AbstractLevel {
    mdp: Mdp,
    options: Vec<OptionSkill>,
    effects: Vec<GroundingSet>,
    groundings: Vec<GroundingSet>,
    final_groundings: Vec<GroundingSet>,
    construction: Construction,
    symbols: SymbolTable,
}

impl AbstractLevel {
    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn index(&self) -> usize {
        self.mdp.level()
    }

    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    /// The option set `A_j`; `ActionId(i)` at this level is `options()[i]`.
    pub fn options(&self) -> &[OptionSkill] {
        &self.options
    }

    pub fn option(&self, a: ActionId) -> &OptionSkill {
        &self.options[a.0]
    }

    pub fn effect(&self, a: ActionId) -> &GroundingSet {
        &self.effects[a.0]
    }

    /// `G(s)`: states of level `j − 1`.
    pub fn grounding(&self, s: StateId) -> &GroundingSet {
        &self.groundings[s.0]
    }

    /// `G0(s)`; only populated once the level belongs to a hierarchy.
    pub fn final_grounding(&self, s: StateId) -> &GroundingSet {
        &self.final_groundings[s.0]
    }

    pub fn construction(&self) -> &Construction {
        &self.construction
    }

    pub fn partitions(&self) -> Option<&[PartitionedOption]> {
        match &self.construction {
            Construction::Factored { partitions } => Some(partitions),
            Construction::PlanGraph => None,
        }
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn label(&self, s: StateId) -> String {
        self.mdp.space().label(s)
    }

    pub(crate) fn set_final_groundings(&mut self, g: Vec<GroundingSet>) {
        self.final_groundings = g;
    }

    #[cfg(test)]
    pub(crate) fn mdp_mut(&mut self) -> &mut Mdp {
        &mut self.mdp
    }

    #[cfg(test)]
    pub(crate) fn grounding_mut(&mut self, s: StateId) -> &mut GroundingSet {
        &mut self.groundings[s.0]
    }
}

fn simulate(level: &Mdp, o: &OptionSkill) -> Result<Vec<ExecutionTrace>, MdpError> {
    o.initiation().iter().map(|s| o.execute(level, s)).collect()
}

fn simulate_and_record(level: &Mdp, o: &mut OptionSkill) -> Result<Vec<(StateId, StateId)>, MdpError> {
    let traces = simulate(level, o)?;
    for t in &traces {
        o.record(t);
    }
    Ok(traces.iter().map(|t| (t.start, t.end)).collect())
}

fn end_set(level: &Mdp, pairs: &[(StateId, StateId)]) -> GroundingSet {
    GroundingSet::from_states(level.level(), level.num_states(), pairs.iter().map(|p| p.1))
}

/// Effect set by exhaustive simulation from every initiation state.
pub fn compute_effect_set(level: &Mdp, o: &OptionSkill) -> Result<EffectSet, AbstractionError> {
    let traces = simulate(level, o)?;
    Ok(EffectSet {
        option_id: o.id().to_string(),
        states: GroundingSet::from_states(
            level.level(),
            level.num_states(),
            traces.iter().map(|t| t.end),
        ),
    })
}

pub fn classify_option(level: &Mdp, o: &OptionSkill) -> Result<OptionClass, AbstractionError> {
    let traces = simulate(level, o)?;
    let pairs: Vec<_> = traces.iter().map(|t| (t.start, t.end)).collect();
    Ok(classify_pairs(level.space(), &pairs))
}

fn classify_pairs(space: &StateSpace, pairs: &[(StateId, StateId)]) -> OptionClass {
    if pairs.iter().map(|p| p.1).all_equal() {
        return OptionClass::Subgoal;
    }
    space
        .factoring()
        .and_then(|f| abstract_subgoal(f, pairs))
        .map(|(mask, _)| OptionClass::AbstractSubgoal { mask })
        .unwrap_or(OptionClass::Unclassifiable)
}

/// Mask = every variable changed by some execution; valid when each masked
/// variable ends with the same value in every execution.
fn abstract_subgoal(f: &Factoring, pairs: &[(StateId, StateId)]) -> Option<(Vec<usize>, Literals)> {
    let (_, first_end) = *pairs.first()?;
    let nv = f.variables().len();
    let mask: Vec<usize> = (0..nv)
        .filter(|&v| pairs.iter().any(|&(s, e)| f.value(s, v) != f.value(e, v)))
        .collect();
    if mask.is_empty() {
        return None;
    }
    let mut effect = Vec::with_capacity(mask.len());
    for &v in &mask {
        let val = f.value(first_end, v);
        if pairs.iter().any(|&(_, e)| f.value(e, v) != val) {
            return None;
        }
        effect.push((v, val));
    }
    Some((mask, effect))
}

/// Class and effect of a group of executions that is to become one part.
fn part_class(f: &Factoring, pairs: &[(StateId, StateId)]) -> Option<(OptionClass, Literals)> {
    if let Some((mask, effect)) = abstract_subgoal(f, pairs) {
        return Some((OptionClass::AbstractSubgoal { mask }, effect));
    }
    // A group that never changes anything (a blocked move, say) is a no-op
    // part: empty mask, image equal to the start.
    if pairs.len() > 1 && pairs.iter().all(|&(s, e)| s == e) {
        return Some((OptionClass::AbstractSubgoal { mask: Vec::new() }, Vec::new()));
    }
    if pairs.iter().map(|p| p.1).all_equal() {
        let end = pairs.first()?.1;
        let effect = f.assignment(end).iter().copied().enumerate().collect();
        return Some((OptionClass::Subgoal, effect));
    }
    None
}

/// Splits an option into parts that are each subgoal or abstract subgoal.
///
/// Initiation states are grouped by their values on the smallest set of
/// variables for which every group classifies; among equally small sets the
/// one giving the fewest parts wins.
pub fn partition_option(level: &Mdp, o: &OptionSkill, limit: usize) -> Result<PartitionedOption, AbstractionError> {
    let traces = simulate(level, o)?;
    let pairs: Vec<_> = traces.iter().map(|t| (t.start, t.end)).collect();
    partition_pairs(level, o, &pairs, limit)
}

fn partition_pairs(
    level: &Mdp,
    o: &OptionSkill,
    pairs: &[(StateId, StateId)],
    limit: usize,
) -> Result<PartitionedOption, AbstractionError> {
    let f = level
        .space()
        .factoring()
        .ok_or(AbstractionError::NotFactored(level.level()))?;
    let whole = match classify_pairs(level.space(), pairs) {
        OptionClass::Subgoal => {
            let end = pairs[0].1;
            Some((OptionClass::Subgoal, f.assignment(end).iter().copied().enumerate().collect()))
        }
        _ => part_class(f, pairs),
    };
    if let Some((class, effect)) = whole {
        return Ok(PartitionedOption {
            option_id: o.id().to_string(),
            parts: vec![OptionPart {
                initiation: o.initiation().clone(),
                class,
                selector: Vec::new(),
                effect,
            }],
        });
    }

    let nv = f.variables().len();
    let sizes = if nv <= MAX_SPLIT_SEARCH_VARIABLES { 1 } else { nv };
    let mut best: Option<(Vec<usize>, Groups)> = None;
    for size in sizes..=nv {
        for split in (0..nv).combinations(size) {
            let mut groups: BTreeMap<Vec<u32>, Vec<(StateId, StateId)>> = BTreeMap::new();
            for &(s, e) in pairs {
                let key = split.iter().map(|&v| f.value(s, v)).collect();
                groups.entry(key).or_default().push((s, e));
            }
            let fewer = best.as_ref().is_none_or(|(_, g)| groups.len() < g.len());
            if fewer && groups.values().all(|g| part_class(f, g).is_some()) {
                best = Some((split, groups));
            }
        }
        if best.is_some() {
            break;
        }
    }
    // Splitting on every variable leaves one execution per group, which
    // always classifies, so the search cannot come back empty.
    let (split, groups) = best.expect("full split always classifies");
    if groups.len() > limit {
        return Err(AbstractionError::PartitionExplosion {
            option: o.id().to_string(),
            parts: groups.len(),
            limit,
        });
    }
    let parts = groups
        .into_iter()
        .map(|(key, group)| {
            let (class, effect) = part_class(f, &group).expect("checked during search");
            OptionPart {
                initiation: GroundingSet::from_states(
                    level.level(),
                    level.num_states(),
                    group.iter().map(|p| p.0),
                ),
                class,
                selector: split.iter().copied().zip(key).collect(),
                effect,
            }
        })
        .collect();
    Ok(PartitionedOption {
        option_id: o.id().to_string(),
        parts,
    })
}

fn check_options(lower: &Mdp, options: &[OptionSkill]) -> Result<(), AbstractionError> {
    for o in options {
        if o.level() != lower.level() || o.initiation().universe() != lower.num_states() {
            return Err(MdpError::WrongLevel {
                option: o.id().to_string(),
                expected: o.level(),
                found: lower.level(),
            }
            .into());
        }
    }
    Ok(())
}

fn option_symbols(options: &[OptionSkill], effects: &[GroundingSet]) -> Result<SymbolTable, SymbolError> {
    let mut table = SymbolTable::new();
    for (o, e) in options.iter().zip(effects) {
        table.define(format!("{}.init", o.id()), o.initiation().clone())?;
        table.define(format!("{}.effect", o.id()), e.clone())?;
    }
    Ok(table)
}

/// Plan-graph construction for subgoal options.
///
/// Node `i` stands for option `i`'s effect set `E_i`; there is an edge
/// `(i, option j) → j` iff `E_i ⊆ I_j`. The grounding of node `i` is widened
/// from `E_i` to every lower state whose initiation profile across the option
/// set matches that of `E_i`:
/// `W_i = { s : ∀a, s ∈ I_a ⇔ E_i ⊆ I_a }`.
/// Every outgoing edge of `i` has `E_i ⊆ I_a`, hence `W_i ⊆ I_a`.
pub fn build_plan_graph(lower: &Mdp, mut options: Vec<OptionSkill>) -> Result<AbstractLevel, AbstractionError> {
    if options.is_empty() {
        return Err(AbstractionError::EmptyOptionSet);
    }
    check_options(lower, &options)?;
    let mut effects = Vec::with_capacity(options.len());
    for o in options.iter_mut() {
        let pairs = simulate_and_record(lower, o)?;
        if classify_pairs(lower.space(), &pairs) != OptionClass::Subgoal {
            return Err(AbstractionError::NoSubgoalStructure {
                option: o.id().to_string(),
            });
        }
        effects.push(end_set(lower, &pairs));
    }

    let n = options.len();
    let edge: Vec<Vec<bool>> = effects
        .iter()
        .map(|e| {
            options
                .iter()
                .map(|a| e.is_subset(a.initiation()).expect("same level"))
                .collect()
        })
        .collect();
    let groundings: Vec<GroundingSet> = edge
        .iter()
        .map(|profile| {
            GroundingSet::from_states(
                lower.level(),
                lower.num_states(),
                lower.space().states().filter(|&s| {
                    options
                        .iter()
                        .zip(profile)
                        .all(|(a, &inside)| a.initiation().contains(s) == inside)
                }),
            )
        })
        .collect();

    let level = lower.level() + 1;
    let space = StateSpace::enumerated(level, n)?
        .with_labels(options.iter().map(|o| o.id().to_string()).collect())?;
    let ids = options.iter().map(|o| o.id().to_string()).collect();
    let mut b = Mdp::builder(space, ids, lower.gamma());
    for (i, row) in edge.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            if e {
                b.transition(StateId(i), ActionId(j), StateId(j), -1.0)?;
            }
        }
    }
    let symbols = option_symbols(&options, &effects)?;
    Ok(AbstractLevel {
        mdp: b.build()?,
        options,
        effects,
        groundings,
        final_groundings: Vec::new(),
        construction: Construction::PlanGraph,
        symbols,
    })
}

/// Factored construction for (abstract) subgoal options over a factored
/// level. Abstract states are the assignments reachable from `seeds` by
/// applying option parts; each grounds to the lower state with that
/// assignment.
pub fn build_factored_abstraction(
    lower: &Mdp,
    mut options: Vec<OptionSkill>,
    seeds: &GroundingSet,
    partition_limit: usize,
) -> Result<AbstractLevel, AbstractionError> {
    let f = lower
        .space()
        .factoring()
        .ok_or(AbstractionError::NotFactored(lower.level()))?;
    check_options(lower, &options)?;
    if seeds.level() != lower.level() || seeds.universe() != lower.num_states() {
        return Err(SymbolError::LevelMismatch {
            left: seeds.level(),
            right: lower.level(),
        }
        .into());
    }
    if seeds.is_empty() {
        return Err(AbstractionError::EmptySeeds);
    }

    let mut partitions = Vec::with_capacity(options.len());
    let mut effects = Vec::with_capacity(options.len());
    for o in options.iter_mut() {
        let pairs = simulate_and_record(lower, o)?;
        effects.push(end_set(lower, &pairs));
        partitions.push(partition_pairs(lower, o, &pairs, partition_limit)?);
    }

    // Breadth-first closure over assignments.
    let mut order: Vec<StateId> = seeds.iter().collect();
    let mut index: Vec<Option<usize>> = vec![None; lower.num_states()];
    for (i, s) in order.iter().enumerate() {
        index[s.0] = Some(i);
    }
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let x = order[i];
        for (oi, p) in partitions.iter().enumerate() {
            let Some(part) = p.part_for(x) else { continue };
            let image = part.image(f.assignment(x));
            let y = f.state_of(&image).ok_or_else(|| AbstractionError::NoFactoredStructure {
                option: p.option_id.clone(),
                reason: format!("image of {} is not a state of level {}", lower.space().label(x), lower.level()),
            })?;
            let target = *index[y.0].get_or_insert_with(|| {
                order.push(y);
                order.len() - 1
            });
            edges.push((i, oi, target));
        }
        i += 1;
    }

    let level = lower.level() + 1;
    let space = StateSpace::factored(
        level,
        f.variables().to_vec(),
        order.iter().map(|&x| f.assignment(x).to_vec()).collect(),
    )?;
    let ids = options.iter().map(|o| o.id().to_string()).collect();
    let mut b = Mdp::builder(space, ids, lower.gamma());
    for (s, a, t) in edges {
        b.transition(StateId(s), ActionId(a), StateId(t), -1.0)?;
    }
    let groundings = order
        .iter()
        .map(|&x| GroundingSet::singleton(lower.level(), lower.num_states(), x))
        .collect();
    let symbols = option_symbols(&options, &effects)?;
    Ok(AbstractLevel {
        mdp: b.build()?,
        options,
        effects,
        groundings,
        final_groundings: Vec::new(),
        construction: Construction::Factored { partitions },
        symbols,
    })
}

/// Sets every transition reward of the level according to `mode`.
pub fn assign_rewards(mut level: AbstractLevel, mode: RewardMode) -> Result<AbstractLevel, AbstractionError> {
    let rewards: Vec<f64> = match mode {
        RewardMode::UniformPenalty => vec![-1.0; level.options.len()],
        RewardMode::EmpiricalMean => level
            .options
            .iter()
            .map(|o| {
                o.reward_stats()
                    .mean()
                    .ok_or_else(|| AbstractionError::MissingStatistics {
                        option: o.id().to_string(),
                    })
            })
            .collect::<Result<_, _>>()?,
    };
    let defined: Vec<(StateId, ActionId)> = level.mdp.transitions().map(|(s, a, _, _)| (s, a)).collect();
    for (s, a) in defined {
        level.mdp.set_reward(s, a, rewards[a.0]);
    }
    Ok(level)
}
