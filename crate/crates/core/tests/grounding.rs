mod common;

use common::{LineTaxi, IN, PASS, TAXI};
use proptest::prelude::*;
use skillsym::planner::{answer_query, candidate_b, candidate_g, refine, PlanMethod, PlanQuery};
use skillsym::symbols::{final_ground, ground, ground_set, GroundingSet};
use skillsym::{Hierarchy, StateId};

fn hierarchy() -> (LineTaxi, Hierarchy) {
    let lt = LineTaxi::new(4);
    let h = lt.hierarchy();
    (lt, h)
}

/// `G0` by walking `G` one level at a time.
fn ground_down(h: &Hierarchy, j: usize, set: &GroundingSet) -> GroundingSet {
    let mut cur = set.clone();
    for k in (1..=j).rev() {
        cur = ground_set(h, k, &cur).unwrap();
    }
    cur
}

#[test]
fn final_ground_composes() {
    let (_, h) = hierarchy();
    for j in 1..=h.depth() {
        for s in (0..h.num_states(j)).map(StateId) {
            let single = GroundingSet::singleton(j, h.num_states(j), s);
            let direct = final_ground(&h, j, &single).unwrap();
            let composed = final_ground(&h, j - 1, &ground(&h, j, s).unwrap()).unwrap();
            assert_eq!(direct, composed, "level {j} state {s}");
            assert_eq!(direct, ground_down(&h, j, &single));
            assert!(!direct.is_empty());
        }
    }
}

#[test]
fn base_level_grounding_is_identity() {
    let (lt, h) = hierarchy();
    let b = lt.base_set(|a| a[PASS] == 1);
    assert_eq!(final_ground(&h, 0, &b).unwrap(), b);
    assert!(ground(&h, 0, StateId(0)).is_err());
    assert!(final_ground(&h, 3, &GroundingSet::empty(3, 1)).is_err());
}

#[test]
fn factored_level_grounds_to_distinct_singletons() {
    let (_, h) = hierarchy();
    let n1 = h.num_states(1);
    let all = final_ground(&h, 1, &GroundingSet::full(1, n1)).unwrap();
    assert_eq!(all.len(), n1);
    for s in (0..n1).map(StateId) {
        assert_eq!(ground(&h, 1, s).unwrap().len(), 1);
    }
}

#[test]
fn plan_graph_node_grounds_to_every_depot_configuration() {
    let (lt, h) = hierarchy();
    let to0 = h.level_mdp(2).unwrap().space().states().find(|&s| {
        h.abstract_level(2).unwrap().label(s) == "passenger-to-0"
    });
    let s = to0.unwrap();
    let g0 = final_ground(&h, 2, &GroundingSet::singleton(2, 2, s)).unwrap();
    // Taxi at either depot outside, plus riding at depot 0.
    let expect = GroundingSet::from_states(
        0,
        20,
        [lt.state(0, 0, false), lt.state(3, 0, false), lt.state(0, 0, true)],
    );
    assert_eq!(g0, expect);
}

/// A level with two nodes whose groundings coincide. Nothing downstream may
/// assume sibling groundings are disjoint.
#[test]
fn overlapping_groundings_are_tolerated() {
    let lt = LineTaxi::new(4);
    let h = Hierarchy::new(lt.base.clone()).unwrap();
    let h = h.add_level_with_seeds(lt.level1_options(), &lt.seeds()).unwrap();
    let mut a2 = lt.level2_options(&h);
    let again = a2[1].clone();
    let renamed = skillsym::OptionSkill::new(
        "passenger-to-3-again",
        again.initiation().clone(),
        again.termination().clone(),
        (0..h.num_states(1)).map(|s| again.policy(StateId(s))).collect(),
    )
    .unwrap();
    a2.push(renamed);
    let h = h.add_level(a2).unwrap();
    assert_eq!(h.num_states(2), 3);
    let l2 = h.abstract_level(2).unwrap();
    assert_eq!(l2.grounding(StateId(1)), l2.grounding(StateId(2)));
    assert!(h.validate().is_empty(), "{:?}", h.validate());

    let q = PlanQuery::new(
        lt.base_set(|a| a[PASS] == 3 && a[IN] == 0 && (a[TAXI] == 0 || a[TAXI] == 3)),
        lt.base_set(|a| a[PASS] == 0),
    )
    .unwrap();
    // Both overlapping nodes cover B, so both are in the maximal b.
    assert_eq!(candidate_b(&h, 2, q.start()).unwrap().len(), 2);
    assert_eq!(candidate_g(&h, 2, q.goal()).unwrap().len(), 1);
    let ans = answer_query(&h, &q, PlanMethod::Reachability).unwrap().unwrap();
    assert_eq!(ans.level, 2);
    for x in q.start().iter() {
        assert!(q.goal().contains(refine(&h, &ans.plan, x).unwrap().end));
    }
}

fn level_subsets(n: usize) -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
    (proptest::collection::vec(any::<bool>(), n), proptest::collection::vec(any::<bool>(), n))
}

proptest! {
    #[test]
    fn final_ground_is_monotone(j in 0usize..=2, (xs, ys) in level_subsets(20)) {
        let (_, h) = hierarchy();
        let n = h.num_states(j);
        let a = GroundingSet::from_states(j, n, (0..n).filter(|&i| xs[i] && ys[i]).map(StateId));
        let b = GroundingSet::from_states(j, n, (0..n).filter(|&i| xs[i]).map(StateId));
        prop_assert!(a.is_subset(&b).unwrap());
        let ga = final_ground(&h, j, &a).unwrap();
        let gb = final_ground(&h, j, &b).unwrap();
        prop_assert!(ga.is_subset(&gb).unwrap());
        prop_assert_eq!(ga, ground_down(&h, j, &a));
    }
}
