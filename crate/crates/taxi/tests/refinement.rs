//! Every plan the hierarchy returns refines to base actions that reach the
//! goal from every start, on the built-in and on random queries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skillsym::planner::{answer_query, answer_query_from, refine, PlanMethod, PlanQuery};
use skillsym::Hierarchy;
use taxi::query::{benchmark_queries, random_solvable_queries};
use taxi::{build_hierarchy, Taxi};

fn check(h: &Hierarchy, q: &PlanQuery, method: PlanMethod, top: usize) -> usize {
    let a = answer_query_from(h, q, method, top)
        .unwrap()
        .expect("solvable queries always have a plan at the base");
    assert!(a.level <= top);
    for x in q.start().iter() {
        let t = refine(h, &a.plan, x).unwrap();
        assert_eq!(t.start, x);
        assert!(q.goal().contains(t.end), "start {x} ends at {} outside G", t.end);
        // Replaying the base actions reproduces the end state.
        let mut s = x;
        for &act in &t.actions {
            s = h.base().step(s, act).unwrap().0;
        }
        assert_eq!(s, t.end);
    }
    a.level
}

#[test]
fn built_in_queries_refine_to_the_goal() {
    let taxi = Taxi::canonical();
    let h = build_hierarchy(&taxi).unwrap();
    for q in benchmark_queries() {
        let pq = q.expand(&taxi).unwrap();
        for method in [PlanMethod::Reachability, PlanMethod::ValueIteration] {
            for top in 0..=h.depth() {
                check(&h, &pq, method, top);
            }
        }
    }
}

#[test]
fn random_queries_refine_to_the_goal() {
    let taxi = Taxi::canonical();
    let h = build_hierarchy(&taxi).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let queries = random_solvable_queries(&mut rng, &taxi, 100);
    let mut levels = [0usize; 3];
    for q in &queries {
        let pq = q.expand(&taxi).unwrap();
        levels[check(&h, &pq, PlanMethod::Reachability, h.depth())] += 1;
    }
    assert_eq!(levels.iter().sum::<usize>(), 100);
}

#[test]
fn answers_are_stable_across_builds() {
    let taxi = Taxi::canonical();
    let h1 = build_hierarchy(&taxi).unwrap();
    let h2 = build_hierarchy(&taxi).unwrap();
    for q in benchmark_queries() {
        let pq = q.expand(&taxi).unwrap();
        let a = answer_query(&h1, &pq, PlanMethod::Reachability).unwrap().unwrap();
        let b = answer_query(&h2, &pq, PlanMethod::Reachability).unwrap().unwrap();
        assert_eq!(a.level, b.level);
        for x in pq.start().iter() {
            assert_eq!(refine(&h1, &a.plan, x).unwrap().actions, refine(&h2, &b.plan, x).unwrap().actions);
        }
    }
}
