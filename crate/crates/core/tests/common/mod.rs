//! A one-dimensional taxi used as a small fixture: the taxi moves along a
//! line of cells, the passenger waits at a cell or rides in the taxi.
#![allow(dead_code)]

use skillsym::hierarchy::Hierarchy;
use skillsym::mdp::{ActionId, Mdp, StateId, StateSpace, Variable};
use skillsym::skill::OptionSkill;
use skillsym::symbols::GroundingSet;

pub const TAXI: usize = 0;
pub const PASS: usize = 1;
pub const IN: usize = 2;

pub struct LineTaxi {
    pub len: usize,
    pub depots: Vec<u32>,
    pub base: Mdp,
}

impl LineTaxi {
    pub fn new(len: usize) -> Self {
        let vars = vec![
            Variable::range("taxi", len),
            Variable::range("pass", len),
            Variable::boolean("in-taxi"),
        ];
        let n = len as u32;
        let mut assigns = Vec::new();
        for t in 0..n {
            for p in 0..n {
                assigns.push(vec![t, p, 0]);
            }
        }
        for t in 0..n {
            assigns.push(vec![t, t, 1]);
        }
        let space = StateSpace::factored(0, vars, assigns).unwrap();
        let f = space.factoring().unwrap().clone();
        let actions = ["left", "right", "pick-up", "put-down"].map(String::from).to_vec();
        let mut b = Mdp::builder(space, actions, 1.0);
        for s in 0..len * len + len {
            let s = StateId(s);
            let a = f.assignment(s).to_vec();
            let moved = |t: u32| {
                let mut x = a.clone();
                x[TAXI] = t;
                if a[IN] == 1 {
                    x[PASS] = t;
                }
                f.state_of(&x).unwrap()
            };
            b.transition(s, ActionId(0), moved(a[TAXI].saturating_sub(1)), -1.0).unwrap();
            b.transition(s, ActionId(1), moved((a[TAXI] + 1).min(n - 1)), -1.0).unwrap();
            if a[IN] == 0 && a[TAXI] == a[PASS] {
                b.transition(s, ActionId(2), f.state_of(&[a[TAXI], a[PASS], 1]).unwrap(), -1.0)
                    .unwrap();
            }
            if a[IN] == 1 {
                b.transition(s, ActionId(3), f.state_of(&[a[TAXI], a[PASS], 0]).unwrap(), -1.0)
                    .unwrap();
            }
        }
        Self {
            len,
            depots: vec![0, n - 1],
            base: b.build().unwrap(),
        }
    }

    pub fn state(&self, taxi: u32, pass: u32, in_taxi: bool) -> StateId {
        self.base
            .space()
            .factoring()
            .unwrap()
            .state_of(&[taxi, pass, in_taxi as u32])
            .unwrap()
    }

    fn set(&self, level: usize, m: &Mdp, pred: impl Fn(&[u32]) -> bool) -> GroundingSet {
        let f = m.space().factoring().unwrap();
        GroundingSet::from_states(
            level,
            m.num_states(),
            m.space().states().filter(|&s| pred(f.assignment(s))),
        )
    }

    pub fn base_set(&self, pred: impl Fn(&[u32]) -> bool) -> GroundingSet {
        self.set(0, &self.base, pred)
    }

    pub fn seeds(&self) -> GroundingSet {
        self.base_set(|a| {
            a[IN] == 0 && self.depots.contains(&a[TAXI]) && self.depots.contains(&a[PASS])
        })
    }

    pub fn level1_options(&self) -> Vec<OptionSkill> {
        let m = &self.base;
        let f = m.space().factoring().unwrap();
        let n = m.num_states();
        let mut out = Vec::new();
        for &d in &self.depots {
            let policy = m
                .space()
                .states()
                .map(|s| {
                    let t = f.value(s, TAXI);
                    match t.cmp(&d) {
                        std::cmp::Ordering::Less => Some(ActionId(1)),
                        std::cmp::Ordering::Greater => Some(ActionId(0)),
                        std::cmp::Ordering::Equal => None,
                    }
                })
                .collect();
            out.push(
                OptionSkill::new(
                    format!("drive-to-{d}"),
                    GroundingSet::full(0, n),
                    self.base_set(|a| a[TAXI] == d),
                    policy,
                )
                .unwrap(),
            );
        }
        let pick_init = self.base_set(|a| a[IN] == 0 && a[TAXI] == a[PASS]);
        let pick_policy = (0..n).map(|s| pick_init.contains(StateId(s)).then_some(ActionId(2))).collect();
        out.push(OptionSkill::new("pick-up", pick_init, self.base_set(|a| a[IN] == 1), pick_policy).unwrap());
        let put_policy = m
            .space()
            .states()
            .map(|s| (f.value(s, IN) == 1).then_some(ActionId(3)))
            .collect();
        out.push(
            OptionSkill::new("put-down", GroundingSet::full(0, n), self.base_set(|a| a[IN] == 0), put_policy)
                .unwrap(),
        );
        out
    }

    pub fn level2_options(&self, h: &Hierarchy) -> Vec<OptionSkill> {
        let m = h.level_mdp(1).unwrap();
        let f = m.space().factoring().unwrap();
        let act = |name: &str| m.action_id(name).unwrap();
        self.depots
            .iter()
            .map(|&d| {
                let policy = m
                    .space()
                    .states()
                    .map(|s| {
                        let a = f.assignment(s);
                        if a[IN] == 1 {
                            Some(if a[TAXI] == d { act("put-down") } else { act(&format!("drive-to-{d}")) })
                        } else if a[PASS] == d {
                            None
                        } else if a[TAXI] == a[PASS] {
                            Some(act("pick-up"))
                        } else {
                            Some(act(&format!("drive-to-{}", a[PASS])))
                        }
                    })
                    .collect();
                OptionSkill::new(
                    format!("passenger-to-{d}"),
                    self.set(1, m, |a| a[PASS] != d),
                    self.set(1, m, |a| a[PASS] == d && a[TAXI] == d && a[IN] == 0),
                    policy,
                )
                .unwrap()
            })
            .collect()
    }

    pub fn hierarchy(&self) -> Hierarchy {
        let h = Hierarchy::new(self.base.clone()).unwrap();
        let h = h.add_level_with_seeds(self.level1_options(), &self.seeds()).unwrap();
        let l2 = self.level2_options(&h);
        h.add_level(l2).unwrap()
    }
}
