//! Hand-written Taxi skills and the three-level hierarchy built from them.

use skillsym::{ActionId, GroundingSet, Hierarchy, Mdp, OptionSkill, StateId};

use crate::domain::{Cell, Taxi, TaxiState, IN_TAXI, PASS_X, PASS_Y, PICK_UP, PUT_DOWN, TAXI_X, TAXI_Y};
use crate::TaxiError;

fn set(m: &Mdp, pred: impl Fn(TaxiState) -> bool) -> GroundingSet {
    let f = m.space().factoring().expect("taxi levels are factored");
    GroundingSet::from_states(
        m.level(),
        m.num_states(),
        m.space().states().filter(|&s| pred(TaxiState::from_assignment(f.assignment(s)))),
    )
}

fn state_of(m: &Mdp, s: StateId) -> TaxiState {
    TaxiState::from_assignment(m.space().factoring().expect("factored").assignment(s))
}

/// `A_1`: one drive-to option per depot (in depot order), then pick-up and
/// put-down. A drive-to option starts only where the depot can be reached.
pub fn taxi_options_level1(taxi: &Taxi) -> Vec<OptionSkill> {
    let m = &taxi.mdp;
    let n = m.num_states();
    let spec = &taxi.spec;
    let mut out = Vec::new();
    for d in &spec.depots {
        let route = spec.route_to(d.cell);
        let policy = m
            .space()
            .states()
            .map(|s| route[spec.cell_index(state_of(m, s).taxi)])
            .collect();
        let o = OptionSkill::new(
            format!("drive-to-{}", d.name),
            set(m, |st| st.taxi == d.cell || route[spec.cell_index(st.taxi)].is_some()),
            set(m, |st| st.taxi == d.cell),
            policy,
        )
        .expect("drive-to option is well formed");
        out.push(o);
    }
    let pick_init = set(m, |st| !st.in_taxi && st.taxi == st.pass);
    let policy = (0..n).map(|s| pick_init.contains(StateId(s)).then_some(PICK_UP)).collect();
    out.push(OptionSkill::new("pick-up", pick_init, set(m, |st| st.in_taxi), policy).expect("pick-up"));
    let policy = m.space().states().map(|s| state_of(m, s).in_taxi.then_some(PUT_DOWN)).collect();
    out.push(
        OptionSkill::new("put-down", GroundingSet::full(0, n), set(m, |st| !st.in_taxi), policy)
            .expect("put-down"),
    );
    out
}

/// The order `A_2` is listed in.
pub const LEVEL2_ORDER: [&str; 4] = ["blue", "red", "green", "yellow"];

/// `A_2`: passenger-to-X for each depot, over level 1.
pub fn taxi_options_level2(taxi: &Taxi, h: &Hierarchy) -> Result<Vec<OptionSkill>, TaxiError> {
    let m = h.level_mdp(1).ok_or(TaxiError::MissingLevel(1))?;
    let act = |name: &str| {
        m.action_id(name)
            .ok_or_else(|| TaxiError::Layout(format!("level 1 has no option `{name}`")))
    };
    let pick = act("pick-up")?;
    let put = act("put-down")?;
    let drive: Vec<(Cell, ActionId)> = taxi
        .spec
        .depots
        .iter()
        .map(|d| Ok((d.cell, act(&format!("drive-to-{}", d.name))?)))
        .collect::<Result<_, TaxiError>>()?;
    let drive_to = |c: Cell| drive.iter().find(|(cell, _)| *cell == c).map(|p| p.1);

    let mut order: Vec<_> = LEVEL2_ORDER
        .iter()
        .filter_map(|name| taxi.spec.depot(name))
        .collect();
    for d in &taxi.spec.depots {
        if !order.iter().any(|o| o.name == d.name) {
            order.push(d);
        }
    }
    order
        .into_iter()
        .map(|d| {
            let target = d.cell;
            let policy = m
                .space()
                .states()
                .map(|s| {
                    let st = state_of(m, s);
                    if st.in_taxi {
                        if st.taxi == target {
                            Some(put)
                        } else {
                            drive_to(target)
                        }
                    } else if st.pass == target {
                        None
                    } else if st.taxi == st.pass {
                        Some(pick)
                    } else {
                        drive_to(st.pass)
                    }
                })
                .collect();
            OptionSkill::new(
                format!("passenger-to-{}", d.name),
                set(m, |st| st.pass != target),
                set(m, |st| st.pass == target && st.taxi == target && !st.in_taxi),
                policy,
            )
            .map_err(|e| TaxiError::Model(e.to_string()))
        })
        .collect()
}

/// Closure seeds for level 1: taxi and passenger at depots, passenger out.
pub fn level1_seeds(taxi: &Taxi) -> GroundingSet {
    let spec = &taxi.spec;
    set(&taxi.mdp, |st| !st.in_taxi && spec.is_depot(st.taxi) && spec.is_depot(st.pass))
}

/// Base, `A_1` level and `A_2` level.
pub fn build_hierarchy(taxi: &Taxi) -> Result<Hierarchy, TaxiError> {
    let h = Hierarchy::new(taxi.mdp.clone())?;
    let h = h.add_level_with_seeds(taxi_options_level1(taxi), &level1_seeds(taxi))?;
    let a2 = taxi_options_level2(taxi, &h)?;
    Ok(h.add_level(a2)?)
}

/// Named view of a state at a factored Taxi level.
pub fn describe(m: &Mdp, s: StateId) -> String {
    match m.space().factoring() {
        Some(f) => {
            let a = f.assignment(s);
            format!(
                "taxi={}:{} pass={}:{} in-taxi={}",
                a[TAXI_X],
                a[TAXI_Y],
                a[PASS_X],
                a[PASS_Y],
                a[IN_TAXI] == 1
            )
        }
        None => m.space().label(s),
    }
}
