//! Plan queries written as constraints on taxi and passenger placement.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use skillsym::planner::{findplan, PlanMethod, PlanQuery};
use skillsym::{GroundingSet, Mdp};

use crate::domain::{Cell, Taxi, TaxiSpec, TaxiState};
use crate::TaxiError;

/// Where the taxi or the passenger may be.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Location {
    #[default]
    Any,
    AnyDepot,
    Depot(String),
    Cell(Cell),
}

impl Location {
    pub fn admits(&self, spec: &TaxiSpec, c: Cell) -> Result<bool, TaxiError> {
        Ok(match self {
            Location::Any => true,
            Location::AnyDepot => spec.is_depot(c),
            Location::Depot(name) => spec.depot(name).ok_or_else(|| TaxiError::UnknownDepot(name.clone()))?.cell == c,
            Location::Cell(cell) => *cell == c,
        })
    }

    /// The single cell this location names, if any.
    pub fn cell(&self, spec: &TaxiSpec) -> Result<Option<Cell>, TaxiError> {
        match self {
            Location::Depot(name) => Ok(Some(
                spec.depot(name).ok_or_else(|| TaxiError::UnknownDepot(name.clone()))?.cell,
            )),
            Location::Cell(c) => Ok(Some(*c)),
            _ => Ok(None),
        }
    }
}

impl FromStr for Location {
    type Err = TaxiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "any" {
            return Ok(Location::Any);
        }
        if s == "any-depot" {
            return Ok(Location::AnyDepot);
        }
        if let Some((x, y)) = s.split_once(':') {
            let parse = |v: &str| v.trim().parse::<u32>().map_err(|_| TaxiError::Predicate(format!("bad cell `{s}`")));
            return Ok(Location::Cell(Cell::new(parse(x)?, parse(y)?)));
        }
        if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(TaxiError::Predicate(format!("bad location `{s}`")));
        }
        Ok(Location::Depot(s.to_string()))
    }
}

impl TryFrom<String> for Location {
    type Error = TaxiError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Location> for String {
    fn from(l: Location) -> Self {
        l.to_string()
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Any => f.write_str("any"),
            Location::AnyDepot => f.write_str("any-depot"),
            Location::Depot(d) => f.write_str(d),
            Location::Cell(c) => write!(f, "{c}"),
        }
    }
}

/// A conjunction of placement constraints; omitted fields are unconstrained.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePredicate {
    #[serde(rename = "taxi-at", default, skip_serializing_if = "is_any")]
    pub taxi_at: Location,
    #[serde(rename = "pass-at", default, skip_serializing_if = "is_any")]
    pub pass_at: Location,
    #[serde(rename = "in-taxi", default, skip_serializing_if = "Option::is_none")]
    pub in_taxi: Option<bool>,
}

fn is_any(l: &Location) -> bool {
    *l == Location::Any
}

impl StatePredicate {
    pub fn admits(&self, spec: &TaxiSpec, st: TaxiState) -> Result<bool, TaxiError> {
        Ok(self.in_taxi.is_none_or(|i| i == st.in_taxi)
            && self.taxi_at.admits(spec, st.taxi)?
            && self.pass_at.admits(spec, st.pass)?)
    }

    /// All base states satisfying the predicate.
    pub fn expand(&self, taxi: &Taxi) -> Result<GroundingSet, TaxiError> {
        let m = &taxi.mdp;
        let mut out = GroundingSet::empty(0, m.num_states());
        for s in m.space().states() {
            if self.admits(&taxi.spec, taxi.decode(s))? {
                out.insert(s);
            }
        }
        Ok(out)
    }
}

/// `key=value` pairs separated by commas, e.g.
/// `pass-at=blue,taxi-at=any-depot,in-taxi=false`.
impl FromStr for StatePredicate {
    type Err = TaxiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = StatePredicate::default();
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| TaxiError::Predicate(format!("expected key=value, got `{item}`")))?;
            match k.trim() {
                "taxi-at" => p.taxi_at = v.parse()?,
                "pass-at" => p.pass_at = v.parse()?,
                "in-taxi" => {
                    p.in_taxi = Some(
                        v.trim()
                            .parse()
                            .map_err(|_| TaxiError::Predicate(format!("in-taxi must be true or false, got `{v}`")))?,
                    )
                }
                other => return Err(TaxiError::Predicate(format!("unknown key `{other}`"))),
            }
        }
        Ok(p)
    }
}

impl fmt::Display for StatePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.taxi_at != Location::Any {
            parts.push(format!("taxi-at={}", self.taxi_at));
        }
        if self.pass_at != Location::Any {
            parts.push(format!("pass-at={}", self.pass_at));
        }
        if let Some(i) = self.in_taxi {
            parts.push(format!("in-taxi={i}"));
        }
        if parts.is_empty() {
            f.write_str("any")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

/// A query as stored on disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "B")]
    pub start: StatePredicate,
    #[serde(rename = "G")]
    pub goal: StatePredicate,
}

impl QuerySpec {
    pub fn new(name: &str, start: StatePredicate, goal: StatePredicate) -> Self {
        Self {
            name: Some(name.to_string()),
            start,
            goal,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, TaxiError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("query")
    }

    pub fn expand(&self, taxi: &Taxi) -> Result<PlanQuery, TaxiError> {
        let b = self.start.expand(taxi)?;
        let g = self.goal.expand(taxi)?;
        if b.is_empty() {
            return Err(TaxiError::EmptyQuery(format!("B = {} matches no state", self.start)));
        }
        if g.is_empty() {
            return Err(TaxiError::EmptyQuery(format!("G = {} matches no state", self.goal)));
        }
        Ok(PlanQuery::new(b, g)?)
    }
}

fn depot(name: &str) -> Location {
    Location::Depot(name.into())
}

/// Passenger waiting at blue, taxi at any depot; deliver to red.
pub fn query1() -> QuerySpec {
    QuerySpec::new(
        "Q1",
        StatePredicate {
            taxi_at: Location::AnyDepot,
            pass_at: depot("blue"),
            in_taxi: Some(false),
        },
        StatePredicate {
            pass_at: depot("red"),
            ..Default::default()
        },
    )
}

/// Same starts as Q1; drive the taxi to yellow, leaving the passenger.
pub fn query2() -> QuerySpec {
    QuerySpec::new(
        "Q2",
        query1().start,
        StatePredicate {
            taxi_at: depot("yellow"),
            pass_at: depot("blue"),
            in_taxi: Some(false),
        },
    )
}

/// Taxi at red, passenger at blue; leave the passenger at cell 1:4.
pub fn query3() -> QuerySpec {
    QuerySpec::new(
        "Q3",
        StatePredicate {
            taxi_at: depot("red"),
            pass_at: depot("blue"),
            in_taxi: Some(false),
        },
        StatePredicate {
            pass_at: Location::Cell(Cell::new(1, 4)),
            in_taxi: Some(false),
            ..Default::default()
        },
    )
}

pub fn benchmark_queries() -> Vec<QuerySpec> {
    vec![query1(), query2(), query3()]
}

fn random_location<R: Rng>(rng: &mut R, spec: &TaxiSpec) -> Location {
    match rng.random_range(0..4) {
        0 => Location::Any,
        1 => Location::AnyDepot,
        2 => Location::Depot(spec.depots.choose(rng).expect("depots exist").name.clone()),
        _ => Location::Cell(Cell::new(rng.random_range(0..spec.width), rng.random_range(0..spec.height))),
    }
}

pub fn random_predicate<R: Rng>(rng: &mut R, spec: &TaxiSpec) -> StatePredicate {
    StatePredicate {
        taxi_at: random_location(rng, spec),
        pass_at: random_location(rng, spec),
        in_taxi: [None, Some(false), Some(true)].choose(rng).copied().flatten(),
    }
}

/// Draws queries with each constraint chosen uniformly, keeping those whose
/// sets are non-empty and whose goal is reachable from every start in the
/// base MDP.
pub fn random_solvable_queries<R: Rng>(rng: &mut R, taxi: &Taxi, count: usize) -> Vec<QuerySpec> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let q = QuerySpec {
            name: Some(format!("R{}", out.len() + 1)),
            start: random_predicate(rng, &taxi.spec),
            goal: random_predicate(rng, &taxi.spec),
        };
        let Ok(pq) = q.expand(taxi) else { continue };
        if solvable(&taxi.mdp, &pq) {
            out.push(q);
        }
    }
    out
}

pub fn solvable(base: &Mdp, q: &PlanQuery) -> bool {
    findplan(base, q.start(), q.goal(), PlanMethod::Reachability).is_some()
}
