//! The Taxi grid: layout data and the base MDP built from it.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use skillsym::{ActionId, Mdp, StateId, StateSpace, Variable};

use crate::TaxiError;

pub const TAXI_X: usize = 0;
pub const TAXI_Y: usize = 1;
pub const PASS_X: usize = 2;
pub const PASS_Y: usize = 3;
pub const IN_TAXI: usize = 4;

pub const NORTH: ActionId = ActionId(0);
pub const SOUTH: ActionId = ActionId(1);
pub const EAST: ActionId = ActionId(2);
pub const WEST: ActionId = ActionId(3);
pub const PICK_UP: ActionId = ActionId(4);
pub const PUT_DOWN: ActionId = ActionId(5);

pub const ACTION_NAMES: [&str; 6] = ["move-north", "move-south", "move-east", "move-west", "pick-up", "put-down"];

/// Grid cell; `y` grows northwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Depot {
    pub name: String,
    pub cell: Cell,
}

/// Grid size, blocked adjacencies and depots. Loadable from JSON so the
/// layout can be swapped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxiSpec {
    pub width: u32,
    pub height: u32,
    /// Pairs of adjacent cells with a wall between them.
    pub walls: Vec<[Cell; 2]>,
    pub depots: Vec<Depot>,
}

impl Default for TaxiSpec {
    fn default() -> Self {
        Self::canonical()
    }
}

impl TaxiSpec {
    /// The usual 5×5 layout: depots in four corner-adjacent cells and three
    /// interior wall segments.
    pub fn canonical() -> Self {
        let c = Cell::new;
        let depot = |name: &str, cell| Depot {
            name: name.into(),
            cell,
        };
        Self {
            width: 5,
            height: 5,
            walls: vec![
                [c(1, 4), c(2, 4)],
                [c(1, 3), c(2, 3)],
                [c(0, 0), c(1, 0)],
                [c(0, 1), c(1, 1)],
                [c(2, 0), c(3, 0)],
                [c(2, 1), c(3, 1)],
            ],
            depots: vec![
                depot("red", c(0, 4)),
                depot("green", c(4, 4)),
                depot("blue", c(3, 0)),
                depot("yellow", c(0, 0)),
            ],
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, TaxiError> {
        let text = std::fs::read_to_string(path)?;
        let spec: Self = serde_json::from_str(&text)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), TaxiError> {
        let bad = |m: String| Err(TaxiError::Layout(m));
        if self.width == 0 || self.height == 0 {
            return bad("grid must be non-empty".into());
        }
        for w in &self.walls {
            if !self.in_grid(w[0]) || !self.in_grid(w[1]) || w[0].x.abs_diff(w[1].x) + w[0].y.abs_diff(w[1].y) != 1 {
                return bad(format!("wall {}|{} is not between adjacent cells", w[0], w[1]));
            }
        }
        let cells: BTreeSet<Cell> = self.depots.iter().map(|d| d.cell).collect();
        let names: BTreeSet<&str> = self.depots.iter().map(|d| d.name.as_str()).collect();
        if cells.len() != self.depots.len() || names.len() != self.depots.len() {
            return bad("depot names and cells must be distinct".into());
        }
        if self.depots.is_empty() {
            return bad("at least one depot is required".into());
        }
        if let Some(d) = self.depots.iter().find(|d| !self.in_grid(d.cell)) {
            return bad(format!("depot {} lies outside the grid", d.name));
        }
        // Level-2 skills drive between any two depots.
        for to in &self.depots {
            let route = self.route_to(to.cell);
            if let Some(from) = self.depots.iter().find(|d| d.cell != to.cell && route[self.cell_index(d.cell)].is_none()) {
                return bad(format!("depot {} cannot reach depot {}", from.name, to.name));
            }
        }
        Ok(())
    }

    pub fn in_grid(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn depot(&self, name: &str) -> Option<&Depot> {
        self.depots.iter().find(|d| d.name == name)
    }

    pub fn is_depot(&self, c: Cell) -> bool {
        self.depots.iter().any(|d| d.cell == c)
    }

    fn blocked(&self, a: Cell, b: Cell) -> bool {
        self.walls.iter().any(|w| (w[0] == a && w[1] == b) || (w[0] == b && w[1] == a))
    }

    /// Where a move leaves the taxi; walls and edges keep it in place.
    pub fn moved(&self, c: Cell, a: ActionId) -> Cell {
        let next = match a {
            NORTH if c.y + 1 < self.height => Cell::new(c.x, c.y + 1),
            SOUTH if c.y > 0 => Cell::new(c.x, c.y - 1),
            EAST if c.x + 1 < self.width => Cell::new(c.x + 1, c.y),
            WEST if c.x > 0 => Cell::new(c.x - 1, c.y),
            _ => c,
        };
        if self.blocked(c, next) {
            c
        } else {
            next
        }
    }

    /// For each cell, the first move on a shortest path to `target`
    /// (lowest move index among ties); `None` at the target itself.
    pub fn route_to(&self, target: Cell) -> Vec<Option<ActionId>> {
        let idx = |c: Cell| (c.y * self.width + c.x) as usize;
        let n = (self.width * self.height) as usize;
        let mut dist = vec![u32::MAX; n];
        dist[idx(target)] = 0;
        let mut queue = VecDeque::from([target]);
        let cells: Vec<Cell> = (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| Cell::new(x, y)))
            .collect();
        while let Some(c) = queue.pop_front() {
            for &p in &cells {
                if dist[idx(p)] == u32::MAX && [NORTH, SOUTH, EAST, WEST].iter().any(|&a| self.moved(p, a) == c) {
                    dist[idx(p)] = dist[idx(c)] + 1;
                    queue.push_back(p);
                }
            }
        }
        let mut route = vec![None; n];
        for &c in &cells {
            let d = dist[idx(c)];
            if d == 0 || d == u32::MAX {
                continue;
            }
            route[idx(c)] = [NORTH, SOUTH, EAST, WEST]
                .into_iter()
                .find(|&a| dist[idx(self.moved(c, a))] + 1 == d);
        }
        route
    }

    pub fn cell_index(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }
}

/// Base-level state in named form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaxiState {
    pub taxi: Cell,
    pub pass: Cell,
    pub in_taxi: bool,
}

impl TaxiState {
    pub fn assignment(&self) -> [u32; 5] {
        [self.taxi.x, self.taxi.y, self.pass.x, self.pass.y, self.in_taxi as u32]
    }

    pub fn from_assignment(a: &[u32]) -> Self {
        Self {
            taxi: Cell::new(a[TAXI_X], a[TAXI_Y]),
            pass: Cell::new(a[PASS_X], a[PASS_Y]),
            in_taxi: a[IN_TAXI] == 1,
        }
    }
}

/// The base MDP and the layout it was built from.
#[derive(Clone, Debug)]
pub struct Taxi {
    pub spec: TaxiSpec,
    pub mdp: Mdp,
}

impl Taxi {
    pub fn canonical() -> Self {
        build_taxi(&TaxiSpec::canonical()).expect("canonical layout is valid")
    }

    pub fn state(&self, st: TaxiState) -> Option<StateId> {
        self.mdp.space().factoring()?.state_of(&st.assignment())
    }

    pub fn decode(&self, s: StateId) -> TaxiState {
        let f = self.mdp.space().factoring().expect("taxi space is factored");
        TaxiState::from_assignment(f.assignment(s))
    }
}

/// Builds the base MDP: every (taxi, passenger) placement with the
/// passenger outside, plus one riding state per cell. Every action costs 1.
pub fn build_taxi(spec: &TaxiSpec) -> Result<Taxi, TaxiError> {
    spec.check()?;
    let vars = vec![
        Variable::range("taxi-x", spec.width as usize),
        Variable::range("taxi-y", spec.height as usize),
        Variable::range("pass-x", spec.width as usize),
        Variable::range("pass-y", spec.height as usize),
        Variable::boolean("in-taxi"),
    ];
    let cells: Vec<Cell> = (0..spec.height)
        .flat_map(|y| (0..spec.width).map(move |x| Cell::new(x, y)))
        .collect();
    let mut states = Vec::new();
    for &t in &cells {
        for &p in &cells {
            states.push(TaxiState { taxi: t, pass: p, in_taxi: false });
        }
    }
    for &t in &cells {
        states.push(TaxiState { taxi: t, pass: t, in_taxi: true });
    }
    let space = StateSpace::factored(0, vars, states.iter().map(|s| s.assignment().to_vec()).collect())?;
    let f = space.factoring().expect("factored").clone();
    let id = |st: TaxiState| f.state_of(&st.assignment()).expect("state exists");
    let mut b = Mdp::builder(space, ACTION_NAMES.map(String::from).to_vec(), 1.0);
    for (i, st) in states.iter().enumerate() {
        let s = StateId(i);
        for a in [NORTH, SOUTH, EAST, WEST] {
            let taxi = spec.moved(st.taxi, a);
            let pass = if st.in_taxi { taxi } else { st.pass };
            b.transition(s, a, id(TaxiState { taxi, pass, ..*st }), -1.0)?;
        }
        if !st.in_taxi && st.taxi == st.pass {
            b.transition(s, PICK_UP, id(TaxiState { in_taxi: true, ..*st }), -1.0)?;
        }
        if st.in_taxi {
            b.transition(s, PUT_DOWN, id(TaxiState { in_taxi: false, ..*st }), -1.0)?;
        }
    }
    Ok(Taxi {
        spec: spec.clone(),
        mdp: b.build()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(t: (u32, u32), p: (u32, u32), in_taxi: bool) -> TaxiState {
        TaxiState {
            taxi: Cell::new(t.0, t.1),
            pass: Cell::new(p.0, p.1),
            in_taxi,
        }
    }

    #[test]
    fn canonical_has_650_states() {
        let taxi = Taxi::canonical();
        assert_eq!(taxi.mdp.num_states(), 650);
        let riding: Vec<_> = taxi.mdp.space().states().map(|s| taxi.decode(s)).filter(|s| s.in_taxi).collect();
        assert_eq!(riding.len(), 25);
        assert!(riding.iter().all(|s| s.taxi == s.pass));
    }

    #[test]
    fn walls_and_edges_block_moves() {
        let spec = TaxiSpec::canonical();
        let c = Cell::new;
        assert_eq!(spec.moved(c(1, 4), EAST), c(1, 4));
        assert_eq!(spec.moved(c(2, 3), WEST), c(2, 3));
        assert_eq!(spec.moved(c(1, 2), EAST), c(2, 2));
        assert_eq!(spec.moved(c(0, 1), EAST), c(0, 1));
        assert_eq!(spec.moved(c(3, 0), WEST), c(3, 0));
        assert_eq!(spec.moved(c(0, 4), NORTH), c(0, 4));
        assert_eq!(spec.moved(c(0, 4), SOUTH), c(0, 3));
    }

    #[test]
    fn step_dynamics() {
        let taxi = Taxi::canonical();
        let m = &taxi.mdp;
        let s = taxi.state(st((0, 4), (0, 4), false)).unwrap();
        assert!(m.is_applicable(s, PICK_UP));
        assert!(!m.is_applicable(s, PUT_DOWN));
        assert_eq!(m.successor(s, NORTH), Some(s));
        let riding = m.successor(s, PICK_UP).unwrap();
        assert_eq!(taxi.decode(riding), st((0, 4), (0, 4), true));
        // The passenger moves with the taxi.
        let down = m.successor(riding, SOUTH).unwrap();
        assert_eq!(taxi.decode(down), st((0, 3), (0, 3), true));
        assert_eq!(m.step(down, PUT_DOWN).unwrap(), (taxi.state(st((0, 3), (0, 3), false)).unwrap(), -1.0));
        let apart = taxi.state(st((1, 1), (0, 4), false)).unwrap();
        assert!(!m.is_applicable(apart, PICK_UP));
    }

    #[test]
    fn routes_are_shortest() {
        let spec = TaxiSpec::canonical();
        let target = Cell::new(3, 0);
        let route = spec.route_to(target);
        // From red: around the wall at x=1|2 costs 7 moves.
        let mut c = Cell::new(0, 4);
        let mut steps = 0;
        while c != target {
            c = spec.moved(c, route[spec.cell_index(c)].unwrap());
            steps += 1;
        }
        assert_eq!(steps, 7);
    }

    #[test]
    fn layout_round_trips_through_json() {
        let spec = TaxiSpec::canonical();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<TaxiSpec>(&text).unwrap(), spec);
    }

    #[test]
    fn bad_layouts_are_rejected() {
        let mut spec = TaxiSpec::canonical();
        spec.walls.push([Cell::new(0, 0), Cell::new(2, 0)]);
        assert!(spec.check().is_err());
        let mut spec = TaxiSpec::canonical();
        spec.depots[1].cell = spec.depots[0].cell;
        assert!(spec.check().is_err());
        // Walling in the centre cuts the left columns off from blue.
        let mut spec = TaxiSpec::canonical();
        let c = Cell::new(2, 2);
        for n in [Cell::new(1, 2), Cell::new(3, 2), Cell::new(2, 1), Cell::new(2, 3)] {
            spec.walls.push([c, n]);
        }
        let err = spec.check().unwrap_err().to_string();
        assert!(err.contains("cannot reach"), "{err}");
    }
}
