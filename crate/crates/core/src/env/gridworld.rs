//! Multi-room gridworld in the BabyAI style.
//!
//! Rooms ("minigrids") sit side by side, separated by vertical walls with one
//! door each. Coordinates are (row, column) with the outer ring being wall.
//! `go to`, `go through` and `toggle and go through` are macro actions that
//! walk a shortest path over free cells; they fail with `Nothing happens.`
//! when no path exists.

use std::collections::VecDeque;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::{seed, Domain, EnvError, EnvKind, TaskSpec};

pub const TASK_TYPES: &[&str] = &["goto", "gotodoor", "pickup", "open", "unlock", "putnext"];

pub const GRAMMAR: &str = "\
You are placed in a room and you need to accomplish the given goal with actions.

You can use the following actions:

- turn right
- turn left
- move forward
- go to <obj> <id>
- pick up <obj> <id>
- drop: put the object you carry in the empty cell in front of you.
- go through <door> <id>: <door> must be an open door.
- toggle and go through <door> <id>: <door> can be a closed door or a locked door. If you want to open a locked door, you need to carry a key that is of the same color as the locked door.
- toggle: there is a closed or locked door right in front of you and you can toggle it.
- think: <thought>: reason without acting.";

const COLORS: [&str; 6] = ["red", "green", "blue", "purple", "yellow", "grey"];
const DIRS: [&str; 4] = ["up", "right", "down", "left"];
const DELTA: [(i32, i32); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

type Cell = (u8, u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjKind {
    Ball,
    Box,
    Key,
}

impl ObjKind {
    const ALL: [ObjKind; 3] = [ObjKind::Ball, ObjKind::Box, ObjKind::Key];

    fn name(self) -> &'static str {
        match self {
            ObjKind::Ball => "ball",
            ObjKind::Box => "box",
            ObjKind::Key => "key",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DoorState {
    Open,
    Closed,
    Locked,
}

impl DoorState {
    fn name(self) -> &'static str {
        match self {
            DoorState::Open => "open",
            DoorState::Closed => "closed",
            DoorState::Locked => "locked",
        }
    }
}

#[derive(Debug, Clone)]
struct Obj {
    kind: ObjKind,
    color: u8,
    id: u8,
}

#[derive(Debug, Clone)]
struct Door {
    cell: Cell,
    color: u8,
    id: u8,
}

#[derive(Debug, Clone, Copy)]
enum Goal {
    GoTo(usize),
    GoToDoor(usize),
    Pickup(usize),
    Open(usize),
    PutNext(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridState {
    agent: Cell,
    dir: u8,
    carrying: Option<u8>,
    /// `None` while carried.
    objs: Vec<Option<Cell>>,
    doors: Vec<DoorState>,
}

#[derive(Debug, Clone)]
pub struct Gridworld {
    room_size: u8,
    rooms: u8,
    objs: Vec<Obj>,
    doors: Vec<Door>,
    goal: Goal,
    window: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Content {
    Wall,
    Door(usize),
    Obj(usize),
    Empty,
}

fn step_cell(c: Cell, dir: u8) -> Option<Cell> {
    let (dr, dc) = DELTA[dir as usize];
    let r = u8::try_from(c.0 as i32 + dr).ok()?;
    let col = u8::try_from(c.1 as i32 + dc).ok()?;
    Some((r, col))
}

fn dir_between(from: Cell, to: Cell) -> u8 {
    let d = (to.0 as i32 - from.0 as i32, to.1 as i32 - from.1 as i32);
    DELTA.iter().position(|x| *x == d).expect("adjacent cells") as u8
}

fn manhattan(a: Cell, b: Cell) -> u32 {
    a.0.abs_diff(b.0) as u32 + a.1.abs_diff(b.1) as u32
}

impl Gridworld {
    fn rows(&self) -> u8 {
        self.room_size + 2
    }

    fn cols(&self) -> u8 {
        self.rooms * (self.room_size + 1) + 1
    }

    fn minigrid(&self, c: Cell) -> u8 {
        (c.1 / (self.room_size + 1)).min(self.rooms - 1)
    }

    fn content(&self, s: &GridState, c: Cell) -> Content {
        if let Some(d) = self.doors.iter().position(|d| d.cell == c) {
            return Content::Door(d);
        }
        if c.0 == 0 || c.0 >= self.rows() - 1 || c.1.is_multiple_of(self.room_size + 1) || c.1 >= self.cols() {
            return Content::Wall;
        }
        match s.objs.iter().position(|o| *o == Some(c)) {
            Some(i) => Content::Obj(i),
            None => Content::Empty,
        }
    }

    fn passable(&self, s: &GridState, c: Cell, blocked_door: Option<usize>) -> bool {
        match self.content(s, c) {
            Content::Empty => true,
            Content::Door(d) => Some(d) != blocked_door && s.doors[d] == DoorState::Open,
            _ => false,
        }
    }

    fn front(&self, s: &GridState) -> Option<Cell> {
        step_cell(s.agent, s.dir)
    }

    /// Breadth-first walk from the agent; returns the first goal cell found.
    fn nearest(&self, s: &GridState, goals: &[Cell], blocked_door: Option<usize>) -> Option<Cell> {
        let mut seen = vec![false; self.rows() as usize * self.cols() as usize];
        let idx = |c: Cell| c.0 as usize * self.cols() as usize + c.1 as usize;
        let mut queue = VecDeque::from([s.agent]);
        seen[idx(s.agent)] = true;
        while let Some(c) = queue.pop_front() {
            if goals.contains(&c) {
                return Some(c);
            }
            for d in 0..4 {
                let Some(n) = step_cell(c, d) else { continue };
                if n.0 >= self.rows() || n.1 >= self.cols() || seen[idx(n)] {
                    continue;
                }
                if self.passable(s, n, blocked_door) {
                    seen[idx(n)] = true;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    fn obj_label(&self, i: usize) -> String {
        let o = &self.objs[i];
        format!("{} {} {}", COLORS[o.color as usize], o.kind.name(), o.id)
    }

    fn door_label(&self, s: &GridState, i: usize) -> String {
        let d = &self.doors[i];
        format!("{} {} door {}", COLORS[d.color as usize], s.doors[i].name(), d.id)
    }

    fn plain_door_label(&self, i: usize) -> String {
        let d = &self.doors[i];
        format!("{} door {}", COLORS[d.color as usize], d.id)
    }

    fn parse_obj(&self, words: &[&str]) -> Option<usize> {
        let words = strip_article(words);
        let [color, kind, id] = words else { return None };
        let id: u8 = id.parse().ok()?;
        self.objs
            .iter()
            .position(|o| COLORS[o.color as usize] == *color && o.kind.name() == *kind && o.id == id)
    }

    fn parse_door(&self, s: &GridState, words: &[&str]) -> Option<usize> {
        let words = strip_article(words);
        let (color, state, id) = match words {
            [c, "door", id] => (*c, None, *id),
            [c, st, "door", id] => (*c, Some(*st), *id),
            _ => return None,
        };
        let id: u8 = id.parse().ok()?;
        let i = self
            .doors
            .iter()
            .position(|d| COLORS[d.color as usize] == color && d.id == id)?;
        match state {
            Some(st) if st != s.doors[i].name() => None,
            _ => Some(i),
        }
    }

    fn content_text(&self, s: &GridState, c: Option<Cell>) -> String {
        match c.map(|c| self.content(s, c)) {
            None | Some(Content::Wall) => "a wall".into(),
            Some(Content::Empty) => "an empty cell".into(),
            Some(Content::Door(d)) => format!("the {}", self.door_label(s, d)),
            Some(Content::Obj(o)) => format!("the {}", self.obj_label(o)),
        }
    }

    fn visible(&self, s: &GridState, c: Cell) -> bool {
        if !self.window {
            return true;
        }
        let (dr, dc) = DELTA[s.dir as usize];
        let (rr, rc) = DELTA[(s.dir as usize + 1) % 4];
        let v = (c.0 as i32 - s.agent.0 as i32, c.1 as i32 - s.agent.1 as i32);
        let forward = v.0 * dr + v.1 * dc;
        let lateral = v.0 * rr + v.1 * rc;
        (0..=6).contains(&forward) && (-3..=3).contains(&lateral)
    }

    fn at(&self, c: Cell) -> String {
        format!("row {} and column {}", c.0, c.1)
    }

    /// Moves the agent from its side of door `d` to the other side.
    fn cross(&self, s: &GridState, d: usize) -> Option<GridState> {
        let door = self.doors[d].cell;
        let sides = [(door.0, door.1 - 1), (door.0, door.1 + 1)];
        let near = self.nearest(s, &sides, Some(d))?;
        let far = if near == sides[0] { sides[1] } else { sides[0] };
        let mut next = s.clone();
        next.doors[d] = DoorState::Open;
        if !self.passable(&next, far, None) {
            return None;
        }
        next.agent = far;
        next.dir = dir_between(near, door);
        Some(next)
    }

    fn goal_clause(&self) -> String {
        match self.goal {
            Goal::GoTo(o) => format!("go to the {}", self.obj_label(o)),
            Goal::GoToDoor(d) => format!("go to the {}", self.plain_door_label(d)),
            Goal::Pickup(o) => format!("pick up the {}", self.obj_label(o)),
            Goal::Open(d) => format!("open the {}", self.plain_door_label(d)),
            Goal::PutNext(a, b) => format!("put the {} next to the {}", self.obj_label(a), self.obj_label(b)),
        }
    }

    fn generate(spec: &TaskSpec) -> Result<(Self, GridState), EnvError> {
        let p = &spec.params;
        let room_size = p.room_size.unwrap_or(4);
        let rooms = p.rooms.unwrap_or(2);
        let n_objs = p.objects.unwrap_or(3) as usize;
        if !(2..=8).contains(&room_size) {
            return Err(EnvError::Config(format!(
                "gridworld room_size must be in 2..=8, got {room_size}"
            )));
        }
        if !(1..=COLORS.len() as u32 + 1).contains(&rooms) {
            return Err(EnvError::Config(format!(
                "gridworld rooms must be in 1..=7, got {rooms}"
            )));
        }
        let task = spec.task_type.as_str();
        let needs_door = matches!(task, "gotodoor" | "open" | "unlock");
        if needs_door && rooms < 2 {
            return Err(EnvError::Config(format!(
                "gridworld {task} tasks need at least 2 rooms"
            )));
        }
        let needs_objs = match task {
            "goto" | "pickup" => 1,
            "putnext" => 2,
            _ => 0,
        };
        if n_objs < needs_objs {
            return Err(EnvError::Config(format!(
                "gridworld {task} tasks need at least {needs_objs} objects"
            )));
        }
        let (room_size, rooms) = (room_size as u8, rooms as u8);
        let mut rng = seed::rng(spec.seed);

        let mut colors: Vec<u8> = (0..COLORS.len() as u8).collect();
        colors.shuffle(&mut rng);
        let mut doors = Vec::new();
        let mut door_states = Vec::new();
        for k in 1..rooms {
            doors.push(Door {
                cell: (rng.random_range(1..=room_size), k * (room_size + 1)),
                color: colors[k as usize - 1],
                id: 1,
            });
            door_states.push(if rng.random_bool(0.5) {
                DoorState::Open
            } else {
                DoorState::Closed
            });
        }
        let target_door = if doors.is_empty() {
            0
        } else {
            rng.random_range(0..doors.len())
        };
        match task {
            "open" => door_states[target_door] = DoorState::Closed,
            "unlock" => door_states[0] = DoorState::Locked,
            _ => {}
        }

        let mut world = Gridworld {
            room_size,
            rooms,
            objs: Vec::new(),
            doors,
            goal: Goal::GoTo(0),
            window: p.window.unwrap_or(false),
        };
        let door_cells: Vec<Cell> = world.doors.iter().map(|d| d.cell).collect();
        let mut free: Vec<Cell> = Vec::new();
        for r in 1..=room_size {
            for c in 1..world.cols() - 1 {
                let cell = (r, c);
                let beside_door = door_cells.iter().any(|d| manhattan(*d, cell) == 1);
                if c % (room_size + 1) != 0 && !beside_door {
                    free.push(cell);
                }
            }
        }
        if free.len() < n_objs + 1 {
            return Err(EnvError::Generation(format!(
                "{n_objs} objects do not fit in {} free cells",
                free.len()
            )));
        }
        free.shuffle(&mut rng);
        let agent_room = if task == "unlock" { Some(0) } else { None };
        let agent_at = free
            .iter()
            .position(|c| agent_room.is_none_or(|r| world.minigrid(*c) == r))
            .ok_or_else(|| EnvError::Generation("no free cell for the agent".into()))?;
        let agent = free.remove(agent_at);

        let mut kinds: Vec<(ObjKind, u8)> = Vec::new();
        let mut cells: Vec<Cell> = Vec::new();
        if task == "unlock" {
            let at = free
                .iter()
                .position(|c| world.minigrid(*c) == 0)
                .ok_or_else(|| EnvError::Generation("no room for the key".into()))?;
            cells.push(free.remove(at));
            kinds.push((ObjKind::Key, world.doors[0].color));
        }
        while kinds.len() < n_objs.max(kinds.len()) {
            let kind = *ObjKind::ALL.choose(&mut rng).expect("kinds");
            kinds.push((kind, rng.random_range(0..COLORS.len() as u8)));
            cells.push(free.pop().expect("checked capacity"));
        }
        for (i, (kind, color)) in kinds.iter().enumerate() {
            let id = kinds[..i].iter().filter(|k| k == &&(*kind, *color)).count() as u8 + 1;
            world.objs.push(Obj {
                kind: *kind,
                color: *color,
                id,
            });
        }
        let n = world.objs.len();
        world.goal = match task {
            "goto" => Goal::GoTo(rng.random_range(0..n)),
            "pickup" => Goal::Pickup(rng.random_range(0..n)),
            "gotodoor" => Goal::GoToDoor(target_door),
            "open" => Goal::Open(target_door),
            "unlock" => Goal::Open(0),
            "putnext" => {
                let a = rng.random_range(0..n);
                let b = (a + rng.random_range(1..n)) % n;
                Goal::PutNext(a, b)
            }
            other => return Err(EnvError::Config(format!("gridworld has no task type `{other}`"))),
        };
        let state = GridState {
            agent,
            dir: rng.random_range(0..4),
            carrying: None,
            objs: cells.into_iter().map(Some).collect(),
            doors: door_states,
        };
        Ok((world, state))
    }
}

fn strip_article<'a, 'b>(words: &'b [&'a str]) -> &'b [&'a str] {
    match words {
        ["the", rest @ ..] => rest,
        _ => words,
    }
}

impl Domain for Gridworld {
    type State = GridState;
    const KIND: EnvKind = EnvKind::Gridworld;

    fn instance(spec: &TaskSpec) -> Result<(Self, GridState), EnvError> {
        if !TASK_TYPES.contains(&spec.task_type.as_str()) {
            return Err(EnvError::Config(format!(
                "gridworld has no task type `{}`",
                spec.task_type
            )));
        }
        Self::generate(spec)
    }

    fn goal_text(&self) -> String {
        format!("Your goal: {}.", self.goal_clause())
    }

    fn goal_holds(&self, s: &GridState) -> bool {
        match self.goal {
            Goal::GoTo(o) => s.objs[o].is_some() && s.objs[o] == self.front(s),
            Goal::GoToDoor(d) => self.front(s) == Some(self.doors[d].cell),
            Goal::Pickup(o) => s.carrying == Some(o as u8),
            Goal::Open(d) => s.doors[d] == DoorState::Open,
            Goal::PutNext(a, b) => match (s.objs[a], s.objs[b]) {
                (Some(x), Some(y)) => manhattan(x, y) == 1,
                _ => false,
            },
        }
    }

    fn describe(&self, s: &GridState) -> String {
        let mut out = format!(
            "You are in minigrid {}, at {}, facing {}.",
            self.minigrid(s.agent),
            self.at(s.agent),
            DIRS[s.dir as usize]
        );
        match s.carrying {
            Some(o) => out.push_str(&format!(" You are carrying the {}.", self.obj_label(o as usize))),
            None => out.push_str(" You are carrying nothing."),
        }
        out.push_str(&format!(" In front of you is {}.", self.content_text(s, self.front(s))));
        let mut seen = Vec::new();
        for (i, d) in self.doors.iter().enumerate() {
            if self.visible(s, d.cell) {
                seen.push(format!("{} at {}", self.door_label(s, i), self.at(d.cell)));
            }
        }
        for (i, c) in s.objs.iter().enumerate() {
            if let Some(c) = c {
                if self.visible(s, *c) {
                    seen.push(format!(
                        "{} at {} in minigrid {}",
                        self.obj_label(i),
                        self.at(*c),
                        self.minigrid(*c)
                    ));
                }
            }
        }
        if seen.is_empty() {
            out.push_str(" You see no objects.");
        } else {
            out.push_str(&format!(" You see: {}.", seen.join("; ")));
        }
        out
    }

    fn candidate_actions(&self, _s: &GridState) -> Vec<String> {
        let mut out: Vec<String> = ["turn left", "turn right", "move forward", "toggle", "drop"]
            .iter()
            .map(|a| a.to_string())
            .collect();
        for i in 0..self.objs.len() {
            out.push(format!("go to {}", self.obj_label(i)));
            out.push(format!("pick up {}", self.obj_label(i)));
        }
        for i in 0..self.doors.len() {
            let d = self.plain_door_label(i);
            out.push(format!("go to {d}"));
            out.push(format!("go through {d}"));
            out.push(format!("toggle and go through {d}"));
        }
        out
    }

    fn apply(&self, s: &GridState, action: &str) -> Option<(GridState, String)> {
        let words: Vec<&str> = action.split(' ').collect();
        let mut next = s.clone();
        match words.as_slice() {
            ["turn", side @ ("left" | "right")] => {
                next.dir = if *side == "left" {
                    (s.dir + 3) % 4
                } else {
                    (s.dir + 1) % 4
                };
                Some((next, format!("You turn {side}.")))
            }
            ["move", "forward"] => {
                let f = self.front(s)?;
                if !self.passable(s, f, None) {
                    return None;
                }
                next.agent = f;
                Some((next, "You move forward.".into()))
            }
            ["toggle"] => {
                let Content::Door(d) = self.content(s, self.front(s)?) else {
                    return None;
                };
                let name = self.plain_door_label(d);
                let effect = match s.doors[d] {
                    DoorState::Open => {
                        next.doors[d] = DoorState::Closed;
                        format!("You close the {name}.")
                    }
                    DoorState::Closed => {
                        next.doors[d] = DoorState::Open;
                        format!("You open the {name}.")
                    }
                    DoorState::Locked => {
                        if !self.carries_key(s, d) {
                            return None;
                        }
                        next.doors[d] = DoorState::Open;
                        format!("You unlock and open the {name}.")
                    }
                };
                Some((next, effect))
            }
            ["drop"] => {
                let o = s.carrying?;
                let f = self.front(s)?;
                if self.content(s, f) != Content::Empty {
                    return None;
                }
                next.carrying = None;
                next.objs[o as usize] = Some(f);
                Some((next, format!("You drop the {}.", self.obj_label(o as usize))))
            }
            ["pick", "up", rest @ ..] => {
                let o = self.parse_obj(rest)?;
                if s.carrying.is_some() || s.objs[o].is_none() || s.objs[o] != self.front(s) {
                    return None;
                }
                next.carrying = Some(o as u8);
                next.objs[o] = None;
                Some((next, format!("You pick up the {}.", self.obj_label(o))))
            }
            ["go", "to", rest @ ..] => {
                let (target, label) = if let Some(o) = self.parse_obj(rest) {
                    (s.objs[o]?, self.obj_label(o))
                } else {
                    let d = self.parse_door(s, rest)?;
                    (self.doors[d].cell, self.door_label(s, d))
                };
                if self.front(s) == Some(target) {
                    return Some((next, format!("You are already facing the {label}.")));
                }
                let spots: Vec<Cell> = (0..4)
                    .filter_map(|d| step_cell(target, d))
                    .filter(|c| *c == s.agent || self.passable(s, *c, None))
                    .collect();
                let spot = self.nearest(s, &spots, None)?;
                next.agent = spot;
                next.dir = dir_between(spot, target);
                Some((next, format!("You go to the {label}.")))
            }
            ["go", "through", rest @ ..] => {
                let d = self.parse_door(s, rest)?;
                if s.doors[d] != DoorState::Open {
                    return None;
                }
                let moved = self.cross(s, d)?;
                Some((moved, format!("You go through the {}.", self.plain_door_label(d))))
            }
            ["toggle", "and", "go", "through", rest @ ..] => {
                let d = self.parse_door(s, rest)?;
                let effect = match s.doors[d] {
                    DoorState::Open => return None,
                    DoorState::Closed => "open",
                    DoorState::Locked if self.carries_key(s, d) => "unlock",
                    DoorState::Locked => return None,
                };
                let moved = self.cross(s, d)?;
                Some((
                    moved,
                    format!("You {effect} the {} and go through it.", self.plain_door_label(d)),
                ))
            }
            _ => None,
        }
    }

    fn preamble(&self) -> String {
        format!(
            "You are in a grid with {} rows and {} columns made of {} minigrids separated by walls; the outer cells are walls.",
            self.rows(),
            self.cols(),
            self.rooms
        )
    }
}

impl Gridworld {
    fn carries_key(&self, s: &GridState, d: usize) -> bool {
        s.carrying.is_some_and(|o| {
            let o = &self.objs[o as usize];
            o.kind == ObjKind::Key && o.color == self.doors[d].color
        })
    }
}
