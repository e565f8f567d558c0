//! Blocksworld with a single arm.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{seed, Domain, EnvError, EnvKind, TaskSpec};

pub const TASK_TYPES: &[&str] = &["restack"];

pub const GRAMMAR: &str = "\
The robot has four actions: pickup, putdown, stack, and unstack. The domain assumes a world where there are a set of blocks that can be stacked on top of each other, an arm that can hold one block at a time, and a table where blocks can be placed.
The actions defined in this domain include:
pickup <block>: pick up a clear block
putdown <block>: put down a block on the table
stack <block> <block>: stack a block on top of another block.
unstack <block> <block>: unstack a block from on top of another block
You can also reply with think: <thought> to reason without acting.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pos {
    Table,
    On(u8),
    Held,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlocksState {
    pos: Vec<Pos>,
}

impl BlocksState {
    fn clear(&self, b: usize) -> bool {
        self.pos[b] != Pos::Held && !self.pos.contains(&Pos::On(b as u8))
    }

    fn holding(&self) -> Option<usize> {
        self.pos.iter().position(|p| *p == Pos::Held)
    }
}

#[derive(Debug, Clone)]
pub struct Blocksworld {
    /// (upper, lower) pairs that must hold.
    goal: Vec<(u8, u8)>,
    blocks: usize,
}

fn name(b: usize) -> String {
    format!("b{}", b + 1)
}

/// Random tower configuration as a position vector.
fn random_towers(n: usize, rng: &mut impl Rng) -> Vec<Pos> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pos = vec![Pos::Table; n];
    let mut below: Option<usize> = None;
    for b in order {
        pos[b] = match below {
            Some(l) if rng.random_bool(0.6) => Pos::On(l as u8),
            _ => Pos::Table,
        };
        below = Some(b);
    }
    pos
}

impl Blocksworld {
    fn parse_block(&self, s: &str) -> Option<usize> {
        let n: usize = s.strip_prefix('b')?.parse().ok()?;
        (1..=self.blocks).contains(&n).then(|| n - 1)
    }

    /// Instance from explicit positions; `goal` lists (upper, lower) pairs.
    pub fn from_parts(pos: Vec<Pos>, goal: Vec<(u8, u8)>) -> (Self, BlocksState) {
        (
            Blocksworld {
                blocks: pos.len(),
                goal,
            },
            BlocksState { pos },
        )
    }
}

impl Domain for Blocksworld {
    type State = BlocksState;
    const KIND: EnvKind = EnvKind::Blocksworld;

    fn instance(spec: &TaskSpec) -> Result<(Self, BlocksState), EnvError> {
        if !TASK_TYPES.contains(&spec.task_type.as_str()) {
            return Err(EnvError::Config(format!(
                "blocksworld has no task type `{}`",
                spec.task_type
            )));
        }
        let n = spec.params.blocks.unwrap_or(4) as usize;
        if !(2..=8).contains(&n) {
            return Err(EnvError::Config(format!(
                "blocksworld blocks must be in 2..=8, got {n}"
            )));
        }
        let mut rng = seed::rng(spec.seed);
        let start = random_towers(n, &mut rng);
        let mut goal = Vec::new();
        while goal.is_empty() {
            goal = random_towers(n, &mut rng)
                .iter()
                .enumerate()
                .filter_map(|(b, p)| match p {
                    Pos::On(l) => Some((b as u8, *l)),
                    _ => None,
                })
                .collect();
        }
        Ok((Blocksworld { goal, blocks: n }, BlocksState { pos: start }))
    }

    fn goal_text(&self) -> String {
        let conds: Vec<String> = self
            .goal
            .iter()
            .map(|(u, l)| format!("{} is on {}.", name(*u as usize), name(*l as usize)))
            .collect();
        format!("The goal is to satisfy the following conditions: {}", conds.join(" "))
    }

    fn goal_holds(&self, s: &BlocksState) -> bool {
        self.goal.iter().all(|(u, l)| s.pos[*u as usize] == Pos::On(*l))
    }

    fn describe(&self, s: &BlocksState) -> String {
        let mut parts = Vec::new();
        for (b, p) in s.pos.iter().enumerate() {
            match p {
                Pos::Table => parts.push(format!("{} is on the table.", name(b))),
                Pos::On(l) => parts.push(format!("{} is on {}.", name(b), name(*l as usize))),
                Pos::Held => {}
            }
        }
        for b in 0..s.pos.len() {
            if s.clear(b) {
                parts.push(format!("{} is clear.", name(b)));
            }
        }
        parts.push(match s.holding() {
            Some(b) => format!("You are holding {}.", name(b)),
            None => "The arm is empty.".into(),
        });
        parts.join(" ")
    }

    fn candidate_actions(&self, _s: &BlocksState) -> Vec<String> {
        let mut out = Vec::new();
        for a in 0..self.blocks {
            out.push(format!("pickup {}", name(a)));
            out.push(format!("putdown {}", name(a)));
            for b in 0..self.blocks {
                if a != b {
                    out.push(format!("stack {} {}", name(a), name(b)));
                    out.push(format!("unstack {} {}", name(a), name(b)));
                }
            }
        }
        out
    }

    fn apply(&self, s: &BlocksState, action: &str) -> Option<(BlocksState, String)> {
        let words: Vec<&str> = action.split(' ').collect();
        let mut next = s.clone();
        match words.as_slice() {
            ["pickup" | "pick-up", b] => {
                let b = self.parse_block(b)?;
                if s.holding().is_some() || s.pos[b] != Pos::Table || !s.clear(b) {
                    return None;
                }
                next.pos[b] = Pos::Held;
                Some((next, format!("You pick up {}.", name(b))))
            }
            ["putdown" | "put-down", b] => {
                let b = self.parse_block(b)?;
                if s.pos[b] != Pos::Held {
                    return None;
                }
                next.pos[b] = Pos::Table;
                Some((next, format!("You put down {} on the table.", name(b))))
            }
            ["stack", a, b] => {
                let (a, b) = (self.parse_block(a)?, self.parse_block(b)?);
                if a == b || s.pos[a] != Pos::Held || !s.clear(b) {
                    return None;
                }
                next.pos[a] = Pos::On(b as u8);
                Some((next, format!("You stack {} on {}.", name(a), name(b))))
            }
            ["unstack", a, b] => {
                let (a, b) = (self.parse_block(a)?, self.parse_block(b)?);
                if s.holding().is_some() || s.pos[a] != Pos::On(b as u8) || !s.clear(a) {
                    return None;
                }
                next.pos[a] = Pos::Held;
                Some((next, format!("You unstack {} from {}.", name(a), name(b))))
            }
            _ => None,
        }
    }
}
