//! Gripper: a robot with two grippers ferries balls between rooms.

use rand::Rng;

use super::{seed, Domain, EnvError, EnvKind, TaskSpec};

pub const TASK_TYPES: &[&str] = &["transport"];

pub const GRAMMAR: &str = "\
You are a robot with a gripper that can move objects between different rooms. Your name is Robby.
There are three actions defined in this domain:
move <room1> <room2>: This action allows the robot to move from one room to another.
pick <obj> <room> <gripper>: This action allows the robot to pick up an object using the gripper.
drop <obj> <room> <gripper>: This action allows the robot to drop an object that it is carrying.
You have a left and a right gripper. You can also reply with think: <thought> to reason without acting.";

const GRIPPERS: [&str; 2] = ["left", "right"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BallAt {
    Room(u8),
    Gripper(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GripperState {
    robot: u8,
    balls: Vec<BallAt>,
}

#[derive(Debug, Clone)]
pub struct Gripper {
    rooms: u8,
    goal: Vec<u8>,
}

fn room_name(r: u8) -> String {
    format!("room{}", (b'a' + r) as char)
}

impl Gripper {
    fn parse_room(&self, s: &str) -> Option<u8> {
        let c = s.strip_prefix("room")?;
        let b = *c.as_bytes().first()?;
        (c.len() == 1 && b >= b'a' && b < b'a' + self.rooms).then(|| b - b'a')
    }

    fn parse_ball(&self, s: &str) -> Option<usize> {
        let n: usize = s.strip_prefix("ball")?.parse().ok()?;
        (1..=self.goal.len()).contains(&n).then(|| n - 1)
    }

    /// Canonical configuration: all balls and the robot start in rooma, goal
    /// is roomb for every ball. Used by tests and examples.
    pub fn classic(balls: usize) -> (Self, GripperState) {
        (
            Gripper {
                rooms: 2,
                goal: vec![1; balls],
            },
            GripperState {
                robot: 0,
                balls: vec![BallAt::Room(0); balls],
            },
        )
    }
}

impl Domain for Gripper {
    type State = GripperState;
    const KIND: EnvKind = EnvKind::Gripper;

    fn instance(spec: &TaskSpec) -> Result<(Self, GripperState), EnvError> {
        if !TASK_TYPES.contains(&spec.task_type.as_str()) {
            return Err(EnvError::Config(format!(
                "gripper has no task type `{}`",
                spec.task_type
            )));
        }
        let balls = spec.params.balls.unwrap_or(4);
        let rooms = spec.params.rooms.unwrap_or(2);
        if !(1..=12).contains(&balls) {
            return Err(EnvError::Config(format!(
                "gripper balls must be in 1..=12, got {balls}"
            )));
        }
        if !(2..=8).contains(&rooms) {
            return Err(EnvError::Config(format!("gripper rooms must be in 2..=8, got {rooms}")));
        }
        let rooms = rooms as u8;
        let mut rng = seed::rng(spec.seed);
        let robot = rng.random_range(0..rooms);
        let start: Vec<BallAt> = (0..balls).map(|_| BallAt::Room(rng.random_range(0..rooms))).collect();
        let goal: Vec<u8> = (0..balls).map(|_| rng.random_range(0..rooms)).collect();
        Ok((Gripper { rooms, goal }, GripperState { robot, balls: start }))
    }

    fn goal_text(&self) -> String {
        let conds: Vec<String> = self
            .goal
            .iter()
            .enumerate()
            .map(|(i, r)| format!("ball{} is at {}.", i + 1, room_name(*r)))
            .collect();
        format!("The goal is to satisfy the following conditions: {}", conds.join(" "))
    }

    fn goal_holds(&self, s: &GripperState) -> bool {
        s.balls.iter().zip(&self.goal).all(|(b, g)| *b == BallAt::Room(*g))
    }

    fn describe(&self, s: &GripperState) -> String {
        let mut parts = vec![format!("Robby is at {}.", room_name(s.robot))];
        for (i, b) in s.balls.iter().enumerate() {
            parts.push(match b {
                BallAt::Room(r) => format!("ball{} is at {}.", i + 1, room_name(*r)),
                BallAt::Gripper(g) => format!("ball{} is in the {} gripper.", i + 1, GRIPPERS[*g as usize]),
            });
        }
        for (g, name) in GRIPPERS.iter().enumerate() {
            if !s.balls.contains(&BallAt::Gripper(g as u8)) {
                parts.push(format!("The {name} gripper is free."));
            }
        }
        parts.join(" ")
    }

    fn candidate_actions(&self, s: &GripperState) -> Vec<String> {
        let here = room_name(s.robot);
        let mut out = Vec::new();
        for r in 0..self.rooms {
            if r != s.robot {
                out.push(format!("move {here} {}", room_name(r)));
            }
        }
        for i in 0..s.balls.len() {
            for g in GRIPPERS {
                out.push(format!("pick ball{} {here} {g}", i + 1));
                out.push(format!("drop ball{} {here} {g}", i + 1));
            }
        }
        out
    }

    fn apply(&self, s: &GripperState, action: &str) -> Option<(GripperState, String)> {
        let words: Vec<&str> = action.split(' ').collect();
        match words.as_slice() {
            ["move", from, to] => {
                let (from, to) = (self.parse_room(from)?, self.parse_room(to)?);
                if from != s.robot || from == to {
                    return None;
                }
                let mut next = s.clone();
                next.robot = to;
                Some((next, format!("You move from {} to {}.", room_name(from), room_name(to))))
            }
            [verb @ ("pick" | "drop"), ball, room, gripper] => {
                let ball = self.parse_ball(ball)?;
                let room = self.parse_room(room)?;
                let g = GRIPPERS.iter().position(|n| n == gripper)? as u8;
                if room != s.robot {
                    return None;
                }
                let mut next = s.clone();
                if *verb == "pick" {
                    if s.balls[ball] != BallAt::Room(room) || s.balls.contains(&BallAt::Gripper(g)) {
                        return None;
                    }
                    next.balls[ball] = BallAt::Gripper(g);
                    Some((
                        next,
                        format!(
                            "You pick up ball{} in {} with the {} gripper.",
                            ball + 1,
                            room_name(room),
                            gripper
                        ),
                    ))
                } else {
                    if s.balls[ball] != BallAt::Gripper(g) {
                        return None;
                    }
                    next.balls[ball] = BallAt::Room(room);
                    Some((
                        next,
                        format!(
                            "You drop ball{} in {} from the {} gripper.",
                            ball + 1,
                            room_name(room),
                            gripper
                        ),
                    ))
                }
            }
            _ => None,
        }
    }

    fn preamble(&self) -> String {
        let names: Vec<String> = (0..self.rooms).map(room_name).collect();
        format!("There are {} rooms: {}.", self.rooms, names.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::search::bfs;

    #[test]
    fn classic_four_ball_plan_is_eleven_steps() {
        let (d, s) = Gripper::classic(4);
        let plan = bfs(&d, &s, 1_000_000).unwrap();
        // Two round trips carrying two balls each: 4 picks, 4 drops, 3 moves.
        assert_eq!(plan.len(), 11);
    }

    #[test]
    fn pick_requires_free_gripper_and_same_room() {
        let (d, s) = Gripper::classic(3);
        let (s1, _) = d.apply(&s, "pick ball1 rooma left").unwrap();
        assert!(d.apply(&s1, "pick ball2 rooma left").is_none());
        assert!(d.apply(&s1, "pick ball2 roomb right").is_none());
        assert!(d.apply(&s1, "drop ball1 rooma right").is_none());
        assert!(d.apply(&s1, "move roomb rooma").is_none());
        assert!(d.apply(&s1, "move rooma roomc").is_none());
        assert!(d.apply(&s1, "pick ball9 rooma right").is_none());
    }

    #[test]
    fn describe_lists_gripper_contents() {
        let (d, s) = Gripper::classic(2);
        let (s1, effect) = d.apply(&s, "pick ball2 rooma right").unwrap();
        assert_eq!(effect, "You pick up ball2 in rooma with the right gripper.");
        assert_eq!(
            d.describe(&s1),
            "Robby is at rooma. ball1 is at rooma. ball2 is in the right gripper. The left gripper is free."
        );
    }
}
