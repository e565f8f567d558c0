use std::collections::{HashMap, VecDeque};

use super::{normalize_action, Domain};

/// Upper bound on expanded states for generation-time solvability checks.
pub const DEFAULT_STATE_LIMIT: usize = 200_000;

/// Breadth-first search over the domain's state graph. Returns the shortest
/// action list reaching the goal; an empty list if the goal already holds.
pub(crate) fn bfs<D: Domain>(domain: &D, start: &D::State, limit: usize) -> Result<Vec<String>, String> {
    if domain.goal_holds(start) {
        return Ok(Vec::new());
    }
    // state -> (parent state, action)
    let mut parents: HashMap<D::State, Option<(D::State, String)>> = HashMap::new();
    parents.insert(start.clone(), None);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(state) = queue.pop_front() {
        for action in domain.candidate_actions(&state) {
            let action = normalize_action(&action);
            let Some((next, _)) = domain.apply(&state, &action) else {
                continue;
            };
            if parents.contains_key(&next) {
                continue;
            }
            parents.insert(next.clone(), Some((state.clone(), action)));
            if domain.goal_holds(&next) {
                return Ok(unwind(&parents, next));
            }
            if parents.len() > limit {
                return Err(format!("search exceeded {limit} states"));
            }
            queue.push_back(next);
        }
    }
    Err(format!("goal unreachable ({} states explored)", parents.len()))
}

fn unwind<S: Clone + Eq + std::hash::Hash>(parents: &HashMap<S, Option<(S, String)>>, mut state: S) -> Vec<String> {
    let mut plan = Vec::new();
    while let Some(Some((prev, action))) = parents.get(&state) {
        plan.push(action.clone());
        state = prev.clone();
    }
    plan.reverse();
    plan
}
