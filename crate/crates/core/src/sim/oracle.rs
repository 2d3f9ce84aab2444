//! Breadth-first oracle over symbolic states.
//!
//! Successors are expanded in lexicographic order of their formatted step
//! text and each state keeps the first path that reached it, so the first
//! goal state found yields the lexicographically smallest shortest plan.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::plan::{format_invocation, Plan};
use crate::scene::{Category, Scene, WorldState};
use crate::skills::{self, Action, Skill, SkillInvocation};

use super::goal::GoalSpec;

pub const DEFAULT_MAX_DEPTH: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no plan within {max_depth} steps")]
pub struct Unsolvable {
    pub max_depth: usize,
}

/// Every type-correct action over the scene's objects, sorted by text.
/// `wait` is left out: it never shortens a plan.
fn action_table(scene: &Scene) -> Vec<(String, Action)> {
    let objs = scene.objects();
    let n = objs.len() as u16;
    let mut out = Vec::new();
    let mut push = |act: Action| {
        let text = format_invocation(&act.to_invocation(scene), objs);
        out.push((text, act));
    };
    for a in 0..n {
        let oa = &objs[a as usize];
        if oa.is_graspable() {
            push(Action { skill: Skill::PickUp, a, b: 0 });
            for b in 0..n {
                let ob = &objs[b as usize];
                if a != b && (ob.category.is_receptacle() || ob.category.is_surface()) {
                    push(Action { skill: Skill::Place, a, b });
                }
                if a != b && oa.category == Category::Bowl && ob.category.is_receptacle() {
                    push(Action { skill: Skill::Pour, a, b });
                }
            }
        }
        if oa.category == Category::Container {
            push(Action { skill: Skill::Open, a, b: 0 });
            push(Action { skill: Skill::Close, a, b: 0 });
        }
    }
    out.sort();
    out
}

/// Shortest plan from `scene` to `goal`, ties broken by step text.
pub fn oracle_solve(scene: &Scene, goal: &GoalSpec, max_depth: usize) -> Result<Plan, Unsolvable> {
    let finish = |mut steps: Vec<SkillInvocation>, last: &Scene| {
        if goal.needs_wait_tail(last) {
            steps.push(SkillInvocation::wait());
        }
        Plan { steps, terminated: true }
    };
    if goal.search_target(scene) {
        return Ok(finish(Vec::new(), scene));
    }
    let actions = action_table(scene);
    // (state, parent node, action index, depth)
    let mut nodes: Vec<(WorldState, usize, usize, usize)> = alloc::vec![(scene.state().clone(), usize::MAX, 0, 0)];
    let mut seen: BTreeSet<WorldState> = BTreeSet::new();
    seen.insert(scene.state().clone());
    let mut head = 0;
    while head < nodes.len() {
        let depth = nodes[head].3;
        if depth >= max_depth {
            head += 1;
            continue;
        }
        let current = scene.with_state(nodes[head].0.clone());
        for (k, (_, act)) in actions.iter().enumerate() {
            if skills::check(&current, *act).is_err() {
                continue;
            }
            let next = skills::apply(&current, *act);
            if !seen.insert(next.state().clone()) {
                continue;
            }
            if goal.search_target(&next) {
                let mut path = alloc::vec![*act];
                let mut cur = head;
                while nodes[cur].1 != usize::MAX {
                    path.push(actions[nodes[cur].2].1);
                    cur = nodes[cur].1;
                }
                path.reverse();
                let steps = path.iter().map(|a| a.to_invocation(scene)).collect();
                return Ok(finish(steps, &next));
            }
            nodes.push((next.state().clone(), head, k, depth + 1));
        }
        head += 1;
    }
    Err(Unsolvable { max_depth })
}
