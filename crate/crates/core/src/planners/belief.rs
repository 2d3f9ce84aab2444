//! The agent's reconstruction of the world from an observation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::digest::{canonical_json, sha256_hex};
use crate::observation::Observation;
use crate::plan::Plan;
use crate::scene::{Category, ObjectDescriptor, ObjectId, Relation, Scene};
use crate::sim::{oracle_solve, GoalSpec, DEFAULT_MAX_DEPTH};

/// Where to assume goal-relevant objects are when they cannot be seen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HiddenPolicy {
    /// Inside the first closed container (by phrase); gone if there is none.
    InClosedContainer,
    /// Out on the table, as a planner that ignores occlusion would assume.
    OnTable,
}

/// Visible objects plus every goal-relevant object, with missing ones placed
/// according to `policy`.
pub fn belief_scene(obs: &Observation, goal: &GoalSpec, policy: HiddenPolicy) -> Scene {
    let mut objects = obs.visible.clone();
    let mut relations = obs.visible_relations.clone();
    let mut open = obs.container_open.clone();
    let mut taken: Vec<ObjectId> = Vec::new();
    let mut missing: Vec<&ObjectDescriptor> = goal.relevant.iter().filter(|o| !obs.is_visible(&o.id)).collect();
    missing.sort_by(|a, b| (a.phrase(), &a.id).cmp(&(b.phrase(), &b.id)));
    missing.dedup_by(|a, b| a.id == b.id);
    let closed: Option<ObjectId> = obs
        .visible
        .iter()
        .filter(|o| o.category == Category::Container && obs.container_open.get(&o.id) == Some(&false))
        .min_by(|a, b| (a.phrase(), &a.id).cmp(&(b.phrase(), &b.id)))
        .map(|o| o.id.clone());
    for m in missing {
        objects.push(m.clone());
        if m.category == Category::Container {
            open.insert(m.id.clone(), false);
        }
        if policy == HiddenPolicy::InClosedContainer {
            match &closed {
                Some(c) => relations.push(Relation::inside(m.id.clone(), c.clone())),
                None => taken.push(m.id.clone()),
            }
        }
    }
    Scene::from_parts(objects, relations, open, obs.held.clone(), taken)
        .or_else(|_| obs.to_scene())
        .unwrap_or_else(|_| Scene::empty())
}

/// Oracle plans keyed by belief scene and goal.
#[derive(Clone, Debug)]
pub struct OracleMemo {
    plans: BTreeMap<String, Option<Plan>>,
    max_depth: usize,
}

impl Default for OracleMemo {
    fn default() -> Self {
        OracleMemo { plans: BTreeMap::new(), max_depth: DEFAULT_MAX_DEPTH }
    }
}

impl OracleMemo {
    pub fn with_max_depth(max_depth: usize) -> Self {
        OracleMemo { plans: BTreeMap::new(), max_depth }
    }

    pub fn solve(&mut self, scene: &Scene, goal: &GoalSpec) -> Option<Plan> {
        let key = sha256_hex(canonical_json(&(scene, goal)).as_bytes());
        if let Some(p) = self.plans.get(&key) {
            return p.clone();
        }
        let plan = oracle_solve(scene, goal, self.max_depth).ok();
        self.plans.insert(key, plan.clone());
        plan
    }
}
