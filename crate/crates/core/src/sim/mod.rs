//! Seeded tabletop task suite, goal predicates, stochastic skill execution
//! with scripted disturbances, and the breadth-first oracle.

mod generate;
pub mod goal;
pub mod oracle;
pub mod random;
mod registry;
mod run;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::scene::{ObjectId, Scene};
use crate::skills::Skill;

pub use generate::{feedback_scenarios, generate_episode, GenerationError};
pub use goal::{goal_satisfied, GoalMode, GoalPredicate, GoalSpec, LetterOrder};
pub use oracle::{oracle_solve, Unsolvable, DEFAULT_MAX_DEPTH};
pub use registry::{benchmark_tasks, registry, task, Split, Suite, TaskParams, TaskSpec};
pub use run::{AppliedDisturbance, EpisodeRun, StepReport, StepResult};

/// Per-skill Bernoulli failure probabilities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Noise(pub BTreeMap<Skill, f64>);

impl Noise {
    pub fn none() -> Self {
        Noise::default()
    }

    /// Same failure probability for pick and place.
    pub fn pick_place(p: f64) -> Self {
        let mut m = BTreeMap::new();
        m.insert(Skill::PickUp, p);
        m.insert(Skill::Place, p);
        Noise(m)
    }

    pub fn failure_probability(&self, skill: Skill) -> f64 {
        self.0.get(&skill).copied().unwrap_or(0.0).clamp(0.0, 1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.values().all(|p| *p <= 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Condition {
    /// At least `at_least` of `objects` are directly inside `container`.
    CountIn { container: ObjectId, objects: Vec<ObjectId>, at_least: usize },
    /// `object` is in the gripper and at least `step` steps have run.
    HeldFromStep { object: ObjectId, step: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "trigger", rename_all = "snake_case")]
pub enum Trigger {
    AfterStep { step: u32 },
    OnCondition { condition: Condition },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum DisturbanceAction {
    Relocate {
        object: ObjectId,
        dest: ObjectId,
    },
    /// Put the object back where it started the episode.
    Revert {
        object: ObjectId,
    },
    /// A person takes the object out of the gripper.
    ExternalTake {
        object: ObjectId,
    },
    None,
}

/// Fires at most once per episode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisturbanceEvent {
    pub trigger: Trigger,
    pub action: DisturbanceAction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub task_id: String,
    pub seed: u64,
    pub rng_seed: u64,
    pub scene: Scene,
    pub goal: GoalSpec,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceEvent>,
    #[serde(default)]
    pub noise: Noise,
}
