//! Closed-loop vision-language task planning over a symbolic tabletop.
//!
//! This crate is `no_std` (it needs `alloc`). It holds everything that is a
//! pure function of its inputs: the scene model, the primitive skills, the
//! plan grammar, the seeded task suite with its oracle solver, affordance
//! models, the planners and the episode executor. Rendering, networking,
//! file IO and the CLI live in the `planbench` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod affordance;
pub mod chat;
pub mod digest;
pub mod executor;
pub mod observation;
pub mod plan;
pub mod planners;
pub mod scene;
pub mod sim;
pub mod skills;

pub use observation::{observe, Observation, Observer, RenderStyle, TextObserver};
pub use plan::{format_invocation, parse_plan, parse_step, resolve_object, ParseOutcome, Plan, StepParse};
pub use scene::{
    scene_diff, visible_objects, Category, Cell, Color, ObjectDescriptor, ObjectId, Relation, Scene, SceneChange,
    SceneError, Size,
};
pub use skills::{effect, precondition, Reason, Skill, SkillInvocation, Verdict};
