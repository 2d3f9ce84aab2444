//! Step-selection strategies: the vision-language planner, an LLM-only
//! variant, and two grounded baselines that fuse language scores with
//! affordances.

mod belief;
mod candidates;
mod gd;
mod prompt;
mod saycan;
mod scorers;
mod vila;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::observation::Observation;
use crate::plan::{Plan, StructureError};
use crate::scene::Scene;
use crate::sim::GoalSpec;
use crate::skills::SkillInvocation;

pub use belief::{belief_scene, HiddenPolicy, OracleMemo};
pub use candidates::{candidate_text, enumerate_candidates, enumerate_candidates_with};
pub use gd::{GdPlanner, DEFAULT_BEAM_WIDTH};
pub use prompt::{ObservationPart, PromptSpec, PROMPT_TEMPLATE, PROMPT_VERSION};
pub use saycan::SayCanPlanner;
pub use scorers::{BeliefOracleScorer, FixedScorer, LmScorer, LmTokenScorer, TrieMarginalScorer, UniformScorer};
pub use vila::{PromptPlanner, PromptPlannerKind};

/// A candidate or chosen next action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Choice {
    Step { invocation: SkillInvocation },
    Done,
}

impl Choice {
    pub fn step(inv: SkillInvocation) -> Self {
        Choice::Step { invocation: inv }
    }

    pub fn invocation(&self) -> Option<&SkillInvocation> {
        match self {
            Choice::Step { invocation } => Some(invocation),
            Choice::Done => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "failure", rename_all = "snake_case")]
pub enum DecisionFailure {
    Structure {
        error: StructureError,
    },
    EmptyResponse,
    /// The backend returned an error instead of text.
    Backend {
        message: String,
    },
    NoFeasibleAction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub choice: Choice,
    pub text: String,
    pub lm_score: f64,
    pub affordance: f64,
    pub product: f64,
}

/// Exactly one of `chosen` and `failure` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerDecision {
    pub chosen: Option<Choice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<DecisionFailure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_plan: Option<Plan>,
    #[serde(default)]
    pub raw_response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_key: Option<String>,
    /// Phrases from the response's inventory line, if it had one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inventory: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_scores: Option<Vec<CandidateScore>>,
}

impl PlannerDecision {
    pub fn chose(choice: Choice) -> Self {
        PlannerDecision {
            chosen: Some(choice),
            failure: None,
            full_plan: None,
            raw_response: String::new(),
            prompt_key: None,
            inventory: None,
            candidate_scores: None,
        }
    }

    pub fn failed(failure: DecisionFailure) -> Self {
        PlannerDecision { chosen: None, failure: Some(failure), ..PlannerDecision::chose(Choice::Done) }
    }
}

/// One previously executed step as the planner sees it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub text: String,
    pub failed: bool,
}

impl HistoryEntry {
    /// Prompt line: the step text, marked when it did not succeed.
    pub fn line(&self) -> String {
        if self.failed {
            alloc::format!("{} (failed)", self.text)
        } else {
            self.text.clone()
        }
    }
}

pub struct PlanningInput<'a> {
    pub observation: &'a Observation,
    pub goal: &'a GoalSpec,
    pub goal_image: Option<&'a [u8]>,
    pub history: &'a [HistoryEntry],
    /// The true scene. Only affordance models may look at it; language
    /// planners see the observation alone.
    pub world: &'a Scene,
}

pub trait Planner {
    fn name(&self) -> &str;

    /// Name of the model backend, for transcripts.
    fn backend_name(&self) -> &str {
        "none"
    }

    fn decide(&mut self, input: &PlanningInput<'_>) -> PlannerDecision;

    /// Whether decisions carry a full plan usable for open-loop execution.
    fn supports_full_plan(&self) -> bool {
        false
    }
}

impl<P: Planner + ?Sized> Planner for alloc::boxed::Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn backend_name(&self) -> &str {
        (**self).backend_name()
    }

    fn decide(&mut self, input: &PlanningInput<'_>) -> PlannerDecision {
        (**self).decide(input)
    }

    fn supports_full_plan(&self) -> bool {
        (**self).supports_full_plan()
    }
}

/// Objects a response may name: what is visible plus what the instruction
/// is about.
pub(crate) fn vocabulary(input: &PlanningInput<'_>) -> Vec<crate::scene::ObjectDescriptor> {
    let mut v = input.observation.visible.clone();
    for o in &input.goal.relevant {
        if !v.iter().any(|x| x.id == o.id) {
            v.push(o.clone());
        }
    }
    v
}
