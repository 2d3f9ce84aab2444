//! Planners that ask a chat model for a whole plan and commit to its first
//! step.

use alloc::string::String;
use alloc::vec::Vec;

use crate::chat::{cache_key, BackendContext, ChatBackend};
use crate::plan::{parse_inventory, parse_plan, ParseOutcome};
use crate::sim::GoalMode;

use super::prompt::{ObservationPart, PromptSpec};
use super::{vocabulary, Choice, DecisionFailure, Planner, PlannerDecision, PlanningInput};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PromptPlannerKind {
    /// Sees the camera image (scene text when no image is attached) and
    /// the goal image when there is one.
    Vila,
    /// Text only: the scene description or nothing at all.
    LlmOnly { scene_text: bool },
}

pub struct PromptPlanner<B> {
    pub backend: B,
    pub kind: PromptPlannerKind,
    pub model: String,
    pub max_tokens: u32,
}

impl<B: ChatBackend> PromptPlanner<B> {
    pub fn vila(backend: B, model: impl Into<String>) -> Self {
        PromptPlanner { backend, kind: PromptPlannerKind::Vila, model: model.into(), max_tokens: 1024 }
    }

    pub fn llm_only(backend: B, model: impl Into<String>, scene_text: bool) -> Self {
        PromptPlanner {
            backend,
            kind: PromptPlannerKind::LlmOnly { scene_text },
            model: model.into(),
            max_tokens: 1024,
        }
    }

    pub fn prompt(&self, input: &PlanningInput<'_>) -> PromptSpec {
        let obs = input.observation;
        let part = match (self.kind, &obs.image) {
            (PromptPlannerKind::Vila, Some(png)) => ObservationPart::image(png.clone()),
            (PromptPlannerKind::Vila, None) | (PromptPlannerKind::LlmOnly { scene_text: true }, _) => {
                ObservationPart::SceneText { text: obs.text.clone() }
            }
            (PromptPlannerKind::LlmOnly { scene_text: false }, _) => ObservationPart::None,
        };
        let history: Vec<String> = input.history.iter().map(|h| h.line()).collect();
        let mut spec = PromptSpec::new(&input.goal.instruction, history, part);
        if self.kind == PromptPlannerKind::Vila && input.goal.mode != GoalMode::Language {
            spec.goal_image = input.goal_image.map(|g| ObservationPart::image(g.to_vec()));
        }
        spec
    }
}

impl<B: ChatBackend> Planner for PromptPlanner<B> {
    fn name(&self) -> &str {
        match self.kind {
            PromptPlannerKind::Vila => "vila",
            PromptPlannerKind::LlmOnly { .. } => "llm",
        }
    }

    fn backend_name(&self) -> &str {
        self.backend.name()
    }

    fn supports_full_plan(&self) -> bool {
        true
    }

    fn decide(&mut self, input: &PlanningInput<'_>) -> PlannerDecision {
        let req = self.prompt(input).to_request(&self.model, self.max_tokens);
        let key = cache_key(&req);
        let ctx = BackendContext { observation: input.observation, goal: input.goal };
        let text = match self.backend.complete(&req, &ctx) {
            Ok(t) => t,
            Err(e) => {
                let mut d = PlannerDecision::failed(DecisionFailure::Backend { message: alloc::format!("{}", e) });
                d.prompt_key = Some(key);
                return d;
            }
        };
        let vocab = vocabulary(input);
        let mut d = match parse_plan(&text, &vocab) {
            ParseOutcome::Parsed(plan) => {
                let choice = plan.steps.first().cloned().map(Choice::step).unwrap_or(Choice::Done);
                let mut d = PlannerDecision::chose(choice);
                d.full_plan = Some(plan);
                d
            }
            ParseOutcome::StructureError(error) => PlannerDecision::failed(DecisionFailure::Structure { error }),
            ParseOutcome::EmptyResponse => PlannerDecision::failed(DecisionFailure::EmptyResponse),
        };
        d.inventory = parse_inventory(&text);
        d.raw_response = text;
        d.prompt_key = Some(key);
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::{OracleBacked, Scripted};
    use crate::observation::observe;
    use crate::plan::StructureReason;
    use crate::sim::{generate_episode, oracle_solve, DEFAULT_MAX_DEPTH};
    use crate::skills::SkillInvocation;

    fn decide<B: ChatBackend>(p: &mut PromptPlanner<B>, task: &str, seed: u64) -> PlannerDecision {
        let ep = generate_episode(task, seed).unwrap();
        let obs = observe(&ep.scene);
        p.decide(&PlanningInput { observation: &obs, goal: &ep.goal, goal_image: None, history: &[], world: &ep.scene })
    }

    #[test]
    fn oracle_backend_picks_oracle_head() {
        let ep = generate_episode("bb_one_bowl", 3).unwrap();
        let plan = oracle_solve(&ep.scene, &ep.goal, DEFAULT_MAX_DEPTH).unwrap();
        let d = decide(&mut PromptPlanner::vila(OracleBacked::new(), "m"), "bb_one_bowl", 3);
        assert_eq!(d.chosen, Some(Choice::step(plan.steps[0].clone())));
        assert_eq!(d.full_plan.unwrap().steps, plan.steps);
        assert!(d.inventory.is_some());
    }

    #[test]
    fn out_of_grammar_step_is_structure_failure() {
        let d = decide(&mut PromptPlanner::vila(Scripted::new(["1. wipe table"]), "m"), "bb_matching", 0);
        assert!(d.chosen.is_none());
        assert!(matches!(
            d.failure,
            Some(DecisionFailure::Structure { ref error }) if error.reason == StructureReason::NoMatchingSkill
        ));
    }

    #[test]
    fn empty_response() {
        let d = decide(&mut PromptPlanner::llm_only(Scripted::new([""]), "m", false), "bb_matching", 0);
        assert_eq!(d.failure, Some(DecisionFailure::EmptyResponse));
    }

    #[test]
    fn scripted_valid_plan() {
        let ep = generate_episode("bb_pick_place", 0).unwrap();
        let block = ep.goal.relevant[0].phrase();
        let bowl = ep.goal.relevant[1].phrase();
        let text = alloc::format!("Plan:\n1. pick up the {}\n2. place the {} in the {}\n3. done", block, block, bowl);
        let d = decide(&mut PromptPlanner::llm_only(Scripted::new([text]), "m", true), "bb_pick_place", 0);
        assert_eq!(d.chosen, Some(Choice::step(SkillInvocation::pick_up(ep.goal.relevant[0].id.clone()))));
    }
}
