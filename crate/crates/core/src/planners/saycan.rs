//! Candidate scoring by language usefulness times affordance.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::affordance::Affordance;

use super::candidates::{candidate_text, enumerate_candidates_with};
use super::scorers::LmScorer;
use super::{vocabulary, CandidateScore, DecisionFailure, Planner, PlannerDecision, PlanningInput};

pub struct SayCanPlanner {
    scorer: Box<dyn LmScorer>,
    affordance: Box<dyn Affordance>,
    name: String,
}

impl SayCanPlanner {
    pub fn new(scorer: Box<dyn LmScorer>, affordance: Box<dyn Affordance>) -> Self {
        let name = alloc::format!("saycan/{}/{}", scorer.name(), affordance.name());
        SayCanPlanner { scorer, affordance, name }
    }
}

impl Planner for SayCanPlanner {
    fn name(&self) -> &str {
        &self.name
    }

    /// Argmax of `lm × affordance`; the earliest candidate wins ties.
    fn decide(&mut self, input: &PlanningInput<'_>) -> PlannerDecision {
        let choices = enumerate_candidates_with(input.observation, &input.goal.relevant);
        let vocab = vocabulary(input);
        let texts: Vec<String> = choices.iter().map(|c| candidate_text(c, &vocab)).collect();
        let lm = self.scorer.score(input, &choices, &texts);
        let mut scores = Vec::with_capacity(choices.len());
        let mut best: Option<(usize, f64)> = None;
        for (k, c) in choices.iter().enumerate() {
            let affordance = self.affordance.score(input.world, c);
            let product = lm[k] * affordance;
            if product > 0.0 && best.is_none_or(|(_, b)| product > b) {
                best = Some((k, product));
            }
            scores.push(CandidateScore {
                choice: c.clone(),
                text: texts[k].clone(),
                lm_score: lm[k],
                affordance,
                product,
            });
        }
        let mut d = match best {
            Some((k, _)) => PlannerDecision::chose(choices[k].clone()),
            None => PlannerDecision::failed(DecisionFailure::NoFeasibleAction),
        };
        d.candidate_scores = Some(scores);
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affordance::{Constant, GroundTruth};
    use crate::observation::observe;
    use crate::planners::{Choice, FixedScorer};
    use crate::scene::{Category, Cell, Color, ObjectDescriptor, Scene};
    use crate::sim::{GoalPredicate, GoalSpec};
    use crate::skills::SkillInvocation;

    struct Table(Vec<(&'static str, f64)>);

    impl Affordance for Table {
        fn name(&self) -> &str {
            "table"
        }
        fn score(&self, scene: &Scene, c: &Choice) -> f64 {
            let t = candidate_text(c, scene.objects());
            self.0.iter().find(|(k, _)| *k == t).map(|(_, v)| *v).unwrap_or(0.0)
        }
    }

    fn setup() -> (Scene, GoalSpec) {
        let s = Scene::builder()
            .object(ObjectDescriptor::new("block_0", Category::Block, Color::Red, Cell::new(0, 0)))
            .object(ObjectDescriptor::new("block_1", Category::Block, Color::Blue, Cell::new(1, 0)))
            .build()
            .unwrap();
        (s, GoalSpec::language("stack all the blocks", GoalPredicate::SingleTower { warm_only: false }, Vec::new()))
    }

    fn run(p: &mut SayCanPlanner, s: &Scene, g: &GoalSpec) -> PlannerDecision {
        let obs = observe(s);
        p.decide(&PlanningInput { observation: &obs, goal: g, goal_image: None, history: &[], world: s })
    }

    #[test]
    fn product_argmax() {
        let (s, g) = setup();
        let lm = FixedScorer::new(&[("pick up red block", 0.6), ("pick up blue block", 0.4)]);
        let aff = Table(alloc::vec![("pick up red block", 0.0), ("pick up blue block", 0.9)]);
        let d = run(&mut SayCanPlanner::new(Box::new(lm), Box::new(aff)), &s, &g);
        assert_eq!(d.chosen, Some(Choice::step(SkillInvocation::pick_up("block_1"))));
    }

    #[test]
    fn ties_go_to_earlier_candidate() {
        let (s, g) = setup();
        let lm = FixedScorer::new(&[("pick up red block", 0.5), ("pick up blue block", 0.5)]);
        let d = run(&mut SayCanPlanner::new(Box::new(lm), Box::new(GroundTruth)), &s, &g);
        assert_eq!(d.chosen, Some(Choice::step(SkillInvocation::pick_up("block_0"))));
    }

    #[test]
    fn all_zero_is_no_feasible_action() {
        let (s, g) = setup();
        let lm = FixedScorer::new(&[("pick up red block", 0.5)]);
        let d = run(&mut SayCanPlanner::new(Box::new(lm), Box::new(Constant(0.0))), &s, &g);
        assert_eq!(d.failure, Some(DecisionFailure::NoFeasibleAction));
        assert!(d.chosen.is_none());
        assert_eq!(d.candidate_scores.unwrap().len(), 4);
    }
}
