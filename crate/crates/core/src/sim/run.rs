//! Stochastic execution of one episode.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scene::{Category, Scene, Support};
use crate::skills::{self, Action, Reason, Skill, SkillInvocation};

use super::goal::goal_satisfied;
use super::{Condition, DisturbanceAction, DisturbanceEvent, Episode, Trigger};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum StepResult {
    Ok,
    /// Nothing changed; the skill was not attempted.
    PreconditionViolated {
        reason: Reason,
    },
    /// The skill was attempted and failed; nothing changed.
    ExecutionFailed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedDisturbance {
    pub event: usize,
    pub action: DisturbanceAction,
    /// False when the action found nothing to do.
    pub changed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub result: StepResult,
    pub disturbances: Vec<AppliedDisturbance>,
}

/// Live state of one episode: the true scene, the noise stream and which
/// disturbances have already fired.
#[derive(Clone, Debug)]
pub struct EpisodeRun {
    episode: Episode,
    scene: Scene,
    fired: Vec<bool>,
    rng: ChaCha8Rng,
    steps: u32,
}

impl EpisodeRun {
    pub fn new(episode: &Episode) -> Self {
        EpisodeRun {
            scene: episode.scene.clone(),
            fired: alloc::vec![false; episode.disturbances.len()],
            rng: ChaCha8Rng::seed_from_u64(episode.rng_seed),
            steps: 0,
            episode: episode.clone(),
        }
    }

    pub fn episode(&self) -> &Episode {
        &self.episode
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    /// Steps executed so far, including failed ones.
    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn goal_satisfied(&self) -> bool {
        goal_satisfied(&self.scene, &self.episode.goal)
    }

    /// Runs one skill. Every non-wait skill whose precondition holds draws
    /// exactly one number from the noise stream, so runs with equal seeds and
    /// equal inputs stay in lockstep. Disturbances are checked afterwards.
    pub fn step(&mut self, inv: &SkillInvocation) -> StepReport {
        self.steps += 1;
        let result = match Action::bind(&self.scene, inv).and_then(|a| skills::check(&self.scene, a).map(|_| a)) {
            Err(reason) => StepResult::PreconditionViolated { reason },
            Ok(act) => {
                let failed = if act.skill == Skill::Wait {
                    false
                } else {
                    let u: f64 = self.rng.gen();
                    u < self.episode.noise.failure_probability(act.skill)
                };
                if failed {
                    StepResult::ExecutionFailed
                } else {
                    self.scene = skills::apply(&self.scene, act);
                    StepResult::Ok
                }
            }
        };
        let disturbances = self.fire_disturbances();
        StepReport { result, disturbances }
    }

    fn fire_disturbances(&mut self) -> Vec<AppliedDisturbance> {
        let mut out = Vec::new();
        for k in 0..self.episode.disturbances.len() {
            if self.fired[k] || !self.triggered(&self.episode.disturbances[k]) {
                continue;
            }
            self.fired[k] = true;
            let action = self.episode.disturbances[k].action.clone();
            let changed = self.apply_disturbance(&action);
            out.push(AppliedDisturbance { event: k, action, changed });
        }
        out
    }

    fn triggered(&self, ev: &DisturbanceEvent) -> bool {
        match &ev.trigger {
            Trigger::AfterStep { step } => self.steps >= *step,
            Trigger::OnCondition { condition: Condition::CountIn { container, objects, at_least } } => {
                let Some(c) = self.scene.index_of(container) else { return false };
                let n = objects
                    .iter()
                    .filter_map(|o| self.scene.index_of(o))
                    .filter(|&i| self.scene.support(i) == Support::In(c as u16))
                    .count();
                n >= *at_least
            }
            Trigger::OnCondition { condition: Condition::HeldFromStep { object, step } } => {
                self.scene.held() == Some(object) && self.steps >= *step
            }
        }
    }

    fn apply_disturbance(&mut self, action: &DisturbanceAction) -> bool {
        let scene = &self.scene;
        let target = match action {
            DisturbanceAction::None => return false,
            DisturbanceAction::ExternalTake { object } => {
                let Some(i) = scene.index_of(object) else { return false };
                if scene.support(i) != Support::Held {
                    return false;
                }
                (i, Support::Taken)
            }
            DisturbanceAction::Revert { object } => {
                let Some(i) = scene.index_of(object) else { return false };
                (i, self.episode.scene.support(i))
            }
            DisturbanceAction::Relocate { object, dest } => {
                let (Some(i), Some(j)) = (scene.index_of(object), scene.index_of(dest)) else { return false };
                let s = if scene.objects()[j].category.is_receptacle() {
                    Support::In(j as u16)
                } else {
                    Support::On(j as u16)
                };
                (i, s)
            }
        };
        let (i, support) = target;
        if !self.movable_to(i, support) {
            return false;
        }
        self.scene.state_mut().supports[i] = support;
        true
    }

    /// A disturbance only moves objects that sit in the workspace, and only to
    /// places that keep the scene valid.
    fn movable_to(&self, i: usize, support: Support) -> bool {
        let scene = &self.scene;
        let current = scene.support(i);
        if current == support || current == Support::Taken {
            return false;
        }
        if current == Support::Held && support != Support::Taken {
            return false;
        }
        match support {
            Support::On(j) => {
                let j = j as usize;
                scene.objects()[j].category.is_surface() && !scene.has_on_top(j) && !scene.rests_on(j, i)
            }
            Support::In(j) => {
                let j = j as usize;
                let cat = scene.objects()[j].category;
                cat.is_receptacle() && !scene.rests_on(j, i) && (cat != Category::Container || scene.is_open_index(j))
            }
            Support::Held => false,
            Support::Table | Support::Taken => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::format_invocation;
    use crate::sim::{generate_episode, oracle_solve, Noise, DEFAULT_MAX_DEPTH};

    #[test]
    fn noiseless_oracle_plan_succeeds() {
        let ep = generate_episode("bb_matching", 4).unwrap();
        let plan = oracle_solve(&ep.scene, &ep.goal, DEFAULT_MAX_DEPTH).unwrap();
        let mut run = EpisodeRun::new(&ep);
        for s in &plan.steps {
            assert_eq!(run.step(s).result, StepResult::Ok);
        }
        assert!(run.goal_satisfied());
    }

    #[test]
    fn failed_precondition_leaves_scene() {
        let ep = generate_episode("bb_matching", 4).unwrap();
        let mut run = EpisodeRun::new(&ep);
        let bowl = ep.scene.objects().iter().find(|o| o.category == Category::Bowl).unwrap().id.clone();
        let r = run.step(&SkillInvocation::pick_up(bowl.clone()));
        assert_eq!(r.result, StepResult::PreconditionViolated { reason: Reason::NotGraspable(bowl) });
        assert_eq!(run.scene(), &ep.scene);
        assert_eq!(run.steps(), 1);
    }

    #[test]
    fn certain_failure_changes_nothing() {
        let mut ep = generate_episode("bb_stack", 0).unwrap();
        ep.noise = Noise::pick_place(1.0);
        let plan = oracle_solve(&ep.scene, &ep.goal, DEFAULT_MAX_DEPTH).unwrap();
        let mut run = EpisodeRun::new(&ep);
        assert_eq!(run.step(&plan.steps[0]).result, StepResult::ExecutionFailed);
        assert_eq!(run.scene(), &ep.scene);
    }

    #[test]
    fn pack_reversion_fires_once() {
        let ep = generate_episode("fb_pack_reversion", 2).unwrap();
        let plan = oracle_solve(&ep.scene, &ep.goal, DEFAULT_MAX_DEPTH).unwrap();
        let mut run = EpisodeRun::new(&ep);
        let mut fired = 0;
        for s in &plan.steps {
            fired += run.step(s).disturbances.iter().filter(|d| d.changed).count();
        }
        assert_eq!(fired, 1);
        assert!(!run.goal_satisfied());
        // Replanning from here recovers.
        let again = oracle_solve(run.scene(), &ep.goal, DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(
            again.steps.len(),
            2,
            "{:?}",
            again.steps.iter().map(|s| format_invocation(s, ep.scene.objects())).collect::<Vec<_>>()
        );
        for s in &again.steps {
            run.step(s);
        }
        assert!(run.goal_satisfied());
    }

    #[test]
    fn handover_take_needs_waiting() {
        let ep = generate_episode("fb_handover_wait", 5).unwrap();
        let cola = ep.goal.relevant[0].id.clone();
        let mut run = EpisodeRun::new(&ep);
        run.step(&SkillInvocation::pick_up(cola.clone()));
        let mut waits = 0;
        while run.scene().held() == Some(&cola) {
            run.step(&SkillInvocation::wait());
            waits += 1;
            assert!(waits < 10);
        }
        assert!(waits >= 1);
        assert!(run.goal_satisfied());
    }
}
