//! Closed-loop and open-loop episode execution, transcripts, and failure
//! classification.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::observation::Observer;
use crate::plan::{format_invocation, resolve_object};
use crate::planners::{Choice, DecisionFailure, HistoryEntry, Planner, PlannerDecision, PlanningInput};
use crate::scene::{scene_diff, Category, ObjectDescriptor, ObjectId, Scene, SceneChange, Support};
use crate::sim::{AppliedDisturbance, Episode, EpisodeRun, StepResult};
use crate::skills::{Reason, Skill};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MAX_STEPS: u32 = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    #[default]
    Closed,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecConfig {
    pub max_steps: u32,
    /// Stop as soon as the goal holds instead of waiting for `done`.
    pub early_stop: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig { max_steps: DEFAULT_MAX_STEPS, early_stop: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    ResponseStructure,
    Perception,
    Understanding,
    Execution,
    NoFeasibleAction,
    Timeout,
}

impl FailureClass {
    pub const ALL: [FailureClass; 6] = [
        FailureClass::ResponseStructure,
        FailureClass::Perception,
        FailureClass::Understanding,
        FailureClass::Execution,
        FailureClass::NoFeasibleAction,
        FailureClass::Timeout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FailureClass::ResponseStructure => "response_structure",
            FailureClass::Perception => "perception",
            FailureClass::Understanding => "understanding",
            FailureClass::Execution => "execution",
            FailureClass::NoFeasibleAction => "no_feasible_action",
            FailureClass::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptStep {
    pub t: u32,
    pub obs_digest: String,
    pub visible: Vec<ObjectId>,
    /// Goal objects out of sight, each with the closed container hiding it.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hidden_relevant: BTreeMap<ObjectId, ObjectId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_key: Option<String>,
    #[serde(default)]
    pub response: String,
    /// Absent for open-loop steps after the single planning call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<PlannerDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub executed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<StepResult>,
    #[serde(default)]
    pub diff: Vec<SceneChange>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disturbances: Vec<AppliedDisturbance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub schema_version: u32,
    pub task_id: String,
    pub seed: u64,
    pub mode: LoopMode,
    pub planner: String,
    pub backend: String,
    pub instruction: String,
    pub objects: Vec<ObjectDescriptor>,
    pub relevant: Vec<ObjectId>,
    pub steps: Vec<TranscriptStep>,
    pub outcome: Outcome,
    pub failure_class: Option<FailureClass>,
    pub step_count: u32,
    /// Why the failure class was assigned.
    #[serde(default)]
    pub evidence: Vec<String>,
    /// Kept out of the serialized form so transcripts stay reproducible.
    #[serde(skip)]
    pub wall_time_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("transcript outcome is success")]
pub struct NotAFailure;

fn hidden_relevant(scene: &Scene, relevant: &[ObjectId]) -> BTreeMap<ObjectId, ObjectId> {
    let mut out = BTreeMap::new();
    for id in relevant {
        let Some(i) = scene.index_of(id) else { continue };
        if !scene.is_hidden(i) || scene.is_taken(i) {
            continue;
        }
        // Outermost closed container along the support chain.
        let mut cur = i;
        let mut hiding = None;
        while let Some(j) = scene.support(cur).target() {
            if matches!(scene.support(cur), Support::In(_))
                && scene.objects()[j].category == Category::Container
                && !scene.is_open_index(j)
            {
                hiding = Some(j);
            }
            cur = j;
        }
        if let Some(j) = hiding {
            out.insert(id.clone(), scene.objects()[j].id.clone());
        }
    }
    out
}

struct Recorder<'e, O: Observer + ?Sized> {
    episode: &'e Episode,
    observer: &'e O,
    run: EpisodeRun,
    relevant: Vec<ObjectId>,
    steps: Vec<TranscriptStep>,
    goal_image: Option<Vec<u8>>,
}

impl<'e, O: Observer + ?Sized> Recorder<'e, O> {
    fn new(episode: &'e Episode, observer: &'e O) -> Self {
        let goal_image = episode.goal.goal_scene.as_ref().and_then(|g| observer.render_goal(g));
        Recorder {
            episode,
            observer,
            run: EpisodeRun::new(episode),
            relevant: episode.goal.relevant.iter().map(|o| o.id.clone()).collect(),
            steps: Vec::new(),
            goal_image,
        }
    }

    fn blank_step(&self, obs_digest: String, visible: Vec<ObjectId>) -> TranscriptStep {
        TranscriptStep {
            t: self.steps.len() as u32 + 1,
            obs_digest,
            visible,
            hidden_relevant: hidden_relevant(self.run.scene(), &self.relevant),
            prompt_key: None,
            response: String::new(),
            decision: None,
            executed: None,
            result: None,
            diff: Vec::new(),
            disturbances: Vec::new(),
        }
    }

    fn execute(&mut self, step: &mut TranscriptStep, inv: &crate::skills::SkillInvocation) -> StepResult {
        let before = self.run.scene().clone();
        let report = self.run.step(inv);
        step.executed = Some(format_invocation(inv, self.episode.scene.objects()));
        step.diff = scene_diff(&before, self.run.scene()).unwrap_or_default();
        step.result = Some(report.result.clone());
        step.disturbances = report.disturbances;
        report.result
    }

    fn finish(self, mode: LoopMode, planner: &str, backend: &str, timed_out: bool) -> Transcript {
        let outcome = if self.run.goal_satisfied() {
            Outcome::Success
        } else if timed_out {
            Outcome::Timeout
        } else {
            Outcome::Failure
        };
        let mut t = Transcript {
            schema_version: SCHEMA_VERSION,
            task_id: self.episode.task_id.clone(),
            seed: self.episode.seed,
            mode,
            planner: planner.into(),
            backend: backend.into(),
            instruction: self.episode.goal.instruction.clone(),
            objects: self.episode.scene.objects().to_vec(),
            relevant: self.relevant,
            step_count: self.run.steps(),
            steps: self.steps,
            outcome,
            failure_class: None,
            evidence: Vec::new(),
            wall_time_ms: 0,
        };
        if outcome != Outcome::Success {
            let (class, evidence) = classify_with_evidence(&t);
            t.failure_class = Some(class);
            t.evidence = evidence;
        }
        t
    }
}

/// Observe, ask the planner for the next step, execute it, repeat until the
/// planner says `done`, fails to produce a step, or `max_steps` steps ran.
pub fn run_closed_loop<P, O>(episode: &Episode, planner: &mut P, observer: &O, cfg: &ExecConfig) -> Transcript
where
    P: Planner + ?Sized,
    O: Observer + ?Sized,
{
    let mut rec = Recorder::new(episode, observer);
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut timed_out = false;
    loop {
        if rec.run.steps() >= cfg.max_steps {
            timed_out = true;
            break;
        }
        let obs = rec.observer.observe(rec.run.scene());
        let decision = planner.decide(&PlanningInput {
            observation: &obs,
            goal: &episode.goal,
            goal_image: rec.goal_image.as_deref(),
            history: &history,
            world: rec.run.scene(),
        });
        let mut step = rec.blank_step(obs.digest(), obs.visible.iter().map(|o| o.id.clone()).collect());
        step.prompt_key = decision.prompt_key.clone();
        step.response = decision.raw_response.clone();
        let choice = decision.chosen.clone();
        step.decision = Some(decision);
        let Some(Choice::Step { invocation }) = choice else {
            rec.steps.push(step);
            break;
        };
        let result = rec.execute(&mut step, &invocation);
        history
            .push(HistoryEntry { text: step.executed.clone().unwrap_or_default(), failed: result != StepResult::Ok });
        rec.steps.push(step);
        if cfg.early_stop && rec.run.goal_satisfied() {
            break;
        }
    }
    rec.finish(LoopMode::Closed, planner.name(), planner.backend_name(), timed_out)
}

/// Plan once from the initial observation and execute every step in order.
pub fn run_open_loop<P, O>(episode: &Episode, planner: &mut P, observer: &O, cfg: &ExecConfig) -> Transcript
where
    P: Planner + ?Sized,
    O: Observer + ?Sized,
{
    let mut rec = Recorder::new(episode, observer);
    let obs = rec.observer.observe(rec.run.scene());
    let decision = planner.decide(&PlanningInput {
        observation: &obs,
        goal: &episode.goal,
        goal_image: rec.goal_image.as_deref(),
        history: &[],
        world: rec.run.scene(),
    });
    let steps = match (&decision.full_plan, &decision.chosen) {
        (Some(plan), _) => plan.steps.clone(),
        (None, Some(Choice::Step { invocation })) => alloc::vec![invocation.clone()],
        _ => Vec::new(),
    };
    let mut first = rec.blank_step(obs.digest(), obs.visible.iter().map(|o| o.id.clone()).collect());
    first.prompt_key = decision.prompt_key.clone();
    first.response = decision.raw_response.clone();
    first.decision = Some(decision);
    let mut timed_out = false;
    let mut pending = Some(first);
    for inv in &steps {
        if rec.run.steps() >= cfg.max_steps {
            timed_out = true;
            break;
        }
        let mut step = match pending.take() {
            Some(s) => s,
            None => {
                let obs = rec.observer.observe(rec.run.scene());
                rec.blank_step(obs.digest(), obs.visible.iter().map(|o| o.id.clone()).collect())
            }
        };
        rec.execute(&mut step, inv);
        rec.steps.push(step);
    }
    if let Some(s) = pending {
        rec.steps.push(s);
    }
    rec.finish(LoopMode::Open, planner.name(), planner.backend_name(), timed_out)
}

/// Failure class of an unsuccessful transcript.
pub fn classify_failure(t: &Transcript) -> Result<FailureClass, NotAFailure> {
    if t.outcome == Outcome::Success {
        return Err(NotAFailure);
    }
    Ok(classify_with_evidence(t).0)
}

/// Rules, first match wins: response structure, no feasible action,
/// perception, execution noise, then timeout or understanding.
fn classify_with_evidence(t: &Transcript) -> (FailureClass, Vec<String>) {
    let mut ev = Vec::new();
    for s in &t.steps {
        match s.decision.as_ref().and_then(|d| d.failure.as_ref()) {
            Some(DecisionFailure::Structure { error }) => {
                ev.push(alloc::format!("step {}: \"{}\": {}", s.t, error.line, error.reason));
                return (FailureClass::ResponseStructure, ev);
            }
            Some(DecisionFailure::EmptyResponse) => {
                ev.push(alloc::format!("step {}: response contains no plan", s.t));
                return (FailureClass::ResponseStructure, ev);
            }
            Some(DecisionFailure::Backend { message }) => {
                ev.push(alloc::format!("step {}: backend error: {}", s.t, message));
                return (FailureClass::ResponseStructure, ev);
            }
            _ => {}
        }
    }
    if let Some(s) = t.steps.iter().find(|s| {
        matches!(s.decision.as_ref().and_then(|d| d.failure.as_ref()), Some(DecisionFailure::NoFeasibleAction))
    }) {
        ev.push(alloc::format!("step {}: every candidate scored zero", s.t));
        return (FailureClass::NoFeasibleAction, ev);
    }
    if let Some(e) = perception_evidence(t) {
        ev.push(e);
        return (FailureClass::Perception, ev);
    }
    let failed: Vec<&TranscriptStep> =
        t.steps.iter().filter(|s| matches!(s.result, Some(ref r) if *r != StepResult::Ok)).collect();
    let noisy = failed.iter().filter(|s| s.result == Some(StepResult::ExecutionFailed)).count();
    if noisy > 0 && 2 * noisy >= failed.len() {
        ev.push(alloc::format!("{} of {} failed steps were execution failures", noisy, failed.len()));
        return (FailureClass::Execution, ev);
    }
    if t.outcome == Outcome::Timeout {
        ev.push(alloc::format!("goal not reached within {} steps", t.step_count));
        return (FailureClass::Timeout, ev);
    }
    for s in &failed {
        if let Some(StepResult::PreconditionViolated { reason }) = &s.result {
            ev.push(alloc::format!("step {}: {}: {}", s.t, s.executed.as_deref().unwrap_or(""), reason));
        }
    }
    ev.push(String::from("plan executed but the goal does not hold"));
    (FailureClass::Understanding, ev)
}

fn perception_evidence(t: &Transcript) -> Option<String> {
    let phrase_of = |id: &ObjectId| t.objects.iter().find(|o| &o.id == id);
    for s in &t.steps {
        if let Some(StepResult::PreconditionViolated { reason: Reason::UnknownObject(id) }) = &s.result {
            return Some(alloc::format!("step {}: plan names an object that does not exist: {}", s.t, id));
        }
        let Some(d) = &s.decision else { continue };
        let Some(inventory) = &d.inventory else { continue };
        for phrase in inventory {
            if resolve_object(phrase, &t.objects).is_err() && !t.objects.iter().any(|o| o.phrase() == *phrase) {
                return Some(alloc::format!("step {}: inventory names \"{}\", which is not in the scene", s.t, phrase));
            }
        }
        let listed = |id: &ObjectId| {
            let Some(obj) = phrase_of(id) else { return true };
            inventory
                .iter()
                .any(|p| resolve_object(p, core::slice::from_ref(obj)).is_ok() || p.eq_ignore_ascii_case(&obj.phrase()))
        };
        for id in t.relevant.iter().filter(|id| s.visible.contains(id)) {
            if !listed(id) {
                return Some(alloc::format!(
                    "step {}: inventory omits visible {}",
                    s.t,
                    phrase_of(id).map(|o| o.phrase()).unwrap_or_default()
                ));
            }
        }
        // A goal object hidden in a container that the inventory ignores and
        // the plan never opens: the scene was misread.
        let plan_opens = |c: &ObjectId| {
            d.full_plan
                .as_ref()
                .is_some_and(|p| p.steps.iter().any(|st| st.skill == Skill::Open && st.args.first() == Some(c)))
        };
        for (id, container) in &s.hidden_relevant {
            if !listed(id) && !plan_opens(container) {
                return Some(alloc::format!(
                    "step {}: {} is inside {} and neither the inventory nor the plan accounts for it",
                    s.t,
                    phrase_of(id).map(|o| o.phrase()).unwrap_or_default(),
                    phrase_of(container).map(|o| o.phrase()).unwrap_or_default()
                ));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::{OracleBacked, Scripted};
    use crate::observation::TextObserver;
    use crate::planners::PromptPlanner;
    use crate::sim::{generate_episode, oracle_solve, Noise, DEFAULT_MAX_DEPTH};

    #[test]
    fn oracle_closed_loop_matches_plan_length() {
        for task in ["bb_matching", "letters_alpha", "bb_two_towers"] {
            let ep = generate_episode(task, 11).unwrap();
            let n = oracle_solve(&ep.scene, &ep.goal, DEFAULT_MAX_DEPTH).unwrap().steps.len() as u32;
            let t = run_closed_loop(
                &ep,
                &mut PromptPlanner::vila(OracleBacked::new(), "m"),
                &TextObserver,
                &ExecConfig::default(),
            );
            assert_eq!(t.outcome, Outcome::Success);
            assert_eq!(t.step_count, n);
            assert_eq!(t.failure_class, None);
        }
    }

    #[test]
    fn noisy_stacking_recovers() {
        for seed in 0..10 {
            let ep = generate_episode("fb_stack_noisy", seed).unwrap();
            let t = run_closed_loop(
                &ep,
                &mut PromptPlanner::vila(OracleBacked::new(), "m"),
                &TextObserver,
                &ExecConfig::default(),
            );
            assert!(t.step_count >= 4);
            if t.outcome == Outcome::Success {
                assert!(t.steps.last().unwrap().decision.as_ref().unwrap().chosen == Some(Choice::Done));
            }
        }
    }

    #[test]
    fn wipe_table_is_structure_failure_at_step_one() {
        let ep = generate_episode("bb_matching", 0).unwrap();
        let t = run_closed_loop(
            &ep,
            &mut PromptPlanner::vila(Scripted::repeating("1. wipe table"), "m"),
            &TextObserver,
            &ExecConfig::default(),
        );
        assert_eq!(t.outcome, Outcome::Failure);
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.step_count, 0);
        assert_eq!(classify_failure(&t), Ok(FailureClass::ResponseStructure));
    }

    #[test]
    fn open_loop_equals_closed_loop_without_noise() {
        let ep = generate_episode("bb_stack", 2).unwrap();
        let c = run_closed_loop(
            &ep,
            &mut PromptPlanner::vila(OracleBacked::new(), "m"),
            &TextObserver,
            &ExecConfig::default(),
        );
        let o = run_open_loop(
            &ep,
            &mut PromptPlanner::vila(OracleBacked::new(), "m"),
            &TextObserver,
            &ExecConfig::default(),
        );
        assert_eq!(c.outcome, Outcome::Success);
        assert_eq!(o.outcome, Outcome::Success);
        assert_eq!(o.step_count, c.step_count);
    }

    #[test]
    fn open_loop_pack_reversion_fails() {
        let ep = generate_episode("fb_pack_reversion", 0).unwrap();
        let o = run_open_loop(
            &ep,
            &mut PromptPlanner::vila(OracleBacked::new(), "m"),
            &TextObserver,
            &ExecConfig::default(),
        );
        assert_eq!(o.outcome, Outcome::Failure);
        let c = run_closed_loop(
            &ep,
            &mut PromptPlanner::vila(OracleBacked::new(), "m"),
            &TextObserver,
            &ExecConfig::default(),
        );
        assert_eq!(c.outcome, Outcome::Success);
    }

    #[test]
    fn certain_noise_times_out_as_execution() {
        let mut ep = generate_episode("bb_stack", 2).unwrap();
        ep.noise = Noise::pick_place(1.0);
        let cfg = ExecConfig { max_steps: 5, early_stop: false };
        let t = run_closed_loop(&ep, &mut PromptPlanner::vila(OracleBacked::new(), "m"), &TextObserver, &cfg);
        assert_eq!(t.outcome, Outcome::Timeout);
        assert_eq!(t.step_count, 5);
        assert_eq!(t.failure_class, Some(FailureClass::Execution));
        assert!(t.steps.iter().skip(1).all(|s| s.decision.is_some()));
    }

    #[test]
    fn success_is_not_a_failure() {
        let ep = generate_episode("bb_pick_place", 0).unwrap();
        let t = run_closed_loop(
            &ep,
            &mut PromptPlanner::vila(OracleBacked::new(), "m"),
            &TextObserver,
            &ExecConfig::default(),
        );
        assert_eq!(classify_failure(&t), Err(NotAFailure));
    }
}
