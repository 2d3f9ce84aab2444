//! Candidate actions for the grounded baselines.

use alloc::string::String;
use alloc::vec::Vec;

use crate::observation::Observation;
use crate::plan::format_invocation;
use crate::scene::{Category, ObjectDescriptor};
use crate::skills::SkillInvocation;

use super::Choice;

/// Type-correct instantiations over the visible objects, then `wait` and
/// `done`. Picks are offered only with an empty gripper; place and pour
/// only for the held object.
pub fn enumerate_candidates(obs: &Observation) -> Vec<Choice> {
    enumerate_candidates_with(obs, &[])
}

/// Like [`enumerate_candidates`], also naming `extra` objects the
/// instruction mentions even when they are out of sight.
pub fn enumerate_candidates_with(obs: &Observation, extra: &[ObjectDescriptor]) -> Vec<Choice> {
    let mut objs: Vec<&ObjectDescriptor> = obs.visible.iter().collect();
    for e in extra {
        if !objs.iter().any(|o| o.id == e.id) {
            objs.push(e);
        }
    }
    objs.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::new();
    match &obs.held {
        None => {
            for o in objs.iter().filter(|o| o.is_graspable()) {
                out.push(SkillInvocation::pick_up(o.id.clone()));
            }
        }
        Some(h) => {
            let held = objs.iter().find(|o| &o.id == h);
            for d in objs.iter().filter(|d| &d.id != h) {
                if d.category.is_receptacle() || d.category.is_surface() {
                    out.push(SkillInvocation::place(h.clone(), d.id.clone()));
                }
            }
            if held.is_some_and(|o| o.category == Category::Bowl) {
                for d in objs.iter().filter(|d| &d.id != h && d.category.is_receptacle()) {
                    out.push(SkillInvocation::pour(h.clone(), d.id.clone()));
                }
            }
        }
    }
    for c in objs.iter().filter(|o| o.category == Category::Container) {
        out.push(SkillInvocation::open(c.id.clone()));
        out.push(SkillInvocation::close(c.id.clone()));
    }
    out.push(SkillInvocation::wait());
    let mut choices: Vec<Choice> = out.into_iter().map(Choice::step).collect();
    choices.push(Choice::Done);
    choices
}

/// Canonical text of a candidate, as scored by language models.
pub fn candidate_text(choice: &Choice, vocab: &[ObjectDescriptor]) -> String {
    match choice {
        Choice::Step { invocation } => format_invocation(invocation, vocab),
        Choice::Done => String::from("done"),
    }
}
