//! Plan language: turns free-form model output into bound skill invocations
//! and formats invocations back into their canonical text.
//!
//! Accepted step forms (case-insensitive, after normalization):
//!
//! ```text
//! pick up <obj> | place <obj> (in|on) <obj> | open <obj> | close <obj>
//! pour <obj> (into|onto) <obj> | wait | done | finished | task complete | task is complete
//! ```
//!
//! The full grammar is in `docs/plan-grammar.md`.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::scene::{Color, ObjectDescriptor, ObjectId, Size};
use crate::skills::{Skill, SkillInvocation};

pub const DONE_TOKENS: [&str; 4] = ["done", "task complete", "task is complete", "finished"];

const ARTICLES: [&str; 3] = ["a", "an", "the"];

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<SkillInvocation>,
    pub terminated: bool,
}

impl Plan {
    pub fn done() -> Plan {
        Plan { steps: Vec::new(), terminated: true }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "phrase", rename_all = "snake_case")]
pub enum StructureReason {
    NoMatchingSkill,
    EmptyPhrase,
    Unresolved(String),
    Ambiguous(String),
}

impl fmt::Display for StructureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureReason::NoMatchingSkill => f.write_str("no matching skill"),
            StructureReason::EmptyPhrase => f.write_str("missing object phrase"),
            StructureReason::Unresolved(p) => write!(f, "no object matches \"{}\"", p),
            StructureReason::Ambiguous(p) => write!(f, "\"{}\" matches more than one object", p),
        }
    }
}

/// A plan line outside the grammar. `line` is the offending line verbatim.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureError {
    pub line: String,
    pub reason: StructureReason,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepParse {
    Step(SkillInvocation),
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ParseOutcome {
    Parsed(Plan),
    StructureError(StructureError),
    EmptyResponse,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResolveError {
    Unresolved,
    Ambiguous(usize),
}

fn normalize(line: &str) -> String {
    // Markdown emphasis and code quotes carry no meaning in a step.
    let lowered: String = line.to_lowercase().chars().filter(|c| !matches!(c, '*' | '`' | '"')).collect();
    let joined = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    joined.trim_matches('\'').trim_end_matches(['.', ',', ';', ':', '!', '?']).trim().to_owned()
}

/// Resolves a noun phrase against the objects the agent can refer to.
pub fn resolve_object(phrase: &str, vocab: &[ObjectDescriptor]) -> Result<ObjectId, ResolveError> {
    let lowered = phrase.to_lowercase();
    let mut tokens: Vec<&str> = lowered.split_whitespace().collect();
    // Only leading articles: "letter a" names the letter A.
    while tokens.first().is_some_and(|t| ARTICLES.contains(t)) {
        tokens.remove(0);
    }
    if tokens.is_empty() {
        return Err(ResolveError::Unresolved);
    }
    let matches: Vec<&ObjectDescriptor> =
        if tokens[0] == "letter" && tokens.len() == 2 && tokens[1].chars().count() == 1 {
            let g = tokens[1].chars().next().unwrap().to_ascii_uppercase();
            vocab.iter().filter(|o| o.glyph == Some(g)).collect()
        } else {
            let mut rest = &tokens[..];
            let (mut color, mut size) = (None, None);
            // Color and size modifiers, at most one of each, in either order.
            while let Some(t) = rest.first() {
                let as_size = match *t {
                    "small" => Some(Size::Small),
                    "medium" => Some(Size::Medium),
                    "large" => Some(Size::Large),
                    _ => None,
                };
                match (Color::from_name(t), as_size) {
                    (Some(c), _) if color.is_none() => color = Some(c),
                    (_, Some(z)) if size.is_none() => size = Some(z),
                    _ => break,
                }
                rest = &rest[1..];
            }
            if rest.is_empty() {
                return Err(ResolveError::Unresolved);
            }
            let noun = rest.join(" ");
            let attrs = |o: &&ObjectDescriptor| color.is_none_or(|c| o.color == c) && size.is_none_or(|s| o.size == s);
            // An object's own noun beats its category noun: with a purple cup
            // and a purple bowl on the table, "purple bowl" is the bowl.
            let own: Vec<&ObjectDescriptor> = vocab.iter().filter(|o| o.noun() == noun).filter(attrs).collect();
            if own.is_empty() {
                vocab.iter().filter(|o| o.category.noun() == noun).filter(attrs).collect()
            } else {
                own
            }
        };
    match matches.len() {
        0 => Err(ResolveError::Unresolved),
        1 => Ok(matches[0].id.clone()),
        n => Err(ResolveError::Ambiguous(n)),
    }
}

fn bind(phrase: &[&str], vocab: &[ObjectDescriptor], line: &str) -> Result<(ObjectId, String), StructureError> {
    let err = |reason| StructureError { line: line.to_string(), reason };
    if phrase.is_empty() {
        return Err(err(StructureReason::EmptyPhrase));
    }
    let text = phrase.join(" ");
    match resolve_object(&text, vocab) {
        Ok(id) => Ok((id, text)),
        Err(ResolveError::Unresolved) => Err(err(StructureReason::Unresolved(text))),
        Err(ResolveError::Ambiguous(_)) => Err(err(StructureReason::Ambiguous(text))),
    }
}

/// Parses one plan line (numbering already stripped).
pub fn parse_step(line: &str, vocab: &[ObjectDescriptor]) -> Result<StepParse, StructureError> {
    let norm = normalize(line);
    if DONE_TOKENS.contains(&norm.as_str()) {
        return Ok(StepParse::Done);
    }
    let tokens: Vec<&str> = norm.split(' ').filter(|t| !t.is_empty()).collect();
    let no_match = || StructureError { line: line.to_string(), reason: StructureReason::NoMatchingSkill };
    let unary = |skill: Skill, rest: &[&str]| -> Result<StepParse, StructureError> {
        let (id, raw) = bind(rest, vocab, line)?;
        Ok(StepParse::Step(SkillInvocation { skill, args: alloc::vec![id], raw_phrases: alloc::vec![raw] }))
    };
    let binary = |skill: Skill, rest: &[&str]| -> Result<StepParse, StructureError> {
        let preps = skill.prepositions();
        let split = rest.iter().enumerate().skip(1).find(|(_, t)| preps.contains(t)).map(|(k, _)| k);
        let Some(k) = split else { return Err(no_match()) };
        let (a, ra) = bind(&rest[..k], vocab, line)?;
        let (b, rb) = bind(&rest[k + 1..], vocab, line)?;
        Ok(StepParse::Step(SkillInvocation { skill, args: alloc::vec![a, b], raw_phrases: alloc::vec![ra, rb] }))
    };
    match tokens.as_slice() {
        ["wait"] => Ok(StepParse::Step(SkillInvocation::wait())),
        ["pick", "up", rest @ ..] => unary(Skill::PickUp, rest),
        ["place", rest @ ..] => binary(Skill::Place, rest),
        ["open", rest @ ..] => unary(Skill::Open, rest),
        ["close", rest @ ..] => unary(Skill::Close, rest),
        ["pour", rest @ ..] => binary(Skill::Pour, rest),
        _ => Err(no_match()),
    }
}

/// Strips a list marker (`1.`, `2)`, `- `, `* `) and returns the item text.
fn list_item(line: &str) -> Option<&str> {
    let t = line.trim_start();
    let digits = t.bytes().take_while(|b| b.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &t[digits..];
        let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
        if rest.is_empty() || rest.starts_with(char::is_whitespace) {
            return Some(rest.trim());
        }
        return None;
    }
    t.strip_prefix("- ").or_else(|| t.strip_prefix("* ")).map(str::trim)
}

fn is_plan_marker(line: &str) -> Option<&str> {
    let t = line.trim().trim_matches('*').trim();
    let head = t.get(..5)?;
    if head.eq_ignore_ascii_case("plan:") {
        Some(t[5..].trim())
    } else {
        None
    }
}

/// Extracts the numbered (or bulleted) list after a `Plan:` marker, falling
/// back to the first list in the response, and parses it step by step.
pub fn parse_plan(response: &str, vocab: &[ObjectDescriptor]) -> ParseOutcome {
    let lines: Vec<&str> = response.lines().collect();
    let mut items: Vec<&str> = Vec::new();
    let marker = lines.iter().position(|l| is_plan_marker(l).is_some());
    let start = match marker {
        Some(m) => {
            let inline = is_plan_marker(lines[m]).unwrap_or("");
            if let Some(item) = list_item(inline) {
                items.push(item);
            }
            m + 1
        }
        None => 0,
    };
    let mut in_list = !items.is_empty();
    for line in &lines[start..] {
        match list_item(line) {
            Some(item) => {
                items.push(item);
                in_list = true;
            }
            None if line.trim().is_empty() => continue,
            None if in_list => break,
            None => continue,
        }
    }
    if items.is_empty() {
        return ParseOutcome::EmptyResponse;
    }
    let mut plan = Plan::default();
    for item in items {
        match parse_step(item, vocab) {
            Ok(StepParse::Done) => {
                plan.terminated = true;
                break;
            }
            Ok(StepParse::Step(inv)) => plan.steps.push(inv),
            Err(e) => return ParseOutcome::StructureError(e),
        }
    }
    ParseOutcome::Parsed(plan)
}

/// Object phrases from the response's inventory line (`Objects: a, b, c`).
pub fn parse_inventory(response: &str) -> Option<Vec<String>> {
    for line in response.lines() {
        let t = line.trim().trim_matches('*').trim();
        let lower = t.to_lowercase();
        let rest = lower.strip_prefix("visible objects:").or_else(|| lower.strip_prefix("objects:"));
        if let Some(rest) = rest {
            return Some(
                rest.split(',')
                    .map(|p| p.trim().trim_end_matches('.').trim().to_string())
                    .filter(|p| !p.is_empty())
                    .collect(),
            );
        }
    }
    None
}

fn phrase_of(id: &ObjectId, vocab: &[ObjectDescriptor]) -> String {
    vocab.iter().find(|o| &o.id == id).map(|o| o.phrase()).unwrap_or_else(|| id.to_string())
}

fn is_receptacle(id: &ObjectId, vocab: &[ObjectDescriptor]) -> bool {
    vocab.iter().find(|o| &o.id == id).is_some_and(|o| o.category.is_receptacle())
}

/// Canonical text for a bound invocation.
pub fn format_invocation(inv: &SkillInvocation, vocab: &[ObjectDescriptor]) -> String {
    let arg = |k: usize| phrase_of(&inv.args[k], vocab);
    match inv.skill {
        Skill::Wait => "wait".to_string(),
        Skill::PickUp => alloc::format!("pick up {}", arg(0)),
        Skill::Open => alloc::format!("open {}", arg(0)),
        Skill::Close => alloc::format!("close {}", arg(0)),
        Skill::Place => {
            let prep = if is_receptacle(&inv.args[1], vocab) { "in" } else { "on" };
            alloc::format!("place {} {} {}", arg(0), prep, arg(1))
        }
        Skill::Pour => {
            let prep = if is_receptacle(&inv.args[1], vocab) { "into" } else { "onto" };
            alloc::format!("pour {} {} {}", arg(0), prep, arg(1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Category, Cell};

    fn vocab() -> Vec<ObjectDescriptor> {
        alloc::vec![
            ObjectDescriptor::new("block_0", Category::Block, Color::Red, Cell::new(0, 0)),
            ObjectDescriptor::new("block_1", Category::Block, Color::Green, Cell::new(1, 0)),
            ObjectDescriptor::new("bowl_0", Category::Bowl, Color::Red, Cell::new(2, 0)),
            ObjectDescriptor::new("container_0", Category::Container, Color::Blue, Cell::new(3, 0)),
            ObjectDescriptor::new("cup_0", Category::Bowl, Color::Green, Cell::new(4, 0))
                .with_noun("cup")
                .with_size(Size::Small),
            ObjectDescriptor::new("bowl_1", Category::Bowl, Color::Blue, Cell::new(5, 0)),
            ObjectDescriptor::letter("letter_c", 'C', Color::Yellow, Cell::new(6, 0)),
        ]
    }

    fn step(line: &str) -> SkillInvocation {
        match parse_step(line, &vocab()).unwrap() {
            StepParse::Step(inv) => inv,
            StepParse::Done => panic!("unexpected done"),
        }
    }

    #[test]
    fn parses_pick_up_blue_container() {
        assert_eq!(step("pick up blue container"), SkillInvocation::pick_up("container_0"));
    }

    #[test]
    fn own_noun_beats_category_noun() {
        let mut v = vocab();
        v.push(ObjectDescriptor::new("bowl_2", Category::Bowl, Color::Green, Cell::new(7, 0)));
        assert_eq!(resolve_object("green bowl", &v), Ok(ObjectId::new("bowl_2")));
        assert_eq!(resolve_object("green cup", &v), Ok(ObjectId::new("cup_0")));
        // Without a real green bowl the cup still answers to "bowl".
        assert_eq!(resolve_object("green bowl", &vocab()), Ok(ObjectId::new("cup_0")));
    }

    #[test]
    fn done_synonyms() {
        for t in ["done", "Done.", "  task complete", "Task is complete!", "finished"] {
            assert_eq!(parse_step(t, &vocab()).unwrap(), StepParse::Done, "{t}");
        }
    }

    #[test]
    fn unknown_verb_is_structure_error() {
        let e = parse_step("wipe the table", &vocab()).unwrap_err();
        assert_eq!(e.reason, StructureReason::NoMatchingSkill);
        assert_eq!(e.line, "wipe the table");
    }

    #[test]
    fn normalization_is_forgiving() {
        assert_eq!(step("  Place   the RED block  on the red bowl. "), SkillInvocation::place("block_0", "bowl_0"));
        assert_eq!(step("pour green cup into blue bowl"), SkillInvocation::pour("cup_0", "bowl_1"));
    }

    #[test]
    fn resolution_rules() {
        let v = vocab();
        assert_eq!(resolve_object("the red block", &v), Ok("block_0".into()));
        assert_eq!(resolve_object("block", &v), Err(ResolveError::Ambiguous(2)));
        assert_eq!(resolve_object("letter C", &v), Ok("letter_c".into()));
        assert_eq!(resolve_object("cup", &v), Ok("cup_0".into()));
        assert_eq!(resolve_object("the left block", &v), Err(ResolveError::Unresolved));
        assert_eq!(resolve_object("purple block", &v), Err(ResolveError::Unresolved));
    }

    #[test]
    fn ambiguous_phrase_is_structure_error() {
        let e = parse_step("pick up block", &vocab()).unwrap_err();
        assert_eq!(e.reason, StructureReason::Ambiguous("block".into()));
    }

    #[test]
    fn formats_canonical_text() {
        let v = vocab();
        assert_eq!(format_invocation(&SkillInvocation::pick_up("block_0"), &v), "pick up red block");
        assert_eq!(format_invocation(&SkillInvocation::wait(), &v), "wait");
        assert_eq!(format_invocation(&SkillInvocation::pour("cup_0", "bowl_1"), &v), "pour green cup into blue bowl");
        assert_eq!(
            format_invocation(&SkillInvocation::place("letter_c", "block_1"), &v),
            "place letter C on green block"
        );
    }

    #[test]
    fn plan_with_marker() {
        let out = parse_plan("Plan:\n1. pick up red block\n2. place red block in red bowl\n3. done", &vocab());
        let ParseOutcome::Parsed(plan) = out else { panic!("{out:?}") };
        assert_eq!(plan.steps.len(), 2);
        assert!(plan.terminated);
    }

    #[test]
    fn plan_after_prose_matches() {
        let bare = parse_plan("Plan:\n1. pick up red block\n2. place red block in red bowl\n3. done", &vocab());
        let prose = parse_plan(
            "I see a red block next to a red bowl.\nObjects: red block, red bowl\n\nPlan:\n1. pick up red block\n2. place red block in red bowl\n3. done\n\nThat should do it.",
            &vocab(),
        );
        assert_eq!(bare, prose);
        let no_marker =
            parse_plan("Sure thing.\n1. pick up red block\n2. place red block in red bowl\n3. done", &vocab());
        assert_eq!(bare, no_marker);
    }

    #[test]
    fn no_list_is_empty_response() {
        assert_eq!(parse_plan("I cannot see any objects.", &vocab()), ParseOutcome::EmptyResponse);
        assert_eq!(parse_plan("", &vocab()), ParseOutcome::EmptyResponse);
    }

    #[test]
    fn first_bad_line_is_reported() {
        let out = parse_plan("Plan:\n1. pick up red block\n2. wipe table\n3. jump", &vocab());
        assert_eq!(
            out,
            ParseOutcome::StructureError(StructureError {
                line: "wipe table".into(),
                reason: StructureReason::NoMatchingSkill
            })
        );
    }

    #[test]
    fn steps_after_done_are_ignored() {
        let ParseOutcome::Parsed(plan) = parse_plan("1. done\n2. wipe table", &vocab()) else { panic!() };
        assert_eq!(plan, Plan::done());
    }

    #[test]
    fn inventory_line() {
        assert_eq!(
            parse_inventory("Objects: red block, Blue Bowl.\nPlan:\n1. done"),
            Some(alloc::vec!["red block".to_string(), "blue bowl".to_string()])
        );
        assert_eq!(parse_inventory("Plan:\n1. done"), None);
    }
}
