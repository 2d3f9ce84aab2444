//! Chat requests, their cache keys, and the model backends that need no
//! network: scripted responses and an oracle-backed mock.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::digest::{canonical_json, sha256_hex};
use crate::observation::Observation;
use crate::plan::format_invocation;
use crate::planners::{belief_scene, HiddenPolicy, OracleMemo};
use crate::sim::GoalSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Part {
    Text(String),
    /// PNG bytes.
    Image(Vec<u8>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl Message {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        Message { role, parts: alloc::vec![Part::Text(text.into())] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>) -> Self {
        ChatRequest { model: model.into(), messages, temperature: 0.0, max_tokens: 1024 }
    }

    /// At most one system message, and only in first position.
    pub fn validate(&self) -> Result<(), BackendError> {
        let systems: Vec<usize> =
            self.messages.iter().enumerate().filter(|(_, m)| m.role == Role::System).map(|(i, _)| i).collect();
        match systems.as_slice() {
            [] | [0] => Ok(()),
            _ => Err(BackendError::InvalidRequest("system message must be unique and first".into())),
        }
    }

    /// JSON view with images replaced by their digests.
    pub fn key_view(&self) -> Value {
        let messages: Vec<Value> = self
            .messages
            .iter()
            .map(|m| {
                let content: Vec<Value> = m
                    .parts
                    .iter()
                    .map(|p| match p {
                        Part::Text(t) => json!({"type": "text", "text": t}),
                        Part::Image(png) => json!({"type": "image", "sha256": sha256_hex(png)}),
                    })
                    .collect();
                json!({"role": m.role, "content": content})
            })
            .collect();
        json!({
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "messages": messages,
        })
    }

    /// Every image in the request.
    pub fn images(&self) -> impl Iterator<Item = &[u8]> {
        self.messages.iter().flat_map(|m| m.parts.iter()).filter_map(|p| match p {
            Part::Image(b) => Some(b.as_slice()),
            Part::Text(_) => None,
        })
    }
}

/// Hex SHA-256 over the canonical JSON of the request, images by digest.
pub fn cache_key(req: &ChatRequest) -> String {
    sha256_hex(canonical_json(&req.key_view()).as_bytes())
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("no cached response for key {0}")]
    CacheMiss(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited (retry after {retry_after_ms:?} ms)")]
    RateLimited { retry_after_ms: Option<u64> },
    #[error("scripted responses exhausted")]
    ScriptExhausted,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("missing credentials: set {0}")]
    MissingCredentials(String),
}

/// What the simulator can tell a mock backend about the current call.
#[derive(Clone, Copy)]
pub struct BackendContext<'a> {
    pub observation: &'a Observation,
    pub goal: &'a GoalSpec,
}

pub trait ChatBackend {
    fn name(&self) -> &str;
    fn complete(&mut self, req: &ChatRequest, ctx: &BackendContext<'_>) -> Result<String, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for alloc::boxed::Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&mut self, req: &ChatRequest, ctx: &BackendContext<'_>) -> Result<String, BackendError> {
        (**self).complete(req, ctx)
    }
}

/// Returns canned responses in order. With `repeat`, the last one is
/// returned forever once the list runs out.
#[derive(Clone, Debug, Default)]
pub struct Scripted {
    responses: Vec<String>,
    next: usize,
    repeat: bool,
}

impl Scripted {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Scripted { responses: responses.into_iter().map(Into::into).collect(), next: 0, repeat: false }
    }

    pub fn repeating(response: impl Into<String>) -> Self {
        Scripted { responses: alloc::vec![response.into()], next: 0, repeat: true }
    }

    pub fn with_repeat(mut self, repeat: bool) -> Self {
        self.repeat = repeat;
        self
    }
}

impl ChatBackend for Scripted {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&mut self, req: &ChatRequest, _ctx: &BackendContext<'_>) -> Result<String, BackendError> {
        req.validate()?;
        let k = if self.repeat { self.next.min(self.responses.len().saturating_sub(1)) } else { self.next };
        let r = self.responses.get(k).cloned().ok_or(BackendError::ScriptExhausted)?;
        self.next += 1;
        Ok(r)
    }
}

/// Answers with the oracle plan for the scene the agent can reconstruct from
/// its observation. Goal objects it cannot see are assumed to be in the
/// first closed container, so search behaviour emerges from replanning.
#[derive(Clone, Debug, Default)]
pub struct OracleBacked {
    memo: OracleMemo,
}

pub const UNSOLVABLE_RESPONSE: &str = "I could not find a way to complete this instruction.";

impl OracleBacked {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn respond(&mut self, obs: &Observation, goal: &GoalSpec) -> String {
        let belief = belief_scene(obs, goal, HiddenPolicy::InClosedContainer);
        let Some(plan) = self.memo.solve(&belief, goal) else {
            return UNSOLVABLE_RESPONSE.to_string();
        };
        let phrases: Vec<String> = obs.visible.iter().map(|o| o.phrase()).collect();
        let mut out = String::new();
        let _ = writeln!(out, "Objects: {}", phrases.join(", "));
        out.push_str("Plan:\n");
        for (k, step) in plan.steps.iter().enumerate() {
            let _ = writeln!(out, "{}. {}", k + 1, format_invocation(step, belief.objects()));
        }
        let _ = write!(out, "{}. done", plan.steps.len() + 1);
        out
    }
}

impl ChatBackend for OracleBacked {
    fn name(&self) -> &str {
        "oracle"
    }

    fn complete(&mut self, req: &ChatRequest, ctx: &BackendContext<'_>) -> Result<String, BackendError> {
        req.validate()?;
        Ok(self.respond(ctx.observation, ctx.goal))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::observe;
    use crate::plan::{parse_plan, ParseOutcome, Plan};
    use crate::scene::{Category, Cell, Color, ObjectDescriptor, Scene};
    use crate::sim::{oracle_solve, GoalPredicate, DEFAULT_MAX_DEPTH};

    fn req(text: &str, png: &[u8]) -> ChatRequest {
        ChatRequest::new(
            "m",
            alloc::vec![
                Message::text(Role::System, "sys"),
                Message { role: Role::User, parts: alloc::vec![Part::Text(text.into()), Part::Image(png.to_vec())] },
            ],
        )
    }

    #[test]
    fn keys() {
        assert_eq!(cache_key(&req("a", &[1, 2, 3])), cache_key(&req("a", &[1, 2, 3])));
        assert_ne!(cache_key(&req("a", &[1, 2, 3])), cache_key(&req("a", &[1, 2, 4])));
        assert_ne!(cache_key(&req("a", &[1, 2, 3])), cache_key(&req("b", &[1, 2, 3])));
        assert_eq!(cache_key(&req("a", &[])).len(), 64);
    }

    #[test]
    fn system_must_come_first() {
        let mut r = req("a", &[]);
        r.messages.push(Message::text(Role::System, "again"));
        assert!(r.validate().is_err());
        assert!(req("a", &[]).validate().is_ok());
    }

    #[test]
    fn scripted_runs_out() {
        let ctx_scene = Scene::empty();
        let obs = observe(&ctx_scene);
        let goal = GoalSpec::language("x", GoalPredicate::MatchingColors, Vec::new());
        let ctx = BackendContext { observation: &obs, goal: &goal };
        let mut s = Scripted::new(["one"]);
        assert_eq!(s.complete(&req("a", &[]), &ctx).unwrap(), "one");
        assert_eq!(s.complete(&req("a", &[]), &ctx), Err(BackendError::ScriptExhausted));
        let mut r = Scripted::repeating("again");
        for _ in 0..3 {
            assert_eq!(r.complete(&req("a", &[]), &ctx).unwrap(), "again");
        }
    }

    fn three_blocks() -> Scene {
        let colors = [Color::Red, Color::Green, Color::Blue];
        let mut b = Scene::builder();
        for (k, c) in colors.iter().enumerate() {
            b = b
                .object(ObjectDescriptor::new(alloc::format!("block_{k}"), Category::Block, *c, Cell::new(k as u8, 1)))
                .object(ObjectDescriptor::new(
                    alloc::format!("bowl_{k}"),
                    Category::Bowl,
                    *c,
                    Cell::new(k as u8 + 4, 3),
                ));
        }
        b.build().unwrap()
    }

    #[test]
    fn oracle_response_round_trips_the_plan() {
        let s = three_blocks();
        let goal = GoalSpec::language(
            "put all the blocks in the bowls with matching colors",
            GoalPredicate::MatchingColors,
            Vec::new(),
        );
        let text = OracleBacked::new().respond(&observe(&s), &goal);
        let expected = oracle_solve(&s, &goal, DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(expected.steps.len(), 6);
        assert_eq!(parse_plan(&text, s.objects()), ParseOutcome::Parsed(expected));
    }

    #[test]
    fn oracle_on_solved_scene_says_done() {
        let s = Scene::empty();
        let goal = GoalSpec::language("x", GoalPredicate::MatchingColors, Vec::new());
        let text = OracleBacked::new().respond(&observe(&s), &goal);
        assert_eq!(parse_plan(&text, s.objects()), ParseOutcome::Parsed(Plan::done()));
    }
}
