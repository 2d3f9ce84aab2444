//! Prompt construction. The wording lives in a versioned text file; the
//! response contract it describes is what the plan parser expects.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::chat::{ChatRequest, Message, Part, Role};
use crate::digest::sha256_hex;

pub const PROMPT_VERSION: &str = "planner_v1";
pub const PROMPT_TEMPLATE: &str = include_str!("../../prompts/planner_v1.txt");

fn section(name: &str) -> String {
    let header = alloc::format!("[{}]", name);
    let mut out = Vec::new();
    let mut inside = false;
    for line in PROMPT_TEMPLATE.lines() {
        if line.starts_with('[') && line.ends_with(']') {
            inside = line == header;
            continue;
        }
        if inside {
            out.push(line);
        }
    }
    out.join("\n").trim().into()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservationPart {
    Image {
        #[serde(skip)]
        png: Vec<u8>,
        sha256: String,
    },
    SceneText {
        text: String,
    },
    None,
}

impl ObservationPart {
    pub fn image(png: Vec<u8>) -> Self {
        let sha256 = sha256_hex(&png);
        ObservationPart::Image { png, sha256 }
    }
}

/// Everything that goes into one planning request. There are no worked
/// examples: the model sees the rules, the task and the current state only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub version: String,
    pub system: String,
    pub instruction: String,
    pub history: Vec<String>,
    pub observation: ObservationPart,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_image: Option<ObservationPart>,
    pub contract: String,
}

impl PromptSpec {
    pub fn new(instruction: &str, history: Vec<String>, observation: ObservationPart) -> Self {
        PromptSpec {
            version: PROMPT_VERSION.into(),
            system: section("system"),
            instruction: instruction.into(),
            history,
            observation,
            goal_image: None,
            contract: section("contract"),
        }
    }

    pub fn to_request(&self, model: &str, max_tokens: u32) -> ChatRequest {
        let mut parts = alloc::vec![Part::Text(alloc::format!("Instruction: {}", self.instruction))];
        if let Some(ObservationPart::Image { png, .. }) = &self.goal_image {
            parts.push(Part::Text("Goal image (the arrangement to reach):".into()));
            parts.push(Part::Image(png.clone()));
        }
        let mut hist = String::from("Steps executed so far:");
        if self.history.is_empty() {
            hist.push_str(" none");
        }
        for (k, h) in self.history.iter().enumerate() {
            hist.push_str(&alloc::format!("\n{}. {}", k + 1, h));
        }
        parts.push(Part::Text(hist));
        match &self.observation {
            ObservationPart::Image { png, .. } => {
                parts.push(Part::Text("Current observation:".into()));
                parts.push(Part::Image(png.clone()));
            }
            ObservationPart::SceneText { text } => {
                parts.push(Part::Text(alloc::format!("Current scene:\n{}", text.trim_end())))
            }
            ObservationPart::None => {}
        }
        parts.push(Part::Text(self.contract.clone()));
        let mut req = ChatRequest::new(
            model,
            alloc::vec![Message::text(Role::System, self.system.clone()), Message { role: Role::User, parts }],
        );
        req.max_tokens = max_tokens;
        req
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_load() {
        let p = PromptSpec::new("stack all the blocks", Vec::new(), ObservationPart::None);
        assert!(p.system.contains("pick up <object>"));
        assert!(p.contract.starts_with("Reply in exactly this format"));
        assert!(!p.system.contains("[contract]"));
    }

    #[test]
    fn no_worked_examples() {
        let p = PromptSpec::new(
            "x",
            alloc::vec!["pick up red block (failed)".into()],
            ObservationPart::SceneText { text: "t".into() },
        );
        let json = serde_json::to_string(&p).unwrap().to_lowercase();
        assert!(!json.contains("example"));
        assert!(!json.contains("assistant:"));
        let req = p.to_request("m", 100);
        assert!(req.messages.iter().all(|m| m.role != Role::Assistant));
        assert!(req.validate().is_ok());
    }
}
