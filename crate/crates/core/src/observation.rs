//! Agent-facing observations of a scene.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::scene::{Category, ObjectDescriptor, ObjectId, Relation, Scene, SceneError, Support};

/// Raster style. Goal images use a different palette and outline treatment
/// from ordinary camera observations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderStyle {
    #[default]
    Camera,
    GoalSketch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub visible: Vec<ObjectDescriptor>,
    pub visible_relations: Vec<Relation>,
    pub container_open: BTreeMap<ObjectId, bool>,
    pub held: Option<ObjectId>,
    pub text: String,
    #[serde(skip)]
    pub image: Option<Vec<u8>>,
}

impl Observation {
    pub fn is_visible(&self, id: &ObjectId) -> bool {
        self.visible.iter().any(|o| &o.id == id)
    }

    /// Digest over the text and (if present) the image bytes.
    pub fn digest(&self) -> String {
        let mut buf = Vec::with_capacity(self.text.len() + 32);
        buf.extend_from_slice(self.text.as_bytes());
        if let Some(img) = &self.image {
            buf.extend_from_slice(sha256_hex(img).as_bytes());
        }
        sha256_hex(&buf)
    }

    /// The scene as the agent can reconstruct it: only visible objects and
    /// the relations between them.
    pub fn to_scene(&self) -> Result<Scene, SceneError> {
        let held = self.held.clone();
        Scene::from_parts(
            self.visible.clone(),
            self.visible_relations.clone(),
            self.container_open.clone(),
            held,
            Vec::new(),
        )
    }
}

/// Text-only observation of `scene`; the image slot is left empty.
pub fn observe(scene: &Scene) -> Observation {
    let visible_idx: Vec<usize> = (0..scene.len()).filter(|&i| scene.is_visible_index(i)).collect();
    let visible: Vec<ObjectDescriptor> = visible_idx.iter().map(|&i| scene.objects()[i].clone()).collect();
    let visible_relations: Vec<Relation> = visible_idx.iter().filter_map(|&i| scene.relation_of(i)).collect();
    let container_open = visible_idx
        .iter()
        .filter(|&&i| scene.objects()[i].category == Category::Container)
        .map(|&i| (scene.objects()[i].id.clone(), scene.is_open_index(i)))
        .collect();
    Observation {
        text: render_text(scene, &visible_idx),
        visible,
        visible_relations,
        container_open,
        held: scene.held().cloned(),
        image: None,
    }
}

fn render_text(scene: &Scene, visible_idx: &[usize]) -> String {
    let objs = scene.objects();
    let mut out = String::from("Visible objects: ");
    for (k, &i) in visible_idx.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        out.push_str(&objs[i].phrase());
    }
    out.push('\n');
    for &i in visible_idx {
        let o = &objs[i];
        let _ = write!(out, "{}: ", o.id);
        match scene.support(i) {
            Support::Table => {
                let _ = write!(out, "on the table at column {}, row {}", o.cell.col, o.cell.row);
            }
            Support::On(j) => {
                let _ = write!(out, "on {}", objs[j as usize].id);
            }
            Support::In(j) => {
                let _ = write!(out, "in {}", objs[j as usize].id);
            }
            Support::Held => out.push_str("in gripper"),
            Support::Taken => out.push_str("gone"),
        }
        if o.category == Category::Container {
            out.push_str(if scene.is_open_index(i) { ", open" } else { ", closed" });
        }
        out.push('\n');
    }
    out
}

/// Produces observations for the executor. The std crate supplies an
/// implementation that also attaches a rendered PNG.
pub trait Observer {
    fn observe(&self, scene: &Scene) -> Observation;

    /// Image of a goal scene, for goal-image tasks.
    fn render_goal(&self, _goal: &Scene) -> Option<Vec<u8>> {
        None
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TextObserver;

impl Observer for TextObserver {
    fn observe(&self, scene: &Scene) -> Observation {
        observe(scene)
    }
}
