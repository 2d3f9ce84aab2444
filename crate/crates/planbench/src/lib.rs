//! Std companion to `planbench-core`: PNG rendering, chat-completion
//! backends with an on-disk response cache, the benchmark harness and the
//! report formats used by the `planbench` binary.

pub mod harness;
pub mod render;
pub mod vlm;

use planbench_core::{observe, Observation, Observer, RenderStyle, Scene};

/// Observer that attaches a camera-style PNG to every observation.
#[derive(Clone, Copy, Debug, Default)]
pub struct ImageObserver;

impl Observer for ImageObserver {
    fn observe(&self, scene: &Scene) -> Observation {
        let mut obs = observe(scene);
        obs.image = Some(render::render_png(scene, RenderStyle::Camera));
        obs
    }

    fn render_goal(&self, goal: &Scene) -> Option<Vec<u8>> {
        Some(render::render_png(goal, RenderStyle::GoalSketch))
    }
}
