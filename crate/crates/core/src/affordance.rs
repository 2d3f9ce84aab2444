//! Affordance models: how feasible an action looks in the current scene.

use serde::{Deserialize, Serialize};

use crate::planners::Choice;
use crate::scene::Scene;
use crate::skills::{precondition, SkillInvocation, Verdict};

/// Score given to a detected action. Below 1 so language scores still
/// matter in products.
pub const DETECTION_CEILING: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffordanceConfig {
    /// Chance a visible object is missed.
    pub false_negative_rate: f64,
    /// Chance a named but absent object is reported.
    pub false_positive_rate: f64,
    pub seed: u64,
}

impl Default for AffordanceConfig {
    fn default() -> Self {
        AffordanceConfig { false_negative_rate: 0.05, false_positive_rate: 0.01, seed: 0 }
    }
}

impl AffordanceConfig {
    pub fn exact() -> Self {
        AffordanceConfig { false_negative_rate: 0.0, false_positive_rate: 0.0, seed: 0 }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.false_negative_rate) && (0.0..=1.0).contains(&self.false_positive_rate)
    }
}

/// 1 if the precondition holds, else 0.
pub fn gt_affordance(scene: &Scene, inv: &SkillInvocation) -> f64 {
    match precondition(scene, inv) {
        Ok(Verdict::Holds) => 1.0,
        _ => 0.0,
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` fixed by (config seed, episode seed, object).
fn detection_draw(cfg: &AffordanceConfig, episode_seed: u64, object: &str) -> f64 {
    let h = object.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3));
    let z = mix(mix(cfg.seed ^ mix(episode_seed)) ^ h);
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Emulated open-vocabulary detector. It scores whether the named objects
/// are seen, not whether the action's precondition holds.
pub fn detector_affordance(scene: &Scene, inv: &SkillInvocation, cfg: &AffordanceConfig, episode_seed: u64) -> f64 {
    let mut all_detected = true;
    let mut absent = false;
    for id in &inv.args {
        match scene.index_of(id) {
            None => absent = true,
            Some(i) if scene.is_taken(i) => absent = true,
            // Containers are opaque to the detector.
            Some(i) if scene.is_hidden(i) => return 0.0,
            Some(_) => {
                if detection_draw(cfg, episode_seed, id.as_str()) < cfg.false_negative_rate {
                    all_detected = false;
                }
            }
        }
    }
    if absent {
        DETECTION_CEILING * cfg.false_positive_rate
    } else if all_detected {
        DETECTION_CEILING
    } else {
        0.0
    }
}

pub trait Affordance {
    fn name(&self) -> &str;
    fn score(&self, scene: &Scene, choice: &Choice) -> f64;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GroundTruth;

impl Affordance for GroundTruth {
    fn name(&self) -> &str {
        "gt"
    }

    fn score(&self, scene: &Scene, choice: &Choice) -> f64 {
        match choice {
            Choice::Done => 1.0,
            Choice::Step { invocation } => gt_affordance(scene, invocation),
        }
    }
}

/// Detector with per-episode frozen draws.
#[derive(Clone, Debug)]
pub struct Detector {
    pub config: AffordanceConfig,
    pub episode_seed: u64,
}

impl Detector {
    pub fn new(config: AffordanceConfig, episode_seed: u64) -> Self {
        Detector { config, episode_seed }
    }
}

impl Affordance for Detector {
    fn name(&self) -> &str {
        "detector"
    }

    fn score(&self, scene: &Scene, choice: &Choice) -> f64 {
        match choice {
            Choice::Done => DETECTION_CEILING,
            Choice::Step { invocation } => detector_affordance(scene, invocation, &self.config, self.episode_seed),
        }
    }
}

/// The same value for every action.
#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl Affordance for Constant {
    fn name(&self) -> &str {
        "constant"
    }

    fn score(&self, _scene: &Scene, _choice: &Choice) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Category, Cell, Color, ObjectDescriptor};

    fn scene() -> Scene {
        Scene::builder()
            .object(ObjectDescriptor::new("block_0", Category::Block, Color::Red, Cell::new(0, 0)))
            .object(ObjectDescriptor::new("block_1", Category::Block, Color::Blue, Cell::new(1, 0)))
            .object(
                ObjectDescriptor::new("drawer_0", Category::Container, Color::Brown, Cell::new(2, 0))
                    .with_noun("drawer"),
            )
            .on("block_1", "block_0")
            .build()
            .unwrap()
    }

    fn hidden() -> Scene {
        Scene::builder()
            .object(ObjectDescriptor::new("block_0", Category::Block, Color::Red, Cell::new(0, 0)))
            .object(
                ObjectDescriptor::new("drawer_0", Category::Container, Color::Brown, Cell::new(2, 0))
                    .with_noun("drawer"),
            )
            .inside("block_0", "drawer_0")
            .build()
            .unwrap()
    }

    #[test]
    fn gt_values() {
        assert_eq!(gt_affordance(&scene(), &SkillInvocation::pick_up("block_1")), 1.0);
        assert_eq!(gt_affordance(&hidden(), &SkillInvocation::pick_up("block_0")), 0.0);
        assert_eq!(gt_affordance(&hidden(), &SkillInvocation::wait()), 1.0);
    }

    #[test]
    fn detector_scores_visibility_not_preconditions() {
        let cfg = AffordanceConfig::exact();
        // block_0 has block_1 on it: not pickable, but it is seen.
        assert_eq!(gt_affordance(&scene(), &SkillInvocation::pick_up("block_0")), 0.0);
        assert_eq!(detector_affordance(&scene(), &SkillInvocation::pick_up("block_0"), &cfg, 1), DETECTION_CEILING);
    }

    #[test]
    fn detector_zero_for_hidden_any_rates() {
        for fn_rate in [0.0, 0.5, 1.0] {
            for fp in [0.0, 1.0] {
                let cfg = AffordanceConfig { false_negative_rate: fn_rate, false_positive_rate: fp, seed: 3 };
                assert_eq!(detector_affordance(&hidden(), &SkillInvocation::pick_up("block_0"), &cfg, 9), 0.0);
            }
        }
    }

    #[test]
    fn detector_full_miss_rate() {
        let cfg = AffordanceConfig { false_negative_rate: 1.0, false_positive_rate: 0.0, seed: 0 };
        for inv in [SkillInvocation::pick_up("block_1"), SkillInvocation::open("drawer_0")] {
            assert_eq!(detector_affordance(&scene(), &inv, &cfg, 4), 0.0);
        }
    }

    #[test]
    fn absent_object_scores_false_positive() {
        let cfg = AffordanceConfig { false_negative_rate: 0.0, false_positive_rate: 0.5, seed: 0 };
        let v = detector_affordance(&scene(), &SkillInvocation::pick_up("ghost"), &cfg, 0);
        assert!((v - 0.45).abs() < 1e-12);
    }

    #[test]
    fn draws_frozen_within_episode() {
        let cfg = AffordanceConfig { false_negative_rate: 0.5, ..AffordanceConfig::default() };
        let d = Detector::new(cfg, 17);
        let c = Choice::step(SkillInvocation::pick_up("block_1"));
        let first = d.score(&scene(), &c);
        for _ in 0..5 {
            assert_eq!(d.score(&scene(), &c), first);
        }
    }

    #[test]
    fn miss_rate_is_roughly_respected() {
        let cfg = AffordanceConfig { false_negative_rate: 0.3, false_positive_rate: 0.0, seed: 0 };
        let missed = (0..2000u64).filter(|e| detection_draw(&cfg, *e, "block_0") < 0.3).count();
        assert!((500..700).contains(&missed), "{missed}");
    }
}
