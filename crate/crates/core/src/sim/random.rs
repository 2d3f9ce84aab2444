//! Random valid scenes and invocations, for property tests and fuzzing.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::scene::{Category, Cell, Color, ObjectDescriptor, ObjectId, Relation, Scene, Size};
use crate::skills::{Skill, SkillInvocation};

const CATEGORIES: [Category; 6] =
    [Category::Block, Category::Bowl, Category::Letter, Category::Container, Category::Fixture, Category::Misc];

/// A structurally valid scene with up to `max_objects` objects.
pub fn random_scene<R: Rng + ?Sized>(rng: &mut R, max_objects: usize) -> Scene {
    let n = rng.gen_range(1..=max_objects.max(1));
    let mut objects: Vec<ObjectDescriptor> = Vec::with_capacity(n);
    let mut relations = Vec::new();
    let mut open = BTreeMap::new();
    let mut has_top = alloc::vec![false; n];
    let mut letters: Vec<char> = ('A'..='Z').collect();
    letters.shuffle(rng);
    for i in 0..n {
        let cat = *CATEGORIES.choose(rng).unwrap();
        let color = *Color::ALL.choose(rng).unwrap();
        let cell = Cell::new(rng.gen_range(0..8), rng.gen_range(0..7));
        let id = format!("o{:02}", i);
        let mut d = if cat == Category::Letter {
            ObjectDescriptor::letter(id, letters[i % 26], color, cell)
        } else {
            ObjectDescriptor::new(id, cat, color, cell)
        };
        if cat == Category::Bowl && rng.gen_bool(0.3) {
            d = d.with_noun("cup").with_size(Size::Small);
        }
        // Distinct phrases, so every object can be named unambiguously.
        for c in Color::ALL.iter().cycle().skip(rng.gen_range(0..Color::ALL.len())).take(Color::ALL.len()) {
            if !objects.iter().any(|o| o.phrase() == d.phrase()) {
                break;
            }
            d.color = *c;
        }
        if cat == Category::Misc {
            d = d.with_size(if rng.gen_bool(0.7) { Size::Small } else { Size::Large });
        }
        if cat == Category::Container {
            open.insert(d.id.clone(), rng.gen_bool(0.5));
        }
        // Supports only point to earlier objects, so the graph stays acyclic.
        if i > 0 && rng.gen_bool(0.4) {
            let j = rng.gen_range(0..i);
            let sup: &ObjectDescriptor = &objects[j];
            if sup.category.is_receptacle() {
                relations.push(Relation::inside(d.id.clone(), sup.id.clone()));
            } else if sup.category.is_surface() && !has_top[j] {
                has_top[j] = true;
                relations.push(Relation::on(d.id.clone(), sup.id.clone()));
            }
        }
        objects.push(d);
    }
    let supported: Vec<&ObjectId> = relations.iter().map(|r| r.subject()).collect();
    let held_candidates: Vec<usize> =
        (0..n).filter(|&i| objects[i].is_graspable() && !has_top[i] && !supported.contains(&&objects[i].id)).collect();
    let held = if rng.gen_bool(0.3) { held_candidates.choose(rng).map(|&i| objects[i].id.clone()) } else { None };
    Scene::from_parts(objects, relations, open, held, Vec::new()).expect("generator only builds valid scenes")
}

/// A random type-agnostic invocation over the scene's objects; it may or
/// may not satisfy its precondition.
pub fn random_invocation<R: Rng + ?Sized>(rng: &mut R, scene: &Scene) -> SkillInvocation {
    let skill = *Skill::ALL.choose(rng).unwrap();
    let mut pick = || scene.objects().choose(rng).map(|o| o.id.clone()).unwrap_or_else(|| ObjectId::new("none"));
    let args = (0..skill.arity()).map(|_| pick()).collect();
    SkillInvocation::new(skill, args)
}
