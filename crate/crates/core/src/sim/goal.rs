use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::scene::{Category, ObjectDescriptor, ObjectId, Scene, Support};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    Language,
    GoalImage,
    Combined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LetterOrder {
    Alphabetical,
    Reverse,
}

/// Compiled success predicate. Attribute-based variants are evaluated
/// against whatever objects the scene holds, so they also work on partial
/// (belief) scenes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "predicate", rename_all = "snake_case")]
pub enum GoalPredicate {
    /// `object` directly inside `container`.
    InContainer { object: ObjectId, container: ObjectId },
    /// Every listed object directly inside `container`.
    AllIn { objects: Vec<ObjectId>, container: ObjectId },
    /// Every block directly inside `container`.
    AllBlocksIn { container: ObjectId },
    /// Every block that has a same-colored bowl sits in such a bowl.
    MatchingColors,
    /// Every block sits in a bowl of a different color.
    MismatchedColors,
    /// The selected blocks form one tower with nothing else stacked on it.
    SingleTower { warm_only: bool },
    /// The blocks form exactly two towers of equal height.
    TwoEqualTowers,
    /// Letter columns strictly increase in the given glyph order.
    LettersOrdered { order: LetterOrder },
    /// The letters of `word` appear left to right in word order.
    SpellWord { word: String },
    /// Vowels inside `container`, consonants outside.
    VowelsIn { container: ObjectId },
    /// Letters of `word` inside `container`, all others outside.
    WordLettersIn { word: String, container: ObjectId },
    /// Every vowel left of every consonant.
    VowelsLeft,
    /// First letter of `word` left of all other letters, last letter right of them.
    WordEnds { word: String },
    /// Every bowl left of every block.
    BowlsLeftOfBlocks,
    /// Listed objects have the same support as in the goal scene.
    MatchGoalScene { objects: Vec<ObjectId> },
    /// A person has taken `object` out of the gripper.
    HandedOver { object: ObjectId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub mode: GoalMode,
    pub instruction: String,
    /// Goal scene for image modes; the goal image is rendered from it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_scene: Option<Scene>,
    pub predicate: GoalPredicate,
    /// Objects the instruction is about.
    pub relevant: Vec<ObjectDescriptor>,
}

impl GoalSpec {
    pub fn language(instruction: impl Into<String>, predicate: GoalPredicate, relevant: Vec<ObjectDescriptor>) -> Self {
        GoalSpec { mode: GoalMode::Language, instruction: instruction.into(), goal_scene: None, predicate, relevant }
    }

    /// State the oracle search aims for. Hand-over goals are completed by a
    /// person, so the robot only needs to be holding the object.
    pub(crate) fn search_target(&self, scene: &Scene) -> bool {
        match &self.predicate {
            GoalPredicate::HandedOver { object } => goal_satisfied(scene, self) || scene.held() == Some(object),
            _ => goal_satisfied(scene, self),
        }
    }

    pub(crate) fn needs_wait_tail(&self, scene: &Scene) -> bool {
        matches!(&self.predicate, GoalPredicate::HandedOver { object } if scene.held() == Some(object))
    }
}

/// Success test: the predicate holds and the gripper is empty.
pub fn goal_satisfied(scene: &Scene, goal: &GoalSpec) -> bool {
    scene.held_index().is_none() && predicate_holds(scene, &goal.predicate, goal.goal_scene.as_ref())
}

fn direct_in(scene: &Scene, i: usize, container: usize) -> bool {
    scene.support(i) == Support::In(container as u16)
}

fn indices<'a>(scene: &'a Scene, f: impl Fn(&ObjectDescriptor) -> bool + 'a) -> impl Iterator<Item = usize> + 'a {
    scene.objects().iter().enumerate().filter(move |(i, o)| !scene.is_taken(*i) && f(o)).map(|(i, _)| i)
}

fn letters(scene: &Scene) -> Vec<usize> {
    indices(scene, |o| o.category == Category::Letter).collect()
}

fn glyph(scene: &Scene, i: usize) -> char {
    scene.objects()[i].glyph.unwrap_or(' ')
}

/// Columns of `items` strictly increase in the given order.
fn strictly_increasing(scene: &Scene, items: &[usize]) -> bool {
    let mut prev: Option<u8> = None;
    for &i in items {
        let Some(c) = scene.column(i) else { return false };
        if prev.is_some_and(|p| p >= c) {
            return false;
        }
        prev = Some(c);
    }
    true
}

fn all_left_of(scene: &Scene, left: &[usize], right: &[usize]) -> bool {
    let cols = |xs: &[usize]| xs.iter().map(|&i| scene.column(i)).collect::<Option<Vec<u8>>>();
    let (Some(l), Some(r)) = (cols(left), cols(right)) else { return false };
    match (l.iter().max(), r.iter().min()) {
        (Some(a), Some(b)) => a < b,
        _ => true,
    }
}

/// Blocks (optionally restricted) arranged as towers; returns tower heights,
/// or `None` if a non-member sits on a member.
fn tower_heights(scene: &Scene, members: &[usize]) -> Option<Vec<usize>> {
    let is_member = |j: usize| members.contains(&j);
    for (k, s) in scene.state().supports.iter().enumerate() {
        if let Support::On(j) = *s {
            if is_member(j as usize) && !is_member(k) {
                return None;
            }
        }
    }
    let mut heights = Vec::new();
    for &b in members {
        let on_member = matches!(scene.support(b), Support::On(j) if is_member(j as usize));
        if on_member {
            continue;
        }
        if matches!(scene.support(b), Support::Held | Support::Taken) {
            return None;
        }
        let mut h = 1;
        let mut top = b;
        while let Some(next) = members.iter().copied().find(|&m| scene.support(m) == Support::On(top as u16)) {
            h += 1;
            top = next;
        }
        heights.push(h);
    }
    Some(heights)
}

fn word_letters(scene: &Scene, word: &str) -> Option<Vec<usize>> {
    let ls = letters(scene);
    word.chars()
        .map(|c| {
            let g = c.to_ascii_uppercase();
            ls.iter().copied().find(|&i| glyph(scene, i) == g)
        })
        .collect()
}

pub(crate) fn predicate_holds(scene: &Scene, pred: &GoalPredicate, goal_scene: Option<&Scene>) -> bool {
    let idx = |id: &ObjectId| scene.index_of(id);
    match pred {
        GoalPredicate::InContainer { object, container } => match (idx(object), idx(container)) {
            (Some(o), Some(c)) => direct_in(scene, o, c),
            _ => false,
        },
        GoalPredicate::AllIn { objects, container } => {
            let Some(c) = idx(container) else { return false };
            objects.iter().all(|o| idx(o).is_some_and(|o| direct_in(scene, o, c)))
        }
        GoalPredicate::AllBlocksIn { container } => {
            let Some(c) = idx(container) else { return false };
            indices(scene, |o| o.category == Category::Block).all(|b| direct_in(scene, b, c))
        }
        GoalPredicate::MatchingColors => {
            let bowls: Vec<usize> = indices(scene, |o| o.category == Category::Bowl).collect();
            indices(scene, |o| o.category == Category::Block).all(|b| {
                let color = scene.objects()[b].color;
                let matching: Vec<usize> =
                    bowls.iter().copied().filter(|&w| scene.objects()[w].color == color).collect();
                matching.is_empty() || matching.iter().any(|&w| direct_in(scene, b, w))
            })
        }
        GoalPredicate::MismatchedColors => {
            indices(scene, |o| o.category == Category::Block).all(|b| match scene.support(b) {
                Support::In(w) => {
                    let w = scene.objects()[w as usize].clone();
                    w.category == Category::Bowl && w.color != scene.objects()[b].color
                }
                _ => false,
            })
        }
        GoalPredicate::SingleTower { warm_only } => {
            let members: Vec<usize> =
                indices(scene, |o| o.category == Category::Block && (!warm_only || o.color.is_warm())).collect();
            members.is_empty() || tower_heights(scene, &members).is_some_and(|h| h.len() == 1)
        }
        GoalPredicate::TwoEqualTowers => {
            let members: Vec<usize> = indices(scene, |o| o.category == Category::Block).collect();
            tower_heights(scene, &members).is_some_and(|h| h.len() == 2 && h[0] == h[1])
        }
        GoalPredicate::LettersOrdered { order } => {
            let mut ls = letters(scene);
            ls.sort_by_key(|&i| glyph(scene, i));
            if *order == LetterOrder::Reverse {
                ls.reverse();
            }
            strictly_increasing(scene, &ls)
        }
        GoalPredicate::SpellWord { word } => {
            word_letters(scene, word).is_some_and(|ls| strictly_increasing(scene, &ls))
        }
        GoalPredicate::VowelsIn { container } => {
            let Some(c) = idx(container) else { return false };
            letters(scene).into_iter().all(|l| direct_in(scene, l, c) == scene.objects()[l].is_vowel())
        }
        GoalPredicate::WordLettersIn { word, container } => {
            let Some(c) = idx(container) else { return false };
            let upper: Vec<char> = word.chars().map(|c| c.to_ascii_uppercase()).collect();
            letters(scene).into_iter().all(|l| direct_in(scene, l, c) == upper.contains(&glyph(scene, l)))
        }
        GoalPredicate::VowelsLeft => {
            let (v, c): (Vec<usize>, Vec<usize>) =
                letters(scene).into_iter().partition(|&l| scene.objects()[l].is_vowel());
            all_left_of(scene, &v, &c)
        }
        GoalPredicate::WordEnds { word } => {
            let Some(ls) = word_letters(scene, word) else { return false };
            let (Some(&first), Some(&last)) = (ls.first(), ls.last()) else { return true };
            let all = letters(scene);
            let others_first: Vec<usize> = all.iter().copied().filter(|&l| l != first).collect();
            let others_last: Vec<usize> = all.iter().copied().filter(|&l| l != last).collect();
            all_left_of(scene, &[first], &others_first) && all_left_of(scene, &others_last, &[last])
        }
        GoalPredicate::BowlsLeftOfBlocks => {
            let bowls: Vec<usize> = indices(scene, |o| o.category == Category::Bowl).collect();
            let blocks: Vec<usize> = indices(scene, |o| o.category == Category::Block).collect();
            all_left_of(scene, &bowls, &blocks)
        }
        GoalPredicate::MatchGoalScene { objects } => {
            let Some(goal) = goal_scene else { return false };
            objects.iter().all(|id| match (scene.index_of(id), goal.index_of(id)) {
                (Some(i), Some(g)) => {
                    let support_id = |s: &Scene, k: usize| s.support(k).target().map(|t| s.objects()[t].id.clone());
                    let kind = |s: Support| match s {
                        Support::On(_) => 1,
                        Support::In(_) => 2,
                        Support::Table => 0,
                        Support::Held => 3,
                        Support::Taken => 4,
                    };
                    kind(scene.support(i)) == kind(goal.support(g)) && support_id(scene, i) == support_id(goal, g)
                }
                _ => false,
            })
        }
        GoalPredicate::HandedOver { object } => idx(object).is_some_and(|o| scene.is_taken(o)),
    }
}
