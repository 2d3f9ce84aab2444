//! Per-task scene generators.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scene::{Category, Cell, Color, ObjectDescriptor, ObjectId, Relation, Scene, Size, GRID_COLS, GRID_ROWS};
use crate::skills::Skill;

use super::goal::{goal_satisfied, GoalMode, GoalPredicate, GoalSpec, LetterOrder};
use super::oracle::{oracle_solve, DEFAULT_MAX_DEPTH};
use super::{Condition, DisturbanceAction, DisturbanceEvent, Episode, Noise, Trigger};

const MAX_ATTEMPTS: usize = 100;
const STACK_NOISE: f64 = 0.3;

const WORDS: [&str; 16] =
    ["cat", "dog", "sun", "map", "box", "pen", "cup", "hat", "fig", "jam", "bed", "fox", "web", "owl", "ant", "bus"];
const VOWELS: [char; 5] = ['A', 'E', 'I', 'O', 'U'];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerationError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("no solvable instance of `{task}` for seed {seed} after {MAX_ATTEMPTS} attempts")]
    GenerationFailed { task: String, seed: u64 },
}

struct Draft {
    objects: Vec<ObjectDescriptor>,
    relations: Vec<Relation>,
    open: BTreeMap<ObjectId, bool>,
    instruction: String,
    predicate: GoalPredicate,
    relevant: Vec<ObjectId>,
    mode: GoalMode,
    goal_relations: Option<Vec<Relation>>,
    noise: Noise,
    disturbances: Vec<DisturbanceEvent>,
}

struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    free_cols: Vec<u8>,
    objects: Vec<ObjectDescriptor>,
    relations: Vec<Relation>,
    open: BTreeMap<ObjectId, bool>,
    counters: BTreeMap<String, usize>,
}

impl<'r> Gen<'r> {
    fn new(rng: &'r mut ChaCha8Rng) -> Self {
        let mut free_cols: Vec<u8> = (0..GRID_COLS).collect();
        free_cols.shuffle(rng);
        Gen {
            rng,
            free_cols,
            objects: Vec::new(),
            relations: Vec::new(),
            open: BTreeMap::new(),
            counters: BTreeMap::new(),
        }
    }

    fn next_cell(&mut self) -> Cell {
        let col = self.free_cols.pop().expect("at most eight table-level objects per task");
        Cell::new(col, self.rng.gen_range(0..GRID_ROWS))
    }

    fn next_id(&mut self, noun: &str) -> String {
        let k = self.counters.entry(noun.to_string()).or_insert(0);
        let id = alloc::format!("{}_{}", noun, k);
        *k += 1;
        id
    }

    fn add(&mut self, category: Category, color: Color, noun: Option<&str>, size: Size) -> ObjectId {
        let word = noun.unwrap_or(category.noun());
        let id = self.next_id(word);
        let cell = self.next_cell();
        let mut d = ObjectDescriptor::new(id, category, color, cell).with_size(size);
        if let Some(n) = noun {
            d = d.with_noun(n);
        }
        if category == Category::Container {
            self.open.insert(d.id.clone(), false);
        }
        let out = d.id.clone();
        self.objects.push(d);
        out
    }

    fn block(&mut self, color: Color) -> ObjectId {
        self.add(Category::Block, color, None, Size::Medium)
    }

    fn bowl(&mut self, color: Color) -> ObjectId {
        self.add(Category::Bowl, color, None, Size::Medium)
    }

    fn pad(&mut self, color: Color) -> ObjectId {
        self.add(Category::Fixture, color, Some("pad"), Size::Medium)
    }

    fn letter(&mut self, glyph: char) -> ObjectId {
        let id = alloc::format!("letter_{}", glyph.to_ascii_lowercase());
        let cell = self.next_cell();
        let color = *Color::ALL.choose(self.rng).unwrap();
        let d = ObjectDescriptor::letter(id, glyph, color, cell);
        let out = d.id.clone();
        self.objects.push(d);
        out
    }

    /// An object stored inside `container`; it shares the container's cell.
    fn add_inside(&mut self, category: Category, color: Color, noun: &str, container: &ObjectId) -> ObjectId {
        let id = self.next_id(noun);
        let cell = self.objects.iter().find(|o| &o.id == container).map(|o| o.cell).unwrap_or(Cell::new(0, 0));
        let d = ObjectDescriptor::new(id, category, color, cell).with_noun(noun).with_size(Size::Small);
        let out = d.id.clone();
        self.objects.push(d);
        self.relations.push(Relation::inside(out.clone(), container.clone()));
        out
    }

    fn colors(&mut self, k: usize) -> Vec<Color> {
        let mut all = Color::ALL.to_vec();
        all.shuffle(self.rng);
        all.truncate(k);
        all
    }

    fn colors_excluding(&mut self, k: usize, used: &[Color]) -> Vec<Color> {
        let mut all: Vec<Color> = Color::ALL.iter().copied().filter(|c| !used.contains(c)).collect();
        all.shuffle(self.rng);
        all.truncate(k);
        all
    }

    fn glyphs(&mut self, k: usize, exclude: &[char]) -> Vec<char> {
        let mut pool: Vec<char> = ('A'..='Z').filter(|c| !exclude.contains(c)).collect();
        pool.shuffle(self.rng);
        pool.truncate(k);
        pool
    }

    /// Letters with at least one vowel and one consonant.
    fn mixed_glyphs(&mut self, k: usize) -> Vec<char> {
        loop {
            let g = self.glyphs(k, &[]);
            let v = g.iter().filter(|c| VOWELS.contains(c)).count();
            if v > 0 && v < k {
                return g;
            }
        }
    }

    fn word(&mut self) -> &'static str {
        WORDS.choose(self.rng).unwrap()
    }

    fn draft(self, instruction: String, predicate: GoalPredicate, relevant: Vec<ObjectId>) -> Draft {
        Draft {
            objects: self.objects,
            relations: self.relations,
            open: self.open,
            instruction,
            predicate,
            relevant,
            mode: GoalMode::Language,
            goal_relations: None,
            noise: Noise::none(),
            disturbances: Vec::new(),
        }
    }
}

fn all_of(g: &Gen<'_>, cat: Category) -> Vec<ObjectId> {
    g.objects.iter().filter(|o| o.category == cat).map(|o| o.id.clone()).collect()
}

fn draft_for(task_id: &str, rng: &mut ChaCha8Rng) -> Option<Draft> {
    let mut g = Gen::new(rng);
    let d = match task_id {
        "bb_pick_place" => {
            let n = g.rng.gen_range(2..=3);
            let m = g.rng.gen_range(2..=3);
            let block_colors = g.colors(n);
            let target = block_colors[0];
            let mut bowl_colors = alloc::vec![target];
            bowl_colors.extend(g.colors_excluding(m - 1, &[target]));
            let blocks: Vec<ObjectId> = block_colors.iter().map(|c| g.block(*c)).collect();
            let bowls: Vec<ObjectId> = bowl_colors.iter().map(|c| g.bowl(*c)).collect();
            let instruction = alloc::format!("put the {0} block in the {0} bowl", target.name());
            let pred = GoalPredicate::InContainer { object: blocks[0].clone(), container: bowls[0].clone() };
            g.draft(instruction, pred, alloc::vec![blocks[0].clone(), bowls[0].clone()])
        }
        "bb_matching" => {
            let n = g.rng.gen_range(2..=3);
            let extra = g.rng.gen_range(0..=1);
            let colors = g.colors(n + extra);
            for c in &colors[..n] {
                g.block(*c);
            }
            for c in &colors {
                g.bowl(*c);
            }
            let mut relevant = all_of(&g, Category::Block);
            relevant.extend(all_of(&g, Category::Bowl));
            g.draft(
                "put all the blocks in the bowls with matching colors".into(),
                GoalPredicate::MatchingColors,
                relevant,
            )
        }
        "bb_stack" | "fb_stack_noisy" => {
            let (n, m) = if task_id == "bb_stack" { (g.rng.gen_range(3..=4), g.rng.gen_range(1..=2)) } else { (3, 1) };
            let colors = g.colors(n + m);
            for c in &colors[..n] {
                g.block(*c);
            }
            for c in &colors[n..] {
                g.bowl(*c);
            }
            let relevant = all_of(&g, Category::Block);
            let mut d =
                g.draft("stack all the blocks".into(), GoalPredicate::SingleTower { warm_only: false }, relevant);
            if task_id == "fb_stack_noisy" {
                d.noise = Noise::pick_place(STACK_NOISE);
            }
            d
        }
        "bb_mismatched" => {
            let n = g.rng.gen_range(2..=3);
            let colors = g.colors(n);
            for c in &colors {
                g.block(*c);
            }
            for c in &colors {
                g.bowl(*c);
            }
            let mut relevant = all_of(&g, Category::Block);
            relevant.extend(all_of(&g, Category::Bowl));
            g.draft(
                "put all the blocks in the bowls with mismatched colors".into(),
                GoalPredicate::MismatchedColors,
                relevant,
            )
        }
        "bb_one_bowl" => {
            let n = g.rng.gen_range(2..=3);
            let colors = g.colors(n + 2);
            for c in &colors[..n] {
                g.block(*c);
            }
            let target = g.bowl(colors[n]);
            g.bowl(colors[n + 1]);
            let mut relevant = all_of(&g, Category::Block);
            relevant.push(target.clone());
            let instruction = alloc::format!("put all the blocks in the {} bowl", colors[n].name());
            g.draft(instruction, GoalPredicate::AllBlocksIn { container: target }, relevant)
        }
        "bb_warm_stack" => {
            let warm_n = g.rng.gen_range(2..=3);
            let mut warm: Vec<Color> = Color::ALL.iter().copied().filter(|c| c.is_warm()).collect();
            warm.shuffle(g.rng);
            warm.truncate(warm_n);
            let mut cool: Vec<Color> = Color::ALL.iter().copied().filter(|c| !c.is_warm()).collect();
            cool.shuffle(g.rng);
            for c in &warm {
                g.block(*c);
            }
            g.block(cool[0]);
            g.bowl(cool[1]);
            let relevant = all_of(&g, Category::Block);
            g.draft(
                "stack all the blocks of warm colors".into(),
                GoalPredicate::SingleTower { warm_only: true },
                relevant,
            )
        }
        "bb_bowls_left_blocks_right" => {
            let colors = g.colors(4);
            g.block(colors[0]);
            g.block(colors[1]);
            g.bowl(colors[2]);
            g.bowl(colors[3]);
            let pad_colors = g.colors(2);
            g.pad(pad_colors[0]);
            g.pad(pad_colors[1]);
            let mut relevant = all_of(&g, Category::Bowl);
            relevant.extend(all_of(&g, Category::Block));
            g.draft(
                "put all the bowls to the left of all the blocks".into(),
                GoalPredicate::BowlsLeftOfBlocks,
                relevant,
            )
        }
        "bb_two_towers" => {
            let colors = g.colors(5);
            for c in &colors[..4] {
                g.block(*c);
            }
            g.bowl(colors[4]);
            let relevant = all_of(&g, Category::Block);
            g.draft("make two towers of equal height with the blocks".into(), GoalPredicate::TwoEqualTowers, relevant)
        }
        "letters_alpha" | "letters_reverse_alpha" => {
            let n = if task_id == "letters_alpha" { g.rng.gen_range(3..=5) } else { g.rng.gen_range(3..=4) };
            for c in g.glyphs(n, &[]) {
                g.letter(c);
            }
            let pads = g.colors(3);
            for c in pads {
                g.pad(c);
            }
            let relevant = all_of(&g, Category::Letter);
            let (instruction, order) = if task_id == "letters_alpha" {
                ("put the letters on the table in alphabetical order", LetterOrder::Alphabetical)
            } else {
                ("put the letters on the table in reverse alphabetical order", LetterOrder::Reverse)
            };
            g.draft(instruction.into(), GoalPredicate::LettersOrdered { order }, relevant)
        }
        "letters_spell_word" | "letters_spell_subset" => {
            let word = g.word();
            let glyphs: Vec<char> = word.chars().map(|c| c.to_ascii_uppercase()).collect();
            let extra = if task_id == "letters_spell_subset" { g.rng.gen_range(1..=2) } else { 0 };
            let mut all = glyphs.clone();
            all.extend(g.glyphs(extra, &glyphs));
            all.shuffle(g.rng);
            for c in all {
                g.letter(c);
            }
            for c in g.colors(3) {
                g.pad(c);
            }
            let relevant = all_of(&g, Category::Letter);
            let instruction = if extra == 0 {
                alloc::format!("spell the word {} with the letters from left to right", word)
            } else {
                alloc::format!("spell the word {} from left to right using some of the letters", word)
            };
            g.draft(instruction, GoalPredicate::SpellWord { word: word.into() }, relevant)
        }
        "letters_vowels_in_bowl" => {
            let n = g.rng.gen_range(3..=4);
            for c in g.mixed_glyphs(n) {
                g.letter(c);
            }
            let color = *Color::ALL.choose(g.rng).unwrap();
            let bowl = g.bowl(color);
            let mut relevant = all_of(&g, Category::Letter);
            relevant.push(bowl.clone());
            g.draft(
                alloc::format!("put the vowels in the {} bowl", color.name()),
                GoalPredicate::VowelsIn { container: bowl },
                relevant,
            )
        }
        "letters_vowels_left" => {
            let n = g.rng.gen_range(3..=4);
            for c in g.mixed_glyphs(n) {
                g.letter(c);
            }
            for c in g.colors(2) {
                g.pad(c);
            }
            let relevant = all_of(&g, Category::Letter);
            g.draft("put all the vowels to the left of all the consonants".into(), GoalPredicate::VowelsLeft, relevant)
        }
        "letters_word_in_bowl" => {
            let word = g.word();
            let glyphs: Vec<char> = word.chars().map(|c| c.to_ascii_uppercase()).collect();
            let extra = g.rng.gen_range(1..=2);
            let mut all = glyphs.clone();
            all.extend(g.glyphs(extra, &glyphs));
            all.shuffle(g.rng);
            for c in all {
                g.letter(c);
            }
            let color = *Color::ALL.choose(g.rng).unwrap();
            let bowl = g.bowl(color);
            let mut relevant = all_of(&g, Category::Letter);
            relevant.push(bowl.clone());
            let instruction = alloc::format!("put the letters of the word {} in the {} bowl", word, color.name());
            g.draft(instruction, GoalPredicate::WordLettersIn { word: word.into(), container: bowl }, relevant)
        }
        "letters_word_position" => {
            let word = g.word();
            let mut glyphs: Vec<char> = word.chars().map(|c| c.to_ascii_uppercase()).collect();
            glyphs.shuffle(g.rng);
            for c in glyphs {
                g.letter(c);
            }
            for c in g.colors(2) {
                g.pad(c);
            }
            let relevant = all_of(&g, Category::Letter);
            let instruction = alloc::format!(
                "put the first letter of {0} to the left of the other letters and its last letter to the right of them",
                word
            );
            g.draft(instruction, GoalPredicate::WordEnds { word: word.into() }, relevant)
        }
        "fb_pack_reversion" => {
            let colors = g.colors(4);
            let bags: Vec<ObjectId> =
                colors[..3].iter().map(|c| g.add(Category::Misc, *c, Some("bag"), Size::Small)).collect();
            let bagbox = g.add(Category::Container, colors[3], Some("box"), Size::Large);
            g.open.insert(bagbox.clone(), true);
            let mut relevant = bags.clone();
            relevant.push(bagbox.clone());
            let pred = GoalPredicate::AllIn { objects: bags, container: bagbox };
            g.draft("pack all the chip bags into the box".into(), pred, relevant)
        }
        "fb_find_hidden" => {
            let colors = g.colors(5);
            let containers = [
                g.add(Category::Container, colors[0], Some("drawer"), Size::Large),
                g.add(Category::Container, colors[1], Some("drawer"), Size::Large),
                g.add(Category::Container, colors[2], Some("cabinet"), Size::Large),
            ];
            let bowl = g.bowl(colors[3]);
            let where_ = g.rng.gen_range(0..3);
            let stapler = g.add_inside(Category::Misc, colors[4], "stapler", &containers[where_]);
            let pred = GoalPredicate::InContainer { object: stapler.clone(), container: bowl.clone() };
            let instruction = alloc::format!("find the stapler and put it in the {} bowl", colors[3].name());
            g.draft(instruction, pred, alloc::vec![stapler, bowl])
        }
        "fb_handover_wait" => {
            let colors = g.colors(2);
            let cola = g.add(Category::Misc, colors[0], Some("cola"), Size::Small);
            g.bowl(colors[1]);
            let take_at = g.rng.gen_range(2..=4);
            let instruction =
                alloc::format!("pick up the {} cola and hold it until a person takes it", colors[0].name());
            let mut d =
                g.draft(instruction, GoalPredicate::HandedOver { object: cola.clone() }, alloc::vec![cola.clone()]);
            d.disturbances.push(DisturbanceEvent {
                trigger: Trigger::OnCondition {
                    condition: Condition::HeldFromStep { object: cola.clone(), step: take_at },
                },
                action: DisturbanceAction::ExternalTake { object: cola },
            });
            d
        }
        "ig_bowls" => {
            let n = g.rng.gen_range(2..=3);
            let m = g.rng.gen_range(2..=3);
            let colors = g.colors(n + m);
            let blocks: Vec<ObjectId> = colors[..n].iter().map(|c| g.block(*c)).collect();
            let bowls: Vec<ObjectId> = colors[n..].iter().map(|c| g.bowl(*c)).collect();
            let goal_relations: Vec<Relation> =
                blocks.iter().map(|b| Relation::inside(b.clone(), bowls.choose(g.rng).unwrap().clone())).collect();
            let mut relevant = blocks.clone();
            relevant.extend(bowls);
            let mut d = g.draft(
                "rearrange the blocks to match the goal image".into(),
                GoalPredicate::MatchGoalScene { objects: blocks },
                relevant,
            );
            d.mode = GoalMode::GoalImage;
            d.goal_relations = Some(goal_relations);
            d
        }
        "ig_stack" => {
            let colors = g.colors(4);
            let mut blocks: Vec<ObjectId> = colors[..3].iter().map(|c| g.block(*c)).collect();
            g.bowl(colors[3]);
            blocks.shuffle(g.rng);
            let goal_relations = alloc::vec![
                Relation::on(blocks[1].clone(), blocks[0].clone()),
                Relation::on(blocks[2].clone(), blocks[1].clone()),
            ];
            let mut d = g.draft(
                "stack the blocks as shown in the goal image".into(),
                GoalPredicate::MatchGoalScene { objects: blocks.clone() },
                blocks,
            );
            d.mode = GoalMode::Combined;
            d.goal_relations = Some(goal_relations);
            d
        }
        _ => return None,
    };
    Some(d)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn build(task_id: &str, seed: u64, d: Draft) -> Option<Episode> {
    let scene = Scene::from_parts(d.objects, d.relations, d.open.clone(), None, Vec::new()).ok()?;
    let goal_scene = match d.goal_relations {
        Some(rels) => Some(Scene::from_parts(scene.objects().to_vec(), rels, d.open, None, Vec::new()).ok()?),
        None => None,
    };
    let relevant = d.relevant.iter().filter_map(|id| scene.get(id).cloned()).collect();
    let goal = GoalSpec { mode: d.mode, instruction: d.instruction, goal_scene, predicate: d.predicate, relevant };
    Some(Episode {
        task_id: task_id.to_string(),
        seed,
        rng_seed: 0,
        scene,
        goal,
        disturbances: d.disturbances,
        noise: d.noise,
    })
}

/// Deterministic in `(task_id, seed)`. Re-rolls until the initial scene is
/// unsolved but solvable by the oracle.
pub fn generate_episode(task_id: &str, seed: u64) -> Result<Episode, GenerationError> {
    super::registry::task(task_id).ok_or_else(|| GenerationError::UnknownTask(task_id.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(task_id) ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for _ in 0..MAX_ATTEMPTS {
        let draft = draft_for(task_id, &mut rng).ok_or_else(|| GenerationError::UnknownTask(task_id.to_string()))?;
        let Some(mut ep) = build(task_id, seed, draft) else { continue };
        if goal_satisfied(&ep.scene, &ep.goal) {
            continue;
        }
        let Ok(plan) = oracle_solve(&ep.scene, &ep.goal, DEFAULT_MAX_DEPTH) else { continue };
        if task_id == "fb_pack_reversion" {
            schedule_reversion(&mut ep, &plan.steps);
        }
        ep.rng_seed = rng.gen();
        return Ok(ep);
    }
    Err(GenerationError::GenerationFailed { task: task_id.to_string(), seed })
}

/// Reverts the bag the oracle packs second, right after the second bag lands.
fn schedule_reversion(ep: &mut Episode, steps: &[crate::skills::SkillInvocation]) {
    let GoalPredicate::AllIn { objects, container } = &ep.goal.predicate else { return };
    let packed: Vec<&ObjectId> = steps
        .iter()
        .filter(|s| s.skill == Skill::Place && s.args.get(1) == Some(container))
        .map(|s| &s.args[0])
        .collect();
    if let Some(second) = packed.get(1) {
        ep.disturbances.push(DisturbanceEvent {
            trigger: Trigger::OnCondition {
                condition: Condition::CountIn { container: container.clone(), objects: objects.clone(), at_least: 2 },
            },
            action: DisturbanceAction::Revert { object: (*second).clone() },
        });
    }
}

/// The four feedback scenarios for one seed: noisy stacking, packing with
/// reversion, hidden-object search and hand-over.
pub fn feedback_scenarios(seed: u64) -> Vec<Episode> {
    ["fb_stack_noisy", "fb_pack_reversion", "fb_find_hidden", "fb_handover_wait"]
        .iter()
        .map(|t| generate_episode(t, seed).expect("feedback scenarios always generate"))
        .collect()
}
