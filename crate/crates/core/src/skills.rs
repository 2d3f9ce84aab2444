//! Primitive skill registry: pick up, place, open, close, pour, and a `wait`
//! pseudo-skill, with preconditions and deterministic effects on [`Scene`].

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::scene::{Category, ObjectId, Scene, Support};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skill {
    PickUp,
    Place,
    Open,
    Close,
    Pour,
    Wait,
}

impl Skill {
    pub const ALL: [Skill; 6] = [Skill::PickUp, Skill::Place, Skill::Open, Skill::Close, Skill::Pour, Skill::Wait];

    pub fn name(self) -> &'static str {
        match self {
            Skill::PickUp => "pick_up",
            Skill::Place => "place",
            Skill::Open => "open",
            Skill::Close => "close",
            Skill::Pour => "pour",
            Skill::Wait => "wait",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Skill::Wait => 0,
            Skill::PickUp | Skill::Open | Skill::Close => 1,
            Skill::Place | Skill::Pour => 2,
        }
    }

    /// Prepositions accepted between the two arguments.
    pub fn prepositions(self) -> &'static [&'static str] {
        match self {
            Skill::Place => &["in", "on"],
            Skill::Pour => &["into", "onto"],
            _ => &[],
        }
    }

    /// The verb text that starts the canonical form.
    pub fn verb(self) -> &'static str {
        match self {
            Skill::PickUp => "pick up",
            Skill::Place => "place",
            Skill::Open => "open",
            Skill::Close => "close",
            Skill::Pour => "pour",
            Skill::Wait => "wait",
        }
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One bound skill call. Equality and ordering look only at the skill and
/// resolved arguments; `raw_phrases` keeps the text the arguments came from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkillInvocation {
    pub skill: Skill,
    pub args: Vec<ObjectId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raw_phrases: Vec<String>,
}

impl PartialEq for SkillInvocation {
    fn eq(&self, other: &Self) -> bool {
        self.skill == other.skill && self.args == other.args
    }
}

impl Eq for SkillInvocation {}

impl core::hash::Hash for SkillInvocation {
    fn hash<H: core::hash::Hasher>(&self, state: &mut H) {
        self.skill.hash(state);
        self.args.hash(state);
    }
}

impl SkillInvocation {
    pub fn new(skill: Skill, args: Vec<ObjectId>) -> Self {
        SkillInvocation { skill, args, raw_phrases: Vec::new() }
    }

    pub fn pick_up(x: impl Into<ObjectId>) -> Self {
        Self::new(Skill::PickUp, alloc::vec![x.into()])
    }

    pub fn place(x: impl Into<ObjectId>, dest: impl Into<ObjectId>) -> Self {
        Self::new(Skill::Place, alloc::vec![x.into(), dest.into()])
    }

    pub fn open(x: impl Into<ObjectId>) -> Self {
        Self::new(Skill::Open, alloc::vec![x.into()])
    }

    pub fn close(x: impl Into<ObjectId>) -> Self {
        Self::new(Skill::Close, alloc::vec![x.into()])
    }

    pub fn pour(src: impl Into<ObjectId>, dest: impl Into<ObjectId>) -> Self {
        Self::new(Skill::Pour, alloc::vec![src.into(), dest.into()])
    }

    pub fn wait() -> Self {
        Self::new(Skill::Wait, Vec::new())
    }
}

/// Why a precondition does not hold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "object", rename_all = "snake_case")]
pub enum Reason {
    UnknownObject(ObjectId),
    WrongArity,
    NotVisible(ObjectId),
    GripperOccupied,
    NothingHeld,
    NotHeld(ObjectId),
    NotGraspable(ObjectId),
    /// Something is stacked on the object to be picked.
    ClearTop(ObjectId),
    NotAContainer(ObjectId),
    AlreadyOpen(ObjectId),
    AlreadyClosed(ObjectId),
    ContainerClosed(ObjectId),
    InvalidDestination(ObjectId),
    DestinationOccupied(ObjectId),
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::UnknownObject(o) => write!(f, "unknown object {}", o),
            Reason::WrongArity => f.write_str("wrong number of arguments"),
            Reason::NotVisible(o) => write!(f, "{} is not visible", o),
            Reason::GripperOccupied => f.write_str("gripper is not empty"),
            Reason::NothingHeld => f.write_str("nothing is held"),
            Reason::NotHeld(o) => write!(f, "{} is not held", o),
            Reason::NotGraspable(o) => write!(f, "{} cannot be grasped", o),
            Reason::ClearTop(o) => write!(f, "something is on top of {}", o),
            Reason::NotAContainer(o) => write!(f, "{} is not a container", o),
            Reason::AlreadyOpen(o) => write!(f, "{} is already open", o),
            Reason::AlreadyClosed(o) => write!(f, "{} is already closed", o),
            Reason::ContainerClosed(o) => write!(f, "{} is closed", o),
            Reason::InvalidDestination(o) => write!(f, "cannot place onto {}", o),
            Reason::DestinationOccupied(o) => write!(f, "{} is occupied", o),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails(Reason),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SkillError {
    #[error("unknown object `{0}`")]
    UnknownObject(ObjectId),
    #[error("precondition violated: {0}")]
    PreconditionViolated(Reason),
}

/// A skill call over object indices of one particular scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct Action {
    pub skill: Skill,
    pub a: u16,
    pub b: u16,
}

impl Action {
    pub(crate) fn bind(scene: &Scene, inv: &SkillInvocation) -> Result<Action, Reason> {
        if inv.args.len() != inv.skill.arity() {
            return Err(Reason::WrongArity);
        }
        let mut idx = [0u16; 2];
        for (k, id) in inv.args.iter().enumerate() {
            idx[k] = scene.index_of(id).ok_or_else(|| Reason::UnknownObject(id.clone()))? as u16;
        }
        Ok(Action { skill: inv.skill, a: idx[0], b: idx[1] })
    }

    pub(crate) fn to_invocation(self, scene: &Scene) -> SkillInvocation {
        let id = |i: u16| scene.objects()[i as usize].id.clone();
        let args = match self.skill.arity() {
            0 => Vec::new(),
            1 => alloc::vec![id(self.a)],
            _ => alloc::vec![id(self.a), id(self.b)],
        };
        SkillInvocation::new(self.skill, args)
    }
}

pub(crate) fn check(scene: &Scene, act: Action) -> Result<(), Reason> {
    let objs = scene.objects();
    let (a, b) = (act.a as usize, act.b as usize);
    let id = |i: usize| objs[i].id.clone();
    let visible = |i: usize| if scene.is_visible_index(i) { Ok(()) } else { Err(Reason::NotVisible(id(i))) };
    let held = scene.held_index();
    let must_hold = |i: usize| match held {
        None => Err(Reason::NothingHeld),
        Some(h) if h != i => Err(Reason::NotHeld(id(i))),
        Some(_) => Ok(()),
    };
    match act.skill {
        Skill::Wait => Ok(()),
        Skill::PickUp => {
            visible(a)?;
            if held.is_some() {
                return Err(Reason::GripperOccupied);
            }
            if !objs[a].is_graspable() {
                return Err(Reason::NotGraspable(id(a)));
            }
            if scene.has_on_top(a) {
                return Err(Reason::ClearTop(id(a)));
            }
            Ok(())
        }
        Skill::Place => {
            must_hold(a)?;
            visible(b)?;
            if a == b || scene.rests_on(b, a) {
                return Err(Reason::InvalidDestination(id(b)));
            }
            let cat = objs[b].category;
            if cat.is_receptacle() {
                if cat == Category::Container && !scene.is_open_index(b) {
                    return Err(Reason::ContainerClosed(id(b)));
                }
                Ok(())
            } else if cat.is_surface() {
                if scene.has_on_top(b) {
                    return Err(Reason::DestinationOccupied(id(b)));
                }
                Ok(())
            } else {
                Err(Reason::InvalidDestination(id(b)))
            }
        }
        Skill::Open | Skill::Close => {
            visible(a)?;
            if objs[a].category != Category::Container {
                return Err(Reason::NotAContainer(id(a)));
            }
            match (act.skill, scene.is_open_index(a)) {
                (Skill::Open, true) => Err(Reason::AlreadyOpen(id(a))),
                (Skill::Close, false) => Err(Reason::AlreadyClosed(id(a))),
                _ => Ok(()),
            }
        }
        Skill::Pour => {
            must_hold(a)?;
            visible(b)?;
            if a == b || scene.rests_on(b, a) {
                return Err(Reason::InvalidDestination(id(b)));
            }
            let cat = objs[b].category;
            if !cat.is_receptacle() {
                return Err(Reason::InvalidDestination(id(b)));
            }
            if cat == Category::Container && !scene.is_open_index(b) {
                return Err(Reason::ContainerClosed(id(b)));
            }
            Ok(())
        }
    }
}

/// Applies an action whose precondition has been checked.
pub(crate) fn apply(scene: &Scene, act: Action) -> Scene {
    let mut next = scene.clone();
    let (a, b) = (act.a as usize, act.b as usize);
    let st = next.state_mut();
    match act.skill {
        Skill::Wait => {}
        Skill::PickUp => st.supports[a] = Support::Held,
        Skill::Place => {
            st.supports[a] =
                if scene.objects()[b].category.is_receptacle() { Support::In(b as u16) } else { Support::On(b as u16) };
        }
        Skill::Open => st.open[a] = true,
        Skill::Close => st.open[a] = false,
        Skill::Pour => {
            for s in st.supports.iter_mut() {
                if *s == Support::In(a as u16) {
                    *s = Support::In(b as u16);
                }
            }
        }
    }
    next
}

/// Checks whether `inv` can run in `scene`.
pub fn precondition(scene: &Scene, inv: &SkillInvocation) -> Result<Verdict, SkillError> {
    let act = match Action::bind(scene, inv) {
        Ok(a) => a,
        Err(Reason::UnknownObject(id)) => return Err(SkillError::UnknownObject(id)),
        Err(r) => return Ok(Verdict::Fails(r)),
    };
    Ok(match check(scene, act) {
        Ok(()) => Verdict::Holds,
        Err(r) => Verdict::Fails(r),
    })
}

/// The scene after running `inv`. The precondition is re-checked.
pub fn effect(scene: &Scene, inv: &SkillInvocation) -> Result<Scene, SkillError> {
    let act = Action::bind(scene, inv).map_err(|r| match r {
        Reason::UnknownObject(id) => SkillError::UnknownObject(id),
        r => SkillError::PreconditionViolated(r),
    })?;
    check(scene, act).map_err(SkillError::PreconditionViolated)?;
    Ok(apply(scene, act))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Cell, Color, ObjectDescriptor, Relation, Size};

    fn kitchen() -> Scene {
        Scene::builder()
            .object(ObjectDescriptor::new("red_block", Category::Block, Color::Red, Cell::new(0, 0)))
            .object(ObjectDescriptor::new("red_bowl", Category::Bowl, Color::Red, Cell::new(1, 0)))
            .object(ObjectDescriptor::new("blue_block", Category::Block, Color::Blue, Cell::new(2, 0)))
            .object(
                ObjectDescriptor::new("drawer", Category::Container, Color::Brown, Cell::new(3, 0)).with_noun("drawer"),
            )
            .object(ObjectDescriptor::new("hidden", Category::Block, Color::Green, Cell::new(4, 0)))
            .inside("hidden", "drawer")
            .build()
            .unwrap()
    }

    fn fails(scene: &Scene, inv: &SkillInvocation) -> Reason {
        match precondition(scene, inv).unwrap() {
            Verdict::Fails(r) => r,
            Verdict::Holds => panic!("expected {:?} to fail", inv),
        }
    }

    #[test]
    fn pick_on_table_holds() {
        assert!(precondition(&kitchen(), &SkillInvocation::pick_up("red_block")).unwrap().holds());
    }

    #[test]
    fn pick_inside_closed_drawer_not_visible() {
        assert_eq!(fails(&kitchen(), &SkillInvocation::pick_up("hidden")), Reason::NotVisible("hidden".into()));
    }

    #[test]
    fn place_with_empty_gripper() {
        assert_eq!(fails(&kitchen(), &SkillInvocation::place("red_block", "red_bowl")), Reason::NothingHeld);
    }

    #[test]
    fn unknown_object_is_an_error() {
        assert_eq!(
            precondition(&kitchen(), &SkillInvocation::pick_up("ghost")),
            Err(SkillError::UnknownObject("ghost".into()))
        );
    }

    #[test]
    fn wait_is_identity() {
        let s = kitchen();
        assert_eq!(effect(&s, &SkillInvocation::wait()).unwrap(), s);
    }

    #[test]
    fn pick_then_place_in_bowl() {
        let s = kitchen();
        let s = effect(&s, &SkillInvocation::pick_up("red_block")).unwrap();
        let s = effect(&s, &SkillInvocation::place("red_block", "red_bowl")).unwrap();
        assert!(s.relations().contains(&Relation::inside("red_block", "red_bowl")));
        assert_eq!(s.held(), None);
    }

    #[test]
    fn stacking_respects_clear_top() {
        let s = kitchen();
        let s = effect(&s, &SkillInvocation::pick_up("red_block")).unwrap();
        let s = effect(&s, &SkillInvocation::place("red_block", "blue_block")).unwrap();
        assert!(s.relations().contains(&Relation::on("red_block", "blue_block")));
        assert_eq!(fails(&s, &SkillInvocation::pick_up("blue_block")), Reason::ClearTop("blue_block".into()));
    }

    #[test]
    fn open_close_toggle() {
        let s = kitchen();
        assert_eq!(fails(&s, &SkillInvocation::close("drawer")), Reason::AlreadyClosed("drawer".into()));
        let s = effect(&s, &SkillInvocation::open("drawer")).unwrap();
        assert_eq!(s.is_open(&"drawer".into()), Some(true));
        assert!(precondition(&s, &SkillInvocation::pick_up("hidden")).unwrap().holds());
        let s = effect(&s, &SkillInvocation::close("drawer")).unwrap();
        assert_eq!(s.is_open(&"drawer".into()), Some(false));
        assert_eq!(fails(&s, &SkillInvocation::open("red_bowl")), Reason::NotAContainer("red_bowl".into()));
    }

    #[test]
    fn pour_moves_contents_and_keeps_cup() {
        let s = Scene::builder()
            .object(
                ObjectDescriptor::new("cup", Category::Bowl, Color::Green, Cell::new(0, 0))
                    .with_noun("cup")
                    .with_size(Size::Small),
            )
            .object(ObjectDescriptor::new("bowl", Category::Bowl, Color::Blue, Cell::new(1, 0)))
            .object(ObjectDescriptor::new("chip_a", Category::Misc, Color::Yellow, Cell::new(2, 0)).with_noun("chip"))
            .object(ObjectDescriptor::new("chip_b", Category::Misc, Color::Orange, Cell::new(3, 0)).with_noun("chip"))
            .inside("chip_a", "cup")
            .inside("chip_b", "cup")
            .held("cup")
            .build()
            .unwrap();
        let s = effect(&s, &SkillInvocation::pour("cup", "bowl")).unwrap();
        let rels = s.relations();
        assert!(rels.contains(&Relation::inside("chip_a", "bowl")));
        assert!(rels.contains(&Relation::inside("chip_b", "bowl")));
        assert_eq!(s.held(), Some(&ObjectId::from("cup")));
        s.validate().unwrap();
    }

    #[test]
    fn effect_rejects_failed_precondition() {
        assert_eq!(
            effect(&kitchen(), &SkillInvocation::place("red_block", "red_bowl")),
            Err(SkillError::PreconditionViolated(Reason::NothingHeld))
        );
    }

    #[test]
    fn bowls_fixtures_and_containers_are_not_graspable() {
        let s = kitchen();
        assert_eq!(fails(&s, &SkillInvocation::pick_up("red_bowl")), Reason::NotGraspable("red_bowl".into()));
        assert_eq!(fails(&s, &SkillInvocation::pick_up("drawer")), Reason::NotGraspable("drawer".into()));
    }

    #[test]
    fn place_into_closed_container_refused() {
        let s = effect(&kitchen(), &SkillInvocation::pick_up("red_block")).unwrap();
        assert_eq!(fails(&s, &SkillInvocation::place("red_block", "drawer")), Reason::ContainerClosed("drawer".into()));
    }
}
