//! Symbolic tabletop world model.
//!
//! A [`Scene`] is an immutable-by-convention value made of a shared object
//! table and a small [`WorldState`] (one support slot per object plus the
//! container flags). Cloning a scene is cheap, which the oracle search relies
//! on.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Columns of the tabletop grid.
pub const GRID_COLS: u8 = 8;
/// Rows of the tabletop grid.
pub const GRID_ROWS: u8 = 7;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(String);

impl ObjectId {
    pub fn new(id: impl Into<String>) -> Self {
        ObjectId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Block,
    Bowl,
    Letter,
    Container,
    Fixture,
    Misc,
}

impl Category {
    pub fn noun(self) -> &'static str {
        match self {
            Category::Block => "block",
            Category::Bowl => "bowl",
            Category::Letter => "letter",
            Category::Container => "container",
            Category::Fixture => "fixture",
            Category::Misc => "object",
        }
    }

    /// Categories that can hold objects via `In`.
    pub fn is_receptacle(self) -> bool {
        matches!(self, Category::Bowl | Category::Container)
    }

    /// Categories that accept an object placed `On` them.
    pub fn is_surface(self) -> bool {
        matches!(self, Category::Block | Category::Fixture | Category::Misc)
    }
}

/// The fixed ten-color palette.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Orange,
    Yellow,
    Green,
    Blue,
    Purple,
    Pink,
    Brown,
    Gray,
    White,
}

impl Color {
    pub const ALL: [Color; 10] = [
        Color::Red,
        Color::Orange,
        Color::Yellow,
        Color::Green,
        Color::Blue,
        Color::Purple,
        Color::Pink,
        Color::Brown,
        Color::Gray,
        Color::White,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Orange => "orange",
            Color::Yellow => "yellow",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Purple => "purple",
            Color::Pink => "pink",
            Color::Brown => "brown",
            Color::Gray => "gray",
            Color::White => "white",
        }
    }

    pub fn from_name(name: &str) -> Option<Color> {
        Color::ALL.iter().copied().find(|c| c.name() == name)
    }

    pub fn is_warm(self) -> bool {
        matches!(self, Color::Red | Color::Orange | Color::Yellow | Color::Pink)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Size {
    Small,
    Medium,
    Large,
}

/// Grid cell an object occupies when it rests directly on the table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub col: u8,
    pub row: u8,
}

impl Cell {
    pub const fn new(col: u8, row: u8) -> Self {
        Cell { col, row }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectDescriptor {
    pub id: ObjectId,
    pub category: Category,
    pub color: Color,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glyph: Option<char>,
    pub size: Size,
    /// Everyday noun ("drawer", "cup", "pad"); defaults to the category noun.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noun: Option<String>,
    /// Home cell on the table.
    pub cell: Cell,
}

impl ObjectDescriptor {
    pub fn new(id: impl Into<String>, category: Category, color: Color, cell: Cell) -> Self {
        ObjectDescriptor { id: ObjectId::new(id), category, color, glyph: None, size: Size::Medium, noun: None, cell }
    }

    pub fn letter(id: impl Into<String>, glyph: char, color: Color, cell: Cell) -> Self {
        ObjectDescriptor {
            glyph: Some(glyph.to_ascii_uppercase()),
            ..ObjectDescriptor::new(id, Category::Letter, color, cell)
        }
    }

    pub fn with_noun(mut self, noun: &str) -> Self {
        self.noun = Some(noun.to_string());
        self
    }

    pub fn with_size(mut self, size: Size) -> Self {
        self.size = size;
        self
    }

    pub fn noun(&self) -> &str {
        self.noun.as_deref().unwrap_or(self.category.noun())
    }

    /// Canonical noun phrase: `letter A` for letters, `<color> <noun>` otherwise.
    pub fn phrase(&self) -> String {
        match (self.category, self.glyph) {
            (Category::Letter, Some(g)) => alloc::format!("letter {}", g),
            _ => alloc::format!("{} {}", self.color.name(), self.noun()),
        }
    }

    /// Whether the gripper can take this object: blocks, letters, misc items
    /// and small bowls (cups).
    pub fn is_graspable(&self) -> bool {
        match self.category {
            Category::Block | Category::Letter | Category::Misc => true,
            Category::Bowl => self.size == Size::Small,
            Category::Container | Category::Fixture => false,
        }
    }

    pub fn is_vowel(&self) -> bool {
        matches!(self.glyph, Some('A' | 'E' | 'I' | 'O' | 'U'))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Relation {
    On { a: ObjectId, b: ObjectId },
    In { a: ObjectId, b: ObjectId },
}

impl Relation {
    pub fn on(a: impl Into<ObjectId>, b: impl Into<ObjectId>) -> Self {
        Relation::On { a: a.into(), b: b.into() }
    }

    pub fn inside(a: impl Into<ObjectId>, b: impl Into<ObjectId>) -> Self {
        Relation::In { a: a.into(), b: b.into() }
    }

    pub fn subject(&self) -> &ObjectId {
        match self {
            Relation::On { a, .. } | Relation::In { a, .. } => a,
        }
    }

    pub fn support(&self) -> &ObjectId {
        match self {
            Relation::On { b, .. } | Relation::In { b, .. } => b,
        }
    }
}

impl From<String> for ObjectId {
    fn from(s: String) -> Self {
        ObjectId(s)
    }
}

/// Where a single object currently is, by object index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Support {
    Table,
    On(u16),
    In(u16),
    Held,
    /// Removed from the workspace by a person.
    Taken,
}

impl Support {
    pub fn target(self) -> Option<usize> {
        match self {
            Support::On(j) | Support::In(j) => Some(j as usize),
            _ => None,
        }
    }
}

/// Mutable part of a scene, indexed like the scene's object table.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WorldState {
    pub supports: Vec<Support>,
    pub open: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SceneError {
    #[error("duplicate object id `{0}`")]
    DuplicateId(ObjectId),
    #[error("object `{0}`: glyph must be present exactly for letters")]
    GlyphMismatch(ObjectId),
    #[error("relation references unknown object `{0}`")]
    UnknownEndpoint(ObjectId),
    #[error("object `{0}` has more than one support")]
    MultipleSupports(ObjectId),
    #[error("object `{0}` supports itself")]
    SelfSupport(ObjectId),
    #[error("support graph contains a cycle through `{0}`")]
    Cycle(ObjectId),
    #[error("`{0}` can only contain objects if it is a bowl or container")]
    NotAReceptacle(ObjectId),
    #[error("held object `{0}` has a support relation")]
    HeldSupported(ObjectId),
    #[error("container flag set for non-container `{0}`")]
    FlagOnNonContainer(ObjectId),
    #[error("container `{0}` has no open/closed flag")]
    MissingFlag(ObjectId),
    #[error("scenes have different object sets")]
    MismatchedObjects,
    #[error("too many objects in scene")]
    TooManyObjects,
}

/// Full symbolic world state.
#[derive(Clone)]
pub struct Scene {
    objects: Arc<[ObjectDescriptor]>,
    state: WorldState,
}

impl PartialEq for Scene {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.objects, &other.objects) || self.objects == other.objects) && self.state == other.state
    }
}

impl Eq for Scene {}

impl fmt::Debug for Scene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scene")
            .field("objects", &self.objects.iter().map(|o| o.id.as_str()).collect::<Vec<_>>())
            .field("relations", &self.relations())
            .field("held", &self.held())
            .finish()
    }
}

#[derive(Default, Debug, Clone)]
pub struct SceneBuilder {
    objects: Vec<ObjectDescriptor>,
    relations: Vec<Relation>,
    open: BTreeMap<ObjectId, bool>,
    held: Option<ObjectId>,
    taken: Vec<ObjectId>,
}

impl SceneBuilder {
    pub fn object(mut self, obj: ObjectDescriptor) -> Self {
        self.objects.push(obj);
        self
    }

    pub fn objects(mut self, objs: impl IntoIterator<Item = ObjectDescriptor>) -> Self {
        self.objects.extend(objs);
        self
    }

    pub fn relation(mut self, rel: Relation) -> Self {
        self.relations.push(rel);
        self
    }

    pub fn on(self, a: &str, b: &str) -> Self {
        self.relation(Relation::on(a, b))
    }

    pub fn inside(self, a: &str, b: &str) -> Self {
        self.relation(Relation::inside(a, b))
    }

    pub fn open(mut self, id: &str, open: bool) -> Self {
        self.open.insert(ObjectId::from(id), open);
        self
    }

    pub fn held(mut self, id: &str) -> Self {
        self.held = Some(ObjectId::from(id));
        self
    }

    pub fn taken(mut self, id: &str) -> Self {
        self.taken.push(ObjectId::from(id));
        self
    }

    /// Builds and validates. Containers without an explicit flag start closed.
    pub fn build(mut self) -> Result<Scene, SceneError> {
        for obj in &self.objects {
            if obj.category == Category::Container && !self.open.contains_key(&obj.id) {
                self.open.insert(obj.id.clone(), false);
            }
        }
        Scene::from_parts(self.objects, self.relations, self.open, self.held, self.taken)
    }
}

impl Scene {
    pub fn builder() -> SceneBuilder {
        SceneBuilder::default()
    }

    pub fn empty() -> Scene {
        Scene { objects: Arc::from(Vec::new()), state: WorldState { supports: Vec::new(), open: Vec::new() } }
    }

    /// Assembles a scene from its relational description, checking every
    /// structural invariant.
    pub fn from_parts(
        mut objects: Vec<ObjectDescriptor>,
        relations: Vec<Relation>,
        container_open: BTreeMap<ObjectId, bool>,
        held: Option<ObjectId>,
        taken: Vec<ObjectId>,
    ) -> Result<Scene, SceneError> {
        if objects.len() > u16::MAX as usize {
            return Err(SceneError::TooManyObjects);
        }
        objects.sort_by(|a, b| a.id.cmp(&b.id));
        for w in objects.windows(2) {
            if w[0].id == w[1].id {
                return Err(SceneError::DuplicateId(w[0].id.clone()));
            }
        }
        for o in &objects {
            if (o.category == Category::Letter) != o.glyph.is_some() {
                return Err(SceneError::GlyphMismatch(o.id.clone()));
            }
        }
        let index = |id: &ObjectId| -> Result<usize, SceneError> {
            objects.binary_search_by(|o| o.id.cmp(id)).map_err(|_| SceneError::UnknownEndpoint(id.clone()))
        };
        let n = objects.len();
        let mut supports = alloc::vec![Support::Table; n];
        let mut assigned = alloc::vec![false; n];
        for rel in &relations {
            let a = index(rel.subject())?;
            let b = index(rel.support())?;
            if a == b {
                return Err(SceneError::SelfSupport(rel.subject().clone()));
            }
            if assigned[a] {
                return Err(SceneError::MultipleSupports(rel.subject().clone()));
            }
            assigned[a] = true;
            supports[a] = match rel {
                Relation::On { .. } => Support::On(b as u16),
                Relation::In { .. } => {
                    if !objects[b].category.is_receptacle() {
                        return Err(SceneError::NotAReceptacle(rel.support().clone()));
                    }
                    Support::In(b as u16)
                }
            };
        }
        if let Some(h) = &held {
            let i = index(h)?;
            if assigned[i] {
                return Err(SceneError::HeldSupported(h.clone()));
            }
            supports[i] = Support::Held;
        }
        for t in &taken {
            let i = index(t)?;
            if assigned[i] || supports[i] == Support::Held {
                return Err(SceneError::MultipleSupports(t.clone()));
            }
            supports[i] = Support::Taken;
        }
        let mut open = alloc::vec![false; n];
        for (id, flag) in &container_open {
            let i = index(id)?;
            if objects[i].category != Category::Container {
                return Err(SceneError::FlagOnNonContainer(id.clone()));
            }
            open[i] = *flag;
        }
        for o in &objects {
            if o.category == Category::Container && !container_open.contains_key(&o.id) {
                return Err(SceneError::MissingFlag(o.id.clone()));
            }
        }
        let scene = Scene { objects: Arc::from(objects), state: WorldState { supports, open } };
        scene.check_acyclic()?;
        Ok(scene)
    }

    fn check_acyclic(&self) -> Result<(), SceneError> {
        let n = self.len();
        for start in 0..n {
            let mut cur = start;
            let mut hops = 0;
            while let Some(next) = self.state.supports[cur].target() {
                hops += 1;
                if next == start || hops > n {
                    return Err(SceneError::Cycle(self.objects[start].id.clone()));
                }
                cur = next;
            }
        }
        Ok(())
    }

    /// Re-checks the invariants that a state edit can break.
    pub fn validate(&self) -> Result<(), SceneError> {
        let mut held = 0;
        for (i, s) in self.state.supports.iter().enumerate() {
            match *s {
                Support::In(j) => {
                    if !self.objects[j as usize].category.is_receptacle() {
                        return Err(SceneError::NotAReceptacle(self.objects[j as usize].id.clone()));
                    }
                    if j as usize == i {
                        return Err(SceneError::SelfSupport(self.objects[i].id.clone()));
                    }
                }
                Support::On(j) => {
                    if j as usize == i {
                        return Err(SceneError::SelfSupport(self.objects[i].id.clone()));
                    }
                }
                Support::Held => held += 1,
                _ => {}
            }
        }
        if held > 1 {
            return Err(SceneError::MultipleSupports(ObjectId::from("<gripper>")));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if self.state.open[i] && o.category != Category::Container {
                return Err(SceneError::FlagOnNonContainer(o.id.clone()));
            }
        }
        self.check_acyclic()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn objects(&self) -> &[ObjectDescriptor] {
        &self.objects
    }

    pub fn shares_objects_with(&self, other: &Scene) -> bool {
        Arc::ptr_eq(&self.objects, &other.objects) || self.objects == other.objects
    }

    pub fn index_of(&self, id: &ObjectId) -> Option<usize> {
        self.objects.binary_search_by(|o| o.id.cmp(id)).ok()
    }

    pub fn get(&self, id: &ObjectId) -> Option<&ObjectDescriptor> {
        self.index_of(id).map(|i| &self.objects[i])
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    /// Same object table, different state. The caller must keep the state
    /// consistent with the table (see [`Scene::validate`]).
    pub fn with_state(&self, state: WorldState) -> Scene {
        debug_assert_eq!(state.supports.len(), self.len());
        Scene { objects: self.objects.clone(), state }
    }

    pub(crate) fn state_mut(&mut self) -> &mut WorldState {
        &mut self.state
    }

    pub fn support(&self, i: usize) -> Support {
        self.state.supports[i]
    }

    pub fn support_of(&self, id: &ObjectId) -> Option<Support> {
        self.index_of(id).map(|i| self.state.supports[i])
    }

    pub fn held_index(&self) -> Option<usize> {
        self.state.supports.iter().position(|s| *s == Support::Held)
    }

    pub fn held(&self) -> Option<&ObjectId> {
        self.held_index().map(|i| &self.objects[i].id)
    }

    pub fn is_taken(&self, i: usize) -> bool {
        self.state.supports[i] == Support::Taken
    }

    pub fn taken(&self) -> Vec<ObjectId> {
        (0..self.len()).filter(|&i| self.is_taken(i)).map(|i| self.objects[i].id.clone()).collect()
    }

    pub fn is_open_index(&self, i: usize) -> bool {
        self.state.open[i]
    }

    pub fn is_open(&self, id: &ObjectId) -> Option<bool> {
        let i = self.index_of(id)?;
        (self.objects[i].category == Category::Container).then(|| self.state.open[i])
    }

    pub fn container_open(&self) -> BTreeMap<ObjectId, bool> {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.category == Category::Container)
            .map(|(i, o)| (o.id.clone(), self.state.open[i]))
            .collect()
    }

    pub fn relation_of(&self, i: usize) -> Option<Relation> {
        let a = self.objects[i].id.clone();
        match self.state.supports[i] {
            Support::On(j) => Some(Relation::On { a, b: self.objects[j as usize].id.clone() }),
            Support::In(j) => Some(Relation::In { a, b: self.objects[j as usize].id.clone() }),
            _ => None,
        }
    }

    pub fn relations(&self) -> Vec<Relation> {
        let mut rels: Vec<Relation> = (0..self.len()).filter_map(|i| self.relation_of(i)).collect();
        rels.sort();
        rels
    }

    /// True if some object rests `On` object `i`.
    pub fn has_on_top(&self, i: usize) -> bool {
        self.state.supports.contains(&Support::On(i as u16))
    }

    /// Indices of objects directly `In` object `i`.
    pub fn contents(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.state.supports.iter().enumerate().filter(move |(_, s)| **s == Support::In(i as u16)).map(|(k, _)| k)
    }

    /// True if `ancestor` lies on the support chain below `i` (or is `i`).
    pub fn rests_on(&self, i: usize, ancestor: usize) -> bool {
        let mut cur = i;
        loop {
            if cur == ancestor {
                return true;
            }
            match self.state.supports[cur].target() {
                Some(next) => cur = next,
                None => return false,
            }
        }
    }

    /// Whether object `i` is hidden inside a closed container somewhere down its
    /// support chain, or has left the workspace.
    pub fn is_hidden(&self, i: usize) -> bool {
        let mut cur = i;
        loop {
            match self.state.supports[cur] {
                Support::In(j) => {
                    let j = j as usize;
                    if self.objects[j].category == Category::Container && !self.state.open[j] {
                        return true;
                    }
                    cur = j;
                }
                Support::On(j) => cur = j as usize,
                Support::Taken => return true,
                Support::Table | Support::Held => return false,
            }
        }
    }

    pub fn is_visible_index(&self, i: usize) -> bool {
        !self.is_hidden(i)
    }

    /// Root of the support chain: the table-level object (or held/taken object)
    /// the stack containing `i` stands on.
    pub fn root(&self, i: usize) -> usize {
        let mut cur = i;
        while let Some(next) = self.state.supports[cur].target() {
            cur = next;
        }
        cur
    }

    /// Column used for left/right and ordering predicates; `None` while the
    /// object is in the gripper or gone.
    pub fn column(&self, i: usize) -> Option<u8> {
        let r = self.root(i);
        match self.state.supports[r] {
            Support::Table => Some(self.objects[r].cell.col),
            _ => None,
        }
    }

    pub fn to_repr(&self) -> SceneRepr {
        SceneRepr {
            objects: self.objects.to_vec(),
            relations: self.relations(),
            container_open: self.container_open(),
            held: self.held().cloned(),
            taken: self.taken(),
        }
    }
}

/// All objects that are not (transitively) inside a closed container and
/// have not been taken away. The held object is included.
pub fn visible_objects(scene: &Scene) -> BTreeSet<ObjectId> {
    (0..scene.len()).filter(|&i| scene.is_visible_index(i)).map(|i| scene.objects()[i].id.clone()).collect()
}

/// Serialized relational form of a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRepr {
    pub objects: Vec<ObjectDescriptor>,
    pub relations: Vec<Relation>,
    pub container_open: BTreeMap<ObjectId, bool>,
    #[serde(default)]
    pub held: Option<ObjectId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taken: Vec<ObjectId>,
}

impl TryFrom<SceneRepr> for Scene {
    type Error = SceneError;

    fn try_from(r: SceneRepr) -> Result<Self, Self::Error> {
        Scene::from_parts(r.objects, r.relations, r.container_open, r.held, r.taken)
    }
}

impl Serialize for Scene {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_repr().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Scene {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = SceneRepr::deserialize(d)?;
        Scene::try_from(repr).map_err(serde::de::Error::custom)
    }
}

/// One entry of a [`scene_diff`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum SceneChange {
    Removed { relation: Relation },
    Added { relation: Relation },
    ContainerFlag { id: ObjectId, open: bool },
    Held { from: Option<ObjectId>, to: Option<ObjectId> },
    Taken { id: ObjectId },
}

/// Relation symmetric difference plus changed container flags, gripper slot
/// and taken objects, going from `a` to `b`.
pub fn scene_diff(a: &Scene, b: &Scene) -> Result<Vec<SceneChange>, SceneError> {
    if !a.shares_objects_with(b) {
        let ids_a: Vec<_> = a.objects().iter().map(|o| &o.id).collect();
        let ids_b: Vec<_> = b.objects().iter().map(|o| &o.id).collect();
        if ids_a != ids_b {
            return Err(SceneError::MismatchedObjects);
        }
    }
    let mut out = Vec::new();
    for i in 0..a.len() {
        if a.support(i) == b.support(i) {
            continue;
        }
        if let Some(r) = a.relation_of(i) {
            out.push(SceneChange::Removed { relation: r });
        }
        if let Some(r) = b.relation_of(i) {
            out.push(SceneChange::Added { relation: r });
        }
        if b.is_taken(i) && !a.is_taken(i) {
            out.push(SceneChange::Taken { id: a.objects()[i].id.clone() });
        }
    }
    for i in 0..a.len() {
        if a.objects()[i].category == Category::Container && a.is_open_index(i) != b.is_open_index(i) {
            out.push(SceneChange::ContainerFlag { id: a.objects()[i].id.clone(), open: b.is_open_index(i) });
        }
    }
    if a.held() != b.held() {
        out.push(SceneChange::Held { from: a.held().cloned(), to: b.held().cloned() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drawer_scene(open: bool) -> Scene {
        Scene::builder()
            .object(ObjectDescriptor::new("block_0", Category::Block, Color::Red, Cell::new(0, 0)))
            .object(
                ObjectDescriptor::new("drawer_0", Category::Container, Color::Brown, Cell::new(1, 0))
                    .with_noun("drawer"),
            )
            .inside("block_0", "drawer_0")
            .open("drawer_0", open)
            .build()
            .unwrap()
    }

    #[test]
    fn closed_drawer_hides_contents() {
        let vis = visible_objects(&drawer_scene(false));
        assert!(!vis.contains(&ObjectId::from("block_0")));
        assert!(vis.contains(&ObjectId::from("drawer_0")));
    }

    #[test]
    fn open_drawer_shows_contents() {
        assert!(visible_objects(&drawer_scene(true)).contains(&ObjectId::from("block_0")));
    }

    #[test]
    fn empty_scene_has_nothing_visible() {
        assert!(visible_objects(&Scene::empty()).is_empty());
    }

    #[test]
    fn stack_inside_closed_drawer_is_hidden_transitively() {
        let s = Scene::builder()
            .object(ObjectDescriptor::new("a", Category::Block, Color::Red, Cell::new(0, 0)))
            .object(ObjectDescriptor::new("b", Category::Block, Color::Blue, Cell::new(1, 0)))
            .object(ObjectDescriptor::new("d", Category::Container, Color::Brown, Cell::new(2, 0)))
            .on("a", "b")
            .inside("b", "d")
            .build()
            .unwrap();
        assert!(visible_objects(&s).iter().all(|id| id.as_str() == "d"));
    }

    #[test]
    fn rejects_cycles_and_bad_relations() {
        let base = || {
            Scene::builder()
                .object(ObjectDescriptor::new("a", Category::Block, Color::Red, Cell::new(0, 0)))
                .object(ObjectDescriptor::new("b", Category::Block, Color::Blue, Cell::new(1, 0)))
        };
        assert!(matches!(base().on("a", "b").on("b", "a").build(), Err(SceneError::Cycle(_))));
        assert!(matches!(base().inside("a", "b").build(), Err(SceneError::NotAReceptacle(_))));
        assert!(matches!(base().on("a", "b").on("a", "b").build(), Err(SceneError::MultipleSupports(_))));
        assert!(matches!(base().on("a", "b").held("a").build(), Err(SceneError::HeldSupported(_))));
        assert!(matches!(base().on("a", "zz").build(), Err(SceneError::UnknownEndpoint(_))));
        assert!(matches!(base().open("a", true).build(), Err(SceneError::FlagOnNonContainer(_))));
    }

    #[test]
    fn glyph_only_on_letters() {
        let mut bad = ObjectDescriptor::new("a", Category::Block, Color::Red, Cell::new(0, 0));
        bad.glyph = Some('A');
        assert!(matches!(Scene::builder().object(bad).build(), Err(SceneError::GlyphMismatch(_))));
        let mut bare = ObjectDescriptor::letter("l", 'a', Color::Red, Cell::new(0, 0));
        assert_eq!(bare.glyph, Some('A'));
        bare.glyph = None;
        assert!(Scene::builder().object(bare).build().is_err());
    }

    #[test]
    fn diff_identity_move_and_flag() {
        let a = Scene::builder()
            .object(ObjectDescriptor::new("block", Category::Block, Color::Red, Cell::new(0, 0)))
            .object(ObjectDescriptor::new("bowl", Category::Bowl, Color::Red, Cell::new(1, 0)))
            .object(ObjectDescriptor::new("pad", Category::Fixture, Color::Gray, Cell::new(2, 0)))
            .object(ObjectDescriptor::new("drawer", Category::Container, Color::Brown, Cell::new(3, 0)))
            .on("block", "pad")
            .build()
            .unwrap();
        assert!(scene_diff(&a, &a).unwrap().is_empty());

        let mut moved = a.clone();
        let (bi, wi) = (a.index_of(&"block".into()).unwrap(), a.index_of(&"bowl".into()).unwrap());
        moved.state_mut().supports[bi] = Support::In(wi as u16);
        let d = scene_diff(&a, &moved).unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.contains(&SceneChange::Removed { relation: Relation::on("block", "pad") }));
        assert!(d.contains(&SceneChange::Added { relation: Relation::inside("block", "bowl") }));

        let mut opened = a.clone();
        let di = a.index_of(&"drawer".into()).unwrap();
        opened.state_mut().open[di] = true;
        assert_eq!(
            scene_diff(&a, &opened).unwrap(),
            alloc::vec![SceneChange::ContainerFlag { id: "drawer".into(), open: true }]
        );
    }

    #[test]
    fn diff_rejects_different_objects() {
        let a = Scene::builder()
            .object(ObjectDescriptor::new("x", Category::Block, Color::Red, Cell::new(0, 0)))
            .build()
            .unwrap();
        assert_eq!(scene_diff(&a, &Scene::empty()), Err(SceneError::MismatchedObjects));
    }

    #[test]
    fn json_round_trip_preserves_scene() {
        let s = drawer_scene(true);
        let json = serde_json::to_string(&s).unwrap();
        let back: Scene = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
