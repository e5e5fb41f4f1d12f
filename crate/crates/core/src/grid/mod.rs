//! Explicit sparse voxel tree in the `[Hash,5,4,3]` configuration.
//!
//! The root is an ordered table keyed by 4096-aligned origins. Below it sit
//! internal nodes with 32³ slots (level 2) and 16³ slots (level 1), and leaf
//! nodes with 8³ voxels (level 0). Every internal slot is either a child or a
//! tile; a set child bit always wins over the active bit of the same slot.

mod accessor;
mod bbox;
mod mask;
pub mod nvgr;
mod stats;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

pub use accessor::Accessor;
pub use bbox::CoordBox;
pub use mask::NodeMask;
pub use stats::{
    LevelStats, TopologyStats, LEAF_MASK_BYTES, LEAF_VALUE_BYTES, LEVEL1_NODE_BYTES, LEVEL2_NODE_BYTES,
    ROOT_ENTRY_BYTES,
};

use thiserror::Error;

/// log2 of the leaf edge length (8 voxels).
pub const LEAF_LOG2DIM: u32 = 3;
/// log2 of the level-1 edge length in slots (16).
pub const LEVEL1_LOG2DIM: u32 = 4;
/// log2 of the level-2 edge length in slots (32).
pub const LEVEL2_LOG2DIM: u32 = 5;

/// Voxels per leaf.
pub const LEAF_VOXELS: usize = 1 << (3 * LEAF_LOG2DIM);
/// Edge lengths (in voxels) of the index-space domain covered by one node.
pub const LEAF_DIM: i32 = 1 << LEAF_LOG2DIM;
pub const LEVEL1_DIM: i32 = 1 << (LEAF_LOG2DIM + LEVEL1_LOG2DIM);
pub const LEVEL2_DIM: i32 = 1 << (LEAF_LOG2DIM + LEVEL1_LOG2DIM + LEVEL2_LOG2DIM);

/// Largest magnitude allowed for a coordinate component.
pub const COORD_LIMIT: i32 = 1 << 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("conflicting duplicate sample at {0}")]
    DuplicateConflict(Coord),
    #[error("coordinate {0} outside the supported range of ±2^30")]
    OutOfRange(Coord),
}

/// Signed integer index-space coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coord {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl Coord {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Coord { x, y, z }
    }

    pub fn splat(v: i32) -> Self {
        Coord::new(v, v, v)
    }

    /// Component-wise AND with `!(dim - 1)`; floors to a multiple of `dim`
    /// for negative components as well.
    #[inline]
    pub fn align(self, dim: i32) -> Self {
        let m = !(dim - 1);
        Coord::new(self.x & m, self.y & m, self.z & m)
    }

    #[inline]
    pub fn offset(self, dx: i32, dy: i32, dz: i32) -> Self {
        Coord::new(self.x + dx, self.y + dy, self.z + dz)
    }

    pub fn in_range(self) -> bool {
        [self.x, self.y, self.z]
            .iter()
            .all(|v| (-COORD_LIMIT..=COORD_LIMIT).contains(v))
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl std::ops::Add for Coord {
    type Output = Coord;
    fn add(self, o: Coord) -> Coord {
        Coord::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Coord {
    type Output = Coord;
    fn sub(self, o: Coord) -> Coord {
        Coord::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// Local slot index inside a node with `2^log2dim` slots per axis whose slots
/// each span `2^child_log2` voxels. x varies slowest, z fastest.
#[inline]
pub fn slot_index(c: Coord, child_log2: u32, log2dim: u32) -> usize {
    let m = (1i32 << log2dim) - 1;
    let i = ((c.x >> child_log2) & m) as usize;
    let j = ((c.y >> child_log2) & m) as usize;
    let k = ((c.z >> child_log2) & m) as usize;
    (i << (2 * log2dim)) | (j << log2dim) | k
}

/// Inverse of [`slot_index`]: the first voxel of slot `idx` of a node at `origin`.
#[inline]
pub fn slot_origin(origin: Coord, idx: usize, child_log2: u32, log2dim: u32) -> Coord {
    let m = (1usize << log2dim) - 1;
    let i = (idx >> (2 * log2dim)) & m;
    let j = (idx >> log2dim) & m;
    let k = idx & m;
    origin.offset(
        (i as i32) << child_log2,
        (j as i32) << child_log2,
        (k as i32) << child_log2,
    )
}

/// Decomposition of a coordinate into the root key and per-level slot indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeKeys {
    pub root: Coord,
    pub idx2: usize,
    pub idx1: usize,
    pub idx0: usize,
}

pub fn coord_to_keys(c: Coord) -> TreeKeys {
    TreeKeys {
        root: c.align(LEVEL2_DIM),
        idx2: slot_index(c, LEAF_LOG2DIM + LEVEL1_LOG2DIM, LEVEL2_LOG2DIM),
        idx1: slot_index(c, LEAF_LOG2DIM, LEVEL1_LOG2DIM),
        idx0: slot_index(c, 0, LEAF_LOG2DIM),
    }
}

pub fn keys_to_coord(k: TreeKeys) -> Coord {
    let o2 = slot_origin(k.root, k.idx2, LEAF_LOG2DIM + LEVEL1_LOG2DIM, LEVEL2_LOG2DIM);
    let o1 = slot_origin(o2, k.idx1, LEAF_LOG2DIM, LEVEL1_LOG2DIM);
    slot_origin(o1, k.idx0, 0, LEAF_LOG2DIM)
}

/// Narrow-band level set or normalized density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridClass {
    Sdf,
    Fog,
}

impl GridClass {
    pub fn to_u8(self) -> u8 {
        match self {
            GridClass::Sdf => 0,
            GridClass::Fog => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(GridClass::Sdf),
            1 => Some(GridClass::Fog),
            _ => None,
        }
    }
}

/// Common behaviour of every tree level.
pub trait TreeNode {
    /// log2 of slots per axis (voxels per axis for leaves).
    const LOG2DIM: u32;
    /// log2 of the voxel edge length covered by the node.
    const TOTAL_LOG2: u32;

    fn origin(&self) -> Coord;
    fn probe(&self, c: Coord) -> (f32, bool);
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafNode {
    origin: Coord,
    values: Box<[f32]>,
    active: NodeMask,
}

impl LeafNode {
    pub fn new(origin: Coord, fill: f32) -> Self {
        debug_assert_eq!(origin, origin.align(LEAF_DIM));
        LeafNode {
            origin,
            values: vec![fill; LEAF_VOXELS].into_boxed_slice(),
            active: NodeMask::new(LEAF_LOG2DIM),
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn active_mask(&self) -> &NodeMask {
        &self.active
    }

    pub fn active_mask_mut(&mut self) -> &mut NodeMask {
        &mut self.active
    }

    #[inline]
    pub fn offset_of(c: Coord) -> usize {
        slot_index(c, 0, LEAF_LOG2DIM)
    }

    #[inline]
    pub fn coord_of(&self, idx: usize) -> Coord {
        slot_origin(self.origin, idx, 0, LEAF_LOG2DIM)
    }

    pub fn set(&mut self, c: Coord, value: f32, active: bool) {
        let i = Self::offset_of(c);
        self.values[i] = value;
        self.active.set(i, active);
    }

    pub fn active_voxels(&self) -> impl Iterator<Item = (Coord, f32)> + '_ {
        self.active
            .iter_on()
            .map(move |i| (self.coord_of(i), self.values[i]))
    }
}

impl TreeNode for LeafNode {
    const LOG2DIM: u32 = LEAF_LOG2DIM;
    const TOTAL_LOG2: u32 = LEAF_LOG2DIM;

    fn origin(&self) -> Coord {
        self.origin
    }

    #[inline]
    fn probe(&self, c: Coord) -> (f32, bool) {
        let i = Self::offset_of(c);
        (self.values[i], self.active.get(i))
    }
}

/// Internal node with `2^(3·LOG2DIM)` slots, each a child of type `C` or a tile.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalNode<C, const LOG2DIM: u32> {
    origin: Coord,
    child_mask: NodeMask,
    active_mask: NodeMask,
    tiles: Box<[f32]>,
    children: Box<[Option<Box<C>>]>,
}

pub type Level1Node = InternalNode<LeafNode, LEVEL1_LOG2DIM>;
pub type Level2Node = InternalNode<Level1Node, LEVEL2_LOG2DIM>;

/// What an internal slot holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot<'a, C> {
    Child(&'a C),
    Tile { value: f32, active: bool },
}

impl<C: TreeNode, const LOG2DIM: u32> InternalNode<C, LOG2DIM> {
    pub const SLOTS: usize = 1 << (3 * LOG2DIM);

    pub fn new(origin: Coord, fill: f32) -> Self {
        InternalNode {
            origin,
            child_mask: NodeMask::new(LOG2DIM),
            active_mask: NodeMask::new(LOG2DIM),
            tiles: vec![fill; Self::SLOTS].into_boxed_slice(),
            children: (0..Self::SLOTS).map(|_| None).collect(),
        }
    }

    #[inline]
    pub fn slot_of(c: Coord) -> usize {
        slot_index(c, C::TOTAL_LOG2, LOG2DIM)
    }

    #[inline]
    pub fn slot_coord(&self, idx: usize) -> Coord {
        slot_origin(self.origin, idx, C::TOTAL_LOG2, LOG2DIM)
    }

    pub fn child_mask(&self) -> &NodeMask {
        &self.child_mask
    }

    pub fn active_mask(&self) -> &NodeMask {
        &self.active_mask
    }

    pub fn slot(&self, idx: usize) -> Slot<'_, C> {
        match &self.children[idx] {
            Some(child) => Slot::Child(child),
            None => Slot::Tile {
                value: self.tiles[idx],
                active: self.active_mask.get(idx),
            },
        }
    }

    pub fn child(&self, idx: usize) -> Option<&C> {
        self.children[idx].as_deref()
    }

    pub fn child_mut(&mut self, idx: usize) -> Option<&mut C> {
        self.children[idx].as_deref_mut()
    }

    pub fn tile_value(&self, idx: usize) -> f32 {
        self.tiles[idx]
    }

    pub fn children(&self) -> impl Iterator<Item = &C> + '_ {
        self.child_mask
            .iter_on()
            .map(move |i| self.children[i].as_deref().expect("child bit without child"))
    }

    pub fn set_tile(&mut self, idx: usize, value: f32, active: bool) {
        self.children[idx] = None;
        self.child_mask.set(idx, false);
        self.tiles[idx] = value;
        self.active_mask.set(idx, active);
    }

    /// Installs `child` at `idx`, replacing any tile. The active bit of a
    /// child slot is left clear.
    pub fn set_child(&mut self, idx: usize, child: Box<C>) {
        self.child_mask.set(idx, true);
        self.active_mask.set(idx, false);
        self.tiles[idx] = 0.0;
        self.children[idx] = Some(child);
    }

    pub fn take_child(&mut self, idx: usize) -> Option<Box<C>> {
        self.child_mask.set(idx, false);
        self.children[idx].take()
    }
}

impl<C: TreeNode, const LOG2DIM: u32> TreeNode for InternalNode<C, LOG2DIM> {
    const LOG2DIM: u32 = LOG2DIM;
    const TOTAL_LOG2: u32 = LOG2DIM + C::TOTAL_LOG2;

    fn origin(&self) -> Coord {
        self.origin
    }

    #[inline]
    fn probe(&self, c: Coord) -> (f32, bool) {
        let i = Self::slot_of(c);
        match &self.children[i] {
            Some(child) => child.probe(c),
            None => (self.tiles[i], self.active_mask.get(i)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RootEntry {
    Tile { value: f32, active: bool },
    Child(Box<Level2Node>),
}

/// A single active voxel or active tile as produced by [`VdbGrid::active_values`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveValue {
    pub coord: Coord,
    pub value: f32,
    /// Edge length in voxels of the covered cube (1 for voxels).
    pub extent: i32,
}

impl ActiveValue {
    /// Expands a tile into its covered voxels.
    pub fn voxels(&self) -> impl Iterator<Item = Coord> + '_ {
        let n = self.extent;
        (0..n).flat_map(move |i| {
            (0..n).flat_map(move |j| (0..n).map(move |k| self.coord.offset(i, j, k)))
        })
    }
}

/// Level of a tile inserted through [`GridBuilder::insert_tile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TileLevel {
    /// 8³ slot of a level-1 node.
    Level1,
    /// 128³ slot of a level-2 node.
    Level2,
    /// 4096³ root entry.
    Root,
}

impl TileLevel {
    pub fn extent(self) -> i32 {
        match self {
            TileLevel::Level1 => LEAF_DIM,
            TileLevel::Level2 => LEVEL1_DIM,
            TileLevel::Root => LEVEL2_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VdbGrid {
    root: BTreeMap<Coord, RootEntry>,
    background: f32,
    class: GridClass,
    voxel_size: f64,
    half_width: f32,
}

impl VdbGrid {
    pub fn empty(background: f32, class: GridClass, voxel_size: f64, half_width: f32) -> Self {
        VdbGrid {
            root: BTreeMap::new(),
            background,
            class,
            voxel_size,
            half_width,
        }
    }

    /// Copy of the metadata with an empty tree.
    pub fn empty_like(&self) -> Self {
        Self::empty(self.background, self.class, self.voxel_size, self.half_width)
    }

    pub fn background(&self) -> f32 {
        self.background
    }

    pub fn class(&self) -> GridClass {
        self.class
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn half_width(&self) -> f32 {
        self.half_width
    }

    pub fn root(&self) -> &BTreeMap<Coord, RootEntry> {
        &self.root
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_empty()
    }

    pub fn accessor(&self) -> Accessor<'_> {
        Accessor::new(self)
    }

    /// Uncached top-down lookup.
    pub fn get_value(&self, c: Coord) -> (f32, bool) {
        match self.root.get(&c.align(LEVEL2_DIM)) {
            None => (self.background, false),
            Some(RootEntry::Tile { value, active }) => (*value, *active),
            Some(RootEntry::Child(node)) => node.probe(c),
        }
    }

    pub fn is_active(&self, c: Coord) -> bool {
        self.get_value(c).1
    }

    pub fn level2_nodes(&self) -> impl Iterator<Item = &Level2Node> + '_ {
        self.root.values().filter_map(|e| match e {
            RootEntry::Child(n) => Some(n.as_ref()),
            RootEntry::Tile { .. } => None,
        })
    }

    pub fn level1_nodes(&self) -> impl Iterator<Item = &Level1Node> + '_ {
        self.level2_nodes().flat_map(|n| n.children())
    }

    pub fn leaves(&self) -> impl Iterator<Item = &LeafNode> + '_ {
        self.level1_nodes().flat_map(|n| n.children())
    }

    pub fn level1_node(&self, origin: Coord) -> Option<&Level1Node> {
        match self.root.get(&origin.align(LEVEL2_DIM))? {
            RootEntry::Child(n2) => n2.child(Level2Node::slot_of(origin)),
            RootEntry::Tile { .. } => None,
        }
    }

    pub fn leaf(&self, origin: Coord) -> Option<&LeafNode> {
        self.level1_node(origin)?.child(Level1Node::slot_of(origin))
    }

    /// Active voxels and active tiles ordered by root key, then slot index at
    /// each level.
    pub fn active_values(&self) -> impl Iterator<Item = ActiveValue> + '_ {
        self.root.iter().flat_map(|(key, entry)| -> Box<dyn Iterator<Item = ActiveValue> + '_> {
            match entry {
                RootEntry::Tile { value, active: true } => Box::new(std::iter::once(ActiveValue {
                    coord: *key,
                    value: *value,
                    extent: LEVEL2_DIM,
                })),
                RootEntry::Tile { .. } => Box::new(std::iter::empty()),
                RootEntry::Child(n2) => Box::new(level2_active(n2)),
            }
        })
    }

    /// Number of active voxels, counting tiles by the voxels they cover.
    pub fn active_voxel_count(&self) -> u64 {
        self.active_values()
            .map(|a| (a.extent as u64).pow(3))
            .sum()
    }

    pub(crate) fn root_mut(&mut self) -> &mut BTreeMap<Coord, RootEntry> {
        &mut self.root
    }

    pub(crate) fn level2_mut(&mut self, c: Coord) -> &mut Level2Node {
        let key = c.align(LEVEL2_DIM);
        let bg = self.background;
        let entry = self
            .root
            .entry(key)
            .or_insert_with(|| RootEntry::Tile { value: bg, active: false });
        if let RootEntry::Tile { value, active } = *entry {
            let mut node = Level2Node::new(key, value);
            if active {
                for i in 0..Level2Node::SLOTS {
                    node.active_mask.set(i, true);
                }
            }
            *entry = RootEntry::Child(Box::new(node));
        }
        match entry {
            RootEntry::Child(n) => n,
            RootEntry::Tile { .. } => unreachable!(),
        }
    }

    pub(crate) fn level1_mut(&mut self, c: Coord) -> &mut Level1Node {
        let n2 = self.level2_mut(c);
        let idx = Level2Node::slot_of(c);
        if n2.children[idx].is_none() {
            let (value, active) = (n2.tiles[idx], n2.active_mask.get(idx));
            let mut node = Level1Node::new(c.align(LEVEL1_DIM), value);
            if active {
                for i in 0..Level1Node::SLOTS {
                    node.active_mask.set(i, true);
                }
            }
            n2.set_child(idx, Box::new(node));
        }
        n2.children[idx].as_deref_mut().unwrap()
    }

    pub(crate) fn leaf_mut(&mut self, c: Coord) -> &mut LeafNode {
        let n1 = self.level1_mut(c);
        let idx = Level1Node::slot_of(c);
        if n1.children[idx].is_none() {
            let (value, active) = (n1.tiles[idx], n1.active_mask.get(idx));
            let mut leaf = LeafNode::new(c.align(LEAF_DIM), value);
            if active {
                for i in 0..LEAF_VOXELS {
                    leaf.active.set(i, true);
                }
            }
            n1.set_child(idx, Box::new(leaf));
        }
        n1.children[idx].as_deref_mut().unwrap()
    }

    pub(crate) fn set_voxel(&mut self, c: Coord, value: f32, active: bool) {
        self.leaf_mut(c).set(c, value, active);
    }

    pub(crate) fn set_tile(&mut self, level: TileLevel, c: Coord, value: f32, active: bool) {
        match level {
            TileLevel::Root => {
                self.root
                    .insert(c.align(LEVEL2_DIM), RootEntry::Tile { value, active });
            }
            TileLevel::Level2 => {
                let n2 = self.level2_mut(c);
                n2.set_tile(Level2Node::slot_of(c), value, active);
            }
            TileLevel::Level1 => {
                let n1 = self.level1_mut(c);
                n1.set_tile(Level1Node::slot_of(c), value, active);
            }
        }
    }

    /// Inserts a fully formed leaf, replacing whatever occupied its slot.
    pub(crate) fn insert_leaf(&mut self, leaf: LeafNode) {
        let origin = leaf.origin;
        let n1 = self.level1_mut(origin);
        n1.set_child(Level1Node::slot_of(origin), Box::new(leaf));
    }
}

fn level2_active(n2: &Level2Node) -> impl Iterator<Item = ActiveValue> + '_ {
    (0..Level2Node::SLOTS)
        .filter(move |&i| n2.child_mask.get(i) || n2.active_mask.get(i))
        .flat_map(move |i| -> Box<dyn Iterator<Item = ActiveValue> + '_> {
            match n2.slot(i) {
                Slot::Child(n1) => Box::new(level1_active(n1)),
                Slot::Tile { value, .. } => Box::new(std::iter::once(ActiveValue {
                    coord: n2.slot_coord(i),
                    value,
                    extent: LEVEL1_DIM,
                })),
            }
        })
}

fn level1_active(n1: &Level1Node) -> impl Iterator<Item = ActiveValue> + '_ {
    (0..Level1Node::SLOTS)
        .filter(move |&i| n1.child_mask.get(i) || n1.active_mask.get(i))
        .flat_map(move |i| -> Box<dyn Iterator<Item = ActiveValue> + '_> {
            match n1.slot(i) {
                Slot::Child(leaf) => Box::new(leaf.active_voxels().map(|(coord, value)| {
                    ActiveValue {
                        coord,
                        value,
                        extent: 1,
                    }
                })),
                Slot::Tile { value, .. } => Box::new(std::iter::once(ActiveValue {
                    coord: n1.slot_coord(i),
                    value,
                    extent: LEAF_DIM,
                })),
            }
        })
}

/// Incremental grid construction with duplicate detection.
#[derive(Debug)]
pub struct GridBuilder {
    grid: VdbGrid,
    written: HashMap<Coord, NodeMask>,
}

impl GridBuilder {
    pub fn new(background: f32, class: GridClass, voxel_size: f64, half_width: f32) -> Self {
        GridBuilder {
            grid: VdbGrid::empty(background, class, voxel_size, half_width),
            written: HashMap::new(),
        }
    }

    /// Sets one voxel. Re-inserting the same `(value, active)` pair is a no-op;
    /// a different pair at the same coordinate is an error.
    pub fn insert(&mut self, c: Coord, value: f32, active: bool) -> Result<(), GridError> {
        if !c.in_range() {
            return Err(GridError::OutOfRange(c));
        }
        let origin = c.align(LEAF_DIM);
        let idx = LeafNode::offset_of(c);
        let mask = self
            .written
            .entry(origin)
            .or_insert_with(|| NodeMask::new(LEAF_LOG2DIM));
        if mask.get(idx) {
            let prev = self.grid.get_value(c);
            if prev.0.to_bits() != value.to_bits() || prev.1 != active {
                return Err(GridError::DuplicateConflict(c));
            }
            return Ok(());
        }
        mask.set(idx, true);
        self.grid.set_voxel(c, value, active);
        Ok(())
    }

    /// Inserts a whole leaf. Fails if any of its voxels was already written.
    pub fn insert_leaf(&mut self, leaf: LeafNode) -> Result<(), GridError> {
        let origin = leaf.origin;
        if origin != origin.align(LEAF_DIM) || !origin.in_range() {
            return Err(GridError::OutOfRange(origin));
        }
        let mask = self.written.entry(origin).or_insert_with(|| NodeMask::new(LEAF_LOG2DIM));
        if let Some(i) = mask.iter_on().next() {
            return Err(GridError::DuplicateConflict(leaf.coord_of(i)));
        }
        *mask = NodeMask::from_words(vec![u64::MAX; LEAF_VOXELS / 64]);
        self.grid.insert_leaf(leaf);
        Ok(())
    }

    pub fn insert_tile(&mut self, level: TileLevel, c: Coord, value: f32, active: bool) -> Result<(), GridError> {
        if !c.in_range() {
            return Err(GridError::OutOfRange(c));
        }
        self.grid.set_tile(level, c, value, active);
        Ok(())
    }

    /// Inserts an active value as produced by [`VdbGrid::active_values`].
    pub fn insert_active(&mut self, a: ActiveValue) -> Result<(), GridError> {
        match a.extent {
            1 => self.insert(a.coord, a.value, true),
            LEAF_DIM => self.insert_tile(TileLevel::Level1, a.coord, a.value, true),
            LEVEL1_DIM => self.insert_tile(TileLevel::Level2, a.coord, a.value, true),
            _ => self.insert_tile(TileLevel::Root, a.coord, a.value, true),
        }
    }

    pub fn build(self) -> VdbGrid {
        self.grid
    }
}

/// Builds a grid from `(coord, value, active)` samples.
pub fn build_grid<I>(
    samples: I,
    background: f32,
    class: GridClass,
    voxel_size: f64,
    half_width: f32,
) -> Result<VdbGrid, GridError>
where
    I: IntoIterator<Item = (Coord, f32, bool)>,
{
    let mut b = GridBuilder::new(background, class, voxel_size, half_width);
    for (c, v, a) in samples {
        b.insert(c, v, a)?;
    }
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_nodes(g: &VdbGrid) -> (usize, usize, usize) {
        (
            g.level2_nodes().count(),
            g.level1_nodes().count(),
            g.leaves().count(),
        )
    }

    #[test]
    fn origin_keys() {
        let k = coord_to_keys(Coord::new(0, 0, 0));
        assert_eq!(k, TreeKeys { root: Coord::splat(0), idx2: 0, idx1: 0, idx0: 0 });
        let k = coord_to_keys(Coord::new(4096, 0, 0));
        assert_eq!(k.root, Coord::new(4096, 0, 0));
        assert_eq!((k.idx2, k.idx1, k.idx0), (0, 0, 0));
    }

    #[test]
    fn minus_one_hits_last_slot_of_every_level() {
        let c = Coord::splat(-1);
        let k = coord_to_keys(c);
        assert_eq!(k.root, Coord::splat(-4096));
        // brute force: scan every slot of the containing nodes for the one
        // whose covered region holds c
        let g = build_grid([(c, 1.0, true)], 0.0, GridClass::Fog, 1.0, 3.0).unwrap();
        let n2 = g.level2_nodes().next().unwrap();
        let hit2: Vec<usize> = (0..Level2Node::SLOTS).filter(|&i| n2.child_mask().get(i)).collect();
        let n1 = g.level1_nodes().next().unwrap();
        let hit1: Vec<usize> = (0..Level1Node::SLOTS).filter(|&i| n1.child_mask().get(i)).collect();
        let leaf = g.leaves().next().unwrap();
        let hit0: Vec<usize> = (0..LEAF_VOXELS).filter(|&i| leaf.active_mask().get(i)).collect();
        assert_eq!(hit2, vec![k.idx2]);
        assert_eq!(hit1, vec![k.idx1]);
        assert_eq!(hit0, vec![k.idx0]);
        assert_eq!(k.idx2, Level2Node::SLOTS - 1);
        assert_eq!(k.idx1, Level1Node::SLOTS - 1);
        assert_eq!(k.idx0, LEAF_VOXELS - 1);
    }

    #[test]
    fn empty_grid_has_no_nodes() {
        let g = build_grid(std::iter::empty(), 2.5, GridClass::Sdf, 0.1, 3.0).unwrap();
        assert_eq!(count_nodes(&g), (0, 0, 0));
        assert_eq!(g.get_value(Coord::new(5, -9, 100)), (2.5, false));
        assert_eq!(g.active_values().count(), 0);
    }

    #[test]
    fn single_voxel_allocates_one_path() {
        let g = build_grid([(Coord::splat(0), 0.5, true)], 0.0, GridClass::Fog, 1.0, 3.0).unwrap();
        assert_eq!(count_nodes(&g), (1, 1, 1));
    }

    #[test]
    fn eight_voxels_share_a_leaf() {
        let samples = (0..8).map(|i| (Coord::new(i % 2, (i / 2) % 2, i / 4), i as f32, true));
        let g = build_grid(samples, 0.0, GridClass::Fog, 1.0, 3.0).unwrap();
        assert_eq!(count_nodes(&g), (1, 1, 1));
        assert_eq!(g.active_values().count(), 8);
    }

    #[test]
    fn duplicate_conflict_names_coordinate() {
        let c = Coord::new(3, 4, 5);
        let err = build_grid([(c, 1.0, true), (c, 2.0, true)], 0.0, GridClass::Fog, 1.0, 3.0).unwrap_err();
        assert_eq!(err, GridError::DuplicateConflict(c));
        assert!(err.to_string().contains("(3, 4, 5)"));
        // identical duplicates are accepted
        assert!(build_grid([(c, 1.0, true), (c, 1.0, true)], 0.0, GridClass::Fog, 1.0, 3.0).is_ok());
    }

    #[test]
    fn level1_tile_covers_its_512_voxels() {
        let mut b = GridBuilder::new(0.0, GridClass::Fog, 1.0, 3.0);
        b.insert_tile(TileLevel::Level1, Coord::new(8, 16, 24), 0.75, true).unwrap();
        let g = b.build();
        let mut n = 0;
        for i in 8..16 {
            for j in 16..24 {
                for k in 24..32 {
                    assert_eq!(g.get_value(Coord::new(i, j, k)), (0.75, true));
                    n += 1;
                }
            }
        }
        assert_eq!(n, 512);
        assert_eq!(g.get_value(Coord::new(7, 16, 24)), (0.0, false));
        let items: Vec<_> = g.active_values().collect();
        assert_eq!(items, vec![ActiveValue { coord: Coord::new(8, 16, 24), value: 0.75, extent: 8 }]);
        assert_eq!(g.active_voxel_count(), 512);
    }

    #[test]
    fn voxel_inside_tile_splits_it() {
        let mut b = GridBuilder::new(0.0, GridClass::Fog, 1.0, 3.0);
        b.insert_tile(TileLevel::Level1, Coord::new(0, 0, 0), 0.5, true).unwrap();
        b.insert(Coord::new(1, 1, 1), 0.9, false).unwrap();
        let g = b.build();
        assert_eq!(g.get_value(Coord::new(0, 0, 0)), (0.5, true));
        assert_eq!(g.get_value(Coord::new(1, 1, 1)), (0.9, false));
        assert_eq!(g.active_voxel_count(), 511);
    }

    #[test]
    fn iteration_is_sorted_by_keys() {
        let coords = [Coord::new(100, -3, 7), Coord::new(-5000, 2, 2), Coord::new(0, 0, 1), Coord::new(0, 0, 0)];
        let g = build_grid(coords.iter().map(|&c| (c, 1.0, true)), 0.0, GridClass::Fog, 1.0, 3.0).unwrap();
        let got: Vec<Coord> = g.active_values().map(|a| a.coord).collect();
        let mut want = coords.to_vec();
        want.sort_by_key(|&c| {
            let k = coord_to_keys(c);
            (k.root, k.idx2, k.idx1, k.idx0)
        });
        assert_eq!(got, want);
    }
}
