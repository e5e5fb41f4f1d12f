//! "NVGR" grid file format.
//!
//! Little-endian throughout:
//!
//! ```text
//! header   'N' 'V' 'G' 'R' | version u32 = 1 | class u8 | background f32
//!          | voxel size f64 | half width f32 | root entry count u64
//! entry    key i32×3 | kind u8 (0 = tile, 1 = child)
//!   tile   value f32 | active u8
//!   child  level-2 node
//! node     origin i32×3 | child mask u64×W | active mask u64×W
//!          | f32 tile value for every slot whose child bit is clear (slot order)
//!          | children depth first in slot order
//! leaf     origin i32×3 | active mask u64×8 | value f32×512
//! ```

use std::path::Path;

use super::{
    Coord, GridClass, InternalNode, LeafNode, Level1Node, Level2Node, NodeMask, RootEntry,
    TreeNode, VdbGrid, LEAF_LOG2DIM, LEAF_VOXELS, LEVEL2_DIM,
};
use crate::bytes::{ByteReader, ByteWriter, FormatError};

pub const MAGIC: [u8; 4] = *b"NVGR";
pub const VERSION: u32 = 1;

pub fn to_bytes(grid: &VdbGrid) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(&MAGIC);
    w.u32(VERSION);
    w.u8(grid.class.to_u8());
    w.f32(grid.background);
    w.f64(grid.voxel_size);
    w.f32(grid.half_width);
    w.u64(grid.root.len() as u64);
    for (key, entry) in &grid.root {
        write_coord(&mut w, *key);
        match entry {
            RootEntry::Tile { value, active } => {
                w.u8(0);
                w.f32(*value);
                w.u8(*active as u8);
            }
            RootEntry::Child(n2) => {
                w.u8(1);
                write_internal(&mut w, n2.as_ref(), |w, n1| {
                    write_internal(w, n1, write_leaf)
                });
            }
        }
    }
    w.into_inner()
}

pub fn from_bytes(data: &[u8]) -> Result<VdbGrid, FormatError> {
    let mut r = ByteReader::new(data, "header");
    let magic = r.magic()?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic { expected: MAGIC, found: magic });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::Version(version));
    }
    let class = GridClass::from_u8(r.u8()?)
        .ok_or_else(|| FormatError::corrupt("header", "unknown grid class"))?;
    let background = r.f32()?;
    let voxel_size = r.f64()?;
    let half_width = r.f32()?;
    let count = r.count(13)?;
    let mut grid = VdbGrid::empty(background, class, voxel_size, half_width);
    r.set_section("root");
    for _ in 0..count {
        let key = read_coord(&mut r)?;
        if key != key.align(LEVEL2_DIM) {
            return Err(FormatError::corrupt("root", format!("unaligned root key {key}")));
        }
        let entry = match r.u8()? {
            0 => RootEntry::Tile { value: r.f32()?, active: r.u8()? != 0 },
            1 => {
                r.set_section("level2");
                let n2: Level2Node = read_internal(&mut r, key, "level2", |r, o| {
                    r.set_section("level1");
                    let n1 = read_internal(r, o, "level1", read_leaf)?;
                    r.set_section("level2");
                    Ok(n1)
                })?;
                r.set_section("root");
                RootEntry::Child(Box::new(n2))
            }
            k => return Err(FormatError::corrupt("root", format!("unknown entry kind {k}"))),
        };
        if grid.root.insert(key, entry).is_some() {
            return Err(FormatError::corrupt("root", format!("duplicate root key {key}")));
        }
    }
    if !r.is_at_end() {
        return Err(FormatError::corrupt("root", "trailing bytes"));
    }
    Ok(grid)
}

pub fn save(grid: &VdbGrid, path: impl AsRef<Path>) -> Result<u64, FormatError> {
    let bytes = to_bytes(grid);
    std::fs::write(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn load(path: impl AsRef<Path>) -> Result<VdbGrid, FormatError> {
    from_bytes(&std::fs::read(path)?)
}

pub(crate) fn write_coord(w: &mut ByteWriter, c: Coord) {
    w.i32(c.x);
    w.i32(c.y);
    w.i32(c.z);
}

pub(crate) fn read_coord(r: &mut ByteReader<'_>) -> Result<Coord, FormatError> {
    Ok(Coord::new(r.i32()?, r.i32()?, r.i32()?))
}

pub(crate) fn write_mask(w: &mut ByteWriter, m: &NodeMask) {
    for &word in m.words() {
        w.u64(word);
    }
}

pub(crate) fn read_mask(r: &mut ByteReader<'_>, log2dim: u32) -> Result<NodeMask, FormatError> {
    let words = NodeMask::new(log2dim).words().len();
    let mut v = Vec::with_capacity(words);
    for _ in 0..words {
        v.push(r.u64()?);
    }
    Ok(NodeMask::from_words(v))
}

fn write_internal<C: TreeNode, const L: u32>(
    w: &mut ByteWriter,
    node: &InternalNode<C, L>,
    child_fn: impl Fn(&mut ByteWriter, &C) + Copy,
) {
    write_coord(w, node.origin);
    write_mask(w, &node.child_mask);
    write_mask(w, &node.active_mask);
    for i in 0..InternalNode::<C, L>::SLOTS {
        if !node.child_mask.get(i) {
            w.f32(node.tiles[i]);
        }
    }
    for child in node.children() {
        child_fn(w, child);
    }
}

fn read_internal<C: TreeNode, const L: u32>(
    r: &mut ByteReader<'_>,
    expected_origin: Coord,
    section: &'static str,
    child_fn: impl Fn(&mut ByteReader<'_>, Coord) -> Result<C, FormatError> + Copy,
) -> Result<InternalNode<C, L>, FormatError> {
    let origin = read_coord(r)?;
    if origin != expected_origin {
        return Err(FormatError::corrupt(
            section,
            format!("node origin {origin} does not match its slot {expected_origin}"),
        ));
    }
    let child_mask = read_mask(r, L)?;
    let active_mask = read_mask(r, L)?;
    let mut node = InternalNode::<C, L>::new(origin, 0.0);
    for i in 0..InternalNode::<C, L>::SLOTS {
        let is_child = child_mask.get(i);
        if is_child && active_mask.get(i) {
            return Err(FormatError::corrupt(section, format!("slot {i} has both child and active bits")));
        }
        if !is_child {
            node.tiles[i] = r.f32()?;
        }
    }
    node.active_mask = active_mask;
    for i in child_mask.iter_on() {
        let child = child_fn(r, node.slot_coord(i))?;
        node.set_child(i, Box::new(child));
    }
    Ok(node)
}

fn write_leaf(w: &mut ByteWriter, leaf: &LeafNode) {
    write_coord(w, leaf.origin);
    write_mask(w, &leaf.active);
    for &v in leaf.values.iter() {
        w.f32(v);
    }
}

fn read_leaf(r: &mut ByteReader<'_>, expected_origin: Coord) -> Result<LeafNode, FormatError> {
    r.set_section("leaf");
    let origin = read_coord(r)?;
    if origin != expected_origin {
        return Err(FormatError::corrupt("leaf", format!("leaf origin {origin} does not match {expected_origin}")));
    }
    let mut leaf = LeafNode::new(origin, 0.0);
    leaf.active = read_mask(r, LEAF_LOG2DIM)?;
    for i in 0..LEAF_VOXELS {
        leaf.values[i] = r.f32()?;
    }
    r.set_section("level1");
    Ok(leaf)
}

impl VdbGrid {
    /// Structural equality of topology (all masks and node origins), ignoring values.
    pub fn same_topology(&self, other: &VdbGrid) -> bool {
        if self.root.len() != other.root.len() {
            return false;
        }
        self.root.iter().zip(other.root.iter()).all(|((ka, a), (kb, b))| {
            ka == kb
                && match (a, b) {
                    (RootEntry::Tile { active: x, .. }, RootEntry::Tile { active: y, .. }) => x == y,
                    (RootEntry::Child(a2), RootEntry::Child(b2)) => {
                        a2.child_mask == b2.child_mask
                            && a2.active_mask == b2.active_mask
                            && a2.children().zip(b2.children()).all(|(a1, b1): (&Level1Node, &Level1Node)| {
                                a1.origin == b1.origin
                                    && a1.child_mask == b1.child_mask
                                    && a1.active_mask == b1.active_mask
                                    && a1.children().zip(b1.children()).all(|(la, lb)| {
                                        la.origin == lb.origin && la.active == lb.active
                                    })
                            })
                    }
                    _ => false,
                }
        })
    }
}
