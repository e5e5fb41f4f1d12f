use std::fmt;

use super::{Level1Node, Level2Node, VdbGrid, LEAF_VOXELS};

/// Bytes of an origin coordinate.
pub const ORIGIN_BYTES: u64 = 12;
/// Bytes of one root table entry: key, tile value and a state byte.
pub const ROOT_ENTRY_BYTES: u64 = ORIGIN_BYTES + 4 + 1;
/// Level-2 layout: a 1-byte slot per entry, child and active masks, origin.
pub const LEVEL2_NODE_BYTES: u64 = (Level2Node::SLOTS as u64) + 2 * (Level2Node::SLOTS as u64 / 8) + ORIGIN_BYTES;
/// Level-1 layout: a 4-byte slot per entry, child and active masks, origin.
pub const LEVEL1_NODE_BYTES: u64 = (Level1Node::SLOTS as u64) * 4 + 2 * (Level1Node::SLOTS as u64 / 8) + ORIGIN_BYTES;
/// Leaf topology: active mask plus origin.
pub const LEAF_MASK_BYTES: u64 = (LEAF_VOXELS as u64) / 8 + ORIGIN_BYTES;
/// Leaf payload: one f32 per voxel.
pub const LEAF_VALUE_BYTES: u64 = (LEAF_VOXELS as u64) * 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LevelStats {
    pub node_count: u64,
    /// Active voxels for the leaf rows, active tiles for the others.
    pub active_count: u64,
    pub bytes: u64,
}

/// Per-level logical payload of a grid. Allocator overhead is not counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TopologyStats {
    pub root: LevelStats,
    pub level2: LevelStats,
    pub level1: LevelStats,
    pub leaf_masks: LevelStats,
    pub leaf_values: LevelStats,
}

impl TopologyStats {
    pub fn total_bytes(&self) -> u64 {
        self.rows().iter().map(|(_, r)| r.bytes).sum()
    }

    /// Size of the same tree with leaf values removed (values held elsewhere).
    pub fn topology_bytes(&self) -> u64 {
        self.total_bytes() - self.leaf_values.bytes
    }

    pub fn rows(&self) -> [(&'static str, LevelStats); 5] {
        [
            ("root", self.root),
            ("internal_level2", self.level2),
            ("internal_level1", self.level1),
            ("mask_level0", self.leaf_masks),
            ("voxels_level0", self.leaf_values),
        ]
    }
}

impl fmt::Display for TopologyStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let total = self.total_bytes().max(1);
        writeln!(f, "{:<16} {:>12} {:>14} {:>16} {:>8}", "level", "nodes", "active", "bytes", "share")?;
        for (name, r) in self.rows() {
            writeln!(
                f,
                "{:<16} {:>12} {:>14} {:>16} {:>7.3}%",
                name,
                r.node_count,
                r.active_count,
                r.bytes,
                100.0 * r.bytes as f64 / total as f64
            )?;
        }
        write!(f, "{:<16} {:>12} {:>14} {:>16}", "total", "", "", self.total_bytes())
    }
}

pub(super) fn compute(grid: &VdbGrid) -> TopologyStats {
    let mut s = TopologyStats::default();
    s.root.node_count = grid.root().len() as u64;
    s.root.bytes = s.root.node_count * ROOT_ENTRY_BYTES;
    s.root.active_count = grid
        .root()
        .values()
        .filter(|e| matches!(e, super::RootEntry::Tile { active: true, .. }))
        .count() as u64;
    for n2 in grid.level2_nodes() {
        s.level2.node_count += 1;
        s.level2.active_count += n2.active_mask().count_ones() as u64;
        for n1 in n2.children() {
            s.level1.node_count += 1;
            s.level1.active_count += n1.active_mask().count_ones() as u64;
            for leaf in n1.children() {
                let on = leaf.active_mask().count_ones() as u64;
                s.leaf_masks.node_count += 1;
                s.leaf_values.node_count += LEAF_VOXELS as u64;
                s.leaf_masks.active_count += on;
                s.leaf_values.active_count += on;
            }
        }
    }
    s.level2.bytes = s.level2.node_count * LEVEL2_NODE_BYTES;
    s.level1.bytes = s.level1.node_count * LEVEL1_NODE_BYTES;
    s.leaf_masks.bytes = s.leaf_masks.node_count * LEAF_MASK_BYTES;
    s.leaf_values.bytes = s.leaf_masks.node_count * LEAF_VALUE_BYTES;
    s
}

impl VdbGrid {
    pub fn topology_stats(&self) -> TopologyStats {
        compute(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Coord, GridClass};

    #[test]
    fn layout_constants() {
        assert_eq!(LEVEL2_NODE_BYTES, 40_972);
        assert_eq!(LEVEL1_NODE_BYTES, 17_420);
        assert_eq!(LEAF_MASK_BYTES, 76);
        assert_eq!(LEAF_VALUE_BYTES, 2048);
    }

    #[test]
    fn single_voxel() {
        let g = build_grid([(Coord::new(9, 9, 9), 1.0, true)], 0.0, GridClass::Fog, 1.0, 3.0).unwrap();
        let s = g.topology_stats();
        assert_eq!(s.leaf_values.bytes, 512 * 4);
        assert_eq!(s.leaf_masks.node_count, 1);
        assert_eq!(s.leaf_values.active_count, 1);
        assert_eq!(s.level1.node_count, 1);
        assert_eq!(s.level2.node_count, 1);
        assert_eq!(
            s.total_bytes(),
            ROOT_ENTRY_BYTES + LEVEL2_NODE_BYTES + LEVEL1_NODE_BYTES + LEAF_MASK_BYTES + LEAF_VALUE_BYTES
        );
    }

    #[test]
    fn empty() {
        let g = VdbGrid::empty(0.0, GridClass::Fog, 1.0, 3.0);
        let s = g.topology_stats();
        assert_eq!(s, TopologyStats::default());
        assert_eq!(s.total_bytes(), 0);
    }
}
