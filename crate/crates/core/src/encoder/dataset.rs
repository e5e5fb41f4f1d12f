use crate::container::SlotClass;
use crate::grid::{Coord, CoordBox, TreeNode, VdbGrid, LEAF_DIM, LEAF_VOXELS, LEVEL1_DIM};
use crate::partition::{Subdomain, SubdomainLayout};

/// Training samples of one expert, gathered over its halo-expanded box.
/// Slot entries hold slot origins; voxel entries hold voxel coordinates.
#[derive(Debug, Clone, Default)]
pub struct ExpertData {
    pub l1: Vec<(Coord, SlotClass)>,
    pub tiles: Vec<(Coord, f32)>,
    /// Every voxel inside a leaf slot, with its active bit.
    pub l0: Vec<(Coord, bool)>,
    pub voxels: Vec<(Coord, f32)>,
}

/// Inclusive range of points with a nonzero gate: the open interval
/// `(lo - h, hi + h)` along each axis.
fn gated(outer: &CoordBox, p: [f64; 3]) -> bool {
    let lo = outer.lo.to_f64();
    let hi = outer.hi.to_f64();
    (0..3).all(|a| p[a] > lo[a] && p[a] < hi[a])
}

fn intersects(a: &CoordBox, b: &CoordBox) -> bool {
    !a.intersect(b).is_empty()
}

/// Collects per-expert datasets in one sweep over the level-1 nodes.
pub fn collect(grid: &VdbGrid, layout: &SubdomainLayout) -> Vec<ExpertData> {
    let halo = layout.halo();
    let subs: Vec<(Subdomain, CoordBox)> = layout.subdomains().iter().map(|s| (*s, s.expanded(halo))).collect();
    let mut data = vec![ExpertData::default(); subs.len()];
    let slot_shift = (LEAF_DIM as f64 - 1.0) / 2.0;
    for n1 in grid.level1_nodes() {
        let node_box = CoordBox::cube(n1.origin(), LEVEL1_DIM);
        for (id, (_, outer)) in subs.iter().enumerate() {
            if !intersects(&node_box, outer) {
                continue;
            }
            let d = &mut data[id];
            for idx in 0..crate::grid::Level1Node::SLOTS {
                let slot = n1.slot_coord(idx);
                let sp = slot.to_f64();
                let centre = [sp[0] + slot_shift, sp[1] + slot_shift, sp[2] + slot_shift];
                if gated(outer, centre) {
                    let class = SlotClass::of_slot(n1, idx);
                    d.l1.push((slot, class));
                    if class == SlotClass::ActiveTile {
                        d.tiles.push((slot, n1.tile_value(idx)));
                    }
                }
                let Some(leaf) = n1.child(idx) else { continue };
                if !intersects(&CoordBox::cube(slot, LEAF_DIM), outer) {
                    continue;
                }
                for v in 0..LEAF_VOXELS {
                    let c = leaf.coord_of(v);
                    if !gated(outer, c.to_f64()) {
                        continue;
                    }
                    let active = leaf.active_mask().get(v);
                    d.l0.push((c, active));
                    if active {
                        d.voxels.push((c, leaf.values()[v]));
                    }
                }
            }
        }
    }
    data
}
