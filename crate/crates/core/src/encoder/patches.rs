use crate::container::{EncodedSubdomain, GridMeta, PatchList, Role, SlotClass};
use crate::eval::{argmax, Blender, TableCache};
use crate::grid::{Coord, GridClass, TreeNode, VdbGrid, LEAF_VOXELS};
use crate::partition::SubdomainLayout;

/// Misclassification counts measured before patching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PatchStats {
    pub l1_slots: u64,
    pub l1_wrong: u64,
    pub l0_voxels: u64,
    pub l0_wrong: u64,
    /// Voxel disagreements left unpatched by the significance filter.
    pub l0_dropped: u64,
}

impl PatchStats {
    pub fn l1_accuracy(&self) -> f64 {
        1.0 - self.l1_wrong as f64 / self.l1_slots.max(1) as f64
    }

    pub fn l0_error_rate(&self) -> f64 {
        self.l0_wrong as f64 / self.l0_voxels.max(1) as f64
    }
}

/// Rule for voxel disagreements. Strict mode keeps them all; otherwise a
/// disagreement is kept only when the voxel is truly active and its value is
/// significant (close to the surface for SDFs, above `significance` for fog).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchFilter {
    pub strict: bool,
    pub significance: f32,
    pub class: GridClass,
    pub band: f32,
}

impl PatchFilter {
    pub fn new(meta: &GridMeta, strict: bool, significance: Option<f32>) -> Self {
        let significance = significance.unwrap_or(match meta.class {
            GridClass::Sdf => 0.5 * meta.voxel_size as f32,
            GridClass::Fog => 0.01,
        });
        PatchFilter { strict, significance, class: meta.class, band: meta.half_width * meta.voxel_size as f32 }
    }

    /// Whether a voxel whose predicted active bit disagrees with the truth
    /// gets a patch. `value` is meaningful only when `truth_active`.
    pub fn keep(&self, truth_active: bool, value: f32) -> bool {
        if self.strict {
            return true;
        }
        if !truth_active {
            return false;
        }
        match self.class {
            GridClass::Sdf => value.abs() < self.band - self.significance,
            GridClass::Fog => value > self.significance,
        }
    }
}

/// Turns predictions into per-expert patch lists. `l1` holds
/// `(slot origin, truth, predicted)`; `l0` holds
/// `(voxel, truth active, value, predicted active)`.
pub fn patches_from_predictions(
    layout: &SubdomainLayout,
    filter: &PatchFilter,
    l1: impl IntoIterator<Item = (Coord, SlotClass, SlotClass)>,
    l0: impl IntoIterator<Item = (Coord, bool, f32, bool)>,
) -> (Vec<PatchList>, PatchStats) {
    let mut lists = vec![PatchList::default(); layout.len()];
    let mut stats = PatchStats::default();
    for (slot, truth, predicted) in l1 {
        stats.l1_slots += 1;
        if truth != predicted {
            stats.l1_wrong += 1;
            if let Some(owner) = layout.owner(slot) {
                lists[owner.id as usize].l1.push((slot, truth));
            }
        }
    }
    for (c, truth, value, predicted) in l0 {
        stats.l0_voxels += 1;
        if truth == predicted {
            continue;
        }
        stats.l0_wrong += 1;
        if !filter.keep(truth, value) {
            stats.l0_dropped += 1;
            continue;
        }
        if let Some(owner) = layout.owner(c) {
            lists[owner.id as usize].l0.push((c, truth.then_some(value)));
        }
    }
    for list in &mut lists {
        list.l1.sort_unstable_by_key(|e| e.0);
        list.l0.sort_unstable_by_key(|e| e.0);
    }
    (lists, stats)
}

/// Evaluates the blended classifiers on every slot of every level-1 node and
/// every voxel of every leaf, and records the disagreements.
pub fn extract_patches(
    grid: &VdbGrid,
    layout: &SubdomainLayout,
    experts: &[EncodedSubdomain],
    filter: &PatchFilter,
) -> (Vec<PatchList>, PatchStats) {
    let cache = TableCache::new(experts.len());
    let blender = Blender::new(layout, experts, &cache);

    let mut slots = Vec::new();
    let mut slot_truth = Vec::new();
    for n1 in grid.level1_nodes() {
        for idx in 0..crate::grid::Level1Node::SLOTS {
            slots.push(n1.slot_coord(idx));
            slot_truth.push(SlotClass::of_slot(n1, idx));
        }
    }
    let l1_pred = blender.eval(Role::Level1, &slots, None);
    let l1 = (0..slots.len()).map(|i| {
        let predicted = l1_pred
            .row(i)
            .and_then(|r| SlotClass::from_index(argmax(r)))
            .unwrap_or(SlotClass::InactiveTile);
        (slots[i], slot_truth[i], predicted)
    });

    let mut voxels = Vec::new();
    let mut voxel_truth = Vec::new();
    for leaf in grid.leaves() {
        for v in 0..LEAF_VOXELS {
            voxels.push(leaf.coord_of(v));
            voxel_truth.push((leaf.active_mask().get(v), leaf.values()[v]));
        }
        debug_assert!(grid.leaf(leaf.origin()).is_some());
    }
    let l0_pred = blender.eval(Role::Level0, &voxels, None);
    let l0 = (0..voxels.len()).map(|i| {
        let predicted = l0_pred.row(i).is_some_and(|r| r[0] > 0.5);
        (voxels[i], voxel_truth[i].0, voxel_truth[i].1, predicted)
    });
    patches_from_predictions(layout, filter, l1, l0)
}
