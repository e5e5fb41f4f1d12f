//! Encoded volume: explicit upper tree, subdomain layout and per-expert
//! networks with their topology patches. [`io`] holds the "NVDB" file format.

pub mod io;

use crate::config::TrainConfig;
use crate::grid::{Coord, GridClass, Level1Node, RootEntry, VdbGrid};
use crate::neural::{blob::WeightPrecision, CoordNet, Head};
use crate::partition::SubdomainLayout;

pub use io::{read_container, write_container, ContainerBytes, LosslessStage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMeta {
    pub voxel_size: f64,
    pub class: GridClass,
    pub background: f32,
    pub half_width: f32,
    /// Network outputs are multiplied by this to obtain grid values.
    pub value_scale: f32,
}

impl GridMeta {
    pub fn of(grid: &VdbGrid) -> Self {
        let value_scale = match grid.class() {
            GridClass::Sdf => (grid.half_width() as f64 * grid.voxel_size()) as f32,
            GridClass::Fog => 1.0,
        };
        GridMeta {
            voxel_size: grid.voxel_size(),
            class: grid.class(),
            background: grid.background(),
            half_width: grid.half_width(),
            value_scale: if value_scale > 0.0 { value_scale } else { 1.0 },
        }
    }
}

/// Class of a level-1 slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotClass {
    InactiveTile = 0,
    ActiveTile = 1,
    Child = 2,
}

impl SlotClass {
    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(SlotClass::InactiveTile),
            1 => Some(SlotClass::ActiveTile),
            2 => Some(SlotClass::Child),
            _ => None,
        }
    }

    pub fn of_slot(node: &Level1Node, idx: usize) -> Self {
        if node.child_mask().get(idx) {
            SlotClass::Child
        } else if node.active_mask().get(idx) {
            SlotClass::ActiveTile
        } else {
            SlotClass::InactiveTile
        }
    }
}

/// Corrections to classifier output. Both lists are sorted by coordinate and
/// hold each coordinate at most once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatchList {
    /// Level-1 slot origin and its true class.
    pub l1: Vec<(Coord, SlotClass)>,
    /// Voxel and its true state: `Some(value)` when active.
    pub l0: Vec<(Coord, Option<f32>)>,
}

impl PatchList {
    pub fn len(&self) -> usize {
        self.l1.len() + self.l0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l1.is_empty() && self.l0.is_empty()
    }

    pub fn l1_class(&self, slot: Coord) -> Option<SlotClass> {
        self.l1.binary_search_by_key(&slot, |e| e.0).ok().map(|i| self.l1[i].1)
    }

    pub fn l0_state(&self, c: Coord) -> Option<Option<f32>> {
        self.l0.binary_search_by_key(&c, |e| e.0).ok().map(|i| self.l0[i].1)
    }
}

/// Network role inside an expert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Level1,
    Tile,
    Level0,
    Voxel,
}

impl Role {
    pub fn head(self) -> Head {
        match self {
            Role::Level1 => Head::Classes(3),
            Role::Tile | Role::Voxel => Head::Linear,
            Role::Level0 => Head::Binary,
        }
    }

    /// Whether inputs are level-1 slots (as opposed to voxels).
    pub fn on_slots(self) -> bool {
        matches!(self, Role::Level1 | Role::Tile)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSubdomain {
    pub l1: CoordNet,
    pub tile: Option<CoordNet>,
    pub l0: Option<CoordNet>,
    pub voxel: Option<CoordNet>,
    pub patches: PatchList,
    /// Final smoothed training loss of the voxel regressor (0 when absent).
    pub final_loss: f32,
}

impl EncodedSubdomain {
    pub fn net(&self, role: Role) -> Option<&CoordNet> {
        match role {
            Role::Level1 => Some(&self.l1),
            Role::Tile => self.tile.as_ref(),
            Role::Level0 => self.l0.as_ref(),
            Role::Voxel => self.voxel.as_ref(),
        }
    }

    pub fn param_count(&self) -> usize {
        [Role::Level1, Role::Tile, Role::Level0, Role::Voxel]
            .iter()
            .filter_map(|r| self.net(*r))
            .map(|n| n.param_count())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralVdbContainer {
    pub meta: GridMeta,
    /// Root and level-2 nodes of the source; level-1 nodes are present as
    /// empty placeholders that mark their origins.
    pub upper: VdbGrid,
    pub layout: SubdomainLayout,
    pub experts: Vec<EncodedSubdomain>,
    pub config: TrainConfig,
    pub precision: WeightPrecision,
}

impl NeuralVdbContainer {
    pub fn level1_origins(&self) -> Vec<Coord> {
        self.upper.level1_nodes().map(|n| crate::grid::TreeNode::origin(n)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.experts.iter().map(|e| e.param_count()).sum()
    }

    pub fn patch_count(&self) -> usize {
        self.experts.iter().map(|e| e.patches.len()).sum()
    }

    /// Rounds every weight to the stored precision so in-memory results match
    /// a container read back from disk.
    pub fn round_weights(&mut self) {
        let p = self.precision;
        for e in &mut self.experts {
            for net in [Some(&mut e.l1), e.tile.as_mut(), e.l0.as_mut(), e.voxel.as_mut()].into_iter().flatten() {
                for w in net.mlp.params_mut() {
                    *w = p.round(*w);
                }
            }
        }
    }
}

/// Copy of `grid` with every level-1 node emptied: all slots become inactive
/// tiles holding the background.
pub fn upper_tree(grid: &VdbGrid) -> VdbGrid {
    let mut out = grid.clone();
    let bg = grid.background();
    for entry in out.root_mut().values_mut() {
        if let RootEntry::Child(n2) = entry {
            let slots: Vec<usize> = n2.child_mask().iter_on().collect();
            for idx in slots {
                let origin = n2.slot_coord(idx);
                n2.set_child(idx, Box::new(Level1Node::new(origin, bg)));
            }
        }
    }
    out
}
