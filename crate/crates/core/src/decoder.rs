//! Reconstruction from a [`NeuralVdbContainer`].
//!
//! Topology is rebuilt the same way for both outputs: level-1 slots are
//! classified and patched, active tiles receive regressed values, and leaf
//! active masks come from the voxel classifier plus patches. [`decode_full`]
//! then evaluates every active voxel; [`HybridGrid`] keeps the voxel
//! regressors and evaluates on demand.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::container::{EncodedSubdomain, GridMeta, NeuralVdbContainer, Role, SlotClass};
use crate::eval::{argmax, Blender, TableCache};
use crate::grid::{Coord, LeafNode, VdbGrid, LEAF_DIM, LEAF_VOXELS};
use crate::partition::SubdomainLayout;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("inconsistent container: {0}")]
    Invalid(String),
}

fn owner_patches<'a>(layout: &SubdomainLayout, experts: &'a [EncodedSubdomain], c: Coord) -> Option<&'a EncodedSubdomain> {
    layout.owner(c).map(|s| &experts[s.id as usize])
}

/// Level-1 slot classes, tile values and leaf active masks. Leaf voxels hold
/// the background except patched active voxels, which hold their patch value.
/// Returns the grid and the active voxels that still need a regressed value.
fn reconstruct(c: &NeuralVdbContainer, blender: &Blender<'_>) -> Result<(VdbGrid, Vec<Coord>), DecodeError> {
    if c.layout.len() != c.experts.len() {
        return Err(DecodeError::Invalid(format!("{} subdomains but {} expert blocks", c.layout.len(), c.experts.len())));
    }
    let origins = c.level1_origins();
    for o in &origins {
        if c.layout.owner(*o).is_none() {
            return Err(DecodeError::Invalid(format!("level-1 node {o} lies outside every subdomain")));
        }
    }
    let bg = c.meta.background;
    let mut slots = Vec::with_capacity(origins.len() * crate::grid::Level1Node::SLOTS);
    for &o in &origins {
        let n1 = c.upper.level1_node(o).expect("origin taken from the tree");
        slots.extend((0..crate::grid::Level1Node::SLOTS).map(|i| n1.slot_coord(i)));
    }
    let l1 = blender.eval(Role::Level1, &slots, None);
    let classes: Vec<SlotClass> = slots
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let patched = owner_patches(&c.layout, &c.experts, s).and_then(|e| e.patches.l1_class(s));
            patched.unwrap_or_else(|| {
                l1.row(i).and_then(|r| SlotClass::from_index(argmax(r))).unwrap_or(SlotClass::InactiveTile)
            })
        })
        .collect();

    let tile_slots: Vec<Coord> =
        slots.iter().zip(&classes).filter(|(_, k)| **k == SlotClass::ActiveTile).map(|(s, _)| *s).collect();
    let tiles = blender.eval(Role::Tile, &tile_slots, None);

    let leaf_origins: Vec<Coord> =
        slots.iter().zip(&classes).filter(|(_, k)| **k == SlotClass::Child).map(|(s, _)| *s).collect();
    let mut voxels = Vec::with_capacity(leaf_origins.len() * LEAF_VOXELS);
    for &o in &leaf_origins {
        for x in 0..LEAF_DIM {
            for y in 0..LEAF_DIM {
                for z in 0..LEAF_DIM {
                    voxels.push(o.offset(x, y, z));
                }
            }
        }
    }
    let l0 = blender.eval(Role::Level0, &voxels, None);

    let mut grid = c.upper.clone();
    let mut next_tile = 0;
    for (&s, &class) in slots.iter().zip(&classes) {
        match class {
            SlotClass::InactiveTile => {}
            SlotClass::ActiveTile => {
                let v = tiles.row(next_tile).map_or(bg, |r| r[0] * c.meta.value_scale);
                next_tile += 1;
                let n1 = grid.level1_mut(s);
                n1.set_tile(crate::grid::Level1Node::slot_of(s), v, true);
            }
            SlotClass::Child => {}
        }
    }
    let mut pending = Vec::new();
    for (li, &o) in leaf_origins.iter().enumerate() {
        let mut leaf = LeafNode::new(o, bg);
        let owner = owner_patches(&c.layout, &c.experts, o);
        for v in 0..LEAF_VOXELS {
            let i = li * LEAF_VOXELS + v;
            let vc = voxels[i];
            match owner.and_then(|e| e.patches.l0_state(vc)) {
                Some(Some(value)) => leaf.set(vc, value, true),
                Some(None) => {}
                None => {
                    if l0.row(i).is_some_and(|r| r[0] > 0.5) {
                        leaf.set(vc, bg, true);
                        pending.push(vc);
                    }
                }
            }
        }
        grid.insert_leaf(leaf);
    }
    Ok((grid, pending))
}

fn regress(blender: &Blender<'_>, meta: &GridMeta, points: &[Coord], counter: Option<&AtomicU64>) -> Vec<f32> {
    let out = blender.eval(Role::Voxel, points, counter);
    (0..points.len()).map(|i| out.row(i).map_or(meta.background, |r| r[0] * meta.value_scale)).collect()
}

/// Materializes every value into an explicit grid.
pub fn decode_full(c: &NeuralVdbContainer) -> Result<VdbGrid, DecodeError> {
    let cache = TableCache::new(c.experts.len());
    let blender = Blender::new(&c.layout, &c.experts, &cache);
    let (mut grid, pending) = reconstruct(c, &blender)?;
    let values = regress(&blender, &c.meta, &pending, None);
    for (p, v) in pending.iter().zip(values) {
        grid.set_voxel(*p, v, true);
    }
    Ok(grid)
}

/// Explicit topology with neural leaf values.
pub struct HybridGrid {
    topology: VdbGrid,
    meta: GridMeta,
    layout: SubdomainLayout,
    experts: Vec<EncodedSubdomain>,
    cache: TableCache,
    evaluations: AtomicU64,
    inactive_evaluations: AtomicU64,
}

/// Result of one point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryResult {
    pub value: f32,
    pub active: bool,
}

pub fn make_hybrid(c: &NeuralVdbContainer) -> Result<HybridGrid, DecodeError> {
    let cache = TableCache::new(c.experts.len());
    let topology = {
        let blender = Blender::new(&c.layout, &c.experts, &cache);
        reconstruct(c, &blender)?.0
    };
    Ok(HybridGrid {
        topology,
        meta: c.meta,
        layout: c.layout.clone(),
        experts: c.experts.clone(),
        cache,
        evaluations: AtomicU64::new(0),
        inactive_evaluations: AtomicU64::new(0),
    })
}

impl HybridGrid {
    /// The explicit tree. Leaf values are background except patched voxels.
    pub fn topology(&self) -> &VdbGrid {
        &self.topology
    }

    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    /// Voxel-regressor evaluations so far, counted per expert contribution.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Regressor evaluations requested at coordinates whose active bit is
    /// clear. Stays zero by construction.
    pub fn inactive_evaluations(&self) -> u64 {
        self.inactive_evaluations.load(Ordering::Relaxed)
    }

    /// Explicit tree bytes: the leaf value arrays are not counted.
    pub fn payload_bytes(&self) -> u64 {
        self.topology.topology_stats().topology_bytes()
    }

    /// Resolves tiles and inactive voxels from the tree, then evaluates the
    /// voxel regressors once per expert for the remaining active voxels.
    pub fn query(&self, coords: &[Coord]) -> Vec<QueryResult> {
        let mut acc = self.topology.accessor();
        let mut out = Vec::with_capacity(coords.len());
        let mut pending = Vec::new();
        let mut pending_at = Vec::new();
        for (i, &c) in coords.iter().enumerate() {
            let (value, active) = acc.get_value(c);
            out.push(QueryResult { value, active });
            if !active {
                continue;
            }
            let in_leaf = self.topology.leaf(c.align(LEAF_DIM)).is_some();
            let patched = owner_patches(&self.layout, &self.experts, c).and_then(|e| e.patches.l0_state(c)).is_some();
            if in_leaf && !patched {
                pending.push(c);
                pending_at.push(i);
            }
        }
        let stray = pending.iter().filter(|c| !self.topology.is_active(**c)).count() as u64;
        self.inactive_evaluations.fetch_add(stray, Ordering::Relaxed);
        let blender = Blender::new(&self.layout, &self.experts, &self.cache);
        let values = regress(&blender, &self.meta, &pending, Some(&self.evaluations));
        for (i, v) in pending_at.into_iter().zip(values) {
            out[i].value = v;
        }
        out
    }
}
