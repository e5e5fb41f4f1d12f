//! Sparse domain decomposition into fixed-size subdomains ("experts").
//!
//! Subdomains are cubes of edge `S` on a lattice anchored at `origin`. Each
//! carries a halo of `h` voxels on every side. A clamped tent gate ramps from
//! 0 at `h` outside the core box to 1 at `h` inside it, so the ramps of two
//! face neighbors sum to one. Blended values are normalized by the weight sum.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::grid::{Coord, CoordBox, VdbGrid, LEVEL1_DIM};
use crate::neural::LatticeFrame;

/// Halo width in voxels.
pub const HALO: i32 = 8;
/// Subdomain edge lengths must be a multiple of this.
pub const SIZE_QUANTUM: i32 = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("subdomain size {0} is not a positive multiple of {SIZE_QUANTUM}")]
    BadSize(i32),
    #[error("point {0:?} is not covered by any subdomain")]
    OutOfCoverage([f64; 3]),
    #[error("invalid layout: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subdomain {
    pub id: u32,
    /// Lattice cell index.
    pub cell: Coord,
    pub core: CoordBox,
    pub cluster: u32,
}

impl Subdomain {
    pub fn expanded(&self, halo: i32) -> CoordBox {
        self.core.expand(halo)
    }

    /// Maps the halo-expanded box onto the unit cube.
    pub fn frame(&self, halo: i32) -> LatticeFrame {
        let lo = self.core.lo.offset(-halo, -halo, -halo);
        LatticeFrame { origin: lo.to_f64(), extent: (self.core.dims()[0] as i32 + 2 * halo) as f64 }
    }
}

/// Clamped tent gate of a core box with halo `h` at a continuous point.
pub fn gate_weight(core: &CoordBox, halo: i32, x: [f64; 3]) -> f64 {
    let h = halo as f64;
    let lo = core.lo.to_f64();
    let hi = core.hi.to_f64();
    (0..3)
        .map(|a| (((x[a] - (lo[a] - h)).min((hi[a] + h) - x[a])) / (2.0 * h)).clamp(0.0, 1.0))
        .product()
}

/// `Σ w·v / Σ w` over `(value, weight)` pairs.
pub fn blend(outputs: &[(f64, f64)], x: [f64; 3]) -> Result<f64, PartitionError> {
    let (num, den) = outputs.iter().fold((0.0, 0.0), |(n, d), &(v, w)| (n + w * v, d + w));
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(PartitionError::OutOfCoverage(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainLayout {
    origin: Coord,
    size: i32,
    halo: i32,
    subdomains: Vec<Subdomain>,
    index: BTreeMap<Coord, u32>,
}

fn check_size(size: i32) -> Result<(), PartitionError> {
    if size > 0 && size % SIZE_QUANTUM == 0 {
        Ok(())
    } else {
        Err(PartitionError::BadSize(size))
    }
}

/// Cluster ids from a 26-connected flood fill, numbered in cell order.
fn clusters(cells: &BTreeSet<Coord>) -> BTreeMap<Coord, u32> {
    let mut out = BTreeMap::new();
    let mut next = 0;
    for &start in cells {
        if out.contains_key(&start) {
            continue;
        }
        out.insert(start, next);
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let n = c.offset(dx, dy, dz);
                        if cells.contains(&n) && !out.contains_key(&n) {
                            out.insert(n, next);
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
        next += 1;
    }
    out
}

impl SubdomainLayout {
    /// Assembles a layout from cells and cluster ids (ids follow cell order).
    pub fn from_cells(origin: Coord, size: i32, halo: i32, cells: &[(Coord, u32)]) -> Result<Self, PartitionError> {
        check_size(size)?;
        if halo < 1 || halo * 2 > size {
            return Err(PartitionError::Invalid(format!("halo {halo} does not fit subdomain size {size}")));
        }
        let mut subdomains = Vec::with_capacity(cells.len());
        let mut index = BTreeMap::new();
        for (id, &(cell, cluster)) in cells.iter().enumerate() {
            if let Some(&(prev, _)) = id.checked_sub(1).map(|p| &cells[p]) {
                if prev >= cell {
                    return Err(PartitionError::Invalid("cells must be strictly increasing".into()));
                }
            }
            let lo = Coord::new(
                origin.x + cell.x * size,
                origin.y + cell.y * size,
                origin.z + cell.z * size,
            );
            if !lo.in_range() || !lo.offset(size, size, size).in_range() {
                return Err(PartitionError::Invalid(format!("cell {cell} is outside the coordinate range")));
            }
            subdomains.push(Subdomain { id: id as u32, cell, core: CoordBox::cube(lo, size), cluster });
            index.insert(cell, id as u32);
        }
        Ok(SubdomainLayout { origin, size, halo, subdomains, index })
    }

    pub fn origin(&self) -> Coord {
        self.origin
    }

    pub fn size(&self) -> i32 {
        self.size
    }

    pub fn halo(&self) -> i32 {
        self.halo
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.subdomains.iter().map(|s| s.cluster).collect::<BTreeSet<_>>().len()
    }

    fn cell_index(&self, v: f64, axis: usize) -> i64 {
        let o = [self.origin.x, self.origin.y, self.origin.z][axis] as f64;
        ((v - o) / self.size as f64).floor() as i64
    }

    /// Subdomain whose core box holds voxel `c`.
    pub fn owner(&self, c: Coord) -> Option<&Subdomain> {
        let p = c.to_f64();
        let cell = [0, 1, 2].map(|a| self.cell_index(p[a], a));
        let cell = Coord::new(
            i32::try_from(cell[0]).ok()?,
            i32::try_from(cell[1]).ok()?,
            i32::try_from(cell[2]).ok()?,
        );
        self.index.get(&cell).map(|&id| &self.subdomains[id as usize])
    }

    /// Every subdomain with a nonzero gate at `x`, with its weight.
    pub fn experts_at(&self, x: [f64; 3]) -> Vec<(u32, f64)> {
        let h = self.halo as f64;
        let mut axes = [[0i64; 2]; 3];
        for a in 0..3 {
            axes[a] = [self.cell_index(x[a] - h, a), self.cell_index(x[a] + h, a)];
        }
        let mut out = Vec::with_capacity(8);
        for i in dedup(axes[0]) {
            for j in dedup(axes[1]) {
                for k in dedup(axes[2]) {
                    let (Ok(i), Ok(j), Ok(k)) = (i32::try_from(i), i32::try_from(j), i32::try_from(k)) else {
                        continue;
                    };
                    if let Some(&id) = self.index.get(&Coord::new(i, j, k)) {
                        let w = gate_weight(&self.subdomains[id as usize].core, self.halo, x);
                        if w > 0.0 {
                            out.push((id, w));
                        }
                    }
                }
            }
        }
        out.sort_unstable_by_key(|e| e.0);
        out
    }

    /// For each subdomain, the indices of `points` it gates and their weights.
    pub fn assign_points(&self, points: &[[f64; 3]]) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.subdomains.len()];
        for (p, &x) in points.iter().enumerate() {
            for (id, w) in self.experts_at(x) {
                out[id as usize].push((p, w));
            }
        }
        out
    }
}

fn dedup(pair: [i64; 2]) -> Vec<i64> {
    if pair[0] == pair[1] {
        vec![pair[0]]
    } else {
        vec![pair[0], pair[1]]
    }
}

/// Occupancy-driven decomposition. A lattice cell becomes a subdomain when it
/// holds a level-1 node (and so any active voxel or active level-1 tile).
/// The lattice is anchored at the lowest level-1 node origin so that no
/// level-1 node straddles two subdomains.
pub fn decompose(grid: &VdbGrid, size: i32) -> Result<SubdomainLayout, PartitionError> {
    check_size(size)?;
    let origins: Vec<Coord> = grid.level1_nodes().map(|n| crate::grid::TreeNode::origin(n)).collect();
    let Some(first) = origins.first() else {
        return SubdomainLayout::from_cells(Coord::splat(0), size, HALO, &[]);
    };
    let origin = origins.iter().fold(*first, |m, c| Coord::new(m.x.min(c.x), m.y.min(c.y), m.z.min(c.z)));
    decompose_anchored(grid, size, origin)
}

/// Decomposition on a lattice with a fixed anchor, used to keep cell indices
/// stable across the frames of a sequence. The anchor must be aligned to
/// level-1 nodes.
pub fn decompose_anchored(grid: &VdbGrid, size: i32, origin: Coord) -> Result<SubdomainLayout, PartitionError> {
    check_size(size)?;
    if origin != origin.align(LEVEL1_DIM) {
        return Err(PartitionError::Invalid(format!("anchor {origin} is not aligned to {LEVEL1_DIM}")));
    }
    let cells: BTreeSet<Coord> = grid
        .level1_nodes()
        .map(|n| {
            let c = crate::grid::TreeNode::origin(n);
            Coord::new(
                (c.x - origin.x).div_euclid(size),
                (c.y - origin.y).div_euclid(size),
                (c.z - origin.z).div_euclid(size),
            )
        })
        .collect();
    let cluster_ids = clusters(&cells);
    let list: Vec<(Coord, u32)> = cells.iter().map(|c| (*c, cluster_ids[c])).collect();
    SubdomainLayout::from_cells(origin, size, HALO, &list)
}
