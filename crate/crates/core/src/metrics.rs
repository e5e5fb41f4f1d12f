//! Reconstruction quality and size accounting.
//!
//! Occupancy for IoU is `value <= 0` on SDF grids and the active bit on fog
//! grids, taken over the union of both active sets. The chamfer distance
//! averages unsigned trilinear SDF magnitudes at the zero crossings of each
//! grid sampled in the other.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::container::io::{write_container, LosslessStage};
use crate::container::NeuralVdbContainer;
use crate::grid::{nvgr, Accessor, Coord, GridClass, VdbGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("voxel sizes differ: {0} vs {1}")]
    VoxelSize(f64, f64),
    #[error("grid classes differ")]
    Class,
    #[error("no active voxels in either grid")]
    EmptyUnion,
    #[error("metric needs an SDF grid")]
    NotSdf,
    #[error("no zero crossings in {0}")]
    NoSurface(&'static str),
}

fn check_pair(a: &VdbGrid, b: &VdbGrid) -> Result<(), MetricsError> {
    if a.voxel_size() != b.voxel_size() {
        return Err(MetricsError::VoxelSize(a.voxel_size(), b.voxel_size()));
    }
    if a.class() != b.class() {
        return Err(MetricsError::Class);
    }
    Ok(())
}

/// Calls `f` once per voxel in the union of both active sets, with the value
/// and active bit of each grid.
fn for_union(a: &VdbGrid, b: &VdbGrid, mut f: impl FnMut(Coord, (f32, bool), (f32, bool))) {
    let mut acc_a = a.accessor();
    let mut acc_b = b.accessor();
    for av in a.active_values() {
        for c in av.voxels() {
            f(c, (av.value, true), acc_b.get_value(c));
        }
    }
    for bv in b.active_values() {
        for c in bv.voxels() {
            let va = acc_a.get_value(c);
            if !va.1 {
                f(c, va, (bv.value, true));
            }
        }
    }
}

/// Intersection over union of occupancy. 1 when both sets are empty.
pub fn iou(a: &VdbGrid, b: &VdbGrid) -> Result<f64, MetricsError> {
    check_pair(a, b)?;
    let sdf = a.class() == GridClass::Sdf;
    let occupied = |(v, active): (f32, bool)| if sdf { v <= 0.0 } else { active };
    let (mut inter, mut union) = (0u64, 0u64);
    for_union(a, b, |_, va, vb| {
        let (oa, ob) = (occupied(va), occupied(vb));
        inter += (oa && ob) as u64;
        union += (oa || ob) as u64;
    });
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Root mean squared difference over the union of active sets. A side that is
/// inactive at a voxel contributes its background.
pub fn rmse(a: &VdbGrid, b: &VdbGrid) -> Result<f64, MetricsError> {
    if a.voxel_size() != b.voxel_size() {
        return Err(MetricsError::VoxelSize(a.voxel_size(), b.voxel_size()));
    }
    let (bga, bgb) = (a.background() as f64, b.background() as f64);
    let (mut sum, mut n) = (0.0f64, 0u64);
    for_union(a, b, |_, (va, aa), (vb, ab)| {
        let x = if aa { va as f64 } else { bga };
        let y = if ab { vb as f64 } else { bgb };
        sum += (x - y) * (x - y);
        n += 1;
    });
    if n == 0 {
        return Err(MetricsError::EmptyUnion);
    }
    Ok((sum / n as f64).sqrt())
}

/// Zero crossings on edges between face-adjacent active voxels, in index
/// space, sorted and free of exact duplicates.
pub fn extract_surface_samples(g: &VdbGrid) -> Result<Vec<[f64; 3]>, MetricsError> {
    if g.class() != GridClass::Sdf {
        return Err(MetricsError::NotSdf);
    }
    let mut acc = g.accessor();
    let mut out: BTreeSet<[u64; 3]> = BTreeSet::new();
    for av in g.active_values() {
        for c in av.voxels() {
            let v0 = av.value as f64;
            let p = c.to_f64();
            for axis in 0..3 {
                let n = match axis {
                    0 => c.offset(1, 0, 0),
                    1 => c.offset(0, 1, 0),
                    _ => c.offset(0, 0, 1),
                };
                let (v1, active) = acc.get_value(n);
                if !active {
                    continue;
                }
                let v1 = v1 as f64;
                if (v0 < 0.0) == (v1 < 0.0) && v0 != 0.0 && v1 != 0.0 {
                    continue;
                }
                if v0 == v1 {
                    continue;
                }
                let t = v0 / (v0 - v1);
                let mut q = p;
                q[axis] += t;
                out.insert(q.map(f64::to_bits));
            }
        }
    }
    Ok(out.into_iter().map(|q| q.map(f64::from_bits)).collect())
}

/// Trilinear interpolation of grid values at a continuous index position.
pub fn sample_trilinear(acc: &mut Accessor<'_>, p: [f64; 3]) -> f64 {
    let base = p.map(|x| x.floor());
    let f = [p[0] - base[0], p[1] - base[1], p[2] - base[2]];
    let c0 = Coord::new(base[0] as i32, base[1] as i32, base[2] as i32);
    let mut sum = 0.0;
    for dx in 0..2 {
        for dy in 0..2 {
            for dz in 0..2 {
                let w = (if dx == 1 { f[0] } else { 1.0 - f[0] })
                    * (if dy == 1 { f[1] } else { 1.0 - f[1] })
                    * (if dz == 1 { f[2] } else { 1.0 - f[2] });
                if w != 0.0 {
                    sum += w * acc.get_value(c0.offset(dx, dy, dz)).0 as f64;
                }
            }
        }
    }
    sum
}

fn mean_abs_sdf(samples: &[[f64; 3]], g: &VdbGrid) -> f64 {
    let mut acc = g.accessor();
    samples.iter().map(|p| sample_trilinear(&mut acc, *p).abs()).sum::<f64>() / samples.len() as f64
}

/// Symmetric chamfer-style distance in world units.
pub fn mcd(a: &VdbGrid, b: &VdbGrid) -> Result<f64, MetricsError> {
    check_pair(a, b)?;
    let sa = extract_surface_samples(a)?;
    let sb = extract_surface_samples(b)?;
    if sa.is_empty() {
        return Err(MetricsError::NoSurface("first grid"));
    }
    if sb.is_empty() {
        return Err(MetricsError::NoSurface("second grid"));
    }
    Ok(0.5 * mean_abs_sdf(&sa, b) + 0.5 * mean_abs_sdf(&sb, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMode {
    /// Logical tree bytes over container payload bytes.
    RawPayload,
    /// Grid file bytes over container file bytes with the lossless stage.
    FilePayload,
}

pub fn compression_ratio(c: &NeuralVdbContainer, g: &VdbGrid, mode: RatioMode) -> f64 {
    match mode {
        RatioMode::RawPayload => {
            let payload = write_container(c, LosslessStage::None).payload_bytes;
            g.topology_stats().total_bytes() as f64 / payload.max(1) as f64
        }
        RatioMode::FilePayload => {
            let file = write_container(c, LosslessStage::Deflate).file.len();
            nvgr::to_bytes(g).len() as f64 / file.max(1) as f64
        }
    }
}
