//! Procedural ground-truth volumes.
//!
//! Signed distance volumes are narrow bands: a voxel `c` (world position
//! `c·Δx`) is active iff `|d(c)| < halfWidth·Δx` and then stores `d(c)`.
//! Inactive voxels inside leaves hold `±halfWidth·Δx` by sign, and regions
//! entirely inside the surface are covered by inactive `-halfWidth·Δx` tiles.
//!
//! Density volumes use value-noise fBm:
//!
//! ```text
//! lattice(i, s)  = top 53 bits of mix(s, i.x, i.y, i.z) / 2^53 · 2 - 1      ∈ [-1, 1)
//! noise(p, s)    = trilinear blend of the 8 surrounding lattice values with
//!                  weights fade(p - floor(p)), fade(t) = 6t⁵ - 15t⁴ + 10t³
//! fbm(p)         = Σ_o gain^o · noise(p · f0 · lacunarity^o, seed + o) / Σ_o gain^o
//! density(c)     = clamp(0.5 + fbm(c·Δx), 0, 1)
//! ```
//!
//! where `mix` folds each coordinate (as a 32-bit two's-complement integer)
//! into the state with the SplitMix64 finalizer. A voxel is active iff
//! `density > threshold`.

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{
    Coord, CoordBox, GridBuilder, GridClass, LeafNode, TileLevel, VdbGrid, LEAF_DIM, LEAF_VOXELS, LEVEL1_DIM,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcgenError {
    #[error("degenerate shape: {0}")]
    Degenerate(String),
    #[error("volume exceeds the addressable coordinate range")]
    OutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSpec {
    pub center: [f64; 3],
    pub radius: f64,
    pub voxel_size: f64,
    /// Band half width in voxels.
    pub half_width: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmSpec {
    pub octaves: u32,
    pub lacunarity: f64,
    pub gain: f64,
    /// Frequency of the first octave in cycles per world unit.
    pub base_frequency: f64,
    pub seed: u64,
    pub domain: CoordBox,
    pub threshold: f32,
    pub voxel_size: f64,
}

impl FbmSpec {
    /// Four octaves, lacunarity 2, gain 1/2, a 32-voxel base period, seed 7
    /// and threshold 0.5.
    pub fn with_domain(domain: CoordBox) -> Self {
        FbmSpec {
            octaves: 4,
            lacunarity: 2.0,
            gain: 0.5,
            base_frequency: 1.0 / 32.0,
            seed: 7,
            domain,
            threshold: 0.5,
            voxel_size: 1.0,
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), ProcgenError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ProcgenError::Degenerate(format!("{name} must be positive, got {v}")))
    }
}

enum LeafOutcome {
    Leaf(LeafNode),
    InsideTile,
    Outside,
}

/// Narrow band of an arbitrary 1-Lipschitz signed distance function over the
/// index box `bounds`, which must contain the whole band.
pub fn narrow_band<F>(sdf: F, bounds: CoordBox, voxel_size: f64, half_width: f32) -> Result<VdbGrid, ProcgenError>
where
    F: Fn([f64; 3]) -> f64 + Sync,
{
    check_positive("voxel size", voxel_size)?;
    check_positive("half width", half_width as f64)?;
    if !bounds.lo.in_range() || !bounds.hi.in_range() {
        return Err(ProcgenError::OutOfRange);
    }
    let band = half_width as f64 * voxel_size;
    let bg = band as f32;
    let dist = |c: Coord, off: f64| sdf([(c.x as f64 + off) * voxel_size, (c.y as f64 + off) * voxel_size, (c.z as f64 + off) * voxel_size]);
    let reach = |cells: i32| 3f64.sqrt() * (cells as f64 - 1.0) / 2.0 * voxel_size + band;

    let mut builder = GridBuilder::new(bg, GridClass::Sdf, voxel_size, half_width);
    let mut leaf_cells = Vec::new();
    for cell in bounds.aligned_cells(LEVEL1_DIM) {
        let d = dist(cell, (LEVEL1_DIM as f64 - 1.0) / 2.0);
        if d.abs() > reach(LEVEL1_DIM) {
            if d < 0.0 {
                builder.insert_tile(TileLevel::Level2, cell, -bg, false).map_err(|_| ProcgenError::OutOfRange)?;
            }
            continue;
        }
        leaf_cells.extend(CoordBox::cube(cell, LEVEL1_DIM).aligned_cells(LEAF_DIM));
    }
    let outcomes: Vec<LeafOutcome> = leaf_cells
        .par_iter()
        .map(|&origin| {
            let d = dist(origin, (LEAF_DIM as f64 - 1.0) / 2.0);
            if d.abs() > reach(LEAF_DIM) {
                return if d < 0.0 { LeafOutcome::InsideTile } else { LeafOutcome::Outside };
            }
            let mut leaf = LeafNode::new(origin, bg);
            let mut any_active = false;
            let mut any_inside = false;
            for i in 0..LEAF_VOXELS {
                let c = leaf.coord_of(i);
                let d = dist(c, 0.0);
                if d.abs() < band {
                    any_active = true;
                    leaf.set(c, d as f32, true);
                } else if d < 0.0 {
                    any_inside = true;
                    leaf.set(c, -bg, false);
                }
            }
            match (any_active, any_inside) {
                (true, _) => LeafOutcome::Leaf(leaf),
                (false, true) => LeafOutcome::InsideTile,
                (false, false) => LeafOutcome::Outside,
            }
        })
        .collect();
    for (origin, outcome) in leaf_cells.into_iter().zip(outcomes) {
        match outcome {
            LeafOutcome::Leaf(leaf) => builder.insert_leaf(leaf).map_err(|_| ProcgenError::OutOfRange)?,
            LeafOutcome::InsideTile => {
                builder.insert_tile(TileLevel::Level1, origin, -bg, false).map_err(|_| ProcgenError::OutOfRange)?
            }
            LeafOutcome::Outside => {}
        }
    }
    Ok(builder.build())
}

/// Index box enclosing world-space `[lo, hi]` plus the band and one voxel.
fn band_bounds(lo: [f64; 3], hi: [f64; 3], voxel_size: f64, half_width: f32) -> CoordBox {
    let pad = half_width as f64 + 1.0;
    let f = |v: f64, up: bool| {
        let t = v / voxel_size + if up { pad } else { -pad };
        (if up { t.ceil() + 1.0 } else { t.floor() }).clamp(-(1 << 30) as f64, (1 << 30) as f64) as i32
    };
    CoordBox::new(
        Coord::new(f(lo[0], false), f(lo[1], false), f(lo[2], false)),
        Coord::new(f(hi[0], true), f(hi[1], true), f(hi[2], true)),
    )
}

pub fn sphere_distance(center: [f64; 3], radius: f64) -> impl Fn([f64; 3]) -> f64 + Sync + Copy {
    move |p| {
        let (dx, dy, dz) = (p[0] - center[0], p[1] - center[1], p[2] - center[2]);
        (dx * dx + dy * dy + dz * dz).sqrt() - radius
    }
}

/// Torus centered at the origin around the z axis.
pub fn torus_distance(major: f64, minor: f64) -> impl Fn([f64; 3]) -> f64 + Sync + Copy {
    move |p| {
        let q = (p[0] * p[0] + p[1] * p[1]).sqrt() - major;
        (q * q + p[2] * p[2]).sqrt() - minor
    }
}

pub fn gen_sphere_sdf(spec: &SphereSpec) -> Result<VdbGrid, ProcgenError> {
    check_positive("radius", spec.radius)?;
    check_positive("voxel size", spec.voxel_size)?;
    if spec.radius <= 2.0 * spec.half_width as f64 * spec.voxel_size {
        return Err(ProcgenError::Degenerate("radius must exceed twice the band half width".into()));
    }
    let c = spec.center;
    let r = spec.radius;
    let bounds = band_bounds([c[0] - r, c[1] - r, c[2] - r], [c[0] + r, c[1] + r, c[2] + r], spec.voxel_size, spec.half_width);
    narrow_band(sphere_distance(c, r), bounds, spec.voxel_size, spec.half_width)
}

pub fn gen_torus_sdf(major: f64, minor: f64, voxel_size: f64, half_width: f32) -> Result<VdbGrid, ProcgenError> {
    check_positive("minor radius", minor)?;
    check_positive("voxel size", voxel_size)?;
    if major <= minor {
        return Err(ProcgenError::Degenerate("major radius must exceed the minor radius".into()));
    }
    if minor <= 2.0 * half_width as f64 * voxel_size {
        return Err(ProcgenError::Degenerate("minor radius must exceed twice the band half width".into()));
    }
    let e = major + minor;
    let bounds = band_bounds([-e, -e, -minor], [e, e, minor], voxel_size, half_width);
    narrow_band(torus_distance(major, minor), bounds, voxel_size, half_width)
}

/// Frame `t` is the sphere translated by `t·velocity` (world units).
pub fn gen_moving_sphere_sequence(spec: &SphereSpec, frames: usize, velocity: [f64; 3]) -> Result<Vec<VdbGrid>, ProcgenError> {
    if frames < 2 {
        return Err(ProcgenError::Degenerate("a sequence needs at least two frames".into()));
    }
    (0..frames)
        .map(|t| {
            let t = t as f64;
            let center = [
                spec.center[0] + t * velocity[0],
                spec.center[1] + t * velocity[1],
                spec.center[2] + t * velocity[2],
            ];
            gen_sphere_sdf(&SphereSpec { center, ..*spec })
        })
        .collect()
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice_value(i: [i64; 3], seed: u64) -> f64 {
    let mut h = splitmix(seed);
    for v in i {
        h = splitmix(h ^ (v as i32 as u32 as u64));
    }
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Value noise in `[-1, 1]`.
pub fn value_noise(p: [f64; 3], seed: u64) -> f64 {
    let base = p.map(|v| v.floor());
    let u = [fade(p[0] - base[0]), fade(p[1] - base[1]), fade(p[2] - base[2])];
    let i = base.map(|v| v as i64);
    let mut acc = 0.0;
    for corner in 0..8 {
        let (dx, dy, dz) = ((corner >> 2) & 1, (corner >> 1) & 1, corner & 1);
        let w = (if dx == 1 { u[0] } else { 1.0 - u[0] })
            * (if dy == 1 { u[1] } else { 1.0 - u[1] })
            * (if dz == 1 { u[2] } else { 1.0 - u[2] });
        acc += w * lattice_value([i[0] + dx, i[1] + dy, i[2] + dz], seed);
    }
    acc
}

/// Clamped density at world position `p`.
pub fn fbm_density(spec: &FbmSpec, p: [f64; 3]) -> f32 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    let mut amp = 1.0;
    let mut freq = spec.base_frequency;
    for o in 0..spec.octaves {
        sum += amp * value_noise(p.map(|v| v * freq), spec.seed.wrapping_add(o as u64));
        norm += amp;
        amp *= spec.gain;
        freq *= spec.lacunarity;
    }
    ((0.5 + sum / norm) as f32).clamp(0.0, 1.0)
}

pub fn gen_fbm_density(spec: &FbmSpec) -> Result<VdbGrid, ProcgenError> {
    if spec.octaves == 0 {
        return Err(ProcgenError::Degenerate("at least one octave is required".into()));
    }
    check_positive("voxel size", spec.voxel_size)?;
    check_positive("base frequency", spec.base_frequency)?;
    if !spec.domain.lo.in_range() || !spec.domain.hi.in_range() {
        return Err(ProcgenError::OutOfRange);
    }
    let dx = spec.voxel_size;
    let cells: Vec<Coord> = spec.domain.aligned_cells(LEAF_DIM).collect();
    let leaves: Vec<Option<LeafNode>> = cells
        .par_iter()
        .map(|&origin| {
            let mut leaf = LeafNode::new(origin, 0.0);
            let mut any = false;
            for i in 0..LEAF_VOXELS {
                let c = leaf.coord_of(i);
                if !spec.domain.contains(c) {
                    continue;
                }
                let v = fbm_density(spec, [c.x as f64 * dx, c.y as f64 * dx, c.z as f64 * dx]);
                if v > spec.threshold {
                    leaf.set(c, v, true);
                    any = true;
                }
            }
            any.then_some(leaf)
        })
        .collect();
    let mut builder = GridBuilder::new(0.0, GridClass::Fog, dx, 0.0);
    for leaf in leaves.into_iter().flatten() {
        builder.insert_leaf(leaf).map_err(|_| ProcgenError::OutOfRange)?;
    }
    Ok(builder.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_center_is_deep_inside() {
        let g = gen_sphere_sdf(&SphereSpec { center: [0.0; 3], radius: 10.0, voxel_size: 1.0, half_width: 3.0 }).unwrap();
        assert_eq!(g.get_value(Coord::splat(0)), (-3.0, false));
        assert_eq!(g.get_value(Coord::new(10, 0, 0)), (0.0, true));
        assert_eq!(g.get_value(Coord::new(100, 0, 0)), (3.0, false));
    }

    #[test]
    fn rejects_thin_shapes() {
        assert!(gen_sphere_sdf(&SphereSpec { center: [0.0; 3], radius: 5.0, voxel_size: 1.0, half_width: 3.0 }).is_err());
        assert!(gen_torus_sdf(10.0, 4.0, 1.0, 3.0).is_err());
        assert!(gen_torus_sdf(4.0, 7.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn noise_is_bounded_and_continuous() {
        for i in 0..1000 {
            let p = [i as f64 * 0.137, -(i as f64) * 0.071, 3.3];
            let v = value_noise(p, 1);
            assert!((-1.0..=1.0).contains(&v));
            let q = value_noise([p[0] + 1e-7, p[1], p[2]], 1);
            assert!((v - q).abs() < 1e-5);
        }
        assert_eq!(value_noise([2.0, -3.0, 5.0], 4), lattice_value([2, -3, 5], 4));
    }
}
