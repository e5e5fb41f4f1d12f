//! Gate weights and blending across subdomains.

use neuvol::grid::{Coord, CoordBox, GridClass, VdbGrid, build_grid};
use neuvol::partition::{blend, decompose, gate_weight, SubdomainLayout, HALO};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A 3×3×3 block of occupied cells of edge 512, so the middle cell and its
/// halo are fully covered.
fn block_layout() -> SubdomainLayout {
    let cells: Vec<(Coord, u32)> =
        CoordBox::cube(Coord::new(-1, -1, -1), 3).iter().map(|c| (c, 0)).collect();
    SubdomainLayout::from_cells(Coord::new(0, 0, 0), 512, HALO, &cells).unwrap()
}

#[test]
fn weights_sum_to_one_where_fully_covered() {
    let layout = block_layout();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10_000 {
        // Stay inside the middle cell expanded by the halo; biased toward faces.
        let x: [f64; 3] = std::array::from_fn(|_| {
            if rng.random_bool(0.5) {
                let edge = if rng.random_bool(0.5) { 0.0 } else { 512.0 };
                edge + rng.random_range(-(HALO as f64)..HALO as f64)
            } else {
                rng.random_range(-(HALO as f64)..512.0 + HALO as f64)
            }
        });
        let sum: f64 = layout.experts_at(x).iter().map(|(_, w)| w).sum();
        assert!((sum - 1.0).abs() <= 1e-6, "weight sum {sum} at {x:?}");
    }
}

#[test]
fn corner_point_activates_eight_gates() {
    let layout = block_layout();
    for corner in [[0.0, 0.0, 0.0], [512.0, 0.0, 512.0], [0.5, -0.25, 0.0]] {
        let w = layout.experts_at(corner);
        assert_eq!(w.len(), 8, "at {corner:?}: {w:?}");
        for (_, g) in &w {
            assert!(*g > 0.0);
        }
    }
}

#[test]
fn blended_field_is_continuous_across_a_boundary() {
    // Two experts along x with different smooth fields.
    let cells = [(Coord::new(0, 0, 0), 0), (Coord::new(1, 0, 0), 0)];
    let layout = SubdomainLayout::from_cells(Coord::new(0, 0, 0), 512, HALO, &cells).unwrap();
    let fields: [fn([f64; 3]) -> f64; 2] = [|p| (p[0] * 0.05).sin() + 0.01 * p[1], |p| 3.0 + (p[2] * 0.02).cos()];
    let eval = |x: [f64; 3]| {
        let outs: Vec<(f64, f64)> = layout.experts_at(x).into_iter().map(|(id, w)| (fields[id as usize](x), w)).collect();
        blend(&outs, x).unwrap()
    };
    let step = 0.01;
    let (y, z) = (200.0, 300.0);
    let mut prev = eval([512.0 - 2.0 * HALO as f64, y, z]);
    let mut x = 512.0 - 2.0 * HALO as f64 + step;
    while x <= 512.0 + 2.0 * HALO as f64 {
        let p = [x, y, z];
        let v = eval(p);
        // Internal variation of each expert over the same step.
        let internal = fields
            .iter()
            .map(|f| (f(p) - f([x - step, y, z])).abs())
            .fold(0.0, f64::max);
        // The blend ramps over 2h, so a step moves at most (step / 2h) of the gap.
        let ramp = (fields[0](p) - fields[1](p)).abs() * step / (2.0 * HALO as f64) * 1.01;
        assert!((v - prev).abs() <= internal + ramp + 1e-5, "jump {} at x={x}", (v - prev).abs());
        prev = v;
        x += step;
    }
}

#[test]
fn decompose_covers_every_active_voxel() {
    let samples: Vec<_> = [Coord::new(0, 0, 0), Coord::new(700, -20, 5), Coord::new(-3000, 1500, 900)]
        .into_iter()
        .map(|c| (c, 1.0, true))
        .collect();
    let g: VdbGrid = build_grid(samples.clone(), 0.0, GridClass::Fog, 1.0, 0.0).unwrap();
    let layout = decompose(&g, 512).unwrap();
    for (c, _, _) in samples {
        let s = layout.owner(c).expect("owned");
        assert!(s.core.contains(c));
    }
    assert!(decompose(&g, 500).is_err());
}

proptest! {
    #[test]
    fn gate_is_a_clamped_tent(x in -40.0f64..600.0, y in -40.0f64..600.0, z in -40.0f64..600.0) {
        let core = CoordBox::cube(Coord::new(0, 0, 0), 512);
        let w = gate_weight(&core, HALO, [x, y, z]);
        prop_assert!((0.0..=1.0).contains(&w));
        let h = HALO as f64;
        let inside = |v: f64| v >= h && v <= 512.0 - h;
        if inside(x) && inside(y) && inside(z) {
            prop_assert_eq!(w, 1.0);
        }
        let outside = |v: f64| v <= -h || v >= 512.0 + h;
        if outside(x) || outside(y) || outside(z) {
            prop_assert_eq!(w, 0.0);
        }
    }

    #[test]
    fn blend_of_constant_is_constant(c in -5.0f64..5.0, w in prop::collection::vec(0.01f64..1.0, 1..8)) {
        let outs: Vec<(f64, f64)> = w.iter().map(|&g| (c, g)).collect();
        prop_assert!((blend(&outs, [0.0; 3]).unwrap() - c).abs() < 1e-12);
    }
}
