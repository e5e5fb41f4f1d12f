//! Sparse tree lookups against a dense array oracle.

use std::collections::HashMap;

use neuvol::grid::{build_grid, nvgr, Coord, CoordBox, GridBuilder, GridClass, VdbGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Dense {
    bounds: CoordBox,
    values: HashMap<Coord, (f32, bool)>,
    background: f32,
}

impl Dense {
    fn get(&self, c: Coord) -> (f32, bool) {
        self.values.get(&c).copied().unwrap_or((self.background, false))
    }
}

/// Random sparse content inside a box of edge `size` placed at `lo`, with
/// some inactive non-background values mixed in.
fn random_grid(seed: u64, lo: Coord, size: i32, density: f64) -> (VdbGrid, Dense) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = CoordBox::cube(lo, size);
    let mut values = HashMap::new();
    for c in bounds.iter() {
        if rng.random_bool(density) {
            let active = rng.random_bool(0.8);
            values.insert(c, (rng.random_range(-3.0f32..3.0), active));
        }
    }
    let grid = build_grid(values.iter().map(|(c, (v, a))| (*c, *v, *a)), -1.5, GridClass::Fog, 1.0, 0.0).unwrap();
    (grid, Dense { bounds, values, background: -1.5 })
}

#[test]
fn lookups_match_dense_oracle() {
    let cases = [(1, Coord::new(0, 0, 0), 64, 0.05), (2, Coord::new(-40, 100, -7), 48, 0.3), (3, Coord::new(-130, -2, 250), 20, 0.9)];
    for (seed, lo, size, density) in cases {
        let (grid, dense) = random_grid(seed, lo, size, density);
        let mut acc = grid.accessor();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let probe = dense.bounds.expand(9);
        for _ in 0..100_000 {
            let c = Coord::new(
                rng.random_range(probe.lo.x..probe.hi.x),
                rng.random_range(probe.lo.y..probe.hi.y),
                rng.random_range(probe.lo.z..probe.hi.z),
            );
            let want = dense.get(c);
            let a = acc.get_value(c);
            let g = grid.get_value(c);
            assert_eq!(a.0.to_bits(), want.0.to_bits(), "accessor value at {c}");
            assert_eq!(a.1, want.1, "accessor state at {c}");
            assert_eq!(g.0.to_bits(), want.0.to_bits(), "tree value at {c}");
            assert_eq!(g.1, want.1, "tree state at {c}");
        }
    }
}

#[test]
fn every_stored_voxel_is_found() {
    let (grid, dense) = random_grid(9, Coord::new(-32, -32, -32), 64, 0.02);
    let mut acc = grid.accessor();
    for (c, want) in &dense.values {
        assert_eq!(acc.get_value(*c), *want);
    }
    let active = dense.values.values().filter(|(_, a)| *a).count() as u64;
    assert_eq!(grid.active_voxel_count(), active);
}

#[test]
fn active_iteration_rebuilds_the_same_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut b = GridBuilder::new(0.0, GridClass::Fog, 0.25, 0.0);
    for _ in 0..5000 {
        let c = Coord::new(rng.random_range(-64..64), rng.random_range(-64..64), rng.random_range(-64..64));
        b.insert(c, 0.5, true).unwrap();
    }
    b.insert_tile(neuvol::grid::TileLevel::Level1, Coord::new(200, 8, 16), 0.25, true).unwrap();
    b.insert_tile(neuvol::grid::TileLevel::Level2, Coord::new(-256, 128, 0), 0.75, true).unwrap();
    let grid = b.build();

    let mut again = GridBuilder::new(0.0, GridClass::Fog, 0.25, 0.0);
    for a in grid.active_values() {
        again.insert_active(a).unwrap();
    }
    assert_eq!(again.build(), grid);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nvgr_round_trip_is_identity(
        voxels in prop::collection::vec(((-300i32..300, -300i32..300, -300i32..300), -10.0f32..10.0, any::<bool>()), 0..400),
        bg in -2.0f32..2.0,
    ) {
        let mut seen = std::collections::HashSet::new();
        let samples: Vec<_> = voxels
            .into_iter()
            .filter(|((x, y, z), _, _)| seen.insert((*x, *y, *z)))
            .map(|((x, y, z), v, a)| (Coord::new(x, y, z), v, a))
            .collect();
        let grid = build_grid(samples.iter().copied(), bg, GridClass::Sdf, 0.5, 3.0).unwrap();
        for (c, v, a) in &samples {
            prop_assert_eq!(grid.get_value(*c), (*v, *a));
        }
        let back = nvgr::from_bytes(&nvgr::to_bytes(&grid)).unwrap();
        prop_assert_eq!(&back, &grid);
        prop_assert_eq!(nvgr::to_bytes(&back), nvgr::to_bytes(&grid));
    }
}
