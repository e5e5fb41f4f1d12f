//! Builds a small sparse grid by hand, reads it back through a cached
//! accessor and prints the per-level byte accounting.

use neuvol::grid::{nvgr, Coord, GridBuilder, GridClass, TileLevel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut b = GridBuilder::new(0.0, GridClass::Fog, 0.5, 0.0);
    // A diagonal line of voxels plus one active 8³ tile.
    for i in 0..40 {
        b.insert(Coord::new(i, i, -i), i as f32 / 40.0, true)?;
    }
    b.insert_tile(TileLevel::Level1, Coord::new(200, 0, 0), 0.75, true)?;
    let grid = b.build();

    let mut acc = grid.accessor();
    for c in [Coord::new(3, 3, -3), Coord::new(3, 3, 3), Coord::new(203, 5, 1)] {
        let (v, active) = acc.get_value(c);
        println!("{c}: value {v} active {active}");
    }
    println!("active voxels {}", grid.active_voxel_count());
    println!("{}", grid.topology_stats());

    let bytes = nvgr::to_bytes(&grid);
    let back = nvgr::from_bytes(&bytes)?;
    println!("nvgr bytes {} round trip equal {}", bytes.len(), back == grid);
    Ok(())
}
