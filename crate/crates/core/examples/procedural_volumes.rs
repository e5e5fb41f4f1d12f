//! Generates the procedural test volumes and prints their sizes.

use neuvol::grid::CoordBox;
use neuvol::procgen::{gen_fbm_density, gen_moving_sphere_sequence, gen_sphere_sdf, gen_torus_sdf, FbmSpec, SphereSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sphere = SphereSpec { center: [0.0; 3], radius: 30.0, voxel_size: 1.0, half_width: 3.0 };
    let volumes = [
        ("sphere r=30", gen_sphere_sdf(&sphere)?),
        ("torus 24/8", gen_torus_sdf(24.0, 8.0, 1.0, 3.0)?),
        ("fbm 64^3", gen_fbm_density(&FbmSpec::with_domain(CoordBox::centered(64)))?),
    ];
    for (name, g) in &volumes {
        let s = g.topology_stats();
        println!(
            "{name:<12} class {:?} active {:>8} leaves {:>5} bytes {:>9}",
            g.class(),
            g.active_voxel_count(),
            s.leaf_masks.node_count,
            s.total_bytes()
        );
    }

    let frames = gen_moving_sphere_sequence(&SphereSpec { radius: 16.0, ..sphere }, 4, [2.0, 0.0, 0.0])?;
    for (i, g) in frames.iter().enumerate() {
        println!("frame {i}: value at origin {:.3}", g.get_value(neuvol::grid::Coord::new(0, 0, 0)).0);
    }
    Ok(())
}
