//! Splits a large sparse volume into subdomains and shows the gate weights
//! that blend neighboring experts.

use neuvol::partition::{blend, decompose, gate_weight, HALO};
use neuvol::procgen::{gen_sphere_sdf, SphereSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two spheres far enough apart to land in separate clusters.
    let a = gen_sphere_sdf(&SphereSpec { center: [0.0; 3], radius: 300.0, voxel_size: 1.0, half_width: 2.0 })?;
    let layout = decompose(&a, 512)?;
    println!("subdomains {} clusters {}", layout.len(), layout.cluster_count());
    for s in layout.subdomains() {
        println!("  id {} cell {} core {:?}..{:?}", s.id, s.cell, s.core.lo, s.core.hi);
    }

    // Walk across the first face boundary: weights always sum to one.
    let s0 = layout.subdomains()[0];
    let x_edge = s0.core.hi.x as f64;
    for dx in [-12.0, -8.0, -4.0, 0.0, 4.0, 8.0, 12.0] {
        let p = [x_edge + dx, s0.core.lo.y as f64 + 100.0, s0.core.lo.z as f64 + 100.0];
        let w = layout.experts_at(p);
        let total: f64 = w.iter().map(|(_, g)| g).sum();
        println!("x {:+5.1}: experts {:?} weight sum {total:.6}", dx, w);
    }

    // Blending two constant experts gives a smooth ramp between them.
    let p = [x_edge + 2.0, s0.core.lo.y as f64 + 100.0, s0.core.lo.z as f64 + 100.0];
    let g0 = gate_weight(&s0.core, HALO, p);
    println!("blend of 0 and 1 at +2: {:.4} (gate {g0:.4})", blend(&[(0.0, g0), (1.0, 1.0 - g0)], p)?);
    Ok(())
}
