//! Point queries against the hybrid grid: explicit topology, neural leaf
//! values evaluated on demand.

use neuvol::config::TrainConfig;
use neuvol::decoder::{decode_full, make_hybrid};
use neuvol::encoder::encode;
use neuvol::grid::Coord;
use neuvol::procgen::{gen_torus_sdf, torus_distance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = gen_torus_sdf(16.0, 6.0, 1.0, 3.0)?;
    let mut cfg = TrainConfig::default();
    cfg.max_epochs = 200;
    cfg.batch_size = 1 << 14;
    let (container, _) = encode(&grid, &cfg)?;

    let hybrid = make_hybrid(&container)?;
    println!(
        "hybrid topology bytes {} vs explicit {}",
        hybrid.payload_bytes(),
        grid.topology_stats().total_bytes()
    );

    let exact = torus_distance(16.0, 6.0);
    let probes: Vec<Coord> = (-24..=24).step_by(4).map(|x| Coord::new(x, 0, 0)).collect();
    let results = hybrid.query(&probes);
    for (c, r) in probes.iter().zip(&results) {
        println!("{c}: value {:+.3} active {} (exact {:+.3})", r.value, r.active, exact(c.to_f64()));
    }

    // The same values come out of a full decode.
    let full = decode_full(&container)?;
    let same = probes.iter().zip(&results).all(|(c, r)| full.get_value(*c) == (r.value, r.active));
    println!("matches full decode: {same}");
    println!("regressor evaluations {} (inactive {})", hybrid.evaluations(), hybrid.inactive_evaluations());
    Ok(())
}
