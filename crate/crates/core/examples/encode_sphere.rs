//! Encodes a narrow-band sphere, decodes it and reports quality and size.
//!
//! `cargo run --release --example encode_sphere -- [radius] [epochs]`

use neuvol::config::TrainConfig;
use neuvol::container::io::{write_container, LosslessStage};
use neuvol::decoder::decode_full;
use neuvol::encoder::encode;
use neuvol::metrics::{compression_ratio, iou, mcd, rmse, RatioMode};
use neuvol::procgen::{gen_sphere_sdf, SphereSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let radius: f64 = args.next().map_or(Ok(20.0), |s| s.parse())?;
    let epochs: u64 = args.next().map_or(Ok(300), |s| s.parse())?;

    let grid = gen_sphere_sdf(&SphereSpec { center: [0.0; 3], radius, voxel_size: 1.0, half_width: 3.0 })?;
    println!("source: {} active voxels, {} bytes", grid.active_voxel_count(), grid.topology_stats().total_bytes());

    let mut cfg = TrainConfig::default();
    cfg.max_epochs = epochs;
    cfg.batch_size = 1 << 14;
    cfg.weight_bits = 16;
    let (container, report) = encode(&grid, &cfg)?;
    println!("encoded in {:.1}s, {} experts, {} patches", report.seconds, container.experts.len(), container.patch_count());
    for e in &report.experts {
        for n in &e.nets {
            println!("  expert {} {:?}: {} samples, loss {:.3e} -> {:.3e}", e.id, n.role, n.samples, n.initial_loss(), n.final_loss());
        }
    }

    let decoded = decode_full(&container)?;
    println!("topology exact: {}", grid.same_topology(&decoded));
    println!("iou {:.4}  rmse {:.4}  mcd {:.4}", iou(&grid, &decoded)?, rmse(&grid, &decoded)?, mcd(&grid, &decoded)?);
    println!(
        "payload {} bytes, ratio raw {:.2} file {:.2}",
        write_container(&container, LosslessStage::None).payload_bytes,
        compression_ratio(&container, &grid, RatioMode::RawPayload),
        compression_ratio(&container, &grid, RatioMode::FilePayload)
    );
    Ok(())
}
