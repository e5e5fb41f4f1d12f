//! Encodes a moving sphere, initializing each frame from the previous one.

use neuvol::config::TrainConfig;
use neuvol::encoder::encode_sequence;
use neuvol::procgen::{gen_moving_sphere_sequence, SphereSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SphereSpec { center: [0.0; 3], radius: 12.0, voxel_size: 1.0, half_width: 3.0 };
    let frames = gen_moving_sphere_sequence(&spec, 4, [1.0, 0.0, 0.0])?;
    let mut cfg = TrainConfig::default();
    cfg.max_epochs = 300;
    cfg.batch_size = 1 << 13;
    let encoded = encode_sequence(&frames, &cfg)?;
    for (i, f) in encoded.iter().enumerate() {
        let warm = f.report.experts.iter().flat_map(|e| &e.nets).any(|n| n.warm);
        println!(
            "frame {i}: {} epochs ({}), patches {}",
            f.report.total_epochs(),
            if warm { "warm" } else { "cold" },
            f.container.patch_count()
        );
    }
    Ok(())
}
