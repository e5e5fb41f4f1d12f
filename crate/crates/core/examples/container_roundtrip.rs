//! Writes a container with and without the deflate stage, reads it back and
//! shows that a flipped byte is rejected.

use neuvol::config::TrainConfig;
use neuvol::container::io::{read_container, write_container, LosslessStage};
use neuvol::encoder::encode;
use neuvol::grid::CoordBox;
use neuvol::procgen::{gen_fbm_density, FbmSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = gen_fbm_density(&FbmSpec::with_domain(CoordBox::centered(32)))?;
    let mut cfg = TrainConfig::default();
    cfg.max_epochs = 50;
    let (container, _) = encode(&grid, &cfg)?;

    for stage in [LosslessStage::None, LosslessStage::Deflate] {
        let bytes = write_container(&container, stage);
        let back = read_container(&bytes.file)?;
        let again = write_container(&back, stage);
        println!(
            "{stage:?}: payload {} file {} byte-identical rewrite {}",
            bytes.payload_bytes,
            bytes.file.len(),
            again.file == bytes.file
        );
    }

    let mut bad = write_container(&container, LosslessStage::None).file;
    let mid = bad.len() / 2;
    bad[mid] ^= 0x10;
    match read_container(&bad) {
        Ok(_) => println!("corruption went unnoticed"),
        Err(e) => println!("corrupted file rejected: {e}"),
    }
    Ok(())
}
