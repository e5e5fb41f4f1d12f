use std::collections::HashMap;

use crate::config::TrainConfig;
use crate::container::{NeuralVdbContainer, Role};
use crate::grid::{Coord, VdbGrid};
use crate::partition::{decompose, decompose_anchored};

use super::{encode_with, EncodeError, EncodeReport, Plan};

#[derive(Debug, Clone)]
pub struct SequenceFrame {
    pub container: NeuralVdbContainer,
    pub report: EncodeReport,
}

/// Encodes frames in order, warm-starting each from the previous one.
///
/// Frame 0 is trained cold and then refined at `refine_lr`. Every later frame
/// starts from the previous frame's weights of the same lattice cell, trains
/// at `refine_lr` and stops once its smoothed loss reaches the final loss of
/// the matching frame-0 network. Cells first seen mid-sequence are trained
/// cold plus refinement, and their final losses become their targets.
pub fn encode_sequence(grids: &[VdbGrid], cfg: &TrainConfig) -> Result<Vec<SequenceFrame>, EncodeError> {
    cfg.validate()?;
    if grids.len() < 2 {
        return Err(EncodeError::Sequence { frame: 0, reason: "a sequence needs at least two frames".into() });
    }
    let first = &grids[0];
    for (i, g) in grids.iter().enumerate().skip(1) {
        if g.voxel_size() != first.voxel_size() {
            return Err(EncodeError::Sequence {
                frame: i,
                reason: format!("voxel size {} differs from frame 0 ({})", g.voxel_size(), first.voxel_size()),
            });
        }
        if g.class() != first.class() {
            return Err(EncodeError::Sequence { frame: i, reason: "grid class differs from frame 0".into() });
        }
    }
    let layout = decompose(first, cfg.subdomain_size)?;
    let anchor = layout.origin();
    let (container, report) = encode_with(first, cfg, layout, Plan::ColdRefine)?;
    let mut targets: HashMap<(Coord, Role), f64> = HashMap::new();
    record_targets(&mut targets, &report);
    let mut frames = vec![SequenceFrame { container, report }];
    for (i, g) in grids.iter().enumerate().skip(1) {
        let layout = decompose_anchored(g, cfg.subdomain_size, anchor)?;
        let prev = &frames[i - 1].container;
        let (container, report) = encode_with(g, cfg, layout, Plan::Warm { prev, targets: &targets })?;
        record_targets(&mut targets, &report);
        frames.push(SequenceFrame { container, report });
    }
    Ok(frames)
}

fn record_targets(targets: &mut HashMap<(Coord, Role), f64>, report: &EncodeReport) {
    for e in &report.experts {
        for n in &e.nets {
            targets.entry((e.cell, n.role)).or_insert_with(|| n.final_loss());
        }
    }
}
