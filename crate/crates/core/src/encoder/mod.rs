//! Training side of the codec: decompose the grid, fit four networks per
//! expert, patch classifier mistakes and assemble a [`NeuralVdbContainer`].

mod dataset;
mod patches;
mod sequence;
mod train;

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, TrainConfig};
use crate::container::{upper_tree, EncodedSubdomain, GridMeta, NeuralVdbContainer, Role};
use crate::eval::{lattice_coord, role_table};
use crate::grid::{Coord, VdbGrid};
use crate::neural::blob::WeightPrecision;
use crate::neural::{CoordNet, FourierFeatures, LossKind, LrSchedule, NetShape, NeuralError, TargetsRef};
use crate::partition::{decompose, PartitionError, Subdomain, SubdomainLayout};

pub use dataset::{collect, ExpertData};
pub use patches::{extract_patches, patches_from_predictions, PatchFilter, PatchStats};
pub use sequence::{encode_sequence, SequenceFrame};
pub use train::{train, Pass, Sampler, TrainReport, TrainSet};

/// Loss below which a cold pass stops early.
pub const STATIC_STOP_LOSS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("grid has no active values")]
    EmptyGrid,
    #[error("expert {expert} ({role:?}): {source}")]
    Training { expert: u32, role: Role, source: NeuralError },
    #[error("frame {frame}: {reason}")]
    Sequence { frame: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetReport {
    pub role: Role,
    pub samples: usize,
    /// Cold pass first, then refinement; warm frames have a single pass.
    pub passes: Vec<TrainReport>,
    pub warm: bool,
}

impl NetReport {
    pub fn epochs(&self) -> u64 {
        self.passes.iter().map(|p| p.epochs).sum()
    }

    pub fn initial_loss(&self) -> f64 {
        self.passes.first().map_or(0.0, |p| p.initial_loss)
    }

    pub fn final_loss(&self) -> f64 {
        self.passes.last().map_or(0.0, |p| p.final_loss)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertReport {
    pub id: u32,
    pub cell: Coord,
    pub nets: Vec<NetReport>,
}

impl ExpertReport {
    pub fn net(&self, role: Role) -> Option<&NetReport> {
        self.nets.iter().find(|n| n.role == role)
    }

    /// Experts without active voxels have no voxel regressor.
    pub fn skipped_voxel_regressor(&self) -> bool {
        self.net(Role::Voxel).is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeReport {
    pub experts: Vec<ExpertReport>,
    pub patches: PatchStats,
    pub seconds: f64,
}

impl EncodeReport {
    pub fn total_epochs(&self) -> u64 {
        self.experts.iter().flat_map(|e| &e.nets).map(|n| n.epochs()).sum()
    }

    /// Epochs spent in first passes only.
    pub fn first_pass_epochs(&self) -> u64 {
        self.experts.iter().flat_map(|e| &e.nets).map(|n| n.passes.first().map_or(0, |p| p.epochs)).sum()
    }
}

/// How the networks of one frame are initialized and trained.
#[derive(Clone, Copy)]
pub(crate) enum Plan<'a> {
    Cold,
    ColdRefine,
    Warm { prev: &'a NeuralVdbContainer, targets: &'a HashMap<(Coord, Role), f64> },
}

fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream per `(seed, expert, stream)`.
fn expert_rng(seed: u64, expert: u32, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed ^ 0x9e37_79b9_7f4a_7c15) ^ mix(expert as u64 + 1) ^ stream.wrapping_mul(0x2545_f491_4f6c_dd1d)))
}

fn role_stream(role: Role) -> u64 {
    match role {
        Role::Level1 => 1,
        Role::Tile => 2,
        Role::Level0 => 3,
        Role::Voxel => 4,
    }
}

fn role_shape(cfg: &TrainConfig, role: Role) -> NetShape {
    match role {
        Role::Level1 => cfg.l1_net,
        Role::Tile => cfg.tile_net,
        Role::Level0 => cfg.l0_net,
        Role::Voxel => cfg.voxel_net,
    }
}

fn role_loss(role: Role) -> LossKind {
    match role {
        Role::Level1 => LossKind::CrossEntropy,
        Role::Level0 => LossKind::Bce,
        Role::Tile | Role::Voxel => LossKind::Mse,
    }
}

struct RoleData {
    coords: Vec<[i32; 3]>,
    values: Vec<f32>,
    labels: Vec<u8>,
}

impl RoleData {
    fn of(data: &ExpertData, role: Role, scale: f32) -> Option<Self> {
        let mut out = RoleData { coords: Vec::new(), values: Vec::new(), labels: Vec::new() };
        match role {
            Role::Level1 => {
                for &(c, class) in &data.l1 {
                    out.coords.push(lattice_coord(role, c));
                    out.labels.push(class as u8);
                }
            }
            Role::Tile => {
                for &(c, v) in &data.tiles {
                    out.coords.push(lattice_coord(role, c));
                    out.values.push(v / scale);
                }
            }
            Role::Level0 => {
                for &(c, active) in &data.l0 {
                    out.coords.push(lattice_coord(role, c));
                    out.labels.push(active as u8);
                }
            }
            Role::Voxel => {
                for &(c, v) in &data.voxels {
                    out.coords.push(lattice_coord(role, c));
                    out.values.push(v / scale);
                }
            }
        }
        (!out.coords.is_empty()).then_some(out)
    }

    fn targets(&self, role: Role) -> TargetsRef<'_, f32> {
        match role {
            Role::Level1 | Role::Level0 => TargetsRef::Labels(&self.labels),
            Role::Tile | Role::Voxel => TargetsRef::Values(&self.values),
        }
    }
}

struct Trained {
    nets: [Option<CoordNet>; 4],
    report: ExpertReport,
}

const ROLES: [Role; 4] = [Role::Level1, Role::Tile, Role::Level0, Role::Voxel];

fn train_expert(
    sub: &Subdomain,
    halo: i32,
    data: &ExpertData,
    meta: &GridMeta,
    cfg: &TrainConfig,
    plan: Plan<'_>,
    prev_ids: &HashMap<Coord, usize>,
) -> Result<Trained, EncodeError> {
    let ffm = FourierFeatures::new(expert_rng(cfg.seed, sub.id, 0).random::<u64>(), cfg.ffm_scale, cfg.ffm_size);
    let cold = Pass {
        schedule: LrSchedule { lr0: cfg.lr, decay: cfg.decay, interval: cfg.decay_interval },
        max_epochs: cfg.max_epochs,
        stop_below: STATIC_STOP_LOSS,
    };
    let refine = Pass { schedule: LrSchedule { lr0: cfg.refine_lr, ..cold.schedule }, ..cold };
    let mut nets: [Option<CoordNet>; 4] = Default::default();
    let mut report = ExpertReport { id: sub.id, cell: sub.cell, nets: Vec::new() };
    for (slot, role) in ROLES.into_iter().enumerate() {
        let Some(rd) = RoleData::of(data, role, meta.value_scale) else { continue };
        let mut rng = expert_rng(cfg.seed, sub.id, role_stream(role));
        let warm = match plan {
            Plan::Warm { prev, targets } => prev_ids
                .get(&sub.cell)
                .and_then(|&i| prev.experts[i].net(role))
                .zip(targets.get(&(sub.cell, role)))
                .map(|(net, &t)| (net.clone(), t)),
            _ => None,
        };
        let is_warm = warm.is_some();
        let (mut net, passes) = match warm {
            Some((net, target)) => (net, vec![Pass { stop_below: target, ..refine }]),
            None => {
                let net = CoordNet::with_features(ffm.clone(), role_shape(cfg, role), cfg.activation, role.head(), &mut rng);
                let passes = match plan {
                    Plan::Cold => vec![cold],
                    _ => vec![cold, refine],
                };
                (net, passes)
            }
        };
        let table = role_table(sub, halo, role, &net);
        let set = TrainSet { table: &table, coords: &rd.coords, targets: rd.targets(role), loss: role_loss(role) };
        let mut done = Vec::with_capacity(passes.len());
        for pass in &passes {
            let r = train(&mut net, &set, pass, cfg.batch_size, cfg.sample_interval, &mut rng)
                .map_err(|source| EncodeError::Training { expert: sub.id, role, source })?;
            done.push(r);
        }
        report.nets.push(NetReport { role, samples: rd.coords.len(), passes: done, warm: is_warm });
        nets[slot] = Some(net);
    }
    Ok(Trained { nets, report })
}

/// Encodes a grid with cold training.
pub fn encode(grid: &VdbGrid, cfg: &TrainConfig) -> Result<(NeuralVdbContainer, EncodeReport), EncodeError> {
    cfg.validate()?;
    let layout = decompose(grid, cfg.subdomain_size)?;
    encode_with(grid, cfg, layout, Plan::Cold)
}

pub(crate) fn encode_with(
    grid: &VdbGrid,
    cfg: &TrainConfig,
    layout: SubdomainLayout,
    plan: Plan<'_>,
) -> Result<(NeuralVdbContainer, EncodeReport), EncodeError> {
    if grid.is_empty() {
        return Err(EncodeError::EmptyGrid);
    }
    let start = Instant::now();
    let meta = GridMeta::of(grid);
    let precision = WeightPrecision::from_bits(cfg.weight_bits)
        .ok_or_else(|| ConfigError::Value { key: "weight_bits".into(), value: cfg.weight_bits.to_string(), reason: "must be 16 or 32".into() })?;
    let data = collect(grid, &layout);
    let prev_ids: HashMap<Coord, usize> = match plan {
        Plan::Warm { prev, .. } => prev.layout.subdomains().iter().map(|s| (s.cell, s.id as usize)).collect(),
        _ => HashMap::new(),
    };
    let halo = layout.halo();
    let trained: Vec<Trained> = layout
        .subdomains()
        .par_iter()
        .zip(data.par_iter())
        .map(|(sub, d)| train_expert(sub, halo, d, &meta, cfg, plan, &prev_ids))
        .collect::<Result<_, _>>()?;

    let mut experts = Vec::with_capacity(trained.len());
    let mut reports = Vec::with_capacity(trained.len());
    for t in trained {
        let [l1, tile, l0, voxel] = t.nets;
        let final_loss = t.report.net(Role::Voxel).map_or(0.0, |n| n.final_loss()) as f32;
        experts.push(EncodedSubdomain {
            l1: l1.expect("every subdomain holds a level-1 node"),
            tile,
            l0,
            voxel,
            patches: Default::default(),
            final_loss,
        });
        reports.push(t.report);
    }
    let mut container = NeuralVdbContainer {
        meta,
        upper: upper_tree(grid),
        layout,
        experts,
        config: cfg.clone(),
        precision,
    };
    // Patches are measured against the weights as stored.
    container.round_weights();
    let filter = PatchFilter::new(&meta, cfg.strict_topology, cfg.significance);
    let (lists, stats) = extract_patches(grid, &container.layout, &container.experts, &filter);
    for (e, p) in container.experts.iter_mut().zip(lists) {
        e.patches = p;
    }
    let report = EncodeReport { experts: reports, patches: stats, seconds: start.elapsed().as_secs_f64() };
    Ok((container, report))
}
