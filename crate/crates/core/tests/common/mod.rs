//! Helpers shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use neuvol::neural::{grad_check, Activation, Batch, FourierFeatures, Head, LossKind, Mlp, Targets};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LOSSES: [LossKind; 3] = [LossKind::Mse, LossKind::CrossEntropy, LossKind::Bce];

pub fn activations() -> [Activation; 3] {
    [Activation::RELU, Activation::TANH, Activation::sine(3.0)]
}

/// Worst relative gradient error over `nets` random f64 networks, cycling
/// through every loss and activation pairing.
pub fn gradient_suite(nets: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..nets {
        let loss = LOSSES[i % 3];
        let activation = activations()[(i / 3) % 3];
        let head = match loss {
            LossKind::Mse => Head::Linear,
            LossKind::CrossEntropy => Head::Classes(rng.random_range(2..5)),
            LossKind::Bce => Head::Binary,
        };
        let ffm = FourierFeatures::new(rng.random(), rng.random_range(0.5..3.0), rng.random_range(2..9));
        let depth = rng.random_range(1..=4);
        let mut dims = vec![ffm.output_dim()];
        dims.extend((0..depth).map(|_| rng.random_range(4..=32)));
        dims.push(head.arity());
        let mlp = Mlp::<f64>::init(&dims, activation, head, &mut rng);
        let n = rng.random_range(3..12);
        let inputs: Vec<[f64; 3]> = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let targets = match head {
            Head::Linear => Targets::Values((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()),
            Head::Classes(k) => Targets::Labels((0..n).map(|_| rng.random_range(0..k as u8)).collect()),
            Head::Binary => Targets::Labels((0..n).map(|_| rng.random_range(0..2)).collect()),
        };
        let err = grad_check(&mlp, &ffm, &Batch { inputs, targets }, loss, 1e-6).expect("finite loss");
        worst = worst.max(err);
    }
    worst
}

use neuvol::config::TrainConfig;
use neuvol::grid::VdbGrid;
use neuvol::procgen::{gen_sphere_sdf, SphereSpec};

/// Narrow networks and few epochs: enough to exercise every code path fast.
pub fn quick_config(epochs: u64) -> TrainConfig {
    let mut cfg = TrainConfig::default().with_l0_width(24);
    cfg.ffm_size = 24;
    cfg.max_epochs = epochs;
    cfg.batch_size = 4096;
    cfg
}

pub fn small_sphere(radius: f64) -> VdbGrid {
    gen_sphere_sdf(&SphereSpec { center: [0.5, -1.0, 2.0], radius, voxel_size: 1.0, half_width: 3.0 }).unwrap()
}
