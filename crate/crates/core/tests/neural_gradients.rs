//! Backpropagation against central differences, plus training sanity.

mod common;

use neuvol::neural::{Activation, AdamState, CoordNet, Head, LossKind, NetShape, Targets, Workspace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradients_match_central_differences() {
    let worst = common::gradient_suite(27, 2024);
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn f32_and_f64_forward_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = CoordNet::new(NetShape { depth: 3, width: 24 }, Activation::sine(3.0), Head::Linear, 2.0, 16, &mut rng);
    let xs: Vec<[f64; 3]> = (0..50).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let a = net.forward(&xs, &mut Workspace::new());
    let wide = net.mlp.cast::<f64>();
    let feats = net.ffm.map_batch::<f64>(&xs);
    let b = wide.forward(&feats, xs.len(), &mut Workspace::new()).to_vec();
    for (x, y) in a.iter().zip(&b) {
        assert!((*x as f64 - y).abs() < 1e-4, "{x} vs {y}");
    }
}

#[test]
fn adam_fits_a_smooth_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = CoordNet::new(NetShape { depth: 2, width: 32 }, Activation::sine(3.0), Head::Linear, 1.0, 16, &mut rng);
    let xs: Vec<[f64; 3]> = (0..512).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let ys: Vec<f32> = xs.iter().map(|p| (3.0 * p[0] + p[1] * p[2]).sin() as f32).collect();
    let feats = net.ffm.map_batch::<f32>(&xs);
    let targets = Targets::Values(ys);
    let mut ws = Workspace::new();
    let mut grads = vec![0.0; net.param_count()];
    let mut adam = AdamState::new(net.param_count());
    let mut first = None;
    let mut last = 0.0;
    for _ in 0..400 {
        last = net.mlp.loss_and_grad(&feats, xs.len(), targets.as_ref(), LossKind::Mse, &mut ws, &mut grads).unwrap();
        first.get_or_insert(last);
        adam.step(net.mlp.params_mut(), &grads, 3e-3);
    }
    assert!(last < 0.05 * first.unwrap(), "loss {} -> {last}", first.unwrap());
}
