//! Fits a coordinate network to a 3-D function and checks backpropagation
//! against finite differences.

use neuvol::neural::{
    grad_check, Activation, AdamState, Batch, CoordNet, FourierFeatures, LossKind, Mlp, NetShape, Targets, Workspace, Head,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn field(p: [f64; 3]) -> f32 {
    ((6.0 * p[0]).sin() * (4.0 * p[1]).cos() + p[2]) as f32
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let ffm = FourierFeatures::new(11, 2.0, 4);
    let mlp = Mlp::<f64>::init(&[ffm.output_dim(), 16, 16, 1], Activation::sine(3.0), Head::Linear, &mut rng);
    let inputs: Vec<[f64; 3]> = (0..8).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let targets = Targets::Values(inputs.iter().map(|p| field(*p) as f64).collect());
    let worst = grad_check(&mlp, &ffm, &Batch { inputs, targets }, LossKind::Mse, 1e-6)?;
    println!("gradient check: max relative error {worst:.2e}");

    let shape = NetShape { depth: 2, width: 64 };
    let mut net = CoordNet::new(shape, Activation::sine(3.0), Head::Linear, 2.0, 64, &mut rng);
    let xs: Vec<[f64; 3]> = (0..4096).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let ys: Vec<f32> = xs.iter().map(|p| field(*p)).collect();
    let feats = net.ffm.map_batch::<f32>(&xs);
    let mut ws = Workspace::new();
    let mut grads = vec![0.0; net.param_count()];
    let mut adam = AdamState::new(net.param_count());
    for epoch in 0..=600 {
        let loss = net.mlp.loss_and_grad(&feats, xs.len(), Targets::Values(ys.clone()).as_ref(), LossKind::Mse, &mut ws, &mut grads)?;
        adam.step(net.mlp.params_mut(), &grads, 2e-3);
        if epoch % 100 == 0 {
            println!("epoch {epoch:>4} mse {loss:.3e}");
        }
    }
    let probe = [[0.25, 0.5, 0.75], [0.9, 0.1, 0.3]];
    for (p, y) in probe.iter().zip(net.forward(&probe, &mut ws)) {
        println!("f{p:?} = {:.4}, net {y:.4}", field(*p));
    }
    Ok(())
}
