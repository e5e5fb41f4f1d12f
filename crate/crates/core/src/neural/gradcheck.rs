use super::mlp::TargetsRef;
use super::{Batch, FourierFeatures, LossKind, Mlp, NeuralError, Workspace};

fn batch_loss(mlp: &Mlp<f64>, feats: &[f64], batch: &Batch<f64>, kind: LossKind) -> Result<f64, NeuralError> {
    let mut g = vec![0.0; mlp.params().len()];
    mlp.loss_and_grad(feats, batch.len(), batch.targets.as_ref(), kind, &mut Workspace::new(), &mut g)
}

/// Largest relative difference between `analytic` and the central-difference
/// gradient with step `h`. Relative error is `|a - n| / max(|a|, |n|, 1e-6)`;
/// the floor keeps round-off on vanishing entries from dominating.
pub fn compare_gradients(
    mlp: &Mlp<f64>,
    ffm: &FourierFeatures,
    batch: &Batch<f64>,
    kind: LossKind,
    h: f64,
    analytic: &[f64],
) -> Result<f64, NeuralError> {
    if analytic.len() != mlp.params().len() {
        return Err(NeuralError::Shape("gradient length differs from parameter count".into()));
    }
    let feats = ffm.map_batch::<f64>(&batch.inputs);
    let mut probe = mlp.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let p0 = probe.params()[i];
        probe.params_mut()[i] = p0 + h;
        let up = batch_loss(&probe, &feats, batch, kind)?;
        probe.params_mut()[i] = p0 - h;
        let down = batch_loss(&probe, &feats, batch, kind)?;
        probe.params_mut()[i] = p0;
        let numeric = (up - down) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Max relative error of backpropagation against central differences.
pub fn grad_check(mlp: &Mlp<f64>, ffm: &FourierFeatures, batch: &Batch<f64>, kind: LossKind, h: f64) -> Result<f64, NeuralError> {
    let feats = ffm.map_batch::<f64>(&batch.inputs);
    let mut grads = vec![0.0; mlp.params().len()];
    let targets: TargetsRef<'_, f64> = batch.targets.as_ref();
    mlp.loss_and_grad(&feats, batch.len(), targets, kind, &mut Workspace::new(), &mut grads)?;
    compare_gradients(mlp, ffm, batch, kind, h, &grads)
}
