use rand::Rng;

use crate::neural::{AdamState, CoordNet, LatticeTable, LossKind, LrSchedule, NeuralError, Targets, TargetsRef, Workspace};

/// Precomputed feature rows are kept in memory up to this many bytes.
const FEATURE_CACHE_BYTES: usize = 512 << 20;
/// Smoothing factor of the loss average that drives early stopping.
const EMA_BETA: f64 = 0.9;

/// Draws training indices for one network.
///
/// With at most `batch` samples every epoch sees the whole set in order.
/// Otherwise batches are drawn uniformly with replacement, and when
/// `interval > 1` they come from a working subset of `interval · batch`
/// indices that is redrawn every `interval` epochs.
#[derive(Debug, Clone)]
pub struct Sampler {
    n: usize,
    batch: usize,
    interval: u64,
    working: Vec<u32>,
}

impl Sampler {
    pub fn new(n: usize, batch: usize, interval: u64) -> Self {
        assert!(n > 0 && batch > 0, "sampler needs data and a positive batch size");
        assert!(n <= u32::MAX as usize, "too many samples");
        Sampler { n, batch, interval: interval.max(1), working: Vec::new() }
    }

    pub fn full_batch(&self) -> bool {
        self.n <= self.batch
    }

    pub fn batch_len(&self) -> usize {
        self.n.min(self.batch)
    }

    pub fn next<R: Rng + ?Sized>(&mut self, epoch: u64, rng: &mut R, out: &mut Vec<u32>) {
        out.clear();
        if self.full_batch() {
            out.extend(0..self.n as u32);
            return;
        }
        if self.interval == 1 {
            out.extend((0..self.batch).map(|_| rng.random_range(0..self.n as u32)));
            return;
        }
        if epoch % self.interval == 0 || self.working.is_empty() {
            let size = self.batch * self.interval as usize;
            self.working.clear();
            self.working.extend((0..size).map(|_| rng.random_range(0..self.n as u32)));
        }
        let w = self.working.len();
        out.extend((0..self.batch).map(|_| self.working[rng.random_range(0..w)]));
    }
}

/// One optimization pass: fresh Adam state, decaying learning rate, and an
/// early stop once the smoothed loss drops to `stop_below`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pass {
    pub schedule: LrSchedule,
    pub max_epochs: u64,
    pub stop_below: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: u64,
    pub initial_loss: f64,
    /// Bias-corrected exponential average of the batch losses.
    pub final_loss: f64,
    pub reached_target: bool,
}

/// Samples of one network: lattice coordinates and their targets.
pub struct TrainSet<'a> {
    pub table: &'a LatticeTable,
    pub coords: &'a [[i32; 3]],
    pub targets: TargetsRef<'a, f32>,
    pub loss: LossKind,
}

impl TrainSet<'_> {
    fn len(&self) -> usize {
        self.coords.len()
    }

    fn gather(&self, idx: &[u32], out: &mut Targets<f32>) {
        match (self.targets, out) {
            (TargetsRef::Values(v), Targets::Values(o)) => {
                o.clear();
                o.extend(idx.iter().map(|&i| v[i as usize]));
            }
            (TargetsRef::Labels(l), Targets::Labels(o)) => {
                o.clear();
                o.extend(idx.iter().map(|&i| l[i as usize]));
            }
            _ => unreachable!("target buffer matches target kind"),
        }
    }
}

pub fn train<R: Rng + ?Sized>(
    net: &mut CoordNet,
    set: &TrainSet<'_>,
    pass: &Pass,
    batch: usize,
    sample_interval: u64,
    rng: &mut R,
) -> Result<TrainReport, NeuralError> {
    let n = set.len();
    let d = net.ffm.output_dim();
    let mut sampler = Sampler::new(n, batch, sample_interval);
    let rows = sampler.batch_len();
    let mut ws = Workspace::new();
    let mut grads = vec![0.0f32; net.param_count()];
    let mut adam = AdamState::new(net.param_count());
    let mut idx = Vec::with_capacity(rows);
    let mut feats: Vec<f32> = Vec::new();
    let mut targets = match set.targets {
        TargetsRef::Values(_) => Targets::Values(Vec::new()),
        TargetsRef::Labels(_) => Targets::Labels(Vec::new()),
    };

    // Full-batch sets are featurized once; larger sets are cached when small
    // enough and featurized per batch otherwise.
    let cache: Option<Vec<f32>> = if !sampler.full_batch() && n * d * 4 <= FEATURE_CACHE_BYTES {
        let mut all = Vec::new();
        set.table.map_batch_into(set.coords, &mut all);
        Some(all)
    } else {
        None
    };
    if sampler.full_batch() {
        set.table.map_batch_into(set.coords, &mut feats);
        sampler.next(0, rng, &mut idx);
        set.gather(&idx, &mut targets);
    }
    let mut coords = Vec::with_capacity(rows);

    let mut report = TrainReport::default();
    let mut ema = 0.0;
    for epoch in 0..pass.max_epochs {
        if !sampler.full_batch() {
            sampler.next(epoch, rng, &mut idx);
            set.gather(&idx, &mut targets);
            match &cache {
                Some(all) => {
                    feats.clear();
                    for &i in &idx {
                        feats.extend_from_slice(&all[i as usize * d..(i as usize + 1) * d]);
                    }
                }
                None => {
                    coords.clear();
                    coords.extend(idx.iter().map(|&i| set.coords[i as usize]));
                    set.table.map_batch_into(&coords, &mut feats);
                }
            }
        }
        let loss = net.mlp.loss_and_grad(&feats, rows, targets.as_ref(), set.loss, &mut ws, &mut grads)? as f64;
        if !loss.is_finite() {
            return Err(NeuralError::NonFinite("training loss"));
        }
        adam.step(net.mlp.params_mut(), &grads, pass.schedule.rate(epoch));
        if epoch == 0 {
            report.initial_loss = loss;
        }
        ema = EMA_BETA * ema + (1.0 - EMA_BETA) * loss;
        report.final_loss = ema / (1.0 - EMA_BETA.powi((epoch + 1).min(i32::MAX as u64) as i32));
        report.epochs = epoch + 1;
        if report.final_loss <= pass.stop_below {
            report.reached_target = true;
            break;
        }
    }
    Ok(report)
}
