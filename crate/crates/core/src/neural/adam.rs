use super::Real;

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(param_count: usize) -> Self {
        AdamState { m: vec![T::zero(); param_count], v: vec![T::zero(); param_count], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Clears the moments, e.g. before a refinement pass.
    pub fn reset(&mut self) {
        self.m.fill(T::zero());
        self.v.fill(T::zero());
        self.t = 0;
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        let bias1 = 1.0 - self.beta1.powi(self.t.min(i32::MAX as u64) as i32);
        let bias2 = 1.0 - self.beta2.powi(self.t.min(i32::MAX as u64) as i32);
        let step = T::of(lr / bias1);
        let inv_bias2 = T::of(1.0 / bias2);
        let eps = T::of(self.eps);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + c1 * g;
            *v = b2 * *v + c2 * g * g;
            *p = *p - step * *m / ((*v * inv_bias2).sqrt() + eps);
        }
    }
}

/// Step-wise exponential decay `lr0 · decay^(epoch / interval)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub lr0: f64,
    pub decay: f64,
    pub interval: u64,
}

impl LrSchedule {
    pub fn rate(&self, epoch: u64) -> f64 {
        self.lr0 * self.decay.powf(epoch as f64 / self.interval.max(1) as f64)
    }
}
