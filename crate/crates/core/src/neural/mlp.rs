use rand::Rng;

use super::{Activation, ActivationKind, Head, LossKind, NeuralError, Real, Targets};

/// Dense MLP with all parameters in one flat vector.
///
/// Layer `l` maps `dims[l] -> dims[l+1]`; its weights are stored row-major
/// (`out × in`) followed by `out` biases. Hidden layers apply the activation,
/// the last layer is linear and produces the head's raw outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<T>,
    activation: Activation,
    head: Head,
}

/// Borrowed targets for one training step.
#[derive(Debug, Clone, Copy)]
pub enum TargetsRef<'a, T> {
    Values(&'a [T]),
    Labels(&'a [u8]),
}

impl<T> Targets<T> {
    pub fn as_ref(&self) -> TargetsRef<'_, T> {
        match self {
            Targets::Values(v) => TargetsRef::Values(v),
            Targets::Labels(l) => TargetsRef::Labels(l),
        }
    }
}

/// Reusable activation buffers.
#[derive(Debug, Clone, Default)]
pub struct Workspace<T> {
    acts: Vec<Vec<T>>,
    derivs: Vec<Vec<T>>,
    delta: Vec<T>,
    delta_prev: Vec<T>,
}

impl<T: Real> Workspace<T> {
    pub fn new() -> Self {
        Workspace { acts: Vec::new(), derivs: Vec::new(), delta: Vec::new(), delta_prev: Vec::new() }
    }
}

fn layer_offsets(dims: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(dims.len());
    let mut off = 0;
    offsets.push(0);
    for w in dims.windows(2) {
        off += w[0] * w[1] + w[1];
        offsets.push(off);
    }
    offsets
}

impl<T: Real> Mlp<T> {
    /// Xavier-uniform weights, zero biases. For sine activations the first
    /// layer is additionally divided by the frequency.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], activation: Activation, head: Head, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least an input and an output layer");
        assert_eq!(*dims.last().unwrap(), head.arity(), "output width must match the head");
        let offsets = layer_offsets(dims);
        let mut params = vec![T::zero(); *offsets.last().unwrap()];
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let mut bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            if l == 0 && activation.kind == ActivationKind::Sine {
                bound /= activation.frequency as f64;
            }
            for w in &mut params[offsets[l]..offsets[l] + fan_in * fan_out] {
                *w = T::of(rng.random_range(-bound..bound));
            }
        }
        Mlp { dims: dims.to_vec(), offsets, params, activation, head }
    }

    pub fn from_params(dims: &[usize], activation: Activation, head: Head, params: Vec<T>) -> Result<Self, NeuralError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(NeuralError::Shape(format!("invalid layer widths {dims:?}")));
        }
        if *dims.last().unwrap() != head.arity() {
            return Err(NeuralError::Shape("output width does not match the head".into()));
        }
        let offsets = layer_offsets(dims);
        if params.len() != *offsets.last().unwrap() {
            return Err(NeuralError::Shape(format!(
                "expected {} parameters, found {}",
                offsets.last().unwrap(),
                params.len()
            )));
        }
        Ok(Mlp { dims: dims.to_vec(), offsets, params, activation, head })
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            dims: self.dims.clone(),
            offsets: self.offsets.clone(),
            params: self.params.iter().map(|p| U::of(Real::to_f64(*p))).collect(),
            activation: self.activation,
            head: self.head,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn layers(&self) -> usize {
        self.dims.len() - 1
    }

    fn weights(&self, l: usize) -> (&[T], &[T]) {
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let w = &self.params[self.offsets[l]..self.offsets[l] + i * o];
        let b = &self.params[self.offsets[l] + i * o..self.offsets[l + 1]];
        (w, b)
    }

    /// Raw outputs (`n × arity`) for `n` feature rows.
    pub fn forward<'w>(&self, feats: &[T], n: usize, ws: &'w mut Workspace<T>) -> &'w [T] {
        self.run_forward(feats, n, ws, false);
        &ws.acts[self.layers() - 1]
    }

    fn run_forward(&self, feats: &[T], n: usize, ws: &mut Workspace<T>, keep_derivs: bool) {
        assert_eq!(feats.len(), n * self.dims[0], "feature buffer has the wrong size");
        let layers = self.layers();
        ws.acts.resize_with(layers, Vec::new);
        ws.derivs.resize_with(layers, Vec::new);
        let omega = T::of(self.activation.frequency as f64);
        for l in 0..layers {
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            let (w, b) = self.weights(l);
            let (before, rest) = ws.acts.split_at_mut(l);
            let input: &[T] = if l == 0 { feats } else { &before[l - 1] };
            let out = &mut rest[0];
            out.clear();
            out.reserve(n * o);
            for _ in 0..n {
                out.extend_from_slice(b);
            }
            T::gemm(n, i, o, T::one(), input, i as isize, 1, w, 1, i as isize, T::one(), out, o as isize, 1);
            if l + 1 == layers {
                break;
            }
            if keep_derivs {
                let d = &mut ws.derivs[l];
                d.resize(n * o, T::zero());
                activate_with_derivative(self.activation.kind, omega, out, d);
            } else {
                activate(self.activation.kind, omega, out);
            }
        }
    }

    /// Batch-mean loss and its gradient with respect to every parameter.
    /// `grads` is overwritten.
    pub fn loss_and_grad(
        &self,
        feats: &[T],
        n: usize,
        targets: TargetsRef<'_, T>,
        kind: LossKind,
        ws: &mut Workspace<T>,
        grads: &mut [T],
    ) -> Result<T, NeuralError> {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer has the wrong size");
        if n == 0 {
            return Err(NeuralError::Shape("empty batch".into()));
        }
        self.run_forward(feats, n, ws, true);
        let layers = self.layers();
        let k = self.head.arity();
        let mut delta = std::mem::take(&mut ws.delta);
        delta.resize(n * k, T::zero());
        let loss = output_loss(&ws.acts[layers - 1], n, k, self.head, targets, kind, &mut delta)?;
        if !loss.is_finite() {
            ws.delta = delta;
            return Err(NeuralError::NonFinite("loss"));
        }
        let mut prev = std::mem::take(&mut ws.delta_prev);
        for l in (0..layers).rev() {
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            let input: &[T] = if l == 0 { feats } else { &ws.acts[l - 1] };
            let (gw, gb) = grads[self.offsets[l]..self.offsets[l + 1]].split_at_mut(i * o);
            // dW = deltaᵀ · input
            T::gemm(o, n, i, T::one(), &delta, 1, o as isize, input, i as isize, 1, T::zero(), gw, i as isize, 1);
            gb.fill(T::zero());
            for row in delta.chunks_exact(o) {
                for (g, &d) in gb.iter_mut().zip(row) {
                    *g = *g + d;
                }
            }
            if l > 0 {
                let (w, _) = self.weights(l);
                prev.resize(n * i, T::zero());
                T::gemm(n, o, i, T::one(), &delta, o as isize, 1, w, i as isize, 1, T::zero(), &mut prev, i as isize, 1);
                for (p, &d) in prev.iter_mut().zip(&ws.derivs[l - 1]) {
                    *p = *p * d;
                }
                std::mem::swap(&mut delta, &mut prev);
            }
        }
        ws.delta = delta;
        ws.delta_prev = prev;
        Ok(loss)
    }
}

fn activate<T: Real>(kind: ActivationKind, omega: T, z: &mut [T]) {
    match kind {
        ActivationKind::Relu => z.iter_mut().for_each(|v| *v = v.max(T::zero())),
        ActivationKind::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
        ActivationKind::Sine => z.iter_mut().for_each(|v| *v = (omega * *v).sin_cos_fast().0),
    }
}

fn activate_with_derivative<T: Real>(kind: ActivationKind, omega: T, z: &mut [T], d: &mut [T]) {
    match kind {
        ActivationKind::Relu => {
            for (v, d) in z.iter_mut().zip(d) {
                let on = *v > T::zero();
                *d = if on { T::one() } else { T::zero() };
                *v = v.max(T::zero());
            }
        }
        ActivationKind::Tanh => {
            for (v, d) in z.iter_mut().zip(d) {
                let a = v.tanh();
                *d = T::one() - a * a;
                *v = a;
            }
        }
        ActivationKind::Sine => {
            for (v, d) in z.iter_mut().zip(d) {
                let (s, c) = (omega * *v).sin_cos_fast();
                *d = omega * c;
                *v = s;
            }
        }
    }
}

/// Loss of the raw outputs and its gradient with respect to them.
pub(crate) fn output_loss<T: Real>(
    out: &[T],
    n: usize,
    k: usize,
    head: Head,
    targets: TargetsRef<'_, T>,
    kind: LossKind,
    grad: &mut [T],
) -> Result<T, NeuralError> {
    let inv_n = T::one() / T::of(n as f64);
    let mut loss = T::zero();
    match (kind, head, targets) {
        (LossKind::Mse, Head::Linear, TargetsRef::Values(t)) => {
            if t.len() != n * k {
                return Err(NeuralError::Shape(format!("{} targets for {} outputs", t.len(), n * k)));
            }
            let inv = T::one() / T::of((n * k) as f64);
            for ((g, &y), &t) in grad.iter_mut().zip(out).zip(t) {
                let e = y - t;
                loss = loss + e * e;
                *g = T::of(2.0) * e * inv;
            }
            Ok(loss * inv)
        }
        (LossKind::CrossEntropy, Head::Classes(classes), TargetsRef::Labels(labels)) => {
            if labels.len() != n {
                return Err(NeuralError::Shape(format!("{} labels for {n} rows", labels.len())));
            }
            for ((row, g), &label) in out.chunks_exact(classes).zip(grad.chunks_exact_mut(classes)).zip(labels) {
                if label as usize >= classes {
                    return Err(NeuralError::Label { label, classes });
                }
                let max = row.iter().copied().fold(T::neg_infinity(), T::max);
                let mut sum = T::zero();
                for (gj, &z) in g.iter_mut().zip(row) {
                    *gj = (z - max).exp();
                    sum = sum + *gj;
                }
                loss = loss + sum.ln() + max - row[label as usize];
                for gj in g.iter_mut() {
                    *gj = *gj / sum * inv_n;
                }
                g[label as usize] = g[label as usize] - inv_n;
            }
            Ok(loss * inv_n)
        }
        (LossKind::Bce, Head::Binary, TargetsRef::Labels(labels)) => {
            if labels.len() != n {
                return Err(NeuralError::Shape(format!("{} labels for {n} rows", labels.len())));
            }
            for ((g, &z), &label) in grad.iter_mut().zip(out).zip(labels) {
                if label > 1 {
                    return Err(NeuralError::Label { label, classes: 2 });
                }
                let t = if label == 1 { T::one() } else { T::zero() };
                loss = loss + z.max(T::zero()) - z * t + (-z.abs()).exp().ln_1p();
                let s = T::one() / (T::one() + (-z).exp());
                *g = (s - t) * inv_n;
            }
            Ok(loss * inv_n)
        }
        (kind, head, _) => Err(NeuralError::Shape(format!("loss {kind:?} does not fit head {head:?} and its targets"))),
    }
}
