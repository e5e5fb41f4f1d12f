//! Coordinate networks: Fourier feature mapping followed by a dense MLP.
//!
//! Training runs in `f32`; everything is generic over [`Real`] so gradients can
//! be verified in `f64` against central differences.

mod adam;
pub mod blob;
mod ffm;
mod gradcheck;
mod mlp;

pub use adam::{AdamState, LrSchedule};
pub use ffm::{FourierFeatures, LatticeFrame, LatticeTable};
pub use gradcheck::{compare_gradients, grad_check};
pub use mlp::{Mlp, TargetsRef, Workspace};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid label {label} for a head with {classes} classes")]
    Label { label: u8, classes: usize },
}

/// Scalar type a network can be evaluated in.
pub trait Real:
    num_traits::Float + Default + Send + Sync + std::fmt::Debug + std::iter::Sum + 'static
{
    fn of(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `(sin x, cos x)`; may trade the last bit of accuracy for speed.
    fn sin_cos_fast(self) -> (Self, Self);

    /// `c = alpha·a·b + beta·c` for row/column strided matrices, `a` m×k, `b` k×n.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: isize, cs: isize) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows as isize - 1) * rs + (cols as isize - 1) * cs;
    assert!(rs >= 0 && cs >= 0 && (last as usize) < len, "gemm operand out of bounds");
}

/// `sin`/`cos` for f32 with the reduction done in f64 and Taylor polynomials
/// on `[-π/2, π/2]`; absolute error below 1e-7 for `|x| < 2^40`.
#[inline(always)]
fn sin_cos_f32(x: f32) -> (f32, f32) {
    const ROUND: f64 = 6_755_399_441_055_744.0;
    let xd = x as f64;
    let k = (xd * std::f64::consts::FRAC_1_PI + ROUND) - ROUND;
    let r = (xd - k * std::f64::consts::PI) as f32;
    let sign = 1.0 - 2.0 * ((k as i64) & 1) as f32;
    let r2 = r * r;
    let s = r * (1.0 + r2 * (-1.0 / 6.0 + r2 * (1.0 / 120.0 + r2 * (-1.0 / 5040.0 + r2 * (1.0 / 362_880.0 + r2 * (-1.0 / 39_916_800.0))))));
    let c = 1.0 + r2 * (-0.5 + r2 * (1.0 / 24.0 + r2 * (-1.0 / 720.0 + r2 * (1.0 / 40_320.0 + r2 * (-1.0 / 3_628_800.0 + r2 * (1.0 / 479_001_600.0))))));
    (sign * s, sign * c)
}

macro_rules! impl_real {
    ($t:ty, $gemm:path, $sc:expr) => {
        impl Real for $t {
            #[inline(always)]
            fn sin_cos_fast(self) -> (Self, Self) {
                $sc(self)
            }
            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                check_extent(a.len(), m, k, rsa, csa);
                check_extent(b.len(), k, n, rsb, csb);
                check_extent(c.len(), m, n, rsc, csc);
                // SAFETY: all operand extents were bounds-checked above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    )
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm, sin_cos_f32);
impl_real!(f64, matrixmultiply::dgemm, f64::sin_cos);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Relu,
    Tanh,
    Sine,
}

impl ActivationKind {
    pub fn to_u8(self) -> u8 {
        match self {
            ActivationKind::Relu => 0,
            ActivationKind::Tanh => 1,
            ActivationKind::Sine => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(ActivationKind::Relu),
            1 => Some(ActivationKind::Tanh),
            2 => Some(ActivationKind::Sine),
            _ => None,
        }
    }
}

/// Hidden-layer nonlinearity. `frequency` scales the argument of `Sine`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    pub kind: ActivationKind,
    pub frequency: f32,
}

impl Activation {
    pub const RELU: Activation = Activation { kind: ActivationKind::Relu, frequency: 1.0 };
    pub const TANH: Activation = Activation { kind: ActivationKind::Tanh, frequency: 1.0 };

    pub fn sine(frequency: f32) -> Self {
        assert!(frequency > 0.0, "sine frequency must be positive");
        Activation { kind: ActivationKind::Sine, frequency }
    }
}

/// Output head of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// One regression output.
    Linear,
    /// Logits over `k` classes.
    Classes(usize),
    /// One logit for a binary decision.
    Binary,
}

impl Head {
    pub fn arity(self) -> usize {
        match self {
            Head::Linear | Head::Binary => 1,
            Head::Classes(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    CrossEntropy,
    Bce,
}

/// Training targets; one row per input.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets<T> {
    /// `n × arity` regression values.
    Values(Vec<T>),
    /// Class index per input (0/1 for binary heads).
    Labels(Vec<u8>),
}

/// Inputs (normalized coordinates) paired with targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub inputs: Vec<[f64; 3]>,
    pub targets: Targets<T>,
}

impl<T> Batch<T> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Feature map plus MLP: the unit trained per subdomain and per role.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordNet {
    pub ffm: FourierFeatures,
    pub mlp: Mlp<f32>,
}

/// Layer layout of a coordinate network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetShape {
    pub depth: usize,
    pub width: usize,
}

impl CoordNet {
    pub fn new<R: Rng + ?Sized>(
        shape: NetShape,
        activation: Activation,
        head: Head,
        ffm_scale: f32,
        ffm_size: usize,
        rng: &mut R,
    ) -> Self {
        let ffm = FourierFeatures::new(rng.random(), ffm_scale, ffm_size);
        Self::with_features(ffm, shape, activation, head, rng)
    }

    /// Builds the MLP on top of an existing feature map.
    pub fn with_features<R: Rng + ?Sized>(
        ffm: FourierFeatures,
        shape: NetShape,
        activation: Activation,
        head: Head,
        rng: &mut R,
    ) -> Self {
        let mut dims = vec![ffm.output_dim()];
        dims.extend(std::iter::repeat_n(shape.width, shape.depth));
        dims.push(head.arity());
        let mlp = Mlp::init(&dims, activation, head, rng);
        CoordNet { ffm, mlp }
    }

    pub fn param_count(&self) -> usize {
        self.mlp.params().len()
    }

    /// Raw outputs (`n × arity`) for a batch of normalized coordinates.
    pub fn forward(&self, xs: &[[f64; 3]], ws: &mut Workspace<f32>) -> Vec<f32> {
        let feats = self.ffm.map_batch::<f32>(xs);
        self.mlp.forward(&feats, xs.len(), ws).to_vec()
    }
}

#[inline]
pub fn sigmoid(z: f32) -> f32 {
    1.0 / (1.0 + (-z).exp())
}

/// Softmax over one row of logits, written into `out`.
pub fn softmax_into(logits: &[f32], out: &mut [f32]) {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_sin_cos_tracks_std() {
        let mut worst = 0.0f64;
        for i in -200_000..200_000 {
            let x = i as f32 * 1.37e-3;
            let (s, c) = x.sin_cos_fast();
            let (es, ec) = (x as f64).sin_cos();
            worst = worst.max((s as f64 - es).abs()).max((c as f64 - ec).abs());
        }
        assert!(worst < 3e-7, "worst error {worst}");
    }
}
