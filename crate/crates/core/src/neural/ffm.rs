use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Real;

/// Random Fourier feature map `x -> [cos(2π Bx), sin(2π Bx)]`, interleaved per
/// row of `B`. `B` is `m × 3` with entries drawn from `N(0, scale²)` and is
/// fully determined by `(seed, scale, m)`, so only those three are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierFeatures {
    seed: u64,
    scale: f32,
    b: Vec<[f64; 3]>,
}

impl FourierFeatures {
    pub fn new(seed: u64, scale: f32, m: usize) -> Self {
        assert!(m > 0, "feature count must be positive");
        assert!(scale.is_finite() && scale >= 0.0, "feature scale must be finite and non-negative");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scale as f64).expect("valid std dev");
        let b = (0..m)
            .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)])
            .collect();
        FourierFeatures { seed, scale, b }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    /// Number of frequency rows `m`.
    pub fn size(&self) -> usize {
        self.b.len()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.b.len()
    }

    pub fn matrix(&self) -> &[[f64; 3]] {
        &self.b
    }

    /// Writes `2m` features for one point.
    pub fn map_into<T: Real>(&self, x: [f64; 3], out: &mut [T]) {
        debug_assert_eq!(out.len(), self.output_dim());
        for (row, pair) in self.b.iter().zip(out.chunks_exact_mut(2)) {
            let turns = row[0] * x[0] + row[1] * x[1] + row[2] * x[2];
            // Reduce to one period before scaling so f32 keeps its precision.
            let phase = std::f64::consts::TAU * (turns - turns.round());
            let (s, c) = phase.sin_cos();
            pair[0] = T::of(c);
            pair[1] = T::of(s);
        }
    }

    /// Features for a batch, row-major `n × 2m`.
    pub fn map_batch<T: Real>(&self, xs: &[[f64; 3]]) -> Vec<T> {
        let d = self.output_dim();
        let mut out = vec![T::zero(); xs.len() * d];
        for (x, row) in xs.iter().zip(out.chunks_exact_mut(d)) {
            self.map_into(*x, row);
        }
        out
    }
}

/// Affine map from voxel index space into an expert's unit cube:
/// `x = (c - origin) / extent` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeFrame {
    pub origin: [f64; 3],
    pub extent: f64,
}

impl LatticeFrame {
    pub fn normalize(&self, p: [f64; 3]) -> [f64; 3] {
        [
            (p[0] - self.origin[0]) / self.extent,
            (p[1] - self.origin[1]) / self.extent,
            (p[2] - self.origin[2]) / self.extent,
        ]
    }
}

/// `e^{2πi·b·t}` for one frequency component and one normalized axis value.
#[inline]
fn axis_factor(b: f64, c: i32, origin: f64, extent: f64) -> [f64; 2] {
    let turns = b * ((c as f64 - origin) / extent);
    let (s, co) = (std::f64::consts::TAU * (turns - turns.round())).sin_cos();
    [co, s]
}

#[inline]
fn combine<T: Real>(fx: [f64; 2], fy: [f64; 2], fz: [f64; 2], pair: &mut [T]) {
    let re = fx[0] * fy[0] - fx[1] * fy[1];
    let im = fx[0] * fy[1] + fx[1] * fy[0];
    pair[0] = T::of(re * fz[0] - im * fz[1]);
    pair[1] = T::of(re * fz[1] + im * fz[0]);
}

impl FourierFeatures {
    /// Features at an integer voxel coordinate, formed as the product of one
    /// complex factor per axis. [`LatticeTable`] caches exactly these factors,
    /// so both paths agree bit for bit.
    pub fn map_lattice_into<T: Real>(&self, frame: &LatticeFrame, c: [i32; 3], out: &mut [T]) {
        debug_assert_eq!(out.len(), self.output_dim());
        for (row, pair) in self.b.iter().zip(out.chunks_exact_mut(2)) {
            combine(
                axis_factor(row[0], c[0], frame.origin[0], frame.extent),
                axis_factor(row[1], c[1], frame.origin[1], frame.extent),
                axis_factor(row[2], c[2], frame.origin[2], frame.extent),
                pair,
            );
        }
    }
}

/// Per-axis cache of lattice factors over a box of voxel coordinates.
/// Coordinates outside the box fall back to direct evaluation.
#[derive(Debug, Clone)]
pub struct LatticeTable {
    ffm: FourierFeatures,
    frame: LatticeFrame,
    lo: [i32; 3],
    dims: [usize; 3],
    axes: [Vec<[f64; 2]>; 3],
}

impl LatticeTable {
    pub fn new(ffm: &FourierFeatures, frame: LatticeFrame, lo: [i32; 3], dims: [usize; 3]) -> Self {
        let m = ffm.size();
        let axes = std::array::from_fn(|a| {
            let mut t = Vec::with_capacity(dims[a] * m);
            for i in 0..dims[a] {
                let c = lo[a] + i as i32;
                t.extend(ffm.b.iter().map(|row| axis_factor(row[a], c, frame.origin[a], frame.extent)));
            }
            t
        });
        LatticeTable { ffm: ffm.clone(), frame, lo, dims, axes }
    }

    pub fn features(&self) -> &FourierFeatures {
        &self.ffm
    }

    pub fn frame(&self) -> &LatticeFrame {
        &self.frame
    }

    fn index(&self, c: [i32; 3]) -> Option<[usize; 3]> {
        let mut idx = [0; 3];
        for a in 0..3 {
            let d = c[a].checked_sub(self.lo[a])?;
            if d < 0 || d as usize >= self.dims[a] {
                return None;
            }
            idx[a] = d as usize;
        }
        Some(idx)
    }

    pub fn map_into<T: Real>(&self, c: [i32; 3], out: &mut [T]) {
        let Some([i, j, k]) = self.index(c) else {
            return self.ffm.map_lattice_into(&self.frame, c, out);
        };
        let m = self.ffm.size();
        let fx = &self.axes[0][i * m..(i + 1) * m];
        let fy = &self.axes[1][j * m..(j + 1) * m];
        let fz = &self.axes[2][k * m..(k + 1) * m];
        for (r, pair) in out.chunks_exact_mut(2).enumerate() {
            combine(fx[r], fy[r], fz[r], pair);
        }
    }

    /// Row-major `n × 2m` features for a list of voxel coordinates.
    pub fn map_batch_into<T: Real>(&self, cs: &[[i32; 3]], out: &mut Vec<T>) {
        let d = self.ffm.output_dim();
        out.clear();
        out.resize(cs.len() * d, T::zero());
        for (c, row) in cs.iter().zip(out.chunks_exact_mut(d)) {
            self.map_into(*c, row);
        }
    }
}
