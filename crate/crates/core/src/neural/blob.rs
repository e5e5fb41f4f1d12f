//! Binary layout of one coordinate network.
//!
//! ```text
//! dim count u16 | dims u16×count | activation u8 | frequency f32
//! | feature seed u64 | feature scale f32 | feature rows u32
//! | weight precision u8 (32 or 16) | weights (f32 or f16 each)
//! ```

use half::f16;

use super::{Activation, ActivationKind, CoordNet, FourierFeatures, Head, Mlp};
use crate::bytes::{ByteReader, ByteWriter, FormatError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightPrecision {
    F32,
    F16,
}

impl WeightPrecision {
    pub fn bits(self) -> u8 {
        match self {
            WeightPrecision::F32 => 32,
            WeightPrecision::F16 => 16,
        }
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            32 => Some(WeightPrecision::F32),
            16 => Some(WeightPrecision::F16),
            _ => None,
        }
    }

    /// Value as it comes back after a store/load cycle.
    pub fn round(self, v: f32) -> f32 {
        match self {
            WeightPrecision::F32 => v,
            WeightPrecision::F16 => f16::from_f32(v).to_f32(),
        }
    }
}

pub fn write_net(w: &mut ByteWriter, net: &CoordNet, precision: WeightPrecision) {
    let dims = net.mlp.dims();
    w.u16(dims.len() as u16);
    for &d in dims {
        w.u16(u16::try_from(d).expect("layer width fits in u16"));
    }
    let act = net.mlp.activation();
    w.u8(act.kind.to_u8());
    w.f32(act.frequency);
    w.u64(net.ffm.seed());
    w.f32(net.ffm.scale());
    w.u32(net.ffm.size() as u32);
    w.u8(precision.bits());
    for &p in net.mlp.params() {
        match precision {
            WeightPrecision::F32 => w.f32(p),
            WeightPrecision::F16 => w.u16(f16::from_f32(p).to_bits()),
        }
    }
}

/// Reads a network; `head` comes from the role the caller expects.
pub fn read_net(r: &mut ByteReader<'_>, head: Head) -> Result<CoordNet, FormatError> {
    let section = r.section_name();
    let count = r.u16()? as usize;
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        dims.push(r.u16()? as usize);
    }
    let kind = ActivationKind::from_u8(r.u8()?).ok_or_else(|| FormatError::corrupt(section, "unknown activation"))?;
    let frequency = r.f32()?;
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(FormatError::corrupt(section, "activation frequency must be positive"));
    }
    let seed = r.u64()?;
    let scale = r.f32()?;
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(FormatError::corrupt(section, "feature scale must be finite"));
    }
    let m = r.u32()? as usize;
    if m == 0 || dims.first() != Some(&(2 * m)) {
        return Err(FormatError::corrupt(section, "input width does not match the feature map"));
    }
    let precision =
        WeightPrecision::from_bits(r.u8()?).ok_or_else(|| FormatError::corrupt(section, "unknown weight precision"))?;
    let mut total = 0usize;
    for w in dims.windows(2) {
        total += w[0] * w[1] + w[1];
    }
    let width = precision.bits() as usize / 8;
    if total.saturating_mul(width) > r.remaining() {
        return Err(FormatError::Truncated(section));
    }
    let mut params = Vec::with_capacity(total);
    for _ in 0..total {
        params.push(match precision {
            WeightPrecision::F32 => r.f32()?,
            WeightPrecision::F16 => f16::from_bits(r.u16()?).to_f32(),
        });
    }
    let activation = Activation { kind, frequency };
    let mlp = Mlp::from_params(&dims, activation, head, params).map_err(|e| FormatError::corrupt(section, e.to_string()))?;
    Ok(CoordNet { ffm: FourierFeatures::new(seed, scale, m), mlp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::NetShape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> CoordNet {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        CoordNet::new(NetShape { depth: 2, width: 8 }, Activation::sine(3.0), Head::Classes(3), 2.0, 4, &mut rng)
    }

    #[test]
    fn f32_roundtrip_is_exact() {
        let n = net();
        let mut w = ByteWriter::new();
        write_net(&mut w, &n, WeightPrecision::F32);
        let bytes = w.into_inner();
        let mut r = ByteReader::new(&bytes, "net");
        assert_eq!(read_net(&mut r, Head::Classes(3)).unwrap(), n);
        assert!(r.is_at_end());
    }

    #[test]
    fn f16_halves_weight_bytes() {
        let n = net();
        let mut a = ByteWriter::new();
        write_net(&mut a, &n, WeightPrecision::F32);
        let mut b = ByteWriter::new();
        write_net(&mut b, &n, WeightPrecision::F16);
        assert_eq!(a.len() - b.len(), 2 * n.param_count());
        let bytes = b.into_inner();
        let back = read_net(&mut ByteReader::new(&bytes, "net"), Head::Classes(3)).unwrap();
        for (x, y) in n.mlp.params().iter().zip(back.mlp.params()) {
            assert_eq!(WeightPrecision::F16.round(*x), *y);
        }
    }

    #[test]
    fn wrong_head_is_rejected() {
        let mut w = ByteWriter::new();
        write_net(&mut w, &net(), WeightPrecision::F32);
        let bytes = w.into_inner();
        assert!(read_net(&mut ByteReader::new(&bytes, "net"), Head::Binary).is_err());
    }
}
