//! Little-endian byte encoding shared by the grid and container formats.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("truncated data in section '{0}'")]
    Truncated(&'static str),
    #[error("corrupt section '{section}': {detail}")]
    Corrupt { section: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FormatError {
    pub fn corrupt(section: &'static str, detail: impl Into<String>) -> Self {
        FormatError::Corrupt {
            section,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn bytes_written(&self) -> &[u8] {
        &self.buf
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn i32(&mut self, v: i32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    /// LEB128 unsigned varint.
    pub fn varint(&mut self, mut v: u64) {
        loop {
            let byte = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                self.u8(byte);
                return;
            }
            self.u8(byte | 0x80);
        }
    }

    /// Writes a u64 length prefix followed by `body`.
    pub fn section(&mut self, body: &[u8]) {
        self.u64(body.len() as u64);
        self.bytes(body);
    }
}

/// Cursor over a byte slice. Every read names the section it belongs to so
/// truncation errors point at the right place.
#[derive(Debug, Clone)]
pub struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8], section: &'static str) -> Self {
        ByteReader { data, pos: 0, section }
    }

    pub fn set_section(&mut self, section: &'static str) {
        self.section = section;
    }

    pub fn section_name(&self) -> &'static str {
        self.section
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    /// Everything not yet read.
    pub fn rest(&self) -> &'a [u8] {
        &self.data[self.pos..]
    }

    pub fn is_at_end(&self) -> bool {
        self.pos == self.data.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated(self.section));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn i32(&mut self) -> Result<i32, FormatError> {
        Ok(i32::from_le_bytes(self.array()?))
    }

    pub fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub fn magic(&mut self) -> Result<[u8; 4], FormatError> {
        self.array()
    }

    pub fn varint(&mut self) -> Result<u64, FormatError> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.u8()?;
            v |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(FormatError::corrupt(self.section, "varint overflow"))
    }

    /// Reads a u64-length-prefixed section and returns a reader over it.
    pub fn section(&mut self, name: &'static str) -> Result<ByteReader<'a>, FormatError> {
        self.section = name;
        let len = self.u64()?;
        let len = usize::try_from(len).map_err(|_| FormatError::Truncated(name))?;
        let body = self.take(len)?;
        Ok(ByteReader::new(body, name))
    }

    /// Reads a count and rejects values that cannot possibly fit in the
    /// remaining bytes given a minimum per-item size.
    pub fn count(&mut self, min_item_bytes: usize) -> Result<usize, FormatError> {
        let n = self.u64()?;
        let n = usize::try_from(n).map_err(|_| FormatError::Truncated(self.section))?;
        if n.saturating_mul(min_item_bytes.max(1)) > self.remaining() {
            return Err(FormatError::Truncated(self.section));
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn varint_roundtrip(v in any::<u64>()) {
            let mut w = ByteWriter::new();
            w.varint(v);
            let bytes = w.into_inner();
            let mut r = ByteReader::new(&bytes, "t");
            prop_assert_eq!(r.varint().unwrap(), v);
            prop_assert!(r.is_at_end());
        }
    }

    #[test]
    fn truncation_names_section() {
        let mut r = ByteReader::new(&[1, 2], "header");
        match r.u32() {
            Err(FormatError::Truncated(s)) => assert_eq!(s, "header"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
