//! "NVDB" container files.
//!
//! ```text
//! magic "NVDB" | version u32 = 1 | flags u32 | stage u8
//! payload length u64 | stored length u64 | stored payload
//! crc32 u32 over every preceding byte
//! ```
//!
//! `flags` bit 0 is set when a lossless stage compressed the payload; bits 1-2
//! hold the weight precision (0 = 32-bit, 1 = 16-bit). The payload is a run of
//! length-prefixed sections: grid metadata, upper tree, layout, one block per
//! expert, and the training configuration as text. Node masks are stored as
//! sorted slot lists with varint deltas, and patch coordinates as varint deltas
//! of their linear index inside the owning core box.

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use super::{EncodedSubdomain, GridMeta, NeuralVdbContainer, PatchList, Role, SlotClass};
use crate::bytes::{ByteReader, ByteWriter, FormatError};
use crate::config::TrainConfig;
use crate::grid::{Coord, GridClass, Level1Node, Level2Node, NodeMask, RootEntry, VdbGrid, LEAF_DIM};
use crate::neural::blob::{read_net, write_net, WeightPrecision};
use crate::partition::{Subdomain, SubdomainLayout};

pub const MAGIC: [u8; 4] = *b"NVDB";
pub const VERSION: u32 = 1;
const HEADER_BYTES: usize = 4 + 4 + 4 + 1 + 8 + 8;

/// General-purpose lossless stage applied to the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LosslessStage {
    None = 0,
    Deflate = 1,
}

impl LosslessStage {
    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(LosslessStage::None),
            1 => Some(LosslessStage::Deflate),
            _ => None,
        }
    }
}

/// Serialized container plus its uncompressed payload size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerBytes {
    pub file: Vec<u8>,
    pub payload_bytes: u64,
}

fn write_coord(w: &mut ByteWriter, c: Coord) {
    w.i32(c.x);
    w.i32(c.y);
    w.i32(c.z);
}

fn read_coord(r: &mut ByteReader<'_>) -> Result<Coord, FormatError> {
    Ok(Coord::new(r.i32()?, r.i32()?, r.i32()?))
}

fn write_index_list(w: &mut ByteWriter, idx: impl ExactSizeIterator<Item = u64>) {
    w.varint(idx.len() as u64);
    let mut prev = 0;
    for (n, i) in idx.enumerate() {
        w.varint(if n == 0 { i } else { i - prev - 1 });
        prev = i;
    }
}

/// Reads `count` strictly increasing indices below `limit`.
fn read_indices(r: &mut ByteReader<'_>, count: usize, limit: u64, mut each: impl FnMut(&mut ByteReader<'_>, u64) -> Result<(), FormatError>) -> Result<(), FormatError> {
    let mut prev: Option<u64> = None;
    for _ in 0..count {
        let d = r.varint()?;
        let i = match prev {
            None => d,
            Some(p) => p.checked_add(d).and_then(|v| v.checked_add(1)).ok_or_else(|| FormatError::corrupt(r.section_name(), "index overflow"))?,
        };
        if i >= limit {
            return Err(FormatError::corrupt(r.section_name(), format!("index {i} out of range {limit}")));
        }
        each(r, i)?;
        prev = Some(i);
    }
    Ok(())
}

fn read_count(r: &mut ByteReader<'_>, min_item_bytes: usize) -> Result<usize, FormatError> {
    let n = r.varint()?;
    let n = usize::try_from(n).map_err(|_| FormatError::Truncated(r.section_name()))?;
    if n.saturating_mul(min_item_bytes.max(1)) > r.remaining() {
        return Err(FormatError::Truncated(r.section_name()));
    }
    Ok(n)
}

fn read_mask(r: &mut ByteReader<'_>, log2dim: u32) -> Result<NodeMask, FormatError> {
    let mut mask = NodeMask::new(log2dim);
    let n = read_count(r, 1)?;
    read_indices(r, n, mask.len() as u64, |_, i| {
        mask.set(i as usize, true);
        Ok(())
    })?;
    Ok(mask)
}

fn write_meta(m: &GridMeta) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.f64(m.voxel_size);
    w.u8(m.class.to_u8());
    w.f32(m.background);
    w.f32(m.half_width);
    w.f32(m.value_scale);
    w.into_inner()
}

fn read_meta(r: &mut ByteReader<'_>) -> Result<GridMeta, FormatError> {
    let voxel_size = r.f64()?;
    let class = GridClass::from_u8(r.u8()?).ok_or_else(|| FormatError::corrupt("gridMeta", "unknown grid class"))?;
    let meta = GridMeta { voxel_size, class, background: r.f32()?, half_width: r.f32()?, value_scale: r.f32()? };
    if !(meta.voxel_size.is_finite() && meta.voxel_size > 0.0) || !meta.value_scale.is_finite() {
        return Err(FormatError::corrupt("gridMeta", "invalid voxel size or value scale"));
    }
    Ok(meta)
}

fn write_upper(g: &VdbGrid) -> Vec<u8> {
    let mut w = ByteWriter::new();
    let bg = g.background().to_bits();
    w.varint(g.root().len() as u64);
    for (key, entry) in g.root() {
        write_coord(&mut w, *key);
        match entry {
            RootEntry::Tile { value, active } => {
                w.u8(0);
                w.f32(*value);
                w.u8(*active as u8);
            }
            RootEntry::Child(n2) => {
                w.u8(1);
                write_index_list(&mut w, n2.child_mask().iter_on().map(|i| i as u64).collect::<Vec<_>>().into_iter());
                write_index_list(&mut w, n2.active_mask().iter_on().map(|i| i as u64).collect::<Vec<_>>().into_iter());
                let tiles: Vec<(usize, f32)> = (0..Level2Node::SLOTS)
                    .filter(|&i| !n2.child_mask().get(i) && n2.tile_value(i).to_bits() != bg)
                    .map(|i| (i, n2.tile_value(i)))
                    .collect();
                write_index_list(&mut w, tiles.iter().map(|t| t.0 as u64).collect::<Vec<_>>().into_iter());
                for (_, v) in tiles {
                    w.f32(v);
                }
            }
        }
    }
    w.into_inner()
}

fn read_upper(r: &mut ByteReader<'_>, meta: &GridMeta) -> Result<VdbGrid, FormatError> {
    let mut g = VdbGrid::empty(meta.background, meta.class, meta.voxel_size, meta.half_width);
    let n = read_count(r, 14)?;
    let mut last: Option<Coord> = None;
    for _ in 0..n {
        let key = read_coord(r)?;
        if key != key.align(crate::grid::LEVEL2_DIM) || !key.in_range() || last.is_some_and(|l| l >= key) {
            return Err(FormatError::corrupt("upperTree", format!("bad root key {key}")));
        }
        last = Some(key);
        match r.u8()? {
            0 => {
                let value = r.f32()?;
                let active = r.u8()? != 0;
                g.root_mut().insert(key, RootEntry::Tile { value, active });
            }
            1 => {
                let children = read_mask(r, crate::grid::LEVEL2_LOG2DIM)?;
                let active = read_mask(r, crate::grid::LEVEL2_LOG2DIM)?;
                let mut node = Level2Node::new(key, meta.background);
                let count = read_count(r, 1)?;
                let mut idx = Vec::with_capacity(count);
                read_indices(r, count, Level2Node::SLOTS as u64, |_, i| {
                    idx.push(i as usize);
                    Ok(())
                })?;
                for i in idx {
                    if children.get(i) {
                        return Err(FormatError::corrupt("upperTree", "tile value stored under a child slot"));
                    }
                    node.set_tile(i, r.f32()?, false);
                }
                for i in active.iter_on() {
                    node.set_tile(i, node.tile_value(i), true);
                }
                for i in children.iter_on() {
                    let origin = node.slot_coord(i);
                    node.set_child(i, Box::new(Level1Node::new(origin, meta.background)));
                }
                g.root_mut().insert(key, RootEntry::Child(Box::new(node)));
            }
            k => return Err(FormatError::corrupt("upperTree", format!("unknown root entry kind {k}"))),
        }
    }
    Ok(g)
}

fn write_layout(l: &SubdomainLayout) -> Vec<u8> {
    let mut w = ByteWriter::new();
    write_coord(&mut w, l.origin());
    w.i32(l.size());
    w.i32(l.halo());
    w.varint(l.len() as u64);
    for s in l.subdomains() {
        write_coord(&mut w, s.cell);
        w.varint(s.cluster as u64);
    }
    w.into_inner()
}

fn read_layout(r: &mut ByteReader<'_>) -> Result<SubdomainLayout, FormatError> {
    let origin = read_coord(r)?;
    let size = r.i32()?;
    let halo = r.i32()?;
    let n = read_count(r, 13)?;
    let mut cells = Vec::with_capacity(n);
    for _ in 0..n {
        let cell = read_coord(r)?;
        let cluster = u32::try_from(r.varint()?).map_err(|_| FormatError::corrupt("layout", "cluster id overflow"))?;
        cells.push((cell, cluster));
    }
    SubdomainLayout::from_cells(origin, size, halo, &cells).map_err(|e| FormatError::corrupt("layout", e.to_string()))
}

fn local_index(sub: &Subdomain, c: Coord, unit: i32) -> u64 {
    let n = (sub.core.dims()[0] as i32 / unit) as u64;
    let d = c - sub.core.lo;
    let (x, y, z) = ((d.x / unit) as u64, (d.y / unit) as u64, (d.z / unit) as u64);
    (x * n + y) * n + z
}

fn from_local(sub: &Subdomain, i: u64, unit: i32) -> Coord {
    let n = (sub.core.dims()[0] as i32 / unit) as u64;
    let (x, y, z) = (i / (n * n), (i / n) % n, i % n);
    sub.core.lo.offset(x as i32 * unit, y as i32 * unit, z as i32 * unit)
}

fn write_expert(w: &mut ByteWriter, e: &EncodedSubdomain, sub: &Subdomain, p: WeightPrecision) {
    let flags = e.tile.is_some() as u8 | (e.l0.is_some() as u8) << 1 | (e.voxel.is_some() as u8) << 2;
    w.u8(flags);
    for net in [Some(&e.l1), e.tile.as_ref(), e.l0.as_ref(), e.voxel.as_ref()].into_iter().flatten() {
        write_net(w, net, p);
    }
    w.f32(e.final_loss);
    write_index_list(w, e.patches.l1.iter().map(|(c, _)| local_index(sub, *c, LEAF_DIM)).collect::<Vec<_>>().into_iter());
    for (_, class) in &e.patches.l1 {
        w.u8(*class as u8);
    }
    write_index_list(w, e.patches.l0.iter().map(|(c, _)| local_index(sub, *c, 1)).collect::<Vec<_>>().into_iter());
    for (_, state) in &e.patches.l0 {
        match state {
            Some(v) => {
                w.u8(1);
                w.f32(*v);
            }
            None => w.u8(0),
        }
    }
}

fn read_expert(r: &mut ByteReader<'_>, sub: &Subdomain) -> Result<EncodedSubdomain, FormatError> {
    let flags = r.u8()?;
    if flags & !0b111 != 0 {
        return Err(FormatError::corrupt("expert", format!("unknown flags {flags:#x}")));
    }
    let l1 = read_net(r, Role::Level1.head())?;
    let tile = if flags & 1 != 0 { Some(read_net(r, Role::Tile.head())?) } else { None };
    let l0 = if flags & 2 != 0 { Some(read_net(r, Role::Level0.head())?) } else { None };
    let voxel = if flags & 4 != 0 { Some(read_net(r, Role::Voxel.head())?) } else { None };
    let final_loss = r.f32()?;
    let size = sub.core.dims()[0] as u64;
    let mut patches = PatchList::default();

    let n1 = read_count(r, 2)?;
    let mut slots = Vec::with_capacity(n1);
    read_indices(r, n1, (size / LEAF_DIM as u64).pow(3), |_, i| {
        slots.push(from_local(sub, i, LEAF_DIM));
        Ok(())
    })?;
    for s in slots {
        let class = SlotClass::from_index(r.u8()? as usize).ok_or_else(|| FormatError::corrupt("expert", "unknown slot class"))?;
        patches.l1.push((s, class));
    }
    let n0 = read_count(r, 2)?;
    let mut voxels = Vec::with_capacity(n0);
    read_indices(r, n0, size.pow(3), |_, i| {
        voxels.push(from_local(sub, i, 1));
        Ok(())
    })?;
    for c in voxels {
        let state = match r.u8()? {
            0 => None,
            1 => Some(r.f32()?),
            s => return Err(FormatError::corrupt("expert", format!("unknown voxel patch state {s}"))),
        };
        patches.l0.push((c, state));
    }
    Ok(EncodedSubdomain { l1, tile, l0, voxel, patches, final_loss })
}

/// The uncompressed payload sections.
pub fn payload(c: &NeuralVdbContainer) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.section(&write_meta(&c.meta));
    w.section(&write_upper(&c.upper));
    w.section(&write_layout(&c.layout));
    for (e, sub) in c.experts.iter().zip(c.layout.subdomains()) {
        let mut b = ByteWriter::new();
        write_expert(&mut b, e, sub, c.precision);
        w.section(&b.into_inner());
    }
    w.section(c.config.to_string().as_bytes());
    w.into_inner()
}

pub fn write_container(c: &NeuralVdbContainer, stage: LosslessStage) -> ContainerBytes {
    let raw = payload(c);
    let stored = match stage {
        LosslessStage::None => raw.clone(),
        LosslessStage::Deflate => {
            let mut enc = DeflateEncoder::new(Vec::new(), Compression::best());
            enc.write_all(&raw).expect("writing to memory");
            enc.finish().expect("writing to memory")
        }
    };
    let precision_bits: u32 = match c.precision {
        WeightPrecision::F32 => 0,
        WeightPrecision::F16 => 1,
    };
    let flags = (stage != LosslessStage::None) as u32 | precision_bits << 1;
    let mut w = ByteWriter::new();
    w.bytes(&MAGIC);
    w.u32(VERSION);
    w.u32(flags);
    w.u8(stage as u8);
    w.u64(raw.len() as u64);
    w.u64(stored.len() as u64);
    w.bytes(&stored);
    let crc = crc32fast::hash(w.bytes_written());
    w.u32(crc);
    ContainerBytes { file: w.into_inner(), payload_bytes: raw.len() as u64 }
}

pub fn read_container(data: &[u8]) -> Result<NeuralVdbContainer, FormatError> {
    let mut r = ByteReader::new(data, "header");
    let magic = r.magic()?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic { expected: MAGIC, found: magic });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::Version(version));
    }
    if data.len() < HEADER_BYTES + 4 {
        return Err(FormatError::Truncated("header"));
    }
    let body = &data[..data.len() - 4];
    let stored = u32::from_le_bytes(data[data.len() - 4..].try_into().expect("four bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed });
    }
    let mut r = ByteReader::new(body, "header");
    r.take(8)?;
    let flags = r.u32()?;
    let stage = LosslessStage::from_id(r.u8()?).ok_or_else(|| FormatError::corrupt("header", "unknown lossless stage"))?;
    if flags & !0b111 != 0 || (flags & 1 != 0) != (stage != LosslessStage::None) {
        return Err(FormatError::corrupt("header", format!("inconsistent flags {flags:#x}")));
    }
    let precision = match (flags >> 1) & 0b11 {
        0 => WeightPrecision::F32,
        1 => WeightPrecision::F16,
        p => return Err(FormatError::corrupt("header", format!("unknown precision code {p}"))),
    };
    let raw_len = usize::try_from(r.u64()?).map_err(|_| FormatError::Truncated("header"))?;
    let stored_len = usize::try_from(r.u64()?).map_err(|_| FormatError::Truncated("header"))?;
    r.set_section("payload");
    let stored_bytes = r.take(stored_len)?;
    if !r.is_at_end() {
        return Err(FormatError::corrupt("payload", "trailing bytes before checksum"));
    }
    let raw = match stage {
        LosslessStage::None => stored_bytes.to_vec(),
        LosslessStage::Deflate => {
            let mut out = Vec::with_capacity(raw_len.min(1 << 30));
            DeflateDecoder::new(stored_bytes)
                .take(raw_len as u64 + 1)
                .read_to_end(&mut out)
                .map_err(|e| FormatError::corrupt("payload", e.to_string()))?;
            out
        }
    };
    if raw.len() != raw_len {
        return Err(FormatError::corrupt("payload", format!("expected {raw_len} payload bytes, found {}", raw.len())));
    }
    let mut p = ByteReader::new(&raw, "payload");
    let meta = read_meta(&mut p.section("gridMeta")?)?;
    let upper = read_upper(&mut p.section("upperTree")?, &meta)?;
    let layout = read_layout(&mut p.section("layout")?)?;
    let mut experts = Vec::with_capacity(layout.len());
    for sub in layout.subdomains() {
        let mut s = p.section("expert")?;
        experts.push(read_expert(&mut s, sub)?);
        if !s.is_at_end() {
            return Err(FormatError::corrupt("expert", "trailing bytes"));
        }
    }
    let text = p.section("configEcho")?;
    let text = std::str::from_utf8(text.rest()).map_err(|_| FormatError::corrupt("configEcho", "not UTF-8"))?;
    let config = TrainConfig::parse(text).map_err(|e| FormatError::corrupt("configEcho", e.to_string()))?;
    if !p.is_at_end() {
        return Err(FormatError::corrupt("payload", "trailing sections"));
    }
    let c = NeuralVdbContainer { meta, upper, layout, experts, config, precision };
    for o in c.level1_origins() {
        if c.layout.owner(o).is_none() {
            return Err(FormatError::corrupt("layout", format!("level-1 node {o} outside every subdomain")));
        }
    }
    Ok(c)
}

pub fn save(c: &NeuralVdbContainer, path: impl AsRef<Path>, stage: LosslessStage) -> Result<ContainerBytes, FormatError> {
    let bytes = write_container(c, stage);
    std::fs::write(path, &bytes.file)?;
    Ok(bytes)
}

pub fn load(path: impl AsRef<Path>) -> Result<NeuralVdbContainer, FormatError> {
    read_container(&std::fs::read(path)?)
}
