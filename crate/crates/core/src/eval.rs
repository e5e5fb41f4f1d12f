//! Gate-blended evaluation of expert networks. Encoder patch extraction, full
//! decode and random-access queries all go through here, so their results
//! agree bit for bit.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use crate::container::{EncodedSubdomain, Role};
use crate::grid::{Coord, LEAF_DIM};
use crate::neural::{sigmoid, softmax_into, Head, LatticeFrame, LatticeTable, Workspace};
use crate::partition::{Subdomain, SubdomainLayout};

const CHUNK: usize = 4096;

/// Position used for gating: voxel coordinate, or the center of a level-1 slot.
pub(crate) fn gate_position(role: Role, c: Coord) -> [f64; 3] {
    let p = c.to_f64();
    if role.on_slots() {
        let h = (LEAF_DIM as f64 - 1.0) / 2.0;
        [p[0] + h, p[1] + h, p[2] + h]
    } else {
        p
    }
}

/// Integer lattice coordinate fed to the feature table of a role.
pub(crate) fn lattice_coord(role: Role, c: Coord) -> [i32; 3] {
    if role.on_slots() {
        [c.x.div_euclid(LEAF_DIM), c.y.div_euclid(LEAF_DIM), c.z.div_euclid(LEAF_DIM)]
    } else {
        [c.x, c.y, c.z]
    }
}

/// Lattice frame and covered index box of a role over an expert's expanded box.
pub(crate) fn role_lattice(sub: &Subdomain, halo: i32, role: Role) -> (LatticeFrame, [i32; 3], [usize; 3]) {
    let frame = sub.frame(halo);
    let lo = sub.expanded(halo).lo;
    let n = frame.extent as usize;
    if role.on_slots() {
        let d = LEAF_DIM as f64;
        let shift = (d - 1.0) / 2.0;
        let slot_frame = LatticeFrame {
            origin: frame.origin.map(|o| (o - shift) / d),
            extent: frame.extent / d,
        };
        let lo = lattice_coord(role, lo);
        (slot_frame, lo, [n / LEAF_DIM as usize; 3])
    } else {
        (frame, [lo.x, lo.y, lo.z], [n; 3])
    }
}

pub(crate) fn role_table(sub: &Subdomain, halo: i32, role: Role, net: &crate::neural::CoordNet) -> LatticeTable {
    let (frame, lo, dims) = role_lattice(sub, halo, role);
    LatticeTable::new(&net.ffm, frame, lo, dims)
}

fn role_index(role: Role) -> usize {
    match role {
        Role::Level1 => 0,
        Role::Tile => 1,
        Role::Level0 => 2,
        Role::Voxel => 3,
    }
}

/// Lazily built feature tables, one per expert and role. Kept outside
/// [`Blender`] so long-lived readers can reuse them across calls.
pub(crate) struct TableCache(Vec<[OnceLock<LatticeTable>; 4]>);

impl TableCache {
    pub fn new(experts: usize) -> Self {
        TableCache((0..experts).map(|_| Default::default()).collect())
    }
}

/// Blended outputs: `k` values per point plus the gate weight sum. Points with
/// zero weight sum were not covered by any expert holding the role.
pub(crate) struct Blended {
    pub k: usize,
    pub values: Vec<f32>,
    pub weight: Vec<f64>,
}

impl Blended {
    pub fn row(&self, i: usize) -> Option<&[f32]> {
        (self.weight[i] > 0.0).then(|| &self.values[i * self.k..(i + 1) * self.k])
    }
}

pub(crate) struct Blender<'a> {
    layout: &'a SubdomainLayout,
    experts: &'a [EncodedSubdomain],
    cache: &'a TableCache,
}

impl<'a> Blender<'a> {
    pub fn new(layout: &'a SubdomainLayout, experts: &'a [EncodedSubdomain], cache: &'a TableCache) -> Self {
        assert_eq!(layout.len(), experts.len(), "one encoded block per subdomain");
        assert_eq!(cache.0.len(), experts.len(), "one table set per subdomain");
        Blender { layout, experts, cache }
    }

    fn table(&self, id: usize, role: Role) -> &LatticeTable {
        self.cache.0[id][role_index(role)].get_or_init(|| {
            let net = self.experts[id].net(role).expect("role present");
            role_table(&self.layout.subdomains()[id], self.layout.halo(), role, net)
        })
    }

    /// Evaluates `role` at `points` (voxels, or slot origins for slot roles).
    /// Outputs are probabilities for classifier heads and raw values for
    /// regressors, blended with normalized gate weights. `counter` is advanced
    /// by the number of network evaluations.
    pub fn eval(&self, role: Role, points: &[Coord], counter: Option<&AtomicU64>) -> Blended {
        let k = role.head().arity();
        let n = points.len();
        let mut acc = vec![0.0f64; n * k];
        let mut weight = vec![0.0f64; n];
        let mut per_expert: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.experts.len()];
        for (i, &c) in points.iter().enumerate() {
            for (id, w) in self.layout.experts_at(gate_position(role, c)) {
                if self.experts[id as usize].net(role).is_some() {
                    per_expert[id as usize].push((i, w));
                }
            }
        }
        let mut ws = Workspace::new();
        let mut feats = Vec::new();
        let mut coords = Vec::with_capacity(CHUNK);
        let mut probs = vec![0.0f32; k];
        for (id, list) in per_expert.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let net = self.experts[id].net(role).expect("filtered above");
            let table = self.table(id, role);
            if let Some(ctr) = counter {
                ctr.fetch_add(list.len() as u64, Ordering::Relaxed);
            }
            for chunk in list.chunks(CHUNK) {
                coords.clear();
                coords.extend(chunk.iter().map(|&(i, _)| lattice_coord(role, points[i])));
                table.map_batch_into(&coords, &mut feats);
                let out = net.mlp.forward(&feats, chunk.len(), &mut ws);
                for (&(i, w), row) in chunk.iter().zip(out.chunks_exact(k)) {
                    match net.mlp.head() {
                        Head::Classes(_) => softmax_into(row, &mut probs),
                        Head::Binary => probs[0] = sigmoid(row[0]),
                        Head::Linear => probs.copy_from_slice(row),
                    }
                    for (a, p) in acc[i * k..(i + 1) * k].iter_mut().zip(&probs) {
                        *a += w * *p as f64;
                    }
                    weight[i] += w;
                }
            }
        }
        let values = acc
            .chunks_exact(k)
            .zip(&weight)
            .flat_map(|(row, &w)| row.iter().map(move |a| if w > 0.0 { (a / w) as f32 } else { 0.0 }))
            .collect();
        Blended { k, values, weight }
    }
}

/// Index of the largest entry, first one on ties.
pub(crate) fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
