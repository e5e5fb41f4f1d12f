use super::Coord;

/// Half-open box of voxel coordinates `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoordBox {
    pub lo: Coord,
    pub hi: Coord,
}

impl CoordBox {
    pub fn new(lo: Coord, hi: Coord) -> Self {
        CoordBox { lo, hi }
    }

    /// Cube `[lo, lo + size)`.
    pub fn cube(lo: Coord, size: i32) -> Self {
        CoordBox { lo, hi: lo.offset(size, size, size) }
    }

    /// Box centered on the origin with `size` voxels per axis.
    pub fn centered(size: i32) -> Self {
        let lo = Coord::splat(-(size / 2));
        CoordBox { lo, hi: lo.offset(size, size, size) }
    }

    pub fn is_empty(&self) -> bool {
        self.hi.x <= self.lo.x || self.hi.y <= self.lo.y || self.hi.z <= self.lo.z
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            (self.hi.x - self.lo.x).max(0) as usize,
            (self.hi.y - self.lo.y).max(0) as usize,
            (self.hi.z - self.lo.z).max(0) as usize,
        ]
    }

    pub fn volume(&self) -> u64 {
        let d = self.dims();
        d[0] as u64 * d[1] as u64 * d[2] as u64
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.x >= self.lo.x && c.x < self.hi.x && c.y >= self.lo.y && c.y < self.hi.y && c.z >= self.lo.z && c.z < self.hi.z
    }

    pub fn expand(&self, by: i32) -> Self {
        CoordBox { lo: self.lo.offset(-by, -by, -by), hi: self.hi.offset(by, by, by) }
    }

    pub fn intersect(&self, other: &CoordBox) -> CoordBox {
        CoordBox {
            lo: Coord::new(self.lo.x.max(other.lo.x), self.lo.y.max(other.lo.y), self.lo.z.max(other.lo.z)),
            hi: Coord::new(self.hi.x.min(other.hi.x), self.hi.y.min(other.hi.y), self.hi.z.min(other.hi.z)),
        }
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &CoordBox) -> CoordBox {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        CoordBox {
            lo: Coord::new(self.lo.x.min(other.lo.x), self.lo.y.min(other.lo.y), self.lo.z.min(other.lo.z)),
            hi: Coord::new(self.hi.x.max(other.hi.x), self.hi.y.max(other.hi.y), self.hi.z.max(other.hi.z)),
        }
    }

    /// Every coordinate, x-major then y then z.
    pub fn iter(&self) -> impl Iterator<Item = Coord> + '_ {
        let b = *self;
        let [_, dy, dz] = b.dims();
        let empty = b.is_empty();
        (b.lo.x..if empty { b.lo.x } else { b.hi.x }).flat_map(move |x| {
            (0..dy as i32).flat_map(move |y| (0..dz as i32).map(move |z| Coord::new(x, b.lo.y + y, b.lo.z + z)))
        })
    }

    /// Origins of the `dim`-aligned cells that overlap the box.
    pub fn aligned_cells(&self, dim: i32) -> impl Iterator<Item = Coord> + '_ {
        let lo = self.lo.align(dim);
        let hi = if self.is_empty() { lo } else { self.hi.offset(-1, -1, -1).align(dim).offset(dim, dim, dim) };
        let n = |a: i32, b: i32| ((b - a) / dim).max(0);
        let (nx, ny, nz) = (n(lo.x, hi.x), n(lo.y, hi.y), n(lo.z, hi.z));
        (0..nx).flat_map(move |i| {
            (0..ny).flat_map(move |j| (0..nz).map(move |k| lo.offset(i * dim, j * dim, k * dim)))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_covers_volume_in_order() {
        let b = CoordBox::new(Coord::new(-1, 0, 2), Coord::new(1, 2, 4));
        let v: Vec<_> = b.iter().collect();
        assert_eq!(v.len() as u64, b.volume());
        assert_eq!(v[0], Coord::new(-1, 0, 2));
        assert_eq!(v[1], Coord::new(-1, 0, 3));
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(v.iter().all(|c| b.contains(*c)));
    }

    #[test]
    fn aligned_cells_of_straddling_box() {
        let b = CoordBox::new(Coord::splat(-3), Coord::splat(8));
        let cells: Vec<_> = b.aligned_cells(8).collect();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0], Coord::splat(-8));
        assert_eq!(CoordBox::new(Coord::splat(-3), Coord::splat(9)).aligned_cells(8).count(), 27);
        assert_eq!(CoordBox::new(Coord::splat(0), Coord::splat(8)).aligned_cells(8).count(), 1);
    }

    #[test]
    fn empty_box() {
        let b = CoordBox::new(Coord::splat(2), Coord::new(2, 5, 5));
        assert!(b.is_empty());
        assert_eq!(b.iter().count(), 0);
        assert_eq!(b.volume(), 0);
    }
}
