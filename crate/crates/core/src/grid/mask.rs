/// Fixed-length bitset with `2^(3·log2dim)` bits, packed into u64 words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct NodeMask {
    words: Box<[u64]>,
}

impl NodeMask {
    pub fn new(log2dim: u32) -> Self {
        let bits = 1usize << (3 * log2dim);
        NodeMask {
            words: vec![0u64; bits.div_ceil(64)].into_boxed_slice(),
        }
    }

    pub fn from_words(words: Vec<u64>) -> Self {
        NodeMask {
            words: words.into_boxed_slice(),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len() * 64
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.words.iter().all(|&w| w == u64::MAX)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, on: bool) {
        let bit = 1u64 << (i & 63);
        if on {
            self.words[i >> 6] |= bit;
        } else {
            self.words[i >> 6] &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits in ascending order.
    pub fn iter_on(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + b)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn popcount_matches_iteration(bits in proptest::collection::btree_set(0usize..4096, 0..300)) {
            let mut m = NodeMask::new(4);
            for &b in &bits {
                m.set(b, true);
            }
            let on: Vec<usize> = m.iter_on().collect();
            prop_assert_eq!(on.len(), m.count_ones());
            prop_assert_eq!(on, bits.into_iter().collect::<Vec<_>>());
        }
    }

    #[test]
    fn sizes() {
        assert_eq!(NodeMask::new(3).len(), 512);
        assert_eq!(NodeMask::new(4).len(), 4096);
        assert_eq!(NodeMask::new(5).len(), 32768);
    }
}

impl std::fmt::Debug for NodeMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NodeMask({}/{} on)", self.count_ones(), self.len())
    }
}
