//! Dense bit vectors over GF(2) and an incremental elimination basis.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec{:?}", self.ones().collect::<Vec<_>>())
    }
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_indices(len: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(len);
        for i in idx {
            v.flip(i);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, b: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if b {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    #[inline]
    pub fn xor_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn and_parity(&self, other: &BitVec) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(k, w)| k * 64 + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(k * 64 + t)
                }
            })
        })
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

/// Row basis kept in echelon form keyed by leading bit, with an optional
/// record of which inserted rows each basis row combines.
#[derive(Clone, Debug, Default)]
pub struct Basis {
    rows: Vec<(usize, BitVec, BitVec)>,
    inserted: usize,
    track: usize,
}

impl Basis {
    /// `track` is the maximum number of insertions whose combinations are recorded.
    pub fn new(track: usize) -> Self {
        Basis {
            rows: Vec::new(),
            inserted: 0,
            track,
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` in place; returns the combination of inserted rows used.
    pub fn reduce(&self, v: &mut BitVec) -> BitVec {
        let mut combo = BitVec::zeros(self.track);
        for (pivot, row, c) in &self.rows {
            if v.get(*pivot) {
                v.xor_assign(row);
                combo.xor_assign(c);
            }
        }
        combo
    }

    /// Inserts `v`; returns false if it was already in the span.
    pub fn insert(&mut self, mut v: BitVec) -> bool {
        let mut combo = self.reduce(&mut v);
        let id = self.inserted;
        self.inserted += 1;
        if id < self.track {
            combo.flip(id);
        }
        match v.first_one() {
            None => false,
            Some(pivot) => {
                // Keep rows fully reduced against the new pivot so `reduce` is single-pass.
                for (_, row, c) in &mut self.rows {
                    if row.get(pivot) {
                        row.xor_assign(&v);
                        c.xor_assign(&combo);
                    }
                }
                self.rows.push((pivot, v, combo));
                true
            }
        }
    }

    pub fn contains(&self, v: &BitVec) -> bool {
        let mut w = v.clone();
        self.reduce(&mut w);
        w.is_zero()
    }
}

pub fn rank(rows: &[BitVec]) -> usize {
    let mut b = Basis::new(0);
    for r in rows {
        b.insert(r.clone());
    }
    b.rank()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_tracks_combinations() {
        let a = BitVec::from_indices(10, [0, 3]);
        let b = BitVec::from_indices(10, [3, 7]);
        let mut basis = Basis::new(4);
        assert!(basis.insert(a));
        assert!(basis.insert(b));
        let mut t = BitVec::from_indices(10, [0, 7]);
        let combo = basis.reduce(&mut t);
        assert!(t.is_zero());
        assert_eq!(combo.ones().collect::<Vec<_>>(), vec![0, 1]);
        assert!(!basis.insert(BitVec::from_indices(10, [0, 7])));
    }

    #[test]
    fn ones_iterates_across_words() {
        let v = BitVec::from_indices(200, [1, 64, 130, 199]);
        assert_eq!(v.ones().collect::<Vec<_>>(), vec![1, 64, 130, 199]);
        assert_eq!(v.count_ones(), 4);
    }
}
