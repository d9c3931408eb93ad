//! Minimal packed bit vector for the dense parts of F2 linear algebra.

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                v.flip(i);
            }
        }
        v
    }

    /// Number of addressable bits (a multiple of 64).
    pub fn capacity(&self) -> usize {
        self.words.len() * 64
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.capacity()).map(|i| self.get(i) as u8).collect()
    }

    pub fn to_bits_len(&self, len: usize) -> Vec<u8> {
        (0..len).map(|i| self.get(i) as u8).collect()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words
            .get(i / 64)
            .is_some_and(|w| (w >> (i % 64)) & 1 == 1)
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn set_grow(&mut self, i: usize) {
        if i / 64 >= self.words.len() {
            self.words.resize(i / 64 + 1, 0);
        }
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn xor_assign(&mut self, other: &BitVec) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor_assign_grow(&mut self, other: &BitVec) {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        self.xor_assign(other);
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops() {
        let mut a = BitVec::from_bits(&[1, 0, 1, 1]);
        assert!(a.get(0) && !a.get(1) && a.get(3));
        assert_eq!(a.first_one(), Some(0));
        let b = BitVec::from_bits(&[1, 0, 0, 1]);
        a.xor_assign(&b);
        assert_eq!(a.first_one(), Some(2));
        assert_eq!(a.count_ones(), 1);
        let mut c = BitVec::zeros(0);
        c.set_grow(130);
        assert!(c.get(130));
        assert!(!c.get(1000));
    }
}
