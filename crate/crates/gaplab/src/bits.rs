//! Computational-basis labels for an `n`-spin system.

use std::fmt;

/// An `n`-bit string labelling a computational basis state.
///
/// Bit value 1 means "spin down" in the sigma_z convention used throughout:
/// a bit with value 0 carries sigma_z eigenvalue +1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn zeros(n: usize) -> Self {
        BitString { bits: vec![false; n] }
    }

    pub fn ones(n: usize) -> Self {
        BitString { bits: vec![true; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    /// Decode the low `n` bits of `index` (bit i of the integer = bit i of the string).
    pub fn from_index(index: usize, n: usize) -> Self {
        BitString {
            bits: (0..n).map(|i| (index >> i) & 1 == 1).collect(),
        }
    }

    /// Inverse of [`from_index`](Self::from_index); only meaningful for n <= 63.
    pub fn to_index(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| acc | ((b as usize) << i))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    /// Copy with bit `i` flipped (the paper-style single-spin-flip neighbour).
    pub fn flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.flip(i);
        out
    }

    pub fn complemented(&self) -> Self {
        BitString {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn hamming_weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for idx in 0..32 {
            let z = BitString::from_index(idx, 5);
            assert_eq!(z.to_index(), idx);
        }
    }

    #[test]
    fn flip_and_weight() {
        let z = BitString::zeros(4).flipped(2);
        assert_eq!(z.to_string(), "0010");
        assert_eq!(z.hamming_weight(), 1);
        assert_eq!(z.complemented().hamming_weight(), 3);
    }
}
