use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seeded random permutation over one code block.
///
/// `interleave` produces `out[i] = in[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    seed: u64,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { perm, seed }
    }

    pub fn identity(len: usize) -> Self {
        Self {
            perm: (0..len).collect(),
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.perm.len() {
            return Err(Error::Length {
                what: "interleaver block",
                expected: self.perm.len(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn interleave<T: Copy>(&self, input: &[T]) -> Result<Vec<T>> {
        self.check(input.len())?;
        Ok(self.perm.iter().map(|&p| input[p]).collect())
    }

    pub fn deinterleave<T: Copy + Default>(&self, input: &[T]) -> Result<Vec<T>> {
        self.check(input.len())?;
        let mut out = vec![T::default(); input.len()];
        for (&p, &v) in self.perm.iter().zip(input) {
            out[p] = v;
        }
        Ok(out)
    }

    /// Applies the permutation block by block to a concatenation of blocks.
    pub fn interleave_blocks<T: Copy>(&self, input: &[T]) -> Result<Vec<T>> {
        let n = self.perm.len();
        if n == 0 || input.len() % n != 0 {
            return Err(Error::Length {
                what: "interleaver blocks",
                expected: input.len().div_ceil(n.max(1)) * n,
                got: input.len(),
            });
        }
        let mut out = Vec::with_capacity(input.len());
        for block in input.chunks_exact(n) {
            out.extend(self.perm.iter().map(|&p| block[p]));
        }
        Ok(out)
    }

    pub fn deinterleave_blocks<T: Copy + Default>(&self, input: &[T]) -> Result<Vec<T>> {
        let n = self.perm.len();
        if n == 0 || input.len() % n != 0 {
            return Err(Error::Length {
                what: "interleaver blocks",
                expected: input.len().div_ceil(n.max(1)) * n,
                got: input.len(),
            });
        }
        let mut out = Vec::with_capacity(input.len());
        for block in input.chunks_exact(n) {
            out.extend(self.deinterleave(block)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_is_noop() {
        let il = Interleaver::identity(5);
        assert_eq!(il.interleave(&[1, 2, 3, 4, 5]).unwrap(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn fixed_seed_fixture() {
        let il = Interleaver::new(16, 7);
        assert_eq!(il, Interleaver::new(16, 7));
        assert_eq!(il.permutation(), &FIXTURE_16_SEED7);
    }

    const FIXTURE_16_SEED7: [usize; 16] = [12, 11, 5, 2, 9, 13, 15, 10, 3, 4, 8, 7, 14, 1, 0, 6];

    #[test]
    fn length_mismatch() {
        let il = Interleaver::new(8, 1);
        assert!(il.interleave(&[0u8; 7]).is_err());
        assert!(il.deinterleave(&[0.0f64; 9]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(seed in any::<u64>(), vals in proptest::collection::vec(-50.0f64..50.0, 1..300)) {
            let il = Interleaver::new(vals.len(), seed);
            let back = il.deinterleave(&il.interleave(&vals).unwrap()).unwrap();
            prop_assert_eq!(back, vals);
        }
    }
}
