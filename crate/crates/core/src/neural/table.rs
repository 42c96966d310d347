use super::model::FeedbackModel;
use crate::error::{Error, Result};
use crate::numerics::Complex64;

pub const MAX_TABLE_BITS: usize = 20;

/// Every transmitter-network output, indexed by feedback word.
///
/// Words are enumerated lexicographically with `-1` before `+1` and the first bit most
/// significant, so index `i` has bit `k` equal to `+1` iff bit `B-1-k` of `i` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderTable {
    bits: usize,
    entries: Vec<Vec<Complex64>>,
}

impl DecoderTable {
    pub fn build(model: &FeedbackModel) -> Result<Self> {
        let bits = model.bits();
        if bits > MAX_TABLE_BITS {
            return Err(Error::TableTooLarge {
                bits,
                max_bits: MAX_TABLE_BITS,
            });
        }
        let entries = (0..1usize << bits)
            .map(|i| model.decoder_forward(&word_for_index(i, bits)))
            .collect::<Result<_>>()?;
        Ok(Self { bits, entries })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, index: usize) -> &[Complex64] {
        &self.entries[index]
    }

    pub fn entries(&self) -> &[Vec<Complex64>] {
        &self.entries
    }

    pub fn lookup(&self, b: &[f64]) -> Result<&[Complex64]> {
        if b.len() != self.bits {
            return Err(Error::shape("DecoderTable::lookup", self.bits, b.len()));
        }
        Ok(&self.entries[index_of_word(b)])
    }
}

/// Bipolar word for a table index.
pub fn word_for_index(index: usize, bits: usize) -> Vec<f64> {
    (0..bits)
        .map(|k| {
            if index >> (bits - 1 - k) & 1 == 1 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// Table index for a bipolar word (`>= 0` counts as `+1`).
pub fn index_of_word(b: &[f64]) -> usize {
    b.iter()
        .fold(0, |acc, &v| (acc << 1) | usize::from(v >= 0.0))
}
