use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint train / validation / test partition of the priced blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stable fingerprint of the partition (FNV-1a over the sorted id lists).
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for (tag, ids) in [(b'T', &self.train), (b'V', &self.validation), (b'E', &self.test)] {
            for b in std::iter::once(tag).chain(ids.iter().flat_map(|id| id.bytes().chain(std::iter::once(0)))) {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        format!("{h:016x}")
    }
}

/// Splits 7:1:2 with half-up rounding: `round(0.7 N)` train,
/// `round(0.1 N)` validation, remainder test. Deterministic in `seed`
/// regardless of input order.
pub fn split_dataset(priced_block_ids: &[String], seed: u64) -> Result<DatasetSplit> {
    let n = priced_block_ids.len();
    if n < 10 {
        return Err(Error::validation(format!("need at least 10 priced blocks to split, got {n}")));
    }
    let mut ids = priced_block_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != n {
        return Err(Error::validation("duplicate ids in split input"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_train = (7 * n + 5) / 10;
    let n_val = (n + 5) / 10;
    let mut test = ids.split_off(n_train + n_val);
    let mut validation = ids.split_off(n_train);
    let mut train = ids;
    train.sort();
    validation.sort();
    test.sort();
    Ok(DatasetSplit { train, validation, test })
}
