use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::DatasetRecord;
use super::PipelineError;
use crate::rng::{name_tag, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            n_train: 0,
            n_val: 0,
            n_test: 0,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }
}

/// Seeded shuffle followed by contiguous slicing into train/val/test.
/// Records beyond the requested total are dropped.
pub fn split_dataset(
    records: &[DatasetRecord],
    spec: &SplitSpec,
) -> Result<(Vec<DatasetRecord>, Vec<DatasetRecord>, Vec<DatasetRecord>), PipelineError> {
    let requested = spec.total();
    if requested > records.len() {
        return Err(PipelineError::SizeExceeded {
            requested,
            available: records.len(),
        });
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut stream(spec.seed, &[name_tag("split")]));

    let pick = |range: std::ops::Range<usize>| -> Vec<DatasetRecord> {
        order[range].iter().map(|&i| records[i].clone()).collect()
    };
    let train = pick(0..spec.n_train);
    let val = pick(spec.n_train..spec.n_train + spec.n_val);
    let test = pick(spec.n_train + spec.n_val..requested);
    Ok((train, val, test))
}
