//! Class balancing by duplicating minority-class feature vectors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::FeatureVector;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplerError {
    #[error("cannot balance single-class dataset")]
    SingleClass,
    #[error("vector {0} has no label")]
    Unlabeled(String),
}

/// Counts `(positive, negative)` labels.
pub fn class_counts(dataset: &[FeatureVector]) -> Result<(usize, usize), SamplerError> {
    let mut pos = 0;
    let mut neg = 0;
    for v in dataset {
        match v.label {
            Some(true) => pos += 1,
            Some(false) => neg += 1,
            None => return Err(SamplerError::Unlabeled(v.source_id.clone())),
        }
    }
    Ok((pos, neg))
}

/// Duplicates minority-class vectors until both classes have the same count.
///
/// With `M` majority and `m` minority vectors, every minority vector gets
/// `M / m - 1` extra copies, then `M % m` distinct minority vectors chosen
/// with the seeded generator get one more. The output keeps the originals in
/// input order, followed by the copies.
pub fn oversample_duplicate(
    dataset: &[FeatureVector],
    seed: u64,
) -> Result<Vec<FeatureVector>, SamplerError> {
    let (pos, neg) = class_counts(dataset)?;
    if pos == 0 || neg == 0 {
        return Err(SamplerError::SingleClass);
    }
    let minority_label = pos < neg;
    let minority: Vec<usize> = dataset
        .iter()
        .enumerate()
        .filter(|(_, v)| v.label == Some(minority_label))
        .map(|(i, _)| i)
        .collect();
    let (major, minor) = (pos.max(neg), pos.min(neg));

    let mut out = Vec::with_capacity(2 * major);
    out.extend_from_slice(dataset);
    for _ in 1..major / minor {
        out.extend(minority.iter().map(|&i| dataset[i].clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extra = rand::seq::index::sample(&mut rng, minor, major % minor).into_vec();
    extra.sort_unstable();
    out.extend(extra.into_iter().map(|k| dataset[minority[k]].clone()));
    Ok(out)
}
