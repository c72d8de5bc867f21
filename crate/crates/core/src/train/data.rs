//! Toy training tuples: ground truth, frontal guide, degraded observation and landmarks.

use crate::degrade::{degrade, sample_params_for_size, DegradationParams};
use crate::error::{Error, Result};
use crate::image::{Image, LandmarkSet};
use crate::toyface::{gen_toy_face, ToyFaceSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stream(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Test => 2,
        }
    }
}

/// Independent generator for item `index` of `stream` under `root`.
pub fn item_rng(root: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream((stream << 32) | index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub identity: u64,
    pub target: Image,
    pub guide: Image,
    pub degraded: Image,
    pub lm_target: LandmarkSet,
    pub lm_guide: LandmarkSet,
    pub params: DegradationParams,
}

impl SamplePair {
    /// Mirror every image and landmark set.
    pub fn flipped(&self) -> SamplePair {
        SamplePair {
            identity: self.identity,
            target: self.target.flip_horizontal(),
            guide: self.guide.flip_horizontal(),
            degraded: self.degraded.flip_horizontal(),
            lm_target: self.lm_target.flip_horizontal(),
            lm_guide: self.lm_guide.flip_horizontal(),
            params: self.params,
        }
    }

    /// The same observation paired with another pair's guide.
    pub fn with_guide_of(&self, other: &SamplePair) -> SamplePair {
        SamplePair { guide: other.guide.clone(), lm_guide: other.lm_guide.clone(), ..self.clone() }
    }
}

/// Render, guide and degrade item `index` of a split.
pub fn make_pair(root: u64, split: Split, index: u64, size: usize) -> Result<SamplePair> {
    make_pair_with(root, split, index, size, None)
}

/// [`make_pair`], optionally replacing the sampled degradation with `fixed`.
/// Faces and noise are the same either way.
pub fn make_pair_with(
    root: u64,
    split: Split,
    index: u64,
    size: usize,
    fixed: Option<DegradationParams>,
) -> Result<SamplePair> {
    let mut rng = item_rng(root, split.stream(), index);
    let identity: u64 = rng.random();
    let spec = ToyFaceSpec::sample(identity, size, &mut rng);
    let (target, lm_target) = gen_toy_face(&spec)?;
    let (guide, lm_guide) = gen_toy_face(&ToyFaceSpec::frontal(identity, size))?;
    let sampled = sample_params_for_size(&mut rng, size, size);
    let params = fixed.unwrap_or(sampled);
    let degraded = degrade(&target, &params, &mut rng)?;
    Ok(SamplePair { identity, target, guide, degraded, lm_target, lm_guide, params })
}

pub fn build_dataset(root: u64, split: Split, count: usize, size: usize) -> Result<Vec<SamplePair>> {
    if count == 0 {
        return Err(Error::Config("dataset must contain at least one pair".into()));
    }
    (0..count as u64).map(|i| make_pair(root, split, i, size)).collect()
}

/// Re-pair every observation with the guide of the next item (a different identity).
pub fn with_random_guides(data: &[SamplePair]) -> Vec<SamplePair> {
    let n = data.len();
    (0..n).map(|i| data[i].with_guide_of(&data[(i + 1) % n])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_reproducible_and_distinct() {
        let a = make_pair(5, Split::Train, 3, 32).unwrap();
        assert_eq!(a, make_pair(5, Split::Train, 3, 32).unwrap());
        let b = make_pair(5, Split::Test, 3, 32).unwrap();
        assert_ne!(a.identity, b.identity);
        assert!(a.params.in_sampling_sets());
        assert_eq!(a.guide, gen_toy_face(&ToyFaceSpec::frontal(a.identity, 32)).unwrap().0);
    }

    #[test]
    fn random_guides_change_identity() {
        let d = build_dataset(1, Split::Train, 3, 32).unwrap();
        let r = with_random_guides(&d);
        for (x, y) in d.iter().zip(&r) {
            assert_eq!(x.target, y.target);
            assert_ne!(x.guide, y.guide);
        }
        assert!(build_dataset(1, Split::Train, 0, 32).is_err());
    }
}
