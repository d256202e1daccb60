use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proxy::SimilarityMatrix;

/// An (anchor video, positive caption, negative caption) triple, as indices
/// into a video-by-caption similarity matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

impl Triplet {
    /// `(video id, positive caption id, negative caption id)`.
    pub fn ids<'a>(&self, sim: &'a SimilarityMatrix) -> (&'a str, &'a str, &'a str) {
        (
            &sim.query_ids()[self.anchor],
            &sim.item_ids()[self.positive],
            &sim.item_ids()[self.negative],
        )
    }

    /// `S(anchor, positive) ≥ T > S(anchor, negative)`.
    pub fn is_valid(&self, sim: &SimilarityMatrix, threshold: f64) -> bool {
        sim.get(self.anchor, self.positive) >= threshold
            && sim.get(self.anchor, self.negative) < threshold
    }
}

/// Per-anchor positive pools for a threshold, ready for repeated sampling.
#[derive(Debug, Clone)]
pub struct TripletSampler {
    num_items: usize,
    /// `(anchor, sorted positives)` for anchors with both pools non-empty.
    anchors: Vec<(usize, Vec<usize>)>,
}

impl TripletSampler {
    pub fn new(sim: &SimilarityMatrix, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in [0, 1], got {threshold}"
            )));
        }
        let ni = sim.num_items();
        let mut empty_negatives = 0;
        let mut anchors = Vec::new();
        for q in 0..sim.num_queries() {
            let positives: Vec<usize> = if threshold <= 0.0 {
                (0..ni).collect()
            } else {
                sim.row(q)
                    .iter()
                    .filter(|&&(_, s)| s >= threshold)
                    .map(|&(i, _)| i as usize)
                    .collect()
            };
            if positives.len() == ni {
                empty_negatives += 1;
            } else if !positives.is_empty() {
                anchors.push((q, positives));
            }
        }
        if anchors.is_empty() {
            let reason = if empty_negatives > 0 {
                "empty negative pool"
            } else {
                "empty positive pool"
            };
            return Err(Error::NoValidTriplet(format!(
                "{reason} for every anchor at T = {threshold}"
            )));
        }
        Ok(TripletSampler {
            num_items: ni,
            anchors,
        })
    }

    /// Anchors that can produce a triplet.
    pub fn num_anchors(&self) -> usize {
        self.anchors.len()
    }

    /// Uniform anchor, then uniform positive and uniform negative.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Triplet {
        let (anchor, positives) = &self.anchors[rng.gen_range(0..self.anchors.len())];
        let positive = positives[rng.gen_range(0..positives.len())];
        // Map a draw over the complement onto item indices.
        let mut negative = rng.gen_range(0..self.num_items - positives.len());
        for &p in positives {
            if p <= negative {
                negative += 1;
            } else {
                break;
            }
        }
        Triplet {
            anchor: *anchor,
            positive,
            negative,
        }
    }

    pub fn sample_n<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Triplet> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// `n` seeded triplets with `S(anchor, positive) ≥ T` and `S(anchor, negative) < T`.
pub fn sample_triplets(
    sim: &SimilarityMatrix,
    threshold: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<Triplet>> {
    let sampler = TripletSampler::new(sim, threshold)?;
    Ok(sampler.sample_n(n, &mut ChaCha8Rng::seed_from_u64(seed)))
}
