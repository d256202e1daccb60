//! Planted-cluster corpora for exercising the trainer without real data.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::model::Features;
use crate::error::{Error, Result};
use crate::proxy::SimilarityMatrix;

/// Shape of a synthetic corpus of one-caption videos split into clusters.
///
/// Each video and its caption share an instance vector; videos of a
/// cluster share a video prototype and their captions a separate text
/// prototype. Similarity is 1 for corresponding pairs, `within` plus up to
/// `jitter` inside a cluster and below `across` between clusters, so every
/// item is somewhat relevant but cluster mates are clearly more so.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedClusters {
    pub items: usize,
    pub clusters: usize,
    pub cluster_dims: usize,
    pub instance_dims: usize,
    /// Scale of the cluster prototypes.
    pub cluster_signal: f64,
    /// Scale of the shared instance component.
    pub instance_signal: f64,
    /// Scale of independent per-modality noise.
    pub noise: f64,
    pub within: f64,
    pub jitter: f64,
    pub across: f64,
}

impl Default for PlantedClusters {
    fn default() -> Self {
        PlantedClusters {
            items: 200,
            clusters: 10,
            cluster_dims: 8,
            instance_dims: 16,
            cluster_signal: 1.0,
            instance_signal: 1.0,
            noise: 0.1,
            within: 0.5,
            jitter: 0.4,
            across: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub features: Features,
    /// Video-by-caption similarity.
    pub sim: SimilarityMatrix,
    /// `(video id, caption id)`.
    pub pairs: Vec<(String, String)>,
    pub cluster_of: Vec<usize>,
}

impl PlantedClusters {
    pub fn generate(&self, seed: u64) -> Result<SyntheticCorpus> {
        if self.clusters == 0 || self.items < self.clusters {
            return Err(Error::InvalidConfig(
                "need at least one item per cluster".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.within)
            || self.jitter < 0.0
            || self.within + self.jitter >= 1.0
        {
            return Err(Error::InvalidConfig(
                "within-cluster similarity must stay inside [0, 1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.across) {
            return Err(Error::InvalidConfig(
                "across-cluster similarity must lie in [0, 1]".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = |rows: usize, cols: usize, scale: f64| {
            Array2::from_shape_fn((rows, cols), |_| {
                scale * rng.sample::<f64, _>(StandardNormal)
            })
        };
        let n = self.items;
        let (dc, di) = (self.cluster_dims, self.instance_dims);
        let video_protos = gauss(self.clusters, dc, self.cluster_signal);
        let text_protos = gauss(self.clusters, dc, self.cluster_signal);
        let instances = gauss(n, di, self.instance_signal);
        let video_noise = gauss(n, dc + di, self.noise);
        let text_noise = gauss(n, dc + di, self.noise);

        let cluster_of: Vec<usize> = (0..n).map(|i| i % self.clusters).collect();
        let assemble = |protos: &Array2<f64>, noise: &Array2<f64>| {
            let mut out = noise.clone();
            for i in 0..n {
                for d in 0..dc {
                    out[[i, d]] += protos[[cluster_of[i], d]];
                }
                for d in 0..di {
                    out[[i, dc + d]] += instances[[i, d]];
                }
            }
            out
        };
        let video = assemble(&video_protos, &video_noise);
        let caption = assemble(&text_protos, &text_noise);

        let mut scores = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                scores[i * n + j] = if i == j {
                    1.0
                } else if cluster_of[i] == cluster_of[j] {
                    self.within + self.jitter * rng.gen::<f64>()
                } else {
                    self.across * rng.gen::<f64>()
                };
            }
        }
        let video_ids: Vec<String> = (0..n).map(|i| format!("v{i:04}")).collect();
        let caption_ids: Vec<String> = (0..n).map(|i| format!("c{i:04}")).collect();
        let sim = SimilarityMatrix::from_dense(video_ids.clone(), caption_ids.clone(), &scores)?;
        let pairs = video_ids
            .iter()
            .cloned()
            .zip(caption_ids.iter().cloned())
            .collect();
        Ok(SyntheticCorpus {
            features: Features {
                video_ids,
                caption_ids,
                video,
                caption,
            },
            sim,
            pairs,
            cluster_of,
        })
    }
}
