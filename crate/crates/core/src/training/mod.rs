//! Thresholded triplet sampling and a small linear embedding trainer.

mod model;
mod sampler;
pub mod synthetic;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use model::{triplet_loss, EmbeddingModel, Features, Gradient, CHECKPOINT_MAGIC};
pub use sampler::{sample_triplets, Triplet, TripletSampler};

use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalOptions, Evaluation, MetricReport, RetrievalRun};
use crate::proxy::SimilarityMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Positives satisfy `S ≥ threshold`, negatives `S < threshold`.
    pub threshold: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Fresh triplets drawn at the start of every epoch.
    pub triplets_per_epoch: usize,
    /// Size of the fixed set the loss trace is measured on.
    pub monitor_triplets: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            threshold: 1.0,
            epochs: 20,
            lr: 0.5,
            batch_size: 32,
            triplets_per_epoch: 2000,
            monitor_triplets: 500,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.triplets_per_epoch == 0 || self.monitor_triplets == 0 {
            return Err(Error::InvalidConfig(
                "batch and triplet counts must be positive".into(),
            ));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be non-negative, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    /// Mean loss on the monitor triplets after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Minibatch SGD over triplets resampled every epoch.
///
/// The loss trace is measured on a fixed monitor set drawn once from the
/// same pools, so it is comparable across epochs. Given the seed the run
/// is fully deterministic.
pub fn train(
    mut model: EmbeddingModel,
    features: &Features,
    sim: &SimilarityMatrix,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    model.validate()?;
    if features.video.nrows() != sim.num_queries() || features.caption.nrows() != sim.num_items() {
        return Err(Error::InvalidInput(format!(
            "features cover {} videos and {} captions, matrix is {}x{}",
            features.video.nrows(),
            features.caption.nrows(),
            sim.num_queries(),
            sim.num_items()
        )));
    }
    let sampler = TripletSampler::new(sim, config.threshold)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let monitor = sampler.sample_n(
        config.monitor_triplets,
        &mut ChaCha8Rng::seed_from_u64(rng.gen()),
    );
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let triplets = sampler.sample_n(config.triplets_per_epoch, &mut rng);
        for batch in triplets.chunks(config.batch_size) {
            let (_, grad) = model.loss_gradient(batch, features)?;
            model.apply(&grad, config.lr);
        }
        loss_trace.push(model.batch_loss(&monitor, features)?);
    }
    Ok(TrainOutcome { model, loss_trace })
}

/// Ranks by embedding similarity in both directions and evaluates against
/// every supplied video-by-caption matrix.
pub fn evaluate_trained(
    model: &EmbeddingModel,
    features: &Features,
    pairs: &[(String, String)],
    sims: &[(String, SimilarityMatrix)],
    options: &EvalOptions,
) -> Result<MetricReport> {
    let scores = model.score_matrix(features)?;
    let v2t = RetrievalRun::from_scores(
        features.video_ids.clone(),
        features.caption_ids.clone(),
        scores.iter().copied().collect(),
    )?;
    let t2v = v2t.transpose()?;
    evaluate(
        &Evaluation {
            video_to_text: Some(&v2t),
            text_to_video: Some(&t2v),
            pairs,
            sims,
        },
        options,
    )
}
