#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semsim::corpus::SynsetMap;
use semsim::proxy::{ProcessedCorpus, SimilarityMatrix};
use semsim::textproc::{Pipeline, Pos};
use semsim::training::{EmbeddingModel, Features, Triplet};

/// Thirty content words the built-in lexicon knows, plus filler that the
/// stop list removes.
pub const VOCAB: [&str; 30] = [
    "stir", "mix", "cut", "slice", "pour", "add", "fry", "chop", "boil", "bake", "pan", "pot",
    "onion", "tomato", "salt", "water", "oil", "egg", "bowl", "knife", "dough", "soup", "pepper",
    "cheese", "bread", "oven", "plate", "sauce", "butter", "garlic",
];
const FILLER: [&str; 5] = ["the", "a", "in", "into", "with"];

pub fn random_caption<R: Rng>(rng: &mut R) -> String {
    let len = rng.gen_range(1..=7);
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.25) {
                *FILLER.choose(rng).unwrap()
            } else {
                *VOCAB.choose(rng).unwrap()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// `captions` captions spread over videos of one to three captions each.
/// Every caption keeps at least one content word.
pub fn random_corpus<R: Rng>(rng: &mut R, captions: usize) -> ProcessedCorpus {
    let pipeline = Pipeline::default();
    let mut out = Vec::with_capacity(captions);
    let mut video = 0;
    while out.len() < captions {
        let per_video = rng.gen_range(1..=3).min(captions - out.len());
        for _ in 0..per_video {
            let mut text = random_caption(rng);
            text.push(' ');
            text.push_str(VOCAB.choose(rng).unwrap());
            let id = out.len();
            out.push(pipeline.process_text(&format!("c{id:04}"), &format!("v{video:04}"), &text));
        }
        video += 1;
    }
    ProcessedCorpus::from_processed(out).unwrap()
}

/// Every vocabulary word mapped, under its lexicon tag, to one of a few synsets.
pub fn random_synsets<R: Rng>(rng: &mut R) -> SynsetMap {
    let pipeline = Pipeline::default();
    let mut map = SynsetMap::new();
    for w in VOCAB {
        let tagged = pipeline.process_text("x", "x", w);
        let pos = tagged.sequence.first().map(|t| t.pos).unwrap_or(Pos::Other);
        let id = format!("s{}", rng.gen_range(0..8));
        let _ = map.insert(w, pos, id.as_str().into());
    }
    map
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:03}")).collect()
}

/// Square matrix with a unit diagonal and random off-diagonal scores drawn
/// from `levels` (zero included so some items are irrelevant).
pub fn random_square_sim<R: Rng>(rng: &mut R, n: usize, levels: &[f64]) -> SimilarityMatrix {
    let scores: Vec<f64> = (0..n * n)
        .map(|k| {
            if k / n == k % n {
                1.0
            } else {
                *levels.choose(rng).unwrap()
            }
        })
        .collect();
    SimilarityMatrix::from_dense(ids("q", n), ids("i", n), &scores).unwrap()
}

pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// A random model, features and an active batch with a non-vanishing
/// gradient and no triplet near the hinge.
pub fn gradient_point(seed: u64) -> (EmbeddingModel, Features, Vec<Triplet>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let model = EmbeddingModel::random(5, 4, 3, r.gen_range(0.1..1.0), r.gen()).unwrap();
        let features = Features {
            video_ids: ids("v", 4),
            caption_ids: ids("c", 6),
            video: ndarray::Array2::from_shape_fn((4, 5), |_| r.gen_range(-1.0..1.0)),
            caption: ndarray::Array2::from_shape_fn((6, 4), |_| r.gen_range(-1.0..1.0)),
        };
        let batch: Vec<Triplet> = (0..4)
            .map(|_| {
                let positive = r.gen_range(0..6);
                let negative = (positive + r.gen_range(1..6)) % 6;
                Triplet {
                    anchor: r.gen_range(0..4),
                    positive,
                    negative,
                }
            })
            .collect();
        // Skip points within 1e-3 of the hinge on either side.
        let near_hinge = batch.iter().any(|t| {
            let mut wider = model.clone();
            wider.margin += 1e-3;
            let mut narrower = model.clone();
            narrower.margin -= 1e-3;
            let active = |m: &EmbeddingModel| m.batch_loss(&[*t], &features).unwrap() > 0.0;
            active(&wider) != active(&narrower)
        });
        // Mirrored triplets can cancel exactly; a vanishing gradient makes
        // the relative error meaningless.
        let (loss, grad) = model.loss_gradient(&batch, &features).unwrap();
        let norm = grad
            .w_video
            .iter()
            .chain(grad.w_text.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        if loss > 0.0 && norm > 1e-6 && !near_hinge {
            return (model, features, batch);
        }
    }
}

/// `|analytic - numeric| / max(|analytic|, |numeric|)` over both maps, with
/// central differences of step 1e-5.
pub fn relative_gradient_error(
    model: &EmbeddingModel,
    features: &Features,
    batch: &[Triplet],
) -> f64 {
    let (_, grad) = model.loss_gradient(batch, features).unwrap();
    let h = 1e-5;
    let (mut diff, mut na, mut nn) = (0.0f64, 0.0f64, 0.0f64);
    for video in [true, false] {
        let (rows, cols) = if video {
            model.w_video.dim()
        } else {
            model.w_text.dim()
        };
        for i in 0..rows {
            for j in 0..cols {
                let eval = |delta: f64| {
                    let mut m = model.clone();
                    let w = if video { &mut m.w_video } else { &mut m.w_text };
                    w[[i, j]] += delta;
                    m.batch_loss(batch, features).unwrap()
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let analytic = if video {
                    grad.w_video[[i, j]]
                } else {
                    grad.w_text[[i, j]]
                };
                diff += (numeric - analytic).powi(2);
                na += analytic.powi(2);
                nn += numeric.powi(2);
            }
        }
    }
    diff.sqrt() / na.sqrt().max(nn.sqrt())
}
