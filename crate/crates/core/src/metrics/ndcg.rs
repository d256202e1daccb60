use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::run::RetrievalRun;
use crate::error::{Error, Result};
use crate::numeric::{mean, CompensatedSum};
use crate::proxy::SimilarityMatrix;

/// Discounted cumulative gain of relevances listed in rank order:
/// `Σ (2^s − 1) / log2(j + 1)` with `j` starting at 1.
pub fn dcg(relevances: &[f64]) -> f64 {
    relevances
        .iter()
        .enumerate()
        .map(|(j, &s)| (s.exp2() - 1.0) / ((j + 2) as f64).log2())
        .collect::<CompensatedSum>()
        .total()
}

/// nDCG of one query.
///
/// The relevant set holds the items scoring above `relevance_floor`; their
/// gains are taken in the order the run ranks them and normalised by the
/// DCG of the same gains sorted descending. A query without relevant items
/// scores 0.
pub fn ndcg_query(
    run: &RetrievalRun,
    sim: &SimilarityMatrix,
    q: usize,
    relevance_floor: f64,
) -> f64 {
    let mut relevant: Vec<(usize, u32, f64)> = sim
        .row(q)
        .iter()
        .filter(|&&(_, s)| s > relevance_floor)
        .map(|&(i, s)| (run.position(q, i as usize), i, s))
        .collect();
    if relevant.is_empty() {
        return 0.0;
    }
    relevant.sort_unstable_by_key(|&(pos, _, _)| pos);
    let gains: Vec<f64> = relevant.iter().map(|&(_, _, s)| s).collect();
    relevant.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)));
    let ideal: Vec<f64> = relevant.iter().map(|&(_, _, s)| s).collect();
    if gains == ideal {
        return 1.0;
    }
    (dcg(&gains) / dcg(&ideal)).clamp(0.0, 1.0)
}

/// Per-query nDCG for a whole run. The run and matrix must share id orders
/// (see [`RetrievalRun::aligned`]).
pub fn ndcg_per_query(
    run: &RetrievalRun,
    sim: &SimilarityMatrix,
    relevance_floor: f64,
) -> Result<Vec<f64>> {
    check_shapes(run, sim)?;
    if !(0.0..1.0).contains(&relevance_floor) {
        return Err(Error::InvalidConfig(format!(
            "relevance floor must lie in [0, 1), got {relevance_floor}"
        )));
    }
    Ok((0..run.num_queries())
        .into_par_iter()
        .map(|q| ndcg_query(run, sim, q, relevance_floor))
        .collect())
}

pub(crate) fn check_shapes(run: &RetrievalRun, sim: &SimilarityMatrix) -> Result<()> {
    if run.query_ids() != sim.query_ids() || run.item_ids() != sim.item_ids() {
        let mut offenders: Vec<String> = run
            .query_ids()
            .iter()
            .zip(sim.query_ids())
            .chain(run.item_ids().iter().zip(sim.item_ids()))
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.clone())
            .take(5)
            .collect();
        if offenders.is_empty() {
            offenders.push(format!(
                "shape {}x{} vs {}x{}",
                run.num_queries(),
                run.num_items(),
                sim.num_queries(),
                sim.num_items()
            ));
        }
        return Err(Error::IdMismatch(offenders));
    }
    Ok(())
}

/// Both directions' nDCG and their combination.
#[derive(Debug, Clone, PartialEq)]
pub struct NdcgScores {
    pub video_to_text: Vec<f64>,
    pub text_to_video: Vec<f64>,
}

impl NdcgScores {
    pub fn video_to_text_mean(&self) -> f64 {
        mean(self.video_to_text.iter().copied()).unwrap_or(0.0)
    }

    pub fn text_to_video_mean(&self) -> f64 {
        mean(self.text_to_video.iter().copied()).unwrap_or(0.0)
    }

    /// Half the mean video-query nDCG plus half the mean caption-query nDCG.
    pub fn combined(&self) -> f64 {
        0.5 * self.video_to_text_mean() + 0.5 * self.text_to_video_mean()
    }
}

/// nDCG over both retrieval directions. `v2t_sim` is video-by-caption and
/// `t2v_sim` caption-by-video, each aligned with its run.
pub fn ndcg_overall(
    v2t: &RetrievalRun,
    v2t_sim: &SimilarityMatrix,
    t2v: &RetrievalRun,
    t2v_sim: &SimilarityMatrix,
    relevance_floor: f64,
) -> Result<NdcgScores> {
    Ok(NdcgScores {
        video_to_text: ndcg_per_query(v2t, v2t_sim, relevance_floor)?,
        text_to_video: ndcg_per_query(t2v, t2v_sim, relevance_floor)?,
    })
}

/// Combined nDCG of uniformly random rankings, averaged over `permutations`
/// seeded draws. `sim` is video-by-caption.
pub fn random_ranking_ndcg(sim: &SimilarityMatrix, permutations: usize, seed: u64) -> Result<f64> {
    if permutations == 0 {
        return Err(Error::InvalidConfig("need at least one permutation".into()));
    }
    let t2v_sim = sim.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = |nq: usize, ni: usize| -> Vec<Vec<usize>> {
        (0..nq)
            .map(|_| {
                let mut r: Vec<usize> = (0..ni).collect();
                r.shuffle(&mut rng);
                r
            })
            .collect()
    };
    let mut totals = CompensatedSum::new();
    for _ in 0..permutations {
        let v2t = RetrievalRun::from_rankings(
            sim.query_ids().to_vec(),
            sim.item_ids().to_vec(),
            shuffled(sim.num_queries(), sim.num_items()),
        )?;
        let t2v = RetrievalRun::from_rankings(
            t2v_sim.query_ids().to_vec(),
            t2v_sim.item_ids().to_vec(),
            shuffled(t2v_sim.num_queries(), t2v_sim.num_items()),
        )?;
        totals.add(ndcg_overall(&v2t, sim, &t2v, &t2v_sim, 0.0)?.combined());
    }
    Ok(totals.total() / permutations as f64)
}
