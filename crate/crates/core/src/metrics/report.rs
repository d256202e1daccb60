use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ndcg::ndcg_per_query;
use super::recall::{
    corresponding_ranks, geometric_mean_recall, ivr_bounds, mean_average_precision, mean_rank,
    median_rank, recall_at_k, DEFAULT_KS,
};
use super::run::{Correspondence, RetrievalRun};
use crate::error::{Error, Result};
use crate::numeric::mean;
use crate::proxy::SimilarityMatrix;

/// Flat metric values keyed like `ndcg/bow`, `v2t/R@1` or
/// `t2v/bounds/syn/upper`, plus per-query nDCG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(flatten)]
    pub metrics: BTreeMap<String, f64>,
    /// `ndcg/<proxy>/<direction>` → query id → nDCG.
    pub per_query: BTreeMap<String, BTreeMap<String, f64>>,
    /// `v2t`, `t2v` or `both`.
    pub direction: String,
}

impl MetricReport {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub ndcg: bool,
    /// Recall@K plus median and mean rank.
    pub recall: bool,
    pub gmr: bool,
    /// mAP with relevance `S ≥ T`.
    pub map_threshold: Option<f64>,
    /// IVR bounds with equivalence `S > T`.
    pub bounds_threshold: Option<f64>,
    pub relevance_floor: f64,
    pub ks: Vec<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            ndcg: true,
            recall: true,
            gmr: true,
            map_threshold: None,
            bounds_threshold: None,
            relevance_floor: 0.0,
            ks: DEFAULT_KS.to_vec(),
        }
    }
}

/// Inputs to [`evaluate`]. Similarity matrices are video-by-caption and
/// are transposed for the caption-query direction.
pub struct Evaluation<'a> {
    pub video_to_text: Option<&'a RetrievalRun>,
    pub text_to_video: Option<&'a RetrievalRun>,
    /// `(video id, caption id)` pairs.
    pub pairs: &'a [(String, String)],
    /// `(proxy name, matrix)`.
    pub sims: &'a [(String, SimilarityMatrix)],
}

/// Reorders `sim` to the run's id order, requiring identical id sets.
pub fn align_similarity(sim: &SimilarityMatrix, run: &RetrievalRun) -> Result<SimilarityMatrix> {
    if sim.query_ids() == run.query_ids() && sim.item_ids() == run.item_ids() {
        return Ok(sim.clone());
    }
    if sim.num_queries() != run.num_queries() || sim.num_items() != run.num_items() {
        let known_q = sim.query_index();
        let known_i = sim.item_index();
        let mut offenders: Vec<String> = run
            .query_ids()
            .iter()
            .filter(|q| !known_q.contains_key(q.as_str()))
            .chain(
                run.item_ids()
                    .iter()
                    .filter(|i| !known_i.contains_key(i.as_str())),
            )
            .take(5)
            .cloned()
            .collect();
        if offenders.is_empty() {
            offenders.push(format!(
                "run is {}x{}, matrix is {}x{}",
                run.num_queries(),
                run.num_items(),
                sim.num_queries(),
                sim.num_items()
            ));
        }
        return Err(Error::IdMismatch(offenders));
    }
    sim.reindexed(run.query_ids(), run.item_ids())
}

pub fn evaluate(input: &Evaluation<'_>, options: &EvalOptions) -> Result<MetricReport> {
    let mut report = MetricReport {
        metrics: BTreeMap::new(),
        per_query: BTreeMap::new(),
        direction: match (input.video_to_text, input.text_to_video) {
            (Some(_), Some(_)) => "both",
            (Some(_), None) => "v2t",
            (None, Some(_)) => "t2v",
            (None, None) => return Err(Error::InvalidInput("no retrieval run supplied".into())),
        }
        .to_string(),
    };
    let transposed: Vec<(String, SimilarityMatrix)> = if input.text_to_video.is_some() {
        input
            .sims
            .iter()
            .map(|(p, s)| (p.clone(), s.transpose()))
            .collect()
    } else {
        Vec::new()
    };

    let directions = [
        ("v2t", input.video_to_text, input.sims),
        ("t2v", input.text_to_video, &transposed[..]),
    ];
    for (dir, run, sims) in directions {
        let Some(run) = run else { continue };
        let corr = Correspondence::from_pairs(input.pairs, run.query_ids(), run.item_ids())?;
        let ranks = corresponding_ranks(run, &corr)?;
        if options.recall {
            for &k in &options.ks {
                report
                    .metrics
                    .insert(format!("{dir}/R@{k}"), recall_at_k(&ranks, k));
            }
            report
                .metrics
                .insert(format!("{dir}/MedR"), median_rank(&ranks));
            report
                .metrics
                .insert(format!("{dir}/MeanR"), mean_rank(&ranks));
        }
        if options.gmr {
            report.metrics.insert(
                format!("{dir}/GMR"),
                geometric_mean_recall(&ranks, &options.ks),
            );
        }
        for (proxy, sim) in sims {
            let sim = align_similarity(sim, run)?;
            if options.ndcg {
                let per_query = ndcg_per_query(run, &sim, options.relevance_floor)?;
                let key = format!("ndcg/{proxy}/{dir}");
                report
                    .metrics
                    .insert(key.clone(), mean(per_query.iter().copied()).unwrap_or(0.0));
                report.per_query.insert(
                    key,
                    run.query_ids().iter().cloned().zip(per_query).collect(),
                );
            }
            if let Some(t) = options.map_threshold {
                let value = mean_average_precision(run, &sim.threshold(t));
                report
                    .metrics
                    .insert(format!("{dir}/mAP@{t}/{proxy}"), value);
            }
            if let Some(t) = options.bounds_threshold {
                let b = ivr_bounds(run, &corr, &sim, t, &options.ks)?;
                for (name, value) in [
                    ("lower", b.lower),
                    ("observed", b.observed),
                    ("upper", b.upper),
                ] {
                    report
                        .metrics
                        .insert(format!("{dir}/bounds/{proxy}/{name}"), value);
                }
            }
        }
    }
    if options.ndcg && report.direction == "both" {
        for (proxy, _) in input.sims {
            let v = report.metrics[&format!("ndcg/{proxy}/v2t")];
            let t = report.metrics[&format!("ndcg/{proxy}/t2v")];
            report
                .metrics
                .insert(format!("ndcg/{proxy}"), 0.5 * v + 0.5 * t);
        }
    }
    Ok(report)
}
