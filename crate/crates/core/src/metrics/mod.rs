//! Retrieval metrics under instance and semantic relevance, and the
//! diagnostics built on them.

mod diagnostics;
mod ndcg;
mod recall;
mod report;
mod run;

pub use diagnostics::{
    curve_deviations, default_thresholds, human_agreement, human_study_select, pearson,
    proxy_correlation, proxy_ordering, relevance_curve, AgreementCounts, CurveDeviation,
    ProxyCorrelation,
};
pub use ndcg::{dcg, ndcg_overall, ndcg_per_query, ndcg_query, random_ranking_ndcg, NdcgScores};
pub use recall::{
    average_precision, corresponding_ranks, geometric_mean_recall, ivr_bounds,
    mean_average_precision, mean_rank, median_rank, recall_at_k, IvrBounds, DEFAULT_KS,
};
pub use report::{align_similarity, evaluate, EvalOptions, Evaluation, MetricReport};
pub use run::{Correspondence, RetrievalRun};
