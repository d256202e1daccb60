use super::ndcg::check_shapes;
use super::run::{Correspondence, RetrievalRun};
use crate::error::{Error, Result};
use crate::numeric::{mean, CompensatedSum};
use crate::proxy::SimilarityMatrix;

/// The usual cut-offs for Recall@K and its geometric mean.
pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

/// 1-based rank of the best-ranked corresponding item, per query.
pub fn corresponding_ranks(
    run: &RetrievalRun,
    correspondence: &Correspondence,
) -> Result<Vec<usize>> {
    if correspondence.len() != run.num_queries() {
        return Err(Error::InvalidInput(format!(
            "correspondence covers {} queries, run has {}",
            correspondence.len(),
            run.num_queries()
        )));
    }
    (0..run.num_queries())
        .map(|q| {
            correspondence
                .items(q)
                .iter()
                .map(|&i| run.position(q, i as usize) + 1)
                .min()
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "query {} has no corresponding item",
                        run.query_ids()[q]
                    ))
                })
        })
        .collect()
}

/// Percentage of queries whose corresponding item is within the top `k`.
pub fn recall_at_k(ranks: &[usize], k: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
}

/// Geometric mean of Recall@K over `ks`; 0 as soon as any recall is 0.
pub fn geometric_mean_recall(ranks: &[usize], ks: &[usize]) -> f64 {
    if ks.is_empty() {
        return 0.0;
    }
    let recalls: Vec<f64> = ks.iter().map(|&k| recall_at_k(ranks, k)).collect();
    if recalls.contains(&0.0) {
        return 0.0;
    }
    if recalls.iter().all(|&r| r == recalls[0]) {
        return recalls[0];
    }
    let log_mean = recalls
        .iter()
        .map(|r| r.ln())
        .collect::<CompensatedSum>()
        .total()
        / ks.len() as f64;
    log_mean.exp()
}

/// Median rank; the mean of the middle two for an even count.
pub fn median_rank(ranks: &[usize]) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

pub fn mean_rank(ranks: &[usize]) -> f64 {
    mean(ranks.iter().map(|&r| r as f64)).unwrap_or(0.0)
}

/// Average precision of one query given its relevant item indices.
pub fn average_precision(run: &RetrievalRun, q: usize, relevant: &[u32]) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut positions: Vec<usize> = relevant
        .iter()
        .map(|&i| run.position(q, i as usize) + 1)
        .collect();
    positions.sort_unstable();
    let sum: CompensatedSum = positions
        .iter()
        .enumerate()
        .map(|(hit, &rank)| (hit + 1) as f64 / rank as f64)
        .collect();
    Some(sum.total() / relevant.len() as f64)
}

/// Mean average precision with binary relevance `relevant[q]`, e.g. from
/// [`SimilarityMatrix::threshold`]. Queries with nothing relevant are skipped.
pub fn mean_average_precision(run: &RetrievalRun, relevant: &[Vec<u32>]) -> f64 {
    mean((0..run.num_queries()).filter_map(|q| average_precision(run, q, &relevant[q])))
        .unwrap_or(0.0)
}

/// Geometric-mean recall bounds obtained by treating near-duplicate items
/// as acceptable answers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvrBounds {
    pub lower: f64,
    pub observed: f64,
    pub upper: f64,
}

/// Substitutes, per query, the best (upper bound) or worst (lower bound)
/// rank among the corresponding items and all items scoring above
/// `threshold` for the corresponding item's rank. The corresponding items
/// act as one unit at their best rank.
pub fn ivr_bounds(
    run: &RetrievalRun,
    correspondence: &Correspondence,
    sim: &SimilarityMatrix,
    threshold: f64,
    ks: &[usize],
) -> Result<IvrBounds> {
    check_shapes(run, sim)?;
    let observed = corresponding_ranks(run, correspondence)?;
    let mut best = observed.clone();
    let mut worst = observed.clone();
    for q in 0..run.num_queries() {
        let own = correspondence.items(q);
        for &(i, s) in sim.row(q) {
            if s > threshold && own.binary_search(&i).is_err() {
                let r = run.position(q, i as usize) + 1;
                best[q] = best[q].min(r);
                worst[q] = worst[q].max(r);
            }
        }
    }
    Ok(IvrBounds {
        lower: geometric_mean_recall(&worst, ks),
        observed: geometric_mean_recall(&observed, ks),
        upper: geometric_mean_recall(&best, ks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn recall_counts() {
        let ranks = [1, 2, 3, 11, 20, 30, 40, 50, 60, 70];
        assert_eq!(recall_at_k(&ranks, 3), 30.0);
        assert_eq!(recall_at_k(&[2, 2], 1), 0.0);
        assert_eq!(recall_at_k(&[1, 1], 1), 100.0);
    }

    #[test]
    fn geometric_mean_of_recalls() {
        // 10% at 1, 40% at 5, 90% at 10
        let mut ranks = vec![1; 10];
        ranks.extend(vec![5; 30]);
        ranks.extend(vec![10; 50]);
        ranks.extend(vec![11; 10]);
        assert_abs_diff_eq!(
            geometric_mean_recall(&ranks, &DEFAULT_KS),
            33.019272,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            geometric_mean_recall(&[1, 1], &DEFAULT_KS),
            100.0,
            epsilon = 1e-12
        );
        assert_eq!(geometric_mean_recall(&[2, 3], &DEFAULT_KS), 0.0);
    }

    #[test]
    fn rank_summaries() {
        assert_eq!(median_rank(&[1, 3]), 2.0);
        assert_eq!(median_rank(&[4, 1, 9]), 4.0);
        assert_eq!(mean_rank(&[1, 3]), 2.0);
    }

    #[test]
    fn average_precision_by_hand() {
        let run =
            RetrievalRun::from_rankings(ids("q", 1), ids("i", 3), vec![vec![0, 1, 2]]).unwrap();
        assert_abs_diff_eq!(
            average_precision(&run, 0, &[0, 2]).unwrap(),
            (1.0 + 2.0 / 3.0) / 2.0,
            epsilon = 1e-12
        );
        assert_eq!(mean_average_precision(&run, &[vec![0]]), 1.0);
    }

    #[test]
    fn bounds_on_six_items() {
        // Corresponding item 0 sits at rank 5; equivalent item 1 at rank 1,
        // equivalent item 2 at rank 6.
        let sim = SimilarityMatrix::from_dense(
            ids("q", 1),
            ids("i", 6),
            &[1.0, 0.9, 0.85, 0.5, 0.0, 0.0],
        )
        .unwrap();
        let run =
            RetrievalRun::from_rankings(ids("q", 1), ids("i", 6), vec![vec![1, 3, 4, 5, 0, 2]])
                .unwrap();
        let corr = Correspondence::identity(1);
        let ks = [1, 5];
        let b = ivr_bounds(&run, &corr, &sim, 0.8, &ks).unwrap();
        assert_eq!(b.upper, 100.0);
        assert_eq!(b.observed, 0.0);
        assert_eq!(b.lower, 0.0);
        assert_eq!(corresponding_ranks(&run, &corr).unwrap(), vec![5]);
    }

    #[test]
    fn no_equivalents_means_equal_bounds() {
        let sim =
            SimilarityMatrix::from_dense(ids("q", 2), ids("i", 2), &[1.0, 0.5, 0.8, 1.0]).unwrap();
        let run =
            RetrievalRun::from_rankings(ids("q", 2), ids("i", 2), vec![vec![1, 0], vec![1, 0]])
                .unwrap();
        let b = ivr_bounds(&run, &Correspondence::identity(2), &sim, 0.8, &DEFAULT_KS).unwrap();
        assert_eq!(b.lower, b.observed);
        assert_eq!(b.upper, b.observed);
    }
}
