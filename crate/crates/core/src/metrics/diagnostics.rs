use crate::corpus::{is_permutation, AnnotatorOrdering, STUDY_CAPTIONS};
use crate::error::{Error, Result};
use crate::numeric::{mean, CompensatedSum};
use crate::proxy::SimilarityMatrix;

/// Thresholds `0.0, 0.1, ..., 1.0`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// For each threshold `T`, the mean over queries of the number of items
/// with similarity at least `T`. At `T = 0` every item counts.
pub fn relevance_curve(sim: &SimilarityMatrix, thresholds: &[f64]) -> Vec<(f64, f64)> {
    let nq = sim.num_queries();
    thresholds
        .iter()
        .map(|&t| {
            let counts = (0..nq).map(|q| {
                if t <= 0.0 {
                    sim.num_items() as f64
                } else {
                    sim.row(q).iter().filter(|&&(_, s)| s >= t).count() as f64
                }
            });
            (t, mean(counts).unwrap_or(0.0))
        })
        .collect()
}

/// A threshold where a curve expected to dominate falls below the other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveDeviation {
    pub threshold: f64,
    pub expected_higher: f64,
    pub expected_lower: f64,
}

/// Points where `higher` is strictly below `lower`. Both curves must use
/// the same thresholds.
pub fn curve_deviations(higher: &[(f64, f64)], lower: &[(f64, f64)]) -> Vec<CurveDeviation> {
    higher
        .iter()
        .zip(lower)
        .filter(|((_, h), (_, l))| h < l)
        .map(|(&(t, h), &(_, l))| CurveDeviation {
            threshold: t,
            expected_higher: h,
            expected_lower: l,
        })
        .collect()
}

/// Pearson's r; `None` when either side is constant or shorter than 2.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ma = mean(a.iter().copied())?;
    let mb = mean(b.iter().copied())?;
    let mut cov = CompensatedSum::new();
    let mut va = CompensatedSum::new();
    let mut vb = CompensatedSum::new();
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov.add(dx * dy);
        va.add(dx * dx);
        vb.add(dy * dy);
    }
    let (va, vb) = (va.total(), vb.total());
    if va <= 0.0 || vb <= 0.0 {
        return None;
    }
    Some((cov.total() / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// Mean per-query Pearson correlation between two proxies' matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyCorrelation {
    pub mean_r: f64,
    /// Queries contributing to the mean.
    pub used: usize,
    /// Queries skipped because a row was constant.
    pub skipped: usize,
}

/// Correlates the dense rows of two matrices over identical id spaces.
pub fn proxy_correlation(a: &SimilarityMatrix, b: &SimilarityMatrix) -> Result<ProxyCorrelation> {
    if a.query_ids() != b.query_ids() || a.item_ids() != b.item_ids() {
        return Err(Error::InvalidInput(
            "matrices do not share query and item ids".into(),
        ));
    }
    let rs: Vec<Option<f64>> = (0..a.num_queries())
        .map(|q| pearson(&a.dense_row(q), &b.dense_row(q)))
        .collect();
    let used: Vec<f64> = rs.iter().flatten().copied().collect();
    let skipped = rs.len() - used.len();
    let mean_r = mean(used.iter().copied()).ok_or_else(|| {
        Error::InvalidInput("no query has non-constant similarities under both proxies".into())
    })?;
    Ok(ProxyCorrelation {
        mean_r,
        used: used.len(),
        skipped,
    })
}

/// Picks the captions at ranks `1, ⌈n/4⌉, ⌈n/2⌉, ⌈3n/4⌉, n` of a query's
/// proxy ranking, ties broken by caption id.
pub fn human_study_select(row: &[(String, f64)]) -> Result<Vec<String>> {
    let n = row.len();
    if n < STUDY_CAPTIONS {
        return Err(Error::InvalidInput(format!(
            "need at least {STUDY_CAPTIONS} captions for selection, found {n}"
        )));
    }
    let mut ranked: Vec<&(String, f64)> = row.iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let ranks = [1, n.div_ceil(4), n.div_ceil(2), (3 * n).div_ceil(4), n];
    Ok(ranks.iter().map(|&r| ranked[r - 1].0.clone()).collect())
}

/// Pair counts from comparing annotators with a proxy ordering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AgreementCounts {
    pub pairs: usize,
    pub consistent: usize,
    pub agreeing: usize,
}

impl AgreementCounts {
    pub fn consistent_pct(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            100.0 * self.consistent as f64 / self.pairs as f64
        }
    }

    /// `None` when no pair was ordered identically by every annotator.
    pub fn agreement_pct(&self) -> Option<f64> {
        (self.consistent > 0).then(|| 100.0 * self.agreeing as f64 / self.consistent as f64)
    }

    pub fn merge(self, other: AgreementCounts) -> AgreementCounts {
        AgreementCounts {
            pairs: self.pairs + other.pairs,
            consistent: self.consistent + other.consistent,
            agreeing: self.agreeing + other.agreeing,
        }
    }
}

/// Compares annotator orderings with a proxy ordering of the same captions.
/// Orderings list caption positions, most relevant first.
pub fn human_agreement(
    ordering: &AnnotatorOrdering,
    proxy_order: &[usize],
) -> Result<AgreementCounts> {
    ordering.validate()?;
    if !is_permutation(proxy_order, STUDY_CAPTIONS) {
        return Err(Error::InvalidInput(format!(
            "proxy ordering {proxy_order:?} is not a permutation of 0..{STUDY_CAPTIONS}"
        )));
    }
    let rank_of = |order: &[usize]| {
        let mut r = [0usize; STUDY_CAPTIONS];
        for (rank, &c) in order.iter().enumerate() {
            r[c] = rank;
        }
        r
    };
    let annotators: Vec<[usize; STUDY_CAPTIONS]> =
        ordering.orderings.iter().map(|o| rank_of(o)).collect();
    let proxy = rank_of(proxy_order);
    let mut counts = AgreementCounts::default();
    for x in 0..STUDY_CAPTIONS {
        for y in x + 1..STUDY_CAPTIONS {
            counts.pairs += 1;
            let first = annotators[0][x] < annotators[0][y];
            if annotators.iter().all(|r| (r[x] < r[y]) == first) {
                counts.consistent += 1;
                if (proxy[x] < proxy[y]) == first {
                    counts.agreeing += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// The proxy's ordering of an annotated caption set: positions sorted by
/// descending similarity, ties by caption id.
pub fn proxy_ordering(ordering: &AnnotatorOrdering, sim: &SimilarityMatrix) -> Result<Vec<usize>> {
    let q = sim
        .query_ids()
        .iter()
        .position(|v| v == ordering.video_id.as_str())
        .ok_or_else(|| Error::IdMismatch(vec![ordering.video_id.0.clone()]))?;
    let items = sim.item_index();
    let scores = ordering
        .caption_ids
        .iter()
        .map(|c| {
            items
                .get(c.as_str())
                .map(|&i| sim.get(q, i))
                .ok_or_else(|| Error::IdMismatch(vec![c.0.clone()]))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..ordering.caption_ids.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| ordering.caption_ids[a].cmp(&ordering.caption_ids[b]))
    });
    Ok(order)
}
