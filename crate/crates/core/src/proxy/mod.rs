//! Caption-to-caption semantic proxies and the similarity-matrix builders.
//!
//! The set proxies (bag-of-words, part-of-speech and synset IoU) are exact
//! rational computations over sorted sets, so the naive builder and the
//! inverted-index join produce bit-identical matrices.

mod builder;
mod matrix;
mod meteor;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::Pos;

pub use builder::{
    accelerated_join, accelerated_join_with_stats, build_similarity_matrix, Direction, JoinStats,
    ProcessedCorpus, SimilarityBuilder,
};
pub use matrix::SimilarityMatrix;
pub use meteor::{meteor_score, sim_meteor, MeteorParams, MeteorToken};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxyKind {
    Bow,
    Pos,
    Syn,
    Meteor,
    Embed,
}

impl ProxyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProxyKind::Bow => "bow",
            ProxyKind::Pos => "pos",
            ProxyKind::Syn => "syn",
            ProxyKind::Meteor => "meteor",
            ProxyKind::Embed => "embed",
        }
    }

    /// Whether the proxy is a set IoU that the inverted-index join supports.
    pub fn is_set_proxy(self) -> bool {
        matches!(self, ProxyKind::Bow | ProxyKind::Pos | ProxyKind::Syn)
    }
}

impl std::str::FromStr for ProxyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bow" => Ok(ProxyKind::Bow),
            "pos" => Ok(ProxyKind::Pos),
            "syn" => Ok(ProxyKind::Syn),
            "meteor" | "met" => Ok(ProxyKind::Meteor),
            "embed" => Ok(ProxyKind::Embed),
            other => Err(Error::InvalidConfig(format!("unknown proxy {other:?}"))),
        }
    }
}

/// Which ids the embedding proxy looks up: caption vectors (textual
/// similarity) or video vectors (visual similarity).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EmbedSource {
    #[default]
    Captions,
    Videos,
}

/// Per part-of-speech weights; must sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosWeights(BTreeMap<Pos, f64>);

impl Default for PosWeights {
    fn default() -> Self {
        PosWeights([(Pos::Verb, 0.5), (Pos::Noun, 0.5)].into())
    }
}

impl PosWeights {
    pub fn new<I: IntoIterator<Item = (Pos, f64)>>(weights: I) -> Result<Self> {
        let w = PosWeights(weights.into_iter().collect());
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidConfig("no part-of-speech weights".into()));
        }
        if self.0.values().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = self.0.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pos, f64)> + '_ {
        self.0.iter().map(|(&p, &w)| (p, w))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyConfig {
    pub kind: ProxyKind,
    pub pos_weights: PosWeights,
    pub meteor: MeteorParams,
    /// Fraction of a multi-caption video's captions a word must occur in.
    pub consensus_fraction: f64,
    pub symmetrize_meteor: bool,
    pub embed_source: EmbedSource,
}

impl ProxyConfig {
    pub fn new(kind: ProxyKind) -> Self {
        ProxyConfig {
            kind,
            pos_weights: PosWeights::default(),
            meteor: MeteorParams::default(),
            consensus_fraction: 0.25,
            symmetrize_meteor: true,
            embed_source: EmbedSource::Captions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pos_weights.validate()?;
        self.meteor.validate()?;
        if !(self.consensus_fraction > 0.0 && self.consensus_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "consensus fraction {} not in (0, 1]",
                self.consensus_fraction
            )));
        }
        Ok(())
    }
}

/// Instance-based relevance: only the collected counterpart is relevant.
pub fn instance_similarity(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// Intersection over union; zero when both sets are empty.
pub fn iou<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Bag-of-words proxy over stop-filtered lemma sets.
pub fn sim_bow(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    iou(a, b)
}

/// Weighted IoU over parts of speech. Parts empty on both sides are dropped
/// and the remaining weights renormalised.
pub fn weighted_iou<T: Ord>(
    a: &BTreeMap<Pos, BTreeSet<T>>,
    b: &BTreeMap<Pos, BTreeSet<T>>,
    weights: &PosWeights,
) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (pos, w) in weights.iter() {
        let (sa, sb) = (a.get(&pos), b.get(&pos));
        let ea = sa.is_none_or(BTreeSet::is_empty);
        let eb = sb.is_none_or(BTreeSet::is_empty);
        if ea && eb {
            continue;
        }
        let score = match (sa, sb) {
            (Some(sa), Some(sb)) => iou(sa, sb),
            _ => 0.0,
        };
        num += w * score;
        den += w;
    }
    if den > 0.0 {
        (num / den).min(1.0)
    } else {
        0.0
    }
}

/// Part-of-speech proxy over lemma sets.
pub fn sim_pos(
    a: &BTreeMap<Pos, BTreeSet<String>>,
    b: &BTreeMap<Pos, BTreeSet<String>>,
    weights: &PosWeights,
) -> f64 {
    weighted_iou(a, b, weights)
}

/// Synset proxy: [`sim_pos`] over synset sets.
pub fn sim_syn(
    a: &BTreeMap<Pos, BTreeSet<crate::corpus::SynsetId>>,
    b: &BTreeMap<Pos, BTreeSet<crate::corpus::SynsetId>>,
    weights: &PosWeights,
) -> f64 {
    weighted_iou(a, b, weights)
}

/// Cosine similarity clamped to `[0, 1]`.
pub fn sim_embed(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            id: String::new(),
            expected: u.len(),
            found: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nu * nv).sqrt()).clamp(0.0, 1.0))
}

/// Many-to-many match kernel:
/// `(mean_a max_b s(a, b) + mean_b max_a s(a, b)) / 2`.
pub fn match_kernel<A, B, F>(a: &[A], b: &[B], mut base: F) -> Result<f64>
where
    F: FnMut(&A, &B) -> Result<f64>,
{
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(
            "match kernel over an empty caption set".into(),
        ));
    }
    let mut scores = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            scores.push(base(x, y)?);
        }
    }
    let cols = b.len();
    let row_term: f64 = (0..a.len())
        .map(|i| {
            scores[i * cols..(i + 1) * cols]
                .iter()
                .copied()
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / a.len() as f64;
    let col_term: f64 = (0..cols)
        .map(|j| {
            (0..a.len())
                .map(|i| scores[i * cols + j])
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / cols as f64;
    Ok(0.5 * (row_term + col_term))
}
