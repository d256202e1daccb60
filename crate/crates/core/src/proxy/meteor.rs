//! METEOR sentence similarity.
//!
//! Alignment runs three stages in priority order: exact surface, Porter
//! stem, then shared synset. Each token is matched at most once. Within a
//! stage hypothesis tokens are visited left to right and the reference
//! candidate is picked greedily: one that extends an existing chunk, then
//! one whose successor also matches, then the first after the previous
//! match, then the leftmost.

use serde::{Deserialize, Serialize};

use crate::corpus::{SynsetId, SynsetMap};
use crate::error::{Error, Result};
use crate::textproc::ProcessedCaption;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorParams {
    /// Precision/recall balance of the harmonic mean.
    pub alpha: f64,
    /// Fragmentation penalty exponent.
    pub beta: f64,
    /// Maximum fragmentation penalty.
    pub gamma: f64,
}

impl Default for MeteorParams {
    fn default() -> Self {
        MeteorParams {
            alpha: 0.9,
            beta: 3.0,
            gamma: 0.5,
        }
    }
}

impl MeteorParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.alpha <= 1.0
            && self.beta > 0.0
            && self.beta.is_finite()
            && (0.0..=1.0).contains(&self.gamma);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "bad METEOR parameters {self:?}"
            )))
        }
    }
}

/// Matching keys of one token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeteorToken<'a> {
    pub surface: &'a str,
    pub stem: &'a str,
    pub synset: Option<&'a SynsetId>,
}

impl<'a> MeteorToken<'a> {
    /// Keys for every token of the caption, stop words included. Only
    /// lemmas present in `map` take part in the synonym stage.
    pub fn from_caption(caption: &'a ProcessedCaption, map: &'a SynsetMap) -> Vec<Self> {
        caption
            .sequence
            .iter()
            .zip(&caption.stems)
            .map(|(t, stem)| MeteorToken {
                surface: &t.surface,
                stem,
                synset: map.get(&t.lemma, t.pos),
            })
            .collect()
    }
}

#[derive(Clone, Copy)]
enum Stage {
    Exact,
    Stem,
    Synonym,
}

fn same(stage: Stage, a: &MeteorToken<'_>, b: &MeteorToken<'_>) -> bool {
    match stage {
        Stage::Exact => a.surface == b.surface,
        Stage::Stem => a.stem == b.stem,
        Stage::Synonym => matches!((a.synset, b.synset), (Some(x), Some(y)) if x == y),
    }
}

/// Hypothesis-to-reference alignment as `(hyp index, ref index)` pairs
/// sorted by hypothesis index.
fn align(hyp: &[MeteorToken<'_>], reference: &[MeteorToken<'_>]) -> Vec<(usize, usize)> {
    let mut hyp_to_ref: Vec<Option<usize>> = vec![None; hyp.len()];
    let mut ref_used = vec![false; reference.len()];

    for stage in [Stage::Exact, Stage::Stem, Stage::Synonym] {
        for i in 0..hyp.len() {
            if hyp_to_ref[i].is_some() {
                continue;
            }
            let candidates: Vec<usize> = (0..reference.len())
                .filter(|&j| !ref_used[j] && same(stage, &hyp[i], &reference[j]))
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let extends = |j: usize| {
                (i > 0 && j > 0 && hyp_to_ref[i - 1] == Some(j - 1))
                    || (i + 1 < hyp.len() && hyp_to_ref[i + 1] == Some(j + 1))
            };
            let continues = |j: usize| {
                i + 1 < hyp.len()
                    && hyp_to_ref[i + 1].is_none()
                    && j + 1 < reference.len()
                    && !ref_used[j + 1]
                    && same(stage, &hyp[i + 1], &reference[j + 1])
            };
            let after_previous = hyp_to_ref[..i].iter().rev().flatten().next().copied();
            let chosen = candidates
                .iter()
                .copied()
                .find(|&j| extends(j))
                .or_else(|| candidates.iter().copied().find(|&j| continues(j)))
                .or_else(|| {
                    after_previous.and_then(|p| candidates.iter().copied().find(|&j| j > p))
                })
                .unwrap_or(candidates[0]);
            hyp_to_ref[i] = Some(chosen);
            ref_used[chosen] = true;
        }
    }

    hyp_to_ref
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect()
}

fn count_chunks(matches: &[(usize, usize)]) -> usize {
    if matches.is_empty() {
        return 0;
    }
    1 + matches
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

/// One-directional METEOR of `hyp` against `reference`.
pub fn meteor_score(
    hyp: &[MeteorToken<'_>],
    reference: &[MeteorToken<'_>],
    params: &MeteorParams,
) -> f64 {
    let matches = align(hyp, reference);
    let m = matches.len();
    if m == 0 {
        return 0.0;
    }
    let m_f = m as f64;
    let precision = m_f / hyp.len() as f64;
    let recall = m_f / reference.len() as f64;
    let fmean = precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
    let frag = count_chunks(&matches) as f64 / m_f;
    let penalty = params.gamma * frag.powf(params.beta);
    (fmean * (1.0 - penalty)).clamp(0.0, 1.0)
}

/// METEOR between two captions; averaged over both directions when
/// `symmetrize` is set.
pub fn sim_meteor(
    a: &ProcessedCaption,
    b: &ProcessedCaption,
    params: &MeteorParams,
    map: &SynsetMap,
    symmetrize: bool,
) -> f64 {
    let ta = MeteorToken::from_caption(a, map);
    let tb = MeteorToken::from_caption(b, map);
    meteor_tokens(&ta, &tb, params, symmetrize)
}

pub(crate) fn meteor_tokens(
    a: &[MeteorToken<'_>],
    b: &[MeteorToken<'_>],
    params: &MeteorParams,
    symmetrize: bool,
) -> f64 {
    if symmetrize {
        (meteor_score(a, b, params) + meteor_score(b, a, params)) / 2.0
    } else {
        meteor_score(a, b, params)
    }
}
