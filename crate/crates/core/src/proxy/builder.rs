use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::SimilarityMatrix;
use super::meteor::{meteor_tokens, MeteorToken};
use super::{
    match_kernel, sim_bow, sim_embed, sim_pos, sim_syn, EmbedSource, ProxyConfig, ProxyKind,
};
use crate::corpus::{CaptionId, Corpus, EmbeddingTable, SynsetMap, VideoId};
use crate::error::{Error, Result};
use crate::textproc::{
    consensus_wordset, resolve_synsets, ProcessedCaption, SynsetsByPos, WordsByPos,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Video queries ranking captions.
    VideoToCaption,
    /// Caption queries ranking videos.
    CaptionToVideo,
}

/// Processed captions grouped by video.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedCorpus {
    videos: Vec<VideoId>,
    captions: Vec<ProcessedCaption>,
    captions_of: Vec<Vec<usize>>,
    video_of: Vec<usize>,
}

impl ProcessedCorpus {
    /// Pairs a corpus with its processed captions, in corpus order.
    pub fn new(corpus: &Corpus, processed: Vec<ProcessedCaption>) -> Result<Self> {
        let mut by_id: HashMap<CaptionId, ProcessedCaption> = processed
            .into_iter()
            .map(|p| (p.caption_id.clone(), p))
            .collect();
        let mut ordered = Vec::with_capacity(corpus.num_captions());
        for c in corpus.captions() {
            let p = by_id
                .remove(&c.id)
                .ok_or_else(|| Error::UnprocessedCaption(c.id.0.clone()))?;
            if p.video_id != c.video_id {
                return Err(Error::InvalidInput(format!(
                    "caption {} processed for video {}, corpus says {}",
                    c.id, p.video_id, c.video_id
                )));
            }
            ordered.push(p);
        }
        Self::from_processed(ordered)
    }

    /// Groups captions by `video_id`; videos in order of first appearance.
    pub fn from_processed(captions: Vec<ProcessedCaption>) -> Result<Self> {
        if captions.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut videos = Vec::new();
        let mut captions_of: Vec<Vec<usize>> = Vec::new();
        let mut video_of = Vec::with_capacity(captions.len());
        let mut index: HashMap<&VideoId, usize> = HashMap::new();
        let mut seen = std::collections::HashSet::new();
        for (i, c) in captions.iter().enumerate() {
            if !seen.insert(&c.caption_id) {
                return Err(Error::DuplicateCaption {
                    id: c.caption_id.0.clone(),
                    line: i + 1,
                });
            }
            let v = *index.entry(&c.video_id).or_insert_with(|| {
                videos.push(c.video_id.clone());
                captions_of.push(Vec::new());
                videos.len() - 1
            });
            captions_of[v].push(i);
            video_of.push(v);
        }
        Ok(ProcessedCorpus {
            videos,
            captions,
            captions_of,
            video_of,
        })
    }

    pub fn videos(&self) -> &[VideoId] {
        &self.videos
    }

    pub fn captions(&self) -> &[ProcessedCaption] {
        &self.captions
    }

    pub fn num_videos(&self) -> usize {
        self.videos.len()
    }

    pub fn num_captions(&self) -> usize {
        self.captions.len()
    }

    pub fn captions_of(&self, v: usize) -> &[usize] {
        &self.captions_of[v]
    }

    pub fn video_of(&self, c: usize) -> usize {
        self.video_of[c]
    }

    pub fn video_ids(&self) -> Vec<String> {
        self.videos.iter().map(|v| v.0.clone()).collect()
    }

    pub fn caption_ids(&self) -> Vec<String> {
        self.captions
            .iter()
            .map(|c| c.caption_id.0.clone())
            .collect()
    }

    /// Corresponding `(video, caption)` id pairs.
    pub fn pairs(&self) -> Vec<(String, String)> {
        self.captions
            .iter()
            .map(|c| (c.video_id.0.clone(), c.caption_id.0.clone()))
            .collect()
    }

    /// The instance-based matrix: each video relates only to its own captions.
    pub fn instance_matrix(&self, direction: Direction) -> SimilarityMatrix {
        let rows = self
            .captions_of
            .iter()
            .map(|caps| caps.iter().map(|&c| (c as u32, 1.0)).collect())
            .collect();
        let m = SimilarityMatrix::from_rows_unchecked(self.video_ids(), self.caption_ids(), rows);
        match direction {
            Direction::VideoToCaption => m,
            Direction::CaptionToVideo => m.transpose(),
        }
    }
}

/// Counters from the inverted-index join.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JoinStats {
    /// Ordered (video, other video) pairs whose similarity was evaluated.
    pub candidate_pairs: usize,
}

/// Word sets of one video: the consensus over its captions.
struct Profile {
    words: BTreeSet<String>,
    words_by_pos: WordsByPos,
    synsets_by_pos: SynsetsByPos,
}

fn empty_synsets() -> &'static SynsetMap {
    static EMPTY: OnceLock<SynsetMap> = OnceLock::new();
    EMPTY.get_or_init(SynsetMap::new)
}

/// Builds query-by-item semantic similarity matrices.
///
/// A video and its own captions always score 1. Every other pair scores the
/// configured proxy between the two videos' captions: consensus word sets
/// for the set proxies and the match kernel for METEOR and caption
/// embeddings. The builder's synset map is authoritative; synsets stored on
/// the processed captions are not consulted.
pub struct SimilarityBuilder<'a> {
    corpus: &'a ProcessedCorpus,
    config: &'a ProxyConfig,
    synsets: &'a SynsetMap,
    embeddings: Option<&'a EmbeddingTable>,
}

impl<'a> SimilarityBuilder<'a> {
    pub fn new(corpus: &'a ProcessedCorpus, config: &'a ProxyConfig) -> Self {
        SimilarityBuilder {
            corpus,
            config,
            synsets: empty_synsets(),
            embeddings: None,
        }
    }

    pub fn synsets(mut self, map: &'a SynsetMap) -> Self {
        self.synsets = map;
        self
    }

    pub fn embeddings(mut self, table: &'a EmbeddingTable) -> Self {
        self.embeddings = Some(table);
        self
    }

    /// Evaluates the proxy for every pair of videos.
    pub fn build(&self, direction: Direction) -> Result<SimilarityMatrix> {
        self.config.validate()?;
        let unit = self.unit_similarity()?;
        let n = self.corpus.num_videos();
        let rows = (0..n)
            .into_par_iter()
            .map(|i| {
                let scores = (0..n)
                    .map(|k| if k == i { Ok(0.0) } else { unit(i, k) })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(self.expand_row(i, |k| scores[k]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.finish(rows, direction))
    }

    /// Inverted-index join for the set proxies: only videos sharing at least
    /// one word (or synset) key are scored.
    pub fn build_accelerated(&self, direction: Direction) -> Result<(SimilarityMatrix, JoinStats)> {
        self.config.validate()?;
        if !self.config.kind.is_set_proxy() {
            return Err(Error::InvalidConfig(format!(
                "the inverted-index join does not support the {} proxy",
                self.config.kind.as_str()
            )));
        }
        let profiles = self.profiles()?;
        let keys: Vec<Vec<(u8, &str)>> = profiles.iter().map(|p| self.index_keys(p)).collect();
        let mut postings: HashMap<(u8, &str), Vec<u32>> = HashMap::new();
        for (v, ks) in keys.iter().enumerate() {
            for &k in ks {
                postings.entry(k).or_default().push(v as u32);
            }
        }

        let rows: Vec<(Vec<(u32, f64)>, usize)> = (0..profiles.len())
            .into_par_iter()
            .map(|i| {
                let mut candidates: Vec<u32> = keys[i]
                    .iter()
                    .flat_map(|k| postings[k].iter().copied())
                    .filter(|&k| k as usize != i)
                    .collect();
                candidates.sort_unstable();
                candidates.dedup();
                let mut scores: HashMap<usize, f64> = HashMap::with_capacity(candidates.len());
                for &k in &candidates {
                    let k = k as usize;
                    scores.insert(k, self.set_similarity(&profiles[i], &profiles[k]));
                }
                let row = self.expand_row(i, |k| scores.get(&k).copied().unwrap_or(0.0));
                (row, candidates.len())
            })
            .collect();

        let candidate_pairs = rows.iter().map(|(_, c)| c).sum();
        let rows = rows.into_iter().map(|(r, _)| r).collect();
        Ok((self.finish(rows, direction), JoinStats { candidate_pairs }))
    }

    fn finish(&self, rows: Vec<Vec<(u32, f64)>>, direction: Direction) -> SimilarityMatrix {
        let m = SimilarityMatrix::from_rows_unchecked(
            self.corpus.video_ids(),
            self.corpus.caption_ids(),
            rows,
        );
        match direction {
            Direction::VideoToCaption => m,
            Direction::CaptionToVideo => m.transpose(),
        }
    }

    /// Spreads per-video scores over captions; own captions score 1.
    fn expand_row(&self, i: usize, video_score: impl Fn(usize) -> f64) -> Vec<(u32, f64)> {
        let mut row = Vec::new();
        for c in 0..self.corpus.num_captions() {
            let v = self.corpus.video_of(c);
            let s = if v == i { 1.0 } else { video_score(v) };
            if s > 0.0 {
                row.push((c as u32, s));
            }
        }
        row
    }

    fn profiles(&self) -> Result<Vec<Profile>> {
        let fraction = self.config.consensus_fraction;
        (0..self.corpus.num_videos())
            .map(|v| {
                let caps = self
                    .corpus
                    .captions_of(v)
                    .iter()
                    .map(|&c| &self.corpus.captions()[c]);
                let words_by_pos = consensus_wordset(caps, fraction)?;
                let words = words_by_pos.values().flatten().cloned().collect();
                let synsets_by_pos = resolve_synsets(&words_by_pos, self.synsets);
                Ok(Profile {
                    words,
                    words_by_pos,
                    synsets_by_pos,
                })
            })
            .collect()
    }

    fn index_keys<'p>(&self, p: &'p Profile) -> Vec<(u8, &'p str)> {
        const ANY_POS: u8 = u8::MAX;
        let weighted = self
            .config
            .pos_weights
            .iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(p, _)| p);
        match self.config.kind {
            ProxyKind::Bow => p.words.iter().map(|w| (ANY_POS, w.as_str())).collect(),
            ProxyKind::Pos => weighted
                .flat_map(|pos| {
                    p.words_by_pos
                        .get(&pos)
                        .into_iter()
                        .flatten()
                        .map(move |w| (pos as u8, w.as_str()))
                })
                .collect(),
            ProxyKind::Syn => weighted
                .flat_map(|pos| {
                    p.synsets_by_pos
                        .get(&pos)
                        .into_iter()
                        .flatten()
                        .map(move |s| (pos as u8, s.as_str()))
                })
                .collect(),
            ProxyKind::Meteor | ProxyKind::Embed => Vec::new(),
        }
    }

    fn set_similarity(&self, a: &Profile, b: &Profile) -> f64 {
        let w = &self.config.pos_weights;
        match self.config.kind {
            ProxyKind::Bow => sim_bow(&a.words, &b.words),
            ProxyKind::Pos => sim_pos(&a.words_by_pos, &b.words_by_pos, w),
            ProxyKind::Syn => sim_syn(&a.synsets_by_pos, &b.synsets_by_pos, w),
            ProxyKind::Meteor | ProxyKind::Embed => unreachable!("not a set proxy"),
        }
    }

    /// Video-to-video proxy as a closure over precomputed per-video state.
    #[allow(clippy::type_complexity)]
    fn unit_similarity(&self) -> Result<Box<dyn Fn(usize, usize) -> Result<f64> + Sync + '_>> {
        let corpus = self.corpus;
        match self.config.kind {
            ProxyKind::Bow | ProxyKind::Pos | ProxyKind::Syn => {
                let profiles = self.profiles()?;
                Ok(Box::new(move |i, k| {
                    Ok(self.set_similarity(&profiles[i], &profiles[k]))
                }))
            }
            ProxyKind::Meteor => {
                let tokens: Vec<Vec<MeteorToken<'_>>> = corpus
                    .captions()
                    .iter()
                    .map(|c| MeteorToken::from_caption(c, self.synsets))
                    .collect();
                let params = self.config.meteor;
                let symmetrize = self.config.symmetrize_meteor;
                Ok(Box::new(move |i, k| {
                    match_kernel(corpus.captions_of(i), corpus.captions_of(k), |&a, &b| {
                        Ok(meteor_tokens(&tokens[a], &tokens[b], &params, symmetrize))
                    })
                }))
            }
            ProxyKind::Embed => {
                let table = self.embeddings.ok_or_else(|| {
                    Error::InvalidConfig("the embed proxy needs an embedding table".into())
                })?;
                match self.config.embed_source {
                    EmbedSource::Captions => {
                        let vectors = corpus
                            .captions()
                            .iter()
                            .map(|c| {
                                table
                                    .get(c.caption_id.as_str())
                                    .ok_or_else(|| Error::MissingEmbedding(c.caption_id.0.clone()))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok(Box::new(move |i, k| {
                            match_kernel(corpus.captions_of(i), corpus.captions_of(k), |&a, &b| {
                                sim_embed(vectors[a], vectors[b])
                            })
                        }))
                    }
                    EmbedSource::Videos => {
                        let vectors = corpus
                            .videos()
                            .iter()
                            .map(|v| {
                                table
                                    .get(v.as_str())
                                    .ok_or_else(|| Error::MissingEmbedding(v.0.clone()))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok(Box::new(move |i, k| sim_embed(vectors[i], vectors[k])))
                    }
                }
            }
        }
    }
}

/// Naive builder: every video pair is scored.
pub fn build_similarity_matrix(
    corpus: &ProcessedCorpus,
    config: &ProxyConfig,
    synsets: &SynsetMap,
    embeddings: Option<&EmbeddingTable>,
    direction: Direction,
) -> Result<SimilarityMatrix> {
    let mut b = SimilarityBuilder::new(corpus, config).synsets(synsets);
    if let Some(t) = embeddings {
        b = b.embeddings(t);
    }
    b.build(direction)
}

/// Inverted-index join producing the video-to-caption matrix.
pub fn accelerated_join(
    corpus: &ProcessedCorpus,
    config: &ProxyConfig,
    synsets: &SynsetMap,
) -> Result<SimilarityMatrix> {
    accelerated_join_with_stats(corpus, config, synsets).map(|(m, _)| m)
}

pub fn accelerated_join_with_stats(
    corpus: &ProcessedCorpus,
    config: &ProxyConfig,
    synsets: &SynsetMap,
) -> Result<(SimilarityMatrix, JoinStats)> {
    SimilarityBuilder::new(corpus, config)
        .synsets(synsets)
        .build_accelerated(Direction::VideoToCaption)
}
