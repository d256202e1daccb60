//! Corpus data model and loaders for the auxiliary resources.
//!
//! Everything here is immutable once loaded. Loaders report the 1-based line
//! number of the first offending record.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::{Pos, TaggedToken};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(
    /// Opaque video identifier.
    VideoId
);
string_id!(
    /// Opaque caption identifier.
    CaptionId
);
string_id!(
    /// Opaque synset identifier.
    SynsetId
);

/// One caption and the video it was collected for.
#[derive(Debug, Clone, PartialEq)]
pub struct Caption {
    pub id: CaptionId,
    pub video_id: VideoId,
    pub text: String,
    /// Parses supplied by an external tagger, used instead of the built-in one.
    pub pretagged: Option<Vec<TaggedToken>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CaptionRecord {
    video_id: String,
    caption_id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<TokenRecord>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TokenRecord {
    surface: String,
    lemma: String,
    pos: String,
}

/// Videos, captions and the video/caption correspondence.
///
/// Videos are kept in order of first appearance; captions of a video keep
/// their input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    videos: Vec<VideoId>,
    captions: Vec<Caption>,
    captions_of: Vec<Vec<usize>>,
    video_of: Vec<usize>,
    video_index: HashMap<VideoId, usize>,
    caption_index: HashMap<CaptionId, usize>,
}

impl Corpus {
    /// Builds a corpus, checking every structural invariant.
    pub fn from_captions(captions: Vec<Caption>) -> Result<Self> {
        if captions.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut videos = Vec::new();
        let mut captions_of: Vec<Vec<usize>> = Vec::new();
        let mut video_of = Vec::with_capacity(captions.len());
        let mut video_index = HashMap::new();
        let mut caption_index = HashMap::with_capacity(captions.len());

        for (i, caption) in captions.iter().enumerate() {
            let line = i + 1;
            if caption.id.0.is_empty() || caption.video_id.0.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "empty video_id or caption_id".into(),
                });
            }
            if caption.text.trim().is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("caption {:?} has no text", caption.id.0),
                });
            }
            if caption_index.insert(caption.id.clone(), i).is_some() {
                return Err(Error::DuplicateCaption {
                    id: caption.id.0.clone(),
                    line,
                });
            }
            let v = *video_index
                .entry(caption.video_id.clone())
                .or_insert_with(|| {
                    videos.push(caption.video_id.clone());
                    captions_of.push(Vec::new());
                    videos.len() - 1
                });
            captions_of[v].push(i);
            video_of.push(v);
        }

        Ok(Corpus {
            videos,
            captions,
            captions_of,
            video_of,
            video_index,
            caption_index,
        })
    }

    pub fn videos(&self) -> &[VideoId] {
        &self.videos
    }

    pub fn captions(&self) -> &[Caption] {
        &self.captions
    }

    pub fn num_videos(&self) -> usize {
        self.videos.len()
    }

    pub fn num_captions(&self) -> usize {
        self.captions.len()
    }

    /// Caption indices of video `v`, in input order.
    pub fn captions_of(&self, v: usize) -> &[usize] {
        &self.captions_of[v]
    }

    /// Video index of caption `c`.
    pub fn video_of(&self, c: usize) -> usize {
        self.video_of[c]
    }

    pub fn caption_ids_of(&self, video: &VideoId) -> Option<Vec<&CaptionId>> {
        let v = *self.video_index.get(video)?;
        Some(
            self.captions_of[v]
                .iter()
                .map(|&c| &self.captions[c].id)
                .collect(),
        )
    }

    pub fn video_position(&self, video: &VideoId) -> Option<usize> {
        self.video_index.get(video).copied()
    }

    pub fn caption_position(&self, caption: &CaptionId) -> Option<usize> {
        self.caption_index.get(caption).copied()
    }

    /// Corresponding (video, caption) pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (&VideoId, &CaptionId)> + '_ {
        self.captions.iter().map(|c| (&c.video_id, &c.id))
    }

    /// Writes the corpus back out in the JSONL interchange format.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for c in &self.captions {
            let record = CaptionRecord {
                video_id: c.video_id.0.clone(),
                caption_id: c.id.0.clone(),
                text: c.text.clone(),
                tokens: c.pretagged.as_ref().map(|tokens| {
                    tokens
                        .iter()
                        .map(|t| TokenRecord {
                            surface: t.surface.clone(),
                            lemma: t.lemma.clone(),
                            pos: t.pos.as_str().to_owned(),
                        })
                        .collect()
                }),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Reads a captions JSONL file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file))
}

/// Parses captions JSONL from any reader. Blank lines are skipped.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut captions = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CaptionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if record.text.trim().is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("caption {:?} has no text", record.caption_id),
            });
        }
        if record.caption_id.is_empty() || record.video_id.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty video_id or caption_id".into(),
            });
        }
        if seen.insert(record.caption_id.clone(), line_no).is_some() {
            return Err(Error::DuplicateCaption {
                id: record.caption_id,
                line: line_no,
            });
        }
        let pretagged = match record.tokens {
            None => None,
            Some(tokens) => Some(
                tokens
                    .into_iter()
                    .map(|t| {
                        TaggedToken::new(&t.surface, &t.lemma, Pos::from_tag_lenient(&t.pos))
                            .ok_or_else(|| Error::Parse {
                                line: line_no,
                                message: "token with empty surface or lemma".into(),
                            })
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        captions.push(Caption {
            id: CaptionId(record.caption_id),
            video_id: VideoId(record.video_id),
            text: record.text,
            pretagged,
        });
    }
    Corpus::from_captions(captions)
}

#[derive(Deserialize)]
struct PairRecord {
    video_id: String,
    caption_id: String,
}

/// `(video id, caption id)` pairs from any JSONL carrying those two fields,
/// such as raw or processed captions.
pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(BufReader::new(file))
}

pub fn parse_pairs<R: BufRead>(reader: R) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let parse = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: PairRecord = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        out.push((r.video_id, r.caption_id));
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

/// Word-sense table: one synset per `(lemma, pos)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynsetMap {
    entries: HashMap<Pos, HashMap<String, SynsetId>>,
}

impl SynsetMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, lemma: &str, pos: Pos) -> Option<&SynsetId> {
        self.entries.get(&pos)?.get(lemma)
    }

    /// Inserts a mapping; re-inserting the same synset is a no-op, a
    /// different synset for the same key is rejected.
    pub fn insert(&mut self, lemma: &str, pos: Pos, synset: SynsetId) -> Result<(), SynsetId> {
        match self
            .entries
            .entry(pos)
            .or_default()
            .entry(lemma.to_lowercase())
        {
            std::collections::hash_map::Entry::Occupied(e) => {
                if *e.get() == synset {
                    Ok(())
                } else {
                    Err(e.get().clone())
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(synset);
                Ok(())
            }
        }
    }
}

impl<'a> FromIterator<(&'a str, Pos, &'a str)> for SynsetMap {
    /// Later conflicting entries are ignored; use [`parse_synset_map`] for
    /// validated input.
    fn from_iter<I: IntoIterator<Item = (&'a str, Pos, &'a str)>>(iter: I) -> Self {
        let mut map = SynsetMap::new();
        for (lemma, pos, synset) in iter {
            let _ = map.insert(lemma, pos, SynsetId::from(synset));
        }
        map
    }
}

pub fn load_synset_map(path: impl AsRef<Path>) -> Result<SynsetMap> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_synset_map(BufReader::new(file))
}

/// Parses `lemma \t pos \t synset_id` rows; `#` lines and blank lines are skipped.
pub fn parse_synset_map<R: BufRead>(reader: R) -> Result<SynsetMap> {
    let mut map = SynsetMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let (lemma, pos, synset) = (cols[0].trim(), cols[1].trim(), cols[2].trim());
        if lemma.is_empty() || synset.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty lemma or synset id".into(),
            });
        }
        let pos = Pos::parse(pos)?;
        if let Err(existing) = map.insert(lemma, pos, SynsetId::from(synset)) {
            return Err(Error::ConflictingSynset {
                line: line_no,
                lemma: lemma.to_owned(),
                pos: pos.as_str().to_owned(),
                existing: existing.0,
                new: synset.to_owned(),
            });
        }
    }
    Ok(map)
}

/// Fixed-dimension vectors keyed by caption or video id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table, rejecting ragged rows, duplicate ids and non-finite values.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = EmbeddingTable {
            ids: Vec::new(),
            index: HashMap::new(),
            dim: 0,
            data: Vec::new(),
        };
        for (id, vector) in rows {
            table.push(id.into(), vector)?;
        }
        Ok(table)
    }

    fn push(&mut self, id: String, vector: Vec<f64>) -> Result<()> {
        if self.ids.is_empty() {
            if vector.is_empty() {
                return Err(Error::DimensionMismatch {
                    id,
                    expected: 1,
                    found: 0,
                });
            }
            self.dim = vector.len();
        } else if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                id,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { id });
        }
        if self.index.contains_key(&id) {
            return Err(Error::InvalidInput(format!(
                "duplicate embedding id {id:?}"
            )));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        let i = *self.index.get(id)?;
        Some(&self.data[i * self.dim..(i + 1) * self.dim])
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(BufReader::new(file))
}

/// Parses `id,v1,...,vd` rows (no header).
pub fn parse_embeddings<R: std::io::Read>(reader: R) -> Result<EmbeddingTable> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut table = EmbeddingTable::from_rows(std::iter::empty::<(String, Vec<f64>)>())?;
    for (i, record) in csv.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let mut fields = record.iter();
        let id = match fields.next() {
            Some(id) if !id.is_empty() => id.to_owned(),
            _ => {
                return Err(Error::Parse {
                    line,
                    message: "missing id".into(),
                })
            }
        };
        let vector = fields
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("{f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        table.push(id, vector)?;
    }
    Ok(table)
}

/// Several annotators' orderings of the same five captions of one video,
/// most relevant first. Each ordering lists caption positions `0..5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorOrdering {
    pub video_id: VideoId,
    pub caption_ids: Vec<CaptionId>,
    pub orderings: Vec<Vec<usize>>,
}

pub const STUDY_CAPTIONS: usize = 5;
pub const MIN_ANNOTATORS: usize = 3;

impl AnnotatorOrdering {
    pub fn validate(&self) -> Result<()> {
        if self.caption_ids.len() != STUDY_CAPTIONS {
            return Err(Error::InvalidInput(format!(
                "video {}: expected {STUDY_CAPTIONS} captions, found {}",
                self.video_id,
                self.caption_ids.len()
            )));
        }
        if self.orderings.len() < MIN_ANNOTATORS {
            return Err(Error::InvalidInput(format!(
                "video {}: need at least {MIN_ANNOTATORS} orderings, found {}",
                self.video_id,
                self.orderings.len()
            )));
        }
        for ordering in &self.orderings {
            if !is_permutation(ordering, STUDY_CAPTIONS) {
                return Err(Error::InvalidInput(format!(
                    "video {}: {ordering:?} is not a permutation of 0..{STUDY_CAPTIONS}",
                    self.video_id
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn is_permutation(xs: &[usize], n: usize) -> bool {
    if xs.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &x in xs {
        if x >= n || std::mem::replace(&mut seen[x], true) {
            return false;
        }
    }
    true
}

pub fn load_orderings(path: impl AsRef<Path>) -> Result<Vec<AnnotatorOrdering>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_orderings(BufReader::new(file))
}

pub fn parse_orderings<R: BufRead>(reader: R) -> Result<Vec<AnnotatorOrdering>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let ordering: AnnotatorOrdering =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        ordering.validate().map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(ordering);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(src: &str) -> Result<Corpus> {
        parse_corpus(src.as_bytes())
    }

    #[test]
    fn two_captions_one_video() {
        let c = corpus(
            r#"{"video_id":"v1","caption_id":"c1","text":"stir food"}
{"video_id":"v1","caption_id":"c2","text":"mix food"}"#,
        )
        .unwrap();
        assert_eq!(c.num_videos(), 1);
        assert_eq!(c.num_captions(), 2);
        assert_eq!(c.captions_of(0), &[0, 1]);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(matches!(corpus(""), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn duplicate_caption_names_id_and_line() {
        let err = corpus(
            r#"{"video_id":"v1","caption_id":"c1","text":"a"}
{"video_id":"v2","caption_id":"c2","text":"b"}
{"video_id":"v3","caption_id":"c1","text":"c"}"#,
        )
        .unwrap_err();
        match err {
            Error::DuplicateCaption { id, line } => {
                assert_eq!(id, "c1");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_textless_lines_report_line() {
        let err = corpus("{\"video_id\":\"v\",\"caption_id\":\"c\",\"text\":\"x\"}\nnot json")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = corpus(r#"{"video_id":"v","caption_id":"c","text":"   "}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn pretagged_tokens_are_kept() {
        let c = corpus(
            r#"{"video_id":"v","caption_id":"c","text":"Stirring","tokens":[{"surface":"Stirring","lemma":"stir","pos":"VERB"}]}"#,
        )
        .unwrap();
        let tokens = c.captions()[0].pretagged.as_ref().unwrap();
        assert_eq!(tokens[0].surface, "stirring");
        assert_eq!(tokens[0].pos, Pos::Verb);
    }

    #[test]
    fn synset_rows_share_ids() {
        let map = parse_synset_map("stir\tVERB\ts1\nmix\tVERB\ts1\n".as_bytes()).unwrap();
        assert_eq!(map.get("stir", Pos::Verb).unwrap().as_str(), "s1");
        assert_eq!(map.get("mix", Pos::Verb).unwrap().as_str(), "s1");
    }

    #[test]
    fn synset_conflict_and_unknown_pos() {
        let err = parse_synset_map("stir\tVERB\ts1\nstir\tVERB\ts2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("conflicting synset"));
        let err = parse_synset_map("stir\tVRB\ts1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::UnknownPos(_)));
    }

    #[test]
    fn synset_comments_and_empty_file() {
        let map = parse_synset_map("# header\n\n".as_bytes()).unwrap();
        assert!(map.is_empty());
    }

    #[test]
    fn embeddings_validate_shape() {
        let t = parse_embeddings("a,1,2,3,4\nb,0,0,0,1\nc,1,1,1,1\n".as_bytes()).unwrap();
        assert_eq!((t.len(), t.dim()), (3, 4));
        assert_eq!(t.get("b").unwrap(), &[0.0, 0.0, 0.0, 1.0]);

        let err = parse_embeddings("a,1,2,3,4\nb,1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));

        let err = parse_embeddings("a,1,2\nbad,NaN,1\n".as_bytes()).unwrap_err();
        match err {
            Error::NonFinite { id } => assert_eq!(id, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn orderings_must_be_permutations() {
        let ok = r#"{"video_id":"v","caption_ids":["a","b","c","d","e"],"orderings":[[0,1,2,3,4],[4,3,2,1,0],[0,2,1,3,4]]}"#;
        assert_eq!(parse_orderings(ok.as_bytes()).unwrap().len(), 1);
        let bad = r#"{"video_id":"v","caption_ids":["a","b","c","d","e"],"orderings":[[0,1,2,3,3],[4,3,2,1,0],[0,2,1,3,4]]}"#;
        assert!(parse_orderings(bad.as_bytes()).is_err());
    }
}
