//! Caption analysis: tokenization, stop-word removal, part-of-speech
//! tagging, stemming, synset resolution and multi-caption consensus.
//!
//! Every function here is pure; [`Pipeline`] bundles the resources and runs
//! them over a whole corpus in parallel with order-preserving output.

mod porter;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Caption, CaptionId, Corpus, SynsetId, SynsetMap, VideoId};
use crate::error::{Error, Result};

pub use porter::stem;

const BUILTIN_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");
const BUILTIN_LEXICON: &str = include_str!("../../data/lexicon_en.tsv");

/// Part-of-speech inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Verb,
    Noun,
    Adj,
    Adv,
    Other,
}

impl Pos {
    pub const ALL: [Pos; 5] = [Pos::Verb, Pos::Noun, Pos::Adj, Pos::Adv, Pos::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Verb => "VERB",
            Pos::Noun => "NOUN",
            Pos::Adj => "ADJ",
            Pos::Adv => "ADV",
            Pos::Other => "OTHER",
        }
    }

    /// Strict parse of an inventory tag (case-insensitive).
    pub fn parse(tag: &str) -> Result<Pos> {
        match tag.trim().to_ascii_uppercase().as_str() {
            "VERB" => Ok(Pos::Verb),
            "NOUN" => Ok(Pos::Noun),
            "ADJ" => Ok(Pos::Adj),
            "ADV" => Ok(Pos::Adv),
            "OTHER" => Ok(Pos::Other),
            _ => Err(Error::UnknownPos(tag.to_owned())),
        }
    }

    /// Tags from external parsers: anything outside the inventory is `OTHER`.
    pub fn from_tag_lenient(tag: &str) -> Pos {
        Pos::parse(tag).unwrap_or(Pos::Other)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Pos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pos::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub surface: String,
    pub lemma: String,
    pub pos: Pos,
}

impl TaggedToken {
    /// Lowercases both strings; `None` if either is empty.
    pub fn new(surface: &str, lemma: &str, pos: Pos) -> Option<Self> {
        let surface = surface.trim().to_lowercase();
        let lemma = lemma.trim().to_lowercase();
        (!surface.is_empty() && !lemma.is_empty()).then_some(TaggedToken {
            surface,
            lemma,
            pos,
        })
    }
}

/// Lowercases and splits on every maximal run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// A lowercase stop-word set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StopList {
    words: HashSet<String>,
}

impl StopList {
    /// The pinned 179-word English list shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// One word per line; blank lines ignored.
    pub fn parse(text: &str) -> Self {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<'a> FromIterator<&'a str> for StopList {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        StopList {
            words: iter.into_iter().map(str::to_lowercase).collect(),
        }
    }
}

/// Order-preserving filter.
pub fn remove_stopwords<S: AsRef<str>>(tokens: &[S], stoplist: &StopList) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !stoplist.contains(t))
        .map(str::to_owned)
        .collect()
}

/// Lemma to part-of-speech table used by the built-in tagger.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, Pos>,
}

impl Lexicon {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LEXICON.as_bytes()).expect("shipped lexicon parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file))
    }

    /// `lemma \t pos` rows. A lemma may appear several times; the first row
    /// has priority.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (lemma, pos) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected lemma<TAB>pos".into(),
            })?;
            let pos = Pos::parse(pos).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            entries.entry(lemma.trim().to_lowercase()).or_insert(pos);
        }
        Ok(Lexicon { entries })
    }

    pub fn get(&self, lemma: &str) -> Option<Pos> {
        self.entries.get(lemma).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<'a> FromIterator<(&'a str, Pos)> for Lexicon {
    fn from_iter<I: IntoIterator<Item = (&'a str, Pos)>>(iter: I) -> Self {
        let mut entries = HashMap::new();
        for (lemma, pos) in iter {
            entries.entry(lemma.to_lowercase()).or_insert(pos);
        }
        Lexicon { entries }
    }
}

/// Candidate base forms for an inflected token, most specific first.
fn lemma_candidates(word: &str) -> Vec<String> {
    let mut out = Vec::new();
    let n = word.len();
    let undouble = |base: &str| -> Option<String> {
        let b = base.as_bytes();
        let len = b.len();
        (len >= 2 && b[len - 1] == b[len - 2] && !b"aeiou".contains(&b[len - 1]))
            .then(|| base[..len - 1].to_owned())
    };
    if let Some(base) = word.strip_suffix("ies").filter(|_| n > 4) {
        out.push(format!("{base}y"));
    }
    if let Some(base) = word.strip_suffix("es").filter(|_| n > 3) {
        out.push(base.to_owned());
    }
    if let Some(base) = word
        .strip_suffix('s')
        .filter(|_| n > 2 && !word.ends_with("ss"))
    {
        out.push(base.to_owned());
    }
    if let Some(base) = word.strip_suffix("ing").filter(|_| n > 4) {
        out.push(base.to_owned());
        out.push(format!("{base}e"));
        out.extend(undouble(base));
    }
    if let Some(base) = word.strip_suffix("ied").filter(|_| n > 4) {
        out.push(format!("{base}y"));
    }
    if let Some(base) = word.strip_suffix("ed").filter(|_| n > 3) {
        out.push(base.to_owned());
        out.push(format!("{base}e"));
        out.extend(undouble(base));
    }
    out
}

/// Tags each token by lexicon lookup, trying suffix-stripped forms when the
/// surface itself is unknown. Unknown tokens become `OTHER` with the surface
/// as lemma.
pub fn tag_pos<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Vec<TaggedToken> {
    tokens
        .iter()
        .map(|t| {
            let surface = t.as_ref().to_lowercase();
            if let Some(pos) = lexicon.get(&surface) {
                return TaggedToken {
                    lemma: surface.clone(),
                    surface,
                    pos,
                };
            }
            for candidate in lemma_candidates(&surface) {
                if let Some(pos) = lexicon.get(&candidate) {
                    return TaggedToken {
                        surface,
                        lemma: candidate,
                        pos,
                    };
                }
            }
            TaggedToken {
                lemma: surface.clone(),
                surface,
                pos: Pos::Other,
            }
        })
        .collect()
}

pub type WordsByPos = BTreeMap<Pos, BTreeSet<String>>;
pub type SynsetsByPos = BTreeMap<Pos, BTreeSet<SynsetId>>;

/// Synset of a lemma, or the singleton `lex:<pos>:<lemma>` when unmapped.
pub fn synset_of(lemma: &str, pos: Pos, map: &SynsetMap) -> SynsetId {
    map.get(lemma, pos)
        .cloned()
        .unwrap_or_else(|| SynsetId(format!("lex:{}:{}", pos.as_str(), lemma)))
}

pub fn resolve_synsets(words_by_pos: &WordsByPos, map: &SynsetMap) -> SynsetsByPos {
    words_by_pos
        .iter()
        .map(|(&pos, words)| {
            let synsets = words.iter().map(|w| synset_of(w, pos, map)).collect();
            (pos, synsets)
        })
        .collect()
}

/// Writes one JSON object per caption.
pub fn write_processed<W: std::io::Write>(
    captions: &[ProcessedCaption],
    mut out: W,
) -> std::io::Result<()> {
    for c in captions {
        serde_json::to_writer(&mut out, c)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_processed(path: impl AsRef<Path>) -> Result<Vec<ProcessedCaption>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_processed(BufReader::new(file))
}

pub fn parse_processed<R: BufRead>(reader: R) -> Result<Vec<ProcessedCaption>> {
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
        out.push(serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?);
    }
    Ok(out)
}

/// Fully analysed caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedCaption {
    pub caption_id: CaptionId,
    pub video_id: VideoId,
    /// Tagged tokens with stop words removed.
    pub tokens: Vec<TaggedToken>,
    pub words: BTreeSet<String>,
    pub words_by_pos: WordsByPos,
    pub synsets_by_pos: SynsetsByPos,
    /// Every token in order, stop words included (METEOR input).
    pub sequence: Vec<TaggedToken>,
    /// Porter stems of `sequence` surfaces.
    pub stems: Vec<String>,
}

impl ProcessedCaption {
    /// Builds the derived sets from a tagged token sequence.
    pub fn from_sequence(
        caption_id: CaptionId,
        video_id: VideoId,
        sequence: Vec<TaggedToken>,
        stoplist: &StopList,
        synsets: &SynsetMap,
    ) -> Self {
        let tokens: Vec<TaggedToken> = sequence
            .iter()
            .filter(|t| !stoplist.contains(&t.surface))
            .cloned()
            .collect();
        let mut words_by_pos = WordsByPos::new();
        for t in &tokens {
            words_by_pos
                .entry(t.pos)
                .or_default()
                .insert(t.lemma.clone());
        }
        let words = words_by_pos.values().flatten().cloned().collect();
        let synsets_by_pos = resolve_synsets(&words_by_pos, synsets);
        let stems = sequence.iter().map(|t| stem(&t.surface)).collect();
        ProcessedCaption {
            caption_id,
            video_id,
            tokens,
            words,
            words_by_pos,
            synsets_by_pos,
            sequence,
            stems,
        }
    }

    pub fn words_of(&self, pos: Pos) -> &BTreeSet<String> {
        self.words_by_pos.get(&pos).unwrap_or(empty_words())
    }

    /// Recomputes the synset sets against another map.
    pub fn resolve_with(&mut self, map: &SynsetMap) {
        self.synsets_by_pos = resolve_synsets(&self.words_by_pos, map);
    }
}

fn empty_words() -> &'static BTreeSet<String> {
    static EMPTY: BTreeSet<String> = BTreeSet::new();
    &EMPTY
}

/// Lemmas present in at least `ceil(fraction * n)` of the `n` captions,
/// per part of speech.
pub fn consensus_wordset<'a, I>(captions: I, fraction: f64) -> Result<WordsByPos>
where
    I: IntoIterator<Item = &'a ProcessedCaption>,
{
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "consensus fraction {fraction} not in (0, 1]"
        )));
    }
    let mut counts: BTreeMap<Pos, BTreeMap<&str, usize>> = BTreeMap::new();
    let mut n = 0usize;
    for caption in captions {
        n += 1;
        for (&pos, words) in &caption.words_by_pos {
            let per_pos = counts.entry(pos).or_default();
            for w in words {
                *per_pos.entry(w.as_str()).or_default() += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput("consensus over no captions".into()));
    }
    let required = required_count(fraction, n);
    Ok(counts
        .into_iter()
        .map(|(pos, words)| {
            let kept: BTreeSet<String> = words
                .into_iter()
                .filter(|&(_, c)| c >= required)
                .map(|(w, _)| w.to_owned())
                .collect();
            (pos, kept)
        })
        .filter(|(_, kept)| !kept.is_empty())
        .collect())
}

/// `ceil(fraction * n)`, tolerant of representation error such as
/// `0.3 * 10 = 3.0000000000000004`, and never below 1.
fn required_count(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    let rounded = exact.round();
    let c = if (exact - rounded).abs() < 1e-9 {
        rounded
    } else {
        exact.ceil()
    };
    (c as usize).max(1)
}

/// Stop list, lexicon and synset map applied to every caption.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub stoplist: StopList,
    pub lexicon: Lexicon,
    pub synsets: SynsetMap,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline {
            stoplist: StopList::builtin(),
            lexicon: Lexicon::builtin(),
            synsets: SynsetMap::new(),
        }
    }
}

impl Pipeline {
    pub fn new(stoplist: StopList, lexicon: Lexicon, synsets: SynsetMap) -> Self {
        Pipeline {
            stoplist,
            lexicon,
            synsets,
        }
    }

    /// Uses supplied parses when present, the built-in tagger otherwise.
    pub fn process(&self, caption: &Caption) -> ProcessedCaption {
        let sequence = match &caption.pretagged {
            Some(tokens) => tokens.clone(),
            None => tag_pos(&tokenize(&caption.text), &self.lexicon),
        };
        ProcessedCaption::from_sequence(
            caption.id.clone(),
            caption.video_id.clone(),
            sequence,
            &self.stoplist,
            &self.synsets,
        )
    }

    pub fn process_text(&self, caption_id: &str, video_id: &str, text: &str) -> ProcessedCaption {
        let sequence = tag_pos(&tokenize(text), &self.lexicon);
        ProcessedCaption::from_sequence(
            CaptionId::from(caption_id),
            VideoId::from(video_id),
            sequence,
            &self.stoplist,
            &self.synsets,
        )
    }

    /// Processes every caption, in corpus order.
    pub fn process_corpus(&self, corpus: &Corpus) -> Vec<ProcessedCaption> {
        corpus
            .captions()
            .par_iter()
            .map(|c| self.process(c))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("Stir food in the pan."),
            strings(&["stir", "food", "in", "the", "pan"])
        );
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("A man doing an origami tutorial"),
            strings(&["a", "man", "doing", "an", "origami", "tutorial"])
        );
        assert_eq!(tokenize("--salt&pepper--"), strings(&["salt", "pepper"]));
    }

    #[test]
    fn builtin_stoplist_is_pinned() {
        let s = StopList::builtin();
        assert_eq!(s.len(), 179);
        assert!(s.contains("the") && s.contains("in") && s.contains("wouldn't"));
    }

    #[test]
    fn stopword_removal() {
        let toks = strings(&["stir", "food", "in", "the", "pan"]);
        let stop: StopList = ["in", "the", "a"].into_iter().collect();
        assert_eq!(
            remove_stopwords(&toks, &stop),
            strings(&["stir", "food", "pan"])
        );
        assert!(remove_stopwords(&strings(&["in", "the"]), &stop).is_empty());
        assert_eq!(remove_stopwords(&toks, &StopList::empty()), toks);
    }

    #[test]
    fn tagger_lookup_and_suffixes() {
        let lex: Lexicon = [("stir", Pos::Verb), ("pan", Pos::Noun)]
            .into_iter()
            .collect();
        let tagged = tag_pos(&["stir", "pan"], &lex);
        assert_eq!(
            tagged[0],
            TaggedToken::new("stir", "stir", Pos::Verb).unwrap()
        );
        assert_eq!(
            tagged[1],
            TaggedToken::new("pan", "pan", Pos::Noun).unwrap()
        );

        let lex: Lexicon = [("stir", Pos::Verb)].into_iter().collect();
        assert_eq!(
            tag_pos(&["stirring"], &lex)[0],
            TaggedToken::new("stirring", "stir", Pos::Verb).unwrap()
        );
        assert_eq!(
            tag_pos(&["zxqv"], &lex)[0],
            TaggedToken::new("zxqv", "zxqv", Pos::Other).unwrap()
        );
    }

    #[test]
    fn builtin_lexicon_lemmatizes_inflections() {
        let lex = Lexicon::builtin();
        let tagged = tag_pos(&tokenize("Slicing tomatoes, fried onions and pieces"), &lex);
        let lemmas: Vec<_> = tagged.iter().map(|t| (t.lemma.as_str(), t.pos)).collect();
        assert_eq!(
            lemmas,
            vec![
                ("slice", Pos::Verb),
                ("tomato", Pos::Noun),
                ("fried", Pos::Adj),
                ("onion", Pos::Noun),
                ("and", Pos::Other),
                ("piece", Pos::Noun),
            ]
        );
    }

    #[test]
    fn lexicon_first_row_wins() {
        let lex = Lexicon::parse("cut\tVERB\ncut\tNOUN\n".as_bytes()).unwrap();
        assert_eq!(lex.get("cut"), Some(Pos::Verb));
        assert!(Lexicon::parse("cut\tVB\n".as_bytes()).is_err());
    }

    #[test]
    fn synset_resolution() {
        let map: SynsetMap = [
            ("stir", Pos::Verb, "s1"),
            ("mix", Pos::Verb, "s1"),
            ("pan", Pos::Noun, "s9"),
        ]
        .into_iter()
        .collect();
        let mut w = WordsByPos::new();
        w.insert(
            Pos::Verb,
            ["stir", "mix"].iter().map(|s| s.to_string()).collect(),
        );
        w.insert(Pos::Noun, ["pan".to_string()].into());
        let c = resolve_synsets(&w, &map);
        assert_eq!(c[&Pos::Verb], [SynsetId::from("s1")].into());
        assert_eq!(c[&Pos::Noun], [SynsetId::from("s9")].into());

        let c = resolve_synsets(&w, &SynsetMap::new());
        assert_eq!(c[&Pos::Verb].len(), w[&Pos::Verb].len());
        assert!(c[&Pos::Verb].contains(&SynsetId::from("lex:VERB:stir")));
    }

    fn processed(id: &str, text: &str) -> ProcessedCaption {
        Pipeline::default().process_text(id, "v", text)
    }

    #[test]
    fn processed_caption_invariants() {
        let p = processed("c", "Stir the food in the pan");
        assert_eq!(p.sequence.len(), 6);
        assert_eq!(p.stems.len(), 6);
        assert!(!p.words.contains("the"));
        assert_eq!(
            p.words,
            ["food", "pan", "stir"]
                .iter()
                .map(|s| s.to_string())
                .collect()
        );
        for (pos, words) in &p.words_by_pos {
            assert!(p.synsets_by_pos[pos].len() <= words.len());
        }
    }

    #[test]
    fn consensus_rules() {
        let caps = [
            processed("a", "stir pan"),
            processed("b", "mix pan"),
            processed("c", "mix bowl"),
            processed("d", "add pan"),
        ];
        let c = consensus_wordset(&caps, 0.25).unwrap();
        assert!(c[&Pos::Verb].contains("stir"), "1 of 4 meets 25%");
        assert!(!c[&Pos::Noun].contains("knife"));

        let c = consensus_wordset(&caps, 0.5).unwrap();
        assert_eq!(c[&Pos::Verb], ["mix".to_string()].into());
        assert_eq!(c[&Pos::Noun], ["pan".to_string()].into());

        let single = consensus_wordset(&caps[..1], 0.25).unwrap();
        assert_eq!(single, caps[0].words_by_pos);

        assert!(consensus_wordset(&caps[..0], 0.25).is_err());
        assert!(consensus_wordset(&caps, 0.0).is_err());
    }

    #[test]
    fn required_count_handles_representation_error() {
        assert_eq!(required_count(0.3, 10), 3);
        assert_eq!(required_count(0.25, 4), 1);
        assert_eq!(required_count(0.25, 5), 2);
        assert_eq!(required_count(1e-12, 7), 1);
        assert_eq!(required_count(1.0, 7), 7);
    }
}
