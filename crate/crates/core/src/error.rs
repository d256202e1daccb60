use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("duplicate caption id {id:?} on line {line}")]
    DuplicateCaption { id: String, line: usize },

    #[error("line {line}: conflicting synset for ({lemma}, {pos}): {existing} vs {new}")]
    ConflictingSynset {
        line: usize,
        lemma: String,
        pos: String,
        existing: String,
        new: String,
    },

    #[error("unknown part-of-speech tag {0:?}")]
    UnknownPos(String),

    #[error("embedding {id:?}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("embedding {id:?}: non-finite value")]
    NonFinite { id: String },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("missing embedding for {0:?}")]
    MissingEmbedding(String),

    #[error("caption {0:?} has not been processed")]
    UnprocessedCaption(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ids do not align; first offenders: {0:?}")]
    IdMismatch(Vec<String>),

    #[error("no valid triplet: {0}")]
    NoValidTriplet(String),

    #[error("bad binary header: expected magic {expected:?}")]
    BadMagic { expected: &'static str },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
