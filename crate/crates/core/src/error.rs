use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input record. `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("demonym {demonym:?} maps to both {first:?} and {second:?}")]
    DemonymConflict {
        demonym: String,
        first: String,
        second: String,
    },

    #[error("header declares {expected} vectors but {found} rows were read")]
    CountMismatch { expected: usize, found: usize },

    #[error("triple sets were built against different vocabularies")]
    VocabularyMismatch,

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("invalid {kind} id {id} (have {len})")]
    InvalidId {
        kind: &'static str,
        id: usize,
        len: usize,
    },

    #[error("no negative sample outside the positive set after {attempts} attempts")]
    NegativeSamplingExhausted { attempts: usize },

    #[error("positive and negative triples use different relations")]
    RelationMismatch,

    #[error("non-finite gradient entry")]
    NonFiniteGradient,

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("kendall tau undefined: {0}")]
    UndefinedTau(&'static str),

    #[error("term {0:?} is missing from the similarity matrix")]
    MissingTerm(String),

    #[error("no prediction for triple ({head}, {relation}, {tail})")]
    MissingPrediction {
        head: usize,
        relation: usize,
        tail: usize,
    },

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
