use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid letter {0:?}: expected one of 0, 1, 2")]
    InvalidLetter(char),
    #[error("morphism image of {0} is empty")]
    ErasingMorphism(u8),
    #[error("{0:?} is not a bijection on {{0,1,2}}")]
    NotAPermutation([u8; 3]),
    #[error("{morphism} is not prolongable on {seed}")]
    NotProlongable { morphism: String, seed: u8 },
    #[error("{piece} is not a prefix of block {block}")]
    NotCommonPrefix { block: String, piece: String },
    #[error("{piece} is not a suffix of block {block}")]
    NotCommonSuffix { block: String, piece: String },
    #[error("conjugation identity fails for {morphism} at letter {letter}")]
    ConjugationIdentity { morphism: String, letter: u8 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("operation needs a nonempty word")]
    EmptyWord,
    #[error("factor length {n} out of range for a word of length {len}")]
    LengthOutOfRange { n: usize, len: usize },
    #[error("prefix of length {len} is too short: need at least {needed}")]
    PrefixTooShort { len: usize, needed: usize },
    #[error("invalid avoidance spec: {0}")]
    InvalidSpec(String),
    #[error("listed word {0} already violates the avoidance spec")]
    ListedWordViolatesSpec(String),
    #[error("search reached the cap of {cap} letters before exhausting")]
    CapReached { cap: usize },
    #[error("block {block} cannot be discarded: {reason}")]
    NotJustified { block: String, reason: String },
    #[error("block lengths are not pairwise distinct: {0}")]
    AmbiguousRoles(String),
    #[error("no witness found: {0}")]
    NoWitnessFound(String),
    #[error("structure mismatch: {0}")]
    StructureMismatch(String),
    #[error("certificate schema error at {location}: {message}")]
    Schema { location: String, message: String },
    #[error("corrupt cache line {line}: {message}")]
    CorruptCache { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Error {
        Error::Io(e.to_string())
    }
}
