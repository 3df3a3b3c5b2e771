use thiserror::Error;

use crate::ratings::{ItemId, UserId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("line {line}: rating {value} outside 1..=5")]
    RatingOutOfRange { line: usize, value: i64 },

    #[error("line {line}: duplicate rating for user {user}, item {item}")]
    DuplicateRating { line: usize, user: u64, item: u64 },

    #[error("item index {item} out of range (m = {m})")]
    ItemOutOfRange { item: ItemId, m: usize },

    #[error("user {user} out of range (n = {n})")]
    UserOutOfRange { user: UserId, n: usize },

    #[error("rating vector must be non-empty")]
    EmptyRatings,

    #[error("rating vector must be sorted by item with unique items")]
    UnsortedRatings,

    #[error("rating {0} outside 1..=5")]
    InvalidRating(u8),

    #[error("density {0} must be in (0, 1] and yield at least one rating per user")]
    InvalidDensity(f64),

    #[error("synthetic matrix needs n >= 1 and m >= 1")]
    EmptyShape,

    #[error("user {0} has no ratings (zero norm)")]
    ZeroNorm(UserId),

    #[error("user {other} already present in the list of user {owner}")]
    DuplicateEntry { owner: UserId, other: UserId },

    #[error("user {0} has no similarity list")]
    MissingList(UserId),

    #[error("user {0} already has a similarity list")]
    ListAlreadyPresent(UserId),

    #[error("anchor count {c} exceeds the {available} users available")]
    TooManyAnchors { c: usize, available: usize },

    #[error("user {0} cannot anchor its own search")]
    SelfAnchor(UserId),

    #[error("anchor count must be at least 1")]
    ZeroAnchors,

    #[error("need at least {needed} users, have {n}")]
    TooFewUsers { needed: usize, n: usize },

    #[error("denominator {0} is not positive")]
    DegenerateDenominator(f64),

    #[error("invalid sub-list parameters: {0}")]
    InvalidParams(String),

    #[error("similarity values have zero variance")]
    ZeroVariance,

    #[error("need at least {needed} similarity values, have {len}")]
    TooFewSamples { needed: usize, len: usize },

    #[error("partition count must be at least 1")]
    ZeroPartitions,

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
