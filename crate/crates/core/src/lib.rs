//! Neighbourhood-based collaborative filtering similarity lists with a fast
//! path for users whose ratings duplicate an existing user.
//!
//! * [`ratings`]: sparse rating storage, MovieLens/CSV parsing, synthetic data.
//! * [`similarity`]: cosine similarity and the sorted per-user lists.
//! * [`twin`]: twin search, list copying and insertion with fallback.
//! * [`distribution`]: normal CDF and the Gaussian largest-bucket bound.

pub mod candidates;
pub mod distribution;
pub mod error;
pub mod ratings;
pub mod similarity;
pub mod twin;

pub use candidates::{intersect, CandidateSet};
pub use distribution::{
    fit_gaussian, largest_bucket, lp_optimum, normal_cdf, sublist_fraction, GaussianModel,
    LpSolution, SublistParams, SublistReport,
};
pub use error::{Error, Result};
pub use ratings::{
    generate_synthetic, parse_csv, parse_movielens, DataSource, DatasetMeta, ItemId, Rating,
    RatingMatrix, UserId,
};
pub use similarity::{
    build_list_full, cosine, SimilarityEntry, SimilarityList, SimilarityStore, DEFAULT_TOLERANCE,
};
pub use twin::{
    add_user_fast, add_user_full, copy_list, probe_anchor, twin_search, verify_twin, OpCounters,
    TwinSearchConfig, TwinSearchOutcome, DEFAULT_ANCHORS,
};
