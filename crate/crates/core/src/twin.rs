//! Fast similarity-list construction for users whose ratings duplicate an
//! existing user.
//!
//! A new user `u0` is compared against `c` random anchor users. Any exact
//! twin `t` of `u0` has `sim(t, a) == sim(u0, a)` for every anchor `a`, so it
//! sits in the equal-similarity run of each anchor's list (or is the anchor
//! itself, when the probe returns 1). The intersection of those runs is a
//! small candidate set; the first candidate whose ratings match exactly is the
//! twin and its list is copied instead of computing `n - 1` similarities.

use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::candidates::{intersect, CandidateSet};
use crate::error::{Error, Result};
use crate::ratings::{Rating, RatingMatrix, UserId};
use crate::similarity::{
    build_list_full, build_list_reusing, cosine, SimilarityEntry, SimilarityList, SimilarityStore,
    DEFAULT_TOLERANCE,
};

pub const DEFAULT_ANCHORS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct TwinSearchConfig {
    /// Number of anchor users probed (`c`).
    pub anchors: usize,
    pub seed: u64,
    /// Similarity-equality tolerance for the anchor range searches.
    pub tolerance: f64,
}

impl Default for TwinSearchConfig {
    fn default() -> Self {
        TwinSearchConfig {
            anchors: DEFAULT_ANCHORS,
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// Work done by one insertion, one field per cost term.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub sims: usize,
    pub range_searches: usize,
    /// Size of the anchor intersection.
    pub set0: usize,
    pub verifications: usize,
    pub fallback: bool,
}

impl OpCounters {
    pub const CSV_HEADER: &'static str = "phase,sims,range_searches,set0,verifications,fallback";

    pub fn csv_row(&self, phase: &str) -> String {
        format!(
            "{phase},{},{},{},{},{}",
            self.sims, self.range_searches, self.set0, self.verifications, self.fallback
        )
    }
}

#[derive(Clone, Debug)]
pub struct TwinSearchOutcome {
    /// The copied list, when a twin was found.
    pub list: Option<SimilarityList>,
    pub twin: Option<UserId>,
    pub counters: OpCounters,
    /// `sim(u0, anchor)` for every probed anchor.
    pub probes: Vec<SimilarityEntry>,
}

impl TwinSearchOutcome {
    pub fn found(&self) -> bool {
        self.list.is_some()
    }
}

fn probe(
    matrix: &RatingMatrix,
    store: &SimilarityStore,
    u0: UserId,
    anchor: UserId,
    tolerance: f64,
) -> Result<(f64, CandidateSet)> {
    if anchor == u0 {
        return Err(Error::SelfAnchor(u0));
    }
    let list = store.require_list(anchor)?;
    let sim = cosine(matrix, u0, anchor)?;
    let mut set = list.equal_range(sim, tolerance);
    if (sim - 1.0).abs() <= tolerance {
        set.insert(anchor);
    }
    Ok((sim, set))
}

/// Users whose similarity to `anchor` equals `sim(u0, anchor)`, plus the
/// anchor itself when that similarity is 1.
pub fn probe_anchor(
    matrix: &RatingMatrix,
    store: &SimilarityStore,
    u0: UserId,
    anchor: UserId,
    tolerance: f64,
) -> Result<CandidateSet> {
    probe(matrix, store, u0, anchor, tolerance).map(|(_, set)| set)
}

/// Exact rating-row comparison. Integer stars, no tolerance involved.
pub fn verify_twin(matrix: &RatingMatrix, u0: UserId, candidate: UserId) -> Result<bool> {
    matrix.row_equal(u0, candidate)
}

/// `u0`'s list derived from its twin's: the twin's entries, minus any entry
/// for `u0`, plus `(twin, 1.0)`.
pub fn copy_list(store: &SimilarityStore, twin: UserId, u0: UserId) -> Result<SimilarityList> {
    if store.list(u0).is_some() {
        return Err(Error::ListAlreadyPresent(u0));
    }
    if twin == u0 {
        return Err(Error::DuplicateEntry {
            owner: u0,
            other: u0,
        });
    }
    let mut list = store.require_list(twin)?.copy_for(u0);
    // the twin never appears in its own list
    list.insert_unchecked(SimilarityEntry::new(twin, 1.0));
    Ok(list)
}

/// Draws `count` distinct users that own a list, excluding `u0`.
pub fn sample_anchors(
    store: &SimilarityStore,
    u0: UserId,
    count: usize,
    seed: u64,
) -> Result<Vec<UserId>> {
    if count == 0 {
        return Err(Error::ZeroAnchors);
    }
    let pool: Vec<UserId> = store
        .lists()
        .map(|l| l.owner())
        .filter(|&u| u != u0)
        .collect();
    if count > pool.len() {
        return Err(Error::TooManyAnchors {
            c: count,
            available: pool.len(),
        });
    }
    let mut rng = StdRng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

/// Twin search with a fixed anchor sequence.
pub fn twin_search_with_anchors(
    matrix: &RatingMatrix,
    store: &SimilarityStore,
    u0: UserId,
    anchors: &[UserId],
    tolerance: f64,
) -> Result<TwinSearchOutcome> {
    matrix.check_user(u0)?;
    if store.list(u0).is_some() {
        return Err(Error::ListAlreadyPresent(u0));
    }
    let mut counters = OpCounters::default();
    let mut probes = Vec::with_capacity(anchors.len());
    let mut sets = Vec::with_capacity(anchors.len());
    for &anchor in anchors {
        let (sim, set) = probe(matrix, store, u0, anchor, tolerance)?;
        counters.sims += 1;
        counters.range_searches += 1;
        probes.push(SimilarityEntry::new(anchor, sim));
        sets.push(set);
    }
    let set0 = intersect(&sets);
    counters.set0 = set0.len();

    for candidate in set0.iter() {
        counters.verifications += 1;
        if verify_twin(matrix, u0, candidate)? {
            let list = copy_list(store, candidate, u0)?;
            return Ok(TwinSearchOutcome {
                list: Some(list),
                twin: Some(candidate),
                counters,
                probes,
            });
        }
    }
    Ok(TwinSearchOutcome {
        list: None,
        twin: None,
        counters,
        probes,
    })
}

/// Looks for an existing twin of `u0` and, if one exists, returns a copy of
/// its similarity list. Read-only on both matrix and store.
///
/// `u0` must already be in the matrix but not in the store.
pub fn twin_search(
    matrix: &RatingMatrix,
    store: &SimilarityStore,
    u0: UserId,
    config: &TwinSearchConfig,
) -> Result<TwinSearchOutcome> {
    let anchors = sample_anchors(store, u0, config.anchors, config.seed)?;
    twin_search_with_anchors(matrix, store, u0, &anchors, config.tolerance)
}

/// Adds a user, building its list through twin search with a full-build
/// fallback, then mirrors the list into every other user's list.
///
/// On the fallback path the anchor similarities already computed are reused,
/// so the total cosine count is `n - 1` either way the first twin goes.
pub fn add_user_fast(
    matrix: &mut RatingMatrix,
    store: &mut SimilarityStore,
    ratings: Vec<Rating>,
    config: &TwinSearchConfig,
) -> Result<(UserId, OpCounters)> {
    if config.anchors == 0 {
        return Err(Error::ZeroAnchors);
    }
    if config.anchors > store.len() {
        return Err(Error::TooManyAnchors {
            c: config.anchors,
            available: store.len(),
        });
    }
    let u0 = matrix.add_user(ratings)?;
    let outcome = twin_search(matrix, store, u0, config)?;
    let mut counters = outcome.counters;
    let list = match outcome.list {
        Some(list) => list,
        None => {
            let (list, computed) = build_list_reusing(matrix, u0, &outcome.probes)?;
            counters.sims += computed;
            counters.fallback = true;
            list
        }
    };
    store.link(list)?;
    Ok((u0, counters))
}

/// The traditional path: full list build plus the same symmetric insertion.
pub fn add_user_full(
    matrix: &mut RatingMatrix,
    store: &mut SimilarityStore,
    ratings: Vec<Rating>,
) -> Result<(UserId, OpCounters)> {
    let u0 = matrix.add_user(ratings)?;
    let list = build_list_full(matrix, u0)?;
    let counters = OpCounters {
        sims: list.len(),
        ..OpCounters::default()
    };
    store.link(list)?;
    Ok((u0, counters))
}
