//! Randomised oracle-equivalence checks of the twin-search fast path.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use twinsearch::{
    add_user_fast, add_user_full, build_list_full, generate_synthetic, twin_search, Rating,
    RatingMatrix, SimilarityList, SimilarityStore, TwinSearchConfig, TwinSearchOutcome, UserId,
};

use crate::error::CliError;

/// Similarity tolerance when comparing a fast-path list against the oracle.
pub const LIST_SIM_TOLERANCE: f64 = 1e-9;

/// Shape ranges for the random instances.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialShape {
    pub users: (usize, usize),
    pub items: (usize, usize),
    pub density: (f64, f64),
}

impl Default for TrialShape {
    fn default() -> Self {
        TrialShape {
            users: (50, 500),
            items: (20, 200),
            density: (0.05, 0.2),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub trials: usize,
    pub passed: usize,
    /// `(trial seed, reason)` for every failed trial.
    pub failures: Vec<(u64, String)>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn vacuous(&self) -> bool {
        self.trials == 0
    }
}

/// Entry-for-entry comparison: ids and order exact, sims within `tol`.
pub fn compare_lists(got: &SimilarityList, want: &SimilarityList, tol: f64) -> Result<(), String> {
    if got.owner() != want.owner() {
        return Err(format!("owner {} != {}", got.owner(), want.owner()));
    }
    if got.len() != want.len() {
        return Err(format!("length {} != {}", got.len(), want.len()));
    }
    for (pos, (g, w)) in got.entries().zip(want.entries()).enumerate() {
        if g.other != w.other {
            return Err(format!("position {pos}: user {} != {}", g.other, w.other));
        }
        if (g.sim - w.sim).abs() > tol {
            return Err(format!("position {pos}: sim {} != {}", g.sim, w.sim));
        }
    }
    Ok(())
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(trial as u64)
}

fn random_instance(shape: &TrialShape, rng: &mut StdRng) -> twinsearch::Result<RatingMatrix> {
    let n = rng.gen_range(shape.users.0..=shape.users.1);
    let m = rng.gen_range(shape.items.0..=shape.items.1);
    let density = rng.gen_range(shape.density.0..=shape.density.1);
    // keep at least one rating per user
    let density = density.max(1.0 / m as f64);
    generate_synthetic(n, m, density, rng.gen())
}

/// One trial: random matrix, a copy of a random user appended, and the
/// `search` result compared against the full build.
pub fn oracle_trial<F>(shape: &TrialShape, seed: u64, search: &F) -> Result<(), String>
where
    F: Fn(
        &RatingMatrix,
        &SimilarityStore,
        UserId,
        &TwinSearchConfig,
    ) -> twinsearch::Result<TwinSearchOutcome>,
{
    let mut rng = StdRng::seed_from_u64(seed);
    let mut matrix = random_instance(shape, &mut rng).map_err(|e| e.to_string())?;
    let store = SimilarityStore::build_all(&matrix).map_err(|e| e.to_string())?;
    let source = UserId(rng.gen_range(0..matrix.n() as u32));
    let row = matrix.row(source).map_err(|e| e.to_string())?.to_vec();
    let u0 = matrix.add_user(row).map_err(|e| e.to_string())?;
    let config = TwinSearchConfig {
        seed: rng.gen(),
        ..TwinSearchConfig::default()
    };
    let outcome = search(&matrix, &store, u0, &config).map_err(|e| e.to_string())?;
    let list = outcome.list.ok_or_else(|| {
        format!(
            "twin of {source} not found (set0 = {})",
            outcome.counters.set0
        )
    })?;
    let oracle = build_list_full(&matrix, u0).map_err(|e| e.to_string())?;
    compare_lists(&list, &oracle, LIST_SIM_TOLERANCE)
}

/// Runs `trials` oracle trials in parallel with a caller-supplied search.
pub fn verify_with<F>(trials: usize, seed: u64, shape: &TrialShape, search: F) -> VerifyReport
where
    F: Fn(
            &RatingMatrix,
            &SimilarityStore,
            UserId,
            &TwinSearchConfig,
        ) -> twinsearch::Result<TwinSearchOutcome>
        + Sync,
{
    let results: Vec<(u64, Result<(), String>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, t);
            (s, oracle_trial(shape, s, &search))
        })
        .collect();
    let failures: Vec<(u64, String)> = results
        .into_iter()
        .filter_map(|(s, r)| r.err().map(|e| (s, e)))
        .collect();
    VerifyReport {
        trials,
        passed: trials - failures.len(),
        failures,
    }
}

/// Fallback check: a user with no twin goes through the fast-path insertion
/// and must leave the store identical to the plain full-build insertion.
pub fn fallback_trial(shape: &TrialShape, seed: u64) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let matrix = random_instance(shape, &mut rng).map_err(|e| e.to_string())?;
    let store = SimilarityStore::build_all(&matrix).map_err(|e| e.to_string())?;
    let row = unique_row(&matrix, &mut rng);

    let (mut mf, mut sf) = (matrix.clone(), store.clone());
    let config = TwinSearchConfig {
        seed: rng.gen(),
        ..TwinSearchConfig::default()
    };
    let (_, counters) =
        add_user_fast(&mut mf, &mut sf, row.clone(), &config).map_err(|e| e.to_string())?;
    let (mut ms, mut ss) = (matrix, store);
    add_user_full(&mut ms, &mut ss, row).map_err(|e| e.to_string())?;
    if !counters.fallback {
        return Err("fallback flag not set for a user without a twin".into());
    }
    if counters.sims != ms.n() - 1 {
        return Err(format!(
            "fallback computed {} sims, expected {}",
            counters.sims,
            ms.n() - 1
        ));
    }
    if sf != ss {
        return Err("fallback store differs from the baseline store".into());
    }
    sf.audit()
}

/// A random row different from every existing row.
fn unique_row(matrix: &RatingMatrix, rng: &mut StdRng) -> Vec<Rating> {
    loop {
        let len = rng.gen_range(1..=matrix.m().min(20));
        let mut items = rand::seq::index::sample(rng, matrix.m(), len).into_vec();
        items.sort_unstable();
        let row: Vec<Rating> = items
            .into_iter()
            .map(|i| Rating::new(i as u32, rng.gen_range(1..=5)))
            .collect();
        if matrix
            .user_ids()
            .all(|u| matrix.row(u).expect("valid id") != &row[..])
        {
            return row;
        }
    }
}

pub fn verify_fallback(trials: usize, seed: u64, shape: &TrialShape) -> VerifyReport {
    let failures: Vec<(u64, String)> = (0..trials)
        .into_par_iter()
        .filter_map(|t| {
            let s = trial_seed(seed, t);
            fallback_trial(shape, s).err().map(|e| (s, e))
        })
        .collect();
    VerifyReport {
        trials,
        passed: trials - failures.len(),
        failures,
    }
}

/// The `verify` subcommand: oracle trials with the real twin search, then the
/// same number of fallback trials.
pub fn cmd_verify(trials: usize, seed: u64) -> Result<(VerifyReport, VerifyReport), CliError> {
    let shape = TrialShape::default();
    let oracle = verify_with(trials, seed, &shape, twin_search);
    let fallback = verify_fallback(trials, seed, &shape);
    if let Some((s, why)) = oracle.failures.first().or(fallback.failures.first()) {
        return Err(CliError::Correctness(format!("trial seed {s}: {why}")));
    }
    Ok((oracle, fallback))
}
