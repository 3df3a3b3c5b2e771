//! k-twin insertion timing: twin search versus the full list build.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use twinsearch::{
    add_user_fast, add_user_full, DatasetMeta, OpCounters, Rating, RatingMatrix, SimilarityStore,
    TwinSearchConfig, UserId, DEFAULT_ANCHORS, DEFAULT_TOLERANCE,
};

use crate::dataset::{load, DatasetSpec, Format, Mode, SyntheticShape};
use crate::error::CliError;

pub const CSV_HEADER: &str =
    "method,twin_index,wall_time_ns,sims,range_searches,set0,verifications,fallback";

pub const DEFAULT_REPEATS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub dataset: DatasetSpec,
    pub mode: Mode,
    /// Number of identical users injected.
    pub k: usize,
    pub anchors: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub out: Option<PathBuf>,
    /// Timed runs per measurement; the median is reported.
    pub repeats: usize,
}

impl BenchConfig {
    pub fn new(dataset: DatasetSpec) -> Self {
        BenchConfig {
            dataset,
            mode: Mode::User,
            k: 30,
            anchors: DEFAULT_ANCHORS,
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
            out: None,
            repeats: DEFAULT_REPEATS,
        }
    }

    pub fn synthetic(shape: SyntheticShape, seed: u64) -> Self {
        BenchConfig::new(DatasetSpec {
            path: None,
            format: Format::Synthetic,
            synthetic: shape,
            seed,
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    TwinSearch,
    Baseline,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::TwinSearch => "twinsearch",
            Method::Baseline => "baseline",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    /// 1-based.
    pub twin_index: usize,
    pub wall_time_ns: u128,
    pub counters: OpCounters,
}

impl BenchRow {
    pub fn csv(&self) -> String {
        let c = &self.counters;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method,
            self.twin_index,
            self.wall_time_ns,
            c.sims,
            c.range_searches,
            c.set0,
            c.verifications,
            c.fallback
        )
    }
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub meta: DatasetMeta,
    /// Users with a list before the first twin arrives.
    pub base_users: usize,
    /// Dense id (in the loaded matrix) of the user whose ratings were cloned.
    pub source: UserId,
    pub rows: Vec<BenchRow>,
}

impl BenchResult {
    pub fn total_ns(&self, method: Method) -> u128 {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.wall_time_ns)
            .sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(w, "{}", row.csv())?;
        }
        Ok(())
    }
}

/// Picks the row to clone: a seeded choice among users whose ratings are not
/// shared with anyone else, so the first injected copy has no twin.
pub fn choose_source(matrix: &RatingMatrix, seed: u64) -> Result<UserId, CliError> {
    let mut counts: HashMap<&[Rating], usize> = HashMap::new();
    for u in matrix.user_ids() {
        *counts.entry(matrix.row(u)?).or_default() += 1;
    }
    let unique: Vec<UserId> = matrix
        .user_ids()
        .filter(|&u| counts[matrix.row(u).expect("valid id")] == 1)
        .collect();
    let mut rng = StdRng::seed_from_u64(seed);
    unique
        .choose(&mut rng)
        .copied()
        .ok_or_else(|| CliError::Usage("dataset has no user with a unique rating row".into()))
}

struct Arm {
    matrix: RatingMatrix,
    store: SimilarityStore,
}

/// Runs `op` on `repeats` fresh copies of the arm, keeps the last resulting
/// state, and returns the median wall time.
fn measure<F>(arm: &mut Arm, repeats: usize, op: F) -> Result<(u128, OpCounters), CliError>
where
    F: Fn(&mut RatingMatrix, &mut SimilarityStore) -> twinsearch::Result<(UserId, OpCounters)>,
{
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let mut matrix = arm.matrix.clone();
        // a fresh copy has no spare capacity; growing it is not what is measured
        matrix.reserve_users(1);
        let mut store = arm.store.clone();
        let start = Instant::now();
        let (_, counters) = op(&mut matrix, &mut store)?;
        times.push(start.elapsed().as_nanos().max(1));
        last = Some((counters, matrix, store));
    }
    let (counters, matrix, store) = last.expect("at least one repeat");
    arm.matrix = matrix;
    arm.store = store;
    times.sort_unstable();
    Ok((times[times.len() / 2], counters))
}

/// Injects `k` copies of one existing user's ratings (the source row is held
/// out of the base data) and times each insertion through both paths on two
/// independent copies of the store. The stores are compared entry for entry
/// after every twin.
pub fn cmd_bench(config: &BenchConfig) -> Result<BenchResult, CliError> {
    if config.k == 0 || config.anchors == 0 {
        return Err(CliError::Usage("k and c must be at least 1".into()));
    }
    let (loaded, meta) = load(&config.dataset, config.mode)?;
    let source = choose_source(&loaded, config.seed)?;
    let twin_row = loaded.row(source)?.to_vec();
    let base = loaded.without_user(source)?;
    let store = SimilarityStore::build_all(&base)?.with_tolerance(config.tolerance);
    let base_users = base.n();

    let mut fast = Arm {
        matrix: base.clone(),
        store: store.clone(),
    };
    let mut slow = Arm {
        matrix: base,
        store,
    };
    let mut rows = Vec::with_capacity(2 * config.k);
    for j in 1..=config.k {
        let search = TwinSearchConfig {
            anchors: config.anchors,
            seed: config.seed.wrapping_add(j as u64),
            tolerance: config.tolerance,
        };
        let (t_fast, c_fast) = measure(&mut fast, config.repeats, |m, s| {
            add_user_fast(m, s, twin_row.clone(), &search)
        })?;
        let (t_slow, c_slow) = measure(&mut slow, config.repeats, |m, s| {
            add_user_full(m, s, twin_row.clone())
        })?;
        if fast.store != slow.store || fast.matrix != slow.matrix {
            return Err(CliError::Correctness(format!(
                "stores diverged after twin {j} (seed {})",
                config.seed
            )));
        }
        rows.push(BenchRow {
            method: Method::TwinSearch,
            twin_index: j,
            wall_time_ns: t_fast,
            counters: c_fast,
        });
        rows.push(BenchRow {
            method: Method::Baseline,
            twin_index: j,
            wall_time_ns: t_slow,
            counters: c_slow,
        });
    }

    let result = BenchResult {
        meta,
        base_users,
        source,
        rows,
    };
    if let Some(path) = &config.out {
        let file =
            File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        result.write_csv(BufWriter::new(file))?;
    }
    Ok(result)
}
