//! Per-user similarity distributions and measured candidate-set sizes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use twinsearch::distribution::{bucket_of, largest_bucket};
use twinsearch::{
    twin_search, DatasetMeta, Error, SimilarityStore, TwinSearchConfig, UserId, DEFAULT_ANCHORS,
    DEFAULT_TOLERANCE,
};

use crate::dataset::{load, DatasetSpec, Mode};
use crate::error::CliError;

pub const CSV_HEADER: &str = "user,mu,sigma,x,bucket_max_fraction,eq3_fraction";
pub const SET0_CSV_HEADER: &str = "seed,source,set0,n_over_125";

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzeConfig {
    pub dataset: DatasetSpec,
    pub mode: Mode,
    /// Bucket count over [0, 1].
    pub partitions: u32,
    /// Number of twin injections measured.
    pub seeds: usize,
    pub anchors: usize,
    pub tolerance: f64,
    pub out: Option<PathBuf>,
}

impl AnalyzeConfig {
    pub fn new(dataset: DatasetSpec) -> Self {
        AnalyzeConfig {
            dataset,
            mode: Mode::User,
            partitions: 10,
            seeds: 50,
            anchors: DEFAULT_ANCHORS,
            tolerance: DEFAULT_TOLERANCE,
            out: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserRow {
    pub user: u64,
    pub mu: f64,
    pub sigma: f64,
    pub partitions: u32,
    pub bucket_max_fraction: f64,
    /// `None` when the list has zero variance.
    pub bound_fraction: Option<f64>,
}

impl UserRow {
    pub fn csv(&self) -> String {
        let bound = self
            .bound_fraction
            .map(|f| f.to_string())
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.user, self.mu, self.sigma, self.partitions, self.bucket_max_fraction, bound
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Set0Sample {
    pub seed: u64,
    pub source: UserId,
    pub set0: usize,
}

#[derive(Clone, Debug)]
pub struct AnalyzeReport {
    pub meta: DatasetMeta,
    pub users: Vec<UserRow>,
    pub set0: Vec<Set0Sample>,
}

impl AnalyzeReport {
    pub fn n_over_125(&self) -> f64 {
        self.meta.n as f64 / 125.0
    }

    pub fn median_set0(&self) -> Option<f64> {
        let mut v: Vec<usize> = self.set0.iter().map(|s| s.set0).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_unstable();
        let mid = v.len() / 2;
        Some(if v.len().is_multiple_of(2) {
            (v[mid - 1] + v[mid]) as f64 / 2.0
        } else {
            v[mid] as f64
        })
    }

    /// Median measured `|Set_0|` relative to the `n / 125` bound.
    pub fn median_ratio(&self) -> Option<f64> {
        self.median_set0().map(|m| m / self.n_over_125())
    }

    pub fn write_users_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for row in &self.users {
            writeln!(w, "{}", row.csv())?;
        }
        Ok(())
    }

    pub fn write_set0_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{SET0_CSV_HEADER}")?;
        for s in &self.set0 {
            writeln!(
                w,
                "{},{},{},{}",
                s.seed,
                s.source,
                s.set0,
                self.n_over_125()
            )?;
        }
        Ok(())
    }
}

/// Companion path for the candidate-set samples: `report.csv` ->
/// `report.set0.csv`.
pub fn set0_path(out: &Path) -> PathBuf {
    out.with_extension("set0.csv")
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn cmd_analyze(config: &AnalyzeConfig) -> Result<AnalyzeReport, CliError> {
    if config.partitions == 0 {
        return Err(CliError::Usage("--x must be at least 1".into()));
    }
    let (matrix, meta) = load(&config.dataset, config.mode)?;
    let store = SimilarityStore::build_all(&matrix)?.with_tolerance(config.tolerance);

    let mut users = Vec::with_capacity(matrix.n());
    for list in store.lists() {
        let external = matrix.users().external(list.owner().0).expect("dense id");
        let row = match largest_bucket(list, config.partitions) {
            Ok(r) => UserRow {
                user: external,
                mu: r.model.mu,
                sigma: r.model.sigma,
                partitions: config.partitions,
                bucket_max_fraction: r.empirical_fraction,
                bound_fraction: Some(r.fraction),
            },
            Err(Error::ZeroVariance) => {
                let sims: Vec<f64> = list.entries().map(|e| e.sim).collect();
                let bucket = bucket_of(sims[0], config.partitions);
                let share = sims
                    .iter()
                    .filter(|&&s| bucket_of(s, config.partitions) == bucket)
                    .count() as f64
                    / sims.len() as f64;
                UserRow {
                    user: external,
                    mu: sims[0],
                    sigma: 0.0,
                    partitions: config.partitions,
                    bucket_max_fraction: share,
                    bound_fraction: None,
                }
            }
            Err(Error::TooFewSamples { .. }) => {
                // a single neighbour: one bucket holds everything
                let mu = list.first().unwrap().sim;
                UserRow {
                    user: external,
                    mu,
                    sigma: 0.0,
                    partitions: config.partitions,
                    bucket_max_fraction: 1.0,
                    bound_fraction: None,
                }
            }
            Err(e) => return Err(e.into()),
        };
        users.push(row);
    }

    let anchors = config.anchors.min(matrix.n());
    let mut set0 = Vec::with_capacity(config.seeds);
    for seed in 0..config.seeds as u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let source = UserId(rng.gen_range(0..matrix.n() as u32));
        let mut with_twin = matrix.clone();
        let u0 = with_twin.add_user(matrix.row(source)?.to_vec())?;
        let search = TwinSearchConfig {
            anchors,
            seed,
            tolerance: config.tolerance,
        };
        let outcome = twin_search(&with_twin, &store, u0, &search)?;
        if outcome.counters.set0 == 0 || !outcome.found() {
            return Err(CliError::Correctness(format!(
                "seed {seed}: twin of {source} missing from the candidate set"
            )));
        }
        set0.push(Set0Sample {
            seed,
            source,
            set0: outcome.counters.set0,
        });
    }

    let report = AnalyzeReport { meta, users, set0 };
    if let Some(out) = &config.out {
        let mut w = create(out)?;
        report.write_users_csv(&mut w)?;
        w.flush()?;
        let mut w = create(&set0_path(out))?;
        report.write_set0_csv(&mut w)?;
        w.flush()?;
    }
    Ok(report)
}
