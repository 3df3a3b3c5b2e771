//! Sparse user-item rating storage.
//!
//! Rows are dense user indices holding item-sorted `(item, stars)` pairs.
//! External ids from the input files are kept in [`IdMap`]s and never used
//! on hot paths.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

/// Dense row index into a [`RatingMatrix`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserId(pub u32);

/// Dense column index into a [`RatingMatrix`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemId(pub u32);

impl UserId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const MIN_STARS: u8 = 1;
pub const MAX_STARS: u8 = 5;

/// One entry of a sparse row.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rating {
    pub item: ItemId,
    pub stars: u8,
}

impl Rating {
    pub fn new(item: u32, stars: u8) -> Self {
        Rating {
            item: ItemId(item),
            stars,
        }
    }
}

/// Bijection between external ids (as found in the input) and dense indices.
///
/// Dense indices follow ascending external id and new ids are allocated
/// above the current maximum, so the external ids stay sorted and lookups
/// are binary searches.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    external: Vec<u64>,
}

impl IdMap {
    fn from_external(external: Vec<u64>) -> Self {
        debug_assert!(external.windows(2).all(|w| w[0] < w[1]));
        IdMap { external }
    }

    fn push(&mut self, external: u64) -> u32 {
        debug_assert!(self.external.last().is_none_or(|&m| m < external));
        let idx = self.external.len() as u32;
        self.external.push(external);
        idx
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }

    pub fn dense(&self, external: u64) -> Option<u32> {
        self.external
            .binary_search(&external)
            .ok()
            .map(|i| i as u32)
    }

    pub fn external(&self, dense: u32) -> Option<u64> {
        self.external.get(dense as usize).copied()
    }

    fn next_external(&self) -> u64 {
        self.external.last().map_or(1, |m| m + 1)
    }
}

/// Where a matrix came from.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DataSource {
    MovieLens,
    Csv,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetMeta {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub rating_count: usize,
    pub source: DataSource,
}

impl DatasetMeta {
    pub fn describe(name: impl Into<String>, matrix: &RatingMatrix, source: DataSource) -> Self {
        DatasetMeta {
            name: name.into(),
            n: matrix.n(),
            m: matrix.m(),
            rating_count: matrix.rating_count(),
            source,
        }
    }
}

/// Sparse n x m matrix of 1-5 star ratings with append-only rows.
///
/// Readers may share a matrix freely; [`RatingMatrix::add_user`] is the only
/// way to change its contents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatingMatrix {
    m: usize,
    rows: Vec<Vec<Rating>>,
    sq_norms: Vec<u64>,
    users: IdMap,
    items: IdMap,
}

fn sq_norm(row: &[Rating]) -> u64 {
    row.iter()
        .map(|r| u64::from(r.stars) * u64::from(r.stars))
        .sum()
}

fn check_row(row: &[Rating], m: usize) -> Result<()> {
    if row.is_empty() {
        return Err(Error::EmptyRatings);
    }
    for r in row {
        if r.item.index() >= m {
            return Err(Error::ItemOutOfRange { item: r.item, m });
        }
        if !(MIN_STARS..=MAX_STARS).contains(&r.stars) {
            return Err(Error::InvalidRating(r.stars));
        }
    }
    if row.windows(2).any(|w| w[0].item >= w[1].item) {
        return Err(Error::UnsortedRatings);
    }
    Ok(())
}

impl RatingMatrix {
    /// Empty matrix over a fixed item universe of size `m`.
    pub fn with_items(m: usize) -> Self {
        RatingMatrix {
            m,
            rows: Vec::new(),
            sq_norms: Vec::new(),
            users: IdMap::default(),
            items: IdMap::from_external((1..=m as u64).collect()),
        }
    }

    /// Builds a matrix from external `(user, item, stars)` triples that are
    /// already validated and free of duplicate `(user, item)` pairs.
    ///
    /// Dense indices follow ascending external id, so the result does not
    /// depend on input order.
    fn from_external_triples(triples: Vec<(u64, u64, u8)>) -> Self {
        let mut user_ids: Vec<u64> = triples.iter().map(|t| t.0).collect();
        let mut item_ids: Vec<u64> = triples.iter().map(|t| t.1).collect();
        user_ids.sort_unstable();
        user_ids.dedup();
        item_ids.sort_unstable();
        item_ids.dedup();
        let users = IdMap::from_external(user_ids);
        let items = IdMap::from_external(item_ids);

        let mut rows = vec![Vec::new(); users.len()];
        for (u, i, stars) in triples {
            let u = users.dense(u).expect("user id registered above");
            let i = items.dense(i).expect("item id registered above");
            rows[u as usize].push(Rating::new(i, stars));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|r| r.item);
        }
        let sq_norms = rows.iter().map(|r| sq_norm(r)).collect();
        RatingMatrix {
            m: items.len(),
            rows,
            sq_norms,
            users,
            items,
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rating_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn users(&self) -> &IdMap {
        &self.users
    }

    pub fn items(&self) -> &IdMap {
        &self.items
    }

    pub fn user_ids(&self) -> impl Iterator<Item = UserId> {
        (0..self.rows.len() as u32).map(UserId)
    }

    pub fn check_user(&self, u: UserId) -> Result<()> {
        if u.index() < self.rows.len() {
            Ok(())
        } else {
            Err(Error::UserOutOfRange {
                user: u,
                n: self.rows.len(),
            })
        }
    }

    pub fn row(&self, u: UserId) -> Result<&[Rating]> {
        self.check_user(u)?;
        Ok(&self.rows[u.index()])
    }

    /// Sum of squared stars of row `u`. Exact.
    pub fn sq_norm(&self, u: UserId) -> Result<u64> {
        self.check_user(u)?;
        Ok(self.sq_norms[u.index()])
    }

    /// Appends a new user row and returns its dense id.
    ///
    /// The row must be item-sorted, duplicate free, non-empty and only
    /// reference items already known to the matrix.
    /// Reserves room for `additional` more users.
    pub fn reserve_users(&mut self, additional: usize) {
        self.rows.reserve(additional);
        self.sq_norms.reserve(additional);
        self.users.external.reserve(additional);
    }

    pub fn add_user(&mut self, ratings: Vec<Rating>) -> Result<UserId> {
        check_row(&ratings, self.m)?;
        let ext = self.users.next_external();
        let id = self.users.push(ext);
        debug_assert_eq!(id as usize, self.rows.len());
        self.sq_norms.push(sq_norm(&ratings));
        self.rows.push(ratings);
        Ok(UserId(id))
    }

    /// True iff the two rows hold exactly the same `(item, stars)` pairs.
    pub fn row_equal(&self, a: UserId, b: UserId) -> Result<bool> {
        let ra = self.row(a)?;
        let rb = self.row(b)?;
        // slice equality checks lengths before touching elements
        Ok(ra == rb)
    }

    /// Swaps the roles of users and items. Used for item-based runs.
    pub fn transpose(&self) -> RatingMatrix {
        let mut rows = vec![Vec::new(); self.m];
        for (u, row) in self.rows.iter().enumerate() {
            for r in row {
                rows[r.item.index()].push(Rating::new(u as u32, r.stars));
            }
        }
        let sq_norms = rows.iter().map(|r| sq_norm(r)).collect();
        RatingMatrix {
            m: self.rows.len(),
            rows,
            sq_norms,
            users: self.items.clone(),
            items: self.users.clone(),
        }
    }

    /// Copy of this matrix with row `u` dropped. Later users shift down by one.
    pub fn without_user(&self, u: UserId) -> Result<RatingMatrix> {
        self.check_user(u)?;
        let keep = |i: usize| i != u.index();
        let external: Vec<u64> = (0..self.rows.len())
            .filter(|&i| keep(i))
            .map(|i| self.users.external[i])
            .collect();
        Ok(RatingMatrix {
            m: self.m,
            rows: (0..self.rows.len())
                .filter(|&i| keep(i))
                .map(|i| self.rows[i].clone())
                .collect(),
            sq_norms: (0..self.rows.len())
                .filter(|&i| keep(i))
                .map(|i| self.sq_norms[i])
                .collect(),
            users: IdMap::from_external(external),
            items: self.items.clone(),
        })
    }

    fn external_triples(&self) -> Vec<(u64, u64, u8)> {
        let mut out = Vec::with_capacity(self.rating_count());
        for (u, row) in self.rows.iter().enumerate() {
            let ue = self.users.external[u];
            for r in row {
                out.push((ue, self.items.external[r.item.index()], r.stars));
            }
        }
        out.sort_unstable();
        out
    }

    /// Canonical CSV: `user,item,rating` header, rows sorted by (user, item).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "user,item,rating")?;
        for (u, i, s) in self.external_triples() {
            writeln!(w, "{u},{i},{s}")?;
        }
        Ok(())
    }

    /// MovieLens `u.data` layout with a zero timestamp.
    pub fn write_movielens<W: Write>(&self, mut w: W) -> Result<()> {
        for (u, i, s) in self.external_triples() {
            writeln!(w, "{u}\t{i}\t{s}\t0")?;
        }
        Ok(())
    }
}

struct TripleReader {
    triples: Vec<(u64, u64, u8)>,
    seen: HashSet<(u64, u64)>,
}

impl TripleReader {
    fn new() -> Self {
        TripleReader {
            triples: Vec::new(),
            seen: HashSet::new(),
        }
    }

    fn push_fields(&mut self, line: usize, fields: &[&str]) -> Result<()> {
        let parse = |idx: usize, what: &str| -> Result<i64> {
            fields[idx]
                .trim()
                .parse::<i64>()
                .map_err(|_| Error::Malformed {
                    line,
                    reason: format!("{what} field {:?} is not an integer", fields[idx]),
                })
        };
        let user = parse(0, "user")?;
        let item = parse(1, "item")?;
        let stars = parse(2, "rating")?;
        if user < 0 || item < 0 {
            return Err(Error::Malformed {
                line,
                reason: "negative id".into(),
            });
        }
        if !(i64::from(MIN_STARS)..=i64::from(MAX_STARS)).contains(&stars) {
            return Err(Error::RatingOutOfRange { line, value: stars });
        }
        let (user, item) = (user as u64, item as u64);
        if !self.seen.insert((user, item)) {
            return Err(Error::DuplicateRating { line, user, item });
        }
        self.triples.push((user, item, stars as u8));
        Ok(())
    }

    fn finish(self) -> RatingMatrix {
        RatingMatrix::from_external_triples(self.triples)
    }
}

/// Parses MovieLens `u.data`: `user<TAB>item<TAB>rating<TAB>timestamp`.
///
/// Timestamps are required but discarded. Line numbers in errors are 1-based.
pub fn parse_movielens<R: BufRead>(reader: R) -> Result<(RatingMatrix, DatasetMeta)> {
    let mut acc = TripleReader::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(Error::Malformed {
                line: idx + 1,
                reason: format!("expected 4 tab-separated fields, got {}", fields.len()),
            });
        }
        acc.push_fields(idx + 1, &fields)?;
    }
    let matrix = acc.finish();
    let meta = DatasetMeta::describe("movielens", &matrix, DataSource::MovieLens);
    Ok((matrix, meta))
}

/// Parses `user,item,rating` CSV, optionally skipping one header line.
pub fn parse_csv<R: BufRead>(reader: R, has_header: bool) -> Result<(RatingMatrix, DatasetMeta)> {
    let mut acc = TripleReader::new();
    let mut header_pending = has_header;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::Malformed {
                line: idx + 1,
                reason: format!("expected 3 comma-separated fields, got {}", fields.len()),
            });
        }
        acc.push_fields(idx + 1, &fields)?;
    }
    let matrix = acc.finish();
    let meta = DatasetMeta::describe("csv", &matrix, DataSource::Csv);
    Ok((matrix, meta))
}

/// Random matrix where every user rates `round(density * m)` distinct items
/// with stars uniform in 1..=5. Deterministic for a fixed seed.
pub fn generate_synthetic(n: usize, m: usize, density: f64, seed: u64) -> Result<RatingMatrix> {
    if n == 0 || m == 0 {
        return Err(Error::EmptyShape);
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidDensity(density));
    }
    let per_user = (density * m as f64).round() as usize;
    if per_user == 0 {
        return Err(Error::InvalidDensity(density));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut matrix = RatingMatrix::with_items(m);
    for _ in 0..n {
        let mut items = rand::seq::index::sample(&mut rng, m, per_user).into_vec();
        items.sort_unstable();
        let row = items
            .into_iter()
            .map(|i| Rating::new(i as u32, rng.gen_range(MIN_STARS..=MAX_STARS)))
            .collect();
        matrix.add_user(row)?;
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ml(text: &str) -> Result<RatingMatrix> {
        parse_movielens(text.as_bytes()).map(|(m, _)| m)
    }

    #[test]
    fn movielens_single_line() {
        let (m, meta) = parse_movielens("196\t242\t3\t881250949\n".as_bytes()).unwrap();
        assert_eq!((meta.n, meta.m, meta.rating_count), (1, 1, 1));
        let u = UserId(m.users().dense(196).unwrap());
        let i = m.items().dense(242).unwrap();
        assert_eq!(m.row(u).unwrap(), &[Rating::new(i, 3)]);
    }

    #[test]
    fn empty_stream() {
        let (m, meta) = parse_movielens("".as_bytes()).unwrap();
        assert_eq!((m.n(), m.m(), meta.rating_count), (0, 0, 0));
    }

    #[test]
    fn movielens_errors_carry_line_numbers() {
        assert_eq!(
            ml("1\t1\t3\t0\n1\t2\t3\n"),
            Err(Error::Malformed {
                line: 2,
                reason: "expected 4 tab-separated fields, got 3".into()
            })
        );
        assert_eq!(
            ml("1\t1\t6\t0\n"),
            Err(Error::RatingOutOfRange { line: 1, value: 6 })
        );
        assert_eq!(
            ml("1\t1\t0\t0\n"),
            Err(Error::RatingOutOfRange { line: 1, value: 0 })
        );
        assert_eq!(
            ml("1\t1\t3\t0\n\n1\t1\t4\t0\n"),
            Err(Error::DuplicateRating {
                line: 3,
                user: 1,
                item: 1
            })
        );
        assert!(matches!(
            ml("a\t1\t3\t0\n"),
            Err(Error::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn csv_two_lines_one_user() {
        let (m, meta) = parse_csv("1,1,5\n1,2,3".as_bytes(), false).unwrap();
        assert_eq!(meta.n, 1);
        assert_eq!(meta.rating_count, 2);
        assert_eq!(m.row(UserId(0)).unwrap().len(), 2);
    }

    #[test]
    fn csv_header_only() {
        let (m, meta) = parse_csv("user,item,rating\n".as_bytes(), true).unwrap();
        assert_eq!((m.n(), m.m(), meta.rating_count), (0, 0, 0));
    }

    #[test]
    fn csv_and_movielens_agree() {
        let tsv = "3\t10\t4\t1\n1\t10\t2\t5\n1\t7\t5\t9\n";
        let csv = "user,item,rating\n1,7,5\n3,10,4\n1,10,2\n";
        let (a, _) = parse_movielens(tsv.as_bytes()).unwrap();
        let (b, _) = parse_csv(csv.as_bytes(), true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_rows_have_fixed_length() {
        let m = generate_synthetic(10, 20, 0.5, 7).unwrap();
        assert!(m.user_ids().all(|u| m.row(u).unwrap().len() == 10));
        assert_eq!(m, generate_synthetic(10, 20, 0.5, 7).unwrap());
        assert_ne!(m, generate_synthetic(10, 20, 0.5, 8).unwrap());
    }

    #[test]
    fn synthetic_rating_count() {
        let m = generate_synthetic(1000, 500, 0.1, 1).unwrap();
        let by_sum: usize = m.user_ids().map(|u| m.row(u).unwrap().len()).sum();
        assert_eq!(by_sum, 50_000);
        assert_eq!(m.rating_count(), 50_000);
    }

    #[test]
    fn synthetic_rejects_bad_density() {
        for d in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                generate_synthetic(5, 5, d, 0),
                Err(Error::InvalidDensity(_))
            ));
        }
        // rounds to zero items per user
        assert!(generate_synthetic(5, 5, 0.05, 0).is_err());
        assert_eq!(generate_synthetic(0, 5, 0.5, 0), Err(Error::EmptyShape));
    }

    #[test]
    fn add_user_appends() {
        let mut m = RatingMatrix::with_items(4);
        assert_eq!(m.add_user(vec![Rating::new(1, 3)]).unwrap(), UserId(0));
        assert_eq!(m.n(), 1);
        let b = m.add_user(vec![Rating::new(1, 3)]).unwrap();
        assert!(m.row_equal(UserId(0), b).unwrap());
        assert_eq!(m.users().external(b.0), Some(2));
    }

    #[test]
    fn add_user_rejects_bad_rows() {
        let mut m = RatingMatrix::with_items(4);
        assert_eq!(m.add_user(vec![]), Err(Error::EmptyRatings));
        assert!(matches!(
            m.add_user(vec![Rating::new(4, 1)]),
            Err(Error::ItemOutOfRange { .. })
        ));
        assert_eq!(
            m.add_user(vec![Rating::new(2, 1), Rating::new(1, 1)]),
            Err(Error::UnsortedRatings)
        );
        assert_eq!(
            m.add_user(vec![Rating::new(1, 1), Rating::new(1, 2)]),
            Err(Error::UnsortedRatings)
        );
        assert_eq!(
            m.add_user(vec![Rating::new(1, 9)]),
            Err(Error::InvalidRating(9))
        );
        assert_eq!(m.n(), 0);
    }

    #[test]
    fn knn_attack_rows_are_pairwise_equal() {
        let mut m = generate_synthetic(20, 50, 0.2, 3).unwrap();
        let attack: Vec<Rating> = (0..8).map(|i| Rating::new(i * 5, 5)).collect();
        let ids: Vec<UserId> = (0..6)
            .map(|_| m.add_user(attack.clone()).unwrap())
            .collect();
        for &a in &ids {
            for &b in &ids {
                assert!(m.row_equal(a, b).unwrap());
            }
        }
    }

    #[test]
    fn row_equal_cases() {
        let (m, _) = parse_csv(
            "1,1,3\n1,2,4\n2,1,3\n2,2,4\n2,3,1\n3,1,3\n3,3,4\n".as_bytes(),
            false,
        )
        .unwrap();
        let (a, b, c) = (UserId(0), UserId(1), UserId(2));
        assert!(m.row_equal(a, a).unwrap());
        // equal on the shared items, one extra item
        assert!(!m.row_equal(a, b).unwrap());
        assert!(!m.row_equal(a, c).unwrap());
        assert!(m.row_equal(a, UserId(9)).is_err());
    }

    #[test]
    fn transpose_small() {
        let empty = RatingMatrix::with_items(0);
        assert_eq!(empty.transpose().n(), 0);

        let (m, _) = parse_csv("2,5,4\n".as_bytes(), false).unwrap();
        let t = m.transpose();
        assert_eq!((t.n(), t.m()), (1, 1));
        assert_eq!(t.users().external(0), Some(5));
        assert_eq!(t.items().external(0), Some(2));
        assert_eq!(t.row(UserId(0)).unwrap(), &[Rating::new(0, 4)]);
        assert_eq!(t.transpose(), m);
    }

    #[test]
    fn without_user_drops_one_row() {
        let m = generate_synthetic(5, 10, 0.3, 1).unwrap();
        let w = m.without_user(UserId(2)).unwrap();
        assert_eq!(w.n(), 4);
        assert_eq!(w.row(UserId(2)).unwrap(), m.row(UserId(3)).unwrap());
        assert_eq!(w.users().external(2), Some(4));
        assert_eq!(w.users().dense(3), None);
    }

    #[test]
    fn serialize_roundtrip_both_formats() {
        let (m, _) = parse_csv("5,1,3\n2,9,1\n2,1,5\n7,4,2\n".as_bytes(), false).unwrap();
        let mut csv = Vec::new();
        m.write_csv(&mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv.clone()).unwrap(),
            "user,item,rating\n2,1,5\n2,9,1\n5,1,3\n7,4,2\n"
        );
        assert_eq!(parse_csv(&csv[..], true).unwrap().0, m);
        let mut tsv = Vec::new();
        m.write_movielens(&mut tsv).unwrap();
        assert_eq!(parse_movielens(&tsv[..]).unwrap().0, m);
    }
}
