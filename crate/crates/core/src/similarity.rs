//! Cosine similarity and the per-user sorted similarity lists.
//!
//! Lists are sorted by similarity descending with ties broken by ascending
//! user id. Cosine is computed from exact integer dot products and squared
//! norms, so `cosine(a, b)` and `cosine(b, a)` are bit-identical and two users
//! with identical rows produce bit-identical similarities against everyone.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::ratings::{Rating, RatingMatrix, UserId};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SimilarityEntry {
    pub other: UserId,
    pub sim: f64,
}

impl SimilarityEntry {
    pub fn new(other: UserId, sim: f64) -> Self {
        SimilarityEntry { other, sim }
    }
}

/// The list ordering: similarity descending, then user id ascending.
pub fn rank_order(a: &SimilarityEntry, b: &SimilarityEntry) -> Ordering {
    b.sim.total_cmp(&a.sim).then(a.other.cmp(&b.other))
}

fn dot(a: &[Rating], b: &[Rating]) -> u64 {
    let (mut i, mut j, mut acc) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        match a[i].item.cmp(&b[j].item) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                acc += u64::from(a[i].stars) * u64::from(b[j].stars);
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Cosine similarity of two rows, missing ratings counted as zero.
pub fn cosine(matrix: &RatingMatrix, a: UserId, b: UserId) -> Result<f64> {
    let na = matrix.sq_norm(a)?;
    let nb = matrix.sq_norm(b)?;
    if na == 0 {
        return Err(Error::ZeroNorm(a));
    }
    if nb == 0 {
        return Err(Error::ZeroNorm(b));
    }
    let d = dot(matrix.row(a)?, matrix.row(b)?);
    Ok((d as f64 / ((na * nb) as f64).sqrt()).min(1.0))
}

/// Length of a list's insertion run before it is merged into the main run.
pub const PENDING_CAPACITY: usize = 64;

/// One user's neighbours in rank order.
///
/// The entries live in one array made of two sorted runs: the main run and a
/// short insertion run at the tail, merged into the main run once it reaches
/// [`PENDING_CAPACITY`] entries. An insertion therefore moves at most the
/// tail rather than the whole list, and both runs stay binary-searchable.
#[derive(Debug)]
pub struct SimilarityList {
    owner: UserId,
    entries: Vec<SimilarityEntry>,
    // entries[..split] is the main run, entries[split..] the insertion run
    split: usize,
}

impl Clone for SimilarityList {
    fn clone(&self) -> Self {
        // leave room for the insertion run so the next insert does not
        // reallocate
        let mut entries = Vec::with_capacity(self.split + PENDING_CAPACITY);
        entries.extend_from_slice(&self.entries);
        SimilarityList {
            owner: self.owner,
            entries,
            split: self.split,
        }
    }
}

impl PartialEq for SimilarityList {
    fn eq(&self, other: &Self) -> bool {
        self.owner == other.owner && self.len() == other.len() && self.entries().eq(other.entries())
    }
}

/// Rank-order iterator over both runs of a [`SimilarityList`].
#[derive(Clone, Debug)]
pub struct Entries<'a> {
    main: &'a [SimilarityEntry],
    pending: &'a [SimilarityEntry],
}

impl<'a> Iterator for Entries<'a> {
    type Item = &'a SimilarityEntry;

    fn next(&mut self) -> Option<Self::Item> {
        let take_main = match (self.main.first(), self.pending.first()) {
            (None, None) => return None,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => rank_order(a, b) == Ordering::Less,
        };
        let run = if take_main {
            &mut self.main
        } else {
            &mut self.pending
        };
        let (head, rest) = run.split_first()?;
        *run = rest;
        Some(head)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.main.len() + self.pending.len();
        (n, Some(n))
    }
}

impl ExactSizeIterator for Entries<'_> {}

fn run_range(run: &[SimilarityEntry], lo: f64, hi: f64) -> &[SimilarityEntry] {
    let start = run.partition_point(|e| e.sim > hi);
    let end = start + run[start..].partition_point(|e| e.sim >= lo);
    &run[start..end]
}

impl SimilarityList {
    pub fn new(owner: UserId) -> Self {
        SimilarityList {
            owner,
            entries: Vec::new(),
            split: 0,
        }
    }

    /// Sorts `entries` into rank order. Rejects the owner and repeated ids.
    pub fn from_entries(owner: UserId, mut entries: Vec<SimilarityEntry>) -> Result<Self> {
        let mut ids: Vec<UserId> = entries.iter().map(|e| e.other).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEntry { owner, other: w[0] });
        }
        if ids.binary_search(&owner).is_ok() {
            return Err(Error::DuplicateEntry {
                owner,
                other: owner,
            });
        }
        entries.sort_unstable_by(rank_order);
        let split = entries.len();
        Ok(SimilarityList {
            owner,
            entries,
            split,
        })
    }

    pub fn owner(&self) -> UserId {
        self.owner
    }

    /// Entries in rank order.
    pub fn entries(&self) -> Entries<'_> {
        let (main, pending) = self.entries.split_at(self.split);
        Entries { main, pending }
    }

    pub fn first(&self) -> Option<&SimilarityEntry> {
        self.entries().next()
    }

    pub fn to_vec(&self) -> Vec<SimilarityEntry> {
        self.entries().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Linear scan. [`SimilarityStore::contains`] answers the same question
    /// in constant time for stored lists.
    pub fn contains(&self, other: UserId) -> bool {
        self.entries.iter().any(|e| e.other == other)
    }

    /// Inserts at the rank position found by binary search. Rejects the
    /// owner and ids already listed.
    pub fn insert(&mut self, entry: SimilarityEntry) -> Result<()> {
        if entry.other == self.owner || self.contains(entry.other) {
            return Err(Error::DuplicateEntry {
                owner: self.owner,
                other: entry.other,
            });
        }
        self.insert_unchecked(entry);
        Ok(())
    }

    /// [`insert`](Self::insert) without the duplicate check.
    pub(crate) fn insert_unchecked(&mut self, entry: SimilarityEntry) {
        if self.entries.len() == self.entries.capacity() {
            self.entries.reserve_exact(PENDING_CAPACITY);
        }
        let pending = &self.entries[self.split..];
        // new users get the largest ids, so an entry usually sorts last
        if pending
            .last()
            .is_none_or(|last| rank_order(last, &entry) == Ordering::Less)
        {
            self.entries.push(entry);
        } else {
            let pos =
                self.split + pending.partition_point(|e| rank_order(e, &entry) == Ordering::Less);
            self.entries.insert(pos, entry);
        }
        if self.entries.len() - self.split >= PENDING_CAPACITY {
            self.compact();
        }
    }

    /// Merges the insertion run into the main run.
    pub fn compact(&mut self) {
        if self.split == self.entries.len() {
            return;
        }
        let mut merged = Vec::with_capacity(self.entries.len() + PENDING_CAPACITY);
        merged.extend(self.entries().copied());
        self.split = merged.len();
        self.entries = merged;
    }

    /// Removes the entry for `other`, if any.
    pub fn remove(&mut self, other: UserId) -> Option<SimilarityEntry> {
        let pos = self.entries.iter().position(|e| e.other == other)?;
        if pos < self.split {
            self.split -= 1;
        }
        Some(self.entries.remove(pos))
    }

    /// Compacted copy of this list under a different owner, without any
    /// entry for that owner.
    pub(crate) fn copy_for(&self, owner: UserId) -> Self {
        let mut entries = Vec::with_capacity(self.len() + PENDING_CAPACITY);
        entries.extend(self.entries().filter(|e| e.other != owner));
        let split = entries.len();
        SimilarityList {
            owner,
            entries,
            split,
        }
    }

    /// Users whose similarity lies within `tolerance` of `target`.
    ///
    /// Binary searches on both runs locate the matching entries, so the cost
    /// is `O(log n + |result|)` plus sorting the ids found.
    pub fn equal_range(&self, target: f64, tolerance: f64) -> CandidateSet {
        let hi = target + tolerance;
        let lo = target - tolerance;
        let (main, pending) = self.entries.split_at(self.split);
        run_range(main, lo, hi)
            .iter()
            .chain(run_range(pending, lo, hi))
            .map(|e| e.other)
            .collect()
    }

    pub fn is_sorted(&self) -> bool {
        let strictly = |run: &[SimilarityEntry]| {
            run.windows(2)
                .all(|w| rank_order(&w[0], &w[1]) == Ordering::Less)
        };
        let (main, pending) = self.entries.split_at(self.split);
        strictly(main) && strictly(pending)
    }
}

/// Builds `u`'s list from scratch: one cosine per other user.
pub fn build_list_full(matrix: &RatingMatrix, u: UserId) -> Result<SimilarityList> {
    build_list_reusing(matrix, u, &[]).map(|(list, _)| list)
}

/// Like [`build_list_full`] but takes already computed similarities from
/// `known` instead of recomputing them. Returns the list and the number of
/// cosines evaluated.
pub(crate) fn build_list_reusing(
    matrix: &RatingMatrix,
    u: UserId,
    known: &[SimilarityEntry],
) -> Result<(SimilarityList, usize)> {
    matrix.check_user(u)?;
    let mut computed = 0;
    let mut entries = Vec::with_capacity(matrix.n().saturating_sub(1));
    for v in matrix.user_ids().filter(|&v| v != u) {
        let sim = match known.iter().find(|e| e.other == v) {
            Some(e) => e.sim,
            None => {
                computed += 1;
                cosine(matrix, u, v)?
            }
        };
        entries.push(SimilarityEntry::new(v, sim));
    }
    Ok((SimilarityList::from_entries(u, entries)?, computed))
}

/// All users' similarity lists.
///
/// A slot may be empty for a user that exists in the matrix but whose list
/// has not been built yet (a new user during twin search). Alongside the
/// lists the store keeps a slot x slot membership bit matrix, so duplicate
/// checks during symmetric insertion are constant time.
#[derive(Debug)]
pub struct SimilarityStore {
    lists: Vec<Option<SimilarityList>>,
    tolerance: f64,
    // row `owner` has bit `other` set iff `other` is in owner's list
    member: Vec<u64>,
    // words per row
    stride: usize,
}

impl Clone for SimilarityStore {
    fn clone(&self) -> Self {
        // keep spare capacity so growth stays amortised across copies
        let mut lists = Vec::with_capacity(self.lists.capacity());
        lists.extend(self.lists.iter().cloned());
        let mut member = Vec::with_capacity(self.member.capacity());
        member.extend_from_slice(&self.member);
        SimilarityStore {
            lists,
            tolerance: self.tolerance,
            member,
            stride: self.stride,
        }
    }
}

impl PartialEq for SimilarityStore {
    fn eq(&self, other: &Self) -> bool {
        self.tolerance == other.tolerance && self.lists == other.lists
    }
}

impl SimilarityStore {
    pub fn empty(tolerance: f64) -> Self {
        SimilarityStore {
            lists: Vec::new(),
            tolerance,
            member: Vec::new(),
            stride: 0,
        }
    }

    /// Full lists for every user, computed in parallel.
    pub fn build_all(matrix: &RatingMatrix) -> Result<Self> {
        if matrix.n() < 2 {
            return Err(Error::TooFewUsers {
                needed: 2,
                n: matrix.n(),
            });
        }
        let lists = (0..matrix.n() as u32)
            .into_par_iter()
            .map(|u| build_list_full(matrix, UserId(u)).map(Some))
            .collect::<Result<Vec<_>>>()?;
        let mut store = SimilarityStore::empty(DEFAULT_TOLERANCE);
        store.reserve_slots(lists.len());
        store.lists = lists;
        for u in 0..store.lists.len() {
            let owner = UserId(u as u32);
            let ids: Vec<UserId> = store.lists[u]
                .iter()
                .flat_map(|l| l.entries.iter().map(|e| e.other))
                .collect();
            for other in ids {
                store.set_member(owner, other);
            }
        }
        Ok(store)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Number of users that have a list.
    pub fn len(&self) -> usize {
        self.lists.iter().filter(|l| l.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn list(&self, u: UserId) -> Option<&SimilarityList> {
        self.lists.get(u.index()).and_then(Option::as_ref)
    }

    pub fn require_list(&self, u: UserId) -> Result<&SimilarityList> {
        self.list(u).ok_or(Error::MissingList(u))
    }

    pub fn lists(&self) -> impl Iterator<Item = &SimilarityList> {
        self.lists.iter().flatten()
    }

    /// Whether `other` appears in `owner`'s list.
    pub fn contains(&self, owner: UserId, other: UserId) -> bool {
        if owner.index() >= self.lists.len() || other.index() / 64 >= self.stride {
            return false;
        }
        let word = self.member[owner.index() * self.stride + other.index() / 64];
        word & (1 << (other.index() % 64)) != 0
    }

    /// Grows the slot table and the bit matrix to hold `slots` users.
    fn reserve_slots(&mut self, slots: usize) {
        let stride = slots.div_ceil(64);
        if stride > self.stride {
            let rows = self.lists.len().max(slots);
            let mut member = vec![0u64; rows * stride];
            for r in 0..self.lists.len() {
                let old = &self.member[r * self.stride..(r + 1) * self.stride];
                member[r * stride..r * stride + self.stride].copy_from_slice(old);
            }
            self.member = member;
            self.stride = stride;
        }
        if slots > self.lists.len() {
            self.lists.resize(slots, None);
            self.member.resize(slots * self.stride, 0);
        }
    }

    fn set_member(&mut self, owner: UserId, other: UserId) {
        self.member[owner.index() * self.stride + other.index() / 64] |= 1 << (other.index() % 64);
    }

    fn clear_member(&mut self, owner: UserId, other: UserId) {
        self.member[owner.index() * self.stride + other.index() / 64] &=
            !(1 << (other.index() % 64));
    }

    /// Inserts `entry` into `owner`'s list at its rank position.
    pub fn insert_entry(&mut self, owner: UserId, entry: SimilarityEntry) -> Result<()> {
        if self.list(owner).is_none() {
            return Err(Error::MissingList(owner));
        }
        if entry.other == owner || self.contains(owner, entry.other) {
            return Err(Error::DuplicateEntry {
                owner,
                other: entry.other,
            });
        }
        self.reserve_slots(entry.other.index() + 1);
        self.set_member(owner, entry.other);
        self.lists[owner.index()]
            .as_mut()
            .expect("checked above")
            .insert_unchecked(entry);
        Ok(())
    }

    /// Removes `other` from `owner`'s list, if present.
    pub fn remove_entry(&mut self, owner: UserId, other: UserId) -> Option<SimilarityEntry> {
        if !self.contains(owner, other) {
            return None;
        }
        self.clear_member(owner, other);
        self.lists[owner.index()].as_mut()?.remove(other)
    }

    /// Installs `list` for its owner and mirrors each entry into the
    /// neighbour's list, restoring symmetry. All neighbours must have lists
    /// and must not list the owner yet; nothing is modified otherwise.
    pub fn link(&mut self, list: SimilarityList) -> Result<()> {
        let owner = list.owner();
        if self.list(owner).is_some() {
            return Err(Error::ListAlreadyPresent(owner));
        }
        for e in list.entries.iter() {
            if self.list(e.other).is_none() {
                return Err(Error::MissingList(e.other));
            }
            if self.contains(e.other, owner) {
                return Err(Error::DuplicateEntry {
                    owner: e.other,
                    other: owner,
                });
            }
        }
        self.reserve_slots(owner.index() + 1);
        for e in list.entries.iter() {
            self.set_member(e.other, owner);
            self.set_member(owner, e.other);
            self.lists[e.other.index()]
                .as_mut()
                .expect("validated above")
                .insert_unchecked(SimilarityEntry::new(owner, e.sim));
        }
        self.lists[owner.index()] = Some(list);
        Ok(())
    }

    /// Checks every store invariant. Returns a description of the first
    /// violation found.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let slots = self.lists.len();
        let members = self.len();
        // dense owner x other table of sims for the mirror checks
        let mut table = vec![f64::NAN; slots * slots];
        for list in self.lists() {
            let owner = list.owner();
            if !list.is_sorted() {
                return Err(format!("list of {owner} is not in rank order"));
            }
            if list.contains(owner) {
                return Err(format!("list of {owner} contains its owner"));
            }
            if list.len() != members - 1 {
                return Err(format!(
                    "list of {owner} has {} entries, expected {}",
                    list.len(),
                    members - 1
                ));
            }
            for e in list.entries() {
                if !(0.0..=1.0).contains(&e.sim) {
                    return Err(format!(
                        "sim {} of ({owner}, {}) outside [0, 1]",
                        e.sim, e.other
                    ));
                }
                if self.list(e.other).is_none() {
                    return Err(format!(
                        "list of {owner} names {}, which has no list",
                        e.other
                    ));
                }
                if !self.contains(owner, e.other) {
                    return Err(format!("membership bit ({owner}, {}) not set", e.other));
                }
                table[owner.index() * slots + e.other.index()] = e.sim;
            }
        }
        for (slot, list) in self.lists.iter().enumerate() {
            let row = &self.member[slot * self.stride..(slot + 1) * self.stride];
            let bits: usize = row.iter().map(|w| w.count_ones() as usize).sum();
            let listed = list.as_ref().map_or(0, SimilarityList::len);
            if bits != listed {
                return Err(format!(
                    "slot {slot} has {bits} membership bits for {listed} entries"
                ));
            }
            if list.as_ref().is_some_and(|l| l.owner().index() != slot) {
                return Err(format!("slot {slot} holds a list owned by another user"));
            }
        }
        for list in self.lists() {
            let owner = list.owner();
            for e in list.entries() {
                let back = table[e.other.index() * slots + owner.index()];
                if back.is_nan() {
                    return Err(format!("{} lacks a mirror entry for {owner}", e.other));
                }
                if back != e.sim {
                    return Err(format!(
                        "asymmetric sim for ({owner}, {}): {} vs {back}",
                        e.other, e.sim
                    ));
                }
            }
        }
        Ok(())
    }

    /// Writes `owner,other,sim` rows in list order, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "owner,other,sim")?;
        for list in self.lists() {
            for e in list.entries() {
                writeln!(w, "{},{},{:.16e}", list.owner(), e.other, e.sim)?;
            }
        }
        Ok(())
    }
}
