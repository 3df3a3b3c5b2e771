//! Candidate twin sets and their intersection.

use crate::ratings::UserId;

/// Sorted, duplicate-free set of user ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CandidateSet {
    members: Vec<UserId>,
}

impl CandidateSet {
    pub fn new() -> Self {
        CandidateSet::default()
    }

    pub fn from_unsorted(mut members: Vec<UserId>) -> Self {
        members.sort_unstable();
        members.dedup();
        CandidateSet { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, u: UserId) -> bool {
        self.members.binary_search(&u).is_ok()
    }

    pub fn insert(&mut self, u: UserId) -> bool {
        match self.members.binary_search(&u) {
            Ok(_) => false,
            Err(pos) => {
                self.members.insert(pos, u);
                true
            }
        }
    }

    /// Members in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = UserId> + '_ {
        self.members.iter().copied()
    }

    pub fn as_slice(&self) -> &[UserId] {
        &self.members
    }
}

impl FromIterator<UserId> for CandidateSet {
    fn from_iter<I: IntoIterator<Item = UserId>>(iter: I) -> Self {
        CandidateSet::from_unsorted(iter.into_iter().collect())
    }
}

/// Intersection of all `sets`. An empty input yields the empty set.
///
/// The smallest set drives the scan; every other set is probed by binary
/// search, so the cost is `O(c * min|set| * log max|set|)`.
pub fn intersect(sets: &[CandidateSet]) -> CandidateSet {
    let Some(base) = sets.iter().min_by_key(|s| s.len()) else {
        return CandidateSet::new();
    };
    let members = base
        .iter()
        .filter(|&u| sets.iter().all(|s| s.contains(u)))
        .collect();
    CandidateSet { members }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(ids: &[u32]) -> CandidateSet {
        ids.iter().map(|&i| UserId(i)).collect()
    }

    #[test]
    fn nested_sets() {
        let out = intersect(&[set(&[1, 2, 3]), set(&[2, 3]), set(&[3])]);
        assert_eq!(out, set(&[3]));
    }

    #[test]
    fn empty_member_empties_result() {
        assert!(intersect(&[set(&[1, 2]), set(&[]), set(&[2])]).is_empty());
        assert!(intersect(&[]).is_empty());
    }

    #[test]
    fn insert_keeps_order() {
        let mut s = set(&[5, 1]);
        assert!(s.insert(UserId(3)));
        assert!(!s.insert(UserId(3)));
        assert_eq!(s.as_slice(), &[UserId(1), UserId(3), UserId(5)]);
    }

    // sorted-merge intersection, independent of the probing implementation
    fn merge_intersect(a: &[UserId], b: &[UserId]) -> Vec<UserId> {
        let (mut i, mut j, mut out) = (0, 0, Vec::new());
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn matches_sorted_merge(
            a in prop::sample::subsequence((0u32..300).collect::<Vec<_>>(), 100),
            b in prop::sample::subsequence((0u32..300).collect::<Vec<_>>(), 100),
            c in prop::sample::subsequence((0u32..300).collect::<Vec<_>>(), 100),
        ) {
            let to_set = |s: &Vec<u32>| s.iter().map(|&i| UserId(i)).collect::<CandidateSet>();
            let sets = [to_set(&a), to_set(&b), to_set(&c)];
            let oracle = merge_intersect(
                &merge_intersect(sets[0].as_slice(), sets[1].as_slice()),
                sets[2].as_slice(),
            );
            let got = intersect(&sets);
            prop_assert_eq!(got.as_slice(), &oracle[..]);
        }
    }
}
