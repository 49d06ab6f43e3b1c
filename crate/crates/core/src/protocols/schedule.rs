//! Pure calendar arithmetic: the halving tree of subgroups, the fixed-size
//! partition of the optimized algorithm, and the round/awake recurrences
//! that every processor evaluates identically to stay in lockstep.

use crate::error::{Error, Result};
use crate::types::ProcessorId;

/// Splits an ordered member list into the two child halves: the first
/// ⌈m/2⌉ ids and the last ⌊m/2⌋ ids.
pub fn split_halves(members: &[ProcessorId]) -> (&[ProcessorId], &[ProcessorId]) {
    let first = members.len().div_ceil(2);
    members.split_at(first)
}

/// Members of subgroup `Q_w` in the halving tree over `{1, …, n}`.
///
/// `Q_1` is the whole set; `Q_{2w}` holds the first ⌈|Q_w|/2⌉ members and
/// `Q_{2w+1}` the last ⌊|Q_w|/2⌋. Indices whose path reaches an empty set
/// are unreachable and rejected.
pub fn subgroup(w: u64, n: u32) -> Result<Vec<ProcessorId>> {
    if w == 0 {
        return Err(Error::EmptySubgroup(w));
    }
    let mut members: Vec<ProcessorId> = crate::types::all_processors(n).collect();
    // Walk the bits of w below the leading one: 0 = first half, 1 = second.
    let bits = 63 - w.leading_zeros();
    for shift in (0..bits).rev() {
        if members.is_empty() {
            return Err(Error::EmptySubgroup(w));
        }
        let (first, second) = {
            let idx = members.len().div_ceil(2);
            let second = members.split_off(idx);
            (members, second)
        };
        members = if (w >> shift) & 1 == 0 { first } else { second };
    }
    if members.is_empty() {
        return Err(Error::EmptySubgroup(w));
    }
    Ok(members)
}

/// Splits `{1, …, n}` into `s = ⌊n/(f+1)⌋` contiguous subsets of size `f+1`
/// plus one trailing subset with the remaining `n − (f+1)·s` processors
/// (possibly empty). Returns `s+1` groups.
pub fn partition(n: u32, f: u32) -> Vec<Vec<ProcessorId>> {
    debug_assert!(f < n);
    let size = f + 1;
    let s = n / size;
    let mut groups = Vec::with_capacity(s as usize + 1);
    for i in 0..s {
        groups.push((i * size + 1..=(i + 1) * size).map(ProcessorId).collect());
    }
    groups.push((s * size + 1..=n).map(ProcessorId).collect());
    groups
}

/// Rounds a recursive crash-agreement call over `m` processors occupies.
///
/// Base: a group of size at most `c` floods for exactly `m` rounds.
/// Composed: first child, one dissemination round, second child, plus one
/// leading preliminary round per composed level in the 1-preference variant.
pub fn rca_duration(m: u32, c: u32, one_preference: bool) -> u32 {
    assert!(m >= 1 && c >= 1);
    if m <= c {
        return m;
    }
    let h1 = m.div_ceil(2);
    let h2 = m / 2;
    let prelim = u32::from(one_preference);
    prelim + rca_duration(h1, c, one_preference) + 1 + rca_duration(h2, c, one_preference)
}

/// Maximum rounds any single processor is awake in a fault-free recursive
/// crash-agreement call over `m` processors.
///
/// A processor participates in exactly one child call per level plus the
/// dissemination round (and the preliminary round, when enabled).
pub fn rca_awake_bound(m: u32, c: u32, one_preference: bool) -> u32 {
    assert!(m >= 1 && c >= 1);
    if m <= c {
        return m;
    }
    let per_level = if one_preference { 2 } else { 1 };
    per_level + rca_awake_bound(m.div_ceil(2), c, one_preference)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(range: std::ops::RangeInclusive<u32>) -> Vec<ProcessorId> {
        range.map(ProcessorId).collect()
    }

    #[test]
    fn subgroup_root_is_everyone() {
        assert_eq!(subgroup(1, 4).unwrap(), ids(1..=4));
    }

    #[test]
    fn subgroup_first_half_takes_ceil() {
        // first ⌈5/2⌉ processors
        assert_eq!(subgroup(2, 5).unwrap(), ids(1..=3));
        assert_eq!(subgroup(3, 5).unwrap(), ids(4..=5));
    }

    #[test]
    fn subgroup_nested() {
        // Q_3 = {4,5}, Q_7 = last ⌊2/2⌋ of it
        assert_eq!(subgroup(7, 5).unwrap(), vec![ProcessorId(5)]);
        assert_eq!(subgroup(6, 5).unwrap(), vec![ProcessorId(4)]);
    }

    #[test]
    fn subgroup_unreachable_is_empty() {
        assert_eq!(subgroup(3, 1), Err(Error::EmptySubgroup(3)));
        assert_eq!(subgroup(0, 4), Err(Error::EmptySubgroup(0)));
        // Q_2 of a singleton is the singleton again; Q_3 is empty.
        assert_eq!(subgroup(2, 1).unwrap(), vec![ProcessorId(1)]);
    }

    #[test]
    fn subgroup_children_partition_parent() {
        for n in 1..=9u32 {
            for w in 1..=15u64 {
                let Ok(parent) = subgroup(w, n) else { continue };
                if parent.len() < 2 {
                    continue;
                }
                let left = subgroup(2 * w, n).unwrap();
                let right = subgroup(2 * w + 1, n).unwrap();
                let mut joined = left.clone();
                joined.extend(&right);
                assert_eq!(joined, parent, "w={w} n={n}");
                assert_eq!(left.len(), parent.len().div_ceil(2));
            }
        }
    }

    #[test]
    fn partition_exact_fit() {
        let groups = partition(16, 3);
        assert_eq!(groups.len(), 5);
        assert_eq!(groups[0], ids(1..=4));
        assert_eq!(groups[3], ids(13..=16));
        assert!(groups[4].is_empty());
    }

    #[test]
    fn partition_with_remainder() {
        let groups = partition(10, 3);
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[0], ids(1..=4));
        assert_eq!(groups[1], ids(5..=8));
        assert_eq!(groups[2], ids(9..=10));
    }

    #[test]
    fn partition_single_group() {
        let groups = partition(5, 4);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0], ids(1..=5));
        assert!(groups[1].is_empty());
    }

    #[test]
    fn duration_matches_unfolded_recurrence() {
        assert_eq!(rca_duration(1, 2, false), 1);
        assert_eq!(rca_duration(2, 2, false), 2);
        assert_eq!(rca_duration(3, 2, false), 4);
        assert_eq!(rca_duration(4, 2, false), 5);
        assert_eq!(rca_duration(8, 2, false), 11);
        assert_eq!(rca_duration(256, 2, false), 383);
    }

    #[test]
    fn duration_one_preference_adds_prelim_per_composed_call() {
        assert_eq!(rca_duration(2, 2, true), 2);
        assert_eq!(rca_duration(4, 2, true), 6);
        assert_eq!(rca_duration(8, 2, true), 14);
    }

    #[test]
    fn awake_bound_matches_unfolded_recurrence() {
        assert_eq!(rca_awake_bound(2, 2, false), 2);
        assert_eq!(rca_awake_bound(4, 2, false), 3);
        assert_eq!(rca_awake_bound(8, 2, false), 4);
        assert_eq!(rca_awake_bound(256, 2, false), 9);
        assert_eq!(rca_awake_bound(4, 2, true), 4);
    }

    #[test]
    fn awake_never_exceeds_duration() {
        for m in 1..=64 {
            for c in 1..=3 {
                for p in [false, true] {
                    assert!(rca_awake_bound(m, c, p) <= rca_duration(m, c, p));
                }
            }
        }
    }
}
