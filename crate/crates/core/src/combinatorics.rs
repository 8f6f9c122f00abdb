//! Lazy enumeration of the index structures that the correlation formulas sum over.
//! All indices are 0-based.

use crate::error::{NcorrError, Result};
use itertools::Itertools;

pub const MAX_INDEX_SIZE: usize = 8;

fn guard(n: usize) -> Result<()> {
    if n > MAX_INDEX_SIZE {
        return Err(NcorrError::Size { got: n, range: "0..=8" });
    }
    Ok(())
}

/// A split of `{0..n}` into three labelled, possibly empty, parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition3 {
    pub n: usize,
    pub k: Vec<usize>,
    pub l: Vec<usize>,
    pub m: Vec<usize>,
}

/// All `3^n` labelled partitions, or only those with `|K| = |L|`.
pub fn enum_partition3(n: usize, require_equal_kl: bool) -> Result<impl Iterator<Item = Partition3>> {
    if n == 0 {
        return Err(NcorrError::Size { got: n, range: "1..=8" });
    }
    guard(n)?;
    let total = 3usize.pow(n as u32);
    Ok((0..total)
        .map(move |mut code| {
            let mut p = Partition3 { n, k: Vec::new(), l: Vec::new(), m: Vec::new() };
            for i in 0..n {
                match code % 3 {
                    0 => p.k.push(i),
                    1 => p.l.push(i),
                    _ => p.m.push(i),
                }
                code /= 3;
            }
            p
        })
        .filter(move |p| !require_equal_kl || p.k.len() == p.l.len()))
}

/// How many subset sizes the `(S, T)` sum keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Every `|S| = |T| ≤ min(|A|, |B|)`.
    Full,
    /// Only `|S| = |T| < q`.
    Below(usize),
}

impl Truncation {
    fn max_size(self, len_a: usize, len_b: usize) -> Option<usize> {
        let full = len_a.min(len_b);
        match self {
            Truncation::Full => Some(full),
            Truncation::Below(0) => None,
            Truncation::Below(q) => Some(full.min(q - 1)),
        }
    }
}

/// Index subsets `(S, T)` of `A` and `B` with `|S| = |T|`, ordered by size.
pub fn enum_subset_pairs(
    len_a: usize,
    len_b: usize,
    truncation: Truncation,
) -> impl Iterator<Item = (Vec<usize>, Vec<usize>)> {
    let sizes = match truncation.max_size(len_a, len_b) {
        Some(top) => 0..top + 1,
        None => 0..0,
    };
    sizes.flat_map(move |s| {
        (0..len_a)
            .combinations(s)
            .cartesian_product((0..len_b).combinations(s).collect::<Vec<_>>())
    })
}

/// A partial matching between the remaining A-side and B-side elements.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PairPartition {
    pub singletons_a: Vec<usize>,
    pub singletons_b: Vec<usize>,
    /// `(a index, b index)` pairs.
    pub doubletons: Vec<(usize, usize)>,
}

/// Every partial matching of `a_rest` against `b_rest` (cross-side doubletons only).
pub fn enum_pair_partitions(len_a: usize, len_b: usize) -> impl Iterator<Item = PairPartition> {
    (0..=len_a.min(len_b)).flat_map(move |k| {
        (0..len_a).combinations(k).flat_map(move |a_sel| {
            (0..len_b).permutations(k).map(move |b_sel| {
                // ordered b choices against sorted a choices give each matching once
                let doubletons: Vec<(usize, usize)> =
                    a_sel.iter().copied().zip(b_sel.iter().copied()).collect();
                PairPartition {
                    singletons_a: (0..len_a).filter(|i| !a_sel.contains(i)).collect(),
                    singletons_b: (0..len_b).filter(|j| !b_sel.contains(j)).collect(),
                    doubletons,
                }
            })
        })
    })
}

/// A set of disjoint index pairs `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PairSystem {
    pub pairs: Vec<(usize, usize)>,
}

impl PairSystem {
    pub fn r(&self) -> usize {
        self.pairs.len()
    }
}

fn perfect_matchings(items: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let first = items[0];
    let mut out = Vec::new();
    for pos in 1..items.len() {
        let rest: Vec<usize> = items[1..]
            .iter()
            .enumerate()
            .filter(|&(i, _)| i + 1 != pos)
            .map(|(_, &v)| v)
            .collect();
        for mut m in perfect_matchings(&rest) {
            m.insert(0, (first, items[pos]));
            out.push(m);
        }
    }
    out
}

/// Every nonempty system of disjoint pairs in `{0..n}`, for `r = 1..⌊n/2⌋`.
pub fn enum_pair_systems(n: usize) -> Result<impl Iterator<Item = PairSystem>> {
    guard(n)?;
    Ok((1..=n / 2).flat_map(move |r| {
        (0..n)
            .combinations(2 * r)
            .flat_map(|chosen| perfect_matchings(&chosen))
            .map(|pairs| PairSystem { pairs })
    }))
}

/// All `k!` permutations of `{0..k}` in lexicographic order.
pub fn enum_permutations(k: usize) -> Result<impl Iterator<Item = Vec<usize>>> {
    guard(k)?;
    Ok((0..k).permutations(k))
}

/// Parity of a permutation: `+1` for even, `-1` for odd.
pub fn permutation_sign(perm: &[usize]) -> f64 {
    let mut seen = vec![false; perm.len()];
    let mut sign = 1.0;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// All set partitions of `items` as lists of blocks (restricted growth strings).
    fn all_set_partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
        let n = items.len();
        let mut out = Vec::new();
        let mut rgs = vec![0usize; n];
        fn rec(i: usize, max: usize, rgs: &mut Vec<usize>, items: &[usize], out: &mut Vec<Vec<Vec<usize>>>) {
            if i == items.len() {
                let blocks = rgs.iter().copied().max().map_or(0, |m| m + 1);
                let mut parts = vec![Vec::new(); blocks];
                for (j, &b) in rgs.iter().enumerate() {
                    parts[b].push(items[j]);
                }
                out.push(parts);
                return;
            }
            for b in 0..=max {
                rgs[i] = b;
                rec(i + 1, max.max(b + 1), rgs, items, out);
            }
        }
        if n == 0 {
            return vec![Vec::new()];
        }
        rec(0, 0, &mut rgs, items, &mut out);
        out
    }

    fn brute_partition3(n: usize, equal: bool) -> usize {
        let mut count = 0;
        for code in 0..3usize.pow(n as u32) {
            let digits: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
            let k = digits.iter().filter(|&&d| d == 0).count();
            let l = digits.iter().filter(|&&d| d == 1).count();
            if !equal || k == l {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn partition3_counts() {
        assert_eq!(enum_partition3(1, false).unwrap().count(), 3);
        assert_eq!(enum_partition3(2, true).unwrap().count(), 3);
        assert_eq!(enum_partition3(4, true).unwrap().count(), 19);
        for n in 1..=6 {
            for eq in [false, true] {
                let all: Vec<_> = enum_partition3(n, eq).unwrap().collect();
                assert_eq!(all.len(), brute_partition3(n, eq));
                let set: HashSet<_> = all.iter().cloned().collect();
                assert_eq!(set.len(), all.len());
                for p in &all {
                    let mut u: Vec<usize> = p.k.iter().chain(&p.l).chain(&p.m).copied().collect();
                    u.sort();
                    assert_eq!(u, (0..n).collect::<Vec<_>>());
                }
            }
        }
        assert!(enum_partition3(9, false).is_err());
        assert!(enum_partition3(0, false).is_err());
    }

    #[test]
    fn subset_pair_counts() {
        assert_eq!(enum_subset_pairs(1, 1, Truncation::Full).count(), 2);
        assert_eq!(enum_subset_pairs(1, 2, Truncation::Full).count(), 3);
        assert_eq!(enum_subset_pairs(2, 2, Truncation::Full).count(), 6);
        assert_eq!(enum_subset_pairs(2, 2, Truncation::Below(1)).count(), 1);
        assert_eq!(enum_subset_pairs(2, 2, Truncation::Below(2)).count(), 5);
        assert_eq!(enum_subset_pairs(2, 2, Truncation::Below(0)).count(), 0);
        assert_eq!(enum_subset_pairs(0, 0, Truncation::Full).count(), 1);
        for a in 0..5 {
            for b in 0..5 {
                let all: Vec<_> = enum_subset_pairs(a, b, Truncation::Full).collect();
                let set: HashSet<_> = all.iter().cloned().collect();
                assert_eq!(set.len(), all.len());
                let mut brute = 0;
                for ms in 0..(1usize << a) {
                    for mt in 0..(1usize << b) {
                        if ms.count_ones() == mt.count_ones() {
                            brute += 1;
                        }
                    }
                }
                assert_eq!(all.len(), brute);
            }
        }
    }

    fn brute_matchings(a: usize, b: usize) -> usize {
        let items: Vec<usize> = (0..a + b).collect();
        all_set_partitions(&items)
            .into_iter()
            .filter(|blocks| {
                blocks.iter().all(|bl| match bl.len() {
                    1 => true,
                    2 => (bl[0] < a) != (bl[1] < a),
                    _ => false,
                })
            })
            .count()
    }

    #[test]
    fn pair_partition_counts() {
        assert_eq!(enum_pair_partitions(1, 1).count(), 2);
        assert_eq!(enum_pair_partitions(1, 2).count(), 3);
        assert_eq!(enum_pair_partitions(2, 2).count(), 7);
        let empty: Vec<_> = enum_pair_partitions(0, 0).collect();
        assert_eq!(empty, vec![PairPartition::default()]);
        for a in 0..5 {
            for b in 0..5 {
                let all: Vec<_> = enum_pair_partitions(a, b).collect();
                assert_eq!(all.len(), brute_matchings(a, b), "a={a} b={b}");
                let set: HashSet<_> = all.iter().cloned().collect();
                assert_eq!(set.len(), all.len());
            }
        }
    }

    #[test]
    fn pair_system_counts() {
        assert_eq!(enum_pair_systems(2).unwrap().count(), 1);
        assert_eq!(enum_pair_systems(3).unwrap().count(), 3);
        assert_eq!(enum_pair_systems(4).unwrap().count(), 9);
        for n in 0..=6 {
            let items: Vec<usize> = (0..n).collect();
            let brute = all_set_partitions(&items)
                .into_iter()
                .filter(|bl| bl.iter().all(|b| b.len() <= 2) && bl.iter().any(|b| b.len() == 2))
                .count();
            let all: Vec<_> = enum_pair_systems(n).unwrap().collect();
            assert_eq!(all.len(), brute);
            assert!(all.iter().all(|s| s.pairs.iter().all(|&(i, j)| i < j)));
        }
        assert!(enum_pair_systems(9).is_err());
    }

    #[test]
    fn permutation_counts_and_signs() {
        assert_eq!(enum_permutations(0).unwrap().collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
        assert_eq!(enum_permutations(1).unwrap().count(), 1);
        assert_eq!(enum_permutations(3).unwrap().count(), 6);
        let total: f64 = enum_permutations(4).unwrap().map(|p| permutation_sign(&p)).sum();
        assert_eq!(total, 0.0);
        assert_eq!(permutation_sign(&[1, 0, 2]), -1.0);
        assert_eq!(permutation_sign(&[1, 2, 0]), 1.0);
    }
}
