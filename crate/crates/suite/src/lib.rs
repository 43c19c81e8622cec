//! Fixtures, instance corpora and reference implementations used by the
//! acceptance suite. The references here share no code with the library.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use covsat::cnf::{parse_dimacs, CnfFormula};
use covsat::oracle::random_cnf;

pub type EdgeSet = BTreeSet<(usize, usize)>;

pub const F1: &str = "p cnf 3 3\n1 -2 0\n2 3 0\n-1 -3 0\n";
pub const FD: &str = "p cnf 2 3\n1 -2 0\n2 0\n-1 0\n";
pub const FC: &str = "p cnf 2 3\n1 -2 0\n-1 2 0\n-1 0\n";

pub fn fixture(text: &str) -> CnfFormula {
    parse_dimacs(text).expect("fixture parses")
}

/// A seeded instance with its size drawn from the given ranges.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub formula: CnfFormula,
}

/// `count` instances with `n` uniform in `1..=max_n`, `m` uniform in
/// `1..=clauses(n)` and clause lengths in `1..=min(max_len, n)`.
pub fn corpus(tag: u64, count: u64, max_n: u32, clauses: impl Fn(u32) -> usize, max_len: usize) -> Vec<Instance> {
    (0..count)
        .map(|k| {
            let seed = tag.wrapping_mul(1_000_003).wrapping_add(k);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=max_n);
            let m = rng.gen_range(1..=clauses(n).max(1));
            let len = max_len.min(n as usize);
            Instance {
                seed,
                formula: random_cnf(seed, n, m, 1, len).expect("bounds are valid"),
            }
        })
        .collect()
}

/// Seeded subset of `1..=n`.
pub fn random_subset(seed: u64, n: usize) -> BTreeSet<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=n).filter(|_| rng.gen_bool(0.5)).collect()
}

/// Every elementary cycle of a digraph by extending simple paths from each
/// start vertex through larger vertices only; each cycle starts at its least
/// vertex. Output sorted.
pub fn reference_cycles(n: usize, edges: &EdgeSet) -> Vec<Vec<usize>> {
    fn extend(start: usize, path: &mut Vec<usize>, n: usize, edges: &EdgeSet, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        if edges.contains(&(last, start)) {
            out.push(path.clone());
        }
        for next in start + 1..=n {
            if !path.contains(&next) && edges.contains(&(last, next)) {
                path.push(next);
                extend(start, path, n, edges, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    for start in 1..=n {
        extend(start, &mut vec![start], n, edges, &mut out);
    }
    out.sort();
    out
}

/// Successor map over vertices `1..=n`, every vertex present as a key.
pub fn adjacency(n: usize, edges: &EdgeSet) -> BTreeMap<usize, BTreeSet<usize>> {
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = (1..=n).map(|v| (v, BTreeSet::new())).collect();
    for &(a, b) in edges {
        adj.get_mut(&a).unwrap().insert(b);
    }
    adj
}

/// Calls `visit` on every edge set over `1..=n` (self-loops included) with at
/// most `budget` edges.
pub fn for_each_digraph(n: usize, budget: usize, mut visit: impl FnMut(&EdgeSet)) {
    let all: Vec<(usize, usize)> = (1..=n).flat_map(|a| (1..=n).map(move |b| (a, b))).collect();
    fn rec(all: &[(usize, usize)], from: usize, budget: usize, chosen: &mut EdgeSet, visit: &mut dyn FnMut(&EdgeSet)) {
        visit(chosen);
        if budget == 0 {
            return;
        }
        for i in from..all.len() {
            chosen.insert(all[i]);
            rec(all, i + 1, budget - 1, chosen, visit);
            chosen.remove(&all[i]);
        }
    }
    rec(&all, 0, budget, &mut BTreeSet::new(), &mut visit);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_cycles_small() {
        let edges: BTreeSet<(usize, usize)> = [(1, 2), (2, 1), (2, 3)].into_iter().collect();
        assert_eq!(reference_cycles(3, &edges), vec![vec![1, 2]]);
        let tri: BTreeSet<(usize, usize)> = [(1, 2), (2, 3), (3, 1), (1, 3), (3, 3)].into_iter().collect();
        assert_eq!(reference_cycles(3, &tri), vec![vec![1, 2, 3], vec![1, 3], vec![3]]);
    }

    #[test]
    fn digraph_counts() {
        let mut count = 0;
        for_each_digraph(2, 4, |_| count += 1);
        assert_eq!(count, 16);
    }
}
