//! Minimum spanning sets as minimum set cover over closed neighbourhoods.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use fixedbitset::FixedBitSet;

use super::{resolve, CoverResult, Method, RelationGraph, SolveMode, DEFAULT_EXACT_THRESHOLD};

pub fn min_spanning(graph: &RelationGraph, mode: SolveMode) -> CoverResult {
    min_spanning_with(graph, mode, DEFAULT_EXACT_THRESHOLD)
}

pub fn min_spanning_with(graph: &RelationGraph, mode: SolveMode, exact_threshold: usize) -> CoverResult {
    let rows = graph.cover_rows();
    match resolve(mode, rows.len(), exact_threshold) {
        Method::Greedy => {
            let witness = greedy_cover(rows);
            CoverResult { cardinality: witness.len(), witness, method: Method::Greedy, optimal: false }
        }
        Method::ExactBnB => {
            let mut witness = exact_cover(rows);
            witness.sort_unstable();
            CoverResult { cardinality: witness.len(), witness, method: Method::ExactBnB, optimal: true }
        }
    }
}

/// Repeatedly takes the centre spanning the most uncovered points, lowest id on ties.
///
/// Gains only shrink as points get covered, so stale heap keys are upper bounds and a
/// refreshed key that still beats the heap top is the true maximum.
pub(crate) fn greedy_cover(rows: &[FixedBitSet]) -> Vec<usize> {
    let np = rows.len();
    let mut uncovered = FixedBitSet::with_capacity(np);
    uncovered.insert_range(..);
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> =
        rows.iter().enumerate().map(|(y, r)| (r.count_ones(..), Reverse(y))).collect();
    let mut chosen = Vec::new();
    while !uncovered.is_clear() {
        let (_, Reverse(y)) = heap.pop().expect("diagonal keeps every point coverable");
        let gain = rows[y].intersection_count(&uncovered);
        if gain == 0 {
            continue;
        }
        let fresh = (gain, Reverse(y));
        if heap.peek().is_none_or(|top| fresh >= *top) {
            uncovered.difference_with(&rows[y]);
            chosen.push(y);
        } else {
            heap.push(fresh);
        }
    }
    chosen
}

struct CoverSearch<'a> {
    rows: &'a [FixedBitSet],
    /// elements ordered by how few centres can span them
    by_scarcity: Vec<usize>,
    best: Vec<usize>,
    chosen: Vec<usize>,
}

impl CoverSearch<'_> {
    /// Elements whose candidate centres are pairwise disjoint each need their own centre.
    fn packing_bound(&self, uncovered: &FixedBitSet) -> usize {
        let mut used = FixedBitSet::with_capacity(self.rows.len());
        let mut bound = 0;
        for &u in &self.by_scarcity {
            if uncovered.contains(u) && self.rows[u].is_disjoint(&used) {
                used.union_with(&self.rows[u]);
                bound += 1;
            }
        }
        bound
    }

    fn search(&mut self, uncovered: &FixedBitSet) {
        if uncovered.is_clear() {
            if self.chosen.len() < self.best.len() {
                self.best = self.chosen.clone();
            }
            return;
        }
        if self.chosen.len() + self.packing_bound(uncovered) >= self.best.len() {
            return;
        }
        // branch on the uncovered element with the fewest candidate centres
        let target = self
            .by_scarcity
            .iter()
            .copied()
            .find(|&u| uncovered.contains(u))
            .expect("uncovered is not empty");

        let mut candidates: Vec<(usize, usize, FixedBitSet)> = self.rows[target]
            .ones()
            .map(|y| {
                let mut gain_set = self.rows[y].clone();
                gain_set.intersect_with(uncovered);
                (gain_set.count_ones(..), y, gain_set)
            })
            .collect();
        candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

        // a candidate whose new coverage is contained in an earlier one's is dominated
        let mut kept: Vec<usize> = Vec::with_capacity(candidates.len());
        for i in 0..candidates.len() {
            if kept.iter().all(|&k| !candidates[i].2.is_subset(&candidates[k].2)) {
                kept.push(i);
            }
        }

        for i in kept {
            if self.chosen.len() + 1 >= self.best.len() {
                return;
            }
            let (_, y, _) = candidates[i];
            let mut rest = uncovered.clone();
            rest.difference_with(&self.rows[y]);
            self.chosen.push(y);
            self.search(&rest);
            self.chosen.pop();
        }
    }
}

pub(crate) fn exact_cover(rows: &[FixedBitSet]) -> Vec<usize> {
    let np = rows.len();
    if np == 0 {
        return Vec::new();
    }
    let mut by_scarcity: Vec<usize> = (0..np).collect();
    by_scarcity.sort_by_key(|&u| (rows[u].count_ones(..), u));
    let mut search = CoverSearch { rows, by_scarcity, best: greedy_cover(rows), chosen: Vec::new() };
    let mut all = FixedBitSet::with_capacity(np);
    all.insert_range(..);
    search.search(&all);
    search.best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::Variant;
    use proptest::prelude::*;

    fn graph(rows: Vec<Vec<bool>>) -> RelationGraph {
        RelationGraph::from_cover_matrix(&rows, Variant::SymAnd).unwrap()
    }

    /// Smallest spanning subset size, by enumerating every subset.
    fn brute_force_min_cover(g: &RelationGraph) -> usize {
        let n = g.n_points();
        (1u32..1 << n)
            .filter_map(|mask| {
                let set: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                g.is_spanning(&set).then_some(set.len())
            })
            .min()
            .unwrap()
    }

    fn random_graph(n: usize, edges: &[(usize, usize)]) -> RelationGraph {
        let mut m = vec![vec![false; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b) in edges {
            let (a, b) = (a % n, b % n);
            m[a][b] = true;
            m[b][a] = true;
        }
        graph(m)
    }

    #[test]
    fn all_true_needs_one() {
        let g = graph(vec![vec![true; 5]; 5]);
        for mode in [SolveMode::Exact, SolveMode::Greedy] {
            let r = min_spanning(&g, mode);
            assert_eq!(r.cardinality, 1);
            assert_eq!(r.witness, vec![0]);
        }
    }

    #[test]
    fn identity_relation_needs_everything() {
        let n = 6;
        let g = graph((0..n).map(|i| (0..n).map(|j| i == j).collect()).collect());
        let r = min_spanning(&g, SolveMode::Exact);
        assert_eq!(r.cardinality, n);
        assert!(r.optimal);
        assert_eq!(min_spanning(&g, SolveMode::Greedy).cardinality, n);
    }

    #[test]
    fn greedy_takes_the_hub_first() {
        let mut edges = vec![];
        // hub 0 adjacent to 1,2,3,4
        for v in 1..=4 {
            edges.push((0, v));
        }
        // leaves 5,6,7 attached to 1,2,3; 8 attached to 4 and 9 attached to 8
        edges.extend([(1, 5), (2, 6), (3, 7), (4, 8), (8, 9)]);
        let g = random_graph(10, &edges);
        let exact = min_spanning(&g, SolveMode::Exact);
        let greedy = min_spanning(&g, SolveMode::Greedy);
        assert_eq!(exact.cardinality, brute_force_min_cover(&g));
        assert!(greedy.cardinality >= exact.cardinality);
        assert!(g.is_spanning(&greedy.witness));
        assert!(g.is_spanning(&exact.witness));
    }

    #[test]
    fn auto_respects_threshold() {
        let g = graph(vec![vec![true; 3]; 3]);
        assert_eq!(min_spanning_with(&g, SolveMode::Auto, 3).method, Method::ExactBnB);
        assert_eq!(min_spanning_with(&g, SolveMode::Auto, 2).method, Method::Greedy);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn exact_matches_enumeration(n in 1usize..11, edges in proptest::collection::vec((0usize..11, 0usize..11), 0..25)) {
            let g = random_graph(n, &edges);
            let exact = min_spanning(&g, SolveMode::Exact);
            let greedy = min_spanning(&g, SolveMode::Greedy);
            prop_assert!(g.is_spanning(&exact.witness));
            prop_assert!(g.is_spanning(&greedy.witness));
            prop_assert_eq!(exact.cardinality, brute_force_min_cover(&g));
            prop_assert!(greedy.cardinality >= exact.cardinality);
        }
    }
}
