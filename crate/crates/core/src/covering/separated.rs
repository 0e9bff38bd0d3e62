//! Maximum separated sets: maximum cliques of the separation graph.

use fixedbitset::FixedBitSet;

use super::{resolve, Method, RelationGraph, SeparatedResult, SolveMode, DEFAULT_EXACT_THRESHOLD};

pub fn max_separated(graph: &RelationGraph, mode: SolveMode) -> SeparatedResult {
    max_separated_with(graph, mode, DEFAULT_EXACT_THRESHOLD)
}

pub fn max_separated_with(graph: &RelationGraph, mode: SolveMode, exact_threshold: usize) -> SeparatedResult {
    match resolve(mode, graph.n_points(), exact_threshold) {
        Method::Greedy => {
            let witness = greedy_separated(graph.cover_rows());
            SeparatedResult { cardinality: witness.len(), witness, method: Method::Greedy, optimal: false }
        }
        Method::ExactBnB => {
            let mut witness = exact_separated(graph.separation_rows(), graph.cover_rows());
            witness.sort_unstable();
            SeparatedResult { cardinality: witness.len(), witness, method: Method::ExactBnB, optimal: true }
        }
    }
}

/// Scans points in id order and keeps each one not spanned by an earlier pick.
pub(crate) fn greedy_separated(cover: &[FixedBitSet]) -> Vec<usize> {
    let mut blocked = FixedBitSet::with_capacity(cover.len());
    let mut picked = Vec::new();
    for (x, row) in cover.iter().enumerate() {
        if !blocked.contains(x) {
            picked.push(x);
            blocked.union_with(row);
        }
    }
    picked
}

struct CliqueSearch<'a> {
    adj: &'a [FixedBitSet],
    best: Vec<usize>,
    current: Vec<usize>,
}

impl CliqueSearch<'_> {
    /// Greedy sequential colouring of `cand` in id order. Returns vertices ordered by colour
    /// together with the colour number of each, so that `colour[i]` bounds the clique size
    /// available among `order[..=i]`.
    fn colour_sort(&self, cand: &FixedBitSet) -> (Vec<usize>, Vec<usize>) {
        let mut order = Vec::with_capacity(cand.count_ones(..));
        let mut colours = Vec::with_capacity(order.capacity());
        let mut uncoloured = cand.clone();
        let mut colour = 0;
        while !uncoloured.is_clear() {
            colour += 1;
            let mut available = uncoloured.clone();
            while let Some(v) = available.minimum() {
                available.set(v, false);
                available.difference_with(&self.adj[v]);
                uncoloured.set(v, false);
                order.push(v);
                colours.push(colour);
            }
        }
        (order, colours)
    }

    fn expand(&mut self, mut cand: FixedBitSet) {
        let (order, colours) = self.colour_sort(&cand);
        for i in (0..order.len()).rev() {
            if self.current.len() + colours[i] <= self.best.len() {
                return;
            }
            let v = order[i];
            self.current.push(v);
            let mut next = cand.clone();
            next.intersect_with(&self.adj[v]);
            if next.is_clear() {
                if self.current.len() > self.best.len() {
                    self.best = self.current.clone();
                }
            } else {
                self.expand(next);
            }
            self.current.pop();
            cand.set(v, false);
        }
    }
}

pub(crate) fn exact_separated(separation: &[FixedBitSet], cover: &[FixedBitSet]) -> Vec<usize> {
    let np = separation.len();
    if np == 0 {
        return Vec::new();
    }
    let mut search = CliqueSearch { adj: separation, best: greedy_separated(cover), current: Vec::new() };
    let mut all = FixedBitSet::with_capacity(np);
    all.insert_range(..);
    search.expand(all);
    search.best
}
