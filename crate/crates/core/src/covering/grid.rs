use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    max_separated_with, min_spanning_with, BowenMatrix, Method, Quantity, RelationGraph, SolveMode, Variant,
    DEFAULT_EXACT_THRESHOLD,
};
use crate::dynamics::OrbitTable;
use crate::error::{Error, Result};
use crate::quasimetric::QuasiMetricSpec;

/// What to count and how.
#[derive(Debug, Clone, Copy)]
pub struct GridRequest<'a> {
    pub n_list: &'a [usize],
    pub epsilon_list: &'a [f64],
    pub quantities: &'a [Quantity],
    pub mode: SolveMode,
    pub exact_threshold: usize,
}

impl<'a> GridRequest<'a> {
    pub fn new(n_list: &'a [usize], epsilon_list: &'a [f64]) -> Self {
        Self {
            n_list,
            epsilon_list,
            quantities: &Quantity::ALL,
            mode: SolveMode::Auto,
            exact_threshold: DEFAULT_EXACT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountCell {
    pub n: usize,
    pub epsilon: f64,
    pub quantity: Quantity,
    pub cardinality: usize,
    pub method: Method,
    pub optimal: bool,
}

/// `(n, eps) -> {r', s', r'', s''}` with solver metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountGrid {
    pub metric: String,
    pub cloud_size: usize,
    pub n_list: Vec<usize>,
    /// strictly decreasing
    pub epsilon_list: Vec<f64>,
    pub cells: Vec<CountCell>,
    pub diagnostics: Vec<String>,
}

impl CountGrid {
    pub fn get(&self, n: usize, epsilon: f64, quantity: Quantity) -> Option<&CountCell> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.epsilon == epsilon && c.quantity == quantity)
    }

    pub fn count(&self, n: usize, epsilon: f64, quantity: Quantity) -> Option<usize> {
        self.get(n, epsilon, quantity).map(|c| c.cardinality)
    }

    /// `(n, cardinality)` pairs for one radius, ascending in `n`.
    pub fn series(&self, epsilon: f64, quantity: Quantity) -> Vec<(usize, usize)> {
        self.n_list
            .iter()
            .filter_map(|&n| self.count(n, epsilon, quantity).map(|c| (n, c)))
            .collect()
    }

    pub fn all_exact(&self) -> bool {
        self.cells.iter().all(|c| c.optimal)
    }

    /// `n,epsilon,variant,quantity,cardinality,method,optimal`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,epsilon,variant,quantity,cardinality,method,optimal\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.n,
                c.epsilon,
                c.quantity.variant().as_str(),
                c.quantity.as_str(),
                c.cardinality,
                c.method.as_str(),
                c.optimal
            );
        }
        out
    }
}

pub(crate) fn validate_schedules(n_list: &[usize], epsilon_list: &[f64]) -> Result<Vec<f64>> {
    if n_list.is_empty() || epsilon_list.is_empty() {
        return Err(Error::InvalidSchedule("step and radius lists must be nonempty".into()));
    }
    if n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSchedule(format!("step list {n_list:?} must be strictly increasing and positive")));
    }
    if epsilon_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidSchedule(format!("radii {epsilon_list:?} must be positive and finite")));
    }
    let mut eps = epsilon_list.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    if eps.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSchedule(format!("radii {epsilon_list:?} contain duplicates")));
    }
    Ok(eps)
}

/// Counts every requested quantity on every `(n, eps)` cell.
///
/// Cells at the same `n` share one dynamical distance matrix and are solved in parallel.
pub fn count_grid(spec: &QuasiMetricSpec, orbits: &OrbitTable, request: &GridRequest<'_>) -> Result<CountGrid> {
    let eps_list = validate_schedules(request.n_list, request.epsilon_list)?;
    let n_top = *request.n_list.last().expect("validated nonempty");
    if n_top > orbits.n_max() {
        return Err(Error::StepOutOfRange { n: n_top, n_max: orbits.n_max() });
    }
    let wants = |v: Variant| request.quantities.iter().any(|q| q.variant() == v);
    let mut matrix = BowenMatrix::new(spec, orbits)?;
    let mut cells = Vec::new();
    for &n in request.n_list {
        matrix.advance_to(spec, orbits, n)?;
        let and_view = wants(Variant::SymAnd).then(|| matrix.pair_view(Variant::SymAnd));
        let or_view = wants(Variant::AsymOr).then(|| matrix.pair_view(Variant::AsymOr));
        let per_eps: Vec<Vec<CountCell>> = eps_list
            .par_iter()
            .map(|&eps| {
                let and = and_view.as_ref().map(|v| RelationGraph::from_view(v, eps)).transpose()?;
                let or = or_view.as_ref().map(|v| RelationGraph::from_view(v, eps)).transpose()?;
                let mut row = Vec::with_capacity(request.quantities.len());
                for &q in Quantity::ALL.iter().filter(|q| request.quantities.contains(q)) {
                    let graph = match q.variant() {
                        Variant::SymAnd => and.as_ref(),
                        Variant::AsymOr => or.as_ref(),
                    }
                    .expect("relation built for requested variant");
                    let (cardinality, method, optimal) = if q.is_spanning() {
                        let r = min_spanning_with(graph, request.mode, request.exact_threshold);
                        (r.cardinality, r.method, r.optimal)
                    } else {
                        let s = max_separated_with(graph, request.mode, request.exact_threshold);
                        (s.cardinality, s.method, s.optimal)
                    };
                    row.push(CountCell { n, epsilon: eps, quantity: q, cardinality, method, optimal });
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        cells.extend(per_eps.into_iter().flatten());
    }
    let mut grid = CountGrid {
        metric: spec.description.clone(),
        cloud_size: orbits.n_points(),
        n_list: request.n_list.to_vec(),
        epsilon_list: eps_list,
        cells,
        diagnostics: Vec::new(),
    };
    grid.diagnostics = monotonicity_diagnostics(&grid, request.quantities);
    Ok(grid)
}

/// Counts are non-increasing in `eps` and non-decreasing in `n` for exact solvers; greedy
/// cells may break either, which is reported rather than treated as an error.
fn monotonicity_diagnostics(grid: &CountGrid, quantities: &[Quantity]) -> Vec<String> {
    let mut notes = Vec::new();
    for &q in quantities {
        for &n in &grid.n_list {
            for w in grid.epsilon_list.windows(2) {
                let (big, small) = (grid.get(n, w[0], q), grid.get(n, w[1], q));
                if let (Some(big), Some(small)) = (big, small) {
                    if small.cardinality < big.cardinality {
                        notes.push(format!(
                            "{} at n={n}: count {} at eps={} below {} at eps={}{}",
                            q.as_str(),
                            small.cardinality,
                            w[1],
                            big.cardinality,
                            w[0],
                            if small.optimal && big.optimal { " (exact cells)" } else { " (greedy cell)" }
                        ));
                    }
                }
            }
        }
        for &eps in &grid.epsilon_list {
            for w in grid.n_list.windows(2) {
                if let (Some(a), Some(b)) = (grid.get(w[0], eps, q), grid.get(w[1], eps, q)) {
                    if b.cardinality < a.cardinality {
                        notes.push(format!(
                            "{} at eps={eps}: count {} at n={} below {} at n={}{}",
                            q.as_str(),
                            b.cardinality,
                            w[1],
                            a.cardinality,
                            w[0],
                            if a.optimal && b.optimal { " (exact cells)" } else { " (greedy cell)" }
                        ));
                    }
                }
            }
        }
    }
    notes
}
