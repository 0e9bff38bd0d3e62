//! Minimal spanning and maximal separated cardinalities.
//!
//! For a fixed step count `n` and radius `eps` the covering relation is a symmetric graph on
//! the cloud. A spanning set is a dominating set of that graph (a set cover whose sets are
//! the closed neighbourhoods) and a separated set is an independent set. Both problems are
//! NP-hard; [`SolveMode::Exact`] runs branch and bound, [`SolveMode::Greedy`] the usual
//! heuristics, and [`SolveMode::Auto`] picks by cloud size.
//!
//! Candidate centres are restricted to the cloud itself. Ties are always broken towards the
//! lowest point id, so every solver is deterministic.

mod cover;
mod grid;
mod relation;
mod separated;

use serde::{Deserialize, Serialize};

pub use cover::{min_spanning, min_spanning_with};
pub(crate) use grid::validate_schedules;
pub use grid::{count_grid, CountCell, CountGrid, GridRequest};
pub use relation::{build_relation, BowenMatrix, PairView, RelationGraph};
pub use separated::{max_separated, max_separated_with};

/// Clouds up to this size are solved exactly under [`SolveMode::Auto`].
pub const DEFAULT_EXACT_THRESHOLD: usize = 64;

/// Which pairing of spanning and separation a relation encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Spanning needs both directions within `eps`; separation needs one direction beyond.
    #[serde(rename = "SymAND")]
    SymAnd,
    /// Spanning needs one direction within `eps`; separation needs both directions beyond.
    #[serde(rename = "AsymOR")]
    AsymOr,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::SymAnd => "SymAND",
            Variant::AsymOr => "AsymOR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    Exact,
    Greedy,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "exact")]
    ExactBnB,
    #[serde(rename = "greedy")]
    Greedy,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactBnB => "exact",
            Method::Greedy => "greedy",
        }
    }
}

/// The four counts of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// minimal symmetric-AND spanning set, `r'_n`
    R1,
    /// maximal OR-separated set, `s'_n`
    S1,
    /// minimal asymmetric-OR spanning set, `r''_n`
    R2,
    /// maximal AND-separated set, `s''_n`
    S2,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Quantity::R1, Quantity::S1, Quantity::R2, Quantity::S2];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::R1 => "r1",
            Quantity::S1 => "s1",
            Quantity::R2 => "r2",
            Quantity::S2 => "s2",
        }
    }

    pub fn variant(self) -> Variant {
        match self {
            Quantity::R1 | Quantity::S1 => Variant::SymAnd,
            Quantity::R2 | Quantity::S2 => Variant::AsymOr,
        }
    }

    pub fn is_spanning(self) -> bool {
        matches!(self, Quantity::R1 | Quantity::R2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverResult {
    pub cardinality: usize,
    pub witness: Vec<usize>,
    pub method: Method,
    pub optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparatedResult {
    pub cardinality: usize,
    pub witness: Vec<usize>,
    pub method: Method,
    pub optimal: bool,
}

pub(crate) fn resolve(mode: SolveMode, n_points: usize, exact_threshold: usize) -> Method {
    match mode {
        SolveMode::Exact => Method::ExactBnB,
        SolveMode::Greedy => Method::Greedy,
        SolveMode::Auto if n_points <= exact_threshold => Method::ExactBnB,
        SolveMode::Auto => Method::Greedy,
    }
}
