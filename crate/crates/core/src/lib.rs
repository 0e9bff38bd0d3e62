//! Numerical topological entropy for maps on quasi-metric spaces.
//!
//! A compact set is represented by a finite [`PointCloud`]; a map by a [`MapSpec`] whose
//! orbits over the cloud are precomputed into an [`OrbitTable`]. Given a quasi-metric `e`,
//! the dynamical distance `e_n(x, y) = max_{0 <= i < n} e(T^i x, T^i y)` induces two pairs
//! of covering notions:
//!
//! - **symmetric AND**: `y` spans `x` when `e_n(x,y) <= eps` and `e_n(y,x) <= eps`;
//!   separation is the negation (`>` in at least one direction). Counts `r'`, `s'`.
//! - **asymmetric OR**: `y` spans `x` when either direction is within `eps`; separation
//!   requires both directions to exceed `eps`. Counts `r''`, `s''`.
//!
//! Minimal spanning sets are minimum set covers and maximal separated sets are maximum
//! independent sets of the covering relation. Both are solved exactly by branch and bound on
//! small clouds and greedily on large ones (see [`covering`]). Growth rates of the counts in
//! `n` give the entropy estimates of [`entropy`].
//!
//! ```
//! use qme_core::{MapSpec, PointCloud, QuasiMetricSpec, OrbitTable, Variant, SolveMode};
//! use qme_core::covering::{build_relation, min_spanning, max_separated};
//!
//! let cloud = PointCloud::circle_grid(32).unwrap();
//! let orbits = OrbitTable::build(&MapSpec::doubling(), &cloud, 3).unwrap();
//! let arc = QuasiMetricSpec::circle_arc();
//! let graph = build_relation(&arc, &orbits, 3, 0.125, Variant::SymAnd).unwrap();
//! let r = min_spanning(&graph, SolveMode::Exact);
//! let s = max_separated(&graph, SolveMode::Exact);
//! assert!(r.cardinality <= s.cardinality);
//! ```

#![forbid(unsafe_code)]

pub mod covering;
pub mod dynamics;
pub mod entropy;
mod error;
pub mod quasimetric;

pub use covering::{
    CountCell, CountGrid, CoverResult, Method, Quantity, RelationGraph, SeparatedResult,
    SolveMode, Variant, DEFAULT_EXACT_THRESHOLD,
};
pub use dynamics::{CloudKind, MapKind, MapSpec, OrbitTable, PointCloud, SnapMode};
pub use entropy::{EntropyEstimate, EntropyVariant, EstimatorSettings};
pub use error::{Error, Result};
pub use quasimetric::{AxiomReport, BallSide, BallSpec, DistanceMatrix, QuasiMetricKind, QuasiMetricSpec};
