//! Quasi-metrics: evaluation, axiom checks, symmetrizations and balls.
//!
//! A quasi-metric satisfies `e(x,y) >= 0`, `e(x,y) = 0 iff x = y` and the triangle
//! inequality, but not necessarily symmetry. Every evaluation here is a deterministic
//! function of the two coordinate slices, so comparisons against a radius are exact and
//! reproducible; no tolerance is ever folded into a comparison.

use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{OrbitTable, PointCloud};
use crate::error::{Error, Result};

/// Square matrix of nonnegative finite distances with zero diagonal.
///
/// Points of a matrix-backed space are the indices `0..size`, carried as one-dimensional
/// coordinates holding the index value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    size: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::InvalidMatrix("matrix has no rows".into()));
        }
        let mut values = Vec::with_capacity(size * size);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != size {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i},{j}) = {v} is not a finite nonnegative number"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "diagonal entry ({i},{i}) = {v} is not zero"
                    )));
                }
                values.push(v);
            }
        }
        Ok(Self { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    /// Parses the `qmetric,v1,<n>` CSV format: a header line followed by `n` rows of `n`
    /// comma-separated values.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader
            .lines()
            .map(|l| l.map(|s| s.trim().to_string()))
            .filter(|l| !matches!(l, Ok(s) if s.is_empty()));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing qmetric header".into()))??;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 3 || fields[0] != "qmetric" || fields[1] != "v1" {
            return Err(Error::Parse(format!("bad header {header:?}, expected qmetric,v1,<n>")));
        }
        let n: usize = fields[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad size field {:?}", fields[2])))?;
        let mut rows = Vec::with_capacity(n);
        for line in lines {
            let line = line?;
            let row = line
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number {f:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::InvalidMatrix(format!(
                "header declares {n} rows, found {}",
                rows.len()
            )));
        }
        Self::new(rows)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "qmetric,v1,{}", self.size)?;
        for i in 0..self.size {
            let row: Vec<String> = (0..self.size).map(|j| self.get(i, j).to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// How a symmetrized metric combines the two directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetrization {
    /// `(e(x,y) + e(y,x)) / 2`
    Mean,
    /// `max(e(x,y), e(y,x))`
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuasiMetricKind {
    /// On the real line: `y - x` when `y >= x`, otherwise 1.
    Example1Line,
    /// Euclidean distance in any dimension.
    EuclideanSym,
    /// Arc length on the circle `[0, 1)`, at most 1/2.
    CircleArc,
    /// `sum_k alpha * (y_k - x_k)^+ + beta * (x_k - y_k)^+`.
    WeightedAsym { alpha: f64, beta: f64 },
    MatrixBacked { matrix: DistanceMatrix },
    /// Symbol blocks: `2^-k` where `k` is the first index at which the blocks disagree.
    BlockPrefix,
    /// As [`QuasiMetricKind::BlockPrefix`], scaled by `weight` when the first disagreeing
    /// symbol of `x` exceeds that of `y`. A quasi-metric for `1 <= weight <= 4`.
    BlockPrefixAsym { weight: f64 },
    Symmetrized {
        inner: Box<QuasiMetricKind>,
        rule: Symmetrization,
    },
}

impl QuasiMetricKind {
    fn required_dim(&self) -> Option<usize> {
        match self {
            Self::Example1Line | Self::CircleArc | Self::MatrixBacked { .. } => Some(1),
            Self::Symmetrized { inner, .. } => inner.required_dim(),
            _ => None,
        }
    }

    fn name(&self) -> String {
        match self {
            Self::Example1Line => "example1_line".into(),
            Self::EuclideanSym => "euclidean".into(),
            Self::CircleArc => "circle_arc".into(),
            Self::WeightedAsym { alpha, beta } => format!("weighted_asym(alpha={alpha}, beta={beta})"),
            Self::MatrixBacked { matrix } => format!("matrix({}x{})", matrix.size, matrix.size),
            Self::BlockPrefix => "block_prefix".into(),
            Self::BlockPrefixAsym { weight } => format!("block_prefix_asym(weight={weight})"),
            Self::Symmetrized { inner, rule } => match rule {
                Symmetrization::Mean => format!("mean_sym({})", inner.name()),
                Symmetrization::Max => format!("max_sym({})", inner.name()),
            },
        }
    }

    #[inline]
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Self::Example1Line => {
                let (a, b) = (x[0], y[0]);
                if b >= a {
                    b - a
                } else {
                    1.0
                }
            }
            Self::EuclideanSym => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Self::CircleArc => {
                let t = (x[0] - y[0]).abs();
                let t = t - t.floor();
                t.min(1.0 - t)
            }
            Self::WeightedAsym { alpha, beta } => x
                .iter()
                .zip(y)
                .map(|(a, b)| {
                    if b >= a {
                        alpha * (b - a)
                    } else {
                        beta * (a - b)
                    }
                })
                .sum(),
            Self::MatrixBacked { matrix } => matrix.get(x[0] as usize, y[0] as usize),
            Self::BlockPrefix => match first_disagreement(x, y) {
                None => 0.0,
                Some(k) => prefix_weight(k),
            },
            Self::BlockPrefixAsym { weight } => match first_disagreement(x, y) {
                None => 0.0,
                Some(k) if x[k] > y[k] => weight * prefix_weight(k),
                Some(k) => prefix_weight(k),
            },
            Self::Symmetrized { inner, rule } => {
                let (a, b) = (inner.eval(x, y), inner.eval(y, x));
                match rule {
                    Symmetrization::Mean => (a + b) / 2.0,
                    Symmetrization::Max => a.max(b),
                }
            }
        }
    }

    fn check_params(&self) -> Result<()> {
        match self {
            Self::WeightedAsym { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite() && *alpha > 0.0 && *beta > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "weighted_asym needs positive finite weights, got alpha={alpha}, beta={beta}"
                    )));
                }
            }
            Self::BlockPrefixAsym { weight } => {
                if !(1.0..=4.0).contains(weight) {
                    return Err(Error::InvalidParameter(format!(
                        "block_prefix_asym weight must lie in [1, 4], got {weight}"
                    )));
                }
            }
            Self::Symmetrized { inner, .. } => inner.check_params()?,
            _ => {}
        }
        Ok(())
    }

    fn matrix_size(&self) -> Option<usize> {
        match self {
            Self::MatrixBacked { matrix } => Some(matrix.size),
            Self::Symmetrized { inner, .. } => inner.matrix_size(),
            _ => None,
        }
    }
}

fn first_disagreement(x: &[f64], y: &[f64]) -> Option<usize> {
    x.iter().zip(y).position(|(a, b)| a != b)
}

fn prefix_weight(k: usize) -> f64 {
    // 2^-k is exact for every block length we can enumerate
    0.5f64.powi(k as i32)
}

/// A named distance rule producing `e(x, y) >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiMetricSpec {
    pub kind: QuasiMetricKind,
    pub description: String,
}

impl QuasiMetricSpec {
    pub fn new(kind: QuasiMetricKind) -> Result<Self> {
        kind.check_params()?;
        let description = kind.name();
        Ok(Self { kind, description })
    }

    pub fn example1_line() -> Self {
        Self::new(QuasiMetricKind::Example1Line).expect("no parameters")
    }

    pub fn euclidean() -> Self {
        Self::new(QuasiMetricKind::EuclideanSym).expect("no parameters")
    }

    pub fn circle_arc() -> Self {
        Self::new(QuasiMetricKind::CircleArc).expect("no parameters")
    }

    pub fn block_prefix() -> Self {
        Self::new(QuasiMetricKind::BlockPrefix).expect("no parameters")
    }

    pub fn weighted_asym(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(QuasiMetricKind::WeightedAsym { alpha, beta })
    }

    pub fn block_prefix_asym(weight: f64) -> Result<Self> {
        Self::new(QuasiMetricKind::BlockPrefixAsym { weight })
    }

    pub fn matrix(matrix: DistanceMatrix) -> Self {
        Self::new(QuasiMetricKind::MatrixBacked { matrix }).expect("validated matrix")
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Ok(Self::matrix(DistanceMatrix::new(rows)?))
    }

    /// Index cloud matching a matrix-backed spec, `None` for coordinate-based kinds.
    pub fn matrix_size(&self) -> Option<usize> {
        self.kind.matrix_size()
    }

    /// Checks that `p` is a legal argument for this quasi-metric.
    pub fn validate_point(&self, p: &[f64]) -> Result<()> {
        if p.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if let Some(d) = self.kind.required_dim() {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.len() });
            }
        }
        if let Some(size) = self.matrix_size() {
            let v = p[0];
            if v < 0.0 || v.fract() != 0.0 || v >= size as f64 {
                return Err(Error::IndexOutOfRange {
                    index: if v < 0.0 { usize::MAX } else { v as usize },
                    size,
                });
            }
        }
        Ok(())
    }

    /// `e(x, y)`.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
        }
        self.validate_point(x)?;
        self.validate_point(y)?;
        Ok(self.kind.eval(x, y))
    }

    /// Evaluation without argument checks; callers validate points once up front.
    #[inline]
    pub(crate) fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.kind.eval(x, y)
    }

    /// `d_e(x,y) = (e(x,y) + e(y,x)) / 2`.
    pub fn symmetrize_mean(&self) -> Self {
        self.symmetrize(Symmetrization::Mean)
    }

    /// `m_e(x,y) = max(e(x,y), e(y,x))`.
    pub fn symmetrize_max(&self) -> Self {
        self.symmetrize(Symmetrization::Max)
    }

    fn symmetrize(&self, rule: Symmetrization) -> Self {
        let kind = QuasiMetricKind::Symmetrized { inner: Box::new(self.kind.clone()), rule };
        let description = kind.name();
        Self { kind, description }
    }

    /// Scans a cloud for axiom violations.
    ///
    /// All pairs are evaluated. Triples are checked exhaustively when `|cloud|^3` fits in
    /// `triple_budget`; otherwise `triple_budget` triples are drawn from a ChaCha stream
    /// seeded with `seed`.
    pub fn check_axioms(&self, cloud: &PointCloud, triple_budget: u64, seed: u64) -> Result<AxiomReport> {
        let n = cloud.len();
        if n == 0 {
            return Err(Error::EmptyCloud);
        }
        if triple_budget == 0 {
            return Err(Error::InvalidParameter("triple_budget must be at least 1".into()));
        }
        for i in 0..n {
            self.validate_point(cloud.point(i))?;
        }
        let dist: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| self.eval(cloud.point(k / n), cloud.point(k % n)))
            .collect();
        let at = |i: usize, j: usize| dist[i * n + j];

        let mut report = AxiomReport {
            metric: self.description.clone(),
            points: n,
            nonnegativity_ok: true,
            identity_ok: true,
            triangle_ok: true,
            violations: Vec::new(),
            identity_failures: Vec::new(),
            symmetric: true,
            max_asymmetry: 0.0,
            triples_checked: 0,
            exhaustive: false,
            seed,
        };
        for i in 0..n {
            for j in 0..n {
                let v = at(i, j);
                if !v.is_finite() || v < 0.0 {
                    report.nonnegativity_ok = false;
                }
                if (i == j) != (v == 0.0) {
                    report.identity_ok = false;
                    report.identity_failures.push((i, j));
                }
                let gap = (v - at(j, i)).abs();
                if gap > report.max_asymmetry {
                    report.max_asymmetry = gap;
                }
            }
        }
        report.symmetric = report.max_asymmetry == 0.0;

        let check = |x: usize, y: usize, z: usize, report: &mut AxiomReport| {
            let lhs = at(x, z);
            let rhs = at(x, y) + at(y, z);
            if lhs > rhs {
                report.violations.push(TriangleViolation { x, y, z, lhs, rhs });
            }
        };
        let total = (n as u128).pow(3);
        if total <= triple_budget as u128 {
            report.exhaustive = true;
            report.triples_checked = total as u64;
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        check(x, y, z, &mut report);
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            report.triples_checked = triple_budget;
            for _ in 0..triple_budget {
                let (x, y, z) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                check(x, y, z, &mut report);
            }
        }
        report.triangle_ok = report.violations.is_empty();
        Ok(report)
    }

    /// Members of a ball around `cloud[ball.center]`, in ascending id order.
    pub fn ball_members(&self, cloud: &PointCloud, ball: &BallSpec) -> Result<Vec<usize>> {
        if ball.center >= cloud.len() {
            return Err(Error::UnknownPoint(ball.center));
        }
        if !(ball.radius > 0.0) {
            return Err(Error::InvalidParameter(format!("ball radius must be positive, got {}", ball.radius)));
        }
        let p = cloud.point(ball.center);
        self.validate_point(p)?;
        let within = |d: f64| if ball.closed { d <= ball.radius } else { d < ball.radius };
        let mut members = Vec::new();
        for x in 0..cloud.len() {
            let q = cloud.point(x);
            self.validate_point(q)?;
            let right = || within(self.eval(p, q));
            let left = || within(self.eval(q, p));
            let inside = match ball.side {
                BallSide::Right => right(),
                BallSide::Left => left(),
                BallSide::TwoSided => right() && left(),
            };
            if inside {
                members.push(x);
            }
        }
        Ok(members)
    }
}

impl fmt::Display for QuasiMetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.description)
    }
}

/// `e_n(x, y) = max_{0 <= i < n} e(T^i x, T^i y)` for two cloud points.
pub fn bowen_distance(spec: &QuasiMetricSpec, orbits: &OrbitTable, x: usize, y: usize, n: usize) -> Result<f64> {
    if n == 0 || n > orbits.n_max() {
        return Err(Error::StepOutOfRange { n, n_max: orbits.n_max() });
    }
    for id in [x, y] {
        if id >= orbits.n_points() {
            return Err(Error::UnknownPoint(id));
        }
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        let (a, b) = (orbits.image(x, i), orbits.image(y, i));
        spec.validate_point(a)?;
        spec.validate_point(b)?;
        worst = worst.max(spec.eval(a, b));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleViolation {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    /// `e(x, z)`
    pub lhs: f64,
    /// `e(x, y) + e(y, z)`
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub metric: String,
    pub points: usize,
    pub nonnegativity_ok: bool,
    pub identity_ok: bool,
    pub triangle_ok: bool,
    pub violations: Vec<TriangleViolation>,
    pub identity_failures: Vec<(usize, usize)>,
    pub symmetric: bool,
    pub max_asymmetry: f64,
    pub triples_checked: u64,
    pub exhaustive: bool,
    pub seed: u64,
}

impl AxiomReport {
    pub fn all_ok(&self) -> bool {
        self.nonnegativity_ok && self.identity_ok && self.triangle_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallSide {
    /// `{x : e(p, x) < t}`
    Right,
    /// `{x : e(x, p) < t}`
    Left,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: usize,
    pub radius: f64,
    pub side: BallSide,
    pub closed: bool,
}
