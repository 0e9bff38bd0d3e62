//! Point clouds, maps and orbit tables.

use std::collections::HashMap;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quasimetric::QuasiMetricSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CloudKind {
    /// `count` evenly spaced points from `lo` to `hi` inclusive.
    Grid1D { lo: f64, hi: f64, count: usize },
    /// `k / count` for `k = 0..count`.
    CircleGrid { count: usize },
    /// Every block of `length` symbols over `0..alphabet`, in lexicographic order.
    SymbolBlocks { alphabet: usize, length: usize },
    Custom,
}

/// Finite sample standing in for a compact set: indexed points in `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    kind: CloudKind,
}

/// Lattice spacing for grids whose coordinates and pairwise differences stay below
/// `4 * magnitude`: `2^(k - 40)` with `2^k >= magnitude`.
///
/// On such a lattice differences, sums of two differences and `1 - d` are exact in `f64`,
/// so distances built from them satisfy the triangle inequality without rounding slack.
pub fn dyadic_step(magnitude: f64) -> f64 {
    let k = magnitude.max(f64::MIN_POSITIVE).log2().ceil() as i32;
    2f64.powi(k - 40)
}

fn snap_to(v: f64, q: f64) -> f64 {
    (v / q).round() * q + 0.0
}

impl PointCloud {
    fn from_points(points: Vec<Vec<f64>>, kind: CloudKind) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptyCloud)?.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(points.len());
        for (i, p) in points.into_iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            if let Some(bad) = p.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("point {i} has non-finite coordinate {bad}")));
            }
            // +0.0 and -0.0 are the same point
            let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
            if let Some(&first) = seen.get(&key) {
                return Err(Error::DuplicatePoint { first, second: i });
            }
            seen.insert(key, i);
            coords.extend_from_slice(&p);
        }
        Ok(Self { dim, coords, kind })
    }

    /// `count` points `lo + (hi - lo) i / (count - 1)`, each rounded to the nearest multiple
    /// of a power of two about `2^-40` times the grid's magnitude (see [`dyadic_step`]).
    pub fn grid_1d(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyCloud);
        }
        if !(lo.is_finite() && hi.is_finite()) || (count > 1 && !(lo < hi)) {
            return Err(Error::InvalidParameter(format!("grid needs finite lo < hi, got [{lo}, {hi}]")));
        }
        let points = if count == 1 {
            vec![vec![lo]]
        } else {
            let span = hi - lo;
            let last = (count - 1) as f64;
            let q = dyadic_step(lo.abs().max(hi.abs()).max(span));
            (0..count).map(|i| vec![snap_to(lo + span * i as f64 / last, q)]).collect()
        };
        Self::from_points(points, CloudKind::Grid1D { lo, hi, count })
    }

    pub fn circle_grid(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyCloud);
        }
        let q = dyadic_step(1.0);
        let points = (0..count).map(|k| vec![snap_to(k as f64 / count as f64, q)]).collect();
        Self::from_points(points, CloudKind::CircleGrid { count })
    }

    pub fn symbol_blocks(alphabet: usize, length: usize) -> Result<Self> {
        if alphabet < 1 || length < 1 {
            return Err(Error::InvalidParameter("symbol blocks need alphabet >= 1 and length >= 1".into()));
        }
        let total = (alphabet as u64)
            .checked_pow(length as u32)
            .filter(|&t| t <= 1 << 22)
            .ok_or_else(|| Error::InvalidParameter(format!("{alphabet}^{length} blocks is too many")))?;
        let points = (0..total)
            .map(|mut code| {
                let mut block = vec![0.0; length];
                for slot in block.iter_mut().rev() {
                    *slot = (code % alphabet as u64) as f64;
                    code /= alphabet as u64;
                }
                block
            })
            .collect();
        Self::from_points(points, CloudKind::SymbolBlocks { alphabet, length })
    }

    pub fn custom(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_points(points, CloudKind::Custom)
    }

    /// The points `0, 1, ..., n-1` of a matrix-backed space.
    pub fn index_points(n: usize) -> Result<Self> {
        if n == 1 {
            return Self::custom(vec![vec![0.0]]);
        }
        Self::grid_1d(0.0, (n.max(1) - 1) as f64, n)
    }

    /// Reads one point per line, coordinates separated by commas. A first line that does
    /// not parse as numbers is treated as a header.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match parsed {
                Ok(p) => points.push(p),
                Err(_) if lineno == 0 => continue,
                Err(_) => return Err(Error::Parse(format!("line {}: bad coordinates {line:?}", lineno + 1))),
            }
        }
        Self::custom(points)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &CloudKind {
        &self.kind
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    Identity,
    /// `x -> 2x mod 1`
    Doubling,
    /// `x -> k x mod 1`
    MultiplyMod { factor: u32 },
    /// `x -> slope * min(x, 1 - x)` on `[0, 1]`, `0 < slope <= 2`.
    Tent { slope: f64 },
    /// `x -> r x (1 - x)` on `[0, 1]`, `0 < r <= 4`.
    Logistic { r: f64 },
    /// Drops the first symbol of a block and appends symbol 0.
    ShiftLeft,
    /// `by` applications of [`MapKind::ShiftLeft`].
    Shift { by: usize },
    /// `x -> a x + b`, coordinatewise.
    Affine { a: f64, b: f64 },
    /// `times`-fold composition of `base`.
    Iterated { base: Box<MapKind>, times: usize },
}

impl MapKind {
    fn name(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::Doubling => "doubling".into(),
            Self::MultiplyMod { factor } => format!("multiply_mod({factor})"),
            Self::Tent { slope } => format!("tent({slope})"),
            Self::Logistic { r } => format!("logistic({r})"),
            Self::ShiftLeft => "shift_left".into(),
            Self::Shift { by } => format!("shift({by})"),
            Self::Affine { a, b } => format!("affine({a}, {b})"),
            Self::Iterated { base, times } => format!("{}^{times}", base.name()),
        }
    }

    fn check_params(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Self::MultiplyMod { factor } if *factor == 0 => bad("multiply_mod factor must be positive".into()),
            Self::Tent { slope } if !(*slope > 0.0 && *slope <= 2.0) => bad(format!("tent slope {slope} outside (0, 2]")),
            Self::Logistic { r } if !(*r > 0.0 && *r <= 4.0) => bad(format!("logistic r {r} outside (0, 4]")),
            Self::Affine { a, b } if !(a.is_finite() && b.is_finite()) => bad("affine parameters must be finite".into()),
            Self::Iterated { base, times } => {
                if *times == 0 {
                    return bad("iteration count must be at least 1".into());
                }
                base.check_params()
            }
            _ => Ok(()),
        }
    }

    /// Writes the image of `x` into `out`; `Err(reason)` outside the domain.
    fn apply(&self, x: &[f64], out: &mut [f64]) -> std::result::Result<(), String> {
        let unit = |x: &[f64], half_open: bool| -> std::result::Result<f64, String> {
            if x.len() != 1 {
                return Err(format!("expects one coordinate, got {}", x.len()));
            }
            let v = x[0];
            let ok = if half_open { (0.0..1.0).contains(&v) } else { (0.0..=1.0).contains(&v) };
            if ok {
                Ok(v)
            } else {
                Err(format!("{v} outside the unit interval"))
            }
        };
        match self {
            Self::Identity => out.copy_from_slice(x),
            Self::Doubling => {
                let y = 2.0 * unit(x, true)?;
                out[0] = if y >= 1.0 { y - 1.0 } else { y };
            }
            Self::MultiplyMod { factor } => {
                let y = *factor as f64 * unit(x, true)?;
                out[0] = y - y.floor();
            }
            Self::Tent { slope } => {
                let v = unit(x, false)?;
                out[0] = slope * v.min(1.0 - v);
            }
            Self::Logistic { r } => {
                let v = unit(x, false)?;
                out[0] = r * v * (1.0 - v);
            }
            Self::ShiftLeft => shift_block(x, 1, out),
            Self::Shift { by } => shift_block(x, *by, out),
            Self::Affine { a, b } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = a * v + b;
                }
            }
            Self::Iterated { base, times } => {
                let mut cur = x.to_vec();
                for _ in 0..*times {
                    base.apply(&cur, out)?;
                    cur.copy_from_slice(out);
                }
            }
        }
        if let Some(v) = out.iter().find(|v| !v.is_finite()) {
            return Err(format!("image coordinate {v} is not finite"));
        }
        Ok(())
    }
}

fn shift_block(x: &[f64], by: usize, out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        *o = x.get(k + by).copied().unwrap_or(0.0);
    }
}

/// A map `T` together with the catalog's uniform-continuity declaration.
///
/// The declaration is an assertion about the built-in map, not something this crate
/// verifies; the power-rule check refuses to run without it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub kind: MapKind,
    pub declared_uniformly_continuous: bool,
}

impl MapSpec {
    pub fn new(kind: MapKind) -> Result<Self> {
        kind.check_params()?;
        Ok(Self { kind, declared_uniformly_continuous: true })
    }

    pub fn identity() -> Self {
        Self::new(MapKind::Identity).expect("no parameters")
    }

    pub fn doubling() -> Self {
        Self::new(MapKind::Doubling).expect("no parameters")
    }

    pub fn shift_left() -> Self {
        Self::new(MapKind::ShiftLeft).expect("no parameters")
    }

    pub fn tent(slope: f64) -> Result<Self> {
        Self::new(MapKind::Tent { slope })
    }

    pub fn logistic(r: f64) -> Result<Self> {
        Self::new(MapKind::Logistic { r })
    }

    pub fn affine(a: f64, b: f64) -> Result<Self> {
        Self::new(MapKind::Affine { a, b })
    }

    pub fn with_uniform_continuity(mut self, declared: bool) -> Self {
        self.declared_uniformly_continuous = declared;
        self
    }

    pub fn name(&self) -> String {
        self.kind.name()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.kind.apply(x, &mut out).map_err(|reason| Error::DomainViolation {
            map: self.name(),
            point: 0,
            reason,
        })?;
        Ok(out)
    }

    /// The `m`-fold composition `T^m`, in closed form where one exists.
    pub fn iterate(&self, m: usize) -> Result<MapSpec> {
        if m == 0 {
            return Err(Error::InvalidParameter("iterate needs m >= 1".into()));
        }
        if m == 1 {
            return Ok(self.clone());
        }
        let kind = match &self.kind {
            MapKind::Identity => MapKind::Identity,
            MapKind::Doubling if m < 32 => MapKind::MultiplyMod { factor: 1 << m },
            MapKind::MultiplyMod { factor } if factor.is_power_of_two() => {
                match factor.checked_pow(m as u32) {
                    Some(f) => MapKind::MultiplyMod { factor: f },
                    None => iterated(&self.kind, m),
                }
            }
            MapKind::ShiftLeft => MapKind::Shift { by: m },
            MapKind::Shift { by } => MapKind::Shift { by: by * m },
            MapKind::Affine { a, b } => {
                // T^m(x) = a^m x + b (1 + a + ... + a^{m-1})
                let mut scale = 1.0;
                let mut offset = 0.0;
                for _ in 0..m {
                    offset = a * offset + b;
                    scale *= a;
                }
                MapKind::Affine { a: scale, b: offset }
            }
            MapKind::Iterated { base, times } => MapKind::Iterated { base: base.clone(), times: times * m },
            other => iterated(other, m),
        };
        Ok(MapSpec { kind, declared_uniformly_continuous: self.declared_uniformly_continuous })
    }
}

fn iterated(kind: &MapKind, m: usize) -> MapKind {
    MapKind::Iterated { base: Box::new(kind.clone()), times: m }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapMode {
    /// Images are stored as computed.
    ExactClosed,
    /// Each image is replaced by the nearest cloud point under the max-symmetrized metric.
    NearestNeighbor,
}

/// Precomputed iterates `T^i(x)` for every cloud point and `i = 0..n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitTable {
    n_points: usize,
    dim: usize,
    n_max: usize,
    /// step-major: `[i][x][k]`
    coords: Vec<f64>,
    snap_mode: SnapMode,
    max_snap_error: f64,
}

impl OrbitTable {
    /// Exact orbits: images are stored as the map computes them.
    pub fn build(map: &MapSpec, cloud: &PointCloud, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        let (np, dim) = (cloud.len(), cloud.dim());
        let mut coords = Vec::with_capacity(np * dim * n_max);
        coords.extend_from_slice(&cloud.coords);
        for i in 1..n_max {
            let prev = &coords[(i - 1) * np * dim..i * np * dim];
            let next: Vec<f64> = prev
                .par_chunks_exact(dim)
                .enumerate()
                .map(|(x, p)| {
                    let mut out = vec![0.0; dim];
                    map.kind.apply(p, &mut out).map_err(|reason| Error::DomainViolation {
                        map: map.name(),
                        point: x,
                        reason,
                    })?;
                    Ok(out)
                })
                .collect::<Result<Vec<Vec<f64>>>>()?
                .into_iter()
                .flatten()
                .collect();
            coords.extend(next);
        }
        Ok(Self { n_points: np, dim, n_max, coords, snap_mode: SnapMode::ExactClosed, max_snap_error: 0.0 })
    }

    /// Orbits confined to the cloud: `T(x)` is snapped to its nearest cloud point under
    /// `m_e(a, b) = max(e(a, b), e(b, a))`, ties to the lowest id, and the orbit follows the
    /// resulting successor function.
    pub fn build_snapped(map: &MapSpec, cloud: &PointCloud, n_max: usize, metric: &QuasiMetricSpec) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        for p in cloud.points() {
            metric.validate_point(p)?;
        }
        let np = cloud.len();
        let snapped: Vec<(usize, f64)> = (0..np)
            .into_par_iter()
            .map(|x| {
                let mut image = vec![0.0; cloud.dim()];
                map.kind.apply(cloud.point(x), &mut image).map_err(|reason| Error::DomainViolation {
                    map: map.name(),
                    point: x,
                    reason,
                })?;
                metric.validate_point(&image)?;
                let mut best = (0, f64::INFINITY);
                for y in 0..np {
                    let q = cloud.point(y);
                    let d = metric.eval(&image, q).max(metric.eval(q, &image));
                    if d < best.1 {
                        best = (y, d);
                    }
                }
                Ok(best)
            })
            .collect::<Result<_>>()?;
        let max_snap_error = snapped.iter().map(|s| s.1).fold(0.0, f64::max);
        let mut ids: Vec<usize> = (0..np).collect();
        let mut coords = Vec::with_capacity(np * cloud.dim() * n_max);
        for _ in 0..n_max {
            for &id in &ids {
                coords.extend_from_slice(cloud.point(id));
            }
            for id in ids.iter_mut() {
                *id = snapped[*id].0;
            }
        }
        Ok(Self {
            n_points: np,
            dim: cloud.dim(),
            n_max,
            coords,
            snap_mode: SnapMode::NearestNeighbor,
            max_snap_error,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn snap_mode(&self) -> SnapMode {
        self.snap_mode
    }

    pub fn max_snap_error(&self) -> f64 {
        self.max_snap_error
    }

    /// `T^i(x)` for cloud point `x`.
    #[inline]
    pub fn image(&self, x: usize, i: usize) -> &[f64] {
        let start = (i * self.n_points + x) * self.dim;
        &self.coords[start..start + self.dim]
    }

    /// All images at step `i`, point-major.
    pub fn step(&self, i: usize) -> &[f64] {
        let len = self.n_points * self.dim;
        &self.coords[i * len..(i + 1) * len]
    }
}

/// Largest nearest-neighbour distance within the cloud under `max(e(x,y), e(y,x))`.
///
/// This is the smallest radius at which every cloud point has a neighbour, the scale below
/// which snapped orbits lose resolution.
pub fn covering_radius(cloud: &PointCloud, metric: &QuasiMetricSpec) -> Result<f64> {
    for p in cloud.points() {
        metric.validate_point(p)?;
    }
    if cloud.len() < 2 {
        return Ok(0.0);
    }
    Ok((0..cloud.len())
        .into_par_iter()
        .map(|x| {
            (0..cloud.len())
                .filter(|&y| y != x)
                .map(|y| {
                    let (p, q) = (cloud.point(x), cloud.point(y));
                    metric.eval(p, q).max(metric.eval(q, p))
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max))
}
