use fixedbitset::FixedBitSet;
use rayon::prelude::*;

use super::Variant;
use crate::dynamics::OrbitTable;
use crate::error::{Error, Result};
use crate::quasimetric::QuasiMetricSpec;

/// All-pairs dynamical distances `e_n(x, y)` for one step count, advanced in place.
///
/// `e_{n+1} = max(e_n, e(T^n x, T^n y))`, so sweeping `n` upwards costs one metric evaluation
/// per pair and step.
#[derive(Debug, Clone)]
pub struct BowenMatrix {
    n_points: usize,
    steps: usize,
    dist: Vec<f64>,
}

impl BowenMatrix {
    /// The `n = 1` matrix, i.e. the base quasi-metric on the cloud.
    pub fn new(spec: &QuasiMetricSpec, orbits: &OrbitTable) -> Result<Self> {
        for i in 0..orbits.n_max() {
            for x in 0..orbits.n_points() {
                spec.validate_point(orbits.image(x, i))?;
            }
        }
        let np = orbits.n_points();
        let mut m = Self { n_points: np, steps: 0, dist: vec![0.0; np * np] };
        m.fold_step(spec, orbits, 0);
        m.steps = 1;
        Ok(m)
    }

    pub fn advance_to(&mut self, spec: &QuasiMetricSpec, orbits: &OrbitTable, n: usize) -> Result<()> {
        if n < self.steps || n > orbits.n_max() {
            return Err(Error::StepOutOfRange { n, n_max: orbits.n_max() });
        }
        for i in self.steps..n {
            self.fold_step(spec, orbits, i);
        }
        self.steps = n;
        Ok(())
    }

    fn fold_step(&mut self, spec: &QuasiMetricSpec, orbits: &OrbitTable, i: usize) {
        let np = self.n_points;
        self.dist.par_chunks_mut(np).enumerate().for_each(|(x, row)| {
            let p = orbits.image(x, i);
            for (y, slot) in row.iter_mut().enumerate() {
                let d = spec.eval(p, orbits.image(y, i));
                if d > *slot {
                    *slot = d;
                }
            }
        });
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.n_points + y]
    }

    /// `max(e_n(x,y), e_n(y,x))` for the AND pairing or `min` for OR, row-major.
    ///
    /// A pair is related at radius `eps` exactly when this value is `<= eps`, so one view
    /// serves every radius at the current step count.
    pub fn pair_view(&self, variant: Variant) -> PairView {
        const TILE: usize = 64;
        let np = self.n_points;
        let mut out = vec![0.0; np * np];
        out.par_chunks_mut(np * TILE).enumerate().for_each(|(band, rows)| {
            let x0 = band * TILE;
            let x1 = (x0 + TILE).min(np);
            for y0 in (0..np).step_by(TILE) {
                let y1 = (y0 + TILE).min(np);
                for x in x0..x1 {
                    let row = &mut rows[(x - x0) * np..(x - x0 + 1) * np];
                    for y in y0..y1 {
                        let (a, b) = (self.dist[x * np + y], self.dist[y * np + x]);
                        row[y] = match variant {
                            Variant::SymAnd => a.max(b),
                            Variant::AsymOr => a.min(b),
                        };
                    }
                }
            }
        });
        PairView { n_points: np, steps: self.steps, variant, values: out }
    }
}

/// Symmetric combination of a [`BowenMatrix`] for one pairing.
#[derive(Debug, Clone)]
pub struct PairView {
    n_points: usize,
    steps: usize,
    variant: Variant,
    values: Vec<f64>,
}

impl PairView {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// The covering relation of one `(n, eps, variant)` cell and its separation complement.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationGraph {
    pub steps: usize,
    pub epsilon: f64,
    pub variant: Variant,
    cover: Vec<FixedBitSet>,
    separation: Vec<FixedBitSet>,
}

impl RelationGraph {
    pub fn from_matrix(matrix: &BowenMatrix, epsilon: f64, variant: Variant) -> Result<Self> {
        Self::from_view(&matrix.pair_view(variant), epsilon)
    }

    pub fn from_view(view: &PairView, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        let np = view.n_points;
        let cover: Vec<FixedBitSet> = view
            .values
            .par_chunks(np.max(1))
            .enumerate()
            .map(|(y, vals)| {
                let mut row = FixedBitSet::with_capacity(np);
                for (x, &v) in vals.iter().enumerate() {
                    if v <= epsilon || x == y {
                        row.insert(x);
                    }
                }
                row
            })
            .collect();
        let separation = complement(&cover);
        Ok(Self { steps: view.steps, epsilon, variant: view.variant, cover, separation })
    }

    /// A synthetic relation from a boolean cover matrix, which must be symmetric with a true
    /// diagonal. `steps` and `epsilon` are recorded as 0.
    pub fn from_cover_matrix(rows: &[Vec<bool>], variant: Variant) -> Result<Self> {
        let np = rows.len();
        let mut cover = Vec::with_capacity(np);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != np {
                return Err(Error::InvalidParameter(format!("row {i} has {} entries, expected {np}", r.len())));
            }
            if !r[i] {
                return Err(Error::InvalidParameter(format!("diagonal entry {i} must be true")));
            }
            let mut set = FixedBitSet::with_capacity(np);
            for (j, &v) in r.iter().enumerate() {
                if v != rows[j][i] {
                    return Err(Error::InvalidParameter(format!("relation not symmetric at ({i},{j})")));
                }
                set.set(j, v);
            }
            cover.push(set);
        }
        let separation = complement(&cover);
        Ok(Self { steps: 0, epsilon: 0.0, variant, cover, separation })
    }

    pub fn n_points(&self) -> usize {
        self.cover.len()
    }

    /// Whether `y` spans `x`.
    #[inline]
    pub fn covers(&self, y: usize, x: usize) -> bool {
        self.cover[y].contains(x)
    }

    #[inline]
    pub fn separated(&self, x: usize, y: usize) -> bool {
        self.separation[x].contains(y)
    }

    /// Points spanned by `y` (equivalently, centres spanning `y`).
    pub fn cover_row(&self, y: usize) -> &FixedBitSet {
        &self.cover[y]
    }

    pub fn separation_row(&self, x: usize) -> &FixedBitSet {
        &self.separation[x]
    }

    pub(crate) fn cover_rows(&self) -> &[FixedBitSet] {
        &self.cover
    }

    pub(crate) fn separation_rows(&self) -> &[FixedBitSet] {
        &self.separation
    }

    /// Same adjacency, regardless of labels.
    pub fn same_relation(&self, other: &RelationGraph) -> bool {
        self.cover == other.cover
    }

    pub fn is_spanning(&self, set: &[usize]) -> bool {
        let mut covered = FixedBitSet::with_capacity(self.n_points());
        for &y in set {
            covered.union_with(&self.cover[y]);
        }
        covered.is_full()
    }

    pub fn is_separated(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(i, &x)| set[i + 1..].iter().all(|&y| x != y && self.separated(x, y)))
    }
}

fn complement(cover: &[FixedBitSet]) -> Vec<FixedBitSet> {
    cover
        .iter()
        .enumerate()
        .map(|(x, row)| {
            let mut sep = row.clone();
            sep.toggle_range(..);
            sep.set(x, false);
            sep
        })
        .collect()
}

/// Covering relation of `e_n` at radius `eps`.
pub fn build_relation(
    spec: &QuasiMetricSpec,
    orbits: &OrbitTable,
    n: usize,
    epsilon: f64,
    variant: Variant,
) -> Result<RelationGraph> {
    if n == 0 || n > orbits.n_max() {
        return Err(Error::StepOutOfRange { n, n_max: orbits.n_max() });
    }
    let mut m = BowenMatrix::new(spec, orbits)?;
    m.advance_to(spec, orbits, n)?;
    RelationGraph::from_matrix(&m, epsilon, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{MapSpec, PointCloud};
    use crate::quasimetric::bowen_distance;

    #[test]
    fn identity_map_relation_does_not_depend_on_n() {
        let cloud = PointCloud::grid_1d(0.0, 1.0, 21).unwrap();
        let e = QuasiMetricSpec::example1_line();
        let orbits = OrbitTable::build(&MapSpec::identity(), &cloud, 3).unwrap();
        for v in [Variant::SymAnd, Variant::AsymOr] {
            let g1 = build_relation(&e, &orbits, 1, 0.2, v).unwrap();
            let g3 = build_relation(&e, &orbits, 3, 0.2, v).unwrap();
            assert!(g1.same_relation(&g3));
        }
    }

    #[test]
    fn large_radius_covers_everything() {
        let cloud = PointCloud::grid_1d(0.0, 1.0, 9).unwrap();
        let e = QuasiMetricSpec::example1_line();
        let orbits = OrbitTable::build(&MapSpec::identity(), &cloud, 1).unwrap();
        let g = build_relation(&e, &orbits, 1, 1.0, Variant::SymAnd).unwrap();
        assert!((0..9).all(|y| g.cover_row(y).is_full()));
        assert!((0..9).all(|x| g.separation_row(x).is_clear()));
    }

    #[test]
    fn two_point_variants_differ() {
        let e = QuasiMetricSpec::from_rows(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let cloud = PointCloud::index_points(2).unwrap();
        let orbits = OrbitTable::build(&MapSpec::identity(), &cloud, 1).unwrap();
        let and = build_relation(&e, &orbits, 1, 1.5, Variant::SymAnd).unwrap();
        let or = build_relation(&e, &orbits, 1, 1.5, Variant::AsymOr).unwrap();
        assert!(!and.covers(0, 1) && !and.covers(1, 0));
        assert!(and.separated(0, 1));
        assert!(or.covers(0, 1) && or.covers(1, 0));
        assert!(!or.separated(0, 1));
    }

    #[test]
    fn relation_matches_pointwise_definition() {
        let cloud = PointCloud::circle_grid(24).unwrap();
        let e = QuasiMetricSpec::circle_arc();
        let orbits = OrbitTable::build(&MapSpec::doubling(), &cloud, 4).unwrap();
        let w = QuasiMetricSpec::weighted_asym(1.0, 3.0).unwrap();
        for spec in [&e, &w] {
            for n in 1..=4 {
                for v in [Variant::SymAnd, Variant::AsymOr] {
                    let g = build_relation(spec, &orbits, n, 0.125, v).unwrap();
                    for x in 0..24 {
                        for y in 0..24 {
                            let a = bowen_distance(spec, &orbits, x, y, n).unwrap() <= 0.125;
                            let b = bowen_distance(spec, &orbits, y, x, n).unwrap() <= 0.125;
                            let want = match v {
                                Variant::SymAnd => a && b,
                                Variant::AsymOr => a || b,
                            };
                            assert_eq!(g.covers(y, x), want);
                            assert_eq!(g.covers(x, y), g.covers(y, x));
                            assert_eq!(g.separated(x, y), x != y && !want);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cover_matrix_validation() {
        assert!(RelationGraph::from_cover_matrix(&[vec![true, false], vec![true, true]], Variant::SymAnd).is_err());
        assert!(RelationGraph::from_cover_matrix(&[vec![false, false], vec![false, true]], Variant::SymAnd).is_err());
        let g = RelationGraph::from_cover_matrix(&[vec![true, true], vec![true, true]], Variant::SymAnd).unwrap();
        assert!(g.is_spanning(&[1]));
        assert!(!g.is_separated(&[0, 1]));
    }

    #[test]
    fn bad_parameters() {
        let cloud = PointCloud::circle_grid(4).unwrap();
        let orbits = OrbitTable::build(&MapSpec::doubling(), &cloud, 2).unwrap();
        let e = QuasiMetricSpec::circle_arc();
        assert!(build_relation(&e, &orbits, 3, 0.1, Variant::SymAnd).is_err());
        assert!(build_relation(&e, &orbits, 1, 0.0, Variant::SymAnd).is_err());
        let mut m = BowenMatrix::new(&e, &orbits).unwrap();
        m.advance_to(&e, &orbits, 2).unwrap();
        assert!(m.advance_to(&e, &orbits, 1).is_err());
    }
}
