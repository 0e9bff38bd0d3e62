use proptest::prelude::*;

use qme_core::covering::{build_relation, count_grid, max_separated, min_spanning, GridRequest};
use qme_core::entropy::{compare_theorems, estimate_entropy, growth_rate, CHECK_SANDWICH_AND, CHECK_SANDWICH_OR};
use qme_core::{
    EntropyEstimate, EntropyVariant, EstimatorSettings, MapSpec, OrbitTable, PointCloud, Quantity,
    QuasiMetricSpec, SolveMode, Variant,
};

const N_LIST: [usize; 4] = [1, 2, 3, 4];
const EPS: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];

// Points on a 1/256 lattice with power-of-two weights keep every distance exact.
fn lattice_cloud() -> impl Strategy<Value = PointCloud> {
    proptest::collection::btree_set(0u32..=256, 2..14).prop_map(|ks| {
        PointCloud::custom(ks.into_iter().map(|k| vec![k as f64 / 256.0]).collect()).unwrap()
    })
}

fn weight() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.5, 1.0, 2.0, 4.0])
}

fn map() -> impl Strategy<Value = MapSpec> {
    prop::sample::select(vec![0usize, 1, 2]).prop_map(|i| match i {
        0 => MapSpec::identity(),
        1 => MapSpec::tent(2.0).unwrap(),
        _ => MapSpec::affine(0.5, 0.25).unwrap(),
    })
}

fn exact_request<'a>() -> GridRequest<'a> {
    GridRequest { mode: SolveMode::Exact, ..GridRequest::new(&N_LIST, &EPS) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_are_monotone_and_sandwiched(cloud in lattice_cloud(), a in weight(), b in weight(), map in map()) {
        let spec = QuasiMetricSpec::weighted_asym(a, b).unwrap();
        let orbits = OrbitTable::build(&map, &cloud, 4).unwrap();
        let grid = count_grid(&spec, &orbits, &exact_request()).unwrap();
        let c = |n: usize, e: f64, q: Quantity| grid.count(n, e, q).unwrap();
        for q in Quantity::ALL {
            for w in N_LIST.windows(2) {
                for e in EPS {
                    prop_assert!(c(w[0], e, q) <= c(w[1], e, q));
                }
            }
            for n in N_LIST {
                for w in EPS.windows(2) {
                    prop_assert!(c(n, w[0], q) <= c(n, w[1], q));
                }
            }
        }
        for n in N_LIST {
            for w in EPS.windows(2) {
                let (e, half) = (w[0], w[1]);
                prop_assert!(c(n, e, Quantity::R1) <= c(n, e, Quantity::S1));
                prop_assert!(c(n, e, Quantity::S1) <= c(n, half, Quantity::R1));
                prop_assert!(c(n, e, Quantity::R2) <= c(n, e, Quantity::S2));
                // the OR upper bound only chains through AND balls
                prop_assert!(c(n, e, Quantity::S2) <= c(n, half, Quantity::R1));
                prop_assert!(c(n, e, Quantity::R2) <= c(n, e, Quantity::R1));
                prop_assert!(c(n, e, Quantity::S2) <= c(n, e, Quantity::S1));
            }
        }
    }

    #[test]
    fn doubling_the_metric_doubles_the_radius(cloud in lattice_cloud(), a in weight(), b in weight(), map in map()) {
        let spec = QuasiMetricSpec::weighted_asym(a, b).unwrap();
        let scaled = QuasiMetricSpec::weighted_asym(2.0 * a, 2.0 * b).unwrap();
        let orbits = OrbitTable::build(&map, &cloud, 4).unwrap();
        let doubled: Vec<f64> = EPS.iter().map(|e| 2.0 * e).collect();
        let base = count_grid(&spec, &orbits, &exact_request()).unwrap();
        let big = count_grid(&scaled, &orbits, &GridRequest { epsilon_list: &doubled, ..exact_request() }).unwrap();
        for n in N_LIST {
            for e in EPS {
                for q in Quantity::ALL {
                    prop_assert_eq!(base.count(n, e, q), big.count(n, 2.0 * e, q));
                }
            }
        }
    }

    #[test]
    fn max_metric_relation_is_the_and_relation(cloud in lattice_cloud(), a in weight(), b in weight(), n in 1usize..4) {
        let spec = QuasiMetricSpec::weighted_asym(a, b).unwrap();
        let orbits = OrbitTable::build(&MapSpec::tent(2.0).unwrap(), &cloud, 3).unwrap();
        let max = spec.symmetrize_max();
        for e in EPS {
            let and = build_relation(&spec, &orbits, n, e, Variant::SymAnd).unwrap();
            for v in [Variant::SymAnd, Variant::AsymOr] {
                prop_assert!(build_relation(&max, &orbits, n, e, v).unwrap().same_relation(&and));
            }
        }
    }

    #[test]
    fn greedy_never_beats_exact(cloud in lattice_cloud(), a in weight(), b in weight(), n in 1usize..4) {
        let spec = QuasiMetricSpec::weighted_asym(a, b).unwrap();
        let orbits = OrbitTable::build(&MapSpec::tent(2.0).unwrap(), &cloud, 3).unwrap();
        for e in EPS {
            for v in [Variant::SymAnd, Variant::AsymOr] {
                let g = build_relation(&spec, &orbits, n, e, v).unwrap();
                let (rg, re) = (min_spanning(&g, SolveMode::Greedy), min_spanning(&g, SolveMode::Exact));
                let (sg, se) = (max_separated(&g, SolveMode::Greedy), max_separated(&g, SolveMode::Exact));
                prop_assert!(g.is_spanning(&rg.witness) && g.is_spanning(&re.witness));
                prop_assert!(g.is_separated(&sg.witness) && g.is_separated(&se.witness));
                prop_assert!(re.cardinality <= rg.cardinality);
                prop_assert!(sg.cardinality <= se.cardinality);
            }
        }
    }

    #[test]
    fn growth_rate_recovers_exponential_series(base in 1usize..6, scale in 1usize..50) {
        let settings = EstimatorSettings::default();
        let counts: Vec<(usize, usize)> = (1..=7).map(|n| (n, scale * base.pow(n as u32))).collect();
        let fit = growth_rate(&counts, &settings).unwrap();
        if base == 1 {
            prop_assert_eq!(fit.slope, 0.0);
        } else {
            prop_assert!((fit.slope - (base as f64).ln()).abs() < 1e-12);
        }
    }
}

#[test]
fn estimate_survives_a_json_round_trip() {
    let cloud = PointCloud::circle_grid(32).unwrap();
    let orbits = OrbitTable::build(&MapSpec::doubling(), &cloud, 5).unwrap();
    let settings = EstimatorSettings::default();
    let (est, _) = estimate_entropy(
        &QuasiMetricSpec::circle_arc(),
        &orbits,
        EntropyVariant::HDoublePrime,
        &[1, 2, 3, 4, 5],
        &[0.25, 0.125],
        &settings,
    )
    .unwrap();
    let text = serde_json::to_string(&est).unwrap();
    let back: EntropyEstimate = serde_json::from_str(&text).unwrap();
    assert_eq!(back, est);
    assert!(text.contains("\"variant\":\"h_double_prime\""));
}

// Two points that both reach a shared centre in the same direction, yet are far apart both ways.
#[test]
fn or_separated_count_can_exceed_half_radius_or_span() {
    let spec = QuasiMetricSpec::from_rows(vec![
        vec![0.0, 2.0, 2.0],
        vec![0.25, 0.0, 2.0],
        vec![0.25, 2.0, 0.0],
    ])
    .unwrap();
    let cloud = PointCloud::index_points(3).unwrap();
    assert!(spec.check_axioms(&cloud, 1_000, 0).unwrap().all_ok());
    let orbits = OrbitTable::build(&MapSpec::identity(), &cloud, 5).unwrap();
    let s = max_separated(&build_relation(&spec, &orbits, 1, 1.0, Variant::AsymOr).unwrap(), SolveMode::Exact);
    let r = min_spanning(&build_relation(&spec, &orbits, 1, 0.5, Variant::AsymOr).unwrap(), SolveMode::Exact);
    assert_eq!((s.cardinality, r.cardinality), (2, 1));
    assert_eq!(r.witness, vec![0]);

    let settings = EstimatorSettings { mode: SolveMode::Exact, ..EstimatorSettings::default() };
    let report = compare_theorems(&spec, &orbits, &[1, 2, 3, 4, 5], &[1.0], &settings).unwrap();
    assert!(report.check(CHECK_SANDWICH_AND).unwrap().passed);
    assert!(!report.check(CHECK_SANDWICH_OR).unwrap().passed);
}
