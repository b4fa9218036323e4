use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sofic_pressure::measure::{
    entropy_cell, pressure_domination_check, random_measure, variational_objective, Family, ProductMeasure,
    SignedCylinderMeasure, TransferOracle,
};
use sofic_pressure::pressure::{
    evaluate_cell, run_schedule, CellMethod, CellSettings, Schedule, SoficFamily, TransferMatrix, DEFAULT_MAX_STATES,
};
use sofic_pressure::{FiniteSubset, GroupElement, GroupSpec, MapSpaceQuery, Measure, Observable, SoficMap, Subshift};

fn line() -> GroupSpec {
    GroupSpec::IntegerLine
}

fn subshift(golden: bool) -> Subshift {
    if golden {
        Subshift::golden_mean()
    } else {
        Subshift::full(2).unwrap()
    }
}

fn pair_window() -> FiniteSubset {
    FiniteSubset::new([GroupElement::Int(0), GroupElement::Int(1)])
}

fn query(d: usize, delta: f64, perturb: usize) -> MapSpaceQuery {
    let mut sigma = SoficMap::cyclic(d, 1).unwrap();
    if perturb > 0 {
        sigma = sigma.perturbed(&GroupElement::Int(1), perturb, 9).unwrap();
    }
    MapSpaceQuery::new(Arc::new(sigma), line().ball(1), delta, 0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vacuous_tests_count_the_map_space(d in 2usize..10, golden in proptest::bool::ANY, delta in 1.0f64..1.5) {
        let x = subshift(golden);
        let q = query(d, delta, 0);
        let mu = Measure::Product(ProductMeasure::<f64>::uniform(2).unwrap());
        let tests = vec![Observable::symbol_indicator(&line(), 2, 1).unwrap()];
        let e = entropy_cell(&q, &x, &mu, &tests).unwrap();
        let p = evaluate_cell(&q, &x, &Observable::<f64>::zero(&line(), 2).unwrap(), CellMethod::Enumerate).unwrap();
        prop_assert_eq!(e.count, p.sep_size);
    }

    #[test]
    fn entropy_count_never_exceeds_the_map_space(d in 2usize..10, golden in proptest::bool::ANY,
                                                  delta in 0.02f64..0.8, perturb in 0usize..3, p1 in 0.05f64..0.95) {
        let x = subshift(golden);
        let q = query(d, delta, perturb);
        let mu = Measure::Product(ProductMeasure::new(vec![1.0 - p1, p1]).unwrap());
        let tests = vec![Observable::symbol_indicator(&line(), 2, 1).unwrap()];
        let e = entropy_cell(&q, &x, &mu, &tests).unwrap();
        let zero = Observable::<f64>::zero(&line(), 2).unwrap();
        let p = evaluate_cell(&q, &x, &zero, CellMethod::Enumerate).unwrap();
        prop_assert!(e.count <= p.map_size);
    }

    #[test]
    fn invariant_measures_stay_below_pressure(seed in 0u64..10_000, markov in proptest::bool::ANY,
                                              table in proptest::collection::vec(-2.0f64..2.0, 4)) {
        let x = Subshift::golden_mean();
        let f = Observable::new(2, pair_window(), table).unwrap();
        let pressure = TransferMatrix::new(&x, Some(&f), DEFAULT_MAX_STATES).unwrap().log_spectral_radius();
        let family = if markov { Family::Markov } else { Family::Product };
        let mu: Measure<f64> = random_measure(&x, family, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let value = variational_objective(&line(), &mu, &f).unwrap();
        prop_assert!(value <= pressure + 1e-9, "{} > {}", value, pressure);
    }

    #[test]
    fn product_measures_are_dominated(p in proptest::collection::vec(0.01f64..1.0, 2..4)) {
        let total: f64 = p.iter().sum();
        let p: Vec<f64> = p.iter().map(|v| v / total).collect();
        let k = p.len();
        let mu = SignedCylinderMeasure::from_product(&ProductMeasure::new(p).unwrap(), line().ball(1)).unwrap();
        let tests: Vec<Observable<f64>> =
            (0..k as u8).map(|a| Observable::symbol_indicator(&line(), k, a).unwrap()).collect();
        let oracle = TransferOracle { x: Subshift::full(k).unwrap(), max_states: DEFAULT_MAX_STATES };
        let r = pressure_domination_check(&mu, &tests, &line(), &oracle, &[1, 3, 9], 1e-9).unwrap();
        prop_assert!(r.passed());
    }
}

#[test]
fn worker_count_does_not_change_schedules() {
    let f = Observable::<f64>::new(2, pair_window(), vec![0.1, -0.4, 0.9, 0.3]).unwrap();
    let schedule = Schedule::grid(&[6, 8, 10], 1, &[0, 1], &[0.3, 0.6], &[0.5]);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            run_schedule(&schedule, SoficFamily::Cyclic, &line(), &Subshift::golden_mean(), &f, &CellSettings::default())
                .unwrap()
        })
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.summary, four.summary);
    for (a, b) in one.cells.iter().zip(&four.cells) {
        let (a, b) = (a.result.as_ref().unwrap(), b.result.as_ref().unwrap());
        assert_eq!(a.log_sum.to_bits(), b.log_sum.to_bits());
        assert_eq!(a.map_size, b.map_size);
    }
}
