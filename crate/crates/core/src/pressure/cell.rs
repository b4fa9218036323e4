use std::time::{Duration, Instant};

use num_bigint::BigUint;

use super::map_space::{enumerate_map_space, greedy_separated};
use super::transfer::{TransferMatrix, DEFAULT_MAX_STATES};
use super::{MapSpaceQuery, Mode, PressureError};
use crate::group::{FiniteSubset, GroupElement, GroupSpec};
use crate::scalar::{LogSumExp, Real};
use crate::shiftspace::{Labeling, Observable, PseudometricSpec, Subshift};

/// How a cell's partition sum is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellMethod {
    /// Transfer-matrix trace when applicable and enumeration would be large.
    Auto,
    Enumerate,
    /// `trace(T^d)` for exact cyclic approximations of the integers.
    TransferTrace,
}

impl CellMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellMethod::Auto => "auto",
            CellMethod::Enumerate => "enumerate",
            CellMethod::TransferTrace => "trace",
        }
    }
}

/// One evaluated cell `(1/d) log M^ε(f, X, G, ρ, F, δ, σ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureEstimate<T> {
    pub d: usize,
    pub f_set: FiniteSubset,
    pub delta: f64,
    pub eps: f64,
    pub mode: Mode,
    pub method: CellMethod,
    pub map_size: BigUint,
    pub sep_size: BigUint,
    /// `log M^ε`; `-inf` when the Map space is empty.
    pub log_sum: T,
    /// `log_sum / d`; `-inf` when the Map space is empty.
    pub normalized: T,
    /// Whether the separated set is the whole Map space by the 0/1 metric argument.
    pub separated_exact: bool,
    pub nodes: u64,
    pub wall: Duration,
}

impl<T: Real> PressureEstimate<T> {
    pub fn is_empty(&self) -> bool {
        self.map_size == BigUint::ZERO
    }
}

fn shift_table(d: usize, s: i64) -> Vec<usize> {
    let s = s.rem_euclid(d as i64) as usize;
    (0..d).map(|a| (a + s) % d).collect()
}

/// Why the transfer trace cannot replace enumeration, if it cannot.
pub(crate) fn trace_obstruction(q: &MapSpaceQuery, x: &Subshift) -> Option<String> {
    let sigma = &q.sigma;
    if *sigma.group() != GroupSpec::IntegerLine {
        return Some("transfer trace needs the integer line".into());
    }
    if q.mode != Mode::Model || q.metric != PseudometricSpec::CoordinateE {
        return Some("transfer trace needs model mode with the coordinate metric".into());
    }
    if q.eps > 1.0 {
        return Some("transfer trace needs eps <= 1".into());
    }
    // the allowance only matters when something is forbidden
    if q.max_violations() != 0 && !x.is_full() {
        return Some("transfer trace needs a zero violation allowance".into());
    }
    let d = sigma.d();
    for g in sigma.domain().iter() {
        let GroupElement::Int(s) = g else { unreachable!() };
        if sigma.assigned(g) != Some(shift_table(d, *s).as_slice()) {
            return Some(format!("sigma is not the exact cyclic shift at {s}"));
        }
    }
    match sigma.table(&GroupElement::Int(1)) {
        Ok(p) if p == shift_table(d, 1) => None,
        _ => Some("sigma is not the exact cyclic shift at 1".into()),
    }
}

/// Evaluates one cell: Map-space enumeration (or its transfer-matrix trace),
/// a maximal `ε`-separated subset, and the log partition sum normalized by `d`.
///
/// In model mode with `σ_e = id` and `ε ≤ 1`, distinct members are at
/// `ρ_∞`-distance 1, so the separated set is the whole Map space.
pub fn evaluate_cell<T: Real>(
    q: &MapSpaceQuery,
    x: &Subshift,
    f: &Observable<T>,
    method: CellMethod,
) -> Result<PressureEstimate<T>, PressureError> {
    q.validate()?;
    if f.k() != x.k() {
        return Err(PressureError::AlphabetMismatch(x.k(), f.k()));
    }
    let start = Instant::now();
    let d = q.d();
    let obstruction = trace_obstruction(q, x);
    let use_trace = match method {
        CellMethod::TransferTrace => match obstruction {
            Some(reason) => return Err(PressureError::Unsupported(reason)),
            None => true,
        },
        CellMethod::Enumerate => false,
        CellMethod::Auto => obstruction.is_none() && (x.k() as f64).powi(d as i32) > 1e6,
    };
    let mut estimate = PressureEstimate {
        d,
        f_set: q.f_set.clone(),
        delta: q.delta,
        eps: q.eps,
        mode: q.mode,
        method: CellMethod::Enumerate,
        map_size: BigUint::ZERO,
        sep_size: BigUint::ZERO,
        log_sum: T::neg_infinity(),
        normalized: T::neg_infinity(),
        separated_exact: false,
        nodes: 0,
        wall: Duration::ZERO,
    };
    if use_trace {
        let tm = TransferMatrix::new(x, Some(f), DEFAULT_MAX_STATES)?;
        estimate.method = CellMethod::TransferTrace;
        estimate.map_size = tm.count_trace_power(d);
        estimate.sep_size = estimate.map_size.clone();
        estimate.separated_exact = true;
        estimate.log_sum = tm.log_trace_power(d);
    } else {
        let sigma_e = q.sigma.table(&q.sigma.group().identity())?;
        let exact = q.mode == Mode::Model && sigma_e.iter().enumerate().all(|(a, &b)| a == b) && q.eps <= 1.0;
        let e = enumerate_map_space(q, x, Some(f), !exact)?;
        estimate.nodes = e.nodes;
        estimate.map_size = BigUint::from(e.count);
        estimate.separated_exact = exact;
        if exact {
            estimate.sep_size = estimate.map_size.clone();
            estimate.log_sum = e.lse.value();
        } else {
            let members = e.members.unwrap_or_default();
            let energies = e.energies.unwrap_or_default();
            let points: Vec<Labeling> = members
                .into_iter()
                .map(|b| Labeling::new(q.sigma.clone(), b))
                .collect::<Result<_, _>>()?;
            let kept = greedy_separated(&points, q.eps, q.metric)?;
            let mut lse = LogSumExp::new();
            for &i in &kept {
                lse.push(energies[i]);
            }
            estimate.sep_size = BigUint::from(kept.len());
            estimate.log_sum = lse.value();
        }
    }
    if estimate.log_sum > T::neg_infinity() {
        estimate.normalized = estimate.log_sum / T::from_count(d);
    }
    estimate.wall = start.elapsed();
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sofic::SoficMap;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn query(d: usize, r: usize) -> MapSpaceQuery {
        MapSpaceQuery::new(Arc::new(SoficMap::cyclic(d, r.max(1)).unwrap()), GroupSpec::IntegerLine.ball(r), 0.1, 0.5)
    }

    #[test]
    fn bernoulli_cell_is_exact_at_every_d() {
        let g = GroupSpec::IntegerLine;
        let f = Observable::single_site(&g, vec![0.0, 2f64.ln()]).unwrap();
        let x = Subshift::full(2).unwrap();
        for d in 1..=10 {
            let c = evaluate_cell(&query(d, 1), &x, &f, CellMethod::Enumerate).unwrap();
            assert!((c.normalized - 3f64.ln()).abs() < 1e-13, "d={d}");
            assert!(c.separated_exact);
        }
    }

    #[test]
    fn zero_potential_is_entropy() {
        let g = GroupSpec::IntegerLine;
        let x = Subshift::golden_mean();
        let q = query(8, 1).with_sft_tolerance(0.0);
        let c = evaluate_cell(&q, &x, &Observable::<f64>::zero(&g, 2).unwrap(), CellMethod::Enumerate).unwrap();
        assert_eq!(c.map_size, BigUint::from(47u32));
        assert!((c.normalized - 47f64.ln() / 8.0).abs() < 1e-15);
    }

    #[test]
    fn empty_map_space_gives_sentinel() {
        let g = GroupSpec::IntegerLine;
        let sigma = SoficMap::cyclic(6, 1).unwrap().with_assignment(&GroupElement::Int(1), (0..6).collect()).unwrap();
        let shape = FiniteSubset::new([GroupElement::Int(0), GroupElement::Int(1)]);
        let alt = Subshift::new(
            2,
            vec![
                crate::shiftspace::Pattern::new(shape.clone(), vec![0, 0]).unwrap(),
                crate::shiftspace::Pattern::new(shape, vec![1, 1]).unwrap(),
            ],
        )
        .unwrap();
        let q = MapSpaceQuery::new(Arc::new(sigma), g.ball(1), 0.1, 0.5).with_sft_tolerance(0.0);
        let c = evaluate_cell(&q, &alt, &Observable::<f64>::zero(&g, 2).unwrap(), CellMethod::Auto).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.normalized, f64::NEG_INFINITY);
    }

    #[test]
    fn large_eps_keeps_one_point() {
        let g = GroupSpec::IntegerLine;
        let f = Observable::<f64>::single_site(&g, vec![0.25, 1.0]).unwrap();
        let q = MapSpaceQuery { eps: 1.5, ..query(4, 1) };
        let c = evaluate_cell(&q, &Subshift::full(2).unwrap(), &f, CellMethod::Auto).unwrap();
        assert_eq!(c.sep_size, BigUint::from(1u32));
        assert!((c.log_sum - 1.0).abs() < 1e-15);
        assert!(matches!(
            evaluate_cell(&q, &Subshift::full(2).unwrap(), &f, CellMethod::TransferTrace),
            Err(PressureError::Unsupported(_))
        ));
    }

    #[test]
    fn trace_rejects_inexact_sigma() {
        let sigma = SoficMap::cyclic(6, 1).unwrap().perturbed(&GroupElement::Int(1), 1, 3).unwrap();
        let q = MapSpaceQuery::new(Arc::new(sigma), GroupSpec::IntegerLine.ball(1), 0.1, 0.5);
        assert!(trace_obstruction(&q, &Subshift::golden_mean()).is_some());
        assert!(trace_obstruction(&query(6, 1).with_sft_tolerance(0.0), &Subshift::golden_mean()).is_none());
        assert!(trace_obstruction(&query(6, 1).with_sft_tolerance(0.2), &Subshift::golden_mean()).is_some());
        assert!(trace_obstruction(&query(6, 1).with_sft_tolerance(0.2), &Subshift::full(2).unwrap()).is_none());
    }

    #[test]
    fn generic_mode_with_weighted_metric_runs_greedy() {
        let g = GroupSpec::IntegerLine;
        let f = Observable::single_site(&g, vec![0.0, 0.3]).unwrap();
        let q = query(5, 1).with_mode(Mode::Generic).with_metric(PseudometricSpec::WeightedWord(3));
        let small = evaluate_cell(&q, &Subshift::full(2).unwrap(), &f, CellMethod::Auto).unwrap();
        assert!(!small.separated_exact);
        assert_eq!(small.map_size, BigUint::from(32u32));
        let q = MapSpaceQuery { eps: 0.01, ..q };
        let all = evaluate_cell(&q, &Subshift::full(2).unwrap(), &f, CellMethod::Auto).unwrap();
        assert_eq!(all.sep_size, BigUint::from(32u32));
        assert!(small.log_sum <= all.log_sum);
    }

    proptest! {
        #[test]
        fn trace_matches_enumeration(d in 1usize..11, r in 0usize..3, b in -1.0f64..1.0, golden in proptest::bool::ANY,
                                     pair in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let g = GroupSpec::IntegerLine;
            let x = if golden { Subshift::golden_mean() } else { Subshift::full(2).unwrap() };
            let window = FiniteSubset::new([GroupElement::Int(-1), GroupElement::Int(1)]);
            let f = Observable::single_site(&g, vec![0.0, b]).unwrap()
                .add(&Observable::new(2, window, pair).unwrap()).unwrap();
            let q = query(d, r).with_sft_tolerance(0.0);
            let a = evaluate_cell(&q, &x, &f, CellMethod::Enumerate).unwrap();
            let t = evaluate_cell(&q, &x, &f, CellMethod::TransferTrace).unwrap();
            prop_assert_eq!(&a.map_size, &t.map_size);
            if !a.is_empty() {
                prop_assert!(((a.log_sum - t.log_sum) / a.log_sum.abs().max(1.0)).abs() < 1e-9);
            }
        }

        #[test]
        fn log_m_is_nonincreasing_in_eps(e1 in 0.05f64..2.0, e2 in 0.05f64..2.0, d in 3usize..6) {
            let g = GroupSpec::IntegerLine;
            let f = Observable::single_site(&g, vec![0.0, 0.0]).unwrap();
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let base = query(d, 1).with_mode(Mode::Generic).with_metric(PseudometricSpec::WeightedWord(3));
            let x = Subshift::full(2).unwrap();
            let a = evaluate_cell(&MapSpaceQuery { eps: lo, ..base.clone() }, &x, &f, CellMethod::Auto).unwrap();
            let b = evaluate_cell(&MapSpaceQuery { eps: hi, ..base }, &x, &f, CellMethod::Auto).unwrap();
            prop_assert!(a.log_sum >= b.log_sum);
        }
    }
}
