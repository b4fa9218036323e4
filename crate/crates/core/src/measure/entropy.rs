use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::{Measure, MeasureError};
use crate::group::{FiniteSubset, GroupSpec};
use crate::pressure::{greedy_separated, map_space_members, MapSpaceQuery, Mode};
use crate::scalar::{ln_biguint, Real};
use crate::shiftspace::{birkhoff_sum, Labeling, Observable, PseudometricSpec, Subshift};

/// `φ_*ζ`: the push-forward of uniform measure on `[d]`, recorded on a list of
/// test functions.
#[derive(Clone, Debug)]
pub struct EmpiricalMeasure<T> {
    pub source: Labeling,
    /// `(f, (1/d) Σ_i f(φ(i)))`
    pub values: Vec<(Observable<T>, T)>,
}

impl<T: Real> EmpiricalMeasure<T> {
    pub fn new(source: Labeling, tests: &[Observable<T>]) -> Result<Self, MeasureError> {
        let d = T::from_count(source.d());
        let values = tests
            .iter()
            .map(|f| Ok((f.clone(), birkhoff_sum(f, &source)? / d)))
            .collect::<Result<_, MeasureError>>()?;
        Ok(Self { source, values })
    }
}

/// `|(1/d) Σ_i f(φ(i)) − target| < δ` for every `(f, target)`.
///
/// Compared as `|Σ_i f(φ(i)) − d·target| < d·δ`, which keeps type-class
/// boundaries (such as `9/20` against `0.5 ± 0.05`) on the excluded side.
pub fn map_mu_membership<T: Real>(phi: &Labeling, functionals: &[(Observable<T>, T)], delta: f64) -> Result<bool, MeasureError> {
    let d = T::from_count(phi.d());
    let slack = d * T::lit(delta);
    for (f, target) in functionals {
        if (birkhoff_sum(f, phi)? - d * *target).abs() >= slack {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All single-site symbol indicators, plus the potential when given.
pub fn default_test_family<T: Real>(group: &GroupSpec, k: usize, f: Option<&Observable<T>>) -> Result<Vec<Observable<T>>, MeasureError> {
    let mut out: Vec<Observable<T>> = (0..k as u8)
        .map(|a| Observable::symbol_indicator(group, k, a))
        .collect::<Result<_, _>>()?;
    out.extend(f.cloned());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyMethod {
    /// Sum of multinomial coefficients over admissible symbol counts.
    TypeClasses,
    Enumerate,
}

/// One cell `(1/d) log N_ε(Map_μ(ρ, F, L, δ, σ), ρ_∞)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyEstimate<T> {
    pub d: usize,
    pub f_set: FiniteSubset,
    /// Number of test functions in `L`.
    pub tests: usize,
    pub delta: f64,
    pub eps: f64,
    pub count: BigUint,
    /// `-inf` when `Map_μ` is empty.
    pub normalized: T,
    pub method: EntropyMethod,
}

fn identity_is_trivial(q: &MapSpaceQuery) -> Result<bool, MeasureError> {
    let e = q.sigma.group().identity();
    let table = q.sigma.table(&e).map_err(crate::pressure::PressureError::from)?;
    Ok(table.iter().enumerate().all(|(i, &j)| i == j))
}

fn factorials(n: usize) -> Vec<BigUint> {
    let mut out = vec![BigUint::one()];
    for i in 1..=n {
        let next = &out[i - 1] * BigUint::from(i);
        out.push(next);
    }
    out
}

/// Visits every vector of `k` nonnegative counts summing to `d`.
fn for_each_type(k: usize, d: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(prefix: &mut Vec<usize>, k: usize, left: usize, visit: &mut impl FnMut(&[usize])) {
        if prefix.len() + 1 == k {
            prefix.push(left);
            visit(prefix);
            prefix.pop();
            return;
        }
        for n in 0..=left {
            prefix.push(n);
            rec(prefix, k, left - n, visit);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(k), k, d, visit);
}

fn type_class_count<T: Real>(d: usize, k: usize, functionals: &[(Observable<T>, T)], delta: f64) -> BigUint {
    let fact = factorials(d);
    let dt = T::from_count(d);
    let slack = dt * T::lit(delta);
    let mut total = BigUint::zero();
    for_each_type(k, d, &mut |n| {
        let admissible = functionals.iter().all(|(f, target)| {
            let s: T = n.iter().zip(f.table()).map(|(&c, &v)| T::from_count(c) * v).sum();
            (s - dt * *target).abs() < slack
        });
        if admissible {
            let denom = n.iter().fold(BigUint::one(), |acc, &c| acc * &fact[c]);
            total += &fact[d] / denom;
        }
    });
    total
}

/// Counts the maximal `ε`-separated subset of `Map_μ(ρ, F, L, δ, σ)`, the
/// Map space members whose empirical averages of every `f ∈ L` are within
/// `δ` of `∫ f dμ`.
///
/// When every labeling is in the Map space (full shift, `σ_e = id`, coordinate
/// metric) and the tests are single-site, the count is a sum of multinomial
/// coefficients over admissible symbol counts; otherwise members are
/// enumerated and filtered.
pub fn entropy_cell<T: Real>(
    q: &MapSpaceQuery,
    x: &Subshift,
    mu: &Measure<T>,
    tests: &[Observable<T>],
) -> Result<EntropyEstimate<T>, MeasureError> {
    q.validate()?;
    let group = q.sigma.group();
    if mu.k() != x.k() {
        return Err(MeasureError::AlphabetMismatch(mu.k(), x.k()));
    }
    let functionals: Vec<(Observable<T>, T)> = tests
        .iter()
        .map(|f| Ok((f.clone(), mu.integrate(group, f)?)))
        .collect::<Result<_, MeasureError>>()?;
    let d = q.d();
    let id_trivial = identity_is_trivial(q)?;
    let separated_exact = id_trivial && q.metric == PseudometricSpec::CoordinateE && q.eps <= 1.0;
    let single_site = tests.iter().all(|f| *f.window() == FiniteSubset::singleton(group.identity()));
    let (count, method) = if x.is_full() && separated_exact && single_site {
        (type_class_count(d, x.k(), &functionals, q.delta), EntropyMethod::TypeClasses)
    } else {
        let members = map_space_members(q, x)?;
        let mut kept = Vec::new();
        for phi in members {
            if map_mu_membership(&phi, &functionals, q.delta)? {
                kept.push(phi);
            }
        }
        let n = if separated_exact && q.mode == Mode::Model {
            kept.len()
        } else {
            greedy_separated(&kept, q.eps, q.metric)?.len()
        };
        (BigUint::from(n), EntropyMethod::Enumerate)
    };
    let normalized = T::lit(ln_biguint(&count)) / T::from_count(d);
    Ok(EntropyEstimate {
        d,
        f_set: q.f_set.clone(),
        tests: tests.len(),
        delta: q.delta,
        eps: q.eps,
        count,
        normalized,
        method,
    })
}
