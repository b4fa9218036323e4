use rand::Rng;

use super::{int_offset, MarkovMeasure, Measure, MeasureError, ProductMeasure};
use crate::group::GroupSpec;
use crate::scalar::Real;
use crate::shiftspace::{Observable, Subshift};

/// Parametric family searched for equilibrium states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Product,
    /// One-step Markov chains; integers only, forbidden words of length ≤ 2.
    Markov,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult<T> {
    pub measure: Measure<T>,
    pub value: T,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GapReport<T> {
    /// `pressure − best`, expected `≥ 0` up to tolerance.
    Gap(T),
    /// The pressure is `−∞`: no invariant measure lives on the subshift.
    NoInvariantMeasure,
}

/// `h(μ) + ∫ f dμ`.
pub fn variational_objective<T: Real>(group: &GroupSpec, mu: &Measure<T>, f: &Observable<T>) -> Result<T, MeasureError> {
    Ok(mu.entropy() + mu.integrate(group, f)?)
}

pub fn variational_gap<T: Real>(pressure: T, best: T) -> Result<GapReport<T>, MeasureError> {
    if pressure == T::neg_infinity() {
        return Ok(GapReport::NoInvariantMeasure);
    }
    if !pressure.is_finite() {
        return Err(MeasureError::NotFinite("pressure"));
    }
    if !best.is_finite() {
        return Err(MeasureError::NotFinite("variational value"));
    }
    Ok(GapReport::Gap(pressure - best))
}

/// Maximizes `g` on `[lo, hi]` by golden-section search.
fn golden_section<T: Real>(lo: T, hi: T, mut g: impl FnMut(T) -> T, evals: &mut usize) -> (T, T) {
    let r = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    *evals += 2;
    for _ in 0..120 {
        if (b - a).abs() <= T::epsilon() * (T::one() + a.abs().max(b.abs())) {
            break;
        }
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
        *evals += 1;
    }
    // the endpoints matter when the optimum sits on the boundary of the simplex
    let mut best = if gc >= gd { (c, gc) } else { (d, gd) };
    for t in [lo, hi] {
        let v = g(t);
        *evals += 1;
        if v > best.1 {
            best = (t, v);
        }
    }
    best
}

/// Coordinate ascent by pairwise mass transfers inside each group of
/// coordinates: `x_i += t`, `x_j −= t` with both kept nonnegative.
fn pairwise_ascent<T: Real>(
    x: &mut [T],
    groups: &[Vec<usize>],
    sweeps: usize,
    mut objective: impl FnMut(&[T]) -> T,
    evals: &mut usize,
) -> T {
    let mut value = objective(x);
    *evals += 1;
    for _ in 0..sweeps {
        let before = value;
        for group in groups {
            for (n, &i) in group.iter().enumerate() {
                for &j in &group[n + 1..] {
                    let (xi, xj) = (x[i], x[j]);
                    let mut trial = x.to_vec();
                    let (t, v) = golden_section(
                        -xi,
                        xj,
                        |t| {
                            trial[i] = xi + t;
                            trial[j] = xj - t;
                            objective(&trial)
                        },
                        evals,
                    );
                    if v > value {
                        x[i] = xi + t;
                        x[j] = xj - t;
                        value = v;
                    }
                }
            }
        }
        if value - before <= T::epsilon() * value.abs().max(T::one()) {
            break;
        }
    }
    value
}

/// Symbol supports of product measures living on `X`: nonempty sets `S` such
/// that no forbidden pattern uses only symbols of `S`. Ordered by bitmask.
fn product_supports(x: &Subshift) -> Result<Vec<Vec<usize>>, MeasureError> {
    let k = x.k();
    if k > 16 {
        return Err(MeasureError::Unsupported("product search enumerates supports of at most 16 symbols".into()));
    }
    Ok((1u32..(1 << k))
        .filter(|mask| {
            x.forbidden()
                .iter()
                .all(|p| p.symbols.iter().any(|&a| mask & (1 << a) == 0))
        })
        .map(|mask| (0..k).filter(|&i| mask & (1 << i) != 0).collect())
        .collect())
}

/// Allowed one-step transitions of `X` restricted to symbols on bi-infinite paths.
fn allowed_transitions(x: &Subshift) -> Result<(Vec<Vec<bool>>, Vec<bool>), MeasureError> {
    let k = x.k();
    let mut allowed = vec![vec![true; k]; k];
    let mut alive = vec![true; k];
    for pat in x.forbidden() {
        let offsets: Vec<i64> = pat.shape.iter().map(int_offset).collect::<Result<_, _>>()?;
        match (offsets.len(), offsets[offsets.len() - 1] - offsets[0]) {
            (1, 0) => alive[pat.symbols[0] as usize] = false,
            (2, 1) => allowed[pat.symbols[0] as usize][pat.symbols[1] as usize] = false,
            _ => {
                return Err(MeasureError::Unsupported(
                    "the Markov family needs forbidden words on at most two adjacent sites".into(),
                ))
            }
        }
    }
    loop {
        let mut changed = false;
        for u in 0..k {
            if alive[u] {
                let out = (0..k).any(|v| alive[v] && allowed[u][v]);
                let inc = (0..k).any(|v| alive[v] && allowed[v][u]);
                if !out || !inc {
                    alive[u] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if !alive.iter().any(|&a| a) {
        return Err(MeasureError::Unsupported("the subshift is empty".into()));
    }
    Ok((allowed, alive))
}

/// Row-stochastic matrix from weights on allowed transitions; rows of dead
/// symbols (never visited) spread uniformly over live ones.
fn markov_from_weights<T: Real>(w: &[T], allowed: &[Vec<bool>], alive: &[bool]) -> Result<MarkovMeasure<T>, MeasureError> {
    let k = alive.len();
    let live = alive.iter().filter(|&&a| a).count();
    let p = (0..k)
        .map(|u| {
            let row = &w[u * k..(u + 1) * k];
            if alive[u] {
                let total: T = (0..k).filter(|&v| alive[v] && allowed[u][v]).map(|v| row[v]).sum();
                (0..k)
                    .map(|v| if alive[v] && allowed[u][v] { row[v] / total } else { T::zero() })
                    .collect()
            } else {
                (0..k)
                    .map(|v| if alive[v] { T::one() / T::from_count(live) } else { T::zero() })
                    .collect()
            }
        })
        .collect();
    MarkovMeasure::new(p)
}

fn markov_groups(allowed: &[Vec<bool>], alive: &[bool]) -> Vec<Vec<usize>> {
    let k = alive.len();
    (0..k)
        .filter(|&u| alive[u])
        .map(|u| (0..k).filter(|&v| alive[v] && allowed[u][v]).map(|v| u * k + v).collect())
        .collect()
}

/// Best `h(μ) + ∫ f dμ` over a family, by pairwise coordinate ascent with
/// golden-section line searches, at most `budget` sweeps per start.
/// Deterministic; ties keep the first candidate found.
pub fn variational_search<T: Real>(
    group: &GroupSpec,
    x: &Subshift,
    f: &Observable<T>,
    family: Family,
    budget: usize,
) -> Result<SearchResult<T>, MeasureError> {
    if budget == 0 {
        return Err(MeasureError::InvalidParameter("budget"));
    }
    if f.k() != x.k() {
        return Err(MeasureError::AlphabetMismatch(x.k(), f.k()));
    }
    let k = x.k();
    let mut evals = 0;
    match family {
        Family::Product => {
            let mut best: Option<SearchResult<T>> = None;
            for support in product_supports(x)? {
                let mut p = vec![T::zero(); k];
                for &i in &support {
                    p[i] = T::one() / T::from_count(support.len());
                }
                let objective = |q: &[T]| {
                    let mu = ProductMeasure::new(q.to_vec()).map(Measure::Product);
                    mu.and_then(|m| variational_objective(group, &m, f)).unwrap_or(T::neg_infinity())
                };
                let value = pairwise_ascent(&mut p, std::slice::from_ref(&support), budget, objective, &mut evals);
                if best.as_ref().is_none_or(|b| value > b.value) {
                    let total: T = p.iter().copied().sum();
                    let mu = ProductMeasure::new(p.iter().map(|&x| x / total).collect())?;
                    best = Some(SearchResult {
                        measure: Measure::Product(mu),
                        value,
                        evaluations: 0,
                    });
                }
            }
            let mut best = best.ok_or_else(|| MeasureError::Unsupported("no product measure lives on the subshift".into()))?;
            best.evaluations = evals;
            Ok(best)
        }
        Family::Markov => {
            if *group != GroupSpec::IntegerLine {
                return Err(MeasureError::Unsupported("the Markov family needs the integers".into()));
            }
            let (allowed, alive) = allowed_transitions(x)?;
            let groups = markov_groups(&allowed, &alive);
            let mut w = vec![T::zero(); k * k];
            for g in &groups {
                for &i in g {
                    w[i] = T::one() / T::from_count(g.len());
                }
            }
            let objective = |q: &[T]| {
                markov_from_weights(q, &allowed, &alive)
                    .map(Measure::Markov)
                    .and_then(|m| variational_objective(group, &m, f))
                    .unwrap_or(T::neg_infinity())
            };
            let value = pairwise_ascent(&mut w, &groups, budget, objective, &mut evals);
            Ok(SearchResult {
                measure: Measure::Markov(markov_from_weights(&w, &allowed, &alive)?),
                value,
                evaluations: evals,
            })
        }
    }
}

/// A random member of the family living on `X`: product measures get a
/// uniformly chosen admissible support, Markov chains random weights on the
/// allowed transitions.
pub fn random_measure<T: Real, R: Rng>(x: &Subshift, family: Family, rng: &mut R) -> Result<Measure<T>, MeasureError> {
    let k = x.k();
    match family {
        Family::Product => {
            let supports = product_supports(x)?;
            let s = &supports[rng.gen_range(0..supports.len())];
            let mut p = vec![T::zero(); k];
            for &i in s {
                p[i] = T::lit(rng.gen_range(0.05..1.0));
            }
            let total: T = p.iter().copied().sum();
            Ok(Measure::Product(ProductMeasure::new(p.into_iter().map(|v| v / total).collect())?))
        }
        Family::Markov => {
            let (allowed, alive) = allowed_transitions(x)?;
            let w: Vec<T> = (0..k * k).map(|_| T::lit(rng.gen_range(0.05..1.0))).collect();
            Ok(Measure::Markov(markov_from_weights(&w, &allowed, &alive)?))
        }
    }
}
