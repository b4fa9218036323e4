use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rayon::prelude::*;

use super::{MapSpaceQuery, Mode, PressureError};
use crate::group::FiniteSubset;
use crate::scalar::{LogSumExp, Real};
use crate::shiftspace::{inverse_tables, Labeling, Observable, PseudometricSpec, Subshift};
use crate::sofic::SoficMap;

/// Result of a Map-space enumeration: member count, the log partition sum over
/// all members, and optionally the members themselves in lexicographic order.
#[derive(Clone, Debug)]
pub struct Enumeration<T> {
    pub count: u64,
    pub lse: LogSumExp<T>,
    pub members: Option<Vec<Vec<u8>>>,
    pub energies: Option<Vec<T>>,
    pub nodes: u64,
}

impl<T: Real> Enumeration<T> {
    fn empty(collect: bool) -> Self {
        Self {
            count: 0,
            lse: LogSumExp::new(),
            members: collect.then(Vec::new),
            energies: collect.then(Vec::new),
            nodes: 0,
        }
    }

    fn leaf(&mut self, beta: &[u8], energy: T) {
        self.count += 1;
        self.lse.push(energy);
        if let Some(m) = self.members.as_mut() {
            m.push(beta.to_vec());
        }
        if let Some(e) = self.energies.as_mut() {
            e.push(energy);
        }
    }

    fn merge(&mut self, other: Enumeration<T>) {
        self.count += other.count;
        self.lse.merge(&other.lse);
        self.nodes += other.nodes;
        if let (Some(a), Some(b)) = (self.members.as_mut(), other.members) {
            a.extend(b);
        }
        if let (Some(a), Some(b)) = (self.energies.as_mut(), other.energies) {
            a.extend(b);
        }
    }
}

fn check_alphabet<T: Real>(x: &Subshift, f: Option<&Observable<T>>) -> Result<(), PressureError> {
    match f {
        Some(f) if f.k() != x.k() => Err(PressureError::AlphabetMismatch(x.k(), f.k())),
        _ => Ok(()),
    }
}

/// Precomputed permutation tables for testing Definition-style membership
/// verbatim on a labeling.
struct VerbatimChecker {
    d: usize,
    weights: Vec<f64>,
    /// per `s ∈ F`, per metric term `n`: tables giving the positions read by
    /// `(α_s φ(i))_{s_n⁻¹} = β(σ(s_n s) i)` and `φ(σ_s i)_{s_n⁻¹} = β(σ(s_n) σ_s i)`
    per_s: Vec<Vec<(Vec<usize>, Vec<usize>)>>,
    patterns: Vec<(Vec<Vec<usize>>, Vec<u8>)>,
}

impl VerbatimChecker {
    fn new(q: &MapSpaceQuery, x: &Subshift) -> Result<Self, PressureError> {
        let sigma = &q.sigma;
        let group = sigma.group();
        let terms = q.metric.terms(group);
        let mut per_s = Vec::with_capacity(q.f_set.len());
        for s in &q.f_set {
            let ps = sigma.table(s)?;
            let mut rows = Vec::with_capacity(terms.len());
            for (sn, _) in &terms {
                let left = sigma.table(&group.multiply(sn, s)?)?;
                let psn = sigma.table(sn)?;
                let right = ps.iter().map(|&a| psn[a]).collect();
                rows.push((left, right));
            }
            per_s.push(rows);
        }
        let patterns = x
            .forbidden()
            .iter()
            .map(|p| Ok((inverse_tables(sigma, &p.shape)?, p.symbols.clone())))
            .collect::<Result<_, PressureError>>()?;
        Ok(Self {
            d: sigma.d(),
            weights: terms.iter().map(|(_, w)| *w).collect(),
            per_s,
            patterns,
        })
    }

    fn rho2_sums<'a>(&'a self, beta: &'a [u8]) -> impl Iterator<Item = f64> + 'a {
        self.per_s.iter().map(move |rows| {
            (0..self.d)
                .map(|i| {
                    let r: f64 = rows
                        .iter()
                        .zip(&self.weights)
                        .filter(|((l, r), _)| beta[l[i]] != beta[r[i]])
                        .map(|(_, w)| *w)
                        .sum();
                    r * r
                })
                .sum()
        })
    }

    fn violations(&self, beta: &[u8]) -> usize {
        (0..self.d)
            .filter(|&i| {
                self.patterns
                    .iter()
                    .any(|(t, sym)| t.iter().zip(sym).all(|(p, &a)| beta[p[i]] == a))
            })
            .count()
    }

    fn member(&self, q: &MapSpaceQuery, beta: &[u8]) -> bool {
        self.rho2_sums(beta).all(|s| q.rho2_below_delta(s)) && q.violations_allowed(self.violations(beta))
    }
}

/// `φ_β ∈ Map(ρ, F, δ, σ)`: `max_{s∈F} ρ_2(α_s∘φ, φ∘σ_s) < δ` and the pullback
/// violation fraction is within the query's SFT tolerance.
pub fn map_membership(phi: &Labeling, q: &MapSpaceQuery, x: &Subshift) -> Result<bool, PressureError> {
    q.validate()?;
    if phi.sofic().as_ref() != q.sigma.as_ref() {
        return Err(crate::shiftspace::ShiftError::DifferentSofic.into());
    }
    let checker = VerbatimChecker::new(q, x)?;
    Ok(checker.member(q, phi.symbols()))
}

enum Event {
    Mismatch { s: usize, a: usize, b: usize },
    Pattern { i: usize, pos: Box<[usize]>, sym: Box<[u8]> },
    Energy { pos: Box<[usize]> },
}

/// Pruned depth-first search plan: every constraint or energy term is attached
/// to the largest position it reads, so it is decided as soon as that position
/// is assigned.
struct ModelPlan<'a, T> {
    d: usize,
    k: usize,
    events: Vec<Vec<Event>>,
    n_s: usize,
    max_mis: usize,
    max_viol: usize,
    f: Option<&'a Observable<T>>,
}

struct Counter<'a> {
    local: u64,
    shared: &'a AtomicU64,
    abort: &'a AtomicBool,
    budget: u64,
}

impl Counter<'_> {
    fn tick(&mut self) -> bool {
        self.local += 1;
        if self.local & 0xfff == 0 {
            self.flush()
        } else {
            true
        }
    }

    fn flush(&mut self) -> bool {
        let total = self.shared.fetch_add(self.local, Ordering::Relaxed) + self.local;
        self.local = 0;
        if total > self.budget {
            self.abort.store(true, Ordering::Relaxed);
        }
        !self.abort.load(Ordering::Relaxed)
    }
}

struct DfsState<T> {
    beta: Vec<u8>,
    mis: Vec<usize>,
    hits: Vec<u16>,
    viol: usize,
    energy: Vec<T>,
}

impl<'a, T: Real> ModelPlan<'a, T> {
    fn new(q: &MapSpaceQuery, x: &Subshift, f: Option<&'a Observable<T>>) -> Result<Self, PressureError> {
        let sigma: &SoficMap = &q.sigma;
        let d = sigma.d();
        let group = sigma.group();
        let mut events: Vec<Vec<Event>> = (0..d).map(|_| Vec::new()).collect();
        let pe = sigma.table(&group.identity())?;
        for (si, s) in q.f_set.iter().enumerate() {
            let ps = sigma.table(s)?;
            for i in 0..d {
                // (α_s φ(i))_e = β(σ_s i) against φ(σ_s i)_e = β(σ_e σ_s i)
                let (a, b) = (ps[i], pe[ps[i]]);
                if a != b {
                    events[a.max(b)].push(Event::Mismatch { s: si, a, b });
                }
            }
        }
        for p in x.forbidden() {
            let tables = inverse_tables(sigma, &p.shape)?;
            'index: for i in 0..d {
                let mut req: Vec<(usize, u8)> = tables.iter().map(|t| t[i]).zip(p.symbols.iter().copied()).collect();
                req.sort_unstable();
                req.dedup();
                for w in req.windows(2) {
                    if w[0].0 == w[1].0 {
                        continue 'index;
                    }
                }
                let last = req.last().unwrap().0;
                events[last].push(Event::Pattern {
                    i,
                    pos: req.iter().map(|r| r.0).collect(),
                    sym: req.iter().map(|r| r.1).collect(),
                });
            }
        }
        if let Some(f) = f {
            let tables = inverse_tables(sigma, f.window())?;
            for i in 0..d {
                let pos: Box<[usize]> = tables.iter().map(|t| t[i]).collect();
                let last = *pos.iter().max().unwrap();
                events[last].push(Event::Energy { pos });
            }
        }
        Ok(Self {
            d,
            k: x.k(),
            events,
            n_s: q.f_set.len(),
            max_mis: q.max_mismatches(),
            max_viol: q.max_violations(),
            f,
        })
    }

    /// Applies the constraint events at position `p`; returns how many were
    /// applied and whether the partial labeling survives.
    fn apply(&self, st: &mut DfsState<T>, p: usize) -> (usize, bool) {
        for (n, ev) in self.events[p].iter().enumerate() {
            match ev {
                Event::Mismatch { s, a, b } => {
                    if st.beta[*a] != st.beta[*b] {
                        st.mis[*s] += 1;
                        if st.mis[*s] > self.max_mis {
                            return (n + 1, false);
                        }
                    }
                }
                Event::Pattern { i, pos, sym } => {
                    if pos.iter().zip(sym.iter()).all(|(&q, &a)| st.beta[q] == a) {
                        st.hits[*i] += 1;
                        if st.hits[*i] == 1 {
                            st.viol += 1;
                            if st.viol > self.max_viol {
                                return (n + 1, false);
                            }
                        }
                    }
                }
                Event::Energy { .. } => {}
            }
        }
        (self.events[p].len(), true)
    }

    fn revert(&self, st: &mut DfsState<T>, p: usize, upto: usize) {
        for ev in &self.events[p][..upto] {
            match ev {
                Event::Mismatch { s, a, b } => {
                    if st.beta[*a] != st.beta[*b] {
                        st.mis[*s] -= 1;
                    }
                }
                Event::Pattern { i, pos, sym } => {
                    if pos.iter().zip(sym.iter()).all(|(&q, &a)| st.beta[q] == a) {
                        st.hits[*i] -= 1;
                        if st.hits[*i] == 0 {
                            st.viol -= 1;
                        }
                    }
                }
                Event::Energy { .. } => {}
            }
        }
    }

    fn energy_at(&self, st: &DfsState<T>, p: usize) -> T {
        let Some(f) = self.f else { return T::zero() };
        let mut acc = T::zero();
        for ev in &self.events[p] {
            if let Event::Energy { pos } = ev {
                let idx = pos.iter().fold(0usize, |acc, &q| acc * self.k + st.beta[q] as usize);
                acc = acc + f.table()[idx];
            }
        }
        acc
    }

    fn descend(&self, st: &mut DfsState<T>, p: usize, prefix: &[u8], out: &mut Enumeration<T>, counter: &mut Counter) -> bool {
        let symbols: std::ops::Range<u8> = match prefix.get(p) {
            Some(&c) => c..c + 1,
            None => 0..self.k as u8,
        };
        for c in symbols {
            if !counter.tick() {
                return false;
            }
            st.beta[p] = c;
            let (upto, alive) = self.apply(st, p);
            if alive {
                st.energy[p + 1] = st.energy[p] + self.energy_at(st, p);
                if p + 1 == self.d {
                    out.leaf(&st.beta, st.energy[self.d]);
                } else if !self.descend(st, p + 1, prefix, out, counter) {
                    self.revert(st, p, upto);
                    return false;
                }
            }
            self.revert(st, p, upto);
        }
        true
    }

    fn run(&self, q: &MapSpaceQuery, collect: bool) -> Result<Enumeration<T>, PressureError> {
        let depth = if self.k == 1 {
            0
        } else {
            (0..=self.d).find(|&p| self.k.pow(p as u32) >= 64).unwrap_or(self.d)
        };
        let prefixes: Vec<Vec<u8>> = (0..self.k.pow(depth as u32))
            .map(|n| crate::shiftspace::decode_pattern(n, self.k, depth))
            .collect();
        let shared = AtomicU64::new(0);
        let abort = AtomicBool::new(false);
        let parts: Vec<Enumeration<T>> = prefixes
            .par_iter()
            .map(|prefix| {
                let mut st = DfsState {
                    beta: vec![0; self.d],
                    mis: vec![0; self.n_s],
                    hits: vec![0; self.d],
                    viol: 0,
                    energy: vec![T::zero(); self.d + 1],
                };
                let mut out = Enumeration::empty(collect);
                let mut counter = Counter {
                    local: 0,
                    shared: &shared,
                    abort: &abort,
                    budget: q.budget,
                };
                if !abort.load(Ordering::Relaxed) {
                    self.descend(&mut st, 0, prefix, &mut out, &mut counter);
                }
                counter.flush();
                out
            })
            .collect();
        if abort.load(Ordering::Relaxed) {
            return Err(PressureError::BudgetExceeded { budget: q.budget });
        }
        let mut total = Enumeration::empty(collect);
        for part in parts {
            total.merge(part);
        }
        total.nodes = shared.load(Ordering::Relaxed);
        Ok(total)
    }
}

fn generic_enumeration<T: Real>(
    q: &MapSpaceQuery,
    x: &Subshift,
    f: Option<&Observable<T>>,
    collect: bool,
) -> Result<Enumeration<T>, PressureError> {
    let d = q.d();
    let k = x.k();
    let total = u32::try_from(d)
        .ok()
        .and_then(|d| (k as u64).checked_pow(d))
        .filter(|&n| n <= q.budget)
        .ok_or(PressureError::BudgetExceeded { budget: q.budget })?;
    let checker = VerbatimChecker::new(q, x)?;
    let tables = match f {
        Some(f) => inverse_tables(&q.sigma, f.window())?,
        None => Vec::new(),
    };
    let mut out = Enumeration::empty(collect);
    let mut beta = vec![0u8; d];
    let mut pattern = vec![0u8; tables.len()];
    for _ in 0..total {
        if checker.member(q, &beta) {
            let mut energy = T::zero();
            if let Some(f) = f {
                for i in 0..d {
                    for (x, t) in pattern.iter_mut().zip(&tables) {
                        *x = beta[t[i]];
                    }
                    energy = energy + f.value(&pattern);
                }
            }
            out.leaf(&beta, energy);
        }
        // odometer, last position least significant
        for p in (0..d).rev() {
            beta[p] += 1;
            if (beta[p] as usize) < k {
                break;
            }
            beta[p] = 0;
        }
    }
    out.nodes = total;
    Ok(out)
}

/// Enumerates `Map(ρ, F, δ, σ)` in lexicographic order of `β`, accumulating
/// `log Σ exp(Σ_i f(φ_β(i)))` over members.
pub fn enumerate_map_space<T: Real>(
    q: &MapSpaceQuery,
    x: &Subshift,
    f: Option<&Observable<T>>,
    collect: bool,
) -> Result<Enumeration<T>, PressureError> {
    q.validate()?;
    check_alphabet(x, f)?;
    match q.mode {
        Mode::Model => ModelPlan::new(q, x, f)?.run(q, collect),
        Mode::Generic => generic_enumeration(q, x, f, collect),
    }
}

/// The members of `Map(ρ, F, δ, σ)` as labelings, in lexicographic order.
pub fn map_space_members(q: &MapSpaceQuery, x: &Subshift) -> Result<Vec<Labeling>, PressureError> {
    let e = enumerate_map_space::<f64>(q, x, None, true)?;
    e.members
        .unwrap_or_default()
        .into_iter()
        .map(|b| Ok(Labeling::new(q.sigma.clone(), b)?))
        .collect()
}

/// Greedy maximal `(ρ_∞, ε)`-separated subset: scan in order and keep a point
/// iff it is at distance at least `ε` from every kept point. Returns the kept
/// positions.
pub fn greedy_separated(points: &[Labeling], eps: f64, metric: PseudometricSpec) -> Result<Vec<usize>, PressureError> {
    metric.validate()?;
    if !(eps > 0.0) {
        return Err(PressureError::InvalidParameter { name: "eps", value: eps });
    }
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    let sigma = first.sofic();
    let terms = metric.terms(sigma.group());
    let tables: Vec<Vec<usize>> = terms.iter().map(|(s, _)| sigma.table(s)).collect::<Result<_, _>>()?;
    // coordinates s_n⁻¹ of every φ(i), flattened per point
    let coords: Vec<Vec<u8>> = points
        .iter()
        .map(|p| {
            if p.sofic().as_ref() != sigma.as_ref() {
                return Err(crate::shiftspace::ShiftError::DifferentSofic);
            }
            Ok((0..p.d()).flat_map(|i| tables.iter().map(move |t| p.symbols()[t[i]])).collect())
        })
        .collect::<Result<_, _>>()?;
    let m = terms.len();
    let dist = |a: &[u8], b: &[u8]| -> f64 {
        a.chunks(m)
            .zip(b.chunks(m))
            .map(|(x, y)| {
                x.iter()
                    .zip(y)
                    .zip(&terms)
                    .filter(|((u, v), _)| u != v)
                    .map(|(_, (_, w))| *w)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    };
    let mut kept: Vec<usize> = Vec::new();
    for (n, c) in coords.iter().enumerate() {
        if kept.iter().all(|&j| dist(&coords[j], c) >= eps) {
            kept.push(n);
        }
    }
    Ok(kept)
}

/// `log Σ_{φ∈E} exp(Σ_i f(φ(i)))`.
pub fn log_partition_sum<T: Real>(e: &[Labeling], f: &Observable<T>) -> Result<T, PressureError> {
    if e.is_empty() {
        return Err(PressureError::EmptyPartitionSet);
    }
    let mut lse = LogSumExp::new();
    for phi in e {
        lse.push(crate::shiftspace::birkhoff_sum(f, phi)?);
    }
    Ok(lse.value())
}

/// `Λ_φ = {a : max_{s∈F} ρ(φ(σ_s a), α_s φ(a)) < √δ}`.
pub fn good_index_set(
    phi: &Labeling,
    f_set: &FiniteSubset,
    delta: f64,
    metric: PseudometricSpec,
) -> Result<Vec<usize>, PressureError> {
    metric.validate()?;
    let sigma = phi.sofic();
    let group = sigma.group();
    let terms = metric.terms(group);
    let beta = phi.symbols();
    let d = phi.d();
    let mut worst = vec![0.0f64; d];
    for s in f_set {
        let ps = sigma.table(s)?;
        let mut dist = vec![0.0f64; d];
        for (sn, w) in &terms {
            // φ(σ_s a)_{s_n⁻¹} = β(σ(s_n) σ_s a), (α_s φ(a))_{s_n⁻¹} = β(σ(s_n s) a)
            let psn = sigma.table(sn)?;
            let left = sigma.table(&group.multiply(sn, s)?)?;
            for a in 0..d {
                if beta[psn[ps[a]]] != beta[left[a]] {
                    dist[a] += w;
                }
            }
        }
        for a in 0..d {
            worst[a] = worst[a].max(dist[a]);
        }
    }
    let threshold = delta.sqrt();
    Ok((0..d).filter(|&a| worst[a] < threshold).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupElement, GroupSpec};
    use crate::shiftspace::Pattern;
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive, Zero};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn cyclic(d: usize) -> Arc<SoficMap> {
        Arc::new(SoficMap::cyclic(d, 2).unwrap())
    }

    fn ball(r: usize) -> FiniteSubset {
        GroupSpec::IntegerLine.ball(r)
    }

    fn query(sigma: Arc<SoficMap>, r: usize, delta: f64) -> MapSpaceQuery {
        MapSpaceQuery::new(sigma, ball(r), delta, 0.5)
    }

    /// `σ` with `σ_1 = id`: the alternating shift (no 00, no 11) then has no
    /// pullback point at all.
    fn alternating() -> Subshift {
        let shape = FiniteSubset::new([GroupElement::Int(0), GroupElement::Int(1)]);
        Subshift::new(
            2,
            vec![
                Pattern::new(shape.clone(), vec![0, 0]).unwrap(),
                Pattern::new(shape, vec![1, 1]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn full_shift_counts_everything() {
        let x = Subshift::full(2).unwrap();
        let e = enumerate_map_space::<f64>(&query(cyclic(4), 1, 0.1), &x, None, true).unwrap();
        assert_eq!(e.count, 16);
        let m = e.members.unwrap();
        assert_eq!(m[0], vec![0, 0, 0, 0]);
        assert_eq!(m[15], vec![1, 1, 1, 1]);
        assert!(m.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn golden_mean_cyclic_count_is_lucas() {
        let x = Subshift::golden_mean();
        let q = query(cyclic(4), 1, 0.1).with_sft_tolerance(0.0);
        let e = enumerate_map_space::<f64>(&q, &x, None, true).unwrap();
        assert_eq!(e.count, 7);
        // oracle: cyclic binary strings with no adjacent ones
        let brute = (0u32..16)
            .filter(|b| (0..4).all(|i| !(b >> i & 1 == 1 && b >> ((i + 1) % 4) & 1 == 1)))
            .count();
        assert_eq!(brute, 7);
    }

    #[test]
    fn corrupted_sigma_empties_the_map_space() {
        let sigma = SoficMap::cyclic(6, 1).unwrap();
        let sigma = Arc::new(sigma.with_assignment(&GroupElement::Int(1), (0..6).collect()).unwrap());
        let q = query(sigma, 1, 0.1).with_sft_tolerance(0.0);
        let e = enumerate_map_space::<f64>(&q, &alternating(), None, false).unwrap();
        assert_eq!(e.count, 0);
        assert_eq!(e.lse.value(), f64::NEG_INFINITY);
    }

    #[test]
    fn membership_threshold_arithmetic() {
        // σ_e swaps 0 and 1: with β(0) ≠ β(1) every s meets exactly two mismatches
        let base = SoficMap::cyclic(8, 1).unwrap();
        let sigma = Arc::new(base.with_assignment(&GroupElement::Int(0), vec![1, 0, 2, 3, 4, 5, 6, 7]).unwrap());
        let x = Subshift::full(2).unwrap();
        let phi = Labeling::new(sigma.clone(), vec![1, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        let f = FiniteSubset::singleton(GroupElement::Int(1));
        // ρ_2 = sqrt(2/8) = 0.5
        let q = MapSpaceQuery::new(sigma.clone(), f.clone(), 0.5, 0.5);
        assert!(!map_membership(&phi, &q, &x).unwrap());
        assert!(map_membership(&phi, &q.clone().with_delta(0.5000001), &x).unwrap());
        let same = Labeling::new(sigma, vec![1, 1, 0, 0, 0, 0, 0, 0]).unwrap();
        assert!(map_membership(&same, &q, &x).unwrap());
    }

    #[test]
    fn exact_sigma_admits_every_labeling() {
        let sigma = cyclic(5);
        let x = Subshift::full(3).unwrap();
        let q = query(sigma.clone(), 2, 1e-6);
        for n in 0..243usize {
            let b = crate::shiftspace::decode_pattern(n, 3, 5);
            assert!(map_membership(&Labeling::new(sigma.clone(), b).unwrap(), &q, &x).unwrap());
        }
    }

    #[test]
    fn budget_is_reported() {
        let x = Subshift::full(2).unwrap();
        let q = query(cyclic(12), 1, 0.1).with_budget(100);
        assert_eq!(
            enumerate_map_space::<f64>(&q, &x, None, false).unwrap_err(),
            PressureError::BudgetExceeded { budget: 100 }
        );
        let g = q.clone().with_mode(Mode::Generic);
        assert!(enumerate_map_space::<f64>(&g, &x, None, false).is_err());
    }

    #[test]
    fn model_requires_coordinate_metric() {
        let q = query(cyclic(4), 1, 0.1).with_metric(PseudometricSpec::WeightedWord(2));
        assert_eq!(
            enumerate_map_space::<f64>(&q, &Subshift::full(2).unwrap(), None, false).unwrap_err(),
            PressureError::ModelRequiresCoordinateE
        );
    }

    #[test]
    fn greedy_examples() {
        let sigma = cyclic(3);
        let x = Subshift::full(2).unwrap();
        let pts = map_space_members(&query(sigma, 1, 0.5), &x).unwrap();
        let m = PseudometricSpec::CoordinateE;
        assert_eq!(greedy_separated(&pts, 0.5, m).unwrap().len(), 8);
        assert_eq!(greedy_separated(&pts, 1.5, m).unwrap(), vec![0]);
        assert_eq!(greedy_separated(&pts[3..4], 0.5, m).unwrap(), vec![0]);
        assert!(greedy_separated(&[], 0.5, m).unwrap().is_empty());
    }

    #[test]
    fn greedy_output_is_maximal_and_separated() {
        let sigma = cyclic(5);
        let x = Subshift::full(2).unwrap();
        let pts = map_space_members(&query(sigma, 1, 0.5), &x).unwrap();
        let m = PseudometricSpec::WeightedWord(3);
        for eps in [0.1, 0.3, 0.6, 0.9] {
            let kept = greedy_separated(&pts, eps, m).unwrap();
            for (a, &i) in kept.iter().enumerate() {
                for &j in &kept[a + 1..] {
                    assert!(crate::shiftspace::rho_inf(&pts[i], &pts[j], m).unwrap() >= eps);
                }
            }
            for p in &pts {
                assert!(kept.iter().any(|&i| crate::shiftspace::rho_inf(&pts[i], p, m).unwrap() < eps));
            }
        }
    }

    fn exact_log_sum(e: &[Labeling], coeffs: &[(i64, i64)]) -> f64 {
        // Σ_φ Π_i (p/q)^{...}: exp of integer-rational energies is not rational,
        // so check with weights w_a = exp(a_a) given as exact rationals directly.
        let w: Vec<BigRational> = coeffs
            .iter()
            .map(|&(p, q)| BigRational::new(p.into(), q.into()))
            .collect();
        let mut total = BigRational::zero();
        for phi in e {
            let mut term = BigRational::one();
            for &b in phi.symbols() {
                term *= &w[b as usize];
            }
            total += term;
        }
        total.to_f64().unwrap().ln()
    }

    #[test]
    fn log_partition_sum_examples() {
        let g = GroupSpec::IntegerLine;
        let x = Subshift::full(2).unwrap();
        let e4 = map_space_members(&query(cyclic(4), 1, 0.5), &x).unwrap();
        let zero = Observable::single_site(&g, vec![0.0, 0.0]).unwrap();
        assert!((log_partition_sum(&e4, &zero).unwrap() - 16f64.ln()).abs() < 1e-14);
        let e3 = map_space_members(&query(cyclic(3), 1, 0.5), &x).unwrap();
        let a = Observable::single_site(&g, vec![0.0, 2f64.ln()]).unwrap();
        assert!((log_partition_sum(&e3, &a).unwrap() - 27f64.ln()).abs() < 1e-14);
        let c = Observable::constant(&g, 2, 1.5f64).unwrap();
        assert!((log_partition_sum(&e3[2..3], &c).unwrap() - 4.5).abs() < 1e-14);
        assert_eq!(log_partition_sum(&e3[..0], &c), Err(PressureError::EmptyPartitionSet));
    }

    #[test]
    fn log_partition_sum_matches_rational_oracle() {
        let g = GroupSpec::IntegerLine;
        let x = Subshift::golden_mean();
        let e = map_space_members(&query(cyclic(9), 1, 0.5).with_sft_tolerance(0.0), &x).unwrap();
        let w = [(3, 2), (7, 5)];
        let f = Observable::single_site(&g, w.iter().map(|&(p, q)| (p as f64 / q as f64).ln()).collect()).unwrap();
        let got = log_partition_sum(&e, &f).unwrap();
        let want = exact_log_sum(&e, &w);
        assert!(((got - want) / want).abs() < 1e-12);
    }

    #[test]
    fn good_index_set_examples() {
        let x = Subshift::full(2).unwrap();
        let sigma = cyclic(6);
        let phi = Labeling::new(sigma.clone(), vec![0, 1, 1, 0, 1, 0]).unwrap();
        let f = ball(1);
        assert_eq!(good_index_set(&phi, &f, 0.1, PseudometricSpec::CoordinateE).unwrap(), (0..6).collect::<Vec<_>>());
        // corrupt σ_1 at a single index by a transposition whose images carry the same symbol
        let mut one = sigma.table(&GroupElement::Int(1)).unwrap();
        one.swap(0, 2); // 0 ↦ 3, 2 ↦ 1
        let bad = Arc::new(sigma.with_assignment(&GroupElement::Int(1), one).unwrap());
        let phi = Labeling::new(bad.clone(), vec![0, 1, 1, 0, 1, 0]).unwrap();
        let lambda = good_index_set(&phi, &FiniteSubset::singleton(GroupElement::Int(1)), 0.1, PseudometricSpec::CoordinateE).unwrap();
        // σ_e = id so every index is good for the coordinate metric
        assert_eq!(lambda.len(), 6);
        let _ = x;
    }

    proptest! {
        #[test]
        fn model_matches_generic(d in 2usize..8, k in 1usize..4, r in 0usize..3, delta in 0.05f64..1.2,
                                 swaps in 0usize..3, seed in 0u64..50, golden in proptest::bool::ANY) {
            let sigma = SoficMap::cyclic(d, 2).unwrap().perturbed(&GroupElement::Int(0), swaps, seed).unwrap();
            let sigma = Arc::new(sigma);
            let x = if golden && k == 2 { Subshift::golden_mean() } else { Subshift::full(k).unwrap() };
            let g = GroupSpec::IntegerLine;
            let f = Observable::single_site(&g, (0..k).map(|a| a as f64 * 0.3 - 0.2).collect()).unwrap();
            let q = query(sigma, r, delta);
            let a = enumerate_map_space(&q, &x, Some(&f), true).unwrap();
            let b = enumerate_map_space(&q.clone().with_mode(Mode::Generic), &x, Some(&f), true).unwrap();
            prop_assert_eq!(&a.members, &b.members);
            if a.count > 0 {
                prop_assert!((a.lse.value() - b.lse.value()).abs() <= 1e-12 * a.lse.value().abs().max(1.0));
            }
        }

        #[test]
        fn map_spaces_are_monotone(d in 3usize..8, delta in 0.05f64..1.0, delta2 in 0.05f64..1.0, swaps in 1usize..4, seed in 0u64..50) {
            let sigma = Arc::new(SoficMap::cyclic(d, 2).unwrap()
                .perturbed(&GroupElement::Int(0), swaps, seed).unwrap());
            let x = Subshift::golden_mean();
            let (lo, hi) = if delta <= delta2 { (delta, delta2) } else { (delta2, delta) };
            let members = |r: usize, dl: f64| {
                enumerate_map_space::<f64>(&query(sigma.clone(), r, dl), &x, None, true).unwrap().members.unwrap()
            };
            let small = members(1, lo);
            let big = members(1, hi);
            prop_assert!(small.iter().all(|b| big.contains(b)));
            let wide_f = members(2, lo);
            prop_assert!(wide_f.iter().all(|b| small.contains(b)));
        }

        #[test]
        fn members_have_large_good_sets(d in 4usize..9, delta in 0.2f64..0.9, swaps in 1usize..4, seed in 0u64..50) {
            let sigma = Arc::new(SoficMap::cyclic(d, 2).unwrap()
                .perturbed(&GroupElement::Int(0), swaps, seed).unwrap());
            let x = Subshift::full(2).unwrap();
            let q = query(sigma, 1, delta);
            for phi in map_space_members(&q, &x).unwrap() {
                let lambda = good_index_set(&phi, &q.f_set, delta, PseudometricSpec::CoordinateE).unwrap();
                prop_assert!(lambda.len() as f64 >= (1.0 - q.f_set.len() as f64 * delta) * d as f64 - 1e-9);
            }
        }

        #[test]
        fn separated_sets_are_exact_for_coordinate_metric(d in 2usize..7, eps in 0.01f64..1.0) {
            let x = Subshift::golden_mean();
            let q = query(cyclic(d), 1, 0.5).with_sft_tolerance(0.0);
            let pts = map_space_members(&q, &x).unwrap();
            prop_assert_eq!(greedy_separated(&pts, eps, PseudometricSpec::CoordinateE).unwrap().len(), pts.len());
        }

        #[test]
        fn partition_sum_cell_identities(d in 2usize..7, c in -2.0f64..2.0, a in proptest::collection::vec(-1.0f64..1.0, 2),
                                         b in proptest::collection::vec(-1.0f64..1.0, 2), p in 0.0f64..1.0) {
            let g = GroupSpec::IntegerLine;
            let e = map_space_members(&query(cyclic(d), 1, 0.5).with_sft_tolerance(0.0), &Subshift::golden_mean()).unwrap();
            let f = Observable::single_site(&g, a.clone()).unwrap();
            let h = Observable::single_site(&g, b.clone()).unwrap();
            let lf = log_partition_sum(&e, &f).unwrap();
            let lh = log_partition_sum(&e, &h).unwrap();
            // constant shift
            prop_assert!((log_partition_sum(&e, &f.add_constant(c)).unwrap() - lf - c * d as f64).abs() < 1e-11);
            // monotone
            let top = f.combine(&h, |u, v| u.max(v)).unwrap();
            prop_assert!(lf <= log_partition_sum(&e, &top).unwrap() + 1e-12);
            // Hölder
            let mix = f.scale(p).add(&h.scale(1.0 - p)).unwrap();
            prop_assert!(log_partition_sum(&e, &mix).unwrap() <= p * lf + (1.0 - p) * lh + 1e-11);
            // scaling
            prop_assert!(log_partition_sum(&e, &f.scale(2.0)).unwrap() <= 2.0 * lf + 1e-11);
            prop_assert!(log_partition_sum(&e, &f.scale(0.5)).unwrap() >= 0.5 * lf - 1e-11);
        }
    }
}
