use std::collections::BTreeMap;

use super::transfer::{int_offsets, TransferMatrix, DEFAULT_MAX_STATES};
use super::PressureError;
use crate::group::{FiniteSubset, GroupElement, GroupError, GroupSpec};
use crate::scalar::{LogSumExp, Real};
use crate::shiftspace::{decode_pattern, Observable, Subshift};

/// Largest brute-force region, in configurations.
const BRUTE_FORCE_LIMIT: u64 = 1 << 22;

/// Classical pressure of a local observable: the exact `log λ_max` of the
/// weighted transfer matrix (integers only) and the finite-`n` curve
/// `(1/|F_n|) log K_ε(F_n)` along Følner sets.
#[derive(Clone, Debug, PartialEq)]
pub struct AmenablePressure<T> {
    pub exact: Option<T>,
    pub curve: Vec<(usize, T)>,
}

#[derive(Clone, Copy, PartialEq)]
enum Combine {
    Sum,
    Max,
}

fn combine<T: Real>(how: Combine, acc: &mut LogSumExp<T>, best: &mut T, x: T) {
    match how {
        Combine::Sum => acc.push(x),
        Combine::Max => *best = best.max(x),
    }
}

fn check_group(group: &GroupSpec) -> Result<(), PressureError> {
    match group {
        GroupSpec::IntegerLine | GroupSpec::IntegerLattice { .. } => Ok(()),
        GroupSpec::FreeGroup { rank } if *rank >= 2 => Err(GroupError::NotAmenable(group.to_string()).into()),
        _ => Err(PressureError::Unsupported(format!(
            "classical pressure is implemented for integer lattices, not {group}"
        ))),
    }
}

/// `log Σ_C sup_{x ∈ C} exp(Σ_{s∈F} f(α_s x))` over cylinders `C` on `F⁻¹`
/// (or the single largest term when `how` is `Max`).
fn cylinder_sum<T: Real>(
    group: &GroupSpec,
    x: &Subshift,
    f: &Observable<T>,
    f_set: &FiniteSubset,
    how: Combine,
) -> Result<T, PressureError> {
    check_group(group)?;
    if f_set.is_empty() {
        return Err(PressureError::EmptyF);
    }
    if f.k() != x.k() {
        return Err(PressureError::AlphabetMismatch(x.k(), f.k()));
    }
    match group {
        GroupSpec::IntegerLine => line_sum(x, f, f_set, how),
        _ => lattice_brute_force(group, x, f, f_set, how),
    }
}

struct LineRegion {
    n: usize,
    /// core index range, inclusive
    cl: usize,
    cr: usize,
    core: Vec<bool>,
    wmin: i64,
    wmax: i64,
}

impl LineRegion {
    fn term_completed_at(&self, q: usize) -> Option<usize> {
        let j = q as i64 - self.wmax;
        (j >= 0 && (j as usize) < self.n && self.core[j as usize]).then_some(j as usize)
    }
}

fn line_sum<T: Real>(x: &Subshift, f: &Observable<T>, f_set: &FiniteSubset, how: Combine) -> Result<T, PressureError> {
    let fo = int_offsets(f_set)?;
    let wo = int_offsets(f.window())?;
    let core_abs: Vec<i64> = fo.iter().map(|s| -s).collect();
    let (c_lo, c_hi) = (*core_abs.iter().min().unwrap(), *core_abs.iter().max().unwrap());
    let (wmin, wmax) = (*wo.first().unwrap(), *wo.last().unwrap());
    let p0 = c_lo + wmin.min(0);
    let p1 = c_hi + wmax.max(0);
    let n = (p1 - p0 + 1) as usize;
    let mut core = vec![false; n];
    for c in &core_abs {
        core[(c - p0) as usize] = true;
    }
    let region = LineRegion {
        n,
        cl: (c_lo - p0) as usize,
        cr: (c_hi - p0) as usize,
        core,
        wmin,
        wmax,
    };
    let tm = TransferMatrix::new(x, Some(f), DEFAULT_MAX_STATES)?;
    let l = tm.block_length();
    let contiguous = region.core[region.cl..=region.cr].iter().all(|&c| c);
    if contiguous && region.cr - region.cl + 1 >= l {
        Ok(line_dp(&tm, f, &region, how))
    } else {
        line_brute_force(&tm, f, &region, how)
    }
}

fn line_dp<T: Real>(tm: &TransferMatrix<T>, f: &Observable<T>, r: &LineRegion, how: Combine) -> T {
    let l = tm.block_length();
    let states = tm.states();
    let ns = states.len();
    let ess = tm.essential();
    let lw = tm.log_weights();
    let step_term = |q: usize, i: usize, j: usize| -> T {
        match r.term_completed_at(q) {
            Some(_) => lw[i][j],
            None => T::zero(),
        }
    };
    // initial state covers indices 0..l
    let mut v: Vec<T> = (0..ns)
        .map(|i| {
            if !ess[i] {
                return T::neg_infinity();
            }
            (0..l)
                .filter(|&q| r.term_completed_at(q).is_some())
                .map(|q| tm.energy_ending_at(f, &states[i], q))
                .fold(T::zero(), |a, b| a + b)
        })
        .collect();
    for q in (l - 1)..r.cr {
        let dropped = q + 1 - l;
        let ext = dropped < r.cl;
        let mut next: Vec<(LogSumExp<T>, T)> = vec![(LogSumExp::new(), T::neg_infinity()); ns];
        for i in 0..ns {
            if v[i] == T::neg_infinity() {
                continue;
            }
            for j in 0..ns {
                if !ess[j] || !tm.has_edge(i, j) {
                    continue;
                }
                let val = v[i] + step_term(q + 1, i, j);
                let (acc, best) = &mut next[j];
                if ext {
                    *best = best.max(val);
                } else {
                    combine(how, acc, best, val);
                }
            }
        }
        v = next
            .into_iter()
            .map(|(acc, best)| if acc.count() > 0 { acc.value() } else { best })
            .collect();
    }
    // best right extension from each final state
    let mut g: Vec<T> = (0..ns).map(|i| if ess[i] { T::zero() } else { T::neg_infinity() }).collect();
    for q in (r.cr..r.n - 1).rev() {
        g = (0..ns)
            .map(|i| {
                if !ess[i] {
                    return T::neg_infinity();
                }
                (0..ns)
                    .filter(|&j| ess[j] && tm.has_edge(i, j))
                    .map(|j| step_term(q + 1, i, j) + g[j])
                    .fold(T::neg_infinity(), |a, b| a.max(b))
            })
            .collect();
    }
    let mut acc = LogSumExp::new();
    let mut best = T::neg_infinity();
    for i in 0..ns {
        let val = v[i] + g[i];
        if val > T::neg_infinity() {
            combine(how, &mut acc, &mut best, val);
        }
    }
    if acc.count() > 0 {
        acc.value()
    } else {
        best
    }
}

fn line_extendable<T: Real>(tm: &TransferMatrix<T>, ess: &[bool], word: &[u8]) -> bool {
    let l = tm.block_length();
    if word.len() < l {
        return tm.states().iter().zip(ess).any(|(s, &e)| e && s.starts_with(word));
    }
    let mut prev: Option<usize> = None;
    for q in (l - 1)..word.len() {
        let Some(i) = tm.state_index(&word[q + 1 - l..=q]) else { return false };
        if !ess[i] || prev.is_some_and(|p| !tm.has_edge(p, i)) {
            return false;
        }
        prev = Some(i);
    }
    true
}

fn line_brute_force<T: Real>(tm: &TransferMatrix<T>, f: &Observable<T>, r: &LineRegion, how: Combine) -> Result<T, PressureError> {
    let k = tm.k();
    let total = (k as u64)
        .checked_pow(r.n as u32)
        .filter(|&t| t <= BRUTE_FORCE_LIMIT)
        .ok_or(PressureError::BudgetExceeded { budget: BRUTE_FORCE_LIMIT })?;
    let ess = tm.essential();
    let span = (r.wmax - r.wmin) as usize;
    let mut best: BTreeMap<Vec<u8>, T> = BTreeMap::new();
    for code in 0..total as usize {
        let word = decode_pattern(code, k, r.n);
        if !line_extendable(tm, &ess, &word) {
            continue;
        }
        let mut energy = T::zero();
        for q in 0..r.n {
            if r.term_completed_at(q).is_some() {
                debug_assert!(q >= span);
                energy = energy + tm.energy_ending_at(f, &word, q);
            }
        }
        let key: Vec<u8> = (0..r.n).filter(|&q| r.core[q]).map(|q| word[q]).collect();
        let slot = best.entry(key).or_insert(T::neg_infinity());
        *slot = slot.max(energy);
    }
    let mut acc = LogSumExp::new();
    let mut top = T::neg_infinity();
    for v in best.values() {
        combine(how, &mut acc, &mut top, *v);
    }
    Ok(if acc.count() > 0 { acc.value() } else { top })
}

/// Brute force over the finite region `F⁻¹W ∪ F⁻¹` of a lattice, with
/// admissibility checked on the forbidden patterns that fit in the region.
fn lattice_brute_force<T: Real>(
    group: &GroupSpec,
    x: &Subshift,
    f: &Observable<T>,
    f_set: &FiniteSubset,
    how: Combine,
) -> Result<T, PressureError> {
    let k = x.k();
    let core: Vec<GroupElement> = f_set.iter().map(|s| group.inverse(s)).collect::<Result<_, _>>()?;
    let mut region_elems: Vec<GroupElement> = core.clone();
    for j in &core {
        for w in f.window() {
            region_elems.push(group.multiply(j, w)?);
        }
    }
    let region = FiniteSubset::new(region_elems);
    let n = region.len();
    let total = (k as u64)
        .checked_pow(n as u32)
        .filter(|&t| t <= BRUTE_FORCE_LIMIT)
        .ok_or(PressureError::BudgetExceeded { budget: BRUTE_FORCE_LIMIT })?;
    let pos = |g: &GroupElement| region.as_slice().binary_search(g).ok();
    let core_pos: Vec<usize> = core.iter().map(|g| pos(g).unwrap()).collect();
    let term_pos: Vec<Vec<usize>> = core
        .iter()
        .map(|j| f.window().iter().map(|w| pos(&group.multiply(j, w).unwrap()).unwrap()).collect())
        .collect();
    // every translate of every forbidden pattern that lies inside the region
    let mut placements: Vec<(Vec<usize>, &[u8])> = Vec::new();
    for p in x.forbidden() {
        let anchor = &p.shape.as_slice()[0];
        let anchor_inv = group.inverse(anchor)?;
        for r in region.iter() {
            let t = group.multiply(r, &anchor_inv)?;
            let spots: Option<Vec<usize>> = p.shape.iter().map(|w| pos(&group.multiply(&t, w).ok()?)).collect();
            if let Some(spots) = spots {
                placements.push((spots, &p.symbols));
            }
        }
    }
    let mut best: BTreeMap<Vec<u8>, T> = BTreeMap::new();
    let mut pattern = vec![0u8; f.window().len()];
    for code in 0..total as usize {
        let word = decode_pattern(code, k, n);
        if placements.iter().any(|(spots, sym)| spots.iter().zip(sym.iter()).all(|(&q, &a)| word[q] == a)) {
            continue;
        }
        let mut energy = T::zero();
        for tp in &term_pos {
            for (x, &q) in pattern.iter_mut().zip(tp) {
                *x = word[q];
            }
            energy = energy + f.value(&pattern);
        }
        let key: Vec<u8> = core_pos.iter().map(|&q| word[q]).collect();
        let slot = best.entry(key).or_insert(T::neg_infinity());
        *slot = slot.max(energy);
    }
    let mut acc = LogSumExp::new();
    let mut top = T::neg_infinity();
    for v in best.values() {
        combine(how, &mut acc, &mut top, *v);
    }
    Ok(if acc.count() > 0 { acc.value() } else { top })
}

/// `log K_ε(f, X, G, ρ, F)` for the coordinate metric: for `ε ≤ 1` a maximal
/// separated set picks one point per cylinder on `F⁻¹`, so the supremum is the
/// sum over cylinders of the best point in each; for `ε > 1` it is one point.
pub fn classical_separated_sum<T: Real>(
    group: &GroupSpec,
    x: &Subshift,
    f: &Observable<T>,
    f_set: &FiniteSubset,
    eps: f64,
) -> Result<T, PressureError> {
    if !(eps > 0.0) {
        return Err(PressureError::InvalidParameter { name: "eps", value: eps });
    }
    cylinder_sum(group, x, f, f_set, if eps <= 1.0 { Combine::Sum } else { Combine::Max })
}

/// `log P_1(F, f, δ)` for the coordinate metric: for `δ ≤ 1` the optimal cover
/// is the cylinder partition on `F⁻¹`; for `δ > 1` the whole space is one set.
pub fn classical_cover_sum<T: Real>(
    group: &GroupSpec,
    x: &Subshift,
    f: &Observable<T>,
    f_set: &FiniteSubset,
    delta: f64,
) -> Result<T, PressureError> {
    if !(delta > 0.0) {
        return Err(PressureError::InvalidParameter { name: "delta", value: delta });
    }
    cylinder_sum(group, x, f, f_set, if delta <= 1.0 { Combine::Sum } else { Combine::Max })
}

pub fn amenable_pressure<T: Real>(
    group: &GroupSpec,
    x: &Subshift,
    f: &Observable<T>,
    n_max: usize,
) -> Result<AmenablePressure<T>, PressureError> {
    check_group(group)?;
    let exact = match group {
        GroupSpec::IntegerLine => Some(TransferMatrix::new(x, Some(f), DEFAULT_MAX_STATES)?.log_spectral_radius()),
        _ => None,
    };
    let mut curve = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let fn_set = group.folner_set(n)?;
        let log_k = classical_separated_sum(group, x, f, &fn_set, 0.5)?;
        curve.push((n, log_k / T::from_count(fn_set.len())));
    }
    Ok(AmenablePressure { exact, curve })
}
