//! Finite-alphabet subshifts, local observables and the pseudometrics on maps
//! `[d] → X`, all evaluated through pullback labelings
//! `φ_β(i)_t = β(σ(t⁻¹) i)`.

use std::sync::Arc;

use thiserror::Error;

use crate::group::{FiniteSubset, GroupElement, GroupError, GroupSpec};
use crate::scalar::Real;
use crate::sofic::{SoficError, SoficMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShiftError {
    #[error(transparent)]
    Sofic(#[from] SoficError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("alphabet size must be at least 1")]
    EmptyAlphabet,
    #[error("alphabet sizes differ ({0} vs {1})")]
    AlphabetMismatch(usize, usize),
    #[error("symbol {symbol} outside alphabet of size {k}")]
    SymbolOutOfRange { symbol: u8, k: usize },
    #[error("observable table has {got} entries, expected {expected}")]
    TableSize { expected: usize, got: usize },
    #[error("pattern shapes and windows must be nonempty")]
    EmptyShape,
    #[error("pattern has {got} symbols for a shape of size {expected}")]
    PatternLength { expected: usize, got: usize },
    #[error("labeling has length {got}, sofic map has d = {expected}")]
    LabelingLength { expected: usize, got: usize },
    #[error("labelings are built over different sofic maps")]
    DifferentSofic,
    #[error("index set J must be nonempty")]
    EmptyIndexSet,
    #[error("window has {got} coordinates, metric reads {need}")]
    InsufficientWindow { need: usize, got: usize },
    #[error("weighted-word truncation depth must be at least 1")]
    ZeroDepth,
    #[error("alphabet size {0} overflows the pattern table")]
    TableTooLarge(usize),
}

/// A forbidden pattern: the configuration restricted to `shape` (in canonical
/// order) must not equal `symbols` at any translate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub shape: FiniteSubset,
    pub symbols: Vec<u8>,
}

impl Pattern {
    pub fn new(shape: FiniteSubset, symbols: Vec<u8>) -> Result<Self, ShiftError> {
        if shape.is_empty() {
            return Err(ShiftError::EmptyShape);
        }
        if shape.len() != symbols.len() {
            return Err(ShiftError::PatternLength {
                expected: shape.len(),
                got: symbols.len(),
            });
        }
        Ok(Self { shape, symbols })
    }

    /// Whether the pattern occurs where `lookup` gives the configuration.
    pub fn occurs(&self, mut lookup: impl FnMut(&GroupElement) -> u8) -> bool {
        self.shape.iter().zip(&self.symbols).all(|(w, &a)| lookup(w) == a)
    }
}

/// Subshift of finite type over the alphabet `{0, ..., k-1}`; no forbidden
/// patterns means the full shift.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subshift {
    k: usize,
    forbidden: Vec<Pattern>,
}

impl Subshift {
    pub fn new(k: usize, forbidden: Vec<Pattern>) -> Result<Self, ShiftError> {
        if k == 0 {
            return Err(ShiftError::EmptyAlphabet);
        }
        if k > 256 {
            return Err(ShiftError::TableTooLarge(k));
        }
        for p in &forbidden {
            if let Some(&s) = p.symbols.iter().find(|&&s| s as usize >= k) {
                return Err(ShiftError::SymbolOutOfRange { symbol: s, k });
            }
        }
        Ok(Self { k, forbidden })
    }

    pub fn full(k: usize) -> Result<Self, ShiftError> {
        Self::new(k, Vec::new())
    }

    /// Binary sequences over the integers with no two adjacent ones.
    pub fn golden_mean() -> Self {
        let shape = FiniteSubset::new([GroupElement::Int(0), GroupElement::Int(1)]);
        Self::new(2, vec![Pattern::new(shape, vec![1, 1]).unwrap()]).unwrap()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn forbidden(&self) -> &[Pattern] {
        &self.forbidden
    }

    pub fn is_full(&self) -> bool {
        self.forbidden.is_empty()
    }
}

/// Local observable `f(x) = table(x|_W)` on a finite window `W`.
///
/// Patterns on `W` are indexed row-major in canonical window order, the first
/// window element being the most significant digit.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable<T> {
    k: usize,
    window: FiniteSubset,
    table: Vec<T>,
}

fn table_len(k: usize, n: usize) -> Result<usize, ShiftError> {
    u32::try_from(n)
        .ok()
        .and_then(|n| k.checked_pow(n))
        .filter(|&len| len <= 1 << 28)
        .ok_or(ShiftError::TableTooLarge(k))
}

/// Decodes a row-major pattern index into symbols.
pub fn decode_pattern(mut index: usize, k: usize, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    for x in out.iter_mut().rev() {
        *x = (index % k) as u8;
        index /= k;
    }
    out
}

pub fn encode_pattern(pattern: &[u8], k: usize) -> usize {
    pattern.iter().fold(0, |acc, &a| acc * k + a as usize)
}

impl<T: Real> Observable<T> {
    pub fn new(k: usize, window: FiniteSubset, table: Vec<T>) -> Result<Self, ShiftError> {
        if k == 0 {
            return Err(ShiftError::EmptyAlphabet);
        }
        if window.is_empty() {
            return Err(ShiftError::EmptyShape);
        }
        let expected = table_len(k, window.len())?;
        if table.len() != expected {
            return Err(ShiftError::TableSize {
                expected,
                got: table.len(),
            });
        }
        Ok(Self { k, window, table })
    }

    /// `f(x) = a_{x_e}`.
    pub fn single_site(group: &GroupSpec, coeffs: Vec<T>) -> Result<Self, ShiftError> {
        Self::new(coeffs.len(), FiniteSubset::singleton(group.identity()), coeffs)
    }

    pub fn constant(group: &GroupSpec, k: usize, c: T) -> Result<Self, ShiftError> {
        Self::single_site(group, vec![c; k])
    }

    pub fn zero(group: &GroupSpec, k: usize) -> Result<Self, ShiftError> {
        Self::constant(group, k, T::zero())
    }

    /// Indicator of the cylinder `{x : x|_W = pattern}`.
    pub fn indicator(k: usize, window: FiniteSubset, pattern: &[u8]) -> Result<Self, ShiftError> {
        if pattern.len() != window.len() {
            return Err(ShiftError::PatternLength {
                expected: window.len(),
                got: pattern.len(),
            });
        }
        if let Some(&s) = pattern.iter().find(|&&s| s as usize >= k) {
            return Err(ShiftError::SymbolOutOfRange { symbol: s, k });
        }
        let len = table_len(k, window.len())?;
        let hit = encode_pattern(pattern, k);
        let table = (0..len).map(|i| if i == hit { T::one() } else { T::zero() }).collect();
        Self::new(k, window, table)
    }

    /// Indicator of `x_e = symbol`.
    pub fn symbol_indicator(group: &GroupSpec, k: usize, symbol: u8) -> Result<Self, ShiftError> {
        Self::indicator(k, FiniteSubset::singleton(group.identity()), &[symbol])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn window(&self) -> &FiniteSubset {
        &self.window
    }

    pub fn table(&self) -> &[T] {
        &self.table
    }

    pub fn value(&self, pattern: &[u8]) -> T {
        self.table[encode_pattern(pattern, self.k)]
    }

    pub fn map(&self, op: impl Fn(T) -> T) -> Self {
        Self {
            k: self.k,
            window: self.window.clone(),
            table: self.table.iter().map(|&x| op(x)).collect(),
        }
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|x| x * c)
    }

    pub fn add_constant(&self, c: T) -> Self {
        self.map(|x| x + c)
    }

    pub fn abs(&self) -> Self {
        self.map(|x| x.abs())
    }

    /// The same function written on a larger window.
    pub fn extend_to(&self, window: &FiniteSubset) -> Result<Self, ShiftError> {
        if !self.window.is_subset(window) {
            return Err(ShiftError::InsufficientWindow {
                need: self.window.len(),
                got: window.len(),
            });
        }
        let pos: Vec<usize> = self
            .window
            .iter()
            .map(|w| window.as_slice().binary_search(w).unwrap())
            .collect();
        let len = table_len(self.k, window.len())?;
        let mut sub = vec![0u8; pos.len()];
        let table = (0..len)
            .map(|i| {
                let p = decode_pattern(i, self.k, window.len());
                for (s, &j) in sub.iter_mut().zip(&pos) {
                    *s = p[j];
                }
                self.value(&sub)
            })
            .collect();
        Self::new(self.k, window.clone(), table)
    }

    /// Pointwise combination on the union of the two windows.
    pub fn combine(&self, other: &Self, op: impl Fn(T, T) -> T) -> Result<Self, ShiftError> {
        if self.k != other.k {
            return Err(ShiftError::AlphabetMismatch(self.k, other.k));
        }
        let window = self.window.union(&other.window);
        let a = self.extend_to(&window)?;
        let b = other.extend_to(&window)?;
        let table = a.table.iter().zip(&b.table).map(|(&x, &y)| op(x, y)).collect();
        Self::new(self.k, window, table)
    }

    pub fn add(&self, other: &Self) -> Result<Self, ShiftError> {
        self.combine(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ShiftError> {
        self.combine(other, |x, y| x - y)
    }

    /// `f ∘ α_s`, where `(α_s x)_t = x_{s⁻¹t}`; its window is `s⁻¹W`.
    pub fn translate(&self, group: &GroupSpec, s: &GroupElement) -> Result<Self, ShiftError> {
        let s_inv = group.inverse(s)?;
        let moved: Vec<GroupElement> = self
            .window
            .iter()
            .map(|w| group.multiply(&s_inv, w))
            .collect::<Result<_, _>>()?;
        let window = FiniteSubset::new(moved.iter().cloned());
        // position in the new window of s⁻¹w, for each w in the old order
        let pos: Vec<usize> = moved
            .iter()
            .map(|m| window.as_slice().binary_search(m).unwrap())
            .collect();
        let len = self.table.len();
        let mut old = vec![0u8; pos.len()];
        let table = (0..len)
            .map(|i| {
                let p = decode_pattern(i, self.k, window.len());
                for (o, &j) in old.iter_mut().zip(&pos) {
                    *o = p[j];
                }
                self.value(&old)
            })
            .collect();
        Self::new(self.k, window, table)
    }

    pub fn max_abs(&self) -> T {
        self.table.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn max_value(&self) -> T {
        self.table.iter().fold(T::neg_infinity(), |m, &x| m.max(x))
    }

    pub fn min_value(&self) -> T {
        self.table.iter().fold(T::infinity(), |m, &x| m.min(x))
    }

    /// `sup |f(x) - f(y)|` over pairs with `x_e = y_e`: the oscillation over
    /// balls of radius at most 1 in the coordinate-at-identity pseudometric.
    pub fn oscillation_at_identity(&self, group: &GroupSpec) -> T {
        let n = self.window.len();
        let e_pos = self.window.as_slice().binary_search(&group.identity()).ok();
        let mut lo = vec![T::infinity(); self.k];
        let mut hi = vec![T::neg_infinity(); self.k];
        for (i, &v) in self.table.iter().enumerate() {
            let c = match e_pos {
                Some(j) => decode_pattern(i, self.k, n)[j] as usize,
                None => 0,
            };
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
        lo.iter()
            .zip(&hi)
            .filter(|(l, _)| l.is_finite())
            .fold(T::zero(), |m, (&l, &h)| m.max(h - l))
    }

    pub fn cast<U: Real>(&self) -> Observable<U> {
        Observable {
            k: self.k,
            window: self.window.clone(),
            table: self.table.iter().map(|&x| U::lit(x.as_f64())).collect(),
        }
    }
}

/// A labeling `β: [d] → A` together with the sofic map that turns it into the
/// pullback point `φ_β`.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeling {
    sofic: Arc<SoficMap>,
    symbols: Vec<u8>,
}

impl Labeling {
    pub fn new(sofic: Arc<SoficMap>, symbols: Vec<u8>) -> Result<Self, ShiftError> {
        if symbols.len() != sofic.d() {
            return Err(ShiftError::LabelingLength {
                expected: sofic.d(),
                got: symbols.len(),
            });
        }
        Ok(Self { sofic, symbols })
    }

    pub fn sofic(&self) -> &Arc<SoficMap> {
        &self.sofic
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn d(&self) -> usize {
        self.symbols.len()
    }
}

/// The pseudometric `ρ` on `X`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PseudometricSpec {
    /// `ρ(x, y) = [x_e ≠ y_e]`
    CoordinateE,
    /// `ρ'(x, y) = Σ_{n=1}^{m} 2^{-n} ρ(s_n x, s_n y)` over the group enumeration.
    WeightedWord(usize),
}

impl PseudometricSpec {
    pub fn depth(&self) -> usize {
        match self {
            PseudometricSpec::CoordinateE => 1,
            PseudometricSpec::WeightedWord(m) => *m,
        }
    }

    pub fn validate(&self) -> Result<(), ShiftError> {
        match self {
            PseudometricSpec::WeightedWord(0) => Err(ShiftError::ZeroDepth),
            _ => Ok(()),
        }
    }

    /// `(s_n, weight_n)`: the metric compares `x_{s_n⁻¹}` with `y_{s_n⁻¹}`.
    pub fn terms(&self, group: &GroupSpec) -> Vec<(GroupElement, f64)> {
        match self {
            PseudometricSpec::CoordinateE => vec![(group.identity(), 1.0)],
            PseudometricSpec::WeightedWord(m) => group
                .enumerate(*m)
                .into_iter()
                .enumerate()
                .map(|(n, s)| (s, 0.5f64.powi(n as i32 + 1)))
                .collect(),
        }
    }
}

/// `ρ` from windows listing `x_{s_n⁻¹}` for `n = 1, 2, ...`.
pub fn rho(x: &[u8], y: &[u8], spec: PseudometricSpec) -> Result<f64, ShiftError> {
    spec.validate()?;
    let need = spec.depth();
    let got = x.len().min(y.len());
    if got < need {
        return Err(ShiftError::InsufficientWindow { need, got });
    }
    Ok(match spec {
        PseudometricSpec::CoordinateE => (x[0] != y[0]) as u8 as f64,
        PseudometricSpec::WeightedWord(m) => (0..m)
            .filter(|&n| x[n] != y[n])
            .map(|n| 0.5f64.powi(n as i32 + 1))
            .sum(),
    })
}

/// `φ_β(i)_t = β(σ(t⁻¹) i)`.
pub fn pullback_symbol(beta: &Labeling, i: usize, t: &GroupElement) -> Result<u8, ShiftError> {
    let sigma = beta.sofic();
    let t_inv = sigma.group().inverse(t)?;
    Ok(beta.symbols[sigma.apply(&t_inv, i)?])
}

/// Permutation tables of `σ(w⁻¹)` for each `w` of a window.
pub(crate) fn inverse_tables(sigma: &SoficMap, window: &FiniteSubset) -> Result<Vec<Vec<usize>>, ShiftError> {
    window
        .iter()
        .map(|w| Ok(sigma.table(&sigma.group().inverse(w)?)?))
        .collect()
}

pub fn eval_observable<T: Real>(f: &Observable<T>, beta: &Labeling, i: usize) -> Result<T, ShiftError> {
    let tables = inverse_tables(beta.sofic(), f.window())?;
    let pattern: Vec<u8> = tables.iter().map(|p| beta.symbols[p[i]]).collect();
    Ok(f.value(&pattern))
}

/// `Σ_i f(φ_β(i))`.
pub fn birkhoff_sum<T: Real>(f: &Observable<T>, beta: &Labeling) -> Result<T, ShiftError> {
    let tables = inverse_tables(beta.sofic(), f.window())?;
    let mut pattern = vec![0u8; tables.len()];
    let mut acc = T::zero();
    for i in 0..beta.d() {
        for (x, p) in pattern.iter_mut().zip(&tables) {
            *x = beta.symbols[p[i]];
        }
        acc = acc + f.value(&pattern);
    }
    Ok(acc)
}

fn pointwise_distances(psi: &Labeling, phi: &Labeling, spec: PseudometricSpec) -> Result<Vec<f64>, ShiftError> {
    spec.validate()?;
    if psi.d() != phi.d() {
        return Err(ShiftError::LabelingLength {
            expected: psi.d(),
            got: phi.d(),
        });
    }
    if !Arc::ptr_eq(&psi.sofic, &phi.sofic) && psi.sofic != phi.sofic {
        return Err(ShiftError::DifferentSofic);
    }
    let sigma = psi.sofic();
    let terms = spec.terms(sigma.group());
    // coordinate s_n⁻¹ of φ(i) is β(σ(s_n) i)
    let tables: Vec<Vec<usize>> = terms.iter().map(|(s, _)| sigma.table(s)).collect::<Result<_, _>>()?;
    Ok((0..psi.d())
        .map(|i| {
            terms
                .iter()
                .zip(&tables)
                .filter(|(_, p)| psi.symbols[p[i]] != phi.symbols[p[i]])
                .map(|((_, w), _)| *w)
                .sum()
        })
        .collect())
}

/// `ρ_2(ψ, φ) = (1/d Σ_i ρ(ψ(i), φ(i))²)^{1/2}`
pub fn rho2(psi: &Labeling, phi: &Labeling, spec: PseudometricSpec) -> Result<f64, ShiftError> {
    let dist = pointwise_distances(psi, phi, spec)?;
    Ok((dist.iter().map(|x| x * x).sum::<f64>() / dist.len() as f64).sqrt())
}

/// `ρ_∞(ψ, φ) = max_i ρ(ψ(i), φ(i))`
pub fn rho_inf(psi: &Labeling, phi: &Labeling, spec: PseudometricSpec) -> Result<f64, ShiftError> {
    Ok(pointwise_distances(psi, phi, spec)?.into_iter().fold(0.0, f64::max))
}

/// `ρ_{J,∞}(ψ, φ) = ρ_∞(ψ|_J, φ|_J)`
pub fn rho_j_inf(psi: &Labeling, phi: &Labeling, j: &[usize], spec: PseudometricSpec) -> Result<f64, ShiftError> {
    if j.is_empty() {
        return Err(ShiftError::EmptyIndexSet);
    }
    let dist = pointwise_distances(psi, phi, spec)?;
    j.iter()
        .map(|&i| {
            dist.get(i).copied().ok_or(ShiftError::LabelingLength {
                expected: dist.len(),
                got: i + 1,
            })
        })
        .try_fold(0.0, |m, x| Ok(f64::max(m, x?)))
}

/// Indices `i` at which some forbidden pattern occurs in `φ_β(i)`.
pub fn violating_indices(beta: &Labeling, x: &Subshift) -> Result<Vec<usize>, ShiftError> {
    let sigma = beta.sofic();
    let tables: Vec<Vec<Vec<usize>>> = x
        .forbidden()
        .iter()
        .map(|p| inverse_tables(sigma, &p.shape))
        .collect::<Result<_, _>>()?;
    Ok((0..beta.d())
        .filter(|&i| {
            x.forbidden().iter().zip(&tables).any(|(p, t)| {
                t.iter()
                    .zip(&p.symbols)
                    .all(|(perm, &a)| beta.symbols[perm[i]] == a)
            })
        })
        .collect())
}

pub fn violation_fraction(beta: &Labeling, x: &Subshift) -> Result<f64, ShiftError> {
    Ok(violating_indices(beta, x)?.len() as f64 / beta.d() as f64)
}
