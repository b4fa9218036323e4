use super::{window_patterns, MarkovMeasure, MeasureError, ProductMeasure};
use crate::group::{FiniteSubset, GroupElement, GroupSpec};
use crate::pressure::{evaluate_cell, CellMethod, MapSpaceQuery, TransferMatrix};
use crate::scalar::Real;
use crate::shiftspace::{decode_pattern, Observable, Subshift};

/// A finitely additive set function on the cylinders of one finite window,
/// given by its values on the atoms (patterns on the whole window).
#[derive(Clone, Debug, PartialEq)]
pub struct SignedCylinderMeasure<T> {
    k: usize,
    window: FiniteSubset,
    /// indexed like observable tables
    weights: Vec<T>,
}

impl<T: Real> SignedCylinderMeasure<T> {
    pub fn new(k: usize, window: FiniteSubset, weights: Vec<T>) -> Result<Self, MeasureError> {
        let n = window_patterns(k, window.len())?;
        if weights.len() != n {
            return Err(MeasureError::Shift(crate::shiftspace::ShiftError::TableSize {
                expected: n,
                got: weights.len(),
            }));
        }
        Ok(Self { k, window, weights })
    }

    pub fn from_product(mu: &ProductMeasure<T>, window: FiniteSubset) -> Result<Self, MeasureError> {
        let n = window_patterns(mu.k(), window.len())?;
        let weights = (0..n).map(|i| mu.cylinder(&decode_pattern(i, mu.k(), window.len()))).collect();
        Self::new(mu.k(), window, weights)
    }

    /// Marginal of a Markov measure on an integer window.
    pub fn from_markov(mu: &MarkovMeasure<T>, window: FiniteSubset) -> Result<Self, MeasureError> {
        let n = window_patterns(mu.k(), window.len())?;
        let weights = (0..n)
            .map(|i| mu.integrate(&Observable::indicator(mu.k(), window.clone(), &decode_pattern(i, mu.k(), window.len()))?))
            .collect::<Result<_, MeasureError>>()?;
        Self::new(mu.k(), window, weights)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn window(&self) -> &FiniteSubset {
        &self.window
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            k: self.k,
            window: self.window.clone(),
            weights: self.weights.iter().map(|&w| w * c).collect(),
        }
    }

    pub fn total_mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn min_weight(&self) -> T {
        self.weights.iter().fold(T::infinity(), |m, &w| m.min(w))
    }

    /// `μ` of the cylinder `{x : x|_B = pattern}`, `B ⊆ window`.
    pub fn cylinder(&self, b: &FiniteSubset, pattern: &[u8]) -> Result<T, MeasureError> {
        let ind = Observable::indicator(self.k, b.clone(), pattern)?;
        self.integrate(&ind)
    }

    /// `∫ f dμ` for `f` depending only on coordinates in the window.
    pub fn integrate(&self, f: &Observable<T>) -> Result<T, MeasureError> {
        if f.k() != self.k {
            return Err(MeasureError::AlphabetMismatch(self.k, f.k()));
        }
        if !f.window().is_subset(&self.window) {
            return Err(MeasureError::OutsideWindow);
        }
        let ext = f.extend_to(&self.window)?;
        Ok(self.weights.iter().zip(ext.table()).map(|(&w, &v)| w * v).sum())
    }

    /// `max |μ(α_s A) − μ(A)|` over cylinders `A` on subsets `B` of the window
    /// with `sB` also inside it; `α_s` carries the cylinder on `B` to the same
    /// pattern on `sB`.
    pub fn invariance_defect(&self, group: &GroupSpec, shifts: &[GroupElement]) -> Result<T, MeasureError> {
        let mut worst = T::zero();
        let elems = self.window.as_slice();
        for s in shifts {
            let movable: Vec<&GroupElement> = elems
                .iter()
                .filter(|w| group.multiply(s, w).map(|sw| self.window.contains(&sw)).unwrap_or(false))
                .collect();
            if movable.len() > 16 {
                return Err(MeasureError::WindowTooLarge(1 << movable.len().min(60)));
            }
            for mask in 1u32..(1 << movable.len()) {
                let b: Vec<GroupElement> = (0..movable.len()).filter(|i| mask & (1 << i) != 0).map(|i| movable[i].clone()).collect();
                let b_set = FiniteSubset::new(b.iter().cloned());
                let sb: Vec<GroupElement> = b.iter().map(|w| group.multiply(s, w)).collect::<Result<_, _>>()?;
                let sb_set = FiniteSubset::new(sb.iter().cloned());
                // pattern order follows the sorted window; map b's order into sb's
                let perm: Vec<usize> = sb.iter().map(|x| sb_set.as_slice().binary_search(x).unwrap()).collect();
                let n = window_patterns(self.k, b.len())?;
                for code in 0..n {
                    let a = decode_pattern(code, self.k, b.len());
                    let mut moved = vec![0u8; b.len()];
                    for (i, &j) in perm.iter().enumerate() {
                        moved[j] = a[i];
                    }
                    let here = self.cylinder(&b_set, &a)?;
                    let there = self.cylinder(&sb_set, &moved)?;
                    worst = worst.max((there - here).abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Something that can price an observable: `P(f)` or a finite-scale estimate.
pub trait PressureOracle<T> {
    fn pressure(&self, f: &Observable<T>) -> Result<T, MeasureError>;
}

impl<T, F> PressureOracle<T> for F
where
    F: Fn(&Observable<T>) -> Result<T, MeasureError>,
{
    fn pressure(&self, f: &Observable<T>) -> Result<T, MeasureError> {
        self(f)
    }
}

/// Exact pressure over the integers: `log λ_max` of the weighted transfer matrix.
#[derive(Clone, Debug)]
pub struct TransferOracle {
    pub x: Subshift,
    pub max_states: usize,
}

impl<T: Real> PressureOracle<T> for TransferOracle {
    fn pressure(&self, f: &Observable<T>) -> Result<T, MeasureError> {
        Ok(TransferMatrix::new(&self.x, Some(f), self.max_states)?.log_spectral_radius())
    }
}

/// The normalized value of one sofic pressure cell.
#[derive(Clone, Debug)]
pub struct CellOracle {
    pub query: MapSpaceQuery,
    pub x: Subshift,
    pub method: CellMethod,
}

impl<T: Real> PressureOracle<T> for CellOracle {
    fn pressure(&self, f: &Observable<T>) -> Result<T, MeasureError> {
        Ok(evaluate_cell(&self.query, &self.x, f, self.method)?.normalized)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominationRow<T> {
    pub f_id: String,
    pub integral: T,
    pub pressure: T,
    /// `pressure − integral`
    pub margin: T,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominationReport<T> {
    pub rows: Vec<DominationRow<T>>,
    pub total_mass: T,
    pub min_weight: T,
    pub invariance_defect: T,
    pub tolerance: T,
}

impl<T: Real> DominationReport<T> {
    pub fn violations(&self) -> impl Iterator<Item = &DominationRow<T>> {
        self.rows.iter().filter(|r| !r.passed)
    }

    /// Nonnegative, total mass one, and shift invariant, to tolerance.
    pub fn diagnostics_pass(&self) -> bool {
        self.min_weight >= -self.tolerance
            && (self.total_mass - T::one()).abs() <= self.tolerance
            && self.invariance_defect <= self.tolerance
    }

    /// Every tested inequality holds. Passing is evidence, not proof, that the
    /// measure is an invariant probability measure.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed) && self.diagnostics_pass()
    }
}

/// Tests `∫ h dμ ≤ P(h)` on the constants `±n`, the multiples `±n·f` of each
/// test function, and the coboundaries `±n(f∘α_s − f)` for generators `s`
/// and their inverses, `n` in `scales`; also reports mass, sign and shift
/// invariance of `μ` directly.
pub fn pressure_domination_check<T: Real>(
    mu: &SignedCylinderMeasure<T>,
    tests: &[Observable<T>],
    group: &GroupSpec,
    oracle: &dyn PressureOracle<T>,
    scales: &[u32],
    tolerance: T,
) -> Result<DominationReport<T>, MeasureError> {
    let mut rows = Vec::new();
    let mut push = |f_id: String, h: &Observable<T>| -> Result<(), MeasureError> {
        let integral = mu.integrate(h)?;
        let pressure = oracle.pressure(h)?;
        let margin = pressure - integral;
        rows.push(DominationRow {
            f_id,
            integral,
            pressure,
            margin,
            passed: margin >= -tolerance,
        });
        Ok(())
    };
    let mut shifts: Vec<GroupElement> = Vec::new();
    for s in group.generators() {
        let inv = group.inverse(&s)?;
        shifts.push(s);
        if !shifts.contains(&inv) {
            shifts.push(inv);
        }
    }
    for &n in scales {
        for sign in [1i64, -1] {
            let c = T::lit((sign * n as i64) as f64);
            push(format!("const n={}", sign * n as i64), &Observable::constant(group, mu.k(), c)?)?;
            for (i, f) in tests.iter().enumerate() {
                push(format!("f{i} n={}", sign * n as i64), &f.scale(c))?;
                for s in &shifts {
                    let moved = f.translate(group, s)?;
                    if !moved.window().is_subset(mu.window()) {
                        continue;
                    }
                    let cob = moved.sub(f)?.scale(c);
                    push(format!("cocycle f{i} s={s} n={}", sign * n as i64), &cob)?;
                }
            }
        }
    }
    Ok(DominationReport {
        rows,
        total_mass: mu.total_mass(),
        min_weight: mu.min_weight(),
        invariance_defect: mu.invariance_defect(group, &shifts)?,
        tolerance,
    })
}

/// Atom weights of a product measure on `window` with a different one-site
/// marginal at each window position; shift invariant only when they agree.
pub fn site_dependent_product<T: Real>(window: FiniteSubset, marginals: &[Vec<T>]) -> Result<SignedCylinderMeasure<T>, MeasureError> {
    let k = marginals.first().map_or(0, |m| m.len());
    if marginals.len() != window.len() || marginals.iter().any(|m| m.len() != k) {
        return Err(MeasureError::InvalidProbability("one marginal per window site is required".into()));
    }
    let n = window_patterns(k, window.len())?;
    let weights = (0..n)
        .map(|i| {
            decode_pattern(i, k, window.len())
                .iter()
                .zip(marginals)
                .fold(T::one(), |acc, (&a, m)| acc * m[a as usize])
        })
        .collect();
    SignedCylinderMeasure::new(k, window, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pressure::DEFAULT_MAX_STATES;

    fn ball() -> FiniteSubset {
        GroupSpec::IntegerLine.ball(1)
    }

    fn oracle(k: usize) -> TransferOracle {
        TransferOracle {
            x: Subshift::full(k).unwrap(),
            max_states: DEFAULT_MAX_STATES,
        }
    }

    fn tests(k: usize) -> Vec<Observable<f64>> {
        let g = GroupSpec::IntegerLine;
        (0..k as u8).map(|a| Observable::symbol_indicator(&g, k, a).unwrap()).collect()
    }

    #[test]
    fn product_measures_pass() {
        let g = GroupSpec::IntegerLine;
        for p in [vec![0.5, 0.5], vec![0.2, 0.8], vec![0.1, 0.3, 0.6]] {
            let k = p.len();
            let mu = SignedCylinderMeasure::from_product(&ProductMeasure::new(p).unwrap(), ball()).unwrap();
            let r = pressure_domination_check(&mu, &tests(k), &g, &oracle(k), &[1, 2, 4, 8], 1e-9).unwrap();
            assert!(r.passed(), "{:?}", r.violations().collect::<Vec<_>>());
            assert!(r.invariance_defect <= 1e-15);
        }
        let half = SignedCylinderMeasure::<f64>::from_product(&ProductMeasure::uniform(2).unwrap(), ball()).unwrap();
        assert_eq!(half.invariance_defect(&g, &[GroupElement::Int(1)]).unwrap(), 0.0);
    }

    #[test]
    fn excess_mass_is_caught_by_constants() {
        let g = GroupSpec::IntegerLine;
        let mu = SignedCylinderMeasure::from_product(&ProductMeasure::uniform(2).unwrap(), ball()).unwrap().scaled(1.2);
        let r = pressure_domination_check(&mu, &tests(2), &g, &oracle(2), &[1, 2, 4, 8], 1e-9).unwrap();
        assert!(!r.passed());
        assert!(r.violations().any(|v| v.f_id == "const n=8"));
        assert!(r.violations().all(|v| !v.f_id.starts_with("cocycle")));
    }

    #[test]
    fn non_invariant_measure_is_caught_by_cocycles() {
        let g = GroupSpec::IntegerLine;
        let mu = site_dependent_product::<f64>(ball(), &[vec![0.5, 0.5], vec![0.3, 0.7], vec![0.5, 0.5]]).unwrap();
        assert!((mu.total_mass() - 1.0).abs() < 1e-15);
        let r = pressure_domination_check(&mu, &tests(2), &g, &oracle(2), &[1, 2, 4, 8], 1e-9).unwrap();
        assert!((r.invariance_defect - 0.2).abs() < 1e-12);
        assert!(r.violations().any(|v| v.f_id.starts_with("cocycle")));
        assert!(!r.passed());
    }

    #[test]
    fn markov_marginals_are_invariant() {
        let g = GroupSpec::IntegerLine;
        let m = MarkovMeasure::new(vec![vec![0.6, 0.4], vec![1.0, 0.0]]).unwrap();
        let mu = SignedCylinderMeasure::from_markov(&m, ball()).unwrap();
        let x = Subshift::golden_mean();
        let o = TransferOracle { x, max_states: 64 };
        let r = pressure_domination_check(&mu, &tests(2), &g, &o, &[1, 3, 9], 1e-9).unwrap();
        assert!(r.passed(), "{:?}", r.violations().collect::<Vec<_>>());
    }
}
