use super::{window_patterns, MeasureError, PROBABILITY_TOLERANCE};
use crate::group::FiniteSubset;
use crate::scalar::{log_sum_exp, Real};
use crate::shiftspace::{decode_pattern, Observable, Subshift};

/// Bernoulli measure `μ^G` with one-site marginal `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductMeasure<T> {
    p: Vec<T>,
}

impl<T: Real> ProductMeasure<T> {
    pub fn new(p: Vec<T>) -> Result<Self, MeasureError> {
        if p.is_empty() {
            return Err(MeasureError::InvalidProbability("empty vector".into()));
        }
        if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < T::zero()) {
            return Err(MeasureError::InvalidProbability(format!("entry {x}")));
        }
        let total: T = p.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(PROBABILITY_TOLERANCE).max(T::epsilon() * T::lit(16.0)) {
            return Err(MeasureError::InvalidProbability(format!("sums to {total}")));
        }
        Ok(Self { p })
    }

    pub fn uniform(k: usize) -> Result<Self, MeasureError> {
        Self::new(vec![T::one() / T::from_count(k); k])
    }

    pub fn point_mass(k: usize, symbol: usize) -> Result<Self, MeasureError> {
        Self::new((0..k).map(|i| if i == symbol { T::one() } else { T::zero() }).collect())
    }

    pub fn p(&self) -> &[T] {
        &self.p
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }

    /// `μ^G(A_{W,a}) = Π_w p(a_w)`.
    pub fn cylinder(&self, pattern: &[u8]) -> T {
        pattern.iter().fold(T::one(), |acc, &a| acc * self.p[a as usize])
    }

    /// `∫ f dμ^G`: the cylinder-weighted sum of the table.
    pub fn integrate(&self, f: &Observable<T>) -> Result<T, MeasureError> {
        if f.k() != self.k() {
            return Err(MeasureError::AlphabetMismatch(self.k(), f.k()));
        }
        let n = f.window().len();
        let count = window_patterns(self.k(), n)?;
        Ok((0..count)
            .map(|i| self.cylinder(&decode_pattern(i, self.k(), n)) * f.table()[i])
            .sum())
    }

    /// Symbols carrying positive mass.
    pub fn support(&self) -> Vec<u8> {
        (0..self.k()).filter(|&i| self.p[i] > T::zero()).map(|i| i as u8).collect()
    }

    /// Whether `μ^G(X) = 1`: no forbidden pattern is built from support symbols.
    pub fn supported_on(&self, x: &Subshift) -> bool {
        x.k() == self.k() && x.forbidden().iter().all(|p| p.symbols.iter().any(|&a| self.p[a as usize] == T::zero()))
    }
}

/// `Π_{s∈F} μ(a_s)`.
pub fn cylinder_probability<T: Real>(mu: &ProductMeasure<T>, f_set: &FiniteSubset, pattern: &[u8]) -> Result<T, MeasureError> {
    if pattern.len() != f_set.len() {
        return Err(MeasureError::Shift(crate::shiftspace::ShiftError::PatternLength {
            expected: f_set.len(),
            got: pattern.len(),
        }));
    }
    if let Some(&a) = pattern.iter().find(|&&a| a as usize >= mu.k()) {
        return Err(MeasureError::Shift(crate::shiftspace::ShiftError::SymbolOutOfRange { symbol: a, k: mu.k() }));
    }
    Ok(mu.cylinder(pattern))
}

/// `H(p) = −Σ p_i log p_i` with `0 log 0 = 0`.
pub fn shannon_entropy<T: Real>(p: &[T]) -> T {
    p.iter()
        .filter(|&&x| x > T::zero())
        .fold(T::zero(), |h, &x| h - x * x.ln())
}

/// `μ(i) = exp(a_i) / Σ_j exp(a_j)`.
pub fn gibbs_measure<T: Real>(a: &[T]) -> Result<ProductMeasure<T>, MeasureError> {
    if a.is_empty() || a.iter().any(|x| !x.is_finite()) {
        return Err(MeasureError::NotFinite("Gibbs coefficients"));
    }
    let z = log_sum_exp(a.iter().copied());
    let p: Vec<T> = a.iter().map(|&x| (x - z).exp()).collect();
    // renormalize once so the vector sums to one to rounding
    let total: T = p.iter().copied().sum();
    ProductMeasure::new(p.into_iter().map(|x| x / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupElement, GroupSpec};
    use proptest::prelude::*;

    #[test]
    fn cylinders() {
        let half = ProductMeasure::<f64>::uniform(2).unwrap();
        let f3 = FiniteSubset::new((0..3).map(GroupElement::Int));
        assert_eq!(cylinder_probability(&half, &f3, &[0, 1, 1]).unwrap(), 0.125);
        let mu = ProductMeasure::<f64>::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let f2 = FiniteSubset::new((0..2).map(GroupElement::Int));
        assert!((cylinder_probability(&mu, &f2, &[1, 1]).unwrap() - 4.0 / 9.0).abs() < 1e-16);
        let f1 = FiniteSubset::singleton(GroupElement::Int(0));
        assert_eq!(cylinder_probability(&mu, &f1, &[0]).unwrap(), 1.0 / 3.0);
        assert!(cylinder_probability(&mu, &f1, &[0, 1]).is_err());
        assert!(ProductMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(ProductMeasure::new(vec![-0.5, 1.5]).is_err());
    }

    #[test]
    fn entropy_values() {
        assert!((shannon_entropy(&[0.5, 0.5]) - 2f64.ln()).abs() < 1e-16);
        assert_eq!(shannon_entropy(&[1.0, 0.0]), 0.0);
        let h = shannon_entropy(&[1.0 / 3.0, 2.0 / 3.0]);
        assert!((h - (3f64.ln() - 2.0 / 3.0 * 2f64.ln())).abs() < 1e-15);
        assert!((h - 0.6365142).abs() < 1e-7);
    }

    #[test]
    fn gibbs_examples() {
        assert_eq!(gibbs_measure(&[0.0, 0.0]).unwrap().p(), &[0.5, 0.5]);
        let g = gibbs_measure(&[0.0, 2f64.ln()]).unwrap();
        assert!((g.p()[0] - 1.0 / 3.0).abs() < 1e-15 && (g.p()[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn integrals_and_support() {
        let g = GroupSpec::IntegerLine;
        let mu = ProductMeasure::<f64>::new(vec![0.25, 0.75]).unwrap();
        let pair = FiniteSubset::new([GroupElement::Int(0), GroupElement::Int(1)]);
        let f = Observable::indicator(2, pair, &[1, 1]).unwrap();
        assert!((mu.integrate(&f).unwrap() - 0.5625).abs() < 1e-16);
        let a = Observable::single_site(&g, vec![2.0, -1.0]).unwrap();
        assert!((mu.integrate(&a).unwrap() - (0.5 - 0.75)).abs() < 1e-16);
        assert!(!mu.supported_on(&Subshift::golden_mean()));
        assert!(ProductMeasure::<f64>::point_mass(2, 0).unwrap().supported_on(&Subshift::golden_mean()));
    }

    proptest! {
        #[test]
        fn gibbs_identity(a in proptest::collection::vec(-5.0f64..5.0, 1..6), c in -10.0f64..10.0) {
            let mu = gibbs_measure(&a).unwrap();
            let lhs = shannon_entropy(mu.p()) + mu.p().iter().zip(&a).map(|(p, x)| p * x).sum::<f64>();
            let rhs = log_sum_exp(a.iter().copied());
            prop_assert!((lhs - rhs).abs() < 1e-12);
            let shifted: Vec<f64> = a.iter().map(|x| x + c).collect();
            let nu = gibbs_measure(&shifted).unwrap();
            for (x, y) in mu.p().iter().zip(nu.p()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
