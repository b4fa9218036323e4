use super::{int_offset, window_patterns, MeasureError};
use crate::scalar::Real;
use crate::shiftspace::{decode_pattern, Observable, Subshift};

/// Stationary Markov measure on `A^ℤ` with transition matrix `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovMeasure<T> {
    p: Vec<Vec<T>>,
    pi: Vec<T>,
}

/// Solves `π P = π`, `Σ π = 1` by elimination; `None` if the system is singular.
fn solve_stationary<T: Real>(p: &[Vec<T>]) -> Option<Vec<T>> {
    let k = p.len();
    // rows: (Pᵀ − I) with the last equation replaced by Σ π = 1
    let mut a: Vec<Vec<T>> = (0..k)
        .map(|i| {
            let mut row: Vec<T> = (0..k).map(|j| p[j][i] - if i == j { T::one() } else { T::zero() }).collect();
            row.push(T::zero());
            row
        })
        .collect();
    a[k - 1] = vec![T::one(); k + 1];
    for col in 0..k {
        let pivot = (col..k).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())?;
        if a[pivot][col].abs() < T::lit(1e-12) {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..k {
            if r != col {
                let factor = a[r][col] / a[col][col];
                if factor != T::zero() {
                    for c in col..=k {
                        let v = a[col][c];
                        a[r][c] = a[r][c] - factor * v;
                    }
                }
            }
        }
    }
    Some((0..k).map(|i| (a[i][k] / a[i][i]).max(T::zero())).collect())
}

/// Cesàro average of `u P^n` from the uniform start; a stationary vector for
/// reducible chains, where elimination has no unique answer.
fn cesaro_stationary<T: Real>(p: &[Vec<T>]) -> Vec<T> {
    let k = p.len();
    let mut v = vec![T::one() / T::from_count(k); k];
    let mut avg = vec![T::zero(); k];
    let steps = 20_000;
    for _ in 0..steps {
        for (a, &x) in avg.iter_mut().zip(&v) {
            *a = *a + x;
        }
        v = (0..k).map(|j| (0..k).map(|i| v[i] * p[i][j]).sum()).collect();
    }
    avg.into_iter().map(|a| a / T::from_count(steps)).collect()
}

impl<T: Real> MarkovMeasure<T> {
    pub fn new(p: Vec<Vec<T>>) -> Result<Self, MeasureError> {
        let k = p.len();
        if k == 0 {
            return Err(MeasureError::InvalidTransition("empty matrix".into()));
        }
        for (i, row) in p.iter().enumerate() {
            if row.len() != k {
                return Err(MeasureError::InvalidTransition(format!("row {i} has {} entries", row.len())));
            }
            if row.iter().any(|x| !x.is_finite() || *x < T::zero()) {
                return Err(MeasureError::InvalidTransition(format!("row {i} has a negative or non-finite entry")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > T::lit(1e-10) {
                return Err(MeasureError::InvalidTransition(format!("row {i} sums to {s}")));
            }
        }
        let mut pi = solve_stationary(&p).unwrap_or_else(|| cesaro_stationary(&p));
        let total: T = pi.iter().copied().sum();
        pi.iter_mut().for_each(|x| *x = *x / total);
        Ok(Self { p, pi })
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }

    pub fn transition(&self) -> &[Vec<T>] {
        &self.p
    }

    pub fn stationary(&self) -> &[T] {
        &self.pi
    }

    /// `max_j |(πP)_j − π_j|`.
    pub fn stationarity_defect(&self) -> T {
        let k = self.k();
        (0..k)
            .map(|j| ((0..k).map(|i| self.pi[i] * self.p[i][j]).sum::<T>() - self.pi[j]).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// `−Σ_u π_u Σ_v P_uv log P_uv`.
    pub fn entropy_rate(&self) -> T {
        self.pi
            .iter()
            .zip(&self.p)
            .map(|(&w, row)| w * row.iter().filter(|&&x| x > T::zero()).fold(T::zero(), |h, &x| h - x * x.ln()))
            .sum()
    }

    /// Probability of the word `w` at consecutive sites.
    pub fn word(&self, w: &[u8]) -> T {
        let Some((&first, rest)) = w.split_first() else { return T::one() };
        let mut prob = self.pi[first as usize];
        let mut prev = first as usize;
        for &a in rest {
            prob = prob * self.p[prev][a as usize];
            prev = a as usize;
        }
        prob
    }

    pub fn integrate(&self, f: &Observable<T>) -> Result<T, MeasureError> {
        if f.k() != self.k() {
            return Err(MeasureError::AlphabetMismatch(self.k(), f.k()));
        }
        let offsets: Vec<i64> = f.window().iter().map(int_offset).collect::<Result<_, _>>()?;
        let lo = offsets[0];
        let span = (offsets[offsets.len() - 1] - lo + 1) as usize;
        let count = window_patterns(self.k(), span)?;
        let mut sub = vec![0u8; offsets.len()];
        let mut total = T::zero();
        for i in 0..count {
            let w = decode_pattern(i, self.k(), span);
            let prob = self.word(&w);
            if prob == T::zero() {
                continue;
            }
            for (s, &o) in sub.iter_mut().zip(&offsets) {
                *s = w[(o - lo) as usize];
            }
            total = total + prob * f.value(&sub);
        }
        Ok(total)
    }

    /// Whether the measure gives no mass to forbidden patterns; only patterns
    /// on one site or two adjacent sites are supported.
    pub fn supported_on(&self, x: &Subshift) -> Result<bool, MeasureError> {
        if x.k() != self.k() {
            return Err(MeasureError::AlphabetMismatch(self.k(), x.k()));
        }
        for pat in x.forbidden() {
            let offsets: Vec<i64> = pat.shape.iter().map(int_offset).collect::<Result<_, _>>()?;
            let span = offsets[offsets.len() - 1] - offsets[0] + 1;
            if span > 2 || offsets.len() != span as usize {
                return Err(MeasureError::Unsupported(
                    "Markov support checks need forbidden patterns on at most two adjacent sites".into(),
                ));
            }
            if self.word(&pat.symbols) > T::zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{FiniteSubset, GroupElement, GroupSpec};

    #[test]
    fn golden_mean_parry_measure() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let q = 1.0 / (phi * phi);
        let m = MarkovMeasure::new(vec![vec![1.0 - q, q], vec![1.0, 0.0]]).unwrap();
        assert!((m.entropy_rate() - phi.ln()).abs() < 1e-14);
        assert!(m.stationarity_defect() < 1e-15);
        assert!(m.supported_on(&Subshift::golden_mean()).unwrap());
        let g = GroupSpec::IntegerLine;
        let ones = Observable::symbol_indicator(&g, 2, 1).unwrap();
        assert!((m.integrate(&ones).unwrap() - m.stationary()[1]).abs() < 1e-16);
        let pair = FiniteSubset::new([GroupElement::Int(0), GroupElement::Int(1)]);
        let eleven = Observable::indicator(2, pair, &[1, 1]).unwrap();
        assert_eq!(m.integrate(&eleven).unwrap(), 0.0);
    }

    #[test]
    fn iid_chain_matches_product() {
        let m = MarkovMeasure::<f64>::new(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        assert!((m.stationary()[0] - 0.3).abs() < 1e-15);
        assert!((m.entropy_rate() - crate::measure::shannon_entropy(&[0.3, 0.7])).abs() < 1e-15);
        let gap = FiniteSubset::new([GroupElement::Int(-2), GroupElement::Int(1)]);
        let f = Observable::indicator(2, gap, &[1, 0]).unwrap();
        assert!((m.integrate(&f).unwrap() - 0.21).abs() < 1e-15);
        assert!(!m.supported_on(&Subshift::golden_mean()).unwrap());
    }

    #[test]
    fn reducible_and_invalid_chains() {
        let m = MarkovMeasure::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(m.stationarity_defect() < 1e-15);
        assert!((m.stationary().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(m.entropy_rate(), 0.0);
        assert!(MarkovMeasure::new(vec![vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(MarkovMeasure::<f64>::new(vec![]).is_err());
        let periodic = MarkovMeasure::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(periodic.stationary(), &[0.5, 0.5]);
    }
}
