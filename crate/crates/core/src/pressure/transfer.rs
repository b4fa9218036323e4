use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::PressureError;
use crate::group::{FiniteSubset, GroupElement};
use crate::scalar::{LogSumExp, Real};
use crate::shiftspace::{decode_pattern, Observable, Subshift};

/// Default cap on the number of transfer-matrix states.
pub const DEFAULT_MAX_STATES: usize = 512;

pub(crate) fn int_offsets(window: &FiniteSubset) -> Result<Vec<i64>, PressureError> {
    window
        .iter()
        .map(|g| match g {
            GroupElement::Int(n) => Ok(*n),
            other => Err(PressureError::Unsupported(format!(
                "transfer matrices need integer offsets, got {other}"
            ))),
        })
        .collect()
}

/// Pattern anchored by its largest offset: `rel` are offsets minus the maximum.
#[derive(Clone, Debug)]
struct Anchored {
    rel: Vec<usize>,
    symbols: Vec<u8>,
}

impl Anchored {
    fn new(offsets: &[i64], symbols: Vec<u8>) -> Self {
        let top = *offsets.iter().max().unwrap();
        Self {
            rel: offsets.iter().map(|&o| (top - o) as usize).collect(),
            symbols,
        }
    }

    fn span(&self) -> usize {
        self.rel.iter().max().unwrap() + 1
    }

    fn occurs_ending_at(&self, word: &[u8], end: usize) -> bool {
        self.rel.len() > 0
            && end + 1 >= self.span()
            && self.rel.iter().zip(&self.symbols).all(|(&r, &a)| word[end - r] == a)
    }
}

/// Weighted transfer matrix for a subshift of finite type over the integers.
///
/// States are admissible words of length `L`, edges are admissible blocks of
/// length `L + 1`, and an edge carries the observable evaluated with its window
/// anchored at the last block position. Closed walks of length `d` correspond
/// to `d`-periodic points, so `trace(T^d)` is the partition sum over them.
#[derive(Clone, Debug)]
pub struct TransferMatrix<T> {
    k: usize,
    l: usize,
    states: Vec<Vec<u8>>,
    /// `log` edge weights, `-inf` where no edge
    log_w: Vec<Vec<T>>,
    f_rel: Option<Vec<usize>>,
    forbidden: Vec<Anchored>,
}

fn normalize<T: Real>(m: &mut [Vec<T>]) -> T {
    let top = m.iter().flatten().fold(T::zero(), |a, &b| a.max(b));
    if top > T::zero() {
        m.iter_mut().flatten().for_each(|x| *x = *x / top);
        top.ln()
    } else {
        T::neg_infinity()
    }
}

fn matmul<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = a.len();
    let mut out = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for (j, &aij) in a[i].iter().enumerate() {
            if aij == T::zero() {
                continue;
            }
            for (o, &bjk) in out[i].iter_mut().zip(&b[j]) {
                *o = *o + aij * bjk;
            }
        }
    }
    out
}

impl<T: Real> TransferMatrix<T> {
    pub fn new(x: &Subshift, f: Option<&Observable<T>>, max_states: usize) -> Result<Self, PressureError> {
        let k = x.k();
        if let Some(f) = f {
            if f.k() != k {
                return Err(PressureError::AlphabetMismatch(k, f.k()));
            }
        }
        let forbidden: Vec<Anchored> = x
            .forbidden()
            .iter()
            .map(|p| Ok(Anchored::new(&int_offsets(&p.shape)?, p.symbols.clone())))
            .collect::<Result<_, PressureError>>()?;
        let f_rel = match f {
            Some(f) => Some(Anchored::new(&int_offsets(f.window())?, vec![0; f.window().len()]).rel),
            None => None,
        };
        let f_span = f_rel.as_ref().map_or(1, |r| r.iter().max().unwrap() + 1);
        let p_span = forbidden.iter().map(|p| p.span()).max().unwrap_or(1);
        let l = 1usize.max(f_span - 1).max(p_span - 1);
        let raw = u32::try_from(l)
            .ok()
            .and_then(|l| k.checked_pow(l))
            .filter(|&n| n <= max_states.max(k))
            .ok_or(PressureError::MatrixTooLarge {
                states: usize::MAX,
                limit: max_states,
            })?;
        let mut tm = Self {
            k,
            l,
            states: Vec::new(),
            log_w: Vec::new(),
            f_rel,
            forbidden,
        };
        tm.states = (0..raw)
            .map(|n| decode_pattern(n, k, l))
            .filter(|w| (0..l).all(|end| !tm.forbidden.iter().any(|p| p.occurs_ending_at(w, end))))
            .collect();
        if tm.states.len() > max_states {
            return Err(PressureError::MatrixTooLarge {
                states: tm.states.len(),
                limit: max_states,
            });
        }
        let index: std::collections::HashMap<&[u8], usize> =
            tm.states.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
        let n = tm.states.len();
        let mut log_w = vec![vec![T::neg_infinity(); n]; n];
        let mut block = vec![0u8; l + 1];
        for (i, u) in tm.states.iter().enumerate() {
            block[..l].copy_from_slice(u);
            for c in 0..k as u8 {
                block[l] = c;
                if tm.forbidden.iter().any(|p| p.occurs_ending_at(&block, l)) {
                    continue;
                }
                let Some(&j) = index.get(&block[1..]) else { continue };
                log_w[i][j] = match f {
                    Some(f) => tm.energy_ending_at(f, &block, l),
                    None => T::zero(),
                };
            }
        }
        tm.log_w = log_w;
        Ok(tm)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Word length `L` of the states.
    pub fn block_length(&self) -> usize {
        self.l
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn log_weights(&self) -> &[Vec<T>] {
        &self.log_w
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.log_w[i][j] > T::neg_infinity()
    }

    /// Observable value with its largest window offset placed at `word[end]`.
    pub(crate) fn energy_ending_at(&self, f: &Observable<T>, word: &[u8], end: usize) -> T {
        let rel = self.f_rel.as_ref().expect("observable offsets");
        let idx = rel.iter().fold(0usize, |acc, &r| acc * self.k + word[end - r] as usize);
        f.table()[idx]
    }

    pub(crate) fn state_index(&self, word: &[u8]) -> Option<usize> {
        self.states.iter().position(|s| s.as_slice() == word)
    }

    /// States lying on a bi-infinite path.
    pub fn essential(&self) -> Vec<bool> {
        let n = self.states.len();
        let mut alive = vec![true; n];
        loop {
            let mut changed = false;
            for i in 0..n {
                if !alive[i] {
                    continue;
                }
                let out = (0..n).any(|j| alive[j] && self.has_edge(i, j));
                let inc = (0..n).any(|j| alive[j] && self.has_edge(j, i));
                if !out || !inc {
                    alive[i] = false;
                    changed = true;
                }
            }
            if !changed {
                return alive;
            }
        }
    }

    fn scaled(&self) -> (T, Vec<Vec<T>>) {
        let c = self.log_w.iter().flatten().fold(T::neg_infinity(), |a, &b| a.max(b));
        let m = self
            .log_w
            .iter()
            .map(|row| row.iter().map(|&w| if w > T::neg_infinity() { (w - c).exp() } else { T::zero() }).collect())
            .collect();
        (c, m)
    }

    /// `log trace(T^d)`, `-inf` when there is no closed walk of length `d`.
    pub fn log_trace_power(&self, d: usize) -> T {
        let (c, base) = self.scaled();
        if c == T::neg_infinity() || d == 0 {
            return if d == 0 { T::from_count(self.states.len()).ln() } else { c };
        }
        let n = self.states.len();
        let mut acc: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect();
        let mut acc_log = T::zero();
        let mut sq = base;
        let mut sq_log = normalize(&mut sq);
        let mut e = d;
        loop {
            if e & 1 == 1 {
                acc = matmul(&acc, &sq);
                acc_log = acc_log + sq_log + normalize(&mut acc);
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            sq = matmul(&sq, &sq);
            sq_log = sq_log + sq_log + normalize(&mut sq);
        }
        let mut tr = LogSumExp::new();
        for i in 0..n {
            if acc[i][i] > T::zero() {
                tr.push(acc[i][i].ln());
            }
        }
        c * T::from_count(d) + acc_log + tr.value()
    }

    /// Number of closed walks of length `d` in the underlying graph, exactly.
    pub fn count_trace_power(&self, d: usize) -> BigUint {
        let n = self.states.len();
        let adj: Vec<Vec<BigUint>> = (0..n)
            .map(|i| (0..n).map(|j| if self.has_edge(i, j) { BigUint::one() } else { BigUint::zero() }).collect())
            .collect();
        let mul = |a: &Vec<Vec<BigUint>>, b: &Vec<Vec<BigUint>>| -> Vec<Vec<BigUint>> {
            let mut out = vec![vec![BigUint::zero(); n]; n];
            for i in 0..n {
                for j in 0..n {
                    if a[i][j].is_zero() {
                        continue;
                    }
                    for l in 0..n {
                        if !b[j][l].is_zero() {
                            out[i][l] += &a[i][j] * &b[j][l];
                        }
                    }
                }
            }
            out
        };
        let mut acc: Vec<Vec<BigUint>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { BigUint::one() } else { BigUint::zero() }).collect()).collect();
        let mut sq = adj;
        let mut e = d;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul(&acc, &sq);
            }
            e >>= 1;
            if e > 0 {
                sq = mul(&sq, &sq);
            }
        }
        (0..n).map(|i| acc[i][i].clone()).sum()
    }

    /// `log` of the spectral radius, from `‖T^N‖^{1/N}` with `N = 2^60`.
    pub fn log_spectral_radius(&self) -> T {
        let (c, mut m) = self.scaled();
        if c == T::neg_infinity() {
            return c;
        }
        let mut log_scale = normalize(&mut m);
        let mut steps = 1.0f64;
        for _ in 0..60 {
            m = matmul(&m, &m);
            let s = normalize(&mut m);
            if s == T::neg_infinity() {
                return s;
            }
            log_scale = log_scale + log_scale + s;
            steps *= 2.0;
        }
        c + log_scale / T::lit(steps)
    }
}
