//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for literals and tolerances.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Streaming `log Σ exp(x_i)` with a running max shift and Neumaier compensation.
///
/// The result depends on push order; callers that need reproducibility push in a
/// canonical order and merge partial accumulators in a fixed order.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp<T> {
    max: T,
    sum: T,
    comp: T,
    count: u64,
}

impl<T: Real> Default for LogSumExp<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> LogSumExp<T> {
    pub fn new() -> Self {
        Self {
            max: T::neg_infinity(),
            sum: T::zero(),
            comp: T::zero(),
            count: 0,
        }
    }

    fn add_scaled(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp = self.comp + ((self.sum - t) + v);
        } else {
            self.comp = self.comp + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn push(&mut self, x: T) {
        self.count += 1;
        if x == T::neg_infinity() {
            return;
        }
        if x > self.max {
            let scale = (self.max - x).exp();
            self.sum = self.sum * scale;
            self.comp = self.comp * scale;
            self.max = x;
            self.add_scaled(T::one());
        } else {
            self.add_scaled((x - self.max).exp());
        }
    }

    /// Merge another accumulator as if its terms had been pushed after ours.
    pub fn merge(&mut self, other: &Self) {
        let count = self.count + other.count;
        if other.max == T::neg_infinity() {
            self.count = count;
            return;
        }
        if self.max == T::neg_infinity() {
            *self = *other;
            self.count = count;
            return;
        }
        let (mut hi, lo) = if other.max > self.max {
            (*other, *self)
        } else {
            (*self, *other)
        };
        let scale = (lo.max - hi.max).exp();
        hi.add_scaled(lo.sum * scale);
        hi.comp = hi.comp + lo.comp * scale;
        hi.count = count;
        *self = hi;
    }

    /// Number of pushed terms, including `-inf` ones.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// `log Σ exp(x_i)`, or `-inf` when nothing finite was pushed.
    pub fn value(&self) -> T {
        if self.max == T::neg_infinity() {
            return T::neg_infinity();
        }
        self.max + (self.sum + self.comp).ln()
    }
}

/// One-shot `log Σ exp(x_i)`.
pub fn log_sum_exp<T: Real, I: IntoIterator<Item = T>>(xs: I) -> T {
    let mut acc = LogSumExp::new();
    for x in xs {
        acc.push(x);
    }
    acc.value()
}

/// Natural log of a big count; `-inf` for zero.
pub fn ln_biguint(n: &num_bigint::BigUint) -> f64 {
    let bits = n.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    let shift = bits.saturating_sub(63);
    let top = (n >> shift).to_u64().unwrap_or(u64::MAX) as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}
