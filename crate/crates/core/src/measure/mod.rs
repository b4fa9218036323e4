//! Invariant measures on subshifts: product and Markov families, sofic
//! measure entropy, the variational principle as a numeric check, and the
//! pressure-domination test for signed cylinder measures.

mod domination;
mod entropy;
mod markov;
mod product;
mod variational;

use thiserror::Error;

use crate::group::{GroupElement, GroupError, GroupSpec};
use crate::pressure::PressureError;
use crate::scalar::Real;
use crate::shiftspace::{Observable, ShiftError, Subshift};

pub use domination::{
    pressure_domination_check, site_dependent_product, CellOracle, DominationReport, DominationRow, PressureOracle,
    SignedCylinderMeasure, TransferOracle,
};
pub use entropy::{
    default_test_family, entropy_cell, map_mu_membership, EmpiricalMeasure, EntropyEstimate,
    EntropyMethod,
};
pub use markov::MarkovMeasure;
pub use product::{cylinder_probability, gibbs_measure, shannon_entropy, ProductMeasure};
pub use variational::{
    random_measure, variational_gap, variational_objective, variational_search, Family, GapReport,
    SearchResult,
};

/// Tolerance on probability vectors summing to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Largest number of window patterns summed when integrating.
const MAX_WINDOW_PATTERNS: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Pressure(#[from] PressureError),
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("invalid transition matrix: {0}")]
    InvalidTransition(String),
    #[error("alphabet sizes differ: measure {0}, observable {1}")]
    AlphabetMismatch(usize, usize),
    #[error("window of {0} patterns is too large to integrate")]
    WindowTooLarge(usize),
    #[error("observable window is not inside the measure's window")]
    OutsideWindow,
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid {0}")]
    InvalidParameter(&'static str),
    #[error("non-finite value: {0}")]
    NotFinite(&'static str),
}

/// A shift-invariant probability measure from one of the parametric families.
#[derive(Clone, Debug, PartialEq)]
pub enum Measure<T> {
    Product(ProductMeasure<T>),
    Markov(MarkovMeasure<T>),
}

impl<T: Real> Measure<T> {
    pub fn k(&self) -> usize {
        match self {
            Measure::Product(m) => m.k(),
            Measure::Markov(m) => m.k(),
        }
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, group: &GroupSpec, f: &Observable<T>) -> Result<T, MeasureError> {
        match self {
            Measure::Product(m) => m.integrate(f),
            Measure::Markov(m) => {
                if *group != GroupSpec::IntegerLine {
                    return Err(MeasureError::Unsupported("Markov measures live on the integers".into()));
                }
                m.integrate(f)
            }
        }
    }

    /// Measure-theoretic entropy: `H(p)` or the entropy rate.
    pub fn entropy(&self) -> T {
        match self {
            Measure::Product(m) => shannon_entropy(m.p()),
            Measure::Markov(m) => m.entropy_rate(),
        }
    }

    pub fn supported_on(&self, x: &Subshift) -> Result<bool, MeasureError> {
        match self {
            Measure::Product(m) => Ok(m.supported_on(x)),
            Measure::Markov(m) => m.supported_on(x),
        }
    }
}

fn window_patterns(k: usize, len: usize) -> Result<usize, MeasureError> {
    u32::try_from(len)
        .ok()
        .and_then(|l| k.checked_pow(l))
        .filter(|&n| n <= MAX_WINDOW_PATTERNS)
        .ok_or(MeasureError::WindowTooLarge(usize::MAX))
}

fn int_offset(g: &GroupElement) -> Result<i64, MeasureError> {
    match g {
        GroupElement::Int(n) => Ok(*n),
        other => Err(MeasureError::Unsupported(format!("expected an integer offset, got {other}"))),
    }
}
