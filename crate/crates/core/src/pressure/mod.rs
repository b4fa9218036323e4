//! Map spaces, separated sets, partition sums and the pressure tower, plus
//! classical amenable pressure and transfer-matrix oracles for the integers.

mod cell;
mod classical;
mod map_space;
mod properties;
mod schedule;
mod transfer;

use std::sync::Arc;

use thiserror::Error;

use crate::group::{FiniteSubset, GroupError};
use crate::shiftspace::{PseudometricSpec, ShiftError};
use crate::sofic::{SoficError, SoficMap};

pub use cell::{evaluate_cell, CellMethod, PressureEstimate};
pub use classical::{
    amenable_pressure, classical_cover_sum, classical_separated_sum, AmenablePressure,
};
pub use map_space::{
    enumerate_map_space, good_index_set, greedy_separated, log_partition_sum, map_membership,
    map_space_members, Enumeration,
};
pub use properties::{cocycle_check, proposition_battery, PropertyCheck, PropertyReport};
pub use schedule::{
    run_schedule, CellOutcome, CellSettings, Schedule, ScheduleCell, ScheduleReport, SliceSummary,
    SoficFamily, TailRule,
};
pub use transfer::{TransferMatrix, DEFAULT_MAX_STATES};

/// Default cap on search-tree nodes visited by one enumeration.
pub const DEFAULT_NODE_BUDGET: u64 = 1 << 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PressureError {
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Sofic(#[from] SoficError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("the finite set F must be nonempty")]
    EmptyF,
    #[error("model mode requires the coordinate-at-identity pseudometric")]
    ModelRequiresCoordinateE,
    #[error("alphabet sizes differ: subshift {0}, observable {1}")]
    AlphabetMismatch(usize, usize),
    #[error("enumeration budget of {budget} nodes exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("partition sum over an empty set")]
    EmptyPartitionSet,
    #[error("schedule has no cells")]
    EmptySchedule,
    #[error("schedule slice {0}: d must be strictly increasing")]
    ScheduleOrder(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("transfer matrix would need {states} states (limit {limit})")]
    MatrixTooLarge { states: usize, limit: usize },
}

/// How membership in `Map(ρ, F, δ, σ)` is decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Pruned search over labelings using mismatch counts (coordinate metric only).
    Model,
    /// Brute force over all labelings, testing `max_s ρ_2(α_s∘φ, φ∘σ_s) < δ` verbatim.
    Generic,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Model => "model",
            Mode::Generic => "generic",
        }
    }
}

/// Parameters of one `Map(ρ, F, δ, σ)` space and its `ε`-separated sets.
#[derive(Clone, Debug, PartialEq)]
pub struct MapSpaceQuery {
    pub sigma: Arc<SoficMap>,
    pub f_set: FiniteSubset,
    pub delta: f64,
    pub eps: f64,
    pub metric: PseudometricSpec,
    pub mode: Mode,
    /// Admissible fraction of indices whose pullback point shows a forbidden
    /// pattern; `None` means `δ²`.
    pub sft_tolerance: Option<f64>,
    pub budget: u64,
}

impl MapSpaceQuery {
    pub fn new(sigma: Arc<SoficMap>, f_set: FiniteSubset, delta: f64, eps: f64) -> Self {
        Self {
            sigma,
            f_set,
            delta,
            eps,
            metric: PseudometricSpec::CoordinateE,
            mode: Mode::Model,
            sft_tolerance: None,
            budget: DEFAULT_NODE_BUDGET,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_metric(mut self, metric: PseudometricSpec) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_sft_tolerance(mut self, tol: f64) -> Self {
        self.sft_tolerance = Some(tol);
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_f_set(mut self, f_set: FiniteSubset) -> Self {
        self.f_set = f_set;
        self
    }

    pub fn sft_tolerance(&self) -> f64 {
        // a fraction above 1 admits everything, so the default saturates there
        self.sft_tolerance.unwrap_or((self.delta * self.delta).min(1.0))
    }

    pub fn d(&self) -> usize {
        self.sigma.d()
    }

    pub fn validate(&self) -> Result<(), PressureError> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(PressureError::InvalidParameter {
                name: "delta",
                value: self.delta,
            });
        }
        if !(self.eps > 0.0) || self.eps.is_nan() {
            return Err(PressureError::InvalidParameter {
                name: "eps",
                value: self.eps,
            });
        }
        let tol = self.sft_tolerance();
        if !(0.0..=1.0).contains(&tol) {
            return Err(PressureError::InvalidParameter {
                name: "sft_tolerance",
                value: tol,
            });
        }
        if self.f_set.is_empty() {
            return Err(PressureError::EmptyF);
        }
        self.metric.validate()?;
        if self.mode == Mode::Model && self.metric != PseudometricSpec::CoordinateE {
            return Err(PressureError::ModelRequiresCoordinateE);
        }
        for s in &self.f_set {
            self.sigma.group().validate(s)?;
        }
        Ok(())
    }

    /// `ρ_2` test for a per-index distance profile: `sqrt(Σ ρ² / d) < δ`.
    pub(crate) fn rho2_below_delta(&self, sum_of_squares: f64) -> bool {
        (sum_of_squares / self.d() as f64).sqrt() < self.delta
    }

    /// Largest mismatch count `m` for which the coordinate-metric `ρ_2` is below `δ`.
    pub(crate) fn max_mismatches(&self) -> usize {
        (0..=self.d()).take_while(|&m| self.rho2_below_delta(m as f64)).last().unwrap_or(0)
    }

    pub(crate) fn violations_allowed(&self, v: usize) -> bool {
        v as f64 / self.d() as f64 <= self.sft_tolerance()
    }

    pub(crate) fn max_violations(&self) -> usize {
        (0..=self.d()).take_while(|&v| self.violations_allowed(v)).last().unwrap_or(0)
    }
}
