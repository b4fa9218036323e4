//! Sofic pressure and entropy estimation over finitely generated groups.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the command line uses.

pub mod group;
pub mod measure;
pub mod pressure;
pub mod scalar;
pub mod shiftspace;
pub mod sofic;

pub use group::{FiniteGroupTable, FiniteSubset, GroupElement, GroupError, GroupSpec, Letter};
pub use measure::{Measure, MeasureError};
pub use pressure::{MapSpaceQuery, Mode, PressureError};
pub use scalar::{ln_biguint, log_sum_exp, LogSumExp, Real};
pub use shiftspace::{Labeling, Observable, Pattern, PseudometricSpec, ShiftError, Subshift};
pub use sofic::{defect_report, good_set, quasi_tile, DefectReport, QuasiTiling, SoficError, SoficMap};

pub type Observable64 = Observable<f64>;
pub type Observable32 = Observable<f32>;
pub type PressureEstimate64 = pressure::PressureEstimate<f64>;
pub type PressureEstimate32 = pressure::PressureEstimate<f32>;
pub type ScheduleReport64 = pressure::ScheduleReport<f64>;
pub type EntropyEstimate64 = measure::EntropyEstimate<f64>;
pub type Measure64 = Measure<f64>;
pub type ProductMeasure64 = measure::ProductMeasure<f64>;
pub type MarkovMeasure64 = measure::MarkovMeasure<f64>;
pub type TransferMatrix64 = pressure::TransferMatrix<f64>;
