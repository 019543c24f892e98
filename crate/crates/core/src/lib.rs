//! Demographic corrections for expected death counts in clinical-trial study groups.
//!
//! Two effects are modelled:
//!
//! - the exponential growth of adult death rates with age, which makes the
//!   within-bracket age distribution of the oldest participants matter far
//!   more than the median age ([`gompertz`], [`cohort`]);
//! - mortality differentials by marital status ([`bertillon`]).
//!
//! [`randomization`] measures how well simple 1:1 randomization balances the
//! relevant demographics, [`regression`] fits county death rates against the
//! share of people aged 65+ and against median age, and [`ingest`] reads and
//! writes the CSV formats used by the command-line tool.
//!
//! ```
//! use cohort_bias_core::{cohort::CohortSpec, gompertz::GompertzParams};
//!
//! let spec = CohortSpec::from_bins(&[(31, 54, 1021.0), (55, 64, 1708.0), (65, 69, 1087.0), (70, 75, 686.0)])?;
//! let projection = GompertzParams::default().project(&spec.expand(), 6)?;
//! assert!((projection.grand_total() - 601.0).abs() < 3.0);
//! # Ok::<(), cohort_bias_core::Error>(())
//! ```
// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bertillon;
pub mod cohort;
pub mod error;
pub mod gompertz;
pub mod ingest;
pub mod randomization;
pub mod regression;

pub use bertillon::{MaritalComposition, MaritalStatus, RelativeRiskTable, Sex};
pub use cohort::{AgeBin, CohortSpec, SensitivityBounds, WithinBinPolicy};
pub use error::{Error, ParseReport, Rejection, Result};
pub use gompertz::{AgeRoster, Calibration, DeathProjection, GompertzParams};
pub use randomization::{DispersionReport, Metric, Subject};
pub use regression::{CountyRecord, FitOutcome, FitResult, PredictorContrast};
