//! Multi-sample scan statistics for intervals where the mean shifts in a
//! subset of aligned sequences: window scores, an analytic tail
//! approximation with threshold inversion, Monte Carlo harnesses and a
//! normalization pipeline.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod matrix;
pub mod order;
pub mod preprocess;
pub mod quadrature;
pub mod scan;
pub mod significance;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use matrix::IntensityMatrix;
pub use preprocess::{preprocess, PreprocessReport};
pub use scan::{detect, scan_max, Detection, Interval, ScanConfig};
pub use significance::{pvalue, threshold, PValue, ScanGeometry, TailForm, TiltState};
pub use simulate::{OuConfig, ParameterMode, PlantSpec, PlantedTruth, PowerSetting, SignPolicy};
pub use stats::{EstimationMode, SequenceBaseline, StatisticKind, StatisticSpec, WindowScore};
