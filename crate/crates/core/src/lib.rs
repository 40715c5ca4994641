//! Uplink massive-MIMO detection behind spatial Σ∆ few-bit ADC arrays.
//!
//! The numerical core (channel, front-end, moments, detectors) is generic
//! over `f32`/`f64` through [`scalar::Scalar`]; the experiment harness runs
//! in `f64`. Aliases for the `f64` instantiations live at the crate root.

// `!(x > 0)` style guards are deliberate: they reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod constellation;
pub mod detectors;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod linalg;
pub mod moments;
pub mod scalar;
pub mod special;
pub mod validation;

pub use channel::{AngularSector, ArrayGeometry, ColumnNormalization, MutualCouplingParams, NoiseModel};
pub use constellation::{ConstellationSpec, Modulation};
pub use detectors::{DetectionResult, DetectorOptions, LmmseDetector, SdVbSolver, TailDivisor, VbState};
pub use error::{Error, Result};
pub use frontend::{LinearizedModel, QuantizerSpec, SdOrder, SigmaDeltaCapture};
pub use harness::{ExperimentConfig, SerCurve};
pub use linalg::CMatrix;
pub use scalar::Scalar;

pub type C64 = num_complex::Complex<f64>;
pub type Matrix = CMatrix<f64>;
pub type Geometry = ArrayGeometry<f64>;
pub type Sector = AngularSector<f64>;
pub type Noise = NoiseModel<f64>;
pub type Constellation = ConstellationSpec<f64>;
pub type Quantizer = QuantizerSpec<f64>;
pub type Capture = SigmaDeltaCapture<f64>;
pub type Linearized = LinearizedModel<f64>;
pub type Options = DetectorOptions<f64>;
pub type Detection = DetectionResult<f64>;
pub type State = VbState<f64>;
