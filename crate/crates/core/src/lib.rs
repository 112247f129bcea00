//! Left-ventricle linear measurement along a contour-aware virtual scanline.
//!
//! The pipeline stages are:
//!
//! 1. **Contour**: septal/posterior landmark pairs swept along the LV plus two
//!    basal pairs ([`geometry::ContourEstimate`]).
//! 2. **Long axis**: ridge line fit through the swept pair midpoints.
//! 3. **Placement**: scanline through the basal centroid, perpendicular to the axis.
//! 4. **AMM**: the B-mode video sampled along the scanline over time.
//! 5. **Detection**: four landmark rows on the AMM anchor column.
//! 6. **Measurement**: IVS, LVID and LVPW in centimetres.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the CLI and service use.

// Negated comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amm;
pub mod detectors;
pub mod error;
pub mod geometry;
pub mod heatmap;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod scalar;
pub mod tensor;

pub use amm::Phase;
pub use error::{Error, Result, Stage};
pub use scalar::Scalar;

pub type Point = geometry::Point2D<f64>;
pub type Line = geometry::Line2D<f64>;
pub type Scanline = geometry::ScanLine<f64>;
pub type Contour = geometry::ContourEstimate<f64>;
pub type Pair = geometry::LvidPair<f64>;
pub type Study = amm::EchoStudy<f64>;
pub type Amm = amm::AmmImage<f64>;
pub type Heatmap = heatmap::Heatmap<f64>;
pub type Detection = detectors::AmmDetection<f64>;
pub type WeakLabel = detectors::WeakContourLabel<f64>;
pub type Phantom = phantom::PhantomConfig<f64>;
pub type Truth = phantom::PhantomTruth<f64>;
pub type Measurements = pipeline::MeasurementSet<f64>;
pub type Config = pipeline::PipelineConfig<f64>;
pub type Outcome = pipeline::PipelineResult<f64>;
pub type Record = metrics::EvalRecord<f64>;
pub type Report = metrics::EvalReport<f64>;
