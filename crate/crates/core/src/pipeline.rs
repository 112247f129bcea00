//! End-to-end measurement: contour, long axis, scanline placement, AMM
//! extraction, landmark detection and conversion to centimetres.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::amm::{amm_row_to_bmode, extract_amm, AmmImage, EchoStudy, Phase};
use crate::detectors::{
    check_increasing, generate_weak_labels, AmmDetection, AmmDetector, DetectionContext, SweepConfig,
};
use crate::error::{Error, Result, Stage};
use crate::geometry::{
    centroid, default_half_length, fit_long_axis, place_scanline, ContourEstimate, Line2D, LongAxisFitConfig, LvidPair,
    Point2D, ScanLine,
};
use crate::heatmap::LossConfig;
use crate::scalar::Scalar;

/// IVS, LVID and LVPW lengths (cm) at one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet<T> {
    pub phase: Phase,
    pub ivs: T,
    pub lvid: T,
    pub lvpw: T,
    /// The four landmarks in B-mode pixel coordinates.
    pub landmarks: [Point2D<T>; 4],
    /// AMM rows of the landmarks; absent for ground truth defined directly in B-mode.
    pub landmark_rows: Option<[T; 4]>,
    pub scanline: ScanLine<T>,
}

impl<T: Scalar> MeasurementSet<T> {
    pub fn lengths(&self) -> [T; 3] {
        [self.ivs, self.lvid, self.lvpw]
    }
}

/// Converts detected rows to physical lengths along the AMM's scanline.
pub fn measurements_from_detection<T: Scalar>(
    d: &AmmDetection<T>,
    amm: &AmmImage<T>,
    pixel_spacing: T,
    phase: Phase,
) -> Result<MeasurementSet<T>> {
    check_increasing(&d.positions)?;
    let s = d.positions;
    let scale = amm.sample_spacing * pixel_spacing;
    let lengths = [(s[1] - s[0]) * scale, (s[2] - s[1]) * scale, (s[3] - s[2]) * scale];
    if lengths.iter().any(|l| !(*l > T::zero())) {
        return Err(Error::InvalidArgument(format!("non-positive structure length in {lengths:?}")));
    }
    let mut landmarks = [Point2D::origin(); 4];
    for (slot, row) in landmarks.iter_mut().zip(s) {
        *slot = amm_row_to_bmode(amm, row)?;
    }
    Ok(MeasurementSet {
        phase,
        ivs: lengths[0],
        lvid: lengths[1],
        lvpw: lengths[2],
        landmarks,
        landmark_rows: Some(s),
        scanline: amm.scanline,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig<T> {
    /// Samples along the scanline (AMM height `P`).
    pub samples: usize,
    pub fit: LongAxisFitConfig<T>,
    pub sweep: SweepConfig<T>,
    /// Scanline half length in pixels; `None` uses 1.2x the basal LVID.
    pub half_length: Option<T>,
    pub loss: LossConfig<T>,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            samples: 64,
            fit: LongAxisFitConfig::default(),
            sweep: SweepConfig::default(),
            half_length: None,
            loss: LossConfig::default(),
        }
    }
}

/// Source of the B-mode contour for a study phase.
pub trait ContourSource<T: Scalar>: Send + Sync {
    fn id(&self) -> String;
    fn contour(&self, study: &EchoStudy<T>, phase: Phase) -> Result<ContourEstimate<T>>;
}

/// Precomputed contours (ground truth, or loaded from a file).
#[derive(Debug, Clone)]
pub struct FixedContour<T> {
    pub id: String,
    pub ed: Option<ContourEstimate<T>>,
    pub es: Option<ContourEstimate<T>>,
}

impl<T: Scalar> ContourSource<T> for FixedContour<T> {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn contour(&self, _study: &EchoStudy<T>, phase: Phase) -> Result<ContourEstimate<T>> {
        let c = match phase {
            Phase::Ed => &self.ed,
            Phase::Es => &self.es,
        };
        c.clone().ok_or_else(|| Error::InvalidArgument(format!("no contour for phase {phase}")))
    }
}

/// Contour from a scanline sweep seeded by annotated basal pairs.
#[derive(Clone)]
pub struct SweepContourSource<T> {
    pub basal_ed: [LvidPair<T>; 2],
    pub basal_es: [LvidPair<T>; 2],
    pub detector: Arc<dyn AmmDetector<T>>,
    pub sweep: SweepConfig<T>,
    pub samples: usize,
}

impl<T: Scalar> ContourSource<T> for SweepContourSource<T> {
    fn id(&self) -> String {
        format!("sweep(n_lv={},fraction={},{})", self.sweep.n_lv, self.sweep.fraction, self.detector.id())
    }

    fn contour(&self, study: &EchoStudy<T>, phase: Phase) -> Result<ContourEstimate<T>> {
        let basal = match phase {
            Phase::Ed => self.basal_ed,
            Phase::Es => self.basal_es,
        };
        generate_weak_labels(study, phase, self.detector.as_ref(), &self.sweep, basal, self.samples).map(|l| l.contour)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance<T> {
    pub config: PipelineConfig<T>,
    pub contour_source: Option<String>,
    pub detector: String,
    pub manual_override: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct PipelineResult<T> {
    pub phase: Phase,
    pub contour: Option<ContourEstimate<T>>,
    pub long_axis: Option<Line2D<T>>,
    pub scanline: ScanLine<T>,
    pub amm: AmmImage<T>,
    pub detection: AmmDetection<T>,
    pub measurements: MeasurementSet<T>,
    pub provenance: Provenance<T>,
}

/// Automatic run: the scanline is placed from the contour.
pub fn run_auto<T: Scalar>(
    study: &EchoStudy<T>,
    phase: Phase,
    contour_source: &dyn ContourSource<T>,
    detector: &dyn AmmDetector<T>,
    cfg: &PipelineConfig<T>,
) -> Result<PipelineResult<T>> {
    study.anchor(phase)?;
    let contour =
        contour_source.contour(study, phase).and_then(|c| c.validate().map(|_| c)).map_err(|e| e.at(Stage::Contour))?;

    let midpoints = contour.valid_lvid_midpoints();
    let mut axis = fit_long_axis(&midpoints, &cfg.fit).map_err(|e| e.at(Stage::LongAxis))?;
    // Point the axis from the base toward the swept (apical) midpoints.
    let basal = centroid(&contour.basal_points()).expect("four points");
    let apical = centroid(&midpoints).expect("fit needs >= 2 points");
    if (apical - basal).dot(axis.direction) < T::zero() {
        axis = axis.reversed();
    }

    let half = cfg.half_length.unwrap_or_else(|| default_half_length(&contour));
    let sl = place_scanline(&contour, &axis, half, study.bounds()).map_err(|e| e.at(Stage::Placement))?;

    let mut result = measure_along(study, phase, &sl, detector, cfg)?;
    result.contour = Some(contour);
    result.long_axis = Some(axis);
    result.provenance.contour_source = Some(contour_source.id());
    Ok(result)
}

/// Run with a user-supplied scanline; the perpendicularity constraint is waived.
pub fn run_with_scanline<T: Scalar>(
    study: &EchoStudy<T>,
    phase: Phase,
    sl: &ScanLine<T>,
    detector: &dyn AmmDetector<T>,
    cfg: &PipelineConfig<T>,
) -> Result<PipelineResult<T>> {
    study.anchor(phase)?;
    sl.validate().map_err(|e| e.at(Stage::Placement))?;
    let mut result = measure_along(study, phase, sl, detector, cfg)?;
    result.provenance.manual_override = true;
    Ok(result)
}

fn measure_along<T: Scalar>(
    study: &EchoStudy<T>,
    phase: Phase,
    sl: &ScanLine<T>,
    detector: &dyn AmmDetector<T>,
    cfg: &PipelineConfig<T>,
) -> Result<PipelineResult<T>> {
    let anchor = study.anchor(phase)?;
    let amm = extract_amm(study, sl, cfg.samples).map_err(|e| e.at(Stage::Extraction))?;
    let ctx = DetectionContext { phase, anchor_column: anchor };
    let detection = detector.detect(&amm, &ctx).map_err(|e| e.at(Stage::Detection))?;
    let measurements = measurements_from_detection(&detection, &amm, study.pixel_spacing, phase)
        .map_err(|e| e.at(Stage::Measurement))?;
    Ok(PipelineResult {
        phase,
        contour: None,
        long_axis: None,
        scanline: *sl,
        amm,
        detection,
        measurements,
        provenance: Provenance { config: *cfg, contour_source: None, detector: detector.id(), manual_override: false },
    })
}
