//! AMM landmark detectors and weak contour-label generation by scanline sweep.
//!
//! A detector returns four ordered rows `s1 < s2 < s3 < s4` along the
//! scanline: IVS top, IVS/LVID boundary, LVID/LVPW boundary, LVPW bottom.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::amm::{amm_row_to_bmode, extract_amm, AmmImage, EchoStudy, Phase};
use crate::error::{Error, Result};
use crate::geometry::{
    centroid, default_half_length, place_scanline, ray_to_bounds, ContourEstimate, ImageBounds, Line2D, LvidPair,
    Point2D, ScanLine,
};
use crate::heatmap::{dsnt, ere, ere_weights, softmax_normalize, Heatmap, LossConfig};
use crate::phantom::{PhantomModel, PhantomTruth};
use crate::scalar::Scalar;
use crate::tensor::read_tensor2;

/// Four landmark rows along a scanline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmmDetection<T> {
    pub positions: [T; 4],
    /// Per-landmark expected radial error, in AMM rows.
    pub confidence: Option<[T; 4]>,
    #[serde(skip_serializing, default = "no_heatmaps")]
    pub heatmaps: Option<Vec<Array2<T>>>,
}

fn no_heatmaps<T>() -> Option<Vec<Array2<T>>> {
    None
}

impl<T: Scalar> AmmDetection<T> {
    pub fn new(positions: [T; 4], confidence: Option<[T; 4]>) -> Result<Self> {
        check_increasing(&positions)?;
        Ok(Self { positions, confidence, heatmaps: None })
    }
}

pub(crate) fn check_increasing<T: Scalar>(positions: &[T; 4]) -> Result<()> {
    let ok = positions.iter().all(|p| p.is_finite()) && positions.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::NonMonotone(positions.iter().map(|p| p.to_f64_lossy()).collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionContext {
    pub phase: Phase,
    /// AMM column (frame index) to read landmarks from.
    pub anchor_column: usize,
}

pub trait AmmDetector<T: Scalar>: Send + Sync {
    fn id(&self) -> String;
    fn detect(&self, amm: &AmmImage<T>, ctx: &DetectionContext) -> Result<AmmDetection<T>>;
}

/// Analytic phantom landmarks plus optional Gaussian noise. Stands in for a
/// trained AMM detector.
#[derive(Debug, Clone)]
pub struct OracleDetector<T> {
    model: PhantomModel<T>,
    /// Landmark noise in B-mode pixels.
    pub noise_sigma: T,
    pub seed: u64,
}

impl<T: Scalar> OracleDetector<T> {
    pub fn new(truth: &PhantomTruth<T>, noise_sigma: T, seed: u64) -> Self {
        Self { model: truth.model(), noise_sigma, seed }
    }
}

impl<T: Scalar> AmmDetector<T> for OracleDetector<T> {
    fn id(&self) -> String {
        format!("oracle(sigma={}px,seed={})", self.noise_sigma, self.seed)
    }

    fn detect(&self, amm: &AmmImage<T>, ctx: &DetectionContext) -> Result<AmmDetection<T>> {
        let last = T::from_usize_lossy(amm.samples().saturating_sub(1));
        let phi = self.model.phase_fraction(ctx.anchor_column);
        let t = self
            .model
            .crossings(&amm.scanline, phi)
            .ok_or_else(|| Error::DetectionFailure("scanline does not cross all four phantom boundaries".into()))?;
        let mut rows = t.map(|t| t * last);
        let mut confidence = None;
        if self.noise_sigma > T::zero() {
            let sigma_rows = self.noise_sigma / amm.sample_spacing;
            let normal =
                Normal::new(0.0, sigma_rows.to_f64_lossy()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for r in rows.iter_mut() {
                *r = (*r + T::lit(normal.sample(&mut rng))).max(T::zero()).min(last);
            }
            rows.sort_by(|a, b| a.partial_cmp(b).expect("finite rows"));
            // E|X| of a zero-mean Gaussian.
            let e = sigma_rows * (T::lit(2.0) / T::PI()).sqrt();
            confidence = Some([e; 4]);
        }
        AmmDetection::new(rows, confidence)
    }
}

/// Oracle detection along the phantom's true scanline.
pub fn detect_oracle<T: Scalar>(
    truth: &PhantomTruth<T>,
    phase: Phase,
    samples: usize,
    noise_sigma: T,
    seed: u64,
) -> Result<AmmDetection<T>> {
    let sl = truth.true_scanline;
    let spacing = sl.length() / T::from_usize_lossy(samples.saturating_sub(1).max(1));
    // Only the scanline geometry matters to the oracle.
    let amm = AmmImage { values: Array2::zeros((samples, 1)), scanline: sl, sample_spacing: spacing };
    let ctx = DetectionContext { phase, anchor_column: truth.config.anchor_frame(phase) };
    OracleDetector::new(truth, noise_sigma, seed).detect(&amm, &ctx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams<T> {
    /// Moving-average window in rows (odd; 1 disables smoothing).
    pub window: usize,
    /// Threshold as a fraction of the profile's dynamic range.
    pub threshold: T,
}

impl<T: Scalar> Default for ProfileParams<T> {
    fn default() -> Self {
        Self { window: 3, threshold: T::lit(0.5) }
    }
}

/// Threshold-crossing detector on one AMM column.
#[derive(Debug, Clone)]
pub struct ProfileDetector<T> {
    pub params: ProfileParams<T>,
}

impl<T: Scalar> Default for ProfileDetector<T> {
    fn default() -> Self {
        Self { params: ProfileParams::default() }
    }
}

impl<T: Scalar> AmmDetector<T> for ProfileDetector<T> {
    fn id(&self) -> String {
        format!("profile(window={},threshold={})", self.params.window, self.params.threshold)
    }

    fn detect(&self, amm: &AmmImage<T>, ctx: &DetectionContext) -> Result<AmmDetection<T>> {
        detect_profile(amm, ctx.anchor_column, &self.params)
    }
}

/// Centered moving average; the window shrinks at the ends.
fn smooth<T: Scalar>(values: &[T], window: usize) -> Vec<T> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().copied().sum::<T>() / T::from_usize_lossy(hi - lo)
        })
        .collect()
}

/// Finds the dark-bright-dark-bright-dark structure of the anchor column and
/// returns its four threshold crossings, linearly interpolated between
/// samples.
pub fn detect_profile<T: Scalar>(
    amm: &AmmImage<T>,
    anchor_column: usize,
    params: &ProfileParams<T>,
) -> Result<AmmDetection<T>> {
    if anchor_column >= amm.frames() {
        return Err(Error::InvalidArgument(format!(
            "anchor column {anchor_column} outside AMM with {} columns",
            amm.frames()
        )));
    }
    if params.window == 0 || params.window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("smoothing window must be odd, got {}", params.window)));
    }
    if !(params.threshold > T::zero() && params.threshold < T::one()) {
        return Err(Error::InvalidArgument(format!("threshold fraction must lie in (0, 1), got {}", params.threshold)));
    }
    let column: Vec<T> = amm.values.column(anchor_column).to_vec();
    let profile = smooth(&column, params.window);
    let (lo, hi) = profile.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !(hi > lo) {
        return Err(Error::DetectionFailure("flat intensity profile".into()));
    }
    let thr = params.threshold * (hi - lo) + lo;

    let mut crossings = Vec::new();
    let mut rising = Vec::new();
    for i in 0..profile.len() - 1 {
        let (a, b) = (profile[i], profile[i + 1]);
        let (above_a, above_b) = (a >= thr, b >= thr);
        if above_a != above_b {
            crossings.push(T::from_usize_lossy(i) + (thr - a) / (b - a));
            rising.push(above_b);
        }
    }
    if crossings.len() != 4 {
        return Err(Error::DetectionFailure(format!("expected 4 threshold crossings, found {}", crossings.len())));
    }
    if rising != [true, false, true, false] {
        return Err(Error::DetectionFailure("profile does not show wall-cavity-wall structure".into()));
    }
    AmmDetection::new([crossings[0], crossings[1], crossings[2], crossings[3]], None)
}

/// Landmark rows from four heatmaps (one per landmark) over the AMM grid.
/// Raw logits are softmax-normalized first.
pub fn detect_from_heatmap_grids<T: Scalar>(grids: Vec<(Array2<T>, bool)>) -> Result<AmmDetection<T>> {
    if grids.len() != 4 {
        return Err(Error::ShapeMismatch { expected: vec![4], actual: vec![grids.len()] });
    }
    let dim = grids[0].0.dim();
    let mut positions = [T::zero(); 4];
    let mut conf = [T::zero(); 4];
    let mut kept = Vec::with_capacity(4);
    for (i, (grid, raw)) in grids.into_iter().enumerate() {
        if grid.dim() != dim {
            return Err(Error::ShapeMismatch { expected: vec![dim.0, dim.1], actual: grid.shape().to_vec() });
        }
        let h = if raw { softmax_normalize(grid.view())? } else { Heatmap::new(grid)? };
        let c = dsnt(&h)?;
        positions[i] = c.y;
        conf[i] = ere(&h, c)?;
        kept.push(h.into_inner());
    }
    let mut d = AmmDetection::new(positions, Some(conf))?;
    d.heatmaps = Some(kept);
    Ok(d)
}

/// Reads four heatmap tensor files and converts them to landmark rows.
pub fn detect_from_heatmaps<T: Scalar>(files: &[PathBuf]) -> Result<AmmDetection<T>> {
    if files.len() != 4 {
        return Err(Error::ShapeMismatch { expected: vec![4], actual: vec![files.len()] });
    }
    let grids =
        files.iter().map(|p| read_tensor2::<T>(p).map(|(g, h)| (g, h.raw_logits))).collect::<Result<Vec<_>>>()?;
    detect_from_heatmap_grids(grids)
}

/// Detector backed by externally produced heatmap files.
#[derive(Debug, Clone)]
pub struct HeatmapFileDetector {
    pub files: Vec<PathBuf>,
}

impl HeatmapFileDetector {
    /// Conventional layout: `<dir>/<phase>_<k>.f32` for `k` in 0..4.
    pub fn in_dir(dir: &Path, phase: Phase) -> Self {
        Self { files: (0..4).map(|k| dir.join(format!("{phase}_{k}.f32"))).collect() }
    }
}

impl<T: Scalar> AmmDetector<T> for HeatmapFileDetector {
    fn id(&self) -> String {
        "heatmap-files".into()
    }

    fn detect(&self, amm: &AmmImage<T>, _ctx: &DetectionContext) -> Result<AmmDetection<T>> {
        let d = detect_from_heatmaps::<T>(&self.files)?;
        let rows = d.heatmaps.as_ref().map(|h| h[0].nrows()).unwrap_or(0);
        if rows != amm.samples() {
            return Err(Error::ShapeMismatch { expected: vec![amm.samples()], actual: vec![rows] });
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig<T> {
    pub n_lv: usize,
    /// Fraction of the basal-to-image-edge distance covered by the sweep.
    pub fraction: T,
}

impl<T: Scalar> Default for SweepConfig<T> {
    fn default() -> Self {
        Self { n_lv: 20, fraction: T::lit(0.6) }
    }
}

impl<T: Scalar> SweepConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_lv == 0 {
            return Err(Error::InvalidArgument("N_LV must be >= 1".into()));
        }
        if !(self.fraction > T::zero() && self.fraction <= T::one()) {
            return Err(Error::InvalidArgument(format!("sweep fraction must lie in (0, 1], got {}", self.fraction)));
        }
        Ok(())
    }

    /// Axial offsets of the swept scanlines: band centres of `n_lv` equal
    /// slices of `fraction * extent`.
    pub fn offsets(&self, extent: T) -> Vec<T> {
        let band = self.fraction * extent;
        let n = T::from_usize_lossy(self.n_lv);
        (0..self.n_lv).map(|k| band * (T::from_usize_lossy(k) + T::lit(0.5)) / n).collect()
    }
}

/// `N_LV` copies of `basal_sl` translated along `axis.direction` (toward the
/// apex) across the configured band.
pub fn sweep_scanlines<T: Scalar>(
    axis: &Line2D<T>,
    basal_sl: &ScanLine<T>,
    sweep: &SweepConfig<T>,
    bounds: ImageBounds,
) -> Result<Vec<ScanLine<T>>> {
    sweep.validate()?;
    let start = basal_sl.midpoint();
    let extent = ray_to_bounds(start, axis.direction, bounds);
    if !(extent > T::zero()) {
        return Err(Error::Placement(
            "sweep band leaves the image: basal scanline midpoint on or outside the border".into(),
        ));
    }
    Ok(sweep.offsets(extent).into_iter().map(|s| basal_sl.translated(axis.direction * s)).collect())
}

/// Long axis implied by two basal LVID pairs: through their centroid,
/// perpendicular to the septum-to-posterior direction, pointing apically.
pub fn axis_from_basal_pairs<T: Scalar>(basal: &[LvidPair<T>; 2]) -> Result<Line2D<T>> {
    let septal = centroid(&[basal[0].septal, basal[1].septal]).expect("two points");
    let posterior = centroid(&[basal[0].posterior, basal[1].posterior]).expect("two points");
    let mid = centroid(&[septal, posterior]).expect("two points");
    Line2D::new(mid, (posterior - septal).perp())
}

/// Contour labels from a scanline sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct WeakContourLabel<T> {
    pub contour: ContourEstimate<T>,
    pub sweep_metadata: Vec<ScanLine<T>>,
    pub source: String,
    /// Failure reason per swept scanline, `None` where detection succeeded.
    pub failures: Vec<Option<String>>,
}

impl<T: Scalar> WeakContourLabel<T> {
    /// ERE-inverse loss weights for every contour point; failed pairs get 0.
    pub fn loss_weights(&self, cfg: &LossConfig<T>) -> Result<Vec<T>> {
        let finite: Vec<T> = self.contour.ere.iter().copied().filter(|e| e.is_finite()).collect();
        let mut weights = ere_weights(&finite, cfg)?.into_iter();
        Ok(self
            .contour
            .ere
            .iter()
            .map(|e| if e.is_finite() { weights.next().expect("one weight per finite ERE") } else { T::zero() })
            .collect())
    }
}

/// Sweeps scanlines from the annotated basal level toward the apex, detects
/// the cavity boundaries on each AMM and back-projects them to B-mode.
pub fn generate_weak_labels<T: Scalar>(
    study: &EchoStudy<T>,
    phase: Phase,
    detector: &dyn AmmDetector<T>,
    sweep: &SweepConfig<T>,
    basal: [LvidPair<T>; 2],
    samples: usize,
) -> Result<WeakContourLabel<T>> {
    let anchor = study.anchor(phase)?;
    let basal_only = ContourEstimate::without_ere(Vec::new(), basal);
    let axis = axis_from_basal_pairs(&basal)?;
    let basal_sl = place_scanline(&basal_only, &axis, default_half_length(&basal_only), study.bounds())?;
    let swept = sweep_scanlines(&axis, &basal_sl, sweep, study.bounds())?;
    let ctx = DetectionContext { phase, anchor_column: anchor };

    let mut pairs = Vec::with_capacity(swept.len());
    let mut eres = Vec::with_capacity(2 * (swept.len() + 2));
    let mut failures = Vec::with_capacity(swept.len());
    for sl in &swept {
        let outcome = extract_amm(study, sl, samples).and_then(|amm| {
            let d = detector.detect(&amm, &ctx)?;
            let septal = amm_row_to_bmode(&amm, d.positions[1])?;
            let posterior = amm_row_to_bmode(&amm, d.positions[2])?;
            let (e1, e2) = match d.confidence {
                Some(c) => (c[1] * amm.sample_spacing, c[2] * amm.sample_spacing),
                None => (T::zero(), T::zero()),
            };
            Ok((LvidPair::new(septal, posterior), e1, e2))
        });
        match outcome {
            Ok((pair, e1, e2)) => {
                pairs.push(pair);
                eres.extend([e1, e2]);
                failures.push(None);
            }
            Err(e) => {
                let m = sl.midpoint();
                pairs.push(LvidPair::new(m, m));
                eres.extend([T::infinity(), T::infinity()]);
                failures.push(Some(e.to_string()));
            }
        }
    }
    eres.extend([T::zero(); 4]);
    Ok(WeakContourLabel {
        contour: ContourEstimate::new(pairs, basal, eres)?,
        sweep_metadata: swept,
        source: detector.id(),
        failures,
    })
}

/// Point on `sl`'s supporting line closest to `p`, as a distance.
pub fn distance_to_scanline<T: Scalar>(sl: &ScanLine<T>, p: Point2D<T>) -> T {
    sl.line().distance_to(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amm::extract_amm;
    use crate::phantom::{generate_phantom, PhantomConfig};
    use crate::tensor::write_tensor2;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn amm_from_column(col: &[f64]) -> AmmImage<f64> {
        let values = Array2::from_shape_vec((col.len(), 1), col.to_vec()).unwrap();
        let sl = ScanLine::new(Point2D::new(0.0, 0.0), Point2D::new(0.0, (col.len() - 1) as f64)).unwrap();
        AmmImage { values, scanline: sl, sample_spacing: 1.0 }
    }

    fn step_profile() -> Vec<f64> {
        (0..64)
            .map(|i| match i {
                0..=10 => 0.0,
                11..=20 => 1.0,
                21..=40 => 0.0,
                41..=52 => 1.0,
                _ => 0.0,
            })
            .collect()
    }

    #[test]
    fn profile_on_ideal_steps() {
        let amm = amm_from_column(&step_profile());
        let p = ProfileParams { window: 1, threshold: 0.5 };
        let d = detect_profile(&amm, 0, &p).unwrap();
        let expected = [10.5, 20.5, 40.5, 52.5];
        for (got, want) in d.positions.iter().zip(expected) {
            assert!((got - want).abs() <= 0.5);
        }
        // Symmetric smoothing keeps symmetric edges in place.
        let d3 = detect_profile(&amm, 0, &ProfileParams { window: 3, threshold: 0.5 }).unwrap();
        for (got, want) in d3.positions.iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn profile_failures() {
        let p = ProfileParams::default();
        let flat = amm_from_column(&[0.4; 32]);
        assert!(matches!(detect_profile(&flat, 0, &p), Err(Error::DetectionFailure(_))));
        // bright-dark-bright: only two crossings
        let two: Vec<f64> = (0..64).map(|i| if (21..=40).contains(&i) { 0.0 } else { 1.0 }).collect();
        assert!(matches!(detect_profile(&amm_from_column(&two), 0, &p), Err(Error::DetectionFailure(_))));
        // inverted structure: four crossings, wrong polarity
        let inv: Vec<f64> = step_profile().iter().map(|v| 1.0 - v).collect();
        assert!(matches!(detect_profile(&amm_from_column(&inv), 0, &p), Err(Error::DetectionFailure(_))));
        assert!(detect_profile(&amm_from_column(&step_profile()), 1, &p).is_err());
        assert!(
            detect_profile(&amm_from_column(&step_profile()), 0, &ProfileParams { window: 2, threshold: 0.5 }).is_err()
        );
    }

    #[test]
    fn profile_on_clean_phantom_within_one_row() {
        let (study, truth) = generate_phantom(&PhantomConfig::<f64>::default()).unwrap();
        for phase in Phase::ALL {
            let amm = extract_amm(&study, &truth.true_scanline, 64).unwrap();
            let d = detect_profile(&amm, study.anchor(phase).unwrap(), &ProfileParams::default()).unwrap();
            let oracle = detect_oracle(&truth, phase, 64, 0.0, 0).unwrap();
            for (a, b) in d.positions.iter().zip(oracle.positions) {
                assert!((a - b).abs() <= 1.0, "{phase}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn oracle_noise_statistics() {
        let (_, truth) = generate_phantom(&PhantomConfig::<f64>::default()).unwrap();
        let clean = detect_oracle(&truth, Phase::Ed, 64, 0.0, 0).unwrap();
        assert_eq!(clean, detect_oracle(&truth, Phase::Ed, 64, 0.0, 9).unwrap());
        assert_eq!(
            detect_oracle(&truth, Phase::Ed, 64, 2.0, 5).unwrap(),
            detect_oracle(&truth, Phase::Ed, 64, 2.0, 5).unwrap()
        );
        // Use a fine row grid so the noise is expressed in pixel units directly.
        let samples = truth.true_scanline.length().round() as usize + 1;
        let spacing = truth.true_scanline.length() / (samples - 1) as f64;
        let base = detect_oracle(&truth, Phase::Ed, samples, 0.0, 0).unwrap();
        let trials = 500;
        let mut devs = Vec::new();
        for seed in 0..trials {
            let d = detect_oracle(&truth, Phase::Ed, samples, 2.0, seed).unwrap();
            devs.push((d.positions[1] - base.positions[1]) * spacing);
        }
        let mean = devs.iter().sum::<f64>() / trials as f64;
        let std = (devs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
        assert!((std - 2.0).abs() <= 0.3, "std {std}");
    }

    #[test]
    fn heatmap_grids() {
        let one_hot = |row: usize| {
            let mut a = Array2::zeros((64, 3));
            a[[row, 1]] = 1.0;
            (a, false)
        };
        let d = detect_from_heatmap_grids(vec![one_hot(10), one_hot(20), one_hot(30), one_hot(40)]).unwrap();
        assert_eq!(d.positions, [10.0, 20.0, 30.0, 40.0]);
        assert_eq!(d.confidence, Some([0.0; 4]));

        let uniform = || (Array2::from_elem((64, 1), 1.0 / 64.0), false);
        assert!(matches!(
            detect_from_heatmap_grids(vec![uniform(), uniform(), uniform(), uniform()]),
            Err(Error::NonMonotone(_))
        ));
        assert!(detect_from_heatmap_grids(vec![one_hot(1)]).is_err());

        let gauss = |row: f64| {
            let h = crate::heatmap::gaussian_target(Point2D::new(0.0, row), 2.0, 64, 1).unwrap();
            (h.into_inner(), false)
        };
        let d = detect_from_heatmap_grids(vec![gauss(8.0), gauss(16.0), gauss(32.0), gauss(48.0)]).unwrap();
        for (got, want) in d.positions.iter().zip([8.0, 16.0, 32.0, 48.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-3);
        }
    }

    #[test]
    fn heatmap_files_with_raw_logits() {
        let dir = tempfile::tempdir().unwrap();
        let files: Vec<PathBuf> = (0..4).map(|k| dir.path().join(format!("ed_{k}.f32"))).collect();
        for (k, f) in files.iter().enumerate() {
            let mut logits = Array2::from_elem((32, 1), 0.0);
            logits[[5 + 7 * k, 0]] = 60.0;
            write_tensor2(f, &logits, true).unwrap();
        }
        let d = detect_from_heatmaps::<f64>(&files).unwrap();
        for (k, got) in d.positions.iter().enumerate() {
            assert_abs_diff_eq!(*got, (5 + 7 * k) as f64, epsilon = 1e-6);
        }
        let det = HeatmapFileDetector::in_dir(dir.path(), Phase::Ed);
        let amm = amm_from_column(&[0.0; 32]);
        let ctx = DetectionContext { phase: Phase::Ed, anchor_column: 0 };
        assert!(AmmDetector::<f64>::detect(&det, &amm, &ctx).is_ok());
        assert!(AmmDetector::<f64>::detect(&det, &amm_from_column(&[0.0; 16]), &ctx).is_err());
        assert!(detect_from_heatmaps::<f64>(&files[..3]).is_err());
    }

    #[test]
    fn sweep_geometry() {
        let axis = Line2D::new(Point2D::new(50.0, 50.0), Point2D::new(1.0, 0.0)).unwrap();
        let basal = ScanLine::new(Point2D::new(50.0, 30.0), Point2D::new(50.0, 70.0)).unwrap();
        let bounds = ImageBounds::new(101, 101);
        let one = sweep_scanlines(&axis, &basal, &SweepConfig { n_lv: 1, fraction: 0.6 }, bounds).unwrap();
        // extent 50 px, band 30 px, single line at its middle
        assert_abs_diff_eq!(one[0].midpoint().x, 65.0, epsilon = 1e-12);

        let many = sweep_scanlines(&axis, &basal, &SweepConfig { n_lv: 20, fraction: 0.6 }, bounds).unwrap();
        assert_eq!(many.len(), 20);
        for sl in &many {
            let (_, ang) = crate::geometry::scanline_distance_angle(sl, &basal, 1.0);
            assert!(ang < 1e-9);
        }
        let outside = basal.translated(Point2D::new(200.0, 0.0));
        assert!(sweep_scanlines(&axis, &outside, &SweepConfig::default(), bounds).is_err());
        assert!(sweep_scanlines(&axis, &basal, &SweepConfig { n_lv: 0, fraction: 0.6 }, bounds).is_err());
        assert!(sweep_scanlines(&axis, &basal, &SweepConfig { n_lv: 3, fraction: 1.5 }, bounds).is_err());
    }

    #[test]
    fn weak_labels_with_oracle_match_truth_contour() {
        for seed in 0..5 {
            let cfg = PhantomConfig::<f64>::random(seed);
            let (study, truth) = generate_phantom(&cfg).unwrap();
            let det = OracleDetector::new(&truth, 0.0, 0);
            for phase in Phase::ALL {
                let tc = truth.contour(phase);
                let label = generate_weak_labels(&study, phase, &det, &truth.sweep, tc.basal_pairs, 64).unwrap();
                assert_eq!(label.contour.pair_count(), truth.sweep.n_lv + 2);
                assert!(label.failures.iter().all(Option::is_none));
                for (a, b) in label.contour.lvid_pairs.iter().zip(&tc.lvid_pairs) {
                    assert!(a.septal.distance(b.septal) < 1e-6, "{a:?} vs {b:?}");
                    assert!(a.posterior.distance(b.posterior) < 1e-6);
                }
                for (pair, sl) in label.contour.lvid_pairs.iter().zip(&label.sweep_metadata) {
                    assert!(distance_to_scanline(sl, pair.septal) <= 1e-9);
                    assert!(distance_to_scanline(sl, pair.posterior) <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn weak_labels_profile_reconstructs_cavity_width() {
        let cfg = PhantomConfig::<f64>::default();
        let (study, truth) = generate_phantom(&cfg).unwrap();
        let det = ProfileDetector::default();
        let label =
            generate_weak_labels(&study, Phase::Ed, &det, &truth.sweep, truth.contour_ed.basal_pairs, 256).unwrap();
        for (got, want) in label.contour.lvid_pairs.iter().zip(&truth.contour_ed.lvid_pairs) {
            assert!((got.separation() - want.separation()).abs() <= 2.0);
        }
    }

    /// Detector that fails on one specific scanline.
    struct FailOn(usize, std::sync::atomic::AtomicUsize);
    impl AmmDetector<f64> for FailOn {
        fn id(&self) -> String {
            "fail-on".into()
        }
        fn detect(&self, amm: &AmmImage<f64>, ctx: &DetectionContext) -> Result<AmmDetection<f64>> {
            let call = self.1.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            if call == self.0 {
                return Err(Error::DetectionFailure("synthetic".into()));
            }
            detect_profile(amm, ctx.anchor_column, &ProfileParams::default())
        }
    }

    #[test]
    fn weak_labels_record_failures() {
        let (study, truth) = generate_phantom(&PhantomConfig::<f64>::default()).unwrap();
        let det = FailOn(3, Default::default());
        let label =
            generate_weak_labels(&study, Phase::Ed, &det, &truth.sweep, truth.contour_ed.basal_pairs, 64).unwrap();
        assert_eq!(label.contour.pair_count(), 22);
        assert!(!label.contour.is_pair_valid(3));
        assert_eq!(label.failures.iter().filter(|f| f.is_some()).count(), 1);
        assert_eq!(label.contour.valid_lvid_midpoints().len(), 19);
        let w = label.loss_weights(&LossConfig::default()).unwrap();
        assert_eq!(w[6], 0.0);
        assert_eq!(w[7], 0.0);
        assert_abs_diff_eq!(w.iter().sum::<f64>() / 42.0, 1.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn profile_affine_invariance(a in 0.1..10.0f64, b in -5.0..5.0f64, noise_seed in 0u64..1000) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            let col: Vec<f64> = step_profile().iter().map(|v| v * 0.8 + 0.1 + rng.random_range(-0.05..0.05)).collect();
            let p = ProfileParams::default();
            let base = detect_profile(&amm_from_column(&col), 0, &p);
            let scaled: Vec<f64> = col.iter().map(|v| a * v + b).collect();
            let other = detect_profile(&amm_from_column(&scaled), 0, &p);
            match (base, other) {
                (Ok(x), Ok(y)) => {
                    for (u, v) in x.positions.iter().zip(y.positions) {
                        prop_assert!((u - v).abs() < 1e-9);
                    }
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "affine rescale changed detection outcome"),
            }
        }
    }
}
