//! Virtual anatomical M-mode (AMM) reconstruction: the B-mode video sampled
//! along a scanline at every frame.
//!
//! Pixel `(i, j)` (row, column) sits at image coordinate `(x = j, y = i)`.
//! AMM rows index position along the scanline (row 0 at `p1`), columns index
//! time.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ImageBounds, Point2D, ScanLine};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Ed,
    Es,
}

impl Phase {
    pub const ALL: [Phase; 2] = [Phase::Ed, Phase::Es];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Ed => "ed",
            Phase::Es => "es",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ed" => Ok(Phase::Ed),
            "es" => Ok(Phase::Es),
            other => Err(Error::InvalidArgument(format!("unknown phase {other:?}"))),
        }
    }
}

/// One cardiac cycle of grayscale B-mode frames with its ED/ES anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoStudy<T> {
    pub frames: Vec<Array2<T>>,
    /// Isotropic pixel size in cm.
    pub pixel_spacing: T,
    pub anchor_ed: usize,
    pub anchor_es: usize,
}

impl<T: Scalar> EchoStudy<T> {
    pub fn new(frames: Vec<Array2<T>>, pixel_spacing: T, anchor_ed: usize, anchor_es: usize) -> Result<Self> {
        let s = Self { frames, pixel_spacing, anchor_ed, anchor_es };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.frames.first() else {
            return Err(Error::InvalidArgument("study has no frames".into()));
        };
        let dim = first.dim();
        if dim.0 == 0 || dim.1 == 0 {
            return Err(Error::InvalidArgument("frames must be non-empty".into()));
        }
        if let Some(f) = self.frames.iter().find(|f| f.dim() != dim) {
            return Err(Error::ShapeMismatch { expected: vec![dim.0, dim.1], actual: f.shape().to_vec() });
        }
        if !(self.pixel_spacing > T::zero()) || !self.pixel_spacing.is_finite() {
            return Err(Error::InvalidArgument(format!("pixel_spacing must be positive, got {}", self.pixel_spacing)));
        }
        for phase in Phase::ALL {
            self.anchor(phase)?;
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn bounds(&self) -> ImageBounds {
        let (h, w) = self.frames.first().map(|f| f.dim()).unwrap_or((0, 0));
        ImageBounds::new(h, w)
    }

    /// Anchor frame index for `phase`.
    pub fn anchor(&self, phase: Phase) -> Result<usize> {
        let idx = match phase {
            Phase::Ed => self.anchor_ed,
            Phase::Es => self.anchor_es,
        };
        if idx < self.frames.len() {
            Ok(idx)
        } else {
            Err(Error::MissingAnchor(format!("{phase}: index {idx} but the study has {} frames", self.frames.len())))
        }
    }
}

/// Position-by-time image sampled along a scanline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmmImage<T> {
    /// `P x T`: rows are positions along the scanline, columns are frames.
    pub values: Array2<T>,
    pub scanline: ScanLine<T>,
    /// Pixels between consecutive rows, `length / (P - 1)`.
    pub sample_spacing: T,
}

impl<T: Scalar> AmmImage<T> {
    pub fn samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }
}

/// `count` points evenly spaced from `p1` to `p2`, endpoints included.
pub fn sample_positions<T: Scalar>(sl: &ScanLine<T>, count: usize) -> Result<Vec<Point2D<T>>> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!("AMM needs at least 2 samples, got {count}")));
    }
    let last = T::from_usize_lossy(count - 1);
    Ok((0..count).map(|i| lerp(sl, T::from_usize_lossy(i) / last)).collect())
}

#[inline]
fn lerp<T: Scalar>(sl: &ScanLine<T>, t: T) -> Point2D<T> {
    sl.p1 + (sl.p2 - sl.p1) * t
}

/// Bilinear interpolation between the four surrounding pixel centers.
/// Points outside `[0, W-1] x [0, H-1]` sample as 0.
pub fn bilinear_sample<T: Scalar>(frame: ArrayView2<'_, T>, p: Point2D<T>) -> T {
    let (h, w) = frame.dim();
    if h == 0 || w == 0 || !p.is_finite() {
        return T::zero();
    }
    let max_x = T::from_usize_lossy(w - 1);
    let max_y = T::from_usize_lossy(h - 1);
    if p.x < T::zero() || p.y < T::zero() || p.x > max_x || p.y > max_y {
        return T::zero();
    }
    let j0 = p.x.floor().to_usize().unwrap_or(0).min(w - 1);
    let i0 = p.y.floor().to_usize().unwrap_or(0).min(h - 1);
    let j1 = (j0 + 1).min(w - 1);
    let i1 = (i0 + 1).min(h - 1);
    let fx = p.x - T::from_usize_lossy(j0);
    let fy = p.y - T::from_usize_lossy(i0);
    let one = T::one();
    let top = frame[[i0, j0]] * (one - fx) + frame[[i0, j1]] * fx;
    let bottom = frame[[i1, j0]] * (one - fx) + frame[[i1, j1]] * fx;
    top * (one - fy) + bottom * fy
}

pub fn extract_amm<T: Scalar>(study: &EchoStudy<T>, sl: &ScanLine<T>, samples: usize) -> Result<AmmImage<T>> {
    sl.validate()?;
    let positions = sample_positions(sl, samples)?;
    let mut values = Array2::zeros((samples, study.frames.len()));
    for (t, frame) in study.frames.iter().enumerate() {
        let view = frame.view();
        for (i, p) in positions.iter().enumerate() {
            values[[i, t]] = bilinear_sample(view, *p);
        }
    }
    Ok(AmmImage { values, scanline: *sl, sample_spacing: sl.length() / T::from_usize_lossy(samples - 1) })
}

/// Maps a continuous AMM row `s` in `[0, P-1]` back to B-mode coordinates.
pub fn amm_row_to_bmode<T: Scalar>(amm: &AmmImage<T>, s: T) -> Result<Point2D<T>> {
    let last = amm.samples().saturating_sub(1);
    let last_t = T::from_usize_lossy(last);
    if last == 0 || !(s >= T::zero() && s <= last_t) {
        return Err(Error::InvalidArgument(format!("AMM row {s} outside [0, {last}]")));
    }
    Ok(lerp(&amm.scanline, s / last_t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2D<f64> {
        Point2D::new(x, y)
    }

    fn sl(a: (f64, f64), b: (f64, f64)) -> ScanLine<f64> {
        ScanLine::new(p(a.0, a.1), p(b.0, b.1)).unwrap()
    }

    /// Per-point oracle written against the textbook formula, independent of
    /// the index clamping in `bilinear_sample`.
    fn oracle(frame: &Array2<f64>, x: f64, y: f64) -> f64 {
        let (h, w) = frame.dim();
        if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..h {
            for j in 0..w {
                let wx = (1.0 - (x - j as f64).abs()).max(0.0);
                let wy = (1.0 - (y - i as f64).abs()).max(0.0);
                acc += wx * wy * frame[[i, j]];
            }
        }
        acc
    }

    #[test]
    fn positions_examples() {
        let pts = sample_positions(&sl((0.0, 0.0), (0.0, 63.0)), 64).unwrap();
        for (i, q) in pts.iter().enumerate() {
            assert_eq!(*q, p(0.0, i as f64));
        }
        let pts = sample_positions(&sl((3.0, 4.0), (7.0, -1.0)), 2).unwrap();
        assert_eq!(pts, vec![p(3.0, 4.0), p(7.0, -1.0)]);
        let pts = sample_positions(&sl((1.0, 1.0), (4.0, 5.0)), 3).unwrap();
        assert_eq!(pts, vec![p(1.0, 1.0), p(2.5, 3.0), p(4.0, 5.0)]);
        assert!(sample_positions(&sl((0.0, 0.0), (1.0, 0.0)), 1).is_err());
    }

    #[test]
    fn bilinear_examples() {
        let f = array![[0.0, 1.0, 0.25], [0.5, 0.75, 1.0]];
        assert_eq!(bilinear_sample(f.view(), p(1.0, 1.0)), 0.75);
        assert_eq!(bilinear_sample(f.view(), p(2.0, 1.0)), 1.0);
        assert_eq!(bilinear_sample(f.view(), p(0.5, 0.0)), 0.5);
        assert_eq!(bilinear_sample(f.view(), p(-0.01, 0.0)), 0.0);
        assert_eq!(bilinear_sample(f.view(), p(0.0, 1.01)), 0.0);
        assert_eq!(bilinear_sample(f.view(), p(f64::NAN, 0.0)), 0.0);
        let single = array![[0.3]];
        assert_eq!(bilinear_sample(single.view(), p(0.0, 0.0)), 0.3);
    }

    #[test]
    fn bilinear_matches_oracle_on_random_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = Array2::from_shape_fn((16, 16), |_| rng.random::<f64>());
            for _ in 0..100 {
                let (x, y) = (rng.random_range(-1.0..16.0), rng.random_range(-1.0..16.0));
                assert_abs_diff_eq!(bilinear_sample(f.view(), p(x, y)), oracle(&f, x, y), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_video_gives_constant_amm() {
        let frames = vec![Array2::from_elem((8, 8), 0.4); 5];
        let study = EchoStudy::new(frames, 0.1, 0, 2).unwrap();
        let amm = extract_amm(&study, &sl((1.0, 1.0), (6.0, 5.0)), 10).unwrap();
        assert_eq!(amm.values.dim(), (10, 5));
        assert!(amm.values.iter().all(|v| (*v - 0.4).abs() < 1e-15));
    }

    #[test]
    fn single_frame_amm_is_profile() {
        let f = Array2::from_shape_fn((8, 8), |(i, j)| (i * 8 + j) as f64 / 64.0);
        let study = EchoStudy::new(vec![f.clone()], 0.1, 0, 0).unwrap();
        let line = sl((0.5, 0.5), (6.5, 3.0));
        let amm = extract_amm(&study, &line, 7).unwrap();
        for (i, q) in sample_positions(&line, 7).unwrap().iter().enumerate() {
            assert_eq!(amm.values[[i, 0]], bilinear_sample(f.view(), *q));
        }
    }

    #[test]
    fn row_back_projection() {
        let frames = vec![Array2::zeros((10, 10))];
        let study = EchoStudy::new(frames, 0.1, 0, 0).unwrap();
        let line = sl((1.0, 2.0), (7.0, 8.0));
        let amm = extract_amm(&study, &line, 9).unwrap();
        assert_eq!(amm_row_to_bmode(&amm, 0.0).unwrap(), line.p1);
        assert_eq!(amm_row_to_bmode(&amm, 8.0).unwrap(), line.p2);
        assert_eq!(amm_row_to_bmode(&amm, 4.0).unwrap(), line.midpoint());
        assert!(amm_row_to_bmode(&amm, 8.5).is_err());
        assert!(amm_row_to_bmode(&amm, -0.1).is_err());
        let positions = sample_positions(&line, 9).unwrap();
        for (i, q) in positions.iter().enumerate() {
            assert_eq!(amm_row_to_bmode(&amm, i as f64).unwrap(), *q);
        }
    }

    #[test]
    fn study_validation() {
        assert!(EchoStudy::<f64>::new(vec![], 0.1, 0, 0).is_err());
        assert!(EchoStudy::new(vec![Array2::<f64>::zeros((4, 4))], 0.0, 0, 0).is_err());
        assert!(matches!(EchoStudy::new(vec![Array2::<f64>::zeros((4, 4))], 0.1, 0, 1), Err(Error::MissingAnchor(_))));
        assert!(EchoStudy::new(vec![Array2::<f64>::zeros((4, 4)), Array2::zeros((4, 5))], 0.1, 0, 0).is_err());
        assert_eq!("ES".parse::<Phase>().unwrap(), Phase::Es);
    }

    #[test]
    fn linearity_and_physical_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mk = |rng: &mut ChaCha8Rng| {
            (0..4).map(|_| Array2::from_shape_fn((12, 12), |_| rng.random::<f64>())).collect::<Vec<_>>()
        };
        let (v1, v2) = (mk(&mut rng), mk(&mut rng));
        let (a, b) = (0.7, -1.3);
        let mixed: Vec<_> = v1.iter().zip(&v2).map(|(x, y)| x * a + y * b).collect();
        let line = sl((0.3, 1.7), (10.2, 9.9));
        let e =
            |frames: Vec<Array2<f64>>| extract_amm(&EchoStudy::new(frames, 0.05, 0, 1).unwrap(), &line, 20).unwrap();
        let (m1, m2, mm) = (e(v1), e(v2), e(mixed));
        for ((x, y), z) in m1.values.iter().zip(m2.values.iter()).zip(mm.values.iter()) {
            assert_abs_diff_eq!(a * x + b * y, *z, epsilon = 1e-12);
        }
        let physical = 19.0 * mm.sample_spacing * 0.05;
        assert_abs_diff_eq!(physical, line.length() * 0.05, epsilon = 1e-12);
    }
}
