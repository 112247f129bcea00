//! Heatmap math for landmark localization: Gaussian targets, softmax
//! normalization, the expected-coordinate transform (DSNT), expected radial
//! error and the training loss terms.
//!
//! Cell `(k, l)` (row, column) has grid coordinate `(x = l, y = k)` in pixels.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2D;
use crate::scalar::Scalar;

/// Largest tolerated deviation of a heatmap's mass from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Non-negative `H x W` grid of landmark probability mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Heatmap<T>(Array2<T>);

impl<T: Scalar> Heatmap<T> {
    /// Wraps `values` after checking they are finite and non-negative. Does
    /// not require unit mass; [`dsnt`] and [`ere`] check that.
    pub fn new(values: Array2<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty heatmap".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= T::zero())) {
            return Err(Error::InvalidArgument(format!("heatmap entries must be finite and >= 0, found {v}")));
        }
        Ok(Self(values))
    }

    /// Scales `values` to unit mass.
    pub fn normalized(values: Array2<T>) -> Result<Self> {
        let h = Self::new(values)?;
        let sum = h.sum();
        if !(sum > T::zero()) {
            return Err(Error::InvalidArgument("heatmap has zero mass".into()));
        }
        Ok(Self(h.0.mapv(|v| v / sum)))
    }

    pub fn values(&self) -> ArrayView2<'_, T> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn sum(&self) -> T {
        self.0.iter().copied().sum()
    }

    fn check_normalized(&self) -> Result<()> {
        let sum = self.sum();
        if (sum - T::one()).abs().to_f64_lossy() > NORMALIZATION_TOLERANCE {
            return Err(Error::Unnormalized { sum: sum.to_f64_lossy() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig<T> {
    /// Weight of the coordinate term.
    pub lambda: T,
    /// Stabilizer added to ERE before inversion (pixels).
    pub epsilon: T,
}

impl<T: Scalar> Default for LossConfig<T> {
    fn default() -> Self {
        Self { lambda: T::one(), epsilon: T::one() }
    }
}

impl<T: Scalar> LossConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.epsilon > T::zero()) {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Unit-mass Gaussian centred on `center` with standard deviation `sigma`.
pub fn gaussian_target<T: Scalar>(center: Point2D<T>, sigma: T, height: usize, width: usize) -> Result<Heatmap<T>> {
    if !(sigma > T::zero()) {
        return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument("heatmap size must be non-zero".into()));
    }
    let denom = T::lit(2.0) * sigma * sigma;
    let raw = Array2::from_shape_fn((height, width), |(k, l)| {
        let dx = T::from_usize_lossy(l) - center.x;
        let dy = T::from_usize_lossy(k) - center.y;
        (-(dx * dx + dy * dy) / denom).exp()
    });
    Heatmap::normalized(raw).map_err(|_| {
        Error::InvalidArgument(format!(
            "Gaussian at ({}, {}) with sigma {sigma} underflows on a {height}x{width} grid",
            center.x, center.y
        ))
    })
}

/// Spatial softmax, `exp(raw - max) / sum`.
pub fn softmax_normalize<T: Scalar>(raw: ArrayView2<'_, T>) -> Result<Heatmap<T>> {
    if raw.is_empty() {
        return Err(Error::InvalidArgument("empty heatmap".into()));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("softmax input must be finite".into()));
    }
    let max = raw.iter().copied().fold(T::neg_infinity(), T::max);
    let exp = raw.mapv(|v| (v - max).exp());
    let sum: T = exp.iter().copied().sum();
    Ok(Heatmap(exp.mapv(|v| v / sum)))
}

/// Expected grid coordinate under `h`.
pub fn dsnt<T: Scalar>(h: &Heatmap<T>) -> Result<Point2D<T>> {
    h.check_normalized()?;
    let (mut x, mut y) = (T::zero(), T::zero());
    for ((k, l), &w) in h.0.indexed_iter() {
        x = x + w * T::from_usize_lossy(l);
        y = y + w * T::from_usize_lossy(k);
    }
    Ok(Point2D::new(x, y))
}

/// Expected radial error: mass-weighted mean distance from each cell to `c`.
pub fn ere<T: Scalar>(h: &Heatmap<T>, c: Point2D<T>) -> Result<T> {
    h.check_normalized()?;
    let mut acc = T::zero();
    for ((k, l), &w) in h.0.indexed_iter() {
        let cell = Point2D::new(T::from_usize_lossy(l), T::from_usize_lossy(k));
        acc = acc + w * cell.distance(c);
    }
    Ok(acc)
}

/// Mean over landmarks of the summed squared difference between grids.
pub fn heatmap_loss<T: Scalar>(pred: &[Array2<T>], gt: &[Array2<T>]) -> Result<T> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch { expected: vec![gt.len()], actual: vec![pred.len()] });
    }
    let mut total = T::zero();
    for (a, b) in pred.iter().zip(gt) {
        if a.dim() != b.dim() {
            return Err(Error::ShapeMismatch { expected: b.shape().to_vec(), actual: a.shape().to_vec() });
        }
        total = total + a.iter().zip(b.iter()).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>();
    }
    Ok(total / T::from_usize_lossy(pred.len()))
}

/// Mean Euclidean distance between paired coordinates.
pub fn coord_loss<T: Scalar>(pred: &[Point2D<T>], gt: &[Point2D<T>]) -> Result<T> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch { expected: vec![gt.len()], actual: vec![pred.len()] });
    }
    let total: T = pred.iter().zip(gt).map(|(a, b)| a.distance(*b)).sum();
    Ok(total / T::from_usize_lossy(pred.len()))
}

/// `heatmap_loss + lambda * coord_loss`.
pub fn combined_loss<T: Scalar>(
    pred_heatmaps: &[Array2<T>],
    gt_heatmaps: &[Array2<T>],
    pred_coords: &[Point2D<T>],
    gt_coords: &[Point2D<T>],
    cfg: &LossConfig<T>,
) -> Result<T> {
    cfg.validate()?;
    Ok(heatmap_loss(pred_heatmaps, gt_heatmaps)? + cfg.lambda * coord_loss(pred_coords, gt_coords)?)
}

/// Per-landmark loss weights inversely proportional to ERE, rescaled to mean 1.
pub fn ere_weights<T: Scalar>(eres: &[T], cfg: &LossConfig<T>) -> Result<Vec<T>> {
    cfg.validate()?;
    if let Some(e) = eres.iter().find(|e| !(**e >= T::zero())) {
        return Err(Error::InvalidArgument(format!("ERE must be >= 0, got {e}")));
    }
    if eres.is_empty() {
        return Ok(Vec::new());
    }
    let raw: Vec<T> = eres.iter().map(|e| T::one() / (*e + cfg.epsilon)).collect();
    let mean = raw.iter().copied().sum::<T>() / T::from_usize_lossy(raw.len());
    Ok(raw.into_iter().map(|w| w / mean).collect())
}

/// Loss of a single landmark set with per-landmark weights: the weighted
/// analogue of [`combined_loss`].
pub fn weighted_combined_loss<T: Scalar>(
    pred_heatmaps: &[Array2<T>],
    gt_heatmaps: &[Array2<T>],
    pred_coords: &[Point2D<T>],
    gt_coords: &[Point2D<T>],
    weights: &[T],
    cfg: &LossConfig<T>,
) -> Result<T> {
    let n = pred_heatmaps.len();
    if weights.len() != n || pred_coords.len() != n {
        return Err(Error::ShapeMismatch { expected: vec![n], actual: vec![weights.len(), pred_coords.len()] });
    }
    let mut total = T::zero();
    for i in 0..n {
        let term =
            combined_loss(&pred_heatmaps[i..=i], &gt_heatmaps[i..=i], &pred_coords[i..=i], &gt_coords[i..=i], cfg)?;
        total = total + weights[i] * term;
    }
    Ok(total / T::from_usize_lossy(n))
}
