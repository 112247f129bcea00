//! Points, lines and scanlines in B-mode image coordinates (pixels, `x` to the
//! right, `y` down), plus long-axis fitting and basal scanline placement.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2D<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Self) -> Self {
        let two = T::lit(2.0);
        Self::new((self.x + other.x) / two, (self.y + other.y) / two)
    }

    /// Counter-clockwise quarter turn in a y-up frame, `(x, y) -> (-y, x)`.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Scalar>(self) -> Point2D<U> {
        Point2D::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Scalar> Add for Point2D<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub for Point2D<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Mul<T> for Point2D<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl<T: Scalar> Neg for Point2D<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Mean of a non-empty point set.
pub fn centroid<T: Scalar>(points: &[Point2D<T>]) -> Option<Point2D<T>> {
    if points.is_empty() {
        return None;
    }
    let n = T::from_usize_lossy(points.len());
    let sx: T = points.iter().map(|p| p.x).sum();
    let sy: T = points.iter().map(|p| p.y).sum();
    Some(Point2D::new(sx / n, sy / n))
}

/// Infinite line through `point` with unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line2D<T> {
    pub point: Point2D<T>,
    pub direction: Point2D<T>,
}

impl<T: Scalar> Line2D<T> {
    /// Normalizes `direction`; fails if it has zero or non-finite length.
    pub fn new(point: Point2D<T>, direction: Point2D<T>) -> Result<Self> {
        let n = direction.norm();
        if !point.is_finite() || !n.is_finite() || n <= T::zero() {
            return Err(Error::DegenerateGeometry(format!(
                "line needs a finite point and nonzero direction, got {point:?} / {direction:?}"
            )));
        }
        Ok(Self { point, direction: direction * (T::one() / n) })
    }

    /// Same line with the direction reversed.
    pub fn reversed(self) -> Self {
        Self { point: self.point, direction: -self.direction }
    }

    /// Unsigned perpendicular distance from `p` to the line.
    pub fn distance_to(&self, p: Point2D<T>) -> T {
        (p - self.point).cross(self.direction).abs()
    }

    /// Direction angle in degrees against the image x-axis, in `(-180, 180]`.
    pub fn angle_deg(&self) -> T {
        self.direction.y.atan2(self.direction.x).to_degrees()
    }
}

/// Directed segment along which the AMM image is sampled, from `p1` to `p2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanLine<T> {
    pub p1: Point2D<T>,
    pub p2: Point2D<T>,
}

impl<T: Scalar> ScanLine<T> {
    pub fn new(p1: Point2D<T>, p2: Point2D<T>) -> Result<Self> {
        let sl = Self { p1, p2 };
        sl.validate()?;
        Ok(sl)
    }

    /// Checks finiteness and positive length (useful after deserialization).
    pub fn validate(&self) -> Result<()> {
        if !self.p1.is_finite() || !self.p2.is_finite() {
            return Err(Error::InvalidArgument("scanline endpoints must be finite".into()));
        }
        let len = self.length();
        if !(len > T::zero()) {
            return Err(Error::InvalidArgument("scanline must have positive length".into()));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> Point2D<T> {
        self.p1.midpoint(self.p2)
    }

    pub fn length(&self) -> T {
        self.p1.distance(self.p2)
    }

    /// Unit vector from `p1` to `p2`.
    pub fn direction(&self) -> Point2D<T> {
        (self.p2 - self.p1) * (T::one() / self.length())
    }

    /// Undirected angle against the image x-axis, in `[0, 180)` degrees.
    pub fn angle_deg(&self) -> T {
        let d = self.p2 - self.p1;
        let mut a = d.y.atan2(d.x).to_degrees();
        let half_turn = T::lit(180.0);
        if a < T::zero() {
            a = a + half_turn;
        }
        if a >= half_turn {
            a = a - half_turn;
        }
        a
    }

    pub fn line(&self) -> Line2D<T> {
        Line2D { point: self.midpoint(), direction: self.direction() }
    }

    pub fn reversed(&self) -> Self {
        Self { p1: self.p2, p2: self.p1 }
    }

    /// Translates both endpoints by `offset`.
    pub fn translated(&self, offset: Point2D<T>) -> Self {
        Self { p1: self.p1 + offset, p2: self.p2 + offset }
    }

    pub fn cast<U: Scalar>(&self) -> ScanLine<U> {
        ScanLine { p1: self.p1.cast(), p2: self.p2.cast() }
    }
}

/// Image extent in pixels; valid coordinates are `[0, width-1] x [0, height-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageBounds {
    pub height: usize,
    pub width: usize,
}

impl ImageBounds {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn contains<T: Scalar>(&self, p: Point2D<T>) -> bool {
        let max_x = T::from_usize_lossy(self.width.saturating_sub(1));
        let max_y = T::from_usize_lossy(self.height.saturating_sub(1));
        p.is_finite() && p.x >= T::zero() && p.y >= T::zero() && p.x <= max_x && p.y <= max_y
    }
}

/// One septal/posterior landmark pair across the LV cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LvidPair<T> {
    pub septal: Point2D<T>,
    pub posterior: Point2D<T>,
}

impl<T: Scalar> LvidPair<T> {
    pub fn new(septal: Point2D<T>, posterior: Point2D<T>) -> Self {
        Self { septal, posterior }
    }

    pub fn midpoint(&self) -> Point2D<T> {
        self.septal.midpoint(self.posterior)
    }

    pub fn separation(&self) -> T {
        self.septal.distance(self.posterior)
    }
}

/// LV contour as `N_LV` swept LVID pairs plus two basal pairs.
///
/// `ere` holds one value per point, ordered as the LVID pairs followed by the
/// basal pairs, septal before posterior. A non-finite ERE marks a pair whose
/// detection failed; it serializes as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ContourEstimate<T> {
    pub lvid_pairs: Vec<LvidPair<T>>,
    pub basal_pairs: [LvidPair<T>; 2],
    #[serde(with = "failed_as_null")]
    pub ere: Vec<T>,
}

mod failed_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::scalar::Scalar;

    pub fn serialize<T: Scalar + Serialize, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, T: Scalar + Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<Vec<T>, D::Error> {
        let v = Vec::<Option<T>>::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or_else(T::infinity)).collect())
    }
}

impl<T: Scalar> ContourEstimate<T> {
    pub fn new(lvid_pairs: Vec<LvidPair<T>>, basal_pairs: [LvidPair<T>; 2], ere: Vec<T>) -> Result<Self> {
        let c = Self { lvid_pairs, basal_pairs, ere };
        c.validate()?;
        Ok(c)
    }

    /// Contour with every ERE set to zero.
    pub fn without_ere(lvid_pairs: Vec<LvidPair<T>>, basal_pairs: [LvidPair<T>; 2]) -> Self {
        let n = 2 * (lvid_pairs.len() + 2);
        Self { lvid_pairs, basal_pairs, ere: vec![T::zero(); n] }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = 2 * (self.lvid_pairs.len() + 2);
        if self.ere.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "contour with {} LVID pairs needs {expected} ERE values, got {}",
                self.lvid_pairs.len(),
                self.ere.len()
            )));
        }
        // NaN fails this comparison as well.
        if let Some(bad) = self.ere.iter().find(|e| !(**e >= T::zero())) {
            return Err(Error::InvalidArgument(format!("ERE must be >= 0, got {bad}")));
        }
        let all_points = self.lvid_pairs.iter().chain(self.basal_pairs.iter()).flat_map(|p| [p.septal, p.posterior]);
        for p in all_points {
            if !p.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite contour point {p:?}")));
            }
        }
        Ok(())
    }

    pub fn n_lv(&self) -> usize {
        self.lvid_pairs.len()
    }

    /// Total number of pairs, `N_LV + 2`.
    pub fn pair_count(&self) -> usize {
        self.lvid_pairs.len() + 2
    }

    /// ERE of (septal, posterior) for pair `i`; basal pairs follow the LVID pairs.
    pub fn pair_ere(&self, i: usize) -> (T, T) {
        (self.ere[2 * i], self.ere[2 * i + 1])
    }

    pub fn is_pair_valid(&self, i: usize) -> bool {
        let (a, b) = self.pair_ere(i);
        a.is_finite() && b.is_finite()
    }

    pub fn basal_points(&self) -> [Point2D<T>; 4] {
        let [a, b] = self.basal_pairs;
        [a.septal, a.posterior, b.septal, b.posterior]
    }

    /// Midpoints of the LVID pairs whose detection succeeded.
    pub fn valid_lvid_midpoints(&self) -> Vec<Point2D<T>> {
        self.lvid_pairs.iter().enumerate().filter(|(i, _)| self.is_pair_valid(*i)).map(|(_, p)| p.midpoint()).collect()
    }

    /// Mean septal-to-posterior distance of the two basal pairs.
    pub fn basal_separation(&self) -> T {
        (self.basal_pairs[0].separation() + self.basal_pairs[1].separation()) / T::lit(2.0)
    }

    pub fn cast<U: Scalar>(&self) -> ContourEstimate<U> {
        let pair = |p: &LvidPair<T>| LvidPair::new(p.septal.cast(), p.posterior.cast());
        ContourEstimate {
            lvid_pairs: self.lvid_pairs.iter().map(pair).collect(),
            basal_pairs: [pair(&self.basal_pairs[0]), pair(&self.basal_pairs[1])],
            ere: self.ere.iter().map(|e| U::lit(e.to_f64_lossy())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongAxisFitConfig<T> {
    /// Ridge penalty on the slope.
    pub alpha: T,
}

impl<T: Scalar> Default for LongAxisFitConfig<T> {
    fn default() -> Self {
        Self { alpha: T::one() }
    }
}

/// Midpoint of every LVID pair (basal pairs excluded), in pair order.
pub fn lvid_midpoints<T: Scalar>(contour: &ContourEstimate<T>) -> Vec<Point2D<T>> {
    contour.lvid_pairs.iter().map(LvidPair::midpoint).collect()
}

/// Ridge line fit through the centroid of `points`.
///
/// The coordinate with the larger spread is the regressor; the slope is
/// `S_xy / (S_xx + alpha)` on centered data. The returned direction points
/// along the regressor's positive axis.
pub fn fit_long_axis<T: Scalar>(points: &[Point2D<T>], cfg: &LongAxisFitConfig<T>) -> Result<Line2D<T>> {
    if !(cfg.alpha >= T::zero()) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {}", cfg.alpha)));
    }
    if points.len() < 2 {
        return Err(Error::DegenerateGeometry(format!("long-axis fit needs at least 2 points, got {}", points.len())));
    }
    let c = centroid(points).expect("non-empty");
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for p in points {
        let d = *p - c;
        sxx = sxx + d.x * d.x;
        syy = syy + d.y * d.y;
        sxy = sxy + d.x * d.y;
    }
    if sxx + syy <= T::zero() {
        return Err(Error::DegenerateGeometry("all long-axis points coincide".into()));
    }
    let direction = if sxx >= syy {
        Point2D::new(T::one(), sxy / (sxx + cfg.alpha))
    } else {
        Point2D::new(sxy / (syy + cfg.alpha), T::one())
    };
    Line2D::new(c, direction)
}

/// Default scanline half length: 1.2 times the mean basal LVID separation.
pub fn default_half_length<T: Scalar>(contour: &ContourEstimate<T>) -> T {
    T::lit(1.2) * contour.basal_separation()
}

/// Places the measurement scanline at the centroid of the four basal
/// landmarks, perpendicular to `axis`.
///
/// The scanline runs from the septal side to the posterior side. It is
/// shortened symmetrically when needed so both endpoints stay inside
/// `bounds`, which keeps its midpoint on the basal centroid.
pub fn place_scanline<T: Scalar>(
    contour: &ContourEstimate<T>,
    axis: &Line2D<T>,
    half_length: T,
    bounds: ImageBounds,
) -> Result<ScanLine<T>> {
    if !(half_length > T::zero()) || !half_length.is_finite() {
        return Err(Error::InvalidArgument(format!("half_length must be positive and finite, got {half_length}")));
    }
    let basal = contour.basal_points();
    let mid = centroid(&basal).expect("four points");
    if !bounds.contains(mid) {
        return Err(Error::Placement(format!(
            "basal centroid ({}, {}) lies outside the {}x{} image",
            mid.x, mid.y, bounds.height, bounds.width
        )));
    }

    let mut dir = axis.direction.perp();
    let septal_to_posterior = centroid(&[contour.basal_pairs[0].posterior, contour.basal_pairs[1].posterior])
        .expect("two points")
        - centroid(&[contour.basal_pairs[0].septal, contour.basal_pairs[1].septal]).expect("two points");
    if dir.dot(septal_to_posterior) < T::zero() {
        dir = -dir;
    }

    let reach = symmetric_reach(mid, dir, bounds);
    let t = half_length.min(reach);
    if !(t > T::zero()) {
        return Err(Error::Placement(
            "basal centroid lies on the image border; scanline would have zero length".into(),
        ));
    }
    ScanLine::new(mid - dir * t, mid + dir * t).map_err(|e| Error::Placement(e.to_string()))
}

/// Largest `t` such that `mid ± t·dir` both stay within `bounds`.
fn symmetric_reach<T: Scalar>(mid: Point2D<T>, dir: Point2D<T>, bounds: ImageBounds) -> T {
    let max_x = T::from_usize_lossy(bounds.width.saturating_sub(1));
    let max_y = T::from_usize_lossy(bounds.height.saturating_sub(1));
    let mut reach = T::infinity();
    for (m, d, hi) in [(mid.x, dir.x, max_x), (mid.y, dir.y, max_y)] {
        let ad = d.abs();
        if ad > T::zero() {
            reach = reach.min((hi - m) / ad).min(m / ad);
        }
    }
    reach
}

/// Distance from `origin` along unit `dir` to the border of `bounds`.
/// Zero when `origin` lies outside.
pub fn ray_to_bounds<T: Scalar>(origin: Point2D<T>, dir: Point2D<T>, bounds: ImageBounds) -> T {
    if !bounds.contains(origin) {
        return T::zero();
    }
    let max_x = T::from_usize_lossy(bounds.width.saturating_sub(1));
    let max_y = T::from_usize_lossy(bounds.height.saturating_sub(1));
    let mut t = T::infinity();
    for (o, d, hi) in [(origin.x, dir.x, max_x), (origin.y, dir.y, max_y)] {
        if d > T::zero() {
            t = t.min((hi - o) / d);
        } else if d < T::zero() {
            t = t.min(o / -d);
        }
    }
    t
}

/// Midpoint distance (cm) and undirected angle (degrees, in `[0, 90]`)
/// between a predicted and a reference scanline.
pub fn scanline_distance_angle<T: Scalar>(pred: &ScanLine<T>, gt: &ScanLine<T>, pixel_spacing: T) -> (T, T) {
    let distance = pred.midpoint().distance(gt.midpoint()) * pixel_spacing;
    let a = pred.direction();
    let b = gt.direction();
    let angle = a.cross(b).abs().atan2(a.dot(b).abs()).to_degrees();
    (distance, angle)
}
