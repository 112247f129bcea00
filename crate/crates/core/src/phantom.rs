//! Synthetic long-axis echo phantom with analytic ground truth.
//!
//! The LV is modelled in a frame attached to the basal anchor `B`: `s` runs
//! along the long axis toward the apex (unit `u`), `r` runs across it from the
//! septum to the posterior wall (unit `n`). The cavity spans `|r| <= w(s)/2`,
//! the septum lies just below `-w(s)/2` and the posterior wall just above
//! `w(s)/2`. The cavity narrows quadratically toward the apex; wall thickness
//! is constant along the axis. Wall motion is sinusoidal with ED at frame 0
//! and ES at frame `T/2`.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::amm::{EchoStudy, Phase};
use crate::detectors::SweepConfig;
use crate::error::{Error, Result};
use crate::geometry::{
    place_scanline, ray_to_bounds, ContourEstimate, ImageBounds, Line2D, LvidPair, Point2D, ScanLine,
};
use crate::pipeline::MeasurementSet;
use crate::scalar::Scalar;

/// Cavity half-width never drops below this fraction of its basal value.
const MIN_TAPER: f64 = 0.2;
/// Offset (px) of the two basal pairs on either side of the basal level.
const BASAL_PAIR_OFFSET: f64 = 1.0;
const CROSSING_SCAN_STEPS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomConfig<T> {
    pub height: usize,
    pub width: usize,
    /// cm per pixel.
    pub pixel_spacing: T,
    pub frames: usize,
    /// Direction from base to apex, degrees against the image x-axis.
    pub axis_angle: T,
    /// Point on the long axis at the basal (measurement) level, pixels.
    pub basal_anchor: Point2D<T>,
    pub ivs_ed: T,
    pub lvid_ed: T,
    pub lvpw_ed: T,
    pub ivs_es: T,
    pub lvid_es: T,
    pub lvpw_es: T,
    pub wall_intensity: T,
    pub cavity_intensity: T,
    pub noise_sigma: T,
    pub seed: u64,
    /// Fraction of the basal cavity width lost at `lv_length` from the base.
    pub apical_taper: T,
    /// Base-to-apex distance in cm used by the taper.
    pub lv_length: T,
}

impl<T: Scalar> Default for PhantomConfig<T> {
    fn default() -> Self {
        Self {
            height: 192,
            width: 192,
            pixel_spacing: T::lit(0.05),
            frames: 16,
            axis_angle: T::lit(165.0),
            basal_anchor: Point2D::new(T::lit(128.0), T::lit(92.0)),
            ivs_ed: T::lit(1.0),
            lvid_ed: T::lit(4.8),
            lvpw_ed: T::lit(1.0),
            ivs_es: T::lit(1.4),
            lvid_es: T::lit(3.2),
            lvpw_es: T::lit(1.5),
            wall_intensity: T::lit(0.9),
            cavity_intensity: T::lit(0.1),
            noise_sigma: T::zero(),
            seed: 0,
            apical_taper: T::lit(0.3),
            lv_length: T::lit(8.0),
        }
    }
}

impl<T: Scalar> PhantomConfig<T> {
    /// A randomized but always-valid configuration on a 256x256 grid.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = |lo: f64, hi: f64| Uniform::new(lo, hi).expect("valid range").sample(&mut rng);
        let spacing = u(0.045, 0.055);
        let angle = u(0.0, 360.0);
        let lvid_ed = u(4.2, 5.4);
        let ivs_ed = u(0.8, 1.2);
        let lvpw_ed = u(0.8, 1.2);
        let lvid_es = lvid_ed * u(0.6, 0.75);
        let ivs_es = ivs_ed * u(1.2, 1.5);
        let lvpw_es = lvpw_ed * u(1.2, 1.5);
        let taper = u(0.1, 0.4);
        let noise_seed = (u(0.0, 1.0) * 1e9) as u64;
        // Shift the base away from the apex so the sweep band crosses the centre.
        let (sin, cos) = angle.to_radians().sin_cos();
        let anchor = Point2D::new(127.5 - 30.0 * cos, 127.5 - 30.0 * sin);
        Self {
            height: 256,
            width: 256,
            pixel_spacing: T::lit(spacing),
            frames: 16,
            axis_angle: T::lit(angle),
            basal_anchor: anchor.cast(),
            ivs_ed: T::lit(ivs_ed),
            lvid_ed: T::lit(lvid_ed),
            lvpw_ed: T::lit(lvpw_ed),
            ivs_es: T::lit(ivs_es),
            lvid_es: T::lit(lvid_es),
            lvpw_es: T::lit(lvpw_es),
            seed: noise_seed,
            apical_taper: T::lit(taper),
            ..Self::default()
        }
    }

    pub fn bounds(&self) -> ImageBounds {
        ImageBounds::new(self.height, self.width)
    }

    pub fn anchor_frame(&self, phase: Phase) -> usize {
        match phase {
            Phase::Ed => 0,
            Phase::Es => self.frames / 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.height < 2 || self.width < 2 {
            return bad("phantom image must be at least 2x2".into());
        }
        if self.frames < 2 || !self.frames.is_multiple_of(2) {
            return bad(format!("frame count must be even and >= 2, got {}", self.frames));
        }
        if !(self.pixel_spacing > T::zero()) {
            return bad("pixel_spacing must be > 0".into());
        }
        let dims = [self.ivs_ed, self.lvid_ed, self.lvpw_ed, self.ivs_es, self.lvid_es, self.lvpw_es, self.lv_length];
        if dims.iter().any(|d| !(*d > T::zero())) {
            return bad("all thicknesses and lv_length must be > 0".into());
        }
        if !(self.lvid_es < self.lvid_ed) {
            return bad("systolic LVID must be smaller than diastolic LVID".into());
        }
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(self.wall_intensity) || !unit(self.cavity_intensity) {
            return bad("intensities must lie in [0, 1]".into());
        }
        if !(self.noise_sigma >= T::zero()) {
            return bad("noise_sigma must be >= 0".into());
        }
        if !(self.apical_taper >= T::zero() && self.apical_taper < T::one()) {
            return bad("apical_taper must lie in [0, 1)".into());
        }
        if !self.axis_angle.is_finite() {
            return bad("axis_angle must be finite".into());
        }
        let model = PhantomModel::new(self.clone());
        if !self.bounds().contains(self.basal_anchor) {
            return Err(Error::InvalidArgument("basal anchor outside the image".into()));
        }
        // Both walls at the basal level must be inside the image at every phase.
        for phase in Phase::ALL {
            let offsets = model.boundary_offsets(T::zero(), model.phase_fraction(self.anchor_frame(phase)));
            for r in [offsets[0], offsets[3]] {
                let q = self.basal_anchor + model.n * r;
                if !self.bounds().contains(q) {
                    return Err(Error::InvalidArgument(format!(
                        "LV walls leave the image at the basal level ({phase}): ({}, {})",
                        q.x, q.y
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Analytic description of a phantom, in pixel units.
#[derive(Debug, Clone)]
pub struct PhantomModel<T> {
    pub config: PhantomConfig<T>,
    /// Base-to-apex unit vector.
    pub u: Point2D<T>,
    /// Septum-to-posterior unit vector.
    pub n: Point2D<T>,
}

impl<T: Scalar> PhantomModel<T> {
    pub fn new(config: PhantomConfig<T>) -> Self {
        let (sin, cos) = config.axis_angle.to_radians().sin_cos();
        let u = Point2D::new(cos, sin);
        // Apex lies a quarter turn from septum->posterior, so n = (u_y, -u_x).
        let n = Point2D::new(sin, -cos);
        Self { config, u, n }
    }

    pub fn long_axis(&self) -> Line2D<T> {
        Line2D { point: self.config.basal_anchor, direction: self.u }
    }

    /// 0 at ED, 1 at ES, sinusoidal in between.
    pub fn phase_fraction(&self, frame: usize) -> T {
        let t = T::from_usize_lossy(frame) / T::from_usize_lossy(self.config.frames);
        (T::one() - (T::TAU() * t).cos()) / T::lit(2.0)
    }

    pub fn phase_fraction_of(&self, phase: Phase) -> T {
        self.phase_fraction(self.config.anchor_frame(phase))
    }

    /// (IVS, LVID, LVPW) in cm at phase fraction `phi`.
    pub fn dims_cm(&self, phi: T) -> [T; 3] {
        let c = &self.config;
        let mix = |ed: T, es: T| {
            if phi == T::zero() {
                ed
            } else if phi == T::one() {
                es
            } else {
                ed + (es - ed) * phi
            }
        };
        [mix(c.ivs_ed, c.ivs_es), mix(c.lvid_ed, c.lvid_es), mix(c.lvpw_ed, c.lvpw_es)]
    }

    fn taper(&self, s_px: T) -> T {
        if s_px <= T::zero() {
            return T::one();
        }
        let l = self.config.lv_length / self.config.pixel_spacing;
        let q = s_px / l;
        (T::one() - self.config.apical_taper * q * q).max(T::lit(MIN_TAPER))
    }

    /// Signed `r` offsets (px) of the four boundaries at axial position `s_px`:
    /// septum outer, septum/cavity, cavity/posterior, posterior outer.
    pub fn boundary_offsets(&self, s_px: T, phi: T) -> [T; 4] {
        let ps = self.config.pixel_spacing;
        let [ivs, lvid, lvpw] = self.dims_cm(phi);
        let half = lvid / ps / T::lit(2.0) * self.taper(s_px);
        [-half - ivs / ps, -half, half, half + lvpw / ps]
    }

    fn local(&self, q: Point2D<T>) -> (T, T) {
        let d = q - self.config.basal_anchor;
        (d.dot(self.u), d.dot(self.n))
    }

    /// Noise-free intensity at image point `q`.
    pub fn intensity(&self, q: Point2D<T>, phi: T) -> T {
        let (s, r) = self.local(q);
        let b = self.boundary_offsets(s, phi);
        let half = T::lit(0.5);
        let coverage = |lo: T, hi: T| ((r - lo).min(hi - r) + half).max(T::zero()).min(T::one());
        let walls = coverage(b[0], b[1]) + coverage(b[2], b[3]);
        let c = &self.config;
        c.cavity_intensity + (c.wall_intensity - c.cavity_intensity) * walls
    }

    pub fn render_frame(&self, frame: usize) -> Array2<T> {
        let phi = self.phase_fraction(frame);
        Array2::from_shape_fn((self.config.height, self.config.width), |(i, j)| {
            self.intensity(Point2D::new(T::from_usize_lossy(j), T::from_usize_lossy(i)), phi)
        })
    }

    /// Parameters `t` in `[0, 1]` along `sl` where it crosses the four
    /// boundaries at phase fraction `phi`, in boundary order. `None` if a
    /// boundary is not crossed.
    pub fn crossings(&self, sl: &ScanLine<T>, phi: T) -> Option<[T; 4]> {
        let g = |k: usize, t: T| {
            let q = sl.p1 + (sl.p2 - sl.p1) * t;
            let (s, r) = self.local(q);
            r - self.boundary_offsets(s, phi)[k]
        };
        let steps = CROSSING_SCAN_STEPS;
        let mut out = [T::zero(); 4];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut found = None;
            let mut prev_t = T::zero();
            let mut prev = g(k, prev_t);
            if prev == T::zero() {
                found = Some(prev_t);
            }
            for i in 1..=steps {
                if found.is_some() {
                    break;
                }
                let t = T::from_usize_lossy(i) / T::from_usize_lossy(steps);
                let cur = g(k, t);
                if cur == T::zero() {
                    found = Some(t);
                } else if (prev < T::zero()) != (cur < T::zero()) {
                    found = Some(bisect(|t| g(k, t), prev_t, t, prev));
                }
                prev_t = t;
                prev = cur;
            }
            *slot = found?;
        }
        Some(out)
    }

    /// Landmarks (IVS top, IVS/LVID, LVID/LVPW, LVPW bottom) at the basal level.
    pub fn landmarks(&self, phi: T) -> [Point2D<T>; 4] {
        let b = self.boundary_offsets(T::zero(), phi);
        b.map(|r| self.config.basal_anchor + self.n * r)
    }

    /// Ground-truth contour: swept LVID pairs plus two basal pairs straddling
    /// the basal level, all with zero ERE.
    pub fn contour(&self, phi: T, sweep: &SweepConfig<T>) -> Result<ContourEstimate<T>> {
        sweep.validate()?;
        let b0 = self.config.basal_anchor;
        let extent = ray_to_bounds(b0, self.u, self.config.bounds());
        let pair_at = |s: T| {
            let off = self.boundary_offsets(s, phi);
            let c = b0 + self.u * s;
            LvidPair::new(c + self.n * off[1], c + self.n * off[2])
        };
        let lvid = sweep.offsets(extent).into_iter().map(pair_at).collect();
        let d = T::lit(BASAL_PAIR_OFFSET);
        Ok(ContourEstimate::without_ere(lvid, [pair_at(-d), pair_at(d)]))
    }
}

fn bisect<T: Scalar>(f: impl Fn(T) -> T, mut lo: T, mut hi: T, f_lo: T) -> T {
    let lo_neg = f_lo < T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == T::zero() {
            return mid;
        }
        if (v < T::zero()) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// Analytic ground truth of a generated phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct PhantomTruth<T> {
    pub config: PhantomConfig<T>,
    pub sweep: SweepConfig<T>,
    pub long_axis: Line2D<T>,
    pub true_scanline: ScanLine<T>,
    pub landmarks_ed: [Point2D<T>; 4],
    pub landmarks_es: [Point2D<T>; 4],
    pub contour_ed: ContourEstimate<T>,
    pub contour_es: ContourEstimate<T>,
    pub measurements_ed: MeasurementSet<T>,
    pub measurements_es: MeasurementSet<T>,
}

impl<T: Scalar> PhantomTruth<T> {
    pub fn landmarks(&self, phase: Phase) -> [Point2D<T>; 4] {
        match phase {
            Phase::Ed => self.landmarks_ed,
            Phase::Es => self.landmarks_es,
        }
    }

    pub fn contour(&self, phase: Phase) -> &ContourEstimate<T> {
        match phase {
            Phase::Ed => &self.contour_ed,
            Phase::Es => &self.contour_es,
        }
    }

    pub fn measurements(&self, phase: Phase) -> &MeasurementSet<T> {
        match phase {
            Phase::Ed => &self.measurements_ed,
            Phase::Es => &self.measurements_es,
        }
    }

    pub fn model(&self) -> PhantomModel<T> {
        PhantomModel::new(self.config.clone())
    }

    /// Checks collinearity of the landmarks and their agreement with the
    /// configured thicknesses (to `tol` cm).
    pub fn check_invariants(&self, tol: T) -> Result<()> {
        let line = self.true_scanline.line();
        for phase in Phase::ALL {
            let lm = self.landmarks(phase);
            for p in lm {
                let off = line.distance_to(p);
                if off > T::lit(1e-9) {
                    return Err(Error::InvalidArgument(format!(
                        "{phase} landmark {p:?} is {off} px off the true scanline"
                    )));
                }
            }
            let ps = self.config.pixel_spacing;
            let got = [lm[0].distance(lm[1]) * ps, lm[1].distance(lm[2]) * ps, lm[2].distance(lm[3]) * ps];
            let want = self.model().dims_cm(self.model().phase_fraction_of(phase));
            let m = self.measurements(phase);
            for ((g, w), stored) in got.iter().zip(want).zip([m.ivs, m.lvid, m.lvpw]) {
                if (*g - w).abs() > tol || (stored - w).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "{phase} measurement mismatch: landmarks give {g}, stored {stored}, configured {w}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Ground-truth contour of a phantom at `phase`.
pub fn truth_contour<T: Scalar>(
    cfg: &PhantomConfig<T>,
    phase: Phase,
    sweep: &SweepConfig<T>,
) -> Result<ContourEstimate<T>> {
    let model = PhantomModel::new(cfg.clone());
    model.contour(model.phase_fraction_of(phase), sweep)
}

pub fn generate_phantom<T: Scalar>(cfg: &PhantomConfig<T>) -> Result<(EchoStudy<T>, PhantomTruth<T>)> {
    generate_phantom_with_sweep(cfg, &SweepConfig::default())
}

pub fn generate_phantom_with_sweep<T: Scalar>(
    cfg: &PhantomConfig<T>,
    sweep: &SweepConfig<T>,
) -> Result<(EchoStudy<T>, PhantomTruth<T>)> {
    cfg.validate()?;
    let model = PhantomModel::new(cfg.clone());
    let mut frames: Vec<Array2<T>> = (0..cfg.frames).map(|t| model.render_frame(t)).collect();

    if cfg.noise_sigma > T::zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal =
            Normal::new(0.0, cfg.noise_sigma.to_f64_lossy()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for frame in &mut frames {
            for v in frame.iter_mut() {
                let noisy = *v + T::lit(normal.sample(&mut rng));
                *v = noisy.max(T::zero()).min(T::one());
            }
        }
    }

    let study = EchoStudy::new(frames, cfg.pixel_spacing, cfg.anchor_frame(Phase::Ed), cfg.anchor_frame(Phase::Es))?;

    let contour_ed = model.contour(model.phase_fraction_of(Phase::Ed), sweep)?;
    let contour_es = model.contour(model.phase_fraction_of(Phase::Es), sweep)?;
    let axis = model.long_axis();
    let half = crate::geometry::default_half_length(&contour_ed);
    let true_scanline = place_scanline(&contour_ed, &axis, half, cfg.bounds())?;

    let measure = |phase: Phase| {
        let phi = model.phase_fraction_of(phase);
        let [ivs, lvid, lvpw] = model.dims_cm(phi);
        MeasurementSet {
            phase,
            ivs,
            lvid,
            lvpw,
            landmarks: model.landmarks(phi),
            landmark_rows: None,
            scanline: true_scanline,
        }
    };

    let truth = PhantomTruth {
        config: cfg.clone(),
        sweep: *sweep,
        long_axis: axis,
        true_scanline,
        landmarks_ed: model.landmarks(model.phase_fraction_of(Phase::Ed)),
        landmarks_es: model.landmarks(model.phase_fraction_of(Phase::Es)),
        contour_ed,
        contour_es,
        measurements_ed: measure(Phase::Ed),
        measurements_es: measure(Phase::Es),
    };
    Ok((study, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fit_long_axis, lvid_midpoints, LongAxisFitConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_config_is_valid() {
        PhantomConfig::<f64>::default().validate().unwrap();
        for seed in 0..50 {
            PhantomConfig::<f64>::random(seed).validate().unwrap();
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        let base = PhantomConfig::<f64>::default();
        let cases = [
            PhantomConfig { lvid_es: 5.0, ..base.clone() },
            PhantomConfig { ivs_ed: 0.0, ..base.clone() },
            PhantomConfig { wall_intensity: 1.5, ..base.clone() },
            PhantomConfig { frames: 7, ..base.clone() },
            PhantomConfig { basal_anchor: Point2D::new(96.0, 5.0), axis_angle: 0.0, ..base.clone() },
            PhantomConfig { basal_anchor: Point2D::new(128.0, 20.0), ..base.clone() },
        ];
        for c in cases {
            assert!(generate_phantom(&c).is_err(), "{c:?}");
        }
    }

    #[test]
    fn clean_profile_hits_band_intensities() {
        let cfg =
            PhantomConfig::<f64> { axis_angle: 0.0, basal_anchor: Point2D::new(60.0, 96.0), ..Default::default() };
        let (study, truth) = generate_phantom(&cfg).unwrap();
        let frame = &study.frames[study.anchor_ed];
        // axis along +x, so n = (0, -1): septum below the anchor in y.
        let [a, b, c, d] = truth.landmarks_ed.map(|p| p.y);
        let col = 60;
        let at = |y: f64| frame[[y.round() as usize, col]];
        assert_eq!(at((a + b) / 2.0), cfg.wall_intensity);
        assert_eq!(at((b + c) / 2.0), cfg.cavity_intensity);
        assert_eq!(at((c + d) / 2.0), cfg.wall_intensity);
        assert_eq!(at(a + 10.0), cfg.cavity_intensity);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = PhantomConfig::<f64> { noise_sigma: 0.05, seed: 42, frames: 4, ..Default::default() };
        let (a, _) = generate_phantom(&cfg).unwrap();
        let (b, _) = generate_phantom(&cfg).unwrap();
        assert_eq!(a, b);
        let (c, _) = generate_phantom(&PhantomConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
        assert!(a.frames.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn truth_is_self_consistent() {
        for seed in 0..10 {
            let (_, truth) = generate_phantom(&PhantomConfig::<f64>::random(seed)).unwrap();
            truth.check_invariants(1e-9).unwrap();
            let ps = truth.config.pixel_spacing;
            let lm = truth.landmarks_ed;
            assert_abs_diff_eq!(lm[1].distance(lm[2]) * ps, truth.config.lvid_ed, epsilon = 1e-9);
            assert_abs_diff_eq!(lm[0].distance(lm[1]) * ps, truth.config.ivs_ed, epsilon = 1e-9);
            assert_abs_diff_eq!(lm[2].distance(lm[3]) * ps, truth.config.lvpw_ed, epsilon = 1e-9);
            let lm = truth.landmarks_es;
            assert_abs_diff_eq!(lm[1].distance(lm[2]) * ps, truth.config.lvid_es, epsilon = 1e-9);
        }
    }

    #[test]
    fn truth_contour_geometry() {
        let sweep = SweepConfig::default();
        for seed in 0..10 {
            let cfg = PhantomConfig::<f64>::random(seed);
            let c = truth_contour(&cfg, Phase::Ed, &sweep).unwrap();
            assert_eq!(c.pair_count(), 22);
            let mids = lvid_midpoints(&c);
            let model = PhantomModel::new(cfg.clone());
            for m in &mids {
                assert!(model.long_axis().distance_to(*m) < 1e-9);
            }
            let fit = fit_long_axis(&mids, &LongAxisFitConfig { alpha: 1e-12 }).unwrap();
            let err = fit.direction.cross(model.u).abs().asin().to_degrees();
            assert!(err < 1e-6, "axis error {err} deg");

            let (_, truth) = generate_phantom(&cfg).unwrap();
            let sl = place_scanline(&c, &fit, crate::geometry::default_half_length(&c), cfg.bounds()).unwrap();
            assert!(sl.midpoint().distance(truth.true_scanline.midpoint()) < 1e-6);
        }
    }

    #[test]
    fn crossings_match_landmarks() {
        let (_, truth) = generate_phantom(&PhantomConfig::<f64>::default()).unwrap();
        let model = truth.model();
        for phase in Phase::ALL {
            let t = model.crossings(&truth.true_scanline, model.phase_fraction_of(phase)).unwrap();
            let sl = truth.true_scanline;
            for (ti, lm) in t.iter().zip(truth.landmarks(phase)) {
                let q = sl.p1 + (sl.p2 - sl.p1) * *ti;
                assert!(q.distance(lm) < 1e-9);
            }
        }
        let outside = ScanLine::new(Point2D::new(0.0, 0.0), Point2D::new(1.0, 0.0)).unwrap();
        assert!(model.crossings(&outside, 0.0).is_none());
    }

    #[test]
    fn phase_interpolation_is_sinusoidal() {
        let model = PhantomModel::new(PhantomConfig::<f64>::default());
        assert_eq!(model.phase_fraction(0), 0.0);
        assert_eq!(model.phase_fraction(8), 1.0);
        assert_abs_diff_eq!(model.phase_fraction(4), 0.5, epsilon = 1e-12);
        let [_, lvid, _] = model.dims_cm(0.5);
        assert_abs_diff_eq!(lvid, (4.8 + 3.2) / 2.0, epsilon = 1e-12);
    }
}
