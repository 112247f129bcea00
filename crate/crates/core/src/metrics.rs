//! Evaluation metrics: MAE, MAPE, CE, SDR, scanline distance/angle and
//! Pearson correlation, plus a grouped (e.g. per-fold) report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::amm::Phase;
use crate::error::{Error, Result};
use crate::geometry::{scanline_distance_angle, Point2D, ScanLine};
use crate::pipeline::{MeasurementSet, PipelineResult};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Ivs,
    Lvid,
    Lvpw,
    Overall,
}

impl Structure {
    pub const ALL: [Structure; 4] = [Structure::Ivs, Structure::Lvid, Structure::Lvpw, Structure::Overall];

    pub fn as_str(self) -> &'static str {
        match self {
            Structure::Ivs => "ivs",
            Structure::Lvid => "lvid",
            Structure::Lvpw => "lvpw",
            Structure::Overall => "overall",
        }
    }

    /// Indices into the (IVS, LVID, LVPW) length triple.
    fn length_indices(self) -> &'static [usize] {
        match self {
            Structure::Ivs => &[0],
            Structure::Lvid => &[1],
            Structure::Lvpw => &[2],
            Structure::Overall => &[0, 1, 2],
        }
    }

    /// Landmarks bounding the structure.
    fn landmark_indices(self) -> &'static [usize] {
        match self {
            Structure::Ivs => &[0, 1],
            Structure::Lvid => &[1, 2],
            Structure::Lvpw => &[2, 3],
            Structure::Overall => &[0, 1, 2, 3],
        }
    }
}

/// One predicted-vs-truth comparison for a study phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord<T> {
    pub study_id: String,
    /// Grouping key for mean/std aggregation (e.g. a fold label).
    pub group: String,
    pub phase: Phase,
    pub pixel_spacing: T,
    pub pred_landmarks: [Point2D<T>; 4],
    pub true_landmarks: [Point2D<T>; 4],
    /// (IVS, LVID, LVPW) in cm.
    pub pred_lengths: [T; 3],
    pub true_lengths: [T; 3],
    pub pred_scanline: ScanLine<T>,
    pub true_scanline: ScanLine<T>,
}

impl<T: Scalar> EvalRecord<T> {
    pub fn from_result(
        study_id: impl Into<String>,
        group: impl Into<String>,
        result: &PipelineResult<T>,
        truth: &MeasurementSet<T>,
        pixel_spacing: T,
    ) -> Self {
        Self {
            study_id: study_id.into(),
            group: group.into(),
            phase: result.phase,
            pixel_spacing,
            pred_landmarks: result.measurements.landmarks,
            true_landmarks: truth.landmarks,
            pred_lengths: result.measurements.lengths(),
            true_lengths: truth.lengths(),
            pred_scanline: result.scanline,
            true_scanline: truth.scanline,
        }
    }

    fn abs_error(&self, structure: Structure) -> T {
        mean_of(structure.length_indices().iter().map(|&i| (self.pred_lengths[i] - self.true_lengths[i]).abs()))
    }

    fn rel_error(&self, structure: Structure) -> Result<T> {
        let mut terms = Vec::new();
        for &i in structure.length_indices() {
            let t = self.true_lengths[i];
            if t == T::zero() {
                return Err(Error::InvalidArgument(format!(
                    "{}: zero ground-truth length, MAPE undefined",
                    self.study_id
                )));
            }
            terms.push((self.pred_lengths[i] - t).abs() / t.abs());
        }
        Ok(mean_of(terms.into_iter()))
    }

    fn coord_error(&self, structure: Structure) -> T {
        mean_of(
            structure
                .landmark_indices()
                .iter()
                .map(|&i| self.pred_landmarks[i].distance(self.true_landmarks[i]) * self.pixel_spacing),
        )
    }

    /// (SL(D) in cm, SL(A) in degrees).
    pub fn scanline_error(&self) -> (T, T) {
        scanline_distance_angle(&self.pred_scanline, &self.true_scanline, self.pixel_spacing)
    }
}

fn mean_of<T: Scalar>(it: impl Iterator<Item = T>) -> T {
    let (sum, n) = it.fold((T::zero(), 0usize), |(s, n), v| (s + v, n + 1));
    sum / T::from_usize_lossy(n.max(1))
}

fn non_empty<T>(records: &[EvalRecord<T>]) -> Result<()> {
    if records.is_empty() {
        Err(Error::InvalidArgument("no evaluation records".into()))
    } else {
        Ok(())
    }
}

/// Mean absolute length error (cm).
pub fn mae<T: Scalar>(records: &[EvalRecord<T>], structure: Structure) -> Result<T> {
    non_empty(records)?;
    Ok(mean_of(records.iter().map(|r| r.abs_error(structure))))
}

/// Mean absolute length error relative to ground truth (fraction).
pub fn mape<T: Scalar>(records: &[EvalRecord<T>], structure: Structure) -> Result<T> {
    non_empty(records)?;
    let terms = records.iter().map(|r| r.rel_error(structure)).collect::<Result<Vec<_>>>()?;
    Ok(mean_of(terms.into_iter()))
}

/// Mean landmark coordinate error (cm).
pub fn ce<T: Scalar>(records: &[EvalRecord<T>], structure: Structure) -> Result<T> {
    non_empty(records)?;
    Ok(mean_of(records.iter().map(|r| r.coord_error(structure))))
}

/// Fraction of records whose LVID error is at most `threshold_cm`.
pub fn sdr<T: Scalar>(records: &[EvalRecord<T>], threshold_cm: T) -> Result<T> {
    non_empty(records)?;
    let hits = records.iter().filter(|r| r.abs_error(Structure::Lvid) <= threshold_cm).count();
    Ok(T::from_usize_lossy(hits) / T::from_usize_lossy(records.len()))
}

/// Mean SL(D) (cm) and SL(A) (degrees).
pub fn scanline_errors<T: Scalar>(records: &[EvalRecord<T>]) -> Result<(T, T)> {
    non_empty(records)?;
    let errs: Vec<(T, T)> = records.iter().map(EvalRecord::scanline_error).collect();
    Ok((mean_of(errs.iter().map(|e| e.0)), mean_of(errs.iter().map(|e| e.1))))
}

/// Sample Pearson correlation between predicted and true lengths. `Overall`
/// pools all three structures.
pub fn pearson<T: Scalar>(records: &[EvalRecord<T>], structure: Structure) -> Result<T> {
    let pairs: Vec<(T, T)> = records
        .iter()
        .flat_map(|r| structure.length_indices().iter().map(|&i| (r.pred_lengths[i], r.true_lengths[i])))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "Pearson correlation needs at least 2 values, got {}",
            pairs.len()
        )));
    }
    let mx = mean_of(pairs.iter().map(|p| p.0));
    let my = mean_of(pairs.iter().map(|p| p.1));
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (x, y) in &pairs {
        let (dx, dy) = (*x - mx, *y - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::InvalidArgument("zero variance, correlation undefined".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// `steps` evenly spaced thresholds from 0 to `max_cm` inclusive.
pub fn sdr_thresholds<T: Scalar>(max_cm: T, steps: usize) -> Vec<T> {
    match steps {
        0 => Vec::new(),
        1 => vec![T::zero()],
        _ => (0..steps).map(|i| max_cm * T::from_usize_lossy(i) / T::from_usize_lossy(steps - 1)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Scalar> MeanStd<T> {
    /// Mean and population standard deviation.
    pub fn of(values: &[T]) -> Self {
        let mean = mean_of(values.iter().copied());
        let var = mean_of(values.iter().map(|v| (*v - mean) * (*v - mean)));
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureMetrics<T> {
    pub mae_cm: MeanStd<T>,
    pub mape: MeanStd<T>,
    pub ce_cm: MeanStd<T>,
    /// Over all records; absent when undefined (fewer than 2 values or zero variance).
    pub pearson: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdrPoint<T> {
    pub threshold_cm: T,
    pub sdr: MeanStd<T>,
}

/// Aggregated metrics. Every mean/std is taken across groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<T> {
    pub records: usize,
    pub groups: Vec<String>,
    pub structures: BTreeMap<Structure, StructureMetrics<T>>,
    pub sdr: Vec<SdrPoint<T>>,
    pub sl_distance_cm: MeanStd<T>,
    pub sl_angle_deg: MeanStd<T>,
}

pub fn build_report<T: Scalar>(records: &[EvalRecord<T>], thresholds: &[T]) -> Result<EvalReport<T>> {
    non_empty(records)?;
    let mut groups: BTreeMap<&str, Vec<EvalRecord<T>>> = BTreeMap::new();
    for r in records {
        groups.entry(r.group.as_str()).or_default().push(r.clone());
    }

    let per_group = |f: &dyn Fn(&[EvalRecord<T>]) -> Result<T>| -> Result<MeanStd<T>> {
        let vals = groups.values().map(|g| f(g)).collect::<Result<Vec<_>>>()?;
        Ok(MeanStd::of(&vals))
    };

    let mut structures = BTreeMap::new();
    for s in Structure::ALL {
        structures.insert(
            s,
            StructureMetrics {
                mae_cm: per_group(&|g| mae(g, s))?,
                mape: per_group(&|g| mape(g, s))?,
                ce_cm: per_group(&|g| ce(g, s))?,
                pearson: pearson(records, s).ok(),
            },
        );
    }
    let sdr = thresholds
        .iter()
        .map(|&e| Ok(SdrPoint { threshold_cm: e, sdr: per_group(&|g| sdr(g, e))? }))
        .collect::<Result<Vec<_>>>()?;

    Ok(EvalReport {
        records: records.len(),
        groups: groups.keys().map(|k| k.to_string()).collect(),
        structures,
        sdr,
        sl_distance_cm: per_group(&|g| scanline_errors(g).map(|e| e.0))?,
        sl_angle_deg: per_group(&|g| scanline_errors(g).map(|e| e.1))?,
    })
}

impl<T: Scalar> EvalReport<T> {
    /// Table of every scalar metric: `metric,structure,mean,std`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,structure,mean,std\n");
        for (s, m) in &self.structures {
            for (name, v) in [("mae_cm", m.mae_cm), ("mape", m.mape), ("ce_cm", m.ce_cm)] {
                let _ = writeln!(out, "{name},{},{},{}", s.as_str(), v.mean, v.std);
            }
            if let Some(p) = m.pearson {
                let _ = writeln!(out, "pearson,{},{p},0", s.as_str());
            }
        }
        let _ = writeln!(out, "sl_distance_cm,scanline,{},{}", self.sl_distance_cm.mean, self.sl_distance_cm.std);
        let _ = writeln!(out, "sl_angle_deg,scanline,{},{}", self.sl_angle_deg.mean, self.sl_angle_deg.std);
        out
    }

    /// SDR curve: `threshold_cm,sdr_mean,sdr_std`.
    pub fn sdr_csv(&self) -> String {
        let mut out = String::from("threshold_cm,sdr_mean,sdr_std\n");
        for p in &self.sdr {
            let _ = writeln!(out, "{},{},{}", p.threshold_cm, p.sdr.mean, p.sdr.std);
        }
        out
    }
}
