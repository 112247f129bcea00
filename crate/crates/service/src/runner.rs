//! Pipeline wiring shared by the batch CLI and the HTTP service.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lvam_core::amm::Phase;
use lvam_core::detectors::{AmmDetector, HeatmapFileDetector, OracleDetector, ProfileDetector, SweepConfig};
use lvam_core::metrics::{build_report, EvalRecord};
use lvam_core::phantom::generate_phantom_with_sweep;
use lvam_core::pipeline::{run_auto, run_with_scanline, ContourSource, FixedContour, SweepContourSource};
use lvam_core::{Config, Outcome, Phantom, Record, Report, Scanline, Stage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{discover, load_bundle, write_bundle, write_json, BasalAnnotation, LoadedStudy, Manifest};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    /// Analytic phantom landmarks (needs truth.json).
    Oracle,
    /// Intensity-threshold profile detector.
    Profile,
    /// Heatmap tensors from the bundle's heatmaps/ directory.
    Heatmaps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ContourKind {
    /// Ground-truth contour from truth.json.
    Truth,
    /// Scanline sweep from the annotated basal pairs.
    Weak,
    /// Precomputed contour file referenced by the manifest.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub pipeline: Config,
    pub detector: DetectorKind,
    pub contour: ContourKind,
    /// Oracle landmark noise in pixels.
    pub oracle_noise_px: f64,
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            pipeline: Config::default(),
            detector: DetectorKind::Profile,
            contour: ContourKind::Weak,
            oracle_noise_px: 0.0,
            seed: 0,
        }
    }
}

/// FNV-1a, so per-study seeds do not depend on input order.
fn study_seed(seed: u64, id: &str, phase: Phase) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in id.bytes().chain(phase.as_str().bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl RunOptions {
    pub fn validate(&self) -> Result<()> {
        self.pipeline.sweep.validate()?;
        self.pipeline.loss.validate()?;
        if self.pipeline.samples < 2 {
            return Err(Error::Config("samples must be >= 2".into()));
        }
        if !(self.pipeline.fit.alpha >= 0.0) {
            return Err(Error::Config("alpha must be >= 0".into()));
        }
        if !(self.oracle_noise_px >= 0.0) {
            return Err(Error::Config("oracle noise must be >= 0".into()));
        }
        Ok(())
    }

    pub fn detector(&self, s: &LoadedStudy, phase: Phase) -> Result<Arc<dyn AmmDetector<f64>>> {
        Ok(match self.detector {
            DetectorKind::Oracle => {
                let truth = s
                    .truth
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("{}: oracle detector needs truth.json", s.id())))?;
                Arc::new(OracleDetector::new(truth, self.oracle_noise_px, study_seed(self.seed, s.id(), phase)))
            }
            DetectorKind::Profile => Arc::new(ProfileDetector::default()),
            DetectorKind::Heatmaps => Arc::new(HeatmapFileDetector::in_dir(&s.heatmap_dir(), phase)),
        })
    }

    /// Heatmap files describe only the measurement AMM, so sweeps fall back
    /// to the profile detector.
    fn sweep_detector(&self, s: &LoadedStudy, phase: Phase) -> Result<Arc<dyn AmmDetector<f64>>> {
        match self.detector {
            DetectorKind::Heatmaps => Ok(Arc::new(ProfileDetector::default())),
            _ => self.detector(s, phase),
        }
    }

    pub fn contour_source(&self, s: &LoadedStudy, phase: Phase) -> Result<Box<dyn ContourSource<f64>>> {
        Ok(match self.contour {
            ContourKind::Truth => {
                let t = s
                    .truth
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("{}: truth contour needs truth.json", s.id())))?;
                Box::new(FixedContour {
                    id: "truth".into(),
                    ed: Some(t.contour_ed.clone()),
                    es: Some(t.contour_es.clone()),
                })
            }
            ContourKind::File => {
                let c = s
                    .contour
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("{}: manifest references no contour file", s.id())))?;
                Box::new(FixedContour { id: "file".into(), ed: c.ed.clone(), es: c.es.clone() })
            }
            ContourKind::Weak => {
                let missing = || Error::Config(format!("{}: weak contour needs basal pairs", s.id()));
                Box::new(SweepContourSource {
                    basal_ed: s.basal_pairs(Phase::Ed).ok_or_else(missing)?,
                    basal_es: s.basal_pairs(Phase::Es).ok_or_else(missing)?,
                    detector: self.sweep_detector(s, phase)?,
                    sweep: self.pipeline.sweep,
                    samples: self.pipeline.samples,
                })
            }
        })
    }

    pub fn run(&self, s: &LoadedStudy, phase: Phase) -> Result<Outcome> {
        let detector = self.detector(s, phase)?;
        let source = self.contour_source(s, phase)?;
        Ok(run_auto(&s.study, phase, source.as_ref(), detector.as_ref(), &self.pipeline)?)
    }

    pub fn run_with_scanline(&self, s: &LoadedStudy, phase: Phase, sl: &Scanline) -> Result<Outcome> {
        let detector = self.detector(s, phase)?;
        Ok(run_with_scanline(&s.study, phase, sl, detector.as_ref(), &self.pipeline)?)
    }
}

/// Generates a phantom and writes it as a bundle named after `dir`.
pub fn materialize_phantom(dir: &Path, cfg: &Phantom, sweep: &SweepConfig<f64>) -> Result<Manifest> {
    let (study, truth) = generate_phantom_with_sweep(cfg, sweep)?;
    truth.check_invariants(1e-9)?;
    let basal = BasalAnnotation { ed: truth.contour_ed.basal_pairs, es: truth.contour_es.basal_pairs };
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Config(format!("bad bundle directory {}", dir.display())))?;
    write_bundle(dir, id, &study, Some(&truth), Some(&basal))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub study: String,
    pub phase: Option<Phase>,
    pub stage: Option<Stage>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub phases: Vec<Phase>,
    /// SDR thresholds in cm.
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub studies: usize,
    pub results: usize,
    pub failures: Vec<Failure>,
    pub report: Option<Report>,
}

enum PhaseOutcome {
    Done(Box<(Outcome, Option<Record>)>),
    Failed(Failure),
}

fn run_one(s: &LoadedStudy, phase: Phase, opts: &RunOptions) -> PhaseOutcome {
    match opts.run(s, phase) {
        Ok(r) => {
            let record = s
                .truth
                .as_ref()
                .map(|t| EvalRecord::from_result(s.id(), s.group(), &r, t.measurements(phase), s.study.pixel_spacing));
            PhaseOutcome::Done(Box::new((r, record)))
        }
        Err(e) => PhaseOutcome::Failed(Failure {
            study: s.id().to_string(),
            phase: Some(phase),
            stage: match &e {
                Error::Core(c) => c.stage(),
                _ => None,
            },
            message: e.to_string(),
        }),
    }
}

/// Runs every phase of every discovered bundle and writes
/// `results/<study>_<phase>.json`, `failures.json` and, when ground truth is
/// available, `report.json`, `report.csv` and `sdr.csv` into `out`.
pub fn run_batch(inputs: &[PathBuf], out: &Path, opts: &RunOptions, batch: &BatchOptions) -> Result<BatchSummary> {
    opts.validate()?;
    let dirs = discover(inputs)?;
    if dirs.is_empty() {
        return Err(Error::Config("no study bundles found".into()));
    }

    let loaded: Vec<(PathBuf, Result<LoadedStudy>)> = dirs.par_iter().map(|d| (d.clone(), load_bundle(d))).collect();
    let mut failures = Vec::new();
    let mut studies = Vec::new();
    for (dir, l) in loaded {
        match l {
            Ok(s) => studies.push(s),
            Err(e) => failures.push(Failure {
                study: dir.display().to_string(),
                phase: None,
                stage: None,
                message: e.to_string(),
            }),
        }
    }
    studies.sort_by(|a, b| a.id().cmp(b.id()));
    if let Some(w) = studies.windows(2).find(|w| w[0].id() == w[1].id()) {
        return Err(Error::Config(format!("duplicate study id {}", w[0].id())));
    }

    let jobs: Vec<(&LoadedStudy, Phase)> =
        studies.iter().flat_map(|s| batch.phases.iter().map(move |p| (s, *p))).collect();
    let outcomes: Vec<PhaseOutcome> = jobs.par_iter().map(|(s, p)| run_one(s, *p, opts)).collect();

    let results_dir = out.join("results");
    fs::create_dir_all(&results_dir).map_err(|e| Error::io(&results_dir, e))?;
    let mut records = Vec::new();
    let mut results = 0;
    for ((s, phase), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            PhaseOutcome::Done(done) => {
                let (r, record) = *done;
                write_json(&results_dir.join(format!("{}_{phase}.json", s.id())), &r)?;
                records.extend(record);
                results += 1;
            }
            PhaseOutcome::Failed(f) => failures.push(f),
        }
    }
    write_json(&out.join("failures.json"), &failures)?;

    let report = if records.is_empty() {
        None
    } else {
        let report = build_report(&records, &batch.thresholds)?;
        write_json(&out.join("report.json"), &report)?;
        let csv = out.join("report.csv");
        fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let sdr = out.join("sdr.csv");
        fs::write(&sdr, report.sdr_csv()).map_err(|e| Error::io(&sdr, e))?;
        Some(report)
    };

    Ok(BatchSummary { studies: studies.len(), results, failures, report })
}
