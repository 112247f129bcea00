//! On-disk study bundles.
//!
//! ```text
//! <bundle>/
//!   manifest.json
//!   frames/000.png ...       8-bit grayscale, one per frame
//!   truth.json               optional phantom ground truth
//!   basal.json               optional basal-pair annotation
//!   contour.json             optional precomputed contours
//!   heatmaps/                optional `<phase>_<k>.f32` detector outputs
//!   results/accepted_<phase>.json
//! ```

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat};
use lvam_core::amm::Phase;
use lvam_core::{Contour, Pair, Study, Truth};
use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub pixel_spacing_cm: f64,
    pub height: usize,
    pub width: usize,
    /// Frame image paths relative to the bundle.
    pub frames: Vec<String>,
    pub anchor_ed: usize,
    pub anchor_es: usize,
    /// Aggregation group (e.g. a fold) for evaluation reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default)]
    pub annotations: Annotations,
}

/// Paths (relative to the bundle) of optional annotation files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmaps: Option<String>,
}

/// Two annotated basal LVID pairs per phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasalAnnotation {
    pub ed: [Pair; 2],
    pub es: [Pair; 2],
}

impl BasalAnnotation {
    pub fn get(&self, phase: Phase) -> [Pair; 2] {
        match phase {
            Phase::Ed => self.ed,
            Phase::Es => self.es,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContourAnnotation {
    pub ed: Option<Contour>,
    pub es: Option<Contour>,
}

/// A bundle loaded into memory. Frame intensities are in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LoadedStudy {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub study: Study,
    pub truth: Option<Truth>,
    pub basal: Option<BasalAnnotation>,
    pub contour: Option<ContourAnnotation>,
}

impl LoadedStudy {
    pub fn id(&self) -> &str {
        &self.manifest.id
    }

    pub fn group(&self) -> &str {
        self.manifest.group.as_deref().unwrap_or("all")
    }

    /// Annotated basal pairs, falling back to the ground-truth contour.
    pub fn basal_pairs(&self, phase: Phase) -> Option<[Pair; 2]> {
        self.basal.map(|b| b.get(phase)).or_else(|| self.truth.as_ref().map(|t| t.contour(phase).basal_pairs))
    }

    pub fn heatmap_dir(&self) -> PathBuf {
        self.dir.join(self.manifest.annotations.heatmaps.as_deref().unwrap_or("heatmaps"))
    }

    pub fn frame_path(&self, index: usize) -> Option<PathBuf> {
        self.manifest.frames.get(index).map(|f| self.dir.join(f))
    }

    pub fn accepted_path(&self, phase: Phase) -> PathBuf {
        accepted_path(&self.dir, phase)
    }
}

pub fn accepted_path(dir: &Path, phase: Phase) -> PathBuf {
    dir.join("results").join(format!("accepted_{phase}.json"))
}

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes a grid as 8-bit grayscale PNG, rows top to bottom.
pub fn encode_png(grid: &Array2<f64>) -> Result<Vec<u8>> {
    let (h, w) = grid.dim();
    let pixels: Vec<u8> = grid.iter().map(|v| quantize(*v)).collect();
    let img = GrayImage::from_raw(w as u32, h as u32, pixels)
        .ok_or_else(|| Error::Bundle(format!("cannot build a {h}x{w} image")))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Decodes a PNG to grayscale intensities in `[0, 1]`.
pub fn decode_png(bytes: &[u8]) -> Result<Array2<f64>> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_luma8();
    let (w, h) = img.dimensions();
    let values = img.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect();
    Array2::from_shape_vec((h as usize, w as usize), values).map_err(|e| Error::Bundle(e.to_string()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a study and its optional annotations as a bundle in `dir`.
pub fn write_bundle(
    dir: &Path,
    id: &str,
    study: &Study,
    truth: Option<&Truth>,
    basal: Option<&BasalAnnotation>,
) -> Result<Manifest> {
    study.validate()?;
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let mut frames = Vec::with_capacity(study.frames.len());
    for (t, frame) in study.frames.iter().enumerate() {
        let rel = format!("frames/{t:03}.png");
        let path = dir.join(&rel);
        fs::write(&path, encode_png(frame)?).map_err(|e| Error::io(&path, e))?;
        frames.push(rel);
    }
    let mut annotations = Annotations::default();
    if let Some(truth) = truth {
        write_json(&dir.join("truth.json"), truth)?;
        annotations.truth = Some("truth.json".into());
    }
    if let Some(basal) = basal {
        write_json(&dir.join("basal.json"), basal)?;
        annotations.basal = Some("basal.json".into());
    }
    let bounds = study.bounds();
    let manifest = Manifest {
        id: id.to_string(),
        pixel_spacing_cm: study.pixel_spacing,
        height: bounds.height,
        width: bounds.width,
        frames,
        anchor_ed: study.anchor_ed,
        anchor_es: study.anchor_es,
        group: None,
        annotations,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn load_bundle(dir: &Path) -> Result<LoadedStudy> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    if !(manifest.pixel_spacing_cm > 0.0) {
        return Err(Error::Bundle(format!("{}: pixel_spacing_cm must be > 0", manifest.id)));
    }
    if manifest.frames.is_empty() {
        return Err(Error::Bundle(format!("{}: manifest lists no frames", manifest.id)));
    }
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for rel in &manifest.frames {
        let path = dir.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let frame = decode_png(&bytes)?;
        if frame.dim() != (manifest.height, manifest.width) {
            return Err(Error::Bundle(format!(
                "{}: frame {rel} is {:?}, manifest says {}x{}",
                manifest.id,
                frame.dim(),
                manifest.height,
                manifest.width
            )));
        }
        frames.push(frame);
    }
    let study = Study::new(frames, manifest.pixel_spacing_cm, manifest.anchor_ed, manifest.anchor_es)?;
    let opt = |rel: &Option<String>| rel.as_ref().map(|r| dir.join(r));
    let a = &manifest.annotations;
    let truth = opt(&a.truth).map(|p| read_json(&p)).transpose()?;
    let basal = opt(&a.basal).map(|p| read_json(&p)).transpose()?;
    let contour = opt(&a.contour).map(|p| read_json(&p)).transpose()?;
    Ok(LoadedStudy { dir: dir.to_path_buf(), manifest, study, truth, basal, contour })
}

/// Expands inputs to bundle directories: a path holding a manifest is a
/// bundle, any other directory is searched one level deep. Sorted, deduplicated.
pub fn discover(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    for input in inputs {
        if input.join(MANIFEST).is_file() {
            found.push(input.clone());
            continue;
        }
        let entries = fs::read_dir(input).map_err(|e| Error::io(input, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(input, e))?.path();
            if path.join(MANIFEST).is_file() {
                found.push(path);
            }
        }
    }
    found.sort();
    found.dedup();
    Ok(found)
}
