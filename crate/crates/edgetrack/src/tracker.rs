//! Single-object appearance tracking.
//!
//! Each track keeps a fixed-size template of the object and regresses the
//! new box inside a search region: the previous box scaled by
//! `context_factor` about its center and clamped to the frame.
//!
//! Two backends share that contract. The default fallback scores every
//! integer placement of the box inside the search region by plain
//! normalized cross-correlation and takes the best one. Plain (not
//! zero-mean) correlation is deliberate: objects of uniform intensity have
//! zero-variance templates, which zero-mean correlation cannot score at
//! all. The optional learned backend loads a patch regressor from disk and
//! maps its normalized output box back into frame coordinates.
//!
//! All arithmetic is integer except the final score division, so a given
//! frame sequence tracks identically on any platform.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::geometry::{BoundingBox, FrameDims, GeometryError};
use crate::videoio::Frame;

/// Side of the square template the fallback matcher compares against.
pub const FALLBACK_TEMPLATE_SIZE: u32 = 64;

/// Boxes narrower or shorter than this carry too little texture to track.
pub const MIN_TRACK_BOX_SIDE: u32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum TrackerError {
    #[error("box {0:?} is too small to track (min side {MIN_TRACK_BOX_SIDE})")]
    BoxTooSmall(BoundingBox),
    #[error("{0}")]
    OutOfFrame(#[from] GeometryError),
    #[error("search region {region:?} cannot contain a {w}x{h} box")]
    DegenerateSearchRegion { region: BoundingBox, w: u32, h: u32 },
    #[error("cannot load tracker model {path}: {msg}")]
    ModelLoadFailure { path: PathBuf, msg: String },
}

/// Which tracking backend to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrackerKind {
    /// Exhaustive normalized cross-correlation. No external files.
    Fallback,
    /// Patch regressor loaded from a JSON file.
    Model(PathBuf),
}

/// Appearance-regression model: a single linear layer from the two stacked
/// normalized patches (template, search) to a normalized output box.
///
/// File format (JSON): `patch_size`, `bias` (4 floats, the output box as
/// `x1 y1 x2 y2` fractions of the search region), and optional flat
/// `weights` of length `4 * 2 * patch_size^2`, row-major per output.
#[derive(Debug, Deserialize)]
pub struct PatchRegressor {
    patch_size: u32,
    bias: [f32; 4],
    #[serde(default)]
    weights: Option<Vec<f32>>,
}

impl PatchRegressor {
    fn load(path: &Path) -> Result<Self, TrackerError> {
        let fail = |msg: String| TrackerError::ModelLoadFailure {
            path: path.to_path_buf(),
            msg,
        };
        let bytes = std::fs::read(path).map_err(|e| fail(e.to_string()))?;
        let model: PatchRegressor =
            serde_json::from_slice(&bytes).map_err(|e| fail(e.to_string()))?;
        if model.patch_size == 0 {
            return Err(fail("patch_size must be positive".into()));
        }
        if let Some(w) = &model.weights {
            let expected = 4 * 2 * (model.patch_size as usize).pow(2);
            if w.len() != expected {
                return Err(fail(format!(
                    "expected {expected} weights, got {}",
                    w.len()
                )));
            }
        }
        Ok(model)
    }

    /// Both patches are `patch_size^2` bytes; intensities are scaled to
    /// [0, 1] before the dot products.
    fn infer(&self, template: &[u8], search: &[u8]) -> [f32; 4] {
        let mut out = self.bias;
        if let Some(weights) = &self.weights {
            let len = (self.patch_size as usize).pow(2);
            let row = 2 * len;
            for (k, o) in out.iter_mut().enumerate() {
                let w = &weights[k * row..(k + 1) * row];
                let mut acc = 0.0f32;
                for (i, &px) in template.iter().enumerate() {
                    acc += w[i] * (px as f32 / 255.0);
                }
                for (i, &px) in search.iter().enumerate() {
                    acc += w[len + i] * (px as f32 / 255.0);
                }
                *o += acc;
            }
        }
        out
    }
}

/// Loaded backend, shared by every track so a model file is read once.
#[derive(Debug, Clone)]
pub struct TrackerBackend {
    imp: BackendImpl,
}

#[derive(Debug, Clone)]
enum BackendImpl {
    Fallback,
    Model(Arc<PatchRegressor>),
}

impl TrackerBackend {
    pub fn load(kind: &TrackerKind) -> Result<Self, TrackerError> {
        let imp = match kind {
            TrackerKind::Fallback => BackendImpl::Fallback,
            TrackerKind::Model(path) => BackendImpl::Model(Arc::new(PatchRegressor::load(path)?)),
        };
        Ok(TrackerBackend { imp })
    }

    pub fn fallback() -> Self {
        TrackerBackend {
            imp: BackendImpl::Fallback,
        }
    }
}

/// Per-track state: the current box and the template it was last seen as.
#[derive(Debug, Clone)]
pub struct TrackerState {
    backend: TrackerBackend,
    context_factor: f64,
    bbox: BoundingBox,
    template: Vec<u8>,
    template_side: u32,
}

/// Crops `bbox` scaled by `context_factor` about its center, clamps to the
/// frame, and resamples the crop to `out_w x out_h` with center-aligned
/// nearest neighbor. With `context_factor == 1.0` and the output size equal
/// to an in-frame box, this is an exact pixel copy.
pub fn crop_patch(
    frame: &Frame,
    bbox: BoundingBox,
    context_factor: f64,
    out_w: u32,
    out_h: u32,
) -> Result<Vec<u8>, TrackerError> {
    assert!(out_w > 0 && out_h > 0);
    let region = bbox
        .scaled_about_center(context_factor)
        .clamp_to_frame(frame.dims)?;
    let (rw, rh) = (region.w as u64, region.h as u64);
    let mut out = Vec::with_capacity((out_w * out_h) as usize);
    let stride = frame.dims.width as usize;
    for j in 0..out_h as u64 {
        let sy = region.y as u64 + (2 * j + 1) * rh / (2 * out_h as u64);
        let row = &frame.luma[sy as usize * stride..][..stride];
        for i in 0..out_w as u64 {
            let sx = region.x as u64 + (2 * i + 1) * rw / (2 * out_w as u64);
            out.push(row[sx as usize]);
        }
    }
    Ok(out)
}

/// Plain normalized cross-correlation of two equal-length patches:
/// `sum(t*c) / sqrt(sum(t^2) * sum(c^2))`. Sums are exact u64; only the
/// final division is floating point. Two all-zero patches count as a
/// perfect match, one all-zero patch as no match.
pub fn normalized_cross_correlation(t: &[u8], c: &[u8]) -> f64 {
    debug_assert_eq!(t.len(), c.len());
    let mut st2 = 0u64;
    let mut sc2 = 0u64;
    let mut stc = 0u64;
    for (&a, &b) in t.iter().zip(c) {
        st2 += (a as u64) * (a as u64);
        sc2 += (b as u64) * (b as u64);
        stc += (a as u64) * (b as u64);
    }
    if st2 == 0 || sc2 == 0 {
        return if st2 == sc2 { 1.0 } else { 0.0 };
    }
    stc as f64 / ((st2 as f64) * (sc2 as f64)).sqrt()
}

/// Starts a track on `bbox` as it appears in `frame`.
pub fn tracker_init(
    frame: &Frame,
    bbox: BoundingBox,
    backend: &TrackerBackend,
    context_factor: f64,
) -> Result<TrackerState, TrackerError> {
    if bbox.w < MIN_TRACK_BOX_SIDE || bbox.h < MIN_TRACK_BOX_SIDE {
        return Err(TrackerError::BoxTooSmall(bbox));
    }
    let mut state = TrackerState {
        backend: backend.clone(),
        context_factor,
        bbox,
        template: Vec::new(),
        template_side: 0,
    };
    state.refresh_template(frame)?;
    Ok(state)
}

impl TrackerState {
    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    /// Puts the track into an arbitrary position to probe failure paths.
    #[cfg(test)]
    pub(crate) fn set_bbox_for_tests(&mut self, bbox: BoundingBox) {
        self.bbox = bbox;
    }

    fn refresh_template(&mut self, frame: &Frame) -> Result<(), TrackerError> {
        let (side, context) = match &self.backend.imp {
            // Object appearance only; context comes from the search scan.
            BackendImpl::Fallback => (FALLBACK_TEMPLATE_SIZE, 1.0),
            // Regressors see the object with its surroundings.
            BackendImpl::Model(m) => (m.patch_size, self.context_factor),
        };
        self.template = crop_patch(frame, self.bbox, context, side, side)?;
        self.template_side = side;
        Ok(())
    }

    /// Advances the track by one frame, returning the new box. The template
    /// is refreshed from the returned box, so appearance follows the track.
    pub fn tracker_step(&mut self, frame: &Frame) -> Result<BoundingBox, TrackerError> {
        let next = match &self.backend.imp {
            BackendImpl::Fallback => self.step_fallback(frame)?,
            BackendImpl::Model(model) => self.step_model(frame, &Arc::clone(model))?,
        };
        self.bbox = next;
        self.refresh_template(frame)?;
        Ok(next)
    }

    fn search_region(&self, dims: FrameDims) -> Result<BoundingBox, TrackerError> {
        Ok(self
            .bbox
            .scaled_about_center(self.context_factor)
            .clamp_to_frame(dims)?)
    }

    fn step_fallback(&self, frame: &Frame) -> Result<BoundingBox, TrackerError> {
        let region = self.search_region(frame.dims)?;
        let (w, h) = (self.bbox.w, self.bbox.h);
        if region.w < w || region.h < h {
            return Err(TrackerError::DegenerateSearchRegion { region, w, h });
        }

        // All candidate windows share the box size, so one nearest-neighbor
        // index map serves every placement.
        let side = self.template_side as u64;
        let map_x: Vec<usize> = (0..side)
            .map(|i| ((2 * i + 1) * w as u64 / (2 * side)) as usize)
            .collect();
        let map_y: Vec<usize> = (0..side)
            .map(|j| ((2 * j + 1) * h as u64 / (2 * side)) as usize)
            .collect();

        let mut st2 = 0u64;
        for &t in &self.template {
            st2 += (t as u64) * (t as u64);
        }

        let stride = frame.dims.width as usize;
        let mut best_score = f64::NEG_INFINITY;
        let mut best_d2 = i64::MAX;
        let mut best = self.bbox;
        // Scan order: top to bottom, left to right. Ties prefer the smaller
        // displacement, then the earlier scan position.
        for y in region.y..=(region.bottom() - h as i64) as i32 {
            for x in region.x..=(region.right() - w as i64) as i32 {
                let mut sc2 = 0u64;
                let mut stc = 0u64;
                let mut ti = 0usize;
                for &my in &map_y {
                    let row = &frame.luma[(y as usize + my) * stride + x as usize..];
                    for &mx in &map_x {
                        let c = row[mx] as u64;
                        let t = self.template[ti] as u64;
                        sc2 += c * c;
                        stc += t * c;
                        ti += 1;
                    }
                }
                let score = if st2 == 0 || sc2 == 0 {
                    if st2 == sc2 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    stc as f64 / ((st2 as f64) * (sc2 as f64)).sqrt()
                };
                let dx = (x - self.bbox.x) as i64;
                let dy = (y - self.bbox.y) as i64;
                let d2 = dx * dx + dy * dy;
                if score > best_score || (score == best_score && d2 < best_d2) {
                    best_score = score;
                    best_d2 = d2;
                    best = BoundingBox::new(x, y, w, h);
                }
            }
        }
        Ok(best)
    }

    fn step_model(
        &self,
        frame: &Frame,
        model: &PatchRegressor,
    ) -> Result<BoundingBox, TrackerError> {
        let region = self.search_region(frame.dims)?;
        let side = model.patch_size;
        let search = crop_patch(frame, self.bbox, self.context_factor, side, side)?;
        let out = model.infer(&self.template, &search);
        // Outputs are corner fractions of the search region.
        let x1 = region.x as f64 + out[0].clamp(0.0, 1.0) as f64 * region.w as f64;
        let y1 = region.y as f64 + out[1].clamp(0.0, 1.0) as f64 * region.h as f64;
        let x2 = region.x as f64 + out[2].clamp(0.0, 1.0) as f64 * region.w as f64;
        let y2 = region.y as f64 + out[3].clamp(0.0, 1.0) as f64 * region.h as f64;
        let (x1, x2) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        let (y1, y2) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
        let bbox = BoundingBox {
            x: x1.round() as i32,
            y: y1.round() as i32,
            w: ((x2 - x1).round() as u32).max(1),
            h: ((y2 - y1).round() as u32).max(1),
        };
        Ok(bbox.clamp_to_frame(frame.dims)?)
    }
}
