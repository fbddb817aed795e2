//! Adaptive per-pixel background subtraction.
//!
//! Every pixel keeps a bank of `N` past background samples plus two adaptive
//! scalars: a decision threshold `R(x)` and an update period `T(x)`. A pixel
//! is background when at least `min_matches` bank samples lie within `R(x)`
//! of its current intensity. The model is updated conservatively: foreground
//! pixels never absorb their own intensity; they can only be reclaimed
//! through neighbor diffusion or by `R(x)` growing until old samples match
//! again.
//!
//! Update semantics, in order, for each call to [`SegmenterState::update_model`]:
//!
//! 1. Adaptation pass (every pixel, reads the bank as it was when the frame
//!    arrived): `d_min = min_k |sample_k - intensity|`, then
//!    `dmin_avg <- (1-a) * dmin_avg + a * d_min` with `a = 1/N`, then
//!    `R <- R * (1 - R_adapt)` if `R > dmin_avg * R_scale` else
//!    `R * (1 + R_adapt)` (clamped to `[R_lower, R_upper]`), then
//!    `T <- T + T_inc / max(dmin_avg, 1)` for foreground pixels or
//!    `T - T_dec / max(dmin_avg, 1)` for background (clamped to
//!    `[T_lower, T_upper]`).
//! 2. Stochastic pass (background pixels only, row-major): with probability
//!    `1/T(x)` replace a random own bank slot with the pixel's intensity,
//!    and independently with probability `1/T(x)` pick one of the 8
//!    neighbors and replace a random slot of the neighbor's bank with the
//!    *neighbor's* current intensity. Off-frame neighbors are skipped.
//!
//! Randomness comes from [`PixelRng`] keyed by `(seed, frame index, pixel
//! index)` with a fixed draw order per pixel: self-event uniform, self slot,
//! diffusion uniform, neighbor choice, neighbor slot (later draws skipped
//! when an event does not fire). The update is therefore independent of
//! pixel visit order and reproducible bit for bit.

use std::io::{self, Write};

use crate::geometry::FrameDims;
use crate::rng::PixelRng;
use crate::videoio::Frame;

/// Scan-order offsets of the 8-neighborhood, center excluded.
const NEIGHBORS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Initial bank samples are the first frame plus uniform noise in this range.
const INIT_NOISE: i32 = 10;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SegmenterError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("frame is {got:?} but the model was built for {expected:?}")]
    DimsMismatch { expected: FrameDims, got: FrameDims },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterConfig {
    /// Bank size N.
    pub n_samples: u32,
    /// Samples within R required to call a pixel background.
    pub min_matches: u32,
    pub r_init: f32,
    pub r_lower: f32,
    pub r_upper: f32,
    /// R is pushed down while `R > dmin_avg * r_scale`, up otherwise.
    pub r_scale: f32,
    /// Multiplicative step for R, per frame.
    pub r_adapt: f32,
    pub t_init: f32,
    pub t_lower: f32,
    pub t_upper: f32,
    /// Additive T step for foreground pixels, scaled by 1/dmin_avg.
    pub t_inc: f32,
    /// Additive T step for background pixels, scaled by 1/dmin_avg.
    pub t_dec: f32,
    pub seed: u64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            n_samples: 20,
            min_matches: 2,
            r_init: 18.0,
            r_lower: 18.0,
            r_upper: 255.0,
            r_scale: 5.0,
            r_adapt: 0.05,
            t_init: 18.0,
            t_lower: 2.0,
            t_upper: 200.0,
            t_inc: 1.0,
            t_dec: 0.05,
            seed: 1,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmenterError> {
        let bad = |msg: String| Err(SegmenterError::InvalidConfig(msg));
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1".into());
        }
        if self.min_matches == 0 || self.min_matches > self.n_samples {
            return bad(format!(
                "min_matches must be in 1..={}, got {}",
                self.n_samples, self.min_matches
            ));
        }
        if !(self.r_lower > 0.0 && self.r_lower <= self.r_init && self.r_init <= self.r_upper) {
            return bad(format!(
                "need 0 < r_lower <= r_init <= r_upper, got {} / {} / {}",
                self.r_lower, self.r_init, self.r_upper
            ));
        }
        if !(0.0..1.0).contains(&self.r_adapt) || self.r_scale <= 0.0 {
            return bad("r_adapt must be in [0, 1) and r_scale positive".into());
        }
        // T is used as a period: probability 1/T must stay <= 1.
        if !(self.t_lower >= 1.0 && self.t_lower <= self.t_init && self.t_init <= self.t_upper) {
            return bad(format!(
                "need 1 <= t_lower <= t_init <= t_upper, got {} / {} / {}",
                self.t_lower, self.t_init, self.t_upper
            ));
        }
        if self.t_inc < 0.0 || self.t_dec < 0.0 {
            return bad("t_inc and t_dec must be non-negative".into());
        }
        Ok(())
    }
}

/// Per-frame classification result. `true` means foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForegroundMask {
    dims: FrameDims,
    data: Vec<bool>,
}

impl ForegroundMask {
    pub fn all_background(dims: FrameDims) -> Self {
        ForegroundMask {
            dims,
            data: vec![false; dims.pixel_count()],
        }
    }

    pub fn from_data(dims: FrameDims, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), dims.pixel_count());
        ForegroundMask { dims, data }
    }

    pub fn dims(&self) -> FrameDims {
        self.dims
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.dims.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, fg: bool) {
        self.data[(y * self.dims.width + x) as usize] = fg;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// 255 for foreground, 0 for background; the on-disk mask encoding.
    pub fn to_luma(&self) -> Vec<u8> {
        self.data.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }
}

/// Read-only view of one pixel's model.
#[derive(Debug)]
pub struct PixelModel<'a> {
    pub samples: &'a [u8],
    pub r: f32,
    pub t: f32,
    pub dmin_avg: f32,
}

/// The full background model: per pixel, `n_samples` bank bytes plus the
/// three adaptive scalars, stored as flat arrays (bank is pixel-major).
#[derive(Debug, Clone)]
pub struct SegmenterState {
    cfg: SegmenterConfig,
    dims: FrameDims,
    samples: Vec<u8>,
    r: Vec<f32>,
    t: Vec<f32>,
    dmin_avg: Vec<f32>,
}

impl SegmenterState {
    /// Builds the model from the first frame: each bank slot is the frame
    /// intensity plus uniform noise in [-10, +10], clamped to [0, 255].
    pub fn init_model(frame: &Frame, cfg: SegmenterConfig) -> Result<Self, SegmenterError> {
        cfg.validate()?;
        let dims = frame.dims;
        let npx = dims.pixel_count();
        let n = cfg.n_samples as usize;
        let mut samples = vec![0u8; npx * n];
        for p in 0..npx {
            let mut rng = PixelRng::new(cfg.seed, frame.index, p as u64);
            let base = frame.luma[p] as i32;
            for slot in &mut samples[p * n..(p + 1) * n] {
                let noise = rng.next_in_range(-INIT_NOISE, INIT_NOISE);
                *slot = (base + noise).clamp(0, 255) as u8;
            }
        }
        Ok(SegmenterState {
            cfg,
            dims,
            samples,
            r: vec![cfg.r_init; npx],
            t: vec![cfg.t_init; npx],
            dmin_avg: vec![0.0; npx],
        })
    }

    pub fn dims(&self) -> FrameDims {
        self.dims
    }

    pub fn config(&self) -> &SegmenterConfig {
        &self.cfg
    }

    pub fn pixel_model(&self, x: u32, y: u32) -> PixelModel<'_> {
        let p = (y * self.dims.width + x) as usize;
        let n = self.cfg.n_samples as usize;
        PixelModel {
            samples: &self.samples[p * n..(p + 1) * n],
            r: self.r[p],
            t: self.t[p],
            dmin_avg: self.dmin_avg[p],
        }
    }

    fn check_dims(&self, got: FrameDims) -> Result<(), SegmenterError> {
        if got != self.dims {
            return Err(SegmenterError::DimsMismatch {
                expected: self.dims,
                got,
            });
        }
        Ok(())
    }

    /// Classifies each pixel against the current model. Pure: the model is
    /// not touched, so segment/update can be split across pipeline stages.
    pub fn segment(&self, frame: &Frame) -> Result<ForegroundMask, SegmenterError> {
        self.check_dims(frame.dims)?;
        let n = self.cfg.n_samples as usize;
        let need = self.cfg.min_matches;
        let npx = self.dims.pixel_count();
        let mut data = vec![false; npx];
        for (p, out) in data.iter_mut().enumerate() {
            let intensity = frame.luma[p] as i32;
            let r = self.r[p];
            let mut matches = 0u32;
            for &s in &self.samples[p * n..(p + 1) * n] {
                if (((s as i32) - intensity).abs() as f32) < r {
                    matches += 1;
                    if matches >= need {
                        break;
                    }
                }
            }
            *out = matches < need;
        }
        Ok(ForegroundMask {
            dims: self.dims,
            data,
        })
    }

    /// Adapts thresholds and rates for every pixel, then stochastically
    /// refreshes background banks. See the module docs for the exact order.
    pub fn update_model(
        &mut self,
        frame: &Frame,
        mask: &ForegroundMask,
    ) -> Result<(), SegmenterError> {
        self.check_dims(frame.dims)?;
        self.check_dims(mask.dims)?;
        let cfg = self.cfg;
        let n = cfg.n_samples as usize;
        let npx = self.dims.pixel_count();
        let alpha = 1.0 / cfg.n_samples as f32;

        // Adaptation pass: banks are read before any replacement below.
        for p in 0..npx {
            let intensity = frame.luma[p] as i32;
            let mut d_min = i32::MAX;
            for &s in &self.samples[p * n..(p + 1) * n] {
                d_min = d_min.min(((s as i32) - intensity).abs());
            }
            let davg = (1.0 - alpha) * self.dmin_avg[p] + alpha * d_min as f32;
            self.dmin_avg[p] = davg;

            let r = self.r[p];
            let stepped = if r > davg * cfg.r_scale {
                r * (1.0 - cfg.r_adapt)
            } else {
                r * (1.0 + cfg.r_adapt)
            };
            self.r[p] = stepped.clamp(cfg.r_lower, cfg.r_upper);

            let denom = davg.max(1.0);
            let t = self.t[p];
            let stepped = if mask.data[p] {
                t + cfg.t_inc / denom
            } else {
                t - cfg.t_dec / denom
            };
            self.t[p] = stepped.clamp(cfg.t_lower, cfg.t_upper);
        }

        // Stochastic pass over background pixels, using the rates adapted
        // above. Foreground pixels draw nothing.
        let width = self.dims.width as i64;
        let height = self.dims.height as i64;
        for y in 0..height {
            for x in 0..width {
                let p = (y * width + x) as usize;
                if mask.data[p] {
                    continue;
                }
                let mut rng = PixelRng::new(cfg.seed, frame.index, p as u64);
                let inv_t = 1.0 / self.t[p] as f64;
                if rng.next_f64() < inv_t {
                    let slot = rng.next_below(cfg.n_samples) as usize;
                    self.samples[p * n + slot] = frame.luma[p];
                }
                if rng.next_f64() < inv_t {
                    let (dx, dy) = NEIGHBORS[rng.next_below(8) as usize];
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && nx < width && ny >= 0 && ny < height {
                        let q = (ny * width + nx) as usize;
                        let slot = rng.next_below(cfg.n_samples) as usize;
                        self.samples[q * n + slot] = frame.luma[q];
                    }
                }
            }
        }
        Ok(())
    }

    /// Swaps in new parameters. The bank size is fixed at init; R and T are
    /// re-clamped into the new bounds immediately.
    pub fn set_params(&mut self, cfg: SegmenterConfig) -> Result<(), SegmenterError> {
        cfg.validate()?;
        if cfg.n_samples != self.cfg.n_samples {
            return Err(SegmenterError::InvalidConfig(format!(
                "n_samples is fixed at init ({} requested, model has {})",
                cfg.n_samples, self.cfg.n_samples
            )));
        }
        self.cfg = cfg;
        for r in &mut self.r {
            *r = r.clamp(cfg.r_lower, cfg.r_upper);
        }
        for t in &mut self.t {
            *t = t.clamp(cfg.t_lower, cfg.t_upper);
        }
        Ok(())
    }

    /// Raw little-endian dump: `width u32, height u32, n_samples u32`, then
    /// per pixel in row-major order its bank bytes followed by R, T and
    /// dmin_avg as f32. Equal states produce equal bytes on any platform.
    pub fn write_snapshot(&self, out: &mut impl Write) -> io::Result<()> {
        out.write_all(&self.dims.width.to_le_bytes())?;
        out.write_all(&self.dims.height.to_le_bytes())?;
        out.write_all(&self.cfg.n_samples.to_le_bytes())?;
        let n = self.cfg.n_samples as usize;
        for p in 0..self.dims.pixel_count() {
            out.write_all(&self.samples[p * n..(p + 1) * n])?;
            out.write_all(&self.r[p].to_le_bytes())?;
            out.write_all(&self.t[p].to_le_bytes())?;
            out.write_all(&self.dmin_avg[p].to_le_bytes())?;
        }
        Ok(())
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_snapshot(&mut out)
            .expect("vec write cannot fail");
        out
    }
}
