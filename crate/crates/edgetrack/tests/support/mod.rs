//! Oracles and scene helpers for the integration tests.
//!
//! The reference RNG and reference segmenter here are written from the
//! documented contracts with the most naive code that can work, on purpose:
//! they share no logic with the library, so when the two disagree the test
//! failure points at a real bug instead of a bug mirrored in both places.

#![allow(dead_code)]

use edgetrack::geometry::FrameDims;
use edgetrack::segmenter::SegmenterConfig;
use edgetrack::videoio::{Frame, FrameSource, VideoError};

// --- reference RNG ------------------------------------------------------

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const FRAME_SALT: u64 = 0xA24B_AED4_963E_E407;
const PIXEL_SALT: u64 = 0x9FB2_1C65_1E98_DF25;

fn ref_mix(z: u64) -> u64 {
    let z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Naive re-expression of the counter-based pixel RNG.
pub struct RefRng {
    state: u64,
}

impl RefRng {
    pub fn new(seed: u64, frame_index: u64, pixel_index: u64) -> Self {
        let a = ref_mix(seed ^ GAMMA);
        let b = ref_mix(a ^ frame_index.wrapping_mul(FRAME_SALT));
        let c = ref_mix(b ^ pixel_index.wrapping_mul(PIXEL_SALT));
        RefRng { state: c }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        ref_mix(self.state)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / 9007199254740992.0
    }

    pub fn next_below(&mut self, n: u32) -> u32 {
        (self.next_u64() % n as u64) as u32
    }

    pub fn next_in_range(&mut self, lo: i32, hi: i32) -> i32 {
        let span = (hi - lo + 1) as u64;
        lo + (self.next_u64() % span) as i32
    }
}

// --- reference segmenter -------------------------------------------------

/// One bank per pixel, plain vectors, no early exits, no shortcuts.
pub struct RefSegmenter {
    pub cfg: SegmenterConfig,
    pub width: usize,
    pub height: usize,
    pub banks: Vec<Vec<u8>>,
    pub r: Vec<f32>,
    pub t: Vec<f32>,
    pub dmin_avg: Vec<f32>,
}

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

impl RefSegmenter {
    pub fn init(frame_index: u64, luma: &[u8], dims: FrameDims, cfg: SegmenterConfig) -> Self {
        let npx = dims.pixel_count();
        assert_eq!(luma.len(), npx);
        let mut banks = Vec::with_capacity(npx);
        for (p, &base) in luma.iter().enumerate() {
            let mut rng = RefRng::new(cfg.seed, frame_index, p as u64);
            let mut bank = Vec::with_capacity(cfg.n_samples as usize);
            for _ in 0..cfg.n_samples {
                let v = base as i32 + rng.next_in_range(-10, 10);
                bank.push(v.clamp(0, 255) as u8);
            }
            banks.push(bank);
        }
        RefSegmenter {
            cfg,
            width: dims.width as usize,
            height: dims.height as usize,
            banks,
            r: vec![cfg.r_init; npx],
            t: vec![cfg.t_init; npx],
            dmin_avg: vec![0.0; npx],
        }
    }

    /// true = foreground.
    pub fn classify(&self, luma: &[u8]) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.banks.len());
        for (p, bank) in self.banks.iter().enumerate() {
            let mut matches = 0;
            for &s in bank {
                if ((s as i32 - luma[p] as i32).abs() as f32) < self.r[p] {
                    matches += 1;
                }
            }
            out.push(matches < self.cfg.min_matches);
        }
        out
    }

    pub fn update(&mut self, frame_index: u64, luma: &[u8], mask: &[bool]) {
        let cfg = self.cfg;
        let alpha = 1.0 / cfg.n_samples as f32;

        for p in 0..self.banks.len() {
            let mut d_min = i32::MAX;
            for &s in &self.banks[p] {
                d_min = d_min.min((s as i32 - luma[p] as i32).abs());
            }
            let davg = (1.0 - alpha) * self.dmin_avg[p] + alpha * d_min as f32;
            self.dmin_avg[p] = davg;

            let r = if self.r[p] > davg * cfg.r_scale {
                self.r[p] * (1.0 - cfg.r_adapt)
            } else {
                self.r[p] * (1.0 + cfg.r_adapt)
            };
            self.r[p] = r.clamp(cfg.r_lower, cfg.r_upper);

            let denom = if davg > 1.0 { davg } else { 1.0 };
            let t = if mask[p] {
                self.t[p] + cfg.t_inc / denom
            } else {
                self.t[p] - cfg.t_dec / denom
            };
            self.t[p] = t.clamp(cfg.t_lower, cfg.t_upper);
        }

        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                let p = (y * self.width as i64 + x) as usize;
                if mask[p] {
                    continue;
                }
                let mut rng = RefRng::new(cfg.seed, frame_index, p as u64);
                let inv_t = 1.0 / self.t[p] as f64;
                if rng.next_f64() < inv_t {
                    let slot = rng.next_below(cfg.n_samples) as usize;
                    self.banks[p][slot] = luma[p];
                }
                if rng.next_f64() < inv_t {
                    let (dx, dy) = NEIGHBORS[rng.next_below(8) as usize];
                    let (nx, ny) = (x + dx, y + dy);
                    let inside =
                        nx >= 0 && ny >= 0 && nx < self.width as i64 && ny < self.height as i64;
                    if inside {
                        let q = (ny * self.width as i64 + nx) as usize;
                        let slot = rng.next_below(cfg.n_samples) as usize;
                        self.banks[q][slot] = luma[q];
                    }
                }
            }
        }
    }

    /// Same byte layout as the library's model snapshot.
    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&self.cfg.n_samples.to_le_bytes());
        for p in 0..self.banks.len() {
            out.extend_from_slice(&self.banks[p]);
            out.extend_from_slice(&self.r[p].to_le_bytes());
            out.extend_from_slice(&self.t[p].to_le_bytes());
            out.extend_from_slice(&self.dmin_avg[p].to_le_bytes());
        }
        out
    }
}

// --- scene painting ------------------------------------------------------

/// Static per-pixel noise in [90, 139]; the same seed always paints the
/// same background on every frame.
pub fn noise_frame(dims: FrameDims, seed: u64, index: u64) -> Frame {
    let npx = dims.pixel_count();
    let mut luma = Vec::with_capacity(npx);
    for p in 0..npx {
        let mut rng = RefRng::new(seed, 0, p as u64);
        luma.push(90 + rng.next_below(50) as u8);
    }
    let mut f = Frame::from_luma(dims, index, luma);
    f.timestamp_ns = index.saturating_sub(1) * 100_000_000;
    f
}

/// Paints a uniform square, clipping the parts outside the frame.
pub fn paint_square(frame: &mut Frame, x0: i32, y0: i32, side: u32, value: u8) {
    let w = frame.dims.width as i32;
    let h = frame.dims.height as i32;
    for y in y0..y0 + side as i32 {
        for x in x0..x0 + side as i32 {
            if x >= 0 && y >= 0 && x < w && y < h {
                frame.luma[(y * w + x) as usize] = value;
            }
        }
    }
}

// --- frame sources -------------------------------------------------------

/// Feeds a prebuilt list of frames.
pub struct VecSource {
    frames: std::vec::IntoIter<Frame>,
    dims: FrameDims,
    fps: f64,
}

impl VecSource {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Self {
        let dims = frames.first().map(|f| f.dims).unwrap_or(FrameDims::QVGA);
        VecSource {
            frames: frames.into_iter(),
            dims,
            fps,
        }
    }
}

impl FrameSource for VecSource {
    fn next_frame(&mut self) -> Result<Option<Frame>, VideoError> {
        Ok(self.frames.next())
    }

    fn dims(&self) -> FrameDims {
        self.dims
    }

    fn nominal_fps(&self) -> f64 {
        self.fps
    }
}
