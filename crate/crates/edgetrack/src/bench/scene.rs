//! Synthetic benchmark scenes.
//!
//! A static noise background with `n_objects` uniform bright squares. Each
//! object enters from the left edge in its own horizontal band, staggered by
//! `entry_interval` frames so the lifecycle manager picks them up one at a
//! time, then bounces between side margins forever. Nothing ever leaves, so
//! once all objects have entered the tracker load stays constant, which is
//! what a throughput sweep needs.
//!
//! Generation is a pure function of the spec: the same spec always produces
//! byte-identical files.

use std::path::Path;

use crate::geometry::FrameDims;
use crate::rng::PixelRng;
use crate::videoio::{pnm, Frame};

/// Pixel value of every object square.
const OBJECT_LUMA: u8 = 230;
/// Background noise is `BG_BASE + [0, BG_SPAN)`.
const BG_BASE: u8 = 90;
const BG_SPAN: u32 = 50;
/// Objects bounce this far from the left/right frame edges; comfortably
/// outside the detector's border margin so detections never flicker.
const BOUNCE_MARGIN: i32 = 12;
/// Vertical gap between object bands, plus the object itself.
const BAND_GAP: u32 = 16;
/// Horizontal speed of every object in px/frame. Uniform on purpose: each
/// added object must contribute the same per-frame cost, or the sweep's
/// frame-time curve bends with scene content instead of object count.
const OBJECT_SPEED: i32 = 4;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SceneError {
    #[error("scene does not fit: {0}")]
    DoesNotFit(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSceneSpec {
    pub dims: FrameDims,
    pub n_objects: u32,
    pub object_size: u32,
    /// Total frames, numbered from 1.
    pub frames: u32,
    /// Frames between consecutive object entries.
    pub entry_interval: u32,
    pub seed: u64,
}

impl SyntheticSceneSpec {
    pub fn new(n_objects: u32, frames: u32, seed: u64) -> Self {
        SyntheticSceneSpec {
            dims: FrameDims::QVGA,
            n_objects,
            object_size: 20,
            frames,
            entry_interval: 30,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let size = self.object_size as i32;
        let max_x = self.dims.width as i32 - size - BOUNCE_MARGIN;
        if max_x <= BOUNCE_MARGIN {
            return Err(SceneError::DoesNotFit(format!(
                "{}px objects cannot bounce inside a {}px wide frame",
                size, self.dims.width
            )));
        }
        let pitch = self.object_size + BAND_GAP;
        let lowest =
            BOUNCE_MARGIN as u32 + self.n_objects.saturating_sub(1) * pitch + self.object_size;
        if lowest + BOUNCE_MARGIN as u32 > self.dims.height {
            return Err(SceneError::DoesNotFit(format!(
                "{} bands of {}px need more than {}px of height",
                self.n_objects, pitch, self.dims.height
            )));
        }
        Ok(())
    }

    fn speed(&self) -> i32 {
        OBJECT_SPEED
    }

    /// Frame on which object `k` starts entering. Frame 1 only feeds the
    /// background model.
    pub fn entry_frame(&self, k: u32) -> u64 {
        2 + (k as u64) * self.entry_interval as u64
    }

    /// Box position of object `k` on `frame`, if it has started entering.
    /// Off-frame parts are clipped at paint time, not here.
    pub fn object_position(&self, k: u32, frame: u64) -> Option<(i32, i32)> {
        if frame < self.entry_frame(k) {
            return None;
        }
        let t = (frame - self.entry_frame(k)) as i64;
        let size = self.object_size as i32;
        let min_x = BOUNCE_MARGIN as i64;
        let max_x = (self.dims.width as i32 - size - BOUNCE_MARGIN) as i64;
        let span = max_x - min_x;

        let travel = -(size as i64) + self.speed() as i64 * t;
        let x = if travel <= min_x {
            travel
        } else {
            // triangle-wave fold between the bounce margins
            let u = (travel - min_x) % (2 * span);
            if u <= span {
                min_x + u
            } else {
                min_x + 2 * span - u
            }
        };
        let y = BOUNCE_MARGIN + (k * (self.object_size + BAND_GAP)) as i32;
        Some((x as i32, y))
    }

    /// Renders one frame (1-based index).
    pub fn paint_frame(&self, frame: u64) -> Frame {
        let npx = self.dims.pixel_count();
        let mut luma = Vec::with_capacity(npx);
        for p in 0..npx {
            let mut rng = PixelRng::new(self.seed, 0, p as u64);
            luma.push(BG_BASE + rng.next_below(BG_SPAN) as u8);
        }
        let size = self.object_size as i32;
        for k in 0..self.n_objects {
            if let Some((x0, y0)) = self.object_position(k, frame) {
                for y in y0..y0 + size {
                    for x in x0..x0 + size {
                        if x >= 0
                            && y >= 0
                            && (x as u32) < self.dims.width
                            && (y as u32) < self.dims.height
                        {
                            luma[y as usize * self.dims.width as usize + x as usize] = OBJECT_LUMA;
                        }
                    }
                }
            }
        }
        let mut f = Frame::from_luma(self.dims, frame, luma);
        f.timestamp_ns = (frame - 1) * 100_000_000;
        f
    }
}

/// Writes the whole sequence as `frame_NNNNNN.pgm` files. Returns the
/// number of frames written.
pub fn generate_sequence(spec: &SyntheticSceneSpec, dir: &Path) -> Result<u32, std::io::Error> {
    spec.validate()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
    std::fs::create_dir_all(dir)?;
    for i in 1..=spec.frames as u64 {
        let frame = spec.paint_frame(i);
        let bytes = pnm::encode_pgm(frame.dims, &frame.luma);
        std::fs::write(dir.join(format!("frame_{i:06}.pgm")), bytes)?;
    }
    Ok(spec.frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objects_enter_then_bounce_between_margins() {
        let spec = SyntheticSceneSpec::new(2, 400, 7);
        assert_eq!(spec.entry_frame(0), 2);
        assert_eq!(spec.entry_frame(1), 32);
        assert!(spec.object_position(0, 1).is_none());
        assert_eq!(spec.object_position(0, 2), Some((-20, 12)));

        let min_x = 12;
        let max_x = 320 - 20 - 12;
        let mut seen_min = false;
        let mut seen_max = false;
        for frame in 60..400u64 {
            let (x, y) = spec.object_position(0, frame).unwrap();
            assert!(x >= min_x && x <= max_x, "frame {frame}: x={x}");
            assert_eq!(y, 12);
            seen_min |= x == min_x;
            seen_max |= x == max_x;
        }
        assert!(seen_min && seen_max, "the object must actually bounce");
        // second band sits below the first
        let (_, y1) = spec.object_position(1, 200).unwrap();
        assert_eq!(y1, 12 + 36);
    }

    #[test]
    fn motion_is_continuous() {
        let spec = SyntheticSceneSpec::new(3, 500, 1);
        for k in 0..3 {
            let mut last: Option<i32> = None;
            for frame in spec.entry_frame(k)..500 {
                let (x, _) = spec.object_position(k, frame).unwrap();
                if let Some(lx) = last {
                    let dx = (x - lx).abs();
                    assert!(dx <= spec.speed(), "object {k} jumped {dx} at {frame}");
                }
                last = Some(x);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSceneSpec {
            dims: FrameDims::new(64, 48),
            n_objects: 1,
            object_size: 10,
            frames: 5,
            entry_interval: 30,
            seed: 3,
        };
        let once = |dir: &Path| {
            generate_sequence(&spec, dir).unwrap();
            let mut names: Vec<_> = std::fs::read_dir(dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            names.sort();
            names
                .iter()
                .map(|p| std::fs::read(p).unwrap())
                .collect::<Vec<_>>()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        assert_eq!(once(d1.path()), once(d2.path()));
        assert_eq!(std::fs::read_dir(d1.path()).unwrap().count(), 5);
    }

    #[test]
    fn impossible_scenes_are_rejected() {
        let mut spec = SyntheticSceneSpec::new(6, 10, 1);
        spec.dims = FrameDims::new(64, 64);
        assert!(matches!(spec.validate(), Err(SceneError::DoesNotFit(_))));
        assert!(
            SyntheticSceneSpec::new(6, 10, 1).validate().is_ok(),
            "six fit in QVGA"
        );
    }
}
