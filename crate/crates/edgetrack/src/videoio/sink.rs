//! Frame output: mask images, annotated frames, JSON Lines track log.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use crate::geometry::FrameDims;
use crate::records::{event_line_json, frame_line_json, FrameRecord};
use crate::segmenter::ForegroundMask;

use super::{pnm, Frame, VideoError};

/// Track outline colors, assigned by `(id - 1) % 8`. All saturated so they
/// stay readable over gray footage.
pub const PALETTE: [[u8; 3]; 8] = [
    [255, 0, 0],
    [0, 255, 0],
    [0, 96, 255],
    [255, 255, 0],
    [255, 0, 255],
    [0, 255, 255],
    [255, 128, 0],
    [255, 255, 255],
];

/// What to write and where.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkSpec {
    pub dir: PathBuf,
    pub write_masks: bool,
    pub write_annotated: bool,
    pub write_log: bool,
}

impl SinkSpec {
    pub fn all(dir: impl Into<PathBuf>) -> Self {
        SinkSpec {
            dir: dir.into(),
            write_masks: true,
            write_annotated: true,
            write_log: true,
        }
    }
}

/// Consumes one processed frame. The mask is absent on the frame that only
/// initializes the background model.
pub trait FrameSink {
    fn emit(
        &mut self,
        frame: &Frame,
        mask: Option<&ForegroundMask>,
        record: &FrameRecord,
    ) -> Result<(), VideoError>;

    fn finish(&mut self) -> Result<(), VideoError> {
        Ok(())
    }
}

/// Discards everything; used for measurement runs.
#[derive(Debug, Default)]
pub struct NullSink;

impl FrameSink for NullSink {
    fn emit(
        &mut self,
        _frame: &Frame,
        _mask: Option<&ForegroundMask>,
        _record: &FrameRecord,
    ) -> Result<(), VideoError> {
        Ok(())
    }
}

/// Writes `mask_NNNNNN.pgm`, `annotated_NNNNNN.ppm` and `tracks.jsonl`
/// into the output directory, each toggled by its [`SinkSpec`] flag.
pub struct DiskSink {
    spec: SinkSpec,
    log: Option<BufWriter<File>>,
}

impl DiskSink {
    pub fn create(spec: SinkSpec) -> Result<Self, VideoError> {
        std::fs::create_dir_all(&spec.dir)?;
        let log = if spec.write_log {
            Some(BufWriter::new(File::create(spec.dir.join("tracks.jsonl"))?))
        } else {
            None
        };
        Ok(DiskSink { spec, log })
    }

    /// Event lines precede the frame line so a log reader sees lifecycle
    /// changes before the snapshot that reflects them.
    pub fn write_outputs(
        &mut self,
        frame: &Frame,
        mask: Option<&ForegroundMask>,
        record: &FrameRecord,
    ) -> Result<(), VideoError> {
        if self.spec.write_masks {
            if let Some(mask) = mask {
                let bytes = pnm::encode_pgm(mask.dims(), &mask.to_luma());
                let path = self.spec.dir.join(format!("mask_{:06}.pgm", frame.index));
                std::fs::write(path, bytes)?;
            }
        }
        if self.spec.write_annotated {
            let rgb = annotate(frame, record);
            let bytes = pnm::encode_ppm(frame.dims, &rgb);
            let path = self
                .spec
                .dir
                .join(format!("annotated_{:06}.ppm", frame.index));
            std::fs::write(path, bytes)?;
        }
        if let Some(log) = &mut self.log {
            for event in &record.events {
                writeln!(log, "{}", event_line_json(event))?;
            }
            writeln!(log, "{}", frame_line_json(record))?;
        }
        Ok(())
    }
}

impl FrameSink for DiskSink {
    fn emit(
        &mut self,
        frame: &Frame,
        mask: Option<&ForegroundMask>,
        record: &FrameRecord,
    ) -> Result<(), VideoError> {
        self.write_outputs(frame, mask, record)
    }

    fn finish(&mut self) -> Result<(), VideoError> {
        if let Some(log) = &mut self.log {
            log.flush()?;
        }
        Ok(())
    }
}

/// Frame as RGB with a 1 px outline per live track.
fn annotate(frame: &Frame, record: &FrameRecord) -> Vec<u8> {
    let mut rgb = match &frame.rgb {
        Some(rgb) => rgb.clone(),
        None => frame.luma.iter().flat_map(|&v| [v, v, v]).collect(),
    };
    for track in &record.tracks {
        let color = PALETTE[((track.id + 7) % 8) as usize];
        let clamped = match track.bbox.clamp_to_frame(frame.dims) {
            Ok(b) => b,
            Err(_) => continue,
        };
        draw_outline(&mut rgb, frame.dims, clamped, color);
    }
    rgb
}

fn draw_outline(rgb: &mut [u8], dims: FrameDims, b: crate::geometry::BoundingBox, color: [u8; 3]) {
    let stride = dims.width as usize;
    let mut put = |x: usize, y: usize| {
        let at = (y * stride + x) * 3;
        rgb[at..at + 3].copy_from_slice(&color);
    };
    let (x0, y0) = (b.x as usize, b.y as usize);
    let (x1, y1) = ((b.right() - 1) as usize, (b.bottom() - 1) as usize);
    for x in x0..=x1 {
        put(x, y0);
        put(x, y1);
    }
    for y in y0..=y1 {
        put(x0, y);
        put(x1, y);
    }
}
