//! Frame sources and sinks.
//!
//! Sources deliver frames with stable indices and synthesized timestamps so
//! that identical inputs replay identically. [`LiveReplaySource`] adds wall
//! clock pacing on top of any source to mimic a camera that keeps producing
//! whether or not the consumer keeps up.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::geometry::FrameDims;

pub mod pnm;
pub mod sink;
pub mod y4m;

pub use sink::{DiskSink, FrameSink, NullSink, SinkSpec};
pub use y4m::Y4mSource;

#[derive(Debug, thiserror::Error)]
pub enum VideoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no frames found in {0}")]
    NoFramesFound(PathBuf),
    #[error("{path}: {source}")]
    MalformedImage {
        path: PathBuf,
        source: pnm::PnmError,
    },
    #[error("{path}: expected {expected:?}, got {got:?}")]
    MixedDims {
        path: PathBuf,
        expected: FrameDims,
        got: FrameDims,
    },
    #[error("ambiguous frame index {index}: {a} and {b}")]
    DuplicateIndex { index: u64, a: String, b: String },
    #[error("malformed stream header: {0}")]
    MalformedHeader(String),
    #[error("unsupported chroma subsampling C{0}")]
    UnsupportedChroma(String),
    #[error("stream truncated inside frame {frame}")]
    TruncatedStream { frame: u64 },
}

/// One video frame. `luma` is row-major, `rgb` interleaved and present only
/// when the source carried color.
#[derive(Debug, Clone)]
pub struct Frame {
    pub dims: FrameDims,
    /// Source-assigned number: the filename index for image sequences, the
    /// stream position for y4m. Gaps in filenames are preserved.
    pub index: u64,
    /// Nominal capture time, `index * frame interval`.
    pub timestamp_ns: u64,
    pub luma: Vec<u8>,
    pub rgb: Option<Vec<u8>>,
}

impl Frame {
    pub fn from_luma(dims: FrameDims, index: u64, luma: Vec<u8>) -> Frame {
        assert_eq!(luma.len(), dims.pixel_count());
        Frame {
            dims,
            index,
            timestamp_ns: 0,
            luma,
            rgb: None,
        }
    }

    pub fn solid(dims: FrameDims, index: u64, value: u8) -> Frame {
        Frame::from_luma(dims, index, vec![value; dims.pixel_count()])
    }

    pub fn luma_at(&self, x: u32, y: u32) -> u8 {
        self.luma[(y * self.dims.width + x) as usize]
    }
}

/// Integer BT.601 luma. White stays 255: (77 + 150 + 29) * 255 >> 8 == 255.
pub fn rgb_to_luma(r: u8, g: u8, b: u8) -> u8 {
    ((77 * r as u32 + 150 * g as u32 + 29 * b as u32) >> 8) as u8
}

pub trait FrameSource {
    /// `Ok(None)` is clean end of stream.
    fn next_frame(&mut self) -> Result<Option<Frame>, VideoError>;
    fn dims(&self) -> FrameDims;
    fn nominal_fps(&self) -> f64;
    /// Frames discarded by pacing adapters. Plain sources never drop.
    fn dropped(&self) -> u64 {
        0
    }
    /// Most frames ever held between source and consumer at once. Plain
    /// sources hand frames over directly and hold none.
    fn max_buffered(&self) -> usize {
        0
    }
}

impl<T: FrameSource + ?Sized> FrameSource for Box<T> {
    fn next_frame(&mut self) -> Result<Option<Frame>, VideoError> {
        (**self).next_frame()
    }
    fn dims(&self) -> FrameDims {
        (**self).dims()
    }
    fn nominal_fps(&self) -> f64 {
        (**self).nominal_fps()
    }
    fn dropped(&self) -> u64 {
        (**self).dropped()
    }
    fn max_buffered(&self) -> usize {
        (**self).max_buffered()
    }
}

/// Numbered PGM/PPM files in a directory.
pub struct ImageSequenceSource {
    files: Vec<(u64, PathBuf)>,
    pos: usize,
    dims: FrameDims,
    fps: f64,
    interval_ns: u64,
    first_index: u64,
}

/// Splits `name` against a single-`*` pattern like `frame_*.pgm`, returning
/// the numeric index the `*` matched.
fn index_from_pattern(name: &str, prefix: &str, suffix: &str) -> Option<u64> {
    let rest = name.strip_prefix(prefix)?;
    let digits = rest.strip_suffix(suffix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Fallback index rule: the last run of digits in the file stem.
fn index_from_name(name: &str) -> Option<u64> {
    let stem = name.rsplit_once('.').map(|(s, _)| s).unwrap_or(name);
    let bytes = stem.as_bytes();
    let mut end = bytes.len();
    while end > 0 && !bytes[end - 1].is_ascii_digit() {
        end -= 1;
    }
    let mut start = end;
    while start > 0 && bytes[start - 1].is_ascii_digit() {
        start -= 1;
    }
    if start == end {
        return None;
    }
    stem[start..end].parse().ok()
}

impl ImageSequenceSource {
    /// Scans `dir` for frames. `pattern` is `prefix*suffix` (e.g.
    /// `cam0_*.pgm`); without one, any `.pgm`/`.ppm` file whose stem ends in
    /// digits counts, and files without digits are ignored.
    pub fn open(dir: &Path, pattern: Option<&str>, fps: f64) -> Result<Self, VideoError> {
        let split = match pattern {
            Some(p) => {
                let (prefix, suffix) = p.split_once('*').ok_or_else(|| {
                    VideoError::MalformedHeader(format!("pattern `{p}` needs a `*`"))
                })?;
                Some((prefix.to_string(), suffix.to_string()))
            }
            None => None,
        };

        let mut files: Vec<(u64, PathBuf)> = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let path = entry.path();
            let name = match path.file_name().and_then(|n| n.to_str()) {
                Some(n) => n,
                None => continue,
            };
            let ext_ok = name.to_ascii_lowercase().ends_with(".pgm")
                || name.to_ascii_lowercase().ends_with(".ppm");
            let index = match &split {
                Some((prefix, suffix)) => index_from_pattern(name, prefix, suffix),
                None if ext_ok => index_from_name(name),
                None => None,
            };
            if let Some(index) = index {
                files.push((index, path));
            }
        }
        files.sort();
        for pair in files.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(VideoError::DuplicateIndex {
                    index: pair[0].0,
                    a: pair[0].1.display().to_string(),
                    b: pair[1].1.display().to_string(),
                });
            }
        }
        if files.is_empty() {
            return Err(VideoError::NoFramesFound(dir.to_path_buf()));
        }

        let first = &files[0].1;
        let bytes = std::fs::read(first)?;
        let dims = pnm::decode(&bytes)
            .map_err(|source| VideoError::MalformedImage {
                path: first.clone(),
                source,
            })?
            .dims();
        let first_index = files[0].0;
        Ok(ImageSequenceSource {
            files,
            pos: 0,
            dims,
            fps,
            interval_ns: (1e9 / fps).round() as u64,
            first_index,
        })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl FrameSource for ImageSequenceSource {
    fn next_frame(&mut self) -> Result<Option<Frame>, VideoError> {
        let (index, path) = match self.files.get(self.pos) {
            Some(entry) => entry.clone(),
            None => return Ok(None),
        };
        self.pos += 1;
        let bytes = std::fs::read(&path)?;
        let image = pnm::decode(&bytes).map_err(|source| VideoError::MalformedImage {
            path: path.clone(),
            source,
        })?;
        if image.dims() != self.dims {
            return Err(VideoError::MixedDims {
                path,
                expected: self.dims,
                got: image.dims(),
            });
        }
        let (luma, rgb) = match image {
            pnm::PnmImage::Gray { data, .. } => (data, None),
            pnm::PnmImage::Rgb { data, .. } => {
                let luma = data
                    .chunks_exact(3)
                    .map(|px| rgb_to_luma(px[0], px[1], px[2]))
                    .collect();
                (luma, Some(data))
            }
        };
        Ok(Some(Frame {
            dims: self.dims,
            index,
            timestamp_ns: (index - self.first_index) * self.interval_ns,
            luma,
            rgb,
        }))
    }

    fn dims(&self) -> FrameDims {
        self.dims
    }

    fn nominal_fps(&self) -> f64 {
        self.fps
    }
}

impl<R: Read> FrameSource for Y4mSource<R> {
    fn next_frame(&mut self) -> Result<Option<Frame>, VideoError> {
        Y4mSource::next_frame(self)
    }

    fn dims(&self) -> FrameDims {
        Y4mSource::dims(self)
    }

    fn nominal_fps(&self) -> f64 {
        Y4mSource::nominal_fps(self)
    }
}

/// Replays an offline source on its nominal clock. Each frame "arrives" at
/// `start + timestamp`; a consumer that polls late gets the newest arrived
/// frame and everything older is counted as dropped. At most one frame is
/// ever held, matching a latest-frame camera buffer.
pub struct LiveReplaySource<S: FrameSource> {
    inner: S,
    pending: Option<Frame>,
    start: Option<Instant>,
    first_ts: u64,
    interval_ns: u64,
    dropped: u64,
    max_buffered: usize,
}

impl<S: FrameSource> LiveReplaySource<S> {
    pub fn new(inner: S) -> Self {
        let interval_ns = (1e9 / inner.nominal_fps()).round() as u64;
        LiveReplaySource {
            inner,
            pending: None,
            start: None,
            first_ts: 0,
            interval_ns,
            dropped: 0,
            max_buffered: 0,
        }
    }

    fn arrival(&self, timestamp_ns: u64) -> Instant {
        let start = self.start.expect("set on first fetch");
        start + Duration::from_nanos(timestamp_ns - self.first_ts)
    }

    fn fetch(&mut self) -> Result<bool, VideoError> {
        match self.inner.next_frame()? {
            None => Ok(false),
            Some(frame) => {
                if self.start.is_none() {
                    self.start = Some(Instant::now());
                    self.first_ts = frame.timestamp_ns;
                }
                self.pending = Some(frame);
                self.max_buffered = self.max_buffered.max(1);
                Ok(true)
            }
        }
    }
}

impl<S: FrameSource> FrameSource for LiveReplaySource<S> {
    fn next_frame(&mut self) -> Result<Option<Frame>, VideoError> {
        loop {
            if self.pending.is_none() && !self.fetch()? {
                return Ok(None);
            }
            let current = self.pending.as_ref().expect("fetched above");
            let arrival = self.arrival(current.timestamp_ns);
            if let Some(wait) = arrival.checked_duration_since(Instant::now()) {
                // Not due yet: block like a camera read would.
                std::thread::sleep(wait);
            }
            // If the successor has nominally arrived as well, the held frame
            // is stale; replace it. Assumes evenly spaced frames.
            let successor_due = arrival + Duration::from_nanos(self.interval_ns);
            if Instant::now() >= successor_due {
                let stale = self.pending.take().expect("held");
                if self.fetch()? {
                    self.dropped += 1;
                    continue;
                }
                // No successor exists; the held frame is the last one.
                return Ok(Some(stale));
            }
            return Ok(self.pending.take());
        }
    }

    fn dims(&self) -> FrameDims {
        self.inner.dims()
    }

    fn nominal_fps(&self) -> f64 {
        self.inner.nominal_fps()
    }

    fn dropped(&self) -> u64 {
        self.dropped
    }

    /// 1 at most: the adapter fetches a successor only after condemning the
    /// frame it holds.
    fn max_buffered(&self) -> usize {
        self.max_buffered
    }
}

/// Opens `path` as a frame source: a directory is an image sequence, a
/// `.y4m` file is a stream. `fps` is used for sequences, ignored for y4m
/// (the stream header wins).
pub fn open_source(
    path: &Path,
    pattern: Option<&str>,
    fps: f64,
) -> Result<Box<dyn FrameSource>, VideoError> {
    if path.is_dir() {
        return Ok(Box::new(ImageSequenceSource::open(path, pattern, fps)?));
    }
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    Ok(Box::new(Y4mSource::from_reader(reader)?))
}
