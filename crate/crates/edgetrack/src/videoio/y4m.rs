//! Minimal YUV4MPEG2 stream reader.
//!
//! Supports 4:2:0 chroma variants and mono streams. Chroma planes are read
//! and discarded: the pipeline runs on luma only, and the Y plane is the
//! luma, no conversion needed.

use std::io::{self, Read};

use crate::geometry::FrameDims;

use super::{Frame, VideoError};

const MAGIC: &[u8] = b"YUV4MPEG2";

/// Bytes of chroma per frame for the supported colourspaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chroma {
    C420,
    Mono,
}

pub struct Y4mSource<R: Read> {
    reader: R,
    dims: FrameDims,
    fps: f64,
    chroma: Chroma,
    next_index: u64,
    interval_ns: u64,
    done: bool,
}

impl<R: Read> std::fmt::Debug for Y4mSource<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Y4mSource")
            .field("dims", &self.dims)
            .field("fps", &self.fps)
            .field("chroma", &self.chroma)
            .field("next_index", &self.next_index)
            .finish_non_exhaustive()
    }
}

/// Reads bytes up to and excluding the next `\n`. `None` means the stream
/// ended before any byte was read.
fn read_line<R: Read>(reader: &mut R) -> Result<Option<Vec<u8>>, io::Error> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match reader.read(&mut byte)? {
            0 => {
                if line.is_empty() {
                    return Ok(None);
                }
                return Ok(Some(line));
            }
            _ => {
                if byte[0] == b'\n' {
                    return Ok(Some(line));
                }
                line.push(byte[0]);
            }
        }
    }
}

impl<R: Read> Y4mSource<R> {
    pub fn from_reader(mut reader: R) -> Result<Self, VideoError> {
        let header = read_line(&mut reader)?
            .ok_or_else(|| VideoError::MalformedHeader("empty stream".into()))?;
        let text = std::str::from_utf8(&header)
            .map_err(|_| VideoError::MalformedHeader("header is not ascii".into()))?;
        let mut tokens = text.split(' ');
        if tokens.next() != Some(std::str::from_utf8(MAGIC).unwrap()) {
            return Err(VideoError::MalformedHeader(
                "missing YUV4MPEG2 magic".into(),
            ));
        }

        let mut width = None;
        let mut height = None;
        let mut fps = None;
        let mut chroma = Chroma::C420;
        for tok in tokens {
            let (tag, rest) = match tok.split_at_checked(1) {
                Some(split) => split,
                None => continue,
            };
            match tag {
                "W" => width = Some(parse_dim(rest)?),
                "H" => height = Some(parse_dim(rest)?),
                "F" => {
                    let (num, den) = rest.split_once(':').ok_or_else(|| {
                        VideoError::MalformedHeader(format!("bad frame rate `{tok}`"))
                    })?;
                    let num: u64 = num.parse().map_err(|_| {
                        VideoError::MalformedHeader(format!("bad frame rate `{tok}`"))
                    })?;
                    let den: u64 = den.parse().map_err(|_| {
                        VideoError::MalformedHeader(format!("bad frame rate `{tok}`"))
                    })?;
                    if num == 0 || den == 0 {
                        return Err(VideoError::MalformedHeader(format!(
                            "bad frame rate `{tok}`"
                        )));
                    }
                    fps = Some(num as f64 / den as f64);
                }
                "C" => {
                    chroma = match rest {
                        "420" | "420jpeg" | "420mpeg2" | "420paldv" => Chroma::C420,
                        "mono" => Chroma::Mono,
                        other => return Err(VideoError::UnsupportedChroma(other.to_string())),
                    }
                }
                // Interlacing, aspect and extension tags carry nothing the
                // pipeline uses.
                "I" | "A" | "X" => {}
                _ => {}
            }
        }

        let width = width.ok_or_else(|| VideoError::MalformedHeader("missing W tag".into()))?;
        let height = height.ok_or_else(|| VideoError::MalformedHeader("missing H tag".into()))?;
        let fps = fps.ok_or_else(|| VideoError::MalformedHeader("missing F tag".into()))?;
        if chroma == Chroma::C420 && (width % 2 != 0 || height % 2 != 0) {
            return Err(VideoError::MalformedHeader(
                "4:2:0 stream with odd dimensions".into(),
            ));
        }

        Ok(Y4mSource {
            reader,
            dims: FrameDims::new(width, height),
            fps,
            chroma,
            next_index: 0,
            interval_ns: (1e9 / fps).round() as u64,
            done: false,
        })
    }

    pub fn dims(&self) -> FrameDims {
        self.dims
    }

    pub fn nominal_fps(&self) -> f64 {
        self.fps
    }

    fn chroma_bytes(&self) -> usize {
        match self.chroma {
            Chroma::C420 => self.dims.pixel_count() / 2,
            Chroma::Mono => 0,
        }
    }

    pub fn next_frame(&mut self) -> Result<Option<Frame>, VideoError> {
        if self.done {
            return Ok(None);
        }
        let index = self.next_index;
        let marker = match read_line(&mut self.reader)? {
            None => {
                self.done = true;
                return Ok(None);
            }
            Some(line) => line,
        };
        if !marker.starts_with(b"FRAME") {
            return Err(VideoError::TruncatedStream { frame: index });
        }

        let mut luma = vec![0u8; self.dims.pixel_count()];
        self.reader
            .read_exact(&mut luma)
            .map_err(|_| VideoError::TruncatedStream { frame: index })?;
        let mut chroma = vec![0u8; self.chroma_bytes()];
        self.reader
            .read_exact(&mut chroma)
            .map_err(|_| VideoError::TruncatedStream { frame: index })?;

        self.next_index += 1;
        Ok(Some(Frame {
            dims: self.dims,
            index,
            timestamp_ns: index * self.interval_ns,
            luma,
            rgb: None,
        }))
    }
}

fn parse_dim(text: &str) -> Result<u32, VideoError> {
    let v: u32 = text
        .parse()
        .map_err(|_| VideoError::MalformedHeader(format!("bad dimension `{text}`")))?;
    if v == 0 {
        return Err(VideoError::MalformedHeader("zero dimension".into()));
    }
    Ok(v)
}
