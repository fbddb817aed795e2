//! Binary PGM (P5) and PPM (P6) encode/decode.
//!
//! Only 8-bit images (maxval <= 255) are supported; header comments are
//! accepted on read and never written.

use crate::geometry::FrameDims;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PnmError {
    #[error("not a binary PGM/PPM file (bad magic)")]
    BadMagic,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("maxval {0} unsupported (only 8-bit)")]
    UnsupportedMaxval(u32),
    #[error("raster too short: expected {expected} bytes, got {got}")]
    ShortRaster { expected: usize, got: usize },
}

#[derive(Debug, PartialEq, Eq)]
pub enum PnmImage {
    /// Row-major luma bytes.
    Gray { dims: FrameDims, data: Vec<u8> },
    /// Interleaved RGB bytes.
    Rgb { dims: FrameDims, data: Vec<u8> },
}

impl PnmImage {
    pub fn dims(&self) -> FrameDims {
        match self {
            PnmImage::Gray { dims, .. } | PnmImage::Rgb { dims, .. } => *dims,
        }
    }
}

pub fn encode_pgm(dims: FrameDims, luma: &[u8]) -> Vec<u8> {
    assert_eq!(luma.len(), dims.pixel_count());
    let mut out = format!("P5\n{} {}\n255\n", dims.width, dims.height).into_bytes();
    out.extend_from_slice(luma);
    out
}

pub fn encode_ppm(dims: FrameDims, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), dims.pixel_count() * 3);
    let mut out = format!("P6\n{} {}\n255\n", dims.width, dims.height).into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Reads header tokens separated by whitespace, skipping `#` comments that
/// run to end of line. Returns the token and the offset just past it.
fn next_token(bytes: &[u8], mut pos: usize) -> Result<(u32, usize), PnmError> {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        break;
    }
    let start = pos;
    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
        pos += 1;
    }
    if start == pos {
        return Err(PnmError::BadHeader("expected a decimal value".into()));
    }
    let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are ascii");
    let value = text
        .parse::<u32>()
        .map_err(|_| PnmError::BadHeader(format!("value `{text}` out of range")))?;
    Ok((value, pos))
}

pub fn decode(bytes: &[u8]) -> Result<PnmImage, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1usize,
        Some(b"P6") => 3usize,
        _ => return Err(PnmError::BadMagic),
    };
    let (width, pos) = next_token(bytes, 2)?;
    let (height, pos) = next_token(bytes, pos)?;
    let (maxval, pos) = next_token(bytes, pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(PnmError::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(PnmError::BadHeader("zero dimension".into()));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PnmError::BadHeader("missing raster separator".into()));
    }
    let dims = FrameDims::new(width, height);
    let expected = dims.pixel_count() * channels;
    let raster = &bytes[pos + 1..];
    if raster.len() < expected {
        return Err(PnmError::ShortRaster {
            expected,
            got: raster.len(),
        });
    }
    let data = raster[..expected].to_vec();
    Ok(match channels {
        1 => PnmImage::Gray { dims, data },
        _ => PnmImage::Rgb { dims, data },
    })
}
