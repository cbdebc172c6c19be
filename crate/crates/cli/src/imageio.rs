//! Grayscale Netpbm (PGM) reading and writing, intensity normalization and
//! bilinear resizing onto the working grid.

use std::fmt;

use bayesflow::grid_ops::{GridSpec, ImageField, Matrix};
use thiserror::Error;

/// A decoded grayscale image with integer samples in `0..=maxval`, stored
/// row-major from the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    maxval: u16,
    pixels: Vec<u16>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, maxval: u16, pixels: Vec<u16>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Empty);
        }
        if maxval == 0 {
            return Err(ImageError::Maxval);
        }
        if pixels.len() != width * height {
            return Err(ImageError::PixelCount {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if let Some(&value) = pixels.iter().find(|&&p| p > maxval) {
            return Err(ImageError::OutOfRange { value, maxval });
        }
        Ok(Self {
            width,
            height,
            maxval,
            pixels,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn maxval(&self) -> u16 {
        self.maxval
    }

    #[inline]
    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    /// Sample at column `x`, row `y`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }
}

/// Invalid in-memory image.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("image has zero width or height")]
    Empty,
    #[error("maxval must be in 1..=65535")]
    Maxval,
    #[error("expected {expected} pixels, got {actual}")]
    PixelCount { expected: usize, actual: usize },
    #[error("pixel value {value} exceeds maxval {maxval}")]
    OutOfRange { value: u16, maxval: u16 },
    #[error("image {0}×{1} is smaller than the 2×2 minimum grid")]
    TooSmall(usize, usize),
    #[error("resize target {0}×{1} is smaller than 2×2")]
    ResizeTarget(usize, usize),
    #[error("resize source is smaller than 2×2")]
    ResizeSource,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PgmErrorKind {
    BadMagic,
    /// A Netpbm variant other than grayscale (`P1`, `P3`, `P4`, `P6`, ...).
    Unsupported(String),
    ExpectedNumber,
    Overflow,
    InvalidMaxval(u32),
    ZeroDimension,
    Truncated,
    PixelOutOfRange {
        value: u32,
        maxval: u16,
    },
}

impl fmt::Display for PgmErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadMagic => write!(f, "not a PGM file"),
            Self::Unsupported(magic) => write!(f, "unsupported Netpbm variant {magic}, only P2 and P5 are read"),
            Self::ExpectedNumber => write!(f, "expected an unsigned decimal number"),
            Self::Overflow => write!(f, "number too large"),
            Self::InvalidMaxval(v) => write!(f, "maxval {v} outside 1..=65535"),
            Self::ZeroDimension => write!(f, "zero width or height"),
            Self::Truncated => write!(f, "pixel data ends early"),
            Self::PixelOutOfRange { value, maxval } => {
                write!(f, "pixel value {value} exceeds maxval {maxval}")
            }
        }
    }
}

/// PGM parse failure at a byte offset into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("PGM parse error at byte {offset}: {kind}")]
pub struct PgmError {
    pub offset: usize,
    pub kind: PgmErrorKind,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, kind: PgmErrorKind) -> PgmError {
        PgmError { offset: self.pos, kind }
    }

    /// Skips whitespace and `#` comments running to the end of the line.
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<u32, PgmError> {
        self.skip_separators();
        let start = self.pos;
        let mut value: u32 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u32::from(b - b'0')))
                .ok_or(PgmError {
                    offset: start,
                    kind: PgmErrorKind::Overflow,
                })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err(if self.pos >= self.bytes.len() {
                PgmErrorKind::Truncated
            } else {
                PgmErrorKind::ExpectedNumber
            }));
        }
        Ok(value)
    }
}

/// Parses a plain (`P2`) or raw (`P5`) PGM file.
pub fn read_pgm(bytes: &[u8]) -> Result<RawImage, PgmError> {
    let mut cur = Cursor { bytes, pos: 0 };
    match bytes.get(..2) {
        Some(b"P2") | Some(b"P5") => {}
        Some([b'P', d]) if d.is_ascii_digit() => {
            return Err(cur.err(PgmErrorKind::Unsupported(format!("P{}", *d as char))));
        }
        _ => return Err(cur.err(PgmErrorKind::BadMagic)),
    }
    let raw = bytes[1] == b'5';
    cur.pos = 2;
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(cur.err(PgmErrorKind::BadMagic));
    }

    let width_at = cur.pos;
    let width = cur.number()? as usize;
    let height = cur.number()? as usize;
    if width == 0 || height == 0 {
        return Err(PgmError {
            offset: width_at,
            kind: PgmErrorKind::ZeroDimension,
        });
    }
    cur.skip_separators();
    let maxval_at = cur.pos;
    let maxval = cur.number()?;
    if maxval == 0 || maxval > u32::from(u16::MAX) {
        return Err(PgmError {
            offset: maxval_at,
            kind: PgmErrorKind::InvalidMaxval(maxval),
        });
    }
    let maxval = maxval as u16;
    let count = width.checked_mul(height).ok_or(PgmError {
        offset: width_at,
        kind: PgmErrorKind::Overflow,
    })?;

    let mut pixels = Vec::with_capacity(count.min(bytes.len()));
    if raw {
        // Exactly one whitespace byte separates the header from the raster.
        if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(cur.err(PgmErrorKind::Truncated));
        }
        cur.pos += 1;
        let sample_bytes = if maxval > 255 { 2 } else { 1 };
        let data = count
            .checked_mul(sample_bytes)
            .and_then(|needed| bytes.get(cur.pos..cur.pos.checked_add(needed)?))
            .ok_or(PgmError {
                offset: bytes.len(),
                kind: PgmErrorKind::Truncated,
            })?;
        for (k, chunk) in data.chunks_exact(sample_bytes).enumerate() {
            let value = match chunk {
                [hi, lo] => u16::from_be_bytes([*hi, *lo]),
                [b] => u16::from(*b),
                _ => unreachable!(),
            };
            if value > maxval {
                return Err(PgmError {
                    offset: cur.pos + k * sample_bytes,
                    kind: PgmErrorKind::PixelOutOfRange {
                        value: u32::from(value),
                        maxval,
                    },
                });
            }
            pixels.push(value);
        }
    } else {
        for _ in 0..count {
            cur.skip_separators();
            let at = cur.pos;
            let value = cur.number()?;
            if value > u32::from(maxval) {
                return Err(PgmError {
                    offset: at,
                    kind: PgmErrorKind::PixelOutOfRange { value, maxval },
                });
            }
            pixels.push(value as u16);
        }
    }
    Ok(RawImage {
        width,
        height,
        maxval,
        pixels,
    })
}

/// Encodes as raw `P5`; samples take two big-endian bytes when `maxval > 255`.
pub fn write_pgm(img: &RawImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval);
    let wide = img.maxval > 255;
    let mut out = Vec::with_capacity(header.len() + img.pixels.len() * if wide { 2 } else { 1 });
    out.extend_from_slice(header.as_bytes());
    for &p in &img.pixels {
        if wide {
            out.extend_from_slice(&p.to_be_bytes());
        } else {
            out.push(p as u8);
        }
    }
    out
}

/// Maps samples to `[0, 1]` by dividing by `maxval`.
///
/// Image column `x` becomes grid index `i` and image row `y` becomes grid
/// index `j`, so the result is `width × height` in grid terms.
pub fn normalize(img: &RawImage) -> Result<ImageField, ImageError> {
    let grid = GridSpec::new(img.width, img.height).map_err(|_| ImageError::TooSmall(img.width, img.height))?;
    let scale = f64::from(img.maxval);
    let data = Matrix::from_fn(img.width, img.height, |i, j| f64::from(img.get(i, j)) / scale);
    Ok(ImageField::new(grid, data).expect("finite by construction"))
}

/// Inverse of [`normalize`]: clamps to `[0, 1]` and rounds to `0..=maxval`.
pub fn quantize(field: &ImageField, maxval: u16) -> RawImage {
    let grid = field.grid();
    let (w, h) = (grid.n_x(), grid.n_y());
    let scale = f64::from(maxval);
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let v = field.get(x, y).clamp(0.0, 1.0);
            pixels.push((v * scale).round() as u16);
        }
    }
    RawImage {
        width: w,
        height: h,
        maxval: maxval.max(1),
        pixels,
    }
}

/// Bilinear resampling with corner-aligned sample positions: output index
/// `i` reads source coordinate `i (n_x − 1) / (new_nx − 1)`.
pub fn resize_bilinear(img: &ImageField, new_nx: usize, new_ny: usize) -> Result<ImageField, ImageError> {
    if new_nx < 2 || new_ny < 2 {
        return Err(ImageError::ResizeTarget(new_nx, new_ny));
    }
    let grid = img.grid();
    let (nx, ny) = (grid.n_x(), grid.n_y());
    if nx < 2 || ny < 2 {
        return Err(ImageError::ResizeSource);
    }
    if (nx, ny) == (new_nx, new_ny) {
        return Ok(img.clone());
    }
    let locate = |k: usize, n_out: usize, n_in: usize| {
        let s = k as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let lo = (s.floor() as usize).min(n_in - 2);
        (lo, s - lo as f64)
    };
    let data = Matrix::from_fn(new_nx, new_ny, |i, j| {
        let (i0, tx) = locate(i, new_nx, nx);
        let (j0, ty) = locate(j, new_ny, ny);
        let top = (1.0 - tx) * img.get(i0, j0) + tx * img.get(i0 + 1, j0);
        let bottom = (1.0 - tx) * img.get(i0, j0 + 1) + tx * img.get(i0 + 1, j0 + 1);
        (1.0 - ty) * top + ty * bottom
    });
    let out_grid = GridSpec::new(new_nx, new_ny).expect("checked above");
    Ok(ImageField::new(out_grid, data).expect("finite by construction"))
}
