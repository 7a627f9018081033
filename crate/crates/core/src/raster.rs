//! RGB rasters, PNG/JPEG I/O and the resizes applied before compositing.
//!
//! Both resizers use pixel-center alignment: destination pixel `d` samples the
//! source at `(d + 0.5) · in / out − 0.5`, clamped to the image. Images are
//! interpolated bilinearly and rounded half-up; masks take the nearest sample
//! so they stay binary.

use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};
use thiserror::Error;

use crate::annotations::{BBox, BitMask};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: unsupported image format (expected PNG or JPEG)", path.display())]
    UnsupportedFormat { path: PathBuf },
    #[error("{}: cannot decode image: {message}", path.display())]
    Decode { path: PathBuf, message: String },
    #[error("cannot encode PNG: {0}")]
    Encode(String),
    #[error("target size {width}x{height} has a zero dimension")]
    ZeroDimension { width: u32, height: u32 },
    #[error("pixel data holds {actual} bytes, expected {expected} for {width}x{height} RGB")]
    BufferLength {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
}

/// Row-major RGB raster, 8 bits per channel.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PixelBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for PixelBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PixelBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("bytes", &self.data.len())
            .finish()
    }
}

impl PixelBuffer {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(RasterError::BufferLength {
                width,
                height,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let data = rgb.repeat(width as usize * height as usize);
        Self { width, height, data }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.offset(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub(crate) fn as_raw_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        (y as usize * self.width as usize + x as usize) * 3
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<PixelBuffer, RasterError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| RasterError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes, path)
}

/// Decodes PNG or JPEG bytes. `origin` names the data in errors and serves as
/// a format hint when the magic bytes are unrecognizable.
pub fn decode_image(bytes: &[u8], origin: &Path) -> Result<PixelBuffer, RasterError> {
    let format = image::guess_format(bytes)
        .ok()
        .or_else(|| ImageFormat::from_path(origin).ok());
    let format = match format {
        Some(f @ (ImageFormat::Png | ImageFormat::Jpeg)) => f,
        _ => {
            return Err(RasterError::UnsupportedFormat {
                path: origin.to_path_buf(),
            })
        }
    };
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| RasterError::Decode {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(flatten(img))
}

/// Converts to RGB8, compositing any alpha over opaque black.
fn flatten(img: DynamicImage) -> PixelBuffer {
    let (width, height) = (img.width(), img.height());
    if img.color().has_alpha() {
        let rgba = img.into_rgba8();
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for px in rgba.as_raw().chunks_exact(4) {
            let a = u16::from(px[3]);
            for &c in &px[..3] {
                data.push(((u16::from(c) * a + 127) / 255) as u8);
            }
        }
        PixelBuffer { width, height, data }
    } else {
        PixelBuffer {
            width,
            height,
            data: img.into_rgb8().into_raw(),
        }
    }
}

/// Width and height of an image file without decoding its pixels.
pub fn image_dimensions(path: impl AsRef<Path>) -> Result<(u32, u32), RasterError> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|source| RasterError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Jpeg) => {}
        _ => {
            return Err(RasterError::UnsupportedFormat {
                path: path.to_path_buf(),
            })
        }
    }
    reader.into_dimensions().map_err(|e| RasterError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn encode_png(buf: &PixelBuffer) -> Result<Vec<u8>, RasterError> {
    let mut out = Cursor::new(Vec::new());
    write_png(buf, &mut out)?;
    Ok(out.into_inner())
}

pub fn write_png<W: Write>(buf: &PixelBuffer, writer: W) -> Result<(), RasterError> {
    PngEncoder::new(writer)
        .write_image(&buf.data, buf.width, buf.height, ExtendedColorType::Rgb8)
        .map_err(|e| RasterError::Encode(e.to_string()))
}

pub fn save_image(buf: &PixelBuffer, path: impl AsRef<Path>) -> Result<(), RasterError> {
    let path = path.as_ref();
    let bytes = encode_png(buf)?;
    fs::write(path, bytes).map_err(|source| RasterError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-axis bilinear taps: lower index, upper index, weight of the upper sample.
fn bilinear_taps(src_len: u32, dst_len: u32) -> Vec<(usize, usize, f64)> {
    let scale = f64::from(src_len) / f64::from(dst_len);
    let max = f64::from(src_len - 1);
    (0..dst_len)
        .map(|d| {
            let s = ((f64::from(d) + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = s.floor();
            let lo_idx = lo as usize;
            let hi_idx = (lo_idx + 1).min(src_len as usize - 1);
            (lo_idx, hi_idx, s - lo)
        })
        .collect()
}

pub fn resize_image(buf: &PixelBuffer, out_w: u32, out_h: u32) -> Result<PixelBuffer, RasterError> {
    if out_w == 0 || out_h == 0 {
        return Err(RasterError::ZeroDimension {
            width: out_w,
            height: out_h,
        });
    }
    if buf.dimensions() == (out_w, out_h) {
        return Ok(buf.clone());
    }
    if buf.width == 0 || buf.height == 0 {
        return Err(RasterError::ZeroDimension {
            width: buf.width,
            height: buf.height,
        });
    }
    let xs = bilinear_taps(buf.width, out_w);
    let ys = bilinear_taps(buf.height, out_h);
    let stride = buf.width as usize * 3;
    let mut data = Vec::with_capacity(out_w as usize * out_h as usize * 3);
    for &(y0, y1, fy) in &ys {
        let top = &buf.data[y0 * stride..(y0 + 1) * stride];
        let bottom = &buf.data[y1 * stride..(y1 + 1) * stride];
        for &(x0, x1, fx) in &xs {
            for ch in 0..3 {
                let p00 = f64::from(top[x0 * 3 + ch]);
                let p01 = f64::from(top[x1 * 3 + ch]);
                let p10 = f64::from(bottom[x0 * 3 + ch]);
                let p11 = f64::from(bottom[x1 * 3 + ch]);
                let upper = p00 + (p01 - p00) * fx;
                let lower = p10 + (p11 - p10) * fx;
                let v = upper + (lower - upper) * fy;
                data.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(PixelBuffer {
        width: out_w,
        height: out_h,
        data,
    })
}

/// Nearest source index under pixel-center alignment, in exact integer arithmetic:
/// `floor((2d + 1) · in / (2 · out))`.
fn nearest_index(d: u32, src_len: u32, dst_len: u32) -> usize {
    let num = (2 * u64::from(d) + 1) * u64::from(src_len);
    let idx = num / (2 * u64::from(dst_len));
    (idx as usize).min(src_len as usize - 1)
}

pub fn resize_mask(mask: &BitMask, out_w: u32, out_h: u32) -> Result<BitMask, RasterError> {
    if out_w == 0 || out_h == 0 {
        return Err(RasterError::ZeroDimension {
            width: out_w,
            height: out_h,
        });
    }
    if (mask.width(), mask.height()) == (out_w, out_h) {
        return Ok(mask.clone());
    }
    if mask.is_empty() {
        return Err(RasterError::ZeroDimension {
            width: mask.width(),
            height: mask.height(),
        });
    }
    let cols: Vec<usize> = (0..out_w).map(|x| nearest_index(x, mask.width(), out_w)).collect();
    let src = mask.as_slice();
    let src_w = mask.width() as usize;
    let mut bits = Vec::with_capacity(out_w as usize * out_h as usize);
    for y in 0..out_h {
        let row = nearest_index(y, mask.height(), out_h) * src_w;
        bits.extend(cols.iter().map(|&c| src[row + c]));
    }
    Ok(BitMask::from_row_major(out_h, out_w, bits).expect("length matches by construction"))
}

fn scale_coord(v: u32, s: f64) -> u32 {
    (f64::from(v) * s + 0.5).floor() as u32
}

/// Scales box coordinates, rounding half-up. `sx` applies to x, `sy` to y.
pub fn scale_bbox(b: BBox, sx: f64, sy: f64) -> BBox {
    BBox {
        y1: scale_coord(b.y1, sy),
        x1: scale_coord(b.x1, sx),
        y2: scale_coord(b.y2, sy),
        x2: scale_coord(b.x2, sx),
    }
}
