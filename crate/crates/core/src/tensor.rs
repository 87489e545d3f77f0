//! Image and label containers, resizing, grayscale conversion and the GMTN
//! binary tensor format.
//!
//! GMTN layout (little-endian):
//!
//! | offset | size      | field                           |
//! |--------|-----------|---------------------------------|
//! | 0      | 4         | magic `b"GMTN"`                 |
//! | 4      | 1         | version (`1`)                   |
//! | 5      | 1         | dtype (`1` = float32)           |
//! | 6      | 1         | ndim                            |
//! | 7      | 1         | reserved, written as zero       |
//! | 8      | 4 × ndim  | dimensions, `u32` each          |
//! | ...    | 4 × ∏dims | values, `f32`, row-major        |
//!
//! Images are stored as `[height, width, channels]` with channels interleaved.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const GMTN_MAGIC: [u8; 4] = *b"GMTN";
pub const GMTN_VERSION: u8 = 1;
pub const GMTN_DTYPE_F32: u8 = 1;
const GMTN_FIXED_HEADER: usize = 8;

/// Rec.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A dense float32 tensor of arbitrary rank, as stored in GMTN files.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Tensor { dims, data })
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let ndim = u8::try_from(self.dims.len()).map_err(|_| {
            Error::InvalidParameter(format!("rank {} exceeds 255", self.dims.len()))
        })?;
        let mut out =
            Vec::with_capacity(GMTN_FIXED_HEADER + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(&GMTN_MAGIC);
        out.extend_from_slice(&[GMTN_VERSION, GMTN_DTYPE_F32, ndim, 0]);
        for &d in &self.dims {
            let d = u32::try_from(d)
                .map_err(|_| Error::InvalidParameter(format!("dimension {d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < GMTN_FIXED_HEADER {
            if bytes.len() >= 4 && bytes[..4] != GMTN_MAGIC {
                return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
            }
            return Err(Error::Truncated {
                expected: GMTN_FIXED_HEADER,
                actual: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != GMTN_MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if bytes[4] != GMTN_VERSION {
            return Err(Error::UnsupportedVersion(bytes[4]));
        }
        if bytes[5] != GMTN_DTYPE_F32 {
            return Err(Error::UnsupportedDtype(bytes[5]));
        }
        let ndim = bytes[6] as usize;
        let dims_end = GMTN_FIXED_HEADER + 4 * ndim;
        if bytes.len() < dims_end {
            return Err(Error::Truncated {
                expected: dims_end,
                actual: bytes.len(),
            });
        }
        let dims: Vec<usize> = bytes[GMTN_FIXED_HEADER..dims_end]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidParameter("tensor element count overflows".into()))?;
        let expected = count
            .checked_mul(4)
            .and_then(|n| n.checked_add(dims_end))
            .ok_or_else(|| Error::InvalidParameter("tensor byte size overflows".into()))?;
        if bytes.len() < expected {
            return Err(Error::Truncated {
                expected,
                actual: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(Error::TrailingData {
                extra: bytes.len() - expected,
            });
        }
        let data = bytes[dims_end..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Tensor { dims, data })
    }
}

pub fn write_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = tensor.to_bytes()?;
    fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
    Tensor::from_bytes(&bytes).map_err(|e| e.in_file(path))
}

/// An `H × W × C` image with values in `[0, 1]`, row-major and
/// channel-interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroSize("image"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedChannels(channels));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some((index, &v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRange {
                index,
                value: v as f64,
            });
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    /// Builds an image from per-pixel values, `f(y, x, c)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.height, self.width, self.channels)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            dims: vec![self.height, self.width, self.channels],
            data: self.data.clone(),
        }
    }

    /// Accepts rank-3 `[H, W, C]` or rank-2 `[H, W]` (single channel).
    pub fn from_tensor(t: Tensor) -> Result<Self> {
        match *t.dims.as_slice() {
            [h, w, c] => Self::new(h, w, c, t.data),
            [h, w] => Self::new(h, w, 1, t.data),
            _ => Err(Error::WrongRank {
                expected: 3,
                actual: t.rank(),
            }),
        }
    }

    /// Loads a PNG (8/16-bit, gray or RGB, alpha dropped) or a GMTN tensor,
    /// chosen by file extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let is_gmtn = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("gmtn"));
        if is_gmtn {
            return Self::from_tensor(read_tensor(path)?).map_err(|e| e.in_file(path));
        }
        let img = image::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_dynamic(img).map_err(|e| e.in_file(path))
    }

    pub fn from_dynamic(img: image::DynamicImage) -> Result<Self> {
        use image::DynamicImage as D;
        let (w, h) = (img.width() as usize, img.height() as usize);
        match img {
            D::ImageLuma8(b) => Self::new(
                h,
                w,
                1,
                b.into_raw().iter().map(|&v| v as f32 / 255.0).collect(),
            ),
            D::ImageLumaA8(_) => {
                let b = img.to_luma8();
                Self::new(
                    h,
                    w,
                    1,
                    b.into_raw().iter().map(|&v| v as f32 / 255.0).collect(),
                )
            }
            D::ImageLuma16(b) => Self::new(
                h,
                w,
                1,
                b.into_raw().iter().map(|&v| v as f32 / 65535.0).collect(),
            ),
            D::ImageLumaA16(_) => {
                let b = img.to_luma16();
                Self::new(
                    h,
                    w,
                    1,
                    b.into_raw().iter().map(|&v| v as f32 / 65535.0).collect(),
                )
            }
            D::ImageRgb8(b) => Self::new(
                h,
                w,
                3,
                b.into_raw().iter().map(|&v| v as f32 / 255.0).collect(),
            ),
            D::ImageRgba8(_) => {
                let b = img.to_rgb8();
                Self::new(
                    h,
                    w,
                    3,
                    b.into_raw().iter().map(|&v| v as f32 / 255.0).collect(),
                )
            }
            D::ImageRgb16(_) | D::ImageRgba16(_) => {
                let b = img.to_rgb16();
                Self::new(
                    h,
                    w,
                    3,
                    b.into_raw().iter().map(|&v| v as f32 / 65535.0).collect(),
                )
            }
            other => {
                let b = other.to_rgb32f();
                Self::new(
                    h,
                    w,
                    3,
                    b.into_raw().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
                )
            }
        }
    }

    /// Writes an 8-bit PNG (gray or RGB).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        let (w, h) = (self.width as u32, self.height as u32);
        let result = if self.channels == 1 {
            image::GrayImage::from_raw(w, h, bytes).map(|b| b.save(path))
        } else {
            image::RgbImage::from_raw(w, h, bytes).map(|b| b.save(path))
        };
        match result {
            Some(r) => r.map_err(|e| Error::from(e).in_file(path)),
            None => Err(Error::LengthMismatch {
                expected: self.data.len(),
                actual: 0,
            }),
        }
    }
}

/// Converts to a single channel with Rec.601 luma weights. Single-channel
/// input is returned unchanged.
pub fn to_grayscale(img: &ImageTensor) -> Result<ImageTensor> {
    match img.channels {
        1 => Ok(img.clone()),
        3 => {
            let data = img
                .data
                .chunks_exact(3)
                .map(|px| {
                    let v = LUMA_WEIGHTS[0] * px[0] as f64
                        + LUMA_WEIGHTS[1] * px[1] as f64
                        + LUMA_WEIGHTS[2] * px[2] as f64;
                    v.clamp(0.0, 1.0) as f32
                })
                .collect();
            ImageTensor::new(img.height, img.width, 1, data)
        }
        c => Err(Error::UnsupportedChannels(c)),
    }
}

/// Bilinear resize with corner-aligned sampling.
pub fn resize_bilinear(img: &ImageTensor, out_h: usize, out_w: usize) -> Result<ImageTensor> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::ZeroSize("resize target"));
    }
    if out_h == img.height && out_w == img.width {
        return Ok(img.clone());
    }
    let src: Vec<f64> = img.data.iter().map(|&v| v as f64).collect();
    let out = resize_plane(&src, img.height, img.width, img.channels, out_h, out_w);
    ImageTensor::new(
        out_h,
        out_w,
        img.channels,
        out.into_iter().map(|v| v as f32).collect(),
    )
}

/// Corner-aligned bilinear resize of an interleaved `h × w × channels` f64
/// buffer. Each output sample is clamped to the range of its four source
/// neighbours, so constants stay exact and the output never leaves the input
/// range.
pub(crate) fn resize_plane(
    src: &[f64],
    h: usize,
    w: usize,
    channels: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    if out_h == h && out_w == w {
        return src.to_vec();
    }
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|o| {
                if n_out == 1 || n_in == 1 {
                    return (0, 0, 0.0);
                }
                let pos = (o * (n_in - 1)) as f64 / (n_out - 1) as f64;
                let lo = (pos.floor() as usize).min(n_in - 1);
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let ys = axis(out_h, h);
    let xs = axis(out_w, w);
    let mut out = Vec::with_capacity(out_h * out_w * channels);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            for c in 0..channels {
                let at = |y: usize, x: usize| src[(y * w + x) * channels + c];
                let (a, b, p, q) = (at(y0, x0), at(y0, x1), at(y1, x0), at(y1, x1));
                let top = a * (1.0 - tx) + b * tx;
                let bottom = p * (1.0 - tx) + q * tx;
                let v = top * (1.0 - ty) + bottom * ty;
                let lo = a.min(b).min(p).min(q);
                let hi = a.max(b).max(p).max(q);
                out.push(v.clamp(lo, hi));
            }
        }
    }
    out
}

/// A soft class-probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVector {
    probs: Vec<f64>,
}

impl LabelVector {
    pub const SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::ZeroSize("label vector"));
        }
        if let Some((i, &v)) = probs
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "label probability {v} at class {i} is negative or not finite"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "label probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(LabelVector { probs })
    }

    pub fn one_hot(class: usize, num_classes: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::InvalidParameter(format!(
                "class {class} out of range for {num_classes} classes"
            )));
        }
        let mut probs = vec![0.0; num_classes];
        probs[class] = 1.0;
        Ok(LabelVector { probs })
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `weight · self + (1 − weight) · other`.
    pub fn blend(&self, other: &LabelVector, weight: f64) -> Result<LabelVector> {
        if self.probs.len() != other.probs.len() {
            return Err(Error::ShapeMismatch(format!(
                "label class counts {} and {}",
                self.probs.len(),
                other.probs.len()
            )));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| weight * a + (1.0 - weight) * b)
            .collect();
        Ok(LabelVector { probs })
    }
}
