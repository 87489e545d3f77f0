//! Saliency maps: spectral-residual extraction, external map ingestion,
//! Gaussian blur and sum-to-one normalization.

use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::tensor::{self, read_tensor, ImageTensor, Tensor};

/// Stabilizer inside `log(|F| + ε)`, relative to the peak amplitude of the
/// spectrum. Scaling with the spectrum keeps the residual invariant to image
/// gain, and keeping it well above rounding noise stops exact spectral zeros
/// (common in synthetic images) from dominating the 3×3 local mean.
pub const EPS_LOG_REL: f64 = 1e-3;
/// Bins below this fraction of the peak magnitude get phase 0.
pub const EPS_NULL_BIN: f64 = 1e-10;
/// Maps whose total falls below this normalize to the uniform map.
pub const EPS_FLAT: f64 = 1e-12;
pub const DEFAULT_WORKING_SIZE: usize = 64;
pub const DEFAULT_BLUR_KERNEL: usize = 7;
pub const DEFAULT_BLUR_SIGMA: f64 = 3.0;

/// A nonnegative `H × W` saliency map.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroSize("saliency map"));
        }
        if values.len() != height * width {
            return Err(Error::LengthMismatch {
                expected: height * width,
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeSaliency { index, value });
        }
        Ok(SaliencyMap {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn resize(&self, out_h: usize, out_w: usize) -> Result<SaliencyMap> {
        if out_h == 0 || out_w == 0 {
            return Err(Error::ZeroSize("resize target"));
        }
        let values = tensor::resize_plane(&self.values, self.height, self.width, 1, out_h, out_w);
        SaliencyMap::new(out_h, out_w, values)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            dims: vec![self.height, self.width],
            data: self.values.iter().map(|&v| v as f32).collect(),
        }
    }
}

/// A saliency map whose entries are nonnegative and sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSaliency {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl NormalizedSaliency {
    pub const SUM_TOLERANCE: f64 = 1e-5;

    /// Wraps values without enforcing the sum-to-one invariant; only shape
    /// and nonnegativity are checked. For maps normalized elsewhere and for
    /// probing degenerate inputs such as all-zero maps.
    pub fn from_values_unnormalized(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let map = SaliencyMap::new(height, width, values)?;
        Ok(NormalizedSaliency {
            height,
            width,
            values: map.values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn same_shape(&self, other: &NormalizedSaliency) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            dims: vec![self.height, self.width],
            data: self.values.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn into_map(self) -> SaliencyMap {
        SaliencyMap {
            height: self.height,
            width: self.width,
            values: self.values,
        }
    }
}

/// Gaussian blur parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlurParams {
    pub kernel: usize,
    pub sigma: f64,
}

impl Default for BlurParams {
    fn default() -> Self {
        BlurParams {
            kernel: DEFAULT_BLUR_KERNEL,
            sigma: DEFAULT_BLUR_SIGMA,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaliencyParams {
    pub blur: BlurParams,
    /// Longer-side resolution at which the spectral residual is computed.
    pub working_size: usize,
}

impl Default for SaliencyParams {
    fn default() -> Self {
        SaliencyParams {
            blur: BlurParams::default(),
            working_size: DEFAULT_WORKING_SIZE,
        }
    }
}

/// Where raw saliency comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum SaliencySource {
    SpectralResidual,
    /// One precomputed rank-2 GMTN map per image, in batch order.
    External(Vec<PathBuf>),
}

/// Spectral-residual saliency at the input's resolution.
///
/// The image is converted to grayscale and resized so that its longer side is
/// `working_size`. With `F = FFT(gray)` and `ε = EPS_LOG_REL · max|F|`, the
/// log-amplitude `L = ln(|F| + ε)` minus its 3×3 local mean (reflect
/// padding) gives the residual `R`, and the map is
/// `|IFFT(exp(R + i·arg F))|²`, resized back to `H × W`.
///
/// A flat image has no residual structure; it yields a constant map.
pub fn spectral_residual(img: &ImageTensor, working_size: usize) -> Result<SaliencyMap> {
    if working_size == 0 {
        return Err(Error::InvalidParameter(
            "working size must be at least 1".into(),
        ));
    }
    let gray = tensor::to_grayscale(img)?;
    let (h, w) = (gray.height(), gray.width());
    let long = h.max(w);
    let scaled = |n: usize| ((n * working_size) as f64 / long as f64).round().max(1.0) as usize;
    let (wh, ww) = (scaled(h), scaled(w));
    let small = tensor::resize_bilinear(&gray, wh, ww)?;

    let (lo, hi) = small
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi - lo <= 0.0 {
        return SaliencyMap::new(h, w, vec![1.0; h * w]);
    }

    let mut spectrum: Vec<Complex64> = small
        .data()
        .iter()
        .map(|&v| Complex64::new(v as f64, 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    fft2d(&mut planner, &mut spectrum, wh, ww, false);

    let peak = spectrum.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let eps = EPS_LOG_REL * peak;
    let null = EPS_NULL_BIN * peak;
    let log_amp: Vec<f64> = spectrum.iter().map(|c| (c.norm() + eps).ln()).collect();
    let local_mean = box_filter_3x3(&log_amp, wh, ww);
    for ((c, l), m) in spectrum.iter_mut().zip(&log_amp).zip(&local_mean) {
        // rounding noise has no meaningful phase
        let phase = if c.norm() <= null {
            0.0
        } else {
            c.im.atan2(c.re)
        };
        *c = Complex64::from_polar((l - m).exp(), phase);
    }
    fft2d(&mut planner, &mut spectrum, wh, ww, true);

    let n = (wh * ww) as f64;
    let energy: Vec<f64> = spectrum.iter().map(|c| (c / n).norm_sqr()).collect();
    let values = tensor::resize_plane(&energy, wh, ww, 1, h, w);
    SaliencyMap::new(h, w, values)
}

fn fft2d(planner: &mut FftPlanner<f64>, data: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col_fft.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
}

/// Mirror index without repeating the edge sample (`d c b | a b c d`).
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut r = i.rem_euclid(period);
    if r >= n as isize {
        r = period - r;
    }
    r as usize
}

fn box_filter_3x3(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -1..=1isize {
                let yy = reflect_index(y as isize + dy, h);
                for dx in -1..=1isize {
                    let xx = reflect_index(x as isize + dx, w);
                    acc += src[yy * w + xx];
                }
            }
            out[y * w + x] = acc / 9.0;
        }
    }
    out
}

/// Normalized 1-D Gaussian weights centred on `kernel / 2`.
pub fn gaussian_kernel(kernel: usize, sigma: f64) -> Result<Vec<f64>> {
    if kernel.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "blur kernel size {kernel} must be odd"
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "blur sigma {sigma} must be positive"
        )));
    }
    let half = (kernel / 2) as f64;
    let raw: Vec<f64> = (0..kernel)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Separable Gaussian blur with reflect padding.
pub fn gaussian_blur(map: &SaliencyMap, params: BlurParams) -> Result<SaliencyMap> {
    let k = gaussian_kernel(params.kernel, params.sigma)?;
    let half = (params.kernel / 2) as isize;
    let (h, w) = (map.height, map.width);

    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        let src = &map.values[y * w..(y + 1) * w];
        for x in 0..w {
            rows[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * src[reflect_index(x as isize + i as isize - half, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * rows[reflect_index(y as isize + i as isize - half, h) * w + x])
                .sum();
        }
    }
    SaliencyMap::new(h, w, out)
}

/// Divides by the total; maps with total below [`EPS_FLAT`] become uniform.
pub fn normalize_sum_to_1(map: &SaliencyMap) -> Result<NormalizedSaliency> {
    if let Some((index, &value)) = map.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeSaliency { index, value });
    }
    let total: f64 = map.values.iter().sum();
    let n = map.values.len();
    let values = if total < EPS_FLAT || !total.is_finite() {
        vec![1.0 / n as f64; n]
    } else {
        map.values.iter().map(|v| v / total).collect()
    };
    Ok(NormalizedSaliency {
        height: map.height,
        width: map.width,
        values,
    })
}

/// Loads a rank-2 GMTN map, rectifies it by absolute value and resizes it to
/// `target_h × target_w`.
pub fn load_external_saliency(
    path: impl AsRef<Path>,
    target_h: usize,
    target_w: usize,
) -> Result<SaliencyMap> {
    let path = path.as_ref();
    let t = read_tensor(path)?;
    let (h, w) = match t.dims.as_slice() {
        &[h, w] => (h, w),
        _ => {
            return Err(Error::WrongRank {
                expected: 2,
                actual: t.rank(),
            }
            .in_file(path))
        }
    };
    let values: Vec<f64> = t.data.iter().map(|v| (*v as f64).abs()).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite saliency value".into()).in_file(path));
    }
    SaliencyMap::new(h, w, values)
        .and_then(|m| m.resize(target_h, target_w))
        .map_err(|e| e.in_file(path))
}

/// Per image: raw saliency, Gaussian blur, then sum-to-one normalization.
///
/// All images must share one `H × W`; failures carry the batch index.
pub fn prepare_saliency(
    batch: &[ImageTensor],
    source: &SaliencySource,
    params: &SaliencyParams,
    exec: Execution,
) -> Result<Vec<NormalizedSaliency>> {
    let first = batch.first().ok_or(Error::ZeroSize("batch"))?;
    let (h, w) = (first.height(), first.width());
    if let Some((i, img)) = batch
        .iter()
        .enumerate()
        .find(|(_, img)| img.height() != h || img.width() != w)
    {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} differs from batch resolution {h}x{w}",
            img.height(),
            img.width()
        ))
        .at_index(i));
    }
    if let SaliencySource::External(paths) = source {
        if paths.len() != batch.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} external saliency maps for {} images",
                paths.len(),
                batch.len()
            )));
        }
    }
    gaussian_kernel(params.blur.kernel, params.blur.sigma)?;

    par::try_map_indexed(exec, batch, |i, img| {
        let raw = match source {
            SaliencySource::SpectralResidual => spectral_residual(img, params.working_size),
            SaliencySource::External(paths) => load_external_saliency(&paths[i], h, w),
        };
        raw.and_then(|m| gaussian_blur(&m, params.blur))
            .and_then(|m| normalize_sum_to_1(&m))
            .map_err(|e| e.at_index(i))
    })
}
