//! Pixel-wise saliency-ratio mixing of images and labels, plus the Input
//! Mixup and CutMix baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::pairing::{validate_pairing, PairingMatrix};
use crate::par::{self, Execution};
use crate::saliency::NormalizedSaliency;
use crate::tensor::{ImageTensor, LabelVector};

/// Denominators `z_s + z_t` below this fall back to an even 0.5/0.5 split.
pub const DEFAULT_EPS_DEN: f64 = 1e-12;

/// Per-pixel weight of one side of a mix, each in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixMask {
    height: usize,
    width: usize,
    weights: Vec<f64>,
}

impl MixMask {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    fn complement(&self) -> MixMask {
        MixMask {
            height: self.height,
            width: self.width,
            weights: self.weights.iter().map(|w| 1.0 - w).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedSample {
    pub image: ImageTensor,
    pub label: LabelVector,
    /// Weight of the source image at every pixel.
    pub source_mask: MixMask,
    /// Label coefficient of the source; the target gets `1 − lambda_src`.
    pub lambda_src: f64,
    /// `(source index, target index)` within the batch.
    pub pair: (usize, usize),
}

/// Saliency-guided mixer. Holds the zero-denominator threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mixer {
    pub eps_den: f64,
}

impl Default for Mixer {
    fn default() -> Self {
        Mixer {
            eps_den: DEFAULT_EPS_DEN,
        }
    }
}

fn check_maps(z_s: &NormalizedSaliency, z_t: &NormalizedSaliency) -> Result<()> {
    if !z_s.same_shape(z_t) {
        return Err(Error::ShapeMismatch(format!(
            "saliency maps {}x{} and {}x{}",
            z_s.height(),
            z_s.width(),
            z_t.height(),
            z_t.width()
        )));
    }
    Ok(())
}

fn check_images(x_s: &ImageTensor, x_t: &ImageTensor) -> Result<()> {
    if !x_s.same_shape(x_t) {
        return Err(Error::ShapeMismatch(format!(
            "images {} and {}",
            x_s.shape_string(),
            x_t.shape_string()
        )));
    }
    Ok(())
}

/// Per-pixel convex combination of two same-shaped images, with the source
/// weight broadcast across channels.
fn blend_images(
    x_s: &ImageTensor,
    x_t: &ImageTensor,
    source_weights: &[f64],
) -> Result<ImageTensor> {
    let c = x_s.channels();
    let data = x_s
        .data()
        .iter()
        .zip(x_t.data())
        .enumerate()
        .map(|(k, (&a, &b))| {
            let m = source_weights[k / c];
            (m * a as f64 + (1.0 - m) * b as f64) as f32
        })
        .collect();
    ImageTensor::new(x_s.height(), x_s.width(), c, data)
}

impl Mixer {
    pub fn new(eps_den: f64) -> Result<Self> {
        if !(eps_den >= 0.0) || !eps_den.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eps {eps_den} must be finite and nonnegative"
            )));
        }
        Ok(Mixer { eps_den })
    }

    fn ratio(&self, s: f64, t: f64) -> f64 {
        let den = s + t;
        if den < self.eps_den || den <= 0.0 {
            0.5
        } else {
            s / den
        }
    }

    /// `(z_s ⊘ (z_s + z_t), z_t ⊘ (z_s + z_t))`; the target mask is the exact
    /// complement of the source mask.
    pub fn pixel_mix_mask(
        &self,
        z_s: &NormalizedSaliency,
        z_t: &NormalizedSaliency,
    ) -> Result<(MixMask, MixMask)> {
        check_maps(z_s, z_t)?;
        let source = MixMask {
            height: z_s.height(),
            width: z_s.width(),
            weights: z_s
                .values()
                .iter()
                .zip(z_t.values())
                .map(|(&s, &t)| self.ratio(s, t))
                .collect(),
        };
        let target = source.complement();
        Ok((source, target))
    }

    pub fn mix_pair(
        &self,
        x_s: &ImageTensor,
        x_t: &ImageTensor,
        z_s: &NormalizedSaliency,
        z_t: &NormalizedSaliency,
    ) -> Result<ImageTensor> {
        self.mix_pair_with_mask(x_s, x_t, z_s, z_t)
            .map(|(img, _)| img)
    }

    fn mix_pair_with_mask(
        &self,
        x_s: &ImageTensor,
        x_t: &ImageTensor,
        z_s: &NormalizedSaliency,
        z_t: &NormalizedSaliency,
    ) -> Result<(ImageTensor, MixMask)> {
        check_images(x_s, x_t)?;
        let (mask, _) = self.pixel_mix_mask(z_s, z_t)?;
        if mask.height != x_s.height() || mask.width != x_s.width() {
            return Err(Error::ShapeMismatch(format!(
                "saliency {}x{} for image {}",
                mask.height,
                mask.width,
                x_s.shape_string()
            )));
        }
        Ok((blend_images(x_s, x_t, &mask.weights)?, mask))
    }

    /// Soft label `λ_s·y_s + (1 − λ_s)·y_t` with `λ_s` the mean source mask.
    /// Returns the label and `λ_s`.
    pub fn mix_labels(
        &self,
        y_s: &LabelVector,
        y_t: &LabelVector,
        z_s: &NormalizedSaliency,
        z_t: &NormalizedSaliency,
    ) -> Result<(LabelVector, f64)> {
        let (mask, _) = self.pixel_mix_mask(z_s, z_t)?;
        let lambda = mask.mean();
        Ok((y_s.blend(y_t, lambda)?, lambda))
    }

    /// Mixes every source `i` with the target `j` where `p[i][j] = 1`.
    /// Output is in source order.
    pub fn mix_batch(
        &self,
        images: &[ImageTensor],
        labels: &[LabelVector],
        maps: &[NormalizedSaliency],
        p: &PairingMatrix,
        exec: Execution,
    ) -> Result<Vec<MixedSample>> {
        let m = p.m();
        if images.len() != m || labels.len() != m || maps.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "pairing is {m}x{m} but batch has {} images, {} labels, {} maps",
                images.len(),
                labels.len(),
                maps.len()
            )));
        }
        let report = validate_pairing(p);
        if !report.is_valid() {
            let first = &report.violations[0];
            return Err(Error::InvalidPairing(format!(
                "{first} ({} violations)",
                report.violations.len()
            )));
        }
        let targets = p.targets().expect("valid pairing is a permutation");
        par::try_map_indexed(exec, &targets, |i, &j| {
            self.mix_indexed(images, labels, maps, i, j)
                .map_err(|e| e.at_index(i))
        })
    }

    fn mix_indexed(
        &self,
        images: &[ImageTensor],
        labels: &[LabelVector],
        maps: &[NormalizedSaliency],
        i: usize,
        j: usize,
    ) -> Result<MixedSample> {
        let (image, source_mask) =
            self.mix_pair_with_mask(&images[i], &images[j], &maps[i], &maps[j])?;
        let lambda_src = source_mask.mean();
        let label = labels[i].blend(&labels[j], lambda_src)?;
        Ok(MixedSample {
            image,
            label,
            source_mask,
            lambda_src,
            pair: (i, j),
        })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda {lambda} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Input Mixup: `λ·x_s + (1 − λ)·x_t` and the same blend of labels.
pub fn input_mixup(
    x_s: &ImageTensor,
    x_t: &ImageTensor,
    y_s: &LabelVector,
    y_t: &LabelVector,
    lambda: f64,
) -> Result<MixedSample> {
    check_lambda(lambda)?;
    check_images(x_s, x_t)?;
    let weights = vec![lambda; x_s.pixels()];
    Ok(MixedSample {
        image: blend_images(x_s, x_t, &weights)?,
        label: y_s.blend(y_t, lambda)?,
        source_mask: MixMask {
            height: x_s.height(),
            width: x_s.width(),
            weights,
        },
        lambda_src: lambda,
        pair: (0, 1),
    })
}

/// CutMix: a rectangle covering a `1 − λ` fraction of the image, centred at a
/// uniformly random pixel and clipped to the borders, is taken from the
/// target. The label weight is the source area that actually survives.
pub fn cutmix(
    x_s: &ImageTensor,
    x_t: &ImageTensor,
    y_s: &LabelVector,
    y_t: &LabelVector,
    lambda: f64,
    seed: u64,
) -> Result<MixedSample> {
    check_lambda(lambda)?;
    check_images(x_s, x_t)?;
    let (h, w) = (x_s.height(), x_s.width());
    let ratio = (1.0 - lambda).sqrt();
    let cut_h = (h as f64 * ratio).round() as usize;
    let cut_w = (w as f64 * ratio).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cy = rng.random_range(0..h);
    let cx = rng.random_range(0..w);
    let y0 = cy.saturating_sub(cut_h / 2);
    let x0 = cx.saturating_sub(cut_w / 2);
    let y1 = (cy + cut_h - cut_h / 2).min(h);
    let x1 = (cx + cut_w - cut_w / 2).min(w);

    let mut weights = vec![1.0; h * w];
    for y in y0..y1 {
        for x in x0..x1 {
            weights[y * w + x] = 0.0;
        }
    }
    let replaced = (y1 - y0) * (x1 - x0);
    let lambda_src = 1.0 - replaced as f64 / (h * w) as f64;
    Ok(MixedSample {
        image: blend_images(x_s, x_t, &weights)?,
        label: y_s.blend(y_t, lambda_src)?,
        source_mask: MixMask {
            height: h,
            width: w,
            weights,
        },
        lambda_src,
        pair: (0, 1),
    })
}

/// Draws a baseline mixing coefficient from Beta(α, α).
pub fn sample_lambda(alpha: f64, seed: u64) -> Result<f64> {
    let beta = Beta::new(alpha, alpha)
        .map_err(|e| Error::InvalidParameter(format!("beta({alpha}): {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(beta.sample(&mut rng))
}
