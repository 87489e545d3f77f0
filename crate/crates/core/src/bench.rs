//! Augmentation latency and relative overhead.
//!
//! `overhead = (t_aug − t_vanilla) / t_vanilla × 100`. Only `t_aug` is
//! measured here: the vanilla time is the caller's per-batch budget for the
//! rest of a training step, since no training loop runs in this crate.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::{self, MixedSample, Mixer};
use crate::pairing::{self, DistanceOptions};
use crate::par::{self, Execution};
use crate::saliency::{self, SaliencyParams, SaliencySource};
use crate::tensor::{ImageTensor, LabelVector};

pub const MIN_REPEATS: usize = 3;
pub const OVERHEAD_DECIMALS: i32 = 10;
pub const TIMING_SCOPE: &str = "augmentation only (saliency, pairing, mixing); data loading excluded; t_vanilla supplied by caller";
const BENCH_SEED: u64 = 0x5eed;

/// Percentage increase of `t_aug` over `t_vanilla`, rounded to
/// [`OVERHEAD_DECIMALS`] places so decimal inputs give decimal answers
/// (`overhead(107.7, 100.0) == 7.7`).
pub fn overhead(t_aug: f64, t_vanilla: f64) -> Result<f64> {
    if !(t_vanilla > 0.0) || !t_vanilla.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "vanilla time {t_vanilla} must be positive"
        )));
    }
    let scale = 10f64.powi(OVERHEAD_DECIMALS);
    Ok(((t_aug - t_vanilla) / t_vanilla * 100.0 * scale).round() / scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BenchMethod {
    #[serde(rename = "mixup")]
    Mixup,
    #[serde(rename = "cutmix")]
    CutMix,
    #[serde(rename = "guided-sr")]
    GuidedSrGreedy,
    #[serde(rename = "guided-sr-random")]
    GuidedSrRandom,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 4] = [
        BenchMethod::Mixup,
        BenchMethod::CutMix,
        BenchMethod::GuidedSrGreedy,
        BenchMethod::GuidedSrRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Mixup => "mixup",
            BenchMethod::CutMix => "cutmix",
            BenchMethod::GuidedSrGreedy => "guided-sr",
            BenchMethod::GuidedSrRandom => "guided-sr-random",
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixup" => Ok(BenchMethod::Mixup),
            "cutmix" => Ok(BenchMethod::CutMix),
            "guided-sr" | "guided-sr-greedy" => Ok(BenchMethod::GuidedSrGreedy),
            "guided-sr-random" => Ok(BenchMethod::GuidedSrRandom),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub method: String,
    pub batch_size: usize,
    /// Median augmentation time per batch.
    pub t_aug_ms: f64,
    pub t_vanilla_ms: f64,
    pub overhead_pct: f64,
    pub repeats: usize,
    pub samples_ms: Vec<f64>,
    pub timing_scope: String,
}

impl OverheadReport {
    pub fn new(
        method: &str,
        batch_size: usize,
        samples_ms: Vec<f64>,
        t_vanilla_ms: f64,
    ) -> Result<Self> {
        if samples_ms.is_empty() {
            return Err(Error::InvalidParameter("no timing samples".into()));
        }
        let t_aug_ms = median(&samples_ms);
        Ok(OverheadReport {
            method: method.to_string(),
            batch_size,
            t_aug_ms,
            t_vanilla_ms,
            overhead_pct: overhead(t_aug_ms, t_vanilla_ms)?,
            repeats: samples_ms.len(),
            samples_ms,
            timing_scope: TIMING_SCOPE.to_string(),
        })
    }

    /// `overhead_pct` agrees with the stored durations.
    pub fn is_consistent(&self) -> bool {
        overhead(self.t_aug_ms, self.t_vanilla_ms).is_ok_and(|v| v == self.overhead_pct)
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// One full augmentation pass over a batch, sequentially.
pub fn augment_batch(
    method: BenchMethod,
    images: &[ImageTensor],
    labels: &[LabelVector],
    seed: u64,
) -> Result<Vec<MixedSample>> {
    let m = images.len();
    if labels.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{m} images but {} labels",
            labels.len()
        )));
    }
    let exec = Execution::Sequential;
    match method {
        BenchMethod::Mixup | BenchMethod::CutMix => {
            let targets = pairing::random_pairing(m, seed)?
                .targets()
                .expect("random pairing is a permutation");
            let lambda = mixing::sample_lambda(1.0, seed)?;
            targets
                .iter()
                .enumerate()
                .map(|(i, &j)| {
                    let mut s = match method {
                        BenchMethod::Mixup => mixing::input_mixup(
                            &images[i], &images[j], &labels[i], &labels[j], lambda,
                        ),
                        _ => mixing::cutmix(
                            &images[i],
                            &images[j],
                            &labels[i],
                            &labels[j],
                            lambda,
                            seed ^ i as u64,
                        ),
                    }?;
                    s.pair = (i, j);
                    Ok(s)
                })
                .collect()
        }
        BenchMethod::GuidedSrGreedy | BenchMethod::GuidedSrRandom => {
            let maps = saliency::prepare_saliency(
                images,
                &SaliencySource::SpectralResidual,
                &SaliencyParams::default(),
                exec,
            )?;
            let p = if method == BenchMethod::GuidedSrGreedy {
                let w = pairing::distance_matrix_with(&maps, DistanceOptions::default(), exec)?;
                pairing::greedy_pairing(&w)?
            } else {
                pairing::random_pairing(m, seed)?
            };
            Mixer::default().mix_batch(images, labels, &maps, &p, exec)
        }
    }
}

/// Times `repeats` augmentation passes over the first `batch_size` items
/// after one warm-up pass, on a single thread, and reports the median.
pub fn run_bench(
    images: &[ImageTensor],
    labels: &[LabelVector],
    method: BenchMethod,
    batch_size: usize,
    repeats: usize,
    t_vanilla_ms: f64,
) -> Result<OverheadReport> {
    if repeats < MIN_REPEATS {
        return Err(Error::InvalidParameter(format!(
            "repeats {repeats} below the minimum of {MIN_REPEATS}"
        )));
    }
    overhead(t_vanilla_ms, t_vanilla_ms)?;
    if images.len() < batch_size || labels.len() < batch_size {
        return Err(Error::InsufficientData {
            needed: batch_size,
            available: images.len().min(labels.len()),
        });
    }
    let (images, labels) = (&images[..batch_size], &labels[..batch_size]);

    let samples = par::single_threaded(|| -> Result<Vec<f64>> {
        augment_batch(method, images, labels, BENCH_SEED)?;
        (0..repeats)
            .map(|_| {
                let start = Instant::now();
                let out = augment_batch(method, images, labels, BENCH_SEED)?;
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                std::hint::black_box(out);
                Ok(elapsed)
            })
            .collect()
    })?;
    OverheadReport::new(method.name(), batch_size, samples, t_vanilla_ms)
}
