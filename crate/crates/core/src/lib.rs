//! Saliency-guided mixup augmentation for image batches.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`saliency`]: spectral-residual (or externally supplied) saliency maps,
//!    Gaussian-blurred and normalized to sum to one.
//! 2. [`pairing`]: pairwise ℓ2 distances between the normalized maps and a
//!    pairing that maximizes the total distance subject to every image being
//!    used exactly once as source and once as target, with no self-pairs and
//!    no mutual pairs. Greedy, exhaustive and random solvers are provided.
//! 3. [`mixing`]: per-pixel mixing ratios `z_s / (z_s + z_t)` applied to the
//!    paired images and their labels.
//! 4. [`bench`]: per-batch augmentation latency and the relative overhead
//!    metric.
//!
//! Data-parallel loops (per-image saliency, distance rows, per-pair mixing)
//! run on rayon when the `parallel` feature is enabled and fall back to plain
//! iterators otherwise; see [`par::Execution`].

pub mod bench;
pub mod cli;
pub mod error;
pub mod manifest;
pub mod mixing;
pub mod pairing;
pub mod par;
pub mod saliency;
pub mod tensor;

pub use error::{Error, Result};
pub use mixing::{MixMask, MixedSample, Mixer};
pub use pairing::{DistanceMatrix, PairingMatrix, ValidationReport, Violation};
pub use par::Execution;
pub use saliency::{BlurParams, NormalizedSaliency, SaliencyMap, SaliencyParams, SaliencySource};
pub use tensor::{ImageTensor, LabelVector, Tensor};
