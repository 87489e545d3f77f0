//! `gmx` command-line frontend.
//!
//! The pipeline is staged through files:
//!
//! ```text
//! gmx saliency --manifest m.json --method sr --out-dir sal/
//! gmx pair     --saliency-dir sal/ --manifest m.json --algo greedy --out pairs.csv
//! gmx mix      --manifest m.json --pairing pairs.csv --saliency-dir sal/ --out-dir mixed/
//! gmx validate --pairing pairs.csv --m 8
//! gmx bench    --manifest m.json --method mixup,guided-sr --batch 8 --repeats 5 --vanilla-ms 100
//! ```
//!
//! Exit codes: 0 success, 1 validation or processing failure, 2 usage error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{self, BenchMethod};
use crate::error::{Error, Result};
use crate::manifest::BatchManifest;
use crate::mixing::{Mixer, DEFAULT_EPS_DEN};
use crate::pairing::{self, DistanceMatrix, DistanceOptions, PairingMatrix, DEFAULT_EXACT_CAP};
use crate::par::{self, Execution};
use crate::saliency::{
    self, BlurParams, NormalizedSaliency, SaliencyMap, SaliencyParams, SaliencySource,
    DEFAULT_BLUR_KERNEL, DEFAULT_BLUR_SIGMA, DEFAULT_WORKING_SIZE,
};
use crate::tensor::{read_tensor, write_tensor};

pub const THREADS_ENV: &str = "GMX_THREADS";
pub const SALIENCY_SUFFIX: &str = ".sal.gmtn";

#[derive(Debug, Parser)]
#[command(name = "gmx", version, about = "Saliency-guided mixup augmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SaliencyMethod {
    /// Spectral residual computed from the image.
    Sr,
    /// Precomputed maps named by each manifest item's `saliency` field.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairAlgo {
    Greedy,
    Random,
    Exact,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute blurred, sum-to-one saliency maps for every manifest item.
    Saliency {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "sr")]
        method: SaliencyMethod,
        #[arg(long, default_value_t = DEFAULT_BLUR_KERNEL)]
        blur_kernel: usize,
        #[arg(long, default_value_t = DEFAULT_BLUR_SIGMA)]
        blur_sigma: f64,
        #[arg(long, default_value_t = DEFAULT_WORKING_SIZE)]
        working_size: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Build the distance matrix from saliency maps and solve the pairing.
    Pair {
        /// Directory of `<stem>.sal.gmtn` maps.
        #[arg(long, required_unless_present = "distance")]
        saliency_dir: Option<PathBuf>,
        /// Orders maps by manifest; without it maps are taken in file-name order.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Read a dense distance CSV instead of saliency maps.
        #[arg(long, conflicts_with = "saliency_dir")]
        distance: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "greedy")]
        algo: PairAlgo,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
        max_m: usize,
        #[arg(long, default_value_t = 1)]
        downsample: usize,
        /// Also write the distance matrix as dense CSV.
        #[arg(long)]
        distance_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mix every source with its paired target; writes PNG, GMTN and labels.json.
    Mix {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        pairing: PathBuf,
        /// Saliency maps from `gmx saliency`; recomputed with defaults when omitted.
        #[arg(long)]
        saliency_dir: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPS_DEN)]
        eps: f64,
    },
    /// Check a pairing CSV against all pairing constraints.
    Validate {
        #[arg(long)]
        pairing: PathBuf,
        #[arg(long)]
        m: usize,
    },
    /// Time augmentation per batch and report overhead as JSON lines.
    Bench {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "guided-sr")]
        method: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "16")]
        batch: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long)]
        vanilla_ms: f64,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(n) => {
                if let Err(e) = par::configure_threads(n) {
                    eprintln!("warning: {THREADS_ENV}: {e}");
                }
            }
            Err(_) => {
                eprintln!("error: {THREADS_ENV}=`{v}` is not a thread count");
                return 2;
            }
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            1
        }
    }
}

pub fn run(command: Command) -> Result<i32> {
    match command {
        Command::Saliency {
            manifest,
            method,
            blur_kernel,
            blur_sigma,
            working_size,
            out_dir,
        } => {
            let params = SaliencyParams {
                blur: BlurParams {
                    kernel: blur_kernel,
                    sigma: blur_sigma,
                },
                working_size,
            };
            cmd_saliency(&manifest, method, &params, &out_dir)?;
            Ok(0)
        }
        Command::Pair {
            saliency_dir,
            manifest,
            distance,
            algo,
            seed,
            max_m,
            downsample,
            distance_out,
            out,
        } => {
            let w = match (distance, saliency_dir) {
                (Some(path), _) => DistanceMatrix::read_csv(
                    File::open(&path).map_err(|e| Error::from(e).in_file(&path))?,
                )?,
                (None, Some(dir)) => {
                    let maps = load_saliency_dir(&dir, manifest.as_deref())?;
                    pairing::distance_matrix_with(
                        &maps,
                        DistanceOptions { downsample },
                        Execution::default(),
                    )?
                }
                (None, None) => {
                    return Err(Error::InvalidParameter(
                        "need --saliency-dir or --distance".into(),
                    ))
                }
            };
            if let Some(path) = distance_out {
                w.write_csv(create(&path)?)?;
            }
            let objective = cmd_pair(&w, algo, seed, max_m, &out)?;
            eprintln!("objective: {objective}");
            Ok(0)
        }
        Command::Mix {
            manifest,
            pairing,
            saliency_dir,
            out_dir,
            eps,
        } => {
            cmd_mix(&manifest, &pairing, saliency_dir.as_deref(), &out_dir, eps)?;
            Ok(0)
        }
        Command::Validate { pairing, m } => {
            let report = cmd_validate(&pairing, m)?;
            if report.is_valid() {
                println!("OK");
                Ok(0)
            } else {
                for v in &report.violations {
                    println!("violation: {v}");
                }
                Ok(1)
            }
        }
        Command::Bench {
            manifest,
            method,
            batch,
            repeats,
            vanilla_ms,
        } => {
            let methods = method
                .iter()
                .map(|m| m.parse::<BenchMethod>())
                .collect::<Result<Vec<_>>>()?;
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for line in cmd_bench(&manifest, &methods, &batch, repeats, vanilla_ms)? {
                writeln!(out, "{line}")?;
            }
            Ok(0)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::from(e).in_file(path))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))
}

/// Writes `<stem>.sal.gmtn` for each manifest item; returns the written paths.
pub fn cmd_saliency(
    manifest: &Path,
    method: SaliencyMethod,
    params: &SaliencyParams,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let manifest = BatchManifest::load(manifest)?;
    let stems = manifest.stems()?;
    let source = match method {
        SaliencyMethod::Sr => SaliencySource::SpectralResidual,
        SaliencyMethod::External => SaliencySource::External(manifest.saliency_paths()?),
    };
    let images = manifest.load_images(Execution::default())?;
    let maps = saliency::prepare_saliency(&images, &source, params, Execution::default())?;
    create_dir(out_dir)?;
    stems
        .iter()
        .zip(&maps)
        .map(|(stem, z)| {
            let path = out_dir.join(format!("{stem}{SALIENCY_SUFFIX}"));
            write_tensor(&z.to_tensor(), &path)?;
            Ok(path)
        })
        .collect()
}

/// Loads normalized maps from `dir`, in manifest order when a manifest is
/// given and in file-name order otherwise. Maps are renormalized after the
/// float32 round trip.
pub fn load_saliency_dir(dir: &Path, manifest: Option<&Path>) -> Result<Vec<NormalizedSaliency>> {
    let paths: Vec<PathBuf> = match manifest {
        Some(m) => BatchManifest::load(m)?
            .stems()?
            .iter()
            .map(|s| dir.join(format!("{s}{SALIENCY_SUFFIX}")))
            .collect(),
        None => {
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| Error::from(e).in_file(dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.to_string_lossy().ends_with(SALIENCY_SUFFIX))
                .collect();
            paths.sort();
            paths
        }
    };
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| load_normalized(p).map_err(|e| e.at_index(i)))
        .collect()
}

fn load_normalized(path: &Path) -> Result<NormalizedSaliency> {
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
    let map = SaliencyMap::new(h, w, t.data.iter().map(|&v| v as f64).collect())
        .map_err(|e| e.in_file(path))?;
    saliency::normalize_sum_to_1(&map)
}

/// Solves the pairing, writes `src,dst` CSV and returns the objective.
pub fn cmd_pair(
    w: &DistanceMatrix,
    algo: PairAlgo,
    seed: u64,
    max_m: usize,
    out: &Path,
) -> Result<f64> {
    let p = match algo {
        PairAlgo::Greedy => pairing::greedy_pairing(w)?,
        PairAlgo::Random => pairing::random_pairing(w.m(), seed)?,
        PairAlgo::Exact => pairing::exact_pairing(w, max_m)?,
    };
    p.write_csv(create(out)?)?;
    pairing::objective(w, &p)
}

#[derive(Debug, Serialize)]
struct LabelsFile {
    pairs: Vec<PairEntry>,
}

#[derive(Debug, Serialize)]
struct PairEntry {
    src: usize,
    dst: usize,
    lambda_src: f64,
    lambda_dst: f64,
    label: Vec<f64>,
}

/// Writes `<stem>.mix.png`, `<stem>.mix.gmtn` per source and `labels.json`.
pub fn cmd_mix(
    manifest: &Path,
    pairing_csv: &Path,
    saliency_dir: Option<&Path>,
    out_dir: &Path,
    eps: f64,
) -> Result<()> {
    let mixer = Mixer::new(eps)?;
    let batch = BatchManifest::load(manifest)?;
    let stems = batch.stems()?;
    let m = batch.len();
    let p = PairingMatrix::read_csv(
        File::open(pairing_csv).map_err(|e| Error::from(e).in_file(pairing_csv))?,
        m,
    )
    .map_err(|e| e.in_file(pairing_csv))?;
    let images = batch.load_images(Execution::default())?;
    let labels = batch.labels()?;
    let maps = match saliency_dir {
        Some(dir) => load_saliency_dir(dir, Some(manifest))?,
        None => saliency::prepare_saliency(
            &images,
            &SaliencySource::SpectralResidual,
            &SaliencyParams::default(),
            Execution::default(),
        )?,
    };
    let mixed = mixer.mix_batch(&images, &labels, &maps, &p, Execution::default())?;

    create_dir(out_dir)?;
    let mut entries = Vec::with_capacity(m);
    for sample in &mixed {
        let (src, dst) = sample.pair;
        let stem = &stems[src];
        write_tensor(
            &sample.image.to_tensor(),
            out_dir.join(format!("{stem}.mix.gmtn")),
        )?;
        sample
            .image
            .save_png(out_dir.join(format!("{stem}.mix.png")))?;
        entries.push(PairEntry {
            src,
            dst,
            lambda_src: sample.lambda_src,
            lambda_dst: 1.0 - sample.lambda_src,
            label: sample.label.probs().to_vec(),
        });
    }
    let mut f = create(&out_dir.join("labels.json"))?;
    serde_json::to_writer_pretty(&mut f, &LabelsFile { pairs: entries })?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

pub fn cmd_validate(pairing_csv: &Path, m: usize) -> Result<pairing::ValidationReport> {
    let f = File::open(pairing_csv).map_err(|e| Error::from(e).in_file(pairing_csv))?;
    let p = PairingMatrix::read_csv(f, m).map_err(|e| e.in_file(pairing_csv))?;
    Ok(pairing::validate_pairing(&p))
}

/// One JSON line per `(method, batch size)`.
pub fn cmd_bench(
    manifest: &Path,
    methods: &[BenchMethod],
    batches: &[usize],
    repeats: usize,
    vanilla_ms: f64,
) -> Result<Vec<String>> {
    let batch = BatchManifest::load(manifest)?;
    let images = batch.load_images(Execution::default())?;
    let labels = batch.labels()?;
    let mut lines = Vec::new();
    for &method in methods {
        for &size in batches {
            let report = bench::run_bench(&images, &labels, method, size, repeats, vanilla_ms)?;
            lines.push(report.to_json_line()?);
        }
    }
    Ok(lines)
}
