//! Drives the `gmx` binary through the staged pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn corpus_manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus/manifest.json")
}

pub fn gmx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmx"))
        .args(args)
        .env("GMX_THREADS", "1")
        .output()
        .expect("spawn gmx")
}

pub fn ok(args: &[&str]) -> Output {
    let out = gmx(args);
    assert!(
        out.status.success(),
        "gmx {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// saliency -> pair -> validate -> mix into `root`; returns every produced
/// file keyed by its path relative to `root`.
pub fn run_pipeline(
    root: &Path,
    algo: &str,
    seed: u64,
) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let manifest = corpus_manifest();
    let manifest = manifest.to_str().unwrap();
    let sal = root.join("sal");
    let pairs = root.join("pairs.csv");
    let mixed = root.join("mixed");
    let seed = seed.to_string();
    let steps: [Vec<&str>; 4] = [
        vec![
            "saliency",
            "--manifest",
            manifest,
            "--method",
            "sr",
            "--out-dir",
            sal.to_str().unwrap(),
        ],
        vec![
            "pair",
            "--saliency-dir",
            sal.to_str().unwrap(),
            "--manifest",
            manifest,
            "--algo",
            algo,
            "--seed",
            &seed,
            "--out",
            pairs.to_str().unwrap(),
        ],
        vec!["validate", "--pairing", pairs.to_str().unwrap(), "--m", "8"],
        vec![
            "mix",
            "--manifest",
            manifest,
            "--pairing",
            pairs.to_str().unwrap(),
            "--saliency-dir",
            sal.to_str().unwrap(),
            "--out-dir",
            mixed.to_str().unwrap(),
        ],
    ];
    for args in &steps {
        let out = gmx(args);
        if !out.status.success() {
            return Err(format!(
                "gmx {} exited {:?}: {}",
                args[0],
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            ));
        }
    }
    let mut files = BTreeMap::new();
    collect(root, root, &mut files);
    Ok(files)
}

fn collect(root: &Path, dir: &Path, files: &mut BTreeMap<String, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect(root, &path, files);
        } else {
            let key = path
                .strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .into_owned();
            files.insert(key, fs::read(&path).unwrap());
        }
    }
}
