//! Batch manifests: a JSON list of images with class labels and optional
//! precomputed saliency maps. Manifest order is batch order.
//!
//! ```json
//! {
//!   "num_classes": 4,
//!   "items": [
//!     { "image": "img/cat.png", "label": 0 },
//!     { "image": "img/dog.png", "label": 1, "saliency": "maps/dog.gmtn" }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::tensor::{ImageTensor, LabelVector};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub image: PathBuf,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saliency: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub num_classes: usize,
    pub items: Vec<ManifestItem>,
}

impl BatchManifest {
    /// Parses, resolves relative paths and checks labels and file existence.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        let mut manifest: BatchManifest =
            serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for item in &mut manifest.items {
            item.image = base.join(&item.image);
            if let Some(s) = item.saliency.as_mut() {
                *s = base.join(&*s);
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::Manifest("num_classes must be positive".into()));
        }
        for (i, item) in self.items.iter().enumerate() {
            if item.label >= self.num_classes {
                return Err(Error::Manifest(format!(
                    "item {i}: label {} out of range for {} classes",
                    item.label, self.num_classes
                )));
            }
            if !item.image.is_file() {
                return Err(Error::Manifest(format!(
                    "item {i}: image {} not found",
                    item.image.display()
                )));
            }
            if let Some(s) = &item.saliency {
                if !s.is_file() {
                    return Err(Error::Manifest(format!(
                        "item {i}: saliency {} not found",
                        s.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Result<Vec<LabelVector>> {
        self.items
            .iter()
            .map(|it| LabelVector::one_hot(it.label, self.num_classes))
            .collect()
    }

    pub fn load_images(&self, exec: Execution) -> Result<Vec<ImageTensor>> {
        par::try_map_indexed(exec, &self.items, |i, it| {
            ImageTensor::load(&it.image).map_err(|e| e.at_index(i))
        })
    }

    /// External saliency paths, or an error naming the first item without one.
    pub fn saliency_paths(&self) -> Result<Vec<PathBuf>> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, it)| {
                it.saliency.clone().ok_or_else(|| {
                    Error::Manifest(format!(
                        "item {i} ({}) has no saliency field",
                        it.image.display()
                    ))
                })
            })
            .collect()
    }

    /// File stems of the images; must be unique so derived file names do
    /// not collide.
    pub fn stems(&self) -> Result<Vec<String>> {
        let mut seen = HashSet::new();
        self.items
            .iter()
            .enumerate()
            .map(|(i, it)| {
                let stem = it
                    .image
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .ok_or_else(|| {
                        Error::Manifest(format!("item {i}: image path has no file name"))
                    })?;
                if !seen.insert(stem.clone()) {
                    return Err(Error::Manifest(format!(
                        "item {i}: duplicate image stem `{stem}`"
                    )));
                }
                Ok(stem)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_image(dir: &Path, name: &str) {
        ImageTensor::filled(4, 4, 3, 0.5)
            .unwrap()
            .save_png(dir.join(name))
            .unwrap();
    }

    #[test]
    fn load_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "a.png");
        write_image(dir.path(), "b.png");
        let mpath = dir.path().join("m.json");
        fs::write(
            &mpath,
            r#"{"num_classes": 2, "items": [{"image": "a.png", "label": 0}, {"image": "b.png", "label": 1}]}"#,
        )
        .unwrap();
        let m = BatchManifest::load(&mpath).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.stems().unwrap(), vec!["a", "b"]);
        assert_eq!(m.labels().unwrap()[1].probs(), &[0.0, 1.0]);
        assert_eq!(m.load_images(Execution::default()).unwrap().len(), 2);
        let err = m.saliency_paths().unwrap_err().to_string();
        assert!(err.contains("item 0"), "{err}");
    }

    #[test]
    fn load_rejects_bad_label_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        write_image(dir.path(), "a.png");
        let mpath = dir.path().join("m.json");
        fs::write(
            &mpath,
            r#"{"num_classes": 2, "items": [{"image": "a.png", "label": 2}]}"#,
        )
        .unwrap();
        assert!(BatchManifest::load(&mpath).is_err());
        fs::write(
            &mpath,
            r#"{"num_classes": 2, "items": [{"image": "zz.png", "label": 0}]}"#,
        )
        .unwrap();
        assert!(BatchManifest::load(&mpath).is_err());
    }
}
