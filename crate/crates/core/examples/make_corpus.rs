//! Regenerates the small synthetic corpus used by the CLI tests:
//! `cargo run --example make_corpus -- tests/data/corpus`.

use std::fs;
use std::path::PathBuf;

use gmx::manifest::{BatchManifest, ManifestItem};
use gmx::ImageTensor;

const SIZE: usize = 48;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "tests/data/corpus".into()),
    );
    fs::create_dir_all(&out)?;

    // (centre y, centre x, radius, colour, square?)
    let objects: [(f32, f32, f32, [f32; 3], bool); 8] = [
        (12.0, 12.0, 7.0, [0.9, 0.2, 0.1], false),
        (36.0, 36.0, 8.0, [0.1, 0.8, 0.2], true),
        (12.0, 36.0, 6.0, [0.2, 0.3, 0.9], false),
        (36.0, 12.0, 9.0, [0.9, 0.9, 0.1], true),
        (24.0, 24.0, 10.0, [0.8, 0.1, 0.8], false),
        (8.0, 24.0, 5.0, [0.1, 0.9, 0.9], true),
        (40.0, 24.0, 6.0, [1.0, 0.5, 0.0], false),
        (24.0, 40.0, 7.0, [0.5, 0.5, 0.5], true),
    ];

    let mut items = Vec::new();
    for (k, &(cy, cx, r, colour, square)) in objects.iter().enumerate() {
        let img = ImageTensor::from_fn(SIZE, SIZE, 3, |y, x, c| {
            let (dy, dx) = (y as f32 - cy, x as f32 - cx);
            let inside = if square {
                dy.abs() <= r && dx.abs() <= r
            } else {
                dy * dy + dx * dx <= r * r
            };
            if inside {
                colour[c]
            } else {
                let g = (y + x) as f32 / (2 * SIZE) as f32;
                0.15 + 0.2 * g + 0.05 * c as f32
            }
        })?;
        let name = format!("img{k}.png");
        img.save_png(out.join(&name))?;
        items.push(ManifestItem {
            image: name.into(),
            label: k % 4,
            saliency: None,
        });
    }
    let manifest = BatchManifest {
        num_classes: 4,
        items,
    };
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}
