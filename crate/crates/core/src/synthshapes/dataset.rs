//! Dataset writer: PNG images, per-split annotation containers, and a
//! deterministic manifest. Re-running with the same config writes the same
//! bytes, so the manifest hash doubles as an idempotency check.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::AnnotationContainer;
use crate::error::{Error, Result};

use super::generate::{generate_scene, GeneratorConfig};
use super::scene::{scenes_to_container, ShapeScene};

/// Per-split seed spacing; splits draw from disjoint seed ranges.
const SPLIT_SEED_STRIDE: u64 = 1_000_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub name: String,
    pub count: usize,
    pub seed_start: u64,
    pub annotations_file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    /// SHA-256 over the generator config, seed, and split sizes.
    pub config_hash: String,
    pub base_seed: u64,
    pub canvas_h: usize,
    pub canvas_w: usize,
    pub splits: Vec<SplitManifest>,
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        toml::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
    }

    pub fn split(&self, name: &str) -> Option<&SplitManifest> {
        self.splits.iter().find(|s| s.name == name)
    }
}

/// Hash of everything that determines dataset content.
pub fn dataset_config_hash(
    config: &GeneratorConfig,
    base_seed: u64,
    split_sizes: &[(String, usize)],
) -> String {
    let mut hasher = Sha256::new();
    let payload = serde_json::json!({
        "config": config,
        "base_seed": base_seed,
        "splits": split_sizes,
    });
    hasher.update(payload.to_string().as_bytes());
    hex_digest(&hasher.finalize())
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_png(scene: &ShapeScene, path: &Path) -> Result<()> {
    let (h, w, _) = scene.image.dim();
    let mut img = image::RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            img.put_pixel(
                x as u32,
                y as u32,
                image::Rgb([
                    scene.image[(y, x, 0)],
                    scene.image[(y, x, 1)],
                    scene.image[(y, x, 2)],
                ]),
            );
        }
    }
    img.save(path)
        .map_err(|e| Error::io(path.display().to_string(), format_io(e)))
}

fn format_io(e: image::ImageError) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

/// Generate `split_sizes` scenes per split under `out_dir`.
///
/// Layout: `images/<split>/img_<n>.png`, `annotations_<split>.json`, and
/// `manifest.toml` at the root. Image ids are global across splits in
/// split order.
pub fn generate_dataset(
    config: &GeneratorConfig,
    base_seed: u64,
    split_sizes: &[(String, usize)],
    out_dir: &Path,
) -> Result<DatasetManifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let mut splits = Vec::new();
    let mut next_image_id: u64 = 0;
    for (split_idx, (split_name, count)) in split_sizes.iter().enumerate() {
        let img_dir = out_dir.join("images").join(split_name);
        fs::create_dir_all(&img_dir).map_err(|e| Error::io(img_dir.display().to_string(), e))?;
        let seed_start = base_seed + split_idx as u64 * SPLIT_SEED_STRIDE;

        // Scenes are pure functions of their seed: generate in parallel,
        // keep ids and file order by index.
        let scenes: Vec<ShapeScene> = (0..*count)
            .into_par_iter()
            .map(|i| generate_scene(seed_start + i as u64, config))
            .collect::<Result<_>>()?;

        let mut entries: Vec<(&ShapeScene, u64, String)> = Vec::with_capacity(*count);
        for (i, scene) in scenes.iter().enumerate() {
            let rel = format!("images/{split_name}/img_{i:05}.png");
            write_png(scene, &out_dir.join(&rel))?;
            entries.push((scene, next_image_id + i as u64, rel));
        }
        let container = scenes_to_container(&entries);
        let ann_file = format!("annotations_{split_name}.json");
        container.save(&out_dir.join(&ann_file))?;

        splits.push(SplitManifest {
            name: split_name.clone(),
            count: *count,
            seed_start,
            annotations_file: ann_file,
        });
        next_image_id += *count as u64;
    }

    let manifest = DatasetManifest {
        format_version: 1,
        config_hash: dataset_config_hash(config, base_seed, split_sizes),
        base_seed,
        canvas_h: config.canvas_h,
        canvas_w: config.canvas_w,
        splits,
    };
    manifest.save(&out_dir.join("manifest.toml"))?;
    Ok(manifest)
}

/// Load the manifest for a generated dataset directory.
pub fn load_manifest(root: &Path) -> Result<DatasetManifest> {
    DatasetManifest::load(&root.join("manifest.toml"))
}

/// Path helper used by loaders.
pub fn manifest_path(root: &Path) -> PathBuf {
    root.join("manifest.toml")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::DatasetIndex;

    fn tiny_config() -> GeneratorConfig {
        GeneratorConfig {
            canvas_h: 48,
            canvas_w: 48,
            max_objects: 4,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn writes_valid_loadable_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_dataset(
            &tiny_config(),
            7,
            &[("train".into(), 4), ("eval".into(), 2)],
            dir.path(),
        )
        .unwrap();
        assert_eq!(manifest.split("train").unwrap().count, 4);
        assert_eq!(manifest.split("eval").unwrap().count, 2);

        let index = DatasetIndex::load(dir.path()).unwrap();
        assert_eq!(index.images.len(), 6);
        assert_eq!(index.split_image_ids("train").len(), 4);
        assert_eq!(index.split_image_ids("eval").len(), 2);
        for img in &index.images {
            assert!(index.image_path(img).exists());
            assert!(img.occlusion_rle.is_some());
        }
    }

    #[test]
    fn empty_splits_are_schema_valid() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_dataset(
            &tiny_config(),
            7,
            &[("train".into(), 0), ("eval".into(), 0)],
            dir.path(),
        )
        .unwrap();
        assert_eq!(manifest.split("train").unwrap().count, 0);
        let index = DatasetIndex::load(dir.path()).unwrap();
        assert!(index.images.is_empty());
    }

    #[test]
    fn regeneration_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let sizes = [("train".to_string(), 3)];
        let m1 = generate_dataset(&tiny_config(), 11, &sizes, dir.path()).unwrap();
        let manifest_bytes_1 = fs::read(dir.path().join("manifest.toml")).unwrap();
        let ann_bytes_1 = fs::read(dir.path().join("annotations_train.json")).unwrap();
        let img_bytes_1 = fs::read(dir.path().join("images/train/img_00001.png")).unwrap();

        let m2 = generate_dataset(&tiny_config(), 11, &sizes, dir.path()).unwrap();
        assert_eq!(m1.config_hash, m2.config_hash);
        assert_eq!(manifest_bytes_1, fs::read(dir.path().join("manifest.toml")).unwrap());
        assert_eq!(
            ann_bytes_1,
            fs::read(dir.path().join("annotations_train.json")).unwrap()
        );
        assert_eq!(
            img_bytes_1,
            fs::read(dir.path().join("images/train/img_00001.png")).unwrap()
        );
    }

    #[test]
    fn config_changes_change_the_hash() {
        let a = dataset_config_hash(&tiny_config(), 7, &[("train".into(), 4)]);
        let b = dataset_config_hash(&tiny_config(), 8, &[("train".into(), 4)]);
        let mut other = tiny_config();
        other.max_objects = 5;
        let c = dataset_config_hash(&other, 7, &[("train".into(), 4)]);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
