//! COCO-style annotation containers and the validated dataset index.
//!
//! One JSON document per split with `images`, `annotations`, and
//! `categories` arrays. Masks are stored as column-major RLE count arrays;
//! the per-image occlusion map is stored redundantly on the image record so
//! the detector's occlusion target loads without re-deriving the union.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::rle::{mask_area, mask_tight_box, rle_decode};
use crate::dataio::{BoxXYXY, Mask};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub path: String,
    pub height: usize,
    pub width: usize,
    /// Scene-level occlusion map (union of amodal minus visible), RLE counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occlusion_rle: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmodalAnnotation {
    pub image_id: u64,
    pub category_id: u32,
    pub amodal_rle: Vec<u32>,
    pub visible_rle: Vec<u32>,
    pub amodal_box: [f64; 4],
    pub occluded: bool,
    pub area_amodal: u64,
    /// Detection score; present only on prediction containers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl AmodalAnnotation {
    pub fn amodal_mask(&self, h: usize, w: usize) -> Result<Mask> {
        rle_decode(&self.amodal_rle, h, w)
    }

    pub fn visible_mask(&self, h: usize, w: usize) -> Result<Mask> {
        rle_decode(&self.visible_rle, h, w)
    }

    pub fn bbox(&self) -> BoxXYXY {
        BoxXYXY::new(
            self.amodal_box[0],
            self.amodal_box[1],
            self.amodal_box[2],
            self.amodal_box[3],
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationContainer {
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<AmodalAnnotation>,
    pub categories: Vec<CategoryRecord>,
}

impl AnnotationContainer {
    pub fn save(&self, path: &Path) -> Result<()> {
        let data = serde_json::to_vec(self).map_err(|e| Error::Serde(e.to_string()))?;
        fs::write(path, data).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_slice(&data)
            .map_err(|e| Error::DatasetLoad(format!("{}: {e}", path.display())))
    }
}

/// Fully validated, immutable view over one or more annotation containers.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub images: Vec<ImageRecord>,
    /// Split tag per image, parallel to `images`.
    pub splits: Vec<String>,
    pub annotations: Vec<AmodalAnnotation>,
    pub categories: Vec<CategoryRecord>,
    by_image: HashMap<u64, Vec<usize>>,
    image_pos: HashMap<u64, usize>,
}

impl DatasetIndex {
    /// Load every `annotations_<split>.json` under `root`, validating all
    /// annotation invariants. Errors name the first offending record.
    pub fn load(root: &Path) -> Result<Self> {
        let mut split_files: Vec<(String, PathBuf)> = Vec::new();
        let entries =
            fs::read_dir(root).map_err(|e| Error::io(root.display().to_string(), e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(root.display().to_string(), e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name
                .strip_prefix("annotations_")
                .and_then(|s| s.strip_suffix(".json"))
            {
                split_files.push((stem.to_string(), entry.path()));
            }
        }
        if split_files.is_empty() {
            return Err(Error::DatasetLoad(format!(
                "{}: no annotations_<split>.json files found",
                root.display()
            )));
        }
        split_files.sort();

        let mut index = DatasetIndex {
            root: root.to_path_buf(),
            images: Vec::new(),
            splits: Vec::new(),
            annotations: Vec::new(),
            categories: Vec::new(),
            by_image: HashMap::new(),
            image_pos: HashMap::new(),
        };
        for (split, path) in split_files {
            let container = AnnotationContainer::load(&path)?;
            index.absorb(&split, container)?;
        }
        Ok(index)
    }

    /// Build an index from a single in-memory container (used by tests and
    /// by the evaluator for prediction containers).
    pub fn from_container(root: &Path, split: &str, container: AnnotationContainer) -> Result<Self> {
        let mut index = DatasetIndex {
            root: root.to_path_buf(),
            images: Vec::new(),
            splits: Vec::new(),
            annotations: Vec::new(),
            categories: Vec::new(),
            by_image: HashMap::new(),
            image_pos: HashMap::new(),
        };
        index.absorb(split, container)?;
        Ok(index)
    }

    fn absorb(&mut self, split: &str, container: AnnotationContainer) -> Result<()> {
        for cat in container.categories {
            if !self.categories.iter().any(|c| c.id == cat.id) {
                self.categories.push(cat);
            }
        }
        self.categories.sort_by_key(|c| c.id);
        for img in container.images {
            if self.image_pos.contains_key(&img.id) {
                return Err(Error::DatasetLoad(format!(
                    "duplicate image id {} in split {split}",
                    img.id
                )));
            }
            self.image_pos.insert(img.id, self.images.len());
            self.images.push(img);
            self.splits.push(split.to_string());
        }
        for (i, ann) in container.annotations.into_iter().enumerate() {
            validate_annotation(&ann, i, self)?;
            self.by_image
                .entry(ann.image_id)
                .or_default()
                .push(self.annotations.len());
            self.annotations.push(ann);
        }
        Ok(())
    }

    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.image_pos.get(&id).map(|&i| &self.images[i])
    }

    pub fn split_of(&self, id: u64) -> Option<&str> {
        self.image_pos.get(&id).map(|&i| self.splits[i].as_str())
    }

    /// Image ids in one split, in file order.
    pub fn split_image_ids(&self, split: &str) -> Vec<u64> {
        self.images
            .iter()
            .zip(self.splits.iter())
            .filter(|(_, s)| s.as_str() == split)
            .map(|(img, _)| img.id)
            .collect()
    }

    /// Annotation indices for an image (empty if none).
    pub fn annotations_of(&self, image_id: u64) -> &[usize] {
        self.by_image
            .get(&image_id)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn image_path(&self, img: &ImageRecord) -> PathBuf {
        self.root.join(&img.path)
    }
}

fn validate_annotation(ann: &AmodalAnnotation, pos: usize, index: &DatasetIndex) -> Result<()> {
    let fail = |msg: String| {
        Err(Error::DatasetLoad(format!(
            "annotation #{pos} (image {}): {msg}",
            ann.image_id
        )))
    };
    let Some(img) = index.image(ann.image_id) else {
        return fail("image_id does not resolve".into());
    };
    let (h, w) = (img.height, img.width);
    let amodal = match rle_decode(&ann.amodal_rle, h, w) {
        Ok(m) => m,
        Err(e) => return fail(format!("amodal_rle does not decode at {h}x{w}: {e}")),
    };
    let visible = match rle_decode(&ann.visible_rle, h, w) {
        Ok(m) => m,
        Err(e) => return fail(format!("visible_rle does not decode at {h}x{w}: {e}")),
    };
    // visible ⊆ amodal, pixelwise
    for ((y, x), &v) in visible.indexed_iter() {
        if v != 0 && amodal[(y, x)] == 0 {
            return fail(format!("visible mask not a subset of amodal at ({x},{y})"));
        }
    }
    let occluded = amodal != visible;
    if occluded != ann.occluded {
        return fail(format!(
            "occluded flag {} inconsistent with masks (expected {occluded})",
            ann.occluded
        ));
    }
    match mask_tight_box(&amodal) {
        None => return fail("amodal mask is empty".into()),
        Some((x0, y0, x1, y1)) => {
            let want = [x0 as f64, y0 as f64, x1 as f64, y1 as f64];
            if ann.amodal_box != want {
                return fail(format!(
                    "amodal_box {:?} is not the tight box {want:?}",
                    ann.amodal_box
                ));
            }
        }
    }
    if ann.area_amodal != mask_area(&amodal) as u64 {
        return fail(format!("area_amodal {} does not match mask", ann.area_amodal));
    }
    if !index.categories.iter().any(|c| c.id == ann.category_id) {
        return fail(format!("unknown category_id {}", ann.category_id));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::rle_encode;

    fn tiny_container() -> AnnotationContainer {
        let mut amodal = Mask::zeros((8, 8));
        for y in 2..6 {
            for x in 2..6 {
                amodal[(y, x)] = 1;
            }
        }
        let mut visible = amodal.clone();
        visible[(2, 2)] = 0;
        AnnotationContainer {
            images: vec![ImageRecord {
                id: 0,
                path: "images/im0.png".into(),
                height: 8,
                width: 8,
                occlusion_rle: None,
            }],
            annotations: vec![AmodalAnnotation {
                image_id: 0,
                category_id: 2,
                amodal_rle: rle_encode(&amodal),
                visible_rle: rle_encode(&visible),
                amodal_box: [2.0, 2.0, 6.0, 6.0],
                occluded: true,
                area_amodal: 16,
                score: None,
            }],
            categories: vec![CategoryRecord {
                id: 2,
                name: "rectangle".into(),
            }],
        }
    }

    #[test]
    fn valid_container_loads() {
        let idx =
            DatasetIndex::from_container(Path::new("/nonexistent"), "train", tiny_container())
                .unwrap();
        assert_eq!(idx.images.len(), 1);
        assert_eq!(idx.annotations_of(0).len(), 1);
    }

    #[test]
    fn visible_outside_amodal_is_rejected() {
        let mut c = tiny_container();
        // Turn on a visible pixel outside the amodal mask.
        let mut visible = rle_decode(&c.annotations[0].visible_rle, 8, 8).unwrap();
        visible[(0, 0)] = 1;
        c.annotations[0].visible_rle = rle_encode(&visible);
        let err = DatasetIndex::from_container(Path::new("/nonexistent"), "train", c).unwrap_err();
        assert!(err.to_string().contains("subset"), "{err}");
    }

    #[test]
    fn wrong_tight_box_is_rejected() {
        let mut c = tiny_container();
        c.annotations[0].amodal_box = [1.0, 2.0, 6.0, 6.0];
        let err = DatasetIndex::from_container(Path::new("/nonexistent"), "train", c).unwrap_err();
        assert!(err.to_string().contains("tight box"), "{err}");
    }

    #[test]
    fn unresolved_image_id_is_rejected() {
        let mut c = tiny_container();
        c.annotations[0].image_id = 99;
        let err = DatasetIndex::from_container(Path::new("/nonexistent"), "train", c).unwrap_err();
        assert!(err.to_string().contains("does not resolve"), "{err}");
    }

    #[test]
    fn empty_container_is_fine() {
        let c = AnnotationContainer {
            images: vec![],
            annotations: vec![],
            categories: vec![],
        };
        let idx = DatasetIndex::from_container(Path::new("/nonexistent"), "eval", c).unwrap();
        assert!(idx.images.is_empty());
        assert!(idx.annotations.is_empty());
    }
}
