//! Scene composition: painter's-order rendering plus amodal/visible mask
//! and occlusion-map derivation.

use ndarray::Array3;

use crate::dataio::{
    mask_area, mask_tight_box, rle_encode, AmodalAnnotation, AnnotationContainer, CategoryRecord,
    ImageRecord, Mask,
};
use crate::error::{Error, Result};

use super::spec::{rasterize_shape, ShapeKind, ShapeSpec};

/// One composed instance with its ground truth.
#[derive(Debug, Clone)]
pub struct SceneInstance {
    pub spec: ShapeSpec,
    pub amodal_mask: Mask,
    pub visible_mask: Mask,
    /// Tight box of the amodal mask, exclusive upper bounds.
    pub amodal_box: (usize, usize, usize, usize),
    pub category_id: u32,
}

impl SceneInstance {
    pub fn occluded(&self) -> bool {
        self.amodal_mask != self.visible_mask
    }
}

/// A rendered scene with instances ordered by depth rank (backmost first).
#[derive(Debug, Clone)]
pub struct ShapeScene {
    /// H x W x 3 image.
    pub image: Array3<u8>,
    pub instances: Vec<SceneInstance>,
    /// Union over instances of (amodal minus visible).
    pub occlusion_map: Mask,
    pub background_color: [u8; 3],
    pub seed: u64,
}

impl ShapeScene {
    pub fn height(&self) -> usize {
        self.image.dim().0
    }

    pub fn width(&self) -> usize {
        self.image.dim().1
    }

    /// Check every scene invariant, returning the first violation.
    pub fn check_invariants(&self) -> Result<()> {
        let (h, w, _) = self.image.dim();
        let mut union_occ = Mask::zeros((h, w));
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.spec.depth_rank != i {
                return Err(Error::InvalidScene(format!(
                    "instance {i} has depth_rank {}",
                    inst.spec.depth_rank
                )));
            }
            for ((y, x), &v) in inst.visible_mask.indexed_iter() {
                if v != 0 && inst.amodal_mask[(y, x)] == 0 {
                    return Err(Error::InvalidScene(format!(
                        "instance {i}: visible not subset of amodal at ({x},{y})"
                    )));
                }
            }
            let tight = mask_tight_box(&inst.amodal_mask)
                .ok_or_else(|| Error::InvalidScene(format!("instance {i}: empty amodal mask")))?;
            if tight != inst.amodal_box {
                return Err(Error::InvalidScene(format!(
                    "instance {i}: amodal_box {:?} != tight {:?}",
                    inst.amodal_box, tight
                )));
            }
            for ((y, x), &v) in inst.amodal_mask.indexed_iter() {
                if v != 0 && inst.visible_mask[(y, x)] == 0 {
                    union_occ[(y, x)] = 1;
                }
            }
        }
        // Visible masks pairwise disjoint.
        let mut seen = Mask::zeros((h, w));
        for (i, inst) in self.instances.iter().enumerate() {
            for ((y, x), &v) in inst.visible_mask.indexed_iter() {
                if v != 0 {
                    if seen[(y, x)] != 0 {
                        return Err(Error::InvalidScene(format!(
                            "instance {i}: visible overlap at ({x},{y})"
                        )));
                    }
                    seen[(y, x)] = 1;
                }
            }
        }
        if union_occ != self.occlusion_map {
            return Err(Error::InvalidScene(
                "occlusion_map != union(amodal \\ visible)".into(),
            ));
        }
        if self.instances.is_empty() || self.instances.len() > 9 {
            return Err(Error::InvalidScene(format!(
                "instance count {} outside [1, 9]",
                self.instances.len()
            )));
        }
        Ok(())
    }
}

/// Compose specs back-to-front over a background color. Specs may arrive in
/// any order; the scene stores them sorted by depth rank.
pub fn compose_scene(
    specs: &[ShapeSpec],
    background: [u8; 3],
    canvas: (usize, usize),
    seed: u64,
) -> Result<ShapeScene> {
    if specs.is_empty() {
        return Err(Error::InvalidScene("no shapes".into()));
    }
    let mut order: Vec<usize> = (0..specs.len()).collect();
    order.sort_by_key(|&i| specs[i].depth_rank);
    for (pos, &i) in order.iter().enumerate() {
        if specs[i].depth_rank != pos {
            return Err(Error::InvalidScene(format!(
                "depth_rank values must be unique and contiguous from 0, got {:?}",
                specs.iter().map(|s| s.depth_rank).collect::<Vec<_>>()
            )));
        }
    }

    let (h, w) = canvas;
    let amodal: Vec<Mask> = order
        .iter()
        .map(|&i| rasterize_shape(&specs[i], canvas))
        .collect::<Result<_>>()?;

    let mut image = Array3::<u8>::zeros((h, w, 3));
    for ((y, x, c), v) in image.indexed_iter_mut() {
        let _ = (y, x);
        *v = background[c];
    }

    let mut instances = Vec::with_capacity(specs.len());
    for (pos, &i) in order.iter().enumerate() {
        let spec = specs[i];
        let mask = &amodal[pos];
        if mask_area(mask) == 0 {
            return Err(Error::InvalidScene(format!(
                "instance with depth_rank {} is entirely off-canvas",
                spec.depth_rank
            )));
        }
        // Paint back-to-front.
        for ((y, x), &v) in mask.indexed_iter() {
            if v != 0 {
                for c in 0..3 {
                    image[(y, x, c)] = spec.color[c];
                }
            }
        }
        // Visible mask: amodal minus union of strictly nearer amodals.
        let mut visible = mask.clone();
        for front in &amodal[pos + 1..] {
            for ((y, x), &v) in front.indexed_iter() {
                if v != 0 {
                    visible[(y, x)] = 0;
                }
            }
        }
        let amodal_box = mask_tight_box(mask).expect("non-empty checked above");
        instances.push(SceneInstance {
            spec,
            amodal_mask: mask.clone(),
            visible_mask: visible,
            amodal_box,
            category_id: spec.kind().category_id(),
        });
    }

    let mut occlusion_map = Mask::zeros((h, w));
    for inst in &instances {
        for ((y, x), &v) in inst.amodal_mask.indexed_iter() {
            if v != 0 && inst.visible_mask[(y, x)] == 0 {
                occlusion_map[(y, x)] = 1;
            }
        }
    }

    Ok(ShapeScene {
        image,
        instances,
        occlusion_map,
        background_color: background,
        seed,
    })
}

/// Standard category table used by every generated container.
pub fn category_table() -> Vec<CategoryRecord> {
    ShapeKind::all()
        .iter()
        .map(|k| CategoryRecord {
            id: k.category_id(),
            name: k.name().to_string(),
        })
        .collect()
}

/// Convert a scene to container records, assigning it `image_id` and the
/// given relative path.
pub fn scene_to_annotations(
    scene: &ShapeScene,
    image_id: u64,
    rel_path: &str,
) -> (ImageRecord, Vec<AmodalAnnotation>) {
    let record = ImageRecord {
        id: image_id,
        path: rel_path.to_string(),
        height: scene.height(),
        width: scene.width(),
        occlusion_rle: Some(rle_encode(&scene.occlusion_map)),
    };
    let anns = scene
        .instances
        .iter()
        .map(|inst| {
            let (x0, y0, x1, y1) = inst.amodal_box;
            AmodalAnnotation {
                image_id,
                category_id: inst.category_id,
                amodal_rle: rle_encode(&inst.amodal_mask),
                visible_rle: rle_encode(&inst.visible_mask),
                amodal_box: [x0 as f64, y0 as f64, x1 as f64, y1 as f64],
                occluded: inst.occluded(),
                area_amodal: mask_area(&inst.amodal_mask) as u64,
                score: None,
            }
        })
        .collect();
    (record, anns)
}

/// Assemble a container for a list of (scene, id, path) triples.
pub fn scenes_to_container(scenes: &[(&ShapeScene, u64, String)]) -> AnnotationContainer {
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for (scene, id, path) in scenes {
        let (rec, anns) = scene_to_annotations(scene, *id, path);
        images.push(rec);
        annotations.extend(anns);
    }
    AnnotationContainer {
        images,
        annotations,
        categories: category_table(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthshapes::spec::ShapeGeometry;

    fn rect(cx: f64, cy: f64, hw: f64, hh: f64, depth: usize) -> ShapeSpec {
        ShapeSpec {
            geometry: ShapeGeometry::Rectangle {
                half_w: hw,
                half_h: hh,
            },
            center: (cx, cy),
            orientation: 0.0,
            color: [10 + 40 * depth as u8, 80, 190],
            depth_rank: depth,
        }
    }

    #[test]
    fn disjoint_shapes_have_no_occlusion() {
        let specs = [rect(8.0, 8.0, 4.0, 4.0, 0), rect(24.0, 24.0, 4.0, 4.0, 1)];
        let scene = compose_scene(&specs, [0, 0, 0], (32, 32), 0).unwrap();
        assert_eq!(mask_area(&scene.occlusion_map), 0);
        for inst in &scene.instances {
            assert_eq!(inst.amodal_mask, inst.visible_mask);
            assert!(!inst.occluded());
        }
        scene.check_invariants().unwrap();
    }

    #[test]
    fn total_occlusion_empties_visible() {
        let specs = [rect(16.0, 16.0, 5.0, 5.0, 0), rect(16.0, 16.0, 5.0, 5.0, 1)];
        let scene = compose_scene(&specs, [0, 0, 0], (32, 32), 0).unwrap();
        let back = &scene.instances[0];
        assert_eq!(mask_area(&back.visible_mask), 0);
        assert_eq!(scene.occlusion_map, back.amodal_mask);
        scene.check_invariants().unwrap();
    }

    #[test]
    fn staggered_rectangles_match_topmost_oracle() {
        let specs = [
            rect(12.0, 12.0, 8.0, 6.0, 0),
            rect(18.0, 16.0, 8.0, 6.0, 1),
            rect(24.0, 20.0, 8.0, 6.0, 2),
        ];
        let scene = compose_scene(&specs, [0, 0, 0], (40, 40), 0).unwrap();
        // Per-pixel z-order oracle: the visible owner is the topmost spec
        // containing the pixel center.
        for y in 0..40 {
            for x in 0..40 {
                let p = (x as f64 + 0.5, y as f64 + 0.5);
                let owner = (0..3).rev().find(|&i| specs[i].contains(p.0, p.1));
                for (i, inst) in scene.instances.iter().enumerate() {
                    let expect = owner == Some(i);
                    assert_eq!(
                        inst.visible_mask[(y, x)] != 0,
                        expect,
                        "pixel ({x},{y}) instance {i}"
                    );
                }
                // Painted color matches the owner.
                if let Some(i) = owner {
                    assert_eq!(scene.image[(y, x, 0)], specs[i].color[0]);
                }
            }
        }
        scene.check_invariants().unwrap();
    }

    #[test]
    fn duplicate_depth_rank_is_invalid() {
        let specs = [rect(8.0, 8.0, 4.0, 4.0, 0), rect(24.0, 24.0, 4.0, 4.0, 0)];
        assert!(matches!(
            compose_scene(&specs, [0, 0, 0], (32, 32), 0),
            Err(Error::InvalidScene(_))
        ));
    }

    #[test]
    fn off_canvas_shape_is_invalid() {
        let specs = [rect(-50.0, -50.0, 4.0, 4.0, 0)];
        assert!(compose_scene(&specs, [0, 0, 0], (32, 32), 0).is_err());
    }
}
