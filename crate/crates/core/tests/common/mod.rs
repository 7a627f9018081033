//! Synthetic scenes: flat-colored "persons" with hand-written elliptical masks.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use exmerge::annotations::{encode_rle, serialize_annotation_document};
use exmerge::raster::save_image;
use exmerge::{AnnotationDocument, BBox, BitMask, InstanceAnnotation, PixelBuffer};

#[derive(Debug, Clone)]
pub struct Figure {
    pub id: u64,
    pub class: &'static str,
    pub score: f64,
    pub bbox: BBox,
    pub color: [u8; 3],
}

impl Figure {
    pub fn person(id: u64, bbox: BBox, color: [u8; 3]) -> Self {
        Self {
            id,
            class: "person",
            score: 0.95,
            bbox,
            color,
        }
    }

    pub fn with_class(mut self, class: &'static str) -> Self {
        self.class = class;
        self
    }

    /// Ellipse inscribed in the box.
    pub fn mask(&self, width: u32, height: u32) -> BitMask {
        let b = self.bbox;
        let cy = f64::from(b.y1 + b.y2) / 2.0;
        let cx = f64::from(b.x1 + b.x2) / 2.0;
        let ry = f64::from(b.height()) / 2.0;
        let rx = f64::from(b.width()) / 2.0;
        BitMask::from_fn(height, width, |r, c| {
            if !b.contains(r, c) {
                return false;
            }
            let dy = (f64::from(r) + 0.5 - cy) / ry;
            let dx = (f64::from(c) + 0.5 - cx) / rx;
            dx * dx + dy * dy <= 1.0
        })
    }
}

/// Gradient "beach": sky on top, sand below.
pub fn beach(width: u32, height: u32) -> PixelBuffer {
    PixelBuffer::from_fn(width, height, |x, y| {
        if y < height / 2 {
            [90, 160, (200 + x % 50) as u8]
        } else {
            [(220 - y % 30) as u8, 200, 140]
        }
    })
}

/// Image and annotation document for one input.
pub fn scene(width: u32, height: u32, backdrop: [u8; 3], figures: &[Figure]) -> (PixelBuffer, AnnotationDocument) {
    let mut image = PixelBuffer::from_fn(width, height, |x, y| {
        [backdrop[0], backdrop[1].wrapping_add((x % 3) as u8), backdrop[2].wrapping_add((y % 3) as u8)]
    });
    let mut doc = AnnotationDocument::new(width, height, "synthetic");
    for f in figures {
        let mask = f.mask(width, height);
        for r in 0..height {
            for c in 0..width {
                if mask.get(r, c) {
                    image.put_pixel(c, r, f.color);
                }
            }
        }
        doc.instances.push(InstanceAnnotation {
            instance_id: f.id,
            class_label: f.class.into(),
            score: f.score,
            bbox: f.bbox,
            mask: encode_rle(&mask),
        });
    }
    (image, doc)
}

pub fn write_doc(path: &Path, doc: &AnnotationDocument) {
    fs::write(path, serialize_annotation_document(doc)).unwrap();
}

/// Writes `<stem>.png` and `<stem>.ann.json` under `dir`.
pub fn write_scene(dir: &Path, stem: &str, image: &PixelBuffer, doc: &AnnotationDocument) -> (PathBuf, PathBuf) {
    let png = dir.join(format!("{stem}.png"));
    let ann = dir.join(format!("{stem}.ann.json"));
    save_image(image, &png).unwrap();
    let mut doc = doc.clone();
    doc.source_ref = png.display().to_string();
    write_doc(&ann, &doc);
    (png, ann)
}

/// Frame directory of `frames` scenes; `figures_at(t)` gives frame t's figures.
pub fn write_sequence(
    dir: &Path,
    width: u32,
    height: u32,
    frames: usize,
    backdrop: [u8; 3],
    figures_at: impl Fn(usize) -> Vec<Figure>,
) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    for t in 0..frames {
        let (image, doc) = scene(width, height, backdrop, &figures_at(t));
        write_scene(dir, &format!("frame_{:06}", t + 1), &image, &doc);
    }
    dir.to_path_buf()
}

pub fn count_color(img: &PixelBuffer, rgb: [u8; 3]) -> usize {
    img.as_raw().chunks_exact(3).filter(|p| *p == rgb).count()
}
