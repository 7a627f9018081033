//! Segmentation interchange format.
//!
//! One JSON document per image or frame pairs the image dimensions with the
//! detector's instances. Masks travel as uncompressed COCO run-length
//! encodings: pixels are enumerated column-major and runs alternate 0, 1, 0, …
//! starting with a (possibly empty) zero-run.
//!
//! ```json
//! {"image": {"width": 4, "height": 2, "source": "a.png"},
//!  "instances": [{"id": 0, "class": "person", "score": 0.98,
//!                 "bbox": [0, 1, 2, 3],
//!                 "mask": {"size": [2, 4], "counts": [2, 4, 2]}}]}
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Axis-aligned box with half-open extents `[y1, y2) × [x1, x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BBox {
    pub y1: u32,
    pub x1: u32,
    pub y2: u32,
    pub x2: u32,
}

impl BBox {
    pub const fn new(y1: u32, x1: u32, y2: u32, x2: u32) -> Self {
        Self { y1, x1, y2, x2 }
    }

    pub const fn height(&self) -> u32 {
        self.y2.saturating_sub(self.y1)
    }

    pub const fn width(&self) -> u32 {
        self.x2.saturating_sub(self.x1)
    }

    pub const fn is_ordered(&self) -> bool {
        self.y2 >= self.y1 && self.x2 >= self.x1
    }

    pub const fn contains(&self, row: u32, col: u32) -> bool {
        row >= self.y1 && row < self.y2 && col >= self.x1 && col < self.x2
    }

    /// `[y1, x1, y2, x2]`, the order used on the wire.
    pub const fn to_array(self) -> [u32; 4] {
        [self.y1, self.x1, self.y2, self.x2]
    }
}

impl From<[u32; 4]> for BBox {
    fn from([y1, x1, y2, x2]: [u32; 4]) -> Self {
        Self { y1, x1, y2, x2 }
    }
}

/// Dense binary mask stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    height: u32,
    width: u32,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(height: u32, width: u32) -> Self {
        Self::filled(height, width, false)
    }

    pub fn filled(height: u32, width: u32, value: bool) -> Self {
        Self {
            height,
            width,
            bits: vec![value; height as usize * width as usize],
        }
    }

    pub fn from_fn(height: u32, width: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height as usize * width as usize);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(row, col));
            }
        }
        Self { height, width, bits }
    }

    /// Builds a mask from row-major bits; `None` if the length is not `height × width`.
    pub fn from_row_major(height: u32, width: u32, bits: Vec<bool>) -> Option<Self> {
        (bits.len() == height as usize * width as usize).then_some(Self { height, width, bits })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, row: u32, col: u32) -> bool {
        self.bits[self.index(row, col)]
    }

    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        let idx = self.index(row, col);
        self.bits[idx] = value;
    }

    /// Row-major bits.
    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    fn index(&self, row: u32, col: u32) -> usize {
        assert!(row < self.height && col < self.width, "mask index ({row}, {col}) out of bounds");
        row as usize * self.width as usize + col as usize
    }
}

impl fmt::Debug for BitMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMask {}x{} [", self.height, self.width)?;
        for row in self.bits.chunks(self.width.max(1) as usize) {
            let line: String = row.iter().map(|&b| if b { '#' } else { '.' }).collect();
            writeln!(f, "  {line}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RleError {
    #[error("run lengths sum to {actual}, expected {expected} (height × width)")]
    SumMismatch { expected: u64, actual: u64 },
    #[error("zero-length run at position {index}; only the first run may be empty")]
    NonCanonical { index: usize },
    #[error("counts must contain at least one run")]
    Empty,
}

/// Column-major run-length encoding in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RleMask {
    height: u32,
    width: u32,
    counts: Vec<u32>,
}

impl RleMask {
    /// Validates the run lengths: they must cover exactly `height × width`
    /// pixels and only the leading run may be zero.
    pub fn new(height: u32, width: u32, counts: Vec<u32>) -> Result<Self, RleError> {
        check_sum(height, width, &counts)?;
        if let Some(index) = counts.iter().skip(1).position(|&c| c == 0) {
            return Err(RleError::NonCanonical { index: index + 1 });
        }
        Ok(Self { height, width, counts })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// `(height, width)` as written in the `size` field.
    pub fn size(&self) -> (u32, u32) {
        (self.height, self.width)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of set pixels (sum of the odd runs).
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| u64::from(c)).sum()
    }

    /// Calls `f(row, col)` for every set pixel, in column-major order.
    pub(crate) fn for_each_set_pixel(&self, mut f: impl FnMut(u32, u32)) {
        let h = u64::from(self.height);
        let mut pos = 0u64;
        for (k, &c) in self.counts.iter().enumerate() {
            let c = u64::from(c);
            if k % 2 == 1 {
                for p in pos..pos + c {
                    f((p % h) as u32, (p / h) as u32);
                }
            }
            pos += c;
        }
    }
}

fn check_sum(height: u32, width: u32, counts: &[u32]) -> Result<(), RleError> {
    if counts.is_empty() {
        return Err(RleError::Empty);
    }
    let expected = u64::from(height) * u64::from(width);
    let actual: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    if actual != expected {
        return Err(RleError::SumMismatch { expected, actual });
    }
    Ok(())
}

/// Expands a canonical RLE into a dense mask.
pub fn decode_rle(rle: &RleMask) -> BitMask {
    decode_runs(rle.height, rle.width, &rle.counts)
}

/// Decodes raw COCO counts that need not be canonical; only the pixel sum is checked.
pub fn decode_counts(height: u32, width: u32, counts: &[u32]) -> Result<BitMask, RleError> {
    check_sum(height, width, counts)?;
    Ok(decode_runs(height, width, counts))
}

fn decode_runs(height: u32, width: u32, counts: &[u32]) -> BitMask {
    let mut mask = BitMask::new(height, width);
    let (h, w) = (height as usize, width as usize);
    let mut pos = 0usize;
    for (k, &c) in counts.iter().enumerate() {
        let c = c as usize;
        if k % 2 == 1 {
            // Walk the run column segment by column segment.
            let mut p = pos;
            let end = pos + c;
            while p < end {
                let col = p / h;
                let row = p % h;
                let seg = (h - row).min(end - p);
                for r in row..row + seg {
                    mask.bits[r * w + col] = true;
                }
                p += seg;
            }
        }
        pos += c;
    }
    mask
}

/// Canonical column-major RLE of `mask`.
pub fn encode_rle(mask: &BitMask) -> RleMask {
    let (h, w) = (mask.height as usize, mask.width as usize);
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for col in 0..w {
        for row in 0..h {
            let bit = mask.bits[row * w + col];
            if bit != current {
                counts.push(run);
                run = 0;
                current = bit;
            }
            run += 1;
        }
    }
    counts.push(run);
    RleMask {
        height: mask.height,
        width: mask.width,
        counts,
    }
}

/// One detected object.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceAnnotation {
    pub instance_id: u64,
    pub class_label: String,
    pub score: f64,
    pub bbox: BBox,
    pub mask: RleMask,
}

/// Detector output for a single image or frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationDocument {
    pub image_width: u32,
    pub image_height: u32,
    pub source_ref: String,
    /// Detector emission order; ranking ties resolve by this order.
    pub instances: Vec<InstanceAnnotation>,
}

impl AnnotationDocument {
    pub fn new(image_width: u32, image_height: u32, source_ref: impl Into<String>) -> Self {
        Self {
            image_width,
            image_height,
            source_ref: source_ref.into(),
            instances: Vec::new(),
        }
    }

    /// Checks every document invariant. Returns the non-fatal findings.
    pub fn validate(&self) -> Result<Vec<AnnotationWarning>, AnnotationError> {
        let mut warnings = Vec::new();
        let mut seen = std::collections::HashSet::with_capacity(self.instances.len());
        for (i, inst) in self.instances.iter().enumerate() {
            let at = |field: &str| format!("instances[{i}].{field}");
            if !seen.insert(inst.instance_id) {
                return Err(AnnotationError::invariant(
                    at("id"),
                    format!("duplicate instance id {}", inst.instance_id),
                ));
            }
            if !(0.0..=1.0).contains(&inst.score) {
                return Err(AnnotationError::invariant(
                    at("score"),
                    format!("score {} outside [0, 1]", inst.score),
                ));
            }
            let b = inst.bbox;
            if !b.is_ordered() {
                return Err(AnnotationError::invariant(
                    at("bbox"),
                    format!("box {:?} requires y2 >= y1 and x2 >= x1", b.to_array()),
                ));
            }
            if b.y2 > self.image_height || b.x2 > self.image_width {
                return Err(AnnotationError::invariant(
                    at("bbox"),
                    format!(
                        "box {:?} exceeds image {}x{}",
                        b.to_array(),
                        self.image_width,
                        self.image_height
                    ),
                ));
            }
            if inst.mask.size() != (self.image_height, self.image_width) {
                return Err(AnnotationError::invariant(
                    at("mask.size"),
                    format!(
                        "mask size [{}, {}] differs from image [{}, {}]",
                        inst.mask.height, inst.mask.width, self.image_height, self.image_width
                    ),
                ));
            }
            let mut outside = 0u64;
            inst.mask.for_each_set_pixel(|row, col| {
                if !b.contains(row, col) {
                    outside += 1;
                }
            });
            if outside > 0 {
                warnings.push(AnnotationWarning::MaskOutsideBBox {
                    instance_id: inst.instance_id,
                    outside_pixels: outside,
                });
            }
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnotationWarning {
    MaskOutsideBBox { instance_id: u64, outside_pixels: u64 },
}

impl fmt::Display for AnnotationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MaskOutsideBBox {
                instance_id,
                outside_pixels,
            } => write!(
                f,
                "instance {instance_id}: {outside_pixels} mask pixel(s) fall outside its bounding box"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violated at {path}: {message}")]
    Invariant { path: String, message: String },
}

impl AnnotationError {
    fn invariant(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invariant {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// A validated document together with its non-fatal findings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDocument {
    pub document: AnnotationDocument,
    pub warnings: Vec<AnnotationWarning>,
}

#[derive(Serialize, Deserialize)]
struct WireDocument {
    image: WireImage,
    #[serde(default)]
    instances: Vec<WireInstance>,
}

#[derive(Serialize, Deserialize)]
struct WireImage {
    width: u32,
    height: u32,
    #[serde(default)]
    source: String,
}

#[derive(Serialize, Deserialize)]
struct WireInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    class: String,
    score: f64,
    bbox: [u32; 4],
    mask: WireMask,
}

#[derive(Serialize, Deserialize)]
struct WireMask {
    size: [u32; 2],
    counts: Vec<u32>,
}

pub fn parse_annotation_document(bytes: &[u8]) -> Result<ParsedDocument, AnnotationError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let wire: WireDocument = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        AnnotationError::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    de.end().map_err(|e| AnnotationError::Schema {
        path: ".".into(),
        message: e.to_string(),
    })?;

    let mut instances = Vec::with_capacity(wire.instances.len());
    for (i, w) in wire.instances.into_iter().enumerate() {
        let [h, wd] = w.mask.size;
        let mask = RleMask::new(h, wd, w.mask.counts).map_err(|e| {
            AnnotationError::invariant(format!("instances[{i}].mask.counts"), e.to_string())
        })?;
        instances.push(InstanceAnnotation {
            instance_id: w.id.unwrap_or(i as u64),
            class_label: w.class,
            score: w.score,
            bbox: BBox::from(w.bbox),
            mask,
        });
    }
    let document = AnnotationDocument {
        image_width: wire.image.width,
        image_height: wire.image.height,
        source_ref: wire.image.source,
        instances,
    };
    let warnings = document.validate()?;
    Ok(ParsedDocument { document, warnings })
}

pub fn serialize_annotation_document(doc: &AnnotationDocument) -> Vec<u8> {
    let wire = WireDocument {
        image: WireImage {
            width: doc.image_width,
            height: doc.image_height,
            source: doc.source_ref.clone(),
        },
        instances: doc
            .instances
            .iter()
            .map(|inst| WireInstance {
                id: Some(inst.instance_id),
                class: inst.class_label.clone(),
                score: inst.score,
                bbox: inst.bbox.to_array(),
                mask: WireMask {
                    size: [inst.mask.height, inst.mask.width],
                    counts: inst.mask.counts.clone(),
                },
            })
            .collect(),
    };
    serde_json::to_vec(&wire).expect("annotation documents always serialize")
}
