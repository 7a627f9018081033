//! Still-image pipeline: common-size resize, selection, then compositing.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::annotations::{
    decode_rle, parse_annotation_document, AnnotationDocument, AnnotationWarning, ParsedDocument,
};
use crate::compositor::{composite, CompositeJob, PlacedInstance, SceneLayer};
use crate::error::{Error, Result};
use crate::raster::{load_image, resize_image, resize_mask, scale_bbox, PixelBuffer};
use crate::selection::{rank_persons, select_top_n, SelectionSpec, Shortfall};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WarningKind {
    Annotation(AnnotationWarning),
    Shortfall(Shortfall),
    NoPersons,
    SingleInput,
}

/// Non-fatal finding, tagged with the input it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub source: String,
    pub kind: WarningKind,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            WarningKind::Annotation(w) => write!(f, "{}: {w}", self.source),
            WarningKind::Shortfall(s) => write!(
                f,
                "{}: requested {} person(s) but only {} qualify",
                self.source, s.requested, s.available
            ),
            WarningKind::NoPersons => {
                write!(f, "{}: no qualifying persons; this layer contributes nothing", self.source)
            }
            WarningKind::SingleInput => {
                f.write_str("only one input given; merging is meant for two or more")
            }
        }
    }
}

/// One input image, its annotation document and how to select from it.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerInput {
    pub image: PathBuf,
    pub annotations: PathBuf,
    pub selection: SelectionSpec,
}

impl LayerInput {
    pub fn new(image: impl Into<PathBuf>, annotations: impl Into<PathBuf>, selection: SelectionSpec) -> Self {
        Self {
            image: image.into(),
            annotations: annotations.into(),
            selection,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StillJob {
    pub background: PathBuf,
    /// Bottom layer first.
    pub inputs: Vec<LayerInput>,
    /// `(width, height)`; defaults to the background's size.
    pub canvas: Option<(u32, u32)>,
}

#[derive(Debug, Clone)]
pub struct StillOutput {
    pub image: PixelBuffer,
    pub warnings: Vec<Warning>,
}

pub fn read_document(path: &Path) -> Result<ParsedDocument> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_annotation_document(&bytes).map_err(|source| Error::Annotations {
        path: path.to_path_buf(),
        source,
    })
}

/// Resizes `image` and its selected masks to `canvas`, ranking on the scaled boxes.
pub fn build_layer(
    image: &PixelBuffer,
    doc: &AnnotationDocument,
    spec: &SelectionSpec,
    canvas: (u32, u32),
) -> Result<(SceneLayer, Vec<WarningKind>)> {
    let declared = (doc.image_width, doc.image_height);
    if declared != image.dimensions() {
        return Err(Error::ImageSizeMismatch {
            what: doc.source_ref.clone(),
            declared,
            actual: image.dimensions(),
        });
    }
    let (cw, ch) = canvas;
    let mut scaled = doc.clone();
    if declared != canvas {
        let sx = f64::from(cw) / f64::from(doc.image_width);
        let sy = f64::from(ch) / f64::from(doc.image_height);
        for inst in &mut scaled.instances {
            let mut b = scale_bbox(inst.bbox, sx, sy);
            b.y1 = b.y1.min(ch);
            b.y2 = b.y2.min(ch);
            b.x1 = b.x1.min(cw);
            b.x2 = b.x2.min(cw);
            inst.bbox = b;
        }
    }

    let selection = select_top_n(rank_persons(&scaled, spec), spec.count);
    let mut warnings = Vec::new();
    if let Some(s) = selection.shortfall {
        warnings.push(WarningKind::Shortfall(s));
    }
    if selection.instances.is_empty() {
        warnings.push(WarningKind::NoPersons);
    }

    let mut placed = Vec::with_capacity(selection.instances.len());
    for ranked in &selection.instances {
        let mask = resize_mask(&decode_rle(&ranked.annotation.mask), cw, ch)?;
        placed.push(PlacedInstance {
            instance_id: ranked.instance_id,
            area: ranked.area,
            mask,
        });
    }
    let layer = SceneLayer::new(resize_image(image, cw, ch)?, placed)?;
    Ok((layer, warnings))
}

/// Loads one input from disk and prepares its layer.
pub fn load_layer(input: &LayerInput, canvas: (u32, u32)) -> Result<(SceneLayer, Vec<Warning>)> {
    let image = load_image(&input.image)?;
    let parsed = read_document(&input.annotations)?;
    let label = input.annotations.display().to_string();
    let declared = (parsed.document.image_width, parsed.document.image_height);
    if declared != image.dimensions() {
        return Err(Error::ImageSizeMismatch {
            what: label,
            declared,
            actual: image.dimensions(),
        });
    }
    let (layer, kinds) = build_layer(&image, &parsed.document, &input.selection, canvas)?;
    let warnings = parsed
        .warnings
        .into_iter()
        .map(WarningKind::Annotation)
        .chain(kinds)
        .map(|kind| Warning {
            source: label.clone(),
            kind,
        })
        .collect();
    Ok((layer, warnings))
}

pub fn load_background(path: &Path, canvas: Option<(u32, u32)>) -> Result<PixelBuffer> {
    let bg = load_image(path)?;
    match canvas {
        Some((w, h)) => Ok(resize_image(&bg, w, h)?),
        None => Ok(bg),
    }
}

/// Prepares the composite for a still job without rendering it.
pub fn plan_still(job: &StillJob) -> Result<(CompositeJob, Vec<Warning>)> {
    let background = load_background(&job.background, job.canvas)?;
    let canvas = background.dimensions();
    let mut layers = Vec::with_capacity(job.inputs.len());
    let mut warnings = Vec::new();
    for input in &job.inputs {
        let (layer, w) = load_layer(input, canvas)?;
        layers.push(layer);
        warnings.extend(w);
    }
    Ok((CompositeJob::new(background, layers)?, warnings))
}

pub fn run_still(job: &StillJob) -> Result<StillOutput> {
    let (composite_job, warnings) = plan_still(job)?;
    Ok(StillOutput {
        image: composite(&composite_job),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{encode_rle, BBox, BitMask, InstanceAnnotation};
    use crate::selection::PersonCount;

    fn person(id: u64, bbox: BBox, mask: &BitMask) -> InstanceAnnotation {
        InstanceAnnotation {
            instance_id: id,
            class_label: "person".into(),
            score: 0.9,
            bbox,
            mask: encode_rle(mask),
        }
    }

    #[test]
    fn layer_at_native_size_keeps_masks() {
        let image = PixelBuffer::filled(4, 2, [9, 9, 9]);
        let mask = BitMask::from_fn(2, 4, |_, c| c == 1);
        let mut doc = AnnotationDocument::new(4, 2, "mem");
        doc.instances.push(person(0, BBox::new(0, 1, 2, 2), &mask));
        let (layer, warnings) = build_layer(&image, &doc, &SelectionSpec::default(), (4, 2)).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(layer.instances().len(), 1);
        assert_eq!(layer.instances()[0].mask, mask);
        assert_eq!(layer.instances()[0].area, 2);
    }

    #[test]
    fn layer_is_resized_to_canvas() {
        let image = PixelBuffer::filled(2, 2, [1, 2, 3]);
        let mask = BitMask::from_fn(2, 2, |r, c| r == 0 && c == 0);
        let mut doc = AnnotationDocument::new(2, 2, "mem");
        doc.instances.push(person(0, BBox::new(0, 0, 1, 1), &mask));
        let (layer, _) = build_layer(&image, &doc, &SelectionSpec::default(), (4, 4)).unwrap();
        assert_eq!(layer.image().dimensions(), (4, 4));
        let m = &layer.instances()[0];
        assert_eq!(m.area, 4);
        assert_eq!(m.mask, BitMask::from_fn(4, 4, |r, c| r < 2 && c < 2));
    }

    #[test]
    fn empty_selection_warns() {
        let image = PixelBuffer::filled(2, 2, [0; 3]);
        let doc = AnnotationDocument::new(2, 2, "mem");
        let spec = SelectionSpec::with_count(PersonCount::exactly(2).unwrap());
        let (layer, warnings) = build_layer(&image, &doc, &spec, (2, 2)).unwrap();
        assert!(layer.instances().is_empty());
        assert_eq!(
            warnings,
            vec![
                WarningKind::Shortfall(Shortfall { requested: 2, available: 0 }),
                WarningKind::NoPersons
            ]
        );
    }

    #[test]
    fn document_must_describe_the_image() {
        let image = PixelBuffer::filled(3, 2, [0; 3]);
        let doc = AnnotationDocument::new(2, 2, "frame.ann.json");
        let err = build_layer(&image, &doc, &SelectionSpec::default(), (3, 2)).unwrap_err();
        assert!(matches!(err, Error::ImageSizeMismatch { .. }));
        assert!(err.to_string().starts_with("pipeline: frame.ann.json"));
    }
}
