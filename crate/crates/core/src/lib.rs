//! Person extraction and layered merging.
//!
//! Each input image comes with an annotation document listing the detector's
//! instances. Persons are ranked by bounding-box area, the top `n` per input are
//! kept, and their masked pixels are pasted onto a new background one input at
//! a time, so the last input lands on top. Frame sequences run the same
//! pipeline per frame until the longest sequence ends.
//!
//! ```no_run
//! use exmerge::pipeline::{run_still, LayerInput, StillJob};
//! use exmerge::selection::{PersonCount, SelectionSpec};
//!
//! let job = StillJob {
//!     background: "beach.png".into(),
//!     inputs: vec![
//!         LayerInput::new("a.png", "a.ann.json", SelectionSpec::with_count(PersonCount::exactly(1).unwrap())),
//!         LayerInput::new("b.png", "b.ann.json", SelectionSpec::default()),
//!     ],
//!     canvas: None,
//! };
//! let output = run_still(&job)?;
//! exmerge::raster::save_image(&output.image, "merged.png")?;
//! # Ok::<(), exmerge::Error>(())
//! ```

pub mod annotations;
pub mod cli;
pub mod compositor;
mod error;
pub mod pipeline;
pub mod raster;
pub mod selection;
pub mod video;

pub use annotations::{
    decode_rle, encode_rle, parse_annotation_document, serialize_annotation_document,
    AnnotationDocument, AnnotationError, BBox, BitMask, InstanceAnnotation, RleMask,
};
pub use compositor::{apply_instance, composite, CompositeJob, PlacedInstance, SceneLayer};
pub use error::{Error, Result};
pub use pipeline::{Warning, WarningKind};
pub use raster::PixelBuffer;
pub use selection::{bbox_area, rank_persons, select_top_n, PersonCount, SelectionSpec};
