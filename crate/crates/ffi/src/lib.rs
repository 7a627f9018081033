//! C ABI over the exmerge engine.
//!
//! Every entry point returns an [`ExmStatus`]; on failure a message is kept in
//! thread-local storage and can be copied out with [`exm_last_error_message`].
//! Objects cross the boundary as opaque handles that must be released with the
//! matching `*_free` function. Panics never unwind into the caller; they are
//! reported as `EXM_STATUS_PANIC`.
//!
//! The header `include/exmerge.h` is regenerated by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use exmerge::annotations::{decode_counts, encode_rle, AnnotationError, AnnotationDocument, BitMask};
use exmerge::compositor::{composite, CompositeJob, SceneLayer};
use exmerge::pipeline::build_layer;
use exmerge::raster::{self, PixelBuffer, RasterError};
use exmerge::selection::{PersonCount, SelectionSpec, DEFAULT_CLASS};
use exmerge::Error;

/// Result code of every `exm_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SchemaError = 3,
    InvariantError = 4,
    IoError = 5,
    UnsupportedFormat = 6,
    DecodeError = 7,
    DimensionMismatch = 8,
    PipelineError = 9,
    Panic = 10,
}

/// Parsed annotation document.
pub struct ExmDocument {
    document: AnnotationDocument,
    warnings: usize,
}

/// RGB8 raster.
pub struct ExmImage {
    buffer: PixelBuffer,
}

/// Background plus the layers added so far, bottom first.
pub struct ExmComposite {
    background: PixelBuffer,
    layers: Vec<SceneLayer>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let message = CString::new(bytes).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

struct Failure(ExmStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Self(ExmStatus::NullPointer, format!("{what} is null"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self(ExmStatus::InvalidArgument, message.into())
    }
}

fn raster_status(e: &RasterError) -> ExmStatus {
    match e {
        RasterError::Io { .. } => ExmStatus::IoError,
        RasterError::UnsupportedFormat { .. } => ExmStatus::UnsupportedFormat,
        RasterError::Decode { .. } => ExmStatus::DecodeError,
        RasterError::Encode(_) => ExmStatus::IoError,
        RasterError::ZeroDimension { .. } | RasterError::BufferLength { .. } => ExmStatus::InvalidArgument,
    }
}

fn annotation_status(e: &AnnotationError) -> ExmStatus {
    match e {
        AnnotationError::Schema { .. } => ExmStatus::SchemaError,
        AnnotationError::Invariant { .. } => ExmStatus::InvariantError,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Annotations { source, .. } => annotation_status(source),
            Error::Raster(r) => raster_status(r),
            Error::Compositor(_) | Error::ImageSizeMismatch { .. } => ExmStatus::DimensionMismatch,
            Error::Io { .. } => ExmStatus::IoError,
            _ => ExmStatus::PipelineError,
        };
        Self(status, e.to_string())
    }
}

impl From<RasterError> for Failure {
    fn from(e: RasterError) -> Self {
        Self(raster_status(&e), format!("raster: {e}"))
    }
}

impl From<AnnotationError> for Failure {
    fn from(e: AnnotationError) -> Self {
        Self(annotation_status(&e), format!("annotations: {e}"))
    }
}

/// Runs `f`, recording its error (or panic) as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ExmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_last_error();
            ExmStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_owned())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_owned());
            set_last_error(format!("panic: {message}"));
            ExmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn bytes_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

fn into_raw_parts<T>(v: Vec<T>) -> (*mut T, usize) {
    let boxed = v.into_boxed_slice();
    let len = boxed.len();
    (Box::into_raw(boxed).cast::<T>(), len)
}

unsafe fn free_raw_parts<T>(p: *mut T, len: usize) {
    if !p.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(p, len)));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn exm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the length the full message needs including
/// the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn exm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = (bytes.len() - 1).min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Parses an interchange document from `len` bytes of UTF-8 JSON.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exm_document_parse(
    bytes: *const u8,
    len: usize,
    out: *mut *mut ExmDocument,
) -> ExmStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let parsed = exmerge::parse_annotation_document(bytes_arg(bytes, len, "bytes")?)?;
        *out = Box::into_raw(Box::new(ExmDocument {
            document: parsed.document,
            warnings: parsed.warnings.len(),
        }));
        Ok(())
    })
}

/// # Safety
/// `doc` must be null or a handle from [`exm_document_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn exm_document_free(doc: *mut ExmDocument) {
    if !doc.is_null() {
        drop(Box::from_raw(doc));
    }
}

/// # Safety
/// `doc` must be a live document handle or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn exm_document_instance_count(doc: *const ExmDocument) -> usize {
    doc.as_ref().map_or(0, |d| d.document.instances.len())
}

/// Number of non-fatal findings (e.g. mask pixels outside the box) from parsing.
///
/// # Safety
/// `doc` must be a live document handle or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn exm_document_warning_count(doc: *const ExmDocument) -> usize {
    doc.as_ref().map_or(0, |d| d.warnings)
}

/// Image size declared by the document.
///
/// # Safety
/// `doc` must be a live handle; `width` and `height` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exm_document_size(
    doc: *const ExmDocument,
    width: *mut u32,
    height: *mut u32,
) -> ExmStatus {
    guard(|| {
        let d = &deref(doc, "doc")?.document;
        *deref_mut(width, "width")? = d.image_width;
        *deref_mut(height, "height")? = d.image_height;
        Ok(())
    })
}

/// Writes `[y1, x1, y2, x2]` of instance `index` to `bbox_out`.
///
/// # Safety
/// `doc` must be a live handle; `bbox_out` must hold 4 writable `uint32_t`.
#[no_mangle]
pub unsafe extern "C" fn exm_document_instance_bbox(
    doc: *const ExmDocument,
    index: usize,
    bbox_out: *mut u32,
) -> ExmStatus {
    guard(|| {
        let d = &deref(doc, "doc")?.document;
        if bbox_out.is_null() {
            return Err(Failure::null("bbox_out"));
        }
        let inst = d
            .instances
            .get(index)
            .ok_or_else(|| Failure::invalid(format!("instance index {index} out of range")))?;
        let out = slice::from_raw_parts_mut(bbox_out, 4);
        out.copy_from_slice(&inst.bbox.to_array());
        Ok(())
    })
}

/// Serializes the document to JSON. Free the result with [`exm_bytes_free`].
///
/// # Safety
/// `doc` must be a live handle; `out` and `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exm_document_serialize(
    doc: *const ExmDocument,
    out: *mut *mut u8,
    out_len: *mut usize,
) -> ExmStatus {
    guard(|| {
        let d = deref(doc, "doc")?;
        let out = deref_mut(out, "out")?;
        let out_len = deref_mut(out_len, "out_len")?;
        let (p, n) = into_raw_parts(exmerge::serialize_annotation_document(&d.document));
        *out = p;
        *out_len = n;
        Ok(())
    })
}

/// # Safety
/// `bytes`/`len` must come from [`exm_document_serialize`] or be null.
#[no_mangle]
pub unsafe extern "C" fn exm_bytes_free(bytes: *mut u8, len: usize) {
    free_raw_parts(bytes, len);
}

/// Decodes column-major COCO run lengths into `bits_out`, one byte (0 or 1) per
/// pixel in row-major order.
///
/// # Safety
/// `counts` must hold `n_counts` values; `bits_out` must hold `height * width` bytes.
#[no_mangle]
pub unsafe extern "C" fn exm_rle_decode(
    height: u32,
    width: u32,
    counts: *const u32,
    n_counts: usize,
    bits_out: *mut u8,
) -> ExmStatus {
    guard(|| {
        let counts = bytes_arg(counts, n_counts, "counts")?;
        let mask = decode_counts(height, width, counts)
            .map_err(|e| Failure(ExmStatus::InvariantError, format!("annotations: {e}")))?;
        if mask.is_empty() {
            return Ok(());
        }
        if bits_out.is_null() {
            return Err(Failure::null("bits_out"));
        }
        let out = slice::from_raw_parts_mut(bits_out, mask.len());
        for (o, &b) in out.iter_mut().zip(mask.as_slice()) {
            *o = u8::from(b);
        }
        Ok(())
    })
}

/// Encodes a row-major mask (nonzero byte = set) as canonical column-major run
/// lengths. Free the result with [`exm_counts_free`].
///
/// # Safety
/// `bits` must hold `height * width` bytes; `out` and `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exm_rle_encode(
    height: u32,
    width: u32,
    bits: *const u8,
    out: *mut *mut u32,
    out_len: *mut usize,
) -> ExmStatus {
    guard(|| {
        let n = height as usize * width as usize;
        let bits = bytes_arg(bits, n, "bits")?;
        let out = deref_mut(out, "out")?;
        let out_len = deref_mut(out_len, "out_len")?;
        let mask = BitMask::from_row_major(height, width, bits.iter().map(|&b| b != 0).collect())
            .expect("length checked");
        let (p, len) = into_raw_parts(encode_rle(&mask).counts().to_vec());
        *out = p;
        *out_len = len;
        Ok(())
    })
}

/// # Safety
/// `counts`/`len` must come from [`exm_rle_encode`] or be null.
#[no_mangle]
pub unsafe extern "C" fn exm_counts_free(counts: *mut u32, len: usize) {
    free_raw_parts(counts, len);
}

/// Copies `width * height * 3` bytes of row-major RGB into a new image.
///
/// # Safety
/// `rgb` must hold `width * height * 3` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exm_image_new(
    width: u32,
    height: u32,
    rgb: *const u8,
    out: *mut *mut ExmImage,
) -> ExmStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let data = bytes_arg(rgb, width as usize * height as usize * 3, "rgb")?;
        let buffer = PixelBuffer::new(width, height, data.to_vec())?;
        *out = Box::into_raw(Box::new(ExmImage { buffer }));
        Ok(())
    })
}

/// Loads a PNG or JPEG; alpha is flattened over black.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exm_image_load(path: *const c_char, out: *mut *mut ExmImage) -> ExmStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let buffer = raster::load_image(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(ExmImage { buffer }));
        Ok(())
    })
}

/// # Safety
/// `image` must be a live handle; `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn exm_image_save_png(image: *const ExmImage, path: *const c_char) -> ExmStatus {
    guard(|| {
        let image = deref(image, "image")?;
        raster::save_image(&image.buffer, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Bilinear resize into a new image.
///
/// # Safety
/// `image` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exm_image_resize(
    image: *const ExmImage,
    width: u32,
    height: u32,
    out: *mut *mut ExmImage,
) -> ExmStatus {
    guard(|| {
        let image = deref(image, "image")?;
        let out = deref_mut(out, "out")?;
        let buffer = raster::resize_image(&image.buffer, width, height)?;
        *out = Box::into_raw(Box::new(ExmImage { buffer }));
        Ok(())
    })
}

/// # Safety
/// `image` must be a live handle or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn exm_image_width(image: *const ExmImage) -> u32 {
    image.as_ref().map_or(0, |i| i.buffer.width())
}

/// # Safety
/// `image` must be a live handle or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn exm_image_height(image: *const ExmImage) -> u32 {
    image.as_ref().map_or(0, |i| i.buffer.height())
}

/// Borrowed pointer to `width * height * 3` RGB bytes, valid until the image is freed.
///
/// # Safety
/// `image` must be a live handle or null (yields null).
#[no_mangle]
pub unsafe extern "C" fn exm_image_data(image: *const ExmImage) -> *const u8 {
    image.as_ref().map_or(ptr::null(), |i| i.buffer.as_raw().as_ptr())
}

/// # Safety
/// `image` must be null or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn exm_image_free(image: *mut ExmImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Starts a composite over a copy of `background`; its size is the canvas.
///
/// # Safety
/// `background` must be a live image handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exm_composite_new(
    background: *const ExmImage,
    out: *mut *mut ExmComposite,
) -> ExmStatus {
    guard(|| {
        let bg = deref(background, "background")?;
        let out = deref_mut(out, "out")?;
        *out = Box::into_raw(Box::new(ExmComposite {
            background: bg.buffer.clone(),
            layers: Vec::new(),
        }));
        Ok(())
    })
}

/// Adds a layer on top: the `count` largest persons of `doc` scoring at least
/// `min_score` (`count` 0 selects all), resized to the canvas.
///
/// # Safety
/// All handles must be live.
#[no_mangle]
pub unsafe extern "C" fn exm_composite_add_layer(
    job: *mut ExmComposite,
    image: *const ExmImage,
    doc: *const ExmDocument,
    count: u32,
    min_score: f64,
) -> ExmStatus {
    guard(|| {
        let job = deref_mut(job, "job")?;
        let image = deref(image, "image")?;
        let doc = deref(doc, "doc")?;
        if !(0.0..=1.0).contains(&min_score) {
            return Err(Failure::invalid(format!("min_score {min_score} outside [0, 1]")));
        }
        let spec = SelectionSpec {
            count: PersonCount::exactly(count as usize).unwrap_or(PersonCount::All),
            min_score,
            class_filter: DEFAULT_CLASS.to_owned(),
        };
        let (layer, _) = build_layer(&image.buffer, &doc.document, &spec, job.background.dimensions())?;
        job.layers.push(layer);
        Ok(())
    })
}

/// # Safety
/// `job` must be a live handle or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn exm_composite_layer_count(job: *const ExmComposite) -> usize {
    job.as_ref().map_or(0, |j| j.layers.len())
}

/// Total instances placed across all layers.
///
/// # Safety
/// `job` must be a live handle or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn exm_composite_instance_count(job: *const ExmComposite) -> usize {
    job.as_ref()
        .map_or(0, |j| j.layers.iter().map(|l| l.instances().len()).sum())
}

/// Renders the layers over the background into a new image.
///
/// # Safety
/// `job` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exm_composite_render(job: *const ExmComposite, out: *mut *mut ExmImage) -> ExmStatus {
    guard(|| {
        let job = deref(job, "job")?;
        let out = deref_mut(out, "out")?;
        let cjob = CompositeJob::new(job.background.clone(), job.layers.clone()).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(ExmImage {
            buffer: composite(&cjob),
        }));
        Ok(())
    })
}

/// # Safety
/// `job` must be null or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn exm_composite_free(job: *mut ExmComposite) {
    if !job.is_null() {
        drop(Box::from_raw(job));
    }
}
