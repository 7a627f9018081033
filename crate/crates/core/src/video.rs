//! Frame-sequence orchestration.
//!
//! A sequence is a directory of `frame_NNNNNN.png` files, each paired with a
//! sibling `frame_NNNNNN.ann.json`. Every output frame runs the still pipeline
//! on the sources' frames at that index; output continues until the longest
//! finite source is exhausted.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::compositor::{composite, CompositeJob};
use crate::error::{Error, Result};
use crate::pipeline::{load_background, load_layer, LayerInput, Warning};
use crate::raster::{encode_png, image_dimensions};
use crate::selection::SelectionSpec;

#[derive(Debug, Error)]
pub enum VideoError {
    #[error("no input has a finite number of frames")]
    NoFiniteSource,
    #[error("frame index {index} is out of range for an output of {length} frames")]
    IndexOutOfRange { index: usize, length: usize },
    #[error("{}: no frame_NNNNNN.png files found", dir.display())]
    NoFrames { dir: PathBuf },
    #[error("background sequence has no frames")]
    EmptyBackground,
    #[error("{}: missing annotation document {}", frame.display(), expected.display())]
    MissingAnnotations { frame: PathBuf, expected: PathBuf },
}

/// What a source shows once its frames run out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ExhaustedPolicy {
    /// The source stops contributing.
    #[default]
    Drop,
    /// The source keeps showing its final frame.
    HoldLast,
}

impl fmt::Display for ExhaustedPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Drop => "drop",
            Self::HoldLast => "hold-last",
        })
    }
}

impl FromStr for ExhaustedPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "drop" => Ok(Self::Drop),
            "hold-last" => Ok(Self::HoldLast),
            _ => Err(format!("unknown exhausted policy `{s}` (expected `drop` or `hold-last`)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRef {
    pub image: PathBuf,
    pub annotations: Option<PathBuf>,
}

impl FrameRef {
    pub fn new(image: impl Into<PathBuf>, annotations: Option<PathBuf>) -> Self {
        Self {
            image: image.into(),
            annotations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameSource {
    /// Ordered frames of a directory; never empty.
    Sequence(Vec<FrameRef>),
    /// One image shown on every frame.
    Repeated(FrameRef),
}

impl FrameSource {
    /// Frame count, `None` for a repeated still.
    pub fn len(&self) -> Option<usize> {
        match self {
            Self::Sequence(frames) => Some(frames.len()),
            Self::Repeated(_) => None,
        }
    }

    /// Frame shown at output index `t`, with its index within the source.
    pub fn frame_at(&self, t: usize, policy: ExhaustedPolicy) -> Option<(usize, &FrameRef)> {
        match self {
            Self::Repeated(f) => Some((0, f)),
            Self::Sequence(frames) => match frames.get(t) {
                Some(f) => Some((t, f)),
                None if policy == ExhaustedPolicy::HoldLast => {
                    frames.last().map(|f| (frames.len() - 1, f))
                }
                None => None,
            },
        }
    }

    /// Scans `dir` for `frame_<digits>.png`, ordered by frame number.
    /// With `require_annotations`, every frame needs its `.ann.json` sibling.
    pub fn scan_directory(dir: &Path, require_annotations: bool) -> Result<Self> {
        let io_err = |source| Error::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut numbered = Vec::new();
        for entry in fs::read_dir(dir).map_err(io_err)? {
            let entry = entry.map_err(io_err)?;
            let name = entry.file_name();
            let Some(number) = name.to_str().and_then(frame_number) else {
                continue;
            };
            numbered.push((number, entry.path()));
        }
        if numbered.is_empty() {
            return Err(VideoError::NoFrames { dir: dir.to_path_buf() }.into());
        }
        numbered.sort();

        let mut frames = Vec::with_capacity(numbered.len());
        for (_, image) in numbered {
            let ann = annotation_path_for(&image);
            let annotations = if ann.is_file() {
                Some(ann)
            } else if require_annotations {
                return Err(VideoError::MissingAnnotations {
                    frame: image,
                    expected: ann,
                }
                .into());
            } else {
                None
            };
            frames.push(FrameRef { image, annotations });
        }
        Ok(Self::Sequence(frames))
    }
}

fn frame_number(name: &str) -> Option<u64> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".png")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// `frame_000001.png` → `frame_000001.ann.json`; other names get `.ann.json`
/// in place of their extension.
pub fn annotation_path_for(image: &Path) -> PathBuf {
    image.with_extension("ann.json")
}

/// Output file name for output frame `t`.
pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:06}.png")
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoSource {
    pub frames: FrameSource,
    pub selection: SelectionSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoJob {
    /// A finite background holds its last frame when exhausted.
    pub background: FrameSource,
    /// Bottom layer first.
    pub sources: Vec<VideoSource>,
    pub exhausted: ExhaustedPolicy,
    pub canvas: Option<(u32, u32)>,
}

pub fn output_length(job: &VideoJob) -> Result<usize, VideoError> {
    job.sources
        .iter()
        .filter_map(|s| s.frames.len())
        .max()
        .ok_or(VideoError::NoFiniteSource)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedLayer {
    pub source: usize,
    pub frame_index: usize,
    pub frame: FrameRef,
}

/// Which frame of each input feeds output frame `index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlan {
    pub index: usize,
    pub background: FrameRef,
    pub layers: Vec<PlannedLayer>,
}

pub fn plan_frame(job: &VideoJob, t: usize) -> Result<FramePlan> {
    let length = output_length(job)?;
    if t >= length {
        return Err(VideoError::IndexOutOfRange { index: t, length }.into());
    }
    let (_, background) = job
        .background
        .frame_at(t, ExhaustedPolicy::HoldLast)
        .ok_or(VideoError::EmptyBackground)?;
    let layers = job
        .sources
        .iter()
        .enumerate()
        .filter_map(|(source, s)| {
            s.frames.frame_at(t, job.exhausted).map(|(frame_index, frame)| PlannedLayer {
                source,
                frame_index,
                frame: frame.clone(),
            })
        })
        .collect();
    Ok(FramePlan {
        index: t,
        background: background.clone(),
        layers,
    })
}

/// Canvas for every frame: the override, else the first background frame's size.
pub fn canvas_size(job: &VideoJob) -> Result<(u32, u32)> {
    if let Some(size) = job.canvas {
        return Ok(size);
    }
    let first = match &job.background {
        FrameSource::Repeated(f) => f,
        FrameSource::Sequence(frames) => frames.first().ok_or(VideoError::EmptyBackground)?,
    };
    Ok(image_dimensions(&first.image)?)
}

fn materialize(job: &VideoJob, plan: &FramePlan, canvas: (u32, u32)) -> Result<(CompositeJob, Vec<Warning>)> {
    let background = load_background(&plan.background.image, Some(canvas))?;
    let mut layers = Vec::with_capacity(plan.layers.len());
    let mut warnings = Vec::new();
    for planned in &plan.layers {
        let annotations = planned.frame.annotations.clone().ok_or_else(|| VideoError::MissingAnnotations {
            frame: planned.frame.image.clone(),
            expected: annotation_path_for(&planned.frame.image),
        })?;
        let input = LayerInput {
            image: planned.frame.image.clone(),
            annotations,
            selection: job.sources[planned.source].selection.clone(),
        };
        let (layer, w) = load_layer(&input, canvas)?;
        layers.push(layer);
        warnings.extend(w);
    }
    Ok((CompositeJob::new(background, layers)?, warnings))
}

/// Loads everything output frame `t` needs into a ready-to-render job.
pub fn frame_plan(job: &VideoJob, t: usize) -> Result<(CompositeJob, Vec<Warning>)> {
    let plan = plan_frame(job, t)?;
    materialize(job, &plan, canvas_size(job)?)
}

#[derive(Debug, Clone)]
pub struct VideoReport {
    pub frames: usize,
    pub warnings: Vec<Warning>,
}

/// Renders every output frame into `out_dir` as `frame_NNNNNN.png`.
///
/// Frames render in parallel batches and are written in index order; the
/// first failure (lowest index) aborts the run.
pub fn run_video(job: &VideoJob, out_dir: &Path) -> Result<VideoReport> {
    let length = output_length(job)?;
    let canvas = canvas_size(job)?;
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let batch = rayon::current_num_threads().max(1) * 2;
    let mut warnings = Vec::new();
    for start in (0..length).step_by(batch) {
        let end = (start + batch).min(length);
        let rendered: Vec<Result<(Vec<u8>, Vec<Warning>)>> = (start..end)
            .into_par_iter()
            .map(|t| {
                let plan = plan_frame(job, t)?;
                let (cjob, w) = materialize(job, &plan, canvas)?;
                Ok((encode_png(&composite(&cjob))?, w))
            })
            .collect();
        for (t, result) in (start..end).zip(rendered) {
            let (png, w) = result.map_err(|e| Error::Frame {
                index: t,
                source: Box::new(e),
            })?;
            let path = out_dir.join(frame_file_name(t));
            fs::write(&path, png).map_err(|source| Error::Io { path, source })?;
            warnings.extend(w);
        }
    }
    Ok(VideoReport {
        frames: length,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(name: &str, n: usize) -> FrameSource {
        FrameSource::Sequence(
            (0..n)
                .map(|i| {
                    let image = PathBuf::from(format!("{name}/frame_{i:06}.png"));
                    let ann = annotation_path_for(&image);
                    FrameRef::new(image, Some(ann))
                })
                .collect(),
        )
    }

    fn job(lengths: &[usize], exhausted: ExhaustedPolicy) -> VideoJob {
        VideoJob {
            background: FrameSource::Repeated(FrameRef::new("bg.png", None)),
            sources: lengths
                .iter()
                .enumerate()
                .map(|(i, &n)| VideoSource {
                    frames: seq(&format!("s{i}"), n),
                    selection: SelectionSpec::default(),
                })
                .collect(),
            exhausted,
            canvas: Some((4, 4)),
        }
    }

    #[test]
    fn output_length_is_longest_source() {
        assert_eq!(output_length(&job(&[21, 21], ExhaustedPolicy::Drop)).unwrap(), 21);
        assert_eq!(output_length(&job(&[10, 25], ExhaustedPolicy::Drop)).unwrap(), 25);
        assert_eq!(output_length(&job(&[1], ExhaustedPolicy::Drop)).unwrap(), 1);
    }

    #[test]
    fn repeated_sources_do_not_set_length() {
        let mut j = job(&[], ExhaustedPolicy::Drop);
        j.sources.push(VideoSource {
            frames: FrameSource::Repeated(FrameRef::new("a.png", Some("a.ann.json".into()))),
            selection: SelectionSpec::default(),
        });
        assert!(matches!(output_length(&j), Err(VideoError::NoFiniteSource)));
        j.sources.push(VideoSource {
            frames: seq("b", 3),
            selection: SelectionSpec::default(),
        });
        assert_eq!(output_length(&j).unwrap(), 3);
        let plan = plan_frame(&j, 2).unwrap();
        assert_eq!(plan.layers.len(), 2);
        assert_eq!(plan.layers[0].frame_index, 0);
    }

    #[test]
    fn first_frame_uses_every_source() {
        let plan = plan_frame(&job(&[3, 5], ExhaustedPolicy::Drop), 0).unwrap();
        let used: Vec<(usize, usize)> = plan.layers.iter().map(|l| (l.source, l.frame_index)).collect();
        assert_eq!(used, [(0, 0), (1, 0)]);
        assert_eq!(plan.background.image, PathBuf::from("bg.png"));
    }

    #[test]
    fn drop_policy_omits_exhausted_sources() {
        let plan = plan_frame(&job(&[3, 5], ExhaustedPolicy::Drop), 4).unwrap();
        let used: Vec<(usize, usize)> = plan.layers.iter().map(|l| (l.source, l.frame_index)).collect();
        assert_eq!(used, [(1, 4)]);
    }

    #[test]
    fn hold_last_reuses_final_frame() {
        let plan = plan_frame(&job(&[3, 5], ExhaustedPolicy::HoldLast), 4).unwrap();
        let used: Vec<(usize, usize)> = plan.layers.iter().map(|l| (l.source, l.frame_index)).collect();
        assert_eq!(used, [(0, 2), (1, 4)]);
        assert_eq!(plan.layers[0].frame.image, PathBuf::from("s0/frame_000002.png"));
    }

    #[test]
    fn finite_background_holds_last_frame() {
        let mut j = job(&[5], ExhaustedPolicy::Drop);
        j.background = seq("bg", 2);
        let plan = plan_frame(&j, 4).unwrap();
        assert_eq!(plan.background.image, PathBuf::from("bg/frame_000001.png"));
    }

    #[test]
    fn index_out_of_range() {
        let err = plan_frame(&job(&[3, 5], ExhaustedPolicy::Drop), 5).unwrap_err();
        assert!(matches!(err, Error::Video(VideoError::IndexOutOfRange { index: 5, length: 5 })));
    }

    #[test]
    fn frame_names() {
        assert_eq!(frame_number("frame_000012.png"), Some(12));
        assert_eq!(frame_number("frame_7.png"), Some(7));
        assert_eq!(frame_number("frame_.png"), None);
        assert_eq!(frame_number("frame_000001.ann.json"), None);
        assert_eq!(frame_number("frame_00a1.png"), None);
        assert_eq!(frame_file_name(3), "frame_000003.png");
        assert_eq!(
            annotation_path_for(Path::new("d/frame_000001.png")),
            PathBuf::from("d/frame_000001.ann.json")
        );
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("drop".parse::<ExhaustedPolicy>(), Ok(ExhaustedPolicy::Drop));
        assert_eq!("hold-last".parse::<ExhaustedPolicy>(), Ok(ExhaustedPolicy::HoldLast));
        assert!("hold".parse::<ExhaustedPolicy>().is_err());
    }
}
