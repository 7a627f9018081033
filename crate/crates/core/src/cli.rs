//! Command-line front end.
//!
//! ```text
//! exmerge merge --background bg.png \
//!     --input a.png:a.ann.json:n=1 --input b.png:b.ann.json:n=2 --out out.png
//! exmerge merge --mode video --background bg.png \
//!     --input clip1/:n=1 --input clip2/:n=1 --out frames/
//! ```
//!
//! An input spec is `PATH[:ANNOTATIONS][:n=K|all][:min_score=S]`. Without an
//! annotation path the sibling `PATH.ann.json` (extension replaced) is used.
//! In video mode `PATH` may be a frame directory or a still repeated on every
//! frame.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::pipeline::{run_still, LayerInput, StillJob, Warning, WarningKind};
use crate::raster::write_png;
use crate::selection::{PersonCount, SelectionSpec, DEFAULT_MIN_SCORE};
use crate::video::{
    annotation_path_for, run_video, ExhaustedPolicy, FrameRef, FrameSource, VideoJob, VideoSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Mode {
    #[default]
    Still,
    Video,
}

/// One `--input` value.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub path: PathBuf,
    pub annotations: Option<PathBuf>,
    pub count: PersonCount,
    pub min_score: Option<f64>,
}

impl InputSpec {
    pub fn annotation_path(&self) -> PathBuf {
        self.annotations
            .clone()
            .unwrap_or_else(|| annotation_path_for(&self.path))
    }
}

fn parse_score(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(format!("score must be a number in [0, 1], got `{s}`")),
    }
}

impl FromStr for InputSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut parts: Vec<&str> = s.split(':').collect();
        let mut count = PersonCount::All;
        let mut min_score = None;
        while let Some(last) = parts.last() {
            let Some((key, value)) = last.split_once('=') else { break };
            match key {
                "n" => count = value.parse()?,
                "min_score" | "min-score" => min_score = Some(parse_score(value)?),
                _ => return Err(format!("unknown input option `{key}` (expected `n` or `min_score`)")),
            }
            parts.pop();
        }
        match parts.as_slice() {
            [path] if !path.is_empty() => Ok(Self {
                path: path.into(),
                annotations: None,
                count,
                min_score,
            }),
            [path, ann] if !path.is_empty() && !ann.is_empty() => Ok(Self {
                path: path.into(),
                annotations: Some(ann.into()),
                count,
                min_score,
            }),
            _ => Err(format!("expected PATH[:ANNOTATIONS][:n=K][:min_score=S], got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CanvasSize {
    pub width: u32,
    pub height: u32,
}

impl FromStr for CanvasSize {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bad = || format!("size must look like 1920x1080, got `{s}`");
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let width: u32 = w.parse().map_err(|_| bad())?;
        let height: u32 = h.parse().map_err(|_| bad())?;
        if width == 0 || height == 0 {
            return Err(bad());
        }
        Ok(Self { width, height })
    }
}

impl fmt::Display for CanvasSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Debug, Parser)]
#[command(name = "exmerge", version, about = "Extract persons from annotated images and merge them onto a new background")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merge the selected persons of every input onto the background.
    Merge(MergeArgs),
}

#[derive(Debug, Args)]
struct MergeArgs {
    #[arg(long, value_enum, default_value_t = Mode::Still)]
    mode: Mode,
    /// Background image (video mode: image or frame directory).
    #[arg(long)]
    background: PathBuf,
    /// PATH[:ANNOTATIONS][:n=K|all][:min_score=S]; repeat in layer order, bottom first.
    #[arg(long = "input", value_name = "SPEC", required = true)]
    inputs: Vec<InputSpec>,
    /// Output PNG (still) or directory (video).
    #[arg(long)]
    out: PathBuf,
    /// Canvas size; defaults to the background's size.
    #[arg(long, value_name = "WxH")]
    size: Option<CanvasSize>,
    /// Minimum detector score for inputs that do not set their own.
    #[arg(long, value_parser = parse_score, default_value_t = DEFAULT_MIN_SCORE)]
    min_score: f64,
    /// What a shorter sequence shows after its last frame.
    #[arg(long, value_name = "drop|hold-last", default_value_t = ExhaustedPolicy::Drop)]
    exhausted_policy: ExhaustedPolicy,
    /// Comma-separated permutation of 0-based input indices, bottom layer first.
    #[arg(long, value_delimiter = ',', value_name = "I,J,...")]
    layer_order: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub mode: Mode,
    pub background: PathBuf,
    /// In command-line order.
    pub inputs: Vec<InputSpec>,
    pub out: PathBuf,
    pub canvas: Option<CanvasSize>,
    pub min_score: f64,
    pub exhausted_policy: ExhaustedPolicy,
    pub layer_order: Option<Vec<usize>>,
}

impl CliConfig {
    /// Inputs in layer order, bottom first.
    pub fn layered_inputs(&self) -> Vec<&InputSpec> {
        match &self.layer_order {
            Some(order) => order.iter().map(|&i| &self.inputs[i]).collect(),
            None => self.inputs.iter().collect(),
        }
    }

    fn selection_for(&self, input: &InputSpec) -> SelectionSpec {
        SelectionSpec {
            count: input.count,
            min_score: input.min_score.unwrap_or(self.min_score),
            ..SelectionSpec::default()
        }
    }
}

/// Parses a full argument vector, program name first.
pub fn parse_args<I, T>(argv: I) -> std::result::Result<CliConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let Command::Merge(args) = Cli::try_parse_from(argv)?.command;
    if let Some(order) = &args.layer_order {
        let mut seen = vec![false; args.inputs.len()];
        let valid = order.len() == args.inputs.len()
            && order.iter().all(|&i| i < seen.len() && !std::mem::replace(&mut seen[i], true));
        if !valid {
            return Err(Cli::command().error(
                ErrorKind::ValueValidation,
                format!(
                    "--layer-order must be a permutation of 0..{} (one index per --input), got {:?}",
                    args.inputs.len(),
                    order
                ),
            ));
        }
    }
    Ok(CliConfig {
        mode: args.mode,
        background: args.background,
        inputs: args.inputs,
        out: args.out,
        canvas: args.size,
        min_score: args.min_score,
        exhausted_policy: args.exhausted_policy,
        layer_order: args.layer_order,
    })
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// Frames written; 1 in still mode.
    pub frames: usize,
    pub warnings: Vec<Warning>,
}

/// Runs the configured pipeline and returns the process exit code.
pub fn run(config: &CliConfig) -> i32 {
    match execute(config) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(config: &CliConfig) -> Result<RunReport> {
    let mut warnings = Vec::new();
    if config.inputs.len() == 1 {
        warnings.push(Warning {
            source: String::new(),
            kind: WarningKind::SingleInput,
        });
    }
    let canvas = config.canvas.map(|c| (c.width, c.height));
    let frames = match config.mode {
        Mode::Still => {
            let job = StillJob {
                background: config.background.clone(),
                inputs: config
                    .layered_inputs()
                    .into_iter()
                    .map(|i| LayerInput::new(&i.path, i.annotation_path(), config.selection_for(i)))
                    .collect(),
                canvas,
            };
            let output = run_still(&job)?;
            write_atomically(&output.image, &config.out)?;
            warnings.extend(output.warnings);
            1
        }
        Mode::Video => {
            let job = video_job(config, canvas)?;
            let report = run_video(&job, &config.out)?;
            warnings.extend(report.warnings);
            report.frames
        }
    };
    Ok(RunReport { frames, warnings })
}

fn video_job(config: &CliConfig, canvas: Option<(u32, u32)>) -> Result<VideoJob> {
    let background = if config.background.is_dir() {
        FrameSource::scan_directory(&config.background, false)?
    } else {
        FrameSource::Repeated(FrameRef::new(&config.background, None))
    };
    let mut sources = Vec::with_capacity(config.inputs.len());
    for input in config.layered_inputs() {
        let frames = if input.path.is_dir() {
            FrameSource::scan_directory(&input.path, true)?
        } else {
            FrameSource::Repeated(FrameRef::new(&input.path, Some(input.annotation_path())))
        };
        sources.push(VideoSource {
            frames,
            selection: config.selection_for(input),
        });
    }
    Ok(VideoJob {
        background,
        sources,
        exhausted: config.exhausted_policy,
        canvas,
    })
}

/// Writes a PNG next to `path` and renames it into place.
fn write_atomically(image: &crate::raster::PixelBuffer, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".exmerge-")
        .suffix(".png.tmp")
        .tempfile_in(dir)
        .map_err(io_err)?;
    write_png(image, std::io::BufWriter::new(tmp.as_file_mut()))?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("exmerge".to_owned())
            .chain(s.split_whitespace().map(str::to_owned))
            .collect()
    }

    #[test]
    fn still_mode_config() {
        let cfg = parse_args(argv(
            "merge --background bg.png --input a.png:a.ann.json:n=1 --input b.png:b.ann.json:n=2 --out out.png",
        ))
        .unwrap();
        assert_eq!(cfg.mode, Mode::Still);
        assert_eq!(cfg.background, PathBuf::from("bg.png"));
        let paths: Vec<_> = cfg.layered_inputs().iter().map(|i| i.path.clone()).collect();
        assert_eq!(paths, [PathBuf::from("a.png"), PathBuf::from("b.png")]);
        assert_eq!(cfg.inputs[0].annotations, Some(PathBuf::from("a.ann.json")));
        assert_eq!(cfg.inputs[0].count, PersonCount::exactly(1).unwrap());
        assert_eq!(cfg.inputs[1].count, PersonCount::exactly(2).unwrap());
        assert_eq!(cfg.min_score, 0.7);
        assert_eq!(cfg.exhausted_policy, ExhaustedPolicy::Drop);
        assert_eq!(cfg.out, PathBuf::from("out.png"));
    }

    #[test]
    fn video_mode_config() {
        let cfg = parse_args(argv(
            "merge --background bg.png --input dir1:n=1 --input dir2:n=1 --mode video --out outdir --exhausted-policy hold-last",
        ))
        .unwrap();
        assert_eq!(cfg.mode, Mode::Video);
        assert_eq!(cfg.inputs[0].path, PathBuf::from("dir1"));
        assert_eq!(cfg.inputs[0].annotations, None);
        assert_eq!(cfg.exhausted_policy, ExhaustedPolicy::HoldLast);
    }

    #[test]
    fn usage_errors() {
        let cases = [
            "merge --input a.png --out o.png",
            "merge --background bg.png --out o.png",
            "merge --background bg.png --input a.png",
            "merge --background bg.png --input a.png --out o.png --bogus",
            "merge --background bg.png --input a.png:n=0 --out o.png",
            "merge --background bg.png --input a.png:x=1 --out o.png",
            "merge --background bg.png --input a.png --out o.png --size 0x10",
            "merge --background bg.png --input a.png --out o.png --min-score 1.5",
            "merge --background bg.png --input a.png --out o.png --mode film",
            "merge --background bg.png --input a.png --input b.png --out o.png --layer-order 0,0",
            "merge --background bg.png --input a.png --input b.png --out o.png --layer-order 0",
            "merge --background bg.png --input a.png --input b.png --out o.png --layer-order 0,2",
        ];
        for case in cases {
            let err = parse_args(argv(case)).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{case}: {err}");
        }
    }

    #[test]
    fn help_and_version_exit_zero() {
        for flag in ["--help", "--version"] {
            let err = parse_args(argv(flag)).unwrap_err();
            assert_eq!(err.exit_code(), 0);
        }
    }

    #[test]
    fn layer_order_permutes_inputs() {
        let cfg = parse_args(argv(
            "merge --background bg.png --input a.png --input b.png --input c.png --out o.png --layer-order 2,0,1",
        ))
        .unwrap();
        let order: Vec<_> = cfg.layered_inputs().iter().map(|i| i.path.clone()).collect();
        assert_eq!(order, [PathBuf::from("c.png"), PathBuf::from("a.png"), PathBuf::from("b.png")]);
    }

    #[test]
    fn input_spec_forms() {
        let s: InputSpec = "a.png".parse().unwrap();
        assert_eq!(s.annotation_path(), PathBuf::from("a.ann.json"));
        assert_eq!(s.count, PersonCount::All);

        let s: InputSpec = "a.png:n=all:min_score=0.5".parse().unwrap();
        assert_eq!(s.count, PersonCount::All);
        assert_eq!(s.min_score, Some(0.5));
        assert_eq!(s.annotations, None);

        let s: InputSpec = "x/a.jpg:y/a.json:n=3".parse().unwrap();
        assert_eq!(s.annotation_path(), PathBuf::from("y/a.json"));

        assert!("".parse::<InputSpec>().is_err());
        assert!("a:b:c".parse::<InputSpec>().is_err());
        assert!("a.png::n=1".parse::<InputSpec>().is_err());
    }

    #[test]
    fn parsing_is_deterministic() {
        let line = "merge --background bg.png --input a.png:n=1 --input b.png --out o.png --size 64x48";
        assert_eq!(parse_args(argv(line)).unwrap(), parse_args(argv(line)).unwrap());
        assert_eq!(
            parse_args(argv(line)).unwrap().canvas,
            Some(CanvasSize { width: 64, height: 48 })
        );
    }
}
