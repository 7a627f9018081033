//! Person ranking by bounding-box area and per-source top-n selection.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use crate::annotations::{AnnotationDocument, BBox, InstanceAnnotation};

/// How many ranked persons to take from one source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PersonCount {
    #[default]
    All,
    Exactly(NonZeroUsize),
}

impl PersonCount {
    /// `None` when `n` is zero.
    pub fn exactly(n: usize) -> Option<Self> {
        NonZeroUsize::new(n).map(Self::Exactly)
    }
}

impl fmt::Display for PersonCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::All => f.write_str("all"),
            Self::Exactly(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for PersonCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Self::All);
        }
        s.parse::<usize>()
            .ok()
            .and_then(Self::exactly)
            .ok_or_else(|| format!("person count must be a positive integer or `all`, got `{s}`"))
    }
}

pub const DEFAULT_MIN_SCORE: f64 = 0.7;
pub const DEFAULT_CLASS: &str = "person";

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSpec {
    pub count: PersonCount,
    pub min_score: f64,
    pub class_filter: String,
}

impl Default for SelectionSpec {
    fn default() -> Self {
        Self {
            count: PersonCount::All,
            min_score: DEFAULT_MIN_SCORE,
            class_filter: DEFAULT_CLASS.to_owned(),
        }
    }
}

impl SelectionSpec {
    pub fn with_count(count: PersonCount) -> Self {
        Self {
            count,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedInstance<'a> {
    pub instance_id: u64,
    pub area: u64,
    pub annotation: &'a InstanceAnnotation,
}

/// Height × width of the box.
pub fn bbox_area(b: &BBox) -> u64 {
    u64::from(b.height()) * u64::from(b.width())
}

/// Matching instances by descending box area; equal areas keep document order.
pub fn rank_persons<'a>(doc: &'a AnnotationDocument, spec: &SelectionSpec) -> Vec<RankedInstance<'a>> {
    let mut ranked: Vec<RankedInstance<'a>> = doc
        .instances
        .iter()
        .filter(|inst| inst.class_label == spec.class_filter && inst.score >= spec.min_score)
        .map(|inst| RankedInstance {
            instance_id: inst.instance_id,
            area: bbox_area(&inst.bbox),
            annotation: inst,
        })
        .collect();
    // stable: ties stay in emission order
    ranked.sort_by(|a, b| b.area.cmp(&a.area));
    ranked
}

/// Fewer persons were available than requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shortfall {
    pub requested: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection<'a> {
    pub instances: Vec<RankedInstance<'a>>,
    pub shortfall: Option<Shortfall>,
}

pub fn select_top_n<'a>(mut ranked: Vec<RankedInstance<'a>>, count: PersonCount) -> Selection<'a> {
    let mut shortfall = None;
    if let PersonCount::Exactly(n) = count {
        let n = n.get();
        if n > ranked.len() {
            shortfall = Some(Shortfall {
                requested: n,
                available: ranked.len(),
            });
        }
        ranked.truncate(n);
    }
    Selection {
        instances: ranked,
        shortfall,
    }
}
