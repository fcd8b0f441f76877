use chrono::{DateTime, Utc};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary veracity label. Fake is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Real = 0,
    Fake = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::Real),
            1 => Some(Label::Fake),
            _ => None,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Label::from_index(v as usize).ok_or_else(|| format!("label {v} is not 0 or 1"))
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

/// Axis-aligned box in normalised image coordinates, serialised as
/// `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct TextBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<[f64; 4]> for TextBox {
    fn from([x1, y1, x2, y2]: [f64; 4]) -> Self {
        Self { x1, y1, x2, y2 }
    }
}

impl From<TextBox> for [f64; 4] {
    fn from(b: TextBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl TextBox {
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.x1)
            && (0.0..=1.0).contains(&self.y1)
            && (0.0..=1.0).contains(&self.x2)
            && (0.0..=1.0).contains(&self.y2)
            && self.x1 <= self.x2
            && self.y1 <= self.y2
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Visual,
}

/// One time span of a video. Text segments carry a single embedding row;
/// visual segments carry one row per sampled frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub content: Array2<f64>,
    pub begin: u32,
    pub end: u32,
}

impl Segment {
    pub fn frame_span(&self) -> u32 {
        self.end - self.begin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSequence {
    pub modality: Modality,
    pub segments: Vec<Segment>,
    pub fps: f64,
    pub vframes: u32,
}

impl SegmentSequence {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn width(&self) -> Option<usize> {
        self.segments.first().map(|s| s.content.ncols())
    }

    /// Absolute duration in seconds, `(end - begin) / fps`.
    pub fn absolute_duration(&self, seg: &Segment) -> f64 {
        seg.frame_span() as f64 / self.fps
    }

    /// Fraction of the video, `(end - begin) / vframes`.
    pub fn relative_duration(&self, seg: &Segment) -> f64 {
        seg.frame_span() as f64 / self.vframes as f64
    }

    pub fn durations(&self) -> Vec<(f64, f64)> {
        self.segments
            .iter()
            .map(|s| (self.absolute_duration(s), self.relative_duration(s)))
            .collect()
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(format!("{:?} segments: fps {} must be positive", self.modality, self.fps));
        }
        if self.vframes == 0 {
            return Err(format!("{:?} segments: vframes must be positive", self.modality));
        }
        let width = self.width();
        let mut prev_begin = 0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.begin > s.end || s.end >= self.vframes {
                return Err(format!(
                    "{:?} segment {i}: interval [{}, {}] outside [0, {})",
                    self.modality, s.begin, s.end, self.vframes
                ));
            }
            if s.begin < prev_begin {
                return Err(format!("{:?} segment {i}: not sorted by begin frame", self.modality));
            }
            prev_begin = s.begin;
            if s.content.nrows() == 0 {
                return Err(format!("{:?} segment {i}: no content rows", self.modality));
            }
            if self.modality == Modality::Text && s.content.nrows() != 1 {
                return Err(format!("text segment {i}: expected one embedding row"));
            }
            if Some(s.content.ncols()) != width {
                return Err(format!("{:?} segment {i}: embedding width differs", self.modality));
            }
        }
        Ok(())
    }
}

/// Precomputed per-modality features of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    /// `(L_a, D_sa)` audio sentiment tokens.
    pub sent_audio: Array2<f64>,
    /// `(L_t, D_st)` text sentiment tokens.
    pub sent_text: Array2<f64>,
    /// `(L_s, D_ct)` text semantic tokens.
    pub sem_text: Array2<f64>,
    /// `(L_f, D_cv)` keyframe semantic embeddings.
    pub sem_frames: Array2<f64>,
    /// Patch grid of the text-rich frame, `(G·G, D_img)` row-major by patch.
    pub ocr_frame_grid: Array2<f64>,
    pub grid_side: usize,
    pub ocr_boxes: Vec<TextBox>,
}

impl FeatureBundle {
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, a) in [
            ("sent_audio", &self.sent_audio),
            ("sent_text", &self.sent_text),
            ("sem_text", &self.sem_text),
            ("sem_frames", &self.sem_frames),
        ] {
            if a.nrows() == 0 {
                return Err(format!("{name} is empty"));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(format!("{name} has non-finite values"));
            }
        }
        if self.ocr_frame_grid.nrows() != self.grid_side * self.grid_side || self.grid_side == 0 {
            return Err(format!(
                "ocr_frame_grid has {} patches for grid side {}",
                self.ocr_frame_grid.nrows(),
                self.grid_side
            ));
        }
        if let Some(b) = self.ocr_boxes.iter().find(|b| !b.is_valid()) {
            return Err(format!("invalid box {:?}", <[f64; 4]>::from(*b)));
        }
        Ok(())
    }
}

/// Annotations used only by the corpus analysis toolkit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisAnnotations {
    /// Distribution over the manifest's sentiment classes.
    pub audio_sentiment_probs: Option<Vec<f64>>,
    /// `(P, 4)` rows of `(box_index, r, g, b)` with channels in `0..=255`.
    pub ocr_text_pixels: Option<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewsVideoSample {
    pub id: String,
    pub published_at: DateTime<Utc>,
    pub label: Label,
    pub bundle: FeatureBundle,
    pub text_segments: SegmentSequence,
    pub visual_segments: SegmentSequence,
    pub analysis: AnalysisAnnotations,
}

impl NewsVideoSample {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidSample {
            id: self.id.clone(),
            reason,
        };
        self.bundle.validate().map_err(fail)?;
        self.text_segments.validate().map_err(fail)?;
        self.visual_segments.validate().map_err(fail)?;
        if self.text_segments.modality != Modality::Text || self.visual_segments.modality != Modality::Visual {
            return Err(fail("segment modalities swapped".into()));
        }
        if self.text_segments.is_empty() || self.visual_segments.is_empty() {
            return Err(fail("segment sequences must be non-empty".into()));
        }
        if let Some(p) = &self.analysis.audio_sentiment_probs {
            let sum: f64 = p.iter().sum();
            if p.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-6 {
                return Err(fail(format!("sentiment probabilities sum to {sum}")));
            }
        }
        Ok(())
    }
}
