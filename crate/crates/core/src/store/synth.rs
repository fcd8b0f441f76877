//! Synthetic corpora with controllable label-correlated cues.
//!
//! Four cue families can be planted independently, each with an effect size
//! in `[0, 1]` (0 = no label signal, 1 = fully separating where possible):
//!
//! * `sentiment`: fake videos favour emotionally charged audio classes.
//! * `divergence`: fake keyframes agree less with the accompanying text.
//! * `color`: fake on-screen text uses fewer distinct colours.
//! * `dynamism`: fake on-screen text has fewer, longer, more uniform spans.
//!
//! Every feature is rounded to `f32` at generation so that writing a corpus
//! to disk and loading it back is exact.

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::manifest::{write_dataset, DatasetManifest, FeatureDims};
use super::sample::{
    AnalysisAnnotations, FeatureBundle, Label, Modality, NewsVideoSample, Segment, SegmentSequence, TextBox,
};
use crate::error::{Error, Result};

/// Keyframe/text correlation for real videos.
const REAL_AGREEMENT: f64 = 0.9;
const PIXELS_PER_BOX: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CueEffects {
    pub sentiment: f64,
    pub divergence: f64,
    pub color: f64,
    pub dynamism: f64,
}

impl Default for CueEffects {
    fn default() -> Self {
        Self::all(1.0)
    }
}

impl CueEffects {
    pub fn all(v: f64) -> Self {
        Self {
            sentiment: v,
            divergence: v,
            color: v,
            dynamism: v,
        }
    }

    pub fn none() -> Self {
        Self::all(0.0)
    }

    /// Only the material-selection cues (sentiment, divergence).
    pub fn selection_only() -> Self {
        Self {
            sentiment: 1.0,
            divergence: 1.0,
            color: 0.0,
            dynamism: 0.0,
        }
    }

    /// Only the material-editing cues (colour, dynamism).
    pub fn editing_only() -> Self {
        Self {
            sentiment: 0.0,
            divergence: 0.0,
            color: 1.0,
            dynamism: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_samples: usize,
    pub fake_fraction: f64,
    pub dims: FeatureDims,
    pub effects: CueEffects,
    pub start: DateTime<Utc>,
    pub spacing_secs: i64,
}

pub fn default_sentiment_classes() -> Vec<String> {
    ["neutral", "happy", "sad", "angry"].map(String::from).to_vec()
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_samples: 200,
            fake_fraction: 0.5,
            dims: FeatureDims {
                sent_audio: 8,
                sent_text: 8,
                sem_text: 16,
                sem_frames: 16,
                image: 16,
                grid: 4,
                sentiment_classes: default_sentiment_classes(),
            },
            effects: CueEffects::default(),
            start: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
            spacing_secs: 3600,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be positive".into()));
        }
        if !(self.fake_fraction > 0.0 && self.fake_fraction < 1.0) {
            return Err(Error::InvalidArgument("fake_fraction must lie in (0, 1)".into()));
        }
        if [d.sent_audio, d.sent_text, d.sem_text, d.sem_frames, d.image, d.grid].contains(&0) {
            return Err(Error::InvalidArgument("feature dimensions must be positive".into()));
        }
        if d.sentiment_classes.len() < 2 {
            return Err(Error::InvalidArgument("need a neutral class and at least one charged class".into()));
        }
        if self.spacing_secs <= 0 {
            return Err(Error::InvalidArgument("spacing_secs must be positive".into()));
        }
        let e = self.effects;
        for (name, v) in [
            ("sentiment", e.sentiment),
            ("divergence", e.divergence),
            ("color", e.color),
            ("dynamism", e.dynamism),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("effect {name}={v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub dims: FeatureDims,
    pub samples: Vec<NewsVideoSample>,
}

impl SyntheticCorpus {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
        write_dataset(dir, &self.dims, &self.samples)
    }
}

fn f32r(v: f64) -> f64 {
    v as f32 as f64
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || std * normal(rng))
}

/// Fixed random structure shared by every sample of a corpus.
struct World {
    audio_protos: Array2<f64>,
    text_protos: Array2<f64>,
    /// Text and keyframe embeddings share their leading coordinates.
    frame_map: Array2<f64>,
    color_map: Array2<f64>,
    text_marker: Array2<f64>,
}

impl World {
    fn new(rng: &mut ChaCha8Rng, d: &FeatureDims) -> Self {
        let c = d.sentiment_classes.len();
        Self {
            audio_protos: normal_matrix(rng, c, d.sent_audio, 1.0),
            text_protos: normal_matrix(rng, c, d.sent_text, 1.0),
            frame_map: Array2::from_shape_fn((d.sem_text, d.sem_frames), |(i, j)| if i == j { 1.0 } else { 0.0 }),
            color_map: normal_matrix(rng, 3, d.image, 1.0),
            text_marker: normal_matrix(rng, 1, d.image, 1.0),
        }
    }
}

fn rows_around(rng: &mut ChaCha8Rng, n: usize, center: ndarray::ArrayView1<f64>, scale: f64, noise: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, center.len()), |(_, c)| scale * center[c]) + normal_matrix(rng, n, center.len(), noise)
}

pub fn synthesize(spec: &SynthSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = World::new(&mut rng, &spec.dims);
    let n = spec.n_samples;
    let n_fake = ((n as f64 * spec.fake_fraction).round() as usize).min(n);
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n_fake { Label::Fake } else { Label::Real })
        .collect();
    labels.shuffle(&mut rng);

    let samples = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let mut s = generate_sample(&mut rng, &world, spec, label);
            s.id = format!("syn-{i:05}");
            s.published_at = spec.start + Duration::seconds(spec.spacing_secs * i as i64);
            s
        })
        .collect();
    Ok(SyntheticCorpus {
        dims: spec.dims.clone(),
        samples,
    })
}

/// Generates a corpus and writes it under `dir`.
pub fn synthesize_dataset(spec: &SynthSpec, seed: u64, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    synthesize(spec, seed)?.write(dir)
}

fn generate_sample(rng: &mut ChaCha8Rng, world: &World, spec: &SynthSpec, label: Label) -> NewsVideoSample {
    let d = &spec.dims;
    let e = spec.effects;
    let fake = label == Label::Fake;

    // Audio sentiment class: charged (index >= 1) or neutral (index 0).
    let n_classes = d.sentiment_classes.len();
    let p_charged = if fake { 0.5 + 0.5 * e.sentiment } else { 0.5 - 0.5 * e.sentiment };
    let class = if rng.random::<f64>() < p_charged {
        rng.random_range(1..n_classes)
    } else {
        0
    };
    let mut logits: Vec<f64> = (0..n_classes).map(|_| (0.5 * normal(rng)).clamp(-1.5, 1.5)).collect();
    logits[class] = 3.0;
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    let probs: Vec<f64> = logits.iter().map(|l| l.exp() / z).collect();

    let l_a = rng.random_range(4..=8);
    let sent_audio = rows_around(rng, l_a, world.audio_protos.row(class), 1.0, 0.5);
    let l_t = rng.random_range(4..=8);
    let sent_text = rows_around(rng, l_t, world.text_protos.row(class), 0.5, 0.5);

    // Text/keyframe agreement.
    let topic = normal_matrix(rng, 1, d.sem_text, 1.0);
    let l_s = rng.random_range(4..=10);
    let sem_text = rows_around(rng, l_s, topic.row(0), 1.0, 0.3);
    let projected = topic.dot(&world.frame_map);
    let rho = if fake { REAL_AGREEMENT * (1.0 - e.divergence) } else { REAL_AGREEMENT };
    let l_f = rng.random_range(4..=10);
    let sem_frames = rows_around(rng, l_f, projected.row(0), rho, (1.0 - rho * rho).sqrt());

    let fps = if rng.random::<bool>() { 25.0 } else { 30.0 };
    let vframes: u32 = rng.random_range(300..=1800);

    let visual_segments = shot_sequence(rng, d.sem_frames, fps, vframes);
    let text_segments = text_sequence(rng, d.sem_text, fps, vframes, if fake { e.dynamism } else { 0.0 });

    let (ocr_boxes, palette) = on_screen_text(rng, if fake { e.color } else { 0.0 });
    let ocr_text_pixels = text_pixels(rng, &ocr_boxes, &palette);
    let ocr_frame_grid = frame_grid(rng, world, d, &ocr_boxes, &palette);

    let round = |a: Array2<f64>| a.mapv(f32r);
    NewsVideoSample {
        id: String::new(),
        published_at: spec.start,
        label,
        bundle: FeatureBundle {
            sent_audio: round(sent_audio),
            sent_text: round(sent_text),
            sem_text: round(sem_text),
            sem_frames: round(sem_frames),
            ocr_frame_grid: round(ocr_frame_grid),
            grid_side: d.grid,
            ocr_boxes,
        },
        text_segments,
        visual_segments,
        analysis: AnalysisAnnotations {
            audio_sentiment_probs: Some(probs),
            ocr_text_pixels,
        },
    }
}

fn shot_sequence(rng: &mut ChaCha8Rng, width: usize, fps: f64, vframes: u32) -> SegmentSequence {
    let n_shots = rng.random_range(2..=6usize);
    let mut cuts: Vec<u32> = Vec::new();
    while cuts.len() < n_shots - 1 {
        let c = rng.random_range(1..vframes);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(vframes);
    let segments = bounds
        .windows(2)
        .map(|w| {
            let k = rng.random_range(1..=3);
            Segment {
                content: normal_matrix(rng, k, width, 1.0).mapv(f32r),
                begin: w[0],
                end: w[1] - 1,
            }
        })
        .collect();
    SegmentSequence {
        modality: Modality::Visual,
        segments,
        fps,
        vframes,
    }
}

/// On-screen text spans. `uniformity` in `[0, 1]` removes spans, lengthens
/// total exposure and equalises span lengths.
fn text_sequence(rng: &mut ChaCha8Rng, width: usize, fps: f64, vframes: u32, uniformity: f64) -> SegmentSequence {
    let base_n = rng.random_range(3..=8usize);
    let n = base_n.saturating_sub((2.0 * uniformity).round() as usize).max(1);
    let coverage = (rng.random_range(0.35..0.6) + 0.3 * uniformity).min(0.95);
    let weights: Vec<f64> = (0..n)
        .map(|_| {
            let varied: f64 = Exp1.sample(rng);
            let varied = varied + 0.05;
            (1.0 - uniformity) * varied + uniformity
        })
        .collect();
    let wsum: f64 = weights.iter().sum();
    let gaps: Vec<f64> = (0..=n).map(|_| -> f64 { Exp1.sample(rng) }).collect();
    let gsum: f64 = gaps.iter().sum();
    let free = 1.0 - coverage;

    let last = vframes - 1;
    let mut t = free * gaps[0] / gsum;
    let mut segments = Vec::with_capacity(n);
    for j in 0..n {
        let rel = coverage * weights[j] / wsum;
        let begin = ((t * vframes as f64).round() as u32).min(last);
        let end = (begin + (rel * vframes as f64).round() as u32).min(last);
        segments.push(Segment {
            content: normal_matrix(rng, 1, width, 1.0).mapv(f32r),
            begin,
            end,
        });
        t += rel + free * gaps[j + 1] / gsum;
    }
    SegmentSequence {
        modality: Modality::Text,
        segments,
        fps,
        vframes,
    }
}

/// Boxes and a palette of distinct 4-bit-quantised colours. `plainness`
/// in `[0, 1]` shrinks the palette towards a single colour.
fn on_screen_text(rng: &mut ChaCha8Rng, plainness: f64) -> (Vec<TextBox>, Vec<[u8; 3]>) {
    let n_box = if rng.random::<f64>() < 0.85 { rng.random_range(1..=3) } else { 0 };
    let boxes = (0..n_box)
        .map(|_| {
            let w = rng.random_range(0.25..0.7);
            let h = rng.random_range(0.1..0.3);
            let x1 = rng.random_range(0.0..1.0 - w);
            let y1 = rng.random_range(0.0..1.0 - h);
            TextBox {
                x1: f32r(x1),
                y1: f32r(y1),
                x2: f32r(x1 + w),
                y2: f32r(y1 + h),
            }
        })
        .collect();
    let rich = rng.random_range(3..=8usize) as f64;
    let k = (((1.0 - plainness) * rich + plainness).round() as usize).max(1);
    let mut palette: Vec<[u8; 3]> = Vec::with_capacity(k);
    while palette.len() < k {
        let q = [rng.random_range(0..16u8), rng.random_range(0..16u8), rng.random_range(0..16u8)];
        if !palette.contains(&q) {
            palette.push(q);
        }
    }
    (boxes, palette)
}

fn text_pixels(rng: &mut ChaCha8Rng, boxes: &[TextBox], palette: &[[u8; 3]]) -> Option<Array2<f64>> {
    if boxes.is_empty() {
        return None;
    }
    let rows = boxes.len() * PIXELS_PER_BOX;
    let mut px = Array2::zeros((rows, 4));
    for p in 0..rows {
        let q = palette[p % palette.len()];
        px[[p, 0]] = (p / PIXELS_PER_BOX) as f64;
        for c in 0..3 {
            // Stay inside the 16-wide quantisation bin.
            px[[p, c + 1]] = (16 * q[c] as i32 + 8 + rng.random_range(-3..=3)) as f64;
        }
    }
    Some(px)
}

fn frame_grid(
    rng: &mut ChaCha8Rng,
    world: &World,
    d: &FeatureDims,
    boxes: &[TextBox],
    palette: &[[u8; 3]],
) -> Array2<f64> {
    let g = d.grid;
    let mut grid = normal_matrix(rng, g * g, d.image, 0.5);
    let cell = 1.0 / g as f64;
    for i in 0..g {
        for j in 0..g {
            let (x0, y0) = (j as f64 * cell, i as f64 * cell);
            let covered = boxes
                .iter()
                .any(|b| b.x1 < x0 + cell && b.x2 > x0 && b.y1 < y0 + cell && b.y2 > y0);
            if !covered {
                continue;
            }
            let p = i * g + j;
            let q = palette[p % palette.len()];
            let rgb = ndarray::arr2(&[[
                (q[0] as f64 + 0.5) / 8.0 - 1.0,
                (q[1] as f64 + 0.5) / 8.0 - 1.0,
                (q[2] as f64 + 0.5) / 8.0 - 1.0,
            ]]);
            let feat = &world.text_marker + &rgb.dot(&world.color_map);
            let mut row = grid.row_mut(p);
            row += &feat.row(0);
        }
    }
    grid
}
