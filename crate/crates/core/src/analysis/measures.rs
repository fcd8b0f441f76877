//! Per-video measurements.

use std::collections::BTreeSet;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::stats::js_divergence;
use crate::error::{Error, Result};
use crate::store::NewsVideoSample;

/// Map from a raw feature vector to a probability distribution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    Softmax,
    /// Subtract the minimum, then divide by the sum.
    ShiftL1,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "softmax" => Ok(Self::Softmax),
            "shift-l1" => Ok(Self::ShiftL1),
            other => Err(Error::InvalidArgument(format!("unknown normalization {other:?}"))),
        }
    }
}

impl Normalization {
    pub fn apply(self, v: ArrayView1<f64>) -> Result<Vec<f64>> {
        if v.is_empty() {
            return Err(Error::Empty("feature vector".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("feature vector is not finite".into()));
        }
        let out: Vec<f64> = match self {
            Self::Softmax => {
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
                let z: f64 = e.iter().sum();
                e.into_iter().map(|x| x / z).collect()
            }
            Self::ShiftL1 => {
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                let shifted: Vec<f64> = v.iter().map(|x| x - min).collect();
                let z: f64 = shifted.iter().sum();
                if z == 0.0 {
                    vec![1.0 / v.len() as f64; v.len()]
                } else {
                    shifted.into_iter().map(|x| x / z).collect()
                }
            }
        };
        Ok(out)
    }
}

/// Mean JS divergence between the pooled text feature and each keyframe.
pub fn text_visual_jsd_features(text: ArrayView2<f64>, frames: ArrayView2<f64>, norm: Normalization) -> Result<f64> {
    if text.nrows() == 0 || frames.nrows() == 0 {
        return Err(Error::Empty("text or keyframe features missing".into()));
    }
    if text.ncols() != frames.ncols() {
        return Err(Error::Shape(format!(
            "text width {} differs from keyframe width {}",
            text.ncols(),
            frames.ncols()
        )));
    }
    let pooled = text.mean_axis(Axis(0)).expect("non-empty");
    let p = norm.apply(pooled.view())?;
    let total = frames
        .rows()
        .into_iter()
        .map(|f| js_divergence(&p, &norm.apply(f)?))
        .sum::<Result<f64>>()?;
    Ok(total / frames.nrows() as f64)
}

pub fn text_visual_jsd(sample: &NewsVideoSample, norm: Normalization) -> Result<f64> {
    let b = &sample.bundle;
    text_visual_jsd_features(b.sem_text.view(), b.sem_frames.view(), norm).map_err(|e| Error::InvalidSample {
        id: sample.id.clone(),
        reason: e.to_string(),
    })
}

/// Population standard deviation times one minus the mean of the relative
/// on-screen text durations.
pub fn text_dynamism(relative: &[f64]) -> Result<f64> {
    if relative.is_empty() {
        return Err(Error::Empty("no on-screen text durations".into()));
    }
    if let Some(v) = relative.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("relative duration {v} outside [0, 1]")));
    }
    let n = relative.len() as f64;
    let mean = relative.iter().sum::<f64>() / n;
    let var = relative.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() * (1.0 - mean))
}

pub fn sample_dynamism(sample: &NewsVideoSample) -> Option<Result<f64>> {
    let seq = &sample.text_segments;
    if seq.is_empty() {
        return None;
    }
    let rel: Vec<f64> = seq.segments.iter().map(|s| seq.relative_duration(s)).collect();
    Some(text_dynamism(&rel))
}

/// Keeps the top four bits of an 8-bit channel value.
pub fn quantize_channel(v: f64) -> u8 {
    (v.round().clamp(0.0, 255.0) as u8) >> 4
}

/// Distinct colours after quantisation, over `(box, r, g, b)` pixel rows.
pub fn color_richness(pixels: ArrayView2<f64>) -> Result<usize> {
    if pixels.ncols() != 4 {
        return Err(Error::Shape(format!("pixel rows have {} columns, expected 4", pixels.ncols())));
    }
    if pixels.nrows() == 0 {
        return Err(Error::Empty("no text pixels".into()));
    }
    if pixels.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("pixel values are not finite".into()));
    }
    let colors: BTreeSet<[u8; 3]> = pixels
        .rows()
        .into_iter()
        .map(|r| [quantize_channel(r[1]), quantize_channel(r[2]), quantize_channel(r[3])])
        .collect();
    Ok(colors.len())
}
