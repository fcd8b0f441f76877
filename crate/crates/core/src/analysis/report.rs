//! Corpus-level fake-vs-real comparison across the four observations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::measures::{color_richness, sample_dynamism, text_visual_jsd, Normalization};
use super::stats::{ks_test, two_proportion_z_test, welch_t_test, TestResult};
use crate::error::{Error, Result};
use crate::store::{Label, NewsVideoSample};

pub const SIGNIFICANCE: f64 = 0.05;
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub n: usize,
    pub counts: Vec<usize>,
    pub proportions: Vec<f64>,
}

impl ClassCounts {
    fn new(counts: Vec<usize>) -> Self {
        let n: usize = counts.iter().sum();
        let proportions = counts
            .iter()
            .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect();
        Self { n, counts, proportions }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentObservation {
    pub classes: Vec<String>,
    pub neutral_class: usize,
    pub fake: ClassCounts,
    pub real: ClassCounts,
    pub excluded: usize,
    pub fake_charged: f64,
    pub real_charged: f64,
    /// Pooled z-test on the charged (non-neutral) proportions.
    pub test: TestResult,
}

/// Index of the class named "neutral", falling back to the first class.
pub fn neutral_index(classes: &[String]) -> usize {
    classes
        .iter()
        .position(|c| c.eq_ignore_ascii_case("neutral"))
        .unwrap_or(0)
}

/// Argmax class per sample, tallied per label. Samples without
/// probabilities are excluded and counted.
pub fn audio_sentiment_distribution(samples: &[NewsVideoSample], classes: &[String]) -> Result<SentimentObservation> {
    if classes.len() < 2 {
        return Err(Error::InvalidArgument("need at least two sentiment classes".into()));
    }
    let mut fake = vec![0usize; classes.len()];
    let mut real = vec![0usize; classes.len()];
    let mut excluded = 0;
    for s in samples {
        let Some(probs) = &s.analysis.audio_sentiment_probs else {
            excluded += 1;
            continue;
        };
        if probs.len() != classes.len() {
            return Err(Error::DimMismatch {
                id: s.id.clone(),
                role: "audio_sentiment_probs".into(),
                found: vec![probs.len()],
                expected: classes.len().to_string(),
            });
        }
        let class = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("non-empty");
        match s.label {
            Label::Fake => fake[class] += 1,
            Label::Real => real[class] += 1,
        }
    }
    let neutral = neutral_index(classes);
    let (fake, real) = (ClassCounts::new(fake), ClassCounts::new(real));
    if fake.n == 0 || real.n == 0 {
        return Err(Error::Empty("sentiment probabilities missing for one label".into()));
    }
    let fake_k = fake.n - fake.counts[neutral];
    let real_k = real.n - real.counts[neutral];
    Ok(SentimentObservation {
        classes: classes.to_vec(),
        neutral_class: neutral,
        fake_charged: fake_k as f64 / fake.n as f64,
        real_charged: real_k as f64 / real.n as f64,
        test: two_proportion_z_test(fake_k, fake.n, real_k, real.n)?,
        fake,
        real,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub fake_count: usize,
    pub real_count: usize,
    pub fake_density: f64,
    pub real_density: f64,
}

/// Equal-width bins over the pooled range; densities integrate to 1.
pub fn histogram(fake: &[f64], real: &[f64], bins: usize) -> Vec<HistogramBin> {
    let all = fake.iter().chain(real);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || bins == 0 {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let bins = if hi > lo { bins } else { 1 };
    let index = |v: f64| (((v - lo) / width) as usize).min(bins - 1);
    let mut fc = vec![0usize; bins];
    let mut rc = vec![0usize; bins];
    fake.iter().for_each(|&v| fc[index(v)] += 1);
    real.iter().for_each(|&v| rc[index(v)] += 1);
    let density = |c: usize, n: usize| if n == 0 { 0.0 } else { c as f64 / (n as f64 * width) };
    (0..bins)
        .map(|i| HistogramBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            fake_count: fc[i],
            real_count: rc[i],
            fake_density: density(fc[i], fake.len()),
            real_density: density(rc[i], real.len()),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Ks,
    WelchT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionObservation {
    pub fake: Vec<f64>,
    pub real: Vec<f64>,
    pub fake_mean: f64,
    pub real_mean: f64,
    pub excluded: usize,
    pub test_kind: TestKind,
    pub test: TestResult,
    pub histogram: Vec<HistogramBin>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn compare(fake: Vec<f64>, real: Vec<f64>, excluded: usize, kind: TestKind) -> Result<DistributionObservation> {
    let test = match kind {
        TestKind::Ks => ks_test(&fake, &real)?,
        TestKind::WelchT => {
            let w = welch_t_test(&fake, &real)?;
            TestResult {
                statistic: w.statistic,
                p_value: w.p_value,
            }
        }
    };
    Ok(DistributionObservation {
        fake_mean: mean(&fake),
        real_mean: mean(&real),
        histogram: histogram(&fake, &real, HISTOGRAM_BINS),
        excluded,
        test_kind: kind,
        test,
        fake,
        real,
    })
}

/// Splits per-sample measurements by label; `None` excludes the sample.
fn by_label(
    samples: &[NewsVideoSample],
    measure: impl Fn(&NewsVideoSample) -> Option<Result<f64>>,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let (mut fake, mut real, mut excluded) = (Vec::new(), Vec::new(), 0);
    for s in samples {
        match measure(s).transpose()? {
            Some(v) if s.label == Label::Fake => fake.push(v),
            Some(v) => real.push(v),
            None => excluded += 1,
        }
    }
    Ok((fake, real, excluded))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub observation: String,
    pub expected: String,
    pub holds: bool,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n_samples: usize,
    pub significance: f64,
    pub normalization: Normalization,
    pub sentiment: Option<SentimentObservation>,
    pub divergence: Option<DistributionObservation>,
    pub color: Option<DistributionObservation>,
    pub dynamism: Option<DistributionObservation>,
    pub notes: Vec<String>,
}

fn observe<T>(name: &str, notes: &mut Vec<String>, r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Empty(msg)) => {
            log::warn!("{name} skipped: {msg}");
            notes.push(format!("{name} skipped: {msg}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

pub fn corpus_report(samples: &[NewsVideoSample], classes: &[String], norm: Normalization) -> Result<AnalysisReport> {
    if samples.is_empty() {
        return Err(Error::Empty("corpus has no samples".into()));
    }
    let mut notes = Vec::new();
    let sentiment = observe("sentiment", &mut notes, audio_sentiment_distribution(samples, classes))?;

    let divergence = by_label(samples, |s| Some(text_visual_jsd(s, norm)))
        .and_then(|(f, r, x)| compare(f, r, x, TestKind::Ks));
    let divergence = observe("divergence", &mut notes, divergence)?;

    let color = by_label(samples, |s| {
        s.analysis
            .ocr_text_pixels
            .as_ref()
            .map(|px| color_richness(px.view()).map(|c| c as f64))
    })
    .and_then(|(f, r, x)| compare(f, r, x, TestKind::WelchT));
    let color = observe("color", &mut notes, color)?;

    let dynamism = by_label(samples, sample_dynamism).and_then(|(f, r, x)| compare(f, r, x, TestKind::Ks));
    let dynamism = observe("dynamism", &mut notes, dynamism)?;

    Ok(AnalysisReport {
        n_samples: samples.len(),
        significance: SIGNIFICANCE,
        normalization: norm,
        sentiment,
        divergence,
        color,
        dynamism,
        notes,
    })
}

impl AnalysisReport {
    /// Checks the expected fake-vs-real direction of each observation.
    pub fn directions(&self) -> Vec<Direction> {
        let mut out = Vec::new();
        let mut push = |observation: &str, expected: &str, holds: bool, p: f64| {
            out.push(Direction {
                observation: observation.into(),
                expected: expected.into(),
                holds,
                p_value: p,
                significant: p < self.significance,
            })
        };
        if let Some(s) = &self.sentiment {
            push("sentiment", "fake charged proportion > real", s.fake_charged > s.real_charged, s.test.p_value);
        }
        if let Some(d) = &self.divergence {
            push("divergence", "fake JSD > real", d.fake_mean > d.real_mean, d.test.p_value);
        }
        if let Some(c) = &self.color {
            push("color", "fake color richness < real", c.fake_mean < c.real_mean, c.test.p_value);
        }
        if let Some(d) = &self.dynamism {
            push("dynamism", "fake I_D < real", d.fake_mean < d.real_mean, d.test.p_value);
        }
        out
    }

    /// Writes `report.json` plus one CSV table per observation.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::train::write_json(self, dir.join("report.json"))?;
        if let Some(s) = &self.sentiment {
            let path = dir.join("sentiment.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["class", "fake_count", "fake_proportion", "real_count", "real_proportion"])?;
            for (i, c) in s.classes.iter().enumerate() {
                w.write_record([
                    c.clone(),
                    s.fake.counts[i].to_string(),
                    format!("{:.6}", s.fake.proportions[i]),
                    s.real.counts[i].to_string(),
                    format!("{:.6}", s.real.proportions[i]),
                ])?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        for (name, obs) in [("divergence", &self.divergence), ("color", &self.color), ("dynamism", &self.dynamism)] {
            let Some(obs) = obs else { continue };
            let path = dir.join(format!("{name}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["lo", "hi", "fake_count", "real_count", "fake_density", "real_density"])?;
            for b in &obs.histogram {
                w.write_record([
                    format!("{:.6}", b.lo),
                    format!("{:.6}", b.hi),
                    b.fake_count.to_string(),
                    b.real_count.to_string(),
                    format!("{:.6}", b.fake_density),
                    format!("{:.6}", b.real_density),
                ])?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
