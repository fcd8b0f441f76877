//! JSON dataset manifests referencing tensor blobs stored beside them.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::blob::{probe_tensor, read_tensor, write_tensor, BlobHeader, TensorBlob};
use super::sample::{
    AnalysisAnnotations, FeatureBundle, Label, Modality, NewsVideoSample, Segment, SegmentSequence, TextBox,
};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Feature widths declared once per corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDims {
    pub sent_audio: usize,
    pub sent_text: usize,
    /// Text semantic width; also the width of text segment embeddings.
    pub sem_text: usize,
    /// Visual semantic width; also the width of visual segment frames.
    pub sem_frames: usize,
    pub image: usize,
    pub grid: usize,
    pub sentiment_classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobPaths {
    pub sent_audio: String,
    pub sent_text: String,
    pub sem_text: String,
    pub sem_frames: String,
    pub ocr_frame_grid: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub fps: f64,
    pub vframes: u32,
    pub intervals: Vec<[u32; 2]>,
    /// Rows per segment in the embedding blob; absent for text (one row each).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_counts: Option<Vec<usize>>,
    pub embeddings: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_sentiment_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_text_pixels: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub published_at: DateTime<Utc>,
    pub label: Label,
    pub blobs: BlobPaths,
    #[serde(default)]
    pub ocr_boxes: Vec<TextBox>,
    pub text_segments: SegmentRecord,
    pub visual_segments: SegmentRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestDocument {
    version: u32,
    dims: FeatureDims,
    records: Vec<SampleRecord>,
}

/// A validated manifest. Blob paths resolve against `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub version: u32,
    pub dims: FeatureDims,
    pub records: Vec<SampleRecord>,
}

fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

fn read_document(path: &Path) -> Result<(PathBuf, ManifestDocument)> {
    let file = manifest_path(path);
    let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    let doc: ManifestDocument = serde_json::from_str(&text).map_err(|source| Error::ManifestJson {
        path: file.clone(),
        source,
    })?;
    let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((root, doc))
}

/// Loads and fully validates a manifest; fails on the first problem.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let (root, doc) = read_document(path.as_ref())?;
    let manifest = DatasetManifest {
        root,
        version: doc.version,
        dims: doc.dims,
        records: doc.records,
    };
    if let Some(err) = manifest.check().into_iter().next() {
        return Err(err);
    }
    Ok(manifest)
}

/// Collects every record-level problem instead of stopping at the first.
pub fn validate_manifest(path: impl AsRef<Path>) -> Result<Vec<Error>> {
    let (root, doc) = read_document(path.as_ref())?;
    let manifest = DatasetManifest {
        root,
        version: doc.version,
        dims: doc.dims,
        records: doc.records,
    };
    Ok(manifest.check())
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// A manifest over a subset of records sharing this manifest's root.
    pub fn with_records(&self, records: Vec<SampleRecord>) -> Self {
        Self {
            root: self.root.clone(),
            version: self.version,
            dims: self.dims.clone(),
            records,
        }
    }

    pub fn check(&self) -> Vec<Error> {
        let mut errors = Vec::new();
        if self.version != MANIFEST_VERSION {
            errors.push(Error::InvalidArgument(format!(
                "unsupported manifest version {}",
                self.version
            )));
        }
        let mut seen = HashSet::new();
        for rec in &self.records {
            if !seen.insert(rec.id.as_str()) {
                errors.push(Error::DuplicateId(rec.id.clone()));
                continue;
            }
            if let Err(e) = self.check_record(rec) {
                errors.push(e);
            }
        }
        errors
    }

    fn probe(&self, rec: &SampleRecord, role: &str, rel: &str) -> Result<BlobHeader> {
        let path = self.resolve(rel);
        if !path.is_file() {
            return Err(Error::MissingBlob {
                id: rec.id.clone(),
                path,
            });
        }
        probe_tensor(&path)
            .map_err(|e| Error::InvalidSample {
                id: rec.id.clone(),
                reason: format!("{role}: {e}"),
            })
    }

    fn expect_dims(
        &self,
        rec: &SampleRecord,
        role: &str,
        rel: &str,
        check: impl Fn(&[usize]) -> bool,
        expected: String,
    ) -> Result<Vec<usize>> {
        let header = self.probe(rec, role, rel)?;
        if !check(&header.dims) {
            return Err(Error::DimMismatch {
                id: rec.id.clone(),
                role: role.into(),
                found: header.dims,
                expected,
            });
        }
        Ok(header.dims)
    }

    fn check_record(&self, rec: &SampleRecord) -> Result<()> {
        let d = &self.dims;
        let invalid = |reason: String| Error::InvalidSample {
            id: rec.id.clone(),
            reason,
        };
        let seq = |width: usize| move |dims: &[usize]| dims.len() == 2 && dims[1] == width;
        self.expect_dims(rec, "sent_audio", &rec.blobs.sent_audio, seq(d.sent_audio), format!("[L, {}]", d.sent_audio))?;
        self.expect_dims(rec, "sent_text", &rec.blobs.sent_text, seq(d.sent_text), format!("[L, {}]", d.sent_text))?;
        self.expect_dims(rec, "sem_text", &rec.blobs.sem_text, seq(d.sem_text), format!("[L, {}]", d.sem_text))?;
        self.expect_dims(rec, "sem_frames", &rec.blobs.sem_frames, seq(d.sem_frames), format!("[L, {}]", d.sem_frames))?;
        self.expect_dims(
            rec,
            "ocr_frame_grid",
            &rec.blobs.ocr_frame_grid,
            |dims| dims == [d.grid, d.grid, d.image],
            format!("[{}, {}, {}]", d.grid, d.grid, d.image),
        )?;
        if let Some(b) = rec.ocr_boxes.iter().find(|b| !b.is_valid()) {
            return Err(invalid(format!("invalid box {:?}", <[f64; 4]>::from(*b))));
        }

        for (role, segs, width) in [
            ("text_segments", &rec.text_segments, d.sem_text),
            ("visual_segments", &rec.visual_segments, d.sem_frames),
        ] {
            if segs.intervals.is_empty() {
                return Err(invalid(format!("{role}: no segments")));
            }
            if segs.fps.is_nan() || segs.fps <= 0.0 || segs.vframes == 0 {
                return Err(invalid(format!("{role}: fps and vframes must be positive")));
            }
            let mut prev = 0;
            for &[b, e] in &segs.intervals {
                if b > e || e >= segs.vframes || b < prev {
                    return Err(invalid(format!(
                        "{role}: interval [{b}, {e}] invalid for {} frames",
                        segs.vframes
                    )));
                }
                prev = b;
            }
            let rows = match (&segs.frame_counts, role) {
                (None, "text_segments") => segs.intervals.len(),
                (Some(counts), "visual_segments") => {
                    if counts.len() != segs.intervals.len() || counts.contains(&0) {
                        return Err(invalid(format!("{role}: frame_counts must be positive, one per interval")));
                    }
                    counts.iter().sum()
                }
                _ => return Err(invalid(format!("{role}: frame_counts only apply to visual segments"))),
            };
            self.expect_dims(
                rec,
                role,
                &segs.embeddings,
                |dims| dims == [rows, width],
                format!("[{rows}, {width}]"),
            )?;
        }

        if let Some(a) = &rec.analysis {
            if let Some(p) = &a.audio_sentiment_probs {
                let sum: f64 = p.iter().sum();
                if p.len() != d.sentiment_classes.len() || p.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-6 {
                    return Err(invalid(format!(
                        "audio_sentiment_probs must be a distribution over {} classes",
                        d.sentiment_classes.len()
                    )));
                }
            }
            if let Some(px) = &a.ocr_text_pixels {
                self.expect_dims(
                    rec,
                    "ocr_text_pixels",
                    px,
                    |dims| dims.len() == 2 && dims[1] == 4,
                    "[P, 4]".into(),
                )?;
            }
        }
        Ok(())
    }

    fn read_matrix(&self, rel: &str) -> Result<ndarray::Array2<f64>> {
        Ok(read_tensor(self.resolve(rel))?.to_array2())
    }

    fn read_segments(&self, rec: &SegmentRecord, modality: Modality) -> Result<SegmentSequence> {
        let rows = self.read_matrix(&rec.embeddings)?;
        let mut segments = Vec::with_capacity(rec.intervals.len());
        let mut offset = 0;
        for (i, &[begin, end]) in rec.intervals.iter().enumerate() {
            let k = rec.frame_counts.as_ref().map_or(1, |c| c[i]);
            segments.push(Segment {
                content: rows.slice(ndarray::s![offset..offset + k, ..]).to_owned(),
                begin,
                end,
            });
            offset += k;
        }
        Ok(SegmentSequence {
            modality,
            segments,
            fps: rec.fps,
            vframes: rec.vframes,
        })
    }

    pub fn load_sample(&self, rec: &SampleRecord) -> Result<NewsVideoSample> {
        let analysis = match &rec.analysis {
            None => AnalysisAnnotations::default(),
            Some(a) => AnalysisAnnotations {
                audio_sentiment_probs: a.audio_sentiment_probs.clone(),
                ocr_text_pixels: a.ocr_text_pixels.as_deref().map(|p| self.read_matrix(p)).transpose()?,
            },
        };
        let sample = NewsVideoSample {
            id: rec.id.clone(),
            published_at: rec.published_at,
            label: rec.label,
            bundle: FeatureBundle {
                sent_audio: self.read_matrix(&rec.blobs.sent_audio)?,
                sent_text: self.read_matrix(&rec.blobs.sent_text)?,
                sem_text: self.read_matrix(&rec.blobs.sem_text)?,
                sem_frames: self.read_matrix(&rec.blobs.sem_frames)?,
                ocr_frame_grid: self.read_matrix(&rec.blobs.ocr_frame_grid)?,
                grid_side: self.dims.grid,
                ocr_boxes: rec.ocr_boxes.clone(),
            },
            text_segments: self.read_segments(&rec.text_segments, Modality::Text)?,
            visual_segments: self.read_segments(&rec.visual_segments, Modality::Visual)?,
            analysis,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn load_samples(&self) -> Result<Vec<NewsVideoSample>> {
        self.records.iter().map(|r| self.load_sample(r)).collect()
    }

    /// Writes the manifest document (not the blobs) to `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = ManifestDocument {
            version: self.version,
            dims: self.dims.clone(),
            records: self.records.clone(),
        };
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&doc)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn grid_blob(bundle: &FeatureBundle) -> TensorBlob {
    let g = bundle.grid_side;
    let width = bundle.ocr_frame_grid.ncols();
    TensorBlob::from_f32(
        vec![g, g, width],
        bundle.ocr_frame_grid.iter().map(|&v| v as f32).collect(),
    )
    .expect("grid shape validated")
}

fn stack_segments(seq: &SegmentSequence) -> ndarray::Array2<f64> {
    let views: Vec<_> = seq.segments.iter().map(|s| s.content.view()).collect();
    ndarray::concatenate(ndarray::Axis(0), &views).expect("uniform widths")
}

/// Writes `samples` as blobs plus `manifest.json` under `dir`.
///
/// Features are stored as `f32`; samples whose values are already
/// `f32`-representable round-trip exactly.
pub fn write_dataset(dir: impl AsRef<Path>, dims: &FeatureDims, samples: &[NewsVideoSample]) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let blob_dir = dir.join("blobs");
    fs::create_dir_all(&blob_dir).map_err(|e| Error::io(&blob_dir, e))?;
    let mut records = Vec::with_capacity(samples.len());
    let mut seen = HashSet::new();
    for (i, s) in samples.iter().enumerate() {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::DuplicateId(s.id.clone()));
        }
        s.validate()?;
        let put = |role: &str, blob: &TensorBlob| -> Result<String> {
            let rel = format!("blobs/{i:06}_{role}.frt");
            write_tensor(blob, dir.join(&rel))?;
            Ok(rel)
        };
        let b = &s.bundle;
        let blobs = BlobPaths {
            sent_audio: put("sent_audio", &TensorBlob::from_array_f32(&b.sent_audio))?,
            sent_text: put("sent_text", &TensorBlob::from_array_f32(&b.sent_text))?,
            sem_text: put("sem_text", &TensorBlob::from_array_f32(&b.sem_text))?,
            sem_frames: put("sem_frames", &TensorBlob::from_array_f32(&b.sem_frames))?,
            ocr_frame_grid: put("ocr_frame_grid", &grid_blob(b))?,
        };
        let text_segments = SegmentRecord {
            fps: s.text_segments.fps,
            vframes: s.text_segments.vframes,
            intervals: s.text_segments.segments.iter().map(|x| [x.begin, x.end]).collect(),
            frame_counts: None,
            embeddings: put("text_segments", &TensorBlob::from_array_f32(&stack_segments(&s.text_segments)))?,
        };
        let visual_segments = SegmentRecord {
            fps: s.visual_segments.fps,
            vframes: s.visual_segments.vframes,
            intervals: s.visual_segments.segments.iter().map(|x| [x.begin, x.end]).collect(),
            frame_counts: Some(s.visual_segments.segments.iter().map(|x| x.content.nrows()).collect()),
            embeddings: put(
                "visual_segments",
                &TensorBlob::from_array_f32(&stack_segments(&s.visual_segments)),
            )?,
        };
        let analysis = if s.analysis == AnalysisAnnotations::default() {
            None
        } else {
            Some(AnalysisRecord {
                audio_sentiment_probs: s.analysis.audio_sentiment_probs.clone(),
                ocr_text_pixels: s
                    .analysis
                    .ocr_text_pixels
                    .as_ref()
                    .map(|px| put("ocr_text_pixels", &TensorBlob::from_array_f32(px)))
                    .transpose()?,
            })
        };
        records.push(SampleRecord {
            id: s.id.clone(),
            published_at: s.published_at,
            label: s.label,
            blobs,
            ocr_boxes: b.ocr_boxes.clone(),
            text_segments,
            visual_segments,
            analysis,
        });
    }
    let manifest = DatasetManifest {
        root: dir.to_path_buf(),
        version: MANIFEST_VERSION,
        dims: dims.clone(),
        records,
    };
    manifest.save(dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
