//! The full detector: selection branch, editing branch and their fusion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{FusionStrategy, ModelConfig};
use crate::error::{Error, Result};
use crate::fusion::fuse;
use crate::meam::{Meam, MeamOutput, TemporalBins};
use crate::msam::{Msam, MsamOutput};
use crate::nn::{load_checkpoint, save_checkpoint, MlpHead};
use crate::store::{FeatureDims, Label, NewsVideoSample};
use crate::tape::{Graph, ParamStore, Var};

#[derive(Debug, Clone)]
pub struct Detector {
    pub config: ModelConfig,
    pub dims: FeatureDims,
    pub bins: Option<TemporalBins>,
    pub store: ParamStore,
    pub msam: Option<Msam>,
    pub meam: Option<Meam>,
    pub early_head: Option<MlpHead>,
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOutput {
    /// Final `(1, 2)` logits.
    pub fused: Var,
    /// Selection-branch logits when that branch has its own head.
    pub selection: Option<Var>,
    /// Editing-branch logits when that branch has its own head.
    pub editing: Option<Var>,
    pub msam: Option<MsamOutput>,
    pub meam: Option<MeamOutput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub logits: [f64; 2],
    pub prob_fake: f64,
    pub label: Label,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointMeta {
    config: ModelConfig,
    dims: FeatureDims,
    bins: Option<TemporalBins>,
}

impl Detector {
    pub fn new(config: ModelConfig, dims: FeatureDims, bins: Option<TemporalBins>) -> Result<Self> {
        config.validate()?;
        let c = config.components;
        let early = config.fusion == FusionStrategy::Early;
        let mut store = ParamStore::new(config.seed);
        let msam = c.selection_active().then(|| Msam::new(&mut store, &config, &dims, !early));
        let meam = if c.editing_active() {
            Some(Meam::new(&mut store, &config, &dims, bins.as_ref(), !early)?)
        } else {
            None
        };
        let early_head = early.then(|| {
            let width = msam.as_ref().map_or(0, |m| m.feature_width(&config)) + Meam::width_for(&config, &dims);
            MlpHead::new(&mut store, "early.head", width, config.head_hidden, config.head_depth, config.dropout)
        });
        Ok(Self {
            config,
            dims,
            bins: if c.tem { bins } else { None },
            store,
            msam,
            meam,
            early_head,
        })
    }

    /// Builds a fresh model, fitting duration bins on `train` when the
    /// temporal branch is enabled.
    pub fn for_training(config: ModelConfig, dims: FeatureDims, train: &[NewsVideoSample]) -> Result<Self> {
        let bins = if config.components.tem {
            Some(TemporalBins::fit(train, config.duration_bins)?)
        } else {
            None
        };
        Self::new(config, dims, bins)
    }

    pub fn param_count(&self) -> usize {
        self.store.scalar_count()
    }

    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, sample: &NewsVideoSample) -> Result<ForwardOutput> {
        self.check_sample(sample)?;
        let msam = match &self.msam {
            Some(m) => Some(m.forward(g, &sample.bundle)?),
            None => None,
        };
        let meam = match &self.meam {
            Some(m) => Some(m.forward(g, &sample.bundle, &sample.text_segments, &sample.visual_segments)?),
            None => None,
        };
        let selection = msam.and_then(|o| o.logits);
        let editing = meam.and_then(|o| o.logits);
        let fused = if let Some(head) = &self.early_head {
            let mut feats = msam.map(|o| o.features()).unwrap_or_default();
            feats.extend(meam.map(|o| o.features()).unwrap_or_default());
            let x = if feats.len() == 1 { feats[0] } else { g.concat_cols(&feats) };
            head.forward(g, x)?
        } else {
            match (selection, editing) {
                (Some(s), Some(e)) => fuse(g, s, e, self.config.fusion)?,
                (Some(s), None) => s,
                (None, Some(e)) => e,
                (None, None) => unreachable!("validated component set"),
            }
        };
        Ok(ForwardOutput {
            fused,
            selection,
            editing,
            msam,
            meam,
        })
    }

    fn check_sample(&self, sample: &NewsVideoSample) -> Result<()> {
        let b = &sample.bundle;
        let d = &self.dims;
        let mismatch = |role: &str, found: usize, expected: usize| Error::DimMismatch {
            id: sample.id.clone(),
            role: role.to_string(),
            found: vec![found],
            expected: format!("width {expected}"),
        };
        for (role, found, expected) in [
            ("sent_audio", b.sent_audio.ncols(), d.sent_audio),
            ("sent_text", b.sent_text.ncols(), d.sent_text),
            ("sem_text", b.sem_text.ncols(), d.sem_text),
            ("sem_frames", b.sem_frames.ncols(), d.sem_frames),
            ("ocr_frame_grid", b.ocr_frame_grid.ncols(), d.image),
            ("grid_side", b.grid_side, d.grid),
        ] {
            if found != expected {
                return Err(mismatch(role, found, expected));
            }
        }
        Ok(())
    }

    pub fn predict(&self, sample: &NewsVideoSample) -> Result<Prediction> {
        let mut g = Graph::new(&self.store);
        let out = self.forward(&mut g, sample)?;
        let v = g.value(out.fused);
        let logits = [v[[0, 0]], v[[0, 1]]];
        let m = logits[0].max(logits[1]);
        let (e0, e1) = ((logits[0] - m).exp(), (logits[1] - m).exp());
        let prob_fake = e1 / (e0 + e1);
        let label = if logits[1] > logits[0] { Label::Fake } else { Label::Real };
        Ok(Prediction {
            logits,
            prob_fake,
            label,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let meta = CheckpointMeta {
            config: self.config.clone(),
            dims: self.dims.clone(),
            bins: self.bins.clone(),
        };
        save_checkpoint(dir, &self.store, &meta)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let (stored, meta): (ParamStore, CheckpointMeta) = load_checkpoint(dir)?;
        let mut model = Self::new(meta.config, meta.dims, meta.bins)?;
        if stored.len() != model.store.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} parameters, model expects {}",
                stored.len(),
                model.store.len()
            )));
        }
        model.store.load_from(&stored)?;
        Ok(model)
    }
}
