//! Material-selection branch: audio/text sentiment fusion and text/keyframe
//! semantic fusion.

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::{CoAttention, Linear, MlpHead, TransformerLayer};
use crate::store::{FeatureBundle, FeatureDims};
use crate::tape::{Graph, ParamStore, Var};

#[derive(Debug, Clone)]
pub struct SentimentBranch {
    pub audio_proj: Linear,
    pub text_proj: Linear,
    pub fusion: TransformerLayer,
}

impl SentimentBranch {
    pub fn new(store: &mut ParamStore, cfg: &ModelConfig, audio_dim: usize, text_dim: usize) -> Self {
        let d = cfg.model_dim;
        Self {
            audio_proj: Linear::new(store, "msam.sen.audio_proj", audio_dim, d),
            text_proj: Linear::new(store, "msam.sen.text_proj", text_dim, d),
            fusion: TransformerLayer::new(store, "msam.sen.fusion", d, cfg.heads, cfg.ffn_dim),
        }
    }

    /// `(1, model_dim)` pooled sentiment feature.
    pub fn forward(&self, g: &mut Graph, audio: Var, text: Var) -> Result<Var> {
        if g.shape(audio).0 == 0 || g.shape(text).0 == 0 {
            return Err(Error::Empty("sentiment branch needs audio and text tokens".into()));
        }
        let a = self.audio_proj.forward(g, audio)?;
        let t = self.text_proj.forward(g, text)?;
        let tokens = g.concat_rows(&[a, t]);
        let h = self.fusion.forward(g, tokens)?;
        Ok(g.mean_rows(h))
    }
}

#[derive(Debug, Clone)]
pub struct SemanticBranch {
    pub text_proj: Linear,
    pub frame_proj: Linear,
    pub co_attention: CoAttention,
    pub fusion: TransformerLayer,
}

impl SemanticBranch {
    pub fn new(store: &mut ParamStore, cfg: &ModelConfig, text_dim: usize, frame_dim: usize) -> Self {
        let d = cfg.model_dim;
        Self {
            text_proj: Linear::new(store, "msam.sem.text_proj", text_dim, d),
            frame_proj: Linear::new(store, "msam.sem.frame_proj", frame_dim, d),
            co_attention: CoAttention::new(store, "msam.sem.co_attention", d, cfg.co_attention_heads),
            fusion: TransformerLayer::new(store, "msam.sem.fusion", d, cfg.heads, cfg.ffn_dim),
        }
    }

    pub fn forward(&self, g: &mut Graph, text: Var, frames: Var) -> Result<Var> {
        if g.shape(text).0 == 0 || g.shape(frames).0 == 0 {
            return Err(Error::Empty("semantic branch needs text and frame tokens".into()));
        }
        let t = self.text_proj.forward(g, text)?;
        let v = self.frame_proj.forward(g, frames)?;
        let (t, v) = self.co_attention.forward(g, t, v)?;
        let t = g.mean_rows(t);
        let v = g.mean_rows(v);
        let pair = g.concat_rows(&[t, v]);
        let h = self.fusion.forward(g, pair)?;
        Ok(g.mean_rows(h))
    }
}

#[derive(Debug, Clone)]
pub struct Msam {
    pub sentiment: Option<SentimentBranch>,
    pub semantic: Option<SemanticBranch>,
    /// Absent when the branch only feeds an early-fusion head.
    pub head: Option<MlpHead>,
}

#[derive(Debug, Clone, Copy)]
pub struct MsamOutput {
    pub logits: Option<Var>,
    pub sentiment: Option<Var>,
    pub semantic: Option<Var>,
}

impl MsamOutput {
    pub fn features(&self) -> Vec<Var> {
        [self.sentiment, self.semantic].into_iter().flatten().collect()
    }
}

impl Msam {
    pub fn new(store: &mut ParamStore, cfg: &ModelConfig, dims: &FeatureDims, with_head: bool) -> Self {
        let c = cfg.components;
        let sentiment = c.sen.then(|| SentimentBranch::new(store, cfg, dims.sent_audio, dims.sent_text));
        let semantic = c.sem.then(|| SemanticBranch::new(store, cfg, dims.sem_text, dims.sem_frames));
        let width = cfg.model_dim * (c.sen as usize + c.sem as usize);
        let head = with_head
            .then(|| MlpHead::new(store, "msam.head", width, cfg.head_hidden, cfg.head_depth, cfg.dropout));
        Self {
            sentiment,
            semantic,
            head,
        }
    }

    pub fn feature_width(&self, cfg: &ModelConfig) -> usize {
        cfg.model_dim * (self.sentiment.is_some() as usize + self.semantic.is_some() as usize)
    }

    pub fn forward(&self, g: &mut Graph, bundle: &FeatureBundle) -> Result<MsamOutput> {
        let sentiment = match &self.sentiment {
            Some(b) => {
                let a = g.input(bundle.sent_audio.clone());
                let t = g.input(bundle.sent_text.clone());
                Some(b.forward(g, a, t)?)
            }
            None => None,
        };
        let semantic = match &self.semantic {
            Some(b) => {
                let t = g.input(bundle.sem_text.clone());
                let v = g.input(bundle.sem_frames.clone());
                Some(b.forward(g, t, v)?)
            }
            None => None,
        };
        let mut out = MsamOutput {
            logits: None,
            sentiment,
            semantic,
        };
        if let Some(head) = &self.head {
            let feats = out.features();
            let x = if feats.len() == 1 { feats[0] } else { g.concat_cols(&feats) };
            out.logits = Some(head.forward(g, x)?);
        }
        Ok(out)
    }
}
