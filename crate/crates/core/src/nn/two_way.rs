//! Prompt/image two-way attention block.

use super::attention::MultiHeadAttention;
use super::layers::{LayerNorm, Linear};
use crate::error::{Error, Result};
use crate::tape::{Graph, ParamStore, Var};

/// One two-way block. In order:
/// 1. prompt self-attention, residual, LN
/// 2. prompt-to-image cross-attention, residual, LN
/// 3. prompt MLP (ReLU), residual, LN
/// 4. image-to-prompt cross-attention, residual, LN
#[derive(Debug, Clone)]
pub struct TwoWayBlock {
    pub self_attn: MultiHeadAttention,
    pub ln_self: LayerNorm,
    pub prompt_to_image: MultiHeadAttention,
    pub ln_cross_prompt: LayerNorm,
    pub mlp_in: Linear,
    pub mlp_out: Linear,
    pub ln_mlp: LayerNorm,
    pub image_to_prompt: MultiHeadAttention,
    pub ln_cross_image: LayerNorm,
    pub width: usize,
}

impl TwoWayBlock {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, heads: usize, mlp_dim: usize) -> Self {
        let attn = |store: &mut ParamStore, part: &str| {
            MultiHeadAttention::new(store, &format!("{name}.{part}"), width, width, width, heads, true)
        };
        let ln = |store: &mut ParamStore, part: &str| LayerNorm::new(store, &format!("{name}.{part}"), width);
        Self {
            self_attn: attn(store, "self_attn"),
            ln_self: ln(store, "ln_self"),
            prompt_to_image: attn(store, "prompt_to_image"),
            ln_cross_prompt: ln(store, "ln_cross_prompt"),
            mlp_in: Linear::new(store, &format!("{name}.mlp_in"), width, mlp_dim),
            mlp_out: Linear::new(store, &format!("{name}.mlp_out"), mlp_dim, width),
            ln_mlp: ln(store, "ln_mlp"),
            image_to_prompt: attn(store, "image_to_prompt"),
            ln_cross_image: ln(store, "ln_cross_image"),
            width,
        }
    }

    pub fn forward(&self, g: &mut Graph, prompt: Var, image: Var) -> Result<(Var, Var)> {
        for (what, v) in [("prompt", prompt), ("image", image)] {
            let (n, w) = g.shape(v);
            if w != self.width {
                return Err(Error::Shape(format!(
                    "two-way block expects {what} width {}, got {w}",
                    self.width
                )));
            }
            if n == 0 {
                return Err(Error::Empty(format!("two-way block got no {what} tokens")));
            }
        }
        let a = self.self_attn.forward(g, prompt, prompt, prompt)?;
        let p = g.add(prompt, a);
        let p = self.ln_self.forward(g, p)?;

        let a = self.prompt_to_image.forward(g, p, image, image)?;
        let p = g.add(p, a);
        let p = self.ln_cross_prompt.forward(g, p)?;

        let h = self.mlp_in.forward(g, p)?;
        let h = g.relu(h);
        let h = self.mlp_out.forward(g, h)?;
        let p = g.add(p, h);
        let p = self.ln_mlp.forward(g, p)?;

        let a = self.image_to_prompt.forward(g, image, p, p)?;
        let i = g.add(image, a);
        let i = self.ln_cross_image.forward(g, i)?;
        Ok((p, i))
    }
}
