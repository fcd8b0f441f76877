//! Scaled dot-product attention, the pre-norm transformer layer and the
//! text/visual co-attention layer.

use super::layers::{LayerNorm, Linear};
use crate::error::{Error, Result};
use crate::tape::{Graph, ParamStore, Var};

/// Multi-head attention `softmax(Q'K'ᵀ/√d)V'` with `Q' = Q·W_Q`,
/// `K' = K·W_K`, `V' = V·W_V`; heads are evaluated on column slices of the
/// projections and concatenated.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Option<Linear>,
    pub heads: usize,
    pub width: usize,
}

pub struct AttentionOutput {
    pub output: Var,
    /// One `(N_q, N_k)` row-stochastic matrix per head.
    pub weights: Vec<Var>,
}

impl MultiHeadAttention {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        q_in: usize,
        kv_in: usize,
        width: usize,
        heads: usize,
        out_projection: bool,
    ) -> Self {
        assert!(heads >= 1 && width.is_multiple_of(heads), "width {width} not divisible by {heads} heads");
        Self {
            q: Linear::new(store, &format!("{name}.q"), q_in, width),
            // A key bias shifts every logit of a query equally, so it is omitted.
            k: Linear::without_bias(store, &format!("{name}.k"), kv_in, width),
            v: Linear::new(store, &format!("{name}.v"), kv_in, width),
            out: out_projection.then(|| Linear::new(store, &format!("{name}.out"), width, width)),
            heads,
            width,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.width / self.heads
    }

    pub fn forward(&self, g: &mut Graph, q: Var, k: Var, v: Var) -> Result<Var> {
        Ok(self.forward_with_weights(g, q, k, v)?.output)
    }

    pub fn forward_with_weights(&self, g: &mut Graph, q: Var, k: Var, v: Var) -> Result<AttentionOutput> {
        let (nk, _) = g.shape(k);
        if nk == 0 || g.shape(q).0 == 0 {
            return Err(Error::Empty("attention over an empty sequence".into()));
        }
        if g.shape(v).0 != nk {
            return Err(Error::Shape(format!(
                "keys ({nk}) and values ({}) differ in length",
                g.shape(v).0
            )));
        }
        let qp = self.q.forward(g, q)?;
        let kp = self.k.forward(g, k)?;
        let vp = self.v.forward(g, v)?;
        let d = self.head_dim();
        let scale = 1.0 / (d as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (qh, kh, vh) = if self.heads == 1 {
                (qp, kp, vp)
            } else {
                (
                    g.slice_cols(qp, h * d, d),
                    g.slice_cols(kp, h * d, d),
                    g.slice_cols(vp, h * d, d),
                )
            };
            let scores = g.matmul_t(qh, kh);
            let scores = g.scale(scores, scale);
            let attn = g.softmax_rows(scores);
            weights.push(attn);
            outs.push(g.matmul(attn, vh));
        }
        let mut output = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs) };
        if let Some(out) = &self.out {
            output = out.forward(g, output)?;
        }
        Ok(AttentionOutput { output, weights })
    }
}

/// Pre-norm transformer layer: `x + SA(LN(x))` then `x + FFN(LN(x))`.
#[derive(Debug, Clone)]
pub struct TransformerLayer {
    pub ln_attn: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln_ffn: LayerNorm,
    pub ffn_in: Linear,
    pub ffn_out: Linear,
    pub width: usize,
}

impl TransformerLayer {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, heads: usize, ffn_dim: usize) -> Self {
        Self {
            ln_attn: LayerNorm::new(store, &format!("{name}.ln_attn"), width),
            attn: MultiHeadAttention::new(store, &format!("{name}.attn"), width, width, width, heads, true),
            ln_ffn: LayerNorm::new(store, &format!("{name}.ln_ffn"), width),
            ffn_in: Linear::new(store, &format!("{name}.ffn_in"), width, ffn_dim),
            ffn_out: Linear::new(store, &format!("{name}.ffn_out"), ffn_dim, width),
            width,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let (n, w) = g.shape(x);
        if n == 0 {
            return Err(Error::Empty("transformer input has no tokens".into()));
        }
        if w != self.width {
            return Err(Error::Shape(format!("transformer expects width {}, got {w}", self.width)));
        }
        let h = self.ln_attn.forward(g, x)?;
        let a = self.attn.forward(g, h, h, h)?;
        let x = g.add(x, a);
        let h = self.ln_ffn.forward(g, x)?;
        let h = self.ffn_in.forward(g, h)?;
        let h = g.gelu(h);
        let h = self.ffn_out.forward(g, h)?;
        Ok(g.add(x, h))
    }
}

/// Two parallel cross-attention streams with residual and layer norm:
/// text attends to visual tokens and visual attends to text tokens.
#[derive(Debug, Clone)]
pub struct CoAttention {
    pub text_attn: MultiHeadAttention,
    pub visual_attn: MultiHeadAttention,
    pub text_ln: LayerNorm,
    pub visual_ln: LayerNorm,
}

impl CoAttention {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, heads: usize) -> Self {
        Self {
            text_attn: MultiHeadAttention::new(store, &format!("{name}.text_attn"), width, width, width, heads, true),
            visual_attn: MultiHeadAttention::new(
                store,
                &format!("{name}.visual_attn"),
                width,
                width,
                width,
                heads,
                true,
            ),
            text_ln: LayerNorm::new(store, &format!("{name}.text_ln"), width),
            visual_ln: LayerNorm::new(store, &format!("{name}.visual_ln"), width),
        }
    }

    pub fn forward(&self, g: &mut Graph, text: Var, visual: Var) -> Result<(Var, Var)> {
        if g.shape(text).0 == 0 || g.shape(visual).0 == 0 {
            return Err(Error::Empty("co-attention needs both streams non-empty".into()));
        }
        let t = self.text_attn.forward(g, text, visual, visual)?;
        let t = g.add(text, t);
        let t = self.text_ln.forward(g, t)?;
        let v = self.visual_attn.forward(g, visual, text, text)?;
        let v = g.add(visual, v);
        let v = self.visual_ln.forward(g, v)?;
        Ok((t, v))
    }
}
