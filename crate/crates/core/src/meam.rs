//! Material-editing branch: on-screen text layout (spatial) and segment
//! splicing (temporal).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::downsample::output_width;
use crate::nn::{
    positional_matrix, BoxPromptEncoder, Downsampler, DurationBinner, DurationEncoder, Linear, MlpHead,
    MultiHeadAttention, TransformerLayer, TwoWayBlock,
};
use crate::store::{FeatureBundle, FeatureDims, Modality, NewsVideoSample, SegmentSequence, TextBox};
use crate::tape::{Graph, ParamId, ParamStore, Var};

/// Box-prompted refinement of the text-rich frame followed by downsampling.
#[derive(Debug, Clone)]
pub struct SpatialBranch {
    pub grid_proj: Linear,
    pub prompt: BoxPromptEncoder,
    pub blocks: Vec<TwoWayBlock>,
    pub downsample: Downsampler,
    pub grid: usize,
    /// Frozen positions of the patch centres, added to the image tokens.
    grid_positions: Array2<f64>,
}

impl SpatialBranch {
    pub fn new(store: &mut ParamStore, cfg: &ModelConfig, image_dim: usize, grid: usize) -> Self {
        let w = cfg.spatial_dim;
        let prompt = BoxPromptEncoder::new(store, "meam.spa.prompt", w, cfg.seed.wrapping_add(1));
        let grid_positions = prompt.fourier.grid(grid);
        Self {
            grid_proj: Linear::new(store, "meam.spa.grid_proj", image_dim, w),
            prompt,
            blocks: (0..cfg.two_way_blocks)
                .map(|i| TwoWayBlock::new(store, &format!("meam.spa.two_way{i}"), w, cfg.spatial_heads, cfg.two_way_mlp_dim))
                .collect(),
            downsample: Downsampler::new(store, "meam.spa.downsample", w, cfg.conv_channels, cfg.conv_kernel),
            grid,
            grid_positions,
        }
    }

    pub fn output_width(&self) -> usize {
        self.downsample.output_width(self.grid)
    }

    /// `grid` is `(G·G, D_img)`; returns `(1, output_width)`.
    pub fn forward(&self, g: &mut Graph, grid: &Array2<f64>, boxes: &[TextBox]) -> Result<Var> {
        if grid.nrows() != self.grid * self.grid {
            return Err(Error::Shape(format!(
                "spatial branch expects a {0}x{0} grid, got {1} patches",
                self.grid,
                grid.nrows()
            )));
        }
        let x = g.input(grid.clone());
        let img = self.grid_proj.forward(g, x)?;
        let pos = g.input(self.grid_positions.clone());
        let mut img = g.add(img, pos);
        let mut prompt = self.prompt.forward(g, boxes)?;
        for block in &self.blocks {
            (prompt, img) = block.forward(g, prompt, img)?;
        }
        self.downsample.forward(g, img, self.grid)
    }
}

/// Hierarchical temporal structure extractor for one modality.
#[derive(Debug, Clone)]
pub struct Htse {
    pub modality: Modality,
    pub proj: Linear,
    /// Single-head attention over the frames of a visual segment.
    pub intra: Option<MultiHeadAttention>,
    pub durations: DurationEncoder,
    pub inter: MultiHeadAttention,
    pub width: usize,
}

impl Htse {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        cfg: &ModelConfig,
        modality: Modality,
        in_dim: usize,
        binner: DurationBinner,
    ) -> Self {
        let d = cfg.model_dim;
        Self {
            modality,
            proj: Linear::new(store, &format!("{name}.proj"), in_dim, d),
            intra: (modality == Modality::Visual)
                .then(|| MultiHeadAttention::new(store, &format!("{name}.intra"), d, d, d, 1, false)),
            durations: DurationEncoder::new(store, &format!("{name}.durations"), binner, d),
            inter: MultiHeadAttention::new(store, &format!("{name}.inter"), d, d, d, cfg.heads, true),
            width: d,
        }
    }

    /// Per-segment content features, one row per segment.
    pub fn segment_features(&self, g: &mut Graph, seq: &SegmentSequence) -> Result<Var> {
        let rows = seq
            .segments
            .iter()
            .map(|seg| {
                let x = g.input(seg.content.clone());
                let p = self.proj.forward(g, x)?;
                match &self.intra {
                    Some(attn) => {
                        let h = attn.forward(g, p, p, p)?;
                        Ok(g.mean_rows(h))
                    }
                    None => Ok(p),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(if rows.len() == 1 { rows[0] } else { g.concat_rows(&rows) })
    }

    /// `(1, width)` temporal feature of the sequence.
    pub fn forward(&self, g: &mut Graph, seq: &SegmentSequence) -> Result<Var> {
        if seq.is_empty() {
            return Err(Error::Empty(format!("{:?} sequence has no segments", seq.modality)));
        }
        seq.validate().map_err(Error::InvalidArgument)?;
        if seq.modality != self.modality {
            return Err(Error::InvalidArgument(format!(
                "{:?} extractor given a {:?} sequence",
                self.modality, seq.modality
            )));
        }
        let content = self.segment_features(g, seq)?;
        let pe = g.input(positional_matrix(seq.len(), self.width)?);
        let de = self.durations.forward(g, &seq.durations())?;
        let x = g.add(content, pe);
        let x = g.add(x, de);
        let h = self.inter.forward(g, x, x, x)?;
        Ok(g.mean_rows(h))
    }
}

/// Duration bins per modality, fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalBins {
    pub text: DurationBinner,
    pub visual: DurationBinner,
}

impl TemporalBins {
    pub fn fit(samples: &[NewsVideoSample], n_bins: usize) -> Result<Self> {
        let collect = |f: fn(&NewsVideoSample) -> &SegmentSequence| -> Vec<(f64, f64)> {
            samples.iter().flat_map(|s| f(s).durations()).collect()
        };
        Ok(Self {
            text: DurationBinner::fit(&collect(|s| &s.text_segments), n_bins)?,
            visual: DurationBinner::fit(&collect(|s| &s.visual_segments), n_bins)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TemporalBranch {
    pub text: Htse,
    pub visual: Htse,
    /// Two rows: text, visual.
    pub modality_tags: ParamId,
    pub fusion: TransformerLayer,
}

impl TemporalBranch {
    pub fn new(store: &mut ParamStore, cfg: &ModelConfig, dims: &FeatureDims, bins: &TemporalBins) -> Self {
        let d = cfg.model_dim;
        Self {
            text: Htse::new(store, "meam.tem.text", cfg, Modality::Text, dims.sem_text, bins.text.clone()),
            visual: Htse::new(store, "meam.tem.visual", cfg, Modality::Visual, dims.sem_frames, bins.visual.clone()),
            modality_tags: store.normal("meam.tem.modality_tags", 2, d, 0.02),
            fusion: TransformerLayer::new(store, "meam.tem.fusion", d, cfg.heads, cfg.ffn_dim),
        }
    }

    pub fn forward(&self, g: &mut Graph, text: &SegmentSequence, visual: &SegmentSequence) -> Result<Var> {
        let t = self.text.forward(g, text)?;
        let v = self.visual.forward(g, visual)?;
        let pair = g.concat_rows(&[t, v]);
        let tags = g.param(self.modality_tags);
        let pair = g.add(pair, tags);
        let h = self.fusion.forward(g, pair)?;
        Ok(g.mean_rows(h))
    }
}

#[derive(Debug, Clone)]
pub struct Meam {
    pub spatial: Option<SpatialBranch>,
    pub temporal: Option<TemporalBranch>,
    pub head: Option<MlpHead>,
}

#[derive(Debug, Clone, Copy)]
pub struct MeamOutput {
    pub logits: Option<Var>,
    pub spatial: Option<Var>,
    pub temporal: Option<Var>,
}

impl MeamOutput {
    pub fn features(&self) -> Vec<Var> {
        [self.spatial, self.temporal].into_iter().flatten().collect()
    }
}

impl Meam {
    pub fn new(
        store: &mut ParamStore,
        cfg: &ModelConfig,
        dims: &FeatureDims,
        bins: Option<&TemporalBins>,
        with_head: bool,
    ) -> Result<Self> {
        let c = cfg.components;
        let spatial = c.spa.then(|| SpatialBranch::new(store, cfg, dims.image, dims.grid));
        let temporal = match (c.tem, bins) {
            (true, Some(bins)) => Some(TemporalBranch::new(store, cfg, dims, bins)),
            (true, None) => return Err(Error::InvalidArgument("temporal branch needs fitted duration bins".into())),
            (false, _) => None,
        };
        let width = Self::width_for(cfg, dims);
        let head = with_head
            .then(|| MlpHead::new(store, "meam.head", width, cfg.head_hidden, cfg.head_depth, cfg.dropout));
        Ok(Self {
            spatial,
            temporal,
            head,
        })
    }

    pub fn width_for(cfg: &ModelConfig, dims: &FeatureDims) -> usize {
        let c = cfg.components;
        let spa = if c.spa { output_width(dims.grid, cfg.conv_kernel, cfg.conv_channels) } else { 0 };
        let tem = if c.tem { cfg.model_dim } else { 0 };
        spa + tem
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        bundle: &FeatureBundle,
        text: &SegmentSequence,
        visual: &SegmentSequence,
    ) -> Result<MeamOutput> {
        let spatial = match &self.spatial {
            Some(b) => Some(b.forward(g, &bundle.ocr_frame_grid, &bundle.ocr_boxes)?),
            None => None,
        };
        let temporal = match &self.temporal {
            Some(b) => Some(b.forward(g, text, visual)?),
            None => None,
        };
        let mut out = MeamOutput {
            logits: None,
            spatial,
            temporal,
        };
        if let Some(head) = &self.head {
            let feats = out.features();
            let x = if feats.len() == 1 { feats[0] } else { g.concat_cols(&feats) };
            out.logits = Some(head.forward(g, x)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::check_gradients;
    use crate::store::{synthesize, Segment, SynthSpec};
    use ndarray::array;

    fn toy_config() -> ModelConfig {
        ModelConfig {
            model_dim: 8,
            heads: 2,
            ffn_dim: 16,
            spatial_dim: 8,
            spatial_heads: 2,
            two_way_mlp_dim: 12,
            conv_channels: [4, 2],
            head_hidden: 8,
            duration_bins: 3,
            ..Default::default()
        }
    }

    fn toy_spec() -> SynthSpec {
        let mut spec = SynthSpec {
            n_samples: 6,
            ..Default::default()
        };
        spec.dims.sem_text = 6;
        spec.dims.sem_frames = 6;
        spec.dims.image = 6;
        spec
    }

    fn toy_text_sequence(contents: &[[f64; 6]], intervals: &[(u32, u32)]) -> SegmentSequence {
        SegmentSequence {
            modality: Modality::Text,
            segments: contents
                .iter()
                .zip(intervals)
                .map(|(c, &(begin, end))| Segment {
                    content: Array2::from_shape_vec((1, 6), c.to_vec()).unwrap(),
                    begin,
                    end,
                })
                .collect(),
            fps: 25.0,
            vframes: 500,
        }
    }

    fn toy_binner() -> DurationBinner {
        let pairs: Vec<(f64, f64)> = (1..=9).map(|i| (i as f64, i as f64 / 10.0)).collect();
        DurationBinner::fit(&pairs, 3).unwrap()
    }

    #[test]
    fn spatial_widths() {
        let mut store = ParamStore::new(1);
        let cfg = ModelConfig {
            two_way_mlp_dim: 256,
            ..Default::default()
        };
        let branch = SpatialBranch::new(&mut store, &cfg, 16, 14);
        assert_eq!(branch.output_width(), 512);
        let grid = Array2::from_shape_fn((196, 16), |(r, c)| ((r + 3 * c) as f64 * 0.1).sin());
        let boxes: Vec<TextBox> = vec![
            [0.1, 0.1, 0.4, 0.2].into(),
            [0.5, 0.5, 0.9, 0.7].into(),
            [0.0, 0.8, 1.0, 1.0].into(),
        ];
        let mut g = Graph::new(&store);
        let h = branch.forward(&mut g, &grid, &boxes).unwrap();
        assert_eq!(g.shape(h), (1, 512));
        let h = branch.forward(&mut g, &grid, &[]).unwrap();
        assert_eq!(g.shape(h), (1, 512));
        assert!(g.value(h).iter().all(|v| v.is_finite()));
    }

    /// Straight-line evaluation of the text extractor: projected content plus
    /// sinusoidal position plus looked-up duration rows, then multi-head
    /// self-attention with output projection, then the mean over segments.
    fn reference_text_htse(store: &ParamStore, h: &Htse, seq: &SegmentSequence) -> Vec<f64> {
        let d = h.width;
        let n = seq.len();
        let lin = |x: &Array2<f64>, l: &Linear| {
            let mut y = x.dot(store.get(l.weight));
            if let Some(b) = l.bias {
                y += store.get(b);
            }
            y
        };
        let mut x = Array2::<f64>::zeros((n, d));
        for (i, seg) in seq.segments.iter().enumerate() {
            let p = lin(&seg.content, &h.proj);
            let abs = (seg.end - seg.begin) as f64 / seq.fps;
            let rel = (seg.end - seg.begin) as f64 / seq.vframes as f64;
            let (ga, gr) = h.durations.binner.groups(abs, rel);
            for c in 0..d {
                let k = (c / 2) as f64;
                let w = 1.0 / 10000f64.powf(2.0 * k / d as f64);
                let pe = if c % 2 == 0 { (i as f64 * w).sin() } else { (i as f64 * w).cos() };
                let de = if c < d / 2 {
                    store.get(h.durations.absolute)[[ga, c]]
                } else {
                    store.get(h.durations.relative)[[gr, c - d / 2]]
                };
                x[[i, c]] = p[[0, c]] + pe + de;
            }
        }
        let (q, k, v) = (lin(&x, &h.inter.q), lin(&x, &h.inter.k), lin(&x, &h.inter.v));
        let hd = d / h.inter.heads;
        let mut concat = Array2::<f64>::zeros((n, d));
        for head in 0..h.inter.heads {
            for i in 0..n {
                let logits: Vec<f64> = (0..n)
                    .map(|j| (0..hd).map(|c| q[[i, head * hd + c]] * k[[j, head * hd + c]]).sum::<f64>() / (hd as f64).sqrt())
                    .collect();
                let m = logits.iter().cloned().fold(f64::MIN, f64::max);
                let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
                for j in 0..n {
                    let a = (logits[j] - m).exp() / z;
                    for c in 0..hd {
                        concat[[i, head * hd + c]] += a * v[[j, head * hd + c]];
                    }
                }
            }
        }
        let out = lin(&concat, h.inter.out.as_ref().unwrap());
        (0..d).map(|c| out.column(c).sum() / n as f64).collect()
    }

    #[test]
    fn text_htse_matches_reference() {
        let cfg = toy_config();
        let mut store = ParamStore::new(2);
        let htse = Htse::new(&mut store, "htse", &cfg, Modality::Text, 6, toy_binner());
        let seq = toy_text_sequence(
            &[[0.1, -0.2, 0.3, 0.0, 1.0, -1.0], [0.5, 0.5, -0.5, 0.2, 0.1, 0.0], [-0.3, 0.8, 0.0, 0.4, -0.6, 0.9]],
            &[(0, 50), (100, 130), (200, 480)],
        );
        let mut g = Graph::new(&store);
        let out = htse.forward(&mut g, &seq).unwrap();
        let expected = reference_text_htse(&store, &htse, &seq);
        for (a, b) in g.value(out).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn segment_order_and_intervals_matter() {
        let cfg = toy_config();
        let mut store = ParamStore::new(3);
        let htse = Htse::new(&mut store, "htse", &cfg, Modality::Text, 6, toy_binner());
        let a = [0.1, -0.2, 0.3, 0.0, 1.0, -1.0];
        let b = [0.5, 0.5, -0.5, 0.2, 0.1, 0.0];
        let mut g = Graph::new(&store);
        let fwd = toy_text_sequence(&[a, b], &[(0, 50), (100, 400)]);
        let swapped = toy_text_sequence(&[b, a], &[(0, 50), (100, 400)]);
        let same_content = toy_text_sequence(&[a, a], &[(0, 50), (100, 400)]);
        let other_intervals = toy_text_sequence(&[a, a], &[(0, 400), (450, 460)]);
        let outs: Vec<Array2<f64>> = [fwd, swapped, same_content, other_intervals]
            .iter()
            .map(|s| {
                let v = htse.forward(&mut g, s).unwrap();
                g.value(v).clone()
            })
            .collect();
        assert_ne!(outs[0], outs[1]);
        assert_ne!(outs[2], outs[3]);
    }

    #[test]
    fn frame_order_within_segment_does_not_matter() {
        let cfg = toy_config();
        let mut store = ParamStore::new(4);
        let htse = Htse::new(&mut store, "htse", &cfg, Modality::Visual, 6, toy_binner());
        let frames = Array2::from_shape_fn((3, 6), |(r, c)| ((r * 6 + c) as f64 * 0.41).cos());
        let reversed = Array2::from_shape_fn((3, 6), |(r, c)| frames[[2 - r, c]]);
        let seq = |content: Array2<f64>| SegmentSequence {
            modality: Modality::Visual,
            segments: vec![Segment {
                content,
                begin: 10,
                end: 90,
            }],
            fps: 30.0,
            vframes: 300,
        };
        let mut g = Graph::new(&store);
        let a = htse.forward(&mut g, &seq(frames)).unwrap();
        let b = htse.forward(&mut g, &seq(reversed)).unwrap();
        for (x, y) in g.value(a).iter().zip(g.value(b).iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_empty_and_out_of_range_sequences() {
        let cfg = toy_config();
        let mut store = ParamStore::new(4);
        let htse = Htse::new(&mut store, "htse", &cfg, Modality::Text, 6, toy_binner());
        let mut g = Graph::new(&store);
        let empty = toy_text_sequence(&[], &[]);
        assert!(matches!(htse.forward(&mut g, &empty), Err(Error::Empty(_))));
        let outside = toy_text_sequence(&[[0.0; 6]], &[(10, 600)]);
        assert!(htse.forward(&mut g, &outside).is_err());
    }

    #[test]
    fn modality_swap_changes_temporal_feature() {
        let spec = toy_spec();
        let corpus = synthesize(&spec, 5).unwrap();
        let cfg = toy_config();
        let bins = TemporalBins::fit(&corpus.samples, cfg.duration_bins).unwrap();
        let mut store = ParamStore::new(5);
        let branch = TemporalBranch::new(&mut store, &cfg, &spec.dims, &bins);
        let s = &corpus.samples[0];
        let mut g = Graph::new(&store);
        let h = branch.forward(&mut g, &s.text_segments, &s.visual_segments).unwrap();
        assert_eq!(g.shape(h), (1, 8));
        let t = branch.text.forward(&mut g, &s.text_segments).unwrap();
        let v = branch.visual.forward(&mut g, &s.visual_segments).unwrap();
        let tags = g.param(branch.modality_tags);
        let mut outs = Vec::new();
        for pair in [[t, v], [v, t]] {
            let p = g.concat_rows(&pair);
            let p = g.add(p, tags);
            let f = branch.fusion.forward(&mut g, p).unwrap();
            let m = g.mean_rows(f);
            outs.push(g.value(m).clone());
        }
        assert_eq!(&outs[0], g.value(h));
        assert_ne!(outs[0], outs[1]);
    }

    #[test]
    fn audio_plays_no_role() {
        let spec = toy_spec();
        let corpus = synthesize(&spec, 6).unwrap();
        let cfg = toy_config();
        let bins = TemporalBins::fit(&corpus.samples, cfg.duration_bins).unwrap();
        let mut store = ParamStore::new(6);
        let meam = Meam::new(&mut store, &cfg, &spec.dims, Some(&bins), true).unwrap();
        let s = &corpus.samples[1];
        let mut perturbed = s.bundle.clone();
        perturbed.sent_audio.mapv_inplace(|v| v * 5.0 + 1.0);
        let mut g = Graph::new(&store);
        let a = meam.forward(&mut g, &s.bundle, &s.text_segments, &s.visual_segments).unwrap();
        let b = meam.forward(&mut g, &perturbed, &s.text_segments, &s.visual_segments).unwrap();
        assert_eq!(g.value(a.logits.unwrap()), g.value(b.logits.unwrap()));
        assert_eq!(g.shape(a.logits.unwrap()), (1, 2));
    }

    #[test]
    fn zero_head_gives_zero_logits() {
        let spec = toy_spec();
        let corpus = synthesize(&spec, 7).unwrap();
        let cfg = toy_config();
        let bins = TemporalBins::fit(&corpus.samples, cfg.duration_bins).unwrap();
        let mut store = ParamStore::new(7);
        let meam = Meam::new(&mut store, &cfg, &spec.dims, Some(&bins), true).unwrap();
        let last = meam.head.as_ref().unwrap().layers.last().unwrap();
        store.get_mut(last.weight).fill(0.0);
        let s = &corpus.samples[0];
        let mut g = Graph::new(&store);
        let out = meam.forward(&mut g, &s.bundle, &s.text_segments, &s.visual_segments).unwrap();
        assert_eq!(g.value(out.logits.unwrap()), &array![[0.0, 0.0]]);
    }

    #[test]
    fn spatial_branch_gradients() {
        let cfg = toy_config();
        let mut store = ParamStore::new(8);
        let branch = SpatialBranch::new(&mut store, &cfg, 6, 4);
        let grid = Array2::from_shape_fn((16, 6), |(r, c)| ((r * 6 + c) as f64 * 0.29).sin());
        let boxes: Vec<TextBox> = vec![[0.1, 0.2, 0.6, 0.4].into()];
        let w = Array2::from_shape_fn((1, branch.output_width()), |(_, c)| c as f64 * 0.3 - 0.4);
        let report = check_gradients(&mut store, None, |g| {
            let h = branch.forward(g, &grid, &boxes).unwrap();
            let wi = g.input(w.clone());
            let h = g.mul(h, wi);
            g.sum_all(h)
        });
        assert!(report.passes(1e-4), "{report:?}");
    }

    #[test]
    fn full_branch_gradients() {
        let spec = toy_spec();
        let corpus = synthesize(&spec, 9).unwrap();
        let cfg = toy_config();
        let bins = TemporalBins::fit(&corpus.samples, cfg.duration_bins).unwrap();
        let mut store = ParamStore::new(9);
        let meam = Meam::new(&mut store, &cfg, &spec.dims, Some(&bins), true).unwrap();
        let s = &corpus.samples[2];
        let report = check_gradients(&mut store, None, |g| {
            let out = meam.forward(g, &s.bundle, &s.text_segments, &s.visual_segments).unwrap();
            g.cross_entropy(out.logits.unwrap(), 0)
        });
        assert!(report.passes(1e-4), "{report:?}");
    }
}
