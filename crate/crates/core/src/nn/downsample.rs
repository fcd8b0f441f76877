//! Two strided convolutions reducing the refined image grid to one vector.

use super::layers::LayerNorm;
use crate::error::{Error, Result};
use crate::tape::{ConvGeometry, Graph, ParamId, ParamStore, Var};

pub const STRIDE: usize = 2;
pub const PADDING: usize = 1;

/// Conv → LN → GELU → Conv → GELU → flatten.
#[derive(Debug, Clone)]
pub struct Downsampler {
    pub conv1_weight: ParamId,
    pub conv1_bias: ParamId,
    pub norm: LayerNorm,
    pub conv2_weight: ParamId,
    pub conv2_bias: ParamId,
    pub kernel: usize,
    pub in_channels: usize,
    pub channels: [usize; 2],
}

/// Flattened output width for a `grid × grid` input.
pub fn output_width(grid: usize, kernel: usize, channels: [usize; 2]) -> usize {
    let s1 = ConvGeometry::out_size(grid, kernel, STRIDE, PADDING);
    let s2 = ConvGeometry::out_size(s1, kernel, STRIDE, PADDING);
    channels[1] * s2 * s2
}

impl Downsampler {
    pub fn new(store: &mut ParamStore, name: &str, in_channels: usize, channels: [usize; 2], kernel: usize) -> Self {
        assert!((1..=2 * PADDING + 1).contains(&kernel), "kernel {kernel} too large for padding {PADDING}");
        let k2 = kernel * kernel;
        Self {
            conv1_weight: store.glorot(format!("{name}.conv1.weight"), k2 * in_channels, channels[0]),
            conv1_bias: store.zeros(format!("{name}.conv1.bias"), 1, channels[0]),
            norm: LayerNorm::new(store, &format!("{name}.norm"), channels[0]),
            conv2_weight: store.glorot(format!("{name}.conv2.weight"), k2 * channels[0], channels[1]),
            conv2_bias: store.zeros(format!("{name}.conv2.bias"), 1, channels[1]),
            kernel,
            in_channels,
            channels,
        }
    }

    pub fn output_width(&self, grid: usize) -> usize {
        output_width(grid, self.kernel, self.channels)
    }

    /// `tokens` is a `(side·side, in_channels)` grid stored row-major by patch;
    /// returns a `(1, output_width)` row.
    pub fn forward(&self, g: &mut Graph, tokens: Var, side: usize) -> Result<Var> {
        let (n, c) = g.shape(tokens);
        if side == 0 || n != side * side {
            return Err(Error::Shape(format!("downsampler needs a square grid, got {n} tokens for side {side}")));
        }
        if c != self.in_channels {
            return Err(Error::Shape(format!("downsampler expects {} channels, got {c}", self.in_channels)));
        }
        let geom1 = ConvGeometry {
            in_h: side,
            in_w: side,
            kernel: self.kernel,
            stride: STRIDE,
            padding: PADDING,
        };
        let (w1, b1) = (g.param(self.conv1_weight), g.param(self.conv1_bias));
        let h = g.conv2d(tokens, w1, b1, geom1);
        let h = self.norm.forward(g, h)?;
        let h = g.gelu(h);
        let geom2 = ConvGeometry {
            in_h: geom1.out_h(),
            in_w: geom1.out_w(),
            ..geom1
        };
        let (w2, b2) = (g.param(self.conv2_weight), g.param(self.conv2_bias));
        let h = g.conv2d(h, w2, b2, geom2);
        let h = g.gelu(h);
        let (rows, cols) = g.shape(h);
        Ok(g.reshape(h, 1, rows * cols))
    }
}
