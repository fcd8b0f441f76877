//! Box prompts and dense grid positions as random-Fourier features.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::store::TextBox;
use crate::tape::{Graph, ParamId, ParamStore, Var};

/// Frozen Gaussian map from normalized `(x, y)` to `[sin, cos]` features.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierFeatures {
    /// `(2, width/2)`.
    pub frequencies: Array2<f64>,
    pub seed: u64,
}

impl FourierFeatures {
    pub fn new(width: usize, seed: u64) -> Self {
        assert!(width >= 2 && width.is_multiple_of(2), "fourier width must be even");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frequencies = Array2::from_shape_simple_fn((2, width / 2), || StandardNormal.sample(&mut rng));
        Self { frequencies, seed }
    }

    pub fn width(&self) -> usize {
        2 * self.frequencies.ncols()
    }

    /// One row per point; coordinates are in `[0, 1]`.
    pub fn encode(&self, points: &[(f64, f64)]) -> Array2<f64> {
        let half = self.frequencies.ncols();
        let mut out = Array2::zeros((points.len(), 2 * half));
        for (r, &(x, y)) in points.iter().enumerate() {
            let (cx, cy) = (2.0 * x - 1.0, 2.0 * y - 1.0);
            for k in 0..half {
                let phase =
                    std::f64::consts::TAU * (cx * self.frequencies[[0, k]] + cy * self.frequencies[[1, k]]);
                out[[r, k]] = phase.sin();
                out[[r, half + k]] = phase.cos();
            }
        }
        out
    }

    /// Positions of the patch centres of a `side × side` grid, row-major.
    pub fn grid(&self, side: usize) -> Array2<f64> {
        let points: Vec<(f64, f64)> = (0..side * side)
            .map(|p| {
                let (row, col) = (p / side, p % side);
                ((col as f64 + 0.5) / side as f64, (row as f64 + 0.5) / side as f64)
            })
            .collect();
        self.encode(&points)
    }
}

/// Two tokens per box (top-left, bottom-right corners); a single learned
/// token stands in when the frame has no text.
#[derive(Debug, Clone)]
pub struct BoxPromptEncoder {
    pub fourier: FourierFeatures,
    pub corners: ParamId,
    pub no_text: ParamId,
}

impl BoxPromptEncoder {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, fourier_seed: u64) -> Self {
        Self {
            fourier: FourierFeatures::new(width, fourier_seed),
            corners: store.normal(format!("{name}.corners"), 2, width, 1.0),
            no_text: store.normal(format!("{name}.no_text"), 1, width, 1.0),
        }
    }

    pub fn width(&self) -> usize {
        self.fourier.width()
    }

    pub fn forward(&self, g: &mut Graph, boxes: &[TextBox]) -> Result<Var> {
        if boxes.is_empty() {
            return Ok(g.param(self.no_text));
        }
        if let Some(b) = boxes.iter().find(|b| !b.is_valid()) {
            return Err(Error::InvalidArgument(format!(
                "box {:?} outside the unit square",
                <[f64; 4]>::from(*b)
            )));
        }
        let points: Vec<(f64, f64)> = boxes.iter().flat_map(|b| [(b.x1, b.y1), (b.x2, b.y2)]).collect();
        let pos = g.input(self.fourier.encode(&points));
        let table = g.param(self.corners);
        let kinds: Vec<usize> = (0..points.len()).map(|i| i % 2).collect();
        let corner = g.gather_rows(table, &kinds);
        Ok(g.add(pos, corner))
    }
}
