use crate::error::{Error, Result};
use crate::tape::{Graph, ParamId, ParamStore, Var};

/// Affine map `x·W + b` applied to every token row.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: store.glorot(format!("{name}.weight"), in_dim, out_dim),
            bias: Some(store.zeros(format!("{name}.bias"), 1, out_dim)),
            in_dim,
            out_dim,
        }
    }

    pub fn without_bias(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: store.glorot(format!("{name}.weight"), in_dim, out_dim),
            bias: None,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let (_, cols) = g.shape(x);
        if cols != self.in_dim {
            return Err(Error::Shape(format!(
                "linear expects width {}, got {cols}",
                self.in_dim
            )));
        }
        let w = g.param(self.weight);
        let h = g.matmul(x, w);
        Ok(match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add_row(h, b)
            }
            None => h,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        Self {
            gamma: store.ones(format!("{name}.gamma"), 1, dim),
            beta: store.zeros(format!("{name}.beta"), 1, dim),
            dim,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let (_, cols) = g.shape(x);
        if cols != self.dim {
            return Err(Error::Shape(format!("layer norm expects width {}, got {cols}", self.dim)));
        }
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        Ok(g.layer_norm(x, gamma, beta))
    }
}

/// Feed-forward classifier: `depth` linear layers with ReLU and dropout
/// between them, ending in two logits `[real, fake]`.
#[derive(Debug, Clone)]
pub struct MlpHead {
    pub layers: Vec<Linear>,
    pub dropout: f64,
}

pub const N_CLASSES: usize = 2;

impl MlpHead {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, hidden: usize, depth: usize, dropout: f64) -> Self {
        assert!(depth >= 1, "head depth must be at least 1");
        let mut layers = Vec::with_capacity(depth);
        let mut width = in_dim;
        for i in 0..depth {
            let out = if i + 1 == depth { N_CLASSES } else { hidden };
            layers.push(Linear::new(store, &format!("{name}.{i}"), width, out));
            width = out;
        }
        Self { layers, dropout }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        if g.value(x).iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("head input has non-finite values".into()));
        }
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, h)?;
            if i < last {
                h = g.relu(h);
                h = g.dropout(h, self.dropout);
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::check_gradients;
    use ndarray::Array2;

    #[test]
    fn zero_final_layer_gives_zero_logits() {
        let mut store = ParamStore::new(1);
        let head = MlpHead::new(&mut store, "head", 6, 8, 3, 0.1);
        let last = head.layers.last().unwrap();
        store.get_mut(last.weight).fill(0.0);
        let mut g = Graph::training(&store, 5);
        let x = g.input(Array2::from_elem((1, 6), 0.3));
        let y = head.forward(&mut g, x).unwrap();
        assert_eq!(g.value(y).as_slice().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let mut store = ParamStore::new(2);
        let head = MlpHead::new(&mut store, "head", 4, 8, 3, 0.1);
        let run = || {
            let mut g = Graph::new(&store);
            let x = g.input(Array2::from_shape_fn((1, 4), |(_, c)| c as f64 - 1.5));
            let y = head.forward(&mut g, x).unwrap();
            g.value(y).clone()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let mut store = ParamStore::new(2);
        let head = MlpHead::new(&mut store, "head", 4, 8, 3, 0.1);
        let mut g = Graph::new(&store);
        let x = g.input(Array2::zeros((1, 5)));
        assert!(head.forward(&mut g, x).is_err());
    }

    #[test]
    fn head_gradients() {
        let mut store = ParamStore::new(3);
        let head = MlpHead::new(&mut store, "head", 5, 7, 3, 0.1);
        let x = Array2::from_shape_fn((1, 5), |(_, c)| (c as f64 * 0.7).sin());
        let report = check_gradients(&mut store, None, |g| {
            let xi = g.input(x.clone());
            let y = head.forward(g, xi).unwrap();
            g.cross_entropy(y, 1)
        });
        assert!(report.passes(1e-4), "{report:?}");
    }
}
