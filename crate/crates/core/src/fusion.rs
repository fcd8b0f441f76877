//! Late fusion of the selection and editing branch logits.

use crate::config::FusionStrategy;
use crate::error::{Error, Result};
use crate::tape::{sigmoid, Graph, Var};

/// Elementwise combination of the two `(1, 2)` logit rows.
pub fn fuse(g: &mut Graph, selection: Var, editing: Var, strategy: FusionStrategy) -> Result<Var> {
    if g.shape(selection) != g.shape(editing) {
        return Err(Error::Shape(format!(
            "fusion inputs differ: {:?} vs {:?}",
            g.shape(selection),
            g.shape(editing)
        )));
    }
    Ok(match strategy {
        FusionStrategy::Early => {
            return Err(Error::InvalidArgument("early fusion combines features, not logits".into()))
        }
        FusionStrategy::SumLinear => g.add(selection, editing),
        FusionStrategy::SumSigmoid => {
            let e = g.sigmoid(editing);
            g.add(selection, e)
        }
        FusionStrategy::MulSigmoid => {
            let e = g.sigmoid(editing);
            g.mul(selection, e)
        }
        FusionStrategy::SumTanh => {
            let e = g.tanh(editing);
            g.add(selection, e)
        }
        FusionStrategy::MulTanh => {
            let e = g.tanh(editing);
            g.mul(selection, e)
        }
    })
}

/// Scalar form of [`fuse`] for plain logit slices.
pub fn fuse_values(selection: &[f64], editing: &[f64], strategy: FusionStrategy) -> Result<Vec<f64>> {
    if selection.len() != editing.len() {
        return Err(Error::Shape(format!(
            "fusion inputs differ in length: {} vs {}",
            selection.len(),
            editing.len()
        )));
    }
    let f: fn(f64, f64) -> f64 = match strategy {
        FusionStrategy::Early => {
            return Err(Error::InvalidArgument("early fusion combines features, not logits".into()))
        }
        FusionStrategy::SumLinear => |s, e| s + e,
        FusionStrategy::SumSigmoid => |s, e| s + sigmoid(e),
        FusionStrategy::MulSigmoid => |s, e| s * sigmoid(e),
        FusionStrategy::SumTanh => |s, e| s + e.tanh(),
        FusionStrategy::MulTanh => |s, e| s * e.tanh(),
    };
    Ok(selection.iter().zip(editing).map(|(&s, &e)| f(s, e)).collect())
}
