use crate::model::ForwardOutput;
use crate::store::Label;
use crate::tape::{Graph, Var};

/// `CE(fused) + α·CE(selection) + β·CE(editing)`.
///
/// The auxiliary terms apply only when both branches produce their own
/// logits; a single-branch model or an early-fusion head is trained on the
/// fused cross-entropy alone.
pub fn total_loss(g: &mut Graph, out: &ForwardOutput, label: Label, alpha: f64, beta: f64) -> Var {
    let y = label.index();
    let main = g.cross_entropy(out.fused, y);
    match (out.selection, out.editing) {
        (Some(s), Some(e)) => {
            let ls = g.cross_entropy(s, y);
            let le = g.cross_entropy(e, y);
            let ls = g.scale(ls, alpha);
            let le = g.scale(le, beta);
            let aux = g.add(ls, le);
            g.add(main, aux)
        }
        _ => main,
    }
}

/// Three-term loss over explicit logit rows.
pub fn three_term_loss(g: &mut Graph, fused: Var, selection: Var, editing: Var, label: Label, alpha: f64, beta: f64) -> Var {
    let out = ForwardOutput {
        fused,
        selection: Some(selection),
        editing: Some(editing),
        msam: None,
        meam: None,
    };
    total_loss(g, &out, label, alpha, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::check_gradients;
    use crate::tape::ParamStore;
    use ndarray::{array, Array2};

    #[test]
    fn uniform_logits() {
        let store = ParamStore::new(0);
        for label in [Label::Real, Label::Fake] {
            let mut g = Graph::new(&store);
            let z = g.input(Array2::zeros((1, 2)));
            let l = three_term_loss(&mut g, z, z, z, label, 0.1, 2.0);
            assert!((g.scalar(l) - 3.1 * 2f64.ln()).abs() < 1e-12);
            let l = three_term_loss(&mut g, z, z, z, label, 0.0, 0.0);
            assert!((g.scalar(l) - 2f64.ln()).abs() < 1e-12);
        }
        assert!((3.1 * 2f64.ln() - 2.1487).abs() < 1e-4);
    }

    #[test]
    fn loss_gradient_wrt_logits() {
        let mut store = ParamStore::new(0);
        let f = store.add("f", array![[0.3, -1.1]]);
        let s = store.add("s", array![[2.0, 0.5]]);
        let e = store.add("e", array![[-0.7, 0.9]]);
        let report = check_gradients(&mut store, None, |g| {
            let (fv, sv, ev) = (g.param(f), g.param(s), g.param(e));
            three_term_loss(g, fv, sv, ev, Label::Fake, 0.1, 2.0)
        });
        assert!(report.passes(1e-6), "{report:?}");
    }
}
