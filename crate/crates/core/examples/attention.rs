//! Multi-head attention weights and a finite-difference gradient check of
//! a transformer layer.

use creative_fnd::gradcheck::check_gradients;
use creative_fnd::nn::{MultiHeadAttention, TransformerLayer};
use creative_fnd::tape::{Graph, ParamStore};
use ndarray::Array2;

fn main() -> anyhow::Result<()> {
    let mut store = ParamStore::new(0);
    let attn = MultiHeadAttention::new(&mut store, "attn", 8, 8, 8, 2, true);
    let queries = Array2::from_shape_fn((3, 8), |(r, c)| ((r * 8 + c) as f64 * 0.37).sin());
    let keys = Array2::from_shape_fn((5, 8), |(r, c)| ((r * 8 + c) as f64 * 0.11).cos());

    let mut g = Graph::new(&store);
    let (q, k) = (g.input(queries), g.input(keys));
    let out = attn.forward_with_weights(&mut g, q, k, k)?;
    println!("output shape {:?}", g.shape(out.output));
    for (h, w) in out.weights.iter().enumerate() {
        let sums: Vec<String> = g.value(*w).rows().into_iter().map(|r| format!("{:.3}", r.sum())).collect();
        println!("head {h} row sums: {}", sums.join(" "));
    }

    let mut store = ParamStore::new(1);
    let layer = TransformerLayer::new(&mut store, "tf", 8, 2, 16);
    let x = Array2::from_shape_fn((4, 8), |(r, c)| ((r + 2 * c) as f64 * 0.21).sin());
    let report = check_gradients(&mut store, None, |g| {
        let xi = g.input(x.clone());
        let y = layer.forward(g, xi).unwrap();
        let y = g.tanh(y);
        g.sum_all(y)
    });
    println!(
        "transformer layer: {} scalars checked, max relative error {:.2e} ({})",
        report.checked, report.max_rel_error, report.worst_param
    );
    Ok(())
}
