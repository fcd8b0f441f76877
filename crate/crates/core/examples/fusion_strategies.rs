//! Late fusion of branch logits under each strategy.

use creative_fnd::fusion::fuse_values;
use creative_fnd::FusionStrategy;

fn main() -> anyhow::Result<()> {
    let selection = [1.5, -0.5];
    let editing = [0.8, -2.0];
    for s in FusionStrategy::ALL {
        match fuse_values(&selection, &editing, s) {
            Ok(v) => println!("{s:<12} [{:+.4}, {:+.4}]", v[0], v[1]),
            Err(e) => println!("{s:<12} {e}"),
        }
    }
    let base = fuse_values(&selection, &editing, FusionStrategy::MulTanh)?;
    let scaled = fuse_values(&selection.map(|v| 3.0 * v), &editing, FusionStrategy::MulTanh)?;
    println!(
        "MUL_TANH with selection x3: [{:+.4}, {:+.4}] = 3 x [{:+.4}, {:+.4}]",
        scaled[0], scaled[1], base[0], base[1]
    );
    Ok(())
}
