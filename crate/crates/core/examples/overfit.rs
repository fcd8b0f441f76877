//! Trains on a small planted-cue corpus and reports training-set accuracy.
//!
//! cargo run --release --example overfit -- [epochs]

use std::time::Instant;

use creative_fnd::store::{synthesize, SynthSpec};
use creative_fnd::train::{evaluate, train};
use creative_fnd::ModelConfig;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let epochs: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(30);
    let corpus = synthesize(&SynthSpec::default(), 0)?;
    let config = ModelConfig {
        max_epochs: epochs,
        patience: None,
        dropout: 0.0,
        two_way_mlp_dim: 256,
        ..ModelConfig::default()
    };
    let started = Instant::now();
    let out = train(config, corpus.dims.clone(), &corpus.samples, &corpus.samples)?;
    let report = evaluate(&out.model, &corpus.samples)?;
    println!(
        "train accuracy {:.4} after {} epochs ({} parameters, {:.1}s)",
        report.accuracy,
        out.history.len(),
        out.model.param_count(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
