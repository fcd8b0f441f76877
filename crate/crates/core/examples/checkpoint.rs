//! Trains briefly, saves a checkpoint and reloads it with identical
//! predictions.

use creative_fnd::model::Detector;
use creative_fnd::store::{synthesize, SynthSpec};
use creative_fnd::train::train;
use creative_fnd::ModelConfig;

fn main() -> anyhow::Result<()> {
    let corpus = synthesize(
        &SynthSpec {
            n_samples: 60,
            ..Default::default()
        },
        1,
    )?;
    let mut config: ModelConfig = serde_json::from_str(include_str!("../../../configs/desk.json"))?;
    config.max_epochs = 2;
    let (train_set, val) = corpus.samples.split_at(48);
    let out = train(config, corpus.dims.clone(), train_set, val)?;

    let dir = tempfile::tempdir()?;
    out.model.save(dir.path())?;
    let loaded = Detector::load(dir.path())?;
    let mut max_diff: f64 = 0.0;
    for s in val {
        let (a, b) = (out.model.predict(s)?, loaded.predict(s)?);
        max_diff = max_diff.max((a.prob_fake - b.prob_fake).abs());
    }
    println!(
        "{} parameters saved to {}; max prediction difference after reload {max_diff:e}",
        loaded.param_count(),
        dir.path().display()
    );
    Ok(())
}
