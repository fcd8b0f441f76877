//! Component ablation on a planted-cue corpus with a chronological split.
//!
//! cargo run --release --example ablation -- [n_samples] [runs]

use creative_fnd::store::{synthesize, write_dataset, temporal_split, SynthSpec, DEFAULT_RATIOS};
use creative_fnd::train::{run_ablation, Splits};
use creative_fnd::{Components, ModelConfig};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(400);
    let runs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let spec = SynthSpec {
        n_samples: n,
        ..Default::default()
    };
    let dir = tempfile::tempdir()?;
    let corpus = synthesize(&spec, 3)?;
    let manifest = write_dataset(dir.path(), &corpus.dims, &corpus.samples)?;
    let (train, val, test) = temporal_split(&manifest, DEFAULT_RATIOS)?;
    let (train, val, test) = (train.load_samples()?, val.load_samples()?, test.load_samples()?);

    let config: ModelConfig = serde_json::from_str(include_str!("../../../configs/desk.json"))?;
    let splits = Splits {
        train: &train,
        val: &val,
        test: &test,
    };
    let started = std::time::Instant::now();
    let rows = run_ablation(&config, &corpus.dims, splits, Components::ALL, runs)?;
    println!("{:<16} {:>14} {:>14}", "components", "accuracy", "macro-F1");
    for r in rows {
        let s = r.summary;
        println!(
            "{:<16} {:>7.4}±{:<6.4} {:>7.4}±{:<6.4}",
            r.components.label(),
            s.acc_mean,
            s.acc_std,
            s.f1_mean,
            s.f1_std
        );
    }
    println!("{:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
