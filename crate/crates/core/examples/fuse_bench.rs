//! Compares the six fusion strategies on a planted-cue corpus.
//!
//! cargo run --release --example fuse_bench -- [n_samples] [runs]

use creative_fnd::store::{synthesize, SynthSpec};
use creative_fnd::train::{run_fusion_bench, Splits};
use creative_fnd::ModelConfig;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(300);
    let runs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let corpus = synthesize(
        &SynthSpec {
            n_samples: n,
            ..Default::default()
        },
        4,
    )?;
    let (a, b) = (n * 7 / 10, n * 85 / 100);
    let s = &corpus.samples;
    let splits = Splits {
        train: &s[..a],
        val: &s[a..b],
        test: &s[b..],
    };
    let config: ModelConfig = serde_json::from_str(include_str!("../../../configs/desk.json"))?;
    for row in run_fusion_bench(&config, &corpus.dims, splits, runs)? {
        let m = row.summary;
        println!(
            "{:<12} acc {:.4}±{:.4}  macro-F1 {:.4}±{:.4}",
            row.fusion, m.acc_mean, m.acc_std, m.f1_mean, m.f1_std
        );
    }
    Ok(())
}
