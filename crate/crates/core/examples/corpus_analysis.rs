//! Fake-vs-real measurements on a planted-cue corpus.
//!
//! cargo run --release --example corpus_analysis -- [n_samples]

use creative_fnd::analysis::{corpus_report, Normalization};
use creative_fnd::store::{synthesize, SynthSpec};

fn main() -> anyhow::Result<()> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let corpus = synthesize(
        &SynthSpec {
            n_samples: n,
            ..Default::default()
        },
        0,
    )?;
    let report = corpus_report(&corpus.samples, &corpus.dims.sentiment_classes, Normalization::Softmax)?;
    if let Some(s) = &report.sentiment {
        println!("charged audio share: fake {:.3}, real {:.3}", s.fake_charged, s.real_charged);
    }
    for (name, obs) in [
        ("text-visual JSD", &report.divergence),
        ("color richness", &report.color),
        ("dynamism I_D", &report.dynamism),
    ] {
        if let Some(o) = obs {
            println!("{name}: fake mean {:.4}, real mean {:.4}", o.fake_mean, o.real_mean);
        }
    }
    for d in report.directions() {
        println!(
            "{:<10} {:<34} holds={} p={:.3e}",
            d.observation, d.expected, d.holds, d.p_value
        );
    }
    Ok(())
}
