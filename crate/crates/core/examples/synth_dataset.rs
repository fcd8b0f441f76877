//! Generates a planted-cue dataset, validates it and splits it by time.
//!
//! cargo run --example synth_dataset -- <out_dir> [n_samples] [seed]

use creative_fnd::store::{load_manifest, synthesize_dataset, temporal_split, validate_manifest, SynthSpec, DEFAULT_RATIOS};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic-data".into());
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let spec = SynthSpec {
        n_samples: n,
        ..Default::default()
    };
    let manifest = synthesize_dataset(&spec, seed, &out)?;
    println!("wrote {} samples to {out}", manifest.len());

    let problems = validate_manifest(&out)?;
    println!("validation problems: {}", problems.len());

    let manifest = load_manifest(&out)?;
    let (train, val, test) = temporal_split(&manifest, DEFAULT_RATIOS)?;
    println!(
        "chronological split: {} train, {} val, {} test (test starts {})",
        train.len(),
        val.len(),
        test.len(),
        test.records[0].published_at
    );
    let first = manifest.load_sample(&manifest.records[0])?;
    println!(
        "{}: {} audio tokens, {} keyframes, {} text segments, {} boxes",
        first.id,
        first.bundle.sent_audio.nrows(),
        first.bundle.sem_frames.nrows(),
        first.text_segments.len(),
        first.bundle.ocr_boxes.len()
    );
    Ok(())
}
