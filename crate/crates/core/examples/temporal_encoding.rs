//! Sinusoidal segment positions and equal-frequency duration bins.

use creative_fnd::nn::{positional_encoding, DurationBins};

fn main() -> anyhow::Result<()> {
    for i in 0..3 {
        let pe: Vec<String> = positional_encoding(i, 8)?.iter().map(|v| format!("{v:+.4}")).collect();
        println!("PE({i}) = [{}]", pe.join(", "));
    }
    let durations: Vec<f64> = (1..=20).map(|i| (i as f64).powf(1.5) / 10.0).collect();
    let bins = DurationBins::fit(&durations, 4)?;
    println!("edges {:?}", bins.edges);
    let counts = durations.iter().fold(vec![0; bins.n_bins()], |mut acc, &d| {
        acc[bins.bin(d)] += 1;
        acc
    });
    println!("samples per bin {counts:?}");
    println!("out-of-range: {} -> bin {}, {} -> bin {}", -1.0, bins.bin(-1.0), 1e6, bins.bin(1e6));
    Ok(())
}
