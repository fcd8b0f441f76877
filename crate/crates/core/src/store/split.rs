use super::manifest::DatasetManifest;
use crate::error::{Error, Result};

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.7, 0.15, 0.15);

/// Split sizes under the floor rule: `⌊r_train·n⌋`, `⌊r_val·n⌋`, remainder.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (tr, va, te) = ratios;
    if !(tr > 0.0 && va > 0.0 && te > 0.0) || ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    if n == 0 {
        return Err(Error::Empty("cannot split an empty manifest".into()));
    }
    // The epsilon absorbs representation error such as 0.7 * 20 = 13.999...
    let n_train = (tr * n as f64 + 1e-9).floor() as usize;
    let n_val = (va * n as f64 + 1e-9).floor() as usize;
    let n_test = n.saturating_sub(n_train + n_val);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::Empty(format!(
            "split of {n} samples leaves an empty part ({n_train}/{n_val}/{n_test})"
        )));
    }
    Ok((n_train, n_val, n_test))
}

/// Chronological train/validation/test split; ties in publication time are
/// broken by id.
pub fn temporal_split(
    manifest: &DatasetManifest,
    ratios: (f64, f64, f64),
) -> Result<(DatasetManifest, DatasetManifest, DatasetManifest)> {
    let (n_train, n_val, _) = split_sizes(manifest.len(), ratios)?;
    let mut records = manifest.records.clone();
    records.sort_by(|a, b| a.published_at.cmp(&b.published_at).then_with(|| a.id.cmp(&b.id)));
    let test = records.split_off(n_train + n_val);
    let val = records.split_off(n_train);
    Ok((
        manifest.with_records(records),
        manifest.with_records(val),
        manifest.with_records(test),
    ))
}
