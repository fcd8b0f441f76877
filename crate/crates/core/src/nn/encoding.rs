//! Sinusoidal segment positions and equal-frequency duration bins.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{Graph, ParamId, ParamStore, Var};

/// `PE[2k] = sin(i·w_k)`, `PE[2k+1] = cos(i·w_k)` with `w_k = 10000^(-2k/dim)`.
pub fn positional_encoding(index: usize, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || dim % 2 == 1 {
        return Err(Error::InvalidArgument(format!("positional encoding needs an even width, got {dim}")));
    }
    let i = index as f64;
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim / 2 {
        let w = 10000f64.powf(-((2 * k) as f64) / dim as f64);
        out.push((i * w).sin());
        out.push((i * w).cos());
    }
    Ok(out)
}

/// Rows `0..n` of the positional encoding.
pub fn positional_matrix(n: usize, dim: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((n, dim));
    for i in 0..n {
        for (c, v) in positional_encoding(i, dim)?.into_iter().enumerate() {
            out[[i, c]] = v;
        }
    }
    Ok(out)
}

/// Equal-frequency bin edges fitted on training values. A value falls in
/// bin `j` when exactly `j` edges are `<=` it, so queries outside the
/// training range land in the first or last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationBins {
    pub edges: Vec<f64>,
}

impl DurationBins {
    pub fn fit(values: &[f64], n_bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("no durations to fit bins on".into()));
        }
        if n_bins < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 bins, got {n_bins}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("durations must be finite".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        let bins = if distinct.len() < n_bins {
            log::warn!(
                "only {} distinct durations for {n_bins} bins; using {} bins",
                distinct.len(),
                distinct.len()
            );
            distinct.len()
        } else {
            n_bins
        };
        let n = sorted.len();
        let mut edges: Vec<f64> = (1..bins)
            .map(|j| {
                let cut = j * n / bins;
                0.5 * (sorted[cut - 1] + sorted[cut])
            })
            .collect();
        edges.dedup();
        Ok(Self { edges })
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn bin(&self, value: f64) -> usize {
        self.edges.partition_point(|&e| e <= value)
    }
}

/// Absolute (seconds) and relative (fraction of video) bins for one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationBinner {
    pub absolute: DurationBins,
    pub relative: DurationBins,
}

impl DurationBinner {
    /// Fits on `(absolute, relative)` duration pairs.
    pub fn fit(durations: &[(f64, f64)], n_bins: usize) -> Result<Self> {
        let abs: Vec<f64> = durations.iter().map(|d| d.0).collect();
        let rel: Vec<f64> = durations.iter().map(|d| d.1).collect();
        Ok(Self {
            absolute: DurationBins::fit(&abs, n_bins)?,
            relative: DurationBins::fit(&rel, n_bins)?,
        })
    }

    pub fn groups(&self, abs: f64, rel: f64) -> (usize, usize) {
        (self.absolute.bin(abs), self.relative.bin(rel))
    }
}

/// Learned tables mapping duration groups to `width/2`-wide halves.
#[derive(Debug, Clone)]
pub struct DurationEncoder {
    pub absolute: ParamId,
    pub relative: ParamId,
    pub binner: DurationBinner,
    pub width: usize,
}

impl DurationEncoder {
    pub fn new(store: &mut ParamStore, name: &str, binner: DurationBinner, width: usize) -> Self {
        assert!(width.is_multiple_of(2), "duration encoding width must be even");
        Self {
            absolute: store.normal(format!("{name}.absolute"), binner.absolute.n_bins(), width / 2, 0.02),
            relative: store.normal(format!("{name}.relative"), binner.relative.n_bins(), width / 2, 0.02),
            binner,
            width,
        }
    }

    /// One `(1, width)` row per `(absolute, relative)` pair.
    pub fn forward(&self, g: &mut Graph, durations: &[(f64, f64)]) -> Result<Var> {
        if let Some(&(a, r)) = durations.iter().find(|(a, r)| !(*a >= 0.0 && (0.0..=1.0).contains(r))) {
            return Err(Error::InvalidArgument(format!("duration ({a}, {r}) out of range")));
        }
        let (abs_rows, rel_rows): (Vec<usize>, Vec<usize>) =
            durations.iter().map(|&(a, r)| self.binner.groups(a, r)).unzip();
        let (ta, tr) = (g.param(self.absolute), g.param(self.relative));
        let ea = g.gather_rows(ta, &abs_rows);
        let er = g.gather_rows(tr, &rel_rows);
        Ok(g.concat_cols(&[ea, er]))
    }
}
