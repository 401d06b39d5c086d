//! Quantile bin boundaries and the binned training matrix.

use rayon::prelude::*;

use crate::dataset::LabeledDataset;

pub(crate) const MISSING_BIN: u16 = u16::MAX;

/// Cut points for one feature. A value `v` falls in bin
/// `#{cuts <= v}`, so splitting after bin `b` is the rule `v < cuts[b]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FeatureCuts {
    pub cuts: Vec<f64>,
}

impl FeatureCuts {
    /// At most `n_bins` bins from the non-missing values. With few distinct
    /// values every gap between neighbours gets a cut; otherwise cuts are
    /// placed where the cumulative count crosses each `k / n_bins` quantile.
    pub fn from_values(values: &mut Vec<f64>, n_bins: usize) -> Self {
        values.retain(|v| !v.is_nan());
        values.sort_by(f64::total_cmp);
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for &v in values.iter() {
            match distinct.last_mut() {
                Some((last, count)) if *last == v => *count += 1,
                _ => distinct.push((v, 1)),
            }
        }
        let mut cuts = Vec::new();
        if distinct.len() <= n_bins {
            cuts.extend(distinct.windows(2).map(|w| midpoint(w[0].0, w[1].0)));
        } else {
            let total = values.len() as f64;
            let mut next_quantile = 1;
            let mut seen = 0usize;
            for w in distinct.windows(2) {
                seen += w[0].1;
                if next_quantile >= n_bins {
                    break;
                }
                if seen as f64 >= total * next_quantile as f64 / n_bins as f64 {
                    cuts.push(midpoint(w[0].0, w[1].0));
                    while next_quantile < n_bins && seen as f64 >= total * next_quantile as f64 / n_bins as f64 {
                        next_quantile += 1;
                    }
                }
            }
        }
        FeatureCuts { cuts }
    }

    pub fn bin(&self, v: f64) -> u16 {
        if v.is_nan() {
            MISSING_BIN
        } else {
            self.cuts.partition_point(|&c| c <= v) as u16
        }
    }

    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }
}

/// Strictly between `lo` and `hi` when possible, else `hi`; either way
/// `lo < cut <= hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

/// Column-major bin indices for every training row.
#[derive(Debug, Clone)]
pub(crate) struct BinnedMatrix {
    pub cuts: Vec<FeatureCuts>,
    pub bins: Vec<Vec<u16>>,
}

impl BinnedMatrix {
    pub fn build(data: &LabeledDataset, n_bins: usize) -> Self {
        let n_rows = data.n_rows();
        let width = data.n_features();
        let values = data.values();
        let (cuts, bins) = (0..width)
            .into_par_iter()
            .map(|f| {
                let mut column: Vec<f64> = (0..n_rows).map(|r| values[r * width + f]).collect();
                let raw = column.clone();
                let cuts = FeatureCuts::from_values(&mut column, n_bins);
                let bins = raw.iter().map(|&v| cuts.bin(v)).collect();
                (cuts, bins)
            })
            .unzip();
        BinnedMatrix { cuts, bins }
    }

    pub fn n_features(&self) -> usize {
        self.cuts.len()
    }
}
