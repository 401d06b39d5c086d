use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;
use super::train::{check_trainable, fit_binned};
use super::GbdtParams;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::roc_auc;

/// Candidate values per hyperparameter. Parameters left out keep the value
/// from the base parameters. Points are enumerated lexicographically in
/// field order, `learning_rate` outermost and `n_bins` innermost.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamGrid {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trees: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_child_weight: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_reg: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsample: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_bins: Option<Vec<usize>>,
}

impl ParamGrid {
    /// learning_rate {0.05, 0.1, 0.3} x max_depth {3, 5, 7} x
    /// n_trees {100, 300} x min_child_weight {1, 10}.
    pub fn default_search() -> Self {
        ParamGrid {
            learning_rate: Some(vec![0.05, 0.1, 0.3]),
            max_depth: Some(vec![3, 5, 7]),
            n_trees: Some(vec![100, 300]),
            min_child_weight: Some(vec![1.0, 10.0]),
            ..Default::default()
        }
    }

    pub fn points(&self, base: &GbdtParams) -> Vec<GbdtParams> {
        fn axis<T: Clone>(values: &Option<Vec<T>>, default: T) -> Vec<T> {
            values.clone().unwrap_or_else(|| vec![default])
        }
        let mut out = Vec::new();
        for lr in axis(&self.learning_rate, base.learning_rate) {
            for depth in axis(&self.max_depth, base.max_depth) {
                for trees in axis(&self.n_trees, base.n_trees) {
                    for mcw in axis(&self.min_child_weight, base.min_child_weight) {
                        for l2 in axis(&self.l2_reg, base.l2_reg) {
                            for sub in axis(&self.subsample, base.subsample) {
                                for bins in axis(&self.n_bins, base.n_bins) {
                                    out.push(GbdtParams {
                                        learning_rate: lr,
                                        max_depth: depth,
                                        n_trees: trees,
                                        min_child_weight: mcw,
                                        l2_reg: l2,
                                        subsample: sub,
                                        n_bins: bins,
                                        ..base.clone()
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: GbdtParams,
    pub validation_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: GbdtParams,
    pub best_auc: f64,
    /// Every point in enumeration order.
    pub table: Vec<GridPoint>,
}

/// Chronological holdout search: the last `holdout_fraction` of `train`
/// scores each grid point by validation AUC. The first point (in
/// enumeration order) with the highest AUC wins.
///
/// Points that differ only in `n_trees` share one fit, since a model with
/// fewer rounds is exactly a prefix of one with more.
pub fn grid_search(
    train: &LabeledDataset,
    base: &GbdtParams,
    grid: &ParamGrid,
    holdout_fraction: f64,
) -> Result<GridSearchResult> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::Argument(format!("holdout fraction {holdout_fraction} outside (0, 1)")));
    }
    let points = grid.points(base);
    if points.is_empty() {
        return Err(Error::Config("hyperparameter grid has no points".into()));
    }
    for (i, p) in points.iter().enumerate() {
        p.validate()
            .map_err(|e| Error::Config(format!("grid point {i} is invalid: {e}")))?;
    }

    let (fit_part, valid) = train.time_split(1.0 - holdout_fraction)?;
    check_trainable(&fit_part)?;
    let n_valid_pos = valid.n_fraud();
    if n_valid_pos == 0 || n_valid_pos == valid.n_rows() {
        return Err(Error::Training(format!(
            "validation holdout of {} rows is single-class",
            valid.n_rows()
        )));
    }

    let mut binned_cache: Vec<(usize, BinnedMatrix)> = Vec::new();
    let mut aucs: Vec<Option<f64>> = vec![None; points.len()];
    for i in 0..points.len() {
        if aucs[i].is_some() {
            continue;
        }
        let key = GbdtParams { n_trees: 0, ..points[i].clone() };
        let group: Vec<usize> = (i..points.len())
            .filter(|&j| aucs[j].is_none() && GbdtParams { n_trees: 0, ..points[j].clone() } == key)
            .collect();
        let checkpoints: BTreeSet<usize> = group.iter().map(|&j| points[j].n_trees).collect();
        let max_trees = *checkpoints.last().expect("group contains point i");

        let n_bins = points[i].n_bins;
        if !binned_cache.iter().any(|(b, _)| *b == n_bins) {
            binned_cache.push((n_bins, BinnedMatrix::build(&fit_part, n_bins)));
        }
        let binned = &binned_cache.iter().find(|(b, _)| *b == n_bins).expect("just inserted").1;
        let (model, _) = fit_binned(&fit_part, binned, &GbdtParams { n_trees: max_trees, ..key.clone() })?;

        let mut margins = vec![model.base_margin; valid.n_rows()];
        let mut auc_at = Vec::new();
        if checkpoints.contains(&0) {
            auc_at.push((0, roc_auc(&margins, valid.labels())?));
        }
        for (t, tree) in model.trees.iter().enumerate() {
            for (r, m) in margins.iter_mut().enumerate() {
                *m += tree.predict(valid.row(r));
            }
            if checkpoints.contains(&(t + 1)) {
                auc_at.push((t + 1, roc_auc(&margins, valid.labels())?));
            }
        }
        for &j in &group {
            let auc = auc_at
                .iter()
                .find(|(k, _)| *k == points[j].n_trees)
                .map(|(_, a)| *a)
                .expect("every checkpoint evaluated");
            aucs[j] = Some(auc);
        }
    }

    let table: Vec<GridPoint> = points
        .into_iter()
        .zip(aucs)
        .map(|(params, auc)| GridPoint {
            params,
            validation_auc: auc.expect("all points evaluated"),
        })
        .collect();
    let best_idx = table
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.validation_auc > table[best].validation_auc { i } else { best });
    Ok(GridSearchResult {
        best: table[best_idx].params.clone(),
        best_auc: table[best_idx].validation_auc,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_order_is_lexicographic() {
        let grid = ParamGrid {
            learning_rate: Some(vec![0.1, 0.2]),
            n_trees: Some(vec![5, 10]),
            ..Default::default()
        };
        let pts = grid.points(&GbdtParams::default());
        let pairs: Vec<(f64, usize)> = pts.iter().map(|p| (p.learning_rate, p.n_trees)).collect();
        assert_eq!(pairs, vec![(0.1, 5), (0.1, 10), (0.2, 5), (0.2, 10)]);
        assert_eq!(ParamGrid::default_search().points(&GbdtParams::default()).len(), 36);
        assert_eq!(ParamGrid::default().points(&GbdtParams::default()).len(), 1);
    }

    #[test]
    fn empty_axis_means_no_points() {
        let grid = ParamGrid { max_depth: Some(vec![]), ..Default::default() };
        assert!(grid.points(&GbdtParams::default()).is_empty());
    }

    #[test]
    fn grid_toml_roundtrip() {
        let grid = ParamGrid::default_search();
        let text = toml::to_string(&grid).unwrap();
        assert_eq!(toml::from_str::<ParamGrid>(&text).unwrap(), grid);
    }
}
