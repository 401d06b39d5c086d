//! Exact Shapley attributions for tree ensembles.
//!
//! Attributions live in margin (log-odds) space. The value of a feature
//! coalition `S` is the path-conditional expectation of the ensemble: at a
//! split on a feature in `S` the row's own branch is followed, at any other
//! split both branches are averaged with weights proportional to their
//! training cover. [`tree_shap`] computes the exact Shapley values of that
//! game in polynomial time by tracking, along each root-to-leaf path, the
//! proportion of coalitions of every size that reach the leaf.
//! [`brute_force_shap`] enumerates coalitions directly and exists as a
//! reference for small models.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureGroup, LabeledDataset};
use crate::error::{Error, Result};
use crate::gbdt::{GbdtModel, Node, Tree};

/// Feature count limit for [`brute_force_shap`].
pub const BRUTE_FORCE_MAX_FEATURES: usize = 12;

const IMPORTANCE_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    /// One attribution per encoded feature, in margin units.
    pub phi: Vec<f64>,
    /// Expected margin under the training cover distribution.
    pub base_value: f64,
    pub prediction_margin: f64,
}

impl ShapExplanation {
    /// `base_value + sum(phi) - prediction_margin`; zero up to rounding.
    pub fn efficiency_gap(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>() - self.prediction_margin
    }
}

fn check_row(model: &GbdtModel, row: &[f64]) -> Result<()> {
    if row.len() != model.n_features() {
        return Err(Error::Argument(format!(
            "row has {} values, model expects {}",
            row.len(),
            model.n_features()
        )));
    }
    Ok(())
}

fn child_fraction(tree: &Tree, parent: usize, child: usize) -> f64 {
    tree.nodes[child].cover() / tree.nodes[parent].cover()
}

fn go_left(x: f64, threshold: f64, default_left: bool) -> bool {
    if x.is_nan() {
        default_left
    } else {
        x < threshold
    }
}

fn tree_expectation(tree: &Tree, node: usize) -> f64 {
    match tree.nodes[node] {
        Node::Leaf { weight, .. } => weight,
        Node::Split { left, right, .. } => {
            child_fraction(tree, node, left) * tree_expectation(tree, left)
                + child_fraction(tree, node, right) * tree_expectation(tree, right)
        }
    }
}

/// Expected margin of the model under its training cover distribution.
pub fn expected_value(model: &GbdtModel) -> f64 {
    model.base_margin + model.trees.iter().map(|t| tree_expectation(t, 0)).sum::<f64>()
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    /// Fraction of "feature absent" coalitions flowing down this edge.
    zero: f64,
    /// 1 if the row itself follows this edge, else 0.
    one: f64,
    /// Permutation weight of coalitions of size equal to this position.
    weight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let denom = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / denom;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / denom;
    }
}

/// Undoes the extension for the element at `index` and removes it.
fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let PathElement { zero, one, .. } = path[index];
    let denom = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * denom / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / denom;
        } else {
            path[i].weight = path[i].weight * denom / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

/// Total permutation weight of the path with element `index` unwound,
/// without modifying it.
fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElement { zero, one, .. } = path[index];
    let denom = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * denom / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64 / denom;
        } else if zero != 0.0 {
            total += path[i].weight * denom / (zero * (depth - i) as f64);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    node: usize,
    row: &[f64],
    mut path: Vec<PathElement>,
    zero: f64,
    one: f64,
    feature: Option<usize>,
    phi: &mut [f64],
) {
    extend_path(&mut path, zero, one, feature);
    match tree.nodes[node] {
        Node::Leaf { weight, .. } => {
            for i in 1..path.len() {
                let w = unwound_path_sum(&path, i);
                let el = path[i];
                let f = el.feature.expect("only the root element has no feature");
                phi[f] += w * (el.one - el.zero) * weight;
            }
        }
        Node::Split {
            feature: split_feature,
            threshold,
            default_left,
            left,
            right,
            ..
        } => {
            let (hot, cold) = if go_left(row[split_feature], threshold, default_left) {
                (left, right)
            } else {
                (right, left)
            };
            let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(split_feature)) {
                incoming_zero = path[k].zero;
                incoming_one = path[k].one;
                unwind_path(&mut path, k);
            }
            recurse(
                tree,
                hot,
                row,
                path.clone(),
                child_fraction(tree, node, hot) * incoming_zero,
                incoming_one,
                Some(split_feature),
                phi,
            );
            recurse(
                tree,
                cold,
                row,
                path,
                child_fraction(tree, node, cold) * incoming_zero,
                0.0,
                Some(split_feature),
                phi,
            );
        }
    }
}

fn shap_unchecked(model: &GbdtModel, row: &[f64]) -> ShapExplanation {
    let mut phi = vec![0.0; model.n_features()];
    for tree in &model.trees {
        recurse(tree, 0, row, Vec::with_capacity(8), 1.0, 1.0, None, &mut phi);
    }
    ShapExplanation {
        phi,
        base_value: expected_value(model),
        prediction_margin: model.predict_margin(row),
    }
}

/// Exact Shapley attribution of one prediction.
pub fn tree_shap(model: &GbdtModel, row: &[f64]) -> Result<ShapExplanation> {
    model.validate()?;
    check_row(model, row)?;
    Ok(shap_unchecked(model, row))
}

fn conditional_expectation(tree: &Tree, node: usize, row: &[f64], known: u32) -> f64 {
    match tree.nodes[node] {
        Node::Leaf { weight, .. } => weight,
        Node::Split {
            feature,
            threshold,
            default_left,
            left,
            right,
            ..
        } => {
            if known & (1 << feature) != 0 {
                let next = if go_left(row[feature], threshold, default_left) { left } else { right };
                conditional_expectation(tree, next, row, known)
            } else {
                child_fraction(tree, node, left) * conditional_expectation(tree, left, row, known)
                    + child_fraction(tree, node, right) * conditional_expectation(tree, right, row, known)
            }
        }
    }
}

/// Shapley values by explicit enumeration of all `2^n` feature coalitions.
pub fn brute_force_shap(model: &GbdtModel, row: &[f64]) -> Result<ShapExplanation> {
    let n = model.n_features();
    if n > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::Argument(format!(
            "brute-force attribution supports at most {BRUTE_FORCE_MAX_FEATURES} features, model has {n}"
        )));
    }
    model.validate()?;
    check_row(model, row)?;

    let n_subsets = 1usize << n;
    let value: Vec<f64> = (0..n_subsets as u32)
        .map(|mask| {
            model.base_margin
                + model
                    .trees
                    .iter()
                    .map(|t| conditional_expectation(t, 0, row, mask))
                    .sum::<f64>()
        })
        .collect();

    // weight[s] = s! (n - s - 1)! / n!
    let factorial = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    let weight: Vec<f64> = (0..n)
        .map(|s| factorial(s) * factorial(n - s - 1) / factorial(n))
        .collect();

    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in 0..n_subsets {
            if mask & bit == 0 {
                let size = mask.count_ones() as usize;
                *p += weight[size] * (value[mask | bit] - value[mask]);
            }
        }
    }
    Ok(ShapExplanation {
        phi,
        base_value: value[0],
        prediction_margin: model.predict_margin(row),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub group: FeatureGroup,
    pub mean_abs_shap: f64,
}

/// Mean absolute attribution per feature, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub entries: Vec<ImportanceEntry>,
}

impl GlobalImportance {
    fn from_totals(names: Vec<(String, FeatureGroup)>, totals: Vec<f64>, n_rows: usize) -> Self {
        let mut entries: Vec<ImportanceEntry> = names
            .into_iter()
            .zip(totals)
            .map(|((feature, group), total)| ImportanceEntry {
                feature,
                group,
                mean_abs_shap: total / n_rows as f64,
            })
            .collect();
        // Stable: equal values keep feature order.
        entries.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap));
        GlobalImportance { entries }
    }

    /// Sum of entry values per group, in group order.
    pub fn group_totals(&self) -> Vec<(FeatureGroup, f64)> {
        FeatureGroup::ALL
            .into_iter()
            .map(|g| {
                let total = self.entries.iter().filter(|e| e.group == g).map(|e| e.mean_abs_shap).sum();
                (g, total)
            })
            .filter(|(g, _)| self.entries.iter().any(|e| e.group == *g))
            .collect()
    }

    pub fn get(&self, feature: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.feature == feature).map(|e| e.mean_abs_shap)
    }

    /// Columns `rank,feature,group,mean_abs_shap`, rank starting at 1.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rank", "feature", "group", "mean_abs_shap"])?;
        for (i, e) in self.entries.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                e.feature.clone(),
                e.group.to_string(),
                e.mean_abs_shap.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("importance csv", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Bar-chart data: one `{feature, group, value}` record per entry.
    pub fn to_plot_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Bar<'a> {
            feature: &'a str,
            group: FeatureGroup,
            value: f64,
        }
        let bars: Vec<Bar> = self
            .entries
            .iter()
            .map(|e| Bar {
                feature: &e.feature,
                group: e.group,
                value: e.mean_abs_shap,
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&bars)?;
        text.push('\n');
        Ok(text)
    }

    pub fn write(&self, csv_path: impl AsRef<Path>, plot_path: impl AsRef<Path>) -> Result<()> {
        let (csv_path, plot_path) = (csv_path.as_ref(), plot_path.as_ref());
        std::fs::write(csv_path, self.to_csv()?).map_err(|e| Error::io(csv_path, e))?;
        std::fs::write(plot_path, self.to_plot_json()?).map_err(|e| Error::io(plot_path, e))
    }
}

/// Per-feature sums of `|phi|` over all rows. Rows are processed in fixed
/// chunks and the chunk sums added in order, so the result does not depend
/// on the worker count.
fn abs_shap_totals(model: &GbdtModel, data: &LabeledDataset, groups: &[Vec<usize>]) -> Result<Vec<f64>> {
    if data.n_rows() == 0 {
        return Err(Error::Argument("cannot compute importance over an empty dataset".into()));
    }
    model.validate()?;
    model.check_schema(data)?;
    let starts: Vec<usize> = (0..data.n_rows()).step_by(IMPORTANCE_CHUNK).collect();
    let partials: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + IMPORTANCE_CHUNK).min(data.n_rows());
            let mut acc = vec![0.0; groups.len()];
            for r in start..end {
                let phi = shap_unchecked(model, data.row(r)).phi;
                for (a, members) in acc.iter_mut().zip(groups) {
                    *a += members.iter().map(|&j| phi[j]).sum::<f64>().abs();
                }
            }
            acc
        })
        .collect();
    let mut totals = vec![0.0; groups.len()];
    for p in partials {
        for (t, v) in totals.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(totals)
}

/// Mean `|phi|` of every encoded feature over the rows of `data`.
pub fn global_importance(model: &GbdtModel, data: &LabeledDataset) -> Result<GlobalImportance> {
    let singletons: Vec<Vec<usize>> = (0..model.n_features()).map(|j| vec![j]).collect();
    let totals = abs_shap_totals(model, data, &singletons)?;
    let names = model.features.iter().map(|c| (c.name.clone(), c.group)).collect();
    Ok(GlobalImportance::from_totals(names, totals, data.n_rows()))
}

/// Importance per raw column: the indicator columns of a one-hot encoded
/// feature are summed before taking the absolute value.
pub fn raw_feature_importance(model: &GbdtModel, data: &LabeledDataset) -> Result<GlobalImportance> {
    let mut sources: Vec<(String, FeatureGroup)> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (j, col) in model.features.iter().enumerate() {
        match sources.iter().position(|(s, _)| *s == col.source) {
            Some(k) => members[k].push(j),
            None => {
                sources.push((col.source.clone(), col.group));
                members.push(vec![j]);
            }
        }
    }
    let totals = abs_shap_totals(model, data, &members)?;
    Ok(GlobalImportance::from_totals(sources, totals, data.n_rows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::EncodedColumn;
    use crate::gbdt::GbdtParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn columns(n: usize) -> Vec<EncodedColumn> {
        (0..n)
            .map(|j| EncodedColumn {
                name: format!("f{j}"),
                group: FeatureGroup::ALL[j % 3],
                source: format!("src{}", j / 2),
            })
            .collect()
    }

    fn model(n_features: usize, base: f64, trees: Vec<Tree>) -> GbdtModel {
        GbdtModel::new(base, GbdtParams::default(), columns(n_features), trees).unwrap()
    }

    fn stump(feature: usize, a: f64, b: f64, cover_left: f64, cover_right: f64) -> Tree {
        Tree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold: 0.0,
                    default_left: true,
                    left: 1,
                    right: 2,
                    cover: cover_left + cover_right,
                },
                Node::Leaf { weight: a, cover: cover_left },
                Node::Leaf { weight: b, cover: cover_right },
            ],
        }
    }

    /// Random tree over `n_features` with positive covers that add up.
    fn random_tree(rng: &mut ChaCha8Rng, n_features: usize, max_depth: usize) -> Tree {
        fn grow(rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>, n_features: usize, depth: usize, max_depth: usize) -> usize {
            let idx = nodes.len();
            nodes.push(Node::Leaf { weight: 0.0, cover: 0.0 });
            if depth < max_depth && rng.random::<f64>() < 0.8 {
                let feature = rng.random_range(0..n_features);
                let threshold = rng.random_range(-1.0..1.0);
                let default_left = rng.random();
                let left = grow(rng, nodes, n_features, depth + 1, max_depth);
                let right = grow(rng, nodes, n_features, depth + 1, max_depth);
                let cover = nodes[left].cover() + nodes[right].cover();
                nodes[idx] = Node::Split { feature, threshold, default_left, left, right, cover };
            } else {
                nodes[idx] = Node::Leaf {
                    weight: rng.random_range(-2.0..2.0),
                    cover: rng.random_range(0.1..10.0),
                };
            }
            idx
        }
        let mut nodes = Vec::new();
        grow(rng, &mut nodes, n_features, 0, max_depth);
        Tree { nodes }
    }

    fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| if rng.random::<f64>() < 0.1 { f64::NAN } else { rng.random_range(-1.0..1.0) })
            .collect()
    }

    #[test]
    fn stump_closed_form() {
        let (a, b) = (0.7, -0.3);
        let m = model(3, 0.25, vec![stump(1, a, b, 5.0, 5.0)]);
        let row = [9.0, -1.0, 9.0];
        for e in [tree_shap(&m, &row).unwrap(), brute_force_shap(&m, &row).unwrap()] {
            assert!((e.phi[1] - (a - b) / 2.0).abs() < 1e-15);
            assert_eq!(e.phi[0], 0.0);
            assert_eq!(e.phi[2], 0.0);
            assert!((e.base_value - (0.25 + (a + b) / 2.0)).abs() < 1e-15);
            assert!(e.efficiency_gap().abs() < 1e-12);
        }
    }

    #[test]
    fn empty_ensemble() {
        let m = model(4, -1.5, vec![]);
        let row = [0.0; 4];
        for e in [tree_shap(&m, &row).unwrap(), brute_force_shap(&m, &row).unwrap()] {
            assert_eq!(e.phi, vec![0.0; 4]);
            assert_eq!(e.base_value, -1.5);
            assert_eq!(e.prediction_margin, -1.5);
        }
    }

    #[test]
    fn matches_brute_force_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let trees = (0..rng.random_range(1..=5)).map(|_| random_tree(&mut rng, n, 3)).collect();
            let m = model(n, rng.random_range(-1.0..1.0), trees);
            let row = random_row(&mut rng, n);
            let fast = tree_shap(&m, &row).unwrap();
            let slow = brute_force_shap(&m, &row).unwrap();
            for (x, y) in fast.phi.iter().zip(&slow.phi) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
            assert!((fast.base_value - slow.base_value).abs() < 1e-9);
            assert!(fast.efficiency_gap().abs() < 1e-9);
        }
    }

    #[test]
    fn repeated_feature_on_path() {
        // Same feature split twice along a path exercises path unwinding.
        let tree = Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.0, default_left: true, left: 1, right: 4, cover: 10.0 },
                Node::Split { feature: 0, threshold: -0.5, default_left: false, left: 2, right: 3, cover: 6.0 },
                Node::Leaf { weight: 1.0, cover: 2.0 },
                Node::Leaf { weight: 3.0, cover: 4.0 },
                Node::Split { feature: 1, threshold: 0.2, default_left: true, left: 5, right: 6, cover: 4.0 },
                Node::Leaf { weight: -2.0, cover: 1.0 },
                Node::Leaf { weight: 0.5, cover: 3.0 },
            ],
        };
        let m = model(2, 0.0, vec![tree]);
        for row in [[-0.7, 0.0], [-0.1, 0.9], [0.4, 0.1], [0.4, f64::NAN]] {
            let fast = tree_shap(&m, &row).unwrap();
            let slow = brute_force_shap(&m, &row).unwrap();
            for (x, y) in fast.phi.iter().zip(&slow.phi) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_features_share_credit() {
        // f0 and f1 play identical roles: y = w if both go right.
        let tree = Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.0, default_left: true, left: 1, right: 2, cover: 4.0 },
                Node::Leaf { weight: 0.0, cover: 2.0 },
                Node::Split { feature: 1, threshold: 0.0, default_left: true, left: 3, right: 4, cover: 2.0 },
                Node::Leaf { weight: 0.0, cover: 1.0 },
                Node::Leaf { weight: 4.0, cover: 1.0 },
            ],
        };
        let m = model(3, 0.0, vec![tree]);
        let e = tree_shap(&m, &[1.0, 1.0, 0.0]).unwrap();
        assert!((e.phi[0] - e.phi[1]).abs() < 1e-12);
        assert_eq!(e.phi[2], 0.0);
    }

    #[test]
    fn additive_across_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (t1, t2) = (random_tree(&mut rng, 5, 3), random_tree(&mut rng, 5, 3));
        let both = model(5, 0.3, vec![t1.clone(), t2.clone()]);
        let one = model(5, 0.3, vec![t1]);
        let two = model(5, 0.3, vec![t2]);
        let row = random_row(&mut rng, 5);
        let (eb, e1, e2) = (
            tree_shap(&both, &row).unwrap(),
            tree_shap(&one, &row).unwrap(),
            tree_shap(&two, &row).unwrap(),
        );
        for j in 0..5 {
            assert!((eb.phi[j] - (e1.phi[j] + e2.phi[j])).abs() < 1e-12);
        }
        assert!((eb.base_value - (e1.base_value + e2.base_value - 0.3)).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let m = model(13, 0.0, vec![stump(0, 1.0, 0.0, 1.0, 1.0)]);
        assert!(matches!(brute_force_shap(&m, &[0.0; 13]), Err(Error::Argument(_))));
        assert!(matches!(tree_shap(&m, &[0.0; 3]), Err(Error::Argument(_))));

        let mut zero = model(2, 0.0, vec![stump(0, 1.0, 0.0, 1.0, 1.0)]);
        zero.trees[0] = Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.0, default_left: true, left: 1, right: 2, cover: 0.0 },
                Node::Leaf { weight: 1.0, cover: 0.0 },
                Node::Leaf { weight: 2.0, cover: 0.0 },
            ],
        };
        assert!(matches!(tree_shap(&zero, &[0.0, 0.0]), Err(Error::ModelIntegrity(_))));
    }

    fn data_for(m: &GbdtModel, rows: &[Vec<f64>]) -> LabeledDataset {
        LabeledDataset::new(
            m.features.clone(),
            rows.iter().flatten().copied().collect(),
            (0..rows.len()).map(|i| (i % 2) as u8).collect(),
            (0..rows.len() as i64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn importance_ranks_and_scales_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Feature 3 is never used.
        let trees = vec![stump(0, 1.0, -1.0, 1.0, 3.0), stump(1, 0.2, 0.1, 2.0, 2.0), stump(2, 0.5, -0.5, 1.0, 1.0)];
        let m = model(4, 0.0, trees);
        let rows: Vec<Vec<f64>> = (0..700).map(|_| random_row(&mut rng, 4)).collect();
        let ds = data_for(&m, &rows);
        let imp = global_importance(&m, &ds).unwrap();
        assert_eq!(imp.entries.len(), 4);
        assert!(imp.entries.windows(2).all(|w| w[0].mean_abs_shap >= w[1].mean_abs_shap));
        assert_eq!(imp.entries.last().unwrap().feature, "f3");
        assert_eq!(imp.get("f3"), Some(0.0));

        let mut doubled = m.clone();
        for t in &mut doubled.trees {
            for node in &mut t.nodes {
                if let Node::Leaf { weight, .. } = node {
                    *weight *= 2.0;
                }
            }
        }
        let imp2 = global_importance(&doubled, &ds).unwrap();
        for e in &imp.entries {
            assert_eq!(imp2.get(&e.feature).unwrap(), 2.0 * e.mean_abs_shap);
        }

        let raw = raw_feature_importance(&m, &ds).unwrap();
        assert_eq!(raw.entries.len(), 2);
        assert!(raw.get("src0").unwrap() <= imp.get("f0").unwrap() + imp.get("f1").unwrap() + 1e-12);

        let csv = imp.to_csv().unwrap();
        assert!(csv.starts_with("rank,feature,group,mean_abs_shap\n1,f0,super_app,"));
    }

    #[test]
    fn importance_rejects_empty_and_mismatched_data() {
        let m = model(2, 0.0, vec![stump(0, 1.0, 0.0, 1.0, 1.0)]);
        let empty = data_for(&m, &[]);
        assert!(matches!(global_importance(&m, &empty), Err(Error::Argument(_))));
        let other = model(3, 0.0, vec![]);
        let ds = data_for(&other, &[vec![0.0; 3]]);
        assert!(matches!(global_importance(&m, &ds), Err(Error::SchemaMismatch { .. })));
    }
}
