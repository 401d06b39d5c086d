use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::binning::{BinnedMatrix, MISSING_BIN};
use super::tree::{Node, Tree};
use super::{logistic_grad_hess, logistic_loss, GbdtModel, GbdtParams};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// Below this many (row, feature) cells a node's histograms are built on
/// the calling thread.
const PARALLEL_CELLS: usize = 16_384;

pub fn fit(train: &LabeledDataset, params: &GbdtParams) -> Result<GbdtModel> {
    fit_with_history(train, params).map(|(m, _)| m)
}

/// Fits a model and also returns the mean training log-loss after each
/// boosting round.
pub fn fit_with_history(train: &LabeledDataset, params: &GbdtParams) -> Result<(GbdtModel, Vec<f64>)> {
    params.validate()?;
    check_trainable(train)?;
    let binned = BinnedMatrix::build(train, params.n_bins);
    fit_binned(train, &binned, params)
}

pub(super) fn check_trainable(train: &LabeledDataset) -> Result<()> {
    if train.n_features() == 0 {
        return Err(Error::Config("training data has no feature columns".into()));
    }
    if train.n_rows() == 0 {
        return Err(Error::Training("training data is empty".into()));
    }
    let pos = train.n_fraud();
    if pos == 0 || pos == train.n_rows() {
        return Err(Error::Training(format!(
            "training labels are single-class ({pos} fraud of {})",
            train.n_rows()
        )));
    }
    Ok(())
}

pub(super) fn fit_binned(
    train: &LabeledDataset,
    binned: &BinnedMatrix,
    params: &GbdtParams,
) -> Result<(GbdtModel, Vec<f64>)> {
    let n = train.n_rows();
    let labels = train.labels();
    let pos_weight = params.scale_pos_weight;
    let weight = |y: u8| if y == 1 { pos_weight } else { 1.0 };

    let pos_mass = train.n_fraud() as f64 * pos_weight;
    let base_rate = pos_mass / (pos_mass + (n - train.n_fraud()) as f64);
    let base_margin = (base_rate / (1.0 - base_rate)).ln();

    let mut margins = vec![base_margin; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut history = Vec::with_capacity(params.n_trees);

    for round in 0..params.n_trees {
        grad.par_iter_mut()
            .zip(hess.par_iter_mut())
            .enumerate()
            .for_each(|(i, (g, h))| {
                let (gi, hi) = logistic_grad_hess(margins[i], labels[i]);
                let w = weight(labels[i]);
                *g = gi * w;
                *h = hi * w;
            });

        let mut rows = sample_rows(n, params, round);
        let mut builder = TreeBuilder {
            binned,
            grad: &grad,
            hess: &hess,
            params,
            nodes: Vec::new(),
            scratch: Vec::with_capacity(rows.len()),
        };
        builder.build(&mut rows, 0);
        let tree = Tree { nodes: builder.nodes };

        margins
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, m)| *m += tree.predict(train.row(i)));
        let loss: f64 = margins.iter().zip(labels).map(|(&m, &y)| logistic_loss(m, y)).sum();
        history.push(loss / n as f64);
        trees.push(tree);
    }

    let mut params = params.clone();
    params.n_trees = trees.len();
    let model = GbdtModel::new(base_margin, params, train.columns().to_vec(), trees)?;
    Ok((model, history))
}

/// Row subset for one round, ascending. Each round draws from its own
/// derived seed so a round's sample does not depend on how many rounds ran.
fn sample_rows(n: usize, params: &GbdtParams, round: usize) -> Vec<u32> {
    if params.subsample >= 1.0 {
        return (0..n as u32).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, &["subsample", &round.to_string()]));
    let rows: Vec<u32> = (0..n as u32).filter(|_| rng.random::<f64>() < params.subsample).collect();
    if rows.is_empty() {
        vec![rng.random_range(0..n as u32)]
    } else {
        rows
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    g: f64,
    h: f64,
    count: usize,
}

impl Sums {
    fn add(&mut self, other: &Sums) {
        self.g += other.g;
        self.h += other.h;
        self.count += other.count;
    }

    fn minus(&self, other: &Sums) -> Sums {
        Sums {
            g: self.g - other.g,
            h: self.h - other.h,
            count: self.count - other.count,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    feature: usize,
    /// Non-missing rows with bin <= this go left.
    bin: u16,
    default_left: bool,
    gain: f64,
}

struct TreeBuilder<'a> {
    binned: &'a BinnedMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbdtParams,
    nodes: Vec<Node>,
    scratch: Vec<u32>,
}

impl TreeBuilder<'_> {
    fn leaf_score(&self, g: f64, h: f64) -> f64 {
        let den = h + self.params.l2_reg;
        if den > 0.0 {
            g * g / den
        } else {
            0.0
        }
    }

    fn leaf_weight(&self, s: &Sums) -> f64 {
        let den = s.h + self.params.l2_reg;
        if den > 0.0 {
            -self.params.learning_rate * s.g / den
        } else {
            0.0
        }
    }

    /// Builds the subtree for `rows` and returns its node index. `rows`
    /// is reordered (stably) into left and right partitions.
    fn build(&mut self, rows: &mut [u32], depth: usize) -> usize {
        let mut total = Sums::default();
        for &r in rows.iter() {
            total.g += self.grad[r as usize];
            total.h += self.hess[r as usize];
        }
        total.count = rows.len();

        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf {
            weight: self.leaf_weight(&total),
            cover: total.h,
        });
        if depth >= self.params.max_depth || rows.len() < 2 {
            return idx;
        }
        let Some(split) = self.best_split(rows, &total) else {
            return idx;
        };

        let bins = &self.binned.bins[split.feature];
        let goes_left = |r: u32| {
            let b = bins[r as usize];
            if b == MISSING_BIN {
                split.default_left
            } else {
                b <= split.bin
            }
        };
        self.scratch.clear();
        self.scratch.extend(rows.iter().copied().filter(|&r| goes_left(r)));
        let n_left = self.scratch.len();
        self.scratch.extend(rows.iter().copied().filter(|&r| !goes_left(r)));
        rows.copy_from_slice(&self.scratch);

        let (left_rows, right_rows) = rows.split_at_mut(n_left);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[idx] = Node::Split {
            feature: split.feature,
            threshold: self.binned.cuts[split.feature].cuts[split.bin as usize],
            default_left: split.default_left,
            left,
            right,
            cover: self.nodes[left].cover() + self.nodes[right].cover(),
        };
        idx
    }

    fn best_split(&self, rows: &[u32], total: &Sums) -> Option<SplitCandidate> {
        let n_features = self.binned.n_features();
        let per_feature: Vec<Option<SplitCandidate>> = if rows.len() * n_features >= PARALLEL_CELLS {
            (0..n_features)
                .into_par_iter()
                .map(|f| self.best_feature_split(f, rows, total))
                .collect()
        } else {
            (0..n_features).map(|f| self.best_feature_split(f, rows, total)).collect()
        };
        // First strictly-better candidate wins, so ties go to the lowest feature.
        per_feature.into_iter().flatten().fold(None, |best, c| match best {
            Some(b) if c.gain <= b.gain => Some(b),
            _ => Some(c),
        })
    }

    fn best_feature_split(&self, feature: usize, rows: &[u32], total: &Sums) -> Option<SplitCandidate> {
        let cuts = &self.binned.cuts[feature];
        let n_bins = cuts.n_bins();
        if n_bins < 2 {
            return None;
        }
        let bins = &self.binned.bins[feature];
        let mut hist = vec![Sums::default(); n_bins];
        let mut missing = Sums::default();
        for &r in rows {
            let r = r as usize;
            let slot = match bins[r] {
                MISSING_BIN => &mut missing,
                b => &mut hist[b as usize],
            };
            slot.g += self.grad[r];
            slot.h += self.hess[r];
            slot.count += 1;
        }
        let mut present = Sums::default();
        for s in &hist {
            present.add(s);
        }
        if present.count == 0 {
            return None;
        }

        let parent_score = self.leaf_score(total.g, total.h);
        let mcw = self.params.min_child_weight;
        let directions: &[bool] = if missing.count == 0 { &[true] } else { &[true, false] };

        let mut best: Option<SplitCandidate> = None;
        let mut left_present = Sums::default();
        for (b, bin) in hist.iter().enumerate().take(n_bins - 1) {
            left_present.add(bin);
            if left_present.count == 0 {
                continue;
            }
            if left_present.count == present.count {
                break;
            }
            let right_present = present.minus(&left_present);
            for &default_left in directions {
                let (mut left, mut right) = (left_present, right_present);
                if default_left {
                    left.add(&missing);
                } else {
                    right.add(&missing);
                }
                if left.h < mcw || right.h < mcw || left.h <= 0.0 || right.h <= 0.0 {
                    continue;
                }
                let gain = self.leaf_score(left.g, left.h) + self.leaf_score(right.g, right.h) - parent_score;
                if gain > 0.0 && best.is_none_or(|c| gain > c.gain) {
                    best = Some(SplitCandidate {
                        feature,
                        bin: b as u16,
                        default_left,
                        gain,
                    });
                }
            }
        }
        best
    }
}
