//! Gradient-boosted decision trees for binary classification.
//!
//! Trees are fit stagewise to the logistic loss with second-order (Newton)
//! leaf weights, histogram split finding over per-feature quantile bins, L2
//! regularization on leaf weights and a learned default direction for
//! missing values.

mod binning;
mod grid;
mod train;
mod tree;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{schema_fingerprint, EncodedColumn, LabeledDataset};
use crate::error::{Error, Result};

pub use grid::{grid_search, GridPoint, GridSearchResult, ParamGrid};
pub use train::{fit, fit_with_history};
pub use tree::{Node, Tree};

pub const MODEL_FORMAT: &str = "fraudlab-gbdt";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Minimum hessian sum in each child of a split.
    pub min_child_weight: f64,
    /// L2 penalty on leaf weights.
    pub l2_reg: f64,
    /// Fraction of rows sampled (without replacement) for each tree.
    pub subsample: f64,
    pub n_bins: usize,
    pub seed: u64,
    /// Multiplier on the gradient and hessian of fraud rows. 1 disables
    /// reweighting.
    pub scale_pos_weight: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 5,
            min_child_weight: 1.0,
            l2_reg: 1.0,
            subsample: 1.0,
            n_bins: 256,
            seed: 0,
            scale_pos_weight: 1.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::Config(format!("{what} ({self:?})")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.max_depth == 0 {
            return fail("max_depth must be at least 1");
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return fail("min_child_weight must be non-negative");
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return fail("l2_reg must be non-negative");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return fail("subsample must be in (0, 1]");
        }
        if !(2..usize::from(binning::MISSING_BIN)).contains(&self.n_bins) {
            return fail("n_bins must be in [2, 65535)");
        }
        if !(self.scale_pos_weight > 0.0 && self.scale_pos_weight.is_finite()) {
            return fail("scale_pos_weight must be positive");
        }
        Ok(())
    }
}

pub fn sigmoid(margin: f64) -> f64 {
    if margin >= 0.0 {
        1.0 / (1.0 + (-margin).exp())
    } else {
        let e = margin.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood of `label` under `sigmoid(margin)`.
pub fn logistic_loss(margin: f64, label: u8) -> f64 {
    let softplus = margin.max(0.0) + (-margin.abs()).exp().ln_1p();
    softplus - f64::from(label) * margin
}

/// First and second derivative of [`logistic_loss`] in the margin.
pub fn logistic_grad_hess(margin: f64, label: u8) -> (f64, f64) {
    let p = sigmoid(margin);
    (p - f64::from(label), p * (1.0 - p))
}

/// Additive tree ensemble: `margin(x) = base_margin + sum_t tree_t(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format: String,
    pub version: u32,
    pub base_margin: f64,
    pub params: GbdtParams,
    pub schema_fingerprint: String,
    pub features: Vec<EncodedColumn>,
    pub trees: Vec<Tree>,
}

impl GbdtModel {
    pub fn new(base_margin: f64, params: GbdtParams, features: Vec<EncodedColumn>, trees: Vec<Tree>) -> Result<Self> {
        let model = GbdtModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            base_margin,
            params,
            schema_fingerprint: schema_fingerprint(&features),
            features,
            trees,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(Error::ModelIntegrity(format!(
                "unsupported model format {} v{}",
                self.format, self.version
            )));
        }
        if !self.base_margin.is_finite() {
            return Err(Error::ModelIntegrity("non-finite base margin".into()));
        }
        if schema_fingerprint(&self.features) != self.schema_fingerprint {
            return Err(Error::ModelIntegrity("schema fingerprint does not match feature list".into()));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            tree.validate(self.n_features())
                .map_err(|e| Error::ModelIntegrity(format!("tree {t}: {e}")))?;
        }
        Ok(())
    }

    pub fn predict_margin(&self, row: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn check_schema(&self, data: &LabeledDataset) -> Result<()> {
        let found = data.fingerprint();
        if found != self.schema_fingerprint {
            return Err(Error::SchemaMismatch {
                expected: self.schema_fingerprint.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn predict_margins(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        self.check_schema(data)?;
        Ok((0..data.n_rows())
            .into_par_iter()
            .map(|i| self.predict_margin(data.row(i)))
            .collect())
    }

    /// Fraud risk score `sigmoid(margin)` per row.
    pub fn predict_scores(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        Ok(self.predict_margins(data)?.into_iter().map(sigmoid).collect())
    }

    /// The model made of the first `n_trees` trees.
    pub fn truncated(&self, n_trees: usize) -> GbdtModel {
        let mut m = self.clone();
        m.trees.truncate(n_trees);
        m.params.n_trees = m.trees.len();
        m
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: GbdtModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
