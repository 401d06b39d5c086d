//! Synthetic applicant data with a chronological fraud-rate regime shift.
//!
//! Rows are generated in order. Rows before `train_size` are labeled fraud
//! with probability `train_fraud_rate`, the rest with `test_fraud_rate`.
//! Numeric features are standard normal for legitimate rows and shifted by
//! the group signal for fraud rows; categorical features follow a uniform
//! multinomial for legitimate rows and an exponentially tilted one for fraud
//! rows.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, ColumnSpec, DatasetSchema, FeatureGroup, FeatureSchema, RawColumn, RawDataset};
use crate::error::{Error, Result};

/// Log-odds spread between the first and last category of a tilted
/// categorical at signal 1.
const CATEGORY_TILT: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub train_size: usize,
    pub train_fraud_rate: f64,
    pub test_fraud_rate: f64,
    /// Fraud-class mean shift per group, in units of the feature std.
    pub group_signal: BTreeMap<FeatureGroup, f64>,
    /// Columns that carry the group signal. `None` means every column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informative: Option<BTreeSet<String>>,
    /// Probability that any feature cell is blanked out.
    #[serde(default)]
    pub missing_rate: f64,
    pub noise_seed: u64,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default = "default_order_column")]
    pub order_column: String,
    pub columns: Vec<ColumnSpec>,
}

fn default_label_column() -> String {
    "is_fraud".into()
}

fn default_order_column() -> String {
    "application_seq".into()
}

/// The 23-column applicant schema (8 super-app, 6 mobile, 9 bureau) whose
/// one-hot encoding has 48 columns.
pub fn reference_schema() -> FeatureSchema {
    use FeatureGroup::*;
    let cols = vec![
        ColumnSpec::numeric("app_tenure_days", SuperApp),
        ColumnSpec::numeric("pct_spend_restaurants", SuperApp),
        ColumnSpec::numeric("pct_spend_supermarkets", SuperApp),
        ColumnSpec::numeric("registered_devices", SuperApp),
        ColumnSpec::numeric("orders_last_90d", SuperApp),
        ColumnSpec::numeric("avg_ticket", SuperApp),
        ColumnSpec::categorical("city_tier", SuperApp, ["t1", "t2", "t3", "t4", "t5"]),
        ColumnSpec::categorical("signup_channel", SuperApp, ["organic", "referral", "paid", "partner"]),
        ColumnSpec::numeric("line_tenure_months", Mobile),
        ColumnSpec::numeric("payment_cadence", Mobile),
        ColumnSpec::numeric("calls_received", Mobile),
        ColumnSpec::numeric("calls_sent", Mobile),
        ColumnSpec::numeric("line_risk_score", Mobile),
        ColumnSpec::categorical("line_type", Mobile, ["prepaid", "postpaid"]),
        ColumnSpec::numeric("credit_score", Bureau),
        ColumnSpec::numeric("accumulated_credit_lines", Bureau),
        ColumnSpec::numeric("recent_inquiries", Bureau),
        ColumnSpec::numeric("utilization", Bureau),
        ColumnSpec::numeric("months_since_delinquency", Bureau),
        ColumnSpec::numeric("debt_to_income", Bureau),
        ColumnSpec::categorical(
            "employment_type",
            Bureau,
            ["salaried", "self_employed", "contractor", "student", "retired", "unemployed"],
        ),
        ColumnSpec::categorical("housing_status", Bureau, ["own", "rent", "family", "other"]),
        ColumnSpec::categorical("region", Bureau, (0..10).map(|i| format!("r{i:02}"))),
    ];
    FeatureSchema::new(cols).expect("reference schema is valid")
}

impl SynthSpec {
    /// Regime-shift data: 60,708 training rows at 2.18% fraud followed by
    /// 26,018 test rows at 0.37% fraud.
    pub fn regime_shift(noise_seed: u64) -> Self {
        SynthSpec {
            n_rows: 86_726,
            train_size: 60_708,
            train_fraud_rate: 0.0218,
            test_fraud_rate: 0.0037,
            group_signal: FeatureGroup::ALL.into_iter().map(|g| (g, 0.5)).collect(),
            informative: None,
            missing_rate: 0.0,
            noise_seed,
            label_column: default_label_column(),
            order_column: default_order_column(),
            columns: reference_schema().columns,
        }
    }

    /// Each group carries independent signal on its own numeric columns
    /// only, so every fused scenario sees strictly more evidence than any
    /// of its constituents.
    pub fn complementary(noise_seed: u64) -> Self {
        let schema = reference_schema();
        let informative = schema
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Numeric)
            .map(|c| c.name.clone())
            .collect();
        SynthSpec {
            n_rows: 40_000,
            train_size: 24_000,
            train_fraud_rate: 0.05,
            test_fraud_rate: 0.03,
            group_signal: [
                (FeatureGroup::SuperApp, 0.55),
                (FeatureGroup::Mobile, 0.5),
                (FeatureGroup::Bureau, 0.45),
            ]
            .into_iter()
            .collect(),
            informative: Some(informative),
            missing_rate: 0.02,
            noise_seed,
            label_column: default_label_column(),
            order_column: default_order_column(),
            columns: schema.columns,
        }
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        FeatureSchema::new(self.columns.clone())
    }

    pub fn dataset_schema(&self) -> DatasetSchema {
        DatasetSchema {
            label_column: self.label_column.clone(),
            order_column: self.order_column.clone(),
            columns: self.columns.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let schema = self.schema().map_err(|e| Error::Config(e.to_string()))?;
        if self.n_rows == 0 {
            return Err(Error::Config("n_rows must be positive".into()));
        }
        if self.train_size == 0 || self.train_size >= self.n_rows {
            return Err(Error::Config(format!(
                "train_size {} must be in [1, n_rows = {})",
                self.train_size, self.n_rows
            )));
        }
        for (name, rate) in [("train_fraud_rate", self.train_fraud_rate), ("test_fraud_rate", self.test_fraud_rate)] {
            if !(rate > 0.0 && rate < 1.0) {
                return Err(Error::Config(format!("{name} {rate} outside (0, 1)")));
            }
        }
        for g in FeatureGroup::ALL {
            match self.group_signal.get(&g) {
                None => return Err(Error::Config(format!("group_signal has no entry for {g}"))),
                Some(s) if !(0.0..=1.0).contains(s) => {
                    return Err(Error::Config(format!("group_signal for {g} is {s}, outside [0, 1]")))
                }
                Some(_) => {}
            }
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Config(format!("missing_rate {} outside [0, 1)", self.missing_rate)));
        }
        if let Some(info) = &self.informative {
            if let Some(unknown) = info.iter().find(|n| schema.column(n).is_none()) {
                return Err(Error::Config(format!("informative column {unknown:?} is not in the schema")));
            }
        }
        if [&self.label_column, &self.order_column]
            .iter()
            .any(|n| schema.column(n).is_some())
            || self.label_column == self.order_column
        {
            return Err(Error::Config("label and order column names must be distinct from features".into()));
        }
        Ok(())
    }

    fn signal_for(&self, col: &ColumnSpec) -> f64 {
        let informative = self.informative.as_ref().is_none_or(|s| s.contains(&col.name));
        if informative {
            self.group_signal[&col.group]
        } else {
            0.0
        }
    }
}

/// Category probabilities for legitimate (`signal = 0`) and fraud rows.
fn tilted_weights(k: usize, signal: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..k)
        .map(|j| {
            let centered = if k > 1 { j as f64 / (k - 1) as f64 - 0.5 } else { 0.0 };
            (CATEGORY_TILT * signal * centered).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn draw_category(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return j;
        }
    }
    weights.len() - 1
}

/// Generates the dataset described by `spec`. Fully determined by the spec
/// and its seed.
pub fn generate(spec: &SynthSpec) -> Result<RawDataset> {
    spec.validate()?;
    let schema = spec.schema()?;
    let n = spec.n_rows;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);

    enum Sampler {
        Numeric { shift: f64 },
        Categorical { legit: Vec<f64>, fraud: Vec<f64>, categories: Vec<String> },
    }
    let samplers: Vec<Sampler> = schema
        .columns
        .iter()
        .map(|col| {
            let signal = spec.signal_for(col);
            match &col.kind {
                ColumnKind::Numeric => Sampler::Numeric { shift: signal },
                ColumnKind::Categorical { categories } => Sampler::Categorical {
                    legit: tilted_weights(categories.len(), 0.0),
                    fraud: tilted_weights(categories.len(), signal),
                    categories: categories.clone(),
                },
            }
        })
        .collect();

    let mut columns: Vec<RawColumn> = samplers
        .iter()
        .map(|s| match s {
            Sampler::Numeric { .. } => RawColumn::Numeric(Vec::with_capacity(n)),
            Sampler::Categorical { .. } => RawColumn::Categorical(Vec::with_capacity(n)),
        })
        .collect();
    let mut labels = Vec::with_capacity(n);

    for row in 0..n {
        let rate = if row < spec.train_size {
            spec.train_fraud_rate
        } else {
            spec.test_fraud_rate
        };
        let fraud = rng.random::<f64>() < rate;
        labels.push(fraud as u8);
        for (sampler, col) in samplers.iter().zip(columns.iter_mut()) {
            // Always consume the missingness draw so the stream layout does
            // not depend on missing_rate.
            let missing = rng.random::<f64>() < spec.missing_rate;
            match (sampler, col) {
                (Sampler::Numeric { shift }, RawColumn::Numeric(v)) => {
                    let z: f64 = rng.sample(StandardNormal);
                    let x = if fraud { z + shift } else { z };
                    v.push(if missing { f64::NAN } else { x });
                }
                (Sampler::Categorical { legit, fraud: tilted, categories }, RawColumn::Categorical(v)) => {
                    let j = draw_category(&mut rng, if fraud { tilted } else { legit });
                    v.push((!missing).then(|| categories[j].clone()));
                }
                _ => unreachable!("sampler and column kinds are built together"),
            }
        }
    }
    RawDataset::new(schema, columns, labels, (0..n as i64).collect())
}
