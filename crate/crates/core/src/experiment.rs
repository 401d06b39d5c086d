//! Scenario comparison: one chronological split shared by every scenario,
//! then per scenario feature selection, grid search, training, bootstrap
//! evaluation and attribution, followed by report rendering.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Scenario};
use crate::error::{Error, Result};
use crate::explain::{global_importance, GlobalImportance};
use crate::gbdt::{fit, grid_search, GbdtModel, GbdtParams, GridPoint, ParamGrid};
use crate::metrics::{bootstrap_evaluate, CostParams, MetricSummary, DEFAULT_REPLICATES};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitRule {
    TrainFraction(f64),
    TrainSize(usize),
}

impl Default for SplitRule {
    fn default() -> Self {
        SplitRule::TrainFraction(0.6)
    }
}

impl SplitRule {
    pub fn apply(&self, data: &LabeledDataset) -> Result<(LabeledDataset, LabeledDataset)> {
        match *self {
            SplitRule::TrainFraction(f) => data.time_split(f),
            SplitRule::TrainSize(n) => data.split_at(n),
        }
    }
}

fn default_scenarios() -> Vec<Scenario> {
    Scenario::ALL.to_vec()
}

fn default_holdout() -> f64 {
    0.2
}

fn default_bootstrap() -> usize {
    DEFAULT_REPLICATES
}

fn default_grid() -> ParamGrid {
    ParamGrid::default_search()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub split: SplitRule,
    #[serde(default = "default_grid")]
    pub grid: ParamGrid,
    /// Values for parameters the grid does not vary. The seed is replaced
    /// per scenario.
    #[serde(default)]
    pub base_params: GbdtParams,
    /// Trailing fraction of the training rows used for grid-search validation.
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    #[serde(default)]
    pub costs: CostParams,
    #[serde(default = "default_bootstrap")]
    pub n_bootstrap: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            scenarios: default_scenarios(),
            split: SplitRule::default(),
            grid: default_grid(),
            base_params: GbdtParams::default(),
            holdout_fraction: default_holdout(),
            costs: CostParams::default(),
            n_bootstrap: default_bootstrap(),
            master_seed: 0,
            output_dir: output_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Config("no scenarios configured".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.scenarios.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::Config(format!("scenario {dup} listed twice")));
        }
        if self.n_bootstrap < 2 {
            return Err(Error::Config("n_bootstrap must be at least 2".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Config(format!("holdout_fraction {} outside (0, 1)", self.holdout_fraction)));
        }
        if let SplitRule::TrainFraction(f) = self.split {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("train_fraction {f} outside (0, 1)")));
            }
        }
        self.costs.validate()
    }

    pub fn scenario_seeds(&self, scenario: Scenario) -> ScenarioSeeds {
        ScenarioSeeds {
            fit: derive_seed(self.master_seed, &[scenario.acronym(), "fit"]),
            bootstrap: derive_seed(self.master_seed, &[scenario.acronym(), "bootstrap"]),
        }
    }
}

/// Seeds depend only on the master seed and the scenario, never on which
/// other scenarios run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSeeds {
    pub fit: u64,
    pub bootstrap: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub seeds: ScenarioSeeds,
    pub best_params: GbdtParams,
    pub validation_auc: f64,
    pub grid: Vec<GridPoint>,
    pub metrics: MetricSummary,
    pub importance: GlobalImportance,
    pub model_fingerprint: String,
    pub model_path: PathBuf,
}

pub fn model_file_name(scenario: Scenario) -> String {
    format!("model_{}.json", scenario.slug())
}

/// Runs one scenario on an already split dataset and saves its model under
/// `<output_dir>/models/`.
pub fn run_scenario(
    train: &LabeledDataset,
    test: &LabeledDataset,
    scenario: Scenario,
    config: &ExperimentConfig,
) -> Result<ScenarioResult> {
    let annotate = |e: Error| Error::Scenario {
        scenario: scenario.acronym().to_string(),
        source: Box::new(e),
    };
    (|| {
        let seeds = config.scenario_seeds(scenario);
        let train = train.select_scenario(scenario)?;
        let test = test.select_scenario(scenario)?;

        let base = GbdtParams {
            seed: seeds.fit,
            ..config.base_params.clone()
        };
        let search = grid_search(&train, &base, &config.grid, config.holdout_fraction)?;
        let model = fit(&train, &search.best)?;
        let scores = model.predict_scores(&test)?;
        let metrics = bootstrap_evaluate(&scores, test.labels(), &config.costs, config.n_bootstrap, seeds.bootstrap)?;
        let importance = global_importance(&model, &test)?;

        let models_dir = config.output_dir.join("models");
        create_dir(&models_dir)?;
        let model_path = models_dir.join(model_file_name(scenario));
        model.save(&model_path)?;

        Ok(ScenarioResult {
            scenario,
            seeds,
            best_params: search.best,
            validation_auc: search.best_auc,
            grid: search.table,
            metrics,
            importance,
            model_fingerprint: model.schema_fingerprint.clone(),
            model_path,
        })
    })()
    .map_err(annotate)
}

/// Splits once, then runs every configured scenario in config order.
pub fn run_experiment(data: &LabeledDataset, config: &ExperimentConfig) -> Result<Vec<ScenarioResult>> {
    config.validate()?;
    let (train, test) = config.split.apply(data)?;
    config
        .scenarios
        .iter()
        .map(|&s| run_scenario(&train, &test, s, config))
        .collect()
}

/// Re-scores a saved model on `test` under (possibly different) costs.
pub fn evaluate_model(
    model: &GbdtModel,
    test: &LabeledDataset,
    costs: &CostParams,
    n_bootstrap: usize,
    seed: u64,
) -> Result<MetricSummary> {
    let scores = model.predict_scores(test)?;
    bootstrap_evaluate(&scores, test.labels(), costs, n_bootstrap, seed)
}

/// Picks the model's input columns out of `data` by name, in model order.
pub fn align_to_model(model: &GbdtModel, data: &LabeledDataset) -> Result<LabeledDataset> {
    let mismatch = || Error::SchemaMismatch {
        expected: model.schema_fingerprint.clone(),
        found: data.fingerprint(),
    };
    let keep = model
        .features
        .iter()
        .map(|f| data.columns().iter().position(|c| c.name == f.name).ok_or_else(mismatch))
        .collect::<Result<Vec<_>>>()?;
    let aligned = data.select_columns(&keep);
    model.check_schema(&aligned).map_err(|_| mismatch())?;
    Ok(aligned)
}

/// The scenario whose feature groups are exactly those the model uses.
pub fn model_scenario(model: &GbdtModel) -> Option<Scenario> {
    Scenario::ALL.into_iter().find(|s| {
        model.features.iter().all(|f| s.contains(f.group))
            && s.groups().iter().all(|g| model.features.iter().any(|f| f.group == *g))
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub scenario: Scenario,
    pub metrics: MetricSummary,
}

/// Columns `Scenario,AUC,F1,Precision,Recall,FinancialLoss`; ratio metrics
/// in percent, each cell formatted as `mean±std` with two decimals.
pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["Scenario", "AUC", "F1", "Precision", "Recall", "FinancialLoss"])?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.scenario.acronym().to_string(),
            m.auc.percent(),
            m.f1.percent(),
            m.precision.percent(),
            m.recall.percent(),
            m.financial_loss.plain(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("comparison csv", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn comparison_text(rows: &[ComparisonRow]) -> String {
    let header = ["Model", "Scenario", "AUC (%)", "F1 (%)", "Precision (%)", "Recall (%)", "Financial loss"];
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            let m = &r.metrics;
            [
                r.scenario.label().to_string(),
                r.scenario.acronym().to_string(),
                m.auc.percent(),
                m.f1.percent(),
                m.precision.percent(),
                m.recall.percent(),
                m.financial_loss.plain(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            cells
                .iter()
                .map(|row| row[c].chars().count())
                .chain([header[c].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |fields: &[&str]| -> String {
        let mut s = String::new();
        for (i, (f, w)) in fields.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - f.chars().count();
            if i < 2 {
                s.push_str(f);
                s.extend(std::iter::repeat_n(' ', pad));
            } else {
                s.extend(std::iter::repeat_n(' ', pad));
                s.push_str(f);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = String::new();
    let _ = writeln!(out, "{}", line(&header));
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    let _ = writeln!(out, "{}", "-".repeat(total));
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{}", line(&refs));
    }
    out
}

/// Bar-plot data for the financial loss, one record per scenario acronym.
pub fn loss_plot_json(rows: &[ComparisonRow]) -> Result<String> {
    #[derive(Serialize)]
    struct Bar {
        scenario: Scenario,
        mean: f64,
        std: f64,
    }
    let bars: Vec<Bar> = rows
        .iter()
        .map(|r| Bar {
            scenario: r.scenario,
            mean: r.metrics.financial_loss.mean,
            std: r.metrics.financial_loss.std,
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&bars)?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Serialize)]
struct ManifestScenario<'a> {
    scenario: Scenario,
    seeds: ScenarioSeeds,
    best_params: &'a GbdtParams,
    validation_auc: f64,
    metrics: &'a MetricSummary,
    model_file: String,
    model_fingerprint: &'a str,
    grid: &'a [GridPoint],
}

/// Files written by [`render_report`], relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub comparison_csv: PathBuf,
    pub comparison_txt: PathBuf,
    pub loss_plot: PathBuf,
    pub importance: Vec<(PathBuf, PathBuf)>,
    pub manifest: PathBuf,
}

/// Extra run information recorded in the manifest.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunContext {
    pub status: Option<RunStatus>,
    pub error: Option<String>,
    /// Free-form description of the input data (file names, synthetic spec).
    pub data: serde_json::Value,
}

/// Writes the comparison table (CSV and aligned text), loss plot data,
/// per-scenario importance files and the run manifest into
/// `config.output_dir`. Nothing in the output depends on the output
/// location, wall-clock time or worker count.
pub fn render_report(results: &[ScenarioResult], config: &ExperimentConfig, context: &RunContext) -> Result<ReportFiles> {
    let failed = context.status == Some(RunStatus::Failed);
    if results.is_empty() && !failed {
        return Err(Error::Argument("no scenario results to report".into()));
    }
    let dir = &config.output_dir;
    create_dir(dir)?;
    let rows: Vec<ComparisonRow> = results
        .iter()
        .map(|r| ComparisonRow {
            scenario: r.scenario,
            metrics: r.metrics.clone(),
        })
        .collect();

    let comparison_csv_path = dir.join("comparison.csv");
    let comparison_txt_path = dir.join("comparison.txt");
    let loss_path = dir.join("financial_loss.json");
    write_file(&comparison_csv_path, &comparison_csv(&rows)?)?;
    write_file(&comparison_txt_path, &comparison_text(&rows))?;
    write_file(&loss_path, &loss_plot_json(&rows)?)?;

    let imp_dir = dir.join("importance");
    create_dir(&imp_dir)?;
    let mut importance = Vec::new();
    for r in results {
        let csv_path = imp_dir.join(format!("importance_{}.csv", r.scenario.slug()));
        let plot_path = imp_dir.join(format!("importance_{}.json", r.scenario.slug()));
        r.importance.write(&csv_path, &plot_path)?;
        importance.push((csv_path, plot_path));
    }

    let mut config_view = serde_json::to_value(config)?;
    if let Some(obj) = config_view.as_object_mut() {
        obj.remove("output_dir");
    }
    let scenarios: Vec<ManifestScenario> = results
        .iter()
        .map(|r| ManifestScenario {
            scenario: r.scenario,
            seeds: r.seeds,
            best_params: &r.best_params,
            validation_auc: r.validation_auc,
            metrics: &r.metrics,
            model_file: format!("models/{}", model_file_name(r.scenario)),
            model_fingerprint: &r.model_fingerprint,
            grid: &r.grid,
        })
        .collect();
    let completed: Vec<Scenario> = results.iter().map(|r| r.scenario).collect();
    let manifest = serde_json::json!({
        "tool": "fraudlab",
        "version": env!("CARGO_PKG_VERSION"),
        "model_format": format!("{} v{}", crate::gbdt::MODEL_FORMAT, crate::gbdt::MODEL_VERSION),
        "status": context.status.clone().unwrap_or(RunStatus::Complete),
        "error": context.error,
        "completed_scenarios": completed,
        "tuning": "per-scenario grid search on a chronological holdout",
        "bootstrap": "test-set resampling with the F1-optimal threshold fixed on the full test set",
        "importance": "mean |SHAP| in margin space over the test set",
        "data": context.data,
        "config": config_view,
        "scenarios": scenarios,
    });
    let manifest_path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_file(&manifest_path, &text)?;

    Ok(ReportFiles {
        comparison_csv: comparison_csv_path,
        comparison_txt: comparison_txt_path,
        loss_plot: loss_path,
        importance,
        manifest: manifest_path,
    })
}
