use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use fraudlab_core::dataset::{ingest_csv, DatasetSchema, LabeledDataset};
use fraudlab_core::experiment::{
    align_to_model, comparison_csv, comparison_text, evaluate_model, model_file_name, model_scenario, render_report,
    run_scenario, ComparisonRow, ExperimentConfig, RunContext, RunStatus,
};
use fraudlab_core::explain::{global_importance, raw_feature_importance, tree_shap, GlobalImportance};
use fraudlab_core::gbdt::{fit, grid_search, GbdtModel, GbdtParams};
use fraudlab_core::synthgen::generate as generate_raw;
use fraudlab_core::{Error, Result};
use log::info;
use sha2::{Digest, Sha256};

use crate::config::CliConfig;

/// Largest tolerated `|base_value + sum(phi) - margin|` when explaining rows.
const EFFICIENCY_TOLERANCE: f64 = 1e-8;

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn generate(config: &CliConfig) -> Result<()> {
    let spec = config.synth()?;
    let raw = generate_raw(spec)?;
    create_parent(&config.data.csv)?;
    create_parent(&config.data.schema)?;
    raw.save_csv(&config.data.csv, &spec.label_column, &spec.order_column)?;
    spec.dataset_schema().save(&config.data.schema)?;

    let labels = &raw.labels;
    let (train, test) = labels.split_at(spec.train_size);
    let count = |s: &[u8]| s.iter().filter(|&&y| y == 1).count();
    println!(
        "wrote {} rows ({} fraud, {:.2}%) to {}",
        labels.len(),
        count(labels),
        100.0 * raw.fraud_rate(),
        config.data.csv.display()
    );
    for (name, seg) in [("train", train), ("test", test)] {
        let n = count(seg);
        println!(
            "  {name:<5} rows {:>7}  fraud {:>6}  rate {:.2}%",
            seg.len(),
            n,
            100.0 * n as f64 / seg.len().max(1) as f64
        );
    }
    println!("schema: {}", config.data.schema.display());
    Ok(())
}

struct LoadedData {
    data: LabeledDataset,
    context: serde_json::Value,
}

fn load_data(config: &CliConfig) -> Result<LoadedData> {
    let schema = DatasetSchema::load(&config.data.schema)?;
    let raw = ingest_csv(&config.data.csv, &schema.features()?, &schema.label_column, &schema.order_column)?;
    let data = raw.encode()?;
    let bytes = std::fs::read(&config.data.csv).map_err(|e| Error::io(&config.data.csv, e))?;
    let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let context = serde_json::json!({
        "csv": config.data.csv.display().to_string(),
        "csv_sha256": digest,
        "n_rows": data.n_rows(),
        "n_fraud": data.n_fraud(),
        "encoded_columns": data.n_features(),
        "schema_fingerprint": data.fingerprint(),
    });
    info!(
        "loaded {} rows, {} encoded columns from {}",
        data.n_rows(),
        data.n_features(),
        config.data.csv.display()
    );
    Ok(LoadedData { data, context })
}

fn split(exp: &ExperimentConfig, data: &LabeledDataset) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = exp.split.apply(data)?;
    info!(
        "train {} rows ({} fraud), test {} rows ({} fraud)",
        train.n_rows(),
        train.n_fraud(),
        test.n_rows(),
        test.n_fraud()
    );
    Ok((train, test))
}

pub fn train(config: &CliConfig) -> Result<()> {
    let exp = config.experiment()?;
    let loaded = load_data(config)?;
    let (train, _) = split(exp, &loaded.data)?;
    let models_dir = exp.output_dir.join("models");
    for &scenario in &exp.scenarios {
        let seeds = exp.scenario_seeds(scenario);
        let annotate = |e: Error| Error::Scenario {
            scenario: scenario.acronym().into(),
            source: Box::new(e),
        };
        let data = train.select_scenario(scenario).map_err(annotate)?;
        let base = GbdtParams {
            seed: seeds.fit,
            ..exp.base_params.clone()
        };
        let search = grid_search(&data, &base, &exp.grid, exp.holdout_fraction).map_err(annotate)?;
        let model = fit(&data, &search.best).map_err(annotate)?;
        let path = models_dir.join(model_file_name(scenario));
        create_parent(&path)?;
        model.save(&path)?;
        let mut summary = serde_json::to_string_pretty(&search)?;
        summary.push('\n');
        write_file(&models_dir.join(format!("grid_{}.json", scenario.slug())), &summary)?;
        println!(
            "{:<6} validation AUC {:.4}  lr {} depth {} trees {} mcw {}  -> {}",
            scenario.acronym(),
            search.best_auc,
            search.best.learning_rate,
            search.best.max_depth,
            search.best.n_trees,
            search.best.min_child_weight,
            path.display()
        );
    }
    Ok(())
}

pub fn evaluate(config: &CliConfig, models: &[PathBuf]) -> Result<()> {
    let exp = config.experiment()?;
    let paths: Vec<PathBuf> = if models.is_empty() {
        exp.scenarios
            .iter()
            .map(|&s| exp.output_dir.join("models").join(model_file_name(s)))
            .collect()
    } else {
        models.to_vec()
    };
    let loaded = load_data(config)?;
    let (_, test) = split(exp, &loaded.data)?;

    let mut rows = Vec::new();
    for path in &paths {
        let model = GbdtModel::load(path)?;
        let scenario = model_scenario(&model).ok_or_else(|| {
            Error::Data(format!("{}: model features do not form a scenario", path.display()))
        })?;
        let test = align_to_model(&model, &test)?;
        let metrics = evaluate_model(
            &model,
            &test,
            &exp.costs,
            exp.n_bootstrap,
            exp.scenario_seeds(scenario).bootstrap,
        )?;
        rows.push(ComparisonRow { scenario, metrics });
    }
    write_file(&exp.output_dir.join("evaluation.csv"), &comparison_csv(&rows)?)?;
    let text = comparison_text(&rows);
    write_file(&exp.output_dir.join("evaluation.txt"), &text)?;
    print!("{text}");
    println!(
        "costs: acl {} clv {} churn {}",
        exp.costs.acl, exp.costs.clv, exp.costs.churn_given_reject
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Segment {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowSelector {
    All,
    Rows(Vec<usize>),
}

impl RowSelector {
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().eq_ignore_ascii_case("all") {
            return Ok(RowSelector::All);
        }
        let rows = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Argument(format!("bad row index {s:?} in --rows")))
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(Error::Argument("--rows is empty".into()));
        }
        Ok(RowSelector::Rows(rows))
    }
}

fn importance_listing(title: &str, imp: &GlobalImportance, top: usize) -> String {
    let mut s = format!("{title}\n");
    for (i, e) in imp.entries.iter().take(top).enumerate() {
        let _ = writeln!(s, "{:>3}  {:<28} {:<9} {:.6}", i + 1, e.feature, e.group, e.mean_abs_shap);
    }
    s
}

pub fn explain(config: &CliConfig, model_path: &Path, rows: &RowSelector, segment: Segment) -> Result<()> {
    let exp = config.experiment()?;
    let model = GbdtModel::load(model_path)?;
    let loaded = load_data(config)?;
    let data = match segment {
        Segment::All => loaded.data,
        Segment::Train => split(exp, &loaded.data)?.0,
        Segment::Test => split(exp, &loaded.data)?.1,
    };
    let data = align_to_model(&model, &data)?;
    let stem = model_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let dir = exp.output_dir.join("explain");

    match rows {
        RowSelector::All => {
            let imp = global_importance(&model, &data)?;
            let raw = raw_feature_importance(&model, &data)?;
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let csv = dir.join(format!("importance_{stem}.csv"));
            imp.write(&csv, dir.join(format!("importance_{stem}.json")))?;
            raw.write(
                dir.join(format!("importance_raw_{stem}.csv")),
                dir.join(format!("importance_raw_{stem}.json")),
            )?;
            print!("{}", importance_listing("mean |SHAP| per encoded column:", &imp, 15));
            for (g, v) in imp.group_totals() {
                println!("  group {g:<9} {v:.6}");
            }
            println!("wrote {}", csv.display());
        }
        RowSelector::Rows(idx) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["row".to_string(), "base_value".into(), "margin".into(), "score".into()];
            header.extend(data.feature_names());
            w.write_record(&header).map_err(Error::from)?;
            let mut worst: f64 = 0.0;
            for &i in idx {
                if i >= data.n_rows() {
                    return Err(Error::Argument(format!(
                        "row {i} out of range: segment has {} rows",
                        data.n_rows()
                    )));
                }
                let e = tree_shap(&model, data.row(i))?;
                let gap = e.efficiency_gap();
                worst = worst.max(gap.abs());
                println!(
                    "row {i}: base_value {:.6} + sum(phi) {:.6} = {:.6}; margin {:.6}; |gap| {:.2e}",
                    e.base_value,
                    e.phi.iter().sum::<f64>(),
                    e.base_value + e.phi.iter().sum::<f64>(),
                    e.prediction_margin,
                    gap.abs()
                );
                let mut record = vec![
                    i.to_string(),
                    e.base_value.to_string(),
                    e.prediction_margin.to_string(),
                    fraudlab_core::gbdt::sigmoid(e.prediction_margin).to_string(),
                ];
                record.extend(e.phi.iter().map(|p| p.to_string()));
                w.write_record(&record).map_err(Error::from)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::io("shap csv", e.into_error()))?;
            let path = dir.join(format!("shap_{stem}.csv"));
            write_file(&path, &String::from_utf8(bytes).expect("csv output is utf-8"))?;
            if worst >= EFFICIENCY_TOLERANCE {
                return Err(Error::ModelIntegrity(format!(
                    "efficiency identity violated: |gap| {worst:e} >= {EFFICIENCY_TOLERANCE:e}"
                )));
            }
            println!("efficiency identity holds (max |gap| {worst:.2e}); wrote {}", path.display());
        }
    }
    Ok(())
}

pub fn compare(config: &CliConfig) -> Result<()> {
    let exp = config.experiment()?;
    let loaded = load_data(config)?;
    let (train, test) = split(exp, &loaded.data)?;
    let mut results = Vec::new();
    for &scenario in &exp.scenarios {
        info!("scenario {}", scenario.acronym());
        match run_scenario(&train, &test, scenario, exp) {
            Ok(r) => {
                info!(
                    "{}: test AUC {:.4}, F1 {:.4}, loss {:.2}",
                    scenario.acronym(),
                    r.metrics.auc.mean,
                    r.metrics.f1.mean,
                    r.metrics.financial_loss.mean
                );
                results.push(r);
            }
            Err(e) => {
                let context = RunContext {
                    status: Some(RunStatus::Failed),
                    error: Some(e.to_string()),
                    data: loaded.context.clone(),
                };
                render_report(&results, exp, &context)?;
                return Err(e);
            }
        }
    }
    let context = RunContext {
        status: Some(RunStatus::Complete),
        error: None,
        data: loaded.context,
    };
    let files = render_report(&results, exp, &context)?;
    let rows: Vec<ComparisonRow> = results
        .iter()
        .map(|r| ComparisonRow {
            scenario: r.scenario,
            metrics: r.metrics.clone(),
        })
        .collect();
    print!("{}", comparison_text(&rows));
    println!("report: {}", files.comparison_csv.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_selector() {
        assert_eq!(RowSelector::parse("all").unwrap(), RowSelector::All);
        assert_eq!(RowSelector::parse("3, 1").unwrap(), RowSelector::Rows(vec![3, 1]));
        assert!(RowSelector::parse("1,x").is_err());
    }
}
