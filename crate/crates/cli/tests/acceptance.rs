//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fraudlab_core::dataset::{EncodedColumn, FeatureGroup, LabeledDataset, Scenario};
use fraudlab_core::explain::{brute_force_shap, tree_shap};
use fraudlab_core::gbdt::{fit, fit_with_history, logistic_grad_hess, logistic_loss, GbdtModel, GbdtParams, Node, Tree};
use fraudlab_core::metrics::{financial_loss, roc_auc, ConfusionCounts, CostParams};
use fraudlab_core::synthgen::{generate, SynthSpec};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances and sizes, pinned.
const SHAP_ORACLE_TOL: f64 = 1e-9;
const SHAP_ORACLE_ENSEMBLES: usize = 250;
const SHAP_ORACLE_BUDGET: Duration = Duration::from_secs(60);
const EFFICIENCY_TOL: f64 = 1e-8;
const EFFICIENCY_ROWS: usize = 1_000;
const AUC_TOL: f64 = 1e-12;
const AUC_INSTANCES: usize = 500;
const FUSED_AUC_MARGIN: f64 = 0.02;
const COMPARE_BUDGET: Duration = Duration::from_secs(300);
const SEPARABLE_AUC: f64 = 0.99;
const FD_REL_TOL: f64 = 1e-6;
const Z_99: f64 = 2.576;

type Check<'a> = Box<dyn FnOnce() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_tree(rng: &mut ChaCha8Rng, n_features: usize, max_depth: usize) -> Tree {
    fn grow(rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>, n_features: usize, depth: usize, max_depth: usize) -> usize {
        let idx = nodes.len();
        nodes.push(Node::Leaf { weight: 0.0, cover: 0.0 });
        if depth < max_depth && rng.random::<f64>() < 0.75 {
            let feature = rng.random_range(0..n_features);
            let threshold = rng.random_range(-1.0..1.0);
            let default_left = rng.random();
            let left = grow(rng, nodes, n_features, depth + 1, max_depth);
            let right = grow(rng, nodes, n_features, depth + 1, max_depth);
            let cover = nodes[left].cover() + nodes[right].cover();
            nodes[idx] = Node::Split {
                feature,
                threshold,
                default_left,
                left,
                right,
                cover,
            };
        } else {
            nodes[idx] = Node::Leaf {
                weight: rng.random_range(-1.5..1.5),
                cover: rng.random_range(0.05..20.0),
            };
        }
        idx
    }
    let mut nodes = Vec::new();
    grow(rng, &mut nodes, n_features, 0, max_depth);
    Tree { nodes }
}

fn criterion_shap_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    let mut worst: f64 = 0.0;
    let mut rows_checked = 0;
    for _ in 0..SHAP_ORACLE_ENSEMBLES {
        let n_features = rng.random_range(1..=8);
        let n_trees = rng.random_range(1..=5);
        let depth = rng.random_range(1..=3);
        let features = (0..n_features)
            .map(|i| EncodedColumn {
                name: format!("f{i}"),
                group: FeatureGroup::ALL[i % 3],
                source: format!("f{i}"),
            })
            .collect();
        let trees = (0..n_trees).map(|_| random_tree(&mut rng, n_features, depth)).collect();
        let model = GbdtModel::new(rng.random_range(-2.0..0.0), GbdtParams::default(), features, trees)
            .expect("random ensemble is valid");
        for _ in 0..4 {
            let row: Vec<f64> = (0..n_features)
                .map(|_| if rng.random::<f64>() < 0.15 { f64::NAN } else { rng.random_range(-1.2..1.2) })
                .collect();
            let fast = tree_shap(&model, &row).unwrap();
            let slow = brute_force_shap(&model, &row).unwrap();
            for (a, b) in fast.phi.iter().zip(&slow.phi) {
                worst = worst.max((a - b).abs());
            }
            worst = worst.max((fast.base_value - slow.base_value).abs());
            rows_checked += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < SHAP_ORACLE_TOL && elapsed < SHAP_ORACLE_BUDGET,
        format!(
            "{SHAP_ORACLE_ENSEMBLES} ensembles / {rows_checked} rows, max |tree_shap - brute_force| = {worst:.2e} \
             (tol {SHAP_ORACLE_TOL:e}), {:.2} s (budget {} s)",
            elapsed.as_secs_f64(),
            SHAP_ORACLE_BUDGET.as_secs()
        ),
    )
}

fn regime_shift_data() -> LabeledDataset {
    generate(&SynthSpec::regime_shift(2024)).unwrap().encode().unwrap()
}

fn criterion_shap_efficiency(data: &LabeledDataset) -> Outcome {
    let (train, test) = data.split_at(60_708).unwrap();
    let params = GbdtParams {
        n_trees: 200,
        max_depth: 5,
        learning_rate: 0.1,
        seed: 11,
        ..Default::default()
    };
    let model = fit(&train, &params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let picks = sample(&mut rng, test.n_rows(), EFFICIENCY_ROWS);
    let mut worst: f64 = 0.0;
    for i in picks.iter() {
        let e = tree_shap(&model, test.row(i)).unwrap();
        let direct = model.predict_margin(test.row(i));
        worst = worst.max((e.base_value + e.phi.iter().sum::<f64>() - direct).abs());
    }
    outcome(
        worst < EFFICIENCY_TOL && data.n_features() == 48,
        format!(
            "{} rows x {} columns, {} trees: max |base + sum(phi) - margin| over {EFFICIENCY_ROWS} test rows = {worst:.2e} \
             (tol {EFFICIENCY_TOL:e})",
            data.n_rows(),
            data.n_features(),
            model.trees.len()
        ),
    )
}

fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn criterion_auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut with_ties = 0;
    for _ in 0..AUC_INSTANCES {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(1..=n.max(2));
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
        labels[0] = 1;
        labels[1] = 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..levels as u32)) / levels as f64)
            .collect();
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            with_ties += 1;
        }
        worst = worst.max((roc_auc(&scores, &labels).unwrap() - pair_count_auc(&scores, &labels)).abs());
    }
    outcome(
        worst < AUC_TOL,
        format!("{AUC_INSTANCES} instances ({with_ties} with ties), max |rank - pairs| = {worst:.2e} (tol {AUC_TOL:e})"),
    )
}

fn criterion_loss() -> Outcome {
    let costs = CostParams {
        acl: 1000.0,
        clv: 500.0,
        churn_given_reject: 0.2,
    };
    let counts = |fn_: u64, fp: u64| ConfusionCounts { tp: 0, fp, tn: 0, fn_ };
    let hand = [
        (2, 3, 2300.0),
        (0, 0, 0.0),
        (1, 0, 1000.0),
        (0, 1, 100.0),
        (10, 40, 14_000.0),
    ];
    let exact = hand.iter().all(|&(f, p, want)| financial_loss(&counts(f, p), &costs) == want);

    let mut runner = TestRunner::new(PropConfig {
        cases: 2_000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (0u64..100_000, 0u64..100_000, 0.0..1e5f64, 0.0..1e5f64, 0.0..=1.0f64, 1u64..1000);
    let props = runner.run(&strategy, |(f, p, acl, clv, churn, k)| {
        let c = CostParams {
            acl,
            clv,
            churn_given_reject: churn,
        };
        let base = financial_loss(&counts(f, p), &c);
        prop_assert!(financial_loss(&counts(f + 1, p), &c) >= base);
        prop_assert!(financial_loss(&counts(f, p + 1), &c) >= base);
        let split = financial_loss(&counts(f, 0), &c) + financial_loss(&counts(0, p), &c);
        prop_assert!((base - split).abs() <= 1e-9 * base.max(1.0));
        let scaled = financial_loss(&counts(k * f, k * p), &c);
        prop_assert!((scaled - k as f64 * base).abs() <= 1e-9 * scaled.max(1.0));
        Ok(())
    });
    outcome(
        exact && props.is_ok(),
        format!(
            "hand values exact (fn=2, fp=3 -> {}): {exact}; monotonicity/additivity/scaling over 2000 cases: {}",
            financial_loss(&counts(2, 3), &costs),
            match &props {
                Ok(()) => "ok".to_string(),
                Err(e) => format!("failed: {e}"),
            }
        ),
    )
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fraudlab")
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(bin())
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("FRAUDLAB_CONFIG")
        .output()
        .expect("run fraudlab")
}

fn write_config(dir: &Path, synth: &str, experiment: &str) -> PathBuf {
    let text = format!(
        "[data]\ncsv = {:?}\nschema = {:?}\n\n[synth]\n{synth}\n\n[experiment]\n{experiment}\n",
        dir.join("data/dataset.csv"),
        dir.join("data/schema.toml"),
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL_GRID: &str = "[experiment.grid]\nlearning_rate = [0.1]\nmax_depth = [3, 5]\nn_trees = [100, 300]\n";

fn criterion_table_shape(dir: &Path) -> Outcome {
    let config = write_config(
        dir,
        "preset = \"complementary\"\nnoise_seed = 7",
        &format!("output_dir = {:?}\nmaster_seed = 1\nn_bootstrap = 100\n{SMALL_GRID}", dir.join("run")),
    );
    let config = config.to_str().unwrap();
    let gen = run_cli(&["generate", "--config", config]);
    if !gen.status.success() {
        return outcome(false, format!("generate failed: {}", String::from_utf8_lossy(&gen.stderr)));
    }
    let start = Instant::now();
    let run = run_cli(&["compare", "--config", config]);
    let elapsed = start.elapsed();
    if !run.status.success() {
        return outcome(false, format!("compare failed: {}", String::from_utf8_lossy(&run.stderr)));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run/manifest.json")).unwrap()).unwrap();
    let mut metric = BTreeMap::new();
    for s in manifest["scenarios"].as_array().unwrap() {
        let m = &s["metrics"];
        let get = |k: &str| m[k]["mean"].as_f64().unwrap();
        metric.insert(
            s["scenario"].as_str().unwrap().to_string(),
            (get("auc"), get("f1"), get("financial_loss")),
        );
    }
    let fused = metric[Scenario::SMC.acronym()];
    let singles = [Scenario::S, Scenario::M, Scenario::C];
    let f1_ok = singles.iter().all(|s| fused.1 > metric[s.acronym()].1);
    let loss_ok = singles.iter().all(|s| fused.2 < metric[s.acronym()].2);
    let min_gap = singles
        .iter()
        .map(|s| fused.0 - metric[s.acronym()].0)
        .fold(f64::INFINITY, f64::min);
    let rows = std::fs::read_to_string(dir.join("run/comparison.csv")).unwrap().lines().count() - 1;
    let best_single_f1 = singles.iter().map(|s| metric[s.acronym()].1).fold(0.0, f64::max);
    let best_single_loss = singles
        .iter()
        .map(|s| metric[s.acronym()].2)
        .fold(f64::INFINITY, f64::min);
    outcome(
        f1_ok && loss_ok && min_gap >= FUSED_AUC_MARGIN && elapsed < COMPARE_BUDGET && rows == 6,
        format!(
            "S+M+C F1 {:.4} vs best single {:.4}; loss {:.0} vs best single {:.0}; min AUC gain over S/M/C {:.4} \
             (need >= {FUSED_AUC_MARGIN}); {rows} table rows; compare took {:.1} s (budget {} s)",
            fused.1,
            best_single_f1,
            fused.2,
            best_single_loss,
            min_gap,
            elapsed.as_secs_f64(),
            COMPARE_BUDGET.as_secs()
        ),
    )
}

fn criterion_gbdt_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let make = |rng: &mut ChaCha8Rng, n: usize, start: i64| {
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<u8> = xs.iter().map(|&x| u8::from(x > 0.35)).collect();
        let col = vec![EncodedColumn {
            name: "x".into(),
            group: FeatureGroup::Bureau,
            source: "x".into(),
        }];
        LabeledDataset::new(col, xs, labels, (start..start + n as i64).collect()).unwrap()
    };
    let train = make(&mut rng, 3_000, 0);
    let test = make(&mut rng, 2_000, 3_000);
    let params = GbdtParams {
        n_trees: 50,
        max_depth: 2,
        ..Default::default()
    };
    let (model, history) = fit_with_history(&train, &params).unwrap();
    let auc = roc_auc(&model.predict_margins(&test).unwrap(), test.labels()).unwrap();

    let mut worst_fd: f64 = 0.0;
    for _ in 0..10 {
        let m = rng.random_range(-6.0..6.0);
        let y = u8::from(rng.random::<bool>());
        let h = 1e-4;
        let (g, hs) = logistic_grad_hess(m, y);
        let g_fd = (logistic_loss(m + h, y) - logistic_loss(m - h, y)) / (2.0 * h);
        let (gp, _) = logistic_grad_hess(m + h, y);
        let (gm, _) = logistic_grad_hess(m - h, y);
        let h_fd = (gp - gm) / (2.0 * h);
        worst_fd = worst_fd.max((g - g_fd).abs() / g.abs()).max((hs - h_fd).abs() / hs);
    }

    // Noisy multi-feature data so the loss path is non-trivial.
    let noisy = generate(&SynthSpec {
        n_rows: 6_000,
        train_size: 3_000,
        ..SynthSpec::complementary(3)
    })
    .unwrap()
    .encode()
    .unwrap();
    let (_, path) = fit_with_history(
        &noisy,
        &GbdtParams {
            n_trees: 150,
            max_depth: 4,
            learning_rate: 0.3,
            ..Default::default()
        },
    )
    .unwrap();
    let rate = noisy.fraud_rate();
    let initial = noisy
        .labels()
        .iter()
        .map(|&y| logistic_loss((rate / (1.0 - rate)).ln(), y))
        .sum::<f64>()
        / noisy.n_rows() as f64;
    let mono = history.windows(2).all(|w| w[1] <= w[0])
        && path.windows(2).all(|w| w[1] <= w[0])
        && path[0] <= initial;
    outcome(
        auc >= SEPARABLE_AUC && worst_fd < FD_REL_TOL && mono,
        format!(
            "separable test AUC {auc:.4} (need >= {SEPARABLE_AUC}); finite-difference max rel err {worst_fd:.2e} \
             (tol {FD_REL_TOL:e}); training loss non-increasing over {} + {} rounds: {mono} \
             ({:.5} -> {:.5})",
            history.len(),
            path.len(),
            initial,
            path.last().unwrap()
        ),
    )
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_determinism(dir: &Path) -> Outcome {
    let config = write_config(
        dir,
        "preset = \"complementary\"\nnoise_seed = 21\nn_rows = 12000\ntrain_size = 7200",
        &format!(
            "output_dir = {:?}\nmaster_seed = 3\n[experiment.base_params]\nsubsample = 0.8\n{SMALL_GRID}",
            dir.join("unused")
        ),
    );
    let config = config.to_str().unwrap();
    let gen = run_cli(&["generate", "--config", config]);
    if !gen.status.success() {
        return outcome(false, format!("generate failed: {}", String::from_utf8_lossy(&gen.stderr)));
    }
    let runs = [("1", "a"), ("8", "b"), ("1", "c"), ("8", "d")];
    for (threads, name) in runs {
        let out = dir.join(name);
        let r = run_cli(&["compare", "--config", config, "--threads", threads, "--out", out.to_str().unwrap()]);
        if !r.status.success() {
            return outcome(false, format!("compare failed: {}", String::from_utf8_lossy(&r.stderr)));
        }
    }
    let reference = files_under(&dir.join("a"));
    let mut mismatches = Vec::new();
    for (_, name) in &runs[1..] {
        let files = files_under(&dir.join(name));
        if files != reference {
            mismatches.push(format!("{name}: file list differs"));
            continue;
        }
        for f in &files {
            if std::fs::read(dir.join("a").join(f)).unwrap() != std::fs::read(dir.join(name).join(f)).unwrap() {
                mismatches.push(format!("{name}/{}", f.display()));
            }
        }
    }
    let n_models = reference.iter().filter(|p| p.starts_with("models")).count();
    outcome(
        mismatches.is_empty() && n_models == 6,
        format!(
            "4 compare runs (threads 1, 8, 1, 8): {} files each, {n_models} models, mismatches: {}",
            reference.len(),
            if mismatches.is_empty() { "none".to_string() } else { mismatches.join(", ") }
        ),
    )
}

fn band(count: usize, n: usize, p: f64) -> (bool, f64) {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    let z = (count as f64 - mean) / sd;
    (z.abs() <= Z_99, z)
}

fn criterion_split(data: &LabeledDataset) -> Outcome {
    let (train, test) = data.time_split(0.7).unwrap();
    let (ok_tr, z_tr) = band(train.n_fraud(), train.n_rows(), 0.0218);
    let (ok_te, z_te) = band(test.n_fraud(), test.n_rows(), 0.0037);
    let sizes = train.n_rows() == 60_708 && test.n_rows() == 26_018;
    outcome(
        sizes && ok_tr && ok_te,
        format!(
            "train {} rows, {} fraud ({:.3}%, z {z_tr:+.2}); test {} rows, {} fraud ({:.3}%, z {z_te:+.2}); \
             99% band |z| <= {Z_99}",
            train.n_rows(),
            train.n_fraud(),
            100.0 * train.fraud_rate(),
            test.n_rows(),
            test.n_fraud(),
            100.0 * test.fraud_rate()
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let regime = regime_shift_data();
    let table_dir = tmp.path().join("table");
    let det_dir = tmp.path().join("determinism");
    std::fs::create_dir_all(&table_dir).unwrap();
    std::fs::create_dir_all(&det_dir).unwrap();

    let criteria: Vec<(&str, Check)> = vec![
        ("1 SHAP oracle equivalence", Box::new(criterion_shap_oracle)),
        ("2 SHAP efficiency at scale", Box::new(|| criterion_shap_efficiency(&regime))),
        ("3 AUC oracle", Box::new(criterion_auc_oracle)),
        ("4 financial loss exactness", Box::new(criterion_loss)),
        ("5 fused scenario dominance", Box::new(|| criterion_table_shape(&table_dir))),
        ("6 GBDT sanity", Box::new(criterion_gbdt_sanity)),
        ("7 determinism across thread counts", Box::new(|| criterion_determinism(&det_dir))),
        ("8 split fidelity", Box::new(|| criterion_split(&regime))),
    ];
    let mut failed = 0;
    println!("\nrunning {} acceptance criteria", criteria.len());
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} [{name}] {} ({:.1} s)",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("\nacceptance: {} passed, {failed} failed\n", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
