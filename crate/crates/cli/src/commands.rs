use std::fmt::Write as _;
use std::path::Path;

use lmn_core::data::Splits;
use lmn_core::model::{Checkpoint, Model, ModelKind, ModelSizes};
use lmn_core::pretrain::{collect_hidden_states, pretrain_pipeline};
use lmn_core::seqae::{Factorization, FitOptions, MemorySize};
use lmn_core::train::{evaluate_accuracy, train_loop, TrainConfig, TrainOutcome};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{EvalConfig, FitAeConfig, ModelConfig, PretrainCmdConfig, SweepConfig, TrainCmdConfig};
use crate::{write_json, write_text, CliError};

fn save_checkpoint(ckpt: &Checkpoint, out: &Path, name: &str) -> Result<String, CliError> {
    ckpt.save(out.join(name))?;
    Ok(name.to_string())
}

fn accuracy_or_null(model: &Model, splits: &Splits, name: &str) -> Result<Option<f64>, CliError> {
    let samples = splits.split(name).unwrap_or_default();
    if samples.is_empty() {
        return Ok(None);
    }
    Ok(Some(evaluate_accuracy(model, samples)?))
}

/// Rows `p, svd_error, la_error` for every requested memory size; writes
/// the autoencoder with the largest size.
pub fn fit_ae(cfg: &FitAeConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let splits = cfg.data.load()?;
    let batch = match &cfg.unfolded_checkpoint {
        None => splits.train_batch()?,
        Some(path) => match Checkpoint::load(path)?.into_model()? {
            Model::Unfolded(u) => collect_hidden_states(&u, &splits.train)?,
            other => {
                return Err(CliError::Config(format!(
                    "unfolded_checkpoint holds a {} model, expected unfolded",
                    other.kind()
                )))
            }
        },
    };
    let fact = Factorization::new(&batch, MemorySize::Auto { max: None }, &FitOptions::default())?;
    let sizes: Vec<usize> = if cfg.memory_sizes.is_empty() {
        (1..=fact.rank()).collect()
    } else {
        cfg.memory_sizes.clone()
    };
    if sizes.contains(&0) {
        return Err(CliError::Config("memory_sizes entries must be at least 1".into()));
    }
    let mut csv = String::from("p,svd_error,la_error\n");
    for &p in &sizes {
        let ae = fact.params(p)?;
        let la = ae.reconstruction_error(&batch)?.total;
        writeln!(csv, "{p},{},{la}", fact.svd_error(p)).unwrap();
    }
    let largest = *sizes.iter().max().unwrap();
    let ae = fact.params(largest)?;
    eprintln!("fit-ae: rank {}, {} memory sizes, saved p = {}", fact.rank(), sizes.len(), ae.p);
    Ok(vec![
        write_text(out, "ae_errors.csv", &csv)?,
        save_checkpoint(&Checkpoint::from_autoencoder(&ae, Some(cfg.seed)), out, "autoencoder.json")?,
    ])
}

fn build_model(model: &ModelConfig, splits: &Splits, seed: u64) -> Result<Model, CliError> {
    let sizes = ModelSizes {
        input: splits.input_size(),
        hidden: model.hidden,
        memory: model.memory,
        output: splits.output_size(),
        k: model.k,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Model::random(model.kind, sizes, model.activation, &mut rng).map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Serialize)]
struct TrainMetrics {
    model: ModelKind,
    best_epoch: usize,
    best_val_accuracy: f64,
    test_accuracy: Option<f64>,
    parameter_count: Option<usize>,
    weights: usize,
}

fn train_metrics(outcome: &TrainOutcome, splits: &Splits) -> Result<TrainMetrics, CliError> {
    Ok(TrainMetrics {
        model: outcome.best.kind(),
        best_epoch: outcome.history.best_epoch,
        best_val_accuracy: outcome.history.best_val_accuracy,
        test_accuracy: accuracy_or_null(&outcome.best, splits, "test")?,
        parameter_count: outcome.best.core_parameter_count(),
        weights: outcome.best.weight_count(),
    })
}

pub fn train(cfg: &TrainCmdConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let splits = cfg.data.load()?;
    let model = build_model(&cfg.model, &splits, cfg.seed)?;
    let outcome = train_loop(model, &splits, &cfg.train)?;
    let metrics = train_metrics(&outcome, &splits)?;
    eprintln!(
        "train: {} best epoch {} validation accuracy {:.4}",
        metrics.model, metrics.best_epoch, metrics.best_val_accuracy
    );
    Ok(vec![
        save_checkpoint(&Checkpoint::from_model(&outcome.best, Some(cfg.seed)), out, "checkpoint.json")?,
        write_text(out, "history.csv", &outcome.history.to_csv())?,
        write_json(out, "metrics.json", &metrics)?,
    ])
}

pub fn pretrain(cfg: &PretrainCmdConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let splits = cfg.data.load()?;
    let outcome = pretrain_pipeline(&splits, &cfg.pretrain)?;
    let seed = Some(cfg.pretrain.seed);
    let lmn = Model::Lmn(outcome.lmn.clone());

    let mut profile = String::from("sequence,timestep,error\n");
    for (s, errs) in outcome.reconstruction.iter().enumerate() {
        for (t, e) in errs.iter().enumerate() {
            writeln!(profile, "{s},{},{e}", t + 1).unwrap();
        }
    }
    let mut outputs = vec![
        save_checkpoint(&Checkpoint::from_model(&Model::Unfolded(outcome.unfolded.clone()), seed), out, "unfolded.json")?,
        save_checkpoint(&Checkpoint::from_autoencoder(&outcome.autoencoder, seed), out, "autoencoder.json")?,
        save_checkpoint(&Checkpoint::from_model(&lmn, seed), out, "pretrained.json")?,
        write_json(out, "diagnostics.json", &outcome.diagnostics)?,
        write_text(out, "profile.csv", &profile)?,
        write_text(out, "unfolded_history.csv", &outcome.unfolded_history.to_csv())?,
    ];

    let mut metrics = json!({
        "pretrained_val_accuracy": accuracy_or_null(&lmn, &splits, "valid")?,
        "pretrained_test_accuracy": accuracy_or_null(&lmn, &splits, "test")?,
        "parameter_count": lmn.core_parameter_count(),
        "weights": lmn.weight_count(),
    });
    if let Some(ft) = &cfg.fine_tune {
        let tuned = train_loop(lmn, &splits, ft)?;
        let m = train_metrics(&tuned, &splits)?;
        metrics["finetuned_val_accuracy"] = json!(m.best_val_accuracy);
        metrics["finetuned_test_accuracy"] = json!(m.test_accuracy);
        metrics["finetuned_best_epoch"] = json!(m.best_epoch);
        outputs.push(save_checkpoint(&Checkpoint::from_model(&tuned.best, seed), out, "finetuned.json")?);
        outputs.push(write_text(out, "finetune_history.csv", &tuned.history.to_csv())?);
    }
    let d = &outcome.diagnostics;
    eprintln!(
        "pretrain: memory {} (rank {}), max |Δh| {:.3e}, max |Δy| {:.3e}",
        outcome.lmn.memory_size(),
        d.ae_rank,
        d.max_hidden_diff,
        d.max_output_diff
    );
    outputs.push(write_json(out, "metrics.json", &metrics)?);
    Ok(outputs)
}

pub fn eval(cfg: &EvalConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| CliError::Config("eval needs a checkpoint path".into()))?;
    let ckpt = Checkpoint::load(path)?;
    let seed = ckpt.rng_seed;
    let model = ckpt.into_model()?;
    let splits = cfg.data.load()?;
    let mut accuracy = serde_json::Map::new();
    for name in lmn_core::data::SPLITS {
        accuracy.insert(name.to_string(), json!(accuracy_or_null(&model, &splits, name)?));
    }
    let metrics = json!({
        "checkpoint": path,
        "model": model.kind(),
        "checkpoint_seed": seed,
        "accuracy": accuracy,
        "parameter_count": model.core_parameter_count(),
        "weights": model.weight_count(),
    });
    eprintln!("eval: {} {}", model.kind(), serde_json::Value::Object(accuracy));
    Ok(vec![write_json(out, "metrics.json", &metrics)?])
}

/// One training run per (size, l2) grid point. For LMNs the hidden-unit
/// count is functional plus memory units.
pub fn sweep(cfg: &SweepConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let is_lmn = matches!(cfg.kind, ModelKind::LmnA | ModelKind::LmnB);
    let points: Vec<(usize, usize)> = if is_lmn {
        cfg.lmn_pairs.clone()
    } else {
        cfg.hidden_grid.iter().map(|&h| (h, 0)).collect()
    };
    if points.is_empty() || cfg.l2_grid.is_empty() {
        return Err(CliError::Config("sweep grids must be non-empty".into()));
    }
    let splits = cfg.data.load()?;
    let mut csv = String::from("model,hidden_units,functional,memory,l2,val_accuracy,best_epoch,parameter_count,weights\n");
    for &(f, m) in &points {
        for &l2 in &cfg.l2_grid {
            let model_cfg = ModelConfig {
                kind: cfg.kind,
                hidden: f,
                memory: m,
                k: cfg.k,
                activation: cfg.activation,
            };
            let model = build_model(&model_cfg, &splits, cfg.seed)?;
            let train_cfg = TrainConfig { l2, ..cfg.train.clone() };
            let outcome = train_loop(model, &splits, &train_cfg)?;
            let h = &outcome.history;
            let count = outcome.best.core_parameter_count().map_or(String::new(), |c| c.to_string());
            writeln!(
                csv,
                "{},{},{f},{m},{l2},{},{},{count},{}",
                cfg.kind,
                f + m,
                h.best_val_accuracy,
                h.best_epoch,
                outcome.best.weight_count()
            )
            .unwrap();
            eprintln!("sweep: {} f={f} m={m} l2={l2} validation {:.4}", cfg.kind, h.best_val_accuracy);
        }
    }
    Ok(vec![write_text(out, "sweep.csv", &csv)?])
}
