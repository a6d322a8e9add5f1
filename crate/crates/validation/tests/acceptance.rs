//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero when a binding criterion (1 to 7, 9) fails. Criterion 8 is a
//! soft check and never affects the exit code.
//!
//! Environment:
//! - `LMN_JSB_PATH`: JSB Chorales dataset JSON (default `data/jsb_chorales.json`
//!   at the workspace root). Criteria 7 and 8 are skipped without it.
//! - `LMN_ACCEPTANCE_FULL=1`: also run the long criterion 8 training run.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lmn_core::data::{
    frame_accuracy, load_dataset, make_synthetic, to_frames, Splits, SyntheticKind, SyntheticSizes, THRESHOLD,
};
use lmn_core::model::{parameter_count, Activation, CoreArch, LmnParams, Model, ModelKind, ModelSizes, RnnParams, UnfoldedParams, Variant};
use lmn_core::pretrain::{pretrain_pipeline, PretrainConfig};
use lmn_core::seqae::{build_data_matrix, fit, Factorization, FitOptions, MemorySize, SequenceBatch};
use lmn_core::train::{evaluate_accuracy, grad_check_report, train_loop, TrainConfig};
use lmn_core::Matrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Self {
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    fn skip(detail: impl Into<String>) -> Self {
        Self {
            status: Status::Skip,
            detail: detail.into(),
        }
    }
}

fn random_batch(seed: u64, sequences: usize, dim: usize, max_len: usize) -> SequenceBatch {
    let mut r = rng(seed);
    let seqs = (0..sequences)
        .map(|_| {
            let l = r.gen_range(1..=max_len);
            random_matrix(&mut r, l, dim)
        })
        .collect();
    SequenceBatch::new(seqs).unwrap()
}

/// 1. Full-rank iterative reconstruction is exact.
fn autoencoder_exactness() -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for seed in 0..25 {
        let start = Instant::now();
        let batch = random_batch(seed, 5, 4, 12);
        let ae = fit(&batch, MemorySize::Auto { max: None }).unwrap();
        for seq in batch.sequences() {
            let states = ae.encode(seq).unwrap();
            let l = seq.rows();
            let rec = ae.reconstruct(states.row(l - 1), l).unwrap();
            for t in 0..l {
                for (x, y) in seq.row(t).iter().zip(rec.row(l - 1 - t)) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        slowest = slowest.max(start.elapsed());
    }
    Outcome::check(
        worst < 1e-8 && slowest < Duration::from_secs(1),
        format!("25 random batches, max elementwise error {worst:.2e} (< 1e-8), slowest {slowest:.2?} (< 1 s)"),
    )
}

/// 2. `‖Ξ - ΞUUᵀ‖_F² = Σ_{i>p} S_i²` for every `p`, and the singular
///    values agree with an independent SVD.
fn eckart_young() -> Outcome {
    let rel = |a: f64, b: f64, energy: f64| (a - b).abs() / b.max(1e-12 * energy);
    let mut worst_identity = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut largest = (0, 0);
    for seed in 0..20 {
        // Full-size batch: residual against our own singular values.
        let batch = random_batch(100 + seed, 5, 4, 12);
        let xi = build_data_matrix(&batch);
        let energy = xi.sum_sq();
        let f = Factorization::new(&batch, MemorySize::Auto { max: None }, &FitOptions::default()).unwrap();
        for p in 1..=f.rank() {
            let u = f.svd().u.leading_columns(p);
            let residual = xi.sub(&xi.matmul(&u).matmul(&u.transpose())).sum_sq();
            worst_identity = worst_identity.max(rel(residual, f.svd_error(p), energy));
        }

        // Small batch (Ξ at most 20×20): brute-force oracle.
        let small = random_batch(200 + seed, 5, 4, 4);
        let xi = build_data_matrix(&small);
        largest = largest.max(xi.shape());
        let energy = xi.sum_sq();
        let oracle: Vec<f64> = nalgebra::SVD::new(to_na(&xi), false, false).singular_values.iter().copied().collect();
        let mut oracle_sq: Vec<f64> = oracle.iter().map(|s| s * s).collect();
        oracle_sq.sort_by(|a, b| b.total_cmp(a));
        let f = Factorization::new(&small, MemorySize::Auto { max: None }, &FitOptions::default()).unwrap();
        for p in 1..=f.rank() {
            let u = f.svd().u.leading_columns(p);
            let residual = xi.sub(&xi.matmul(&u).matmul(&u.transpose())).sum_sq();
            let tail: f64 = oracle_sq[p..].iter().sum();
            worst_oracle = worst_oracle.max(rel(residual, tail, energy));
            worst_oracle = worst_oracle.max(rel(f.svd_error(p), tail, energy));
        }
    }
    Outcome::check(
        worst_identity < 1e-6 && worst_oracle < 1e-6 && largest.0 <= 20 && largest.1 <= 20,
        format!(
            "max relative gap {worst_identity:.2e} on 5×(≤12)×4 batches, {worst_oracle:.2e} against nalgebra SVD on Ξ up to {}×{} (< 1e-6)",
            largest.0, largest.1
        ),
    )
}

/// 3. Transferred LMN-B reproduces the unfolded network at full rank.
fn pretraining_fidelity() -> Outcome {
    let start = Instant::now();
    let sizes = SyntheticSizes { train: 5, valid: 2, test: 2, length: 12, dim: 8, density_percent: 30 };
    let splits = make_synthetic(SyntheticKind::RandomBinary, sizes, 3).unwrap();
    let config = PretrainConfig {
        k: 3,
        hidden: 6,
        p_mem: MemorySize::Auto { max: None },
        unfolded_train: TrainConfig { learning_rate: 0.01, max_epochs: 20, patience: 20, seed: 3, ..TrainConfig::default() },
        selu_hidden: false,
        zero_last_output_lag: true,
        seed: 3,
    };
    let out = pretrain_pipeline(&splits, &config).unwrap();
    let d = &out.diagnostics;
    let epochs = out.unfolded_history.records.len() - 1;
    let elapsed = start.elapsed();
    Outcome::check(
        d.max_hidden_diff < 1e-6 && d.max_output_diff < 1e-6 && elapsed < Duration::from_secs(30) && epochs == 20,
        format!(
            "{epochs} epochs, memory {} = rank {}, max |Δh| {:.2e}, max |Δy| {:.2e} (< 1e-6), {elapsed:.2?} (< 30 s)",
            out.lmn.memory_size(),
            d.ae_rank,
            d.max_hidden_diff,
            d.max_output_diff
        ),
    )
}

/// 4. Analytic gradients agree with central differences.
fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(44);
    let (a, p, m, o, l) = (3, 4, 5, 2, 7);
    let x = random_matrix(&mut r, l, a);
    let t = Matrix::from_fn(l, o, |_, _| f64::from(u8::from(r.gen_bool(0.4))));
    let models = [
        ("lmn-a", Model::Lmn(LmnParams::random(a, p, m, o, Variant::A, &mut r))),
        ("lmn-b", Model::Lmn(LmnParams::random(a, p, m, o, Variant::B, &mut r))),
        ("unfolded-tanh", Model::Unfolded(UnfoldedParams::random(a, p, o, 3, Activation::Tanh, &mut r))),
        ("unfolded-selu", Model::Unfolded(UnfoldedParams::random(a, p, o, 3, Activation::Selu, &mut r))),
        ("rnn", Model::Rnn(RnnParams::random(a, p, o, &mut r))),
    ];
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for (name, model) in &models {
        let err = grad_check_report(model, &x, &t, 1e-5, 0.0).unwrap().max_rel_error;
        worst = worst.max(err);
        parts.push(format!("{name} {err:.1e}"));
    }
    let elapsed = start.elapsed();
    Outcome::check(
        worst < 1e-5 && elapsed < Duration::from_secs(10),
        format!("{} (< 1e-5), {elapsed:.2?} (< 10 s)", parts.join(", ")),
    )
}

/// 5. Closed-form parameter counts.
fn parameter_counts() -> Outcome {
    let lstm = parameter_count(CoreArch::Lstm { x: 88, h: 100 });
    let gru = parameter_count(CoreArch::Gru { x: 88, h: 100 });
    let lmn = parameter_count(CoreArch::Lmn { x: 88, f: 100, m: 100 });
    Outcome::check(
        lstm == 75_200 && gru == 56_400 && lmn == 38_800,
        format!("LSTM(88,100) = {lstm}, GRU(88,100) = {gru}, LMN(88,100,100) = {lmn}"),
    )
}

/// 5b. With `h = f + m` fixed, the LMN count peaks at `f = m = h/2`.
fn parameter_count_maximum() -> Outcome {
    let x = 88;
    let mut counterexamples = Vec::new();
    for h in 2..=64 {
        let counts: Vec<(usize, usize)> = (1..h).map(|f| (f, parameter_count(CoreArch::Lmn { x, f, m: h - f }))).collect();
        let best = counts.iter().map(|c| c.1).max().unwrap();
        let argmax: Vec<usize> = counts.iter().filter(|c| c.1 == best).map(|c| c.0).collect();
        let half = [h / 2, h.div_ceil(2)];
        if !argmax.iter().all(|f| half.contains(f)) {
            counterexamples.push((h, argmax[0], best, parameter_count(CoreArch::Lmn { x, f: h / 2, m: h - h / 2 })));
        }
    }
    let detail = match counterexamples.first() {
        None => format!("x = {x}: maximum at f = m = h/2 for every h ≤ 64"),
        Some(&(h, f, best, at_half)) => format!(
            "x = {x}: {} of 63 sizes violate it; first h = {h}: max {best} at f = {f}, but {at_half} at f = h/2. \
             With m = h - f the count is x·f - f² + h², which peaks at f = x/2, so the claim needs x = h",
            counterexamples.len()
        ),
    };
    Outcome::check(counterexamples.is_empty(), detail)
}

/// 6. Frame accuracy on hand-counted cases.
fn metric_correctness() -> Outcome {
    let y = to_frames(&[vec![60, 62]]).unwrap();
    let t = to_frames(&[vec![60, 64]]).unwrap();
    let hand = frame_accuracy(&y, &t, THRESHOLD).unwrap();
    let perfect = frame_accuracy(&t, &t, THRESHOLD).unwrap();
    let silent = frame_accuracy(&Matrix::zeros(1, 88), &t, THRESHOLD).unwrap();
    Outcome::check(
        hand == 1.0 / 3.0 && perfect == 1.0 && silent == 0.0,
        format!("TP=1 FP=1 FN=1 → {hand}, perfect → {perfect}, all-silent → {silent}"),
    )
}

fn jsb_path() -> PathBuf {
    std::env::var_os("LMN_JSB_PATH")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/jsb_chorales.json"))
}

/// 7. JSB Chorales statistics.
fn dataset_stats() -> Outcome {
    let path = jsb_path();
    if !path.exists() {
        return Outcome::skip(format!("WARNING: dataset not found at {} (set LMN_JSB_PATH)", path.display()));
    }
    match load_dataset(&path) {
        Ok(ds) => {
            let s = ds.stats();
            Outcome::check(
                s.total_sequences() == 382 && s.max_length() == 160,
                format!("{} sequences (382), max length {} (160)", s.total_sequences(), s.max_length()),
            )
        }
        Err(e) => Outcome::check(false, format!("failed to load {}: {e}", path.display())),
    }
}

/// 8. Soft: LMN-B (f = m = 100) on JSB Chorales reaches test accuracy ≥ 30%.
fn jsb_reproduction() -> Outcome {
    let path = jsb_path();
    if !path.exists() {
        return Outcome::skip(format!("WARNING: dataset not found at {}", path.display()));
    }
    if std::env::var("LMN_ACCEPTANCE_FULL").as_deref() != Ok("1") {
        return Outcome::skip("long run; set LMN_ACCEPTANCE_FULL=1 to enable");
    }
    let splits = match load_dataset(&path).and_then(|d| d.to_splits()) {
        Ok(s) => s,
        Err(e) => return Outcome::check(false, format!("failed to load: {e}")),
    };
    let sizes = ModelSizes { input: 88, hidden: 100, memory: 100, output: 88, k: 1 };
    let model = Model::random(ModelKind::LmnB, sizes, Activation::Tanh, &mut rng(1)).unwrap();
    let config = TrainConfig { learning_rate: 0.001, l2: 1e-5, max_epochs: 500, patience: 10, seed: 1, ..TrainConfig::default() };
    match train_loop(model, &splits, &config) {
        Ok(out) => {
            let acc = evaluate_accuracy(&out.best, &splits.test).unwrap() * 100.0;
            Outcome::check(acc >= 30.0, format!("test frame accuracy {acc:.2}% (≥ 30.0; reference 33.98)"))
        }
        Err(e) => Outcome::check(false, format!("training failed: {e}")),
    }
}

/// 9. The memory path carries the delayed-copy signal.
fn learning_sanity() -> Outcome {
    let sizes = SyntheticSizes { train: 100, valid: 30, test: 30, length: 20, dim: 8, density_percent: 30 };
    let splits: Splits = make_synthetic(SyntheticKind::DelayedCopy { delay: 2 }, sizes, 1).unwrap();
    let model_sizes = ModelSizes { input: 8, hidden: 32, memory: 32, output: 8, k: 1 };
    let base = TrainConfig { learning_rate: 0.005, max_epochs: 200, patience: 30, seed: 3, ..TrainConfig::default() };

    let lmn = Model::random(ModelKind::LmnB, model_sizes, Activation::Tanh, &mut rng(2)).unwrap();
    let with_memory = train_loop(lmn, &splits, &base).unwrap();
    let acc_memory = evaluate_accuracy(&with_memory.best, &splits.test).unwrap();

    // Output from h_t with W_mh held at zero: a per-timestep map.
    let mut memoryless = Model::random(ModelKind::LmnA, model_sizes, Activation::Tanh, &mut rng(2)).unwrap();
    if let Model::Lmn(p) = &mut memoryless {
        p.w_mh.fill(0.0);
    }
    let frozen = TrainConfig { frozen: vec!["W_mh".into()], ..base };
    let without = train_loop(memoryless, &splits, &frozen).unwrap();
    let acc_without = evaluate_accuracy(&without.best, &splits.test).unwrap();

    Outcome::check(
        acc_memory >= 0.95 && acc_without < 0.6,
        format!(
            "LMN-B test accuracy {acc_memory:.4} (≥ 0.95, {} epochs), memoryless {acc_without:.4} (< 0.6, {} epochs)",
            with_memory.history.records.len() - 1,
            without.history.records.len() - 1
        ),
    )
}

/// Id, name, binding, check.
type Criterion = (&'static str, &'static str, bool, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1", "autoencoder exactness", true, autoencoder_exactness),
        ("2", "one-step Eckart-Young consistency", true, eckart_young),
        ("3", "pretraining fidelity", true, pretraining_fidelity),
        ("4", "gradient correctness", true, gradient_correctness),
        ("5a", "parameter-count formulas", true, parameter_counts),
        ("5b", "LMN count maximized at f = m = h/2", true, parameter_count_maximum),
        ("6", "metric correctness", true, metric_correctness),
        ("7", "dataset stats", true, dataset_stats),
        ("8", "reference accuracy (soft)", false, jsb_reproduction),
        ("9", "learning sanity", true, learning_sanity),
    ];
    let mut failed = Vec::new();
    for (id, name, binding, run) in criteria {
        let outcome = run();
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        println!("criterion {id:<3} {tag}  {name}: {}", outcome.detail);
        if outcome.status == Status::Fail && binding {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all binding criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: binding criteria failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
