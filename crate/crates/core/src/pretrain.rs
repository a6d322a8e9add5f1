//! Pretraining an LMN from an unrolled k-lag network.
//!
//! 1. Train the unfolded network on the task.
//! 2. Fit a linear autoencoder on the sequences of its hidden states.
//! 3. Read the LMN weights off the unfolded weights and the autoencoder.
//!
//! The memory state `hm_t` encodes `h_t` as its most recent block, so the
//! decoder stack maps `hm_t` to `[h_t; h_{t-1}; …; h_{t-k+1}]`. The
//! recurrent lags `1..k` act on `hm_{t-1}` and the output lags `0..k-1` act on
//! `hm_t`. The unfolded output lag `k` has no counterpart in the LMN.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Sample, Splits};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Activation, LmnParams, Model, UnfoldedParams, Variant};
use crate::seqae::{AutoencoderParams, Factorization, FitOptions, MemorySize, SequenceBatch};
use crate::train::{train_loop, History, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    /// Unroll length.
    pub k: usize,
    /// Hidden units of the unfolded network and functional units of the LMN.
    pub hidden: usize,
    pub p_mem: MemorySize,
    pub unfolded_train: TrainConfig,
    /// SeLU in the unfolded network instead of tanh.
    pub selu_hidden: bool,
    /// Compare outputs against the unfolded network with `W_o[k]` zeroed.
    pub zero_last_output_lag: bool,
    /// Seed of the unfolded network's initial weights.
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            k: 10,
            hidden: 100,
            p_mem: MemorySize::Auto { max: None },
            unfolded_train: TrainConfig::default(),
            selu_hidden: true,
            zero_last_output_lag: true,
            seed: 0,
        }
    }
}

/// `U = [Aᵀ; AᵀBᵀ; …; Aᵀ(Bᵀ)^{k-1}]`, `k` blocks of `p × m`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderStack {
    blocks: Vec<Matrix>,
}

impl DecoderStack {
    /// Block `i` (0-based) is `Aᵀ(Bᵀ)^i`.
    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    /// The stacked `k·p × m` matrix.
    pub fn stacked(&self) -> Matrix {
        let refs: Vec<&Matrix> = self.blocks.iter().collect();
        Matrix::vstack(&refs)
    }
}

/// `A` is `m × p`, `B` is `m × m`.
pub fn build_decoder_stack(a: &Matrix, b: &Matrix, k: usize) -> Result<DecoderStack> {
    if k == 0 {
        return Err(Error::InvalidInput("decoder stack needs k ≥ 1".into()));
    }
    let m = a.rows();
    if b.shape() != (m, m) {
        return Err(Error::shape("decoder stack B", format!("{m}×{m}"), format!("{}×{}", b.rows(), b.cols())));
    }
    let bt = b.transpose();
    let mut blocks = vec![a.transpose()];
    for _ in 1..k {
        let next = blocks.last().unwrap().matmul(&bt);
        blocks.push(next);
    }
    Ok(DecoderStack { blocks })
}

/// LMN-B initialized from an unfolded network and a memory autoencoder:
/// `W_hm = A`, `W_mm = B`, `W_mh = Σ_{i=1..k} W_hh[i]·U_i`,
/// `W_out = Σ_{i=0..k-1} W_o[i]·U_{i+1}` and `W_xh` copied.
pub fn transfer_weights(unfolded: &UnfoldedParams, a: &Matrix, b: &Matrix, k: usize) -> Result<LmnParams> {
    unfolded.validate()?;
    if unfolded.k() != k {
        return Err(Error::shape("transfer unroll length", unfolded.k(), k));
    }
    let p = unfolded.hidden_size();
    if a.cols() != p {
        return Err(Error::shape(
            "W_hm = A (autoencoder input must be the unfolded hidden size)",
            p,
            a.cols(),
        ));
    }
    let stack = build_decoder_stack(a, b, k)?;
    let m = a.rows();

    let mut w_mh = Matrix::zeros(p, m);
    for (w, u) in unfolded.w_hh.iter().zip(stack.blocks()) {
        w_mh.add_assign(&w.matmul(u));
    }
    let mut w_out = Matrix::zeros(unfolded.output_size(), m);
    for (w, u) in unfolded.w_o.iter().zip(stack.blocks()) {
        w_out.add_assign(&w.matmul(u));
    }
    LmnParams::new(unfolded.w_xh.clone(), w_mh, a.clone(), b.clone(), w_out, Variant::B)
}

/// Hidden-state sequences of the unfolded network, one per sample.
pub fn collect_hidden_states(unfolded: &UnfoldedParams, samples: &[Sample]) -> Result<SequenceBatch> {
    let sequences = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            unfolded
                .forward(&s.inputs)
                .map(|t| t.hidden)
                .map_err(|e| e.context(format!("hidden states of sequence {i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    SequenceBatch::new(sequences)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceFidelity {
    pub max_hidden_diff: f64,
    pub max_output_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityReport {
    pub max_hidden_diff: f64,
    pub max_output_diff: f64,
    pub per_sequence: Vec<SequenceFidelity>,
}

/// Largest deviations between the LMN and the unfolded network it was
/// built from, over hidden states and output probabilities.
pub fn fidelity_report(
    unfolded: &UnfoldedParams,
    lmn: &LmnParams,
    samples: &[Sample],
    zero_last_output_lag: bool,
) -> Result<FidelityReport> {
    let mut reference = unfolded.clone();
    if zero_last_output_lag {
        reference.w_o.last_mut().unwrap().fill(0.0);
    }
    let mut per_sequence = Vec::with_capacity(samples.len());
    for sample in samples {
        let u = reference.forward(&sample.inputs)?;
        let l = lmn.forward(&sample.inputs)?;
        per_sequence.push(SequenceFidelity {
            max_hidden_diff: u.hidden.max_abs_diff(&l.hidden),
            max_output_diff: u.outputs.max_abs_diff(&l.outputs),
        });
    }
    let max = |f: fn(&SequenceFidelity) -> f64| per_sequence.iter().map(f).fold(0.0, f64::max);
    Ok(FidelityReport {
        max_hidden_diff: max(|s| s.max_hidden_diff),
        max_output_diff: max(|s| s.max_output_diff),
        per_sequence,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Numerical rank of the hidden-state data matrix.
    pub ae_rank: usize,
    /// Squared reconstruction error summed over all training sequences.
    pub ae_total_error: f64,
    pub max_hidden_diff: f64,
    pub max_output_diff: f64,
    /// Squared reconstruction error at each timestep, summed over
    /// sequences; sums to `ae_total_error`.
    pub per_timestep_error_profile: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PretrainOutcome {
    pub lmn: LmnParams,
    pub unfolded: UnfoldedParams,
    pub autoencoder: AutoencoderParams,
    /// Squared reconstruction error per training sequence and timestep.
    pub reconstruction: Vec<Vec<f64>>,
    pub unfolded_history: History,
    pub fidelity: FidelityReport,
    pub diagnostics: Diagnostics,
}

/// Autoencoder for the unfolded network's hidden states on `samples`,
/// together with the numerical rank of their data matrix.
pub fn fit_memory(
    unfolded: &UnfoldedParams,
    samples: &[Sample],
    size: MemorySize,
) -> Result<(AutoencoderParams, usize)> {
    let batch = collect_hidden_states(unfolded, samples)?;
    let fact = Factorization::new(&batch, MemorySize::Auto { max: None }, &FitOptions::default())
        .map_err(|e| e.context("autoencoder on hidden states"))?;
    let rank = fact.rank();
    let m = match size {
        MemorySize::Fixed(0) | MemorySize::Auto { max: Some(0) } => {
            return Err(Error::InvalidInput("memory size must be at least 1".into()))
        }
        MemorySize::Fixed(m) => m,
        MemorySize::Auto { max } => max.map_or(rank, |c| c.min(rank)),
    };
    Ok((fact.params(m)?, rank))
}

/// Runs the three pretraining steps on the training split, selecting the
/// unfolded network on the validation split.
pub fn pretrain_pipeline(splits: &Splits, config: &PretrainConfig) -> Result<PretrainOutcome> {
    if config.k == 0 || config.hidden == 0 {
        return Err(Error::InvalidInput("pretraining needs k ≥ 1 and hidden ≥ 1".into()));
    }
    if splits.train.is_empty() {
        return Err(Error::InvalidInput("pretraining needs a training split".into()));
    }
    let activation = if config.selu_hidden { Activation::Selu } else { Activation::Tanh };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = UnfoldedParams::random(
        splits.input_size(),
        config.hidden,
        splits.output_size(),
        config.k,
        activation,
        &mut rng,
    );
    let trained = train_loop(Model::Unfolded(init), splits, &config.unfolded_train)
        .map_err(|e| e.context("training the unfolded network"))?;
    let Model::Unfolded(unfolded) = trained.best else {
        unreachable!("train_loop preserves the model kind")
    };

    let (autoencoder, ae_rank) = fit_memory(&unfolded, &splits.train, config.p_mem)?;
    let lmn = transfer_weights(&unfolded, &autoencoder.encoder, &autoencoder.transition, config.k)?;

    let batch = collect_hidden_states(&unfolded, &splits.train)?;
    let rec = autoencoder.reconstruction_error(&batch)?;
    let mut profile = vec![0.0; batch.max_len()];
    for seq in &rec.per_timestep {
        for (acc, e) in profile.iter_mut().zip(seq) {
            *acc += e;
        }
    }
    let fidelity = fidelity_report(&unfolded, &lmn, &splits.train, config.zero_last_output_lag)?;
    let diagnostics = Diagnostics {
        ae_rank,
        ae_total_error: rec.total,
        max_hidden_diff: fidelity.max_hidden_diff,
        max_output_diff: fidelity.max_output_diff,
        per_timestep_error_profile: profile,
    };
    Ok(PretrainOutcome {
        lmn,
        unfolded,
        autoencoder,
        reconstruction: rec.per_timestep,
        unfolded_history: trained.history,
        fidelity,
        diagnostics,
    })
}
