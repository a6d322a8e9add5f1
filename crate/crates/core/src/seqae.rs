//! Linear autoencoder for sequences.
//!
//! The encoder is the linear recurrence `y_t = A x_t + B y_{t-1}` with
//! `y_0 = 0`; the decoder `C = [Aᵀ; Bᵀ]` maps `y_t` back to `(x_t, y_{t-1})`.
//! `A` and `B` come in closed form from a truncated SVD `Ξ = V Σ Uᵀ` of the
//! data matrix whose row for timestep `t` is the reversed prefix
//! `[x_t, x_{t-1}, …, x_1, 0, …]`: `A = UᵀP` (the first input block of `U`)
//! and `B = UᵀRU` (`R` shifts blocks down by one).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, Matrix, SvdResult, DEFAULT_RANK_TOL};

/// Variable-length sequences of `dim`-sized vectors. Each sequence is a
/// matrix with one row per timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBatch {
    dim: usize,
    sequences: Vec<Matrix>,
}

impl SequenceBatch {
    pub fn new(sequences: Vec<Matrix>) -> Result<Self> {
        let dim = match sequences.first() {
            Some(s) => s.cols(),
            None => return Err(Error::InvalidInput("sequence batch is empty".into())),
        };
        for (i, s) in sequences.iter().enumerate() {
            if s.cols() != dim {
                return Err(Error::shape(format!("sequence {i} dimension"), dim, s.cols()));
            }
        }
        Ok(Self { dim, sequences })
    }

    pub fn from_vectors(sequences: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mats = sequences
            .iter()
            .map(|s| Matrix::from_rows(s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mats)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sequences(&self) -> &[Matrix] {
        &self.sequences
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.sequences.iter().map(Matrix::rows).max().unwrap_or(0)
    }

    pub fn total_steps(&self) -> usize {
        self.sequences.iter().map(Matrix::rows).sum()
    }
}

/// Stacked data matrix: `Σ_q l_q` rows and `dim · max_len` columns.
pub fn build_data_matrix(batch: &SequenceBatch) -> Matrix {
    let a = batch.dim();
    let mut xi = Matrix::zeros(batch.total_steps(), a * batch.max_len());
    let mut row = 0;
    for seq in batch.sequences() {
        for t in 0..seq.rows() {
            let out = xi.row_mut(row);
            for lag in 0..=t {
                out[lag * a..(lag + 1) * a].copy_from_slice(seq.row(t - lag));
            }
            row += 1;
        }
    }
    xi
}

/// How many memory units to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemorySize {
    Fixed(usize),
    /// Numerical rank of the data matrix, optionally capped.
    Auto { max: Option<usize> },
}

impl MemorySize {
    fn cap(self) -> Result<Option<usize>> {
        match self {
            MemorySize::Fixed(0) => Err(Error::InvalidInput("memory size must be at least 1".into())),
            MemorySize::Fixed(p) => Ok(Some(p)),
            MemorySize::Auto { max: Some(0) } => {
                Err(Error::InvalidInput("memory size cap must be at least 1".into()))
            }
            MemorySize::Auto { max } => Ok(max),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Relative tolerance for the numerical rank of the data matrix.
    pub rank_tol: f64,
    /// Largest data matrix (in entries) that is materialized. Bigger
    /// problems go through the row Gram matrix, built lag by lag.
    pub materialize_budget: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            materialize_budget: 100_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderParams {
    /// Input size.
    pub a: usize,
    /// Memory size.
    pub p: usize,
    /// `p × a`
    pub encoder: Matrix,
    /// `p × p`
    pub transition: Matrix,
    /// Number of blocks of the factorized data matrix.
    pub train_len: usize,
}

impl AutoencoderParams {
    pub fn new(encoder: Matrix, transition: Matrix, train_len: usize) -> Result<Self> {
        let (p, a) = encoder.shape();
        if transition.shape() != (p, p) {
            return Err(Error::shape(
                "autoencoder transition",
                format!("{p}x{p}"),
                format!("{}x{}", transition.rows(), transition.cols()),
            ));
        }
        Ok(Self {
            a,
            p,
            encoder,
            transition,
            train_len,
        })
    }

    /// Decoder `C = [Aᵀ; Bᵀ]`, `(a + p) × p`.
    pub fn decoder(&self) -> Matrix {
        Matrix::vstack(&[&self.encoder.transpose(), &self.transition.transpose()])
    }

    /// States `y_1 … y_l`, one row each.
    pub fn encode(&self, sequence: &Matrix) -> Result<Matrix> {
        if sequence.cols() != self.a {
            return Err(Error::shape("encode input", self.a, sequence.cols()));
        }
        let mut states = Matrix::zeros(sequence.rows(), self.p);
        let mut prev = vec![0.0; self.p];
        for t in 0..sequence.rows() {
            let mut y = self.encoder.matvec(sequence.row(t));
            self.transition.matvec_acc(&prev, &mut y);
            states.row_mut(t).copy_from_slice(&y);
            prev = y;
        }
        Ok(states)
    }

    /// One decoder application: `(Aᵀy, Bᵀy)`.
    pub fn decode_step(&self, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if y.len() != self.p {
            return Err(Error::shape("decode state", self.p, y.len()));
        }
        Ok((self.encoder.matvec_t(y), self.transition.matvec_t(y)))
    }

    /// Unrolls the decoder from a final state; row `i` holds `x̂_{t-i}`.
    pub fn reconstruct(&self, y_final: &[f64], steps: usize) -> Result<Matrix> {
        if steps == 0 {
            return Err(Error::InvalidInput("reconstruct needs at least one step".into()));
        }
        let mut out = Matrix::zeros(steps, self.a);
        let mut y = y_final.to_vec();
        for i in 0..steps {
            let (x, prev) = self.decode_step(&y)?;
            out.row_mut(i).copy_from_slice(&x);
            y = prev;
        }
        Ok(out)
    }

    /// Encodes each sequence fully, decodes it back from the last state and
    /// records squared error per original timestep.
    pub fn reconstruction_error(&self, batch: &SequenceBatch) -> Result<ReconstructionError> {
        if batch.dim() != self.a {
            return Err(Error::shape("reconstruction_error batch", self.a, batch.dim()));
        }
        let mut per_timestep = Vec::with_capacity(batch.len());
        for seq in batch.sequences() {
            let states = self.encode(seq)?;
            let l = seq.rows();
            let rec = self.reconstruct(states.row(l - 1), l)?;
            let errs: Vec<f64> = (0..l)
                .map(|t| {
                    seq.row(t)
                        .iter()
                        .zip(rec.row(l - 1 - t))
                        .map(|(x, r)| (x - r) * (x - r))
                        .sum()
                })
                .collect();
            per_timestep.push(errs);
        }
        let total = per_timestep.iter().flatten().sum();
        Ok(ReconstructionError { per_timestep, total })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionError {
    /// Squared error per timestep, in original time order, per sequence.
    pub per_timestep: Vec<Vec<f64>>,
    pub total: f64,
}

/// Truncated SVD of a batch's data matrix, from which autoencoders of any
/// memory size up to the kept rank can be read off.
#[derive(Clone, Debug)]
pub struct Factorization {
    a: usize,
    max_len: usize,
    svd: SvdResult,
    energy: f64,
    /// Squared singular values below the kept rank, when known exactly.
    discarded: Option<Vec<f64>>,
}

impl Factorization {
    pub fn new(batch: &SequenceBatch, size: MemorySize, opts: &FitOptions) -> Result<Self> {
        let cap = size.cap()?;
        let a = batch.dim();
        let max_len = batch.max_len();
        let rows = batch.total_steps();
        let cols = a * max_len;
        let (svd, energy, discarded) = if rows.saturating_mul(cols) <= opts.materialize_budget {
            let xi = build_data_matrix(batch);
            let full = linalg::svd(&xi, None, 0.0)?;
            let mut keep = linalg::rank_estimate(&full.s, opts.rank_tol);
            if let Some(cap) = cap {
                keep = keep.min(cap);
            }
            if keep == 0 {
                return Err(Error::InvalidInput("data matrix has numerical rank 0".into()));
            }
            let discarded = full.s[keep..].iter().map(|s| s * s).collect();
            (full.truncate(keep), xi.sum_sq(), Some(discarded))
        } else {
            let gram = row_gram(batch);
            let energy = (0..gram.rows()).map(|i| gram[(i, i)]).sum();
            let svd = linalg::gram_svd_from_row_gram(&gram, cap, opts.rank_tol, |v| {
                apply_transpose(batch, v)
            })?;
            (svd, energy, None)
        };
        Ok(Self {
            a,
            max_len,
            svd,
            energy,
            discarded,
        })
    }

    pub fn svd(&self) -> &SvdResult {
        &self.svd
    }

    pub fn rank(&self) -> usize {
        self.svd.rank()
    }

    /// `‖Ξ‖_F²`
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Squared Frobenius error of the rank-`p` truncation, `Σ_{i>p} S_i²`.
    pub fn svd_error(&self, p: usize) -> f64 {
        match &self.discarded {
            Some(rest) => {
                let within: f64 = self.svd.s.iter().skip(p).map(|s| s * s).sum();
                // Empty float sums are -0.0.
                (within + rest.iter().sum::<f64>()).abs()
            }
            None => {
                let kept: f64 = self.svd.s.iter().take(p).map(|s| s * s).sum();
                (self.energy - kept).max(0.0)
            }
        }
    }

    /// Autoencoder with the leading `min(p, rank)` components.
    pub fn params(&self, p: usize) -> Result<AutoencoderParams> {
        if p == 0 {
            return Err(Error::InvalidInput("memory size must be at least 1".into()));
        }
        let p = p.min(self.rank());
        let u = self.svd.u.leading_columns(p);
        let a = self.a;
        let encoder = u.row_block(0, a).transpose();
        let transition = if self.max_len > 1 {
            let span = a * (self.max_len - 1);
            // UᵀRU with R moving block i to block i + 1.
            u.row_block(a, span).transpose().matmul(&u.row_block(0, span))
        } else {
            Matrix::zeros(p, p)
        };
        AutoencoderParams::new(encoder, transition, self.max_len)
    }
}

pub fn fit(batch: &SequenceBatch, size: MemorySize) -> Result<AutoencoderParams> {
    fit_with(batch, size, &FitOptions::default())
}

pub fn fit_with(batch: &SequenceBatch, size: MemorySize, opts: &FitOptions) -> Result<AutoencoderParams> {
    let f = Factorization::new(batch, size, opts)?;
    f.params(f.rank())
}

/// `ΞΞᵀ` without forming `Ξ`: entry `((q,t),(q',t'))` is the sum of
/// `⟨x_{t-j}, x'_{t'-j}⟩` over shared lags, so it satisfies
/// `G[t,t'] = D[t,t'] + G[t-1,t'-1]`.
fn row_gram(batch: &SequenceBatch) -> Matrix {
    let offsets = row_offsets(batch);
    let n = batch.total_steps();
    let mut g = Matrix::zeros(n, n);
    for (qi, si) in batch.sequences().iter().enumerate() {
        for (qj, sj) in batch.sequences().iter().enumerate().skip(qi) {
            for t in 0..si.rows() {
                for u in 0..sj.rows() {
                    let mut v = dot(si.row(t), sj.row(u));
                    if t > 0 && u > 0 {
                        v += g[(offsets[qi] + t - 1, offsets[qj] + u - 1)];
                    }
                    g[(offsets[qi] + t, offsets[qj] + u)] = v;
                    g[(offsets[qj] + u, offsets[qi] + t)] = v;
                }
            }
        }
    }
    g
}

/// `Ξᵀ · W` without forming `Ξ`.
fn apply_transpose(batch: &SequenceBatch, w: &Matrix) -> Matrix {
    let a = batch.dim();
    let mut out = Matrix::zeros(a * batch.max_len(), w.cols());
    let offsets = row_offsets(batch);
    for (q, seq) in batch.sequences().iter().enumerate() {
        for t in 0..seq.rows() {
            let weights = w.row(offsets[q] + t);
            for lag in 0..=t {
                let x = seq.row(t - lag);
                for (c, &xc) in x.iter().enumerate() {
                    if xc == 0.0 {
                        continue;
                    }
                    let dst = out.row_mut(lag * a + c);
                    for (d, &wk) in dst.iter_mut().zip(weights) {
                        *d += xc * wk;
                    }
                }
            }
        }
    }
    out
}

fn row_offsets(batch: &SequenceBatch) -> Vec<usize> {
    batch
        .sequences()
        .iter()
        .scan(0, |acc, s| {
            let start = *acc;
            *acc += s.rows();
            Some(start)
        })
        .collect()
}
