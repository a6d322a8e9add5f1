//! Exact backpropagation through time for every model.
//!
//! Each backward pass returns the regularized loss
//! `bce + l2 · ½ Σ ‖W‖_F²` and its gradient. With a truncation window `w`
//! the sequence is cut into consecutive chunks of `w` steps and no gradient
//! crosses a chunk boundary through the recurrent connections.

use super::loss::{bce_loss, bce_output_delta};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{LmnParams, Model, RnnParams, UnfoldedParams, Variant};

/// Per-matrix gradients, in the owning model's matrix order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub names: Vec<String>,
    pub mats: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            names: model.names(),
            mats: model.matrices().iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names.iter().position(|n| n == name).map(|i| &self.mats[i])
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.names, other.names);
        for (a, b) in self.mats.iter_mut().zip(&other.mats) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.mats.iter_mut().for_each(|m| m.scale(alpha));
    }

    pub fn global_norm(&self) -> f64 {
        self.mats.iter().map(Matrix::sum_sq).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.mats.iter().all(Matrix::is_finite)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BackwardOptions {
    /// Weight of `½ Σ ‖W‖_F²` in the loss.
    pub l2: f64,
    /// Chunk length for truncated BPTT; `None` propagates through the whole
    /// sequence.
    pub truncation_window: Option<usize>,
}

impl BackwardOptions {
    fn same_chunk(&self, t: usize, s: usize) -> bool {
        match self.truncation_window {
            Some(w) if w > 0 => t / w == s / w,
            _ => true,
        }
    }
}

/// Loss and gradient for any model.
pub fn backward(model: &Model, inputs: &Matrix, targets: &Matrix, opts: &BackwardOptions) -> Result<(f64, Gradients)> {
    match model {
        Model::Rnn(p) => rnn_backward(p, inputs, targets, opts),
        Model::Lmn(p) => lmn_backward(p, inputs, targets, opts),
        Model::Unfolded(p) => unfolded_backward(p, inputs, targets, opts),
    }
}

/// Loss only, same definition as the backward passes.
pub fn loss(model: &Model, inputs: &Matrix, targets: &Matrix, l2: f64) -> Result<f64> {
    let outputs = model.predict(inputs)?;
    Ok(bce_loss(&outputs, targets)? + l2 * model.half_sq_norm())
}

fn regularize(loss: &mut f64, grads: &mut [Matrix], weights: &[&Matrix], l2: f64) {
    if l2 == 0.0 {
        return;
    }
    // Same summation order as `Model::half_sq_norm`, so the identity
    // `loss(l2) = loss(0) + l2·½Σ‖W‖²` holds bit for bit.
    let half_sq = 0.5 * weights.iter().map(|w| w.sum_sq()).sum::<f64>();
    *loss += l2 * half_sq;
    for (g, w) in grads.iter_mut().zip(weights) {
        g.axpy(l2, w);
    }
}

fn finish(mut loss: f64, mut mats: Vec<Matrix>, weights: &[&Matrix], names: Vec<String>, l2: f64) -> Result<(f64, Gradients)> {
    regularize(&mut loss, &mut mats, weights, l2);
    let grads = Gradients { names, mats };
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite {
            context: "gradient".into(),
            timestep: 0,
        });
    }
    Ok((loss, grads))
}

pub fn lmn_backward(
    params: &LmnParams,
    inputs: &Matrix,
    targets: &Matrix,
    opts: &BackwardOptions,
) -> Result<(f64, Gradients)> {
    let trace = params.forward(inputs)?;
    let loss = bce_loss(&trace.outputs, targets)?;
    let delta = bce_output_delta(&trace.outputs, targets)?;
    let (p, m) = (params.functional_size(), params.memory_size());
    let l = inputs.rows();

    let mut g_xh = Matrix::zeros(p, params.input_size());
    let mut g_mh = Matrix::zeros(p, m);
    let mut g_hm = Matrix::zeros(m, p);
    let mut g_mm = Matrix::zeros(m, m);
    let mut g_out = Matrix::zeros(params.w_out.rows(), params.w_out.cols());

    let zero_mem = vec![0.0; m];
    // dL/dhm_t arriving from later timesteps.
    let mut carry = vec![0.0; m];
    for t in (0..l).rev() {
        let h = trace.hidden.row(t);
        let mem = trace.memory.row(t);
        let prev_mem = if t > 0 { trace.memory.row(t - 1) } else { &zero_mem[..] };
        let dz = delta.row(t);

        let mut d_mem = carry;
        let mut d_h = vec![0.0; p];
        match params.variant {
            Variant::B => {
                params.w_out.matvec_t_acc(dz, &mut d_mem);
                g_out.add_outer(1.0, dz, mem);
            }
            Variant::A => {
                params.w_out.matvec_t_acc(dz, &mut d_h);
                g_out.add_outer(1.0, dz, h);
            }
        }
        params.w_hm.matvec_t_acc(&d_mem, &mut d_h);
        let d_pre: Vec<f64> = d_h.iter().zip(h).map(|(g, &hv)| g * tanh_derivative_from_output(hv)).collect();

        g_hm.add_outer(1.0, &d_mem, h);
        g_mm.add_outer(1.0, &d_mem, prev_mem);
        g_xh.add_outer(1.0, &d_pre, inputs.row(t));
        g_mh.add_outer(1.0, &d_pre, prev_mem);

        carry = if t > 0 && opts.same_chunk(t, t - 1) {
            let mut c = params.w_mm.matvec_t(&d_mem);
            params.w_mh.matvec_t_acc(&d_pre, &mut c);
            c
        } else {
            vec![0.0; m]
        };
    }

    let names = LmnParams::NAMES.iter().map(|s| s.to_string()).collect();
    finish(loss, vec![g_xh, g_mh, g_hm, g_mm, g_out], &params.matrices(), names, opts.l2)
}

pub fn unfolded_backward(
    params: &UnfoldedParams,
    inputs: &Matrix,
    targets: &Matrix,
    opts: &BackwardOptions,
) -> Result<(f64, Gradients)> {
    let trace = params.forward(inputs)?;
    let loss = bce_loss(&trace.outputs, targets)?;
    let delta = bce_output_delta(&trace.outputs, targets)?;
    let (p, k) = (params.hidden_size(), params.k());
    let l = inputs.rows();

    let mut g_xh = Matrix::zeros(p, params.input_size());
    let mut g_hh: Vec<Matrix> = (0..k).map(|_| Matrix::zeros(p, p)).collect();
    let mut g_o: Vec<Matrix> = (0..=k).map(|_| Matrix::zeros(params.output_size(), p)).collect();

    // dL/dh_s accumulated from every consumer at a later (or equal) time.
    let mut d_hidden = Matrix::zeros(l, p);
    for t in 0..l {
        let dz = delta.row(t);
        for (i, g) in g_o.iter_mut().enumerate().take(k.min(t) + 1) {
            g.add_outer(1.0, dz, trace.hidden.row(t - i));
            if opts.same_chunk(t, t - i) {
                params.w_o[i].matvec_t_acc(dz, d_hidden.row_mut(t - i));
            }
        }
    }
    for t in (0..l).rev() {
        let d_pre: Vec<f64> = d_hidden
            .row(t)
            .iter()
            .zip(trace.pre.row(t))
            .map(|(g, &z)| g * params.activation.derivative(z))
            .collect();
        g_xh.add_outer(1.0, &d_pre, inputs.row(t));
        for i in 1..=k.min(t) {
            g_hh[i - 1].add_outer(1.0, &d_pre, trace.hidden.row(t - i));
            if opts.same_chunk(t, t - i) {
                params.w_hh[i - 1].matvec_t_acc(&d_pre, d_hidden.row_mut(t - i));
            }
        }
    }

    let mut mats = vec![g_xh];
    mats.extend(g_hh);
    mats.extend(g_o);
    finish(loss, mats, &params.matrices(), params.names(), opts.l2)
}

pub fn rnn_backward(
    params: &RnnParams,
    inputs: &Matrix,
    targets: &Matrix,
    opts: &BackwardOptions,
) -> Result<(f64, Gradients)> {
    let trace = params.forward(inputs)?;
    let loss = bce_loss(&trace.outputs, targets)?;
    let delta = bce_output_delta(&trace.outputs, targets)?;
    let p = params.hidden_size();
    let l = inputs.rows();

    let mut g_xh = Matrix::zeros(p, params.input_size());
    let mut g_hh = Matrix::zeros(p, p);
    let mut g_o = Matrix::zeros(params.output_size(), p);

    let zero = vec![0.0; p];
    let mut carry = vec![0.0; p];
    for t in (0..l).rev() {
        let h = trace.hidden.row(t);
        let prev = if t > 0 { trace.hidden.row(t - 1) } else { &zero[..] };
        let dz = delta.row(t);
        let mut d_h = carry;
        params.w_o.matvec_t_acc(dz, &mut d_h);
        g_o.add_outer(1.0, dz, h);
        let d_pre: Vec<f64> = d_h
            .iter()
            .zip(h)
            .map(|(g, hv)| g * tanh_derivative_from_output(*hv))
            .collect();
        g_xh.add_outer(1.0, &d_pre, inputs.row(t));
        g_hh.add_outer(1.0, &d_pre, prev);
        carry = if t > 0 && opts.same_chunk(t, t - 1) {
            params.w_hh.matvec_t(&d_pre)
        } else {
            vec![0.0; p]
        };
    }

    let names = RnnParams::NAMES.iter().map(|s| s.to_string()).collect();
    finish(loss, vec![g_xh, g_hh, g_o], &params.matrices(), names, opts.l2)
}

#[inline]
fn tanh_derivative_from_output(h: f64) -> f64 {
    1.0 - h * h
}

