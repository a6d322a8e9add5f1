use rand::Rng;

use super::activation::{sigmoid, tanh};
use super::{check_finite, check_input, uniform_init};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Elman RNN: `h_t = tanh(W_xh x_t + W_hh h_{t-1})`, `y_t = sigmoid(W_o h_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnParams {
    /// `p × a`
    pub w_xh: Matrix,
    /// `p × p`
    pub w_hh: Matrix,
    /// `o × p`
    pub w_o: Matrix,
}

#[derive(Clone, Debug)]
pub struct RnnTrace {
    pub hidden: Matrix,
    pub outputs: Matrix,
}

impl RnnParams {
    pub const NAMES: [&'static str; 3] = ["W_xh", "W_hh", "W_o"];

    pub fn zeros(a: usize, p: usize, o: usize) -> Self {
        Self {
            w_xh: Matrix::zeros(p, a),
            w_hh: Matrix::zeros(p, p),
            w_o: Matrix::zeros(o, p),
        }
    }

    pub fn random(a: usize, p: usize, o: usize, rng: &mut impl Rng) -> Self {
        let mut params = Self::zeros(a, p, o);
        for w in params.matrices_mut() {
            uniform_init(w, rng);
        }
        params
    }

    pub fn input_size(&self) -> usize {
        self.w_xh.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_xh.rows()
    }

    pub fn output_size(&self) -> usize {
        self.w_o.rows()
    }

    pub fn matrices(&self) -> [&Matrix; 3] {
        [&self.w_xh, &self.w_hh, &self.w_o]
    }

    pub fn matrices_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.w_xh, &mut self.w_hh, &mut self.w_o]
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.hidden_size();
        if self.w_hh.shape() != (p, p) {
            return Err(Error::shape("RNN W_hh", format!("{p}x{p}"), format!("{:?}", self.w_hh.shape())));
        }
        if self.w_o.cols() != p {
            return Err(Error::shape("RNN W_o columns", p, self.w_o.cols()));
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<RnnTrace> {
        self.validate()?;
        check_input("RNN", inputs, self.input_size())?;
        let l = inputs.rows();
        let mut hidden = Matrix::zeros(l, self.hidden_size());
        let mut outputs = Matrix::zeros(l, self.output_size());
        let mut prev = vec![0.0; self.hidden_size()];
        for t in 0..l {
            let mut z = self.w_xh.matvec(inputs.row(t));
            self.w_hh.matvec_acc(&prev, &mut z);
            check_finite("RNN pre-activation", &z, t)?;
            let h: Vec<f64> = z.iter().map(|&v| tanh(v)).collect();
            for (y, v) in outputs.row_mut(t).iter_mut().zip(self.w_o.matvec(&h)) {
                *y = sigmoid(v);
            }
            hidden.row_mut(t).copy_from_slice(&h);
            prev = h;
        }
        Ok(RnnTrace { hidden, outputs })
    }
}
