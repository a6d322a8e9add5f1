use rand::Rng;

use super::activation::{sigmoid, Activation};
use super::{check_finite, check_input, uniform_init};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Feedforward network unrolled over `k` lags:
///
/// ```text
/// h_t = act(W_xh x_t + Σ_{i=1..k} W_hh[i] h_{t-i})
/// y_t = sigmoid(Σ_{i=0..k} W_o[i] h_{t-i})
/// ```
///
/// Hidden states before the start of the sequence are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct UnfoldedParams {
    /// `p × a`
    pub w_xh: Matrix,
    /// `w_hh[i - 1]` is the lag-`i` matrix, `p × p`, for `i = 1..=k`.
    pub w_hh: Vec<Matrix>,
    /// `w_o[i]` is the lag-`i` output matrix, `o × p`, for `i = 0..=k`.
    pub w_o: Vec<Matrix>,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct UnfoldedTrace {
    /// Pre-activations, `l × p`.
    pub pre: Matrix,
    /// Hidden states, `l × p`.
    pub hidden: Matrix,
    /// Output probabilities, `l × o`.
    pub outputs: Matrix,
}

impl UnfoldedParams {
    pub fn zeros(a: usize, p: usize, o: usize, k: usize, activation: Activation) -> Self {
        assert!(k >= 1, "unroll length must be at least 1");
        Self {
            w_xh: Matrix::zeros(p, a),
            w_hh: (0..k).map(|_| Matrix::zeros(p, p)).collect(),
            w_o: (0..=k).map(|_| Matrix::zeros(o, p)).collect(),
            activation,
        }
    }

    pub fn random(a: usize, p: usize, o: usize, k: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let mut params = Self::zeros(a, p, o, k, activation);
        for w in params.matrices_mut() {
            uniform_init(w, rng);
        }
        params
    }

    pub fn k(&self) -> usize {
        self.w_hh.len()
    }

    pub fn input_size(&self) -> usize {
        self.w_xh.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_xh.rows()
    }

    pub fn output_size(&self) -> usize {
        self.w_o[0].rows()
    }

    /// Matrix names in the order of [`Self::matrices`].
    pub fn names(&self) -> Vec<String> {
        let mut names = vec!["W_xh".to_string()];
        names.extend((1..=self.k()).map(|i| format!("W_hh_{i}")));
        names.extend((0..=self.k()).map(|i| format!("W_o_{i}")));
        names
    }

    pub fn matrices(&self) -> Vec<&Matrix> {
        std::iter::once(&self.w_xh)
            .chain(self.w_hh.iter())
            .chain(self.w_o.iter())
            .collect()
    }

    pub fn matrices_mut(&mut self) -> Vec<&mut Matrix> {
        std::iter::once(&mut self.w_xh)
            .chain(self.w_hh.iter_mut())
            .chain(self.w_o.iter_mut())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::InvalidInput("unfolded network needs k >= 1".into()));
        }
        if self.w_o.len() != k + 1 {
            return Err(Error::shape("unfolded output lag count", k + 1, self.w_o.len()));
        }
        let p = self.hidden_size();
        let o = self.output_size();
        for (i, w) in self.w_hh.iter().enumerate() {
            if w.shape() != (p, p) {
                return Err(Error::shape(format!("W_hh_{}", i + 1), format!("{p}x{p}"), format!("{:?}", w.shape())));
            }
        }
        for (i, w) in self.w_o.iter().enumerate() {
            if w.shape() != (o, p) {
                return Err(Error::shape(format!("W_o_{i}"), format!("{o}x{p}"), format!("{:?}", w.shape())));
            }
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<UnfoldedTrace> {
        self.validate()?;
        check_input("unfolded network", inputs, self.input_size())?;
        let l = inputs.rows();
        let (p, o, k) = (self.hidden_size(), self.output_size(), self.k());
        let mut pre = Matrix::zeros(l, p);
        let mut hidden = Matrix::zeros(l, p);
        let mut outputs = Matrix::zeros(l, o);
        for t in 0..l {
            let mut z = self.w_xh.matvec(inputs.row(t));
            for i in 1..=k.min(t) {
                self.w_hh[i - 1].matvec_acc(hidden.row(t - i), &mut z);
            }
            check_finite("unfolded pre-activation", &z, t)?;
            pre.row_mut(t).copy_from_slice(&z);
            for (h, &v) in hidden.row_mut(t).iter_mut().zip(&z) {
                *h = self.activation.apply(v);
            }
            let mut out = vec![0.0; o];
            for i in 0..=k.min(t) {
                self.w_o[i].matvec_acc(hidden.row(t - i), &mut out);
            }
            check_finite("unfolded output", &out, t)?;
            for (y, v) in outputs.row_mut(t).iter_mut().zip(out) {
                *y = sigmoid(v);
            }
        }
        Ok(UnfoldedTrace {
            pre,
            hidden,
            outputs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RnnParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_lag_hand_computation() {
        let mut params = UnfoldedParams::zeros(1, 1, 1, 2, Activation::Tanh);
        for w in params.matrices_mut() {
            w.fill(1.0);
        }
        let trace = params.forward(&Matrix::from_rows(&[[1.0], [1.0]]).unwrap()).unwrap();
        let h1 = 1f64.tanh();
        let h2 = (1.0 + h1).tanh();
        assert_eq!(trace.hidden[(0, 0)], h1);
        assert_eq!(trace.hidden[(1, 0)], h2);
        assert_eq!(trace.outputs[(1, 0)], sigmoid(h2 + h1));
    }

    #[test]
    fn first_output_uses_only_first_hidden() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = UnfoldedParams::random(2, 3, 2, 3, Activation::Tanh, &mut rng);
        let inputs = Matrix::from_fn(4, 2, |t, c| (t as f64 - c as f64) * 0.3);
        let trace = params.forward(&inputs).unwrap();
        let z = params.w_o[0].matvec(trace.hidden.row(0));
        for (y, v) in trace.outputs.row(0).iter().zip(z) {
            assert_eq!(*y, sigmoid(v));
        }
    }

    #[test]
    fn single_lag_without_last_output_is_an_rnn() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut unfolded = UnfoldedParams::random(3, 4, 2, 1, Activation::Tanh, &mut rng);
        unfolded.w_o[1].fill(0.0);
        let rnn = RnnParams {
            w_xh: unfolded.w_xh.clone(),
            w_hh: unfolded.w_hh[0].clone(),
            w_o: unfolded.w_o[0].clone(),
        };
        let inputs = Matrix::from_fn(7, 3, |t, c| ((t * 5 + c) as f64).cos());
        let a = unfolded.forward(&inputs).unwrap();
        let b = rnn.forward(&inputs).unwrap();
        assert!(a.hidden.max_abs_diff(&b.hidden) <= 1e-15);
        assert!(a.outputs.max_abs_diff(&b.outputs) <= 1e-15);
    }

    #[test]
    fn names_match_matrices() {
        let params = UnfoldedParams::zeros(2, 3, 4, 3, Activation::Selu);
        assert_eq!(params.names().len(), params.matrices().len());
        assert_eq!(params.names()[4], "W_o_0");
    }
}
