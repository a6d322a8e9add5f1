use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{sigmoid, tanh};
use super::{check_finite, check_input, uniform_init};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Where the LMN output layer reads from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Output from the functional activation `h_t`.
    A,
    /// Output from the memory state `h^m_t`.
    B,
}

/// Linear Memory Network weights.
///
/// ```text
/// h_t   = tanh(W_xh x_t + W_mh hm_{t-1})
/// hm_t  = W_hm h_t + W_mm hm_{t-1}
/// y_t   = sigmoid(W_out hm_t)   (variant B)
///       = sigmoid(W_out h_t)    (variant A)
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct LmnParams {
    /// `p × a`
    pub w_xh: Matrix,
    /// `p × m`
    pub w_mh: Matrix,
    /// `m × p`
    pub w_hm: Matrix,
    /// `m × m`
    pub w_mm: Matrix,
    /// `o × m` (B) or `o × p` (A)
    pub w_out: Matrix,
    pub variant: Variant,
}

#[derive(Clone, Debug)]
pub struct LmnTrace {
    /// Functional activations, `l × p`.
    pub hidden: Matrix,
    /// Memory states, `l × m`.
    pub memory: Matrix,
    /// Output probabilities, `l × o`.
    pub outputs: Matrix,
}

impl LmnParams {
    pub const NAMES: [&'static str; 5] = ["W_xh", "W_mh", "W_hm", "W_mm", "W_out"];

    pub fn new(
        w_xh: Matrix,
        w_mh: Matrix,
        w_hm: Matrix,
        w_mm: Matrix,
        w_out: Matrix,
        variant: Variant,
    ) -> Result<Self> {
        let params = Self {
            w_xh,
            w_mh,
            w_hm,
            w_mm,
            w_out,
            variant,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn zeros(a: usize, p: usize, m: usize, o: usize, variant: Variant) -> Self {
        let out_cols = match variant {
            Variant::A => p,
            Variant::B => m,
        };
        Self {
            w_xh: Matrix::zeros(p, a),
            w_mh: Matrix::zeros(p, m),
            w_hm: Matrix::zeros(m, p),
            w_mm: Matrix::zeros(m, m),
            w_out: Matrix::zeros(o, out_cols),
            variant,
        }
    }

    /// Uniform in `[-1/√fan_in, 1/√fan_in]` per matrix.
    pub fn random(a: usize, p: usize, m: usize, o: usize, variant: Variant, rng: &mut impl Rng) -> Self {
        let mut params = Self::zeros(a, p, m, o, variant);
        for w in params.matrices_mut() {
            uniform_init(w, rng);
        }
        params
    }

    pub fn input_size(&self) -> usize {
        self.w_xh.cols()
    }

    pub fn functional_size(&self) -> usize {
        self.w_xh.rows()
    }

    pub fn memory_size(&self) -> usize {
        self.w_mm.rows()
    }

    pub fn output_size(&self) -> usize {
        self.w_out.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (p, a) = self.w_xh.shape();
        let m = self.w_mm.rows();
        let out_cols = match self.variant {
            Variant::A => p,
            Variant::B => m,
        };
        let expect = [
            ("W_mh", self.w_mh.shape(), (p, m)),
            ("W_hm", self.w_hm.shape(), (m, p)),
            ("W_mm", self.w_mm.shape(), (m, m)),
            ("W_out", self.w_out.shape(), (self.w_out.rows(), out_cols)),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::shape(
                    format!("LMN {name} (a={a}, p={p}, m={m}, variant {:?})", self.variant),
                    format!("{}x{}", want.0, want.1),
                    format!("{}x{}", got.0, got.1),
                ));
            }
        }
        Ok(())
    }

    pub fn matrices(&self) -> [&Matrix; 5] {
        [&self.w_xh, &self.w_mh, &self.w_hm, &self.w_mm, &self.w_out]
    }

    pub fn matrices_mut(&mut self) -> [&mut Matrix; 5] {
        [
            &mut self.w_xh,
            &mut self.w_mh,
            &mut self.w_hm,
            &mut self.w_mm,
            &mut self.w_out,
        ]
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<LmnTrace> {
        self.validate()?;
        check_input("LMN", inputs, self.input_size())?;
        let l = inputs.rows();
        let (p, m, o) = (self.functional_size(), self.memory_size(), self.output_size());
        let mut hidden = Matrix::zeros(l, p);
        let mut memory = Matrix::zeros(l, m);
        let mut outputs = Matrix::zeros(l, o);
        let mut prev_mem = vec![0.0; m];
        for t in 0..l {
            let mut pre = self.w_xh.matvec(inputs.row(t));
            self.w_mh.matvec_acc(&prev_mem, &mut pre);
            let h: Vec<f64> = pre.iter().map(|&z| tanh(z)).collect();
            let mut mem = self.w_hm.matvec(&h);
            self.w_mm.matvec_acc(&prev_mem, &mut mem);
            let z = match self.variant {
                Variant::A => self.w_out.matvec(&h),
                Variant::B => self.w_out.matvec(&mem),
            };
            let y: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
            check_finite("LMN memory state", &mem, t)?;
            check_finite("LMN output", &z, t)?;
            hidden.row_mut(t).copy_from_slice(&h);
            memory.row_mut(t).copy_from_slice(&mem);
            outputs.row_mut(t).copy_from_slice(&y);
            prev_mem = mem;
        }
        Ok(LmnTrace {
            hidden,
            memory,
            outputs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_rows(&[[v]]).unwrap()
    }

    #[test]
    fn zero_weights_give_half() {
        let params = LmnParams::zeros(3, 4, 2, 5, Variant::B);
        let inputs = Matrix::from_fn(6, 3, |t, c| (t + c) as f64);
        let trace = params.forward(&inputs).unwrap();
        assert_eq!(trace.hidden.max_abs(), 0.0);
        assert_eq!(trace.memory.max_abs(), 0.0);
        assert!(trace.outputs.data().iter().all(|&y| y == 0.5));
        assert_eq!(trace.outputs.shape(), (6, 5));
    }

    #[test]
    fn scalar_hand_computation() {
        let params = LmnParams::new(scalar(1.0), scalar(1.0), scalar(1.0), scalar(1.0), scalar(1.0), Variant::B)
            .unwrap();
        let trace = params.forward(&Matrix::from_rows(&[[1.0], [0.0]]).unwrap()).unwrap();
        let h1 = 1f64.tanh();
        let h2 = h1.tanh();
        assert_eq!(trace.hidden[(0, 0)], h1);
        assert_eq!(trace.memory[(0, 0)], h1);
        assert_eq!(trace.hidden[(1, 0)], h2);
        assert_eq!(trace.memory[(1, 0)], h2 + h1);
        assert_eq!(trace.outputs[(1, 0)], sigmoid(h2 + h1));
    }

    #[test]
    fn no_memory_feedback_in_variant_a_is_per_timestep() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = LmnParams::random(3, 4, 5, 2, Variant::A, &mut rng);
        params.w_mh.fill(0.0);
        let inputs = Matrix::from_fn(5, 3, |t, c| ((t * 3 + c) as f64).sin());
        let perm = [3, 0, 4, 1, 2];
        let permuted = Matrix::from_fn(5, 3, |t, c| inputs[(perm[t], c)]);
        let a = params.forward(&inputs).unwrap();
        let b = params.forward(&permuted).unwrap();
        for (t, &src) in perm.iter().enumerate() {
            assert_eq!(b.outputs.row(t), a.outputs.row(src));
        }
    }

    #[test]
    fn shape_errors() {
        let params = LmnParams::zeros(3, 4, 2, 5, Variant::B);
        assert!(params.forward(&Matrix::zeros(2, 4)).is_err());
        let bad = LmnParams::new(
            Matrix::zeros(4, 3),
            Matrix::zeros(4, 2),
            Matrix::zeros(2, 4),
            Matrix::zeros(2, 2),
            Matrix::zeros(5, 4),
            Variant::B,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn overflow_is_reported_with_timestep() {
        let mut params = LmnParams::zeros(1, 1, 1, 1, Variant::B);
        params.w_xh.fill(1.0);
        params.w_hm.fill(1.0);
        params.w_mm.fill(1e200);
        params.w_out.fill(1.0);
        let err = params.forward(&Matrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { timestep: 2, .. }), "{err}");
    }
}
