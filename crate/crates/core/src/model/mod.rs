//! Forward computation for the LMN, the unrolled k-lag network used for
//! pretraining and a vanilla RNN baseline.

pub mod activation;
mod checkpoint;
mod count;
mod lmn;
mod rnn;
mod unfolded;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use activation::Activation;
pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use count::{parameter_count, CoreArch};
pub use lmn::{LmnParams, LmnTrace, Variant};
pub use rnn::{RnnParams, RnnTrace};
pub use unfolded::{UnfoldedParams, UnfoldedTrace};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Rnn,
    LmnA,
    LmnB,
    Unfolded,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rnn => "rnn",
            ModelKind::LmnA => "lmn-a",
            ModelKind::LmnB => "lmn-b",
            ModelKind::Unfolded => "unfolded",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rnn" => Ok(ModelKind::Rnn),
            "lmn-a" | "lmn_a" => Ok(ModelKind::LmnA),
            "lmn-b" | "lmn_b" => Ok(ModelKind::LmnB),
            "unfolded" | "ulm" => Ok(ModelKind::Unfolded),
            other => Err(Error::InvalidInput(format!(
                "unknown model kind '{other}' (expected rnn, lmn-a, lmn-b or unfolded)"
            ))),
        }
    }
}

/// Any of the trainable sequence models.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Rnn(RnnParams),
    Lmn(LmnParams),
    Unfolded(UnfoldedParams),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Rnn(_) => ModelKind::Rnn,
            Model::Lmn(p) if p.variant == Variant::A => ModelKind::LmnA,
            Model::Lmn(_) => ModelKind::LmnB,
            Model::Unfolded(_) => ModelKind::Unfolded,
        }
    }

    pub fn input_size(&self) -> usize {
        match self {
            Model::Rnn(p) => p.input_size(),
            Model::Lmn(p) => p.input_size(),
            Model::Unfolded(p) => p.input_size(),
        }
    }

    pub fn output_size(&self) -> usize {
        match self {
            Model::Rnn(p) => p.output_size(),
            Model::Lmn(p) => p.output_size(),
            Model::Unfolded(p) => p.output_size(),
        }
    }

    /// Output probabilities, one row per timestep.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        Ok(match self {
            Model::Rnn(p) => p.forward(inputs)?.outputs,
            Model::Lmn(p) => p.forward(inputs)?.outputs,
            Model::Unfolded(p) => p.forward(inputs)?.outputs,
        })
    }

    /// Functional (nonlinear hidden) activations, one row per timestep.
    pub fn hidden_states(&self, inputs: &Matrix) -> Result<Matrix> {
        Ok(match self {
            Model::Rnn(p) => p.forward(inputs)?.hidden,
            Model::Lmn(p) => p.forward(inputs)?.hidden,
            Model::Unfolded(p) => p.forward(inputs)?.hidden,
        })
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            Model::Rnn(_) => RnnParams::NAMES.iter().map(|s| s.to_string()).collect(),
            Model::Lmn(_) => LmnParams::NAMES.iter().map(|s| s.to_string()).collect(),
            Model::Unfolded(p) => p.names(),
        }
    }

    pub fn matrices(&self) -> Vec<&Matrix> {
        match self {
            Model::Rnn(p) => p.matrices().to_vec(),
            Model::Lmn(p) => p.matrices().to_vec(),
            Model::Unfolded(p) => p.matrices(),
        }
    }

    pub fn matrices_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Model::Rnn(p) => p.matrices_mut().into_iter().collect(),
            Model::Lmn(p) => p.matrices_mut().into_iter().collect(),
            Model::Unfolded(p) => p.matrices_mut(),
        }
    }

    /// Total number of weights across all matrices.
    pub fn weight_count(&self) -> usize {
        self.matrices().iter().map(|m| m.len()).sum()
    }

    /// `½ Σ ‖W‖_F²`
    pub fn half_sq_norm(&self) -> f64 {
        0.5 * self.matrices().iter().map(|m| m.sum_sq()).sum::<f64>()
    }

    /// Recurrent-core parameter count per the closed-form formulas
    /// (output layers excluded). `None` for the unrolled network.
    pub fn core_parameter_count(&self) -> Option<usize> {
        match self {
            Model::Rnn(p) => Some(parameter_count(CoreArch::Rnn {
                x: p.input_size(),
                h: p.hidden_size(),
            })),
            Model::Lmn(p) => Some(parameter_count(CoreArch::Lmn {
                x: p.input_size(),
                f: p.functional_size(),
                m: p.memory_size(),
            })),
            Model::Unfolded(_) => None,
        }
    }
}

/// Layer sizes used to construct a model from scratch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSizes {
    pub input: usize,
    /// Hidden (functional) units.
    pub hidden: usize,
    /// Memory units; LMN only.
    #[serde(default)]
    pub memory: usize,
    pub output: usize,
    /// Unroll length; unfolded network only.
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    10
}

impl Model {
    /// Randomly initialized model, uniform in `±1/√fan_in` per matrix.
    pub fn random(kind: ModelKind, sizes: ModelSizes, activation: Activation, rng: &mut impl Rng) -> Result<Model> {
        let ModelSizes {
            input,
            hidden,
            memory,
            output,
            k,
        } = sizes;
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::InvalidInput(format!("model sizes must be positive: {sizes:?}")));
        }
        Ok(match kind {
            ModelKind::Rnn => Model::Rnn(RnnParams::random(input, hidden, output, rng)),
            ModelKind::LmnA | ModelKind::LmnB => {
                if memory == 0 {
                    return Err(Error::InvalidInput("LMN memory size must be positive".into()));
                }
                let variant = if kind == ModelKind::LmnA { Variant::A } else { Variant::B };
                Model::Lmn(LmnParams::random(input, hidden, memory, output, variant, rng))
            }
            ModelKind::Unfolded => {
                if k == 0 {
                    return Err(Error::InvalidInput("unroll length k must be positive".into()));
                }
                Model::Unfolded(UnfoldedParams::random(input, hidden, output, k, activation, rng))
            }
        })
    }
}

pub(crate) fn uniform_init(w: &mut Matrix, rng: &mut impl Rng) {
    let scale = 1.0 / (w.cols() as f64).sqrt();
    for v in w.data_mut() {
        *v = rng.gen_range(-scale..=scale);
    }
}

pub(crate) fn check_input(model: &str, inputs: &Matrix, expected: usize) -> Result<()> {
    if inputs.cols() != expected {
        return Err(Error::shape(format!("{model} input size"), expected, inputs.cols()));
    }
    Ok(())
}

pub(crate) fn check_finite(context: &str, values: &[f64], timestep: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
            timestep,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kind_parsing() {
        assert_eq!("LMN-B".parse::<ModelKind>().unwrap(), ModelKind::LmnB);
        assert!("lstm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn random_init_is_bounded_and_seeded() {
        let sizes = ModelSizes { input: 9, hidden: 4, memory: 16, output: 2, k: 3 };
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let m1 = Model::random(ModelKind::LmnB, sizes, Activation::Tanh, &mut a).unwrap();
        let m2 = Model::random(ModelKind::LmnB, sizes, Activation::Tanh, &mut b).unwrap();
        assert_eq!(m1, m2);
        if let Model::Lmn(p) = &m1 {
            assert!(p.w_xh.max_abs() <= 1.0 / 3.0);
            assert!(p.w_mm.max_abs() <= 0.25);
        }
        assert_eq!(m1.weight_count(), 4 * 9 + 4 * 16 + 16 * 4 + 16 * 16 + 2 * 16);
    }
}
