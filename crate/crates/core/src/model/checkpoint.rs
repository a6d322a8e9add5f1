use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, LmnParams, Model, RnnParams, UnfoldedParams, Variant};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seqae::AutoencoderParams;

pub const FORMAT_VERSION: u32 = 1;

/// JSON checkpoint shared by every command. Matrices are stored row-major;
/// `f64` values are written in shortest round-trip form, so a load after a
/// save reproduces every value bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// `rnn`, `lmn`, `unfolded` or `linear_autoencoder`.
    pub arch: String,
    pub sizes: BTreeMap<String, usize>,
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_activation: Option<Activation>,
    pub rng_seed: Option<u64>,
    pub matrices: BTreeMap<String, Matrix>,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported checkpoint format_version {} (expected {FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        Ok(ckpt)
    }

    fn take(&mut self, name: &str) -> Result<Matrix> {
        self.matrices
            .remove(name)
            .ok_or_else(|| Error::InvalidInput(format!("checkpoint is missing matrix '{name}'")))
    }

    pub fn from_model(model: &Model, rng_seed: Option<u64>) -> Self {
        let mut sizes = BTreeMap::new();
        sizes.insert("a".to_string(), model.input_size());
        sizes.insert("o".to_string(), model.output_size());
        let (arch, variant, hidden_activation) = match model {
            Model::Rnn(p) => {
                sizes.insert("p".into(), p.hidden_size());
                ("rnn", None, None)
            }
            Model::Lmn(p) => {
                sizes.insert("p".into(), p.functional_size());
                sizes.insert("m".into(), p.memory_size());
                ("lmn", Some(p.variant), None)
            }
            Model::Unfolded(p) => {
                sizes.insert("p".into(), p.hidden_size());
                sizes.insert("k".into(), p.k());
                ("unfolded", None, Some(p.activation))
            }
        };
        let matrices = model
            .names()
            .into_iter()
            .zip(model.matrices().into_iter().cloned())
            .collect();
        Checkpoint {
            format_version: FORMAT_VERSION,
            arch: arch.to_string(),
            sizes,
            variant,
            hidden_activation,
            rng_seed,
            matrices,
        }
    }

    pub fn into_model(mut self) -> Result<Model> {
        let model = match self.arch.as_str() {
            "rnn" => Model::Rnn(RnnParams {
                w_xh: self.take("W_xh")?,
                w_hh: self.take("W_hh")?,
                w_o: self.take("W_o")?,
            }),
            "lmn" => {
                let variant = self
                    .variant
                    .ok_or_else(|| Error::InvalidInput("LMN checkpoint has no variant".into()))?;
                Model::Lmn(LmnParams::new(
                    self.take("W_xh")?,
                    self.take("W_mh")?,
                    self.take("W_hm")?,
                    self.take("W_mm")?,
                    self.take("W_out")?,
                    variant,
                )?)
            }
            "unfolded" => {
                let k = *self
                    .sizes
                    .get("k")
                    .ok_or_else(|| Error::InvalidInput("unfolded checkpoint has no k".into()))?;
                let w_xh = self.take("W_xh")?;
                let w_hh = (1..=k)
                    .map(|i| self.take(&format!("W_hh_{i}")))
                    .collect::<Result<Vec<_>>>()?;
                let w_o = (0..=k)
                    .map(|i| self.take(&format!("W_o_{i}")))
                    .collect::<Result<Vec<_>>>()?;
                let params = UnfoldedParams {
                    w_xh,
                    w_hh,
                    w_o,
                    activation: self.hidden_activation.unwrap_or_default(),
                };
                params.validate()?;
                Model::Unfolded(params)
            }
            other => {
                return Err(Error::InvalidInput(format!(
                    "checkpoint arch '{other}' is not a sequence model"
                )))
            }
        };
        if let Model::Rnn(p) = &model {
            p.validate()?;
        }
        Ok(model)
    }

    pub fn from_autoencoder(ae: &AutoencoderParams, rng_seed: Option<u64>) -> Self {
        let sizes = [("a", ae.a), ("p", ae.p), ("train_len", ae.train_len)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let matrices = [("A", ae.encoder.clone()), ("B", ae.transition.clone())]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Checkpoint {
            format_version: FORMAT_VERSION,
            arch: "linear_autoencoder".into(),
            sizes,
            variant: None,
            hidden_activation: None,
            rng_seed,
            matrices,
        }
    }

    pub fn into_autoencoder(mut self) -> Result<AutoencoderParams> {
        if self.arch != "linear_autoencoder" {
            return Err(Error::InvalidInput(format!("checkpoint arch '{}' is not an autoencoder", self.arch)));
        }
        let train_len = self.sizes.get("train_len").copied().unwrap_or(0);
        AutoencoderParams::new(self.take("A")?, self.take("B")?, train_len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelKind, ModelSizes};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_model_round_trips_through_json() {
        let sizes = ModelSizes { input: 3, hidden: 4, memory: 5, output: 2, k: 3 };
        for kind in [ModelKind::Rnn, ModelKind::LmnA, ModelKind::LmnB, ModelKind::Unfolded] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let model = Model::random(kind, sizes, Activation::Selu, &mut rng).unwrap();
            let ckpt = Checkpoint::from_model(&model, Some(9));
            let json = serde_json::to_string(&ckpt).unwrap();
            let back: Checkpoint = serde_json::from_str(&json).unwrap();
            assert_eq!(back, ckpt);
            let restored = back.into_model().unwrap();
            assert_eq!(restored, model);
            assert_eq!(restored.kind(), kind);
        }
    }

    #[test]
    fn missing_matrix_is_an_error() {
        let model = Model::Rnn(RnnParams::zeros(2, 2, 2));
        let mut ckpt = Checkpoint::from_model(&model, None);
        ckpt.matrices.remove("W_hh");
        assert!(ckpt.into_model().is_err());
    }
}
