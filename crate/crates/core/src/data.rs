//! Piano-roll datasets, next-frame samples, frame accuracy and synthetic
//! tasks.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seqae::SequenceBatch;

pub const LOWEST_PITCH: i64 = 21;
pub const HIGHEST_PITCH: i64 = 108;
pub const NOTES: usize = 88;
pub const THRESHOLD: f64 = 0.5;

pub const SPLITS: [&str; 3] = ["train", "valid", "test"];

/// A frame is the set of active MIDI pitches.
pub type Frame = Vec<i64>;
pub type PianoRoll = Vec<Frame>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PianoRollDataset {
    pub train: Vec<PianoRoll>,
    pub valid: Vec<PianoRoll>,
    pub test: Vec<PianoRoll>,
}

impl PianoRollDataset {
    pub fn split(&self, name: &str) -> Option<&[PianoRoll]> {
        match name {
            "train" => Some(&self.train),
            "valid" => Some(&self.valid),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    /// Every pitch in `[21, 108]` and every sequence at least two frames.
    pub fn validate(&self) -> Result<()> {
        for name in SPLITS {
            for (s, seq) in self.split(name).unwrap().iter().enumerate() {
                if seq.len() < 2 {
                    return Err(Error::InvalidInput(format!(
                        "{name} sequence {s} has {} frame(s); at least 2 are required",
                        seq.len()
                    )));
                }
                for (f, frame) in seq.iter().enumerate() {
                    if let Some(&pitch) = frame.iter().find(|p| !(LOWEST_PITCH..=HIGHEST_PITCH).contains(*p)) {
                        return Err(Error::PitchOutOfRange {
                            split: name.to_string(),
                            sequence: s,
                            frame: f,
                            pitch,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> DatasetStats {
        let splits = SPLITS
            .iter()
            .map(|name| {
                let seqs = self.split(name).unwrap();
                SplitStats {
                    split: name.to_string(),
                    sequences: seqs.len(),
                    max_length: seqs.iter().map(Vec::len).max().unwrap_or(0),
                }
            })
            .collect();
        DatasetStats { splits }
    }

    /// Next-frame samples: inputs are frames `1..l-1`, targets frames `2..l`.
    pub fn to_splits(&self) -> Result<Splits> {
        let convert = |seqs: &[PianoRoll]| -> Result<Vec<Sample>> {
            seqs.iter()
                .map(|seq| Sample::next_frame(&to_frames(seq)?))
                .collect()
        };
        Ok(Splits {
            train: convert(&self.train)?,
            valid: convert(&self.valid)?,
            test: convert(&self.test)?,
        })
    }
}

pub fn parse_dataset(text: &str) -> Result<PianoRollDataset> {
    let dataset: PianoRollDataset = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    dataset.validate()?;
    Ok(dataset)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<PianoRollDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    parse_dataset(&text)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitStats {
    pub split: String,
    pub sequences: usize,
    pub max_length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub splits: Vec<SplitStats>,
}

impl DatasetStats {
    pub fn total_sequences(&self) -> usize {
        self.splits.iter().map(|s| s.sequences).sum()
    }

    pub fn max_length(&self) -> usize {
        self.splits.iter().map(|s| s.max_length).max().unwrap_or(0)
    }

    /// `split,sequences,max_length` with a final `total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,sequences,max_length\n");
        for s in &self.splits {
            writeln!(out, "{},{},{}", s.split, s.sequences, s.max_length).unwrap();
        }
        writeln!(out, "total,{},{}", self.total_sequences(), self.max_length()).unwrap();
        out
    }
}

/// `l × 88` binary matrix, column `pitch - 21`.
pub fn to_frames(sequence: &[Frame]) -> Result<Matrix> {
    if sequence.is_empty() {
        return Err(Error::InvalidInput("empty piano-roll sequence".into()));
    }
    let mut frames = Matrix::zeros(sequence.len(), NOTES);
    for (t, frame) in sequence.iter().enumerate() {
        for &pitch in frame {
            if !(LOWEST_PITCH..=HIGHEST_PITCH).contains(&pitch) {
                return Err(Error::InvalidInput(format!("pitch {pitch} out of range at frame {t}")));
            }
            frames[(t, (pitch - LOWEST_PITCH) as usize)] = 1.0;
        }
    }
    Ok(frames)
}

/// Inverse of [`to_frames`]: active pitches in ascending order.
pub fn from_frames(frames: &Matrix) -> Vec<Frame> {
    (0..frames.rows())
        .map(|t| {
            frames
                .row(t)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v >= THRESHOLD)
                .map(|(i, _)| i as i64 + LOWEST_PITCH)
                .collect()
        })
        .collect()
}

/// One training sequence: row `t` of `targets` is the desired output after
/// reading rows `0..=t` of `inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub inputs: Matrix,
    pub targets: Matrix,
}

impl Sample {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::shape("sample length", inputs.rows(), targets.rows()));
        }
        Ok(Self { inputs, targets })
    }

    /// Predict frame `t + 1` from frames `..=t`; the last frame is only a
    /// target.
    pub fn next_frame(frames: &Matrix) -> Result<Self> {
        let l = frames.rows();
        if l < 2 {
            return Err(Error::InvalidInput("next-frame samples need at least 2 frames".into()));
        }
        Ok(Self {
            inputs: frames.row_block(0, l - 1),
            targets: frames.row_block(1, l - 1),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<Sample>,
    pub valid: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Splits {
    pub fn split(&self, name: &str) -> Option<&[Sample]> {
        match name {
            "train" => Some(&self.train),
            "valid" => Some(&self.valid),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn input_size(&self) -> usize {
        self.train.first().map_or(0, |s| s.inputs.cols())
    }

    pub fn output_size(&self) -> usize {
        self.train.first().map_or(0, |s| s.targets.cols())
    }

    /// Training inputs as an autoencoder batch.
    pub fn train_batch(&self) -> Result<SequenceBatch> {
        SequenceBatch::new(self.train.iter().map(|s| s.inputs.clone()).collect())
    }
}

/// True positive, false positive and false negative note counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl FrameCounts {
    /// Adds every frame of one sequence, binarizing predictions at `threshold`.
    pub fn add(&mut self, predictions: &Matrix, targets: &Matrix, threshold: f64) -> Result<()> {
        if predictions.shape() != targets.shape() {
            return Err(Error::shape(
                "frame accuracy",
                format!("{:?}", targets.shape()),
                format!("{:?}", predictions.shape()),
            ));
        }
        for (&y, &t) in predictions.data().iter().zip(targets.data()) {
            match (y >= threshold, t >= 0.5) {
                (true, true) => self.tp += 1,
                (true, false) => self.fp += 1,
                (false, true) => self.fn_ += 1,
                (false, false) => {}
            }
        }
        Ok(())
    }

    /// `TP / (TP + FP + FN)`; 1.0 when there is nothing to predict and
    /// nothing was predicted.
    pub fn accuracy(&self) -> f64 {
        let denom = self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            self.tp as f64 / denom as f64
        }
    }
}

/// Frame accuracy of a single prediction matrix.
pub fn frame_accuracy(predictions: &Matrix, targets: &Matrix, threshold: f64) -> Result<f64> {
    let mut counts = FrameCounts::default();
    counts.add(predictions, targets, threshold)?;
    Ok(counts.accuracy())
}

/// Global-sum frame accuracy over many sequences.
pub fn frame_accuracy_many<'a>(pairs: impl IntoIterator<Item = (&'a Matrix, &'a Matrix)>, threshold: f64) -> Result<f64> {
    let mut counts = FrameCounts::default();
    for (y, t) in pairs {
        counts.add(y, t, threshold)?;
    }
    Ok(counts.accuracy())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Random binary frames, next-frame prediction.
    RandomBinary,
    /// Target at step `t` is the input at step `t - delay`, zero before.
    DelayedCopy { delay: usize },
    /// Prefixes of one binary base sequence of length `rank`, so the
    /// stacked data matrix of every split has rank exactly `rank`. Targets
    /// equal inputs.
    LowRank { rank: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSizes {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    /// Sequence length (inputs). Ignored by `low-rank`.
    pub length: usize,
    pub dim: usize,
    /// Probability of a unit being active, in percent.
    #[serde(default = "default_density")]
    pub density_percent: u32,
}

fn default_density() -> u32 {
    30
}

impl Default for SyntheticSizes {
    fn default() -> Self {
        Self {
            train: 5,
            valid: 5,
            test: 5,
            length: 12,
            dim: 8,
            density_percent: default_density(),
        }
    }
}

fn random_frames(rng: &mut ChaCha8Rng, rows: usize, dim: usize, density: f64) -> Matrix {
    Matrix::from_fn(rows, dim, |_, _| f64::from(u8::from(rng.gen_bool(density))))
}

/// Deterministic synthetic splits for a given seed.
pub fn make_synthetic(kind: SyntheticKind, sizes: SyntheticSizes, seed: u64) -> Result<Splits> {
    if sizes.dim == 0 || sizes.train == 0 {
        return Err(Error::InvalidInput("synthetic data needs dim ≥ 1 and at least one training sequence".into()));
    }
    let density = f64::from(sizes.density_percent.min(100)) / 100.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split = |n: usize, rng: &mut ChaCha8Rng| -> Result<Vec<Sample>> {
        match kind {
            SyntheticKind::RandomBinary => {
                if sizes.length < 1 {
                    return Err(Error::InvalidInput("synthetic length must be ≥ 1".into()));
                }
                (0..n)
                    .map(|_| Sample::next_frame(&random_frames(rng, sizes.length + 1, sizes.dim, density)))
                    .collect()
            }
            SyntheticKind::DelayedCopy { delay } => {
                if sizes.length < 1 {
                    return Err(Error::InvalidInput("synthetic length must be ≥ 1".into()));
                }
                (0..n)
                    .map(|_| {
                        let inputs = random_frames(rng, sizes.length, sizes.dim, density);
                        let targets = Matrix::from_fn(sizes.length, sizes.dim, |t, c| {
                            if t >= delay {
                                inputs[(t - delay, c)]
                            } else {
                                0.0
                            }
                        });
                        Sample::new(inputs, targets)
                    })
                    .collect()
            }
            SyntheticKind::LowRank { rank } => {
                if rank == 0 {
                    return Err(Error::InvalidInput("low-rank synthetic data needs rank ≥ 1".into()));
                }
                let mut base = random_frames(rng, rank, sizes.dim, density);
                // A nonzero first frame makes the prefix rows independent.
                if base.row(0).iter().all(|&v| v == 0.0) {
                    let c = rng.gen_range(0..sizes.dim);
                    base[(0, c)] = 1.0;
                }
                (0..n)
                    .map(|i| {
                        let len = if i == 0 { rank } else { rng.gen_range(1..=rank) };
                        let x = base.row_block(0, len);
                        Sample::new(x.clone(), x)
                    })
                    .collect()
            }
        }
    };
    Ok(Splits {
        train: split(sizes.train, &mut rng)?,
        valid: split(sizes.valid, &mut rng)?,
        test: split(sizes.test, &mut rng)?,
    })
}
