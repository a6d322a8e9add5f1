use serde::{Deserialize, Serialize};

/// Recurrent layer shapes for the closed-form parameter counts. Output
/// layers are not counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "lowercase")]
pub enum CoreArch {
    Lstm { x: usize, h: usize },
    Gru { x: usize, h: usize },
    Rnn { x: usize, h: usize },
    /// `f` functional units, `m` memory units.
    Lmn { x: usize, f: usize, m: usize },
}

/// LSTM `4(x+h)h`, GRU `3(x+h)h`, RNN `(x+h)h`, LMN `(x+m)f + (f+m)m`.
pub fn parameter_count(arch: CoreArch) -> usize {
    match arch {
        CoreArch::Lstm { x, h } => 4 * (x + h) * h,
        CoreArch::Gru { x, h } => 3 * (x + h) * h,
        CoreArch::Rnn { x, h } => (x + h) * h,
        CoreArch::Lmn { x, f, m } => (x + m) * f + (f + m) * m,
    }
}
