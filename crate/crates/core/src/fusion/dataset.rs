//! Synthetic command dataset and its JSON-lines format.

use std::io::{BufRead, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::Sample;
use super::vocab::{COMMANDS, IDLE, N_CLASSES, VOCAB_SIZE};
use super::window::{InputTensor, WINDOW_SLOTS};

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTokens {
    pub tokens: Vec<usize>,
    pub label: usize,
}

impl LabeledTokens {
    pub fn sample(&self) -> Sample {
        Sample { tensor: InputTensor::encode(&self.tokens), label: self.label }
    }
}

/// Random phrasings of random commands, padded with idle frames and shuffled.
pub fn synthetic_dataset(n: usize, seed: u64) -> Vec<LabeledTokens> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let label = rng.random_range(0..N_CLASSES);
            let phrasing = COMMANDS[label].phrasings().choose(&mut rng).unwrap();
            let mut tokens = phrasing.to_vec();
            let fillers = rng.random_range(0..=WINDOW_SLOTS - tokens.len());
            tokens.extend(std::iter::repeat_n(IDLE, fillers));
            tokens.shuffle(&mut rng);
            LabeledTokens { tokens, label }
        })
        .collect()
}

/// Shuffled split; the first part holds `1 - test_fraction` of the data.
pub fn split<T: Clone>(data: &[T], test_fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = data.to_vec();
    shuffled.shuffle(&mut rng);
    let n_test = (data.len() as f64 * test_fraction).round() as usize;
    let test = shuffled.split_off(data.len() - n_test);
    (shuffled, test)
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: {reason}")]
    Invalid { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<LabeledTokens>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabeledTokens =
            serde_json::from_str(&line).map_err(|source| DatasetError::Parse { line: i + 1, source })?;
        let invalid = |reason: String| DatasetError::Invalid { line: i + 1, reason };
        if rec.tokens.is_empty() || rec.tokens.len() > WINDOW_SLOTS {
            return Err(invalid(format!("expected 1 to {WINDOW_SLOTS} tokens, got {}", rec.tokens.len())));
        }
        if let Some(t) = rec.tokens.iter().find(|&&t| t >= VOCAB_SIZE) {
            return Err(invalid(format!("token {t} outside the vocabulary")));
        }
        if rec.label >= N_CLASSES {
            return Err(invalid(format!("label {} outside 0..{N_CLASSES}", rec.label)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut writer: W, data: &[LabeledTokens]) -> std::io::Result<()> {
    for rec in data {
        serde_json::to_writer(&mut writer, rec)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
