use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{quantize_to_frames, transpose_to_common_key, FrameSequence, LeadSheet};
use crate::error::{Error, Result};
use crate::vocab::NUM_CHORDS;

/// Chord statistics of a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Occurrences of each chord index across all training frames.
    pub chord_counts: Vec<u64>,
    /// Mean number of frames per piece.
    pub avg_chord_seq_len: f64,
    pub pieces: usize,
}

impl CorpusStats {
    pub fn from_sequences(seqs: &[FrameSequence]) -> CorpusStats {
        let mut chord_counts = vec![0u64; NUM_CHORDS];
        let mut frames = 0usize;
        for s in seqs {
            frames += s.len();
            for c in &s.chords {
                chord_counts[c.value()] += 1;
            }
        }
        let avg_chord_seq_len = if seqs.is_empty() {
            0.0
        } else {
            frames as f64 / seqs.len() as f64
        };
        CorpusStats {
            chord_counts,
            avg_chord_seq_len,
            pieces: seqs.len(),
        }
    }

    pub fn total_frames(&self) -> u64 {
        self.chord_counts.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub train: Vec<FrameSequence>,
    pub test: Vec<FrameSequence>,
    pub stats: CorpusStats,
}

/// Number of test pieces for `n` pieces at train fraction `split_ratio`:
/// `floor(n·(1 − split_ratio))`, clamped so both splits are non-empty.
pub fn test_split_size(n: usize, split_ratio: f64) -> usize {
    let raw = (n as f64 * (1.0 - split_ratio) + 1e-9).floor() as usize;
    raw.clamp(1, n.saturating_sub(1).max(1))
}

/// Normalizes every sheet to C, quantizes it, fills chord gaps and splits the
/// pieces into train and test sets with a seeded shuffle. Sheets without any
/// chord frame are skipped. Statistics cover the training split only.
pub fn prepare_corpus(sheets: &[LeadSheet], split_ratio: f64, seed: u64) -> Result<PreparedCorpus> {
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(Error::domain(format!("split ratio {split_ratio} not in (0, 1)")));
    }
    let sequences: Vec<Option<FrameSequence>> = sheets
        .par_iter()
        .map(|s| quantize_to_frames(&transpose_to_common_key(s)).fill_chords())
        .collect();
    let mut valid = Vec::with_capacity(sequences.len());
    for (i, seq) in sequences.into_iter().enumerate() {
        match seq {
            Some(seq) => valid.push(seq),
            None => log::warn!("skipping sheet {i}: no frame carries a chord"),
        }
    }
    if valid.len() < 2 {
        return Err(Error::domain(format!(
            "need at least 2 usable sheets, found {}",
            valid.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    valid.shuffle(&mut rng);
    let n_test = test_split_size(valid.len(), split_ratio);
    let train = valid.split_off(n_test);
    let test = valid;
    let stats = CorpusStats::from_sequences(&train);
    Ok(PreparedCorpus { train, test, stats })
}
