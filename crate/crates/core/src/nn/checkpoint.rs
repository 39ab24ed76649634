//! Checkpoint file format.
//!
//! ```text
//! MHARM1\n
//! <header: one line of JSON>\n
//! <f32 little-endian tensor data, in header order>
//! ```
//!
//! The header lists tensor names and shapes, the hidden width, the vocabulary
//! layout hash, and the training-corpus statistics and class weights. Loading
//! rejects a file whose vocabulary hash differs from this library's.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{Hyper, ModelParams};
use super::weights::ClassWeights;
use super::{INPUT_WIDTH, NUM_CHORDS};
use crate::error::{Error, Result};
use crate::leadsheet::CorpusStats;
use crate::vocab::vocab_layout_hash;

pub const MAGIC: &[u8] = b"MHARM1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub hidden: usize,
    pub input_width: usize,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub dropout: f64,
    pub seed: u64,
    pub tensors: Vec<TensorSpec>,
    pub stats: Option<CorpusStats>,
    pub class_balancing: bool,
    pub class_weights: ClassWeights,
}

/// A model plus the training metadata stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub stats: Option<CorpusStats>,
    pub class_balancing: bool,
    pub class_weights: ClassWeights,
}

impl Checkpoint {
    pub fn new(params: ModelParams) -> Self {
        Checkpoint {
            params,
            stats: None,
            class_balancing: false,
            class_weights: ClassWeights::uniform(NUM_CHORDS),
        }
    }

    /// Default Gibbs iteration count: the rounded mean training sequence
    /// length, or 16 without statistics.
    pub fn default_iterations(&self) -> usize {
        self.stats
            .as_ref()
            .map(|s| s.avg_chord_seq_len.round() as usize)
            .filter(|&n| n >= 1)
            .unwrap_or(16)
    }

    pub fn header(&self) -> CheckpointHeader {
        let hyper = self.params.hyper;
        CheckpointHeader {
            version: CHECKPOINT_VERSION,
            hidden: hyper.hidden,
            input_width: INPUT_WIDTH,
            vocab_size: NUM_CHORDS,
            vocab_hash: vocab_layout_hash(),
            dropout: hyper.dropout,
            seed: hyper.seed,
            tensors: self
                .params
                .layout()
                .into_iter()
                .map(|(name, shape)| TensorSpec { name, shape })
                .collect(),
            stats: self.stats.clone(),
            class_balancing: self.class_balancing,
            class_weights: self.class_weights.clone(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_string(&self.header()).map_err(|e| Error::Checkpoint(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(b"\n")?;
        w.write_all(header.as_bytes())?;
        w.write_all(b"\n")?;
        for (_, data) in self.params.named_slices() {
            let mut buf = Vec::with_capacity(data.len() * 4);
            for &v in data {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory cannot fail");
        out
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Checkpoint> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut line = Vec::new();
        r.read_until(b'\n', &mut line)?;
        if line.strip_suffix(b"\n") != Some(MAGIC) {
            return Err(bad("missing MHARM1 magic"));
        }
        line.clear();
        r.read_until(b'\n', &mut line)?;
        let header: CheckpointHeader = serde_json::from_slice(line.strip_suffix(b"\n").unwrap_or(&line))
            .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported checkpoint version {}", header.version)));
        }
        let hash = vocab_layout_hash();
        if header.vocab_hash != hash || header.vocab_size != NUM_CHORDS || header.input_width != INPUT_WIDTH {
            return Err(Error::Checkpoint(format!(
                "vocabulary layout mismatch: checkpoint has {} ({} chords), this build expects {} ({} chords)",
                header.vocab_hash, header.vocab_size, hash, NUM_CHORDS
            )));
        }
        if header.class_weights.len() != NUM_CHORDS {
            return Err(bad("class weight vector has the wrong length"));
        }
        let mut params = ModelParams::zeros(Hyper {
            hidden: header.hidden,
            dropout: header.dropout,
            seed: header.seed,
        });
        let expected: Vec<TensorSpec> = params
            .layout()
            .into_iter()
            .map(|(name, shape)| TensorSpec { name, shape })
            .collect();
        if expected != header.tensors {
            return Err(bad("tensor layout does not match the declared hidden width"));
        }
        for dst in params.slices_mut() {
            let mut buf = vec![0u8; dst.len() * 4];
            r.read_exact(&mut buf).map_err(|_| bad("truncated tensor data"))?;
            for (v, chunk) in dst.iter_mut().zip(buf.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk")) as f64;
            }
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(bad("trailing bytes after tensor data"));
        }
        if !params.is_finite() {
            return Err(bad("non-finite parameter values"));
        }
        Ok(Checkpoint {
            params,
            stats: header.stats,
            class_balancing: header.class_balancing,
            class_weights: header.class_weights,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let file = std::fs::File::open(path)?;
        Checkpoint::read_from(std::io::BufReader::new(file))
    }
}
