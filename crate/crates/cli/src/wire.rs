//! Request and response bodies of the HTTP service, and the handlers that
//! turn one into the other without any HTTP machinery.

use std::collections::BTreeMap;

use mharm::leadsheet::CorpusStats;
use mharm::metrics::{evaluate_corpus, Harmonization, MetricReport};
use mharm::nn::Checkpoint;
use mharm::sampler::{harmonize, PinSet, SamplerConfig};
use mharm::vocab::{vocab_layout_hash, vocabulary_names, ChordIndex, ChordLabel, PitchClass, PitchClassSet, NUM_CHORDS};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An API failure, mapped to an HTTP status by the server.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApiError {
    /// Malformed body; `path` locates the offending field.
    #[error("invalid request at {path}: {message}")]
    BadRequest { path: String, message: String },
    /// Well-formed, but names something outside the model vocabulary.
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    fn bad(path: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError::BadRequest {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Parses a JSON body, reporting the path of the first bad field.
pub fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad(path, e.into_inner().to_string())
    })
}

/// A pinned chord, by name (`"G7"`) or vocabulary index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PinValue {
    Index(u64),
    Name(String),
}

impl PinValue {
    pub fn resolve(&self) -> Result<ChordIndex, String> {
        match self {
            PinValue::Index(i) if (*i as usize) < NUM_CHORDS => Ok(ChordIndex::new(*i as usize).expect("checked")),
            PinValue::Index(i) => Err(format!("chord index {i} is outside the {NUM_CHORDS}-chord vocabulary")),
            PinValue::Name(n) => n
                .parse::<ChordLabel>()
                .map(ChordLabel::index)
                .map_err(|_| format!("{n:?} is not a chord of the {NUM_CHORDS}-chord vocabulary")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonizeRequest {
    /// One 12-entry 0/1 presence vector per frame, indexed by pitch class.
    pub melody: Vec<Vec<u8>>,
    /// Frame index to chord.
    #[serde(default)]
    pub pins: BTreeMap<usize, PinValue>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub include_distributions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonizeResponse {
    pub chords: Vec<usize>,
    pub names: Vec<String>,
    /// The request pins, resolved to canonical chord names.
    pub pins: BTreeMap<usize, String>,
    pub seed: u64,
    pub iterations: usize,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distributions: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub vocabulary: Vec<String>,
    pub vocab_hash: String,
    pub hidden: usize,
    pub parameters: usize,
    pub default_iterations: usize,
    pub class_balancing: bool,
    pub stats: Option<CorpusStats>,
}

/// Parses a `POST /evaluate` body: one harmonization or a list of them.
pub fn parse_evaluate(body: &[u8]) -> Result<Vec<Harmonization>, ApiError> {
    let value: serde_json::Value = parse_body(body)?;
    let at = |e: serde_path_to_error::Error<serde_json::Error>| {
        let path = e.path().to_string();
        ApiError::bad(path, e.into_inner().to_string())
    };
    if value.is_array() {
        serde_path_to_error::deserialize(value).map_err(at)
    } else {
        serde_path_to_error::deserialize(value).map(|h| vec![h]).map_err(at)
    }
}

fn melody_frames(melody: &[Vec<u8>]) -> Result<Vec<PitchClassSet>, ApiError> {
    if melody.is_empty() {
        return Err(ApiError::bad("melody", "at least one frame is required"));
    }
    melody
        .iter()
        .enumerate()
        .map(|(t, row)| {
            if row.len() != 12 {
                return Err(ApiError::bad(format!("melody[{t}]"), format!("expected 12 entries, found {}", row.len())));
            }
            let mut set = PitchClassSet::EMPTY;
            for (pc, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => set.insert(PitchClass::new(pc as u8).expect("pc < 12")),
                    _ => return Err(ApiError::bad(format!("melody[{t}][{pc}]"), "presence must be 0 or 1")),
                }
            }
            Ok(set)
        })
        .collect()
}

pub fn model_info(model: &Checkpoint) -> ModelInfo {
    ModelInfo {
        vocabulary: vocabulary_names(),
        vocab_hash: vocab_layout_hash(),
        hidden: model.params.hidden(),
        parameters: model.params.num_params(),
        default_iterations: model.default_iterations(),
        class_balancing: model.class_balancing,
        stats: model.stats.clone(),
    }
}

pub fn handle_harmonize(model: &Checkpoint, req: &HarmonizeRequest) -> Result<HarmonizeResponse, ApiError> {
    let melody = melody_frames(&req.melody)?;
    let mut pins = PinSet::new();
    for (&t, value) in &req.pins {
        if t >= melody.len() {
            return Err(ApiError::bad(
                format!("pins.{t}"),
                format!("frame {t} is past the end of a {}-frame melody", melody.len()),
            ));
        }
        pins.insert(t, value.resolve().map_err(ApiError::Unprocessable)?);
    }
    let cfg = SamplerConfig {
        iterations: req.iterations.unwrap_or_else(|| model.default_iterations()),
        temperature: req.temperature.unwrap_or(1.0),
        seed: req.seed.unwrap_or(0),
        ..Default::default()
    };
    if let Err(e) = cfg.validate() {
        return Err(ApiError::bad("", e.to_string()));
    }
    let out = harmonize(&model.params, &melody, &pins, &cfg).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(HarmonizeResponse {
        chords: out.chords.iter().map(|c| c.value()).collect(),
        names: out.chords.iter().map(|c| c.label().to_string()).collect(),
        pins: pins.iter().map(|(&t, c)| (t, c.label().to_string())).collect(),
        seed: cfg.seed,
        iterations: cfg.iterations,
        temperature: cfg.temperature,
        distributions: req.include_distributions.then_some(out.distributions),
    })
}

pub fn handle_evaluate(pieces: Vec<Harmonization>) -> Result<MetricReport, ApiError> {
    if pieces.is_empty() {
        return Err(ApiError::bad("", "nothing to evaluate"));
    }
    for (i, h) in pieces.iter().enumerate() {
        if h.chords.is_empty() {
            return Err(ApiError::bad(format!("[{i}].chords"), "at least one frame is required"));
        }
        if !(h.frame_beats > 0.0 && h.frame_beats.is_finite()) {
            return Err(ApiError::bad(format!("[{i}].frame_beats"), "must be positive"));
        }
    }
    evaluate_corpus(&pieces).map_err(|e| ApiError::bad("", e.to_string()))
}
