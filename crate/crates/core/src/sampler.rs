//! Annealed blocked Gibbs sampling.
//!
//! The chain starts from a pass where every frame except the pinned ones is
//! unknown. Each of the following `n + 1` iterations keeps a random subset of
//! frames (each with probability `α(i)`), hides the rest, and redraws the
//! hidden frames from one forward pass. `α` ramps linearly from `p_min` to
//! `p_max`, so early iterations rewrite most of the progression and late
//! iterations only touch a few frames.
//!
//! Pinned frames are never hidden: their chords are context in every pass
//! and appear unchanged in the output.

use std::collections::BTreeMap;

use ndarray::ArrayView1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{assemble_input, softmax, ModelParams};
use crate::vocab::{ChordIndex, PitchClassSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of refinement iterations after the initial pass (the loop runs
    /// for `i = 0..=n`).
    pub iterations: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Softmax temperature; 0 selects the most likely chord.
    pub temperature: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 16,
            p_min: 0.05,
            p_max: 1.0,
            temperature: 1.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.p_min && self.p_min <= self.p_max && self.p_max <= 1.0) {
            return Err(Error::domain("need 0 <= p_min <= p_max <= 1"));
        }
        if self.iterations == 0 {
            return Err(Error::domain("iteration count must be at least 1"));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::domain("temperature must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// User-fixed chords by frame index.
pub type PinSet = BTreeMap<usize, ChordIndex>;

/// Keep-probability at iteration `i`: `p_min + (p_max − p_min)·i/n`.
pub fn anneal_alpha(i: usize, cfg: &SamplerConfig) -> f64 {
    cfg.p_min + (cfg.p_max - cfg.p_min) * i as f64 / cfg.iterations as f64
}

/// `true` marks a frame to regenerate. Free frames are regenerated with
/// probability `1 − alpha`; pinned frames never are.
pub fn create_random_mask<R: Rng>(alpha: f64, len: usize, pins: &PinSet, rng: &mut R) -> Vec<bool> {
    (0..len)
        .map(|t| {
            let draw = rng.random::<f64>() >= alpha;
            draw && !pins.contains_key(&t)
        })
        .collect()
}

/// Samples a chord from `softmax(logits / temperature)`, or takes the
/// lowest-index maximum when `temperature == 0`.
pub fn draw_chord<R: Rng>(logits: ArrayView1<f64>, temperature: f64, rng: &mut R) -> ChordIndex {
    let idx = if temperature == 0.0 {
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        best
    } else {
        let probs = softmax(logits.mapv(|v| v / temperature).view());
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = i;
                break;
            }
        }
        pick
    };
    ChordIndex::new(idx).expect("logit width equals vocabulary size")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Harmonized {
    pub chords: Vec<ChordIndex>,
    /// Per-frame chord probabilities from the final forward pass.
    pub distributions: Vec<Vec<f64>>,
}

fn check_pins(len: usize, pins: &PinSet) -> Result<()> {
    if len == 0 {
        return Err(Error::domain("melody has no frames"));
    }
    if let Some((&t, _)) = pins.range(len..).next() {
        return Err(Error::domain(format!("pin at frame {t} but melody has {len} frames")));
    }
    Ok(())
}

/// Generates a chord for every frame of `melody`.
pub fn harmonize(model: &ModelParams, melody: &[PitchClassSet], pins: &PinSet, cfg: &SamplerConfig) -> Result<Harmonized> {
    cfg.validate()?;
    let len = melody.len();
    check_pins(len, pins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let placeholder = ChordIndex::new(0)?;
    let mut chords = vec![placeholder; len];
    for (&t, &c) in pins {
        chords[t] = c;
    }

    let resample = |mask: &[bool], chords: &mut Vec<ChordIndex>, rng: &mut ChaCha8Rng| -> Result<Vec<Vec<f64>>> {
        let input = assemble_input(melody, chords, mask)?;
        let logits = model.forward(&input, None)?.logits;
        for t in (0..len).filter(|&t| mask[t]) {
            chords[t] = draw_chord(logits.row(t), cfg.temperature, rng);
        }
        Ok(logits.rows().into_iter().map(|r| softmax(r).to_vec()).collect())
    };

    let initial: Vec<bool> = (0..len).map(|t| !pins.contains_key(&t)).collect();
    let mut distributions = resample(&initial, &mut chords, &mut rng)?;
    for i in 0..=cfg.iterations {
        let alpha = anneal_alpha(i, cfg);
        let mask = create_random_mask(alpha, len, pins, &mut rng);
        distributions = resample(&mask, &mut chords, &mut rng)?;
    }
    Ok(Harmonized { chords, distributions })
}
