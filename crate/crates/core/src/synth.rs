//! Synthetic lead-sheet generator.
//!
//! Produces small corpora with a realistic skew in chord usage: a handful of
//! diatonic chords dominate while secondary dominants, borrowed chords and
//! sevenths appear rarely. Melodies are built mostly from chord tones with
//! occasional stepwise passing notes, so the chords are recoverable from the
//! melody. Pieces are written in random keys and with a mix of chord
//! spellings (extensions, slash chords) to exercise key normalization and
//! chord reduction.

use num_rational::Ratio;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::leadsheet::{ChordEvent, Key, LeadSheet, Mode, Note};
use crate::vocab::{ChordLabel, ChordQuality, PitchClass, QualityToken, RawChordSymbol};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub pieces: usize,
    pub bars: usize,
    pub seed: u64,
    /// Write pieces in random keys instead of C.
    pub random_keys: bool,
    /// Fraction of pieces in minor.
    pub minor_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            pieces: 200,
            bars: 8,
            seed: 0,
            random_keys: true,
            minor_fraction: 0.25,
        }
    }
}

use ChordQuality::*;

// (semitones above tonic, quality, relative weight)
const MAJOR_PALETTE: &[(u8, ChordQuality, f64)] = &[
    (0, Maj, 30.0),
    (5, Maj, 18.0),
    (7, Maj, 18.0),
    (9, Min, 12.0),
    (2, Min, 5.0),
    (7, Dom7, 5.0),
    (4, Min, 3.0),
    (5, Maj7, 2.0),
    (2, Min7, 2.0),
    (2, Dom7, 1.5),
    (4, Dom7, 1.5),
    (5, Min, 1.0),
    (10, Maj, 1.0),
    (11, Dim, 1.0),
    (0, Sus, 1.0),
    (8, Maj, 1.0),
    (0, Maj7, 1.0),
    (9, Min7, 1.0),
    (0, Aug, 0.5),
];

const MINOR_PALETTE: &[(u8, ChordQuality, f64)] = &[
    (0, Min, 30.0),
    (5, Min, 15.0),
    (7, Dom7, 12.0),
    (8, Maj, 12.0),
    (3, Maj, 8.0),
    (10, Maj, 8.0),
    (7, Min, 3.0),
    (2, Dim, 2.0),
    (0, Min7, 1.5),
    (5, Min7, 1.5),
    (7, Sus, 1.0),
    (8, Maj7, 1.0),
    (11, Dim, 1.0),
    (3, Aug, 0.5),
];

fn pick_chord(rng: &mut ChaCha8Rng, palette: &[(u8, ChordQuality, f64)]) -> ChordLabel {
    let &(deg, q, _) = palette
        .choose_weighted(rng, |(_, _, w)| *w)
        .expect("palette weights are positive");
    ChordLabel::new(PitchClass::wrapping(deg as i64), q)
}

/// A chord tone of `chord` close to `near` within the melody register.
fn nearby_tone(rng: &mut ChaCha8Rng, chord: ChordLabel, near: i64) -> i64 {
    let mut options: Vec<i64> = (near - 7..=near + 7)
        .filter(|p| (57..=81).contains(p))
        .filter(|p| chord.tones().contains(PitchClass::wrapping(*p)))
        .collect();
    if options.is_empty() {
        options = (57..=81).filter(|p| chord.tones().contains(PitchClass::wrapping(*p))).collect();
    }
    options.sort_by_key(|p| (p - near).abs());
    let k = rng.random_range(0..options.len().min(3));
    options[k]
}

fn spell(rng: &mut ChaCha8Rng, label: ChordLabel) -> RawChordSymbol {
    let mut sym = RawChordSymbol::from(label);
    let roll: f64 = rng.random();
    match label.quality {
        Dom7 if roll < 0.2 => sym.token = QualityToken::Dom9,
        Min7 if roll < 0.2 => sym.token = QualityToken::Min9,
        Maj if roll < 0.08 => sym.bass = Some(label.root.transpose(4)),
        Sus if roll < 0.5 => sym.token = QualityToken::Sus4,
        _ => {}
    }
    sym
}

fn piece(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> LeadSheet {
    let mode = if rng.random::<f64>() < cfg.minor_fraction { Mode::Minor } else { Mode::Major };
    let palette = match mode {
        Mode::Major => MAJOR_PALETTE,
        Mode::Minor => MINOR_PALETTE,
    };
    let tonic_chord = ChordLabel::new(PitchClass::C, if mode == Mode::Major { Maj } else { Min });
    let frames = 2 * cfg.bars.max(1);
    let mut progression = Vec::with_capacity(frames);
    for t in 0..frames {
        let chord = if t == 0 || t + 1 == frames {
            tonic_chord
        } else if rng.random::<f64>() < 0.3 {
            progression[t - 1]
        } else {
            pick_chord(rng, palette)
        };
        progression.push(chord);
    }

    // 4/4: a frame is two beats
    let beat = |b: i64| Ratio::from_integer(b);
    let mut melody = Vec::new();
    let mut pitch = 67;
    for (t, &chord) in progression.iter().enumerate() {
        let start = 2 * t as i64;
        pitch = nearby_tone(rng, chord, pitch);
        let pattern: f64 = rng.random();
        if pattern < 0.3 {
            melody.push(Note { onset: beat(start), duration: beat(2), pitch: pitch as u8 });
        } else {
            melody.push(Note { onset: beat(start), duration: beat(1), pitch: pitch as u8 });
            let next_chord = progression.get(t + 1).copied().unwrap_or(chord);
            let target = nearby_tone(rng, next_chord, pitch);
            let second = if pattern < 0.5 && (target - pitch).abs() >= 2 {
                // stepwise passing note toward the next chord tone
                pitch + (target - pitch).signum() * if (target - pitch).abs() >= 3 { 2 } else { 1 }
            } else {
                nearby_tone(rng, chord, pitch)
            };
            melody.push(Note { onset: beat(start + 1), duration: beat(1), pitch: second as u8 });
            pitch = second;
        }
    }

    let mut chords: Vec<ChordEvent> = Vec::new();
    for (t, &label) in progression.iter().enumerate() {
        let symbol = spell(rng, label);
        match chords.last_mut() {
            Some(prev) if prev.symbol.reduce() == label && prev.symbol == symbol => {
                prev.duration += beat(2);
            }
            _ => chords.push(ChordEvent { onset: beat(2 * t as i64), duration: beat(2), symbol }),
        }
    }

    let sheet = LeadSheet {
        key: Key { tonic: PitchClass::C, mode },
        beats_per_bar: 4,
        melody,
        chords,
    };
    if cfg.random_keys {
        sheet.transpose(rng.random_range(0..12))
    } else {
        sheet
    }
}

/// Generates `cfg.pieces` lead sheets, deterministically from `cfg.seed`.
pub fn synthetic_corpus(cfg: &SynthConfig) -> Vec<LeadSheet> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.pieces).map(|_| piece(&mut rng, cfg)).collect()
}
