use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::{Beats, LeadSheet, Note};
use crate::error::{Error, Result};
use crate::vocab::{ChordIndex, PitchClass, PitchClassSet};

/// A melody note in frame time: beats from the start of frame 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameNote {
    pub onset: f64,
    pub duration: f64,
    pub midi: u8,
}

impl FrameNote {
    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }

    pub fn pitch_class(&self) -> PitchClass {
        PitchClass::wrapping(self.midi as i64)
    }
}

/// Output of [`quantize_to_frames`]: one slot per half bar. A chord slot is
/// `None` when no chord event sounds at the frame's start instant.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSheet {
    pub frame_beats: Beats,
    pub melody: Vec<PitchClassSet>,
    pub chords: Vec<Option<ChordIndex>>,
    pub notes: Vec<Note>,
}

/// Half-bar aligned training example with a valid chord in every frame.
///
/// `melody[t]` is the set of pitch classes sounding anywhere in frame `t`;
/// `notes` keeps the full note list for the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSequence {
    pub frame_beats: f64,
    pub melody: Vec<PitchClassSet>,
    pub chords: Vec<ChordIndex>,
    #[serde(default)]
    pub notes: Vec<FrameNote>,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.chords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chords.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.chords.is_empty() {
            return Err(Error::Validation("frame sequence has no frames".into()));
        }
        if self.melody.len() != self.chords.len() {
            return Err(Error::Validation(format!(
                "melody has {} frames but chords have {}",
                self.melody.len(),
                self.chords.len()
            )));
        }
        if !(self.frame_beats > 0.0 && self.frame_beats.is_finite()) {
            return Err(Error::Validation("frame_beats must be positive".into()));
        }
        Ok(())
    }

    pub fn transpose(&self, semitones: i64) -> FrameSequence {
        FrameSequence {
            frame_beats: self.frame_beats,
            melody: self.melody.iter().map(|m| m.transpose(semitones)).collect(),
            chords: self.chords.iter().map(|c| c.transpose(semitones)).collect(),
            notes: self
                .notes
                .iter()
                .map(|n| FrameNote {
                    midi: (n.midi as i64 + semitones).rem_euclid(128) as u8,
                    ..*n
                })
                .collect(),
        }
    }
}

fn to_f64(b: Beats) -> f64 {
    b.to_f64().expect("beat values are finite")
}

/// Samples the sheet on a half-bar grid.
///
/// Frame `t` spans `[t·h, (t+1)·h)` with `h = beats_per_bar / 2`. Its chord is
/// the event sounding at the frame's start; its melody is every pitch class
/// of a note overlapping the span. A note ending exactly on a boundary does
/// not reach the following frame.
pub fn quantize_to_frames(sheet: &LeadSheet) -> QuantizedSheet {
    let h = sheet.frame_beats();
    let end = sheet.end();
    let frames = (end / h).ceil().to_integer().max(1) as usize;

    let mut melody = vec![PitchClassSet::EMPTY; frames];
    for note in &sheet.melody {
        let first = (note.onset / h).floor().to_integer() as usize;
        let mut t = first;
        while t < frames && Ratio::from_integer(t as i64) * h < note.end() {
            melody[t].insert(PitchClass::wrapping(note.pitch as i64));
            t += 1;
        }
    }

    let chords = (0..frames)
        .map(|t| {
            let start = Ratio::from_integer(t as i64) * h;
            sheet
                .chords
                .iter()
                .rev()
                .find(|c| c.onset <= start && start < c.end())
                .map(|c| c.symbol.reduce().index())
        })
        .collect();

    QuantizedSheet {
        frame_beats: h,
        melody,
        chords,
        notes: sheet.melody.clone(),
    }
}

impl QuantizedSheet {
    pub fn len(&self) -> usize {
        self.chords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chords.is_empty()
    }

    /// Frame-time notes, clipped to start at frame `from`.
    fn frame_notes(&self, from: usize) -> Vec<FrameNote> {
        let offset = Ratio::from_integer(from as i64) * self.frame_beats;
        self.notes
            .iter()
            .filter(|n| n.end() > offset)
            .map(|n| {
                let onset = n.onset.max(offset);
                FrameNote {
                    onset: to_f64(onset - offset),
                    duration: to_f64(n.end() - onset),
                    midi: n.pitch,
                }
            })
            .collect()
    }

    /// Melody-only view with a placeholder chord in every frame, for
    /// inference where chords are to be generated.
    pub fn melody_frames(&self) -> FrameSequence {
        FrameSequence {
            frame_beats: to_f64(self.frame_beats),
            melody: self.melody.clone(),
            chords: vec![ChordIndex::new(0).expect("index 0 is valid"); self.len()],
            notes: self.frame_notes(0),
        }
    }

    /// Resolves empty chord slots: gaps take the previous chord, and frames
    /// before the first chord are dropped. Returns `None` when no frame has
    /// a chord.
    pub fn fill_chords(&self) -> Option<FrameSequence> {
        let first = self.chords.iter().position(Option::is_some)?;
        let mut last = self.chords[first]?;
        let chords = self.chords[first..]
            .iter()
            .map(|c| {
                if let Some(c) = c {
                    last = *c;
                }
                last
            })
            .collect();
        Some(FrameSequence {
            frame_beats: to_f64(self.frame_beats),
            melody: self.melody[first..].to_vec(),
            chords,
            notes: self.frame_notes(first),
        })
    }
}
