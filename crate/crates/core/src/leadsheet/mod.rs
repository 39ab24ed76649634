//! Lead-sheet documents: parsing, key normalization, half-bar quantization
//! and corpus preparation.
//!
//! A lead sheet is one JSON object:
//!
//! ```json
//! {"version": 1,
//!  "key": {"tonic": "G", "mode": "major"},
//!  "beats_per_bar": 4,
//!  "melody": [{"onset": [0, 1], "duration": [1, 2], "midi": 67}],
//!  "chords": [{"onset": [0, 1], "duration": [4, 1], "symbol": "G"}]}
//! ```
//!
//! Onsets and durations are rationals `[numerator, denominator]` in beats.
//! A corpus file holds one such object per line.

mod corpus;
mod frames;

use std::io::BufRead;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{PitchClass, RawChordSymbol};

pub use corpus::{prepare_corpus, CorpusStats, PreparedCorpus};
pub use frames::{quantize_to_frames, FrameNote, FrameSequence, QuantizedSheet};

/// A position or length in beats.
pub type Beats = Ratio<i64>;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Major,
    Minor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Key {
    pub tonic: PitchClass,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Note {
    pub onset: Beats,
    pub duration: Beats,
    /// MIDI note number, 0-127.
    pub pitch: u8,
}

impl Note {
    pub fn end(&self) -> Beats {
        self.onset + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChordEvent {
    pub onset: Beats,
    pub duration: Beats,
    pub symbol: RawChordSymbol,
}

impl ChordEvent {
    pub fn end(&self) -> Beats {
        self.onset + self.duration
    }
}

/// A validated lead sheet. Notes and chord events are sorted by onset, every
/// duration is positive and no two melody notes overlap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeadSheet {
    pub key: Key,
    pub beats_per_bar: u32,
    pub melody: Vec<Note>,
    pub chords: Vec<ChordEvent>,
}

// Wire representation.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyDoc {
    tonic: String,
    mode: Mode,
}

#[derive(Serialize, Deserialize)]
struct NoteDoc {
    onset: [i64; 2],
    duration: [i64; 2],
    midi: i64,
}

#[derive(Serialize, Deserialize)]
struct ChordDoc {
    onset: [i64; 2],
    duration: [i64; 2],
    symbol: String,
}

#[derive(Serialize, Deserialize)]
struct LeadSheetDoc {
    version: u32,
    key: KeyDoc,
    beats_per_bar: i64,
    melody: Vec<NoteDoc>,
    #[serde(default)]
    chords: Vec<ChordDoc>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn ratio(path: &str, [num, den]: [i64; 2]) -> Result<Beats> {
    if den <= 0 {
        return Err(schema(path, "denominator must be positive"));
    }
    Ok(Ratio::new(num, den))
}

fn ratio_doc(r: Beats) -> [i64; 2] {
    [*r.numer(), *r.denom()]
}

fn span(prefix: &str, onset: [i64; 2], duration: [i64; 2]) -> Result<(Beats, Beats)> {
    let onset_path = format!("{prefix}.onset");
    let onset = ratio(&onset_path, onset)?;
    if onset < Ratio::from_integer(0) {
        return Err(schema(onset_path, "onset must be nonnegative"));
    }
    let duration_path = format!("{prefix}.duration");
    let duration = ratio(&duration_path, duration)?;
    if duration <= Ratio::from_integer(0) {
        return Err(schema(duration_path, "duration must be positive"));
    }
    Ok((onset, duration))
}

impl LeadSheet {
    /// Parses and validates one lead-sheet JSON document.
    pub fn from_json(text: &str) -> Result<LeadSheet> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: LeadSheetDoc = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(path, e.into_inner().to_string())
        })?;
        LeadSheet::from_doc(doc)
    }

    fn from_doc(doc: LeadSheetDoc) -> Result<LeadSheet> {
        if doc.version != FORMAT_VERSION {
            return Err(schema("version", format!("unsupported version {}", doc.version)));
        }
        let tonic = PitchClass::from_name(&doc.key.tonic)
            .map_err(|_| schema("key.tonic", format!("invalid tonic {:?}", doc.key.tonic)))?;
        if doc.beats_per_bar <= 0 || doc.beats_per_bar > u32::MAX as i64 {
            return Err(schema("beats_per_bar", "must be a positive integer"));
        }
        let mut melody = Vec::with_capacity(doc.melody.len());
        for (i, n) in doc.melody.iter().enumerate() {
            let prefix = format!("melody[{i}]");
            let (onset, duration) = span(&prefix, n.onset, n.duration)?;
            if !(0..=127).contains(&n.midi) {
                return Err(schema(format!("{prefix}.midi"), "MIDI number must be in 0..=127"));
            }
            melody.push(Note {
                onset,
                duration,
                pitch: n.midi as u8,
            });
        }
        let mut chords = Vec::with_capacity(doc.chords.len());
        for (i, c) in doc.chords.iter().enumerate() {
            let prefix = format!("chords[{i}]");
            let (onset, duration) = span(&prefix, c.onset, c.duration)?;
            let symbol = c
                .symbol
                .parse()
                .map_err(|e: Error| schema(format!("{prefix}.symbol"), e.to_string()))?;
            chords.push(ChordEvent {
                onset,
                duration,
                symbol,
            });
        }
        let sheet = LeadSheet {
            key: Key {
                tonic,
                mode: doc.key.mode,
            },
            beats_per_bar: doc.beats_per_bar as u32,
            melody,
            chords,
        };
        sheet.normalized()
    }

    /// Sorts events by onset and checks the non-overlap invariant.
    pub fn normalized(mut self) -> Result<LeadSheet> {
        self.melody.sort_by_key(|n| n.onset);
        self.chords.sort_by_key(|c| c.onset);
        for pair in self.melody.windows(2) {
            if pair[0].end() > pair[1].onset {
                return Err(Error::Validation(format!(
                    "melody notes overlap: note at beat {} ends at {} after next onset {}",
                    pair[0].onset,
                    pair[0].end(),
                    pair[1].onset
                )));
            }
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("lead sheet serializes")
    }

    fn to_doc(&self) -> LeadSheetDoc {
        LeadSheetDoc {
            version: FORMAT_VERSION,
            key: KeyDoc {
                tonic: self.key.tonic.name().to_string(),
                mode: self.key.mode,
            },
            beats_per_bar: self.beats_per_bar as i64,
            melody: self
                .melody
                .iter()
                .map(|n| NoteDoc {
                    onset: ratio_doc(n.onset),
                    duration: ratio_doc(n.duration),
                    midi: n.pitch as i64,
                })
                .collect(),
            chords: self
                .chords
                .iter()
                .map(|c| ChordDoc {
                    onset: ratio_doc(c.onset),
                    duration: ratio_doc(c.duration),
                    symbol: c.symbol.to_string(),
                })
                .collect(),
        }
    }

    /// Length of a half bar, the frame unit.
    pub fn frame_beats(&self) -> Beats {
        Ratio::new(self.beats_per_bar as i64, 2)
    }

    /// Latest end point over all notes and chord events.
    pub fn end(&self) -> Beats {
        let notes = self.melody.iter().map(Note::end);
        let chords = self.chords.iter().map(ChordEvent::end);
        notes.chain(chords).max().unwrap_or_else(|| Ratio::from_integer(0))
    }

    /// Shifts pitches and chord roots by `semitones`. MIDI numbers are kept
    /// within 0..=127 by octave folding.
    pub fn transpose(&self, semitones: i64) -> LeadSheet {
        let mut shift = semitones;
        let (lo, hi) = self
            .melody
            .iter()
            .fold((i64::MAX, i64::MIN), |(lo, hi), n| {
                (lo.min(n.pitch as i64), hi.max(n.pitch as i64))
            });
        if !self.melody.is_empty() {
            while lo + shift < 0 {
                shift += 12;
            }
            while hi + shift > 127 {
                shift -= 12;
            }
        }
        LeadSheet {
            key: Key {
                tonic: self.key.tonic.transpose(semitones),
                mode: self.key.mode,
            },
            beats_per_bar: self.beats_per_bar,
            melody: self
                .melody
                .iter()
                .map(|n| Note {
                    pitch: (n.pitch as i64 + shift).clamp(0, 127) as u8,
                    ..*n
                })
                .collect(),
            chords: self
                .chords
                .iter()
                .map(|c| ChordEvent {
                    symbol: c.symbol.transpose(semitones),
                    ..*c
                })
                .collect(),
        }
    }

    /// Semitone shift that moves this sheet's tonic to C (always downward,
    /// in `-11..=0`).
    pub fn shift_to_common_key(&self) -> i64 {
        -(self.key.tonic.value() as i64)
    }
}

/// Moves a lead sheet to C major or C minor (by its mode).
pub fn transpose_to_common_key(sheet: &LeadSheet) -> LeadSheet {
    sheet.transpose(sheet.shift_to_common_key())
}

pub fn parse_leadsheet(document: &str) -> Result<LeadSheet> {
    LeadSheet::from_json(document)
}

/// Reads a newline-delimited corpus. Blank lines are skipped; the first bad
/// line aborts with its 1-based line number.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<LeadSheet>> {
    let mut sheets = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sheet = LeadSheet::from_json(&line).map_err(|e| Error::Line {
            line: i + 1,
            source: Box::new(e),
        })?;
        sheets.push(sheet);
    }
    Ok(sheets)
}
