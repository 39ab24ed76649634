//! The 96-chord label space.
//!
//! Every chord the model can emit is a root pitch class paired with one of
//! eight qualities. The integer encoding is `8 * root + quality_ordinal`, with
//! qualities ordered `maj, min, aug, dim, sus, maj7, min7, dom7`:
//!
//! ```
//! use mharm::vocab::{ChordIndex, ChordLabel, ChordQuality, PitchClass};
//!
//! let g7 = ChordLabel::new(PitchClass::new(7).unwrap(), ChordQuality::Dom7);
//! assert_eq!(g7.index(), ChordIndex::new(63).unwrap());
//! assert_eq!(g7.to_string(), "G7");
//! ```

mod symbol;
mod tonal;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use symbol::{reduce_raw_chord, QualityToken, RawChordSymbol};
pub use tonal::{tonal_centroid, tonal_distance, TonalCentroid, TONAL_RADII};

/// Number of pitch classes in the chromatic scale.
pub const NUM_PITCH_CLASSES: usize = 12;
/// Number of chord qualities.
pub const NUM_QUALITIES: usize = 8;
/// Size of the chord vocabulary.
pub const NUM_CHORDS: usize = NUM_PITCH_CLASSES * NUM_QUALITIES;

const SHARP_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

/// A semitone class in `0..12`, with 0 = C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PitchClass(u8);

impl PitchClass {
    pub const C: PitchClass = PitchClass(0);

    pub fn new(value: u8) -> Result<Self> {
        if (value as usize) < NUM_PITCH_CLASSES {
            Ok(PitchClass(value))
        } else {
            Err(Error::domain(format!("pitch class {value} out of range 0..12")))
        }
    }

    /// Reduces any integer (e.g. a MIDI note number) modulo 12.
    pub fn wrapping(value: i64) -> Self {
        PitchClass(value.rem_euclid(12) as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn transpose(self, semitones: i64) -> Self {
        PitchClass::wrapping(self.0 as i64 + semitones)
    }

    /// Spelling with sharps (`C`, `C#`, ... `B`).
    pub fn name(self) -> &'static str {
        SHARP_NAMES[self.0 as usize]
    }

    /// Parses a note name: letter `A`-`G` followed by an optional `#` or `b`.
    pub fn from_name(name: &str) -> Result<Self> {
        let (pc, rest) = symbol::parse_note_name(name).ok_or_else(|| {
            Error::domain(format!("invalid note name {name:?}"))
        })?;
        if rest.is_empty() {
            Ok(pc)
        } else {
            Err(Error::domain(format!("invalid note name {name:?}")))
        }
    }
}

impl TryFrom<u8> for PitchClass {
    type Error = Error;
    fn try_from(value: u8) -> Result<Self> {
        PitchClass::new(value)
    }
}

impl From<PitchClass> for u8 {
    fn from(pc: PitchClass) -> u8 {
        pc.0
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of pitch classes stored as a 12-bit mask.
///
/// Serializes as a sorted list of pitch-class integers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct PitchClassSet(u16);

impl PitchClassSet {
    pub const EMPTY: PitchClassSet = PitchClassSet(0);

    pub fn from_bits(bits: u16) -> Self {
        PitchClassSet(bits & 0x0fff)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn insert(&mut self, pc: PitchClass) {
        self.0 |= 1 << pc.0;
    }

    pub fn contains(self, pc: PitchClass) -> bool {
        self.0 & (1 << pc.0) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: PitchClassSet) -> Self {
        PitchClassSet(self.0 | other.0)
    }

    /// Rotates every member up by `semitones`.
    pub fn transpose(self, semitones: i64) -> Self {
        self.iter().map(|pc| pc.transpose(semitones)).collect()
    }

    pub fn iter(self) -> impl Iterator<Item = PitchClass> {
        (0..12u8).filter(move |k| self.0 & (1 << k) != 0).map(PitchClass)
    }

    /// Binary presence vector, position k = pitch class k.
    pub fn to_weights(self) -> [f64; NUM_PITCH_CLASSES] {
        let mut w = [0.0; NUM_PITCH_CLASSES];
        for pc in self.iter() {
            w[pc.0 as usize] = 1.0;
        }
        w
    }
}

impl FromIterator<PitchClass> for PitchClassSet {
    fn from_iter<I: IntoIterator<Item = PitchClass>>(iter: I) -> Self {
        let mut set = PitchClassSet::EMPTY;
        for pc in iter {
            set.insert(pc);
        }
        set
    }
}

impl TryFrom<Vec<u8>> for PitchClassSet {
    type Error = Error;
    fn try_from(values: Vec<u8>) -> Result<Self> {
        values.into_iter().map(PitchClass::new).collect()
    }
}

impl From<PitchClassSet> for Vec<u8> {
    fn from(set: PitchClassSet) -> Vec<u8> {
        set.iter().map(u8::from).collect()
    }
}

/// The eight chord qualities, in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChordQuality {
    Maj,
    Min,
    Aug,
    Dim,
    /// Suspended fourth.
    Sus,
    Maj7,
    Min7,
    Dom7,
}

impl ChordQuality {
    pub const ALL: [ChordQuality; NUM_QUALITIES] = [
        ChordQuality::Maj,
        ChordQuality::Min,
        ChordQuality::Aug,
        ChordQuality::Dim,
        ChordQuality::Sus,
        ChordQuality::Maj7,
        ChordQuality::Min7,
        ChordQuality::Dom7,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Root-relative semitone intervals of the chord tones.
    pub fn intervals(self) -> &'static [u8] {
        match self {
            ChordQuality::Maj => &[0, 4, 7],
            ChordQuality::Min => &[0, 3, 7],
            ChordQuality::Aug => &[0, 4, 8],
            ChordQuality::Dim => &[0, 3, 6],
            ChordQuality::Sus => &[0, 5, 7],
            ChordQuality::Maj7 => &[0, 4, 7, 11],
            ChordQuality::Min7 => &[0, 3, 7, 10],
            ChordQuality::Dom7 => &[0, 4, 7, 10],
        }
    }

    /// Suffix used in canonical chord names (`""`, `"m"`, `"aug"`, ...).
    pub fn suffix(self) -> &'static str {
        match self {
            ChordQuality::Maj => "",
            ChordQuality::Min => "m",
            ChordQuality::Aug => "aug",
            ChordQuality::Dim => "dim",
            ChordQuality::Sus => "sus",
            ChordQuality::Maj7 => "maj7",
            ChordQuality::Min7 => "m7",
            ChordQuality::Dom7 => "7",
        }
    }
}

/// A root and quality; one of the 96 vocabulary chords.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChordLabel {
    pub root: PitchClass,
    pub quality: ChordQuality,
}

impl ChordLabel {
    pub fn new(root: PitchClass, quality: ChordQuality) -> Self {
        ChordLabel { root, quality }
    }

    pub fn index(self) -> ChordIndex {
        chord_to_index(self)
    }

    pub fn tones(self) -> PitchClassSet {
        chord_tones(self)
    }

    pub fn transpose(self, semitones: i64) -> Self {
        ChordLabel::new(self.root.transpose(semitones), self.quality)
    }
}

impl fmt::Display for ChordLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.root.name(), self.quality.suffix())
    }
}

/// Parses a canonical vocabulary name such as `"F#m7"`. Symbols that are
/// accepted by the full chord grammar but would need a lossy reduction
/// (extensions, slash bass, `sus2`, ...) are rejected.
impl FromStr for ChordLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let raw: RawChordSymbol = s.parse()?;
        raw.exact_label().ok_or_else(|| Error::ChordSymbol {
            raw: s.to_string(),
            reason: "not one of the 96 vocabulary chords".into(),
        })
    }
}

/// Integer encoding of a [`ChordLabel`], in `0..96`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ChordIndex(u8);

impl ChordIndex {
    pub fn new(value: usize) -> Result<Self> {
        if value < NUM_CHORDS {
            Ok(ChordIndex(value as u8))
        } else {
            Err(Error::domain(format!("chord index {value} out of range 0..{NUM_CHORDS}")))
        }
    }

    pub fn value(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> ChordLabel {
        let root = PitchClass(self.0 / NUM_QUALITIES as u8);
        let quality = ChordQuality::ALL[self.0 as usize % NUM_QUALITIES];
        ChordLabel { root, quality }
    }

    pub fn transpose(self, semitones: i64) -> Self {
        self.label().transpose(semitones).index()
    }

    /// All 96 indices in order.
    pub fn all() -> impl Iterator<Item = ChordIndex> {
        (0..NUM_CHORDS as u8).map(ChordIndex)
    }
}

impl TryFrom<u8> for ChordIndex {
    type Error = Error;
    fn try_from(value: u8) -> Result<Self> {
        ChordIndex::new(value as usize)
    }
}

impl From<ChordIndex> for u8 {
    fn from(idx: ChordIndex) -> u8 {
        idx.0
    }
}

impl fmt::Display for ChordIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.label().fmt(f)
    }
}

pub fn chord_to_index(label: ChordLabel) -> ChordIndex {
    ChordIndex((NUM_QUALITIES * label.root.0 as usize + label.quality.ordinal()) as u8)
}

pub fn index_to_chord(idx: usize) -> Result<ChordLabel> {
    ChordIndex::new(idx).map(ChordIndex::label)
}

pub fn chord_tones(label: ChordLabel) -> PitchClassSet {
    label
        .quality
        .intervals()
        .iter()
        .map(|&iv| label.root.transpose(iv as i64))
        .collect()
}

/// Canonical names of all 96 chords, in index order.
pub fn vocabulary_names() -> Vec<String> {
    ChordIndex::all().map(|c| c.to_string()).collect()
}

/// Fingerprint of the index layout and chord-tone table. Checkpoints record
/// it so that a model is never decoded against a different vocabulary.
pub fn vocab_layout_hash() -> String {
    let mut hasher = Sha256::new();
    for idx in ChordIndex::all() {
        let label = idx.label();
        hasher.update(label.to_string().as_bytes());
        hasher.update(b":");
        hasher.update(label.tones().bits().to_le_bytes());
        hasher.update(b";");
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
