//! Lead-sheet chord symbols and their reduction onto the 96-chord vocabulary.
//!
//! Grammar: a root letter `A`-`G`, an optional `#` or `b`, one quality token,
//! and an optional `/<bass>` where the bass is another note name.
//!
//! | token  | reduces to | note                         |
//! |--------|------------|------------------------------|
//! | `""`   | maj        |                              |
//! | `m`    | min        |                              |
//! | `aug`  | aug        |                              |
//! | `dim`  | dim        |                              |
//! | `sus`  | sus        | read as sus4                 |
//! | `sus2` | sus        | folded into sus4 (lossy)     |
//! | `sus4` | sus        |                              |
//! | `maj7` | maj7       |                              |
//! | `m7`   | min7       |                              |
//! | `7`    | dom7       |                              |
//! | `9`    | dom7       | dominant extension           |
//! | `11`   | dom7       | dominant extension           |
//! | `13`   | dom7       | dominant extension           |
//! | `m9`   | min7       | minor extension              |
//! | `maj9` | maj7       | major extension              |
//! | `m7b5` | dim        | half-diminished              |
//! | `dim7` | dim        |                              |
//!
//! A slash bass is dropped, which puts the chord back in root position.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ChordLabel, ChordQuality, PitchClass};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QualityToken {
    Major,
    Minor,
    Aug,
    Dim,
    Sus,
    Sus2,
    Sus4,
    Maj7,
    Min7,
    Dom7,
    Dom9,
    Dom11,
    Dom13,
    Min9,
    Maj9,
    HalfDim,
    Dim7,
}

impl QualityToken {
    const ALL: [QualityToken; 17] = [
        QualityToken::Major,
        QualityToken::Minor,
        QualityToken::Aug,
        QualityToken::Dim,
        QualityToken::Sus,
        QualityToken::Sus2,
        QualityToken::Sus4,
        QualityToken::Maj7,
        QualityToken::Min7,
        QualityToken::Dom7,
        QualityToken::Dom9,
        QualityToken::Dom11,
        QualityToken::Dom13,
        QualityToken::Min9,
        QualityToken::Maj9,
        QualityToken::HalfDim,
        QualityToken::Dim7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QualityToken::Major => "",
            QualityToken::Minor => "m",
            QualityToken::Aug => "aug",
            QualityToken::Dim => "dim",
            QualityToken::Sus => "sus",
            QualityToken::Sus2 => "sus2",
            QualityToken::Sus4 => "sus4",
            QualityToken::Maj7 => "maj7",
            QualityToken::Min7 => "m7",
            QualityToken::Dom7 => "7",
            QualityToken::Dom9 => "9",
            QualityToken::Dom11 => "11",
            QualityToken::Dom13 => "13",
            QualityToken::Min9 => "m9",
            QualityToken::Maj9 => "maj9",
            QualityToken::HalfDim => "m7b5",
            QualityToken::Dim7 => "dim7",
        }
    }

    pub fn reduce(self) -> ChordQuality {
        match self {
            QualityToken::Major => ChordQuality::Maj,
            QualityToken::Minor => ChordQuality::Min,
            QualityToken::Aug => ChordQuality::Aug,
            QualityToken::Dim | QualityToken::HalfDim | QualityToken::Dim7 => ChordQuality::Dim,
            QualityToken::Sus | QualityToken::Sus2 | QualityToken::Sus4 => ChordQuality::Sus,
            QualityToken::Maj7 | QualityToken::Maj9 => ChordQuality::Maj7,
            QualityToken::Min7 | QualityToken::Min9 => ChordQuality::Min7,
            QualityToken::Dom7 | QualityToken::Dom9 | QualityToken::Dom11 | QualityToken::Dom13 => {
                ChordQuality::Dom7
            }
        }
    }

    fn from_token(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    fn canonical(q: ChordQuality) -> Self {
        match q {
            ChordQuality::Maj => QualityToken::Major,
            ChordQuality::Min => QualityToken::Minor,
            ChordQuality::Aug => QualityToken::Aug,
            ChordQuality::Dim => QualityToken::Dim,
            ChordQuality::Sus => QualityToken::Sus,
            ChordQuality::Maj7 => QualityToken::Maj7,
            ChordQuality::Min7 => QualityToken::Min7,
            ChordQuality::Dom7 => QualityToken::Dom7,
        }
    }
}

/// A parsed lead-sheet chord symbol, before reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RawChordSymbol {
    pub root: PitchClass,
    pub token: QualityToken,
    pub bass: Option<PitchClass>,
}

impl RawChordSymbol {
    /// Maps the symbol onto the vocabulary (see the module table).
    pub fn reduce(self) -> ChordLabel {
        ChordLabel::new(self.root, self.token.reduce())
    }

    /// The vocabulary chord this symbol names without any reduction, if any.
    pub fn exact_label(self) -> Option<ChordLabel> {
        let label = self.reduce();
        (self.bass.is_none() && QualityToken::canonical(label.quality) == self.token)
            .then_some(label)
    }

    pub fn transpose(self, semitones: i64) -> Self {
        RawChordSymbol {
            root: self.root.transpose(semitones),
            token: self.token,
            bass: self.bass.map(|b| b.transpose(semitones)),
        }
    }
}

impl From<ChordLabel> for RawChordSymbol {
    fn from(label: ChordLabel) -> Self {
        RawChordSymbol {
            root: label.root,
            token: QualityToken::canonical(label.quality),
            bass: None,
        }
    }
}

/// Splits a leading note name off `s`.
pub(super) fn parse_note_name(s: &str) -> Option<(PitchClass, &str)> {
    let mut chars = s.chars();
    let base: i64 = match chars.next()? {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return None,
    };
    let rest = &s[1..];
    if let Some(r) = rest.strip_prefix('#') {
        Some((PitchClass::wrapping(base + 1), r))
    } else if let Some(r) = rest.strip_prefix('b') {
        Some((PitchClass::wrapping(base - 1), r))
    } else {
        Some((PitchClass::wrapping(base), rest))
    }
}

/// Reduces a raw chord symbol string onto the vocabulary.
pub fn reduce_raw_chord(raw: &str) -> Result<ChordLabel> {
    raw.parse::<RawChordSymbol>().map(RawChordSymbol::reduce)
}

impl FromStr for RawChordSymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| Error::ChordSymbol {
            raw: s.to_string(),
            reason: reason.to_string(),
        };
        let (root, rest) = parse_note_name(s).ok_or_else(|| err("expected root letter A-G"))?;
        let (quality, bass) = match rest.split_once('/') {
            Some((q, b)) => {
                let bass = PitchClass::from_name(b).map_err(|_| err("invalid bass note"))?;
                (q, Some(bass))
            }
            None => (rest, None),
        };
        let token = QualityToken::from_token(quality)
            .ok_or_else(|| err(&format!("unknown quality {quality:?}")))?;
        Ok(RawChordSymbol { root, token, bass })
    }
}

impl TryFrom<String> for RawChordSymbol {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RawChordSymbol> for String {
    fn from(sym: RawChordSymbol) -> String {
        sym.to_string()
    }
}

impl fmt::Display for RawChordSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.root.name(), self.token.as_str())?;
        if let Some(bass) = self.bass {
            write!(f, "/{}", bass.name())?;
        }
        Ok(())
    }
}
