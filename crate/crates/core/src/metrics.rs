//! Objective harmonization metrics.
//!
//! Chord-progression metrics look at the chord sequence alone:
//!
//! * **CHE**, chord histogram entropy (natural log);
//! * **CC**, chord coverage, the number of distinct chords;
//! * **CTD**, mean tonal distance between consecutive frames' chords.
//!
//! Melody/chord harmonicity metrics pair every melody note with the chord
//! sounding under it. A note crossing a frame boundary is split there and
//! each part is weighted by its duration:
//!
//! * **CTnCTR**, `(n_c + n_p) / (n_c + n_n)` with `n_c` the chord-tone
//!   duration, `n_n` the non-chord-tone duration, and `n_p` the part of `n_n`
//!   whose following note lies within 2 semitones;
//! * **PCS**, mean consonance over all (note, chord tone) pairs: +1 for
//!   intervals 0, 3, 4, 7, 8, 9, 0 for 5, −1 otherwise;
//! * **MCTD**, mean tonal distance between each note and its chord.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leadsheet::{FrameNote, FrameSequence};
use crate::vocab::{tonal_centroid, tonal_distance, ChordIndex, PitchClass, TonalCentroid, NUM_CHORDS};

/// A melody with one chord per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Harmonization {
    pub frame_beats: f64,
    pub notes: Vec<FrameNote>,
    pub chords: Vec<ChordIndex>,
}

impl Harmonization {
    pub fn new(frame_beats: f64, notes: Vec<FrameNote>, chords: Vec<ChordIndex>) -> Self {
        Harmonization {
            frame_beats,
            notes,
            chords,
        }
    }

    /// The sequence's own chords over its melody.
    pub fn from_frames(seq: &FrameSequence) -> Self {
        Harmonization::new(seq.frame_beats, seq.notes.clone(), seq.chords.clone())
    }

    /// The sequence's melody under different chords.
    pub fn with_chords(seq: &FrameSequence, chords: Vec<ChordIndex>) -> Self {
        Harmonization::new(seq.frame_beats, seq.notes.clone(), chords)
    }

    pub fn transpose(&self, semitones: i64) -> Self {
        Harmonization {
            frame_beats: self.frame_beats,
            notes: self
                .notes
                .iter()
                .map(|n| FrameNote {
                    midi: (n.midi as i64 + semitones) as u8,
                    ..*n
                })
                .collect(),
            chords: self.chords.iter().map(|c| c.transpose(semitones)).collect(),
        }
    }
}

/// A piece of a note inside one frame.
struct Segment {
    note: usize,
    chord: ChordIndex,
    duration: f64,
}

fn segments(h: &Harmonization) -> Vec<Segment> {
    let mut out = Vec::new();
    let fb = h.frame_beats;
    for (i, n) in h.notes.iter().enumerate() {
        let first = (n.onset / fb).floor().max(0.0) as usize;
        for t in first..h.chords.len() {
            let frame_start = t as f64 * fb;
            if frame_start >= n.end() {
                break;
            }
            let start = n.onset.max(frame_start);
            let end = n.end().min(frame_start + fb);
            if end <= start {
                continue;
            }
            out.push(Segment {
                note: i,
                chord: h.chords[t],
                duration: end - start,
            });
        }
    }
    out
}

fn melody_segments(h: &Harmonization) -> Result<Vec<Segment>> {
    let segs = segments(h);
    if segs.is_empty() {
        return Err(Error::domain("harmonization has no melody notes inside its frames"));
    }
    Ok(segs)
}

fn chord_centroid(c: ChordIndex) -> TonalCentroid {
    tonal_centroid(&c.label().tones().to_weights()).expect("chords have at least three tones")
}

fn note_centroid(pc: PitchClass) -> TonalCentroid {
    let mut w = [0.0; 12];
    w[pc.value() as usize] = 1.0;
    tonal_centroid(&w).expect("one-hot weights are nonempty")
}

/// Chord histogram entropy in nats.
pub fn che(chords: &[ChordIndex]) -> f64 {
    let mut hist = [0usize; NUM_CHORDS];
    for c in chords {
        hist[c.value()] += 1;
    }
    let total = chords.len() as f64;
    hist.iter()
        .filter(|&&n| n > 0)
        .map(|&n| {
            let p = n as f64 / total;
            -p * p.ln()
        })
        .sum::<f64>()
        + 0.0
}

/// Number of distinct chords.
pub fn cc(chords: &[ChordIndex]) -> usize {
    let mut seen = [false; NUM_CHORDS];
    for c in chords {
        seen[c.value()] = true;
    }
    seen.iter().filter(|&&s| s).count()
}

/// Mean tonal distance between consecutive chords; `None` for fewer than
/// two frames.
pub fn ctd(chords: &[ChordIndex]) -> Option<f64> {
    if chords.len() < 2 {
        return None;
    }
    let total: f64 = chords
        .windows(2)
        .map(|w| tonal_distance(&chord_centroid(w[0]), &chord_centroid(w[1])))
        .sum();
    Some(total / (chords.len() - 1) as f64)
}

pub fn ctnctr(h: &Harmonization) -> Result<f64> {
    let segs = melody_segments(h)?;
    let (mut chord_tone, mut non_chord, mut passing) = (0.0, 0.0, 0.0);
    for s in &segs {
        let note = &h.notes[s.note];
        if s.chord.label().tones().contains(note.pitch_class()) {
            chord_tone += s.duration;
        } else {
            non_chord += s.duration;
            let resolves = h
                .notes
                .get(s.note + 1)
                .is_some_and(|next| (next.midi as i32 - note.midi as i32).abs() <= 2);
            if resolves {
                passing += s.duration;
            }
        }
    }
    Ok((chord_tone + passing) / (chord_tone + non_chord))
}

fn consonance(interval: u8) -> f64 {
    match interval {
        0 | 3 | 4 | 7 | 8 | 9 => 1.0,
        5 => 0.0,
        _ => -1.0,
    }
}

pub fn pcs(h: &Harmonization) -> Result<f64> {
    let segs = melody_segments(h)?;
    let (mut score, mut weight) = (0.0, 0.0);
    for s in &segs {
        let pc = h.notes[s.note].pitch_class().value() as i32;
        for tone in s.chord.label().tones().iter() {
            let interval = (pc - tone.value() as i32).rem_euclid(12) as u8;
            score += s.duration * consonance(interval);
            weight += s.duration;
        }
    }
    Ok(score / weight)
}

pub fn mctd(h: &Harmonization) -> Result<f64> {
    let segs = melody_segments(h)?;
    let (mut total, mut weight) = (0.0, 0.0);
    for s in &segs {
        let d = tonal_distance(&note_centroid(h.notes[s.note].pitch_class()), &chord_centroid(s.chord));
        total += s.duration * d;
        weight += s.duration;
    }
    Ok(total / weight)
}

/// All six metrics of one piece. Harmonicity metrics are `None` for a piece
/// without melody notes; CTD is `None` for a single-frame piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceMetrics {
    pub che: f64,
    pub cc: f64,
    pub ctd: Option<f64>,
    pub ctnctr: Option<f64>,
    pub pcs: Option<f64>,
    pub mctd: Option<f64>,
}

impl PieceMetrics {
    pub fn compute(h: &Harmonization) -> Self {
        PieceMetrics {
            che: che(&h.chords),
            cc: cc(&h.chords) as f64,
            ctd: ctd(&h.chords),
            ctnctr: ctnctr(h).ok(),
            pcs: pcs(h).ok(),
            mctd: mctd(h).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_piece: Vec<PieceMetrics>,
    /// Unweighted means over pieces (over pieces where the metric is defined).
    pub mean: PieceMetrics,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn evaluate_corpus(hs: &[Harmonization]) -> Result<MetricReport> {
    if hs.is_empty() {
        return Err(Error::domain("nothing to evaluate"));
    }
    for h in hs {
        if h.chords.is_empty() {
            return Err(Error::domain("harmonization without frames"));
        }
    }
    let per_piece: Vec<PieceMetrics> = hs.iter().map(PieceMetrics::compute).collect();
    let n = per_piece.len() as f64;
    let mean = PieceMetrics {
        che: per_piece.iter().map(|p| p.che).sum::<f64>() / n,
        cc: per_piece.iter().map(|p| p.cc).sum::<f64>() / n,
        ctd: mean_of(per_piece.iter().map(|p| p.ctd)),
        ctnctr: mean_of(per_piece.iter().map(|p| p.ctnctr)),
        pcs: mean_of(per_piece.iter().map(|p| p.pcs)),
        mctd: mean_of(per_piece.iter().map(|p| p.mctd)),
    };
    Ok(MetricReport { per_piece, mean })
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

/// Renders one row per labelled report, grouped into a harmonicity block
/// (CTnCTR, PCS, MCTD) and a progression block (CHE, CC, CTD).
pub fn format_table(rows: &[(&str, &MetricReport)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(18);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$} {:>8} {:>8} {:>8}", "M/C Harmonicity", "CTnCTR", "PCS", "MCTD");
    for (label, r) in rows {
        let m = &r.mean;
        let _ = writeln!(out, "{:<width$} {:>8} {:>8} {:>8}", label, cell(m.ctnctr), cell(m.pcs), cell(m.mctd));
    }
    out.push('\n');
    let _ = writeln!(out, "{:<width$} {:>8} {:>8} {:>8}", "Chord Progression", "CHE", "CC", "CTD");
    for (label, r) in rows {
        let m = &r.mean;
        let _ = writeln!(out, "{:<width$} {:>8} {:>8} {:>8}", label, cell(Some(m.che)), cell(Some(m.cc)), cell(m.ctd));
    }
    out
}
