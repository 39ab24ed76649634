//! The `mharm` subcommands.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use mharm::leadsheet::{
    prepare_corpus, quantize_to_frames, read_corpus, transpose_to_common_key, ChordEvent,
    FrameSequence, LeadSheet,
};
use mharm::metrics::{evaluate_corpus, format_table, Harmonization, MetricReport};
use mharm::nn::Checkpoint;
use mharm::sampler::{harmonize, PinSet, SamplerConfig};
use mharm::synth::{synthetic_corpus, SynthConfig};
use mharm::train::{train, TrainConfig};
use mharm::vocab::{ChordIndex, ChordLabel, RawChordSymbol};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const STATS_FILE: &str = "stats.json";
pub const MODEL_FILE: &str = "model.mharm";
pub const HISTORY_FILE: &str = "history.jsonl";

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn read_sheets(path: &Path) -> anyhow::Result<Vec<LeadSheet>> {
    read_corpus(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn write_sequences(path: &Path, seqs: &[FrameSequence]) -> anyhow::Result<()> {
    let mut w = create(path)?;
    for s in seqs {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sequences(path: &Path) -> anyhow::Result<Vec<FrameSequence>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: FrameSequence = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", path.display(), i + 1))?;
        seq.validate().with_context(|| format!("{} line {}", path.display(), i + 1))?;
        out.push(seq);
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Lead-sheet corpus, one JSON document per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory for train.jsonl, test.jsonl and stats.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Fraction of pieces used for training. The test split has
    /// floor(n * (1 - ratio)) pieces, at least one and at most n - 1; 40
    /// pieces at 0.97 give a 39/1 split.
    #[arg(long, default_value_t = 0.9)]
    pub split_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn prepare(args: &PrepareArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let sheets = read_sheets(&args.corpus)?;
    let prepared = prepare_corpus(&sheets, args.split_ratio, args.seed)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    write_sequences(&args.out.join(TRAIN_FILE), &prepared.train)?;
    write_sequences(&args.out.join(TEST_FILE), &prepared.test)?;
    let mut w = create(&args.out.join(STATS_FILE))?;
    serde_json::to_writer_pretty(&mut w, &prepared.stats)?;
    w.write_all(b"\n")?;
    w.flush()?;
    let frames = |s: &[FrameSequence]| s.iter().map(FrameSequence::len).sum::<usize>();
    writeln!(
        out,
        "{} pieces read, {} usable; train {} pieces / {} frames, test {} pieces / {} frames",
        sheets.len(),
        prepared.train.len() + prepared.test.len(),
        prepared.train.len(),
        frames(&prepared.train),
        prepared.test.len(),
        frames(&prepared.test),
    )?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON training config; flags given on the command line override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint path (default: <data>/model.mharm).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// History path (default: next to the checkpoint, history.jsonl).
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train with unit class weights.
    #[arg(long)]
    pub no_balancing: bool,
}

impl TrainArgs {
    pub fn config(&self) -> anyhow::Result<TrainConfig> {
        let mut cfg: TrainConfig = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("bad config {}", p.display()))?
            }
            None => TrainConfig::default(),
        };
        if let Some(v) = self.epochs {
            cfg.epochs_max = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden = v;
        }
        if let Some(v) = self.dropout {
            cfg.dropout = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.no_balancing {
            cfg.class_balancing = false;
        }
        Ok(cfg)
    }
}

pub fn train_cmd(args: &TrainArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if !args.data.is_dir() {
        bail!("data directory {} does not exist", args.data.display());
    }
    let cfg = args.config()?;
    let corpus = read_sequences(&args.data.join(TRAIN_FILE))?;
    let stats_path = args.data.join(STATS_FILE);
    let stats = serde_json::from_reader(open(&stats_path)?)
        .with_context(|| format!("bad statistics file {}", stats_path.display()))?;
    let model_path = args.out.clone().unwrap_or_else(|| args.data.join(MODEL_FILE));
    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| model_path.with_file_name(HISTORY_FILE));

    match train(&corpus, &stats, &cfg) {
        Ok(outcome) => {
            outcome.checkpoint.save(&model_path)?;
            std::fs::write(&history_path, outcome.history.to_jsonl())?;
            let best = outcome.history.best_val_loss().unwrap_or(f64::NAN);
            writeln!(
                out,
                "best validation loss {best:.4} (epoch {}); checkpoint {}",
                outcome.history.best_epoch.unwrap_or(0),
                model_path.display()
            )?;
            Ok(())
        }
        Err(abort) if abort.epoch == 0 => Err(abort.into()),
        Err(abort) => {
            abort.last_good.save(&model_path)?;
            std::fs::write(&history_path, abort.history.to_jsonl())?;
            Err(anyhow::Error::new(abort).context(format!("last good checkpoint kept at {}", model_path.display())))
        }
    }
}

/// `FRAME=CHORD`, e.g. `3=G7`.
pub fn parse_pin(s: &str) -> Result<(usize, ChordLabel), String> {
    let (frame, chord) = s.split_once('=').ok_or("expected FRAME=CHORD")?;
    let frame = frame.trim().parse().map_err(|_| format!("bad frame index {frame:?}"))?;
    let label = chord
        .trim()
        .parse::<ChordLabel>()
        .map_err(|_| format!("{chord:?} is not one of the 96 vocabulary chords"))?;
    Ok((frame, label))
}

#[derive(Debug, Args)]
pub struct HarmonizeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Lead sheet(s), one JSON document per line; existing chords are
    /// replaced.
    #[arg(long)]
    pub input: PathBuf,
    /// Output path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fix the chord of a frame, as FRAME=CHORD in the sheet's own key.
    /// Repeatable.
    #[arg(long = "pin", value_parser = parse_pin)]
    pub pins: Vec<(usize, ChordLabel)>,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Sampler seed; piece i of the input uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Refinement iterations (default: from the checkpoint's corpus
    /// statistics).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Emit one chord event per half bar instead of merging repeats.
    #[arg(long)]
    pub no_merge: bool,
}

/// Chord events for `chords` on a grid of `frame_beats` starting at beat 0.
pub fn chord_events(chords: &[ChordIndex], frame_beats: Ratio<i64>, merge: bool) -> Vec<ChordEvent> {
    let mut events: Vec<ChordEvent> = Vec::new();
    for (t, c) in chords.iter().enumerate() {
        let symbol = RawChordSymbol::from(c.label());
        match events.last_mut() {
            Some(prev) if merge && prev.symbol == symbol => prev.duration += frame_beats,
            _ => events.push(ChordEvent {
                onset: frame_beats * t as i64,
                duration: frame_beats,
                symbol,
            }),
        }
    }
    events
}

/// Harmonizes one sheet in its own key. Pins are given in that key too.
pub fn harmonize_sheet(
    model: &Checkpoint,
    sheet: &LeadSheet,
    pins: &[(usize, ChordLabel)],
    cfg: &SamplerConfig,
    merge: bool,
) -> anyhow::Result<LeadSheet> {
    let shift = sheet.shift_to_common_key();
    let frames = quantize_to_frames(&sheet.transpose(shift));
    let melody = frames.melody_frames().melody;
    let pin_set: PinSet = pins.iter().map(|&(t, l)| (t, l.index().transpose(shift))).collect();
    let out = harmonize(&model.params, &melody, &pin_set, cfg)?;
    let chords: Vec<ChordIndex> = out.chords.iter().map(|c| c.transpose(-shift)).collect();
    Ok(LeadSheet {
        chords: chord_events(&chords, frames.frame_beats, merge),
        ..sheet.clone()
    })
}

pub fn harmonize_cmd(args: &HarmonizeArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let model = Checkpoint::load(&args.checkpoint)
        .with_context(|| format!("cannot use checkpoint {}", args.checkpoint.display()))?;
    let sheets = read_sheets(&args.input)?;
    if sheets.is_empty() {
        bail!("{} contains no lead sheets", args.input.display());
    }
    let mut text = String::new();
    for (i, sheet) in sheets.iter().enumerate() {
        let cfg = SamplerConfig {
            iterations: args.iterations.unwrap_or_else(|| model.default_iterations()),
            temperature: args.temperature,
            seed: args.seed.wrapping_add(i as u64),
            ..Default::default()
        };
        let done = harmonize_sheet(&model, sheet, &args.pins, &cfg, !args.no_merge)
            .with_context(|| format!("piece {}", i + 1))?;
        text.push_str(&done.to_json());
        text.push('\n');
    }
    match &args.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Frame sequences (as written by `prepare`) or lead sheets, one JSON
    /// document per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Harmonize the input melodies with this model and evaluate the
    /// result. Repeat to compare models.
    #[arg(long = "checkpoint")]
    pub checkpoints: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Also write the reports as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledReport {
    pub label: String,
    pub report: MetricReport,
}

/// Reads pieces for evaluation in the common key. `None` chords mark a
/// melody-only lead sheet.
fn read_eval_input(path: &Path) -> anyhow::Result<Vec<(FrameSequence, bool)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{} line {}", path.display(), i + 1);
        let value: serde_json::Value = serde_json::from_str(&line).with_context(at)?;
        if value.get("frame_beats").is_some() {
            let seq: FrameSequence = serde_json::from_value(value).with_context(at)?;
            seq.validate().with_context(at)?;
            out.push((seq, true));
        } else {
            let sheet = transpose_to_common_key(&LeadSheet::from_json(&line).with_context(at)?);
            let q = quantize_to_frames(&sheet);
            match q.fill_chords() {
                Some(seq) => out.push((seq, true)),
                None => out.push((q.melody_frames(), false)),
            }
        }
    }
    Ok(out)
}

pub fn eval_cmd(args: &EvalArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let pieces = read_eval_input(&args.input)?;
    if pieces.is_empty() {
        bail!("{} contains nothing to evaluate", args.input.display());
    }
    let mut rows = Vec::new();
    if pieces.iter().all(|(_, has_chords)| *has_chords) {
        let given: Vec<Harmonization> = pieces.iter().map(|(s, _)| Harmonization::from_frames(s)).collect();
        rows.push(LabelledReport { label: "input".into(), report: evaluate_corpus(&given)? });
    } else if args.checkpoints.is_empty() {
        bail!("{} has pieces without chords; pass --checkpoint to harmonize them", args.input.display());
    }
    for path in &args.checkpoints {
        let model = Checkpoint::load(path).with_context(|| format!("cannot use checkpoint {}", path.display()))?;
        let mut generated = Vec::with_capacity(pieces.len());
        for (i, (seq, _)) in pieces.iter().enumerate() {
            let cfg = SamplerConfig {
                iterations: args.iterations.unwrap_or_else(|| model.default_iterations()),
                temperature: args.temperature,
                seed: args.seed.wrapping_add(i as u64),
                ..Default::default()
            };
            let out = harmonize(&model.params, &seq.melody, &PinSet::new(), &cfg)?;
            generated.push(Harmonization::with_chords(seq, out.chords));
        }
        let label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        rows.push(LabelledReport { label, report: evaluate_corpus(&generated)? });
    }
    let table: Vec<(&str, &MetricReport)> = rows.iter().map(|r| (r.label.as_str(), &r.report)).collect();
    stdout.write_all(format_table(&table).as_bytes())?;
    if let Some(p) = &args.json {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &rows)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub pieces: usize,
    #[arg(long, default_value_t = 8)]
    pub bars: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synth_cmd(args: &SynthArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let sheets = synthetic_corpus(&SynthConfig {
        pieces: args.pieces,
        bars: args.bars,
        seed: args.seed,
        ..Default::default()
    });
    let mut w = create(&args.out)?;
    for s in &sheets {
        w.write_all(s.to_json().as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    writeln!(stdout, "wrote {} lead sheets to {}", sheets.len(), args.out.display())?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
}
