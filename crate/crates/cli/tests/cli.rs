use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mharm::leadsheet::{parse_leadsheet, read_corpus};
use mharm::metrics::{evaluate_corpus, Harmonization};
use mharm::nn::Checkpoint;
use mharm::synth::{synthetic_corpus, SynthConfig};
use mharm::vocab::ChordLabel;
use mharm_cli::commands::{read_sequences, LabelledReport};
use tempfile::TempDir;

fn mharm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mharm"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_corpus(dir: &Path, pieces: usize, seed: u64) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    let sheets = synthetic_corpus(&SynthConfig { pieces, bars: 4, seed, ..Default::default() });
    let text: String = sheets.iter().map(|s| s.to_json() + "\n").collect();
    std::fs::write(&path, text).unwrap();
    path
}

/// prepare + a 2-epoch tiny model; returns (data dir, checkpoint).
fn trained(dir: &Path, extra: &[&str]) -> (PathBuf, PathBuf) {
    let corpus = write_corpus(dir, 12, 1);
    let data = dir.join("data");
    ok(&mharm(&["prepare", "--corpus", s(&corpus), "--out", s(&data), "--split-ratio", "0.8"]));
    let model = dir.join("model.mharm");
    let mut args = vec!["train", "--data", s(&data), "--out", s(&model), "--epochs", "2", "--hidden", "8"];
    args.extend_from_slice(extra);
    ok(&mharm(&args));
    (data, model)
}

#[test]
fn prepare_writes_splits_and_stats() {
    let dir = TempDir::new().unwrap();
    let corpus = write_corpus(dir.path(), 40, 2);
    let data = dir.path().join("data");
    let stdout = ok(&mharm(&["prepare", "--corpus", s(&corpus), "--out", s(&data), "--split-ratio", "0.97"]));
    assert!(stdout.contains("train 39 pieces"), "{stdout}");
    assert!(stdout.contains("test 1 pieces"), "{stdout}");
    assert_eq!(read_sequences(&data.join("train.jsonl")).unwrap().len(), 39);
    assert_eq!(read_sequences(&data.join("test.jsonl")).unwrap().len(), 1);
    assert!(data.join("stats.json").exists());
}

#[test]
fn prepare_two_pieces() {
    let dir = TempDir::new().unwrap();
    let corpus = write_corpus(dir.path(), 2, 3);
    let data = dir.path().join("d");
    ok(&mharm(&["prepare", "--corpus", s(&corpus), "--out", s(&data)]));
    for f in ["train.jsonl", "test.jsonl", "stats.json"] {
        assert!(data.join(f).exists(), "{f}");
    }
}

#[test]
fn prepare_reports_the_bad_line() {
    let dir = TempDir::new().unwrap();
    let corpus = write_corpus(dir.path(), 10, 4);
    let mut lines: Vec<String> = std::fs::read_to_string(&corpus).unwrap().lines().map(String::from).collect();
    lines[6] = lines[6].replace("\"midi\":", "\"midi\":\"x\",\"y\":");
    std::fs::write(&corpus, lines.join("\n")).unwrap();
    let out = mharm(&["prepare", "--corpus", s(&corpus), "--out", s(&dir.path().join("d"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 7"), "{err}");
}

#[test]
fn missing_inputs_fail() {
    let dir = TempDir::new().unwrap();
    let out = mharm(&["prepare", "--corpus", s(&dir.path().join("nope.jsonl")), "--out", s(dir.path())]);
    assert!(!out.status.success());
    let out = mharm(&["train", "--data", s(&dir.path().join("missing"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn no_balancing_records_unit_weights() {
    let dir = TempDir::new().unwrap();
    let (_, model) = trained(dir.path(), &["--no-balancing"]);
    let ck = Checkpoint::load(&model).unwrap();
    assert!(!ck.class_balancing);
    assert!(ck.class_weights.as_slice().iter().all(|&w| w == 1.0));
    assert!(model.with_file_name("history.jsonl").exists());
}

#[test]
fn harmonize_is_deterministic_and_keeps_pins() {
    let dir = TempDir::new().unwrap();
    let (_, model) = trained(dir.path(), &[]);
    let melody = dir.path().join("melody.json");
    let sheet = synthetic_corpus(&SynthConfig { pieces: 1, bars: 4, seed: 99, ..Default::default() }).remove(0);
    std::fs::write(&melody, sheet.to_json()).unwrap();

    let run = |extra: &[&str]| {
        let mut a = vec!["harmonize", "--checkpoint", s(&model), "--input", s(&melody), "--seed", "7"];
        a.extend_from_slice(extra);
        ok(&mharm(&a))
    };
    let first = run(&[]);
    assert_eq!(first, run(&[]));

    let pinned = run(&["--pin", "0=F#m7", "--pin", "3=Bbmaj7", "--no-merge"]);
    let out = parse_leadsheet(pinned.trim()).unwrap();
    assert_eq!(out.melody, sheet.melody);
    assert_eq!(out.chords[0].symbol.reduce(), "F#m7".parse::<ChordLabel>().unwrap());
    assert_eq!(out.chords[3].symbol.reduce(), "A#maj7".parse::<ChordLabel>().unwrap());

    let bad = mharm(&["harmonize", "--checkpoint", s(&model), "--input", s(&melody), "--pin", "0=C9"]);
    assert!(!bad.status.success());
}

#[test]
fn harmonize_rejects_foreign_vocabulary() {
    let dir = TempDir::new().unwrap();
    let (_, model) = trained(dir.path(), &[]);
    let mut bytes = std::fs::read(&model).unwrap();
    let hash = mharm::vocab::vocab_layout_hash();
    let text = String::from_utf8_lossy(&bytes).into_owned();
    let at = text.find(&hash).unwrap();
    bytes[at] = if bytes[at] == b'f' { b'e' } else { b'f' };
    std::fs::write(&model, bytes).unwrap();
    let melody = dir.path().join("m.json");
    std::fs::write(&melody, synthetic_corpus(&SynthConfig { pieces: 1, ..Default::default() })[0].to_json()).unwrap();
    let out = mharm(&["harmonize", "--checkpoint", s(&model), "--input", s(&melody)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("vocabulary layout mismatch"));
}

#[test]
fn eval_matches_in_process_report() {
    let dir = TempDir::new().unwrap();
    let (data, model) = trained(dir.path(), &[]);
    let json = dir.path().join("report.json");
    let test = data.join("test.jsonl");
    let stdout = ok(&mharm(&["eval", "--input", s(&test), "--json", s(&json)]));
    assert!(stdout.starts_with("M/C Harmonicity"));
    let rows: Vec<LabelledReport> = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let seqs = read_sequences(&test).unwrap();
    let direct = evaluate_corpus(&seqs.iter().map(Harmonization::from_frames).collect::<Vec<_>>()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].report, direct);

    // two-model comparison
    let other = dir.path().join("other.mharm");
    std::fs::copy(&model, &other).unwrap();
    let stdout = ok(&mharm(&[
        "eval", "--input", s(&test), "--checkpoint", s(&model), "--checkpoint", s(&other), "--seed", "3",
    ]));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 9, "{stdout}");
    assert!(lines[1].starts_with("input") && lines[2].starts_with("model") && lines[3].starts_with("other"));
    assert!(lines[7].starts_with("model") && lines[8].starts_with("other"));
    // identical models and seeds give identical rows
    let cells = |l: &str| l.split_whitespace().skip(1).map(String::from).collect::<Vec<_>>();
    assert_eq!(cells(lines[2]), cells(lines[3]));
    assert_eq!(cells(lines[7]), cells(lines[8]));
}

#[test]
fn eval_constant_piece_and_empty_input() {
    let dir = TempDir::new().unwrap();
    let piece = r#"{"version":1,"key":{"tonic":"C","mode":"major"},"beats_per_bar":4,
        "melody":[{"onset":[0,1],"duration":[1,1],"midi":60}],
        "chords":[{"onset":[0,1],"duration":[8,1],"symbol":"C"}]}"#
        .replace('\n', "");
    let path = dir.path().join("one.jsonl");
    std::fs::write(&path, piece + "\n").unwrap();
    let stdout = ok(&mharm(&["eval", "--input", s(&path)]));
    let che_row = stdout.lines().nth(4).unwrap();
    assert_eq!(che_row.split_whitespace().collect::<Vec<_>>(), ["input", "0.000", "1.000", "0.000"]);

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert!(!mharm(&["eval", "--input", s(&empty)]).status.success());
}

#[test]
fn synth_writes_a_readable_corpus() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.jsonl");
    ok(&mharm(&["synth", "--pieces", "5", "--out", s(&out)]));
    let sheets = read_corpus(std::io::BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
    assert_eq!(sheets.len(), 5);
}
