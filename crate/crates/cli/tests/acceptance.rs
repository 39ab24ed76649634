//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p mharm-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use common::*;
use mharm::leadsheet::{prepare_corpus, FrameSequence};
use mharm::metrics::{che, ctd, evaluate_corpus, Harmonization, MetricReport, PieceMetrics};
use mharm::nn::{ClassWeights, Checkpoint};
use mharm::sampler::{anneal_alpha, harmonize, PinSet, SamplerConfig};
use mharm::synth::{synthetic_corpus, SynthConfig};
use mharm::train::{train, train_with_validation, TrainConfig};
use mharm::vocab::ChordIndex;
use mharm_cli::commands::LabelledReport;
use rand::Rng;
use tempfile::TempDir;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed <= budget, format!("took {elapsed:.1?}, budget {budget:?}"))
}

fn gradient_correctness() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let p = random_model(2, 0.0, seed);
        let mut r = rng(100 + seed);
        let melody = random_melody(3, &mut r);
        let chords = random_chords(3, &mut r);
        let mask = random_mask(3, &mut r);
        let counts: Vec<u64> = (0..96).map(|_| r.random_range(0..50)).collect();
        let err = gradient_check(&p, &input(&melody, &chords, &mask), &chords, &ClassWeights::from_counts(&counts), None, 1e-4);
        worst = worst.max(err);
    }
    ensure(worst < 1e-4, format!("max relative error {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("5 models, max relative error {worst:.2e}, {:.1?}", start.elapsed()))
}

/// Ten synthetic pieces, trained and validated on themselves.
fn overfit_sanity() -> Check {
    let start = Instant::now();
    let sheets = synthetic_corpus(&SynthConfig { pieces: 12, seed: 1, ..Default::default() });
    let p = prepare_corpus(&sheets, 0.9, 0).map_err(|e| e.to_string())?;
    let mut corpus = p.train;
    corpus.extend(p.test);
    corpus.truncate(10);
    let stats = p.stats;
    let cfg = TrainConfig { epochs_max: 200, batch_size: 1, class_balancing: false, ..Default::default() };
    let out = train_with_validation(&corpus, &corpus, &stats, &cfg).map_err(|e| e.to_string())?;
    let best = out.history.best_val_loss().ok_or("no epochs recorded")?;
    ensure(best < 0.1, format!("best masked NLL {best:.4}"))?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "10 pieces, {} epochs, best masked NLL {best:.4}, {:.1?}",
        out.history.epochs.len(),
        start.elapsed()
    ))
}

fn class_weight_formula() -> Check {
    let equal = ClassWeights::from_counts(&[37; 96]);
    ensure(equal.as_slice().iter().all(|&w| w == 1.0), "equal counts do not give all ones")?;
    let two = ClassWeights::from_counts(&[0, 1000]);
    let (w0, w1) = (two.get(0), two.get(1));
    ensure(
        (w0 - 4.0 / 3.0).abs() <= 1e-15 && (w1 - 2.0 / 3.0).abs() <= 1e-15,
        format!("two-class weights {w0} {w1}"),
    )?;
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(1..200);
        let counts: Vec<u64> = (0..n).map(|_| r.random_range(0..100_000)).collect();
        let w = ClassWeights::from_counts(&counts);
        let mean = w.as_slice().iter().sum::<f64>() / n as f64;
        worst = worst.max((mean - 1.0).abs());
    }
    ensure(worst < 1e-9, format!("mean weight off by {worst:e}"))?;
    Ok(format!("[{w0}, {w1}], 100 random vectors mean within {worst:.1e}"))
}

fn pin_invariance() -> Check {
    let model = random_model(4, 0.2, 1);
    let mut r = rng(77);
    let (mut violations, mut pinned) = (0, 0);
    for run in 0..100 {
        let len = r.random_range(1..20);
        let melody = random_melody(len, &mut r);
        let mut pins = PinSet::new();
        for t in 0..len {
            if r.random::<f64>() < 0.3 {
                pins.insert(t, ChordIndex::new(r.random_range(0..96)).expect("in range"));
            }
        }
        let cfg = SamplerConfig {
            iterations: r.random_range(1..8),
            temperature: [0.0, 0.5, 1.0, 2.0][run % 4],
            seed: run as u64,
            ..Default::default()
        };
        let out = harmonize(&model, &melody, &pins, &cfg).map_err(|e| e.to_string())?;
        pinned += pins.len();
        violations += pins.iter().filter(|(&t, &c)| out.chords[t] != c).count();
    }
    ensure(violations == 0, format!("{violations} of {pinned} pinned frames changed"))?;
    for n in [1, 16, 33] {
        let cfg = SamplerConfig { iterations: n, ..Default::default() };
        let (a0, an) = (anneal_alpha(0, &cfg), anneal_alpha(n, &cfg));
        ensure(a0 == 0.05 && an == 1.0, format!("schedule endpoints {a0} {an} for n = {n}"))?;
    }
    Ok(format!("100 runs, {pinned} pinned frames, 0 violations; alpha 0.05 -> 1.0"))
}

fn metric_oracles() -> Check {
    let mut r = rng(2024);
    for case in 0..50 {
        let h = random_harmonization(&mut r);
        let got = PieceMetrics::compute(&h);
        let want = oracle_metrics(&h);
        ensure((got.che - want.che).abs() < 1e-9, format!("case {case}: CHE {} vs {}", got.che, want.che))?;
        ensure(got.cc == want.cc, format!("case {case}: CC {} vs {}", got.cc, want.cc))?;
        for (name, a, b) in [
            ("CTD", got.ctd, want.ctd),
            ("CTnCTR", got.ctnctr, want.ctnctr),
            ("PCS", got.pcs, want.pcs),
            ("MCTD", got.mctd, want.mctd),
        ] {
            ensure(close(a, b, 1e-9), format!("case {case}: {name} {a:?} vs {b:?}"))?;
        }
    }
    let c = |i| ChordIndex::new(i).expect("in range");
    let four = [c(0), c(56), c(9), c(40), c(40), c(9), c(56), c(0)];
    let h = che(&four);
    ensure((h - 4f64.ln()).abs() <= 1e-12, format!("uniform 4-chord CHE {h}"))?;
    let flat = ctd(&[c(17); 6]);
    ensure(flat == Some(0.0), format!("constant progression CTD {flat:?}"))?;
    Ok("50 random cases within 1e-9; CHE = ln 4; constant CTD = 0".into())
}

fn harmonize_test_set(cfg: &TrainConfig, train_set: &[FrameSequence], test_set: &[FrameSequence], stats: &mharm::leadsheet::CorpusStats) -> Result<MetricReport, String> {
    let out = train(train_set, stats, cfg).map_err(|e| e.to_string())?;
    let hs = test_set
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let sc = SamplerConfig { iterations: 16, temperature: 1.0, seed: i as u64, ..Default::default() };
            harmonize(&out.checkpoint.params, &s.melody, &PinSet::new(), &sc).map(|h| Harmonization::with_chords(s, h.chords))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    evaluate_corpus(&hs).map_err(|e| e.to_string())
}

fn directional_trend() -> Check {
    let start = Instant::now();
    let sheets = synthetic_corpus(&SynthConfig { pieces: 800, seed: 7, ..Default::default() });
    let p = prepare_corpus(&sheets, 0.8, 0).map_err(|e| e.to_string())?;
    let base = TrainConfig { epochs_max: 10, ..Default::default() };
    let off = harmonize_test_set(&TrainConfig { class_balancing: false, ..base.clone() }, &p.train, &p.test, &p.stats)?.mean;
    let on = harmonize_test_set(&TrainConfig { class_balancing: true, ..base }, &p.train, &p.test, &p.stats)?.mean;
    let summary = format!(
        "{} train / {} test; CHE {:.3} -> {:.3}, CC {:.3} -> {:.3}, CTnCTR {:.3} -> {:.3}, PCS {:.3} -> {:.3}, {:.0?}",
        p.train.len(),
        p.test.len(),
        off.che,
        on.che,
        off.cc,
        on.cc,
        off.ctnctr.unwrap_or(f64::NAN),
        on.ctnctr.unwrap_or(f64::NAN),
        off.pcs.unwrap_or(f64::NAN),
        on.pcs.unwrap_or(f64::NAN),
        start.elapsed()
    );
    ensure(on.che > off.che && on.cc > off.cc, format!("CHE/CC did not rise: {summary}"))?;
    for (name, a, b) in [("CTnCTR", off.ctnctr, on.ctnctr), ("PCS", off.pcs, on.pcs)] {
        let (a, b) = (a.ok_or(format!("{name} undefined"))?, b.ok_or(format!("{name} undefined"))?);
        ensure(b >= a - 0.1 * a.abs(), format!("{name} fell more than 10%: {summary}"))?;
    }
    within(start.elapsed(), Duration::from_secs(3600))?;
    Ok(summary)
}

fn mharm(args: &[&str]) -> Result<Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mharm"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!("mharm {} exited {:?}: {}", args[0], out.status.code(), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// synth -> prepare -> train; returns the corpus, data dir and checkpoint.
fn fixture_model(dir: &Path) -> Result<(PathBuf, PathBuf, PathBuf), String> {
    let corpus = dir.join("corpus.jsonl");
    let data = dir.join("data");
    let model = dir.join("model.mharm");
    mharm(&["synth", "--pieces", "40", "--bars", "4", "--seed", "3", "--out", s(&corpus)])?;
    mharm(&["prepare", "--corpus", s(&corpus), "--out", s(&data)])?;
    mharm(&["train", "--data", s(&data), "--out", s(&model), "--epochs", "2"])?;
    Ok((corpus, data, model))
}

fn determinism() -> Check {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let (_, _, model) = fixture_model(dir.path())?;
    let melody = dir.path().join("melody.jsonl");
    let sheets = synthetic_corpus(&SynthConfig { pieces: 3, bars: 4, seed: 8, ..Default::default() });
    std::fs::write(&melody, sheets.iter().map(|s| s.to_json() + "\n").collect::<String>()).map_err(|e| e.to_string())?;
    let args = ["harmonize", "--checkpoint", s(&model), "--input", s(&melody), "--seed", "5"];
    let (a, b) = (mharm(&args)?.stdout, mharm(&args)?.stdout);
    ensure(!a.is_empty() && a == b, "harmonize output differs between runs")?;

    let ck = Checkpoint::load(&model).map_err(|e| e.to_string())?;
    let back = Checkpoint::read_from(ck.to_bytes().as_slice()).map_err(|e| e.to_string())?;
    let mut r = rng(6);
    let x = input(&random_melody(16, &mut r), &random_chords(16, &mut r), &random_mask(16, &mut r));
    let l1 = ck.params.forward(&x, None).map_err(|e| e.to_string())?.logits;
    let l2 = back.params.forward(&x, None).map_err(|e| e.to_string())?.logits;
    ensure(l1.iter().zip(l2.iter()).all(|(p, q)| p.to_bits() == q.to_bits()), "logits differ after round trip")?;
    Ok(format!("{} identical output bytes; {} logits bit-identical after round trip", a.len(), l1.len()))
}

fn end_to_end() -> Check {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let (corpus, data, model) = fixture_model(dir.path())?;
    let harmonized = dir.path().join("harmonized.jsonl");
    mharm(&["harmonize", "--checkpoint", s(&model), "--input", s(&corpus), "--out", s(&harmonized)])?;
    let pieces = std::fs::read_to_string(&harmonized).map_err(|e| e.to_string())?.lines().count();
    let report = eval_report(dir.path(), &["--input", s(&harmonized)], 1)?;
    ensure(report.per_piece.len() == pieces, format!("{} rows for {pieces} pieces", report.per_piece.len()))?;
    well_formed(&report)?;

    // with a checkpoint, eval harmonizes the held-out melodies itself
    let test = data.join("test.jsonl");
    let held_out = std::fs::read_to_string(&test).map_err(|e| e.to_string())?.lines().count();
    let report = eval_report(dir.path(), &["--input", s(&test), "--checkpoint", s(&model)], 2)?;
    ensure(report.per_piece.len() == held_out, format!("{} rows for {held_out} held-out pieces", report.per_piece.len()))?;
    well_formed(&report)?;
    Ok(format!("{pieces} pieces harmonized and scored; {held_out} held-out pieces scored via the checkpoint"))
}

/// Runs `eval --json` and returns the last of `rows` reports.
fn eval_report(dir: &Path, args: &[&str], rows: usize) -> Result<MetricReport, String> {
    let path = dir.join("report.json");
    let mut full = vec!["eval"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--json", s(&path)]);
    let table = String::from_utf8(mharm(&full)?.stdout).map_err(|e| e.to_string())?;
    ensure(table.contains("CTnCTR") && table.contains("CHE"), "table lacks metric columns")?;
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let mut got: Vec<LabelledReport> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(got.len() == rows, format!("{} report rows, expected {rows}", got.len()))?;
    Ok(got.pop().expect("nonempty").report)
}

fn well_formed(report: &MetricReport) -> Result<(), String> {
    let m = &report.mean;
    let means = [Some(m.che), Some(m.cc), m.ctnctr, m.pcs, m.mctd];
    ensure(means.iter().all(|v| v.is_some_and(f64::is_finite)), format!("undefined or non-finite means {m:?}"))?;
    ensure(m.cc >= 1.0 && m.che >= 0.0, format!("implausible means {m:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("gradient correctness", gradient_correctness),
        ("overfit sanity", overfit_sanity),
        ("class-weight formula", class_weight_formula),
        ("sampler pin invariance", pin_invariance),
        ("metric oracles", metric_oracles),
        ("directional balancing trend", directional_trend),
        ("determinism", determinism),
        ("end-to-end schema", end_to_end),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
