#![allow(dead_code)]

use mharm::leadsheet::{FrameNote, FrameSequence};
use mharm::metrics::Harmonization;
use mharm::nn::{assemble_input, masked_nll, BatchInput, ClassWeights, Hyper, LstmDirection, ModelParams};
use mharm::vocab::{ChordIndex, PitchClassSet};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A small model with weights spread wider than the default init so that
/// gates are not all saturated near their bias.
pub fn random_model(hidden: usize, dropout: f64, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(Hyper { hidden, dropout, seed });
    let mut r = rng(seed ^ 0xABCD);
    for s in p.slices_mut() {
        for v in s.iter_mut() {
            *v = r.random_range(-0.8..0.8);
        }
    }
    p
}

pub fn random_melody(len: usize, r: &mut ChaCha8Rng) -> Vec<PitchClassSet> {
    (0..len)
        .map(|_| {
            let mut s = PitchClassSet::EMPTY;
            for pc in 0..12u8 {
                if r.random::<f64>() < 0.25 {
                    s.insert(mharm::vocab::PitchClass::new(pc).unwrap());
                }
            }
            s
        })
        .collect()
}

pub fn random_chords(len: usize, r: &mut ChaCha8Rng) -> Vec<ChordIndex> {
    (0..len).map(|_| ChordIndex::new(r.random_range(0..96)).unwrap()).collect()
}

pub fn random_mask(len: usize, r: &mut ChaCha8Rng) -> Vec<bool> {
    loop {
        let m: Vec<bool> = (0..len).map(|_| r.random::<bool>()).collect();
        if m.iter().any(|&b| b) {
            return m;
        }
    }
}

pub fn loss(
    p: &ModelParams,
    input: &BatchInput,
    targets: &[ChordIndex],
    weights: &ClassWeights,
    dropout_seed: Option<u64>,
) -> f64 {
    let mut dr = dropout_seed.map(rng);
    let pass = p.forward(input, dr.as_mut()).unwrap();
    masked_nll(pass.logits.view(), targets, &input.mask, weights).unwrap()
}

/// Max relative error between analytic and central-difference gradients.
pub fn gradient_check(
    p: &ModelParams,
    input: &BatchInput,
    targets: &[ChordIndex],
    weights: &ClassWeights,
    dropout_seed: Option<u64>,
    h: f64,
) -> f64 {
    let mut dr = dropout_seed.map(rng);
    let pass = p.forward(input, dr.as_mut()).unwrap();
    let grads = p.backward(&pass, targets, &input.mask, weights).unwrap();
    let analytic: Vec<f64> = grads.named_slices().into_iter().flat_map(|(_, s)| s.to_vec()).collect();

    let mut probe = p.clone();
    let mut worst: f64 = 0.0;
    let mut k = 0;
    let n_tensors = probe.slices_mut().len();
    for ti in 0..n_tensors {
        let len = probe.slices_mut()[ti].len();
        for j in 0..len {
            let orig = probe.slices_mut()[ti][j];
            probe.slices_mut()[ti][j] = orig + h;
            let plus = loss(&probe, input, targets, weights, dropout_seed);
            probe.slices_mut()[ti][j] = orig - h;
            let minus = loss(&probe, input, targets, weights, dropout_seed);
            probe.slices_mut()[ti][j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[k];
            let denom = (a.abs() + numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / denom);
            k += 1;
        }
    }
    worst
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn lstm_scalar(d: &LstmDirection, x: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
    let t_len = x.len();
    let h = d.w_rec.ncols();
    let mut out = vec![vec![0.0; h]; t_len];
    let mut hp = vec![0.0; h];
    let mut cp = vec![0.0; h];
    let order: Vec<usize> = if reverse { (0..t_len).rev().collect() } else { (0..t_len).collect() };
    for t in order {
        let mut z = vec![0.0; 4 * h];
        for (r, zr) in z.iter_mut().enumerate() {
            let mut acc = d.bias[r];
            for (c, xv) in x[t].iter().enumerate() {
                acc += d.w_in[[r, c]] * xv;
            }
            for (c, hv) in hp.iter().enumerate() {
                acc += d.w_rec[[r, c]] * hv;
            }
            *zr = acc;
        }
        for j in 0..h {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[h + j]);
            let g = z[2 * h + j].tanh();
            let o = sigmoid(z[3 * h + j]);
            cp[j] = f * cp[j] + i * g;
            hp[j] = o * cp[j].tanh();
        }
        out[t] = hp.clone();
    }
    out
}

/// Straight-line scalar evaluation of the network in eval mode.
pub fn scalar_forward(p: &ModelParams, x: &Array2<f64>) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let cat = |a: Vec<Vec<f64>>, b: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        a.into_iter().zip(b).map(|(mut l, r)| {
            l.extend(r);
            l
        }).collect()
    };
    let l1 = cat(lstm_scalar(&p.lstm1.fwd, &rows, false), lstm_scalar(&p.lstm1.bwd, &rows, true));
    let l2 = cat(lstm_scalar(&p.lstm2.fwd, &l1, false), lstm_scalar(&p.lstm2.bwd, &l1, true));
    let feats = cat(l2, rows);
    feats
        .iter()
        .map(|f| {
            (0..96)
                .map(|k| p.fc_b[k] + f.iter().enumerate().map(|(c, v)| p.fc_w[[k, c]] * v).sum::<f64>())
                .collect()
        })
        .collect()
}

pub fn input(melody: &[PitchClassSet], chords: &[ChordIndex], mask: &[bool]) -> BatchInput {
    assemble_input(melody, chords, mask).unwrap()
}

// ---- metric oracle -------------------------------------------------------

const TICKS_PER_BEAT: usize = 4;

/// Random harmonization on a sixteenth-note grid, frames of 2 beats.
pub fn random_harmonization(r: &mut ChaCha8Rng) -> Harmonization {
    let frames = r.random_range(1..7);
    let total_ticks = frames * 2 * TICKS_PER_BEAT;
    let mut notes = Vec::new();
    let mut tick = 0;
    while tick < total_ticks {
        let len = r.random_range(1..7);
        if r.random::<f64>() < 0.8 {
            notes.push(FrameNote {
                onset: tick as f64 / TICKS_PER_BEAT as f64,
                duration: len as f64 / TICKS_PER_BEAT as f64,
                midi: r.random_range(55..80),
            });
        }
        tick += len;
    }
    let palette = random_chords(3, r);
    let chords = (0..frames).map(|_| palette[r.random_range(0..3)]).collect();
    Harmonization::new(2.0, notes, chords)
}

#[allow(clippy::needless_range_loop)]
fn centroid(tones: &[u8]) -> [f64; 6] {
    use std::f64::consts::PI;
    let mut phi = [[0.0; 12]; 6];
    for l in 0..12 {
        let l_f = l as f64;
        phi[0][l] = (l_f * 7.0 * PI / 6.0).sin();
        phi[1][l] = (l_f * 7.0 * PI / 6.0).cos();
        phi[2][l] = (l_f * 3.0 * PI / 2.0).sin();
        phi[3][l] = (l_f * 3.0 * PI / 2.0).cos();
        phi[4][l] = 0.5 * (l_f * 2.0 * PI / 3.0).sin();
        phi[5][l] = 0.5 * (l_f * 2.0 * PI / 3.0).cos();
    }
    let mut out = [0.0; 6];
    for (d, row) in phi.iter().enumerate() {
        out[d] = tones.iter().map(|&t| row[t as usize]).sum::<f64>() / tones.len() as f64;
    }
    out
}

fn dist(a: [f64; 6], b: [f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn tones(c: ChordIndex) -> Vec<u8> {
    let root = (c.value() / 8) as u8;
    let iv: &[u8] = match c.value() % 8 {
        0 => &[0, 4, 7],
        1 => &[0, 3, 7],
        2 => &[0, 4, 8],
        3 => &[0, 3, 6],
        4 => &[0, 5, 7],
        5 => &[0, 4, 7, 11],
        6 => &[0, 3, 7, 10],
        _ => &[0, 4, 7, 10],
    };
    iv.iter().map(|i| (root + i) % 12).collect()
}

#[derive(Debug)]
pub struct OracleMetrics {
    pub che: f64,
    pub cc: f64,
    pub ctd: Option<f64>,
    pub ctnctr: Option<f64>,
    pub pcs: Option<f64>,
    pub mctd: Option<f64>,
}

/// Brute-force metrics: chord statistics by direct counting, note metrics by
/// walking the melody one grid tick at a time.
pub fn oracle_metrics(h: &Harmonization) -> OracleMetrics {
    let t_len = h.chords.len();
    let mut counts = std::collections::HashMap::new();
    for c in &h.chords {
        *counts.entry(c.value()).or_insert(0usize) += 1;
    }
    let che = -counts
        .values()
        .map(|&n| {
            let p = n as f64 / t_len as f64;
            p * p.ln()
        })
        .sum::<f64>();
    let ctd = (t_len >= 2).then(|| {
        (1..t_len)
            .map(|t| dist(centroid(&tones(h.chords[t - 1])), centroid(&tones(h.chords[t]))))
            .sum::<f64>()
            / (t_len - 1) as f64
    });

    let frame_ticks = (h.frame_beats * TICKS_PER_BEAT as f64).round() as usize;
    let (mut n_c, mut n_n, mut n_p) = (0.0, 0.0, 0.0);
    let (mut pcs_sum, mut pcs_w) = (0.0, 0.0);
    let (mut m_sum, mut m_w) = (0.0, 0.0);
    for tick in 0..t_len * frame_ticks {
        let beat = tick as f64 / TICKS_PER_BEAT as f64;
        let Some(idx) = h.notes.iter().position(|n| n.onset <= beat && beat < n.onset + n.duration) else {
            continue;
        };
        let note = &h.notes[idx];
        let chord = h.chords[tick / frame_ticks];
        let ct = tones(chord);
        let pc = note.midi % 12;
        if ct.contains(&pc) {
            n_c += 1.0;
        } else {
            n_n += 1.0;
            if let Some(next) = h.notes.get(idx + 1) {
                if (next.midi as i32 - note.midi as i32).abs() <= 2 {
                    n_p += 1.0;
                }
            }
        }
        for &t in &ct {
            let iv = (pc + 12 - t) % 12;
            pcs_sum += if [0, 3, 4, 7, 8, 9].contains(&iv) {
                1.0
            } else if iv == 5 {
                0.0
            } else {
                -1.0
            };
            pcs_w += 1.0;
        }
        m_sum += dist(centroid(&[pc]), centroid(&ct));
        m_w += 1.0;
    }
    let any = n_c + n_n > 0.0;
    OracleMetrics {
        che,
        cc: counts.len() as f64,
        ctd,
        ctnctr: any.then(|| (n_c + n_p) / (n_c + n_n)),
        pcs: any.then(|| pcs_sum / pcs_w),
        mctd: any.then(|| m_sum / m_w),
    }
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        _ => false,
    }
}

/// Frame sequences straight from the synthetic generator.
pub fn synthetic_sequences(pieces: usize, seed: u64) -> (Vec<FrameSequence>, Vec<FrameSequence>, mharm::leadsheet::CorpusStats) {
    let sheets = mharm::synth::synthetic_corpus(&mharm::synth::SynthConfig {
        pieces,
        seed,
        ..Default::default()
    });
    let p = mharm::leadsheet::prepare_corpus(&sheets, 0.8, seed).unwrap();
    (p.train, p.test, p.stats)
}
