use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::LstmDirection;
use super::{INPUT_WIDTH, NUM_CHORDS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    /// Hidden units per LSTM direction.
    pub hidden: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            hidden: 128,
            dropout: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub fwd: LstmDirection,
    pub bwd: LstmDirection,
}

impl BiLstm {
    fn zeros(input: usize, hidden: usize) -> Self {
        BiLstm {
            fwd: LstmDirection::zeros(input, hidden),
            bwd: LstmDirection::zeros(input, hidden),
        }
    }
}

/// Weights of the chord model: two bidirectional LSTM layers and a dense
/// head over `[layer-2 output | model input]`.
///
/// The same struct doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hyper: Hyper,
    pub lstm1: BiLstm,
    pub lstm2: BiLstm,
    /// 96 x (2H + 109).
    pub fc_w: Array2<f64>,
    pub fc_b: Array1<f64>,
}

impl ModelParams {
    pub fn zeros(hyper: Hyper) -> Self {
        let h = hyper.hidden;
        ModelParams {
            hyper,
            lstm1: BiLstm::zeros(INPUT_WIDTH, h),
            lstm2: BiLstm::zeros(2 * h, h),
            fc_w: Array2::zeros((NUM_CHORDS, 2 * h + INPUT_WIDTH)),
            fc_b: Array1::zeros(NUM_CHORDS),
        }
    }

    /// Seeded random initialization. Values are rounded to single precision
    /// so that a checkpoint reproduces them exactly.
    pub fn init(hyper: Hyper) -> Self {
        let h = hyper.hidden;
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let lstm1 = BiLstm {
            fwd: LstmDirection::init(INPUT_WIDTH, h, &mut rng),
            bwd: LstmDirection::init(INPUT_WIDTH, h, &mut rng),
        };
        let lstm2 = BiLstm {
            fwd: LstmDirection::init(2 * h, h, &mut rng),
            bwd: LstmDirection::init(2 * h, h, &mut rng),
        };
        let fan_in = 2 * h + INPUT_WIDTH;
        let k = 1.0 / (fan_in as f64).sqrt();
        let mut fc_w = Array2::zeros((NUM_CHORDS, fan_in));
        fc_w.mapv_inplace(|_: f64| rand::Rng::random_range(&mut rng, -k..=k));
        let fc_b = Array1::from_shape_fn(NUM_CHORDS, |_| rand::Rng::random_range(&mut rng, -k..=k));
        let mut p = ModelParams {
            hyper,
            lstm1,
            lstm2,
            fc_w,
            fc_b,
        };
        p.round_to_f32();
        p
    }

    pub fn hidden(&self) -> usize {
        self.hyper.hidden
    }

    /// Tensor names and shapes in serialization order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        self.named_slices()
            .into_iter()
            .zip(self.shapes())
            .map(|((name, _), shape)| (name, shape))
            .collect()
    }

    fn shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for layer in [&self.lstm1, &self.lstm2] {
            for d in [&layer.fwd, &layer.bwd] {
                out.push(d.w_in.shape().to_vec());
                out.push(d.w_rec.shape().to_vec());
                out.push(d.bias.shape().to_vec());
            }
        }
        out.push(self.fc_w.shape().to_vec());
        out.push(self.fc_b.shape().to_vec());
        out
    }

    /// Flat views of every tensor, in serialization order.
    pub fn named_slices(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (lname, layer) in [("lstm1", &self.lstm1), ("lstm2", &self.lstm2)] {
            for (dname, d) in [("fwd", &layer.fwd), ("bwd", &layer.bwd)] {
                out.push((format!("{lname}.{dname}.w_in"), d.w_in.as_slice().unwrap()));
                out.push((format!("{lname}.{dname}.w_rec"), d.w_rec.as_slice().unwrap()));
                out.push((format!("{lname}.{dname}.bias"), d.bias.as_slice().unwrap()));
            }
        }
        out.push(("fc.weight".into(), self.fc_w.as_slice().unwrap()));
        out.push(("fc.bias".into(), self.fc_b.as_slice().unwrap()));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in [&mut self.lstm1, &mut self.lstm2] {
            for d in [&mut layer.fwd, &mut layer.bwd] {
                out.push(d.w_in.as_slice_mut().unwrap());
                out.push(d.w_rec.as_slice_mut().unwrap());
                out.push(d.bias.as_slice_mut().unwrap());
            }
        }
        out.push(self.fc_w.as_slice_mut().unwrap());
        out.push(self.fc_b.as_slice_mut().unwrap());
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_slices().iter().map(|(_, s)| s.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(self.hyper)
    }

    pub fn is_finite(&self) -> bool {
        self.named_slices()
            .iter()
            .all(|(_, s)| s.iter().all(|v| v.is_finite()))
    }

    pub fn round_to_f32(&mut self) {
        for s in self.slices_mut() {
            for v in s {
                *v = *v as f32 as f64;
            }
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (dst, (_, src)) in self.slices_mut().into_iter().zip(other.named_slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            for v in s {
                *v *= factor;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.named_slices()
            .iter()
            .flat_map(|(_, s)| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Checks that two parameter sets have identical shapes.
    pub fn check_compatible(&self, other: &ModelParams) -> Result<()> {
        if self.shapes() != other.shapes() {
            return Err(Error::domain("parameter shapes differ"));
        }
        Ok(())
    }
}
