use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::lstm::LstmCache;
use super::params::{BiLstm, ModelParams};
use super::weights::ClassWeights;
use super::{INPUT_WIDTH, NUM_CHORDS};
use crate::error::{Error, Result};
use crate::vocab::{ChordIndex, PitchClassSet, NUM_PITCH_CLASSES};

/// Column offset of the chord context inside the assembled input.
const CHORD_OFFSET: usize = NUM_PITCH_CLASSES;
/// Column of the mask bit inside the assembled input.
const MASK_COLUMN: usize = NUM_PITCH_CLASSES + NUM_CHORDS;

/// Model input for one sequence.
///
/// `mask[t] == true` marks frame `t` as unknown: its chord-context row is
/// all zeros and the model is asked to predict it.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchInput {
    pub mask: Vec<bool>,
    /// `[melody (12) | chord context (96) | mask (1)]`, T x 109.
    pub assembled: Array2<f64>,
}

impl BatchInput {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn melody(&self) -> ArrayView2<'_, f64> {
        self.assembled.slice(s![.., ..CHORD_OFFSET])
    }

    pub fn chord_context(&self) -> ArrayView2<'_, f64> {
        self.assembled.slice(s![.., CHORD_OFFSET..MASK_COLUMN])
    }

    /// Time-reversed copy.
    pub fn reversed(&self) -> BatchInput {
        BatchInput {
            mask: self.mask.iter().rev().copied().collect(),
            assembled: self.assembled.slice(s![..;-1, ..]).to_owned(),
        }
    }
}

/// Builds the model input from melody presence sets, chord indices and a
/// mask. Chords at masked positions are ignored.
pub fn assemble_input(
    melody: &[PitchClassSet],
    chords: &[ChordIndex],
    mask: &[bool],
) -> Result<BatchInput> {
    let t_len = mask.len();
    if melody.len() != t_len || chords.len() != t_len {
        return Err(Error::domain(format!(
            "shape mismatch: melody {} frames, chords {}, mask {}",
            melody.len(),
            chords.len(),
            t_len
        )));
    }
    if t_len == 0 {
        return Err(Error::domain("empty sequence"));
    }
    let mut x = Array2::zeros((t_len, INPUT_WIDTH));
    for t in 0..t_len {
        for pc in melody[t].iter() {
            x[[t, pc.value() as usize]] = 1.0;
        }
        if mask[t] {
            x[[t, MASK_COLUMN]] = 1.0;
        } else {
            x[[t, CHORD_OFFSET + chords[t].value()]] = 1.0;
        }
    }
    Ok(BatchInput {
        mask: mask.to_vec(),
        assembled: x,
    })
}

/// Draws a training mask: a ratio `r ~ U(0, 1)`, then each frame is unknown
/// with probability `r`. Draws without any unknown frame are repeated.
pub fn make_training_mask<R: Rng>(len: usize, rng: &mut R) -> Vec<bool> {
    assert!(len >= 1, "mask length must be positive");
    loop {
        let ratio: f64 = rng.random();
        let mask: Vec<bool> = (0..len).map(|_| rng.random::<f64>() < ratio).collect();
        if mask.iter().any(|&m| m) {
            return mask;
        }
    }
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub logits: Array2<f64>,
    input: Array2<f64>,
    l1: (LstmCache, LstmCache),
    /// Layer-1 output after dropout (input of layer 2).
    l1_out: Array2<f64>,
    l2: (LstmCache, LstmCache),
    /// Final features `[layer-2 output after dropout | input]`.
    features: Array2<f64>,
    drop1: Option<Array2<f64>>,
    drop2: Option<Array2<f64>>,
}

fn check_finite(a: &Array2<f64>, layer: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical {
            layer: layer.to_string(),
        })
    }
}

fn bilstm_forward(layer: &BiLstm, x: ArrayView2<f64>) -> (LstmCache, LstmCache, Array2<f64>) {
    let f = layer.fwd.forward(x, false);
    let b = layer.bwd.forward(x, true);
    let out = concatenate(Axis(1), &[f.hidden(), b.hidden()]).expect("equal row counts");
    (f, b, out)
}

/// Inverted dropout mask: entries are 0 or `1 / (1 - rate)`.
fn dropout_mask(shape: (usize, usize), rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 - rate;
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
}

impl ModelParams {
    /// Runs the network. With `dropout_rng` set, dropout is applied to both
    /// LSTM layer outputs (training mode); otherwise it is an identity.
    pub fn forward(&self, input: &BatchInput, dropout_rng: Option<&mut ChaCha8Rng>) -> Result<ForwardPass> {
        let x = input.assembled.view();
        let rate = self.hyper.dropout;
        let mut rng = dropout_rng.filter(|_| rate > 0.0);

        let (f1, b1, mut out1) = bilstm_forward(&self.lstm1, x);
        check_finite(&out1, "lstm1")?;
        let drop1 = rng.as_deref_mut().map(|r| dropout_mask(out1.dim(), rate, r));
        if let Some(m) = &drop1 {
            out1 *= m;
        }

        let (f2, b2, mut out2) = bilstm_forward(&self.lstm2, out1.view());
        check_finite(&out2, "lstm2")?;
        let drop2 = rng.map(|r| dropout_mask(out2.dim(), rate, r));
        if let Some(m) = &drop2 {
            out2 *= m;
        }

        let features = concatenate(Axis(1), &[out2.view(), x]).expect("equal row counts");
        let logits = features.dot(&self.fc_w.t()) + &self.fc_b;
        check_finite(&logits, "fc")?;
        Ok(ForwardPass {
            logits,
            input: input.assembled.clone(),
            l1: (f1, b1),
            l1_out: out1,
            l2: (f2, b2),
            features,
            drop1,
            drop2,
        })
    }

    /// Gradients of [`masked_nll`] for the given forward pass.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        targets: &[ChordIndex],
        mask: &[bool],
        weights: &ClassWeights,
    ) -> Result<ModelParams> {
        let d_logits = masked_nll_grad(pass.logits.view(), targets, mask, weights)?;
        let h = self.hidden();
        let mut grads = self.zeros_like();

        grads.fc_w = d_logits.t().dot(&pass.features).as_standard_layout().into_owned();
        grads.fc_b = d_logits.sum_axis(Axis(0));
        let d_features = d_logits.dot(&self.fc_w);
        let mut d_out2 = d_features.slice(s![.., ..2 * h]).to_owned();
        if let Some(m) = &pass.drop2 {
            d_out2 *= m;
        }

        let d_out1_dropped = bilstm_backward(
            &self.lstm2,
            &mut grads.lstm2,
            pass.l1_out.view(),
            &pass.l2,
            d_out2.view(),
        );
        let mut d_out1 = d_out1_dropped;
        if let Some(m) = &pass.drop1 {
            d_out1 *= m;
        }
        bilstm_backward(&self.lstm1, &mut grads.lstm1, pass.input.view(), &pass.l1, d_out1.view());
        Ok(grads)
    }
}

fn bilstm_backward(
    layer: &BiLstm,
    grads: &mut BiLstm,
    x: ArrayView2<f64>,
    caches: &(LstmCache, LstmCache),
    d_out: ArrayView2<f64>,
) -> Array2<f64> {
    let h = layer.fwd.hidden();
    let gf = layer.fwd.backward(x, &caches.0, d_out.slice(s![.., ..h]));
    let gb = layer.bwd.backward(x, &caches.1, d_out.slice(s![.., h..]));
    grads.fwd.w_in = gf.w_in;
    grads.fwd.w_rec = gf.w_rec;
    grads.fwd.bias = gf.bias;
    grads.bwd.w_in = gb.w_in;
    grads.bwd.w_rec = gb.w_rec;
    grads.bwd.bias = gb.bias;
    gf.input + gb.input
}

/// Numerically stable softmax of one row.
pub fn softmax(row: ArrayView1<f64>) -> Array1<f64> {
    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exp = row.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

fn log_softmax_at(row: ArrayView1<f64>, target: usize) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = row.fold(0.0, |acc, &v| acc + (v - max).exp()).ln() + max;
    row[target] - lse
}

fn check_loss_args(logits: ArrayView2<f64>, targets: &[ChordIndex], mask: &[bool], weights: &ClassWeights) -> Result<usize> {
    if logits.nrows() != targets.len() || targets.len() != mask.len() {
        return Err(Error::domain("logits, targets and mask lengths differ"));
    }
    if weights.len() != logits.ncols() {
        return Err(Error::domain("class weight count does not match logits width"));
    }
    let unknown = mask.iter().filter(|&&m| m).count();
    if unknown == 0 {
        return Err(Error::domain("loss needs at least one masked position"));
    }
    Ok(unknown)
}

/// Class-weighted negative log-likelihood of the targets at masked
/// positions, divided by the number of masked positions.
pub fn masked_nll(logits: ArrayView2<f64>, targets: &[ChordIndex], mask: &[bool], weights: &ClassWeights) -> Result<f64> {
    let unknown = check_loss_args(logits, targets, mask, weights)?;
    let total: f64 = (0..mask.len())
        .filter(|&t| mask[t])
        .map(|t| {
            let s = targets[t].value();
            -weights.get(s) * log_softmax_at(logits.row(t), s)
        })
        .sum();
    Ok(total / unknown as f64)
}

fn masked_nll_grad(logits: ArrayView2<f64>, targets: &[ChordIndex], mask: &[bool], weights: &ClassWeights) -> Result<Array2<f64>> {
    let unknown = check_loss_args(logits, targets, mask, weights)?;
    let mut d = Array2::zeros(logits.dim());
    for t in (0..mask.len()).filter(|&t| mask[t]) {
        let s = targets[t].value();
        let scale = weights.get(s) / unknown as f64;
        let mut row = d.row_mut(t);
        row.assign(&(softmax(logits.row(t)) * scale));
        row[s] -= scale;
    }
    Ok(d)
}
