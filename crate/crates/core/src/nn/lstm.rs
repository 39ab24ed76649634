//! One direction of an LSTM layer with a hand-written backward pass.
//!
//! Gate pre-activations are stacked `[input, forget, cell, output]` along the
//! first axis of `w_in` (4H x D), `w_rec` (4H x H) and `bias` (4H).

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    pub w_in: Array2<f64>,
    pub w_rec: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Activations kept for the backward pass. Rows are indexed by time step,
/// not by processing order.
#[derive(Debug, Clone)]
pub struct LstmCache {
    reverse: bool,
    /// Post-activation gates (T x 4H).
    gates: Array2<f64>,
    /// Cell state (T x H).
    cell: Array2<f64>,
    /// tanh of the cell state (T x H).
    cell_tanh: Array2<f64>,
    /// Hidden output (T x H).
    hidden: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub w_in: Array2<f64>,
    pub w_rec: Array2<f64>,
    pub bias: Array1<f64>,
    /// Gradient with respect to the layer input (T x D).
    pub input: Array2<f64>,
}

impl LstmDirection {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmDirection {
            w_in: Array2::zeros((4 * hidden, input)),
            w_rec: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    /// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, forget bias 1.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut d = Self::zeros(input, hidden);
        let k_in = 1.0 / (input as f64).sqrt();
        let k_rec = 1.0 / (hidden as f64).sqrt();
        d.w_in.mapv_inplace(|_| rng.random_range(-k_in..=k_in));
        d.w_rec.mapv_inplace(|_| rng.random_range(-k_rec..=k_rec));
        d.bias.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        d
    }

    pub fn hidden(&self) -> usize {
        self.w_rec.ncols()
    }

    pub fn forward(&self, x: ArrayView2<f64>, reverse: bool) -> LstmCache {
        let t_len = x.nrows();
        let h = self.hidden();
        let pre = x.dot(&self.w_in.t()) + &self.bias;
        let mut gates = Array2::zeros((t_len, 4 * h));
        let mut cell = Array2::zeros((t_len, h));
        let mut cell_tanh = Array2::zeros((t_len, h));
        let mut hidden = Array2::zeros((t_len, h));
        let mut h_prev = Array1::<f64>::zeros(h);
        let mut c_prev = Array1::<f64>::zeros(h);
        for step in 0..t_len {
            let t = if reverse { t_len - 1 - step } else { step };
            let z = &pre.row(t) + &self.w_rec.dot(&h_prev);
            let mut g = gates.row_mut(t);
            for j in 0..h {
                g[j] = sigmoid(z[j]);
                g[h + j] = sigmoid(z[h + j]);
                g[2 * h + j] = z[2 * h + j].tanh();
                g[3 * h + j] = sigmoid(z[3 * h + j]);
            }
            for j in 0..h {
                let c = g[h + j] * c_prev[j] + g[j] * g[2 * h + j];
                let ct = c.tanh();
                cell[[t, j]] = c;
                cell_tanh[[t, j]] = ct;
                hidden[[t, j]] = g[3 * h + j] * ct;
            }
            h_prev.assign(&hidden.row(t));
            c_prev.assign(&cell.row(t));
        }
        LstmCache {
            reverse,
            gates,
            cell,
            cell_tanh,
            hidden,
        }
    }

    /// Backpropagates `d_hidden` (T x H) through the sequence.
    pub fn backward(&self, x: ArrayView2<f64>, cache: &LstmCache, d_hidden: ArrayView2<f64>) -> LstmGrads {
        let t_len = x.nrows();
        let h = self.hidden();
        let mut d_pre = Array2::<f64>::zeros((t_len, 4 * h));
        let mut d_w_rec = Array2::<f64>::zeros((4 * h, h));
        let mut dh_next = Array1::<f64>::zeros(h);
        let mut dc_next = Array1::<f64>::zeros(h);
        let zeros = Array1::<f64>::zeros(h);
        for step in (0..t_len).rev() {
            let t = if cache.reverse { t_len - 1 - step } else { step };
            let prev = if step == 0 {
                None
            } else if cache.reverse {
                Some(t + 1)
            } else {
                Some(t - 1)
            };
            let c_prev = prev.map_or(zeros.view(), |p| cache.cell.row(p));
            let h_prev = prev.map_or(zeros.view(), |p| cache.hidden.row(p));
            let g = cache.gates.row(t);
            let ct = cache.cell_tanh.row(t);
            let mut dz = d_pre.row_mut(t);
            for j in 0..h {
                let (i_g, f_g, c_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let dh = d_hidden[[t, j]] + dh_next[j];
                let d_o = dh * ct[j];
                let dc = dh * o_g * (1.0 - ct[j] * ct[j]) + dc_next[j];
                dz[j] = dc * c_g * i_g * (1.0 - i_g);
                dz[h + j] = dc * c_prev[j] * f_g * (1.0 - f_g);
                dz[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
                dz[3 * h + j] = d_o * o_g * (1.0 - o_g);
                dc_next[j] = dc * f_g;
            }
            let dz = d_pre.row(t);
            Zip::from(d_w_rec.rows_mut()).and(&dz).for_each(|mut row, &dzi| {
                row.scaled_add(dzi, &h_prev);
            });
            dh_next = self.w_rec.t().dot(&dz);
        }
        LstmGrads {
            w_in: d_pre.t().dot(&x).as_standard_layout().into_owned(),
            w_rec: d_w_rec,
            bias: d_pre.sum_axis(Axis(0)),
            input: d_pre.dot(&self.w_in),
        }
    }
}

impl LstmCache {
    pub fn hidden(&self) -> ArrayView2<'_, f64> {
        self.hidden.view()
    }
}
