use super::params::ModelParams;
use crate::error::Result;

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: ModelParams,
    second: ModelParams,
}

impl AdamState {
    pub const DEFAULT_LR: f64 = 0.005;

    pub fn new(params: &ModelParams, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: params.zeros_like(),
            second: params.zeros_like(),
        }
    }
}

pub fn adam_step(params: &mut ModelParams, grads: &ModelParams, state: &mut AdamState) -> Result<()> {
    params.check_compatible(grads)?;
    params.check_compatible(&state.first)?;
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    let grads = grads.named_slices();
    let tensors = params
        .slices_mut()
        .into_iter()
        .zip(state.first.slices_mut())
        .zip(state.second.slices_mut())
        .zip(grads);
    for (((p, m), v), (_, g)) in tensors {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Hyper;

    fn tiny() -> ModelParams {
        ModelParams::init(Hyper { hidden: 2, dropout: 0.0, seed: 9 })
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = tiny();
        let before = p.clone();
        let g = p.zeros_like();
        let mut st = AdamState::new(&p, AdamState::DEFAULT_LR);
        adam_step(&mut p, &g, &mut st).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2 on step 1, so the update is lr * g/(|g| + eps)
        let mut p = tiny();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.fc_b.fill(0.37);
        g.fc_w.fill(-2.5);
        let mut st = AdamState::new(&p, 0.005);
        adam_step(&mut p, &g, &mut st).unwrap();
        for (a, b) in p.fc_b.iter().zip(before.fc_b.iter()) {
            assert!(((b - a) - 0.005).abs() < 1e-9);
        }
        for (a, b) in p.fc_w.iter().zip(before.fc_w.iter()) {
            assert!(((a - b) - 0.005).abs() < 1e-9);
        }
        assert_eq!(p.lstm1, before.lstm1);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = tiny();
            let mut g = p.zeros_like();
            g.fc_w.fill(0.1);
            let mut st = AdamState::new(&p, 0.005);
            for _ in 0..5 {
                adam_step(&mut p, &g, &mut st).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
