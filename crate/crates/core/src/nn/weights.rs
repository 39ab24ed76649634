use serde::{Deserialize, Serialize};

/// Smoothing constant added to every class count.
pub const COUNT_SMOOTHING: f64 = 1000.0;

/// Per-class loss weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassWeights(Vec<f64>);

impl ClassWeights {
    /// Inverse smoothed class frequency, scaled so the weights average 1:
    /// `w_s = S · (1/(1000 + n_s)) / Σ_s' 1/(1000 + n_s')`.
    ///
    /// Evaluated as `S / Σ_s' (1000 + n_s) / (1000 + n_s')` so that equal
    /// counts give exactly 1.
    pub fn from_counts(counts: &[u64]) -> Self {
        let smoothed: Vec<f64> = counts.iter().map(|&n| COUNT_SMOOTHING + n as f64).collect();
        let classes = counts.len() as f64;
        ClassWeights(
            smoothed
                .iter()
                .map(|&own| classes / smoothed.iter().map(|&other| own / other).sum::<f64>())
                .collect(),
        )
    }

    pub fn uniform(classes: usize) -> Self {
        ClassWeights(vec![1.0; classes])
    }

    pub fn from_vec(w: Vec<f64>) -> Self {
        ClassWeights(w)
    }

    pub fn get(&self, class: usize) -> f64 {
        self.0[class]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_uniform(&self) -> bool {
        self.0.iter().all(|&w| w == 1.0)
    }
}

pub fn class_weights(counts: &[u64]) -> ClassWeights {
    ClassWeights::from_counts(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_counts_give_unit_weights() {
        for n in [0, 5, 1_000_000] {
            let w = class_weights(&[n; 96]);
            assert!(w.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn two_class_hand_evaluation() {
        let w = class_weights(&[0, 1000]);
        assert!((w.get(0) - 4.0 / 3.0).abs() < 1e-15);
        assert!((w.get(1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rarer_is_heavier() {
        let w = class_weights(&[3, 10, 10, 2000]);
        assert!(w.get(0) > w.get(1));
        assert_eq!(w.get(1), w.get(2));
        assert!(w.get(2) > w.get(3));
    }
}
