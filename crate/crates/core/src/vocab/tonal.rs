//! Tonal centroids: a 6-D embedding of pitch-class weightings onto the
//! circle of fifths, the circle of minor thirds and the circle of major
//! thirds. Pitch class `k` sits at angle `k·7π/6`, `k·3π/2` and `k·2π/3`
//! on the three circles, with radii 1, 1 and 0.5.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::NUM_PITCH_CLASSES;
use crate::error::{Error, Result};

/// Radii of the fifths, minor-thirds and major-thirds circles.
pub const TONAL_RADII: [f64; 3] = [1.0, 1.0, 0.5];

const ANGLE_STEPS: [f64; 3] = [7.0 * PI / 6.0, 3.0 * PI / 2.0, 2.0 * PI / 3.0];

/// Components are ordered (fifths sin, fifths cos, minor-thirds sin,
/// minor-thirds cos, major-thirds sin, major-thirds cos).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TonalCentroid(pub [f64; 6]);

impl TonalCentroid {
    pub fn components(&self) -> &[f64; 6] {
        &self.0
    }

    /// Equality up to the 1e-9 tolerance used throughout the metrics.
    pub fn approx_eq(&self, other: &TonalCentroid) -> bool {
        tonal_distance(self, other) <= 1e-9
    }
}

/// Weighted mean of the pitch-class positions, normalized by the L1 norm of
/// the weights. Weights must be nonnegative with at least one positive entry.
pub fn tonal_centroid(weights: &[f64; NUM_PITCH_CLASSES]) -> Result<TonalCentroid> {
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::domain("pitch-class weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::domain("tonal centroid of an empty pitch set is undefined"));
    }
    let mut out = [0.0; 6];
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (circle, (&radius, &step)) in TONAL_RADII.iter().zip(&ANGLE_STEPS).enumerate() {
            let angle = k as f64 * step;
            out[2 * circle] += w * radius * angle.sin();
            out[2 * circle + 1] += w * radius * angle.cos();
        }
    }
    for c in &mut out {
        *c /= total;
    }
    Ok(TonalCentroid(out))
}

/// Euclidean distance between two centroids.
pub fn tonal_distance(a: &TonalCentroid, b: &TonalCentroid) -> f64 {
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
