//! Melody harmonization with a masked bidirectional LSTM chord model.
//!
//! The crate covers the whole pipeline: the 96-chord vocabulary and its
//! tonal geometry ([`vocab`]), lead-sheet parsing and half-bar quantization
//! ([`leadsheet`]), the chord model with hand-written gradients ([`nn`]),
//! random-context training ([`train`]), annealed blocked Gibbs sampling with
//! pinned chords ([`sampler`]) and six objective metrics ([`metrics`]). [`synth`] generates small
//! synthetic corpora for tests and demos.

pub mod error;
pub mod leadsheet;
pub mod metrics;
pub mod nn;
pub mod sampler;
pub mod synth;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};

// The guide's chapters, compiled so their listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/vocabulary.md")]
    mod vocabulary {}
    #[doc = include_str!("../../../book/src/lead-sheets.md")]
    mod lead_sheets {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
