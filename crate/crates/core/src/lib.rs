//! Directed-information rate of the feedback channel in a discrete-time
//! linear loop with Gaussian channel noise and output disturbance.
//!
//! The rate is computed as a log-spectral integral, split into a Bode
//! sensitivity term and a disturbance-transmission term, and checked
//! against Monte Carlo simulation of the loop.

pub mod cli;
pub mod config;
pub mod decomposition;
pub mod error;
pub mod lti;
pub mod montecarlo;
pub mod poly;
pub mod spectral;
pub mod suite;

pub use config::{ConfigOptions, LoopConfigFile};
pub use decomposition::{decompose, DecompositionReport, LogBase, RateInputs};
pub use error::{Error, Result};
pub use lti::{
    close_loop, freq_response, is_stabilizing, ClosedLoop, LoopModel, StabilityReport,
    TransferFunction,
};
pub use poly::{poly_roots, Polynomial};
pub use spectral::{
    log_integral, noise_psd, output_psd, sensitivity_ratio, FrequencyGrid, NoiseKind, NoiseSpec,
    SpectrumSamples,
};

use num_complex::Complex64;
use serde::ser::{SerializeSeq, Serializer};

/// Complex lists serialize as `[[re, im], ...]`.
pub(crate) fn serialize_complex_list<S: Serializer>(
    values: &[Complex64],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(values.len()))?;
    for v in values {
        seq.serialize_element(&[v.re, v.im])?;
    }
    seq.end()
}
