use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A frequency response was requested at a unit-circle pole.
    #[error("singular frequency response at omega = {omega}")]
    Singularity { omega: f64 },

    #[error("degenerate loop: 1 - L is identically zero")]
    DegenerateLoop,

    #[error("loop is not stabilizing; offending closed-loop poles: {}", format_poles(.poles))]
    Unstable { poles: Vec<Complex64> },

    #[error("loop gain P*K*H is not strictly proper (feedthrough {feedthrough})")]
    NotStrictlyProper { feedthrough: f64 },

    #[error("division by a vanishing spectrum at omega = {omega}")]
    DivisionDomain { omega: f64 },

    #[error("log of non-positive spectrum value {value} at omega = {omega}")]
    LogDomain { omega: f64, value: f64 },

    #[error("simulation diverged at sample {step} (|value| = {value:e})")]
    Divergence { step: usize, value: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn format_poles(poles: &[Complex64]) -> String {
    poles
        .iter()
        .map(|p| {
            if p.im == 0.0 {
                format!("{}", p.re)
            } else {
                format!("{}{:+}i", p.re, p.im)
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}
