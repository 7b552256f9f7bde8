//! Noise spectra, sampled spectra on a uniform grid over `[-pi, pi)`, and the
//! log-spectral integral `(1/2pi) int log s(omega) d omega`.
//!
//! The integral uses the trapezoid rule on the periodic grid, which reduces
//! to the sample mean and converges geometrically for spectra that are
//! analytic on the unit circle.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{ClosedLoop, TransferFunction, STABILITY_MARGIN};

pub const DEFAULT_GRID_POINTS: usize = 4096;
pub const MIN_GRID_POINTS: usize = 64;

/// Shaping filters must keep `|G| > 1e-9` on the grid.
const SHAPING_FLOOR: f64 = 1e-9;
const DIVISION_FLOOR: f64 = 1e-300;
const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Colored,
}

/// Stationary Gaussian source: white with variance `sigma^2`, or white
/// noise of that variance driven through a stable shaping filter `G`.
///
/// A variance of zero describes an absent source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNoiseSpec", into = "RawNoiseSpec")]
pub struct NoiseSpec {
    kind: NoiseKind,
    variance: f64,
    shaping: Option<TransferFunction>,
}

/// Wire form: `{kind, variance, shaping?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNoiseSpec {
    pub kind: NoiseKind,
    pub variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shaping: Option<TransferFunction>,
}

impl TryFrom<RawNoiseSpec> for NoiseSpec {
    type Error = Error;

    fn try_from(raw: RawNoiseSpec) -> Result<Self> {
        match (raw.kind, raw.shaping) {
            (NoiseKind::White, None) => NoiseSpec::white(raw.variance),
            (NoiseKind::White, Some(_)) => Err(Error::InvalidInput(
                "white noise takes no shaping filter".into(),
            )),
            (NoiseKind::Colored, Some(g)) => NoiseSpec::colored(raw.variance, g),
            (NoiseKind::Colored, None) => Err(Error::InvalidInput(
                "colored noise needs a shaping filter".into(),
            )),
        }
    }
}

impl From<NoiseSpec> for RawNoiseSpec {
    fn from(spec: NoiseSpec) -> Self {
        RawNoiseSpec {
            kind: spec.kind,
            variance: spec.variance,
            shaping: spec.shaping,
        }
    }
}

impl NoiseSpec {
    pub fn white(variance: f64) -> Result<Self> {
        check_variance(variance)?;
        Ok(NoiseSpec {
            kind: NoiseKind::White,
            variance,
            shaping: None,
        })
    }

    pub fn colored(variance: f64, shaping: TransferFunction) -> Result<Self> {
        check_variance(variance)?;
        if let Some(p) = shaping
            .poles()
            .iter()
            .find(|p| p.norm() >= 1.0 - STABILITY_MARGIN)
        {
            return Err(Error::InvalidInput(format!(
                "shaping filter pole {p} is not strictly inside the unit circle"
            )));
        }
        if let Some(z) = shaping
            .zeros()
            .iter()
            .find(|z| (z.norm() - 1.0).abs() <= SHAPING_FLOOR)
        {
            return Err(Error::InvalidInput(format!(
                "shaping filter zero {z} lies on the unit circle"
            )));
        }
        if shaping.is_zero() {
            return Err(Error::InvalidInput(
                "shaping filter is identically zero".into(),
            ));
        }
        Ok(NoiseSpec {
            kind: NoiseKind::Colored,
            variance,
            shaping: Some(shaping),
        })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn shaping(&self) -> Option<&TransferFunction> {
        self.shaping.as_ref()
    }

    /// Same shape, different driving variance.
    pub fn with_variance(&self, variance: f64) -> Result<Self> {
        check_variance(variance)?;
        Ok(NoiseSpec {
            variance,
            ..self.clone()
        })
    }

    pub fn psd_at(&self, omega: f64) -> Result<f64> {
        match &self.shaping {
            None => Ok(self.variance),
            Some(g) => {
                let h = g.freq_response(omega)?;
                if h.norm() <= SHAPING_FLOOR {
                    return Err(Error::Singularity { omega });
                }
                Ok(h.norm_sqr() * self.variance)
            }
        }
    }
}

fn check_variance(v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidInput(format!(
            "noise variance must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}

/// Uniform samples `omega_k = -pi + 2 pi k / n`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    n_points: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid {
            n_points: DEFAULT_GRID_POINTS,
        }
    }
}

impl FrequencyGrid {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < MIN_GRID_POINTS || !n_points.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "grid size must be a power of two >= {MIN_GRID_POINTS}, got {n_points}"
            )));
        }
        Ok(FrequencyGrid { n_points })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n_points as f64
    }

    pub fn omega(&self, k: usize) -> f64 {
        -PI + self.spacing() * k as f64
    }

    pub fn omegas(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.omega(k))
    }

    /// Index of `-omega_k` (with `-(-pi)` wrapped to `-pi`).
    pub fn mirror(&self, k: usize) -> usize {
        (self.n_points - k) % self.n_points
    }

    pub fn refined(&self, factor: usize) -> FrequencyGrid {
        FrequencyGrid {
            n_points: self.n_points * factor,
        }
    }
}

/// A spectrum sampled on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSamples {
    grid: FrequencyGrid,
    values: Vec<f64>,
}

impl SpectrumSamples {
    /// Values must be finite, nonnegative and even in omega.
    pub fn new(grid: FrequencyGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidInput(format!(
                "expected {} spectrum samples, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "spectrum value {v} at omega = {} is not a finite nonnegative number",
                grid.omega(k)
            )));
        }
        let peak = values.iter().fold(0.0f64, |m, v| m.max(*v));
        for k in 0..values.len() {
            let (a, b) = (values[k], values[grid.mirror(k)]);
            let scale = a.max(b).max(1e-12 * peak);
            if (a - b).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "spectrum is not even: S({}) = {a}, S({}) = {b}",
                    grid.omega(k),
                    -grid.omega(k)
                )));
            }
        }
        Ok(SpectrumSamples { grid, values })
    }

    pub fn from_fn(grid: FrequencyGrid, mut f: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        let values = grid.omegas().map(&mut f).collect::<Result<Vec<_>>>()?;
        SpectrumSamples::new(grid, values)
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mean over the grid, i.e. `(1/2pi) int s d omega`: the signal power.
    pub fn mean_power(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// CSV with header `omega,value`, one row per grid point.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "omega,value")?;
        for (omega, v) in self.grid.omegas().zip(&self.values) {
            writeln!(w, "{omega},{v}")?;
        }
        Ok(())
    }
}

/// PSD of a noise source on the grid.
pub fn noise_psd(spec: &NoiseSpec, grid: FrequencyGrid) -> Result<SpectrumSamples> {
    SpectrumSamples::from_fn(grid, |w| spec.psd_at(w))
}

/// `S_Y = |F_wy|^2 S_W + |F_vy|^2 S_V`, pointwise.
pub fn output_psd(
    cl: &ClosedLoop,
    sw: &SpectrumSamples,
    sv: &SpectrumSamples,
) -> Result<SpectrumSamples> {
    if !cl.is_stable {
        return Err(Error::Unstable {
            poles: cl.closed_loop_poles.clone(),
        });
    }
    if sw.grid != sv.grid {
        return Err(Error::InvalidInput(format!(
            "spectra on different grids ({} vs {} points)",
            sw.grid.n_points(),
            sv.grid.n_points()
        )));
    }
    let grid = sw.grid;
    let values = grid
        .omegas()
        .zip(sw.values.iter().zip(&sv.values))
        .map(|(w, (&s_w, &s_v))| Ok(cl.f_wy.gain_sq(w)? * s_w + cl.f_vy.gain_sq(w)? * s_v))
        .collect::<Result<Vec<_>>>()?;
    SpectrumSamples::new(grid, values)
}

/// `sqrt(S_a / S_b)`, pointwise.
pub fn sensitivity_ratio(sa: &SpectrumSamples, sb: &SpectrumSamples) -> Result<SpectrumSamples> {
    if sa.grid != sb.grid {
        return Err(Error::InvalidInput("spectra on different grids".into()));
    }
    let grid = sa.grid;
    let values = sa
        .values
        .iter()
        .zip(&sb.values)
        .enumerate()
        .map(|(k, (&a, &b))| {
            if b <= DIVISION_FLOOR {
                Err(Error::DivisionDomain {
                    omega: grid.omega(k),
                })
            } else {
                Ok((a / b).sqrt())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    SpectrumSamples::new(grid, values)
}

/// `(1/2pi) int_{-pi}^{pi} ln s(omega) d omega` by the periodic trapezoid
/// rule. Summation runs left to right over ascending omega.
pub fn log_integral(s: &SpectrumSamples) -> Result<f64> {
    mean_log(s.grid, &s.values)
}

fn mean_log(grid: FrequencyGrid, values: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (k, &v) in values.iter().enumerate() {
        if v.is_nan() || v <= 0.0 {
            return Err(Error::LogDomain {
                omega: grid.omega(k),
                value: v,
            });
        }
        acc += v.ln();
    }
    Ok(acc / values.len() as f64)
}

/// A log-integral together with its doubled-grid estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogIntegral {
    pub value: f64,
    pub doubled: f64,
    /// `|I(2n) - I(n)|`
    pub convergence_estimate: f64,
    pub grid_points: usize,
}

/// Log-integral of a spectrum given as a function of omega. Evaluates on the
/// doubled grid, whose even samples are exactly the base grid.
pub fn log_integral_fn(
    grid: FrequencyGrid,
    f: impl FnMut(f64) -> Result<f64>,
) -> Result<LogIntegral> {
    let fine = SpectrumSamples::from_fn(grid.refined(2), f)?;
    let coarse: Vec<f64> = fine.values.iter().step_by(2).copied().collect();
    let value = mean_log(grid, &coarse)?;
    let doubled = log_integral(&fine)?;
    Ok(LogIntegral {
        value,
        doubled,
        convergence_estimate: (doubled - value).abs(),
        grid_points: grid.n_points(),
    })
}
