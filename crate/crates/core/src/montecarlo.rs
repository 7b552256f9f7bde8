//! Time-domain simulation of the loop and a plug-in spectral estimate of the
//! directed-information rate.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::decomposition::{decompose, RateInputs};
use crate::error::{Error, Result};
use crate::lti::{LoopModel, TransferFunction};
use crate::spectral::{log_integral, sensitivity_ratio, FrequencyGrid, SpectrumSamples};

pub const DEFAULT_SAMPLES: usize = 1 << 17;
pub const DEFAULT_BURN_IN: usize = 4096;
pub const DEFAULT_TOLERANCE: f64 = 0.03;
pub const DIVERGENCE_LIMIT: f64 = 1e12;
/// Estimated PSD bins at or below zero are replaced by this value.
pub const PSD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub model: LoopModel,
    /// Total samples simulated, burn-in included.
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(model: LoopModel, n_samples: usize, burn_in: usize, seed: u64) -> Result<Self> {
        if n_samples <= burn_in {
            return Err(Error::InvalidInput(format!(
                "n_samples ({n_samples}) must exceed burn_in ({burn_in})"
            )));
        }
        Ok(SimulationConfig {
            model,
            n_samples,
            burn_in,
            seed,
        })
    }

    pub fn with_defaults(model: LoopModel, seed: u64) -> Self {
        SimulationConfig {
            model,
            n_samples: DEFAULT_SAMPLES,
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
    }
}

/// Post-burn-in signals of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub seed: u64,
    pub sample_count: usize,
}

impl TrajectorySet {
    /// CSV with header `t,w,v,z,y,u`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,w,v,z,y,u")?;
        for t in 0..self.sample_count {
            writeln!(
                out,
                "{t},{},{},{},{},{}",
                self.w[t], self.v[t], self.z[t], self.y[t], self.u[t]
            )?;
        }
        Ok(())
    }
}

/// Direct-form difference equation `a(d) y = b(d) x` with `a(0) = 1`.
struct Filter {
    b: Vec<f64>,
    a: Vec<f64>,
    inputs: VecDeque<f64>,
    outputs: VecDeque<f64>,
}

impl Filter {
    fn new(tf: &TransferFunction) -> Self {
        let b = tf.num().coeffs().to_vec();
        let a = tf.den().coeffs().to_vec();
        Filter {
            inputs: VecDeque::from(vec![0.0; b.len() - 1]),
            outputs: VecDeque::from(vec![0.0; a.len() - 1]),
            b,
            a,
        }
    }

    /// Seeds past outputs, most recent first.
    fn with_output_history(mut self, past: &[f64]) -> Self {
        for (slot, &x) in self.outputs.iter_mut().zip(past) {
            *slot = x;
        }
        self
    }

    fn feedthrough(&self) -> f64 {
        self.b[0]
    }

    /// Output contribution from past samples only.
    fn past(&self) -> f64 {
        let fir: f64 = self.b[1..]
            .iter()
            .zip(&self.inputs)
            .map(|(b, x)| b * x)
            .sum();
        let ar: f64 = self.a[1..]
            .iter()
            .zip(&self.outputs)
            .map(|(a, y)| a * y)
            .sum();
        fir - ar
    }

    fn record(&mut self, input: f64, output: f64) {
        if !self.inputs.is_empty() {
            self.inputs.pop_back();
            self.inputs.push_front(input);
        }
        if !self.outputs.is_empty() {
            self.outputs.pop_back();
            self.outputs.push_front(output);
        }
    }

    fn step(&mut self, input: f64) -> f64 {
        let out = self.b[0] * input + self.past();
        self.record(input, out);
        out
    }
}

/// Runs the loop `z = H (P u + v)`, `y = z + w`, `u = K y` sample by
/// sample. The noises are unit Gaussian innovations scaled by the standard
/// deviation and passed through the shaping filters; `w` and `v` draw from
/// one generator in a fixed interleaved order.
pub fn simulate_loop(cfg: &SimulationConfig) -> Result<TrajectorySet> {
    let model = &cfg.model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise_filter = |spec: &crate::spectral::NoiseSpec| {
        Filter::new(spec.shaping().unwrap_or(&TransferFunction::unity()))
    };
    let mut gw = noise_filter(model.channel_noise());
    let mut gv = noise_filter(model.output_disturbance());
    let sw = model.channel_noise().variance().sqrt();
    let sv = model.output_disturbance().variance().sqrt();

    let mut p = Filter::new(model.plant()).with_output_history(model.initial_state());
    let mut h = Filter::new(model.feedback_filter());
    let mut k = Filter::new(model.controller());
    let (p0, h0, k0) = (p.feedthrough(), h.feedthrough(), k.feedthrough());
    let loop_feedthrough = p0 * h0 * k0;
    if loop_feedthrough != 0.0 {
        return Err(Error::NotStrictlyProper {
            feedthrough: loop_feedthrough,
        });
    }

    let kept = cfg.n_samples - cfg.burn_in;
    let mut traj = TrajectorySet {
        y: Vec::with_capacity(kept),
        w: Vec::with_capacity(kept),
        v: Vec::with_capacity(kept),
        z: Vec::with_capacity(kept),
        u: Vec::with_capacity(kept),
        seed: cfg.seed,
        sample_count: kept,
    };

    for t in 0..cfg.n_samples {
        let ew: f64 = StandardNormal.sample(&mut rng);
        let ev: f64 = StandardNormal.sample(&mut rng);
        let w = gw.step(sw * ew);
        let v = gv.step(sv * ev);

        // Resolve the instantaneous part of the loop; p0 h0 k0 = 0.
        let (pp, hp, kp) = (p.past(), h.past(), k.past());
        let u = k0 * (h0 * (pp + v) + hp + w) + kp;
        let plant_out = p0 * u + pp;
        p.record(u, plant_out);
        let z = h.step(plant_out + v);
        let y = z + w;
        k.record(y, u);

        for x in [u, z, y] {
            if !x.is_finite() || x.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Divergence {
                    step: t,
                    value: x.abs(),
                });
            }
        }
        if t >= cfg.burn_in {
            traj.y.push(y);
            traj.w.push(w);
            traj.v.push(v);
            traj.z.push(z);
            traj.u.push(u);
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchParams {
    pub segment_length: usize,
    pub overlap_fraction: f64,
}

impl Default for WelchParams {
    fn default() -> Self {
        WelchParams {
            segment_length: 1024,
            overlap_fraction: 0.5,
        }
    }
}

impl WelchParams {
    pub fn new(segment_length: usize, overlap_fraction: f64) -> Result<Self> {
        let p = WelchParams {
            segment_length,
            overlap_fraction,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        FrequencyGrid::new(self.segment_length)?;
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::InvalidInput(format!(
                "overlap fraction must lie in [0, 1), got {}",
                self.overlap_fraction
            )));
        }
        Ok(())
    }

    fn hop(&self) -> usize {
        let overlap = (self.segment_length as f64 * self.overlap_fraction).floor() as usize;
        (self.segment_length - overlap).max(1)
    }
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Averaged Hann-windowed periodograms, returned on the
/// `FrequencyGrid` of size `segment_length`. Scaled so that the grid mean
/// of the estimate is the signal power.
pub fn welch_psd(x: &[f64], params: &WelchParams) -> Result<SpectrumSamples> {
    params.validate()?;
    let n = params.segment_length;
    if x.len() < n {
        return Err(Error::InvalidInput(format!(
            "sequence of length {} is shorter than one segment ({n})",
            x.len()
        )));
    }
    let window = hann(n);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut acc = vec![0.0; n];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut segments = 0usize;
    let mut start = 0;
    while start + n <= x.len() {
        for ((b, &s), &w) in buf.iter_mut().zip(&x[start..start + n]).zip(&window) {
            *b = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += params.hop();
    }
    let scale = 1.0 / (segments as f64 * window_power);
    let grid = FrequencyGrid::new(n)?;
    // grid index j sits at omega = -pi + 2 pi j / n, i.e. FFT bin j - n/2
    let raw: Vec<f64> = (0..n).map(|j| acc[(j + n / 2) % n] * scale).collect();
    let values = (0..n)
        .map(|j| 0.5 * (raw[j] + raw[grid.mirror(j)]))
        .collect();
    SpectrumSamples::new(grid, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalRate {
    pub rate: f64,
    /// Bins floored to [`PSD_FLOOR`] before taking logs.
    pub floored_bins: usize,
}

fn floor_bins(s: SpectrumSamples, count: &mut usize) -> Result<SpectrumSamples> {
    if s.values().iter().all(|&v| v > PSD_FLOOR) {
        return Ok(s);
    }
    let values = s
        .values()
        .iter()
        .map(|&v| {
            if v <= 0.0 {
                *count += 1;
                PSD_FLOOR
            } else {
                v.max(PSD_FLOOR)
            }
        })
        .collect();
    SpectrumSamples::new(s.grid(), values)
}

/// Same integral as the analytic path, on Welch estimates of `S_Y` and
/// `S_W`.
pub fn empirical_directed_info(
    traj: &TrajectorySet,
    params: &WelchParams,
) -> Result<EmpiricalRate> {
    let mut floored_bins = 0;
    let sy = floor_bins(welch_psd(&traj.y, params)?, &mut floored_bins)?;
    let sw = floor_bins(welch_psd(&traj.w, params)?, &mut floored_bins)?;
    if floored_bins > 0 {
        warn!("{floored_bins} estimated PSD bins were non-positive and floored");
    }
    let rate = log_integral(&sensitivity_ratio(&sy, &sw)?)?;
    Ok(EmpiricalRate { rate, floored_bins })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRecord {
    pub analytic_rate: f64,
    pub empirical_rate: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
    pub n_samples: usize,
    pub burn_in: usize,
    pub segment_length: usize,
    pub overlap_fraction: f64,
    pub grid_points: usize,
    pub floored_bins: usize,
}

/// Simulates, estimates, and compares against the analytic rate. The
/// simulation runs first so a non-stabilizing controller surfaces as a
/// divergence.
pub fn compare_report(
    cfg: &SimulationConfig,
    params: &WelchParams,
    grid: FrequencyGrid,
    tolerance: f64,
) -> Result<ComparisonRecord> {
    let traj = simulate_loop(cfg)?;
    let empirical = empirical_directed_info(&traj, params)?;
    let analytic = decompose(&RateInputs::new(cfg.model.clone(), grid))?;
    let abs_gap = (empirical.rate - analytic.total_rate).abs();
    let rel_gap = if analytic.total_rate != 0.0 {
        abs_gap / analytic.total_rate.abs()
    } else {
        f64::INFINITY
    };
    Ok(ComparisonRecord {
        analytic_rate: analytic.total_rate,
        empirical_rate: empirical.rate,
        abs_gap,
        rel_gap,
        tolerance,
        pass: abs_gap <= tolerance,
        seed: cfg.seed,
        n_samples: cfg.n_samples,
        burn_in: cfg.burn_in,
        segment_length: params.segment_length,
        overlap_fraction: params.overlap_fraction,
        grid_points: analytic.grid_points,
        floored_bins: empirical.floored_bins,
    })
}
