//! Directed-information rate of the feedback channel and its split into a
//! sensitivity (control) term and a disturbance-transmission term.
//!
//! With `S_Y = |F_wy|^2 S_W + |F_vy|^2 S_V` the rate is
//!
//! ```text
//! I = (1/2pi) int ln sqrt(S_Y / S_W)
//!   = (1/2pi) int ln |F_wy|  +  (1/2pi) int 1/2 ln(1 + |F_vy|^2 S_V / (|F_wy|^2 S_W))
//! ```
//!
//! and since `F_vy / F_wy = H` the second integrand does not depend on the
//! controller. All rates are in nats per sample.

use std::f64::consts::{E, LN_2, PI};
use std::io::Write;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{close_loop, is_stabilizing, ClosedLoop, LoopModel, TransferFunction};
use crate::spectral::{
    log_integral, noise_psd, output_psd, sensitivity_ratio, FrequencyGrid, SpectrumSamples,
};

/// Samples below this trigger a ×4 grid refinement, then a hard error.
pub const NEAR_SINGULAR: f64 = 1e-12;
/// The two algebraic forms of the disturbance term must agree this closely.
pub const FORM_AGREEMENT_TOL: f64 = 1e-10;
/// Bode value checks.
pub const BODE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Nats,
    Bits,
}

impl LogBase {
    /// Converts a value in nats to this base.
    pub fn from_nats(self, x: f64) -> f64 {
        match self {
            LogBase::Nats => x,
            LogBase::Bits => x / LN_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateInputs {
    pub model: LoopModel,
    pub grid: FrequencyGrid,
}

impl RateInputs {
    pub fn new(model: LoopModel, grid: FrequencyGrid) -> Self {
        RateInputs { model, grid }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub total_rate: f64,
    pub control_term: f64,
    pub disturbance_term: f64,
    /// `total - control - disturbance`
    pub residual: f64,
    /// `sum ln max(1, |lambda|)` over plant poles.
    pub bode_analytic: f64,
    /// `sum max(0, Re lambda)` over plant poles: the pole-sum formula read
    /// literally, kept for comparison with `bode_analytic`.
    pub literal_pole_sum: f64,
    /// Set when the literal pole sum differs from `bode_analytic` by more
    /// than `1e-6`.
    pub literal_reading_differs: bool,
    /// `|disturbance(F-ratio form) - disturbance(|H|^2 form)|`
    pub disturbance_form_gap: f64,
    /// Grid actually used (after any near-singular refinement).
    pub grid_points: usize,
    /// `|total(2n) - total(n)|`
    pub convergence_estimate: f64,
    pub log_base: LogBase,
}

impl DecompositionReport {
    pub fn in_base(&self, base: LogBase) -> DecompositionReport {
        let to_nats = match self.log_base {
            LogBase::Nats => 1.0,
            LogBase::Bits => LN_2,
        };
        let c = |x: f64| base.from_nats(x * to_nats);
        DecompositionReport {
            total_rate: c(self.total_rate),
            control_term: c(self.control_term),
            disturbance_term: c(self.disturbance_term),
            residual: c(self.residual),
            bode_analytic: c(self.bode_analytic),
            literal_pole_sum: self.literal_pole_sum,
            disturbance_form_gap: c(self.disturbance_form_gap),
            convergence_estimate: c(self.convergence_estimate),
            log_base: base,
            ..self.clone()
        }
    }
}

/// `(1/2pi) int 1/2 ln(2 pi e s(omega)) d omega`
pub fn gaussian_entropy_rate(s: &SpectrumSamples) -> Result<f64> {
    Ok(0.5 * (2.0 * PI * E).ln() + 0.5 * log_integral(s)?)
}

fn require_stabilizing(model: &LoopModel) -> Result<ClosedLoop> {
    let report = is_stabilizing(model);
    if !report.stabilizing {
        return Err(Error::Unstable {
            poles: report.offending_poles,
        });
    }
    close_loop(model)
}

/// Per-frequency quantities for one loop on one grid.
struct Integrands {
    s_w: SpectrumSamples,
    s_y: SpectrumSamples,
    fwy_sq: Vec<f64>,
    fvy_sq: Vec<f64>,
    h_sq: Vec<f64>,
    s_v: Vec<f64>,
}

impl Integrands {
    fn compute(model: &LoopModel, cl: &ClosedLoop, grid: FrequencyGrid) -> Result<Self> {
        let s_w = noise_psd(model.channel_noise(), grid)?;
        let s_v = noise_psd(model.output_disturbance(), grid)?;
        let s_y = output_psd(cl, &s_w, &s_v)?;
        let mut fwy_sq = Vec::with_capacity(grid.n_points());
        let mut fvy_sq = Vec::with_capacity(grid.n_points());
        let mut h_sq = Vec::with_capacity(grid.n_points());
        for w in grid.omegas() {
            fwy_sq.push(cl.f_wy.gain_sq(w)?);
            fvy_sq.push(cl.f_vy.gain_sq(w)?);
            h_sq.push(model.feedback_filter().gain_sq(w)?);
        }
        Ok(Integrands {
            s_w,
            s_y,
            fwy_sq,
            fvy_sq,
            h_sq,
            s_v: s_v.values().to_vec(),
        })
    }

    /// Smallest sample among the spectra that enter a logarithm.
    fn min_sample(&self) -> (usize, f64) {
        let grid = self.s_w.grid();
        (0..grid.n_points())
            .map(|k| {
                let m = self.s_y.values()[k]
                    .min(self.s_w.values()[k])
                    .min(self.fwy_sq[k]);
                (k, m)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }

    fn grid(&self) -> FrequencyGrid {
        self.s_w.grid()
    }

    fn log_fwy(&self, k: usize) -> f64 {
        0.5 * self.fwy_sq[k].ln()
    }

    fn disturbance_f_form(&self, k: usize) -> f64 {
        let sw = self.s_w.values()[k];
        0.5 * (self.fvy_sq[k] * self.s_v[k] / (self.fwy_sq[k] * sw)).ln_1p()
    }

    fn disturbance_h_form(&self, k: usize) -> f64 {
        let sw = self.s_w.values()[k];
        0.5 * (self.h_sq[k] * self.s_v[k] / sw).ln_1p()
    }

    fn log_syw(&self, k: usize) -> f64 {
        0.5 * (self.s_y.values()[k] / self.s_w.values()[k]).ln()
    }

    fn mean(&self, f: impl Fn(&Self, usize) -> f64) -> f64 {
        let n = self.grid().n_points();
        (0..n).map(|k| f(self, k)).sum::<f64>() / n as f64
    }
}

/// Samples the loop on `grid`, refining ×4 once if a sample falls below
/// [`NEAR_SINGULAR`].
fn sample_loop(model: &LoopModel, cl: &ClosedLoop, grid: FrequencyGrid) -> Result<Integrands> {
    let first = Integrands::compute(model, cl, grid)?;
    let (k, m) = first.min_sample();
    if m >= NEAR_SINGULAR {
        return Ok(first);
    }
    let omega = grid.omega(k);
    warn!(
        "near-singular spectrum ({m:e} at omega = {omega}); refining grid to {} points",
        grid.n_points() * 4
    );
    let fine = Integrands::compute(model, cl, grid.refined(4))?;
    let (k, m) = fine.min_sample();
    if m < NEAR_SINGULAR {
        return Err(Error::LogDomain {
            omega: fine.grid().omega(k),
            value: m,
        });
    }
    Ok(fine)
}

fn rate_from(ints: &Integrands) -> Result<f64> {
    log_integral(&sensitivity_ratio(&ints.s_y, &ints.s_w)?)
}

/// `(1/2pi) int ln S_{Y,W}` with `S_{Y,W} = sqrt(S_Y / S_W)`.
pub fn directed_info_rate(inputs: &RateInputs) -> Result<f64> {
    let cl = require_stabilizing(&inputs.model)?;
    rate_from(&sample_loop(&inputs.model, &cl, inputs.grid)?)
}

/// Entropy-rate route to the same quantity: `h(Y) - h(W)`.
pub fn directed_info_rate_via_entropy(inputs: &RateInputs) -> Result<f64> {
    let cl = require_stabilizing(&inputs.model)?;
    let ints = sample_loop(&inputs.model, &cl, inputs.grid)?;
    Ok(gaussian_entropy_rate(&ints.s_y)? - gaussian_entropy_rate(&ints.s_w)?)
}

pub fn decompose(inputs: &RateInputs) -> Result<DecompositionReport> {
    let model = &inputs.model;
    let cl = require_stabilizing(model)?;
    let ints = sample_loop(model, &cl, inputs.grid)?;

    let total_rate = rate_from(&ints)?;
    let control_term = ints.mean(Integrands::log_fwy);
    let disturbance_term = ints.mean(Integrands::disturbance_f_form);
    let disturbance_h = ints.mean(Integrands::disturbance_h_form);
    let disturbance_form_gap = (disturbance_term - disturbance_h).abs();
    if disturbance_form_gap > FORM_AGREEMENT_TOL {
        return Err(Error::Consistency(format!(
            "disturbance term forms disagree: {disturbance_term} vs {disturbance_h}"
        )));
    }

    let doubled = Integrands::compute(model, &cl, ints.grid().refined(2))?;
    let convergence_estimate = (rate_from(&doubled)? - total_rate).abs();

    let bode_analytic = bode_term_analytic(model.plant());
    let literal_pole_sum = literal_pole_sum(model.plant());

    Ok(DecompositionReport {
        total_rate,
        control_term,
        disturbance_term,
        residual: total_rate - control_term - disturbance_term,
        bode_analytic,
        literal_pole_sum,
        literal_reading_differs: (literal_pole_sum - bode_analytic).abs() > BODE_TOL,
        disturbance_form_gap,
        grid_points: ints.grid().n_points(),
        convergence_estimate,
        log_base: LogBase::Nats,
    })
}

/// `sum ln max(1, |lambda_i|)` over the plant poles: the value of
/// `(1/2pi) int ln |S|` for a stabilized loop with strictly proper loop gain
/// when the controller and feedback filter contribute no unstable poles.
pub fn bode_term_analytic(plant: &TransferFunction) -> f64 {
    plant.poles().iter().map(|p| p.norm().max(1.0).ln()).sum()
}

fn literal_pole_sum(plant: &TransferFunction) -> f64 {
    plant.poles().iter().map(|p| p.re.max(0.0)).sum()
}

/// `1/2 ln(1 + sigma_v^2 / sigma_w^2)`
pub fn white_noise_disturbance_term(sigma_v2: f64, sigma_w2: f64) -> Result<f64> {
    if !sigma_w2.is_finite() || sigma_w2 <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "channel noise variance must be > 0, got {sigma_w2}"
        )));
    }
    if !sigma_v2.is_finite() || sigma_v2 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "disturbance variance must be >= 0, got {sigma_v2}"
        )));
    }
    Ok(0.5 * (sigma_v2 / sigma_w2).ln_1p())
}

pub const INDEPENDENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub disturbance_terms: Vec<f64>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Disturbance term of `model` under each controller in turn.
pub fn controller_independence_check(
    model: &LoopModel,
    controllers: &[TransferFunction],
    grid: FrequencyGrid,
) -> Result<IndependenceReport> {
    let mut terms = Vec::with_capacity(controllers.len());
    for (i, k) in controllers.iter().enumerate() {
        let m = model.with_controller(k.clone())?;
        let report = is_stabilizing(&m);
        if !report.stabilizing {
            return Err(Error::InvalidInput(format!(
                "controller #{i} ({:?} / {:?}) does not stabilize the loop: {}",
                k.num().coeffs(),
                k.den().coeffs(),
                Error::Unstable {
                    poles: report.offending_poles
                }
            )));
        }
        terms.push(decompose(&RateInputs::new(m, grid))?.disturbance_term);
    }
    let mut max_deviation = 0.0f64;
    for a in &terms {
        for b in &terms {
            max_deviation = max_deviation.max((a - b).abs());
        }
    }
    Ok(IndependenceReport {
        disturbance_terms: terms,
        max_deviation,
        pass: max_deviation < INDEPENDENCE_TOL,
    })
}

/// One row of the per-frequency integrand table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrandRow {
    pub omega: f64,
    pub log_syw: f64,
    pub log_fwy: f64,
    pub disturbance_integrand: f64,
}

/// Integrands whose grid means are the total, control and disturbance terms.
pub fn integrand_table(inputs: &RateInputs) -> Result<Vec<IntegrandRow>> {
    let cl = require_stabilizing(&inputs.model)?;
    let ints = sample_loop(&inputs.model, &cl, inputs.grid)?;
    let grid = ints.grid();
    Ok((0..grid.n_points())
        .map(|k| IntegrandRow {
            omega: grid.omega(k),
            log_syw: ints.log_syw(k),
            log_fwy: ints.log_fwy(k),
            disturbance_integrand: ints.disturbance_f_form(k),
        })
        .collect())
}

pub fn write_integrands_csv(rows: &[IntegrandRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "omega,log_Syw,log_Fwy,disturbance_integrand")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.omega, r.log_syw, r.log_fwy, r.disturbance_integrand
        )?;
    }
    Ok(())
}

/// Plant poles, for reports.
pub fn plant_poles(model: &LoopModel) -> Vec<Complex64> {
    model.plant().poles()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::NoiseSpec;

    const HALF_LN2: f64 = 0.5 * LN_2;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::default()
    }

    fn tf(num: &[f64], den: &[f64]) -> TransferFunction {
        TransferFunction::from_coeffs(num, den).unwrap()
    }

    fn white(v: f64) -> NoiseSpec {
        NoiseSpec::white(v).unwrap()
    }

    fn loop_of(p: TransferFunction, k: f64, sw: f64, sv: f64) -> RateInputs {
        RateInputs::new(
            LoopModel::new(
                p,
                TransferFunction::gain(k),
                TransferFunction::unity(),
                white(sw),
                white(sv),
            )
            .unwrap(),
            grid(),
        )
    }

    fn unstable_plant() -> TransferFunction {
        tf(&[0.0, 1.0], &[1.0, -2.0])
    }

    /// Independent quadrature oracle: midpoint rule on a fine grid, written
    /// directly against the frequency responses.
    fn oracle_log_abs(h: impl Fn(f64) -> f64, n: usize) -> f64 {
        let step = 2.0 * PI / n as f64;
        (0..n)
            .map(|k| h(-PI + (k as f64 + 0.5) * step).ln())
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn entropy_rate_examples() {
        let g = grid();
        let c = 0.5 * (2.0 * PI * E).ln();
        assert!((c - 1.418939).abs() < 1e-6);
        let one = SpectrumSamples::new(g, vec![1.0; g.n_points()]).unwrap();
        assert!((gaussian_entropy_rate(&one).unwrap() - c).abs() < 1e-12);
        let four = SpectrumSamples::new(g, vec![4.0; g.n_points()]).unwrap();
        assert!((gaussian_entropy_rate(&four).unwrap() - c - LN_2).abs() < 1e-12);
        let ma = SpectrumSamples::from_fn(g, |w| {
            Ok((Complex64::new(1.0, 0.0) - 0.5 * Complex64::from_polar(1.0, -w)).norm_sqr())
        })
        .unwrap();
        assert!((gaussian_entropy_rate(&ma).unwrap() - c).abs() < 1e-12);
    }

    #[test]
    fn open_loop_rate_is_half_ln2() {
        let r = directed_info_rate(&loop_of(TransferFunction::gain(0.0), 0.0, 1.0, 1.0)).unwrap();
        assert!((r - 0.34657).abs() < 1e-5);
        assert!((r - HALF_LN2).abs() < 1e-12);
    }

    #[test]
    fn stable_loop_without_disturbance() {
        // P = 1/(z - 0.5), K = -0.3: closed-loop pole at 0.2
        let inputs = loop_of(tf(&[0.0, 1.0], &[1.0, -0.5]), -0.3, 1.0, 0.0);
        let r = directed_info_rate(&inputs).unwrap();
        let cl = close_loop(&inputs.model).unwrap();
        let oracle = oracle_log_abs(|w| cl.f_wy.freq_response(w).unwrap().norm(), 1 << 16);
        assert!(oracle.abs() < 1e-10);
        assert!((r - oracle).abs() < 1e-10);
    }

    #[test]
    fn unstable_plant_rate() {
        let inputs = loop_of(unstable_plant(), -2.0, 1.0, 1.0);
        let r = directed_info_rate(&inputs).unwrap();
        // oracle for the Bode part: f_wy = 1 - 2d
        let bode = oracle_log_abs(
            |w| (Complex64::new(1.0, 0.0) - 2.0 * Complex64::from_polar(1.0, -w)).norm(),
            1 << 16,
        );
        assert!((bode - LN_2).abs() < 1e-10);
        assert!((r - (bode + HALF_LN2)).abs() < 1e-9);
        assert!((r - 1.039721).abs() < 1e-6);
    }

    #[test]
    fn entropy_route_agrees() {
        let inputs = loop_of(unstable_plant(), -2.5, 0.7, 1.9);
        let a = directed_info_rate(&inputs).unwrap();
        let b = directed_info_rate_via_entropy(&inputs).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn unstable_loop_rejected() {
        let r = directed_info_rate(&loop_of(unstable_plant(), 0.0, 1.0, 1.0));
        match r {
            Err(Error::Unstable { poles }) => assert!((poles[0].re - 2.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decompose_without_disturbance() {
        let rep = decompose(&loop_of(unstable_plant(), -2.0, 1.0, 0.0)).unwrap();
        assert_eq!(rep.disturbance_term, 0.0);
        assert!((rep.total_rate - rep.control_term).abs() < 1e-14);
    }

    #[test]
    fn decompose_equal_white_noises() {
        for (p, k) in [
            (TransferFunction::gain(0.0), 0.0),
            (tf(&[0.0, 1.0], &[1.0, -0.5]), -0.3),
            (unstable_plant(), -2.0),
            (unstable_plant(), -2.5),
        ] {
            let rep = decompose(&loop_of(p, k, 1.3, 1.3)).unwrap();
            assert!((rep.disturbance_term - HALF_LN2).abs() < 1e-12);
        }
    }

    #[test]
    fn decompose_unstable_plant() {
        let rep = decompose(&loop_of(unstable_plant(), -2.0, 1.0, 1.0)).unwrap();
        assert!((rep.control_term - LN_2).abs() < 1e-10);
        assert!((rep.disturbance_term - HALF_LN2).abs() < 1e-12);
        assert!(rep.residual.abs() < 1e-9);
        assert!((rep.bode_analytic - LN_2).abs() < 1e-12);
        assert!(rep.convergence_estimate < 1e-9);
        assert_eq!(rep.grid_points, 4096);
        // literal pole sum reads 2, not ln 2
        assert!(rep.literal_reading_differs);
    }

    #[test]
    fn bode_analytic_examples() {
        assert_eq!(bode_term_analytic(&tf(&[0.0, 1.0], &[1.0, -0.5])), 0.0);
        assert!((bode_term_analytic(&unstable_plant()) - 2f64.ln()).abs() < 1e-12);
        // (1 - 2d)(1 + 3d) = 1 + d - 6d^2
        let p = tf(&[0.0, 1.0], &[1.0, 1.0, -6.0]);
        assert!((bode_term_analytic(&p) - 1.791759).abs() < 1e-6);
    }

    #[test]
    fn two_unstable_poles_quadrature() {
        // deadbeat K = 1 - 6d places all closed-loop poles at 0
        let p = tf(&[0.0, 1.0], &[1.0, 1.0, -6.0]);
        let k = tf(&[1.0, -6.0], &[1.0]);
        let m = LoopModel::new(
            p.clone(),
            k,
            TransferFunction::unity(),
            white(1.0),
            white(0.0),
        )
        .unwrap();
        let cl = close_loop(&m).unwrap();
        let oracle = oracle_log_abs(|w| cl.f_wy.freq_response(w).unwrap().norm(), 1 << 16);
        let rep = decompose(&RateInputs::new(m, grid())).unwrap();
        assert!((oracle - 6f64.ln()).abs() < 1e-9);
        assert!((rep.control_term - oracle).abs() < 1e-9);
        assert!((rep.bode_analytic - rep.control_term).abs() < BODE_TOL);
    }

    #[test]
    fn white_noise_term_examples() {
        assert_eq!(white_noise_disturbance_term(0.0, 1.0).unwrap(), 0.0);
        assert!((white_noise_disturbance_term(2.0, 2.0).unwrap() - 0.34657).abs() < 1e-5);
        assert!((white_noise_disturbance_term(3.0, 1.0).unwrap() - LN_2).abs() < 1e-15);
        assert!(white_noise_disturbance_term(1.0, 0.0).is_err());
        assert!(white_noise_disturbance_term(1.0, -1.0).is_err());
    }

    #[test]
    fn independence_two_controllers() {
        let base = loop_of(unstable_plant(), -2.0, 1.0, 1.0).model;
        let rep = controller_independence_check(
            &base,
            &[TransferFunction::gain(-2.0), TransferFunction::gain(-2.5)],
            grid(),
        )
        .unwrap();
        assert!(rep.pass);
        for t in &rep.disturbance_terms {
            assert!((t - HALF_LN2).abs() < 1e-12);
        }
    }

    #[test]
    fn independence_single_controller() {
        let base = loop_of(unstable_plant(), -2.0, 1.0, 1.0).model;
        let rep =
            controller_independence_check(&base, &[TransferFunction::gain(-2.0)], grid()).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.max_deviation, 0.0);
    }

    #[test]
    fn independence_colored_disturbance() {
        let shaping = tf(&[1.0], &[1.0, -0.5]);
        let base = LoopModel::new(
            unstable_plant(),
            TransferFunction::gain(-2.0),
            TransferFunction::unity(),
            white(1.0),
            NoiseSpec::colored(1.0, shaping.clone()).unwrap(),
        )
        .unwrap();
        let rep = controller_independence_check(
            &base,
            &[TransferFunction::gain(-2.0), TransferFunction::gain(-2.5)],
            grid(),
        )
        .unwrap();
        assert!(rep.pass);
        // oracle: (1/2pi) int 1/2 ln(1 + |G|^2)
        let oracle = oracle_log_abs(
            |w| (1.0 + shaping.freq_response(w).unwrap().norm_sqr()).sqrt(),
            1 << 16,
        );
        assert!((rep.disturbance_terms[0] - oracle).abs() < 1e-10);
    }

    #[test]
    fn independence_rejects_non_stabilizing() {
        let base = loop_of(unstable_plant(), -2.0, 1.0, 1.0).model;
        let r = controller_independence_check(
            &base,
            &[TransferFunction::gain(-2.0), TransferFunction::gain(0.0)],
            grid(),
        );
        let msg = r.unwrap_err().to_string();
        assert!(msg.contains("controller #1"), "{msg}");
    }

    #[test]
    fn disturbance_monotone_in_sigma_v() {
        let mut last = -1.0;
        for sv in [0.0, 0.1, 0.5, 1.0, 2.0, 10.0] {
            let d = decompose(&loop_of(unstable_plant(), -2.5, 1.0, sv))
                .unwrap()
                .disturbance_term;
            assert!(d >= last);
            last = d;
        }
    }

    #[test]
    fn integrator_in_controller_is_near_singular() {
        // K with a pole at z = 1 puts a zero of F_wy on the grid point omega = 0
        let p = tf(&[0.0, 0.5], &[1.0, -0.5]);
        let k = tf(&[-0.2], &[1.0, -1.0]);
        let m = LoopModel::new(p, k, TransferFunction::unity(), white(1.0), white(0.0)).unwrap();
        assert!(is_stabilizing(&m).stabilizing);
        let err = decompose(&RateInputs::new(m, grid())).unwrap_err();
        assert!(
            matches!(err, Error::LogDomain { omega, .. } if omega == 0.0),
            "{err:?}"
        );
    }

    #[test]
    fn integrand_means_match_report() {
        let inputs = loop_of(unstable_plant(), -2.5, 1.0, 0.4);
        let rows = integrand_table(&inputs).unwrap();
        let rep = decompose(&inputs).unwrap();
        let n = rows.len() as f64;
        let mean = |f: fn(&IntegrandRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        assert!((mean(|r| r.log_syw) - rep.total_rate).abs() < 1e-12);
        assert!((mean(|r| r.log_fwy) - rep.control_term).abs() < 1e-12);
        assert!((mean(|r| r.disturbance_integrand) - rep.disturbance_term).abs() < 1e-12);
        let mut buf = Vec::new();
        write_integrands_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("omega,log_Syw,log_Fwy,disturbance_integrand\n"));
    }

    #[test]
    fn bits_conversion() {
        let rep = decompose(&loop_of(unstable_plant(), -2.0, 1.0, 1.0)).unwrap();
        let bits = rep.in_base(LogBase::Bits);
        assert!((bits.control_term - 1.0).abs() < 1e-10);
        assert!((bits.disturbance_term - 0.5).abs() < 1e-12);
        assert_eq!(bits.log_base, LogBase::Bits);
    }
}
