//! Rational transfer functions in the delay variable and the feedback loop
//! built from them.
//!
//! The loop uses the positive-feedback convention: with loop gain
//! `L = P K H` the closed-loop maps are `1 / (1 - L)` and `H / (1 - L)`.
//! Ordinary negative feedback is obtained by negating `K`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::spectral::NoiseSpec;

/// Two roots closer than this (scaled by `max(1, |r|)`) are treated as the
/// same root when reducing a rational function.
pub const CANCELLATION_TOL: f64 = 1e-9;

/// Poles must satisfy `|p| < 1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;

const FREQ_SINGULAR_TOL: f64 = 1e-12;

/// `num(d) / den(d)` with `den(0) = 1`, stored in reduced form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransferFunction", into = "RawTransferFunction")]
pub struct TransferFunction {
    num: Polynomial,
    den: Polynomial,
}

/// Wire form: ascending coefficient arrays over the delay variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl TryFrom<RawTransferFunction> for TransferFunction {
    type Error = Error;

    fn try_from(raw: RawTransferFunction) -> Result<Self> {
        TransferFunction::from_coeffs(&raw.num, &raw.den)
    }
}

impl From<TransferFunction> for RawTransferFunction {
    fn from(tf: TransferFunction) -> Self {
        RawTransferFunction {
            num: tf.num.coeffs().to_vec(),
            den: tf.den.coeffs().to_vec(),
        }
    }
}

impl TransferFunction {
    /// Normalizes `den(0)` to one and cancels common roots.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput(
                "denominator is the zero polynomial".into(),
            ));
        }
        let d0 = den.coeffs()[0];
        if d0 == 0.0 {
            return Err(Error::InvalidInput(
                "denominator constant term is zero (map is not causal)".into(),
            ));
        }
        let (num, den) = reduce(&num.scale(1.0 / d0), &den.scale(1.0 / d0));
        Ok(TransferFunction { num, den })
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        TransferFunction::new(
            Polynomial::new(num.to_vec())?,
            Polynomial::new(den.to_vec())?,
        )
    }

    pub fn unity() -> Self {
        TransferFunction::gain(1.0)
    }

    pub fn gain(k: f64) -> Self {
        TransferFunction {
            num: Polynomial::constant(k),
            den: Polynomial::one(),
        }
    }

    /// Pure unit delay `d`.
    pub fn unit_delay() -> Self {
        TransferFunction {
            num: Polynomial::delay(1),
            den: Polynomial::one(),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    /// Direct feedthrough (value at `d = 0`).
    pub fn feedthrough(&self) -> f64 {
        self.num.coeffs()[0]
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.feedthrough() == 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Value at a complex point of the delay variable.
    pub fn eval_d(&self, d: Complex64) -> Complex64 {
        self.num.eval_d(d) / self.den.eval_d(d)
    }

    /// `H(e^{j omega})`, i.e. the rational function evaluated at
    /// `d = e^{-j omega}`.
    pub fn freq_response(&self, omega: f64) -> Result<Complex64> {
        let d = Complex64::from_polar(1.0, -omega);
        let den = self.den.eval_d(d);
        if den.norm() <= FREQ_SINGULAR_TOL {
            return Err(Error::Singularity { omega });
        }
        Ok(self.num.eval_d(d) / den)
    }

    /// `|H(e^{j omega})|^2`
    pub fn gain_sq(&self, omega: f64) -> Result<f64> {
        self.freq_response(omega).map(|h| h.norm_sqr())
    }

    fn z_order(&self) -> usize {
        self.num.degree().max(self.den.degree())
    }

    /// Poles in the `z` plane, including those at the origin contributed by
    /// pure delays.
    pub fn poles(&self) -> Vec<Complex64> {
        let mut p = self.den.roots();
        let origin = self.z_order() - self.den.degree();
        p.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), origin));
        sort_roots(&mut p);
        p
    }

    /// Finite zeros in the `z` plane.
    pub fn zeros(&self) -> Vec<Complex64> {
        if self.num.is_zero() {
            return Vec::new();
        }
        let mut z = self.num.roots();
        let origin = self.z_order() - self.num.degree();
        z.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), origin));
        sort_roots(&mut z);
        z
    }

    pub fn is_stable(&self) -> bool {
        self.poles()
            .iter()
            .all(|p| p.norm() < 1.0 - STABILITY_MARGIN)
    }

    pub fn mul(&self, other: &TransferFunction) -> Result<TransferFunction> {
        TransferFunction::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    /// `1 - self`
    pub fn one_minus(&self) -> Result<TransferFunction> {
        TransferFunction::new(self.den.sub(&self.num), self.den.clone())
    }

    pub fn reciprocal(&self) -> Result<TransferFunction> {
        if self.num.is_zero() {
            return Err(Error::DegenerateLoop);
        }
        TransferFunction::new(self.den.clone(), self.num.clone())
    }

    /// Maximum coefficient distance to another function after both are put
    /// in reduced form; `f64::INFINITY` when the shapes differ.
    pub fn coeff_distance(&self, other: &TransferFunction) -> f64 {
        let dist = |a: &Polynomial, b: &Polynomial| {
            if a.degree() != b.degree() {
                return f64::INFINITY;
            }
            a.coeffs()
                .iter()
                .zip(b.coeffs())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        dist(&self.num, &other.num).max(dist(&self.den, &other.den))
    }
}

fn sort_roots(r: &mut [Complex64]) {
    r.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn same_root(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= CANCELLATION_TOL * a.norm().max(1.0)
}

/// Cancels roots shared by `num` and `den`. `den(0)` must be 1. Functions
/// with no shared roots are returned untouched.
fn reduce(num: &Polynomial, den: &Polynomial) -> (Polynomial, Polynomial) {
    if num.is_zero() {
        return (Polynomial::zero(), Polynomial::one());
    }
    if den.degree() == 0 || num.degree() == num.delay_order() {
        return (num.clone(), den.clone());
    }
    let den_roots = den.roots();
    let mut num_roots = num.roots();
    let mut kept_den = Vec::with_capacity(den_roots.len());
    let mut cancelled = false;
    for r in den_roots {
        let hit = num_roots
            .iter()
            .enumerate()
            .filter(|(_, z)| same_root(r, **z))
            .min_by(|a, b| (r - a.1).norm().total_cmp(&(r - b.1).norm()))
            .map(|(i, _)| i);
        match hit {
            Some(i) => {
                num_roots.remove(i);
                cancelled = true;
            }
            None => kept_den.push(r),
        }
    }
    if !cancelled {
        return (num.clone(), den.clone());
    }
    let k = num.delay_order();
    let gain = num.coeffs()[k];
    let mut new_num = Polynomial::delay(k).mul(&Polynomial::from_z_roots(&num_roots, gain));
    let new_den = Polynomial::from_z_roots(&kept_den, 1.0);
    if new_num.is_zero() {
        new_num = Polynomial::zero();
    }
    (new_num, new_den)
}

/// `H(e^{j omega})` for a transfer function.
pub fn freq_response(tf: &TransferFunction, omega: f64) -> Result<Complex64> {
    tf.freq_response(omega)
}

/// The full feedback interconnection: plant `P`, controller `K`, feedback
/// filter `H`, channel noise `W` and output disturbance `V`.
///
/// Signals: `z = H (P u + v)`, `y = z + w`, `u = K y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopModel {
    plant: TransferFunction,
    controller: TransferFunction,
    feedback_filter: TransferFunction,
    channel_noise: NoiseSpec,
    output_disturbance: NoiseSpec,
    initial_state: Vec<f64>,
}

impl LoopModel {
    pub fn new(
        plant: TransferFunction,
        controller: TransferFunction,
        feedback_filter: TransferFunction,
        channel_noise: NoiseSpec,
        output_disturbance: NoiseSpec,
    ) -> Result<Self> {
        let feedthrough =
            plant.feedthrough() * controller.feedthrough() * feedback_filter.feedthrough();
        if feedthrough != 0.0 {
            return Err(Error::NotStrictlyProper { feedthrough });
        }
        Ok(LoopModel {
            plant,
            controller,
            feedback_filter,
            channel_noise,
            output_disturbance,
            initial_state: Vec::new(),
        })
    }

    /// Past plant outputs `[y_P(-1), y_P(-2), ...]`; missing entries are
    /// zero. At most `deg den(P)` values.
    pub fn with_initial_state(mut self, state: Vec<f64>) -> Result<Self> {
        if state.len() > self.plant.den().degree() {
            return Err(Error::InvalidInput(format!(
                "initial state has {} entries but the plant has order {}",
                state.len(),
                self.plant.den().degree()
            )));
        }
        if state.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("initial state is not finite".into()));
        }
        self.initial_state = state;
        Ok(self)
    }

    pub fn with_controller(&self, controller: TransferFunction) -> Result<Self> {
        LoopModel::new(
            self.plant.clone(),
            controller,
            self.feedback_filter.clone(),
            self.channel_noise.clone(),
            self.output_disturbance.clone(),
        )?
        .with_initial_state(self.initial_state.clone())
    }

    pub fn with_noises(&self, channel_noise: NoiseSpec, output_disturbance: NoiseSpec) -> Self {
        LoopModel {
            channel_noise,
            output_disturbance,
            ..self.clone()
        }
    }

    pub fn plant(&self) -> &TransferFunction {
        &self.plant
    }

    pub fn controller(&self) -> &TransferFunction {
        &self.controller
    }

    pub fn feedback_filter(&self) -> &TransferFunction {
        &self.feedback_filter
    }

    pub fn channel_noise(&self) -> &NoiseSpec {
        &self.channel_noise
    }

    pub fn output_disturbance(&self) -> &NoiseSpec {
        &self.output_disturbance
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    /// `L = P K H`, reduced.
    pub fn loop_gain(&self) -> Result<TransferFunction> {
        self.plant.mul(&self.controller)?.mul(&self.feedback_filter)
    }

    /// Characteristic polynomial built from the unreduced factors:
    /// `den(P) den(K) den(H) - num(P) num(K) num(H)`.
    pub fn raw_char_poly(&self) -> Polynomial {
        let den = self
            .plant
            .den()
            .mul(self.controller.den())
            .mul(self.feedback_filter.den());
        let num = self
            .plant
            .num()
            .mul(self.controller.num())
            .mul(self.feedback_filter.num());
        den.sub(&num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    /// `1 / (1 - L)`: channel noise to output.
    pub f_wy: TransferFunction,
    /// `H / (1 - L)`: output disturbance to output.
    pub f_vy: TransferFunction,
    pub sensitivity: TransferFunction,
    /// Numerator of `1 - L` in reduced form.
    pub char_poly: Polynomial,
    pub closed_loop_poles: Vec<Complex64>,
    pub is_stable: bool,
}

/// Forms the closed-loop maps of the loop.
pub fn close_loop(model: &LoopModel) -> Result<ClosedLoop> {
    let l = model.loop_gain()?;
    let one_minus_l = l.one_minus()?;
    if one_minus_l.is_zero() {
        return Err(Error::DegenerateLoop);
    }
    let f_wy = one_minus_l.reciprocal()?;
    let f_vy = model.feedback_filter().mul(&f_wy)?;
    let closed_loop_poles = f_wy.poles();
    let is_stable = closed_loop_poles
        .iter()
        .all(|p| p.norm() < 1.0 - STABILITY_MARGIN);
    Ok(ClosedLoop {
        sensitivity: f_wy.clone(),
        char_poly: one_minus_l.num().clone(),
        f_wy,
        f_vy,
        closed_loop_poles,
        is_stable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub stabilizing: bool,
    /// Roots of the unreduced characteristic polynomial.
    #[serde(serialize_with = "crate::serialize_complex_list")]
    pub closed_loop_poles: Vec<Complex64>,
    /// Poles with `|p| >= 1 - 1e-9`.
    #[serde(serialize_with = "crate::serialize_complex_list")]
    pub offending_poles: Vec<Complex64>,
    /// Offending poles hidden from the reduced closed-loop maps by a
    /// pole/zero cancellation between `P`, `K` and `H`.
    #[serde(serialize_with = "crate::serialize_complex_list")]
    pub unstable_cancellations: Vec<Complex64>,
}

/// Checks every closed-loop mode, including modes cancelled out of the
/// reduced maps.
pub fn is_stabilizing(model: &LoopModel) -> StabilityReport {
    let raw = model.raw_char_poly();
    if raw.is_zero() {
        return StabilityReport {
            stabilizing: false,
            closed_loop_poles: Vec::new(),
            offending_poles: Vec::new(),
            unstable_cancellations: Vec::new(),
        };
    }
    let poles = raw.roots();
    let offending: Vec<Complex64> = poles
        .iter()
        .copied()
        .filter(|p| p.norm() >= 1.0 - STABILITY_MARGIN)
        .collect();
    let reduced_poles = close_loop(model)
        .map(|cl| cl.closed_loop_poles)
        .unwrap_or_default();
    let mut remaining = reduced_poles;
    let mut unstable_cancellations = Vec::new();
    for p in &offending {
        match remaining
            .iter()
            .position(|q| (p - q).norm() <= 1e-6 * p.norm().max(1.0))
        {
            Some(i) => {
                remaining.remove(i);
            }
            None => unstable_cancellations.push(*p),
        }
    }
    StabilityReport {
        stabilizing: offending.is_empty(),
        closed_loop_poles: poles,
        offending_poles: offending,
        unstable_cancellations,
    }
}
