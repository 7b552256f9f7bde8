//! Randomized stabilized loops for identity checks, and the pole-placement
//! routine used to stabilize them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomposition::{decompose, directed_info_rate_via_entropy, RateInputs};
use crate::error::{Error, Result};
use crate::lti::{is_stabilizing, LoopModel, TransferFunction};
use crate::poly::Polynomial;
use crate::spectral::{FrequencyGrid, NoiseSpec};

/// Largest closed-loop pole magnitude used when placing poles.
pub const PLACED_POLE_RADIUS: f64 = 0.5;

/// Solves `den(G) den(K) - num(G) num(K) = target` for a controller of
/// order `n - 1`, where `n` is the order of the strictly proper `G`.
/// `target` must have `2n - 1` roots (in `z`).
pub fn place_poles(g: &TransferFunction, target: &[Complex64]) -> Result<TransferFunction> {
    if !g.is_strictly_proper() {
        return Err(Error::InvalidInput(
            "pole placement needs a strictly proper plant".into(),
        ));
    }
    let n = g.num().degree().max(g.den().degree());
    if n == 0 {
        return Err(Error::InvalidInput("plant is identically zero".into()));
    }
    if target.len() != 2 * n - 1 {
        return Err(Error::InvalidInput(format!(
            "expected {} closed-loop poles for a plant of order {n}, got {}",
            2 * n - 1,
            target.len()
        )));
    }
    let m = n - 1;
    let t = Polynomial::from_z_roots(target, 1.0);
    let gd = g.den().coeffs();
    let gn = g.num().coeffs();
    let eqs = 2 * n - 1;
    let coef = |p: &[f64], i: isize| -> f64 {
        if i < 0 {
            0.0
        } else {
            p.get(i as usize).copied().unwrap_or(0.0)
        }
    };

    // unknowns: a_1..a_m (den of K, a_0 = 1), then b_0..b_m (num of K)
    let mut a = DMatrix::<f64>::zeros(eqs, eqs);
    let mut rhs = DVector::<f64>::zeros(eqs);
    for row in 0..eqs {
        let power = (row + 1) as isize;
        for j in 1..=m {
            a[(row, j - 1)] = coef(gd, power - j as isize);
        }
        for j in 0..=m {
            a[(row, m + j)] = -coef(gn, power - j as isize);
        }
        rhs[row] = coef(t.coeffs(), power) - coef(gd, power);
    }
    let sol = a.lu().solve(&rhs).ok_or_else(|| {
        Error::InvalidInput("plant numerator and denominator are not coprime".into())
    })?;
    let mut kd = vec![1.0];
    kd.extend(sol.iter().take(m));
    let kn: Vec<f64> = sol.iter().skip(m).copied().collect();
    TransferFunction::from_coeffs(&kn, &kd)
}

/// Places poles by random search (radius [`PLACED_POLE_RADIUS`]) until the
/// resulting controller is itself stable. Deadbeat placement is tried first.
pub fn stable_stabilizer(
    g: &TransferFunction,
    rng: &mut impl Rng,
    attempts: usize,
) -> Result<TransferFunction> {
    let n = g.num().degree().max(g.den().degree());
    let count = (2 * n).saturating_sub(1);
    let mut target = vec![Complex64::new(0.0, 0.0); count];
    for _ in 0..attempts {
        if let Ok(k) = place_poles(g, &target) {
            if k.is_stable() {
                return Ok(k);
            }
        }
        target = random_roots(rng, count, 0.0, PLACED_POLE_RADIUS);
    }
    Err(Error::InvalidInput(format!(
        "no stable stabilizing controller found in {attempts} attempts"
    )))
}

/// `count` roots closed under conjugation with magnitudes in `[lo, hi)`.
pub fn random_roots(rng: &mut impl Rng, count: usize, lo: f64, hi: f64) -> Vec<Complex64> {
    let mut roots = Vec::with_capacity(count);
    while roots.len() < count {
        let r = rng.random_range(lo..hi);
        if count - roots.len() >= 2 && rng.random_bool(0.5) {
            let theta = rng.random_range(0.1..std::f64::consts::PI - 0.1);
            let z = Complex64::from_polar(r, theta);
            roots.push(z);
            roots.push(z.conj());
        } else {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            roots.push(Complex64::new(sign * r, 0.0));
        }
    }
    roots
}

fn random_poly(rng: &mut impl Rng, degree: usize, lead: f64) -> Polynomial {
    let mut c = vec![lead];
    c.extend((0..degree).map(|_| rng.random_range(-1.0..1.0)));
    Polynomial::new(c).expect("finite coefficients")
}

fn random_stable_tf(rng: &mut impl Rng, max_order: usize, radius: f64) -> TransferFunction {
    let order = rng.random_range(0..=max_order);
    let den = Polynomial::from_z_roots(&random_roots(rng, order, 0.0, radius), 1.0);
    let num_degree = rng.random_range(0..=max_order);
    let lead = rng.random_range(0.5..1.5);
    let num = random_poly(rng, num_degree, lead);
    TransferFunction::new(num, den).expect("stable denominator")
}

fn random_noise(rng: &mut impl Rng, allow_zero: bool) -> NoiseSpec {
    let variance = if allow_zero && rng.random_bool(0.15) {
        0.0
    } else {
        rng.random_range(0.1..5.0)
    };
    if rng.random_bool(0.5) {
        NoiseSpec::white(variance).expect("valid variance")
    } else {
        loop {
            let g = random_stable_tf(rng, 2, 0.8);
            if let Ok(spec) = NoiseSpec::colored(variance, g) {
                return spec;
            }
        }
    }
}

/// A random loop: stable or unstable plant (unstable poles with magnitude in
/// `[1.1, 3)`), random stable feedback filter, random noise spectra, and a
/// controller placing all closed-loop poles within radius 0.5. Deterministic
/// in `seed`.
pub fn random_loop(seed: u64) -> LoopModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let order = rng.random_range(1..=3usize);
        let n_unstable = if rng.random_bool(0.5) {
            0
        } else {
            rng.random_range(1..=order)
        };
        let mut poles = random_roots(&mut rng, order - n_unstable, 0.0, 0.9);
        for _ in 0..n_unstable {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            poles.push(Complex64::new(sign * rng.random_range(1.1..3.0), 0.0));
        }
        let den = Polynomial::from_z_roots(&poles, 1.0);
        let num_degree = rng.random_range(0..order);
        let lead = rng.random_range(0.5..1.5);
        let num = Polynomial::delay(1).mul(&random_poly(&mut rng, num_degree, lead));
        let Ok(plant) = TransferFunction::new(num, den) else {
            continue;
        };
        let h = random_stable_tf(&mut rng, 2, 0.8);
        let Ok(g) = plant.mul(&h) else { continue };
        let n = g.num().degree().max(g.den().degree());
        let target = random_roots(&mut rng, 2 * n - 1, 0.0, PLACED_POLE_RADIUS);
        let Ok(k) = place_poles(&g, &target) else {
            continue;
        };
        let w = random_noise(&mut rng, false);
        let v = random_noise(&mut rng, true);
        let Ok(model) = LoopModel::new(plant, k, h, w, v) else {
            continue;
        };
        if is_stabilizing(&model).stabilizing {
            return model;
        }
    }
}

/// Outcome of the identity checks on one loop.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IdentityCase {
    pub seed: u64,
    pub total_rate: f64,
    pub control_term: f64,
    pub disturbance_term: f64,
    pub residual: f64,
    /// `|rate - (h(Y) - h(W))|`
    pub entropy_chain_gap: f64,
}

pub fn check_identities(seed: u64, grid: FrequencyGrid) -> Result<IdentityCase> {
    let inputs = RateInputs::new(random_loop(seed), grid);
    let rep = decompose(&inputs)?;
    let via_entropy = directed_info_rate_via_entropy(&inputs)?;
    Ok(IdentityCase {
        seed,
        total_rate: rep.total_rate,
        control_term: rep.control_term,
        disturbance_term: rep.disturbance_term,
        residual: rep.residual,
        entropy_chain_gap: (rep.total_rate - via_entropy).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::close_loop;

    fn tf(num: &[f64], den: &[f64]) -> TransferFunction {
        TransferFunction::from_coeffs(num, den).unwrap()
    }

    #[test]
    fn first_order_deadbeat() {
        let k = place_poles(&tf(&[0.0, 1.0], &[1.0, -2.0]), &[Complex64::new(0.0, 0.0)]).unwrap();
        assert!(k.coeff_distance(&TransferFunction::gain(-2.0)) < 1e-12);
    }

    #[test]
    fn placed_poles_are_achieved() {
        let g = tf(&[0.0, 1.0, 0.4], &[1.0, 1.0, -6.0]);
        let target = [
            Complex64::new(0.3, 0.2),
            Complex64::new(0.3, -0.2),
            Complex64::new(-0.1, 0.0),
        ];
        let k = place_poles(&g, &target).unwrap();
        let m = LoopModel::new(
            g,
            k,
            TransferFunction::unity(),
            NoiseSpec::white(1.0).unwrap(),
            NoiseSpec::white(1.0).unwrap(),
        )
        .unwrap();
        let mut got = is_stabilizing(&m).closed_loop_poles;
        let mut want = target.to_vec();
        let key = |a: &Complex64, b: &Complex64| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        got.sort_by(key);
        want.sort_by(key);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-9, "{got:?}");
        }
    }

    #[test]
    fn wrong_target_count() {
        assert!(place_poles(&tf(&[0.0, 1.0], &[1.0, -2.0]), &[]).is_err());
    }

    #[test]
    fn stable_stabilizer_for_double_pole() {
        let g = tf(&[0.0, 1.0], &[1.0, -3.0, 2.25]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = stable_stabilizer(&g, &mut rng, 200).unwrap();
        assert!(k.is_stable());
    }

    #[test]
    fn random_loops_are_deterministic_and_stable() {
        for seed in 0..20 {
            let a = random_loop(seed);
            assert_eq!(a, random_loop(seed));
            assert!(is_stabilizing(&a).stabilizing);
            assert!(close_loop(&a).unwrap().is_stable);
        }
    }
}
