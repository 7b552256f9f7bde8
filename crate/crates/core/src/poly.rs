//! Real polynomials in the unit-delay variable `d = z^-1`.
//!
//! Coefficients are stored in ascending powers of `d`, so `[1.0, -0.5]` is
//! `1 - 0.5 d`. Roots are reported in the `z` plane: a polynomial of degree
//! `n` is mapped to `z^n p(1/z)` whose coefficients are the same list read in
//! descending powers of `z`. Factors of `d` (leading zero coefficients) map to
//! roots at `z = infinity` and are not reported.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients below this fraction of the operands' scale are treated as
/// cancellation noise when they end up in the highest-degree slots.
const TRIM_RELATIVE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Polynomial {
    type Error = Error;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    /// Builds a polynomial from ascending `d` coefficients. Trailing exact
    /// zeros are dropped; an empty list is the zero polynomial.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Result<Self> {
        let mut coeffs = coeffs.into();
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "polynomial coefficient {bad} is not finite"
            )));
        }
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Ok(Polynomial { coeffs })
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn one() -> Self {
        Polynomial::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Polynomial { coeffs: vec![c] }
    }

    /// `d^k`
    pub fn delay(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Polynomial { coeffs }
    }

    /// Expands `gain * prod (1 - r d)` over the given `z`-plane roots.
    /// Complex roots must come in conjugate pairs; the imaginary residue of
    /// the product is discarded.
    pub fn from_z_roots(roots: &[Complex64], gain: f64) -> Self {
        let mut acc = vec![Complex64::new(gain, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (i, a) in acc.iter().enumerate() {
                next[i] += a;
                next[i + 1] -= a * r;
            }
            acc = next;
        }
        let mut p = Polynomial {
            coeffs: acc.into_iter().map(|c| c.re).collect(),
        };
        p.trim_exact();
        p
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Number of leading zero coefficients, i.e. the power of `d` factoring
    /// out of the polynomial. Zero polynomial reports 0.
    pub fn delay_order(&self) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.coeffs.iter().take_while(|&&c| c == 0.0).count()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Evaluates at a complex value of the delay variable `d`.
    pub fn eval_d(&self, d: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * d + c)
    }

    /// Evaluates the `z`-form `z^n p(1/z)` with `n = degree`.
    pub fn eval_z(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut p = Polynomial {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        };
        p.trim_exact();
        p
    }

    pub fn mul(&self, other: &Polynomial) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        let mut p = Polynomial { coeffs: out };
        p.trim_exact();
        p
    }

    pub fn add(&self, other: &Polynomial) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Polynomial) -> Self {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Polynomial, sign: f64) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs: Vec<f64> = (0..n)
            .map(|i| {
                self.coeffs.get(i).copied().unwrap_or(0.0)
                    + sign * other.coeffs.get(i).copied().unwrap_or(0.0)
            })
            .collect();
        let scale = self.max_abs().max(other.max_abs());
        let mut p = Polynomial { coeffs };
        p.trim_relative(scale);
        p
    }

    fn trim_exact(&mut self) {
        while self.coeffs.len() > 1 && *self.coeffs.last().unwrap() == 0.0 {
            self.coeffs.pop();
        }
    }

    fn trim_relative(&mut self, scale: f64) {
        let tol = TRIM_RELATIVE * scale;
        while self.coeffs.len() > 1 && self.coeffs.last().unwrap().abs() <= tol {
            self.coeffs.pop();
        }
        if self.coeffs.len() == 1 && self.coeffs[0].abs() <= tol {
            self.coeffs[0] = 0.0;
        }
    }

    /// Finite roots of the `z`-form, with multiplicity.
    ///
    /// Eigenvalues of the companion matrix, each refined by a few Newton
    /// steps on the original coefficients. Conjugate pairs are kept exactly
    /// conjugate. Output is sorted by real then imaginary part.
    pub fn roots(&self) -> Vec<Complex64> {
        let lead = self.delay_order();
        let desc = &self.coeffs[lead..];
        let m = desc.len() - 1;
        if m == 0 || self.is_zero() {
            return Vec::new();
        }
        let a0 = desc[0];
        let mut companion = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            companion[(0, j)] = -desc[j + 1] / a0;
        }
        for i in 1..m {
            companion[(i, i - 1)] = 1.0;
        }
        let eig = companion.complex_eigenvalues();

        let zpoly = |z: Complex64| {
            desc.iter()
                .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
        };
        let zderiv = |z: Complex64| {
            desc[..m]
                .iter()
                .enumerate()
                .fold(Complex64::new(0.0, 0.0), |acc, (i, &c)| {
                    acc * z + c * (m - i) as f64
                })
        };
        let polish = |mut r: Complex64| {
            let mut res = zpoly(r).norm();
            for _ in 0..8 {
                let dp = zderiv(r);
                if dp.norm() == 0.0 {
                    break;
                }
                let cand = r - zpoly(r) / dp;
                let cand_res = zpoly(cand).norm();
                if cand_res.is_finite() && cand_res < res {
                    r = cand;
                    res = cand_res;
                } else {
                    break;
                }
            }
            r
        };

        let mut roots = Vec::with_capacity(m);
        for ev in eig.iter() {
            if ev.im == 0.0 {
                let mut r = polish(Complex64::new(ev.re, 0.0));
                r.im = 0.0;
                roots.push(r);
            } else if ev.im > 0.0 {
                let r = polish(*ev);
                if r.im == 0.0 {
                    roots.push(r);
                    roots.push(r);
                } else {
                    let upper = Complex64::new(r.re, r.im.abs());
                    roots.push(upper);
                    roots.push(upper.conj());
                }
            }
        }
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        roots
    }
}

/// Roots (in `z`) of the polynomial with ascending `d` coefficients.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    Ok(Polynomial::new(coeffs.to_vec())?.roots())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn linear_factor_root() {
        let r = poly_roots(&[1.0, -0.5]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn constant_has_no_roots() {
        assert!(poly_roots(&[1.0]).unwrap().is_empty());
    }

    #[test]
    fn quadratic_roots_two_and_three() {
        let r = poly_roots(&[1.0, -5.0, 6.0]).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - c(2.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - c(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn complex_pair_is_conjugate() {
        // z^2 - z + 0.5 -> 0.5 +- 0.5i
        let r = poly_roots(&[1.0, -1.0, 0.5]).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0], r[1].conj());
        assert!((r[1] - c(0.5, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn delay_factors_are_roots_at_infinity() {
        // d (1 - 0.5 d): one finite root 0.5
        let r = poly_roots(&[0.0, 1.0, -0.5]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            poly_roots(&[1.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
        assert!(Polynomial::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn trailing_zeros_normalized() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.coeffs(), &[1.0, 2.0]);
        assert_eq!(
            Polynomial::new(Vec::<f64>::new()).unwrap(),
            Polynomial::zero()
        );
    }

    #[test]
    fn subtraction_trims_cancellation_noise() {
        let a = Polynomial::new(vec![1.0, 0.3, 0.1 + 0.2]).unwrap();
        let b = Polynomial::new(vec![0.0, 0.0, 0.3]).unwrap();
        assert_eq!(a.sub(&b).degree(), 1);
    }

    #[test]
    fn double_root_accuracy() {
        let p = Polynomial::new(vec![1.0, -3.0, 2.25]).unwrap(); // (1 - 1.5d)^2
        let r = p.roots();
        for root in &r {
            assert!((root - c(1.5, 0.0)).norm() < 1e-7, "{root}");
        }
    }

    fn root_strategy() -> impl Strategy<Value = Vec<Complex64>> {
        let real = (-2.0f64..2.0).prop_map(|x| vec![c(x, 0.0)]);
        let pair =
            ((-1.5f64..1.5), (0.05f64..1.5)).prop_map(|(re, im)| vec![c(re, im), c(re, -im)]);
        // at most 6 groups of <= 2 roots: degree <= 12
        prop::collection::vec(prop_oneof![real, pair], 1..7)
            .prop_map(|groups| groups.into_iter().flatten().collect::<Vec<_>>())
    }

    proptest! {
        #[test]
        fn roots_reexpand_to_coefficients(roots in root_strategy(), gain in 0.5f64..3.0) {
            let p = Polynomial::from_z_roots(&roots, gain);
            let found = p.roots();
            prop_assert_eq!(found.len(), p.degree());
            let q = Polynomial::from_z_roots(&found, gain);
            let scale = p.max_abs();
            for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
                prop_assert!((a - b).abs() <= 1e-7 * scale, "{:?} vs {:?}", p, q);
            }
            for r in &found {
                prop_assert!(p.eval_z(*r).norm() <= 1e-8 * scale);
            }
        }
    }
}
