//! Trigonometric kernels for one-sided approximation of interval indicators.
//!
//! Two families: the Fejér kernel, which majorizes the indicator of a short
//! arc after scaling by pi^2/4, and the Beurling-Selberg majorant/minorant
//! pair of degree J, built from the Vaaler expansion of the sawtooth. The
//! Selberg pair carries exact zeroth coefficients beta - alpha +- 1/(J+1);
//! that excess is what drives counting error terms of size N0/(J+1).

use num_complex::Complex64;
use thiserror::Error;

use crate::util::Accumulator;

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("interval must satisfy alpha < beta < alpha + 1, got ({0}, {1})")]
    InvalidInterval(f64, f64),
    #[error("coefficient bound violated at j={j}: |S^{sign}({j})| = {value:e} > {bound:e}")]
    CoefficientBound { j: i64, sign: char, value: f64, bound: f64 },
    #[error("sandwich violated at x={x}: S-({x}) = {s_minus:e}, chi = {chi}, S+({x}) = {s_plus:e}")]
    SandwichViolation { x: f64, s_minus: f64, chi: f64, s_plus: f64 },
}

/// Nonnegative kernel F_J(theta) = (sin(pi J theta) / (J sin(pi theta)))^2
/// with F_J(0) = 1 and Fourier coefficients (J - |j|)/J^2.
#[derive(Clone, Copy, Debug)]
pub struct FejerKernel {
    pub j_order: u32,
}

impl FejerKernel {
    pub fn new(j_order: u32) -> Self {
        assert!(j_order >= 1);
        Self { j_order }
    }

    pub fn coefficient(&self, j: i64) -> f64 {
        let jj = self.j_order as i64;
        if j.abs() > jj {
            0.0
        } else {
            (jj - j.abs()) as f64 / (jj * jj) as f64
        }
    }

    /// Stable closed form away from integers, coefficient sum near them.
    /// The argument is reduced mod 1 first; both forms have period 1 and the
    /// reduction keeps the sines well conditioned at every scale.
    pub fn eval(&self, theta: f64) -> f64 {
        let t = theta - theta.round();
        let s = (std::f64::consts::PI * t).sin();
        if s.abs() < 1e-8 {
            return self.eval_coefficient_sum(t);
        }
        let num = (std::f64::consts::PI * self.j_order as f64 * t).sin();
        let r = num / (self.j_order as f64 * s);
        r * r
    }

    pub fn eval_coefficient_sum(&self, theta: f64) -> f64 {
        let t = theta - theta.round();
        let mut acc = Accumulator::new();
        acc.add(self.coefficient(0));
        for j in 1..=(self.j_order as i64) {
            acc.add(2.0 * self.coefficient(j) * (TAU * j as f64 * t).cos());
        }
        acc.total()
    }
}

pub fn fejer_eval(j_order: u32, theta: f64) -> f64 {
    FejerKernel::new(j_order).eval(theta)
}

/// Check (pi^2/4) F_J(theta) >= 1 whenever the distance from theta to the
/// nearest integer is at most delta; vacuously true outside the arc. Callers
/// pass J = floor(1/(2 delta)).
pub fn fejer_majorization(j_order: u32, delta: f64, theta: f64) -> bool {
    if crate::util::dist_to_nearest_int(theta) > delta {
        return true;
    }
    let quarter_pi_sq = std::f64::consts::PI * std::f64::consts::PI / 4.0;
    quarter_pi_sq * fejer_eval(j_order, theta) >= 1.0 - 1e-12
}

/// Vaaler's coefficient function pi t (1-t) cot(pi t) + t on (0, 1),
/// extended by its limits 1 and 0 at the ends.
pub fn vaaler_phi(t: f64) -> f64 {
    assert!((0.0..=1.0).contains(&t));
    if t == 0.0 {
        return 1.0;
    }
    if t == 1.0 {
        return 0.0;
    }
    let pt = std::f64::consts::PI * t;
    pt * (1.0 - t) * (pt.cos() / pt.sin()) + t
}

/// Majorant/minorant pair for the indicator of [alpha, beta] on R/Z:
/// trigonometric polynomials of degree J with S- <= chi <= S+ and zeroth
/// coefficients beta - alpha +- 1/(J+1). Coefficients for j < 0 are the
/// conjugates of those stored for j > 0.
#[derive(Clone, Debug)]
pub struct SelbergPair {
    pub j_order: u32,
    pub alpha: f64,
    pub beta: f64,
    /// Ŝ+(j) for j = 0..=J.
    pub coeff_plus: Vec<Complex64>,
    /// Ŝ-(j) for j = 0..=J.
    pub coeff_minus: Vec<Complex64>,
}

impl SelbergPair {
    /// Builds the pair and validates the three contracts: exact zeroth
    /// coefficients, the per-j coefficient bound, and the sandwich on a
    /// 10^4-point grid (points within 1e-12 of an endpoint excused).
    pub fn new(j_order: u32, alpha: f64, beta: f64) -> Result<Self, KernelError> {
        if !(alpha < beta && beta < alpha + 1.0) {
            return Err(KernelError::InvalidInterval(alpha, beta));
        }
        let jj = j_order as i64;
        let k = (jj + 1) as f64;
        let mut coeff_plus = Vec::with_capacity(j_order as usize + 1);
        let mut coeff_minus = Vec::with_capacity(j_order as usize + 1);
        coeff_plus.push(Complex64::new(beta - alpha + 1.0 / k, 0.0));
        coeff_minus.push(Complex64::new(beta - alpha - 1.0 / k, 0.0));
        for j in 1..=jj {
            let jf = j as f64;
            let c = vaaler_phi(jf / k) / (TAU * jf);
            let b = TAU * jf * beta;
            let a = TAU * jf * alpha;
            // i*c*(e(-j beta) - e(-j alpha)) expanded into real and
            // imaginary parts; exact zeros survive for symmetric intervals
            let saw = Complex64::new(c * (b.sin() - a.sin()), c * (b.cos() - a.cos()));
            let tri = 0.5 / k * (1.0 - jf / k);
            let fej = Complex64::new(tri * (b.cos() + a.cos()), -tri * (b.sin() + a.sin()));
            coeff_plus.push(saw + fej);
            coeff_minus.push(saw - fej);
        }
        let pair = Self { j_order, alpha, beta, coeff_plus, coeff_minus };
        pair.validate()?;
        Ok(pair)
    }

    /// Upper bound 1/(J+1) + min(beta-alpha, 1/(pi |j|)) on |Ŝ±(j)|.
    pub fn coefficient_bound(&self, j: i64) -> f64 {
        let k = self.j_order as f64 + 1.0;
        if j == 0 {
            return self.beta - self.alpha + 1.0 / k;
        }
        1.0 / k
            + (self.beta - self.alpha).min(1.0 / (std::f64::consts::PI * j.abs() as f64))
    }

    fn validate(&self) -> Result<(), KernelError> {
        for j in 1..=(self.j_order as i64) {
            let bound = self.coefficient_bound(j) + 1e-12;
            let vp = self.coeff_plus[j as usize].norm();
            if vp > bound {
                return Err(KernelError::CoefficientBound { j, sign: '+', value: vp, bound });
            }
            let vm = self.coeff_minus[j as usize].norm();
            if vm > bound {
                return Err(KernelError::CoefficientBound { j, sign: '-', value: vm, bound });
            }
        }
        let grid = 10_000;
        for i in 0..grid {
            let x = self.alpha - 0.5 + i as f64 / grid as f64;
            if self.endpoint_distance(x) < 1e-12 {
                continue;
            }
            let chi = self.indicator(x);
            let sp = self.eval_plus(x);
            let sm = self.eval_minus(x);
            if sm > chi + 1e-9 || chi > sp + 1e-9 {
                return Err(KernelError::SandwichViolation { x, s_minus: sm, chi, s_plus: sp });
            }
        }
        Ok(())
    }

    /// Distance on R/Z from x to the nearer interval endpoint.
    pub fn endpoint_distance(&self, x: f64) -> f64 {
        crate::util::dist_to_nearest_int(x - self.alpha)
            .min(crate::util::dist_to_nearest_int(x - self.beta))
    }

    /// Indicator of the closed interval [alpha, beta] interpreted mod 1.
    pub fn indicator(&self, x: f64) -> f64 {
        let t = (x - self.alpha).rem_euclid(1.0);
        if t <= self.beta - self.alpha {
            1.0
        } else {
            0.0
        }
    }

    fn eval_with(&self, coeff: &[Complex64], theta: f64) -> f64 {
        let mut acc = Accumulator::new();
        acc.add(coeff[0].re);
        for (j, c) in coeff.iter().enumerate().skip(1) {
            let ang = TAU * j as f64 * theta;
            acc.add(2.0 * (c.re * ang.cos() - c.im * ang.sin()));
        }
        acc.total()
    }

    pub fn eval_plus(&self, theta: f64) -> f64 {
        self.eval_with(&self.coeff_plus, theta)
    }

    pub fn eval_minus(&self, theta: f64) -> f64 {
        self.eval_with(&self.coeff_minus, theta)
    }
}

pub fn selberg_pair(j_order: u32, alpha: f64, beta: f64) -> Result<SelbergPair, KernelError> {
    SelbergPair::new(j_order, alpha, beta)
}

/// Weight b_j = 1/(J+1) + min(2 delta, 1/(pi j)) multiplying |S_j| in the
/// counting decomposition.
pub fn decomposition_weight(j_order: u32, delta: f64, j: u32) -> f64 {
    assert!(j >= 1);
    1.0 / (j_order as f64 + 1.0)
        + (2.0 * delta).min(1.0 / (std::f64::consts::PI * j as f64))
}

/// Right side of the counting decomposition: N0/(J+1) + 2 sum_j b_j |S_j|,
/// where exp_sums[j-1] is the weighted exponential sum at frequency j.
pub fn decomposition_rhs(n0: f64, delta: f64, j_order: u32, exp_sums: &[Complex64]) -> f64 {
    assert!(exp_sums.len() == j_order as usize);
    let mut acc = Accumulator::new();
    acc.add(n0 / (j_order as f64 + 1.0));
    for (idx, s) in exp_sums.iter().enumerate() {
        let j = idx as u32 + 1;
        acc.add(2.0 * decomposition_weight(j_order, delta, j) * s.norm());
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn fejer_basic_values() {
        for j in 1..=10 {
            assert!((fejer_eval(j, 0.0) - 1.0).abs() < 1e-12);
            assert!((fejer_eval(j, 1.0) - 1.0).abs() < 1e-12);
        }
        for j in 2..=10 {
            assert!(fejer_eval(j, 1.0 / j as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn fejer_closed_form_matches_coefficient_sum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let j = rng.gen_range(1..=64);
            let theta: f64 = rng.gen_range(-2.0..2.0);
            let k = FejerKernel::new(j);
            assert!(
                (k.eval(theta) - k.eval_coefficient_sum(theta)).abs() < 1e-12,
                "J={j}, theta={theta}"
            );
        }
    }

    #[test]
    fn fejer_nonnegative_and_bounded() {
        let k = FejerKernel::new(17);
        for i in 0..2000 {
            let v = k.eval(i as f64 / 2000.0);
            assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn fejer_majorizes_short_arc() {
        assert!(fejer_majorization(10, 0.05, 0.0));
        assert!(fejer_majorization(10, 0.05, 0.05));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let delta: f64 = rng.gen_range(1e-4..0.49);
            let j = (1.0 / (2.0 * delta)).floor() as u32;
            let theta = rng.gen_range(-delta..delta);
            assert!(fejer_majorization(j.max(1), delta, theta), "delta={delta}, theta={theta}");
        }
    }

    #[test]
    fn vaaler_phi_special_values() {
        assert!((vaaler_phi(0.5) - 0.5).abs() < 1e-15);
        let want = 3.0 * std::f64::consts::PI / 16.0 + 0.25;
        assert!((vaaler_phi(0.25) - want).abs() < 1e-15);
        assert!((vaaler_phi(1e-9) - 1.0).abs() < 1e-8);
        assert_eq!(vaaler_phi(0.0), 1.0);
        assert_eq!(vaaler_phi(1.0), 0.0);
    }

    #[test]
    fn selberg_zeroth_coefficients_exact() {
        let p = selberg_pair(9, -0.1, 0.1).unwrap();
        assert_eq!(p.coeff_plus[0].re, 0.1 - (-0.1) + 1.0 / 10.0);
        assert!((p.coeff_plus[0].re - 0.3).abs() < 1e-16);
        assert!((p.coeff_minus[0].re - 0.1).abs() < 1e-16);
        let p = selberg_pair(50, -0.03, 0.03).unwrap();
        assert!((p.coeff_plus[0].re - 0.0796078431372549).abs() < 1e-16);
        assert!((p.coeff_minus[0].re - 0.0403921568627451).abs() < 1e-16);
    }

    #[test]
    fn selberg_zeroth_gap_is_two_over_k() {
        for j in [4u32, 9, 50, 200] {
            let p = selberg_pair(j, 0.2, 0.55).unwrap();
            let gap = p.coeff_plus[0].re - p.coeff_minus[0].re;
            assert!((gap - 2.0 / (j as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn selberg_symmetric_interval_coefficients_are_real() {
        let p = selberg_pair(20, -0.07, 0.07).unwrap();
        for c in p.coeff_plus.iter().chain(&p.coeff_minus) {
            assert_eq!(c.im, 0.0);
        }
    }

    #[test]
    fn selberg_sandwich_and_bounds_validated_in_constructor() {
        for j in [4u32, 9, 50, 200] {
            selberg_pair(j, -0.1, 0.1).unwrap();
            selberg_pair(j, 0.3, 0.41).unwrap();
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a: f64 = rng.gen_range(-0.5..0.5);
            let len: f64 = rng.gen_range(0.01..0.9);
            selberg_pair(rng.gen_range(4..64), a, a + len).unwrap();
        }
    }

    #[test]
    fn selberg_mean_equals_zeroth_coefficient() {
        let p = selberg_pair(12, -0.2, 0.15).unwrap();
        let grid = 4096;
        let mut mp = Accumulator::new();
        let mut mm = Accumulator::new();
        for i in 0..grid {
            let x = i as f64 / grid as f64;
            mp.add(p.eval_plus(x));
            mm.add(p.eval_minus(x));
        }
        // trig polynomials of degree < grid integrate exactly on this grid
        assert!((mp.total() / grid as f64 - p.coeff_plus[0].re).abs() < 1e-12);
        assert!((mm.total() / grid as f64 - p.coeff_minus[0].re).abs() < 1e-12);
    }

    #[test]
    fn selberg_rejects_bad_interval() {
        assert!(selberg_pair(9, 0.5, 0.5).is_err());
        assert!(selberg_pair(9, 0.0, 1.2).is_err());
    }

    #[test]
    fn decomposition_weights_match_formula() {
        let d = 0.01;
        assert!((decomposition_weight(20, d, 1) - (1.0 / 21.0 + 0.02)).abs() < 1e-16);
        // at large j the 1/(pi j) branch wins
        let w = decomposition_weight(20, 0.4, 100);
        assert!((w - (1.0 / 21.0 + 1.0 / (100.0 * std::f64::consts::PI))).abs() < 1e-16);
        let rhs = decomposition_rhs(10.0, d, 2, &[Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)]);
        let want = 10.0 / 3.0 + 2.0 * decomposition_weight(2, d, 1) * 5.0;
        assert!((rhs - want).abs() < 1e-12);
    }
}
