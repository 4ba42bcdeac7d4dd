//! Multivariate polynomials with exact rational coefficients.
//!
//! Charts built from these admit exact lattice tests: whether `q * f(a/q)` is
//! an integer is decided in integer arithmetic (i128 fast path, arbitrary
//! precision fallback), never through floats.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

#[derive(Clone, Debug)]
pub struct Term {
    pub exps: Vec<u32>,
    pub coeff: BigRational,
}

#[derive(Clone, Debug)]
pub struct RationalPoly {
    nvars: usize,
    terms: Vec<Term>,
    degree: u32,
    coeff_f64: Vec<f64>,
    fast: Option<FastForm>,
}

/// Coefficients scaled by the common denominator, when everything fits i128.
#[derive(Clone, Debug)]
struct FastForm {
    den_lcm: i128,
    scaled: Vec<i128>,
}

fn gcd_i128(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl RationalPoly {
    pub fn new(nvars: usize, terms: Vec<Term>) -> Self {
        let mut merged: Vec<Term> = Vec::new();
        for t in terms {
            assert_eq!(t.exps.len(), nvars);
            if t.coeff.is_zero() {
                continue;
            }
            if let Some(m) = merged.iter_mut().find(|m| m.exps == t.exps) {
                m.coeff += t.coeff;
            } else {
                merged.push(t);
            }
        }
        merged.retain(|t| !t.coeff.is_zero());
        merged.sort_by(|a, b| a.exps.cmp(&b.exps));
        let degree = merged
            .iter()
            .map(|t| t.exps.iter().sum::<u32>())
            .max()
            .unwrap_or(0);
        let coeff_f64 = merged
            .iter()
            .map(|t| t.coeff.to_f64().expect("coefficient in f64 range"))
            .collect();
        let fast = Self::build_fast(&merged);
        Self { nvars, terms: merged, degree, coeff_f64, fast }
    }

    /// Convenience: terms given as (exponents, numerator, denominator).
    pub fn from_i64(nvars: usize, terms: &[(&[u32], i64, i64)]) -> Self {
        let ts = terms
            .iter()
            .map(|(e, n, d)| Term {
                exps: e.to_vec(),
                coeff: BigRational::new(BigInt::from(*n), BigInt::from(*d)),
            })
            .collect();
        Self::new(nvars, ts)
    }

    fn build_fast(terms: &[Term]) -> Option<FastForm> {
        let mut lcm: i128 = 1;
        for t in terms {
            let d = t.coeff.denom().to_i128()?;
            lcm = lcm.checked_div(gcd_i128(lcm, d))?.checked_mul(d)?;
            if lcm.abs() > 1 << 40 {
                return None;
            }
        }
        let mut scaled = Vec::with_capacity(terms.len());
        for t in terms {
            let n = t.coeff.numer().to_i128()?;
            let d = t.coeff.denom().to_i128()?;
            scaled.push(n.checked_mul(lcm / d)?);
        }
        Some(FastForm { den_lcm: lcm, scaled })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn total_degree(&self) -> u32 {
        self.degree
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        let mut s = 0.0;
        for (t, &c) in self.terms.iter().zip(&self.coeff_f64) {
            let mut m = c;
            for (v, &e) in x.iter().zip(&t.exps) {
                if e > 0 {
                    m *= v.powi(e as i32);
                }
            }
            s += m;
        }
        s
    }

    pub fn partial(&self, var: usize) -> RationalPoly {
        let mut out = Vec::new();
        for t in &self.terms {
            let e = t.exps[var];
            if e == 0 {
                continue;
            }
            let mut exps = t.exps.clone();
            exps[var] = e - 1;
            out.push(Term {
                exps,
                coeff: &t.coeff * BigRational::from_integer(BigInt::from(e)),
            });
        }
        RationalPoly::new(self.nvars, out)
    }

    /// Scale the polynomial by an exact rational factor.
    pub fn scaled(&self, num: i64, den: i64) -> RationalPoly {
        let f = BigRational::new(BigInt::from(num), BigInt::from(den));
        RationalPoly::new(
            self.nvars,
            self.terms
                .iter()
                .map(|t| Term { exps: t.exps.clone(), coeff: &t.coeff * &f })
                .collect(),
        )
    }

    pub fn add(&self, other: &RationalPoly) -> RationalPoly {
        assert_eq!(self.nvars, other.nvars);
        let mut ts = self.terms.clone();
        ts.extend(other.terms.iter().cloned());
        RationalPoly::new(self.nvars, ts)
    }

    /// Exact value of `q * f(a/q)` as a reduced big rational.
    pub fn q_scaled_exact(&self, a: &[i64], q: i64) -> BigRational {
        debug_assert_eq!(a.len(), self.nvars);
        let q_big = BigInt::from(q);
        let mut s = BigRational::zero();
        for t in &self.terms {
            let mut num = t.coeff.clone();
            let mut powq: u32 = 0;
            for (&ai, &e) in a.iter().zip(&t.exps) {
                num *= BigRational::from_integer(BigInt::from(ai).pow(e));
                powq += e;
            }
            if powq >= 1 {
                num /= BigRational::from_integer(q_big.clone().pow(powq - 1));
            } else {
                num *= BigRational::from_integer(q_big.clone());
            }
            s += num;
        }
        s
    }

    fn q_scaled_fast(&self, a: &[i64], q: i64) -> Option<(i128, i128)> {
        let fast = self.fast.as_ref()?;
        let d = self.degree.max(1);
        // q * f(a/q) = S / (lcm * q^(d-1)), S integral.
        let l = fast
            .den_lcm
            .checked_mul(checked_pow(q as i128, d - 1)?)?;
        let mut s: i128 = 0;
        for (t, &c) in self.terms.iter().zip(&fast.scaled) {
            let mut m = c;
            let mut tot: u32 = 0;
            for (&ai, &e) in a.iter().zip(&t.exps) {
                if e > 0 {
                    m = m.checked_mul(checked_pow(ai as i128, e)?)?;
                    tot += e;
                }
            }
            m = m.checked_mul(checked_pow(q as i128, d - tot)?)?;
            s = s.checked_add(m)?;
        }
        Some((s, l))
    }

    /// Does `q * f(a/q)` land exactly on an integer?
    pub fn q_scaled_is_integer(&self, a: &[i64], q: i64) -> bool {
        if let Some((s, l)) = self.q_scaled_fast(a, q) {
            s % l == 0
        } else {
            self.q_scaled_exact(a, q).is_integer()
        }
    }

    /// Nearest integer to `q * f(a/q)` and whether the value is exactly integral.
    /// Exact halfway points round toward positive infinity.
    pub fn q_scaled_nearest(&self, a: &[i64], q: i64) -> (BigInt, bool) {
        if let Some((s, l)) = self.q_scaled_fast(a, q) {
            debug_assert!(l > 0);
            let b = s.div_euclid(l);
            let r = s.rem_euclid(l);
            let b = if 2 * r >= l { b + 1 } else { b };
            return (BigInt::from(b), s % l == 0);
        }
        let v = self.q_scaled_exact(a, q);
        let half_up = (&v + BigRational::new(BigInt::one(), BigInt::from(2))).floor();
        (half_up.to_integer(), v.is_integer())
    }
}

fn checked_pow(base: i128, exp: u32) -> Option<i128> {
    let mut r: i128 = 1;
    for _ in 0..exp {
        r = r.checked_mul(base)?;
    }
    Some(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parabola() -> RationalPoly {
        RationalPoly::from_i64(1, &[(&[2], 1, 1)])
    }

    #[test]
    fn eval_and_degree() {
        let p = RationalPoly::from_i64(2, &[(&[2, 0], 1, 2), (&[0, 2], 1, 2)]);
        assert_eq!(p.total_degree(), 2);
        assert!((p.eval_f64(&[0.4, 0.2]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn partials_of_half_square_sum() {
        let p = RationalPoly::from_i64(2, &[(&[2, 0], 1, 2), (&[0, 2], 1, 2)]);
        let px = p.partial(0);
        assert!((px.eval_f64(&[0.7, 0.1]) - 0.7).abs() < 1e-15);
        let pxy = px.partial(1);
        assert_eq!(pxy.terms().len(), 0);
    }

    #[test]
    fn q_scaled_integrality_matches_modular_arithmetic() {
        let p = parabola();
        for q in 1i64..=40 {
            for a in 0..=q {
                let direct = (a * a) % q == 0;
                assert_eq!(p.q_scaled_is_integer(&[a], q), direct, "a={a} q={q}");
            }
        }
    }

    #[test]
    fn q_scaled_nearest_half_square() {
        // f = x^2/2: q f(a/q) = a^2 / (2q)
        let p = RationalPoly::from_i64(1, &[(&[2], 1, 2)]);
        let (b, exact) = p.q_scaled_nearest(&[3], 4);
        // 9/8 -> nearest 1, not exact
        assert_eq!(b, BigInt::from(1));
        assert!(!exact);
        let (b, exact) = p.q_scaled_nearest(&[4], 4);
        // 16/8 = 2 exactly
        assert_eq!(b, BigInt::from(2));
        assert!(exact);
        // halfway: a=2, q=2 -> 4/4=1 exact; a=1,q=1 -> 1/2 rounds up to 1
        let (b, exact) = p.q_scaled_nearest(&[1], 1);
        assert_eq!(b, BigInt::from(1));
        assert!(!exact);
    }

    #[test]
    fn big_fallback_agrees_with_fast_path() {
        let p = RationalPoly::from_i64(2, &[(&[3, 0], 7, 3), (&[1, 2], -5, 6), (&[0, 1], 1, 1)]);
        for q in 1i64..=9 {
            for a0 in -6..=6i64 {
                for a1 in -6..=6i64 {
                    let exact = p.q_scaled_exact(&[a0, a1], q);
                    assert_eq!(
                        p.q_scaled_is_integer(&[a0, a1], q),
                        exact.is_integer()
                    );
                }
            }
        }
    }
}
