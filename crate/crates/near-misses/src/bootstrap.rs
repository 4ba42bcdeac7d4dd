//! Exponent bookkeeping for the iterated counting bound.
//!
//! The recursion beta_i = n - (n-1)/(2 beta_{i-1} - n + 1), started at
//! beta_1 = n, is carried in exact rational arithmetic. For n = 3 it
//! collapses to beta_i = 2 + 1/i; for larger n the gap beta_i - (n-1)
//! contracts geometrically with factor at most 2/(n-1). The module also
//! evaluates the predicted bound shapes delta Q^n + C^i Q^{beta_i} log Q and
//! the terminal error-term forms.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("beta_prev = {beta_prev} not above n-1 = {limit} (n = {n})")]
    OutOfDomain { n: u32, beta_prev: f64, limit: u32 },
    #[error("iteration schedule needs n >= 3 and Q >= 3, got n = {n}, Q = {q}")]
    ScheduleUndefined { n: u32, q: u64 },
}

fn big(i: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(i))
}

/// One recursion step: n - (n-1)/(2 beta_prev - n + 1), exact.
pub fn beta_step(n: u32, beta_prev: &BigRational) -> Result<BigRational, BootstrapError> {
    let n_i = n as i64;
    if *beta_prev <= big(n_i - 1) {
        return Err(BootstrapError::OutOfDomain {
            n,
            beta_prev: beta_prev.to_f64().unwrap_or(f64::NAN),
            limit: n - 1,
        });
    }
    let denom = big(2) * beta_prev - big(n_i - 1);
    Ok(big(n_i) - big(n_i - 1) / denom)
}

/// The sequence beta_1 = n, beta_2, ..., beta_{i_max}, all exact.
#[derive(Clone, Debug)]
pub struct ExponentSequence {
    pub n: u32,
    /// betas[i-1] holds beta_i.
    pub betas: Vec<BigRational>,
}

impl ExponentSequence {
    /// beta_i, 1-based.
    pub fn beta(&self, i: usize) -> &BigRational {
        &self.betas[i - 1]
    }

    pub fn terminal(&self) -> &BigRational {
        self.betas.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

/// Runs the recursion for i_max steps and cross-checks it on the fly: the
/// n = 3 closed form 2 + 1/i, the gap form
/// beta_i - (n-1) = (beta_{i-1} - (n-1)) / (beta_{i-1} - (n-1)/2), and the
/// contraction factor bound 2/(n-1) for n >= 4.
pub fn exponent_sequence(n: u32, i_max: usize) -> Result<ExponentSequence, BootstrapError> {
    assert!(n >= 2, "recursion defined for ambient dimension >= 2");
    assert!(i_max >= 1);
    let n_i = n as i64;
    let nm1 = big(n_i - 1);
    let half_nm1 = BigRational::new(BigInt::from(n_i - 1), BigInt::from(2));
    let mut betas = Vec::with_capacity(i_max);
    betas.push(big(n_i));
    for i in 2..=i_max {
        let prev = betas.last().unwrap().clone();
        let next = beta_step(n, &prev)?;
        let gap_identity = (&prev - &nm1) / (&prev - &half_nm1);
        assert_eq!(&next - &nm1, gap_identity, "gap recursion identity failed");
        if n == 3 {
            let closed = big(2) + BigRational::new(BigInt::one(), BigInt::from(i as i64));
            assert_eq!(next, closed, "closed form 2 + 1/i failed at i = {i}");
        }
        if n >= 4 {
            let factor = (&next - &nm1) / (&prev - &nm1);
            assert!(
                factor <= BigRational::new(BigInt::from(2), BigInt::from(n_i - 1)),
                "contraction factor exceeded 2/(n-1) at i = {i}"
            );
        }
        assert!(next < prev && next > nm1, "strict decrease toward n-1 failed");
        betas.push(next);
    }
    Ok(ExponentSequence { n, betas })
}

/// Iteration count i(Q): floor(sqrt(log Q)) for n = 3,
/// floor(log log Q / log(3/2)) for n >= 4. Natural logs.
pub fn iteration_schedule(n: u32, q: u64) -> Result<u32, BootstrapError> {
    if n < 3 || q < 3 {
        return Err(BootstrapError::ScheduleUndefined { n, q });
    }
    let lq = (q as f64).ln();
    let i = if n == 3 {
        lq.sqrt().floor()
    } else {
        (lq.ln() / 1.5f64.ln()).floor()
    };
    Ok(i.max(1.0) as u32)
}

/// Terminal error-term shapes: Q^2 exp(c sqrt(log Q)) in ambient dimension 3,
/// Q^{n-1} (log Q)^kappa otherwise. C scales the per-iteration envelope.
#[derive(Clone, Copy, Debug)]
pub struct ErrorTermModel {
    pub n: u32,
    pub c: f64,
    pub kappa: f64,
    pub big_c: f64,
}

impl ErrorTermModel {
    pub fn with_defaults(n: u32) -> Self {
        Self { n, c: 1.0, kappa: 1.0, big_c: 2.0 }
    }

    pub fn error_term(&self, q: f64) -> f64 {
        let lq = q.ln();
        if self.n == 3 {
            q * q * (self.c * lq.sqrt()).exp()
        } else {
            q.powi(self.n as i32 - 1) * lq.powf(self.kappa)
        }
    }

    /// E_n(Q)/Q^{n-1} must grow and E_n(Q)/Q^n must shrink along the grid.
    pub fn check_growth(&self, q_grid: &[f64]) -> bool {
        q_grid.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            let lower = self.error_term(b) / b.powi(self.n as i32 - 1)
                > self.error_term(a) / a.powi(self.n as i32 - 1);
            let upper = self.error_term(b) / b.powi(self.n as i32)
                < self.error_term(a) / a.powi(self.n as i32);
            lower && upper
        })
    }
}

#[derive(Clone, Debug)]
pub struct PredictedBound {
    /// min over i <= schedule of delta Q^n + C^i Q^{beta_i} log Q.
    pub envelope: f64,
    /// 1-based index attaining the envelope.
    pub best_i: usize,
    pub per_iteration: Vec<f64>,
    /// Terminal error-term form E_n(Q).
    pub terminal_error_term: f64,
}

pub fn predicted_bound(
    n: u32,
    q: u64,
    delta: f64,
    model: &ErrorTermModel,
    seq: &ExponentSequence,
) -> PredictedBound {
    assert_eq!(seq.n, n);
    let qf = q as f64;
    let lq = qf.ln();
    let main = delta * qf.powi(n as i32);
    let i_cap = iteration_schedule(n, q)
        .map(|i| i as usize)
        .unwrap_or(seq.len())
        .min(seq.len());
    let mut per_iteration = Vec::with_capacity(i_cap);
    let mut best = f64::INFINITY;
    let mut best_i = 1;
    for i in 1..=i_cap {
        let beta = seq.beta(i).to_f64().unwrap();
        let v = main + model.big_c.powi(i as i32) * qf.powf(beta) * lq;
        per_iteration.push(v);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    PredictedBound {
        envelope: best,
        best_i,
        per_iteration,
        terminal_error_term: model.error_term(qf),
    }
}

/// True when the rational is exactly p/q.
pub fn rational_is(x: &BigRational, p: i64, q: i64) -> bool {
    *x == BigRational::new(BigInt::from(p), BigInt::from(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{Signed, Zero};
    use rand::{Rng, SeedableRng};

    #[test]
    fn first_steps_match_hand_values() {
        let b2 = beta_step(3, &big(3)).unwrap();
        assert!(rational_is(&b2, 5, 2));
        let b3 = beta_step(4, &BigRational::new(BigInt::from(17), BigInt::from(5))).unwrap();
        assert!(rational_is(&b3, 61, 19));
    }

    #[test]
    fn first_iteration_closed_form_all_n() {
        for n in 2..=10u32 {
            let b2 = beta_step(n, &big(n as i64)).unwrap();
            let n_i = n as i64;
            assert!(
                rational_is(&b2, n_i * n_i + 1, n_i + 1),
                "n = {n}: beta_2 should be (n^2+1)/(n+1)"
            );
        }
    }

    #[test]
    fn domain_error_below_fixed_point() {
        assert!(beta_step(3, &big(2)).is_err());
        assert!(beta_step(5, &BigRational::new(BigInt::from(7), BigInt::from(2))).is_err());
    }

    #[test]
    fn n3_closed_form_first_thousand() {
        let seq = exponent_sequence(3, 1000).unwrap();
        for i in 1..=1000 {
            let b = seq.beta(i);
            assert!(*b == big(2) + BigRational::new(BigInt::one(), BigInt::from(i as i64)));
        }
    }

    #[test]
    fn n4_prefix_and_contraction() {
        let seq = exponent_sequence(4, 40).unwrap();
        assert!(rational_is(seq.beta(1), 4, 1));
        assert!(rational_is(seq.beta(2), 17, 5));
        assert!(rational_is(seq.beta(3), 61, 19));
        let nm1 = big(3);
        for i in 2..=40 {
            let f = (seq.beta(i) - &nm1) / (seq.beta(i - 1) - &nm1);
            assert!(f <= BigRational::new(BigInt::from(2), BigInt::from(3)));
        }
    }

    #[test]
    fn gap_identity_on_random_rationals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n = rng.gen_range(3..=9u32);
            let num = rng.gen_range(1..10_000i64);
            let den = rng.gen_range(1..1000i64);
            // x strictly above n-1
            let x = big(n as i64 - 1) + BigRational::new(BigInt::from(num), BigInt::from(den));
            let stepped = beta_step(n, &x).unwrap();
            let lhs = &stepped - big(n as i64 - 1);
            let rhs = (&x - big(n as i64 - 1))
                / (&x - BigRational::new(BigInt::from(n as i64 - 1), BigInt::from(2)));
            assert_eq!(lhs, rhs);
            assert!(lhs.is_positive() && !lhs.is_zero());
        }
    }

    #[test]
    fn schedule_values() {
        assert_eq!(iteration_schedule(3, 8_886_111).unwrap(), 4); // Q just above e^16
        assert_eq!(iteration_schedule(3, 1_000_000).unwrap(), 3);
        assert_eq!(iteration_schedule(4, 1619).unwrap(), 4); // log log Q just above 2
        assert!(iteration_schedule(2, 100).is_err());
        assert!(iteration_schedule(3, 2).is_err());
    }

    #[test]
    fn error_term_growth_window() {
        let grid: Vec<f64> = (1..=6).map(|k| 10f64.powi(k)).collect();
        for n in [3u32, 4, 5] {
            assert!(ErrorTermModel::with_defaults(n).check_growth(&grid));
        }
    }

    #[test]
    fn predicted_bound_shapes() {
        let seq = exponent_sequence(3, 10).unwrap();
        let model = ErrorTermModel::with_defaults(3);
        let pb = predicted_bound(3, 10_000, 0.1, &model, &seq);
        let main = 0.1 * 1e12;
        assert!(pb.envelope > main && pb.envelope < 3.0 * main);
        assert!(
            pb.terminal_error_term < 0.05 * main,
            "main term dominates the terminal error form at this scale"
        );
        let pb0 = predicted_bound(3, 10_000, 0.0, &model, &seq);
        let lq = 10_000f64.ln();
        let by_hand: f64 = (1..=3)
            .map(|i| {
                2f64.powi(i as i32) * 10_000f64.powf(seq.beta(i).to_f64().unwrap()) * lq
            })
            .fold(f64::INFINITY, f64::min);
        assert!((pb0.envelope - by_hand).abs() < 1e-6 * by_hand);
        assert!(pb0.best_i >= 1);
    }
}
