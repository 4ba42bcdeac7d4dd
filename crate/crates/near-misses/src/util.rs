//! Shared numeric helpers: compensated accumulation, ulp measurement,
//! deterministic hashing, and fixed-width float formatting.

/// Neumaier-compensated accumulator. Adding values in a fixed order gives a
/// result independent of how the work producing them was scheduled.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Distance from `x` to the next representable float above it.
pub fn ulp(x: f64) -> f64 {
    let a = x.abs();
    if !a.is_finite() {
        return f64::NAN;
    }
    if a == f64::MAX {
        return a - f64::from_bits(a.to_bits() - 1);
    }
    f64::from_bits(a.to_bits() + 1) - a
}

/// Distance from `t` to the nearest integer.
pub fn dist_to_nearest_int(t: f64) -> f64 {
    (t - t.round()).abs()
}

/// FNV-1a over bytes; used for config fingerprints in run manifests.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Format with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Integer range of `a` with `a/q` in `[lo, hi]`, snapping products that are
/// within a relative 1e-9 of an integer so closed-box endpoints are kept.
pub fn lattice_range(q: u64, lo: f64, hi: f64) -> (i64, i64) {
    let qf = q as f64;
    let eps_lo = 1e-9 * (1.0 + (qf * lo).abs());
    let eps_hi = 1e-9 * (1.0 + (qf * hi).abs());
    let a0 = (qf * lo - eps_lo).ceil() as i64;
    let a1 = (qf * hi + eps_hi).floor() as i64;
    (a0, a1)
}

/// Ordinary least squares of y against x: (slope, intercept, stderr of slope).
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&u, &v)| (u - mx) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&u, &v)| {
            let r = v - (intercept + slope * u);
            r * r
        })
        .sum();
    let dof = (x.len().max(3) - 2) as f64;
    let se = (ss_res / dof / sxx).sqrt();
    (slope, intercept, se)
}

/// Run `body` on a dedicated pool of `threads` workers, or on the current
/// (global) pool when `threads == 0`.
pub fn with_threads<R: Send>(threads: usize, body: impl FnOnce() -> R + Send) -> R {
    if threads == 0 {
        body()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool construction");
        pool.install(body)
    }
}

/// Adaptive Simpson quadrature for smooth non-oscillatory integrands.
/// Deterministic recursion order; absolute tolerance.
pub fn integrate_1d(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_recovers_cancellation() {
        let mut acc = Accumulator::new();
        acc.add(1e16);
        acc.add(1.0);
        acc.add(-1e16);
        assert_eq!(acc.total(), 1.0);
    }

    #[test]
    fn ulp_matches_epsilon_at_one() {
        assert_eq!(ulp(1.0), f64::EPSILON);
        assert!(ulp(0.0) > 0.0);
    }

    #[test]
    fn lattice_range_keeps_exact_endpoints() {
        assert_eq!(lattice_range(10, 0.0, 1.0), (0, 10));
        // 10 * 0.1 rounds slightly above 1; the snap keeps a = 1.
        assert_eq!(lattice_range(10, 0.1, 0.9), (1, 9));
        assert_eq!(lattice_range(5, -0.8, 0.8), (-4, 4));
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let (s, b, se) = ols_slope(&x, &y);
        assert!((s - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn simpson_on_smooth_integrands() {
        let v = integrate_1d(&|x: f64| x * x, 0.0, 1.0, 1e-12);
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        let v = integrate_1d(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        // flat-at-the-ends bump, full mass on [-1, 1]
        let bump = |x: f64| {
            let s = 1.0 - x * x;
            if s <= 0.0 {
                0.0
            } else {
                (-1.0 / s).exp()
            }
        };
        let v = integrate_1d(&bump, -1.0, 1.0, 1e-13);
        assert!((v - 0.44399381616807943782).abs() < 1e-12, "got {v}");
    }
}
