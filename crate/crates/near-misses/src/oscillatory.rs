//! Oscillatory integrals against surface charts.
//!
//! The central object is
//!
//! ```text
//! I(j, k; q) = integral of w(x) e(q (j f(x) - k . x)) dx,   e(t) = e^{2 pi i t},
//! ```
//!
//! evaluated by adaptive Gauss-Kronrod panels pre-split to the oscillation
//! density. Frequencies k are classified against the dual geometry: inside
//! the image of the weight support (stationary phase applies), separated
//! from it by the margin `rho` (non-stationary decay), or in the boundary
//! shell between. The module also checks the Poisson summation identity
//! relating the lattice sum over a/q to the k-sum of these integrals, with
//! the truncation tail controlled by a conservative fourth-power decay law.

use crate::counting::WeightFunction;
use crate::duality::{DualChart, DualGeometry, DualityError};
use crate::surfaces::{BoxDomain, MongeChart, Surface};
use crate::util::Accumulator;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OscError {
    #[error("quadrature budget exhausted: best estimate {est_re:.6e}{est_im:+.6e}i, error estimate {err_est:.3e} above tolerance {tol:.3e}")]
    AccuracyBudget {
        est_re: f64,
        est_im: f64,
        err_est: f64,
        tol: f64,
    },
    #[error("no critical point: k/j outside the gradient image for j={j}, k={k:?}")]
    NoCriticalPoint { j: u64, k: Vec<i64> },
    #[error("degenerate Hessian in stationary phase: {detail}")]
    DegenerateHessian { detail: String },
    #[error("invalid oscillatory query: {detail}")]
    InvalidQuery { detail: String },
    #[error(transparent)]
    Duality(#[from] DualityError),
}

/// One frequency probe of the surface: `I(j, k; q)` with the quadrature
/// tolerance it should be resolved to.
#[derive(Clone, Debug)]
pub struct OscillatoryQuery {
    pub j: u64,
    pub k: Vec<i64>,
    pub q: u64,
    pub quad_tol: f64,
}

impl OscillatoryQuery {
    pub fn new(j: u64, k: Vec<i64>, q: u64) -> Self {
        Self { j, k, q, quad_tol: 1e-9 }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self
    }

    fn validate(&self, dim: usize) -> Result<(), OscError> {
        if self.j == 0 || self.q == 0 {
            return Err(OscError::InvalidQuery { detail: "j and q must be positive".into() });
        }
        if self.k.len() != dim {
            return Err(OscError::InvalidQuery {
                detail: format!("k has {} components, chart base dimension is {dim}", self.k.len()),
            });
        }
        if !(self.quad_tol > 0.0 && self.quad_tol <= 1e-3) {
            return Err(OscError::InvalidQuery {
                detail: format!("quad_tol {} outside (0, 1e-3]", self.quad_tol),
            });
        }
        Ok(())
    }
}

#[inline]
fn e_unit(t: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * t).sin_cos();
    Complex64::new(c, s)
}

// Gauss-Kronrod 7-15 pair, QUADPACK dqk15 constants.
const XK: [f64; 8] = [
    0.0,
    0.207_784_955_007_898_5,
    0.405_845_151_377_397_2,
    0.586_087_235_467_691_1,
    0.741_531_185_599_394_4,
    0.864_864_423_359_769_1,
    0.949_107_912_342_758_5,
    0.991_455_371_120_812_6,
];
const WK: [f64; 8] = [
    0.209_482_141_084_727_8,
    0.204_432_940_075_298_9,
    0.190_350_578_064_785_4,
    0.169_004_726_639_267_9,
    0.140_653_259_715_525_9,
    0.104_790_010_322_250_2,
    0.063_092_092_629_978_55,
    0.022_935_322_010_529_22,
];
// Gauss weights attach to XK indices 0, 2, 4, 6.
const WG: [f64; 4] = [
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];

/// One Kronrod panel: value, error estimate, and the QUADPACK-style
/// rescaling of the raw Gauss-Kronrod difference.
fn gk15<F: Fn(f64) -> Complex64 + ?Sized>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = WK[0] * fc;
    let mut resg = WG[0] * fc;
    let mut resabs = WK[0] * fc.norm();
    let mut fv = [Complex64::ZERO; 8];
    fv[0] = fc;
    for i in 1..8 {
        let f1 = f(c - h * XK[i]);
        let f2 = f(c + h * XK[i]);
        fv[i] = f1 + f2;
        resk += WK[i] * fv[i];
        resabs += WK[i] * (f1.norm() + f2.norm());
        if i % 2 == 0 {
            resg += WG[i / 2] * fv[i];
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WK[0] * (fv[0] - reskh).norm();
    for i in 1..8 {
        resasc += WK[i] * (fv[i] - reskh).norm();
    }
    let value = resk * h;
    let raw = (resk - resg).norm() * h.abs();
    let resasc = resasc * h.abs();
    let err = if resasc > 0.0 && raw > 0.0 {
        resasc * (200.0 * raw / resasc).powf(1.5).min(1.0)
    } else {
        raw
    };
    // floor at the rounding noise of the absolute integral
    let floor = 50.0 * f64::EPSILON * resabs * h.abs();
    (value, err.max(floor))
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
}

const MAX_PANELS_1D: usize = 300_000;
const MAX_ROUNDS: usize = 40;
/// Pre-split density relative to the oscillation cycle count; at this
/// density the Kronrod error estimate already sits near 1e-10 per cycle.
const PANELS_PER_CYCLE: f64 = 1.3;

/// Adaptive 1D quadrature: uniform pre-split to the oscillation density,
/// then synchronous refinement rounds that bisect every panel whose error
/// estimate exceeds its share of the tolerance. Panel order is positional
/// throughout, so the compensated final sum is deterministic.
fn integrate_osc_1d<F: Fn(f64) -> Complex64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    cycles: f64,
) -> (Complex64, f64, bool) {
    let initial = ((PANELS_PER_CYCLE * cycles).ceil() as usize + 2).clamp(1, 60_000);
    let mut panels: Vec<Panel> = (0..initial)
        .map(|i| {
            let pa = a + (b - a) * i as f64 / initial as f64;
            let pb = a + (b - a) * (i + 1) as f64 / initial as f64;
            let (value, err) = gk15(f, pa, pb);
            Panel { a: pa, b: pb, value, err }
        })
        .collect();
    let mut ok = true;
    for _ in 0..MAX_ROUNDS {
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err <= tol {
            break;
        }
        let share = tol / (2.0 * panels.len() as f64);
        if panels.len() >= MAX_PANELS_1D || !panels.iter().any(|p| p.err > share) {
            ok = total_err <= tol;
            break;
        }
        panels = panels
            .iter()
            .flat_map(|p| {
                if p.err > share {
                    let m = 0.5 * (p.a + p.b);
                    let (v1, e1) = gk15(f, p.a, m);
                    let (v2, e2) = gk15(f, m, p.b);
                    vec![Panel { a: p.a, b: m, value: v1, err: e1 }, Panel { a: m, b: p.b, value: v2, err: e2 }]
                } else {
                    vec![*p]
                }
            })
            .collect();
    }
    let mut re = Accumulator::new();
    let mut im = Accumulator::new();
    let mut err: f64 = 0.0;
    for p in &panels {
        re.add(p.value.re);
        im.add(p.value.im);
        err += p.err;
    }
    if err > tol {
        ok = false;
    }
    (Complex64::new(re.total(), im.total()), err, ok)
}

/// Tensor 2D quadrature: the outer axis is panelized like the 1D case and
/// every outer node runs an inner 1D integral. Outer panels are evaluated
/// in parallel but merged in positional order, so results do not depend on
/// the thread count.
fn integrate_osc_2d<F: Fn(f64, f64) -> Complex64 + Sync + ?Sized>(
    f: &F,
    bx: &BoxDomain,
    tol: f64,
    cycles: [f64; 2],
) -> (Complex64, f64, bool) {
    let (a0, b0) = (bx.lo[0], bx.hi[0]);
    let (a1, b1) = (bx.lo[1], bx.hi[1]);
    let inner_tol = tol / (4.0 * (b0 - a0));
    let inner_fail = AtomicBool::new(false);
    let eval_panel = |pa: f64, pb: f64| -> Panel {
        let inner = |x0: f64| -> Complex64 {
            let g = |x1: f64| f(x0, x1);
            let (v, _, ok) = integrate_osc_1d(&g, a1, b1, inner_tol, cycles[1]);
            if !ok {
                inner_fail.store(true, Ordering::Relaxed);
            }
            v
        };
        let (value, err) = gk15(&inner, pa, pb);
        Panel { a: pa, b: pb, value, err }
    };

    let initial = ((PANELS_PER_CYCLE * cycles[0]).ceil() as usize + 2).clamp(1, 30_000);
    let edges: Vec<(f64, f64)> = (0..initial)
        .map(|i| {
            (
                a0 + (b0 - a0) * i as f64 / initial as f64,
                a0 + (b0 - a0) * (i + 1) as f64 / initial as f64,
            )
        })
        .collect();
    let mut panels: Vec<Panel> = edges.par_iter().map(|&(pa, pb)| eval_panel(pa, pb)).collect();
    let mut ok = true;
    for _ in 0..MAX_ROUNDS {
        let kron_err: f64 = panels.iter().map(|p| p.err).sum();
        if kron_err <= 0.5 * tol {
            break;
        }
        let share = tol / (4.0 * panels.len() as f64);
        if panels.len() >= 120_000 || !panels.iter().any(|p| p.err > share) {
            ok = kron_err <= 0.5 * tol;
            break;
        }
        let tasks: Vec<(f64, f64)> = panels
            .iter()
            .flat_map(|p| {
                if p.err > share {
                    let m = 0.5 * (p.a + p.b);
                    vec![(p.a, m), (m, p.b)]
                } else {
                    vec![(p.a, p.b)]
                }
            })
            .collect();
        panels = tasks
            .par_iter()
            .zip(panels.iter().flat_map(|p| {
                if p.err > share {
                    vec![None, None]
                } else {
                    vec![Some(*p)]
                }
            }).collect::<Vec<_>>())
            .map(|(&(pa, pb), cached)| cached.unwrap_or_else(|| eval_panel(pa, pb)))
            .collect();
    }
    let mut re = Accumulator::new();
    let mut im = Accumulator::new();
    let mut err: f64 = 0.0;
    for p in &panels {
        re.add(p.value.re);
        im.add(p.value.im);
        err += p.err;
    }
    // inner integrals contribute at most their tolerance times the outer measure
    err += inner_tol * (b0 - a0) * 2.0;
    if err > tol || inner_fail.load(Ordering::Relaxed) {
        ok = false;
    }
    (Complex64::new(re.total(), im.total()), err, ok)
}

/// Per-axis oscillation cycle counts of `q (j f - k . x)` over a box,
/// estimated from the gradient sampled on a coarse grid.
fn cycle_counts(chart: &MongeChart, j: u64, k: &[i64], q: u64, bx: &BoxDomain) -> Vec<f64> {
    let d = chart.dim();
    let samples = 17usize;
    let mut max_rate = vec![0.0f64; d];
    let mut idx = vec![0usize; d];
    let mut g = vec![0.0; d];
    loop {
        let x: Vec<f64> = (0..d)
            .map(|i| bx.lo[i] + (bx.hi[i] - bx.lo[i]) * idx[i] as f64 / (samples - 1) as f64)
            .collect();
        chart.gradient_into(&x, &mut g);
        for i in 0..d {
            let rate = (j as f64 * g[i] - k[i] as f64).abs();
            max_rate[i] = max_rate[i].max(rate);
        }
        let mut axis = 0;
        loop {
            if axis == d {
                return (0..d)
                    .map(|i| q as f64 * max_rate[i] * (bx.hi[i] - bx.lo[i]) + 2.0)
                    .collect();
            }
            idx[axis] += 1;
            if idx[axis] < samples {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Evaluate `I(j, k; q)` over the support of the weight by oscillation-aware
/// adaptive quadrature. The error estimate must meet `quad_tol`; otherwise
/// the budget error carries the best estimate.
pub fn integral_quadrature(
    chart: &MongeChart,
    w: &WeightFunction,
    query: &OscillatoryQuery,
) -> Result<Complex64, OscError> {
    let d = chart.dim();
    query.validate(d)?;
    assert_eq!(w.dim(), d);
    let support = w.support();
    let dom = chart.bounds();
    assert!(
        support.lo.iter().zip(&dom.lo).all(|(s, l)| s >= l)
            && support.hi.iter().zip(&dom.hi).all(|(s, h)| s <= h),
        "weight support must lie inside the chart domain"
    );
    let cycles = cycle_counts(chart, query.j, &query.k, query.q, &support);
    let qf = query.q as f64;
    let jf = query.j as f64;
    match d {
        1 => {
            let k0 = query.k[0] as f64;
            let f1 = |x: f64| {
                let xs = [x];
                let wv = w.eval(&xs);
                if wv == 0.0 {
                    return Complex64::ZERO;
                }
                wv * e_unit(qf * (jf * chart.value(&xs) - k0 * x))
            };
            let (value, err, ok) =
                integrate_osc_1d(&f1, support.lo[0], support.hi[0], query.quad_tol, cycles[0]);
            if ok {
                Ok(value)
            } else {
                Err(OscError::AccuracyBudget {
                    est_re: value.re,
                    est_im: value.im,
                    err_est: err,
                    tol: query.quad_tol,
                })
            }
        }
        2 => {
            let (k0, k1) = (query.k[0] as f64, query.k[1] as f64);
            let f2 = |x0: f64, x1: f64| {
                let xs = [x0, x1];
                let wv = w.eval(&xs);
                if wv == 0.0 {
                    return Complex64::ZERO;
                }
                wv * e_unit(qf * (jf * chart.value(&xs) - k0 * x0 - k1 * x1))
            };
            let (value, err, ok) =
                integrate_osc_2d(&f2, &support, query.quad_tol, [cycles[0], cycles[1]]);
            if ok {
                Ok(value)
            } else {
                Err(OscError::AccuracyBudget {
                    est_re: value.re,
                    est_im: value.im,
                    err_est: err,
                    tol: query.quad_tol,
                })
            }
        }
        d => panic!("oscillatory quadrature not implemented for {d} base dimensions"),
    }
}

/// Frequency class of `k` relative to the dual geometry at order `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KClass {
    /// `k/j` inside the image of the weight support: stationary phase.
    K1,
    /// `k/j` at distance at least `rho` from that image: non-stationary decay.
    K2,
    /// the boundary shell between the two.
    K3,
}

pub fn classify_k(j: u64, k: &[i64], geometry: &DualGeometry) -> KClass {
    assert!(j > 0);
    let y: Vec<f64> = k.iter().map(|&ki| ki as f64 / j as f64).collect();
    if geometry.in_v(&y) {
        KClass::K1
    } else if geometry.dist_to_v(&y) >= geometry.rho {
        KClass::K2
    } else {
        KClass::K3
    }
}

/// Count the frequencies at order `j` that are not in the far class, i.e.
/// need stationary-phase or shell treatment. Grows like j^dim.
pub fn near_class_count(j: u64, geometry: &DualGeometry) -> usize {
    let d = geometry.chart().dim();
    let vb = &geometry.v_box;
    let pad = geometry.rho + 2.0 / j as f64;
    let lo: Vec<i64> = (0..d).map(|i| ((vb.lo[i] - pad) * j as f64).floor() as i64 - 1).collect();
    let hi: Vec<i64> = (0..d).map(|i| ((vb.hi[i] + pad) * j as f64).ceil() as i64 + 1).collect();
    let mut count = 0usize;
    let mut k = lo.clone();
    loop {
        if classify_k(j, &k, geometry) != KClass::K2 {
            count += 1;
        }
        let mut axis = 0;
        loop {
            if axis == d {
                return count;
            }
            k[axis] += 1;
            if k[axis] <= hi[axis] {
                break;
            }
            k[axis] = lo[axis];
            axis += 1;
        }
    }
}

/// Critical point of the phase `j f(x) - k . x`: the gradient inverse of
/// `k/j`, with the phase value there, which equals `-f*(k/j)`.
#[derive(Clone, Debug)]
pub struct CriticalPoint {
    pub x: Vec<f64>,
    /// `f(x*) - (k/j) . x* = -f*(k/j)`.
    pub phase: f64,
}

pub fn critical_point(dual: &DualChart, j: u64, k: &[i64]) -> Result<CriticalPoint, OscError> {
    assert!(j > 0);
    let y: Vec<f64> = k.iter().map(|&ki| ki as f64 / j as f64).collect();
    let x = dual.grad_star(&y).map_err(|e| match e {
        DualityError::NonConvergence { .. } => OscError::NoCriticalPoint { j, k: k.to_vec() },
        other => OscError::Duality(other),
    })?;
    let g = dual.base().gradient(&x);
    let station: f64 = g
        .iter()
        .zip(&y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
        * j as f64;
    assert!(station <= 1e-9, "phase gradient {station:.3e} at claimed critical point");
    let phase = -(dual.f_star(&y)?);
    Ok(CriticalPoint { x, phase })
}

/// Leading stationary-phase term and the quadrature value it approximates.
#[derive(Clone, Debug)]
pub struct StationaryPhaseResult {
    pub value: Complex64,
    pub critical_point: Vec<f64>,
    pub sigma: i32,
    /// |det hess f| at the critical point.
    pub delta: f64,
    pub leading: Complex64,
    /// reference decay exponent -(n+1)/2 of the correction term
    pub err_bound_exponent: f64,
}

/// Leading term `w(x*) Delta^{-1/2} (qj)^{-(n-1)/2} e(-qj f*(k/j) + sigma/8)`
/// together with the quadrature evaluation of the full integral.
pub fn stationary_phase_approx(
    dual: &DualChart,
    w: &WeightFunction,
    query: &OscillatoryQuery,
) -> Result<StationaryPhaseResult, OscError> {
    let chart = dual.base();
    let d = chart.dim();
    query.validate(d)?;
    let lambda = query.q as f64 * query.j as f64;
    assert!(lambda >= 1.0);
    let cp = critical_point(dual, query.j, &query.k)?;
    let h = chart.hessian(&cp.x);
    let sigma = h
        .signature(1e-9)
        .ok_or_else(|| OscError::DegenerateHessian {
            detail: format!("eigenvalue within 1e-9 of zero at {:?}", cp.x),
        })?;
    let delta = h.det().abs();
    let amp = w.eval(&cp.x) / delta.sqrt() * lambda.powf(-(d as f64) / 2.0);
    let leading = amp * e_unit(lambda * cp.phase + sigma as f64 / 8.0);
    let value = integral_quadrature(chart, w, query)?;
    Ok(StationaryPhaseResult {
        value,
        critical_point: cp.x,
        sigma,
        delta,
        leading,
        err_bound_exponent: -((d + 2) as f64) / 2.0,
    })
}

/// Magnitudes of a far-class integral along a q-sweep, with the fitted
/// log-log slope against `lambda_1 = q . dist(k, jV)`.
#[derive(Clone, Debug)]
pub struct DecayReport {
    pub lambda1: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub slope: f64,
}

pub fn nonstationary_decay(
    chart: &MongeChart,
    w: &WeightFunction,
    geometry: &DualGeometry,
    j: u64,
    k: &[i64],
    qs: &[u64],
    quad_tol: f64,
) -> Result<DecayReport, OscError> {
    assert_eq!(classify_k(j, k, geometry), KClass::K2, "sweep frequency must be far-class");
    let y: Vec<f64> = k.iter().map(|&ki| ki as f64 / j as f64).collect();
    let dist = geometry.dist_to_v(&y) * j as f64;
    let mut lambda1 = Vec::new();
    let mut magnitude = Vec::new();
    for &q in qs {
        let query = OscillatoryQuery::new(j, k.to_vec(), q).with_tol(quad_tol);
        let v = integral_quadrature(chart, w, &query)?;
        lambda1.push(q as f64 * dist);
        magnitude.push(v.norm());
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = lambda1
        .iter()
        .zip(&magnitude)
        .filter(|&(_, &m)| m > 1e-14)
        .map(|(&l, &m)| (l.ln(), m.ln()))
        .unzip();
    let (slope, _, _) = crate::util::ols_slope(&xs, &ys);
    Ok(DecayReport { lambda1, magnitude, slope })
}

/// Both sides of the Poisson identity at one (j, q), with the bookkeeping
/// that justifies the truncation: the k-sum is extended ring by ring until
/// the fourth-power tail estimate falls below `tail_budget`.
#[derive(Clone, Debug)]
pub struct PoissonReport {
    pub j: u64,
    pub q: u64,
    pub lattice_sum: Complex64,
    pub dual_sum: Complex64,
    pub residual: f64,
    pub k_count: usize,
    pub truncation_radius: f64,
    pub tail_bound: f64,
    pub quad_error_budget: f64,
}

const POISSON_TAIL_BUDGET: f64 = 1e-8;

/// Lattice side: sum of w(a/q) e(j q f(a/q)) over integer points of the
/// support, accumulated in a fixed order.
fn lattice_exponential_sum(
    chart: &MongeChart,
    w: &WeightFunction,
    j: u64,
    q: u64,
) -> Complex64 {
    let d = chart.dim();
    let support = w.support();
    let qf = q as f64;
    let lo: Vec<i64> = (0..d).map(|i| (support.lo[i] * qf).ceil() as i64).collect();
    let hi: Vec<i64> = (0..d).map(|i| (support.hi[i] * qf).floor() as i64).collect();
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return Complex64::ZERO;
    }
    let mut re = Accumulator::new();
    let mut im = Accumulator::new();
    let mut a = lo.clone();
    let mut x = vec![0.0; d];
    loop {
        for i in 0..d {
            x[i] = a[i] as f64 / qf;
        }
        let wv = w.eval(&x);
        if wv != 0.0 {
            let v = wv * e_unit(j as f64 * qf * chart.value(&x));
            re.add(v.re);
            im.add(v.im);
        }
        let mut axis = 0;
        loop {
            if axis == d {
                return Complex64::new(re.total(), im.total());
            }
            a[axis] += 1;
            if a[axis] <= hi[axis] {
                break;
            }
            a[axis] = lo[axis];
            axis += 1;
        }
    }
}

/// All k in the box `jV` expanded by `radius` in every direction.
fn k_candidates(geometry: &DualGeometry, j: u64, radius: f64) -> Vec<Vec<i64>> {
    let d = geometry.chart().dim();
    let vb = &geometry.v_box;
    let jf = j as f64;
    let lo: Vec<i64> = (0..d).map(|i| (vb.lo[i] * jf - radius).floor() as i64).collect();
    let hi: Vec<i64> = (0..d).map(|i| (vb.hi[i] * jf + radius).ceil() as i64).collect();
    let mut out = Vec::new();
    let mut k = lo.clone();
    loop {
        out.push(k.clone());
        let mut axis = 0;
        loop {
            if axis == d {
                return out;
            }
            k[axis] += 1;
            if k[axis] <= hi[axis] {
                break;
            }
            k[axis] = lo[axis];
            axis += 1;
        }
    }
}

/// Check the Poisson identity: lattice sum = q^{n-1} x sum over k of
/// I(j, k; q). Frequencies are grouped into integer distance rings around
/// jV; rings are added until the conservative tail estimate (fourth-power
/// decay with the constant fitted from the measured rings) is below 1e-8.
/// `trunc_override` forces a fixed truncation radius instead.
pub fn poisson_check(
    chart: &MongeChart,
    w: &WeightFunction,
    j: u64,
    q: u64,
    trunc_override: Option<f64>,
    quad_tol: f64,
) -> Result<PoissonReport, OscError> {
    let d = chart.dim();
    assert!(d <= 2);
    let geometry = dual_geometry_cached(chart, w)?;
    let lattice = lattice_exponential_sum(chart, w, j, q);

    let jf = j as f64;
    let max_radius = trunc_override.unwrap_or(14.0);
    let candidates = k_candidates(&geometry, j, max_radius);
    // distance of each k to jV, in k-space units
    let with_dist: Vec<(Vec<i64>, f64)> = candidates
        .into_iter()
        .map(|k| {
            let y: Vec<f64> = k.iter().map(|&ki| ki as f64 / jf).collect();
            let dist = geometry.dist_to_v(&y) * jf;
            (k, dist)
        })
        .collect();

    let ring_of = |dist: f64| dist.floor() as usize;
    let max_ring = trunc_override.map(|r| r as usize).unwrap_or(14);
    let scale = (q as f64).powi(d as i32);
    // k-space perimeter of the jV box feeds the ring population model
    let perimeter: f64 = if d == 1 {
        0.0
    } else {
        2.0 * (0..d).map(|i| (geometry.v_box.hi[i] - geometry.v_box.lo[i]) * jf).sum::<f64>()
    };

    // evaluate ring by ring until the scaled tail estimate clears the budget
    let mut evaluated: Vec<(Vec<i64>, f64, Complex64)> = Vec::new();
    let mut decay_const: f64 = 0.0;
    let mut rings_done = 0usize;
    let mut tail = f64::INFINITY;
    for ring in 0..=max_ring {
        let members: Vec<&(Vec<i64>, f64)> =
            with_dist.iter().filter(|(_, dist)| ring_of(*dist) == ring).collect();
        let vals: Vec<(Vec<i64>, f64, Complex64)> = members
            .par_iter()
            .map(|(k, dist)| {
                let query = OscillatoryQuery::new(j, k.clone(), q).with_tol(quad_tol);
                integral_quadrature(chart, w, &query).map(|v| (k.clone(), *dist, v))
            })
            .collect::<Result<_, _>>()?;
        for (k, dist, v) in vals {
            if dist >= 1.0 {
                decay_const = decay_const.max(v.norm() * (q as f64 * dist).powi(4));
            }
            evaluated.push((k, dist, v));
        }
        rings_done = ring;
        if trunc_override.is_none() && ring >= 2 {
            tail = scale * tail_estimate(d, q, ring as f64 + 1.0, decay_const, perimeter);
            if tail < POISSON_TAIL_BUDGET {
                break;
            }
        }
    }
    if trunc_override.is_some() {
        tail = scale * tail_estimate(d, q, max_ring as f64 + 1.0, decay_const, perimeter);
    }

    // fixed lexicographic order for the compensated merge
    evaluated.sort_by(|(ka, _, _), (kb, _, _)| ka.cmp(kb));
    let mut re = Accumulator::new();
    let mut im = Accumulator::new();
    for (_, _, v) in &evaluated {
        re.add(v.re);
        im.add(v.im);
    }
    let dual_sum = Complex64::new(re.total(), im.total()) * scale;
    let residual = (lattice - dual_sum).norm();
    Ok(PoissonReport {
        j,
        q,
        lattice_sum: lattice,
        dual_sum,
        residual,
        k_count: evaluated.len(),
        truncation_radius: rings_done as f64 + 1.0,
        tail_bound: tail,
        quad_error_budget: evaluated.len() as f64 * quad_tol * scale,
    })
}

/// Tail of the ring sum beyond `from`, assuming ring magnitudes at distance
/// t decay like decay_const (q t)^{-4} and ring populations grow linearly
/// around the jV perimeter. Unscaled: the caller applies q^{n-1}.
fn tail_estimate(d: usize, q: u64, from: f64, decay_const: f64, perimeter: f64) -> f64 {
    if decay_const == 0.0 {
        return 0.0;
    }
    let mut tail = 0.0;
    let mut s = from;
    loop {
        let count = if d == 1 { 2.0 } else { 8.0 * (s + 2.0) + perimeter };
        let term = count * decay_const * (q as f64 * s).powi(-4);
        tail += term;
        if term < 1e-18 * tail.max(1e-300) || s > from + 1e4 {
            return tail;
        }
        s += 1.0;
    }
}

fn dual_geometry_cached(
    chart: &MongeChart,
    w: &WeightFunction,
) -> Result<DualGeometry, OscError> {
    Ok(crate::duality::dual_geometry(chart, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duality::{dual_geometry, legendre_dual};
    use crate::poly::RationalPoly;

    fn bump2(r: f64) -> WeightFunction {
        WeightFunction::radial_bump(vec![0.0, 0.0], r)
    }

    #[test]
    fn kronrod_constants_are_consistent() {
        let wk_sum: f64 = WK[0] + 2.0 * WK[1..].iter().sum::<f64>();
        assert!((wk_sum - 2.0).abs() < 1e-14);
        let wg_sum: f64 = WG[0] + 2.0 * WG[1..].iter().sum::<f64>();
        assert!((wg_sum - 2.0).abs() < 1e-14);
        // degree-10 polynomial is integrated exactly by both rules
        let f = |x: f64| Complex64::new(x.powi(10), 0.0);
        let (v, _) = gk15(&f, 0.0, 1.0);
        assert!((v.re - 1.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn zero_phase_reduces_to_weight_mass() {
        let flat = MongeChart::polynomial(
            "flat",
            2,
            RationalPoly::from_i64(1, &[]),
            BoxDomain::new(vec![0.0], vec![1.0]),
        );
        let w = WeightFunction::radial_bump(vec![0.5], 0.3);
        let v = integral_quadrature(&flat, &w, &OscillatoryQuery::new(1, vec![0], 17)).unwrap();
        assert!((v.re - w.w_hat_zero()).abs() < 1e-10);
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn parabola_frozen_value() {
        let chart = MongeChart::parabola();
        let w = WeightFunction::radial_bump(vec![0.5], 0.3);
        let v = integral_quadrature(
            &chart,
            &w,
            &OscillatoryQuery::new(2, vec![1], 100).with_tol(1e-10),
        )
        .unwrap();
        assert!((v.re - (-0.00103295441991468838)).abs() < 5e-10, "re = {:.18e}", v.re);
        assert!((v.im - (-0.00174399549909654743)).abs() < 5e-10, "im = {:.18e}", v.im);
    }

    #[test]
    fn coarse_tolerance_matches_fine_reference() {
        let chart = MongeChart::paraboloid(2);
        let w = WeightFunction::radial_bump(vec![0.5], 0.25);
        let coarse = integral_quadrature(
            &chart,
            &w,
            &OscillatoryQuery::new(1, vec![0], 50).with_tol(1e-8),
        )
        .unwrap();
        let fine = integral_quadrature(
            &chart,
            &w,
            &OscillatoryQuery::new(1, vec![0], 50).with_tol(1e-12),
        )
        .unwrap();
        assert!((coarse - fine).norm() < 1e-8);
    }

    #[test]
    fn zero_weight_region_contributes_nothing() {
        // support strictly right of 0.6; integrand vanishes left of it
        let chart = MongeChart::parabola();
        let w = WeightFunction::radial_bump(vec![0.8], 0.15);
        let v = integral_quadrature(&chart, &w, &OscillatoryQuery::new(1, vec![3], 40)).unwrap();
        let direct = {
            let f = |x: f64| {
                let xs = [x];
                let wv = w.eval(&xs);
                wv * e_unit(40.0 * (chart.value(&xs) - 3.0 * x))
            };
            integrate_osc_1d(&f, 0.65, 0.95, 1e-10, 200.0).0
        };
        assert!((v - direct).norm() < 1e-9);
    }

    #[test]
    fn classification_matches_geometry() {
        let chart = MongeChart::paraboloid(3);
        let w = bump2(0.3);
        let geom = dual_geometry(&chart, &w).unwrap();
        assert_eq!(classify_k(10, &[1, 1], &geom), KClass::K1);
        assert_eq!(classify_k(10, &[100, 0], &geom), KClass::K2);
        // shell frequency: dist in (0, rho); rho ~ 0.25, V radius 0.3
        let shell = (0..80)
            .map(|m| [30 + m, 0])
            .find(|k| {
                let y = [k[0] as f64 / 100.0, 0.0];
                let dist = geom.dist_to_v(&y);
                dist > 0.0 && dist < geom.rho
            })
            .expect("no shell frequency found");
        assert_eq!(classify_k(100, &shell, &geom), KClass::K3);
    }

    #[test]
    fn near_class_count_scales_like_j_squared() {
        let chart = MongeChart::paraboloid(3);
        let w = bump2(0.3);
        let geom = dual_geometry(&chart, &w).unwrap();
        let mut ratios = Vec::new();
        for j in [4u64, 8, 16, 32, 64] {
            let c = near_class_count(j, &geom) as f64 / (j * j) as f64;
            ratios.push(c);
        }
        // constant settles once j resolves the geometry
        let tail: Vec<f64> = ratios[2..].to_vec();
        let (lo, hi) = tail
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &c| (l.min(c), h.max(c)));
        assert!(hi / lo < 1.6, "near-class densities {ratios:?}");
    }

    #[test]
    fn critical_points_of_simple_charts() {
        let dual3 = legendre_dual(&MongeChart::paraboloid(3)).unwrap();
        let cp = critical_point(&dual3, 4, &[2, -1]).unwrap();
        assert!((cp.x[0] - 0.5).abs() < 1e-10 && (cp.x[1] + 0.25).abs() < 1e-10);
        // phase = -f*(k/j) = -|k/j|^2 / 2
        assert!((cp.phase + (0.25 + 0.0625) / 2.0).abs() < 1e-10);

        let dual_p = legendre_dual(&MongeChart::parabola()).unwrap();
        let cp = critical_point(&dual_p, 2, &[1]).unwrap();
        assert!((cp.x[0] - 0.25).abs() < 1e-10);
        assert!((cp.phase + 0.0625).abs() < 1e-10);

        match critical_point(&dual3, 1, &[5, 5]) {
            Err(OscError::NoCriticalPoint { .. }) => {}
            other => panic!("expected no-critical-point, got {other:?}"),
        }
    }

    #[test]
    fn stationary_phase_center_frequency() {
        let chart = MongeChart::paraboloid(3);
        let dual = legendre_dual(&chart).unwrap();
        let w = bump2(0.25);
        let q = 100;
        let res = stationary_phase_approx(
            &dual,
            &w,
            &OscillatoryQuery::new(1, vec![0, 0], q).with_tol(1e-10),
        )
        .unwrap();
        assert_eq!(res.sigma, 2);
        assert!((res.delta - 1.0).abs() < 1e-9);
        // leading = w(0) q^{-1} e(sigma/8) = e^{-1} q^{-1} i
        let expect = Complex64::new(0.0, (-1.0f64).exp() / q as f64);
        assert!((res.leading - expect).norm() < 1e-12);
        assert!((res.value - res.leading).norm() < 1e-3);
        assert!((res.err_bound_exponent + 2.0).abs() < 1e-15);
    }

    #[test]
    fn shell_frequency_with_dead_center_has_zero_leading() {
        // critical point exists but the weight vanishes there
        let chart = MongeChart::paraboloid(3);
        let dual = legendre_dual(&chart).unwrap();
        let w = bump2(0.25);
        let res = stationary_phase_approx(
            &dual,
            &w,
            &OscillatoryQuery::new(2, vec![1, 0], 25).with_tol(1e-9),
        );
        // k/j = (0.5, 0): outside the support radius 0.25
        let res = res.unwrap();
        assert_eq!(res.leading, Complex64::ZERO);
    }

    #[test]
    fn far_class_magnitudes_shrink_with_q() {
        let chart = MongeChart::paraboloid(3);
        let w = bump2(0.25);
        let geom = dual_geometry(&chart, &w).unwrap();
        assert_eq!(classify_k(10, &[6, 0], &geom), KClass::K2);
        let q1 = integral_quadrature(&chart, &w, &OscillatoryQuery::new(10, vec![6, 0], 1))
            .unwrap()
            .norm();
        let q16 = integral_quadrature(&chart, &w, &OscillatoryQuery::new(10, vec![6, 0], 16))
            .unwrap()
            .norm();
        assert!(q16 <= q1, "q=16 magnitude {q16} above q=1 magnitude {q1}");
    }

    #[test]
    fn poisson_identity_one_dimensional() {
        let chart = MongeChart::paraboloid(2);
        let w = WeightFunction::radial_bump(vec![0.5], 0.25);
        let rep = poisson_check(&chart, &w, 2, 13, None, 1e-10).unwrap();
        assert!(
            rep.residual <= rep.quad_error_budget + rep.tail_bound + 1e-8,
            "residual {:.3e} budget {:.3e}+{:.3e}",
            rep.residual,
            rep.quad_error_budget,
            rep.tail_bound
        );
        assert!(rep.residual < 1e-6);
    }

    #[test]
    fn poisson_identity_two_dimensional() {
        // explicit truncation radius: the fitted fourth-power tail law is far
        // looser than the actual decay, so the adaptive rule would keep
        // deepening; radius 8 brings the actual tail below 1e-6
        let chart = MongeChart::paraboloid(3);
        let w = bump2(0.25);
        let rep = poisson_check(&chart, &w, 1, 16, Some(8.0), 1e-9).unwrap();
        assert!(rep.residual < 1e-6, "residual {:.3e}", rep.residual);
        assert!(
            rep.residual <= rep.quad_error_budget + rep.tail_bound + 1e-8,
            "residual {:.3e} above budget {:.3e}+{:.3e}",
            rep.residual,
            rep.quad_error_budget,
            rep.tail_bound
        );
    }
}
