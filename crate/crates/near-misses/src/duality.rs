//! Legendre dual charts.
//!
//! For a graph chart `f` whose gradient map is a diffeomorphism onto its
//! image, the dual chart is
//!
//! ```text
//! f*(y) = y . x - f(x),   x = (grad f)^{-1}(y),
//! ```
//!
//! with `grad f* = (grad f)^{-1}` and `hess f*(y) = (hess f(x))^{-1}`. The
//! inverse gradient is computed by damped Newton iteration; failure to
//! converge doubles as the membership test for the dual domain. The module
//! also measures the geometry attached to a weight: the image `V` of the
//! weight support, the image `R` of the full chart domain, and the
//! separation radius `rho = dist(boundary R, boundary V) / 2` that downstream
//! frequency classification relies on.

use crate::counting::WeightFunction;
use crate::linalg::{dot, SquareMatrix};
use crate::surfaces::{BoxDomain, GridSpec, MongeChart, Surface, SurfaceError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DualityError {
    #[error("curvature precondition failed for {name}: {detail}")]
    Curvature { name: String, detail: String },
    #[error("gradient inversion did not converge at y = {y:?} (residual {residual:.3e})")]
    NonConvergence { y: Vec<f64>, residual: f64 },
    #[error("dual geometry degenerate: rho = {rho:.3e} at sampling resolution {resolution:.3e}")]
    DegenerateGeometry { rho: f64, resolution: f64 },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

/// Default convergence tolerance for the inverse gradient solve.
pub const NEWTON_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 100;
const MAX_HALVINGS: usize = 30;
/// Samples per boundary curve when measuring `rho` in two base dimensions;
/// two boundaries give 10^4 candidate pairs. One-dimensional boundaries are
/// two exact points and need no sampling.
const BOUNDARY_SAMPLES: usize = 100;

fn interior_margin(b: &BoxDomain, x: &[f64]) -> f64 {
    x.iter()
        .zip(b.lo.iter().zip(&b.hi))
        .map(|(&v, (&lo, &hi))| (v - lo).min(hi - v))
        .fold(f64::INFINITY, f64::min)
}

/// Solve `grad f(x) = y` by damped Newton with the Hessian as Jacobian.
///
/// Iterates are clamped to the surface's bounding box, the step is halved
/// until the residual decreases (up to 30 halvings), and the iteration stops
/// after 100 steps. A non-convergent solve is the operational signal that
/// `y` lies outside the image of the gradient map.
pub fn grad_inverse_on<S: Surface + ?Sized>(
    surf: &S,
    y: &[f64],
    tol: f64,
    start: Option<&[f64]>,
) -> Result<Vec<f64>, DualityError> {
    let d = surf.dim();
    assert_eq!(y.len(), d);
    assert!(tol > 0.0);
    let bounds = surf.bounds().clone();
    let clamp = |x: &mut [f64]| {
        for i in 0..d {
            x[i] = x[i].clamp(bounds.lo[i], bounds.hi[i]);
        }
    };
    let mut x = start.map(|s| s.to_vec()).unwrap_or_else(|| bounds.center());
    clamp(&mut x);
    let mut g = vec![0.0; d];
    let mut h = SquareMatrix::zeros(d);
    let residual_at = |x: &[f64], g: &mut [f64]| -> f64 {
        surf.gradient_into(x, g);
        let mut r = 0.0;
        for i in 0..d {
            let e = g[i] - y[i];
            r += e * e;
        }
        r.sqrt()
    };
    let mut res = residual_at(&x, &mut g);
    for _ in 0..MAX_ITERS {
        if res <= tol {
            return Ok(x);
        }
        if !res.is_finite() {
            break;
        }
        surf.hessian_into(&x, &mut h);
        let rhs: Vec<f64> = (0..d).map(|i| g[i] - y[i]).collect();
        let step = match h.solve(&rhs) {
            Some(s) => s,
            None => break,
        };
        let mut scale = 1.0;
        let mut advanced = false;
        for _ in 0..=MAX_HALVINGS {
            let mut trial: Vec<f64> = (0..d).map(|i| x[i] - scale * step[i]).collect();
            clamp(&mut trial);
            let trial_res = residual_at(&trial, &mut g);
            if trial_res.is_finite() && trial_res < res {
                x = trial;
                res = trial_res;
                advanced = true;
                break;
            }
            scale *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    Err(DualityError::NonConvergence { y: y.to_vec(), residual: res })
}

/// Inverse gradient of a chart with the default cold start (domain center).
pub fn grad_inverse(chart: &MongeChart, y: &[f64], tol: f64) -> Result<Vec<f64>, DualityError> {
    grad_inverse_on(chart, y, tol, None)
}

/// Reuses the solution nearest to each new target as the Newton start.
/// Intended for grid sweeps where consecutive targets are close; keep one
/// cache per worker, they are not meant to be shared.
#[derive(Debug, Default)]
pub struct WarmStartCache {
    solved: Vec<(Vec<f64>, Vec<f64>)>,
}

impl WarmStartCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve<S: Surface + ?Sized>(
        &mut self,
        surf: &S,
        y: &[f64],
        tol: f64,
    ) -> Result<Vec<f64>, DualityError> {
        let start = self
            .solved
            .iter()
            .min_by(|(a, _), (b, _)| {
                let da: f64 = a.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                let db: f64 = b.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                da.partial_cmp(&db).unwrap()
            })
            .map(|(_, x)| x.clone());
        let x = grad_inverse_on(surf, y, tol, start.as_deref())?;
        self.solved.push((y.to_vec(), x.clone()));
        Ok(x)
    }
}

/// The Legendre dual of a graph chart, evaluated by inverting the gradient
/// map on demand. `bounds` is an enclosing box of the gradient image; actual
/// membership is operational via `contains` (the Newton solve must converge
/// to an interior point of the base domain).
#[derive(Clone, Debug)]
pub struct DualChart {
    base: MongeChart,
    dual_domain: BoxDomain,
    newton_tol: f64,
}

impl DualChart {
    pub fn base(&self) -> &MongeChart {
        &self.base
    }

    pub fn dual_domain(&self) -> &BoxDomain {
        &self.dual_domain
    }

    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>, DualityError> {
        grad_inverse_on(&self.base, y, self.newton_tol, None)
    }

    /// `f*(y) = y . x - f(x)` at `x = (grad f)^{-1}(y)`.
    pub fn f_star(&self, y: &[f64]) -> Result<f64, DualityError> {
        let x = self.invert(y)?;
        Ok(dot(y, &x) - self.base.value(&x))
    }

    /// `grad f* = (grad f)^{-1}`.
    pub fn grad_star(&self, y: &[f64]) -> Result<Vec<f64>, DualityError> {
        self.invert(y)
    }

    /// `hess f*(y) = (hess f(x))^{-1}` at the inverted point.
    pub fn hess_star(&self, y: &[f64]) -> Result<SquareMatrix, DualityError> {
        let x = self.invert(y)?;
        let h = self.base.hessian(&x);
        h.inverse().ok_or_else(|| DualityError::Curvature {
            name: self.base.name.clone(),
            detail: "singular Hessian at the inverted point".into(),
        })
    }
}

impl Surface for DualChart {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn bounds(&self) -> &BoxDomain {
        &self.dual_domain
    }

    /// NaN outside the dual domain.
    fn value(&self, y: &[f64]) -> f64 {
        self.f_star(y).unwrap_or(f64::NAN)
    }

    fn gradient_into(&self, y: &[f64], g: &mut [f64]) {
        match self.invert(y) {
            Ok(x) => g.copy_from_slice(&x),
            Err(_) => g.fill(f64::NAN),
        }
    }

    fn hessian_into(&self, y: &[f64], h: &mut SquareMatrix) {
        match self.hess_star(y) {
            Ok(m) => *h = m,
            Err(_) => {
                let d = self.base.dim();
                for i in 0..d {
                    for j in 0..d {
                        h.set(i, j, f64::NAN);
                    }
                }
            }
        }
    }

    fn contains(&self, y: &[f64]) -> bool {
        match self.invert(y) {
            Ok(x) => {
                let b = self.base.bounds();
                interior_margin(b, &x) > 1e-9 * b.diameter()
            }
            Err(_) => false,
        }
    }
}

fn construction_grid(dim: usize) -> GridSpec {
    // at least 10^dim points for the curvature and injectivity sweeps
    GridSpec::new(if dim == 1 { 101 } else { 33 }, 0.02)
}

/// Construct the dual chart after verifying the preconditions: curvature
/// bounded away from zero with one sign, an injective gradient map, and the
/// defining identity `f*(grad f(x)) = x . grad f(x) - f(x)` holding to 1e-10
/// on a verification grid.
pub fn legendre_dual(chart: &MongeChart) -> Result<DualChart, DualityError> {
    let grid = construction_grid(chart.dim());
    let window = chart.curvature_window(&grid)?;
    if window.violated {
        return Err(DualityError::Curvature {
            name: chart.name.clone(),
            detail: format!(
                "Hessian determinant window [{:.3e}, {:.3e}] is not bounded away from zero with one sign",
                window.c1_est, window.c2_est
            ),
        });
    }
    let diffeo = chart.check_gradient_diffeo(&grid)?;
    if !diffeo.injective {
        return Err(DualityError::Curvature {
            name: chart.name.clone(),
            detail: "gradient map is not injective on the verification grid".into(),
        });
    }

    // enclosing box of the gradient image, sampled on the closure grid
    let d = chart.dim();
    let closure = GridSpec::new(grid.per_axis, 0.0);
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in closure.points(chart.bounds()) {
        let g = chart.gradient(&p);
        for i in 0..d {
            lo[i] = lo[i].min(g[i]);
            hi[i] = hi[i].max(g[i]);
        }
    }
    for i in 0..d {
        let pad = 1e-12 * (hi[i] - lo[i]).max(1.0);
        lo[i] -= pad;
        hi[i] += pad;
    }
    let dual = DualChart {
        base: chart.clone(),
        dual_domain: BoxDomain::new(lo, hi),
        newton_tol: NEWTON_TOL,
    };

    let mut cache = WarmStartCache::new();
    for x in grid.points(chart.bounds()) {
        let y = chart.gradient(&x);
        let expected = dot(&y, &x) - chart.value(&x);
        let x_hat = cache.solve(&dual.base, &y, dual.newton_tol)?;
        let got = dot(&y, &x_hat) - chart.value(&x_hat);
        if (got - expected).abs() > 1e-10 * expected.abs().max(1.0) {
            return Err(DualityError::Curvature {
                name: chart.name.clone(),
                detail: format!(
                    "dual identity residual {:.3e} at x = {:?}",
                    (got - expected).abs(),
                    x
                ),
            });
        }
    }
    Ok(dual)
}

/// `f**(x)` by numerically inverting `grad f*` on the dual chart (nested
/// Newton, no shortcut through the base gradient). Round-trip accuracy is
/// limited by the inner solves; 1e-10 on the outer residual keeps the value
/// error well under 1e-9.
pub fn double_dual_value(dual: &DualChart, x: &[f64]) -> Result<f64, DualityError> {
    let y_hat = grad_inverse_on(dual, x, 1e-10, None)?;
    Ok(dot(x, &y_hat) - dual.value(&y_hat))
}

/// Dual geometry attached to a weight: boundary sample clouds for the images
/// of the weight support (`V`) and of the chart domain (`R`), their enclosing
/// boxes, and the separation radius `rho`.
#[derive(Clone, Debug)]
pub struct DualGeometry {
    chart: MongeChart,
    weight: WeightFunction,
    newton_tol: f64,
    pub v_box: BoxDomain,
    pub r_box: BoxDomain,
    pub v_boundary: Vec<Vec<f64>>,
    pub r_boundary: Vec<Vec<f64>>,
    pub rho: f64,
}

impl DualGeometry {
    pub fn chart(&self) -> &MongeChart {
        &self.chart
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    /// Interior preimage under the gradient map, if `y` has one.
    pub fn preimage(&self, y: &[f64]) -> Option<Vec<f64>> {
        let x = grad_inverse_on(&self.chart, y, self.newton_tol, None).ok()?;
        let b = self.chart.bounds();
        (interior_margin(b, &x) > 1e-9 * b.diameter()).then_some(x)
    }

    /// Membership in `R`, the gradient image of the chart domain.
    pub fn in_r(&self, y: &[f64]) -> bool {
        self.preimage(y).is_some()
    }

    /// Membership in `V`, the gradient image of the open weight support.
    pub fn in_v(&self, y: &[f64]) -> bool {
        self.preimage(y).is_some_and(|x| self.weight.eval(&x) > 0.0)
    }

    /// Zero inside `V`; otherwise the distance to the sampled boundary cloud.
    pub fn dist_to_v(&self, y: &[f64]) -> f64 {
        if self.in_v(y) {
            return 0.0;
        }
        self.v_boundary
            .iter()
            .map(|b| {
                b.iter()
                    .zip(y)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Boundary samples of the open support of a weight, in walk order.
fn support_boundary(w: &WeightFunction, samples: usize) -> Vec<Vec<f64>> {
    match w {
        WeightFunction::RadialBump { center, radius, .. } => match center.len() {
            1 => vec![vec![center[0] - radius], vec![center[0] + radius]],
            2 => (0..samples)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
                    vec![center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect(),
            d => panic!("boundary sampling not implemented for {d} base dimensions"),
        },
        WeightFunction::BoxRamp { outer, .. } => box_boundary(outer, samples),
    }
}

/// Boundary samples of a box, in walk order.
fn box_boundary(b: &BoxDomain, samples: usize) -> Vec<Vec<f64>> {
    match b.dim() {
        1 => vec![vec![b.lo[0]], vec![b.hi[0]]],
        2 => {
            let per_edge = (samples / 4).max(1);
            let (lx, ly, hx, hy) = (b.lo[0], b.lo[1], b.hi[0], b.hi[1]);
            let mut out = Vec::with_capacity(4 * per_edge);
            for k in 0..per_edge {
                let t = k as f64 / per_edge as f64;
                out.push(vec![lx + t * (hx - lx), ly]);
            }
            for k in 0..per_edge {
                let t = k as f64 / per_edge as f64;
                out.push(vec![hx, ly + t * (hy - ly)]);
            }
            for k in 0..per_edge {
                let t = k as f64 / per_edge as f64;
                out.push(vec![hx - t * (hx - lx), hy]);
            }
            for k in 0..per_edge {
                let t = k as f64 / per_edge as f64;
                out.push(vec![lx, hy - t * (hy - ly)]);
            }
            out
        }
        d => panic!("boundary sampling not implemented for {d} base dimensions"),
    }
}

/// Largest gap between adjacent samples of a closed boundary walk. Exact
/// two-point boundaries (one base dimension) have no sampling error.
fn cloud_resolution(cloud: &[Vec<f64>]) -> f64 {
    if cloud.len() <= 2 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for k in 0..cloud.len() {
        let a = &cloud[k];
        let b = &cloud[(k + 1) % cloud.len()];
        let d: f64 = a
            .iter()
            .zip(b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(d);
    }
    worst
}

fn bounding_box(cloud: &[Vec<f64>], d: usize) -> BoxDomain {
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in cloud {
        for i in 0..d {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    for i in 0..d {
        let pad = 1e-12 * (hi[i] - lo[i]).max(1.0);
        lo[i] -= pad;
        hi[i] += pad;
    }
    BoxDomain::new(lo, hi)
}

/// Measure the dual geometry for a weight supported strictly inside the
/// chart domain. Both boundaries are sampled, mapped through the gradient,
/// and `rho` is half the minimum distance between the two clouds. A `rho`
/// at or below the sampling resolution is reported as degenerate.
pub fn dual_geometry(chart: &MongeChart, w: &WeightFunction) -> Result<DualGeometry, DualityError> {
    let d = chart.dim();
    assert_eq!(w.dim(), d);
    let dom = chart.bounds();
    let support = w.support();
    assert!(
        support.lo.iter().zip(&dom.lo).all(|(s, l)| s > l)
            && support.hi.iter().zip(&dom.hi).all(|(s, h)| s < h),
        "weight support must lie strictly inside the chart domain"
    );

    let map = |pts: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        pts.iter().map(|p| chart.gradient(p)).collect()
    };
    let v_boundary = map(support_boundary(w, BOUNDARY_SAMPLES));
    let r_boundary = map(box_boundary(dom, BOUNDARY_SAMPLES));

    let mut min_dist = f64::INFINITY;
    for u in &r_boundary {
        for v in &v_boundary {
            let dist: f64 = u
                .iter()
                .zip(v)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            min_dist = min_dist.min(dist);
        }
    }
    let rho = 0.5 * min_dist;
    let resolution = cloud_resolution(&v_boundary).max(cloud_resolution(&r_boundary));
    if rho <= resolution {
        return Err(DualityError::DegenerateGeometry { rho, resolution });
    }

    let v_box = bounding_box(&v_boundary, d);
    let r_box = bounding_box(&r_boundary, d);
    Ok(DualGeometry {
        chart: chart.clone(),
        weight: w.clone(),
        newton_tol: NEWTON_TOL,
        v_box,
        r_box,
        v_boundary,
        r_boundary,
        rho,
    })
}

/// Residual statistics for a dual chart over a verification grid: the double
/// dual against the original values, the gradient round trip, the product of
/// the two Hessian determinants against one, and signature constancy.
#[derive(Clone, Debug, Serialize)]
pub struct DualResidualReport {
    pub surface: String,
    pub grid_points: usize,
    pub max_involution_residual: f64,
    pub max_gradient_residual: f64,
    pub max_reciprocity_residual: f64,
    pub signature_constant: bool,
    pub dual_signature: i32,
}

pub fn dual_residual_report(
    chart: &MongeChart,
    per_axis: usize,
) -> Result<DualResidualReport, DualityError> {
    let dual = legendre_dual(chart)?;
    let grid = GridSpec::new(per_axis, 0.02);
    let pts = grid.points(chart.bounds());

    let mut max_inv: f64 = 0.0;
    let mut max_grad: f64 = 0.0;
    let mut max_recip: f64 = 0.0;
    let mut signature: Option<i32> = None;
    let mut signature_constant = true;
    for x in &pts {
        let f = chart.value(x);
        let y = chart.gradient(x);

        let ff = double_dual_value(&dual, x)?;
        max_inv = max_inv.max((ff - f).abs());

        let x_hat = dual.grad_star(&y)?;
        let grad_err: f64 = x_hat
            .iter()
            .zip(x)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        max_grad = max_grad.max(grad_err);

        let h_star = dual.hess_star(&y)?;
        let h = chart.hessian(x);
        max_recip = max_recip.max((h_star.det() * h.det() - 1.0).abs());

        match h_star.signature(1e-10) {
            Some(s) => {
                if *signature.get_or_insert(s) != s {
                    signature_constant = false;
                }
            }
            None => signature_constant = false,
        }
    }
    Ok(DualResidualReport {
        surface: chart.name.clone(),
        grid_points: pts.len(),
        max_involution_residual: max_inv,
        max_gradient_residual: max_grad,
        max_reciprocity_residual: max_recip,
        signature_constant,
        dual_signature: signature.unwrap_or(0),
    })
}
