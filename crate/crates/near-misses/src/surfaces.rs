//! Hypersurface charts in graph form.
//!
//! A chart is a map `x -> (x, f(x))` on a box in `R^(n-1)`, the graph living in
//! `R^n`. Charts carry closed-form gradients and Hessians; a finite-difference
//! fallback and an independent higher-order verification stencil are provided.
//! The catalog covers the model surfaces used throughout: parabola and
//! paraboloids, a sphere patch, flattening curves `(1-x^m)^(1/m)`, and the
//! power-sum surface `(x1^a + x2^a - 1)^(1/a)`.

use crate::linalg::SquareMatrix;
use crate::poly::RationalPoly;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("point {0:?} outside chart domain")]
    OutsideDomain(Vec<f64>),
    #[error("invalid surface configuration: {0}")]
    Config(String),
    #[error("grid too coarse: need at least {need} points, got {got}")]
    GridTooCoarse { need: usize, got: usize },
    #[error("curvature window degenerate at {witness:?} (det = {det:e})")]
    DegenerateCurvature { witness: Vec<f64>, det: f64 },
}

/// Closed axis-aligned box; the analytic domain is its interior, lattice
/// enumeration uses the closure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b), "empty box");
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Box shrunk toward its center by relative `frac` on each side.
    pub fn shrunk(&self, frac: f64) -> BoxDomain {
        let lo = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + frac * (b - a))
            .collect();
        let hi = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| b - frac * (b - a))
            .collect();
        BoxDomain::new(lo, hi)
    }
}

/// Uniform sampling grid: `per_axis` points per axis, pulled inward from the
/// boundary by a relative `shrink` fraction.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub per_axis: usize,
    pub shrink: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { per_axis: 32, shrink: 0.0 }
    }
}

impl GridSpec {
    pub fn new(per_axis: usize, shrink: f64) -> Self {
        Self { per_axis, shrink }
    }

    pub fn points(&self, b: &BoxDomain) -> Vec<Vec<f64>> {
        let d = b.dim();
        let n = self.per_axis.max(2);
        let axis: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        let t = self.shrink + (1.0 - 2.0 * self.shrink) * k as f64 / (n - 1) as f64;
                        b.lo[i] + t * (b.hi[i] - b.lo[i])
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(n.pow(d as u32));
        let mut idx = vec![0usize; d];
        loop {
            out.push((0..d).map(|i| axis[i][idx[i]]).collect());
            let mut i = 0;
            loop {
                if i == d {
                    return out;
                }
                idx[i] += 1;
                if idx[i] < n {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    }
}

/// Graph-form surface: dimension of the base, bounding box, and second-order
/// jet evaluation. Implementors must be safe to evaluate on the box closure.
pub trait Surface: Sync {
    /// Base dimension (the graph lives in one dimension higher).
    fn dim(&self) -> usize;
    fn bounds(&self) -> &BoxDomain;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient_into(&self, x: &[f64], g: &mut [f64]);
    fn hessian_into(&self, x: &[f64], h: &mut SquareMatrix);
    fn contains(&self, x: &[f64]) -> bool {
        self.bounds().contains(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    fn hessian(&self, x: &[f64]) -> SquareMatrix {
        let mut h = SquareMatrix::zeros(self.dim());
        self.hessian_into(x, &mut h);
        h
    }
}

#[derive(Clone, Debug)]
pub(crate) enum ChartForm {
    Poly {
        f: RationalPoly,
        grad: Vec<RationalPoly>,
        hess: Vec<RationalPoly>,
    },
    Sphere,
    Fermat { m: u32 },
    PowerSum { alpha: f64 },
}

/// A named graph chart with domain box, closed-form derivatives, and the
/// finite-difference steps it declares.
#[derive(Clone, Debug)]
pub struct MongeChart {
    pub name: String,
    /// Ambient dimension n; the base has dimension n-1.
    pub ambient_dim: usize,
    pub domain: BoxDomain,
    pub margin: f64,
    /// Central-difference step for the fallback gradient.
    pub fd_step: f64,
    /// Step for the higher-order verification stencils.
    pub fd_check_step: f64,
    pub(crate) form: ChartForm,
}

#[derive(Clone, Debug)]
pub struct ChartJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SquareMatrix,
}

#[derive(Clone, Debug)]
pub struct CurvatureWindow {
    pub c1_est: f64,
    pub c2_est: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    pub violated: bool,
}

#[derive(Clone, Debug)]
pub struct DiffeoReport {
    pub injective: bool,
    /// min over grid pairs of |grad f(x) - grad f(x')| / |x - x'|.
    pub min_separation_ratio: f64,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug)]
pub struct DerivativeCheck {
    pub max_gradient_error: f64,
    pub max_hessian_error: f64,
    pub tolerance: f64,
}

impl Surface for MongeChart {
    fn dim(&self) -> usize {
        self.ambient_dim - 1
    }

    fn bounds(&self) -> &BoxDomain {
        &self.domain
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.form {
            ChartForm::Poly { f, .. } => f.eval_f64(x),
            ChartForm::Sphere => (1.0 - x.iter().map(|v| v * v).sum::<f64>()).sqrt(),
            ChartForm::Fermat { m } => {
                (1.0 - x[0].powi(*m as i32)).powf(1.0 / *m as f64)
            }
            ChartForm::PowerSum { alpha } => {
                (x[0].powf(*alpha) + x[1].powf(*alpha) - 1.0).powf(1.0 / *alpha)
            }
        }
    }

    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        match &self.form {
            ChartForm::Poly { grad, .. } => {
                for (gi, p) in g.iter_mut().zip(grad) {
                    *gi = p.eval_f64(x);
                }
            }
            ChartForm::Sphere => {
                let f = self.value(x);
                for (gi, &xi) in g.iter_mut().zip(x) {
                    *gi = -xi / f;
                }
            }
            ChartForm::Fermat { m } => {
                let m = *m;
                let u = 1.0 - x[0].powi(m as i32);
                g[0] = -x[0].powi(m as i32 - 1) * u.powf(1.0 / m as f64 - 1.0);
            }
            ChartForm::PowerSum { alpha } => {
                let a = *alpha;
                let s = x[0].powf(a) + x[1].powf(a) - 1.0;
                let sp = s.powf(1.0 / a - 1.0);
                g[0] = sp * x[0].powf(a - 1.0);
                g[1] = sp * x[1].powf(a - 1.0);
            }
        }
    }

    fn hessian_into(&self, x: &[f64], h: &mut SquareMatrix) {
        let d = self.dim();
        match &self.form {
            ChartForm::Poly { hess, .. } => {
                for i in 0..d {
                    for j in 0..d {
                        h.set(i, j, hess[i * d + j].eval_f64(x));
                    }
                }
            }
            ChartForm::Sphere => {
                let f = self.value(x);
                let f3 = f * f * f;
                for i in 0..d {
                    for j in 0..d {
                        let mut v = -x[i] * x[j] / f3;
                        if i == j {
                            v -= 1.0 / f;
                        }
                        h.set(i, j, v);
                    }
                }
            }
            ChartForm::Fermat { m } => {
                let m = *m as f64;
                let u = 1.0 - x[0].powf(m);
                // second derivative simplifies via u + x^m = 1
                h.set(0, 0, -(m - 1.0) * x[0].powf(m - 2.0) * u.powf(1.0 / m - 2.0));
            }
            ChartForm::PowerSum { alpha } => {
                let a = *alpha;
                let s = x[0].powf(a) + x[1].powf(a) - 1.0;
                let s1 = s.powf(1.0 / a - 1.0);
                let s2 = s.powf(1.0 / a - 2.0);
                for i in 0..2 {
                    for j in 0..2 {
                        let mut v =
                            (1.0 - a) * s2 * x[i].powf(a - 1.0) * x[j].powf(a - 1.0);
                        if i == j {
                            v += (a - 1.0) * s1 * x[i].powf(a - 2.0);
                        }
                        h.set(i, j, v);
                    }
                }
            }
        }
    }
}

impl MongeChart {
    /// Smoothness order carried as metadata: enough derivatives for the
    /// stationary-phase expansions at this ambient dimension.
    pub fn smoothness_order(&self) -> u32 {
        let n = self.ambient_dim as u32;
        (((n - 1) / 2) + 5).max(n + 1)
    }

    /// Checked second-order jet at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<ChartJet, SurfaceError> {
        if !self.domain.contains(x) {
            return Err(SurfaceError::OutsideDomain(x.to_vec()));
        }
        let mut h = SquareMatrix::zeros(self.dim());
        self.hessian_into(x, &mut h);
        h.symmetrize();
        Ok(ChartJet { value: self.value(x), gradient: self.gradient(x), hessian: h })
    }

    /// Min/max of |det Hess f| over the grid, with witnesses. The flag is set
    /// when the determinant vanishes or changes sign on the grid.
    pub fn curvature_window(&self, grid: &GridSpec) -> Result<CurvatureWindow, SurfaceError> {
        let need = 10usize.pow(self.dim() as u32);
        let pts = grid.points(&self.domain);
        if pts.len() < need {
            return Err(SurfaceError::GridTooCoarse { need, got: pts.len() });
        }
        let mut h = SquareMatrix::zeros(self.dim());
        let mut c1 = f64::INFINITY;
        let mut c2 = 0.0f64;
        let mut argmin = pts[0].clone();
        let mut argmax = pts[0].clone();
        let mut saw_pos = false;
        let mut saw_neg = false;
        for p in &pts {
            self.hessian_into(p, &mut h);
            let det = h.det();
            if det > 0.0 {
                saw_pos = true;
            }
            if det < 0.0 {
                saw_neg = true;
            }
            let ad = det.abs();
            if ad < c1 {
                c1 = ad;
                argmin = p.clone();
            }
            if ad > c2 {
                c2 = ad;
                argmax = p.clone();
            }
        }
        let violated = c1 <= 1e-12 || (saw_pos && saw_neg);
        Ok(CurvatureWindow { c1_est: c1, c2_est: c2, argmin, argmax, violated })
    }

    /// Pairwise injectivity of the gradient map over the grid.
    pub fn check_gradient_diffeo(&self, grid: &GridSpec) -> Result<DiffeoReport, SurfaceError> {
        let need = 10usize.pow(self.dim() as u32);
        let pts = grid.points(&self.domain);
        if pts.len() < need {
            return Err(SurfaceError::GridTooCoarse { need, got: pts.len() });
        }
        let imgs: Vec<Vec<f64>> = pts.iter().map(|p| self.gradient(p)).collect();
        let mut min_ratio = f64::INFINITY;
        let mut witness = None;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let dx = crate::linalg::norm2(&crate::linalg::sub(&pts[i], &pts[j]));
                if dx < 1e-14 {
                    continue;
                }
                let dy = crate::linalg::norm2(&crate::linalg::sub(&imgs[i], &imgs[j]));
                let r = dy / dx;
                if r < min_ratio {
                    min_ratio = r;
                    witness = Some((pts[i].clone(), pts[j].clone()));
                }
            }
        }
        Ok(DiffeoReport { injective: min_ratio > 1e-9, min_separation_ratio: min_ratio, witness })
    }

    /// Central-difference gradient with the declared fallback step.
    pub fn fd_gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let h = self.fd_step;
        let mut g = vec![0.0; d];
        let mut xp = x.to_vec();
        for i in 0..d {
            xp[i] = x[i] + h;
            let fp = self.value(&xp);
            xp[i] = x[i] - h;
            let fm = self.value(&xp);
            xp[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        g
    }

    fn value_shift(&self, x: &[f64], i: usize, j: usize, di: f64, dj: f64) -> f64 {
        let mut xs = x.to_vec();
        xs[i] += di;
        xs[j] += dj;
        self.value(&xs)
    }

    /// Fourth-order stencil derivatives used to verify the closed forms.
    /// Returns worst absolute gradient and Hessian deviations over the grid.
    pub fn verify_derivatives(&self, grid: &GridSpec) -> DerivativeCheck {
        let d = self.dim();
        let h = self.fd_check_step;
        let pts = grid.points(&self.domain.shrunk(0.06));
        let mut worst_g = 0.0f64;
        let mut worst_h = 0.0f64;
        let mut hess = SquareMatrix::zeros(d);
        for p in &pts {
            let g = self.gradient(p);
            self.hessian_into(p, &mut hess);
            for i in 0..d {
                let f = |s: f64| self.value_shift(p, i, i, s, 0.0);
                let g4 = (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
                worst_g = worst_g.max((g4 - g[i]).abs());
                let h4 = (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h)
                    - f(-2.0 * h))
                    / (12.0 * h * h);
                worst_h = worst_h.max((h4 - hess.get(i, i)).abs());
                for j in (i + 1)..d {
                    let fij = |si: f64, sj: f64| self.value_shift(p, i, j, si, sj);
                    // tensor product of two fourth-order first-derivative stencils
                    let w = [1.0, -8.0, 8.0, -1.0];
                    let s = [-2.0 * h, -h, h, 2.0 * h];
                    let mut acc = 0.0;
                    for (wa, sa) in w.iter().zip(s) {
                        for (wb, sb) in w.iter().zip(s) {
                            acc += wa * wb * fij(sa, sb);
                        }
                    }
                    let mixed = acc / (144.0 * h * h);
                    worst_h = worst_h.max((mixed - hess.get(i, j)).abs());
                }
            }
        }
        DerivativeCheck {
            max_gradient_error: worst_g,
            max_hessian_error: worst_h,
            tolerance: 10.0 * h * h,
        }
    }

    fn with_form(name: &str, n: usize, domain: BoxDomain, margin: f64, form: ChartForm) -> Self {
        let fd_step = (1e-5f64).max(1e-7 * domain.diameter());
        MongeChart {
            name: name.to_string(),
            ambient_dim: n,
            domain,
            margin,
            fd_step,
            fd_check_step: 1e-3,
            form,
        }
    }

    pub fn polynomial(name: &str, n: usize, f: RationalPoly, domain: BoxDomain) -> Self {
        let d = n - 1;
        assert_eq!(f.nvars(), d);
        assert_eq!(domain.dim(), d);
        let grad: Vec<RationalPoly> = (0..d).map(|i| f.partial(i)).collect();
        let mut hess = Vec::with_capacity(d * d);
        for gi in &grad {
            for j in 0..d {
                hess.push(gi.partial(j));
            }
        }
        Self::with_form(name, n, domain, 0.0, ChartForm::Poly { f, grad, hess })
    }

    /// Exact polynomial backing a chart, when it has one.
    pub fn poly(&self) -> Option<&RationalPoly> {
        match &self.form {
            ChartForm::Poly { f, .. } => Some(f),
            _ => None,
        }
    }

    pub fn parabola() -> Self {
        Self::polynomial(
            "parabola",
            2,
            RationalPoly::from_i64(1, &[(&[2], 1, 1)]),
            BoxDomain::new(vec![0.0], vec![1.0]),
        )
    }

    pub fn paraboloid(n: usize) -> Self {
        let d = n - 1;
        let terms: Vec<(Vec<u32>, i64, i64)> = (0..d)
            .map(|i| {
                let mut e = vec![0u32; d];
                e[i] = 2;
                (e, 1, 2)
            })
            .collect();
        let borrowed: Vec<(&[u32], i64, i64)> =
            terms.iter().map(|(e, a, b)| (e.as_slice(), *a, *b)).collect();
        let f = RationalPoly::from_i64(d, &borrowed);
        let (name, domain) = if n == 2 {
            ("paraboloid2".to_string(), BoxDomain::new(vec![0.1], vec![0.9]))
        } else {
            (
                format!("paraboloid{n}"),
                BoxDomain::new(vec![-0.8; d], vec![0.8; d]),
            )
        };
        Self::polynomial(&name, n, f, domain)
    }

    /// Upper hemisphere patch in ambient dimension n; the box half-width keeps
    /// |x| <= 1 - margin even at corners.
    pub fn sphere_patch(n: usize, margin: f64) -> Self {
        let d = n - 1;
        let hw = (1.0 - margin) / (d as f64).sqrt();
        let domain = BoxDomain::new(vec![-hw; d], vec![hw; d]);
        Self::with_form(&format!("sphere{n}"), n, domain, margin, ChartForm::Sphere)
    }

    /// Flattening curve `(1 - x^m)^(1/m)` on [margin, 1 - margin].
    pub fn fermat(m: u32, margin: f64) -> Self {
        assert!(m >= 3);
        let domain = BoxDomain::new(vec![margin], vec![1.0 - margin]);
        Self::with_form(&format!("fermat{m}"), 2, domain, margin, ChartForm::Fermat { m })
    }

    /// Power-sum surface `(x1^a + x2^a - 1)^(1/a)` on a sub-box of [1,2]^2.
    pub fn power_sum(alpha: f64) -> Self {
        let domain = BoxDomain::new(vec![1.1, 1.1], vec![1.9, 1.9]);
        Self::with_form("rs32", 3, domain, 0.0, ChartForm::PowerSum { alpha })
    }
}

#[derive(Clone, Debug)]
pub struct SurfaceCatalogEntry {
    pub name: &'static str,
    pub ambient_dim: usize,
    pub description: &'static str,
}

pub fn catalog() -> Vec<SurfaceCatalogEntry> {
    vec![
        SurfaceCatalogEntry {
            name: "parabola",
            ambient_dim: 2,
            description: "f(x) = x^2 on [0,1]",
        },
        SurfaceCatalogEntry {
            name: "paraboloid2",
            ambient_dim: 2,
            description: "f(x) = x^2/2 on [0.1,0.9]",
        },
        SurfaceCatalogEntry {
            name: "paraboloid3",
            ambient_dim: 3,
            description: "f(x) = |x|^2/2 on [-0.8,0.8]^2",
        },
        SurfaceCatalogEntry {
            name: "sphere3",
            ambient_dim: 3,
            description: "upper hemisphere patch, corner radius 1 - margin",
        },
        SurfaceCatalogEntry {
            name: "fermat4",
            ambient_dim: 2,
            description: "(1 - x^4)^(1/4) on [margin, 1-margin]",
        },
        SurfaceCatalogEntry {
            name: "rs32",
            ambient_dim: 3,
            description: "(x1^1.5 + x2^1.5 - 1)^(2/3) on [1.1,1.9]^2",
        },
    ]
}

pub fn catalog_chart(name: &str) -> Option<MongeChart> {
    match name {
        "parabola" => Some(MongeChart::parabola()),
        "paraboloid2" => Some(MongeChart::paraboloid(2)),
        "paraboloid3" => Some(MongeChart::paraboloid(3)),
        "sphere3" => Some(MongeChart::sphere_patch(3, 0.05)),
        "fermat4" => Some(MongeChart::fermat(4, 0.05)),
        "rs32" => Some(MongeChart::power_sum(1.5)),
        _ => None,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub exps: Vec<u32>,
    pub num: i64,
    pub den: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceConfig {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub ambient_dim: Option<usize>,
    #[serde(default)]
    pub coefficients: Vec<CoeffEntry>,
    #[serde(default)]
    pub domain: Option<BoxDomain>,
    #[serde(default)]
    pub margin: Option<f64>,
}

pub fn chart_from_config(cfg: &SurfaceConfig) -> Result<MongeChart, SurfaceError> {
    match cfg.kind.as_str() {
        "builtin" => {
            let mut chart = match (cfg.name.as_str(), cfg.margin) {
                ("sphere3", Some(m)) => MongeChart::sphere_patch(3, m),
                ("fermat4", Some(m)) => MongeChart::fermat(4, m),
                (name, _) => catalog_chart(name)
                    .ok_or_else(|| SurfaceError::Config(format!("unknown builtin '{name}'")))?,
            };
            if let Some(d) = &cfg.domain {
                if d.dim() != chart.dim() {
                    return Err(SurfaceError::Config(format!(
                        "domain dimension {} does not match chart base dimension {}",
                        d.dim(),
                        chart.dim()
                    )));
                }
                chart.domain = d.clone();
            }
            Ok(chart)
        }
        "polynomial" => {
            let n = cfg
                .ambient_dim
                .ok_or_else(|| SurfaceError::Config("polynomial kind needs ambient_dim".into()))?;
            if n < 2 {
                return Err(SurfaceError::Config("ambient_dim must be at least 2".into()));
            }
            let domain = cfg
                .domain
                .clone()
                .ok_or_else(|| SurfaceError::Config("polynomial kind needs domain".into()))?;
            if domain.dim() != n - 1 {
                return Err(SurfaceError::Config(format!(
                    "domain dimension {} does not match ambient_dim {} - 1",
                    domain.dim(),
                    n
                )));
            }
            if cfg.coefficients.is_empty() {
                return Err(SurfaceError::Config("polynomial kind needs coefficients".into()));
            }
            for c in &cfg.coefficients {
                if c.exps.len() != n - 1 {
                    return Err(SurfaceError::Config(format!(
                        "coefficient exponent arity {} does not match base dimension {}",
                        c.exps.len(),
                        n - 1
                    )));
                }
                if c.den == 0 {
                    return Err(SurfaceError::Config("zero denominator".into()));
                }
            }
            let terms: Vec<(&[u32], i64, i64)> = cfg
                .coefficients
                .iter()
                .map(|c| (c.exps.as_slice(), c.num, c.den))
                .collect();
            let f = RationalPoly::from_i64(n - 1, &terms);
            Ok(MongeChart::polynomial(&cfg.name, n, f, domain))
        }
        other => Err(SurfaceError::Config(format!("unknown kind '{other}'"))),
    }
}

pub fn chart_from_json(json: &str) -> Result<MongeChart, SurfaceError> {
    let cfg: SurfaceConfig =
        serde_json::from_str(json).map_err(|e| SurfaceError::Config(e.to_string()))?;
    chart_from_config(&cfg)
}

/// Resolve a `--surface` argument: catalog name first, then a JSON file path.
pub fn resolve_surface(arg: &str) -> Result<MongeChart, SurfaceError> {
    if let Some(c) = catalog_chart(arg) {
        return Ok(c);
    }
    let text = std::fs::read_to_string(arg)
        .map_err(|e| SurfaceError::Config(format!("'{arg}' is neither a catalog name nor a readable file: {e}")))?;
    chart_from_json(&text)
}
