//! Quadrature and finite differences.
//!
//! Everything here is deterministic: panel splitting follows a fixed rule and
//! sums are reduced in interval order, so repeated calls with the same inputs
//! return identical bits.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sl2::{GroupElement, IwasawaCoord};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericsError {
    #[error("quadrature did not converge: estimate {estimate}, error bound {error:e}")]
    NonConvergence { estimate: C64, error: f64 },
    #[error("integrand is nonzero on the support hint boundary (|F| = {value:e})")]
    BadHint { value: f64 },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    pub panel_order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_panels: 4096,
            panel_order: 16,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tol(rel_tol: f64, abs_tol: f64) -> Self {
        QuadratureSpec {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(NumericsError::InvalidSpec(
                "tolerances must be positive".into(),
            ));
        }
        if self.panel_order < 2 || self.panel_order > MAX_GL_ORDER {
            return Err(NumericsError::InvalidSpec(format!(
                "panel_order must lie in [2, {MAX_GL_ORDER}]"
            )));
        }
        if self.max_panels == 0 {
            return Err(NumericsError::InvalidSpec(
                "max_panels must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn tolerance(&self, value: C64) -> f64 {
        (self.rel_tol * value.norm()).max(self.abs_tol)
    }
}

/// A value together with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: C64, error: f64) -> Self {
        Estimate { value, error }
    }
}

pub const MAX_GL_ORDER: usize = 64;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn build_gl(n: usize) -> GlRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GlRule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached rule of order `n` (2 ≤ n ≤ 64).
pub fn gauss_legendre(n: usize) -> &'static GlRule {
    static RULES: OnceLock<Vec<OnceLock<GlRule>>> = OnceLock::new();
    let table = RULES.get_or_init(|| (0..=MAX_GL_ORDER).map(|_| OnceLock::new()).collect());
    assert!(
        (2..=MAX_GL_ORDER).contains(&n),
        "Gauss-Legendre order {n} out of range"
    );
    table[n].get_or_init(|| build_gl(n))
}

fn gl_panel<F: Fn(f64) -> C64 + ?Sized>(f: &F, a: f64, b: f64, rule: &GlRule) -> C64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = C64::new(0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        s += f(mid + half * x) * *w;
    }
    s * half
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    left: C64,
    right: C64,
    err: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> C64 + ?Sized>(f: &F, a: f64, b: f64, coarse: C64, rule: &GlRule) -> Self {
        let m = 0.5 * (a + b);
        let left = gl_panel(f, a, m, rule);
        let right = gl_panel(f, m, b, rule);
        let err = (left + right - coarse).norm();
        Panel {
            a,
            b,
            left,
            right,
            err,
        }
    }
    fn value(&self) -> C64 {
        self.left + self.right
    }
}

/// Errors below this multiple of the integrated magnitude are rounding noise
/// and count as converged.
pub const ROUNDOFF_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Adaptive composite Gauss–Legendre quadrature on [a, b].
pub fn integrate_1d<F: Fn(f64) -> C64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    integrate_1d_breaks(f, &[a, b], spec)
}

/// As [`integrate_1d`], starting from the panels delimited by `breaks`
/// (sorted, at least two entries).
pub fn integrate_1d_breaks<F: Fn(f64) -> C64 + ?Sized>(
    f: &F,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    spec.validate()?;
    if breaks.len() < 2 {
        return Err(NumericsError::InvalidSpec(
            "need at least two breakpoints".into(),
        ));
    }
    let rule = gauss_legendre(spec.panel_order);
    let mut panels: Vec<Panel> = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a <= b) {
            return Err(NumericsError::InvalidSpec(format!(
                "breakpoints not sorted: {a} > {b}"
            )));
        }
        if a == b {
            continue;
        }
        let coarse = gl_panel(f, a, b, rule);
        panels.push(Panel::new(f, a, b, coarse, rule));
    }
    if panels.is_empty() {
        return Ok(Estimate::new(C64::new(0.0, 0.0), 0.0));
    }
    loop {
        let total = panels.iter().fold(C64::new(0.0, 0.0), |s, p| s + p.value());
        let err: f64 = panels.iter().map(|p| p.err).sum();
        if !err.is_finite() || !total.re.is_finite() || !total.im.is_finite() {
            return Err(NumericsError::NonConvergence {
                estimate: total,
                error: f64::INFINITY,
            });
        }
        let mass: f64 = panels.iter().map(|p| p.left.norm() + p.right.norm()).sum();
        if err <= spec.tolerance(total).max(ROUNDOFF_FLOOR * mass) {
            return Ok(Estimate::new(total, err));
        }
        if panels.len() >= spec.max_panels {
            return Err(NumericsError::NonConvergence {
                estimate: total,
                error: err,
            });
        }
        // split the worst panel; ties go to the leftmost
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            if p.err > panels[worst].err {
                worst = i;
            }
        }
        let p = panels[worst];
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(NumericsError::NonConvergence {
                estimate: total,
                error: err,
            });
        }
        let l = Panel::new(f, p.a, m, p.left, rule);
        let r = Panel::new(f, m, p.b, p.right, rule);
        panels[worst] = l;
        panels.insert(worst + 1, r);
    }
}

/// ∫_a^∞ f via the substitution x = a + t/(1−t).
pub fn integrate_to_infinity<F: Fn(f64) -> C64 + ?Sized>(
    f: &F,
    a: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    let g = |t: f64| {
        if t >= 1.0 {
            return C64::new(0.0, 0.0);
        }
        let s = 1.0 - t;
        f(a + t / s) / (s * s)
    };
    integrate_1d(&g, 0.0, 1.0, spec)
}

/// Trapezoid rule over one period with doubling. Returns the integral
/// (not the mean).
pub fn integrate_periodic<F: Fn(f64) -> C64 + ?Sized>(
    f: &F,
    period: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    integrate_periodic_from(f, period, 32, spec)
}

/// Trapezoid doubling starting from `n0` points.
pub fn integrate_periodic_from<F: Fn(f64) -> C64 + ?Sized>(
    f: &F,
    period: f64,
    n0: usize,
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    spec.validate()?;
    let max_points = (spec.max_panels * spec.panel_order).max(n0 * 2);
    let mut n = n0.max(4);
    let mut sum = C64::new(0.0, 0.0);
    let mut mass = 0.0;
    for j in 0..n {
        let v = f(period * j as f64 / n as f64);
        sum += v;
        mass += v.norm();
    }
    let mut prev = sum * (period / n as f64);
    loop {
        // add the midpoints
        let mut mids = C64::new(0.0, 0.0);
        for j in 0..n {
            let v = f(period * (j as f64 + 0.5) / n as f64);
            mids += v;
            mass += v.norm();
        }
        sum += mids;
        n *= 2;
        let cur = sum * (period / n as f64);
        let err = (cur - prev).norm();
        if !err.is_finite() {
            return Err(NumericsError::NonConvergence {
                estimate: cur,
                error: f64::INFINITY,
            });
        }
        if err
            <= spec
                .tolerance(cur)
                .max(ROUNDOFF_FLOOR * mass * period / n as f64)
        {
            return Ok(Estimate::new(cur, err));
        }
        if n * 2 > max_points {
            return Err(NumericsError::NonConvergence {
                estimate: cur,
                error: err,
            });
        }
        prev = cur;
    }
}

/// Mean value (1/period)∫ f over one period, matching the dk = dθ/2π
/// normalization when period = 2π.
pub fn mean_periodic<F: Fn(f64) -> C64 + ?Sized>(
    f: &F,
    period: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    let e = integrate_periodic(f, period, spec)?;
    Ok(Estimate::new(e.value / period, e.error / period))
}

/// Tensor-product composite Gauss–Legendre over a box. `breaks[k]` lists
/// the breakpoints along axis k; every panel is bisected uniformly until two
/// successive levels agree.
pub fn integrate_box<F: Fn(&[f64]) -> C64 + Sync + ?Sized>(
    f: &F,
    breaks: &[Vec<f64>],
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    spec.validate()?;
    let rule = gauss_legendre(spec.panel_order);
    let mut level = 0usize;
    let mut prev: Option<C64> = None;
    loop {
        let axes: Vec<(Vec<f64>, Vec<f64>)> =
            breaks.iter().map(|b| axis_rule(b, level, rule)).collect();
        let cur = tensor_sum(f, &axes);
        if let Some(p) = prev {
            let err = (cur - p).norm();
            if err <= spec.tolerance(cur) {
                return Ok(Estimate::new(cur, err));
            }
            let points: usize = axes.iter().map(|a| a.0.len()).product();
            if level >= 8 || points > 64 * spec.max_panels * spec.panel_order * spec.panel_order {
                return Err(NumericsError::NonConvergence {
                    estimate: cur,
                    error: err,
                });
            }
        }
        prev = Some(cur);
        level += 1;
    }
}

fn axis_rule(breaks: &[f64], level: usize, rule: &GlRule) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    let sub = 1usize << level;
    for w in breaks.windows(2) {
        let h = (w[1] - w[0]) / sub as f64;
        for s in 0..sub {
            let a = w[0] + h * s as f64;
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                xs.push(a + 0.5 * h * (x + 1.0));
                ws.push(0.5 * h * wt);
            }
        }
    }
    (xs, ws)
}

fn tensor_sum<F: Fn(&[f64]) -> C64 + Sync + ?Sized>(f: &F, axes: &[(Vec<f64>, Vec<f64>)]) -> C64 {
    use rayon::prelude::*;
    let dim = axes.len();
    if dim == 0 {
        return f(&[]);
    }
    // parallel over the first axis, ordered reduction afterwards
    let partial: Vec<C64> = (0..axes[0].0.len())
        .into_par_iter()
        .map(|i0| {
            let mut point = vec![0.0; dim];
            point[0] = axes[0].0[i0];
            let mut idx = vec![0usize; dim];
            let mut s = C64::new(0.0, 0.0);
            if dim == 1 {
                return f(&point) * axes[0].1[i0];
            }
            loop {
                let mut w = axes[0].1[i0];
                for k in 1..dim {
                    point[k] = axes[k].0[idx[k]];
                    w *= axes[k].1[idx[k]];
                }
                s += f(&point) * w;
                let mut k = dim - 1;
                loop {
                    idx[k] += 1;
                    if idx[k] < axes[k].0.len() {
                        break;
                    }
                    idx[k] = 0;
                    k -= 1;
                    if k == 0 {
                        return s;
                    }
                }
            }
        })
        .collect();
    partial.iter().fold(C64::new(0.0, 0.0), |s, p| s + p)
}

/// Where an integrand over G is supported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SupportHint {
    /// x ∈ [x0, x1], y ∈ [y0, y1], all θ.
    Iwasawa { x: (f64, f64), y: (f64, f64) },
    /// Bi-K-invariant integrand supported in u ≤ u_max.
    Radial { u_max: f64 },
}

impl SupportHint {
    /// Iwasawa box strictly containing the ball u(g) ≤ u_max.
    pub fn iwasawa_ball(u_max: f64) -> Self {
        let r = 2.0 * (u_max * (1.0 + u_max)).sqrt();
        let c = 1.0 + 2.0 * u_max;
        let (y0, y1) = (1.0 / (c + r), c + r);
        let xm = 1.02 * r + 1e-3;
        SupportHint::Iwasawa {
            x: (-xm, xm),
            y: (0.98 * y0, 1.02 * y1),
        }
    }
}

/// ∫_G F(g) dg. The measure is normalized by dg = 2 du dk₁ dk₂ on
/// k₁a_u k₂ (dk = dθ/2π), which in the Iwasawa chart n[x]a[y]k[θ] reads
/// dg = dx dy dθ/(4π² y²).
pub fn integrate_g<F: Fn(&GroupElement) -> C64 + Sync + ?Sized>(
    f: &F,
    hint: &SupportHint,
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    match *hint {
        SupportHint::Radial { u_max } => {
            let edge = f(&GroupElement::a_u(u_max)).norm();
            if edge > spec.abs_tol {
                return Err(NumericsError::BadHint { value: edge });
            }
            let g = |u: f64| f(&GroupElement::a_u(u)) * 2.0;
            integrate_1d(&g, 0.0, u_max, spec)
        }
        SupportHint::Iwasawa { x, y } => {
            check_iwasawa_boundary(f, x, y, spec)?;
            integrate_iwasawa_tensor(f, x, y, spec)
        }
    }
}

/// Points evaluated at the finest level before giving up.
const IWASAWA_POINT_BUDGET: usize = 1 << 28;

/// Gauss–Legendre panels in x and t = ln y, trapezoid in θ, all refined
/// together until two successive levels agree.
fn integrate_iwasawa_tensor<F: Fn(&GroupElement) -> C64 + Sync + ?Sized>(
    f: &F,
    x: (f64, f64),
    y: (f64, f64),
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    use rayon::prelude::*;
    spec.validate()?;
    if !(y.0 > 0.0 && y.1 > y.0 && x.1 > x.0) {
        return Err(NumericsError::InvalidSpec(format!(
            "bad Iwasawa box x={x:?} y={y:?}"
        )));
    }
    let rule = gauss_legendre(spec.panel_order);
    let t_range = (y.0.ln(), y.1.ln());
    let level_sum = |level: usize| -> (C64, f64) {
        let panels = 4usize << level;
        let n_theta = 64usize << level;
        let xs = uniform_panels(x, panels, rule);
        let ts = uniform_panels(t_range, panels, rule);
        let partial: Vec<(C64, f64)> = (0..xs.0.len())
            .into_par_iter()
            .map(|i| {
                let (xx, wx) = (xs.0[i], xs.1[i]);
                let mut s = C64::new(0.0, 0.0);
                let mut mass = 0.0;
                for (&t, &wt) in ts.0.iter().zip(&ts.1) {
                    let yy = t.exp();
                    let mut row = C64::new(0.0, 0.0);
                    for k in 0..n_theta {
                        let theta = 2.0 * PI * k as f64 / n_theta as f64;
                        row += f(&GroupElement::from_iwasawa(&IwasawaCoord {
                            x: xx,
                            y: yy,
                            theta,
                        }));
                    }
                    let w = wx * wt / yy / (2.0 * PI * n_theta as f64);
                    s += row * w;
                    mass += row.norm() * w.abs();
                }
                (s, mass)
            })
            .collect();
        partial.iter().fold((C64::new(0.0, 0.0), 0.0), |acc, p| {
            (acc.0 + p.0, acc.1 + p.1)
        })
    };
    let mut level = 0;
    let mut prev = level_sum(0).0;
    let mut last_err = f64::INFINITY;
    loop {
        level += 1;
        let n = (4usize << level) * spec.panel_order;
        if n * n * (64usize << level) > IWASAWA_POINT_BUDGET {
            return Err(NumericsError::NonConvergence {
                estimate: prev,
                error: last_err,
            });
        }
        let (cur, mass) = level_sum(level);
        let err = (cur - prev).norm();
        if !err.is_finite() {
            return Err(NumericsError::NonConvergence {
                estimate: cur,
                error: f64::INFINITY,
            });
        }
        if err <= spec.tolerance(cur).max(ROUNDOFF_FLOOR * mass) {
            return Ok(Estimate::new(cur, err));
        }
        prev = cur;
        last_err = err;
    }
}

/// Uniform `panels`-panel Gauss–Legendre nodes on `range`.
fn uniform_panels(range: (f64, f64), panels: usize, rule: &GlRule) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(panels * rule.nodes.len());
    let mut ws = Vec::with_capacity(panels * rule.nodes.len());
    let h = (range.1 - range.0) / panels as f64;
    for p in 0..panels {
        let a = range.0 + h * p as f64;
        for (z, w) in rule.nodes.iter().zip(&rule.weights) {
            xs.push(a + 0.5 * h * (z + 1.0));
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

fn check_iwasawa_boundary<F: Fn(&GroupElement) -> C64 + ?Sized>(
    f: &F,
    x: (f64, f64),
    y: (f64, f64),
    spec: &QuadratureSpec,
) -> Result<(), NumericsError> {
    let n = 9;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let s = i as f64 / (n - 1) as f64;
        let xs = x.0 + s * (x.1 - x.0);
        let ys = y.0 + s * (y.1 - y.0);
        for t in 0..4 {
            let theta = t as f64 * PI / 2.0 + 0.3;
            for (xx, yy) in [(xs, y.0), (xs, y.1), (x.0, ys), (x.1, ys)] {
                let v = f(&GroupElement::from_iwasawa(&IwasawaCoord {
                    x: xx,
                    y: yy,
                    theta,
                }))
                .norm();
                worst = worst.max(v);
            }
        }
    }
    if worst > spec.abs_tol {
        Err(NumericsError::BadHint { value: worst })
    } else {
        Ok(())
    }
}

/// ∫∫∫ F(a, (ad−1)/c, c, d) da dc dd/|c| over a box in (a, c, d) whose
/// c-range excludes 0. The box is described by breakpoints per axis.
pub fn integrate_bruhat_box<F: Fn(&GroupElement) -> C64 + Sync + ?Sized>(
    f: &F,
    breaks: &[Vec<f64>; 3],
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    for &c in &breaks[1] {
        if c == 0.0 {
            return Err(NumericsError::InvalidSpec("c-range must exclude 0".into()));
        }
    }
    let (c_lo, c_hi) = (breaks[1][0], *breaks[1].last().unwrap());
    if c_lo < 0.0 && c_hi > 0.0 {
        return Err(NumericsError::InvalidSpec("c-range must exclude 0".into()));
    }
    let g = |p: &[f64]| {
        let (a, c, d) = (p[0], p[1], p[2]);
        let m = GroupElement::new_unchecked(a, (a * d - 1.0) / c, c, d);
        f(&m) / c.abs()
    };
    integrate_box(&g, breaks.as_slice(), spec)
}

/// Analytic value of the Bruhat Jacobian: ∫F(g) dg = κ_B ∫ F da dc dd/|c|.
pub const KAPPA_BRUHAT: f64 = 1.0 / (2.0 * PI * PI);

/// Measure κ_B from a calibration integrand: a product bump in (a, c, d)
/// whose Haar integral is evaluated in the Iwasawa chart.
pub fn calibrate_kappa_bruhat(spec: &QuadratureSpec) -> Result<f64, NumericsError> {
    let bump = |t: f64, lo: f64, hi: f64| -> f64 {
        if t <= lo || t >= hi {
            return 0.0;
        }
        let s = (t - lo) / (hi - lo);
        (-1.0 / (s * (1.0 - s)) + 4.0).exp()
    };
    let f = move |g: &GroupElement| -> C64 {
        C64::new(
            bump(g.a, 0.5, 1.5) * bump(g.c, 0.5, 1.5) * bump(g.d, 0.5, 1.5),
            0.0,
        )
    };
    let bruhat = integrate_bruhat_box(
        &f,
        &[
            vec![0.5, 1.0, 1.5],
            vec![0.5, 1.0, 1.5],
            vec![0.5, 1.0, 1.5],
        ],
        spec,
    )?;
    // support: c, d ∈ (0.5,1.5) gives y = 1/(c²+d²) ∈ (0.22, 2); x = (ac+bd)/(c²+d²)
    let haar = integrate_g(
        &f,
        &SupportHint::Iwasawa {
            x: (-4.0, 4.0),
            y: (0.2, 2.1),
        },
        spec,
    )?;
    Ok(haar.value.re / bruhat.value.re)
}

/// Central finite difference of the given order (≤ 4), fourth-order stencil,
/// step ε^{1/(order+4)}(|x|+1).
pub fn fd_derivative<F: Fn(f64) -> C64 + ?Sized>(f: &F, x: f64, order: usize) -> C64 {
    let h = f64::EPSILON.powf(1.0 / (order as f64 + 4.0)) * (x.abs() + 1.0);
    fd_derivative_step(f, x, order, h)
}

/// As [`fd_derivative`] with an explicit step.
pub fn fd_derivative_step<F: Fn(f64) -> C64 + ?Sized>(f: &F, x: f64, order: usize, h: f64) -> C64 {
    let e = |k: f64| f(x + k * h);
    match order {
        0 => f(x),
        1 => (-e(2.0) + e(1.0) * 8.0 - e(-1.0) * 8.0 + e(-2.0)) / (12.0 * h),
        2 => (-e(2.0) + e(1.0) * 16.0 - e(0.0) * 30.0 + e(-1.0) * 16.0 - e(-2.0)) / (12.0 * h * h),
        3 => {
            (-e(3.0) + e(2.0) * 8.0 - e(1.0) * 13.0 + e(-1.0) * 13.0 - e(-2.0) * 8.0 + e(-3.0))
                / (8.0 * h * h * h)
        }
        4 => {
            (-e(3.0) + e(2.0) * 12.0 - e(1.0) * 39.0 + e(0.0) * 56.0 - e(-1.0) * 39.0
                + e(-2.0) * 12.0
                - e(-3.0))
                / (6.0 * h * h * h * h)
        }
        _ => panic!("fd_derivative supports orders up to 4, got {order}"),
    }
}

/// Real-valued convenience wrapper.
pub fn fd_derivative_real<F: Fn(f64) -> f64 + ?Sized>(f: &F, x: f64, order: usize) -> f64 {
    fd_derivative(&|t| C64::new(f(t), 0.0), x, order).re
}

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1, e(t)/(e(t)+e(1−t)) with e(t) = exp(−1/t).
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Smooth plateau: 1 on [p0, p1], 0 outside (s0, s1), smooth_step ramps between.
pub fn smooth_plateau(x: f64, s0: f64, p0: f64, p1: f64, s1: f64) -> f64 {
    if x <= s0 || x >= s1 {
        return 0.0;
    }
    if x < p0 {
        smooth_step((x - s0) / (p0 - s0))
    } else if x > p1 {
        smooth_step((s1 - x) / (s1 - p1))
    } else {
        1.0
    }
}

/// Mean of f over the torus [0,2π)², trapezoid in both angles with doubling
/// from an `n0`×`n0` grid.
pub fn mean_torus<F: Fn(f64, f64) -> C64 + ?Sized>(
    f: &F,
    n0: usize,
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    spec.validate()?;
    let grid_mean = |n: usize| -> (C64, f64) {
        let h = 2.0 * PI / n as f64;
        let mut s = C64::new(0.0, 0.0);
        let mut mass = 0.0;
        for i in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..n {
                let v = f(h * i as f64, h * j as f64);
                row += v;
                mass += v.norm();
            }
            s += row;
        }
        (s / (n * n) as f64, mass / (n * n) as f64)
    };
    let max_n = (spec.max_panels * spec.panel_order)
        .max(4 * n0)
        .min(1 << 12);
    let mut n = n0.max(4);
    let mut prev = grid_mean(n).0;
    loop {
        n *= 2;
        let (cur, mass) = grid_mean(n);
        let err = (cur - prev).norm();
        if !err.is_finite() {
            return Err(NumericsError::NonConvergence {
                estimate: cur,
                error: f64::INFINITY,
            });
        }
        if err <= spec.tolerance(cur).max(ROUNDOFF_FLOOR * mass) {
            return Ok(Estimate::new(cur, err));
        }
        if n * 2 > max_n {
            return Err(NumericsError::NonConvergence {
                estimate: cur,
                error: err,
            });
        }
        prev = cur;
    }
}

/// Values of a function of u ≥ 0 tabulated on nodes uniform in t = ln(1+u),
/// with four-point Lagrange interpolation in t. Zero beyond `u_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedTable {
    pub u_max: f64,
    pub step: f64,
    pub values: Vec<C64>,
}

impl GradedTable {
    /// Tabulate `f` on `n ≥ 4` nodes spanning [0, u_max].
    pub fn build<F: Fn(f64) -> C64 + Sync + ?Sized>(f: &F, u_max: f64, n: usize) -> Self {
        use rayon::prelude::*;
        assert!(n >= 4 && u_max > 0.0);
        let step = u_max.ln_1p() / (n - 1) as f64;
        let values: Vec<C64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let u = if i == n - 1 {
                    u_max
                } else {
                    (i as f64 * step).exp_m1()
                };
                f(u)
            })
            .collect();
        GradedTable {
            u_max,
            step,
            values,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.values.len() {
            self.u_max
        } else {
            (i as f64 * self.step).exp_m1()
        }
    }

    pub fn eval(&self, u: f64) -> C64 {
        if !(u >= 0.0) || u > self.u_max {
            return C64::new(0.0, 0.0);
        }
        let n = self.values.len();
        let t = u.ln_1p() / self.step;
        let i = (t.floor() as usize).min(n - 2);
        let i0 = i.saturating_sub(1).min(n - 4);
        let mut s = C64::new(0.0, 0.0);
        for j in i0..i0 + 4 {
            let mut w = 1.0;
            for m in i0..i0 + 4 {
                if m != j {
                    w *= (t - m as f64) / (j as f64 - m as f64);
                }
            }
            s += self.values[j] * w;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn gl_rules_integrate_polynomials_exactly() {
        for n in [2usize, 5, 16, 33, 64] {
            let r = gauss_legendre(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} weight sum {s}");
            let deg = 2 * n - 1;
            let m: f64 = r
                .nodes
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * x.powi(deg as i32 - 1))
                .sum();
            let exact = 2.0 / deg as f64;
            assert!((m - exact).abs() < 1e-12, "n={n}: {m} vs {exact}");
        }
    }

    #[test]
    fn integrate_1d_examples() {
        let spec = QuadratureSpec::default();
        let one = integrate_1d(&|_| c(1.0), 0.0, 1.0, &spec).unwrap();
        assert!((one.value - 1.0).norm() < 1e-14);
        let osc = integrate_1d(&|p: f64| C64::from_polar(1.0, p), 0.0, 2.0 * PI, &spec).unwrap();
        assert!(osc.value.norm() < 1e-12);
        let v = integrate_1d(&|u: f64| c((1.0 + u).powi(-2)), 0.0, 1e6, &spec).unwrap();
        assert!((v.value.re - 1.0).abs() < 1e-5);
        assert!((v.value.re - (1.0 - 1.0 / (1.0 + 1e6))).abs() < 1e-8);
    }

    #[test]
    fn error_estimate_respects_tolerance() {
        let spec = QuadratureSpec::default();
        let e = integrate_1d(&|x: f64| c((5.0 * x).sin().exp()), -1.0, 3.0, &spec).unwrap();
        assert!(e.error <= spec.tolerance(e.value));
    }

    #[test]
    fn non_convergence_carries_estimate() {
        let spec = QuadratureSpec {
            max_panels: 3,
            ..Default::default()
        };
        let r = integrate_1d(&|x: f64| c(x.abs().sqrt()), -1.0, 1.0, &spec);
        match r {
            Err(NumericsError::NonConvergence { estimate, error }) => {
                assert!((estimate.re - 4.0 / 3.0).abs() < 0.1);
                assert!(error > 0.0);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        let spec = QuadratureSpec {
            panel_order: 1,
            ..Default::default()
        };
        assert!(matches!(
            integrate_1d(&|_| c(1.0), 0.0, 1.0, &spec),
            Err(NumericsError::InvalidSpec(_))
        ));
    }

    #[test]
    fn determinism() {
        let spec = QuadratureSpec::default();
        let f = |x: f64| C64::new((x * 7.0).cos() / (1.0 + x * x), x.sin());
        let a = integrate_1d(&f, -3.0, 5.0, &spec).unwrap();
        let b = integrate_1d(&f, -3.0, 5.0, &spec).unwrap();
        assert_eq!(a.value.re.to_bits(), b.value.re.to_bits());
        assert_eq!(a.value.im.to_bits(), b.value.im.to_bits());
    }

    #[test]
    fn periodic_examples() {
        let spec = QuadratureSpec::default();
        let one = integrate_periodic(&|_| c(1.0), 2.0 * PI, &spec).unwrap();
        assert!((one.value.re - 2.0 * PI).abs() < 1e-13);
        let m = mean_periodic(&|_| c(1.0), 2.0 * PI, &spec).unwrap();
        assert!((m.value.re - 1.0).abs() < 1e-14);
        let e3 =
            integrate_periodic(&|t: f64| C64::from_polar(1.0, 3.0 * t), 2.0 * PI, &spec).unwrap();
        assert!(e3.value.norm() < 1e-12);
        let cos2 = integrate_periodic(&|t: f64| c(t.cos().powi(2)), 2.0 * PI, &spec).unwrap();
        assert!((cos2.value.re - PI).abs() < 1e-13);
    }

    #[test]
    fn half_line_substitution() {
        let spec = QuadratureSpec::default();
        let v = integrate_to_infinity(&|u: f64| c((1.0 + u).powi(-2)), 0.0, &spec).unwrap();
        assert!((v.value.re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn box_matches_product_of_1d() {
        let spec = QuadratureSpec::default();
        let f1 = |x: f64| (-(x - 0.3).powi(2)).exp();
        let f2 = |y: f64| 1.0 / (1.0 + y * y);
        let f3 = |z: f64| z.cos();
        let g = |p: &[f64]| c(f1(p[0]) * f2(p[1]) * f3(p[2]));
        let b = integrate_box(
            &g,
            &[vec![0.0, 1.0], vec![-1.0, 0.0, 2.0], vec![0.0, 1.5]],
            &spec,
        )
        .unwrap();
        let i1 = integrate_1d(&|x| c(f1(x)), 0.0, 1.0, &spec)
            .unwrap()
            .value
            .re;
        let i2 = integrate_1d(&|x| c(f2(x)), -1.0, 2.0, &spec)
            .unwrap()
            .value
            .re;
        let i3 = integrate_1d(&|x| c(f3(x)), 0.0, 1.5, &spec)
            .unwrap()
            .value
            .re;
        assert!((b.value.re - i1 * i2 * i3).abs() < 1e-10);
    }

    #[test]
    fn haar_radial_closed_form() {
        let spec = QuadratureSpec::default();
        let f = |g: &GroupElement| c((1.0 - g.u()).max(0.0));
        let v = integrate_g(&f, &SupportHint::Radial { u_max: 1.0 }, &spec).unwrap();
        assert!((v.value.re - 1.0).abs() < 1e-6, "{}", v.value);
    }

    #[test]
    fn haar_pure_right_type_vanishes() {
        let spec = QuadratureSpec::with_tol(1e-7, 1e-10);
        let f = |g: &GroupElement| {
            let w = g.to_iwasawa();
            let bump = |t: f64| {
                if t.abs() < 1.0 {
                    (-1.0 / (1.0 - t * t)).exp()
                } else {
                    0.0
                }
            };
            C64::from_polar(bump(w.x) * bump(2.0 * (w.y - 1.0)), 2.0 * w.theta)
        };
        let v = integrate_g(
            &f,
            &SupportHint::Iwasawa {
                x: (-1.0, 1.0),
                y: (0.5, 1.5),
            },
            &spec,
        )
        .unwrap();
        assert!(v.value.norm() < 1e-9, "{}", v.value);
    }

    #[test]
    fn bad_hint_detected() {
        let spec = QuadratureSpec::default();
        let f = |_: &GroupElement| c(1.0);
        let r = integrate_g(
            &f,
            &SupportHint::Iwasawa {
                x: (-1.0, 1.0),
                y: (0.5, 1.5),
            },
            &spec,
        );
        assert!(matches!(r, Err(NumericsError::BadHint { .. })));
        let r = integrate_g(&f, &SupportHint::Radial { u_max: 1.0 }, &spec);
        assert!(matches!(r, Err(NumericsError::BadHint { .. })));
    }

    #[test]
    fn haar_charts_agree_on_radial_field() {
        let spec = QuadratureSpec::with_tol(1e-7, 1e-13);
        let f = |g: &GroupElement| c(smooth_plateau(g.u(), -1.0, -0.5, 0.4, 1.5));
        let r = integrate_g(&f, &SupportHint::Radial { u_max: 1.5 }, &spec).unwrap();
        let w = integrate_g(&f, &SupportHint::iwasawa_ball(1.5), &spec).unwrap();
        assert!(
            (r.value - w.value).norm() < 1e-6 * r.value.norm(),
            "{} vs {}",
            r.value,
            w.value
        );
    }

    #[test]
    fn kappa_calibration_matches_analytic_value() {
        let spec = QuadratureSpec::with_tol(1e-7, 1e-14);
        let k = calibrate_kappa_bruhat(&spec).unwrap();
        assert!((k - KAPPA_BRUHAT).abs() < 1e-6 * KAPPA_BRUHAT, "kappa {k}");
    }

    #[test]
    fn fd_examples() {
        let d = fd_derivative(&|x| c(x * x), 3.0, 1);
        assert!((d.re - 6.0).abs() < 1e-8);
        let d2 = fd_derivative(&|x| C64::from_polar(1.0, x), 0.0, 2);
        assert!((d2 - c(-1.0)).norm() < 1e-6);
        for order in 1..=4 {
            assert!(fd_derivative(&|_| c(2.5), 0.7, order).norm() < 1e-12);
        }
        let d3 = fd_derivative_real(&|x: f64| x.sin(), 0.4, 3);
        assert!((d3 + 0.4f64.cos()).abs() < 1e-4);
        let d4 = fd_derivative_real(&|x: f64| x.exp(), 0.2, 4);
        assert!((d4 - 0.2f64.exp()).abs() < 1e-3);
    }

    #[test]
    fn torus_mean_of_characters() {
        let spec = QuadratureSpec::default();
        let one = mean_torus(&|_, _| c(1.0), 16, &spec).unwrap();
        assert!((one.value - 1.0).norm() < 1e-14);
        let ch = mean_torus(
            &|a: f64, b: f64| C64::from_polar(1.0, 3.0 * a - 2.0 * b),
            16,
            &spec,
        )
        .unwrap();
        assert!(ch.value.norm() < 1e-14);
        let e = mean_torus(&|a: f64, b: f64| c((a.cos() + b.sin()).exp()), 16, &spec).unwrap();
        // mean of e^{cos a} e^{sin b} = I_0(1)^2
        let i0 = 1.266_065_877_752_008_4;
        assert!((e.value.re - i0 * i0).abs() < 1e-12);
    }

    #[test]
    fn graded_table_interpolates() {
        let f = |u: f64| c((1.0 + u).powf(-1.5) * (0.3 * u).cos());
        let t = GradedTable::build(&f, 50.0, 512);
        assert_eq!(t.node(0), 0.0);
        assert_eq!(t.node(511), 50.0);
        for &u in &[0.0, 1e-3, 0.37, 2.0, 9.9, 31.4, 50.0] {
            assert!((t.eval(u) - f(u)).norm() < 1e-8, "u={u}");
        }
        assert_eq!(t.eval(50.1), c(0.0));
    }
}
