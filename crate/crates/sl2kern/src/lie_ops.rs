//! Right Lie differentials, raising/lowering operators and the Casimir
//! operator, realized through chart formulas.
//!
//! In the Iwasawa chart n[x]a[y]k[θ]:
//!   e⁺ = e^{2iθ}(2iy∂x + 2y∂y − i∂θ), e⁻ = e^{−2iθ}(−2iy∂x + 2y∂y + i∂θ),
//!   x₃ = ∂θ, Ω = −y²(∂x² + ∂y²) + y∂x∂θ.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::numerics::{fd_derivative, fd_derivative_step, C64, I};
use crate::sl2::{CartanCoord, GroupElement, IwasawaCoord};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LieError {
    #[error("Cartan chart is singular at u = {u:e}")]
    ChartSingularity { u: f64 },
}

pub type Evaluator = Arc<dyn Fn(&GroupElement) -> C64 + Send + Sync>;
/// First-order chart partials at a point, in the chart's coordinate order.
pub type Partials = Arc<dyn Fn(&GroupElement) -> [C64; 3] + Send + Sync>;

/// A function on G with optional analytic chart partials.
#[derive(Clone)]
pub struct SmoothField {
    eval: Evaluator,
    iwasawa_partials: Option<Partials>,
    cartan_partials: Option<Partials>,
    pub smoothness: u32,
}

impl fmt::Debug for SmoothField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothField")
            .field("iwasawa_partials", &self.iwasawa_partials.is_some())
            .field("cartan_partials", &self.cartan_partials.is_some())
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Iwasawa,
    Cartan,
}

/// Below this u the Cartan Casimir switches to the ϱ-form.
pub const CARTAN_RHO_FORM_BELOW: f64 = 1e-6;
/// Below this u the Cartan chart is refused.
pub const CARTAN_SINGULAR_BELOW: f64 = 1e-10;

impl SmoothField {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&GroupElement) -> C64 + Send + Sync + 'static,
    {
        SmoothField {
            eval: Arc::new(f),
            iwasawa_partials: None,
            cartan_partials: None,
            smoothness: u32::MAX,
        }
    }

    pub fn zero() -> Self {
        SmoothField::new(|_| C64::new(0.0, 0.0))
    }

    pub fn constant(v: C64) -> Self {
        SmoothField::new(move |_| v)
    }

    /// Field given in Iwasawa coordinates.
    pub fn from_iwasawa_fn<F>(f: F) -> Self
    where
        F: Fn(f64, f64, f64) -> C64 + Send + Sync + 'static,
    {
        SmoothField::new(move |g| {
            let w = g.to_iwasawa();
            f(w.x, w.y, w.theta)
        })
    }

    /// Bi-K-invariant field g ↦ p(u(g)).
    pub fn radial<F>(p: F) -> Self
    where
        F: Fn(f64) -> C64 + Send + Sync + 'static,
    {
        SmoothField::new(move |g| p(g.u()))
    }

    pub fn with_smoothness(mut self, j: u32) -> Self {
        self.smoothness = j;
        self
    }

    /// Attaches analytic (∂x, ∂y, ∂θ).
    pub fn with_iwasawa_partials<P>(mut self, p: P) -> Self
    where
        P: Fn(&GroupElement) -> [C64; 3] + Send + Sync + 'static,
    {
        self.iwasawa_partials = Some(Arc::new(p));
        self
    }

    /// Attaches analytic (∂φ, ∂u, ∂ϑ).
    pub fn with_cartan_partials<P>(mut self, p: P) -> Self
    where
        P: Fn(&GroupElement) -> [C64; 3] + Send + Sync + 'static,
    {
        self.cartan_partials = Some(Arc::new(p));
        self
    }

    pub fn has_iwasawa_partials(&self) -> bool {
        self.iwasawa_partials.is_some()
    }

    pub fn has_cartan_partials(&self) -> bool {
        self.cartan_partials.is_some()
    }

    #[inline]
    pub fn eval(&self, g: &GroupElement) -> C64 {
        (self.eval)(g)
    }

    pub fn evaluator(&self) -> Evaluator {
        self.eval.clone()
    }

    /// g ↦ f(h g).
    pub fn left_translate(&self, h: GroupElement) -> SmoothField {
        let e = self.eval.clone();
        SmoothField::new(move |g| e(&(h * *g))).with_smoothness(self.smoothness)
    }

    /// g ↦ f(g h).
    pub fn right_translate(&self, h: GroupElement) -> SmoothField {
        let e = self.eval.clone();
        SmoothField::new(move |g| e(&(*g * h))).with_smoothness(self.smoothness)
    }

    pub fn scale(&self, s: C64) -> SmoothField {
        let e = self.eval.clone();
        SmoothField::new(move |g| e(g) * s).with_smoothness(self.smoothness)
    }

    pub fn add(&self, other: &SmoothField) -> SmoothField {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        SmoothField::new(move |g| a(g) + b(g))
            .with_smoothness(self.smoothness.min(other.smoothness))
    }

    pub fn sub(&self, other: &SmoothField) -> SmoothField {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        SmoothField::new(move |g| a(g) - b(g))
            .with_smoothness(self.smoothness.min(other.smoothness))
    }

    pub fn mul(&self, other: &SmoothField) -> SmoothField {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        SmoothField::new(move |g| a(g) * b(g))
            .with_smoothness(self.smoothness.min(other.smoothness))
    }

    pub fn conj(&self) -> SmoothField {
        let e = self.eval.clone();
        SmoothField::new(move |g| e(g).conj()).with_smoothness(self.smoothness)
    }

    /// (∂x, ∂y, ∂θ) at g.
    pub fn iwasawa_gradient(&self, g: &GroupElement) -> [C64; 3] {
        if let Some(p) = &self.iwasawa_partials {
            return p(g);
        }
        let w = g.to_iwasawa();
        let e = &self.eval;
        let fx = fd_derivative(
            &|x| e(&GroupElement::from_iwasawa(&IwasawaCoord { x, ..w })),
            w.x,
            1,
        );
        let fy = fd_derivative_y(
            &|y| e(&GroupElement::from_iwasawa(&IwasawaCoord { y, ..w })),
            w.y,
            1,
        );
        let ft = fd_angle(
            &|theta| e(&GroupElement::from_iwasawa(&IwasawaCoord { theta, ..w })),
            w.theta,
            1,
        );
        [fx, fy, ft]
    }

    /// (∂φ, ∂u, ∂ϑ) at g; needs u(g) above the chart singularity.
    pub fn cartan_gradient(&self, g: &GroupElement) -> Result<[C64; 3], LieError> {
        if let Some(p) = &self.cartan_partials {
            return Ok(p(g));
        }
        let c = g.to_cartan();
        if c.u < CARTAN_SINGULAR_BELOW {
            return Err(LieError::ChartSingularity { u: c.u });
        }
        let e = &self.eval;
        let at = |phi: f64, u: f64, vartheta: f64| {
            e(&GroupElement::from_cartan(&CartanCoord {
                phi,
                u,
                vartheta,
            }))
        };
        let fp = fd_angle(&|p| at(p, c.u, c.vartheta), c.phi, 1);
        let fu = fd_u(&|u| at(c.phi, u, c.vartheta), c.u, 1);
        let fv = fd_angle(&|v| at(c.phi, c.u, v), c.vartheta, 1);
        Ok([fp, fu, fv])
    }
}

// y-derivatives: keep the stencil inside y > 0.
fn fd_derivative_y<F: Fn(f64) -> C64 + ?Sized>(f: &F, y: f64, order: usize) -> C64 {
    let h = f64::EPSILON.powf(1.0 / (order as f64 + 4.0)) * (y.abs() + 1.0);
    let h = h.min(y / 4.0);
    fd_derivative_step(f, y, order, h)
}

// angle derivatives: the step does not grow with the angle.
fn fd_angle<F: Fn(f64) -> C64 + ?Sized>(f: &F, t: f64, order: usize) -> C64 {
    fd_derivative_step(f, t, order, f64::EPSILON.powf(1.0 / (order as f64 + 4.0)))
}

// u-derivatives use a step relative to u: smooth functions carry √u terms
// near the axis, so the stencil must stay well inside u > 0.
fn fd_u<F: Fn(f64) -> C64 + ?Sized>(f: &F, u: f64, order: usize) -> C64 {
    let h = f64::EPSILON.powf(1.0 / (order as f64 + 4.0)) * u;
    fd_derivative_step(f, u, order, h)
}

fn iwasawa_partial(f: &SmoothField, g: &GroupElement, k: usize) -> C64 {
    f.iwasawa_gradient(g)[k]
}

/// e⁺f.
pub fn apply_e_plus(f: &SmoothField) -> SmoothField {
    let f = f.clone();
    let j = f.smoothness.saturating_sub(1);
    SmoothField::new(move |g| {
        let w = g.to_iwasawa();
        let [fx, fy, ft] = f.iwasawa_gradient(g);
        C64::from_polar(1.0, 2.0 * w.theta) * (I * 2.0 * w.y * fx + fy * (2.0 * w.y) - I * ft)
    })
    .with_smoothness(j)
}

/// e⁻f.
pub fn apply_e_minus(f: &SmoothField) -> SmoothField {
    let f = f.clone();
    let j = f.smoothness.saturating_sub(1);
    SmoothField::new(move |g| {
        let w = g.to_iwasawa();
        let [fx, fy, ft] = f.iwasawa_gradient(g);
        C64::from_polar(1.0, -2.0 * w.theta) * (-I * 2.0 * w.y * fx + fy * (2.0 * w.y) + I * ft)
    })
    .with_smoothness(j)
}

/// x₃f = ∂θ f.
pub fn apply_x3(f: &SmoothField) -> SmoothField {
    let f = f.clone();
    let j = f.smoothness.saturating_sub(1);
    SmoothField::new(move |g| iwasawa_partial(&f, g, 2)).with_smoothness(j)
}

/// Right Lie differential x_j f(g) = ∂_t f(g exp(tX_j)) by finite differences;
/// X₁ = (0 1; 0 0), X₂ = diag(1, −1), X₃ = (0 1; −1 0).
pub fn apply_right_differential(f: &SmoothField, j: usize) -> SmoothField {
    let f = f.clone();
    SmoothField::new(move |g| {
        let g = *g;
        let path = |t: f64| match j {
            1 => g * GroupElement::n(t),
            2 => g * GroupElement::a((2.0 * t).exp()),
            3 => g * GroupElement::k(t),
            _ => panic!("right differential index must be 1, 2 or 3"),
        };
        fd_derivative(&|t| f.eval(&path(t)), 0.0, 1)
    })
}

/// Ωf at one point in the chosen chart.
pub fn casimir_at(f: &SmoothField, g: &GroupElement, chart: Chart) -> Result<C64, LieError> {
    match chart {
        Chart::Iwasawa => Ok(casimir_iwasawa_at(f, g)),
        Chart::Cartan => casimir_cartan_at(f, g),
    }
}

fn casimir_iwasawa_at(f: &SmoothField, g: &GroupElement) -> C64 {
    let w = g.to_iwasawa();
    let at = |x: f64, y: f64, theta: f64| {
        f.eval(&GroupElement::from_iwasawa(&IwasawaCoord { x, y, theta }))
    };
    let (fxx, fyy, fxt);
    if let Some(p) = &f.iwasawa_partials {
        let px = |x: f64, y: f64, theta: f64| {
            p(&GroupElement::from_iwasawa(&IwasawaCoord { x, y, theta }))
        };
        fxx = fd_derivative(&|x| px(x, w.y, w.theta)[0], w.x, 1);
        fyy = fd_derivative_y(&|y| px(w.x, y, w.theta)[1], w.y, 1);
        fxt = fd_angle(&|t| px(w.x, w.y, t)[0], w.theta, 1);
    } else {
        fxx = fd_derivative(&|x| at(x, w.y, w.theta), w.x, 2);
        fyy = fd_derivative_y(&|y| at(w.x, y, w.theta), w.y, 2);
        fxt = fd_angle(&|t| fd_derivative(&|x| at(x, w.y, t), w.x, 1), w.theta, 1);
    }
    -(fxx + fyy) * (w.y * w.y) + fxt * w.y
}

fn casimir_cartan_at(f: &SmoothField, g: &GroupElement) -> Result<C64, LieError> {
    let c = g.to_cartan();
    if c.u < CARTAN_SINGULAR_BELOW {
        return Err(LieError::ChartSingularity { u: c.u });
    }
    let at = |phi: f64, u: f64, vartheta: f64| {
        f.eval(&GroupElement::from_cartan(&CartanCoord {
            phi,
            u,
            vartheta,
        }))
    };
    // angular second derivatives are common to both forms
    let fpp = fd_angle(&|p| at(p, c.u, c.vartheta), c.phi, 2);
    let fvv = fd_angle(&|v| at(c.phi, c.u, v), c.vartheta, 2);
    let fpv = fd_angle(&|v| fd_angle(&|p| at(p, c.u, v), c.phi, 1), c.vartheta, 1);
    if c.u > CARTAN_RHO_FORM_BELOW {
        let u = c.u;
        let fuu = fd_u(&|s| at(c.phi, s, c.vartheta), u, 2);
        let fu = fd_u(&|s| at(c.phi, s, c.vartheta), u, 1);
        let q = u * (u + 1.0);
        Ok(
            -fuu * q - fu * (2.0 * u + 1.0) - fpp / (16.0 * q)
                + fpv * ((2.0 * u + 1.0) / (8.0 * q))
                - fvv / (16.0 * q),
        )
    } else {
        // ϱ-form; negative ϱ is k[φ]a[e^{|ϱ|}]k[ϑ], so the stencil may cross 0
        let rho = c.rho();
        let at_rho = |r: f64| {
            let a = GroupElement::a((-r).exp());
            f.eval(&(GroupElement::k(c.phi) * a * GroupElement::k(c.vartheta)))
        };
        let frr = fd_derivative(&at_rho, rho, 2);
        let fr = fd_derivative(&at_rho, rho, 1);
        let (coth, csch2) = if rho.abs() < 1e-5 {
            (1.0 / rho + rho / 3.0, 1.0 / (rho * rho) - 1.0 / 3.0)
        } else {
            (1.0 / rho.tanh(), 1.0 / rho.sinh().powi(2))
        };
        Ok(
            -frr - fr * coth - fpp * (0.25 * csch2) + fpv * (0.5 * csch2 * rho.cosh())
                - fvv * (0.25 * csch2),
        )
    }
}

/// Ωf as a field. In the Cartan chart, points with u below the chart
/// singularity are evaluated through the Iwasawa form.
pub fn casimir(f: &SmoothField, chart: Chart) -> SmoothField {
    let f = f.clone();
    let j = f.smoothness.saturating_sub(2);
    SmoothField::new(move |g| match casimir_at(&f, g, chart) {
        Ok(v) => v,
        Err(LieError::ChartSingularity { .. }) => casimir_iwasawa_at(&f, g),
    })
    .with_smoothness(j)
}

/// −¼e⁺e⁻ + ¼x₃² − ½ix₃.
pub fn casimir_factored_plus_minus(f: &SmoothField) -> SmoothField {
    let em = apply_e_minus(f);
    let epem = apply_e_plus(&em);
    let x3 = apply_x3(f);
    let x3x3 = apply_x3(&x3);
    let (a, b, c) = (epem, x3x3, x3);
    SmoothField::new(move |g| -a.eval(g) * 0.25 + b.eval(g) * 0.25 - I * c.eval(g) * 0.5)
}

/// −¼e⁻e⁺ + ¼x₃² + ½ix₃.
pub fn casimir_factored_minus_plus(f: &SmoothField) -> SmoothField {
    let ep = apply_e_plus(f);
    let emep = apply_e_minus(&ep);
    let x3 = apply_x3(f);
    let x3x3 = apply_x3(&x3);
    let (a, b, c) = (emep, x3x3, x3);
    SmoothField::new(move |g| -a.eval(g) * 0.25 + b.eval(g) * 0.25 + I * c.eval(g) * 0.5)
}

/// Commutator [A, B]f = A(Bf) − B(Af).
pub fn commutator(
    a: fn(&SmoothField) -> SmoothField,
    b: fn(&SmoothField) -> SmoothField,
    f: &SmoothField,
) -> SmoothField {
    a(&b(f)).sub(&b(&a(f)))
}

/// Samples of analytic test fields used by the operator identity checks.
pub fn analytic_test_fields() -> Vec<(&'static str, SmoothField)> {
    vec![
        (
            "phi_basic(nu=0.3i,l=2)",
            SmoothField::from_iwasawa_fn(|_, y, t| {
                C64::new(y, 0.0).powc(C64::new(0.5, 0.3)) * C64::from_polar(1.0, 2.0 * t)
            }),
        ),
        (
            "gaussian_x_times_y",
            SmoothField::from_iwasawa_fn(|x, y, t| {
                C64::new((-x * x).exp() * y.ln().cos(), 0.0) * C64::from_polar(1.0, -t)
            }),
        ),
        (
            "radial_exp",
            SmoothField::radial(|u| C64::new((-u).exp(), 0.0)),
        ),
        (
            "entries_poly",
            SmoothField::new(|g| C64::new(g.a * g.a + 0.5 * g.b, g.c * g.d)),
        ),
        (
            "mixed_types",
            SmoothField::from_iwasawa_fn(|x, y, t| {
                C64::new((0.5 * x).sin() + y.sqrt(), 0.0)
                    * (C64::from_polar(1.0, 3.0 * t) + C64::from_polar(0.5, -t))
            }),
        ),
    ]
}
