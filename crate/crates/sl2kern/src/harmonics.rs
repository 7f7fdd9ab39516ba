//! Basic eigenfunctions φ_ℓ(g, ν), K-type projections, the two-type
//! functions φ_{ℓ₁,ℓ₂}(a_u, ν), their unitary normalization P_ν^{(ℓ₁,ℓ₂)}
//! and spectral transforms ⟨F, P⟩_G.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};
use thiserror::Error;

use crate::lie_ops::SmoothField;
use crate::numerics::{
    gauss_legendre, integrate_1d, integrate_1d_breaks, integrate_g, integrate_to_infinity,
    mean_periodic, mean_torus, Estimate, GradedTable, NumericsError, QuadratureSpec, SupportHint,
    C64, I,
};
use crate::sl2::GroupElement;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HarmonicsError {
    #[error("types ({l1}, {l2}) have different parity")]
    Parity { l1: i32, l2: i32 },
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralKind {
    Principal,
    Exceptional,
    Discrete,
}

/// ν together with the series it belongs to. Discrete parameters carry the
/// weight k with ν = (k−1)/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralParameter {
    pub kind: SpectralKind,
    pub nu: C64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<u32>,
}

impl SpectralParameter {
    /// ν = i t.
    pub fn principal(t: f64) -> Self {
        SpectralParameter {
            kind: SpectralKind::Principal,
            nu: C64::new(0.0, t),
            weight: None,
        }
    }

    pub fn exceptional(nu: f64) -> Result<Self, HarmonicsError> {
        let p = SpectralParameter {
            kind: SpectralKind::Exceptional,
            nu: C64::new(nu, 0.0),
            weight: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn discrete(k: u32) -> Result<Self, HarmonicsError> {
        let p = SpectralParameter {
            kind: SpectralKind::Discrete,
            nu: C64::new((k as f64 - 1.0) / 2.0, 0.0),
            weight: Some(k),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), HarmonicsError> {
        let bad = |m: String| Err(HarmonicsError::Domain(m));
        match self.kind {
            SpectralKind::Principal => {
                if self.nu.re != 0.0 || !self.nu.im.is_finite() {
                    return bad(format!("principal series needs ν ∈ iℝ, got {}", self.nu));
                }
            }
            SpectralKind::Exceptional => {
                if self.nu.im != 0.0 || !(self.nu.re > 0.0 && self.nu.re < 0.5) {
                    return bad(format!(
                        "exceptional series needs ν ∈ (0, 1/2), got {}",
                        self.nu
                    ));
                }
            }
            SpectralKind::Discrete => {
                let Some(k) = self.weight else {
                    return bad("discrete series needs a weight".into());
                };
                if k < 2 {
                    return bad(format!("discrete series needs k ≥ 2, got {k}"));
                }
                if self.nu != C64::new((k as f64 - 1.0) / 2.0, 0.0) {
                    return bad(format!(
                        "discrete weight {k} needs ν = {}, got {}",
                        (k as f64 - 1.0) / 2.0,
                        self.nu
                    ));
                }
            }
        }
        Ok(())
    }

    /// Casimir eigenvalue ¼ − ν².
    pub fn eigenvalue(&self) -> C64 {
        C64::new(0.25, 0.0) - self.nu * self.nu
    }

    /// Checks parity and, for the discrete series, |ℓᵢ| ≥ k with ℓᵢ ≡ k (mod 2).
    pub fn check_types(&self, l1: i32, l2: i32) -> Result<(), HarmonicsError> {
        check_parity(l1, l2)?;
        self.validate()?;
        if let (SpectralKind::Discrete, Some(k)) = (self.kind, self.weight) {
            for l in [l1, l2] {
                if l.unsigned_abs() < k || (l - k as i32).rem_euclid(2) != 0 {
                    return Err(HarmonicsError::Domain(format!(
                        "type {l} is not in the weight {k} discrete series"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A pair of K-types with equal parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypePair {
    pub l1: i32,
    pub l2: i32,
}

impl TypePair {
    pub fn new(l1: i32, l2: i32) -> Result<Self, HarmonicsError> {
        check_parity(l1, l2)?;
        Ok(TypePair { l1, l2 })
    }
}

pub fn check_parity(l1: i32, l2: i32) -> Result<(), HarmonicsError> {
    if (l1 - l2).rem_euclid(2) != 0 {
        Err(HarmonicsError::Parity { l1, l2 })
    } else {
        Ok(())
    }
}

/// φ_ℓ(g, ν) = y^{1/2+ν} e^{iℓθ} at the Iwasawa coordinates of g.
pub fn phi_basic(g: &GroupElement, nu: C64, l: i32) -> C64 {
    let r2 = g.c * g.c + g.d * g.d;
    let y = 1.0 / r2;
    // bottom row of a[y]k[θ] is y^{-1/2}(−sin θ, cos θ)
    let e = C64::new(g.d, -g.c) * y.sqrt();
    C64::new(y, 0.0).powc(nu + 0.5) * e.powi(l)
}

/// φ_ℓ(·, ν) as a field with analytic Iwasawa partials.
pub fn phi_basic_field(nu: C64, l: i32) -> SmoothField {
    SmoothField::new(move |g| phi_basic(g, nu, l)).with_iwasawa_partials(move |g| {
        let v = phi_basic(g, nu, l);
        let y = 1.0 / (g.c * g.c + g.d * g.d);
        [C64::new(0.0, 0.0), v * (nu + 0.5) / y, v * I * l as f64]
    })
}

/// 𝓕_{ℓ₁,ℓ₂}F(g) = ∬ F(k[θ₁] g k[θ₂]) e^{−iℓ₁θ₁−iℓ₂θ₂} dk₁ dk₂.
pub fn project_types_at<F: Fn(&GroupElement) -> C64 + ?Sized>(
    f: &F,
    g: &GroupElement,
    l1: i32,
    l2: i32,
    spec: &QuadratureSpec,
) -> Result<Estimate, NumericsError> {
    let h = |t1: f64, t2: f64| {
        let m = GroupElement::k(t1) * *g * GroupElement::k(t2);
        f(&m) * C64::from_polar(1.0, -(l1 as f64) * t1 - l2 as f64 * t2)
    };
    mean_torus(&h, 16, spec)
}

/// The projection 𝓕_{ℓ₁,ℓ₂}F as a field. Non-converged estimates are
/// returned as they stand.
pub fn project_types(f: &SmoothField, l1: i32, l2: i32, spec: &QuadratureSpec) -> SmoothField {
    let e = f.evaluator();
    let spec = *spec;
    SmoothField::new(move |g| match project_types_at(&*e, g, l1, l2, &spec) {
        Ok(v) => v.value,
        Err(NumericsError::NonConvergence { estimate, .. }) => estimate,
        Err(_) => C64::new(f64::NAN, f64::NAN),
    })
}

/// Below this u the two-type integral is a smooth periodic integrand and
/// the trapezoid rule is used.
const TRAPEZOID_BELOW: f64 = 2.0;

/// φ_{ℓ₁,ℓ₂}(a_u, ν) = (1/2π)∫ (c + s e^{iφ})^{−1/2−ν−ℓ₂/2} (c + s e^{−iφ})^{−1/2−ν+ℓ₂/2}
/// e^{i(ℓ₂−ℓ₁)φ/2} dφ with c = √(1+u), s = √u, principal branches.
pub fn phi_two_type(
    u: f64,
    nu: C64,
    l1: i32,
    l2: i32,
    spec: &QuadratureSpec,
) -> Result<C64, HarmonicsError> {
    Ok(phi_two_type_estimate(u, nu, l1, l2, spec)?.value)
}

pub fn phi_two_type_estimate(
    u: f64,
    nu: C64,
    l1: i32,
    l2: i32,
    spec: &QuadratureSpec,
) -> Result<Estimate, HarmonicsError> {
    check_parity(l1, l2)?;
    if !(u >= 0.0) || !u.is_finite() {
        return Err(HarmonicsError::Domain(format!(
            "u must be finite and ≥ 0, got {u}"
        )));
    }
    let c = (1.0 + u).sqrt();
    let s = u.sqrt();
    let p = -nu - 0.5 - l2 as f64 / 2.0;
    let q = -nu - 0.5 + l2 as f64 / 2.0;
    let m = ((l2 - l1) / 2) as f64;
    let sign = if (l2 - l1) / 2 % 2 == 0 { 1.0 } else { -1.0 };
    let gap = 1.0 / (c + s);
    // φ = π + t; c + s e^{iφ} = (c − s) + 2s sin²(t/2) − i s sin t
    let integrand = |t: f64| {
        let h = (0.5 * t).sin();
        let a = C64::new(gap + 2.0 * s * h * h, -s * t.sin());
        let la = a.ln();
        (p * la + q * la.conj() + I * (m * t)).exp() * sign
    };
    if u <= TRAPEZOID_BELOW {
        return Ok(mean_periodic(&integrand, 2.0 * PI, spec)?);
    }
    // peak of width ~1/(2u) at t = 0
    let mut right = Vec::new();
    let mut w = 0.5 / u;
    while w < PI {
        right.push(w);
        w *= 4.0;
    }
    let mut breaks: Vec<f64> = right.iter().rev().map(|x| -x).collect();
    breaks.insert(0, -PI);
    breaks.push(0.0);
    breaks.extend(right.iter().copied());
    breaks.push(PI);
    let e = integrate_1d_breaks(&integrand, &breaks, spec)?;
    Ok(Estimate::new(e.value / (2.0 * PI), e.error / (2.0 * PI)))
}

/// The estimate of a quadrature that stopped short of its tolerance; NaN for
/// any other failure.
fn lenient(r: Result<Estimate, HarmonicsError>) -> C64 {
    match r {
        Ok(e) => e.value,
        Err(HarmonicsError::Numerics(NumericsError::NonConvergence { estimate, .. })) => estimate,
        Err(_) => C64::new(f64::NAN, f64::NAN),
    }
}

/// Direct evaluation of (1/2π)∫ φ_{ℓ₂}(k[φ]a_u, ν) e^{−iℓ₁φ} dφ.
pub fn phi_two_type_direct(
    u: f64,
    nu: C64,
    l1: i32,
    l2: i32,
    spec: &QuadratureSpec,
) -> Result<C64, HarmonicsError> {
    check_parity(l1, l2)?;
    let au = GroupElement::a_u(u);
    let f = |t: f64| {
        phi_basic(&(GroupElement::k(t) * au), nu, l2) * C64::from_polar(1.0, -(l1 as f64) * t)
    };
    Ok(mean_periodic(&f, 2.0 * PI, spec)?.value)
}

/// P_{−1/2+ν}(2u+1) = (1+u)^{−1/2+ν} ₂F₁(½−ν, ½−ν; 1; u/(1+u)) by direct
/// series summation.
pub fn legendre_series(u: f64, nu: C64) -> Result<C64, HarmonicsError> {
    let x = u / (1.0 + u);
    let a = C64::new(0.5, 0.0) - nu;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for n in 0..200_000u32 {
        let nf = n as f64;
        term *= (a + nf) * (a + nf) / ((nf + 1.0) * (nf + 1.0)) * x;
        sum += term;
        if n > 8 && term.norm() < 1e-17 * sum.norm() {
            return Ok(sum * C64::new(1.0 + u, 0.0).powc(nu - 0.5));
        }
    }
    Err(HarmonicsError::Domain(format!(
        "hypergeometric series did not converge at u = {u}"
    )))
}

/// |G_φ(ν,ℓ₁) G(ν,ℓ₂) / (G_φ(ν,ℓ₂) G(ν,ℓ₁))|, evaluated at |ℓ₁|, |ℓ₂|.
pub fn g_factor_ratio(param: &SpectralParameter, l1: i32, l2: i32) -> Result<f64, HarmonicsError> {
    param.check_types(l1, l2)?;
    if param.kind == SpectralKind::Principal {
        return Ok(1.0);
    }
    let nu = param.nu.re;
    let (a1, a2) = (l1.unsigned_abs() as f64, l2.unsigned_abs() as f64);
    let lg = ln_gamma(nu + (1.0 + a2) / 2.0) + ln_gamma(-nu + (1.0 + a1) / 2.0)
        - ln_gamma(nu + (1.0 + a1) / 2.0)
        - ln_gamma(-nu + (1.0 + a2) / 2.0);
    Ok((0.5 * lg).exp())
}

/// g_factor_ratio × φ_{ℓ₁,ℓ₂}(a_u, ν). The phase is that of φ_{ℓ₁,ℓ₂}, so
/// P is real and positive at u = 0 when ℓ₁ = ℓ₂.
pub fn p_normalized(
    u: f64,
    param: &SpectralParameter,
    l1: i32,
    l2: i32,
    spec: &QuadratureSpec,
) -> Result<C64, HarmonicsError> {
    let r = g_factor_ratio(param, l1, l2)?;
    Ok(phi_two_type(u, param.nu, l1, l2, spec)? * r)
}

/// ∫_{−∞}^{∞} (1+x²)^{−1/2−ν} ((1−ix)/(1+ix))^{ℓ/2} dx in closed form, ν > 0.
pub fn peak_integral_closed_form(nu: f64, l: i32) -> f64 {
    let pref = 2f64.powf(1.0 - 2.0 * nu) * gamma(2.0 * nu);
    let n = l.div_euclid(2);
    let sgn = |e: i32| if e.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    if l.rem_euclid(2) == 0 {
        let nf = n as f64;
        pref * sgn(n) * (PI * nu).cos() * gamma(0.5 + nf - nu) / gamma(0.5 + nf + nu)
    } else {
        let nf = n as f64;
        pref * sgn(n + 1) * (PI * nu).sin() * gamma(-nf - nu) / gamma(-nf + nu)
    }
}

/// The same integral by quadrature: x = tan α turns it into
/// 2∫₀^{π/2} sin^{2ν−1}(r) cos(ℓ(π/2 − r)) dr, and r = w^{1/(2ν)} removes the
/// endpoint singularity.
pub fn peak_integral_quadrature(
    nu: f64,
    l: i32,
    spec: &QuadratureSpec,
) -> Result<f64, HarmonicsError> {
    if !(nu > 0.0) {
        return Err(HarmonicsError::Domain(format!("need ν > 0, got {nu}")));
    }
    let e = 1.0 / (2.0 * nu);
    let f = |w: f64| {
        if w <= 0.0 {
            return C64::new(e * (l as f64 * PI / 2.0).cos(), 0.0);
        }
        let r = w.powf(e);
        let sinc = r.sin() / r;
        C64::new(
            e * sinc.powf(2.0 * nu - 1.0) * (l as f64 * (PI / 2.0 - r)).cos(),
            0.0,
        )
    };
    let top = (PI / 2.0).powf(2.0 * nu);
    Ok(2.0 * integrate_1d(&f, 0.0, top, spec)?.value.re)
}

/// Leading large-u behaviour of φ_{ℓ,ℓ}(a_u, ν): the peak at φ = π gives
/// (2^{2ν}/2π) u^{−1/2+ν} times the completed peak integral.
pub fn phi_peak_asymptotic(u: f64, nu: f64, l: i32) -> f64 {
    2f64.powf(2.0 * nu) / (2.0 * PI) * u.powf(nu - 0.5) * peak_integral_closed_form(nu, l)
}

/// |φ_{ℓ,ℓ}(a_u,ν)| ν (1+|ℓ|^{2ν}) / u^{−1/2+ν}.
pub fn peak_ratio(u: f64, nu: f64, l: i32, spec: &QuadratureSpec) -> Result<f64, HarmonicsError> {
    let v = phi_two_type(u, C64::new(nu, 0.0), l, l, spec)?;
    let lw = if l == 0 {
        0.0
    } else {
        (l.unsigned_abs() as f64).powf(2.0 * nu)
    };
    Ok(v.norm() * nu * (1.0 + lw) / u.powf(nu - 0.5))
}

/// min{log(1+u), 1/Re ν}(1+u)^{−1/2+Re ν}.
pub fn uniform_envelope(u: f64, re_nu: f64) -> f64 {
    let m = if re_nu > 0.0 {
        u.ln_1p().min(1.0 / re_nu)
    } else {
        u.ln_1p()
    };
    m * (1.0 + u).powf(re_nu - 0.5)
}

/// Result of fitting the uniform bound |φ_{ℓ₁,ℓ₂}| ≤ C·envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub constant: f64,
    pub u: f64,
    pub nu: C64,
    pub l1: i32,
    pub l2: i32,
}

/// Largest |φ_{ℓ₁,ℓ₂}(a_u,ν)|/envelope over the sweep
/// u ∈ `us`, ν ∈ `nus`, |ℓᵢ| ≤ `l_max` with matching parity.
pub fn fit_uniform_bound(
    us: &[f64],
    nus: &[C64],
    l_max: i32,
    spec: &QuadratureSpec,
) -> Result<EnvelopeFit, HarmonicsError> {
    let mut cases = Vec::new();
    for &u in us {
        for &nu in nus {
            for l1 in -l_max..=l_max {
                for l2 in -l_max..=l_max {
                    if (l1 - l2).rem_euclid(2) == 0 {
                        cases.push((u, nu, l1, l2));
                    }
                }
            }
        }
    }
    let ratios: Vec<Result<f64, HarmonicsError>> = cases
        .par_iter()
        .map(|&(u, nu, l1, l2)| {
            Ok(phi_two_type(u, nu, l1, l2, spec)?.norm() / uniform_envelope(u, nu.re))
        })
        .collect();
    let mut best = EnvelopeFit {
        constant: 0.0,
        u: 0.0,
        nu: C64::new(0.0, 0.0),
        l1: 0,
        l2: 0,
    };
    for (r, &(u, nu, l1, l2)) in ratios.into_iter().zip(&cases) {
        let r = r?;
        if r > best.constant {
            best = EnvelopeFit {
                constant: r,
                u,
                nu,
                l1,
                l2,
            };
        }
    }
    Ok(best)
}

/// ∫₀^∞ |P^{(ℓ₁,ℓ₂)}_{(k−1)/2}(a_u)|² du.
pub fn discrete_norm_squared(
    k: u32,
    l1: i32,
    l2: i32,
    spec: &QuadratureSpec,
) -> Result<Estimate, HarmonicsError> {
    let param = SpectralParameter::discrete(k)?;
    param.check_types(l1, l2)?;
    let r = g_factor_ratio(&param, l1, l2)?;
    let inner = QuadratureSpec {
        rel_tol: spec.rel_tol * 0.01,
        abs_tol: spec.abs_tol * 1e-3,
        ..*spec
    };
    let f = |u: f64| {
        C64::new(
            (lenient(phi_two_type_estimate(u, param.nu, l1, l2, &inner)) * r).norm_sqr(),
            0.0,
        )
    };
    Ok(integrate_to_infinity(&f, 0.0, spec)?)
}

/// Type projection of a function sampled on two nested composite
/// Gauss–Legendre rules over u ∈ [0, u_max], uniform in ln(1+u). Transforms
/// against many spectral parameters reuse the samples.
#[derive(Debug, Clone)]
pub struct TypeProjection {
    pub l1: i32,
    pub l2: i32,
    pub u_max: f64,
    /// (u, weight in du, projected value) on the fine rule
    pub fine: Vec<(f64, f64, C64)>,
    pub coarse: Vec<(f64, f64, C64)>,
}

impl TypeProjection {
    /// Samples `proj(u)` = 𝓕_{ℓ₁,ℓ₂}F(a_u) on `panels` (fine) and
    /// `panels/2` (coarse) panels of order 16.
    pub fn from_profile<P: Fn(f64) -> C64 + Sync + ?Sized>(
        proj: &P,
        l1: i32,
        l2: i32,
        u_max: f64,
        panels: usize,
    ) -> Self {
        let rule = |n: usize| -> Vec<(f64, f64)> {
            let gl = gauss_legendre(16);
            let tmax = u_max.ln_1p();
            let h = tmax / n as f64;
            let mut out = Vec::with_capacity(16 * n);
            for j in 0..n {
                let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
                for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                    let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
                    let u = t.exp_m1();
                    out.push((u, 0.5 * (b - a) * w * (1.0 + u)));
                }
            }
            out
        };
        let sample = |r: Vec<(f64, f64)>| -> Vec<(f64, f64, C64)> {
            r.into_par_iter().map(|(u, w)| (u, w, proj(u))).collect()
        };
        let panels = panels.max(2);
        TypeProjection {
            l1,
            l2,
            u_max,
            fine: sample(rule(panels)),
            coarse: sample(rule(panels / 2)),
        }
    }

    /// Projects a field by torus quadrature at every node.
    pub fn from_field(
        f: &SmoothField,
        l1: i32,
        l2: i32,
        u_max: f64,
        panels: usize,
        spec: &QuadratureSpec,
    ) -> Self {
        let e = f.evaluator();
        let proj = |u: f64| match project_types_at(&*e, &GroupElement::a_u(u), l1, l2, spec) {
            Ok(v) => v.value,
            Err(NumericsError::NonConvergence { estimate, .. }) => estimate,
            Err(_) => C64::new(f64::NAN, f64::NAN),
        };
        TypeProjection::from_profile(&proj, l1, l2, u_max, panels)
    }

    /// 2∫ 𝓕F(a_u) conj P(a_u) du on both rules; the error is their difference.
    pub fn transform(
        &self,
        param: &SpectralParameter,
        spec: &QuadratureSpec,
    ) -> Result<Estimate, HarmonicsError> {
        self.pair(|u| p_normalized(u, param, self.l1, self.l2, spec))
    }

    /// 2∫ 𝓕F(a_u) conj φ_{ℓ₁,ℓ₂}(a_u, ν) du.
    pub fn transform_phi(
        &self,
        nu: C64,
        spec: &QuadratureSpec,
    ) -> Result<Estimate, HarmonicsError> {
        self.pair(|u| phi_two_type(u, nu, self.l1, self.l2, spec))
    }

    fn pair<H: Fn(f64) -> Result<C64, HarmonicsError> + Sync>(
        &self,
        h: H,
    ) -> Result<Estimate, HarmonicsError> {
        let sum = |nodes: &[(f64, f64, C64)]| -> Result<C64, HarmonicsError> {
            let terms: Vec<Result<C64, HarmonicsError>> = nodes
                .par_iter()
                .map(|&(u, w, p)| {
                    if p == C64::new(0.0, 0.0) {
                        Ok(p)
                    } else {
                        Ok(p * h(u)?.conj() * (2.0 * w))
                    }
                })
                .collect();
            let mut s = C64::new(0.0, 0.0);
            for t in terms {
                s += t?;
            }
            Ok(s)
        };
        let fine = sum(&self.fine)?;
        let coarse = sum(&self.coarse)?;
        Ok(Estimate::new(fine, (fine - coarse).norm()))
    }
}

/// ⟨F, P_ν^{(ℓ₁,ℓ₂)}⟩_G for F supported in u ≤ u_max.
pub fn spectral_transform(
    f: &SmoothField,
    param: &SpectralParameter,
    l1: i32,
    l2: i32,
    u_max: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate, HarmonicsError> {
    param.check_types(l1, l2)?;
    TypeProjection::from_field(f, l1, l2, u_max, 48, spec).transform(param, spec)
}

/// Both sides of ∫_G (𝓕_{ℓ,ℓ}F)(τ⁻¹g) conj φ_ℓ(g,ν) dg = ⟨F, φ_{ℓ,ℓ}(·,ν)⟩_G conj φ_ℓ(τ,ν).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
    pub scale: f64,
}

/// Evaluates the eigen identity for F supported in u ≤ u_max. The left side
/// is a full Iwasawa-chart integral of h ↦ p(u(h)) e^{iℓ(φ+ϑ)(h)} conj φ_ℓ(τh,ν),
/// where p = 𝓕_{ℓ,ℓ}F(a_u) is tabulated; the right side uses the same p
/// against φ_{ℓ,ℓ}.
pub fn eigen_operator_check(
    f: &SmoothField,
    l: i32,
    nu: C64,
    tau: &GroupElement,
    u_max: f64,
    spec: &QuadratureSpec,
) -> Result<EigenCheck, HarmonicsError> {
    let e = f.evaluator();
    let inner = QuadratureSpec {
        rel_tol: spec.rel_tol * 0.01,
        abs_tol: spec.abs_tol * 0.01,
        ..*spec
    };
    let proj = |u: f64| match project_types_at(&*e, &GroupElement::a_u(u), l, l, &inner) {
        Ok(v) => v.value,
        Err(NumericsError::NonConvergence { estimate, .. }) => estimate,
        Err(_) => C64::new(f64::NAN, f64::NAN),
    };
    let table = GradedTable::build(&proj, u_max, 1024);
    let tau = *tau;
    let lhs_integrand = |h: &GroupElement| {
        let p = table.eval(h.u());
        if p == C64::new(0.0, 0.0) {
            return p;
        }
        p * C64::from_polar(1.0, l as f64 * h.cartan_angle_sum())
            * phi_basic(&(tau * *h), nu, l).conj()
    };
    let lhs = integrate_g(&lhs_integrand, &SupportHint::iwasawa_ball(u_max), spec)?.value;
    let rhs_integrand =
        |u: f64| table.eval(u) * lenient(phi_two_type_estimate(u, nu, l, l, &inner)).conj() * 2.0;
    let pairing = integrate_1d(&rhs_integrand, 0.0, u_max, spec)?.value;
    let rhs = pairing * phi_basic(&tau, nu, l).conj();
    let scale = pairing.norm() * phi_basic(&tau, nu, l).norm();
    Ok(EigenCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::smooth_plateau;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::with_tol(1e-11, 1e-14)
    }

    #[test]
    fn gamma_matches_tabulated_values() {
        let sp = PI.sqrt();
        let mut table = vec![
            (0.5, sp),
            (1.0, 1.0),
            (1.5, sp / 2.0),
            (2.5, 3.0 * sp / 4.0),
            (-0.5, -2.0 * sp),
            (-1.5, 4.0 * sp / 3.0),
            (1.0 / 3.0, 2.678_938_534_707_747_6),
            (0.25, 3.625_609_908_221_908_3),
            (0.1, 9.513_507_698_668_731_8),
            (2.0 / 3.0, 1.354_117_939_426_400_4),
            (0.75, 1.225_416_702_465_177_6),
        ];
        let mut fact = 1.0;
        for n in 2..=10 {
            fact *= (n - 1) as f64;
            table.push((n as f64, fact));
        }
        assert_eq!(table.len(), 20);
        for (x, g) in table {
            assert!(
                (gamma(x) - g).abs() <= 1e-12 * g.abs(),
                "Γ({x}) = {} vs {g}",
                gamma(x)
            );
            if x > 0.0 {
                assert!((ln_gamma(x) - g.ln()).abs() < 1e-12 * (1.0 + g.ln().abs()));
            }
        }
    }

    #[test]
    fn spectral_parameter_ranges() {
        assert!(SpectralParameter::exceptional(0.5).is_err());
        assert!(SpectralParameter::exceptional(0.3).is_ok());
        assert!(SpectralParameter::discrete(1).is_err());
        let d = SpectralParameter::discrete(4).unwrap();
        assert_eq!(d.nu, C64::new(1.5, 0.0));
        assert!(d.check_types(4, 6).is_ok());
        assert!(d.check_types(2, 4).is_err());
        assert!(d.check_types(4, 5).is_err());
        let p = SpectralParameter::principal(2.0);
        assert!((p.eigenvalue() - C64::new(4.25, 0.0)).norm() < 1e-15);
        let j = serde_json::to_string(&d).unwrap();
        let back: SpectralParameter = serde_json::from_str(&j).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn phi_basic_examples() {
        for l in [-3, 0, 7] {
            let v = phi_basic(&GroupElement::identity(), C64::new(0.2, 0.7), l);
            assert!((v - 1.0).norm() < 1e-15);
        }
        let v = phi_basic(&GroupElement::a(4.0), C64::new(0.0, 0.0), 7);
        assert!((v - 2.0).norm() < 1e-14);
        let g = GroupElement::n(0.4) * GroupElement::a(1.7) * GroupElement::k(0.9);
        let nu = C64::new(0.1, 1.3);
        for t in [0.3, 2.0, 5.5] {
            let lhs = phi_basic(&(g * GroupElement::k(t)), nu, 3);
            let rhs = phi_basic(&g, nu, 3) * C64::from_polar(1.0, 3.0 * t);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn projections_pick_types() {
        let s = QuadratureSpec::with_tol(1e-10, 1e-13);
        let f = SmoothField::new(|g| C64::new(g.a * g.a + 0.3 * g.b - g.c * g.d, 0.5 * g.d));
        let g = GroupElement::n(0.3) * GroupElement::a(1.4) * GroupElement::k(0.2);
        let odd = project_types_at(&|h: &GroupElement| f.eval(h), &g, 1, 2, &s).unwrap();
        assert!(odd.value.norm() < 1e-13);
        let r = SmoothField::radial(|u| C64::new((-u).exp(), 0.0));
        let p = project_types(&r, 0, 0, &s);
        assert!((p.eval(&g) - r.eval(&g)).norm() < 1e-12);
        // the projection has left type ℓ₁ and right type ℓ₂
        let q = project_types(&f, 2, -2, &s);
        let (a, b) = (0.7, 1.9);
        let lhs = q.eval(&(GroupElement::k(a) * g * GroupElement::k(b)));
        let rhs = q.eval(&g) * C64::from_polar(1.0, 2.0 * a - 2.0 * b);
        assert!((lhs - rhs).norm() < 1e-11);
    }

    #[test]
    fn fourier_partial_sums_reconstruct() {
        let s = QuadratureSpec::with_tol(1e-12, 1e-14);
        let f =
            |g: &GroupElement| C64::new((0.4 * g.a + 0.2 * g.b * g.c).cos() + 0.3 * g.d, 0.1 * g.c);
        let g = GroupElement::n(0.2) * GroupElement::a(1.3) * GroupElement::k(0.4);
        let partial = |lmax: i32| {
            let mut sum = C64::new(0.0, 0.0);
            for l1 in -lmax..=lmax {
                for l2 in -lmax..=lmax {
                    if (l1 - l2) % 2 == 0 {
                        sum += project_types_at(&f, &g, l1, l2, &s).unwrap().value;
                    }
                }
            }
            (sum - f(&g)).norm()
        };
        let (e2, e4, e8) = (partial(2), partial(4), partial(8));
        assert!(e4 < e2 && e8 < e4, "{e2} {e4} {e8}");
        assert!(e8 < 1e-6, "{e8}");
    }

    #[test]
    fn two_type_trivial_values() {
        let s = spec();
        let nu = C64::new(0.2, 0.5);
        assert!((phi_two_type(0.0, nu, 2, 2, &s).unwrap() - 1.0).norm() < 1e-14);
        assert!(phi_two_type(0.0, nu, 2, 4, &s).unwrap().norm() < 1e-14);
        assert_eq!(
            phi_two_type(1.0, nu, 1, 2, &s),
            Err(HarmonicsError::Parity { l1: 1, l2: 2 })
        );
    }

    #[test]
    fn two_type_closed_forms() {
        let s = spec();
        for &u in &[0.0, 0.1, 1.0, 3.0, 10.0, 1e3, 1e5] {
            let v = phi_two_type(u, C64::new(0.5, 0.0), 2, 2, &s).unwrap();
            assert!(
                (v - 1.0 / (1.0 + u)).norm() < 1e-8 / (1.0 + u),
                "u={u}: {v}"
            );
            let v = phi_two_type(u, C64::new(1.0, 0.0), 3, 3, &s).unwrap();
            assert!((v - (1.0 + u).powf(-1.5)).norm() < 1e-9, "u={u}: {v}");
            let v = phi_two_type(u, C64::new(0.5, 0.0), 2, 4, &s).unwrap();
            assert!(
                (v - u.sqrt() * (1.0 + u).powf(-1.5)).norm() < 1e-9,
                "u={u}: {v}"
            );
            let v = phi_two_type(u, C64::new(1.5, 0.0), 4, 6, &s).unwrap();
            assert!(
                (v - u.sqrt() * (1.0 + u).powf(-2.5)).norm() < 1e-9,
                "u={u}: {v}"
            );
        }
    }

    #[test]
    fn two_type_matches_legendre_series() {
        let s = spec();
        for &nu in &[
            C64::new(0.0, 0.0),
            C64::new(0.3, 0.0),
            C64::new(0.0, 1.0),
            C64::new(0.1, 2.5),
        ] {
            for &u in &[0.05, 0.7, 2.0, 5.0, 20.0] {
                let v = phi_two_type(u, nu, 0, 0, &s).unwrap();
                let o = legendre_series(u, nu).unwrap();
                assert!(
                    (v - o).norm() < 1e-7 * o.norm().max(1e-3),
                    "ν={nu} u={u}: {v} vs {o}"
                );
                // P_{−1/2+ν} = P_{−1/2−ν}
                let w = phi_two_type(u, -nu, 0, 0, &s).unwrap();
                assert!((v - w).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn two_type_matches_direct_projection() {
        let s = spec();
        let nu = C64::new(0.15, 0.8);
        for &(l1, l2) in &[(0, 0), (2, 0), (-1, 3), (4, -2), (5, 5), (-3, -1)] {
            for &u in &[0.2, 1.5, 6.0] {
                let v = phi_two_type(u, nu, l1, l2, &s).unwrap();
                let d = phi_two_type_direct(u, nu, l1, l2, &s).unwrap();
                assert!(
                    (v - d).norm() < 1e-8 * (1.0 + d.norm()),
                    "({l1},{l2}) u={u}: {v} vs {d}"
                );
            }
        }
    }

    #[test]
    fn g_factor_examples() {
        let p = SpectralParameter::principal(3.0);
        assert_eq!(g_factor_ratio(&p, 0, 6).unwrap(), 1.0);
        let d2 = SpectralParameter::discrete(2).unwrap();
        assert!((g_factor_ratio(&d2, 4, 4).unwrap() - 1.0).abs() < 1e-14);
        assert!((g_factor_ratio(&d2, 2, 4).unwrap() - 2f64.sqrt()).abs() < 1e-13);
        let d4 = SpectralParameter::discrete(4).unwrap();
        assert!((g_factor_ratio(&d4, 4, 6).unwrap() - 2.0).abs() < 1e-13);
        assert!(g_factor_ratio(&d2, 0, 2).is_err());
        // exceptional: ratio is symmetric under ℓ₁ ↔ ℓ₂ inversion
        let e = SpectralParameter::exceptional(0.3).unwrap();
        let r = g_factor_ratio(&e, 0, 4).unwrap() * g_factor_ratio(&e, 4, 0).unwrap();
        assert!((r - 1.0).abs() < 1e-13);
    }

    #[test]
    fn p_normalized_examples() {
        let s = spec();
        let d2 = SpectralParameter::discrete(2).unwrap();
        let d3 = SpectralParameter::discrete(3).unwrap();
        for &u in &[0.0, 0.4, 7.0] {
            let v = p_normalized(u, &d2, 2, 2, &s).unwrap();
            assert!((v - 1.0 / (1.0 + u)).norm() < 1e-10);
            let v = p_normalized(u, &d3, 3, 3, &s).unwrap();
            assert!((v - (1.0 + u).powf(-1.5)).norm() < 1e-10);
        }
    }

    #[test]
    fn discrete_norms() {
        let s = QuadratureSpec::with_tol(1e-9, 1e-13);
        for &(k, l1, l2) in &[(2u32, 2, 2), (2, 2, 4), (3, 3, 3), (4, 4, 6)] {
            let n = discrete_norm_squared(k, l1, l2, &s).unwrap();
            let want = 1.0 / (k as f64 - 1.0);
            assert!(
                (n.value.re - want).abs() < 1e-6,
                "({k},{l1},{l2}): {}",
                n.value.re
            );
        }
    }

    #[test]
    fn peak_integral_closed_form_matches_quadrature() {
        let s = QuadratureSpec::with_tol(1e-12, 1e-14);
        for &nu in &[0.2, 0.3, 0.4] {
            for l in [-3, -2, -1, 0, 1, 2, 3, 4, 5] {
                let q = peak_integral_quadrature(nu, l, &s).unwrap();
                let c = peak_integral_closed_form(nu, l);
                assert!(
                    (q - c).abs() < 1e-8 * (1.0 + c.abs()),
                    "ν={nu} ℓ={l}: {q} vs {c}"
                );
            }
        }
    }

    #[test]
    fn large_u_follows_peak_asymptotic() {
        let s = spec();
        for &nu in &[0.25, 0.4] {
            for l in [0, 1, 2, 3] {
                let u = 1e8;
                let v = phi_two_type(u, C64::new(nu, 0.0), l, l, &s).unwrap();
                let a = phi_peak_asymptotic(u, nu, l);
                assert!(v.im.abs() < 1e-9 * v.norm());
                assert!(
                    (v.re - a).abs() < 0.02 * a.abs(),
                    "ν={nu} ℓ={l}: {v} vs {a}"
                );
            }
        }
    }

    #[test]
    fn uniform_bound_is_modest() {
        let s = QuadratureSpec::with_tol(1e-8, 1e-12);
        let fit = fit_uniform_bound(
            &[1.0, 100.0],
            &[C64::new(0.0, 0.0), C64::new(0.25, 1.0)],
            3,
            &s,
        )
        .unwrap();
        assert!(fit.constant > 0.1 && fit.constant < 20.0, "{fit:?}");
    }

    fn test_bump(u_max: f64) -> SmoothField {
        SmoothField::new(move |g| {
            let w = smooth_plateau(g.u(), -1.0, -0.5, 0.3 * u_max, u_max);
            C64::new(
                w * (1.0 + 0.3 * g.a - 0.2 * g.b * g.c + 0.1 * g.d * g.d),
                0.05 * w * g.c,
            )
        })
    }

    #[test]
    fn transform_of_bi_invariant_vanishes_off_zero_type() {
        let s = QuadratureSpec::with_tol(1e-9, 1e-13);
        let f = SmoothField::radial(|u| C64::new(smooth_plateau(u, -1.0, -0.5, 0.5, 2.0), 0.0));
        let p = SpectralParameter::principal(1.0);
        let zero = spectral_transform(&f, &p, 2, 0, 2.0, &s).unwrap();
        let main = spectral_transform(&f, &p, 0, 0, 2.0, &s).unwrap();
        assert!(zero.value.norm() < 1e-12, "{zero:?}");
        assert!(main.value.norm() > 0.1);
        // 2∫ f(u) P⁰_{−1/2+i}(2u+1) du by adaptive quadrature
        let direct = integrate_1d(
            &|u: f64| {
                legendre_series(u, C64::new(0.0, 1.0)).unwrap()
                    * 2.0
                    * smooth_plateau(u, -1.0, -0.5, 0.5, 2.0)
            },
            0.0,
            2.0,
            &s,
        )
        .unwrap();
        assert!(
            (main.value - direct.value).norm() < 1e-8,
            "{main:?} vs {direct:?}"
        );
    }

    #[test]
    fn eigen_identity_examples() {
        let s = QuadratureSpec::with_tol(1e-6, 1e-12);
        let f = test_bump(2.0);
        let cases = [
            (GroupElement::identity(), 0, C64::new(0.0, 0.0)),
            (GroupElement::a(2.0), 0, C64::new(0.0, 0.5)),
            (GroupElement::n(1.0), 2, C64::new(0.0, 1.0)),
        ];
        for (tau, l, nu) in cases {
            let r = eigen_operator_check(&f, l, nu, &tau, 2.0, &s).unwrap();
            assert!(r.residual <= 1e-5 * r.scale, "{tau} ℓ={l} ν={nu}: {r:?}");
        }
    }
}
