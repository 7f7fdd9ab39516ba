//! Kernels built as ⊳-squares f⊳f with f(kgk⁻¹) = f(g): the bumps ψ_Z,
//! the convolution (f₁⊳f₂)(g) = ∫ f₁(h) conj f₂(hg) dh, the majorant k_Z and
//! its skewed form, the exceptional kernel f_Z⊳f_Z, and their certificates.
//!
//! Every convolution is reduced with h = k[α]a_v k[β], dh = 2 dv dk dk, to
//! a v-integral over the support of f₁ and an angle integral along the arc
//! u(a_v k[φ/2] a_u) = d₀ + 2r cos²(φ/2), where d₀ = (√(u(1+v)) − √(v(1+u)))²
//! and r = 2√(uv(1+u)(1+v)).

use std::cell::Cell;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::harmonics::{SpectralParameter, TypeProjection};
use crate::kernel::{ball_entry_bounds, KernelError, KernelFunction};
use crate::lie_ops::SmoothField;
use crate::numerics::{
    integrate_1d_breaks, smooth_plateau, smooth_step, Estimate, GradedTable, NumericsError,
    QuadratureSpec, C64,
};
use crate::sl2::GroupElement;

/// Table size for k_Z and h_δ.
pub const MAJORANT_TABLE_NODES: usize = 512;

/// The constant C_maj in k_Z(a_u) ≤ C_maj·1{u ≤ c_maj·Z}/√(1+u), measured
/// over Z ∈ {4, 16, 64, 256} and frozen. The maximum 4.0285 is attained at
/// u = 0 for every Z, where k_Z(I) = 2∫ψ(t)² dt.
pub const FROZEN_C_MAJ: f64 = 4.5;

/// The support constant c_maj: supp k_Z ⊆ {u ≤ 64Z + 16√Z} ⊆ {u ≤ 80Z}
/// for Z ≥ 1.
pub const FROZEN_C_SUPPORT: f64 = 80.0;

/// Default widening constant of the angular cutoff.
pub const DEFAULT_WIDENING: f64 = 1.0;

// ---------------------------------------------------------------------------
// bumps

/// Bi-K-invariant profiles p(u(g)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialBump {
    /// ψ_Z(u) = Z^{−1/4}ψ(u/√Z) with ψ = 1 on [1,2], supported in [½,4].
    Shell { z: f64 },
    /// ψ(u/δ) with ψ = 1 on [0,½], supported in [0,1].
    Ball { delta: f64 },
}

impl RadialBump {
    pub fn shell(z: f64) -> Result<Self, KernelError> {
        if !(z > 1.0) || !z.is_finite() {
            return Err(KernelError::Config(format!("need Z > 1, got {z}")));
        }
        Ok(RadialBump::Shell { z })
    }

    pub fn ball(delta: f64) -> Result<Self, KernelError> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(KernelError::Config(format!("need δ > 0, got {delta}")));
        }
        Ok(RadialBump::Ball { delta })
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            RadialBump::Shell { z } => {
                z.powf(-0.25) * smooth_plateau(u / z.sqrt(), 0.5, 1.0, 2.0, 4.0)
            }
            RadialBump::Ball { delta } => {
                if u < 0.0 {
                    0.0
                } else {
                    smooth_step((delta - u) / (0.5 * delta))
                }
            }
        }
    }

    /// Smallest and largest u of the support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            RadialBump::Shell { z } => (0.5 * z.sqrt(), 4.0 * z.sqrt()),
            RadialBump::Ball { delta } => (0.0, delta),
        }
    }

    /// Plateau and support edges.
    pub fn breaks(&self) -> Vec<f64> {
        match *self {
            RadialBump::Shell { z } => [0.5, 1.0, 2.0, 4.0].iter().map(|t| t * z.sqrt()).collect(),
            RadialBump::Ball { delta } => vec![0.0, 0.5 * delta, delta],
        }
    }

    /// 2∫ w(p(u)) du, the Haar integral of w∘p.
    pub fn haar_moment<W: Fn(f64) -> f64>(
        &self,
        w: W,
        spec: &QuadratureSpec,
    ) -> Result<f64, KernelError> {
        let f = |u: f64| C64::new(w(self.eval(u)), 0.0);
        Ok(2.0 * integrate_1d_breaks(&f, &self.breaks(), spec)?.value.re)
    }

    pub fn field(&self) -> SmoothField {
        let p = *self;
        SmoothField::radial(move |u| C64::new(p.eval(u), 0.0))
    }
}

/// F: smooth, even, 2π-periodic, 1 on |x| ≤ 1/(2CL), 0 for |x| ≥ 1/(CL).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularCutoff {
    pub l: f64,
    pub c: f64,
}

impl AngularCutoff {
    pub fn new(l: f64, c: f64) -> Result<Self, KernelError> {
        if !(l >= 1.0) || !(c > 0.0) || 1.0 / (c * l) > PI {
            return Err(KernelError::Config(format!(
                "need L ≥ 1, C > 0, CL ≥ 1/π; got L = {l}, C = {c}"
            )));
        }
        Ok(AngularCutoff { l, c })
    }

    /// 1/(CL).
    pub fn half_width(&self) -> f64 {
        1.0 / (self.c * self.l)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x + PI).rem_euclid(TAU) - PI;
        let w = self.half_width();
        smooth_step((w - t.abs()) / (0.5 * w))
    }

    pub fn breaks(&self) -> [f64; 5] {
        let w = self.half_width();
        [-w, -0.5 * w, 0.0, 0.5 * w, w]
    }

    /// F̂(ℓ) = (1/2π)∫ F(x)e^{−iℓx} dx, real by evenness.
    pub fn fourier(&self, l: i32, spec: &QuadratureSpec) -> Result<f64, KernelError> {
        let f = |x: f64| C64::new(self.eval(x) * (l as f64 * x).cos(), 0.0);
        Ok(integrate_1d_breaks(&f, &self.breaks(), spec)?.value.re / TAU)
    }
}

/// f(g) = p(u(g))·F(φ+ϑ) in Cartan coordinates, or p(u(g)) without cutoff.
/// Every such f satisfies f(kgk⁻¹) = f(g).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantBump {
    pub radial: RadialBump,
    pub angular: Option<AngularCutoff>,
}

impl InvariantBump {
    pub fn radial(radial: RadialBump) -> Self {
        InvariantBump {
            radial,
            angular: None,
        }
    }

    pub fn eval(&self, g: &GroupElement) -> f64 {
        let p = self.radial.eval(g.u());
        match (&self.angular, p == 0.0) {
            (_, true) => 0.0,
            (None, false) => p,
            (Some(a), false) => p * a.eval(g.cartan_angle_sum()),
        }
    }

    /// The angular Fourier coefficient F̂(ℓ); δ_{ℓ,0} without cutoff.
    pub fn coefficient(&self, l: i32, spec: &QuadratureSpec) -> Result<f64, KernelError> {
        match &self.angular {
            None => Ok(if l == 0 { 1.0 } else { 0.0 }),
            Some(a) => a.fourier(l, spec),
        }
    }

    /// 𝓕_{ℓ,ℓ}f(a_u) = p(u)F̂(ℓ).
    pub fn type_profile(
        &self,
        l: i32,
        spec: &QuadratureSpec,
    ) -> Result<impl Fn(f64) -> C64 + Sync, KernelError> {
        let c = self.coefficient(l, spec)?;
        let p = self.radial;
        Ok(move |u: f64| C64::new(c * p.eval(u), 0.0))
    }

    /// ∫_G |f| dg.
    pub fn l1_norm(&self, spec: &QuadratureSpec) -> Result<f64, KernelError> {
        let ang = match &self.angular {
            None => 1.0,
            Some(a) => {
                let f = |x: f64| C64::new(a.eval(x), 0.0);
                integrate_1d_breaks(&f, &a.breaks(), spec)?.value.re / TAU
            }
        };
        Ok(self.radial.haar_moment(|p| p.abs(), spec)? * ang)
    }

    pub fn field(&self) -> SmoothField {
        let f = *self;
        SmoothField::new(move |g| C64::new(f.eval(g), 0.0))
    }
}

// ---------------------------------------------------------------------------
// convolution

/// (d₀, r) with u(a_v k[φ/2] a_u) = d₀ + 2r cos²(φ/2).
pub fn arc_parameters(u: f64, v: f64) -> (f64, f64) {
    let d = (u * (1.0 + v)).sqrt() - (v * (1.0 + u)).sqrt();
    (d * d, 2.0 * (u * v * (1.0 + u) * (1.0 + v)).sqrt())
}

/// (φ+ϑ)(a_v k[φ/2] a_u) − φ/2 in closed form.
pub fn angle_defect(u: f64, v: f64, phi: f64) -> f64 {
    let cc = ((1.0 + u) * (1.0 + v)).sqrt();
    let ss = (u * v).sqrt();
    (-ss * phi.sin()).atan2(cc + ss * phi.cos())
}

/// The same angle read off the product matrix.
pub fn angle_defect_from_product(u: f64, v: f64, phi: f64) -> f64 {
    let g = GroupElement::a_u(v) * GroupElement::k(0.5 * phi) * GroupElement::a_u(u);
    (g.cartan_angle_sum() - 0.5 * phi + PI).rem_euclid(TAU) - PI
}

/// The largest u in supp(f₁⊳f₂) when supp fᵢ ⊆ {u ≤ uᵢ}: the composition
/// a_{u₁}a_{u₂}.
pub fn convolution_support(u1: f64, u2: f64) -> f64 {
    let (d0, r) = arc_parameters(u1, u2);
    d0 + 2.0 * r
}

/// (1/π)∫₀^π p(d₀ + 2r cos²(φ/2)) h(φ) dφ, or the mean over [0, 2π) when
/// `full`.
fn arc_mean<H: Fn(f64) -> f64>(
    p: &RadialBump,
    d0: f64,
    r: f64,
    full: bool,
    h: H,
    spec: &QuadratureSpec,
) -> Result<f64, NumericsError> {
    let (s0, s1) = p.support();
    if r <= 1e-300 {
        return Ok(p.eval(d0) * h(0.0));
    }
    // t = cos²(φ/2) runs from 1 to 0 as φ runs over [0, π]
    let t_of = |w: f64| ((w - d0) / (2.0 * r)).clamp(0.0, 1.0);
    let (t0, t1) = (t_of(s0), t_of(s1));
    if t1 <= 0.0 || t0 >= 1.0 {
        return Ok(0.0);
    }
    let phi_of = |t: f64| 2.0 * t.sqrt().acos();
    let mut breaks = vec![phi_of(t1), phi_of(t0)];
    for w in p.breaks() {
        let t = (w - d0) / (2.0 * r);
        if t > 0.0 && t < 1.0 {
            breaks.push(phi_of(t));
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let f = |phi: f64| {
        C64::new(
            p.eval(d0 + 2.0 * r * (0.5 * phi).cos().powi(2)) * h(phi),
            0.0,
        )
    };
    let upper = integrate_1d_breaks(&f, &breaks, spec)?.value.re;
    if !full {
        return Ok(upper / PI);
    }
    let mirrored: Vec<f64> = breaks.iter().rev().map(|b| TAU - b).collect();
    let lower = integrate_1d_breaks(&f, &mirrored, spec)?.value.re;
    Ok((upper + lower) / TAU)
}

/// 2∫ p₁(v) · arc_mean(p₂, h(v,·)) dv.
fn shell_integral<H: Fn(f64, f64) -> f64>(
    p1: &RadialBump,
    p2: &RadialBump,
    u: f64,
    full: bool,
    h: H,
    spec: &QuadratureSpec,
) -> Result<f64, KernelError> {
    let inner = QuadratureSpec {
        rel_tol: spec.rel_tol * 0.1,
        abs_tol: spec.abs_tol * 0.1,
        ..*spec
    };
    let fail: Cell<Option<NumericsError>> = Cell::new(None);
    let outer = |v: f64| {
        let pv = p1.eval(v);
        if pv == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let (d0, r) = arc_parameters(u, v);
        match arc_mean(p2, d0, r, full, |phi| h(v, phi), &inner) {
            Ok(x) => C64::new(2.0 * pv * x, 0.0),
            Err(NumericsError::NonConvergence { estimate, .. }) => {
                C64::new(2.0 * pv * estimate.re, 0.0)
            }
            Err(e) => {
                fail.set(Some(e));
                C64::new(0.0, 0.0)
            }
        }
    };
    let v = integrate_1d_breaks(&outer, &p1.breaks(), spec)?.value.re;
    if let Some(e) = fail.take() {
        return Err(e.into());
    }
    Ok(v)
}

/// C(δ) = (1/2π)∫ F₁(μ)F₂(μ+δ) dμ tabulated on its support, or a
/// constant when a factor has no cutoff.
#[derive(Debug, Clone, PartialEq)]
enum Correlation {
    Constant(f64),
    Table { half: f64, values: Vec<f64> },
}

const CORRELATION_NODES: usize = 4097;

impl Correlation {
    fn new(
        f1: &InvariantBump,
        f2: &InvariantBump,
        spec: &QuadratureSpec,
    ) -> Result<Self, KernelError> {
        match (&f1.angular, &f2.angular) {
            (None, None) => Ok(Correlation::Constant(1.0)),
            (Some(a), None) | (None, Some(a)) => Ok(Correlation::Constant(a.fourier(0, spec)?)),
            (Some(a1), Some(a2)) => {
                let half = a1.half_width() + a2.half_width();
                let step = 2.0 * half / (CORRELATION_NODES - 1) as f64;
                let values: Result<Vec<f64>, KernelError> = (0..CORRELATION_NODES)
                    .into_par_iter()
                    .map(|i| {
                        let delta = -half + i as f64 * step;
                        let f = |m: f64| C64::new(a1.eval(m) * a2.eval(m + delta), 0.0);
                        let mut br: Vec<f64> = a1.breaks().to_vec();
                        br.extend(a2.breaks().iter().map(|b| b - delta));
                        br.retain(|b| b.abs() <= a1.half_width());
                        br.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        br.dedup();
                        Ok(integrate_1d_breaks(&f, &br, spec)?.value.re / TAU)
                    })
                    .collect();
                Ok(Correlation::Table {
                    half,
                    values: values?,
                })
            }
        }
    }

    fn eval(&self, delta: f64) -> f64 {
        match self {
            Correlation::Constant(c) => *c,
            Correlation::Table { half, values } => {
                let d = (delta + PI).rem_euclid(TAU) - PI;
                if d.abs() >= *half {
                    return 0.0;
                }
                let n = values.len();
                let t = (d + half) / (2.0 * half) * (n - 1) as f64;
                let i = (t.floor() as usize).min(n - 2);
                let i0 = i.saturating_sub(1).min(n - 4);
                let mut s = 0.0;
                for j in i0..i0 + 4 {
                    let mut w = 1.0;
                    for m in i0..i0 + 4 {
                        if m != j {
                            w *= (t - m as f64) / (j as f64 - m as f64);
                        }
                    }
                    s += values[j] * w;
                }
                s
            }
        }
    }
}

/// f₁⊳f₂ for two conjugation-invariant bumps.
#[derive(Debug, Clone)]
pub struct Convolution {
    pub f1: InvariantBump,
    pub f2: InvariantBump,
    pub spec: QuadratureSpec,
    correlation: Correlation,
}

pub fn convolve_rhd(
    f1: &InvariantBump,
    f2: &InvariantBump,
    spec: &QuadratureSpec,
) -> Result<Convolution, KernelError> {
    spec.validate()?;
    Ok(Convolution {
        f1: *f1,
        f2: *f2,
        spec: *spec,
        correlation: Correlation::new(f1, f2, spec)?,
    })
}

impl Convolution {
    /// supp ⊆ {u ≤ support()}.
    pub fn support(&self) -> f64 {
        convolution_support(self.f1.radial.support().1, self.f2.radial.support().1)
    }

    pub fn is_bi_invariant(&self) -> bool {
        matches!(self.correlation, Correlation::Constant(_))
    }

    /// (f₁⊳f₂)(k[s]a_u) = 2∫ p₁(v) (1/2π)∫ p₂(u(a_v k[φ/2] a_u)) C(defect + s) dφ dv,
    /// with the angle read off the product matrix.
    pub fn at(&self, s: f64, u: f64) -> Result<f64, KernelError> {
        if u > self.support() {
            return Ok(0.0);
        }
        match self.correlation {
            Correlation::Constant(c) => Ok(c * self.radial_part(u, 0)?),
            _ => {
                let corr = &self.correlation;
                shell_integral(
                    &self.f1.radial,
                    &self.f2.radial,
                    u,
                    true,
                    |v, phi| corr.eval(angle_defect_from_product(u, v, phi) + s),
                    &self.spec,
                )
            }
        }
    }

    /// Pointwise value; f₁⊳f₂ is conjugation invariant, so it depends on
    /// g through φ+ϑ and u only.
    pub fn eval(&self, g: &GroupElement) -> Result<f64, KernelError> {
        self.at(g.cartan_angle_sum(), g.u())
    }

    /// R_ℓ(u) = 2∫ p₁(v) (1/2π)∫ p₂(u(a_v k[φ/2] a_u)) e^{iℓ·defect} dφ dv.
    pub fn radial_part(&self, u: f64, l: i32) -> Result<f64, KernelError> {
        let l = l as f64;
        shell_integral(
            &self.f1.radial,
            &self.f2.radial,
            u,
            false,
            |v, phi| {
                if l == 0.0 {
                    1.0
                } else {
                    (l * angle_defect(u, v, phi)).cos()
                }
            },
            &self.spec,
        )
    }

    /// 𝓕_{ℓ,ℓ}(f₁⊳f₂)(a_u) = F̂₁(−ℓ)·conj F̂₂(−ℓ)·R_ℓ(u); other types vanish.
    pub fn type_profile_at(&self, u: f64, l: i32) -> Result<f64, KernelError> {
        let c = self.f1.coefficient(-l, &self.spec)? * self.f2.coefficient(-l, &self.spec)?;
        if c == 0.0 {
            return Ok(0.0);
        }
        Ok(c * self.radial_part(u, l)?)
    }

    /// Samples of 𝓕_{ℓ,ℓ}(f₁⊳f₂) for transforms.
    pub fn type_projection(&self, l: i32, panels: usize) -> Result<TypeProjection, KernelError> {
        let c = self.f1.coefficient(-l, &self.spec)? * self.f2.coefficient(-l, &self.spec)?;
        let fail: std::sync::Mutex<Option<KernelError>> = std::sync::Mutex::new(None);
        let prof = |u: f64| {
            if c == 0.0 {
                return C64::new(0.0, 0.0);
            }
            match self.radial_part(u, l) {
                Ok(x) => C64::new(c * x, 0.0),
                Err(e) => {
                    *fail.lock().unwrap() = Some(e);
                    C64::new(0.0, 0.0)
                }
            }
        };
        let t = TypeProjection::from_profile(&prof, l, l, self.support(), panels);
        if let Some(e) = fail.into_inner().unwrap() {
            return Err(e);
        }
        Ok(t)
    }

    /// ∫_G f₁⊳f₂ = ∫_G f₁ · conj ∫_G f₂.
    pub fn haar_integral(&self) -> Result<f64, KernelError> {
        let i = |f: &InvariantBump| -> Result<f64, KernelError> {
            Ok(f.radial.haar_moment(|p| p, &self.spec)? * f.coefficient(0, &self.spec)?)
        };
        Ok(i(&self.f1)? * i(&self.f2)?)
    }

    /// The pointwise value as a field; failed quadratures give NaN.
    pub fn field(&self) -> SmoothField {
        let c = self.clone();
        SmoothField::new(move |g| C64::new(c.eval(g).unwrap_or(f64::NAN), 0.0))
    }
}

// ---------------------------------------------------------------------------
// tabulated bi-K-invariant kernels

/// A bi-K-invariant kernel k(a_u) tabulated on a graded grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    pub table: GradedTable,
    /// ∫_G k dg in closed form.
    pub integral: f64,
    pub support: f64,
}

impl RadialTable {
    /// p⊳p for a radial bump p, divided by `norm`.
    pub fn square(
        p: &RadialBump,
        norm: f64,
        nodes: usize,
        spec: &QuadratureSpec,
    ) -> Result<Self, KernelError> {
        let f = InvariantBump::radial(*p);
        let conv = convolve_rhd(&f, &f, spec)?;
        let support = conv.support();
        let fail: std::sync::Mutex<Option<KernelError>> = std::sync::Mutex::new(None);
        let eval = |u: f64| match conv.radial_part(u, 0) {
            Ok(x) => C64::new(x / norm, 0.0),
            Err(e) => {
                *fail.lock().unwrap() = Some(e);
                C64::new(f64::NAN, 0.0)
            }
        };
        let table = GradedTable::build(&eval, support, nodes);
        if let Some(e) = fail.into_inner().unwrap() {
            return Err(e);
        }
        Ok(RadialTable {
            table,
            integral: conv.haar_integral()? / norm,
            support,
        })
    }

    pub fn eval_u(&self, u: f64) -> f64 {
        self.table.eval(u).re
    }

    /// 2∫ k du by the table, for comparison with the closed form.
    pub fn table_integral(&self, spec: &QuadratureSpec) -> Result<f64, KernelError> {
        let n = self.table.values.len();
        let breaks: Vec<f64> = (0..n)
            .step_by(8)
            .map(|i| self.table.node(i))
            .chain([self.support])
            .collect();
        let mut b = breaks;
        b.dedup();
        let f = |u: f64| C64::new(self.eval_u(u), 0.0);
        Ok(2.0 * integrate_1d_breaks(&f, &b, spec)?.value.re)
    }
}

/// k_Z = ψ_Z⊳ψ_Z with its scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorantKernel {
    pub z: f64,
    pub kernel: RadialTable,
}

/// Sampled check of k_Z(a_u) ≤ C·1{u ≤ cZ}/√(1+u).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorantCertificate {
    pub z: f64,
    /// max k_Z(a_u)√(1+u) on the grid
    pub measured_c_maj: f64,
    /// largest grid u with k_Z(a_u) ≠ 0, over Z
    pub measured_c_support: f64,
    pub c_maj: f64,
    pub c_support: f64,
    /// max over the grid of k√(1+u) − C·1{u ≤ cZ}; ≤ 0 when certified
    pub max_violation: f64,
    pub grid: usize,
    /// largest |table − direct| at interval midpoints
    pub interpolation_error: f64,
    pub value_at_identity: f64,
}

/// Builds the k_Z table and certifies it against the frozen constants.
pub fn k_z(
    z: f64,
    spec: &QuadratureSpec,
) -> Result<(MajorantKernel, MajorantCertificate), KernelError> {
    let p = RadialBump::shell(z)?;
    let kernel = RadialTable::square(&p, 1.0, MAJORANT_TABLE_NODES, spec)?;
    let k = MajorantKernel { z, kernel };
    let cert = certify_majorant(&k, FROZEN_C_MAJ, FROZEN_C_SUPPORT, spec)?;
    if cert.measured_c_maj > 100.0 || cert.measured_c_support > 100.0 {
        return Err(KernelError::Certification(format!(
            "k_Z at Z = {z}: measured C_maj = {}, c_maj = {}",
            cert.measured_c_maj, cert.measured_c_support
        )));
    }
    Ok((k, cert))
}

/// The sampled certificate with constants (C, c); also compares the table with
/// direct convolution at 16 interval midpoints.
pub fn certify_majorant(
    k: &MajorantKernel,
    c_maj: f64,
    c_support: f64,
    spec: &QuadratureSpec,
) -> Result<MajorantCertificate, KernelError> {
    let t = &k.kernel.table;
    let n = t.values.len();
    let mut measured_c = 0.0f64;
    let mut last = 0.0f64;
    let mut viol = f64::NEG_INFINITY;
    for i in 0..n {
        let u = t.node(i);
        let v = t.values[i].re;
        let r = v * (1.0 + u).sqrt();
        measured_c = measured_c.max(r);
        if v.abs() > 1e-14 {
            last = u;
        }
        let bound = if u <= c_support * k.z { c_maj } else { 0.0 };
        viol = viol.max(r - bound);
    }
    let p = RadialBump::shell(k.z)?;
    let f = InvariantBump::radial(p);
    let conv = convolve_rhd(&f, &f, spec)?;
    let mids: Vec<usize> = (0..16).map(|j| (2 * j + 1) * (n - 1) / 32).collect();
    let errs: Result<Vec<f64>, KernelError> = mids
        .par_iter()
        .map(|&i| {
            let u = 0.5 * (t.node(i) + t.node(i + 1));
            Ok((conv.radial_part(u, 0)? - k.kernel.eval_u(u)).abs())
        })
        .collect();
    let interpolation_error = errs?.into_iter().fold(0.0, f64::max);
    Ok(MajorantCertificate {
        z: k.z,
        measured_c_maj: measured_c,
        measured_c_support: last / k.z,
        c_maj,
        c_support,
        max_violation: viol,
        grid: n,
        interpolation_error,
        value_at_identity: t.values[0].re,
    })
}

/// k_{Y,R}(g) = k_Y(a[R]⁻¹ g a[R]) = k_Y(u_R(g)).
#[derive(Debug, Clone)]
pub struct SkewedKernel {
    pub kernel: Arc<RadialTable>,
    pub r: f64,
}

pub fn k_skewed(k: &MajorantKernel, r: f64) -> Result<SkewedKernel, KernelError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(KernelError::Config(format!("need R > 0, got {r}")));
    }
    Ok(SkewedKernel {
        kernel: Arc::new(k.kernel.clone()),
        r,
    })
}

impl SkewedKernel {
    pub fn field(&self) -> SmoothField {
        let s = self.clone();
        SmoothField::new(move |g| C64::new(s.kernel.eval_u(g.u_skewed(s.r)), 0.0))
    }
}

impl KernelFunction for SkewedKernel {
    fn eval(&self, g: &GroupElement) -> C64 {
        C64::new(self.kernel.eval_u(g.u_skewed(self.r)), 0.0)
    }
    fn entry_bounds(&self) -> [f64; 4] {
        ball_entry_bounds(self.kernel.support, self.r)
    }
    fn haar_integral(&self, spec: &QuadratureSpec) -> Result<Estimate, KernelError> {
        let v = self.kernel.integral;
        Ok(Estimate::new(C64::new(v, 0.0), v.abs() * spec.rel_tol))
    }
}

// ---------------------------------------------------------------------------
// spectral positivity

/// One (ν, ℓ) comparison of ⟨f⊳f, P⟩ with |⟨f, P⟩|².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityEntry {
    pub nu: C64,
    pub l: i32,
    pub square_transform: C64,
    pub modulus_squared: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub entries: Vec<PositivityEntry>,
    pub max_violation: f64,
    /// (∫_G |f|)², which bounds both sides when |P| ≤ 1
    pub scale: f64,
}

/// Panels of the type projections used in transforms.
const TRANSFORM_PANELS: usize = 48;

/// max |⟨f⊳f, P_ν^{(ℓ,ℓ)}⟩ − |⟨f, P_ν^{(ℓ,ℓ)}⟩|²| over the grid.
pub fn spectral_positivity_check(
    f: &InvariantBump,
    grid: &[(SpectralParameter, i32)],
    spec: &QuadratureSpec,
) -> Result<PositivityReport, KernelError> {
    let conv = convolve_rhd(f, f, spec)?;
    let mut entries = Vec::new();
    let mut ls: Vec<i32> = grid.iter().map(|g| g.1).collect();
    ls.sort();
    ls.dedup();
    for l in ls {
        let square = conv.type_projection(l, TRANSFORM_PANELS)?;
        let prof = f.type_profile(l, spec)?;
        let single =
            TypeProjection::from_profile(&prof, l, l, f.radial.support().1, TRANSFORM_PANELS);
        for (param, _) in grid.iter().filter(|g| g.1 == l) {
            param.check_types(l, l)?;
            let a = square.transform(param, spec)?;
            let b = single.transform(param, spec)?;
            entries.push(PositivityEntry {
                nu: param.nu,
                l,
                square_transform: a.value,
                modulus_squared: b.value.norm_sqr(),
                error: a.error + 2.0 * b.value.norm() * b.error,
            });
        }
    }
    let max_violation = entries
        .iter()
        .map(|e| (e.square_transform - e.modulus_squared).norm())
        .fold(0.0, f64::max);
    let scale = f.l1_norm(spec)?.powi(2);
    Ok(PositivityReport {
        entries,
        max_violation,
        scale,
    })
}

// ---------------------------------------------------------------------------
// exceptional spectrum

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformEntry {
    pub nu: C64,
    pub l: i32,
    pub transform: f64,
    pub error: f64,
    /// |⟨f_Z, P⟩|²
    pub modulus_squared: f64,
    /// L⁴⟨k, P⟩/Z^ν for real ν
    pub lower_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalReport {
    pub z: f64,
    pub l: u32,
    pub eta: f64,
    pub widening: f64,
    pub entries: Vec<TransformEntry>,
    pub min_transform: f64,
    pub scale: f64,
    /// min over |ℓ| ≤ L of L·F̂(ℓ)
    pub fourier_floor: f64,
    /// smallest c₀ such that every grid point with ν ∈ (η, ½−η) and
    /// Z^ν > c₀L⁶ satisfies L⁴⟨k,P⟩ ≥ Z^ν
    pub c0: f64,
    /// points of the η-subgrid, and how many clear c₀
    pub subgrid: usize,
    pub subgrid_above_c0: usize,
    /// min of L⁴⟨k,P⟩/Z^ν over the η-subgrid
    pub min_lower_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExceptionalKernel {
    pub f: InvariantBump,
    pub conv: Convolution,
}

impl ExceptionalKernel {
    pub fn eval(&self, g: &GroupElement) -> Result<f64, KernelError> {
        self.conv.eval(g)
    }
}

/// k^exc_Z = f_Z⊳f_Z with f_Z = ψ_Z·F(φ+ϑ), and its transform table over
/// ν ∈ `nus`, |ℓ| ≤ L.
pub fn exceptional_kernel(
    z: f64,
    l: u32,
    eta: f64,
    widening: f64,
    nus: &[SpectralParameter],
    spec: &QuadratureSpec,
) -> Result<(ExceptionalKernel, ExceptionalReport), KernelError> {
    if l < 1 || z < 2.0 * l as f64 {
        return Err(KernelError::Config(format!(
            "need Z ≥ 2L ≥ 1; got Z = {z}, L = {l}"
        )));
    }
    if !(eta > 0.0 && eta < 0.25) {
        return Err(KernelError::Config(format!("need η ∈ (0, ¼), got {eta}")));
    }
    let f = InvariantBump {
        radial: RadialBump::shell(z)?,
        angular: Some(AngularCutoff::new(l as f64, widening)?),
    };
    let conv = convolve_rhd(&f, &f, spec)?;
    let li = l as i32;
    let mut entries = Vec::new();
    let mut fourier_floor = f64::INFINITY;
    for m in 0..=li {
        let fh = f.coefficient(m, spec)?;
        fourier_floor = fourier_floor.min(l as f64 * fh);
        let square = conv.type_projection(m, TRANSFORM_PANELS)?;
        let prof = f.type_profile(m, spec)?;
        let single =
            TypeProjection::from_profile(&prof, m, m, f.radial.support().1, TRANSFORM_PANELS);
        for sign in [1, -1] {
            if m == 0 && sign == -1 {
                continue;
            }
            let lm = sign * m;
            let (mut sq, mut si) = (square.clone(), single.clone());
            sq.l1 = lm;
            sq.l2 = lm;
            si.l1 = lm;
            si.l2 = lm;
            for param in nus {
                if param.check_types(lm, lm).is_err() {
                    continue;
                }
                let a = sq.transform(param, spec)?;
                let b = si.transform(param, spec)?;
                let real_nu = param.nu.im == 0.0;
                let lower_ratio = (real_nu && param.nu.re > 0.0)
                    .then(|| (l as f64).powi(4) * a.value.re / z.powf(param.nu.re));
                entries.push(TransformEntry {
                    nu: param.nu,
                    l: lm,
                    transform: a.value.re,
                    error: a.error,
                    modulus_squared: b.value.norm_sqr(),
                    lower_ratio,
                });
            }
        }
    }
    let scale = f.l1_norm(spec)?.powi(2);
    let min_transform = entries
        .iter()
        .map(|e| e.transform)
        .fold(f64::INFINITY, f64::min);
    if min_transform < -1e-8 * scale {
        return Err(KernelError::Certification(format!(
            "exceptional transform {min_transform} below −1e-8·{scale}"
        )));
    }
    let l6 = (l as f64).powi(6);
    let sub: Vec<TransformEntry> = entries
        .iter()
        .filter(|e| e.nu.im == 0.0 && e.nu.re > eta && e.nu.re < 0.5 - eta)
        .copied()
        .collect();
    let c0 = sub
        .iter()
        .filter(|e| e.lower_ratio.unwrap_or(0.0) < 1.0)
        .map(|e| z.powf(e.nu.re) / l6)
        .fold(0.0, f64::max);
    let above = sub.iter().filter(|e| z.powf(e.nu.re) > c0 * l6).count();
    let min_lower_ratio = sub.iter().filter_map(|e| e.lower_ratio).reduce(f64::min);
    let report = ExceptionalReport {
        z,
        l,
        eta,
        widening,
        entries,
        min_transform,
        scale,
        fourier_floor,
        c0,
        subgrid: sub.len(),
        subgrid_above_c0: above,
        min_lower_ratio,
    };
    Ok((ExceptionalKernel { f, conv }, report))
}

// ---------------------------------------------------------------------------
// the Dirac family h_δ

/// ∫_G h_δ φ dg for h_δ = (ψ_δ⊳ψ_δ)/‖ψ_δ⊳ψ_δ‖₁ at each δ, against a radial
/// test profile φ(u).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracFamilyReport {
    pub deltas: Vec<f64>,
    pub averages: Vec<f64>,
    /// φ(0)
    pub limit: f64,
    /// |average_{k+1} − average_k|
    pub increments: Vec<f64>,
}

pub fn dirac_family<P: Fn(f64) -> f64 + Sync>(
    test: &P,
    deltas: &[f64],
    spec: &QuadratureSpec,
) -> Result<DiracFamilyReport, KernelError> {
    let averages: Result<Vec<f64>, KernelError> = deltas
        .iter()
        .map(|&d| {
            let p = RadialBump::ball(d)?;
            let f = InvariantBump::radial(p);
            let conv = convolve_rhd(&f, &f, spec)?;
            let norm = conv.haar_integral()?;
            let fail: std::sync::Mutex<Option<KernelError>> = std::sync::Mutex::new(None);
            let g = |u: f64| match conv.radial_part(u, 0) {
                Ok(x) => C64::new(2.0 * x * test(u), 0.0),
                Err(e) => {
                    *fail.lock().unwrap() = Some(e);
                    C64::new(0.0, 0.0)
                }
            };
            let s = conv.support();
            let v = integrate_1d_breaks(&g, &[0.0, 0.25 * s, 0.5 * s, s], spec)?
                .value
                .re;
            if let Some(e) = fail.into_inner().unwrap() {
                return Err(e);
            }
            Ok(v / norm)
        })
        .collect();
    let averages = averages?;
    let increments = averages.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok(DiracFamilyReport {
        deltas: deltas.to_vec(),
        averages,
        limit: test(0.0),
        increments,
    })
}

/// h_δ as a tabulated kernel.
pub fn dirac_kernel(delta: f64, spec: &QuadratureSpec) -> Result<SkewedKernel, KernelError> {
    let p = RadialBump::ball(delta)?;
    let f = InvariantBump::radial(p);
    let norm = convolve_rhd(&f, &f, spec)?.haar_integral()?;
    let t = RadialTable::square(&p, norm, MAJORANT_TABLE_NODES, spec)?;
    Ok(SkewedKernel {
        kernel: Arc::new(t),
        r: 1.0,
    })
}
