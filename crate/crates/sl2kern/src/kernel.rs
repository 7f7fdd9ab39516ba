//! Automorphic kernels 𝒦F over Γ₀(q) and its diagonal conjugates, their Haar
//! main terms, discrepancies ΔF, weighted pairings, Hecke twists and the
//! unskewing transform.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arithmetic::{
    check_hecke_index, for_each_gamma0, gamma0_index, hecke_cosets, ArithmeticError,
    DirichletCharacter, LatticeQuery,
};
use crate::lie_ops::SmoothField;
use crate::numerics::{
    integrate_1d_breaks, integrate_g, smooth_step, Estimate, NumericsError, QuadratureSpec,
    SupportHint, C64, KAPPA_BRUHAT,
};
use crate::sl2::GroupElement;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KernelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl From<crate::harmonics::HarmonicsError> for KernelError {
    fn from(e: crate::harmonics::HarmonicsError) -> Self {
        match e {
            crate::harmonics::HarmonicsError::Numerics(n) => KernelError::Numerics(n),
            other => KernelError::Config(other.to_string()),
        }
    }
}

const ZERO: C64 = C64::new(0.0, 0.0);

// ---------------------------------------------------------------------------
// dyadic bumps

/// Sign behaviour of a bump factor on the negative axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// Supported on [X, 2X] only.
    Positive,
    Even,
    Odd,
}

/// τ_J = max_{j ≤ J} (sup|S^{(j)}|)^{1/j} for the smooth step S, J = 1..12.
/// A ramp of width τ_J·δX then has j-th derivative at most (δX)^{−j}.
pub const STEP_DERIVATIVE_SCALE: [f64; 12] = [
    2.0, 3.14, 4.80, 6.91, 9.49, 12.99, 17.08, 21.63, 26.63, 32.08, 38.02, 45.02,
];

/// Sampled derivatives may exceed the nominal bound by this factor.
pub const CERTIFICATION_MARGIN: f64 = 1.5;

pub const MAX_ORDER: u32 = 12;

/// x ↦ λ·S((x−X)/W)·S((2X−x)/W) on [X, 2X], mirrored by parity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpFactor {
    pub scale: f64,
    pub width: f64,
    pub amplitude: f64,
    pub parity: Parity,
}

impl BumpFactor {
    fn profile(&self, t: f64) -> f64 {
        let x = self.scale;
        if t <= x || t >= 2.0 * x {
            return 0.0;
        }
        self.amplitude * smooth_step((t - x) / self.width) * smooth_step((2.0 * x - t) / self.width)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.parity {
            Parity::Positive => self.profile(t),
            Parity::Even => self.profile(t.abs()),
            Parity::Odd => t.signum() * self.profile(t.abs()),
        }
    }

    /// Breakpoints on the positive side.
    pub fn breaks(&self) -> [f64; 4] {
        let x = self.scale;
        [x, x + self.width, 2.0 * x - self.width, 2.0 * x]
    }

    /// ∫_ℝ f(t)·w(|t|) dt.
    pub fn moment<W: Fn(f64) -> f64>(
        &self,
        w: W,
        spec: &QuadratureSpec,
    ) -> Result<f64, NumericsError> {
        let mult = match self.parity {
            Parity::Positive => 1.0,
            Parity::Even => 2.0,
            Parity::Odd => return Ok(0.0),
        };
        let g = |t: f64| C64::new(self.profile(t) * w(t), 0.0);
        Ok(mult * integrate_1d_breaks(&g, &self.breaks(), spec)?.value.re)
    }
}

/// Tensor product of 1D bump factors with certified derivative bounds
/// ‖∂^{J₁..Jₙ}f‖∞ ≤ Π(δXᵢ)^{−Jᵢ} for ΣJᵢ ≤ J.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicBump {
    pub delta: f64,
    pub order: u32,
    pub factors: Vec<BumpFactor>,
}

/// Worst sampled ratio |Δⁿ_h f / hⁿ|·(δX)ⁿ over n ≤ J for one factor.
pub fn sampled_derivative_ratio(f: &BumpFactor, delta: f64, order: u32) -> f64 {
    let dx = delta * f.scale;
    let h = dx.min(f.width) / 4.0;
    let (lo, hi) = (f.scale - order as f64 * h, 2.0 * f.scale + h);
    let samples = 600;
    let mut worst: f64 = 0.0;
    for n in 0..=order {
        // forward difference of order n: equals hⁿ f⁽ⁿ⁾(ξ) for some ξ
        let binom: Vec<f64> = (0..=n).map(|k| binomial(n, k)).collect();
        for s in 0..=samples {
            let x = lo + (hi - lo) * s as f64 / samples as f64;
            let mut acc = 0.0;
            for (k, b) in binom.iter().enumerate() {
                let sign = if (n as usize - k) % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * b * f.profile(x + k as f64 * h);
            }
            worst = worst.max((acc / h.powi(n as i32)).abs() * dx.powi(n as i32));
        }
    }
    worst
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// One mollified-plateau factor per scale. The ramp width is τ_J·δX, capped
/// at X/2; a capped ramp lowers the amplitude until the bounds hold.
pub fn make_bump(
    scales: &[f64],
    delta: f64,
    order: u32,
    parity: &[Parity],
) -> Result<DyadicBump, KernelError> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(KernelError::Config(format!(
            "δ = {delta} must lie in (0, 1/2]"
        )));
    }
    if order == 0 || order > MAX_ORDER {
        return Err(KernelError::Config(format!(
            "J = {order} must lie in 1..={MAX_ORDER}"
        )));
    }
    if scales.is_empty() || scales.len() != parity.len() {
        return Err(KernelError::Config("need one parity per scale".into()));
    }
    let mut factors = Vec::with_capacity(scales.len());
    for (&x, &p) in scales.iter().zip(parity) {
        if !(x > 0.0 && x.is_finite()) {
            return Err(KernelError::Config(format!("scale {x} must be positive")));
        }
        let dx = delta * x;
        let width = (STEP_DERIVATIVE_SCALE[order as usize - 1] * dx).min(0.5 * x);
        let mut amplitude: f64 = 1.0;
        for j in 1..=order {
            let tj = STEP_DERIVATIVE_SCALE[j as usize - 1];
            amplitude = amplitude.min((width / (tj * dx)).powi(j as i32));
        }
        factors.push(BumpFactor {
            scale: x,
            width,
            amplitude,
            parity: p,
        });
    }
    let bump = DyadicBump {
        delta,
        order,
        factors,
    };
    bump.certify()?;
    Ok(bump)
}

impl DyadicBump {
    pub fn dims(&self) -> usize {
        self.factors.len()
    }

    pub fn scales(&self) -> Vec<f64> {
        self.factors.iter().map(|f| f.scale).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for (f, &t) in self.factors.iter().zip(x) {
            v *= f.eval(t);
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }

    /// Mixed bounds follow from the per-factor ones since every factor is
    /// bounded by 1 together with its derivatives up to order J.
    pub fn certify(&self) -> Result<(), KernelError> {
        for (i, f) in self.factors.iter().enumerate() {
            let r = sampled_derivative_ratio(f, self.delta, self.order);
            if r > CERTIFICATION_MARGIN {
                return Err(KernelError::Certification(format!(
                    "factor {i}: sampled derivative ratio {r:.3} exceeds {CERTIFICATION_MARGIN}"
                )));
            }
        }
        Ok(())
    }

    /// The same profiles on rescaled axes: x ↦ f(s·x).
    pub fn rescaled(&self, s: &[f64]) -> DyadicBump {
        let factors = self
            .factors
            .iter()
            .zip(s)
            .map(|(f, &si)| BumpFactor {
                scale: f.scale / si,
                width: f.width / si,
                ..*f
            })
            .collect();
        DyadicBump { factors, ..*self }
    }
}

// ---------------------------------------------------------------------------
// point functionals

/// f ↦ Σ w·f(τ) over finitely many atoms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointFunctional {
    pub atoms: Vec<(GroupElement, C64)>,
}

impl PointFunctional {
    pub fn new(atoms: Vec<(GroupElement, C64)>) -> Self {
        PointFunctional { atoms }
    }

    pub fn delta(tau: GroupElement) -> Self {
        PointFunctional {
            atoms: vec![(tau, C64::new(1.0, 0.0))],
        }
    }

    pub fn identity() -> Self {
        PointFunctional::delta(GroupElement::identity())
    }

    pub fn apply<F: Fn(&GroupElement) -> C64 + ?Sized>(&self, f: &F) -> C64 {
        self.atoms.iter().fold(ZERO, |s, (t, w)| s + w * f(t))
    }

    pub fn scaled(&self, s: C64) -> Self {
        PointFunctional {
            atoms: self.atoms.iter().map(|(t, w)| (*t, w * s)).collect(),
        }
    }

    /// Atoms τ ↦ τh, so that ⟨f⟩ becomes ⟨r_h f⟩.
    pub fn right_translated(&self, h: &GroupElement) -> Self {
        PointFunctional {
            atoms: self.atoms.iter().map(|(t, w)| (*t * *h, *w)).collect(),
        }
    }

    /// Atoms τ ↦ hτ.
    pub fn left_translated(&self, h: &GroupElement) -> Self {
        PointFunctional {
            atoms: self.atoms.iter().map(|(t, w)| (*h * *t, *w)).collect(),
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w.norm()).sum()
    }
}

/// ⟨α₁|B|α₂⟩ = ΣΣ conj(α₁(τ₁))·α₂(τ₂)·B(τ₁, τ₂).
pub fn pairing<B>(
    alpha1: &PointFunctional,
    alpha2: &PointFunctional,
    b: B,
) -> Result<C64, KernelError>
where
    B: Fn(&GroupElement, &GroupElement) -> Result<C64, KernelError>,
{
    let mut s = ZERO;
    for (t1, w1) in &alpha1.atoms {
        for (t2, w2) in &alpha2.atoms {
            s += w1.conj() * w2 * b(t1, t2)?;
        }
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// kernel functions

/// A compactly supported F: G → ℂ with entry bounds for its support.
pub trait KernelFunction: Sync {
    fn eval(&self, g: &GroupElement) -> C64;
    /// Upper bounds for |a|, |b|, |c|, |d| over the support.
    fn entry_bounds(&self) -> [f64; 4];
    /// ∫_G F dg.
    fn haar_integral(&self, spec: &QuadratureSpec) -> Result<Estimate, KernelError>;
}

/// F((a b; c d)) = f(p₀a, p₁c, p₂d) for a three-dimensional bump f.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelWeight {
    pub bump: DyadicBump,
    pub pre: [f64; 3],
}

impl KernelWeight {
    pub fn new(bump: DyadicBump) -> Result<Self, KernelError> {
        if bump.dims() != 3 {
            return Err(KernelError::Config(format!(
                "kernel weight needs a 3-dim bump, got {}",
                bump.dims()
            )));
        }
        for f in &bump.factors[1..2] {
            if f.scale <= 0.0 {
                return Err(KernelError::Config("c-scale must be positive".into()));
            }
        }
        Ok(KernelWeight {
            bump,
            pre: [1.0; 3],
        })
    }

    /// Support box scales (A, C, D) after the pre-scaling.
    pub fn scales(&self) -> [f64; 3] {
        let s = self.bump.scales();
        [s[0] / self.pre[0], s[1] / self.pre[1], s[2] / self.pre[2]]
    }

    pub fn f(&self, a: f64, c: f64, d: f64) -> f64 {
        self.bump
            .eval(&[self.pre[0] * a, self.pre[1] * c, self.pre[2] * d])
    }

    /// The composed bump, as a certified member of its own class.
    pub fn effective_bump(&self) -> DyadicBump {
        self.bump.rescaled(&self.pre)
    }

    /// g ↦ F(a[R₁] g a[R₂]⁻¹).
    pub fn skewed(&self, r1: f64, r2: f64) -> KernelWeight {
        let (s, t) = ((r1 / r2).sqrt(), (r1 * r2).sqrt());
        KernelWeight {
            bump: self.bump.clone(),
            pre: [self.pre[0] * s, self.pre[1] / t, self.pre[2] / s],
        }
    }

    /// g ↦ F(a⁻¹ g a) for a = a[s].
    pub fn conjugated(&self, s: f64) -> KernelWeight {
        KernelWeight {
            bump: self.bump.clone(),
            pre: [self.pre[0], self.pre[1] * s, self.pre[2]],
        }
    }
}

impl KernelFunction for KernelWeight {
    fn eval(&self, g: &GroupElement) -> C64 {
        C64::new(self.f(g.a, g.c, g.d), 0.0)
    }

    fn entry_bounds(&self) -> [f64; 4] {
        let [a, c, d] = self.scales();
        [2.0 * a, (4.0 * a * d + 1.0) / c, 2.0 * c, 2.0 * d]
    }

    /// κ_B ∫ f da dc dd/|c|, a product of one-dimensional integrals.
    fn haar_integral(&self, spec: &QuadratureSpec) -> Result<Estimate, KernelError> {
        let fs = &self.bump.factors;
        let ia = fs[0].moment(|_| 1.0, spec)? / self.pre[0];
        let ic = fs[1].moment(|t| 1.0 / t, spec)?;
        let id = fs[2].moment(|_| 1.0, spec)? / self.pre[2];
        let v = KAPPA_BRUHAT * ia * ic * id;
        Ok(Estimate::new(C64::new(v, 0.0), v.abs() * spec.rel_tol))
    }
}

/// F(n[x]a[y]k) = f(p₀x, p₁y) for a two-dimensional bump with positive y-factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IwasawaWeight {
    pub bump: DyadicBump,
    pub pre: [f64; 2],
}

impl IwasawaWeight {
    pub fn new(bump: DyadicBump) -> Result<Self, KernelError> {
        if bump.dims() != 2 || bump.factors[1].parity != Parity::Positive {
            return Err(KernelError::Config(
                "need a 2-dim bump with a positive y-factor".into(),
            ));
        }
        Ok(IwasawaWeight {
            bump,
            pre: [1.0; 2],
        })
    }

    pub fn scales(&self) -> [f64; 2] {
        let s = self.bump.scales();
        [s[0] / self.pre[0], s[1] / self.pre[1]]
    }

    /// g ↦ F(a[R] g).
    pub fn left_scaled(&self, r: f64) -> IwasawaWeight {
        IwasawaWeight {
            bump: self.bump.clone(),
            pre: [self.pre[0] * r, self.pre[1] * r],
        }
    }
}

impl KernelFunction for IwasawaWeight {
    fn eval(&self, g: &GroupElement) -> C64 {
        // y = 1/(c² + d²), x = (ac + bd)/(c² + d²)
        let n = g.c * g.c + g.d * g.d;
        let (x, y) = ((g.a * g.c + g.b * g.d) / n, 1.0 / n);
        C64::new(self.bump.eval(&[self.pre[0] * x, self.pre[1] * y]), 0.0)
    }

    fn entry_bounds(&self) -> [f64; 4] {
        let [x, y] = self.scales();
        let top = (2.0 * y).sqrt() + 2.0 * x / y.sqrt();
        let bottom = 1.0 / y.sqrt();
        [top, top, bottom, bottom]
    }

    /// (1/2π) ∫∫ f dx dy/y².
    fn haar_integral(&self, spec: &QuadratureSpec) -> Result<Estimate, KernelError> {
        let fs = &self.bump.factors;
        let ix = fs[0].moment(|_| 1.0, spec)? / self.pre[0];
        let iy = fs[1].moment(|t| 1.0 / (t * t), spec)? * self.pre[1];
        let v = ix * iy / (2.0 * PI);
        Ok(Estimate::new(C64::new(v, 0.0), v.abs() * spec.rel_tol))
    }
}

/// A general field with a declared support.
#[derive(Clone, Debug)]
pub struct FieldWeight {
    pub field: SmoothField,
    pub bounds: [f64; 4],
    pub hint: SupportHint,
}

impl KernelFunction for FieldWeight {
    fn eval(&self, g: &GroupElement) -> C64 {
        self.field.eval(g)
    }
    fn entry_bounds(&self) -> [f64; 4] {
        self.bounds
    }
    fn haar_integral(&self, spec: &QuadratureSpec) -> Result<Estimate, KernelError> {
        let f = self.field.evaluator();
        Ok(integrate_g(&|g: &GroupElement| f(g), &self.hint, spec)?)
    }
}

/// Entry bounds of the ball u_R(g) ≤ u_max.
pub fn ball_entry_bounds(u_max: f64, r: f64) -> [f64; 4] {
    let s = (4.0 * u_max + 2.0).sqrt();
    [s, s * r, s / r, s]
}

// ---------------------------------------------------------------------------
// groups and kernel sums

/// Γ = a[s]Γ₀(q)a[s]⁻¹ with the character χ(a[s]γa[s]⁻¹) = χ(d(γ)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub q: u64,
    pub chi: DirichletCharacter,
    pub conj: f64,
}

impl Lattice {
    pub fn gamma0(q: u64) -> Self {
        Lattice {
            q,
            chi: DirichletCharacter::principal(q),
            conj: 1.0,
        }
    }

    pub fn with_character(chi: DirichletCharacter) -> Self {
        Lattice {
            q: chi.q,
            chi,
            conj: 1.0,
        }
    }

    /// The conjugate a[s]Γa[s]⁻¹.
    pub fn conjugated(&self, s: f64) -> Self {
        Lattice {
            conj: self.conj * s,
            ..self.clone()
        }
    }

    /// vol(Γ\G) = [SL₂(ℤ) : Γ₀(q)]/12 for dg = 2 du dk₁ dk₂.
    pub fn volume(&self) -> f64 {
        gamma0_index(self.q) / 12.0
    }

    fn to_base(&self, tau: &GroupElement) -> GroupElement {
        if self.conj == 1.0 {
            *tau
        } else {
            GroupElement::a(self.conj).inv() * *tau
        }
    }
}

/// The value of a kernel sum with its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSum {
    pub value: C64,
    /// Lattice points enumerated.
    pub enumerated: u64,
    /// Points where F was nonzero.
    pub supported: u64,
}

/// Entry bounds of γ = σ₁Mσ₂⁻¹ for |M_kl| ≤ B_kl.
fn image_bounds(s1: &GroupElement, s2inv: &GroupElement, b: [f64; 4]) -> [f64; 4] {
    let l = [[s1.a.abs(), s1.b.abs()], [s1.c.abs(), s1.d.abs()]];
    let r = [
        [s2inv.a.abs(), s2inv.b.abs()],
        [s2inv.c.abs(), s2inv.d.abs()],
    ];
    let m = [[b[0], b[1]], [b[2], b[3]]];
    let mut out = [0.0; 4];
    for i in 0..2 {
        for j in 0..2 {
            let mut s = 0.0;
            for k in 0..2 {
                for l2 in 0..2 {
                    s += l[i][k] * m[k][l2] * r[l2][j];
                }
            }
            out[2 * i + j] = s * (1.0 + 1e-9) + 1e-9;
        }
    }
    out
}

/// 𝒦F(τ₁, τ₂) = Σ_{γ∈Γ} conj(χ(γ)) F(τ₁⁻¹γτ₂).
pub fn automorphic_kernel<K: KernelFunction + ?Sized>(
    f: &K,
    lattice: &Lattice,
    tau1: &GroupElement,
    tau2: &GroupElement,
) -> Result<KernelSum, KernelError> {
    let s1 = lattice.to_base(tau1);
    let s2 = lattice.to_base(tau2);
    let s1inv = s1.inv();
    let s2inv = s2.inv();
    let b = image_bounds(&s1, &s2inv, f.entry_bounds());
    let query = LatticeQuery::entry_box(lattice.q, b[0], b[1], b[2], b[3]);
    let mut gammas = Vec::new();
    for_each_gamma0(&query, |m| gammas.push(m))?;
    let terms: Vec<C64> = gammas
        .par_iter()
        .map(|m| {
            let v = f.eval(&(s1inv * m.to_group_element() * s2));
            if v == ZERO {
                ZERO
            } else {
                lattice.chi.eval(m.d).conj() * v
            }
        })
        .collect();
    let mut value = ZERO;
    let mut supported = 0;
    for t in &terms {
        if *t != ZERO {
            supported += 1;
        }
        value += t;
    }
    Ok(KernelSum {
        value,
        enumerated: gammas.len() as u64,
        supported,
    })
}

/// 1{χ principal}/vol(Γ\G) · ∫_G F dg. For a kernel weight this is
/// (ζ(2)·q·Π_{p|q}(1+1/p))⁻¹ ∫ f da dc dd/|c|.
pub fn main_term<K: KernelFunction + ?Sized>(
    f: &K,
    lattice: &Lattice,
    spec: &QuadratureSpec,
) -> Result<Estimate, KernelError> {
    if !lattice.chi.is_principal() {
        return Ok(Estimate::new(ZERO, 0.0));
    }
    let e = f.haar_integral(spec)?;
    let v = lattice.volume();
    Ok(Estimate::new(e.value / v, e.error / v))
}

pub fn discrepancy<K: KernelFunction + ?Sized>(
    f: &K,
    lattice: &Lattice,
    tau1: &GroupElement,
    tau2: &GroupElement,
    spec: &QuadratureSpec,
) -> Result<C64, KernelError> {
    Ok(automorphic_kernel(f, lattice, tau1, tau2)?.value - main_term(f, lattice, spec)?.value)
}

/// ⟨α₁|ΔF|α₂⟩ with the main term computed once.
pub fn weighted_discrepancy<K: KernelFunction + ?Sized>(
    alpha1: &PointFunctional,
    alpha2: &PointFunctional,
    f: &K,
    lattice: &Lattice,
    spec: &QuadratureSpec,
) -> Result<C64, KernelError> {
    let main = main_term(f, lattice, spec)?.value;
    pairing(alpha1, alpha2, |t1, t2| {
        Ok(automorphic_kernel(f, lattice, t1, t2)?.value - main)
    })
}

/// ⟨α₁|𝒦F|α₂⟩.
pub fn weighted_kernel<K: KernelFunction + ?Sized>(
    alpha1: &PointFunctional,
    alpha2: &PointFunctional,
    f: &K,
    lattice: &Lattice,
) -> Result<C64, KernelError> {
    pairing(alpha1, alpha2, |t1, t2| {
        Ok(automorphic_kernel(f, lattice, t1, t2)?.value)
    })
}

/// The functional α∘𝒯_h on the conjugate-linear (`left`) or linear side:
/// atoms h^{−1/2}(a b; 0 d)τ with weights w·χ(a)/√h, conjugated on the left.
pub fn hecke_expand(
    alpha: &PointFunctional,
    h: u64,
    chi: &DirichletCharacter,
    left: bool,
) -> Result<PointFunctional, KernelError> {
    check_hecke_index(h, chi)?;
    let s = (h as f64).sqrt().recip();
    let mut atoms = Vec::new();
    for cos in hecke_cosets(h) {
        let c = chi.eval(cos.a as i64);
        if c == ZERO {
            continue;
        }
        let c = if left { c.conj() } else { c };
        let m = cos.scaled_matrix();
        for (t, w) in &alpha.atoms {
            atoms.push((m * *t, w * c * s));
        }
    }
    Ok(PointFunctional { atoms })
}

/// Σ β₁(h₁)β₂(h₂)⟨α₁|𝒯_{h₁,h₂}ΔF|α₂⟩.
pub fn hecke_twisted_sum<K: KernelFunction + ?Sized>(
    beta1: &[(u64, C64)],
    beta2: &[(u64, C64)],
    alpha1: &PointFunctional,
    alpha2: &PointFunctional,
    f: &K,
    lattice: &Lattice,
    spec: &QuadratureSpec,
) -> Result<C64, KernelError> {
    let chi = &lattice.chi;
    for &(h, _) in beta1.iter().chain(beta2) {
        if crate::arithmetic::gcd(h as i64, lattice.q as i64) != 1 {
            return Err(ArithmeticError::Coprimality { h, q: lattice.q }.into());
        }
    }
    let main = main_term(f, lattice, spec)?.value;
    let mut s = ZERO;
    for &(h1, b1) in beta1 {
        let a1 = hecke_expand(alpha1, h1, chi, true)?;
        for &(h2, b2) in beta2 {
            let a2 = hecke_expand(alpha2, h2, chi, false)?;
            let v = pairing(&a1, &a2, |t1, t2| {
                Ok(automorphic_kernel(f, lattice, t1, t2)?.value - main)
            })?;
            s += b1 * b2 * v;
        }
    }
    Ok(s)
}

/// The unskewed problem: F̃(g) = F(a[R₁] g a[R₂]⁻¹) and α̃ⱼ with atoms τ·a[Rⱼ],
/// so that ⟨α₁|ΔF|α₂⟩ = ⟨α̃₁|ΔF̃|α̃₂⟩.
pub fn unskew_with(
    f: &KernelWeight,
    alpha1: &PointFunctional,
    alpha2: &PointFunctional,
    r1: f64,
    r2: f64,
) -> Result<(KernelWeight, PointFunctional, PointFunctional), KernelError> {
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(KernelError::Config(format!(
            "R₁ = {r1}, R₂ = {r2} must be positive"
        )));
    }
    Ok((
        f.skewed(r1, r2),
        alpha1.right_translated(&GroupElement::a(r1)),
        alpha2.right_translated(&GroupElement::a(r2)),
    ))
}

/// [`unskew_with`] at R₁ = A/C, R₂ = D/C; the new scales are all √(AD).
pub fn unskew(
    f: &KernelWeight,
    alpha1: &PointFunctional,
    alpha2: &PointFunctional,
) -> Result<(KernelWeight, PointFunctional, PointFunctional), KernelError> {
    let [a, c, d] = f.scales();
    unskew_with(f, alpha1, alpha2, a / c, d / c)
}

/// Shared handle for kernels evaluated through a closure.
#[derive(Clone)]
pub struct ClosureKernel {
    pub f: Arc<dyn Fn(&GroupElement) -> C64 + Send + Sync>,
    pub bounds: [f64; 4],
    pub integral: Estimate,
}

impl KernelFunction for ClosureKernel {
    fn eval(&self, g: &GroupElement) -> C64 {
        (self.f)(g)
    }
    fn entry_bounds(&self) -> [f64; 4] {
        self.bounds
    }
    fn haar_integral(&self, _spec: &QuadratureSpec) -> Result<Estimate, KernelError> {
        Ok(self.integral)
    }
}
