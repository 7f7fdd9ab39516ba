//! SL2(R) elements and the Iwasawa, Cartan and Bruhat charts.
//!
//! Conventions: n[x] = (1 x; 0 1), a[y] = diag(√y, 1/√y),
//! k[θ] = (cos θ, sin θ; −sin θ, cos θ), w = k[π/2].
//! The Cartan form is g = k[φ] a[e^{−ϱ}] k[ϑ] with cosh ϱ = 2u+1, and
//! a_u := a[e^{−ϱ}].

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Mul, Neg};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Sl2Error {
    #[error("matrix is not in SL2(R): det = {det}")]
    NotUnimodular { det: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("element lies in the small Bruhat cell (|c| = {c:e})")]
    SmallCell { c: f64 },
    #[error("domain error: {0}")]
    Domain(String),
}

/// A real 2×2 matrix of determinant one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Largest tolerated |det − 1| before renormalization is refused.
pub const DET_TOLERANCE: f64 = 1e-6;

impl GroupElement {
    /// Builds an element, dividing by √det when det > 0 so the result is
    /// unimodular to rounding.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, Sl2Error> {
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Sl2Error::NonFinite);
        }
        let det = a * d - b * c;
        if !(det > 0.0) || (det - 1.0).abs() > DET_TOLERANCE {
            return Err(Sl2Error::NotUnimodular { det });
        }
        let s = 1.0 / det.sqrt();
        Ok(GroupElement {
            a: a * s,
            b: b * s,
            c: c * s,
            d: d * s,
        })
    }

    /// Renormalizes any matrix with positive determinant.
    pub fn normalized(a: f64, b: f64, c: f64, d: f64) -> Result<Self, Sl2Error> {
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Sl2Error::NonFinite);
        }
        let det = a * d - b * c;
        if !(det > 0.0) {
            return Err(Sl2Error::NotUnimodular { det });
        }
        let s = 1.0 / det.sqrt();
        Ok(GroupElement {
            a: a * s,
            b: b * s,
            c: c * s,
            d: d * s,
        })
    }

    /// No checks; the caller guarantees ad − bc = 1.
    pub const fn new_unchecked(a: f64, b: f64, c: f64, d: f64) -> Self {
        GroupElement { a, b, c, d }
    }

    pub const fn identity() -> Self {
        GroupElement::new_unchecked(1.0, 0.0, 0.0, 1.0)
    }

    pub fn n(x: f64) -> Self {
        GroupElement::new_unchecked(1.0, x, 0.0, 1.0)
    }

    /// a[y] = diag(√y, 1/√y), y > 0.
    pub fn a(y: f64) -> Self {
        let s = y.sqrt();
        GroupElement::new_unchecked(s, 0.0, 0.0, 1.0 / s)
    }

    pub fn k(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        GroupElement::new_unchecked(c, s, -s, c)
    }

    pub const fn w() -> Self {
        GroupElement::new_unchecked(0.0, 1.0, -1.0, 0.0)
    }

    /// a_u = a[e^{−ϱ}] with cosh ϱ = 2u + 1.
    pub fn a_u(u: f64) -> Self {
        let u = u.max(0.0);
        let ch = (u + 1.0).sqrt();
        let sh = u.sqrt();
        GroupElement::new_unchecked(ch - sh, 0.0, 0.0, ch + sh)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inv(&self) -> Self {
        GroupElement::new_unchecked(self.d, -self.b, -self.c, self.a)
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn max_abs_diff(&self, other: &GroupElement) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries().iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// u(g) = ¼(a² + b² + c² + d² − 2), clamped at 0.
    pub fn u(&self) -> f64 {
        let s = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        (0.25 * (s - 2.0)).max(0.0)
    }

    /// u_R(g) = ¼(a² + (b/R)² + (cR)² + d² − 2), clamped at 0.
    pub fn u_skewed(&self, r: f64) -> f64 {
        let b = self.b / r;
        let c = self.c * r;
        let s = self.a * self.a + b * b + c * c + self.d * self.d;
        (0.25 * (s - 2.0)).max(0.0)
    }

    /// a[R]⁻¹ g a[R] = (a, b/R; cR, d).
    pub fn conjugate_diag(&self, r: f64) -> Self {
        GroupElement::new_unchecked(self.a, self.b / r, self.c * r, self.d)
    }

    pub fn to_iwasawa(&self) -> IwasawaCoord {
        let n2 = self.c * self.c + self.d * self.d;
        IwasawaCoord {
            x: (self.a * self.c + self.b * self.d) / n2,
            y: 1.0 / n2,
            theta: canonical_angle((-self.c).atan2(self.d), TAU),
        }
    }

    pub fn from_iwasawa(coord: &IwasawaCoord) -> Self {
        let sy = coord.y.sqrt();
        let (s, c) = coord.theta.sin_cos();
        // n[x] a[y] k[θ]
        GroupElement::new_unchecked(
            sy * c - coord.x * s / sy,
            sy * s + coord.x * c / sy,
            -s / sy,
            c / sy,
        )
    }

    /// α = ½(a+d + i(b−c)) and β = ½(a−d − i(b+c)).
    pub fn alpha_beta(&self) -> (Complex64, Complex64) {
        (
            Complex64::new(0.5 * (self.a + self.d), 0.5 * (self.b - self.c)),
            Complex64::new(0.5 * (self.a - self.d), -0.5 * (self.b + self.c)),
        )
    }

    /// Cartan coordinates with φ ∈ [0, π), ϑ ∈ [0, 2π). When u < 1e-14
    /// the rotation is collapsed to (0, 0, φ+ϑ) and flagged degenerate.
    pub fn to_cartan(&self) -> CartanCoord {
        let (alpha, beta) = self.alpha_beta();
        let u = beta.norm_sqr();
        let sum = alpha.arg();
        if u < CARTAN_DEGENERATE_U {
            return CartanCoord {
                phi: 0.0,
                u,
                vartheta: canonical_angle(sum, TAU),
            };
        }
        let diff = (-beta).arg();
        let mut phi = 0.5 * (sum + diff);
        let mut vartheta = 0.5 * (sum - diff);
        phi = canonical_angle(phi, TAU);
        if phi >= PI {
            phi -= PI;
            vartheta -= PI;
        }
        CartanCoord {
            phi,
            u,
            vartheta: canonical_angle(vartheta, TAU),
        }
    }

    /// The angle φ + ϑ mod 2π; well defined also on the axis u = 0.
    pub fn cartan_angle_sum(&self) -> f64 {
        let (alpha, _) = self.alpha_beta();
        canonical_angle(alpha.arg(), TAU)
    }

    pub fn from_cartan(coord: &CartanCoord) -> Self {
        GroupElement::k(coord.phi) * GroupElement::a_u(coord.u) * GroupElement::k(coord.vartheta)
    }

    pub fn to_bruhat(&self) -> Result<BruhatCoord, Sl2Error> {
        if self.c.abs() <= 1e-12 {
            return Err(Sl2Error::SmallCell { c: self.c });
        }
        Ok(BruhatCoord {
            r1: self.a / self.c,
            c: self.c.abs(),
            r2: self.d / self.c,
            sign: if self.c < 0.0 { 1 } else { -1 },
        })
    }

    pub fn from_bruhat(coord: &BruhatCoord) -> Self {
        let g = GroupElement::n(coord.r1)
            * GroupElement::w()
            * GroupElement::a(coord.c * coord.c)
            * GroupElement::n(coord.r2);
        if coord.sign < 0 {
            -g
        } else {
            g
        }
    }

    /// Right translate g·k[θ].
    pub fn rotate_right(&self, theta: f64) -> Self {
        *self * GroupElement::k(theta)
    }

    /// Left translate k[θ]·g.
    pub fn rotate_left(&self, theta: f64) -> Self {
        GroupElement::k(theta) * *self
    }
}

impl Default for GroupElement {
    fn default() -> Self {
        GroupElement::identity()
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;
    fn mul(self, o: GroupElement) -> GroupElement {
        GroupElement::new_unchecked(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Neg for GroupElement {
    type Output = GroupElement;
    fn neg(self) -> GroupElement {
        GroupElement::new_unchecked(-self.a, -self.b, -self.c, -self.d)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}; {}, {})", self.a, self.b, self.c, self.d)
    }
}

pub const CARTAN_DEGENERATE_U: f64 = 1e-14;

/// Reduces an angle to [0, period).
pub fn canonical_angle(t: f64, period: f64) -> f64 {
    let r = t.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Signed distance between two angles, in (−π, π].
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IwasawaCoord {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartanCoord {
    pub phi: f64,
    pub u: f64,
    pub vartheta: f64,
}

impl CartanCoord {
    pub fn is_degenerate(&self) -> bool {
        self.u < CARTAN_DEGENERATE_U
    }

    /// ϱ ≥ 0 with cosh ϱ = 2u + 1.
    pub fn rho(&self) -> f64 {
        rho_of_u(self.u)
    }
}

/// ϱ = 2 asinh(√u), the stable inverse of cosh ϱ = 2u + 1.
pub fn rho_of_u(u: f64) -> f64 {
    2.0 * u.max(0.0).sqrt().asinh()
}

pub fn u_of_rho(rho: f64) -> f64 {
    let s = (0.5 * rho).sinh();
    s * s
}

/// g = sign · n[r1] w a[c²] n[r2] with c > 0 and sign = −sgn(c-entry).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BruhatCoord {
    pub r1: f64,
    pub c: f64,
    pub r2: f64,
    pub sign: i8,
}

/// θ of the Iwasawa decomposition of k[φ] a_u, from the closed form
/// e^{iθ} = e^{iφ}((w + e^{−2iφ})/(w + e^{2iφ}))^{1/2}, w = √(1+1/u).
pub fn theta_from_cartan(phi: f64, u: f64) -> Result<f64, Sl2Error> {
    if !(u > 0.0) {
        return Err(Sl2Error::Domain(format!(
            "theta_from_cartan needs u > 0, got {u}"
        )));
    }
    let w = (1.0 + 1.0 / u).sqrt();
    let num = Complex64::from_polar(1.0, -2.0 * phi) + w;
    let den = Complex64::from_polar(1.0, 2.0 * phi) + w;
    let z = Complex64::from_polar(1.0, phi) * (num / den).sqrt();
    Ok(canonical_angle(z.arg(), TAU))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn iwasawa_examples() {
        let w = GroupElement::identity().to_iwasawa();
        assert_eq!((w.x, w.y, w.theta), (0.0, 1.0, 0.0));
        let g = GroupElement::n(1.0) * GroupElement::a(4.0);
        assert!(g.max_abs_diff(&GroupElement::new_unchecked(2.0, 0.5, 0.0, 0.5)) < 1e-15);
        let w = g.to_iwasawa();
        assert!((w.x - 1.0).abs() < 1e-14 && (w.y - 4.0).abs() < 1e-14 && w.theta == 0.0);
        let w = GroupElement::w().to_iwasawa();
        assert!(
            w.x.abs() < 1e-15 && (w.y - 1.0).abs() < 1e-15 && (w.theta - PI / 2.0).abs() < 1e-15
        );
        let m = GroupElement::from_iwasawa(&IwasawaCoord {
            x: 0.0,
            y: 1.0,
            theta: PI,
        });
        assert!(m.max_abs_diff(&-GroupElement::identity()) < 1e-15);
    }

    #[test]
    fn constructor_renormalizes() {
        let g = GroupElement::new(1.0 + 1e-8, 0.0, 0.0, 1.0).unwrap();
        assert!((g.det() - 1.0).abs() < 1e-15);
        assert!(GroupElement::new(1.0, 0.0, 0.0, -1.0).is_err());
        assert!(GroupElement::new(f64::NAN, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn cartan_examples() {
        let c = GroupElement::identity().to_cartan();
        assert_eq!((c.phi, c.u, c.vartheta), (0.0, 0.0, 0.0));
        assert!(c.is_degenerate());
        let c = GroupElement::a((-2.0f64).exp()).to_cartan();
        assert!(c.phi.abs() < 1e-15 && c.vartheta.abs() < 1e-15);
        assert!((2.0 * c.u + 1.0 - 2.0f64.cosh()).abs() < 1e-13);
        let g = GroupElement::k(1.0) * GroupElement::a((-1.0f64).exp()) * GroupElement::k(2.0);
        let c = g.to_cartan();
        assert!((c.phi - 1.0).abs() < 1e-12, "{c:?}");
        assert!((c.u - (1.0f64.cosh() - 1.0) / 2.0).abs() < 1e-13);
        assert!((c.vartheta - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pi_shift_identities() {
        let (phi, u, th) = (0.7, 1.3, 2.1);
        let g = GroupElement::from_cartan(&CartanCoord {
            phi,
            u,
            vartheta: th,
        });
        let h = GroupElement::from_cartan(&CartanCoord {
            phi: phi + PI,
            u,
            vartheta: th - PI,
        });
        assert!(g.max_abs_diff(&h) < 1e-13);
        let flipped = GroupElement::from_cartan(&CartanCoord {
            phi: phi + PI,
            u,
            vartheta: th,
        });
        assert!(g.max_abs_diff(&-flipped) < 1e-13);
        // k[φ]a[e^ϱ]k[ϑ] = k[φ+π/2]a[e^{−ϱ}]k[ϑ−π/2]
        let rho = rho_of_u(u);
        let lhs = GroupElement::k(phi) * GroupElement::a(rho.exp()) * GroupElement::k(th);
        let rhs = GroupElement::k(phi + PI / 2.0)
            * GroupElement::a((-rho).exp())
            * GroupElement::k(th - PI / 2.0);
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn degenerate_cartan_collapses_rotation() {
        let g = GroupElement::k(0.4) * GroupElement::k(1.1);
        let c = g.to_cartan();
        assert!(c.is_degenerate());
        assert_eq!(c.phi, 0.0);
        assert!((c.vartheta - 1.5).abs() < 1e-14);
        assert!(GroupElement::from_cartan(&c).max_abs_diff(&g) < 1e-14);
    }

    #[test]
    fn u_examples() {
        assert_eq!(GroupElement::identity().u(), 0.0);
        assert!((GroupElement::n(3.0).u() - 9.0 / 4.0).abs() < 1e-15);
        assert!((GroupElement::a(4.0).u() - 9.0 / 16.0).abs() < 1e-15);
        for u in [0.0, 1e-9, 0.3, 5.0, 1e6] {
            assert!((GroupElement::a_u(u).u() - u).abs() <= 1e-12 * (1.0 + u));
        }
    }

    #[test]
    fn theta_formula_examples() {
        assert_eq!(theta_from_cartan(0.0, 2.0).unwrap(), 0.0);
        assert!((theta_from_cartan(PI / 2.0, 0.7).unwrap() - PI / 2.0).abs() < 1e-14);
        assert!(theta_from_cartan(0.3, 0.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let phi = rng.gen_range(0.0..PI);
            let u = 10f64.powf(rng.gen_range(-4.0..4.0));
            let t = theta_from_cartan(phi, u).unwrap();
            let direct = GroupElement::from_cartan(&CartanCoord {
                phi,
                u,
                vartheta: 0.0,
            })
            .to_iwasawa()
            .theta;
            assert!(
                angle_distance(t, direct).abs() < 1e-10,
                "phi={phi} u={u}: {t} vs {direct}"
            );
        }
    }

    #[test]
    fn bruhat_examples() {
        let b = GroupElement::w().to_bruhat().unwrap();
        assert_eq!((b.r1, b.c, b.r2, b.sign), (0.0, 1.0, 0.0, 1));
        let g = GroupElement::new_unchecked(1.0, 1.0, 1.0, 2.0);
        let b = g.to_bruhat().unwrap();
        assert_eq!((b.r1, b.c, b.r2), (1.0, 1.0, 2.0));
        assert!(GroupElement::from_bruhat(&b).max_abs_diff(&g) < 1e-14);
        assert!(matches!(
            GroupElement::n(2.0).to_bruhat(),
            Err(Sl2Error::SmallCell { .. })
        ));
    }

    #[test]
    fn conjugation_examples() {
        let g = GroupElement::a(3.0);
        assert!(g.conjugate_diag(2.0).max_abs_diff(&g) < 1e-15);
        let r = 2.5;
        assert!(
            GroupElement::n(1.5)
                .conjugate_diag(r)
                .max_abs_diff(&GroupElement::n(1.5 / r))
                < 1e-15
        );
        let ar = GroupElement::a(r);
        let g = GroupElement::new_unchecked(2.0, 1.0, 3.0, 2.0);
        let direct = ar.inv() * g * ar;
        assert!(g.conjugate_diag(r).max_abs_diff(&direct) < 1e-14);
        assert!((g.u_skewed(2.0) - g.conjugate_diag(2.0).u()).abs() < 1e-12);
    }

    #[test]
    fn serde_field_names() {
        let s = serde_json::to_string(&IwasawaCoord {
            x: 1.0,
            y: 2.0,
            theta: 0.5,
        })
        .unwrap();
        assert_eq!(s, r#"{"x":1.0,"y":2.0,"theta":0.5}"#);
        let s = serde_json::to_string(&CartanCoord {
            phi: 1.0,
            u: 2.0,
            vartheta: 0.5,
        })
        .unwrap();
        assert_eq!(s, r#"{"phi":1.0,"u":2.0,"vartheta":0.5}"#);
        let g: GroupElement = serde_json::from_str(r#"{"a":1.0,"b":0.0,"c":0.0,"d":1.0}"#).unwrap();
        assert_eq!(g, GroupElement::identity());
    }
}
