//! Integer machinery: enumeration of Γ₀(q) under entry boxes and skewed
//! balls, Dirichlet characters viewed as characters of Γ₀(q), Hecke cosets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::C64;
use crate::sl2::GroupElement;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ArithmeticError {
    #[error("entry bound {0} exceeds 2^62")]
    OverflowGuard(f64),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("matrix is not in Γ₀({q})")]
    NotInGroup { q: u64 },
    #[error("h = {h} is not coprime to the level {q}")]
    Coprimality { h: u64, q: u64 },
    #[error("invalid character: {0}")]
    InvalidCharacter(String),
}

/// An integer 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IntMatrix {
    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        IntMatrix { a, b, c, d }
    }

    pub fn det(&self) -> i128 {
        self.a as i128 * self.d as i128 - self.b as i128 * self.c as i128
    }

    pub fn to_group_element(&self) -> GroupElement {
        GroupElement::new_unchecked(self.a as f64, self.b as f64, self.c as f64, self.d as f64)
    }

    pub fn neg(&self) -> Self {
        IntMatrix::new(-self.a, -self.b, -self.c, -self.d)
    }

    pub fn mul(&self, o: &IntMatrix) -> Self {
        IntMatrix::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    /// Inverse of a determinant-one matrix.
    pub fn inv(&self) -> Self {
        IntMatrix::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn in_gamma0(&self, q: u64) -> bool {
        self.det() == 1 && self.c.rem_euclid(q as i64) == 0
    }

    /// 4u(γ) + 2 = a² + b² + c² + d², exactly.
    pub fn norm_sq(&self) -> i128 {
        [self.a, self.b, self.c, self.d]
            .iter()
            .map(|&x| x as i128 * x as i128)
            .sum()
    }
}

/// Entry constraints for an enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeBounds {
    /// |a| ≤ a, |b| ≤ b, |c| ≤ c, |d| ≤ d.
    Box { a: f64, b: f64, c: f64, d: f64 },
    /// u_R(γ) ≤ y.
    Ball { r: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeQuery {
    pub q: u64,
    pub bounds: LatticeBounds,
}

/// Bounds at or above this are refused.
pub const ENTRY_LIMIT: f64 = 4.611_686_018_427_388e18; // 2^62

impl LatticeQuery {
    pub fn new(q: u64, bounds: LatticeBounds) -> Self {
        LatticeQuery { q, bounds }
    }

    pub fn ball(q: u64, r: f64, y: f64) -> Self {
        LatticeQuery {
            q,
            bounds: LatticeBounds::Ball { r, y },
        }
    }

    pub fn entry_box(q: u64, a: f64, b: f64, c: f64, d: f64) -> Self {
        LatticeQuery {
            q,
            bounds: LatticeBounds::Box { a, b, c, d },
        }
    }

    /// Integer entry bounds (max |a|, |b|, |c|, |d|).
    pub fn entry_bounds(&self) -> Result<[i64; 4], ArithmeticError> {
        if self.q == 0 {
            return Err(ArithmeticError::InvalidQuery("level must be ≥ 1".into()));
        }
        let real = match self.bounds {
            LatticeBounds::Box { a, b, c, d } => [a, b, c, d],
            LatticeBounds::Ball { r, y } => {
                if !(r > 0.0) || !(y >= 0.0) {
                    return Err(ArithmeticError::InvalidQuery(format!(
                        "ball needs R > 0 and Y ≥ 0, got R={r}, Y={y}"
                    )));
                }
                let s = 2.0 * (y + 1.0).sqrt();
                [s, s * r, s / r, s]
            }
        };
        let mut out = [0i64; 4];
        for (o, &x) in out.iter_mut().zip(&real) {
            if x.is_nan() || x < 0.0 {
                return Err(ArithmeticError::InvalidQuery(format!(
                    "bound {x} must be ≥ 0"
                )));
            }
            if x >= ENTRY_LIMIT {
                return Err(ArithmeticError::OverflowGuard(x));
            }
            // tolerate bounds a hair below an integer
            *o = (x * (1.0 + 1e-12) + 1e-12).floor() as i64;
        }
        Ok(out)
    }

    /// The exact membership test beyond the entry box.
    pub fn accepts(&self, m: &IntMatrix) -> bool {
        match self.bounds {
            LatticeBounds::Box { .. } => true,
            LatticeBounds::Ball { r, y } => {
                if r == 1.0 {
                    return (m.norm_sq() - 2) as f64 <= 4.0 * y * (1.0 + 1e-15);
                }
                let (a, b, c, d) = (m.a as f64, m.b as f64, m.c as f64, m.d as f64);
                let v = a * a + (b / r).powi(2) + (c * r).powi(2) + d * d - 2.0;
                v <= 4.0 * y + 1e-12 * (4.0 * y + 2.0)
            }
        }
    }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a as i64
}

/// Inverse of x modulo m > 0, for gcd(x, m) = 1.
fn mod_inverse(x: i64, m: i64) -> i64 {
    let (mut r0, mut r1) = (m as i128, x.rem_euclid(m) as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let qt = r0 / r1;
        (r0, r1) = (r1, r0 - qt * r1);
        (s0, s1) = (s1, s0 - qt * s1);
    }
    s0.rem_euclid(m as i128) as i64
}

/// Visits every element of Γ₀(q) satisfying the query, each once, in
/// ascending (c, d, a) order.
pub fn for_each_gamma0<V: FnMut(IntMatrix)>(
    query: &LatticeQuery,
    mut visit: V,
) -> Result<(), ArithmeticError> {
    let [ab, bb, cb, db] = query.entry_bounds()?;
    let q = query.q as i64;
    let cmax = cb - cb % q;
    let mut c = -cmax;
    while c <= cmax {
        if c == 0 {
            // a = d = ±1
            for s in [-1i64, 1] {
                if ab < 1 || db < 1 {
                    continue;
                }
                for b in -bb..=bb {
                    let m = IntMatrix::new(s, b, 0, s);
                    if query.accepts(&m) {
                        visit(m);
                    }
                }
            }
            c += q;
            continue;
        }
        let cm = c.abs();
        for d in -db..=db {
            if gcd(c, d) != 1 {
                continue;
            }
            // a d ≡ 1 (mod |c|)
            let r = if cm == 1 { 0 } else { mod_inverse(d, cm) };
            let mut a = -ab + (r - (-ab)).rem_euclid(cm);
            while a <= ab {
                let num = a as i128 * d as i128 - 1;
                let b = (num / c as i128) as i64;
                if b.abs() <= bb {
                    let m = IntMatrix::new(a, b, c, d);
                    debug_assert_eq!(m.det(), 1);
                    if query.accepts(&m) {
                        visit(m);
                    }
                }
                a += cm;
            }
        }
        c += q;
    }
    Ok(())
}

pub fn enumerate_gamma0(query: &LatticeQuery) -> Result<Vec<IntMatrix>, ArithmeticError> {
    let mut out = Vec::new();
    for_each_gamma0(query, |m| out.push(m))?;
    Ok(out)
}

/// Counts split as b0 = {b = 0}, c0 = {c = 0, b ≠ 0}, bc = the rest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSplit {
    pub total: u64,
    pub b0: u64,
    pub c0: u64,
    pub bc: u64,
}

pub fn count_gamma0(query: &LatticeQuery) -> Result<CountSplit, ArithmeticError> {
    let mut s = CountSplit::default();
    for_each_gamma0(query, |m| {
        s.total += 1;
        if m.b == 0 {
            s.b0 += 1;
        } else if m.c == 0 {
            s.c0 += 1;
        } else {
            s.bc += 1;
        }
    })?;
    Ok(s)
}

/// Kronecker symbol (a/n).
pub fn kronecker(a: i64, n: i64) -> i32 {
    if n == 0 {
        return if a.abs() == 1 { 1 } else { 0 };
    }
    let mut t = 1;
    let mut n = n;
    if n < 0 {
        n = -n;
        if a < 0 {
            t = -t;
        }
    }
    let v = n.trailing_zeros();
    n >>= v;
    if v > 0 {
        if a % 2 == 0 {
            return 0;
        }
        if v % 2 == 1 && matches!(a.rem_euclid(8), 3 | 5) {
            t = -t;
        }
    }
    // Jacobi symbol, n odd positive
    let mut a = a.rem_euclid(n);
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if matches!(n % 8, 3 | 5) {
                t = -t;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            t = -t;
        }
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacterVariant {
    Principal,
    /// n ↦ (D/n) on units.
    Kronecker(i64),
    /// Values on residues 0..q.
    Table(Vec<C64>),
}

/// A Dirichlet character mod q, acting on Γ₀(q) through the d entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletCharacter {
    pub q: u64,
    pub variant: CharacterVariant,
    /// χ(−1) = (−1)^κ.
    pub parity: u8,
    values: Vec<C64>,
}

impl DirichletCharacter {
    pub fn principal(q: u64) -> Self {
        let values = (0..q.max(1))
            .map(|n| unit(n as i64, q))
            .map(|u| C64::new(u as u8 as f64, 0.0))
            .collect();
        DirichletCharacter {
            q,
            variant: CharacterVariant::Principal,
            parity: 0,
            values,
        }
    }

    pub fn kronecker(disc: i64, q: u64) -> Result<Self, ArithmeticError> {
        let values: Vec<C64> = (0..q as i64)
            .map(|n| {
                if unit(n, q) {
                    C64::new(kronecker(disc, n) as f64, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        // periodicity mod q: compare against n + q and n + 2q
        for n in 1..q as i64 {
            if unit(n, q) {
                for shift in [q as i64, 2 * q as i64] {
                    if kronecker(disc, n + shift) as f64 != values[n as usize].re {
                        return Err(ArithmeticError::InvalidCharacter(format!(
                            "(D/·) with D = {disc} is not periodic mod {q}"
                        )));
                    }
                }
            }
        }
        DirichletCharacter::finish(q, CharacterVariant::Kronecker(disc), values)
    }

    pub fn table(q: u64, values: Vec<C64>) -> Result<Self, ArithmeticError> {
        if values.len() != q as usize {
            return Err(ArithmeticError::InvalidCharacter(format!(
                "need {q} values, got {}",
                values.len()
            )));
        }
        DirichletCharacter::finish(q, CharacterVariant::Table(values.clone()), values)
    }

    fn finish(
        q: u64,
        variant: CharacterVariant,
        values: Vec<C64>,
    ) -> Result<Self, ArithmeticError> {
        let bad = |m: String| Err(ArithmeticError::InvalidCharacter(m));
        if q == 0 {
            return bad("modulus must be ≥ 1".into());
        }
        let qi = q as i64;
        for n in 0..qi {
            let v = values[n as usize];
            if unit(n, q) {
                if (v.norm() - 1.0).abs() > 1e-12 {
                    return bad(format!("|χ({n})| ≠ 1"));
                }
            } else if v.norm() > 1e-12 {
                return bad(format!("χ({n}) ≠ 0 although gcd({n}, {q}) > 1"));
            }
        }
        if (values[(1 % qi) as usize] - 1.0).norm() > 1e-12 {
            return bad("χ(1) ≠ 1".into());
        }
        for m in 0..qi {
            for n in 0..qi {
                let lhs = values[((m * n) % qi) as usize];
                if (lhs - values[m as usize] * values[n as usize]).norm() > 1e-12 {
                    return bad(format!("not multiplicative at ({m}, {n})"));
                }
            }
        }
        let m1 = values[(qi - 1) as usize];
        let parity = if (m1 - 1.0).norm() < 1e-12 {
            0
        } else if (m1 + 1.0).norm() < 1e-12 {
            1
        } else {
            return bad(format!("χ(−1) = {m1} is not ±1"));
        };
        Ok(DirichletCharacter {
            q,
            variant,
            parity,
            values,
        })
    }

    pub fn is_principal(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 || v.re == 1.0)
            && self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn eval(&self, n: i64) -> C64 {
        self.values[n.rem_euclid(self.q as i64) as usize]
    }

    /// χ(γ) = χ(d).
    pub fn eval_matrix(&self, g: &IntMatrix) -> Result<C64, ArithmeticError> {
        if g.c.rem_euclid(self.q as i64) != 0 {
            return Err(ArithmeticError::NotInGroup { q: self.q });
        }
        Ok(self.eval(g.d))
    }
}

fn unit(n: i64, q: u64) -> bool {
    gcd(n, q as i64) == 1
}

pub fn chi_eval(chi: &DirichletCharacter, g: &IntMatrix) -> Result<C64, ArithmeticError> {
    chi.eval_matrix(g)
}

/// An upper-triangular representative (a b; 0 d) with ad = h, 0 ≤ b < d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeckeCoset {
    pub a: u64,
    pub b: u64,
    pub d: u64,
}

impl HeckeCoset {
    /// h^{−1/2}(a b; 0 d).
    pub fn scaled_matrix(&self) -> GroupElement {
        let s = ((self.a * self.d) as f64).sqrt().recip();
        GroupElement::new_unchecked(self.a as f64 * s, self.b as f64 * s, 0.0, self.d as f64 * s)
    }
}

/// Cosets ordered by d, then b.
pub fn hecke_cosets(h: u64) -> Vec<HeckeCoset> {
    let mut out = Vec::new();
    for d in 1..=h {
        if h % d == 0 {
            for b in 0..d {
                out.push(HeckeCoset { a: h / d, b, d });
            }
        }
    }
    out
}

pub fn sigma1(h: u64) -> u64 {
    (1..=h).filter(|d| h % d == 0).sum()
}

/// (𝒯_h f)(g) = h^{−1/2} Σ_{ad=h} χ(a) Σ_{b mod d} f(h^{−1/2}(a b; 0 d) g).
pub fn apply_hecke<F: Fn(&GroupElement) -> C64 + ?Sized>(
    f: &F,
    h: u64,
    chi: &DirichletCharacter,
    g: &GroupElement,
) -> Result<C64, ArithmeticError> {
    check_hecke_index(h, chi)?;
    let mut s = C64::new(0.0, 0.0);
    for cos in hecke_cosets(h) {
        let w = chi.eval(cos.a as i64);
        if w == C64::new(0.0, 0.0) {
            continue;
        }
        s += w * f(&(cos.scaled_matrix() * *g));
    }
    Ok(s / (h as f64).sqrt())
}

pub fn check_hecke_index(h: u64, chi: &DirichletCharacter) -> Result<(), ArithmeticError> {
    if h == 0 {
        return Err(ArithmeticError::InvalidQuery("h must be ≥ 1".into()));
    }
    if !chi.is_principal() && gcd(h as i64, chi.q as i64) != 1 {
        return Err(ArithmeticError::Coprimality { h, q: chi.q });
    }
    Ok(())
}

/// Primes dividing n.
pub fn prime_divisors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            out.push(p);
            while m % p == 0 {
                m /= p;
            }
        }
        p += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

/// q ∏_{p|q}(1 + 1/p), the index of Γ₀(q) in SL₂(ℤ).
pub fn gamma0_index(q: u64) -> f64 {
    prime_divisors(q)
        .iter()
        .fold(q as f64, |acc, &p| acc * (1.0 + 1.0 / p as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn brute(q: u64, b: [i64; 4]) -> Vec<IntMatrix> {
        let mut out = Vec::new();
        for c in -b[2]..=b[2] {
            if c.rem_euclid(q as i64) != 0 {
                continue;
            }
            for d in -b[3]..=b[3] {
                for a in -b[0]..=b[0] {
                    for bb in -b[1]..=b[1] {
                        let m = IntMatrix::new(a, bb, c, d);
                        if m.det() == 1 {
                            out.push(m);
                        }
                    }
                }
            }
        }
        out
    }

    fn sorted(mut v: Vec<IntMatrix>) -> Vec<(i64, i64, i64, i64)> {
        let mut t: Vec<_> = v.drain(..).map(|m| (m.a, m.b, m.c, m.d)).collect();
        t.sort();
        t
    }

    #[test]
    fn small_balls() {
        let q1 = enumerate_gamma0(&LatticeQuery::ball(1, 1.0, 0.0)).unwrap();
        assert_eq!(
            sorted(q1),
            sorted(vec![
                IntMatrix::new(1, 0, 0, 1),
                IntMatrix::new(-1, 0, 0, -1),
                IntMatrix::new(0, -1, 1, 0),
                IntMatrix::new(0, 1, -1, 0)
            ])
        );
        assert_eq!(
            enumerate_gamma0(&LatticeQuery::ball(2, 1.0, 0.0))
                .unwrap()
                .len(),
            2
        );
        let s = count_gamma0(&LatticeQuery::ball(1, 1.0, 0.0)).unwrap();
        assert_eq!(
            s,
            CountSplit {
                total: 4,
                b0: 2,
                c0: 0,
                bc: 2
            }
        );
    }

    #[test]
    fn unit_box_has_twenty_elements() {
        let v = enumerate_gamma0(&LatticeQuery::entry_box(1, 1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(v.len(), brute(1, [1, 1, 1, 1]).len());
        assert_eq!(v.len(), 20);
    }

    #[test]
    fn matches_brute_force() {
        for q in [1u64, 2, 3, 5, 12] {
            for b in [[3i64, 5, 7, 2], [6, 2, 6, 6], [0, 4, 9, 1]] {
                let query =
                    LatticeQuery::entry_box(q, b[0] as f64, b[1] as f64, b[2] as f64, b[3] as f64);
                let v = enumerate_gamma0(&query).unwrap();
                let mut seen = std::collections::HashSet::new();
                for m in &v {
                    assert!(m.in_gamma0(q));
                    assert!(seen.insert(*m), "duplicate {m:?}");
                }
                assert_eq!(sorted(v), sorted(brute(q, b)), "q={q} b={b:?}");
            }
        }
    }

    #[test]
    fn ordering_is_c_d_a() {
        let v = enumerate_gamma0(&LatticeQuery::entry_box(2, 5.0, 5.0, 4.0, 5.0)).unwrap();
        for w in v.windows(2) {
            assert!((w[0].c, w[0].d, w[0].a, w[0].b) < (w[1].c, w[1].d, w[1].a, w[1].b));
        }
    }

    #[test]
    fn skewed_ball_filter() {
        let query = LatticeQuery::ball(3, 2.5, 6.0);
        let v = enumerate_gamma0(&query).unwrap();
        let all = enumerate_gamma0(&LatticeQuery::entry_box(3, 10.0, 30.0, 10.0, 10.0)).unwrap();
        let want: Vec<_> = all
            .into_iter()
            .filter(|m| m.to_group_element().u_skewed(2.5) <= 6.0 + 1e-12)
            .collect();
        assert_eq!(sorted(v), sorted(want));
    }

    #[test]
    fn split_partitions_total() {
        let s = count_gamma0(&LatticeQuery::ball(5, 1.0, 25.0)).unwrap();
        assert_eq!(s.total, s.b0 + s.c0 + s.bc);
        assert!(s.bc > 0 && s.b0 > 0 && s.c0 > 0);
    }

    #[test]
    fn overflow_guard() {
        let r = enumerate_gamma0(&LatticeQuery::entry_box(1, 1.0, 1e19, 1.0, 1.0));
        assert!(matches!(r, Err(ArithmeticError::OverflowGuard(_))));
    }

    #[test]
    fn hyperbolic_count_grows_like_area() {
        // #{γ ∈ SL₂(ℤ) : ‖γ‖² ≤ T} ~ 6T and ‖γ‖² = 4u + 2
        let mut ratios = Vec::new();
        for x in [4.0f64, 8.0, 16.0, 32.0] {
            let n = count_gamma0(&LatticeQuery::ball(1, 1.0, x * x))
                .unwrap()
                .total as f64;
            ratios.push(n / (x * x));
        }
        assert!((ratios[3] - 24.0).abs() < 0.05 * 24.0, "{ratios:?}");
    }

    #[test]
    fn kronecker_values() {
        assert_eq!(kronecker(-4, 3), -1);
        assert_eq!(kronecker(-4, 5), 1);
        assert_eq!(kronecker(5, 2), -1);
        assert_eq!(kronecker(-3, 2), -1);
        assert_eq!(kronecker(8, 3), -1);
        assert_eq!(kronecker(2, 7), 1);
        assert_eq!(kronecker(-1, -1), -1);
        // Jacobi reciprocity spot check against Euler's criterion for odd primes
        for p in [3i64, 5, 7, 11, 13] {
            for a in 1..p {
                let e = (0..(p - 1) / 2).fold(1i64, |acc, _| acc * a % p);
                let euler = if e == 1 { 1 } else { -1 };
                assert_eq!(kronecker(a, p), euler, "a={a} p={p}");
            }
        }
    }

    #[test]
    fn characters() {
        let chi = DirichletCharacter::kronecker(-4, 4).unwrap();
        assert_eq!(chi.parity, 1);
        assert_eq!(
            chi.eval_matrix(&IntMatrix::new(1, 0, 4, 3)).unwrap(),
            C64::new(-1.0, 0.0)
        );
        assert_eq!(
            chi.eval_matrix(&IntMatrix::new(-1, 0, 0, -1)).unwrap(),
            C64::new(-1.0, 0.0)
        );
        assert!(chi.eval_matrix(&IntMatrix::new(1, 0, 2, 1)).is_err());
        let p = DirichletCharacter::principal(6);
        assert!(p.is_principal());
        assert_eq!(p.eval(5), C64::new(1.0, 0.0));
        assert_eq!(p.eval(4), C64::new(0.0, 0.0));
        assert_eq!(
            p.eval_matrix(&IntMatrix::new(-1, 0, 0, -1)).unwrap(),
            C64::new(1.0, 0.0)
        );
        // order-4 character mod 5: 2 ↦ i
        let i = C64::new(0.0, 1.0);
        let t = DirichletCharacter::table(
            5,
            vec![
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                i,
                -i,
                C64::new(-1.0, 0.0),
            ],
        )
        .unwrap();
        assert_eq!(t.parity, 1);
        assert!(!t.is_principal());
        assert!(DirichletCharacter::table(
            5,
            vec![
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                i,
                i,
                C64::new(-1.0, 0.0)
            ]
        )
        .is_err());
        assert!(DirichletCharacter::kronecker(-4, 3).is_err());
        let k3 = DirichletCharacter::kronecker(-3, 3).unwrap();
        assert_eq!(k3.parity, 1);
        assert!(DirichletCharacter::kronecker(-4, 12).is_ok());
    }

    #[test]
    fn hecke_coset_counts() {
        assert_eq!(hecke_cosets(1), vec![HeckeCoset { a: 1, b: 0, d: 1 }]);
        assert_eq!(
            hecke_cosets(2),
            vec![
                HeckeCoset { a: 2, b: 0, d: 1 },
                HeckeCoset { a: 1, b: 0, d: 2 },
                HeckeCoset { a: 1, b: 1, d: 2 }
            ]
        );
        assert_eq!(hecke_cosets(6).len(), 12);
        for h in (1..=10_000u64).step_by(97) {
            assert_eq!(hecke_cosets(h).len() as u64, sigma1(h));
        }
        for c in hecke_cosets(12) {
            assert!((c.scaled_matrix().det() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hecke_examples() {
        let chi = DirichletCharacter::principal(1);
        let nu = C64::new(0.0, 0.7);
        let f = |g: &GroupElement| crate::harmonics::phi_basic(g, nu, 0);
        let g = GroupElement::n(0.3) * GroupElement::a(1.2);
        assert!((apply_hecke(&f, 1, &chi, &g).unwrap() - f(&g)).norm() < 1e-15);
        let v = apply_hecke(&f, 2, &chi, &GroupElement::identity()).unwrap();
        let two = C64::new(2.0, 0.0);
        let want = (two.powc(nu + 0.5) + two.powc(-nu - 0.5) * 2.0) / 2f64.sqrt();
        assert!((v - want).norm() < 1e-14);
        let k4 = DirichletCharacter::kronecker(-4, 4).unwrap();
        assert!(matches!(
            apply_hecke(&f, 2, &k4, &g),
            Err(ArithmeticError::Coprimality { .. })
        ));
    }

    #[test]
    fn hecke_multiplicative_on_periodic_fields() {
        // f(n[1]g) = f(g) is what makes 𝒯_m𝒯_n = 𝒯_{mn} for coprime m, n
        let f = |g: &GroupElement| {
            let w = g.to_iwasawa();
            C64::new(
                (2.0 * PI * w.x).cos() * (-w.y).exp() * w.y.sqrt(),
                (4.0 * PI * w.x).sin() * w.y,
            ) * C64::from_polar(1.0, 2.0 * w.theta)
        };
        let chi = DirichletCharacter::kronecker(-4, 4).unwrap();
        for (m, n) in [(3u64, 5u64), (5, 9), (7, 3)] {
            for g in [
                GroupElement::n(0.2) * GroupElement::a(0.7),
                GroupElement::k(1.0) * GroupElement::a(2.0),
            ] {
                let inner = |h: &GroupElement| apply_hecke(&f, n, &chi, h).unwrap();
                let lhs = apply_hecke(&inner, m, &chi, &g).unwrap();
                let rhs = apply_hecke(&f, m * n, &chi, &g).unwrap();
                assert!((lhs - rhs).norm() < 1e-10, "m={m} n={n}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn index_values() {
        assert_eq!(gamma0_index(1), 1.0);
        assert!((gamma0_index(12) - 24.0).abs() < 1e-12);
        assert!((gamma0_index(5) - 6.0).abs() < 1e-12);
    }
}
