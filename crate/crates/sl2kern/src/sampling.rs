//! Seeded random elements for property checks and experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arithmetic::IntMatrix;
use crate::sl2::GroupElement;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// g with |a|, |b|, |c|, |d| < range, a bounded away from 0.
pub fn random_element(rng: &mut SampleRng, range: f64) -> GroupElement {
    loop {
        let a: f64 = rng.gen_range(-range..range);
        let b: f64 = rng.gen_range(-range..range);
        let c: f64 = rng.gen_range(-range..range);
        if a.abs() < 1e-3 {
            continue;
        }
        let d = (1.0 + b * c) / a;
        if d.abs() <= range {
            return GroupElement::new_unchecked(a, b, c, d);
        }
    }
}

/// n[x]a[y]k[θ] with |x| ≤ 1, y ∈ [1/y_range, y_range].
pub fn random_iwasawa(rng: &mut SampleRng, y_range: f64) -> GroupElement {
    let x: f64 = rng.gen_range(-1.0..1.0);
    let ly: f64 = rng.gen_range(-y_range.ln()..y_range.ln());
    let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    GroupElement::n(x) * GroupElement::a(ly.exp()) * GroupElement::k(t)
}

/// A word of `len` random generators of Γ₀(q): n[±1], the lower unipotent
/// (1 0; ±q 1), and −I.
pub fn random_gamma0(rng: &mut SampleRng, q: u64, len: usize) -> IntMatrix {
    let q = q as i64;
    let gens = [
        IntMatrix::new(1, 1, 0, 1),
        IntMatrix::new(1, -1, 0, 1),
        IntMatrix::new(1, 0, q, 1),
        IntMatrix::new(1, 0, -q, 1),
        IntMatrix::new(-1, 0, 0, -1),
    ];
    let mut m = IntMatrix::new(1, 0, 0, 1);
    for _ in 0..len {
        m = m.mul(&gens[rng.gen_range(0..gens.len())]);
    }
    m
}

/// Uniform in [lo, hi] on a log scale.
pub fn log_uniform(rng: &mut SampleRng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..=hi.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_valid() {
        let mut r = rng(3);
        for _ in 0..100 {
            assert!((random_element(&mut r, 4.0).det() - 1.0).abs() < 1e-12);
            assert!((random_iwasawa(&mut r, 3.0).det() - 1.0).abs() < 1e-12);
            let g = random_gamma0(&mut r, 6, 5);
            assert!(g.in_gamma0(6));
        }
        let a: Vec<_> = (0..5).map(|_| random_element(&mut rng(9), 2.0)).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }
}
