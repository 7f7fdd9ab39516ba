//! Property tests of the module invariants.

use std::f64::consts::PI;

use proptest::prelude::*;

use sl2kern::arithmetic::{
    count_gamma0, enumerate_gamma0, hecke_cosets, prime_divisors, DirichletCharacter, IntMatrix,
    LatticeQuery,
};
use sl2kern::harmonics::{phi_two_type, HarmonicsError};
use sl2kern::kernel::{
    automorphic_kernel, make_bump, unskew_with, weighted_discrepancy, KernelWeight, Lattice,
    Parity, PointFunctional,
};
use sl2kern::majorants::convolution_support;
use sl2kern::numerics::{integrate_1d, integrate_g, QuadratureSpec, SupportHint, C64};
use sl2kern::sl2::{CartanCoord, GroupElement};

fn element() -> impl Strategy<Value = GroupElement> {
    // a random (a, b, c) with a ≠ 0 fixes d
    (-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0).prop_filter_map("degenerate", |(a, b, c)| {
        if a.abs() < 0.1 {
            return None;
        }
        let d = (1.0 + b * c) / a;
        (d.abs() <= 10.0).then(|| GroupElement::new(a, b, c, d).unwrap())
    })
}

fn close(g: &GroupElement, h: &GroupElement, tol: f64) -> bool {
    g.max_abs_diff(h) <= tol * (1.0 + g.entries().iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn iwasawa_and_cartan_round_trip(g in element()) {
        prop_assert!(close(&GroupElement::from_iwasawa(&g.to_iwasawa()), &g, 1e-10));
        prop_assert!(close(&GroupElement::from_cartan(&g.to_cartan()), &g, 1e-10));
    }

    #[test]
    fn u_is_bi_k_invariant(g in element(), t1 in 0.0..(2.0 * PI), t2 in 0.0..(2.0 * PI)) {
        let h = GroupElement::k(t1) * g * GroupElement::k(t2);
        prop_assert!((h.u() - g.u()).abs() <= 1e-12 * (1.0 + g.u()));
    }

    #[test]
    fn cosh_rho_is_2u_plus_1(g in element()) {
        let c = g.to_cartan();
        prop_assert!((c.rho().cosh() - (2.0 * g.u() + 1.0)).abs() <= 1e-10 * (1.0 + g.u()));
    }

    #[test]
    fn pi_shift(phi in 0.0..(2.0 * PI), u in 0.0f64..50.0, vt in 0.0..(2.0 * PI)) {
        let g = GroupElement::from_cartan(&CartanCoord { phi, u, vartheta: vt });
        let one = GroupElement::from_cartan(&CartanCoord { phi: phi + PI, u, vartheta: vt });
        let both = GroupElement::from_cartan(&CartanCoord { phi: phi + PI, u, vartheta: vt - PI });
        let minus = GroupElement::new_unchecked(-g.a, -g.b, -g.c, -g.d);
        prop_assert!(close(&one, &minus, 1e-12));
        prop_assert!(close(&both, &g, 1e-12));
    }

    #[test]
    fn skewed_u_is_conjugated_u(g in element(), r in 0.125f64..8.0) {
        let h = GroupElement::a(r).inv() * g * GroupElement::a(r);
        prop_assert!((g.u_skewed(r) - h.u()).abs() <= 1e-10 * (1.0 + h.u()));
    }

    #[test]
    fn parity_error_exactly_on_mixed_parity(l1 in -6i32..=6, l2 in -6i32..=6, u in 0.1f64..20.0) {
        let r = phi_two_type(u, C64::new(0.2, 0.0), l1, l2, &QuadratureSpec::with_tol(1e-6, 1e-12));
        let mixed = (l1 - l2).rem_euclid(2) == 1;
        prop_assert_eq!(matches!(r, Err(HarmonicsError::Parity { .. })), mixed);
        if !mixed {
            prop_assert!(r.is_ok());
        }
    }

    #[test]
    fn enumeration_is_exact_and_in_gamma0(q in 1u64..=12, b in proptest::array::uniform4(0i64..=9)) {
        let bf = b.map(|x| x as f64);
        let got = enumerate_gamma0(&LatticeQuery::entry_box(q, bf[0], bf[1], bf[2], bf[3])).unwrap();
        for m in &got {
            prop_assert_eq!(m.det(), 1);
            prop_assert_eq!(m.c % q as i64, 0);
        }
        let mut brute = Vec::new();
        for a in -b[0]..=b[0] {
            for bb in -b[1]..=b[1] {
                for c in -b[2]..=b[2] {
                    for d in -b[3]..=b[3] {
                        if a * d - bb * c == 1 && c % q as i64 == 0 {
                            brute.push(IntMatrix::new(a, bb, c, d));
                        }
                    }
                }
            }
        }
        let mut got = got;
        let key = |m: &IntMatrix| (m.a, m.b, m.c, m.d);
        got.sort_by_key(key);
        brute.sort_by_key(key);
        prop_assert_eq!(&got, &brute);
        let n = count_gamma0(&LatticeQuery::entry_box(q, bf[0], bf[1], bf[2], bf[3])).unwrap();
        prop_assert_eq!(n.total as usize, brute.len());
        prop_assert_eq!(n.b0 + n.c0 + n.bc, n.total);
    }

    #[test]
    fn hecke_coset_count_is_sigma(h in 1u64..=10_000) {
        // σ₁ from the factorization
        let mut sigma = 1u64;
        let mut n = h;
        for p in prime_divisors(h) {
            let mut pk = 1u64;
            let mut s = 1u64;
            while n % p == 0 {
                n /= p;
                pk *= p;
                s += pk;
            }
            sigma *= s;
        }
        prop_assert_eq!(hecke_cosets(h).len() as u64, sigma);
    }

    #[test]
    fn convolution_support_bounds_products(u1 in 0.0f64..40.0, u2 in 0.0f64..40.0, phi in 0.0..(2.0 * PI)) {
        let g = GroupElement::a_u(u1) * GroupElement::k(phi) * GroupElement::a_u(u2);
        let top = convolution_support(u1, u2);
        prop_assert!(g.u() <= top * (1.0 + 1e-12) + 1e-12);
        // attained at φ = 0
        let g0 = GroupElement::a_u(u1) * GroupElement::a_u(u2);
        prop_assert!((g0.u() - top).abs() <= 1e-9 * (1.0 + top));
    }
}

fn bump_weight(parity: [Parity; 3]) -> KernelWeight {
    KernelWeight::new(make_bump(&[3.0, 2.0, 3.0], 0.1, 2, &parity).unwrap()).unwrap()
}

fn random_gamma(seed: u64, q: u64) -> IntMatrix {
    sl2kern::sampling::random_gamma0(&mut sl2kern::sampling::rng(seed), q, 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_automorphy(seed in 0u64..1_000_000, x in -1.0f64..1.0, y in 0.5f64..2.0, t in 0.0..(2.0 * PI)) {
        let q = 3;
        let chi = DirichletCharacter::kronecker(-3, q).unwrap();
        let lat = Lattice::with_character(chi.clone());
        let f = bump_weight([Parity::Odd, Parity::Even, Parity::Even]);
        let tau1 = GroupElement::n(x) * GroupElement::a(y);
        let tau2 = GroupElement::k(t) * GroupElement::a(1.0 / y);
        let (g1, g2) = (random_gamma(seed, q), random_gamma(seed ^ 0x55, q));
        let base = automorphic_kernel(&f, &lat, &tau1, &tau2).unwrap().value;
        let moved = automorphic_kernel(&f, &lat, &(g1.to_group_element() * tau1), &(g2.to_group_element() * tau2))
            .unwrap()
            .value;
        let factor = chi.eval_matrix(&g1).unwrap().conj() * chi.eval_matrix(&g2).unwrap();
        prop_assert!((moved - factor * base).norm() <= 1e-10 * base.norm().max(1.0),
            "{moved} vs {}", factor * base);
    }

    #[test]
    fn unskewing_is_exact(r1 in 0.125f64..8.0, r2 in 0.125f64..8.0, x in -1.0f64..1.0) {
        let f = bump_weight([Parity::Even; 3]);
        let lat = Lattice::gamma0(3);
        let a1 = PointFunctional::delta(GroupElement::n(x));
        let a2 = PointFunctional::new(vec![
            (GroupElement::identity(), C64::new(1.0, 0.0)),
            (GroupElement::a(1.5), C64::new(0.0, 0.5)),
        ]);
        let spec = QuadratureSpec::with_tol(1e-9, 1e-13);
        let lhs = weighted_discrepancy(&a1, &a2, &f, &lat, &spec).unwrap();
        let (g, b1, b2) = unskew_with(&f, &a1, &a2, r1, r2).unwrap();
        let rhs = weighted_discrepancy(&b1, &b2, &g, &lat, &spec).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn quadrature_is_thread_count_independent() {
    let f = |x: f64| C64::new((3.0 * x).sin() * (-x * x).exp(), x.cos());
    let spec = QuadratureSpec::with_tol(1e-12, 1e-15);
    let g = |h: &GroupElement| {
        let w = (-(h.u() * h.u())).exp();
        C64::new(w * (1.0 + h.a * h.b), w * h.c)
    };
    let hint = SupportHint::Radial { u_max: 8.0 };
    let mut seen = Vec::new();
    for n in [1, 2, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap();
        let (a, b) = pool.install(|| {
            (
                integrate_1d(&f, -3.0, 4.0, &spec).unwrap().value,
                integrate_g(&g, &hint, &spec).unwrap().value,
            )
        });
        seen.push((
            a.re.to_bits(),
            a.im.to_bits(),
            b.re.to_bits(),
            b.im.to_bits(),
        ));
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]), "{seen:?}");
}

#[test]
fn separable_group_integral_is_a_product() {
    // F(n[x]a[y]k[θ]) = f(x)g(y)h(θ) integrates to (1/2π)∫f ∫g/y² ∫h dθ/2π
    let spec = QuadratureSpec::with_tol(1e-9, 1e-15);
    let bump = |t: f64, lo: f64, hi: f64| {
        if t <= lo || t >= hi {
            0.0
        } else {
            (-1.0 / ((t - lo) * (hi - t))).exp()
        }
    };
    let fx = |x: f64| bump(x, -1.0, 1.0);
    let gy = |y: f64| bump(y, 0.5, 2.0);
    let hth = |t: f64| 1.0 + 0.5 * t.cos();
    let field = |h: &GroupElement| {
        let c = h.to_iwasawa();
        C64::new(fx(c.x) * gy(c.y) * hth(c.theta), 0.0)
    };
    let whole = integrate_g(
        &field,
        &SupportHint::Iwasawa {
            x: (-1.0, 1.0),
            y: (0.5, 2.0),
        },
        &spec,
    )
    .unwrap();
    let ix = integrate_1d(&|x| C64::new(fx(x), 0.0), -1.0, 1.0, &spec)
        .unwrap()
        .value
        .re;
    let iy = integrate_1d(&|y| C64::new(gy(y) / (y * y), 0.0), 0.5, 2.0, &spec)
        .unwrap()
        .value
        .re;
    let it = integrate_1d(&|t| C64::new(hth(t), 0.0), 0.0, 2.0 * PI, &spec)
        .unwrap()
        .value
        .re
        / (2.0 * PI);
    let product = ix * iy * it / (2.0 * PI);
    assert!(
        (whole.value.re - product).abs() <= 1e-7 * product,
        "{} vs {product}",
        whole.value.re
    );
}
