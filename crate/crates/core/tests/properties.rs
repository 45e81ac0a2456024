use std::collections::BTreeMap;

use proptest::prelude::*;
use virloe::deform::build_g;
use virloe::poly::{fmt_q, parse_q, q, qr};
use virloe::series::{compose, invert, schwarzian, Laurent};
use virloe::{Basepoint, Germ, Poly, Q};

fn rat() -> impl Strategy<Value = Q> {
    (-6i64..=6, 1i64..=5).prop_map(|(n, d)| qr(n, d))
}

fn germ(bp: Basepoint, n: usize) -> impl Strategy<Value = Germ> {
    let scale = match bp {
        Basepoint::Origin => (1i64..=4, 1i64..=3).prop_map(|(a, b)| qr(a, b)).boxed(),
        Basepoint::Infinity => Just(q(1)).boxed(),
    };
    (proptest::collection::vec(rat(), n), scale).prop_map(move |(cs, s)| {
        let coeffs: BTreeMap<i32, Poly> =
            bp.gradings(n).into_iter().zip(cs).map(|(m, c)| (m, Poly::constant(c))).collect();
        Germ::new(bp, n, Poly::constant(s), coeffs).unwrap()
    })
}

fn any_germ(n: usize) -> impl Strategy<Value = Germ> {
    prop_oneof![germ(Basepoint::Origin, n), germ(Basepoint::Infinity, n)]
}

fn pair(n: usize) -> impl Strategy<Value = (Germ, Germ)> {
    prop_oneof![
        (germ(Basepoint::Origin, n), germ(Basepoint::Origin, n)),
        (germ(Basepoint::Infinity, n), germ(Basepoint::Infinity, n)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn inverse_is_two_sided(f in any_germ(6)) {
        let g = invert(&f).unwrap();
        prop_assert!(compose(&f, &g).unwrap().is_identity());
        prop_assert!(compose(&g, &f).unwrap().is_identity());
    }

    #[test]
    fn composition_is_associative((f, g) in pair(5), s in rat()) {
        let h = Germ::from_q(f.basepoint, 5, &[(if f.basepoint == Basepoint::Origin { 2 } else { -2 }, s)]).unwrap();
        let left = compose(&compose(&f, &g).unwrap(), &h).unwrap();
        let right = compose(&f, &compose(&g, &h).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn deformation_reverses_composition((f, g) in pair(4)) {
        let lhs = build_g(&compose(&f, &g).unwrap(), 4).unwrap();
        let rhs = build_g(&f, 4).unwrap().compose(&build_g(&g, 4).unwrap()).unwrap();
        prop_assert_eq!(lhs.unipotent, rhs.unipotent);
        prop_assert_eq!(lhs.dilation, rhs.dilation);
    }

    #[test]
    fn rationals_roundtrip(x in rat(), y in rat()) {
        let v = x * y;
        prop_assert_eq!(parse_q(&fmt_q(&v)), Some(v));
    }
}

/// `z/(1 + az)` is Möbius: its Schwarzian vanishes to the precision carried.
#[test]
fn mobius_has_no_schwarzian() {
    let a = qr(-2, 3);
    let n = 8;
    let coeffs: Vec<(i32, Q)> = (1..=n as i32).map(|m| (m, num_traits::pow(-a.clone(), m as usize))).collect();
    let f = Germ::from_q(Basepoint::Origin, n, &coeffs).unwrap();
    let s: Laurent = schwarzian(&f).unwrap();
    for (_, c) in s.terms() {
        assert!(c.is_zero());
    }
    assert!(s.precision() >= n as i32 - 2);
    // z + z²: Sf = −6/(1 + 2z)²
    let g = Germ::from_q(Basepoint::Origin, n, &[(1, q(1))]).unwrap();
    let s = schwarzian(&g).unwrap();
    assert_eq!(s.coeff(0).unwrap(), Poly::int(-6));
    assert_eq!(s.coeff(1).unwrap(), Poly::int(24));
}

#[test]
fn decimal_inputs_are_exact() {
    assert_eq!(parse_q("0.25"), Some(qr(1, 4)));
    assert_eq!(parse_q("-1.5"), Some(qr(-3, 2)));
    assert_eq!(parse_q("3/0"), None);
}
