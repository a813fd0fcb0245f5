use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

use ucalc_core::json::{scalar_from_json, scalar_to_json, Located};
use ucalc_core::{Error, PadicContext, PadicScalar, PadicVector, Val};

fn ctx(p: u32, n: u32) -> PadicContext {
    PadicContext::new(p, n).unwrap()
}

/// True when `x` is consistent with the rational integer `n`: same valuation
/// and same unit digits as far as `x` knows them.
fn matches_integer(x: &PadicScalar, n: &BigInt) -> bool {
    let p = BigInt::from(x.ctx().p());
    if n.is_zero() {
        return x.is_zero();
    }
    let (mut u, mut v) = (n.clone(), 0i64);
    while u.is_multiple_of(&p) {
        u /= &p;
        v += 1;
    }
    if x.valuation() != Val::Fin(v) {
        return false;
    }
    let r = x.rel_prec().unwrap_or(x.ctx().prec());
    let m = BigInt::from(x.ctx().p_pow(r));
    let ours = BigInt::from(x.unit().unwrap());
    u.mod_floor(&m) == ours.mod_floor(&m)
}

#[test]
fn context_rejects_composites() {
    assert!(matches!(PadicContext::new(4, 12), Err(Error::Invalid(_))));
    assert!(PadicContext::new(3, 0).is_err());
}

#[test]
fn add_examples() {
    let c = ctx(3, 12);
    let one = PadicScalar::from_i64(&c, 1);
    let two = PadicScalar::from_i64(&c, 2);
    let three = one.add(&two).unwrap();
    assert_eq!(three.valuation(), Val::Fin(1));
    assert_eq!(three.unit(), Some(BigUint::one()));
    assert_eq!(two.add(&PadicScalar::zero(&c)).unwrap(), two);

    let c = ctx(2, 6);
    let s = PadicScalar::from_i64(&c, 11).add(&PadicScalar::from_i64(&c, 21)).unwrap();
    assert_eq!(s.valuation(), Val::Fin(5));
    assert_eq!(s.unit(), Some(BigUint::one()));
    assert!(matches_integer(&s, &BigInt::from(32)));
}

#[test]
fn mul_examples() {
    let c = ctx(3, 12);
    let third = PadicScalar::p_power(&c, -1);
    let nine = PadicScalar::from_i64(&c, 9);
    let r = third.mul(&nine);
    assert_eq!((r.valuation(), r.unit()), (Val::Fin(1), Some(BigUint::one())));
    assert_eq!(nine.mul(&PadicScalar::one(&c)), nine);

    let c = ctx(5, 4);
    let r = PadicScalar::from_i64(&c, 7).mul(&PadicScalar::from_i64(&c, 13));
    assert_eq!((r.valuation(), r.unit()), (Val::Fin(0), Some(BigUint::from(91u32))));
}

#[test]
fn inv_examples() {
    let c = ctx(3, 12);
    let r = PadicScalar::from_i64(&c, 3).inv().unwrap();
    assert_eq!((r.valuation(), r.unit()), (Val::Fin(-1), Some(BigUint::one())));
    assert_eq!(PadicScalar::one(&c).inv().unwrap(), PadicScalar::one(&c));
    assert!(matches!(PadicScalar::zero(&c).inv(), Err(Error::DivisionByZero)));

    // extended Euclid modulo 5^4
    let c = ctx(5, 4);
    let r = PadicScalar::from_i64(&c, 2).inv().unwrap();
    let m = BigInt::from(625);
    let oracle = BigInt::from(2).extended_gcd(&m).x.mod_floor(&m);
    assert_eq!(BigInt::from(r.unit().unwrap()).mod_floor(&m), oracle);
    assert_eq!(r.digits()[0], 3);
}

#[test]
fn cancellation_of_inexact_operands() {
    let c = ctx(3, 4);
    let a = PadicScalar::from_digits(&c, 0, &[1, 2, 0, 1]).unwrap();
    assert!(matches!(a.sub(&a), Err(Error::PrecisionLoss)));
    let e = PadicScalar::from_i64(&c, 5);
    assert_eq!(e.sub(&e).unwrap(), PadicScalar::zero(&c));
}

#[test]
fn norm_examples() {
    let c = ctx(3, 12);
    assert_eq!(PadicVector::from_i64s(&c, &[1, 3]).norm_max(), Val::Fin(0));
    assert_eq!(PadicVector::zeros(&c, 3).norm_max(), Val::Inf);
    let x = PadicVector(vec![PadicScalar::from_i64(&c, 9), PadicScalar::from_ratio(&c, 1, 3).unwrap()]);
    assert_eq!(x.norm_max(), Val::Fin(-1));
}

#[test]
fn json_shape() {
    let c = ctx(3, 4);
    let v = scalar_to_json(&PadicScalar::from_i64(&c, 15));
    assert_eq!(v["v"], 1);
    assert_eq!(v["digits"], serde_json::json!([2, 1, 0, 0]));
    let z = scalar_to_json(&PadicScalar::zero(&c));
    assert_eq!(z["v"], "inf");
}

/// Integers, exact or rounded, and inexact values with a random number of digits.
fn scalar(p: u32, n: u32) -> impl Strategy<Value = PadicScalar> {
    let c = ctx(p, n);
    let c2 = c.clone();
    prop_oneof![
        (any::<i64>(), -3i64..4).prop_map(move |(x, s)| PadicScalar::from_i64(&c, x).shift(s)),
        (1u32..=n, -4i64..6, any::<u64>()).prop_map(move |(r, v, u)| {
            let m = c2.p_pow(r);
            let mut u = BigUint::from(u) % &m;
            if (&u % p).is_zero() {
                u += 1u32;
            }
            PadicScalar::from_parts(&c2, v, r, &u).unwrap()
        }),
    ]
}

fn prime() -> impl Strategy<Value = u32> {
    prop_oneof![Just(2u32), Just(3), Just(5)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn ultrametric_sum((a, b) in prime().prop_flat_map(|p| (scalar(p, 12), scalar(p, 12)))) {
        if let Ok(s) = a.add(&b) {
            let (va, vb) = (a.valuation(), b.valuation());
            prop_assert!(s.valuation() >= va.min(vb));
            if va != vb {
                prop_assert_eq!(s.valuation(), va.min(vb));
            }
        } else {
            // only a total cancellation of inexact operands may fail
            prop_assert!(!a.is_exact() || !b.is_exact());
            prop_assert_eq!(a.valuation(), b.valuation());
        }
    }

    #[test]
    fn multiplicative_norm((a, b) in prime().prop_flat_map(|p| (scalar(p, 12), scalar(p, 12)))) {
        let prod = a.mul(&b);
        match (a.valuation(), b.valuation()) {
            (Val::Fin(x), Val::Fin(y)) => prop_assert_eq!(prod.valuation(), Val::Fin(x + y)),
            _ => prop_assert!(prod.is_zero()),
        }
    }

    #[test]
    fn inverse_is_exact(a in prime().prop_flat_map(|p| scalar(p, 12))) {
        prop_assume!(!a.is_zero());
        let i = a.inv().unwrap();
        prop_assert_eq!(i.valuation(), Val::Fin(-a.valuation().fin().unwrap()));
        prop_assert!(a.mul(&i).agrees(&PadicScalar::one(a.ctx())));
    }

    #[test]
    fn integer_arithmetic_oracle(p in prime(), x in -(1i64 << 40)..(1i64 << 40), y in -(1i64 << 40)..(1i64 << 40)) {
        let c = ctx(p, 12);
        let (a, b) = (PadicScalar::from_i64(&c, x), PadicScalar::from_i64(&c, y));
        let (bx, by) = (BigInt::from(x), BigInt::from(y));
        prop_assert!(matches_integer(&a.mul(&b), &(&bx * &by)));
        if let Ok(s) = a.add(&b) {
            prop_assert!(matches_integer(&s, &(&bx + &by)));
        }
        if let Ok(s) = a.sub(&b) {
            prop_assert!(matches_integer(&s, &(&bx - &by)));
        }
        // small integers stay exact
        if bx.abs() < BigInt::from(c.p_pow(12)) {
            prop_assert!(a.is_exact());
        }
    }

    #[test]
    fn vector_norm_laws(p in prime(), xs in prop::collection::vec(any::<i32>(), 3), ys in prop::collection::vec(any::<i32>(), 3), t in any::<i32>()) {
        let c = ctx(p, 12);
        let x = PadicVector(xs.iter().map(|&v| PadicScalar::from_i64(&c, v as i64)).collect());
        let y = PadicVector(ys.iter().map(|&v| PadicScalar::from_i64(&c, v as i64)).collect());
        let t = PadicScalar::from_i64(&c, t as i64);
        if let Ok(s) = x.add(&y) {
            prop_assert!(s.norm_max() >= x.norm_max().min(y.norm_max()));
        }
        let scaled = x.scale(&t).norm_max();
        match (t.valuation(), x.norm_max()) {
            (Val::Fin(a), Val::Fin(b)) => prop_assert_eq!(scaled, Val::Fin(a + b)),
            _ => prop_assert_eq!(scaled, Val::Inf),
        }
    }

    #[test]
    fn json_roundtrip(a in prime().prop_flat_map(|p| scalar(p, 12))) {
        let v = scalar_to_json(&a);
        let back = scalar_from_json(a.ctx(), Located::root(&v).node()).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(scalar_to_json(&back), v);
    }
}
