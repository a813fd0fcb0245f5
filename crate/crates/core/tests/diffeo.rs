use ucalc_core::balls::{Ball, ClopenRegion};
use ucalc_core::calculus::FunctionModel;
use ucalc_core::diffeo::*;
use ucalc_core::poly::{Poly, PolyMap};
use ucalc_core::suites::Gen;
use proptest::prelude::*;
use ucalc_core::{Error, PadicContext, PadicScalar, PadicVector, Val};

fn ctx3() -> PadicContext {
    PadicContext::new(3, 12).unwrap()
}

fn upoly(c: &PadicContext, coefs: &[i64]) -> PolyMap {
    let terms = coefs.iter().enumerate().filter(|(_, &a)| a != 0).map(|(i, &a)| (vec![i as u32], PadicScalar::from_i64(c, a)));
    PolyMap::new(1, vec![Poly::from_terms(1, terms).unwrap()])
}

fn endo(c: &PadicContext, coefs: &[i64]) -> BallEndo {
    let b = Ball::unit(3, 1);
    BallEndo::new(b, FunctionModel::polynomial(c, upoly(c, coefs)).unwrap()).unwrap()
}

#[test]
fn certify_examples() {
    let c = ctx3();
    assert_eq!(certify_omega(&endo(&c, &[]), 3).unwrap().method, OmegaMethod::CoefficientBound);
    assert!(certify_omega(&endo(&c, &[0, 0, 3]), 3).is_ok());
    let e = endo(&c, &[0, 1]);
    let rej = try_certify_omega(&e, 3).unwrap_err();
    let w = rej.witness.unwrap();
    assert!(w.confirms(&e).unwrap());
    // unit translation is rejected
    let e = endo(&c, &[1]);
    let rej = try_certify_omega(&e, 3).unwrap_err();
    assert!(rej.witness.unwrap().confirms(&e).unwrap());
}

#[test]
fn inversion_and_induced() {
    let c = ctx3();
    let g = CertifiedDiffeo::new(endo(&c, &[0, 0, 3]), 3).unwrap();
    let y = PadicVector::from_i64s(&c, &[1]);
    let (x, n) = invert_at(&g, &y, 12).unwrap();
    assert!(g.gamma(&x).unwrap().diff_valuation(&y) >= Val::Fin(12));
    assert!(n <= iteration_cap(3, 12));

    let t = CertifiedDiffeo::new(endo(&c, &[3]), 3).unwrap();
    let (x, _) = invert_at(&t, &y, 12).unwrap();
    assert_eq!(x, PadicVector::from_i64s(&c, &[-2]));
    let perm = induced_level_map(&t, 2).unwrap();
    assert_eq!(perm, (0..9).map(|i| (i + 3) % 9).collect::<Vec<_>>());
    assert_eq!(induced_level_map(&t, 1).unwrap(), vec![0, 1, 2]);

    let tt = compose_diffeos(&t, &t).unwrap();
    assert_eq!(tt.gamma(&y).unwrap(), PadicVector::from_i64s(&c, &[7]));
    let gt = compose_diffeos(&g, &t).unwrap();
    for m in 1..=3 {
        assert_eq!(induced_level_map(&gt, m).unwrap(), perm_compose(&induced_level_map(&g, m).unwrap(), &induced_level_map(&t, m).unwrap()));
    }
}

#[test]
fn endo_monoid() {
    let c = ctx3();
    let region = |shift: i64| {
    // Z_3 minus (2 + 3Z_3) plus the small ball 2 + 9Z_3
    let u = ClopenRegion::from_balls(3, 1, vec![Ball::new(3, &[0], 1), Ball::new(3, &[1], 1), Ball::new(3, &[2], 2)]);
    let mut pieces = Vec::new();
    for b in u.balls() {
        let map = if b.center()[0] == 0 { upoly(&c, &[shift]) } else { upoly(&c, &[]) };
        pieces.push(ucalc_core::calculus::Piece { ball: b.clone(), map });
    }
    CompactlySupportedEndo::new(FunctionModel::new(&c, pieces).unwrap()).unwrap()
    };
    let a = region(3);
    let aa = endo_compose(&a, &a).unwrap();
    assert_eq!(aa.sigma().eval(&PadicVector::from_i64s(&c, &[0])).unwrap(), PadicVector::from_i64s(&c, &[6]));
    assert_eq!(aa.sigma().eval(&PadicVector::from_i64s(&c, &[1])).unwrap(), PadicVector::from_i64s(&c, &[0]));
    // displacement 3 on a level-1 ball is too large for the per-ball bound
    let dec = diffc_membership(&a).unwrap();
    assert!(!dec.accepted);
    let (endo, rej) = dec.rejection.unwrap();
    assert!(rej.witness.unwrap().confirms(&endo).unwrap());
    let b = region(9);
    let dec = diffc_membership(&endo_compose(&b, &b).unwrap()).unwrap();
    assert!(dec.accepted);
    assert_eq!(dec.certificates.len(), 1);
}

fn residue(c: &PadicContext, z: &[u64]) -> PadicVector {
    PadicVector(z.iter().map(|&x| PadicScalar::from_i64(c, x as i64)).collect())
}

/// Cycle lengths of a permutation, sorted.
fn cycle_type(perm: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; perm.len()];
    let mut out = Vec::new();
    for s in 0..perm.len() {
        let mut len = 0;
        let mut i = s;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len > 0 {
            out.push(len);
        }
    }
    out.sort();
    out
}

#[test]
fn identity_behaves_trivially() {
    let c = ctx3();
    let id = CertifiedDiffeo::identity(&c, Ball::unit(3, 1)).unwrap();
    assert!(id.is_identity());
    let y = PadicVector::from_i64s(&c, &[5]);
    assert_eq!(invert_at(&id, &y, 12).unwrap(), (y.clone(), 1));
    for m in 1..=3 {
        assert_eq!(induced_level_map(&id, m).unwrap(), perm_identity(3usize.pow(m)));
    }
    let g = CertifiedDiffeo::new(endo(&c, &[0, 0, 3]), 3).unwrap();
    assert_eq!(compose_diffeos(&g, &id).unwrap().endo(), g.endo());
    assert_eq!(compose_diffeos(&id, &g).unwrap().endo(), g.endo());
    // displacement vanishes mod 3
    assert_eq!(induced_level_map(&g, 1).unwrap(), vec![0, 1, 2]);
}

#[test]
fn translation_by_three_has_three_cycles() {
    let c = ctx3();
    let t = CertifiedDiffeo::new(endo(&c, &[3]), 3).unwrap();
    assert_eq!(cycle_type(&induced_level_map(&t, 2).unwrap()), vec![3, 3, 3]);
}

fn v3(mut n: i128) -> Val {
    if n == 0 {
        return Val::Inf;
    }
    let mut v = 0;
    while n % 3 == 0 {
        n /= 3;
        v += 1;
    }
    Val::Fin(v)
}

#[test]
fn isometry_of_x_plus_3x2() {
    let c = ctx3();
    let g = CertifiedDiffeo::new(endo(&c, &[0, 0, 3]), 3).unwrap();
    let mut gen = Gen::new(&c, 7, 0);
    let ints: Vec<(i64, i64)> = (0..1000)
        .map(|i| {
            let x = gen.int(-20000, 20000);
            // some pairs share many digits
            let y = if i % 4 == 0 { x + 3i64.pow(gen.int(0, 8) as u32) * gen.int(-2, 2) } else { gen.int(-20000, 20000) };
            (x, y)
        })
        .collect();
    let pairs: Vec<_> = ints.iter().map(|&(x, y)| (PadicVector::from_i64s(&c, &[x]), PadicVector::from_i64s(&c, &[y]))).collect();
    let rep = isometry_check(&g, &pairs).unwrap();
    assert_eq!(rep.checked, 1000);
    assert!(rep.passed(), "{:?}", rep.violations.first());
    // integer oracle for γ(x) = x + 3x^2
    let gamma = |x: i64| x as i128 + 3 * (x as i128) * (x as i128);
    for &(x, y) in &ints {
        assert_eq!(v3(gamma(x) - gamma(y)), v3((x - y) as i128), "{x} {y}");
    }
}

#[test]
fn unit_translation_is_not_certified() {
    let c = ctx3();
    assert!(matches!(CertifiedDiffeo::new(endo(&c, &[1]), 3), Err(Error::NotCertified(_))));
}

/// Every residue of the ambient ball at level k + 1 lands in `b` exactly when
/// it lies in the claimed preimage.
fn preimage_law_holds(g: &CertifiedDiffeo, b: &Ball) -> bool {
    let c = g.ctx();
    let pre = preimage_ball(g, b).unwrap();
    if pre.level() != b.level() {
        return false;
    }
    let m = b.level() + 1;
    ClopenRegion::ball(g.ball().clone()).level_points(m).iter().all(|z| {
        let x = residue(c, z);
        let image_in = b.contains_point(&g.gamma_mod(&x, m as i64).unwrap()).unwrap();
        image_in == pre.contains_residue(z)
    })
}

#[test]
fn ball_preimage_law() {
    let c = ctx3();
    let g = CertifiedDiffeo::new(endo(&c, &[3, 0, 3, 9]), 3).unwrap();
    for k in 1..=3 {
        for b in Ball::unit(3, 1).descendants(k) {
            assert!(preimage_law_holds(&g, &b), "{b}");
        }
    }
}

#[test]
fn endo_monoid_laws() {
    let c = ctx3();
    let u = ClopenRegion::from_balls(3, 1, vec![Ball::new(3, &[0], 1), Ball::new(3, &[1], 1), Ball::new(3, &[2], 2)]);
    let make = |coefs: [&[i64]; 3]| {
        let pieces = u.balls().iter().zip(coefs).map(|(b, cs)| ucalc_core::calculus::Piece { ball: b.clone(), map: upoly(&c, cs) }).collect();
        CompactlySupportedEndo::new(FunctionModel::new(&c, pieces).unwrap()).unwrap()
    };
    let id = CompactlySupportedEndo::identity(&c, &u).unwrap();
    let a = make([&[9, 0, 9], &[], &[27]]);
    let b = make([&[0, 3], &[3], &[]]);
    let e = make([&[], &[9, 9], &[0, 0, 27]]);
    let pts = u.level_points(3);
    let same = |x: &CompactlySupportedEndo, y: &CompactlySupportedEndo| {
        pts.iter().all(|z| {
            let v = residue(&c, z);
            x.gamma(&v).unwrap().agrees(&y.gamma(&v).unwrap())
        })
    };
    assert!(same(&endo_compose(&a, &id).unwrap(), &a));
    assert!(same(&endo_compose(&id, &a).unwrap(), &a));
    let left = endo_compose(&endo_compose(&a, &b).unwrap(), &e).unwrap();
    let right = endo_compose(&a, &endo_compose(&b, &e).unwrap()).unwrap();
    assert!(same(&left, &right));
    // pointwise oracle: γ_a(γ_b(x))
    for z in &pts {
        let v = residue(&c, z);
        assert!(endo_compose(&a, &b).unwrap().gamma(&v).unwrap().agrees(&a.gamma(&b.gamma(&v).unwrap()).unwrap()));
    }
}

#[test]
fn diffc_decisions() {
    let c = ctx3();
    let u = ClopenRegion::whole(3, 1);
    let dec = diffc_membership(&CompactlySupportedEndo::identity(&c, &u).unwrap()).unwrap();
    assert!(dec.accepted && dec.certificates.is_empty());

    // σ = 9 + 9x on 3Z_3 and 0 elsewhere: valuation ≥ v_min + 1 on a level-1 ball
    let pieces = Ball::unit(3, 1)
        .children()
        .into_iter()
        .map(|b| {
            let map = if b.center()[0] == 0 { upoly(&c, &[9, 9]) } else { upoly(&c, &[]) };
            ucalc_core::calculus::Piece { ball: b, map }
        })
        .collect();
    let a = CompactlySupportedEndo::new(FunctionModel::new(&c, pieces).unwrap()).unwrap();
    let dec = diffc_membership(&a).unwrap();
    assert!(dec.accepted);
    assert_eq!(a.support(), &ClopenRegion::ball(Ball::new(3, &[0], 1)));
    let y = PadicVector::from_i64s(&c, &[3]);
    let x = dec.invert_at(&y, 12).unwrap();
    assert!(a.gamma(&x).unwrap().diff_valuation(&y) >= Val::Fin(12));
    assert_eq!(dec.invert_at(&PadicVector::from_i64s(&c, &[1]), 12).unwrap(), PadicVector::from_i64s(&c, &[1]));

    // σ = 1 + 3x on the whole of Z_3 moves points by a unit
    let a = CompactlySupportedEndo::new(FunctionModel::on_region(&c, &u, upoly(&c, &[1, 3])).unwrap()).unwrap();
    let dec = diffc_membership(&a).unwrap();
    assert!(!dec.accepted);
    assert!(matches!(dec.invert_at(&y, 12), Err(Error::NotCertified(_))));
    let (endo, rej) = dec.rejection.unwrap();
    assert!(rej.witness.unwrap().confirms(&endo).unwrap());
}

fn random_diffeo(p: u32, d: usize, seed: u64) -> (PadicContext, CertifiedDiffeo) {
    let c = PadicContext::new(p, 12).unwrap();
    let mut gen = Gen::new(&c, seed, 0);
    let g = gen.diffeo(&Ball::unit(p, d), 3);
    (c, g)
}

fn setting() -> impl Strategy<Value = (u32, usize)> {
    prop_oneof![Just((2u32, 1usize)), Just((3, 1)), Just((5, 1)), Just((2, 2)), Just((3, 2))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn certified_maps_are_isometries((p, d) in setting(), seed in any::<u64>()) {
        let (c, g) = random_diffeo(p, d, seed);
        let mut gen = Gen::new(&c, seed, 1);
        let b = g.ball().clone();
        let pairs: Vec<_> = (0..200).map(|_| (gen.point_in(&b), gen.point_in(&b))).collect();
        let rep = isometry_check(&g, &pairs).unwrap();
        prop_assert!(rep.passed(), "{:?}", rep.violations.first());
    }

    #[test]
    fn inversion_contract((p, d) in setting(), seed in any::<u64>()) {
        let (c, g) = random_diffeo(p, d, seed);
        let mut gen = Gen::new(&c, seed, 1);
        for _ in 0..20 {
            let y = gen.point_in(g.ball());
            let (x, n) = invert_at(&g, &y, 12).unwrap();
            prop_assert!(n <= iteration_cap(p, 12));
            prop_assert!(g.gamma_mod(&x, 12).unwrap().diff_valuation(&y) >= Val::Fin(12));
        }
    }

    #[test]
    fn induced_maps_are_homomorphic((p, d) in setting(), seed in any::<u64>()) {
        let (_, g1) = random_diffeo(p, d, seed);
        let (_, g2) = random_diffeo(p, d, seed.wrapping_add(1));
        let comp = compose_diffeos(&g1, &g2).unwrap();
        let top = if p.pow(d as u32 * 3) > 200 { 2 } else { 3 };
        for m in 1..=top {
            let (a, b) = (induced_level_map(&g1, m).unwrap(), induced_level_map(&g2, m).unwrap());
            check_permutation(&a).unwrap();
            prop_assert_eq!(induced_level_map(&comp, m).unwrap(), perm_compose(&a, &b));
        }
    }

    #[test]
    fn preimages_are_balls((p, d) in setting(), seed in any::<u64>(), k in 1u32..3) {
        let (c, g) = random_diffeo(p, d, seed);
        let mut gen = Gen::new(&c, seed, 2);
        let b = gen.residue_ball(d, k);
        prop_assert!(preimage_law_holds(&g, &b));
    }
}
